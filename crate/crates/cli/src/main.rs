use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use dwsel::dwfamily::{
    critical_fields, frame_m0, profile_m0, propagation_sign, stability_threshold, standing_field_h,
};
use dwsel::evans::{suggested_weight, winding_number, EvansContour, EvansProblem, MatrixSource};
use dwsel::model::{classify_regime, essential_spectrum_curve};
use dwsel::sim::{pushed_pulled_scan, run, Grid, InitialData, RunResult, SimConfig, SHARP_WIDTH};
use dwsel::spectral::{absolute_spectrum, double_roots, llgs_coefficients, spreading_prediction};
use dwsel::{Error, Frame, MaterialParams, Orientation, Pole, Regime};

#[derive(Parser)]
#[command(name = "dwsel", version, about = "Domain-wall selection in the LLG-Slonczewski equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Regime map on an (h, ccp) grid (CSV).
    Regime(RegimeArgs),
    /// Weighted essential and absolute spectra of a rest state.
    Spectrum(SpectrumArgs),
    /// Linear spreading speed and frequency (JSON).
    Spreading(SpreadingArgs),
    /// Explicit wall: speed, frequency, critical fields (JSON), optional profile CSV.
    Dw(DwArgs),
    /// Standing-field heuristic and propagation direction of bistable walls (JSON).
    Standing(StandingArgs),
    /// Frozen simulation (JSON summary, optional history and snapshot CSV).
    Simulate(SimulateArgs),
    /// Pushed/pulled scan over h (CSV).
    Scan(ScanArgs),
    /// Evans-function winding number along a semicircular contour (JSON).
    Evans(EvansArgs),
    /// Plot data for one figure, with a manifest.
    Reproduce(ReproduceArgs),
}

#[derive(Args, Clone, Copy, Debug)]
struct ParamArgs {
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long, default_value_t = 0.75, allow_hyphen_values = true)]
    beta: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    mu: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    ccp: f64,
}

#[derive(Args, Clone, Copy, Debug)]
struct FieldArg {
    #[arg(long, allow_hyphen_values = true)]
    h: f64,
}

impl ParamArgs {
    fn at(&self, h: f64) -> dwsel::Result<MaterialParams> {
        MaterialParams::new(self.alpha, self.beta, self.mu, self.ccp, h)
    }
}

#[derive(Args)]
struct OutArg {
    /// Output file; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RegimeArgs {
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long, default_value_t = 0.75, allow_hyphen_values = true)]
    beta: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    mu: f64,
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    h_min: f64,
    #[arg(long, default_value_t = 8.0, allow_hyphen_values = true)]
    h_max: f64,
    #[arg(long, default_value_t = 201)]
    h_steps: usize,
    #[arg(long, default_value_t = -0.9, allow_hyphen_values = true)]
    ccp_min: f64,
    #[arg(long, default_value_t = 0.9, allow_hyphen_values = true)]
    ccp_max: f64,
    #[arg(long, default_value_t = 181)]
    ccp_steps: usize,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PoleArg {
    Plus,
    Minus,
}

impl From<PoleArg> for Pole {
    fn from(p: PoleArg) -> Pole {
        match p {
            PoleArg::Plus => Pole::Plus,
            PoleArg::Minus => Pole::Minus,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    field: FieldArg,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    s: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    omega: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    eta: f64,
    /// Rest state whose linearization is used.
    #[arg(long, value_enum, default_value_t = PoleArg::Minus)]
    pole: PoleArg,
    #[arg(long, default_value_t = 10.0)]
    k_max: f64,
    #[arg(long, default_value_t = 201)]
    k_steps: usize,
    /// CSV of curves, or JSON of the double roots.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct SpreadingArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    field: FieldArg,
}

#[derive(Args)]
struct DwArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    field: FieldArg,
    /// Also write the profile (xi, m1, m2, m3) to this CSV file.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long, default_value_t = 10.0)]
    half_width: f64,
    #[arg(long, default_value_t = 401)]
    points: usize,
}

#[derive(Args)]
struct StandingArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    field: FieldArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InitialArg {
    Step,
    Bump,
}

#[derive(Args, Clone, Copy, Debug)]
struct ResolutionArgs {
    /// Domain half-width L.
    #[arg(long = "L", default_value_t = 50.0)]
    half_width: f64,
    #[arg(long, default_value_t = 1e-2)]
    dx: f64,
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
}

#[derive(Args)]
struct SimulateArgs {
    /// SimConfig JSON; overrides all other simulation flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, allow_hyphen_values = true)]
    h: Option<f64>,
    #[command(flatten)]
    res: ResolutionArgs,
    #[arg(long, default_value_t = 100.0)]
    t_final: f64,
    #[arg(long, value_enum, default_value_t = InitialArg::Step)]
    initial: InitialArg,
    /// Step-wall orientation: +e3 on the left unless set.
    #[arg(long)]
    minus_left: bool,
    /// Step-wall width; defaults to 1/sqrt(-mu).
    #[arg(long)]
    step_width: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    amplitude: f64,
    #[arg(long, default_value_t = 2.0)]
    width: f64,
    #[arg(long, allow_hyphen_values = true)]
    center: Option<f64>,
    #[arg(long, default_value_t = 0.2)]
    window: f64,
    #[arg(long)]
    no_extend: bool,
    /// CSV of (t, s, omega, wall_position).
    #[arg(long)]
    history: Option<PathBuf>,
    /// CSV of the final state (xi, m1, m2, m3).
    #[arg(long)]
    snapshot: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Comma-separated field values.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    hs: Vec<f64>,
    #[command(flatten)]
    res: ResolutionArgs,
    #[arg(long, default_value_t = 100.0)]
    t_final: f64,
    #[arg(long, value_enum, default_value_t = InitialArg::Step)]
    initial: InitialArg,
    /// Step-wall width; the sharp default keeps pulled fronts from starting
    /// on a tail shallower than their leading edge.
    #[arg(long, default_value_t = SHARP_WIDTH)]
    step_width: f64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SourceArg {
    Linearized,
    Oracle,
    Tabulated,
}

impl From<SourceArg> for MatrixSource {
    fn from(s: SourceArg) -> MatrixSource {
        match s {
            SourceArg::Linearized => MatrixSource::Linearized,
            SourceArg::Oracle => MatrixSource::Oracle,
            SourceArg::Tabulated => MatrixSource::Tabulated,
        }
    }
}

#[derive(Args)]
struct EvansArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    field: FieldArg,
    /// Exponential weight; defaults to -alpha s / 2.
    #[arg(long, allow_hyphen_values = true)]
    eta: Option<f64>,
    #[command(flatten)]
    contour: ContourArgs,
    #[arg(long, value_enum, default_value_t = SourceArg::Linearized)]
    source: SourceArg,
    /// CSV of (re_lambda, im_lambda, re_e, im_e) along the contour.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Clone, Copy, Debug, Serialize, Deserialize)]
struct ContourArgs {
    #[arg(long, default_value_t = 100.0)]
    radius: f64,
    #[arg(long, default_value_t = 0.1)]
    inner_radius: f64,
    #[arg(long, default_value_t = 1500)]
    mesh: usize,
    /// Integration half-width.
    #[arg(long = "L", default_value_t = 100.0)]
    half_width: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
enum Figure {
    Fig2,
    Fig3a,
    Fig4,
    Fig5,
    Fig7,
    Fig8,
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(value_enum, required_unless_present = "manifest")]
    figure: Option<Figure>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Coarse resolutions for a fast preview.
    #[arg(long)]
    quick: bool,
    /// Re-run the settings recorded in a manifest.
    #[arg(long, conflicts_with = "figure")]
    manifest: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            report(&json!({"error": "UsageError", "message": e.kind().to_string(), "numerical": false}));
            return ExitCode::from(1);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            report(&json!({"error": e.kind(), "message": e.to_string(), "numerical": e.is_numerical()}));
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
        Err(Failure::Io(msg)) => {
            report(&json!({"error": "IoError", "message": msg, "numerical": false}));
            ExitCode::from(1)
        }
    }
}

fn report(v: &serde_json::Value) {
    eprintln!("{v}");
}

enum Failure {
    Lib(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Out<T = ()> = std::result::Result<T, Failure>;

fn dispatch(cmd: Command) -> Out {
    match cmd {
        Command::Regime(a) => cmd_regime(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Spreading(a) => cmd_spreading(a),
        Command::Dw(a) => cmd_dw(a),
        Command::Standing(a) => cmd_standing(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Scan(a) => cmd_scan(a),
        Command::Evans(a) => cmd_evans(a),
        Command::Reproduce(a) => cmd_reproduce(a),
    }
}

fn sink(path: &Option<PathBuf>) -> Out<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(path: &Option<PathBuf>, v: &T) -> Out {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, v)?;
    writeln!(w)?;
    Ok(())
}

fn write_csv<T: Serialize>(w: Box<dyn Write>, rows: &[T]) -> Out {
    let mut c = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    for r in rows {
        c.serialize(r)?;
    }
    c.flush()?;
    Ok(())
}

fn csv_to(path: &Path, rows: &[impl Serialize]) -> Out {
    write_csv(Box::new(io::BufWriter::new(fs::File::create(path)?)), rows)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

#[derive(Serialize)]
struct RegimeRow {
    h: f64,
    ccp: f64,
    regime: u8,
    marginal: u8,
}

fn regime_rows(a: &RegimeArgs) -> dwsel::Result<Vec<RegimeRow>> {
    if a.h_steps == 0 || a.ccp_steps == 0 {
        return Err(Error::InvalidParams("grid sizes must be positive".into()));
    }
    let mut rows = Vec::with_capacity(a.h_steps * a.ccp_steps);
    for ccp in linspace(a.ccp_min, a.ccp_max, a.ccp_steps) {
        for h in linspace(a.h_min, a.h_max, a.h_steps) {
            let p = MaterialParams::for_regime_plot(a.alpha, a.beta, a.mu, ccp, h)?;
            let info = classify_regime(&p);
            rows.push(RegimeRow { h, ccp, regime: info.regime.code(), marginal: info.marginal as u8 });
        }
    }
    Ok(rows)
}

fn cmd_regime(a: RegimeArgs) -> Out {
    let rows = regime_rows(&a)?;
    write_csv(sink(&a.out.output)?, &rows)
}

#[derive(Serialize)]
struct SpectrumRow {
    curve: &'static str,
    eta: f64,
    k_or_r: f64,
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct DoubleRootRow {
    lambda_re: f64,
    lambda_im: f64,
    nu_re: f64,
    nu_im: f64,
    simple: bool,
    pinched: bool,
}

fn spectrum_rows(p: &MaterialParams, f: Frame, pole: Pole, eta: f64, k_max: f64, n: usize) -> Vec<SpectrumRow> {
    let ks = linspace(-k_max, k_max, n);
    let mut rows: Vec<SpectrumRow> = essential_spectrum_curve(p, f, pole, eta, &ks)
        .into_iter()
        .map(|pt| SpectrumRow { curve: "ess", eta, k_or_r: pt.k, re: pt.lambda.re, im: pt.lambda.im })
        .collect();
    let (hp, hm) = absolute_spectrum(&llgs_coefficients(p, f, pole));
    for line in [hp, hm] {
        for r in linspace(0.0, k_max * k_max, n) {
            let z = line.point(r);
            rows.push(SpectrumRow { curve: "abs", eta, k_or_r: r, re: z.re, im: z.im });
        }
    }
    rows
}

fn cmd_spectrum(a: SpectrumArgs) -> Out {
    let p = a.params.at(a.field.h)?;
    let f = Frame::new(a.s, a.omega);
    let pole: Pole = a.pole.into();
    if a.k_steps < 2 || !(a.k_max > 0.0) {
        return Err(Error::InvalidParams("need k_steps >= 2 and k_max > 0".into()).into());
    }
    match a.format {
        Format::Csv => write_csv(sink(&a.out.output)?, &spectrum_rows(&p, f, pole, a.eta, a.k_max, a.k_steps)),
        Format::Json => {
            let rows: Vec<DoubleRootRow> = double_roots(&llgs_coefficients(&p, f, pole))
                .into_iter()
                .map(|d| DoubleRootRow {
                    lambda_re: d.lambda.re,
                    lambda_im: d.lambda.im,
                    nu_re: d.nu.re,
                    nu_im: d.nu.im,
                    simple: d.simple,
                    pinched: d.pinched,
                })
                .collect();
            write_json(&a.out.output, &rows)
        }
    }
}

/// The unstable pole ahead of a monostable front.
fn invaded_pole(p: &MaterialParams) -> dwsel::Result<Pole> {
    match classify_regime(p).regime {
        Regime::MonostablePlus => Ok(Pole::Minus),
        Regime::MonostableMinus => Ok(Pole::Plus),
        _ => Err(Error::NotMonostable),
    }
}

fn cmd_spreading(a: SpreadingArgs) -> Out {
    let p = a.params.at(a.field.h)?;
    let pole = invaded_pole(&p)?;
    let pred = spreading_prediction(&p, pole)?;
    let pole_name = match pole {
        Pole::Plus => "plus",
        Pole::Minus => "minus",
    };
    write_json(
        &None,
        &json!({"s_lin": pred.s_lin, "omega_lin": pred.omega_lin, "marginal": pred.marginal, "invaded_pole": pole_name}),
    )
}

fn cmd_dw(a: DwArgs) -> Out {
    let p = a.params.at(a.field.h)?;
    let f = frame_m0(&p, Orientation::PlusLeft)?;
    let c = critical_fields(&p)?;
    write_json(
        &None,
        &json!({
            "s": f.s,
            "omega": f.omega,
            "h_s_plus": c.h_s_plus,
            "h_s_minus": c.h_s_minus,
            "h_omega": c.h_omega,
            "stability_bound": stability_threshold(&p),
            "H": standing_field_h(&p),
        }),
    )?;
    if let Some(path) = &a.profile {
        if a.points < 2 || !(a.half_width > 0.0) {
            return Err(Error::InvalidParams("need points >= 2 and half_width > 0".into()).into());
        }
        let rows: Vec<[f64; 4]> = linspace(-a.half_width, a.half_width, a.points)
            .into_iter()
            .map(|x| {
                let m = profile_m0(p.mu, 1.0, x);
                [x, m[0], m[1], m[2]]
            })
            .collect();
        profile_csv(path, &rows)?;
    }
    Ok(())
}

fn profile_csv(path: &Path, rows: &[[f64; 4]]) -> Out {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(io::BufWriter::new(fs::File::create(path)?));
    w.write_record(["xi", "m1", "m2", "m3"])?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_standing(a: StandingArgs) -> Out {
    let p = a.params.at(a.field.h)?;
    let info = classify_regime(&p);
    let signs = if info.regime == Regime::Bistable {
        json!({
            "plus_left": propagation_sign(&p, Orientation::PlusLeft)?,
            "minus_left": propagation_sign(&p, Orientation::MinusLeft)?,
        })
    } else {
        serde_json::Value::Null
    };
    write_json(
        &None,
        &json!({
            "H": standing_field_h(&p),
            "regime": info.regime.code(),
            "h_minus_standing": p.h - standing_field_h(&p),
            "propagation_sign": signs,
        }),
    )
}

fn initial_data(
    kind: InitialArg,
    minus_left: bool,
    step_width: Option<f64>,
    amp: f64,
    width: f64,
    center: Option<f64>,
) -> InitialData {
    match kind {
        InitialArg::Step => InitialData::StepWall {
            orientation: if minus_left { Orientation::MinusLeft } else { Orientation::PlusLeft },
            width: step_width,
        },
        InitialArg::Bump => InitialData::LocalizedBump { amplitude: amp, width, center },
    }
}

fn sim_config(p: MaterialParams, res: ResolutionArgs, t_final: f64, init: InitialData) -> dwsel::Result<SimConfig> {
    let grid = Grid::with_spacing(res.half_width, res.dx)?;
    Ok(SimConfig::new(grid, res.dt, t_final, p, init))
}

#[derive(Serialize)]
struct HistoryRow {
    t: f64,
    s: f64,
    omega: f64,
    wall_position: f64,
}

fn history_rows(r: &RunResult) -> Vec<HistoryRow> {
    let f = &r.freezing;
    (0..f.time.len())
        .map(|i| HistoryRow { t: f.time[i], s: f.s_history[i], omega: f.omega_history[i], wall_position: f.wall_position[i] })
        .collect()
}

fn summary(r: &RunResult) -> serde_json::Value {
    json!({
        "s_inf": r.s_inf,
        "omega_inf": r.omega_inf,
        "converged": r.converged,
        "s_std": r.s_std,
        "omega_std": r.omega_std,
        "oscillation_amplitude": r.oscillation_amplitude,
        "t_end": r.t_end,
    })
}

fn cmd_simulate(a: SimulateArgs) -> Out {
    let cfg = match &a.config {
        Some(path) => serde_json::from_str::<SimConfig>(&fs::read_to_string(path)?)?,
        None => {
            let h = a.h.ok_or_else(|| Error::InvalidParams("--h is required without --config".into()))?;
            let init = initial_data(a.initial, a.minus_left, a.step_width, a.amplitude, a.width, a.center);
            let mut c = sim_config(a.params.at(h)?, a.res, a.t_final, init)?;
            c.averaging_window = a.window;
            c.auto_extend = !a.no_extend;
            c
        }
    };
    let r = run(&cfg)?;
    if let Some(path) = &a.history {
        csv_to(path, &history_rows(&r))?;
    }
    if let Some(path) = &a.snapshot {
        let f = &r.final_field;
        let rows: Vec<[f64; 4]> =
            f.values.iter().enumerate().map(|(i, v)| [f.grid.xi(i), v[0], v[1], v[2]]).collect();
        profile_csv(path, &rows)?;
    }
    write_json(&a.out.output, &summary(&r))
}

fn cmd_scan(a: ScanArgs) -> Out {
    let init = initial_data(a.initial, false, Some(a.step_width), 0.5, 2.0, None);
    let template = sim_config(a.params.at(a.hs[0])?, a.res, a.t_final, init)?;
    let rows = pushed_pulled_scan(&template, &a.hs)?;
    write_csv(sink(&a.out.output)?, &rows)
}

#[derive(Serialize)]
struct ContourRow {
    re_lambda: f64,
    im_lambda: f64,
    re_e: f64,
    im_e: f64,
}

struct EvansOutcome {
    json: serde_json::Value,
    rows: Vec<ContourRow>,
}

fn evans_run(p: MaterialParams, eta: Option<f64>, c: ContourArgs, source: SourceArg) -> dwsel::Result<EvansOutcome> {
    let base = EvansProblem::new(p, 0.0)?;
    let eta = eta.unwrap_or_else(|| suggested_weight(&base));
    let prob = EvansProblem::new(p, eta)?.with_half_width(c.half_width).with_source(source.into());
    let contour = EvansContour::semicircle(c.radius, c.inner_radius, c.mesh)?;
    let r = winding_number(&prob, &contour)?;
    let rows = r
        .samples
        .iter()
        .map(|(l, e)| ContourRow { re_lambda: l.re, im_lambda: l.im, re_e: e.re, im_e: e.im })
        .collect();
    Ok(EvansOutcome {
        json: json!({
            "winding": r.winding,
            "min_modulus": r.min_modulus,
            "phase_resolved": r.phase_resolved,
            "mesh_used": r.mesh_used,
            "h": p.h,
            "eta": eta,
            "s": prob.frame.s,
            "omega": prob.frame.omega,
        }),
        rows,
    })
}

fn cmd_evans(a: EvansArgs) -> Out {
    let out = evans_run(a.params.at(a.field.h)?, a.eta, a.contour, a.source)?;
    if let Some(path) = &a.csv {
        csv_to(path, &out.rows)?;
    }
    write_json(&a.out.output, &out.json)
}

/// Everything needed to regenerate one figure's data.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct Settings {
    figure: Figure,
    alpha: f64,
    beta: f64,
    mu: f64,
    half_width: f64,
    dx: f64,
    dt: f64,
    t_final: f64,
    fields: Vec<f64>,
    ccps: Vec<f64>,
    contour: ContourArgs,
    etas: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    settings: Settings,
    files: Vec<String>,
    tolerances: serde_json::Value,
    runtime_seconds: f64,
    version: String,
}

fn settings_for(fig: Figure, quick: bool) -> Settings {
    let (dx, dt, t_final) = if quick { (5e-2, 1e-3, 40.0) } else { (1e-2, 1e-4, 100.0) };
    let contour = ContourArgs { radius: 100.0, inner_radius: 0.1, mesh: if quick { 300 } else { 1500 }, half_width: 100.0 };
    let base = Settings {
        figure: fig,
        alpha: 1.0,
        beta: 0.75,
        mu: -1.0,
        half_width: 50.0,
        dx,
        dt,
        t_final,
        fields: vec![],
        ccps: vec![0.0],
        contour,
        etas: vec![],
    };
    match fig {
        Figure::Fig2 => Settings { fields: vec![1.8, 1.85, 2.0, 2.4, 3.0, 4.0, 5.0, 6.0, 7.0], ..base },
        Figure::Fig3a => Settings {
            fields: linspace(0.35, 1.15, 9),
            ccps: linspace(-0.4, 0.4, 9),
            t_final: if quick { 20.0 } else { 50.0 },
            ..base
        },
        Figure::Fig4 => Settings { fields: vec![1.9], etas: vec![-0.29], ..base },
        Figure::Fig5 => Settings { fields: vec![8.0, 20.0], etas: vec![-1.5, -1.1], ..base },
        Figure::Fig7 => {
            let n = if quick { 11 } else { 41 };
            Settings { fields: (1..=n).map(|i| 0.75 + 10.0 * i as f64 / n as f64).collect(), ..base }
        }
        Figure::Fig8 => Settings { fields: linspace(0.76, 5.75, 200), ccps: vec![-0.5, 0.5], ..base },
    }
}

fn cmd_reproduce(a: ReproduceArgs) -> Out {
    let settings = match (&a.manifest, a.figure) {
        (Some(path), _) => serde_json::from_str::<Manifest>(&fs::read_to_string(path)?)?.settings,
        (None, Some(fig)) => settings_for(fig, a.quick),
        (None, None) => return Err(Error::InvalidParams("figure or --manifest required".into()).into()),
    };
    fs::create_dir_all(&a.out_dir)?;
    let t0 = Instant::now();
    let (files, tolerances) = produce(&settings, &a.out_dir)?;
    let manifest = Manifest {
        settings,
        files,
        tolerances,
        runtime_seconds: t0.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    write_json(&Some(a.out_dir.join("manifest.json")), &manifest)?;
    write_json(&None, &manifest)
}

#[derive(Serialize)]
struct SelectionRow {
    h: f64,
    regime: u8,
    s_m0: f64,
    omega_m0: f64,
    s_lin: f64,
    omega_lin: f64,
    s_sim: f64,
    omega_sim: f64,
    converged: bool,
}

#[derive(Serialize)]
struct SignRow {
    h: f64,
    ccp: f64,
    s_sim: f64,
    sign: i8,
    h_minus_standing: f64,
}

#[derive(Serialize)]
struct PredictionRow {
    ccp: f64,
    h: f64,
    s_lin: f64,
    omega_lin: f64,
}

fn produce(st: &Settings, dir: &Path) -> Out<(Vec<String>, serde_json::Value)> {
    let params = |ccp: f64, h: f64| MaterialParams::new(st.alpha, st.beta, st.mu, ccp, h);
    let res = ResolutionArgs { half_width: st.half_width, dx: st.dx, dt: st.dt };
    let step = InitialData::step(Orientation::PlusLeft);
    let sharp = InitialData::sharp_step(Orientation::PlusLeft);
    let nan = f64::NAN;
    match st.figure {
        Figure::Fig2 => {
            let template = sim_config(params(0.0, st.fields[0])?, res, st.t_final, sharp)?;
            let rows = pushed_pulled_scan(&template, &st.fields)?;
            csv_to(&dir.join("fig2_scan.csv"), &rows)?;
            Ok((vec!["fig2_scan.csv".into()], json!({"label_dead_band": dwsel::sim::DEAD_BAND})))
        }
        Figure::Fig3a => {
            let cells: Vec<(f64, f64)> =
                st.ccps.iter().flat_map(|&c| st.fields.iter().map(move |&h| (c, h))).collect();
            let rows = cells
                .par_iter()
                .map(|&(ccp, h)| {
                    let p = params(ccp, h)?;
                    if classify_regime(&p).regime != Regime::Bistable {
                        return Ok(SignRow { h, ccp, s_sim: nan, sign: 0, h_minus_standing: h - standing_field_h(&p) });
                    }
                    let mut cfg = sim_config(p, res, st.t_final, step)?;
                    cfg.auto_extend = false;
                    let r = run(&cfg)?;
                    let sign = if r.s_inf.abs() < 1e-3 { 0 } else { r.s_inf.signum() as i8 };
                    Ok(SignRow { h, ccp, s_sim: r.s_inf, sign, h_minus_standing: h - standing_field_h(&p) })
                })
                .collect::<dwsel::Result<Vec<_>>>()?;
            csv_to(&dir.join("fig3a_sign_map.csv"), &rows)?;
            Ok((vec!["fig3a_sign_map.csv".into()], json!({"zero_speed_band": 1e-3})))
        }
        Figure::Fig4 | Figure::Fig5 => {
            let mut files = vec![];
            let mut results = vec![];
            for (&h, &eta) in st.fields.iter().zip(&st.etas) {
                let out = evans_run(params(0.0, h)?, Some(eta), st.contour, SourceArg::Linearized)?;
                let name = format!("evans_h{h}.csv");
                csv_to(&dir.join(&name), &out.rows)?;
                files.push(name);
                results.push(out.json);
            }
            let name = format!("{}_winding.json", if st.figure == Figure::Fig4 { "fig4" } else { "fig5" });
            write_json(&Some(dir.join(&name)), &results)?;
            files.push(name);
            Ok((files, json!({"max_phase_step": std::f64::consts::FRAC_PI_2})))
        }
        Figure::Fig7 => {
            let rows = st
                .fields
                .par_iter()
                .map(|&h| {
                    let p = params(0.0, h)?;
                    let regime = classify_regime(&p).regime;
                    let m0 = frame_m0(&p, Orientation::PlusLeft)?;
                    let lin = match invaded_pole(&p) {
                        Ok(pole) => spreading_prediction(&p, pole).map(|x| (x.s_lin, x.omega_lin))?,
                        Err(_) => (nan, nan),
                    };
                    let r = run(&sim_config(p, res, st.t_final, sharp)?)?;
                    Ok(SelectionRow {
                        h,
                        regime: regime.code(),
                        s_m0: m0.s,
                        omega_m0: m0.omega,
                        s_lin: lin.0,
                        omega_lin: lin.1,
                        s_sim: r.s_inf,
                        omega_sim: r.omega_inf,
                        converged: r.converged,
                    })
                })
                .collect::<dwsel::Result<Vec<_>>>()?;
            csv_to(&dir.join("fig7_selection.csv"), &rows)?;
            Ok((vec!["fig7_selection.csv".into()], json!({"convergence_std": dwsel::sim::CONVERGENCE_STD})))
        }
        Figure::Fig8 => {
            let mut rows = vec![];
            for &ccp in &st.ccps {
                for &h in &st.fields {
                    let p = params(ccp, h)?;
                    let (s, o) = match invaded_pole(&p) {
                        Ok(pole) => spreading_prediction(&p, pole).map(|x| (x.s_lin, x.omega_lin))?,
                        Err(_) => (nan, nan),
                    };
                    rows.push(PredictionRow { ccp, h, s_lin: s, omega_lin: o });
                }
            }
            csv_to(&dir.join("fig8_predictions.csv"), &rows)?;
            Ok((vec!["fig8_predictions.csv".into()], json!({})))
        }
    }
}
