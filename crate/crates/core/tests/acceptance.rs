//! Acceptance run: one PASS/FAIL line per criterion, with the individual
//! checks listed underneath.
//!
//! `ACCEPTANCE_ONLY=1,2,5` restricts the run to the listed criteria.
//! `ACCEPTANCE_STRICT=1` turns any failed criterion into a non-zero exit.

mod common;

use std::time::Instant;

use common::*;
use dwsel::dwfamily::{
    coherent_ode_residual, critical_fields, frame_m0, stability_threshold, ExplicitDW, SphericalProfile,
};
use dwsel::evans::{
    discrepancy_report, jacobian_oracle, linearized_a, symmetry_mode_residual, winding_number, EvansContour,
    EvansProblem, MatrixSource, SymmetryMode, WindingResult,
};
use dwsel::sim::{pushed_pulled_scan, run, FrontLabel, Grid, InitialData, SimConfig, Stepper};
use dwsel::spectral::{absolute_abscissa, cgl_coefficients, optimal_weight, spreading_prediction};
use dwsel::{MaterialParams, Orientation, Pole};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestError, TestRng, TestRunner};

struct Criterion {
    id: u8,
    title: &'static str,
    /// `None` marks an informational line that does not affect the outcome.
    items: Vec<(Option<bool>, String)>,
    started: Instant,
}

impl Criterion {
    fn new(id: u8, title: &'static str) -> Self {
        Criterion { id, title, items: vec![], started: Instant::now() }
    }

    fn check(&mut self, ok: bool, text: impl Into<String>) {
        self.items.push((Some(ok), text.into()));
    }

    fn note(&mut self, text: impl Into<String>) {
        self.items.push((None, text.into()));
    }

    fn within(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        self.check((got - want).abs() <= tol, format!("{label} = {got:.10} (want {want} +- {tol:e})"));
    }

    fn within_rel(&mut self, label: &str, got: f64, want: f64, rel: f64) {
        let dev = (got - want).abs() / want.abs();
        self.check(dev <= rel, format!("{label} = {got:.6} (want {want} within {:.0}%, off by {:.2}%)", rel * 100.0, dev * 100.0));
    }

    fn finish(self) -> bool {
        let ok = self.items.iter().all(|(p, _)| *p != Some(false)) && self.items.iter().any(|(p, _)| p.is_some());
        println!(
            "{} criterion {}: {} ({:.1} s)",
            if ok { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.started.elapsed().as_secs_f64()
        );
        for (p, text) in &self.items {
            let tag = match p {
                Some(true) => "ok  ",
                Some(false) => "FAIL",
                None => "info",
            };
            println!("    {tag} {text}");
        }
        ok
    }
}

fn params(ccp: f64, h: f64) -> MaterialParams {
    MaterialParams::new(1.0, 0.75, -1.0, ccp, h).unwrap()
}

fn closed_forms() -> Criterion {
    let mut c = Criterion::new(1, "closed-form reproduction");
    let pred = spreading_prediction(&params(0.5, 10.0), Pole::Minus).unwrap();
    c.within("s_lin(ccp=0.5, h=10)", pred.s_lin, 3.873, 1e-3);
    c.within("omega_lin(ccp=0.5, h=10)", pred.omega_lin, 9.0, 1e-9);
    let pred = spreading_prediction(&params(0.0, 2.4), Pole::Minus).unwrap();
    c.within("s_lin(ccp=0, h=2.4)", pred.s_lin, 1.14, 5e-3);
    c.within("omega_lin(ccp=0, h=2.4)", pred.omega_lin, 1.4, 1e-9);
    let cf = critical_fields(&params(0.0, 1.0)).unwrap();
    c.within("lower critical field", cf.h_s_plus, 1.92, 5e-3);
    c.within("upper critical field", cf.h_s_minus, 7.58, 5e-3);
    c.within("frequency critical field", cf.h_omega, 2.75, 1e-9);
    let p = params(0.0, 1.9);
    let f = frame_m0(&p, Orientation::PlusLeft).unwrap();
    c.within("wall speed at h=1.9", f.s, 0.575, 1e-9);
    c.within("wall frequency at h=1.9", f.omega, 1.325, 1e-9);
    let eta = optimal_weight(&p, f.s);
    c.within("optimal weight at h=1.9", eta, -0.2875, 1e-12);
    c.check(((eta * 100.0).round() / 100.0 - -0.29).abs() < 1e-12, format!("optimal weight rounds to {:.2}", eta));
    // threshold = beta/alpha - const * mu, so const = threshold - 0.75 at mu = -1
    c.within("stability bound constant", stability_threshold(&p) - 0.75, 0.7220, 1e-4);
    for gamma in [0.0f64, 0.5, 1.0, 2.0] {
        for sign in [1.0, -1.0] {
            let s = sign * 2.0 * (1.0 + gamma * gamma).sqrt();
            let top = absolute_abscissa(&cgl_coefficients(gamma, s, 0.0).unwrap());
            c.within(&format!("CGL absolute abscissa, gamma={gamma}, s={s:.4}"), top, 0.0, 1e-10);
        }
    }
    c
}

fn deterministic_runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn sweep<S: Strategy>(c: &mut Criterion, label: &str, strategy: S, check: impl Fn(S::Value) -> Check)
where
    S::Value: std::fmt::Debug,
{
    const CASES: u32 = 200;
    let mut runner = deterministic_runner(CASES);
    match runner.run(&strategy, check) {
        Ok(()) => c.check(true, format!("{label}: {CASES} random cases")),
        Err(TestError::Fail(why, value)) => c.check(false, format!("{label}: {why} at {value:?}")),
        Err(TestError::Abort(why)) => c.check(false, format!("{label}: aborted, {why}")),
    }
}

fn spectral_suite() -> Criterion {
    let mut c = Criterion::new(2, "spectral property suite");
    sweep(&mut c, "factorization identity", (coefficients(), cplx(-20.0..20.0), cplx(-5.0..5.0)), |(k, l, n)| {
        check_factorization(&k, l, n)
    });
    sweep(&mut c, "root ordering and companion-matrix roots", (coefficients(), cplx(-20.0..20.0)), |(k, l)| {
        check_roots(&k, l)
    });
    sweep(&mut c, "Morse index 2", coefficients(), |k| check_morse_index(&k));
    sweep(&mut c, "anchor maximal on the half-lines", (coefficients(), 0.0..100.0f64), |(k, r)| {
        check_anchor_maximal(&k, r)
    });
    sweep(&mut c, "anchor vs grid search (1e-6)", coefficients(), |k| check_anchor_grid_search(&k));
    sweep(&mut c, "closed-form speed vs bisection", monostable(), |(p, pole)| check_closed_form_speed(&p, pole));
    sweep(&mut c, "double roots vanish at (s_lin, omega_lin)", monostable(), |(p, pole)| {
        check_double_root_at_spreading_frame(&p, pole)
    });
    sweep(&mut c, "conjugate double roots", (material(), pole(), -5.0..5.0f64, -10.0..10.0f64), |(p, pole, s, o)| {
        check_conjugate_double_roots(&p, pole, s, o)
    });
    let secs = c.started.elapsed().as_secs_f64();
    c.check(secs < 10.0, format!("suite time {secs:.2} s (budget 10 s)"));
    c
}

fn evans_problem(h: f64, eta: f64) -> EvansProblem {
    EvansProblem::new(params(0.0, h), eta).unwrap()
}

const EVANS_CASES: [(f64, f64, i64); 3] = [(1.9, -0.29, 0), (8.0, -1.5, 6), (20.0, -1.1, 14)];

fn windings() -> Windings {
    let contour = EvansContour::semicircle(100.0, 0.1, 1500).unwrap();
    EVANS_CASES
        .iter()
        .map(|&(h, eta, want)| {
            let prob = evans_problem(h, eta);
            let res = winding_number(&prob, &contour)
                .and_then(|base| Ok((base, winding_number(&prob, &contour.doubled())?)));
            (h, eta, want, res)
        })
        .collect()
}

type Windings = Vec<(f64, f64, i64, Result<(WindingResult, WindingResult), dwsel::Error>)>;

/// Winding results together with the time they took.
struct EvansRuns {
    started: Instant,
    results: Windings,
}

fn winding_regression(runs: &EvansRuns) -> Criterion {
    let mut c = Criterion::new(3, "Evans winding regression");
    c.started = runs.started;
    for (h, eta, want, res) in &runs.results {
        match res {
            Ok((base, doubled)) => {
                c.check(
                    base.phase_resolved && base.winding == *want,
                    format!(
                        "h={h}, eta={eta}: winding {} (want {want}), phase resolved {}, {} points, min |E| {:.3e}",
                        base.winding, base.phase_resolved, base.mesh_used, base.min_modulus
                    ),
                );
                c.check(
                    doubled.phase_resolved && doubled.winding == base.winding,
                    format!("h={h}: doubled mesh ({} points) gives {}", doubled.mesh_used, doubled.winding),
                );
            }
            Err(e) => c.check(false, format!("h={h}, eta={eta}: {e}")),
        }
    }
    c
}

fn desk_config(p: MaterialParams, t: f64, initial: InitialData) -> SimConfig {
    SimConfig::new(Grid::with_spacing(50.0, 1e-2).unwrap(), 1e-4, t, p, initial)
}

fn simulations() -> Criterion {
    let mut c = Criterion::new(4, "simulation reproduction");
    match run(&desk_config(params(0.5, 10.0), 100.0, InitialData::bump())) {
        Ok(r) => {
            c.within_rel("bump, ccp=0.5, h=10: s", r.s_inf, 3.868, 0.02);
            c.within_rel("bump, ccp=0.5, h=10: omega", r.omega_inf, 8.965, 0.02);
        }
        Err(e) => c.check(false, format!("bump run: {e}")),
    }
    match run(&desk_config(params(0.5, 1.0), 50.0, InitialData::step(Orientation::PlusLeft))) {
        Ok(r) => {
            c.within_rel("step wall, ccp=0.5, h=1: s", r.s_inf, 0.081, 0.15);
            c.within_rel("step wall, ccp=0.5, h=1: omega", r.omega_inf, 0.923, 0.05);
        }
        Err(e) => c.check(false, format!("step-wall run: {e}")),
    }
    let template = desk_config(params(0.0, 1.0), 100.0, InitialData::sharp_step(Orientation::PlusLeft));
    let h_omega = critical_fields(&template.params).unwrap().h_omega;
    match pushed_pulled_scan(&template, &[1.8, 1.85, 3.0, 5.0, 7.0]) {
        Ok(rows) => {
            for row in rows {
                let want = if row.h < 2.0 { FrontLabel::Pushed } else { FrontLabel::Pulled };
                c.check(
                    row.label == want,
                    format!(
                        "scan h={}: {:?} (want {want:?}); s={:.5}, wall {:.5}, linear {:.5}, converged {}",
                        row.h, row.label, row.s_sim, row.s_m0, row.s_lin, row.converged
                    ),
                );
                if row.h > h_omega {
                    c.check(
                        row.s_sim < row.s_lin,
                        format!("scan h={}: s approaches s_lin from below ({:.5} < {:.5})", row.h, row.s_sim, row.s_lin),
                    );
                }
            }
        }
        Err(e) => c.check(false, format!("scan: {e}")),
    }
    c
}

/// Frozen frame after time `t` starting from the exact wall in its own frame.
fn drift_on_exact_wall(dx: f64, dt: f64, t: f64) -> f64 {
    let p = params(0.0, 1.9);
    let wall = ExplicitDW::new(&p, Orientation::PlusLeft).unwrap();
    let grid = Grid::with_spacing(30.0, dx).unwrap();
    let mut st = Stepper::new(grid, p, dt).unwrap();
    let values: Vec<[f64; 3]> = (0..grid.n).map(|i| wall.profile(grid.xi(i))).collect();
    st.load(&values);
    let mut f = wall.frame;
    for _ in 0..(t / dt).round() as usize {
        let (ds, dom) = st.step_frozen(f).unwrap();
        f.s += ds;
        f.omega += dom;
    }
    (f.s - wall.frame.s).abs() + (f.omega - wall.frame.omega).abs()
}

fn exact_solution_oracles() -> Criterion {
    let mut c = Criterion::new(5, "exact-solution oracles");
    let p = params(0.0, 2.0);
    let f = frame_m0(&p, Orientation::PlusLeft).unwrap();
    let res = |n: usize| {
        let (rt, rp) = coherent_ode_residual(&SphericalProfile::explicit(p.mu, 1.0, 20.0, n), f, &p).unwrap();
        rt.max(rp)
    };
    let (coarse, fine) = (res(2001), res(4001));
    let order = (coarse / fine).log2();
    c.check((1.8..=2.2).contains(&order), format!("wall ODE residual {coarse:.3e} -> {fine:.3e}, order {order:.3}"));

    let (e1, e2) = (drift_on_exact_wall(0.1, 1e-3, 2.0), drift_on_exact_wall(0.05, 2.5e-4, 2.0));
    let order = (e1 / e2).log2();
    c.check(order >= 1.0, format!("solver drift on the exact wall {e1:.3e} -> {e2:.3e}, order {order:.3}"));

    let xs: Vec<f64> = (0..23).map(|k| -4.1 + 0.37 * k as f64).collect();
    for h in [1.9, 8.0] {
        for mode in [SymmetryMode::Translation, SymmetryMode::Rotation] {
            let prob = evans_problem(h, 0.0);
            let (r1, r2) = (symmetry_mode_residual(&prob, mode, &xs, 1e-2), symmetry_mode_residual(&prob, mode, &xs, 5e-3));
            let order = (r1 / r2).log2();
            c.check(
                (1.8..=2.2).contains(&order),
                format!("{mode:?} mode at lambda=0, h={h}, assembled matrix: {r1:.3e} -> {r2:.3e}, order {order:.3}"),
            );
            let mut tab = prob.clone().with_source(MatrixSource::Tabulated);
            tab.normal_penalty = 0.0;
            let (t1, t2) = (symmetry_mode_residual(&tab, mode, &xs, 1e-2), symmetry_mode_residual(&tab, mode, &xs, 5e-3));
            c.note(format!("{mode:?} mode, h={h}, closed-form table: {t1:.3e} -> {t2:.3e} (catalogued, not used)"));
        }
    }
    c
}

/// Entries listed in the committed discrepancy catalogue.
fn catalogued_entries() -> Vec<(usize, usize)> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/tabulated_matrix_discrepancies.md");
    let text = std::fs::read_to_string(path).unwrap_or_default();
    let mut out: Vec<(usize, usize)> = text
        .lines()
        .filter_map(|l| {
            let cell = l.strip_prefix("| (")?;
            let (pair, _) = cell.split_once(')')?;
            let (r, col) = pair.split_once(',')?;
            Some((r.trim().parse().ok()?, col.trim().parse().ok()?))
        })
        .collect();
    out.sort();
    out
}

fn closed_form_matrix_cross_validation(runs: &EvansRuns) -> Criterion {
    let mut c = Criterion::new(6, "closed-form matrix cross-validation");
    let points: Vec<(C64, f64)> = (0..100)
        .map(|k| {
            let t = k as f64;
            (C64::new((t * 0.37).sin() * 5.0, (t * 0.73).cos() * 20.0), (t * 1.13).sin() * 8.0 + 0.01)
        })
        .collect();
    let catalogue = catalogued_entries();
    c.check(!catalogue.is_empty(), format!("committed catalogue lists {} entries", catalogue.len()));
    for h in [1.9, 8.0, 20.0] {
        let prob = evans_problem(h, -0.29);
        let report = discrepancy_report(&prob, &points, 1e-6);
        let labels = report.labels();
        c.check(
            report.agrees() || labels == catalogue,
            format!("h={h}: {} of 36 entries disagree, all catalogued: {}", labels.len(), labels == catalogue),
        );
        let worst = points
            .iter()
            .map(|&(l, x)| {
                let (a, b) = (linearized_a(&prob, l, x), jacobian_oracle(&prob, l, x));
                (0..36).map(|k| (a[k / 6][k % 6] - b[k / 6][k % 6]).norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        c.check(worst < 1e-6, format!("h={h}: matrix in use vs finite-difference Jacobian, max deviation {worst:.2e}"));
    }
    for (h, _, want, res) in &runs.results {
        match res {
            Ok((base, _)) => c.check(
                base.phase_resolved && base.winding == *want,
                format!("h={h}: winding with the Jacobian-derived matrix {} (want {want})", base.winding),
            ),
            Err(e) => c.check(false, format!("h={h}: {e}")),
        }
    }
    c
}

fn main() {
    let only: Option<Vec<u8>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |id: u8| only.as_ref().is_none_or(|v| v.contains(&id));
    let strict = std::env::var_os("ACCEPTANCE_STRICT").is_some();

    let mut outcomes = vec![];
    if wanted(1) {
        outcomes.push(closed_forms().finish());
    }
    if wanted(2) {
        outcomes.push(spectral_suite().finish());
    }
    let started = Instant::now();
    let evans = EvansRuns { results: if wanted(3) || wanted(6) { windings() } else { vec![] }, started };
    if wanted(3) {
        outcomes.push(winding_regression(&evans).finish());
    }
    if wanted(4) {
        outcomes.push(simulations().finish());
    }
    if wanted(5) {
        outcomes.push(exact_solution_oracles().finish());
    }
    if wanted(6) {
        outcomes.push(closed_form_matrix_cross_validation(&evans).finish());
    }
    let passed = outcomes.iter().filter(|&&o| o).count();
    println!("acceptance: {passed} of {} criteria passed", outcomes.len());
    if strict && passed < outcomes.len() {
        std::process::exit(1);
    }
}
