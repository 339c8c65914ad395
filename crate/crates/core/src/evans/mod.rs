//! Evans function of the explicit wall and its winding along a contour in
//! the spectral plane.
//!
//! The eigenvalue problem is written as a first-order system in the weighted
//! variable `w = exp(-eta xi) n`; the Evans function is the wedge pairing at
//! `xi = 0` of the unstable 3-plane carried from `-L` and the stable 3-plane
//! carried from `+L`, both propagated on the third exterior power.

mod compound;
mod matrix;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dwfamily::frame_m0;
use crate::error::{Error, Result};
use crate::model::{Frame, MaterialParams, Orientation, Pole};
use crate::spectral::{llgs_coefficients, weighted_abscissa};

pub use compound::{pairing, wedge, Wedge};
pub use matrix::{
    analytic_blocks, assemble_a, discrepancy_report, fd_blocks, first_order, jacobian_oracle, linearized_a, Blocks,
    DiscrepancyReport, EntryDeviation, ProfileData,
};

/// Complex 6x6 matrix, row-major.
pub type Mat6 = [[C64; 6]; 6];

/// Which first-order matrix drives the integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixSource {
    /// Analytic linearization of the quasilinear right side.
    #[default]
    Linearized,
    /// Finite-difference Jacobian; slow, for cross-checks.
    Oracle,
    /// The closed-form entry table of [`assemble_a`].
    Tabulated,
}

/// Linearization about the explicit wall with `+e3` on the left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvansProblem {
    pub params: MaterialParams,
    pub frame: Frame,
    /// Exponential weight.
    pub eta: f64,
    /// Integration runs over `[-half_width, half_width]`.
    pub half_width: f64,
    /// `kappa` in the term `-kappa m m^T` added to the m-Jacobian. It shifts
    /// the spectrum of the normal (length-changing) direction left by `kappa`
    /// and leaves tangent perturbations alone.
    pub normal_penalty: f64,
    pub source: MatrixSource,
    /// Relative local error tolerance of the adaptive integrator.
    pub tolerance: f64,
}

pub const DEFAULT_HALF_WIDTH: f64 = 100.0;
pub const DEFAULT_NORMAL_PENALTY: f64 = 5.0;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

impl EvansProblem {
    pub fn new(params: MaterialParams, eta: f64) -> Result<Self> {
        if params.ccp != 0.0 {
            return Err(Error::InvalidParams("Evans computations need ccp = 0".into()));
        }
        if !eta.is_finite() {
            return Err(Error::InvalidParams("eta must be finite".into()));
        }
        let frame = frame_m0(&params, Orientation::PlusLeft)?;
        Ok(EvansProblem {
            params,
            frame,
            eta,
            half_width: DEFAULT_HALF_WIDTH,
            normal_penalty: DEFAULT_NORMAL_PENALTY,
            source: MatrixSource::default(),
            tolerance: DEFAULT_TOLERANCE,
        })
    }

    pub fn with_half_width(mut self, l: f64) -> Self {
        self.half_width = l;
        self
    }

    pub fn with_source(mut self, source: MatrixSource) -> Self {
        self.source = source;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.params.require_easy_axis()?;
        if !(self.half_width.is_finite() && self.half_width > 0.0) {
            return Err(Error::InvalidParams(format!("half width {} must be positive", self.half_width)));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::InvalidParams(format!("tolerance {} must lie in (0, 1)", self.tolerance)));
        }
        if !self.eta.is_finite() || !self.normal_penalty.is_finite() {
            return Err(Error::InvalidParams("non-finite eta or penalty".into()));
        }
        Ok(())
    }

    /// Weighted essential-spectrum abscissae at the left (`+e3`) and right
    /// (`-e3`) rest states.
    pub fn weighted_abscissae(&self) -> (f64, f64) {
        let at = |pole| weighted_abscissa(&llgs_coefficients(&self.params, self.frame, pole), self.eta);
        (at(Pole::Plus), at(Pole::Minus))
    }

    /// Fails with `InadmissibleWeight` unless both weighted essential spectra
    /// lie strictly in the open left half-plane.
    pub fn check_weight(&self) -> Result<()> {
        let (l, r) = self.weighted_abscissae();
        if l < 0.0 && r < 0.0 {
            Ok(())
        } else {
            Err(Error::InadmissibleWeight(self.eta))
        }
    }

    /// The first-order matrix selected by `source`.
    pub fn matrix(&self, lambda: C64, xi: f64) -> Mat6 {
        match self.source {
            MatrixSource::Linearized => linearized_a(self, lambda, xi),
            MatrixSource::Oracle => jacobian_oracle(self, lambda, xi),
            MatrixSource::Tabulated => assemble_a(self, lambda, xi),
        }
    }
}

/// Suggested weight `-alpha s / 2` for the wall speed.
pub fn suggested_weight(prob: &EvansProblem) -> f64 {
    -prob.params.alpha * prob.frame.s / 2.0
}

// Far enough out that the profile evaluates to a rest state exactly.
const FAR: f64 = 1e4;

/// Decaying (`unstable = false`) or growing 3-plane of the limiting matrix
/// at `side * infinity`, and the sum of its spatial rates.
fn asymptotic_plane(prob: &EvansProblem, lambda: C64, side: f64, unstable: bool) -> Result<(Wedge, C64)> {
    let a = prob.matrix(lambda, side * FAR);
    let zero = C64::new(0.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let one = C64::new(1.0, 0.0);
    let patterns = [[one, -i, zero], [one, i, zero], [zero, zero, one]];
    let mut vecs = [[zero; 6]; 3];
    let mut rate = zero;
    for (k, x) in patterns.iter().enumerate() {
        // n'' = R n + Q n' restricted to the pattern
        let mut rx = [zero; 3];
        let mut qx = [zero; 3];
        for r in 0..3 {
            for c in 0..3 {
                rx[r] += a[2 * r + 1][2 * c] * x[c];
                qx[r] += a[2 * r + 1][2 * c + 1] * x[c];
            }
        }
        let nx: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        let proj = |v: &[C64; 3]| v.iter().zip(x).map(|(a, b)| a * b.conj()).sum::<C64>() / nx;
        let (r, q) = (proj(&rx), proj(&qx));
        let resid: f64 = (0..3).map(|j| (rx[j] - r * x[j]).norm() + (qx[j] - q * x[j]).norm()).sum();
        let scale = 1.0 + r.norm() + q.norm();
        if resid > 1e-8 * scale {
            return Err(Error::SubspaceDegenerate(format!("pattern {k} is not invariant (residual {resid:.2e})")));
        }
        // nu^2 - q nu - r = 0
        let disc = (q * q + 4.0 * r).sqrt();
        let (n1, n2) = ((q + disc) / 2.0, (q - disc) / 2.0);
        if (n1.re - n2.re).abs() <= 1e-10 * scale {
            return Err(Error::SubspaceDegenerate(format!(
                "spatial rates of pattern {k} share a real part at lambda = {lambda}"
            )));
        }
        let pick_first = (n1.re > n2.re) == unstable;
        let nu = if pick_first { n1 } else { n2 };
        for j in 0..3 {
            vecs[k][2 * j] = x[j];
            vecs[k][2 * j + 1] = nu * x[j];
        }
        rate += nu;
    }
    Ok((wedge(vecs), rate))
}

fn sup_norm(w: &Wedge) -> f64 {
    w.iter().fold(0.0, |m, z| m.max(z.norm()))
}

fn axpy(w: &Wedge, h: f64, terms: &[(f64, &Wedge)]) -> Wedge {
    let mut out = *w;
    for &(c, k) in terms {
        if c == 0.0 {
            continue;
        }
        for (o, x) in out.iter_mut().zip(k) {
            *o += x * (h * c);
        }
    }
    out
}

/// Dormand-Prince 5(4) from `x0` to `x1` (either direction).
fn integrate(prob: &EvansProblem, lambda: C64, shift: C64, mut w: Wedge, x0: f64, x1: f64) -> Result<Wedge> {
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    // fifth order minus embedded fourth order
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    const MAX_STEP: f64 = 2.0;
    const MIN_STEP: f64 = 1e-10;

    let f = |x: f64, w: &Wedge| compound::apply(&prob.matrix(lambda, x), w, shift);
    let dir = (x1 - x0).signum();
    let mut x = x0;
    let mut h = 0.01_f64.min((x1 - x0).abs());
    let mut k0 = f(x, &w);
    while (x1 - x) * dir > 0.0 {
        h = h.min((x1 - x).abs());
        let hs = h * dir;
        let mut k = [k0; 7];
        for s in 1..7 {
            let terms: Vec<(f64, &Wedge)> = (0..s).map(|j| (A[s][j], &k[j])).collect();
            let ws = axpy(&w, hs, &terms);
            k[s] = f(x + C[s] * hs, &ws);
        }
        let next = axpy(&w, hs, &(0..6).map(|j| (A[6][j], &k[j])).collect::<Vec<_>>());
        let err_vec = axpy(&[C64::new(0.0, 0.0); compound::DIM], hs, &(0..7).map(|j| (E[j], &k[j])).collect::<Vec<_>>());
        let scale = prob.tolerance * sup_norm(&w).max(sup_norm(&next));
        let err = sup_norm(&err_vec) / scale;
        if !err.is_finite() || !next.iter().all(|z| z.is_finite()) {
            h *= 0.2;
        } else if err <= 1.0 {
            x += hs;
            w = next;
            k0 = k[6];
            if sup_norm(&w) > 1e150 {
                return Err(Error::IntegrationOverflow(x));
            }
            h = (h * (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0)).min(MAX_STEP);
            continue;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
        }
        if h < MIN_STEP {
            return Err(Error::IntegrationOverflow(x));
        }
    }
    Ok(w)
}

/// Evans function at `lambda`: the pairing at `xi = 0` of the growing
/// 3-plane from the left and the decaying 3-plane from the right, each
/// rescaled by its asymptotic rate.
pub fn evans_value(prob: &EvansProblem, lambda: C64) -> Result<C64> {
    prob.validate()?;
    if !lambda.is_finite() {
        return Err(Error::InvalidParams("non-finite lambda".into()));
    }
    let l = prob.half_width;
    let (wl, rl) = asymptotic_plane(prob, lambda, -1.0, true)?;
    let (wr, rr) = asymptotic_plane(prob, lambda, 1.0, false)?;
    let left = integrate(prob, lambda, rl, wl, -l, 0.0)?;
    let right = integrate(prob, lambda, rr, wr, l, 0.0)?;
    Ok(pairing(&left, &right))
}

/// Closed contour: right half of the disk of radius `radius` with the half
/// disk of radius `inner_radius` around the origin removed, traversed
/// counterclockwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvansContour {
    pub radius: f64,
    pub inner_radius: f64,
    pub mesh_points: usize,
    /// `mesh_points + 1` vertices; the last repeats the first.
    pub vertices: Vec<C64>,
}

pub const MAX_REFINEMENTS: usize = 4;

impl EvansContour {
    pub fn semicircle(radius: f64, inner_radius: f64, mesh_points: usize) -> Result<Self> {
        if !(inner_radius > 0.0 && radius > inner_radius && radius.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "need 0 < inner radius < radius, got {inner_radius} and {radius}"
            )));
        }
        if mesh_points < 20 {
            return Err(Error::InvalidParams(format!("mesh of {mesh_points} points is too coarse")));
        }
        let n_axis = mesh_points / 3;
        let n_small = (mesh_points / 10).max(2);
        let n_big = mesh_points - 2 * n_axis - n_small;
        let half_pi = std::f64::consts::FRAC_PI_2;
        let arc = |r: f64, from: f64, to: f64, n: usize| {
            (0..n).map(move |k| C64::from_polar(r, from + (to - from) * k as f64 / n as f64))
        };
        // geometric spacing along the imaginary axis
        let axis = |from: f64, to: f64, sign: f64, n: usize| {
            (0..n).map(move |k| C64::new(0.0, sign * from * (to / from).powf(k as f64 / n as f64)))
        };
        let mut vertices: Vec<C64> = arc(radius, -half_pi, half_pi, n_big)
            .chain(axis(radius, inner_radius, 1.0, n_axis))
            .chain(arc(inner_radius, half_pi, -half_pi, n_small))
            .chain(axis(inner_radius, radius, -1.0, n_axis))
            .collect();
        vertices.push(vertices[0]);
        Ok(EvansContour { radius, inner_radius, mesh_points, vertices })
    }

    /// Same contour with twice the mesh points.
    pub fn doubled(&self) -> Self {
        Self::semicircle(self.radius, self.inner_radius, 2 * self.mesh_points).expect("valid contour stays valid")
    }
}

/// Outcome of a winding computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindingResult {
    pub winding: i64,
    pub min_modulus: f64,
    pub phase_resolved: bool,
    pub mesh_used: usize,
    /// Largest phase increment between neighbouring vertices.
    pub max_phase_step: f64,
    /// `(lambda, E(lambda))` along the final contour.
    pub samples: Vec<(C64, C64)>,
}

fn assess(contour: &EvansContour, values: Vec<C64>) -> WindingResult {
    let mut total = 0.0;
    let mut max_step: f64 = 0.0;
    for w in values.windows(2) {
        let d = (w[1] / w[0]).arg();
        total += d;
        max_step = max_step.max(d.abs());
    }
    let min_modulus = values.iter().fold(f64::INFINITY, |m, z| m.min(z.norm()));
    WindingResult {
        winding: (total / std::f64::consts::TAU).round() as i64,
        min_modulus,
        phase_resolved: max_step < std::f64::consts::FRAC_PI_2,
        mesh_used: contour.mesh_points,
        max_phase_step: max_step,
        samples: contour.vertices.iter().copied().zip(values).collect(),
    }
}

/// Winding number of the Evans function along `contour`, doubling the mesh
/// up to [`MAX_REFINEMENTS`] times until every phase increment is below pi/2.
pub fn winding_number(prob: &EvansProblem, contour: &EvansContour) -> Result<WindingResult> {
    prob.validate()?;
    prob.check_weight()?;
    let mut c = contour.clone();
    for round in 0..=MAX_REFINEMENTS {
        let n = c.vertices.len() - 1;
        let mut values: Vec<C64> =
            c.vertices[..n].par_iter().map(|&l| evans_value(prob, l)).collect::<Result<Vec<_>>>()?;
        values.push(values[0]);
        let res = assess(&c, values);
        if res.phase_resolved {
            return Ok(res);
        }
        if round < MAX_REFINEMENTS {
            c = c.doubled();
        }
    }
    Err(Error::PhaseUnresolved(MAX_REFINEMENTS))
}

/// Neutral modes generated by the symmetries of the wall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryMode {
    /// `n = m'`.
    Translation,
    /// `n = e3 x m`.
    Rotation,
}

fn mode_state(prob: &EvansProblem, mode: SymmetryMode, xi: f64) -> [f64; 6] {
    let (m, mp, mpp) = crate::dwfamily::profile_m0_derivs(prob.params.mu, 1.0, xi);
    let (n, np) = match mode {
        SymmetryMode::Translation => (mp, mpp),
        SymmetryMode::Rotation => ([-m[1], m[0], 0.0], [-mp[1], mp[0], 0.0]),
    };
    [n[0], np[0], n[1], np[1], n[2], np[2]]
}

/// Largest `|W' - A(xi; 0) W|` over `xs` for a symmetry mode, with `W'` by
/// central differences of step `delta`. The weight is set to zero.
pub fn symmetry_mode_residual(prob: &EvansProblem, mode: SymmetryMode, xs: &[f64], delta: f64) -> f64 {
    let mut p = prob.clone();
    p.eta = 0.0;
    let zero = C64::new(0.0, 0.0);
    let mut worst: f64 = 0.0;
    for &xi in xs {
        let w = mode_state(&p, mode, xi);
        let up = mode_state(&p, mode, xi + delta);
        let dn = mode_state(&p, mode, xi - delta);
        let a = p.matrix(zero, xi);
        for r in 0..6 {
            let aw: C64 = (0..6).map(|c| a[r][c] * w[c]).sum();
            let dw = (up[r] - dn[r]) / (2.0 * delta);
            worst = worst.max((aw - dw).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::spatial_roots;

    fn problem(h: f64, eta: f64) -> EvansProblem {
        EvansProblem::new(MaterialParams::new(1.0, 0.75, -1.0, 0.0, h).unwrap(), eta).unwrap()
    }

    fn eigenvalues_match_roots(prob: &EvansProblem, lambda: C64) {
        // at -inf the wall sits at +e3, at +inf at -e3
        for (side, pole) in [(-1.0, Pole::Plus), (1.0, Pole::Minus)] {
            let roots = spatial_roots(&llgs_coefficients(&prob.params, prob.frame, pole), lambda).unwrap().roots;
            let a = prob.matrix(lambda, side * FAR);
            for nu in roots {
                let mu = nu - prob.eta;
                // (mu, x) must make the tangent block singular: det(mu^2 - q mu - r) over the pattern basis
                let found = [[1.0, -1.0], [1.0, 1.0]].iter().any(|&[re, im]| {
                    let x = [C64::new(re, 0.0), C64::new(0.0, im), C64::new(0.0, 0.0)];
                    (0..3).all(|r| {
                        let mut v = -mu * mu * x[r];
                        for c in 0..3 {
                            v += (a[2 * r + 1][2 * c] + a[2 * r + 1][2 * c + 1] * mu) * x[c];
                        }
                        v.norm() < 1e-8 * (1.0 + mu.norm_sqr())
                    })
                });
                assert!(found, "weighted root {mu} not an eigenvalue at side {side} for {:?} lambda {lambda}", prob.source);
            }
        }
    }

    #[test]
    fn asymptotic_eigenvalues_are_weighted_spatial_roots() {
        for source in [MatrixSource::Linearized, MatrixSource::Oracle] {
            let prob = problem(1.9, -0.29).with_source(source);
            for lambda in [C64::new(0.5, 0.0), C64::new(2.0, 3.0), C64::new(-0.1, 40.0)] {
                eigenvalues_match_roots(&prob, lambda);
            }
        }
    }

    #[test]
    fn linearization_matches_finite_differences() {
        let prob = problem(8.0, -1.5);
        for &xi in &[-3.0, -0.7, 0.0, 0.2, 1.5, 6.0] {
            for &lambda in &[C64::new(0.0, 0.0), C64::new(1.0, -2.0), C64::new(30.0, 5.0)] {
                let a = linearized_a(&prob, lambda, xi);
                let b = jacobian_oracle(&prob, lambda, xi);
                for i in 0..6 {
                    for j in 0..6 {
                        assert!((a[i][j] - b[i][j]).norm() < 1e-6, "({i},{j}) at xi={xi}: {} vs {}", a[i][j], b[i][j]);
                    }
                }
            }
        }
    }

    #[test]
    fn weight_is_a_similarity_shift() {
        let mut p0 = problem(1.9, 0.0);
        let p1 = problem(1.9, -0.29);
        p0.normal_penalty = p1.normal_penalty;
        let (lambda, xi, eta) = (C64::new(0.7, 1.1), 0.4, -0.29);
        let a0 = linearized_a(&p0, lambda, xi);
        let a1 = linearized_a(&p1, lambda, xi);
        // A_eta = T^-1 A_0 T - eta, T = [[1, 0], [eta, 1]] per component
        let t = |v: [C64; 6]| {
            let mut o = v;
            for c in 0..3 {
                o[2 * c + 1] += v[2 * c] * eta;
            }
            o
        };
        let tinv = |v: [C64; 6]| {
            let mut o = v;
            for c in 0..3 {
                o[2 * c + 1] -= v[2 * c] * eta;
            }
            o
        };
        for col in 0..6 {
            let mut e = [C64::new(0.0, 0.0); 6];
            e[col] = C64::new(1.0, 0.0);
            let te = t(e);
            let mut ate = [C64::new(0.0, 0.0); 6];
            for r in 0..6 {
                for c in 0..6 {
                    ate[r] += a0[r][c] * te[c];
                }
            }
            let mut expect = tinv(ate);
            expect[col] -= eta;
            for r in 0..6 {
                assert!((expect[r] - a1[r][col]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn contour_is_closed_and_counterclockwise() {
        let c = EvansContour::semicircle(100.0, 0.1, 1500).unwrap();
        assert_eq!(c.vertices.len(), 1501);
        assert_eq!(c.vertices[0], *c.vertices.last().unwrap());
        // signed area of the polygon is positive for counterclockwise traversal
        let area: f64 = c.vertices.windows(2).map(|w| w[0].re * w[1].im - w[1].re * w[0].im).sum::<f64>() / 2.0;
        let expect = std::f64::consts::PI * (100.0f64.powi(2) - 0.01) / 2.0;
        assert!((area - expect).abs() / expect < 1e-3, "{area}");
        assert!(c.vertices.iter().all(|z| z.re >= -1e-12 && z.norm() >= 0.1 - 1e-12));
        assert_eq!(c.doubled().mesh_points, 3000);
        assert!(EvansContour::semicircle(0.1, 0.2, 100).is_err());
    }

    #[test]
    fn rejects_inhomogeneous_walls() {
        let p = MaterialParams::new(1.0, 0.75, -1.0, 0.5, 1.9).unwrap();
        assert!(matches!(EvansProblem::new(p, -0.29), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn evans_value_is_conjugate_symmetric() {
        let prob = problem(1.9, -0.29);
        let l = C64::new(0.8, 2.5);
        let a = evans_value(&prob, l).unwrap();
        let b = evans_value(&prob, l.conj()).unwrap();
        assert!((a.conj() - b).norm() < 1e-6 * a.norm(), "{a} vs {b}");
    }
}
