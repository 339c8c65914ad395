//! Spectral theory for two-component operators whose dispersion relation is a
//! sum of two squares: factorization, spatial roots, absolute spectrum,
//! pinched double roots and linear spreading predictions.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{classify_regime, Frame, MaterialParams, Pole, Regime};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Which inequality is used for the uniform-ellipticity hypothesis on (a2, b2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ellipticity {
    /// `Re a2 > |Im b2|`, equivalent to `Re(a2 +- i b2) > 0`.
    #[default]
    Linear,
    /// `Re a2 > |Im b2|^2`.
    Strict,
}

impl Ellipticity {
    pub fn holds(self, a2: C64, b2: C64) -> bool {
        match self {
            Ellipticity::Linear => a2.re > b2.im.abs(),
            Ellipticity::Strict => a2.re > b2.im * b2.im,
        }
    }
}

/// Coefficients of the operator
/// `[[a2 d^2 + a1 d + a0, -(b2 d^2 + b1 d + b0)], [b2 d^2 + b1 d + b0, a2 d^2 + a1 d + a0]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatorCoefficients {
    pub a2: C64,
    pub a1: C64,
    pub a0: C64,
    pub b2: C64,
    pub b1: C64,
    pub b0: C64,
}

/// Complex quadratic `c2 nu^2 + c1 nu + c0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quadratic {
    pub c2: C64,
    pub c1: C64,
    pub c0: C64,
}

impl Quadratic {
    #[inline]
    pub fn eval(&self, nu: C64) -> C64 {
        (self.c2 * nu + self.c1) * nu + self.c0
    }

    #[inline]
    pub fn deriv(&self, nu: C64) -> C64 {
        self.c2 * 2.0 * nu + self.c1
    }

    /// Both roots, larger real part first (ties: larger imaginary part first).
    pub fn roots(&self) -> Result<[C64; 2]> {
        if self.c2.norm() == 0.0 {
            return Err(Error::DegenerateLeadingCoefficient);
        }
        let disc = (self.c1 * self.c1 - self.c2 * self.c0 * 4.0).sqrt();
        // Cancellation-free form: pick the sign that maximizes |q|.
        let q = if (self.c1.conj() * disc).re >= 0.0 {
            -(self.c1 + disc) * 0.5
        } else {
            -(self.c1 - disc) * 0.5
        };
        let (r1, r2) = if q.norm() == 0.0 {
            (C64::new(0.0, 0.0), C64::new(0.0, 0.0))
        } else {
            (q / self.c2, self.c0 / q)
        };
        let mut r = [r1, r2];
        sort_desc(&mut r);
        Ok(r)
    }

    /// Double-root location `-c1 / (2 c2)`.
    pub fn vertex(&self) -> C64 {
        -self.c1 / (self.c2 * 2.0)
    }
}

fn desc_order(a: &C64, b: &C64) -> std::cmp::Ordering {
    b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im))
}

fn sort_desc(v: &mut [C64]) {
    v.sort_by(desc_order);
}

impl OperatorCoefficients {
    /// Validated constructor using the default (linear) ellipticity rule.
    pub fn new(a2: C64, a1: C64, a0: C64, b2: C64, b1: C64, b0: C64) -> Result<Self> {
        Self::with_rule(a2, a1, a0, b2, b1, b0, Ellipticity::Linear)
    }

    pub fn with_rule(
        a2: C64,
        a1: C64,
        a0: C64,
        b2: C64,
        b1: C64,
        b0: C64,
        rule: Ellipticity,
    ) -> Result<Self> {
        let c = Self::validated(a2, a1, a0, b2, b1, b0, rule)?;
        if b2.norm() == 0.0 {
            return Err(Error::InvalidParams("b2 must be nonzero".into()));
        }
        Ok(c)
    }

    /// Checks everything except `b2 != 0`; the decoupled case b2 = 0 still
    /// has a well-defined factorization (real Ginzburg-Landau).
    fn validated(
        a2: C64,
        a1: C64,
        a0: C64,
        b2: C64,
        b1: C64,
        b0: C64,
        rule: Ellipticity,
    ) -> Result<Self> {
        let c = OperatorCoefficients { a2, a1, a0, b2, b1, b0 };
        if [a2, a1, a0, b2, b1, b0].iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParams("non-finite coefficient".into()));
        }
        if a2.norm() == 0.0 {
            return Err(Error::InvalidParams("a2 must be nonzero".into()));
        }
        if !rule.holds(a2, b2) {
            return Err(Error::EllipticityViolated(format!(
                "Re a2 = {} against Im b2 = {} ({:?} rule)",
                a2.re, b2.im, rule
            )));
        }
        Ok(c)
    }

    /// Constructor without any checks, for probing hypothesis violations.
    pub fn unchecked(a2: C64, a1: C64, a0: C64, b2: C64, b1: C64, b0: C64) -> Self {
        OperatorCoefficients { a2, a1, a0, b2, b1, b0 }
    }

    /// `D(lambda, nu) = (a2 nu^2 + a1 nu + a0 - lambda)^2 + (b2 nu^2 + b1 nu + b0)^2`.
    pub fn dispersion(&self, lambda: C64, nu: C64) -> C64 {
        let x = (self.a2 * nu + self.a1) * nu + self.a0 - lambda;
        let y = (self.b2 * nu + self.b1) * nu + self.b0;
        x * x + y * y
    }

    fn max_magnitude(&self) -> f64 {
        [self.a2, self.a1, self.a0, self.b2, self.b1, self.b0]
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// The factor with `+`: `(a2 + i b2) nu^2 + (a1 + i b1) nu + (a0 + i b0)`.
    pub fn plus_symbol(&self) -> Quadratic {
        Quadratic { c2: self.a2 + I * self.b2, c1: self.a1 + I * self.b1, c0: self.a0 + I * self.b0 }
    }

    pub fn minus_symbol(&self) -> Quadratic {
        Quadratic { c2: self.a2 - I * self.b2, c1: self.a1 - I * self.b1, c0: self.a0 - I * self.b0 }
    }
}

/// Splits the quartic dispersion relation at `lambda` into `P+ * P-`.
pub fn factor_dispersion(c: &OperatorCoefficients, lambda: C64) -> (Quadratic, Quadratic) {
    let mut p = c.plus_symbol();
    let mut m = c.minus_symbol();
    p.c0 -= lambda;
    m.c0 -= lambda;
    (p, m)
}

/// The four spatial roots, ordered by descending real part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpatialRoots {
    pub roots: [C64; 4],
}

pub fn spatial_roots(c: &OperatorCoefficients, lambda: C64) -> Result<SpatialRoots> {
    let (p, m) = factor_dispersion(c, lambda);
    let rp = p.roots()?;
    let rm = m.roots()?;
    let mut roots = [rp[0], rp[1], rm[0], rm[1]];
    sort_desc(&mut roots);
    Ok(SpatialRoots { roots })
}

fn unstable_count(c: &OperatorCoefficients, lambda: C64) -> Result<usize> {
    Ok(spatial_roots(c, lambda)?.roots.iter().filter(|z| z.re > 0.0).count())
}

/// Number of spatial roots with positive real part for large real lambda.
pub fn morse_index(c: &OperatorCoefficients) -> Result<usize> {
    let m = 1.0 + c.max_magnitude();
    let r = 10.0 * m * m;
    let first = unstable_count(c, C64::new(r, 0.0))?;
    let second = unstable_count(c, C64::new(4.0 * r, 0.0))?;
    if first != second || first != 2 {
        return Err(Error::IndexUnstable(first, second));
    }
    Ok(first)
}

/// Half-line `anchor + r * direction`, r >= 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalfLine {
    pub anchor: C64,
    pub direction: C64,
}

impl HalfLine {
    pub fn point(&self, r: f64) -> C64 {
        self.anchor + self.direction * r
    }
}

/// The absolute spectrum as two half-lines (from the `+` and `-` factors).
pub fn absolute_spectrum(c: &OperatorCoefficients) -> (HalfLine, HalfLine) {
    let half = |q: Quadratic| HalfLine {
        anchor: q.c0 - q.c1 * q.c1 / (q.c2 * 4.0),
        direction: -q.c2,
    };
    (half(c.plus_symbol()), half(c.minus_symbol()))
}

/// Largest real part over the absolute spectrum.
pub fn absolute_abscissa(c: &OperatorCoefficients) -> f64 {
    let (p, m) = absolute_spectrum(c);
    p.anchor.re.max(m.anchor.re)
}

/// Largest real part of the essential spectrum in the weight `eta`
/// (spatial rates `nu = i k + eta`).
pub fn weighted_abscissa(c: &OperatorCoefficients, eta: f64) -> f64 {
    let branch = |q: Quadratic| {
        // lambda(k) = -c2 k^2 + i (c1 + 2 c2 eta) k + q(eta)
        let lin = I * (q.c1 + q.c2 * (2.0 * eta));
        let base = q.eval(C64::new(eta, 0.0));
        // Re lambda = -c2r k^2 + lin.re k + base.re
        base.re + lin.re * lin.re / (4.0 * q.c2.re)
    };
    branch(c.plus_symbol()).max(branch(c.minus_symbol()))
}

/// Weight at which the weighted essential spectrum of the `+` factor
/// collapses onto its absolute-spectrum half-line.
pub fn optimal_weight_general(c: &OperatorCoefficients) -> f64 {
    let q = c.plus_symbol();
    -(q.c2.re * q.c1.re + q.c2.im * q.c1.im) / (2.0 * q.c2.norm_sqr())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DoubleRoot {
    pub lambda: C64,
    pub nu: C64,
    pub simple: bool,
    pub pinched: bool,
}

/// Threshold for degeneracy tests on normalized quantities.
pub const DOUBLE_ROOT_TOL: f64 = 1e-9;

/// Largest coefficient magnitude of `P+ P-` as a polynomial in nu.
fn quartic_scale(p: &Quadratic, m: &Quadratic) -> f64 {
    let coeffs = [
        p.c2 * m.c2,
        p.c2 * m.c1 + p.c1 * m.c2,
        p.c2 * m.c0 + p.c1 * m.c1 + p.c0 * m.c2,
        p.c1 * m.c0 + p.c0 * m.c1,
        p.c0 * m.c0,
    ];
    coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE)
}

/// Simplicity test: both `d_lambda D` and `d_nu^2 D` nonzero at the root.
fn is_simple(c: &OperatorCoefficients, lambda: C64, nu: C64) -> bool {
    let (p, m) = factor_dispersion(c, lambda);
    let scale = quartic_scale(&p, &m);
    let (pv, mv) = (p.eval(nu), m.eval(nu));
    let (pd, md) = (p.deriv(nu), m.deriv(nu));
    let d_lambda = -(pv + mv);
    let d_nunu = p.c2 * 2.0 * mv + pd * md * 2.0 + pv * m.c2 * 2.0;
    d_lambda.norm() / scale > DOUBLE_ROOT_TOL && d_nunu.norm() / scale > DOUBLE_ROOT_TOL
}

/// The two double roots at the half-line anchors.
pub fn double_roots(c: &OperatorCoefficients) -> Vec<DoubleRoot> {
    let (hp, hm) = absolute_spectrum(c);
    let mut out = Vec::with_capacity(2);
    for (q, half) in [(c.plus_symbol(), hp), (c.minus_symbol(), hm)] {
        let nu = q.vertex();
        let lambda = half.anchor;
        let mut d = DoubleRoot { lambda, nu, simple: is_simple(c, lambda, nu), pinched: false };
        d.pinched = is_pinched(c, &d).unwrap_or(false);
        out.push(d);
    }
    out
}

/// Pinching test: boundary criterion first, root continuation as fallback.
pub fn is_pinched(c: &OperatorCoefficients, d: &DoubleRoot) -> Result<bool> {
    let top = absolute_abscissa(c);
    if (d.lambda.re - top).abs() <= DOUBLE_ROOT_TOL * (1.0 + top.abs()) {
        return Ok(true);
    }
    pinched_by_continuation(c, d)
}

/// Follows the four roots along `lambda_dr + tau` and checks that the two
/// roots leaving the collision end up on opposite sides of the imaginary axis.
fn pinched_by_continuation(c: &OperatorCoefficients, d: &DoubleRoot) -> Result<bool> {
    let t_end = 10.0 * (1.0 + d.lambda.norm());
    let scale = 1.0 + c.max_magnitude();
    // Start slightly off the collision so the pair is distinguishable.
    let mut tau = 1e-6 * scale;
    let mut roots = spatial_roots(c, d.lambda + tau)?.roots;
    let mut idx: Vec<usize> = (0..4).collect();
    idx.sort_by(|&a, &b| (roots[a] - d.nu).norm().total_cmp(&(roots[b] - d.nu).norm()));
    let pair = [idx[0], idx[1]];
    let mut step = 1e-3 * scale;
    while tau < t_end {
        let next_tau = (tau + step).min(t_end);
        let next = spatial_roots(c, d.lambda + next_tau)?.roots;
        // Greedy matching by proximity.
        let mut matched = [C64::new(0.0, 0.0); 4];
        let mut used = [false; 4];
        let mut worst = 0.0f64;
        for (i, r) in roots.iter().enumerate() {
            let (j, dist) = next
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .map(|(j, z)| (j, (z - r).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            used[j] = true;
            matched[i] = next[j];
            worst = worst.max(dist);
        }
        let sep = min_separation(&roots);
        if worst > 0.25 * sep && step > 1e-10 * scale {
            step *= 0.5;
            continue;
        }
        // Another collision involving the tracked pair is ambiguous.
        for &k in &pair {
            for j in 0..4 {
                if j != k && !pair.contains(&j) && (matched[k] - matched[j]).norm() < 1e-7 * scale {
                    return Err(Error::PathAmbiguous(next_tau));
                }
            }
        }
        roots = matched;
        tau = next_tau;
        if worst < 0.05 * sep {
            step *= 1.5;
        }
    }
    let (r0, r1) = (roots[pair[0]].re, roots[pair[1]].re);
    Ok(r0 * r1 < 0.0)
}

fn min_separation(r: &[C64; 4]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..4 {
        for j in i + 1..4 {
            m = m.min((r[i] - r[j]).norm());
        }
    }
    m
}

/// Coefficients of the linearization at a rest state in the frame `f`.
pub fn llgs_coefficients(p: &MaterialParams, f: Frame, pole: Pole) -> OperatorCoefficients {
    let d = p.damping();
    let a = p.alpha;
    let r = |x: f64| C64::new(x, 0.0);
    match pole {
        Pole::Minus => {
            let bm = p.beta / (1.0 - p.ccp);
            OperatorCoefficients {
                a2: r(a / d),
                a1: r(f.s),
                a0: r((a * (p.h + p.mu) - bm) / d),
                b2: r(1.0 / d),
                b1: r(0.0),
                b0: r((p.h + p.mu + a * bm) / d - f.omega),
            }
        }
        Pole::Plus => {
            let bp = p.beta / (1.0 + p.ccp);
            OperatorCoefficients {
                a2: r(a / d),
                a1: r(f.s),
                a0: r((bp - a * (p.h - p.mu)) / d),
                b2: r(-1.0 / d),
                b1: r(0.0),
                b0: r((p.h - p.mu + a * bp) / d - f.omega),
            }
        }
    }
}

/// Coefficients of the complex Ginzburg-Landau linearization at A = 0.
pub fn cgl_coefficients(gamma: f64, s: f64, omega: f64) -> Result<OperatorCoefficients> {
    let r = |x: f64| C64::new(x, 0.0);
    if !gamma.is_finite() || !s.is_finite() || !omega.is_finite() {
        return Err(Error::InvalidParams("non-finite CGL parameter".into()));
    }
    OperatorCoefficients::validated(r(1.0), r(s), r(1.0), r(gamma), r(0.0), r(-omega), Ellipticity::Linear)
}

fn required_regime(pole: Pole) -> Regime {
    match pole {
        Pole::Minus => Regime::MonostablePlus,
        Pole::Plus => Regime::MonostableMinus,
    }
}

/// Linear spreading predictions into the unstable rest state `pole`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpreadingPrediction {
    pub s_lin: f64,
    pub omega_lin: f64,
    /// Set when the parameters sit on the stability boundary of `pole`.
    pub marginal: bool,
}

/// Closed-form radicand `4 a0 / (alpha (1+alpha^2))`-style quantity, i.e. `s_lin^2`.
fn speed_squared(p: &MaterialParams, pole: Pole) -> f64 {
    let c = llgs_coefficients(p, Frame::default(), pole);
    // Re lambda_dr(s) = a0 - alpha s^2 / 4
    4.0 * c.a0.re / p.alpha
}

pub fn spreading_prediction(p: &MaterialParams, pole: Pole) -> Result<SpreadingPrediction> {
    let info = classify_regime(p);
    if info.regime != required_regime(pole) {
        return Err(Error::NotMonostable);
    }
    let s2 = speed_squared(p, pole);
    let s_lin = if info.marginal { s2.max(0.0).sqrt() } else { s2.sqrt() };
    let c = llgs_coefficients(p, Frame::new(s_lin, 0.0), pole);
    let (hp, _) = absolute_spectrum(&c);
    Ok(SpreadingPrediction { s_lin, omega_lin: hp.anchor.im, marginal: info.marginal })
}

pub fn linear_spreading_speed(p: &MaterialParams, pole: Pole) -> Result<f64> {
    let pred = spreading_prediction(p, pole)?;
    debug_assert!({
        let b = spreading_speed_by_bisection(p, pole)?;
        (b - pred.s_lin).abs() <= 1e-9 * (1.0 + pred.s_lin)
    });
    Ok(pred.s_lin)
}

pub fn linear_spreading_frequency(p: &MaterialParams, pole: Pole) -> Result<f64> {
    Ok(spreading_prediction(p, pole)?.omega_lin)
}

/// Solves `max Re lambda_dr(s) = 0` for s > 0 by bisection on the general
/// double-root formulas (independent of the closed form).
pub fn spreading_speed_by_bisection(p: &MaterialParams, pole: Pole) -> Result<f64> {
    if classify_regime(p).regime != required_regime(pole) {
        return Err(Error::NotMonostable);
    }
    let top = |s: f64| {
        let c = llgs_coefficients(p, Frame::new(s, 0.0), pole);
        double_roots(&c).iter().map(|d| d.lambda.re).fold(f64::NEG_INFINITY, f64::max)
    };
    if top(0.0) <= 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while top(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::NotMonostable);
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if top(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Weight `-alpha s / 2` at which the weighted essential spectrum of the
/// rest-state linearization collapses onto the absolute spectrum.
pub fn optimal_weight(p: &MaterialParams, s: f64) -> f64 {
    -p.alpha * s / 2.0
}
