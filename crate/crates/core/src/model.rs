//! Model parameters, rest states and regime classification.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

/// Dimensionless material constants and applied field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Gilbert damping, positive.
    pub alpha: f64,
    /// Current density, nonnegative.
    pub beta: f64,
    /// Anisotropy; negative for an easy-axis wire.
    pub mu: f64,
    /// Polarization ratio in (-1, 1).
    pub ccp: f64,
    /// Applied field.
    pub h: f64,
}

impl MaterialParams {
    /// Validated constructor for domain-wall work (requires `mu < 0`).
    pub fn new(alpha: f64, beta: f64, mu: f64, ccp: f64, h: f64) -> Result<Self> {
        let p = MaterialParams { alpha, beta, mu, ccp, h };
        p.validate()?;
        p.require_easy_axis()?;
        Ok(p)
    }

    /// Constructor that also admits `mu >= 0`; only meant for regime diagrams.
    pub fn for_regime_plot(alpha: f64, beta: f64, mu: f64, ccp: f64, h: f64) -> Result<Self> {
        let p = MaterialParams { alpha, beta, mu, ccp, h };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.beta, self.mu, self.ccp, self.h];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite value".into()));
        }
        if self.alpha <= 0.0 {
            return Err(Error::InvalidParams(format!("alpha = {} must be positive", self.alpha)));
        }
        if self.beta < 0.0 {
            return Err(Error::InvalidParams(format!("beta = {} must be nonnegative", self.beta)));
        }
        if !(self.ccp > -1.0 && self.ccp < 1.0) {
            return Err(Error::InvalidParams(format!("ccp = {} must lie in (-1, 1)", self.ccp)));
        }
        Ok(())
    }

    pub fn require_easy_axis(&self) -> Result<()> {
        if self.mu < 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("mu = {} must be negative", self.mu)))
        }
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn with_ccp(mut self, ccp: f64) -> Self {
        self.ccp = ccp;
        self
    }

    /// 1 + alpha^2.
    #[inline]
    pub fn damping(&self) -> f64 {
        1.0 + self.alpha * self.alpha
    }

    /// Effective current `beta / (1 + ccp m3)`.
    #[inline]
    pub fn beta_at(&self, m3: f64) -> f64 {
        self.beta / (1.0 + self.ccp * m3)
    }

    /// Local reaction term f(m) of the quasilinear form.
    #[inline]
    pub fn reaction(&self, m: Vec3) -> Vec3 {
        let d = self.damping();
        let b = self.beta_at(m[2]) / d;
        let hm = (self.h - self.mu * m[2]) / d;
        let a = self.alpha;
        let q = m[2] * m[2] - 1.0;
        [
            b * (m[0] * m[2] - a * m[1]) - hm * (a * m[0] * m[2] + m[1]),
            b * (m[1] * m[2] + a * m[0]) - hm * (a * m[1] * m[2] - m[0]),
            b * q - hm * a * q,
        ]
    }

    /// Right side of the quasilinear equation in a co-moving, co-rotating frame,
    /// evaluated pointwise from m and its first two derivatives:
    /// `D(m) m'' + s m' + omega R m + alpha/(1+alpha^2) |m'|^2 m + f(m)`.
    #[inline]
    pub fn quasilinear_rhs(&self, frame: Frame, m: Vec3, mp: Vec3, mpp: Vec3) -> Vec3 {
        let d = self.damping();
        let a = self.alpha;
        // D(m) v = (alpha v + v x m) / (1 + alpha^2)
        let vxm = cross(mpp, m);
        let grad2 = dot(mp, mp) * a / d;
        let f = self.reaction(m);
        let rot = [m[1], -m[0], 0.0];
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = (a * mpp[i] + vxm[i]) / d
                + frame.s * mp[i]
                + frame.omega * rot[i]
                + grad2 * m[i]
                + f[i];
        }
        out
    }
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Co-moving speed and co-rotation frequency about e3.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Frame {
    pub s: f64,
    pub omega: f64,
}

impl Frame {
    pub fn new(s: f64, omega: f64) -> Self {
        Frame { s, omega }
    }
}

/// One of the two rest states `+e3` / `-e3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pole {
    Plus,
    Minus,
}

impl Pole {
    /// m3 value of the rest state.
    pub fn tau(self) -> f64 {
        match self {
            Pole::Plus => 1.0,
            Pole::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Pole {
        match self {
            Pole::Plus => Pole::Minus,
            Pole::Minus => Pole::Plus,
        }
    }
}

/// Which rest state sits at the left end of a wall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `+e3` at the left, `-e3` at the right.
    PlusLeft,
    MinusLeft,
}

impl Orientation {
    /// +1 for `PlusLeft`, -1 for `MinusLeft`.
    pub fn sigma(self) -> f64 {
        match self {
            Orientation::PlusLeft => 1.0,
            Orientation::MinusLeft => -1.0,
        }
    }

    /// Jump `m3(+inf) - m3(-inf)`.
    pub fn delta3(self) -> f64 {
        -2.0 * self.sigma()
    }

    pub fn left(self) -> Pole {
        match self {
            Orientation::PlusLeft => Pole::Plus,
            Orientation::MinusLeft => Pole::Minus,
        }
    }

    pub fn flip(self) -> Orientation {
        match self {
            Orientation::PlusLeft => Orientation::MinusLeft,
            Orientation::MinusLeft => Orientation::PlusLeft,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Bistable,
    MonostablePlus,
    MonostableMinus,
    Biunstable,
}

impl Regime {
    /// Integer code used in CSV output.
    pub fn code(self) -> u8 {
        match self {
            Regime::Bistable => 0,
            Regime::MonostablePlus => 1,
            Regime::MonostableMinus => 2,
            Regime::Biunstable => 3,
        }
    }
}

/// Regime label together with a flag for parameters sitting exactly on a
/// stability boundary. On the boundary the marginal state counts as unstable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeInfo {
    pub regime: Regime,
    pub marginal: bool,
}

/// Returns `(beta+, beta-)`, the effective currents at the two poles.
pub fn beta_pm(p: &MaterialParams) -> (f64, f64) {
    (p.beta / (1.0 + p.ccp), p.beta / (1.0 - p.ccp))
}

/// Signed distances to the two stability thresholds; positive means stable.
fn stability_margins(p: &MaterialParams) -> (f64, f64) {
    let (bp, bm) = beta_pm(p);
    let plus = p.h - (bp / p.alpha + p.mu);
    let minus = (bm / p.alpha - p.mu) - p.h;
    (plus, minus)
}

fn is_marginal(margin: f64, p: &MaterialParams) -> bool {
    let scale = 1.0 + p.h.abs() + p.mu.abs() + p.beta / p.alpha;
    margin.abs() <= 1e-12 * scale
}

pub fn classify_regime(p: &MaterialParams) -> RegimeInfo {
    let (plus, minus) = stability_margins(p);
    let plus_marginal = is_marginal(plus, p);
    let minus_marginal = is_marginal(minus, p);
    let plus_stable = plus > 0.0 && !plus_marginal;
    let minus_stable = minus > 0.0 && !minus_marginal;
    let regime = match (plus_stable, minus_stable) {
        (true, true) => Regime::Bistable,
        (true, false) => Regime::MonostablePlus,
        (false, true) => Regime::MonostableMinus,
        (false, false) => Regime::Biunstable,
    };
    RegimeInfo { regime, marginal: plus_marginal || minus_marginal }
}

/// Boundary curve values `(Gamma+, Gamma-)`; each vanishes exactly on the
/// stability boundary of the corresponding pole.
pub fn gamma_curves(p: &MaterialParams) -> Result<(f64, f64)> {
    let (bp, bm) = beta_pm(p);
    let dp = p.h - p.mu;
    let dm = p.h + p.mu;
    if dp == 0.0 {
        return Err(Error::PoleAtAnisotropyField("mu"));
    }
    if dm == 0.0 {
        return Err(Error::PoleAtAnisotropyField("-mu"));
    }
    Ok(((bp / p.alpha) / dp - 1.0, 1.0 - (bm / p.alpha) / dm))
}

/// The two real symbols (A(nu) - lambda, B(nu)) whose squares sum to the
/// rest-state dispersion relation at `pole`.
fn rest_state_symbols(p: &MaterialParams, f: Frame, pole: Pole, lambda: C64, nu: C64) -> (C64, C64) {
    let tau = pole.tau();
    let d = p.damping();
    let a = p.alpha;
    let bt = p.beta_at(tau);
    let hm = p.h - p.mu * tau;
    let nu2 = nu * nu;
    let diag = nu2 * (a / d) + nu * f.s + (tau * bt - a * hm * tau) / d - lambda;
    let off = nu2 * (-tau / d) + (a * bt + hm) / d - f.omega;
    (diag, off)
}

/// Dispersion relation of the linearization at a rest state, in a frame
/// moving with speed `f.s` and rotating with `f.omega`.
pub fn rest_state_dispersion(p: &MaterialParams, f: Frame, pole: Pole, lambda: C64, nu: C64) -> C64 {
    let (x, y) = rest_state_symbols(p, f, pole, lambda, nu);
    x * x + y * y
}

/// A point of a (weighted) essential spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumPoint {
    pub lambda: C64,
    pub k: f64,
    pub eta: f64,
}

/// Both branches of the weighted essential spectrum, sampled at `k_grid`.
/// For each k the two branches are emitted in order (+, -).
pub fn essential_spectrum_curve(
    p: &MaterialParams,
    f: Frame,
    pole: Pole,
    eta: f64,
    k_grid: &[f64],
) -> Vec<SpectrumPoint> {
    let mut out = Vec::with_capacity(2 * k_grid.len());
    for &k in k_grid {
        let nu = C64::new(eta, k);
        // With lambda = 0 the symbols give A(nu) and B(nu); solutions are A +- iB.
        let (a, b) = rest_state_symbols(p, f, pole, C64::new(0.0, 0.0), nu);
        let i = C64::i();
        out.push(SpectrumPoint { lambda: a + i * b, k, eta });
        out.push(SpectrumPoint { lambda: a - i * b, k, eta });
    }
    out
}
