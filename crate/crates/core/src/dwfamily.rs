//! The explicit homogeneous wall family, stability threshold, critical fields,
//! coherent-structure ODE residuals and the standing-wall heuristic.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{classify_regime, Frame, MaterialParams, Orientation, Regime, Vec3};

fn require_homogeneous(p: &MaterialParams) -> Result<()> {
    p.validate()?;
    p.require_easy_axis()?;
    if p.ccp != 0.0 {
        return Err(Error::InvalidParams(format!("explicit wall family needs ccp = 0, got {}", p.ccp)));
    }
    Ok(())
}

/// The explicit wall `(sech(sigma k xi), 0, -tanh(sigma k xi))`, `k = sqrt(-mu)`.
pub fn profile_m0(mu: f64, sigma: f64, xi: f64) -> Vec3 {
    let u = sigma * (-mu).sqrt() * xi;
    [1.0 / u.cosh(), 0.0, -u.tanh()]
}

/// Profile with its first and second derivatives in xi.
pub fn profile_m0_derivs(mu: f64, sigma: f64, xi: f64) -> (Vec3, Vec3, Vec3) {
    let k = (-mu).sqrt();
    let u = sigma * k * xi;
    let (sech, tanh) = (1.0 / u.cosh(), u.tanh());
    let sk = sigma * k;
    let m = [sech, 0.0, -tanh];
    let mp = [-sk * sech * tanh, 0.0, -sk * sech * sech];
    let mpp = [k * k * (sech * tanh * tanh - sech * sech * sech), 0.0, 2.0 * k * k * sech * sech * tanh];
    (m, mp, mpp)
}

/// Speed and frequency of the explicit wall with the given orientation.
pub fn frame_m0(p: &MaterialParams, orientation: Orientation) -> Result<Frame> {
    require_homogeneous(p)?;
    let d = p.damping();
    let s = orientation.sigma() * (p.alpha * p.h - p.beta) / (d * (-p.mu).sqrt());
    Ok(Frame::new(s, (p.h + p.alpha * p.beta) / d))
}

/// A member of the explicit family together with its frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExplicitDW {
    pub sigma: f64,
    pub params: MaterialParams,
    pub frame: Frame,
}

impl ExplicitDW {
    pub fn new(p: &MaterialParams, orientation: Orientation) -> Result<Self> {
        Ok(ExplicitDW { sigma: orientation.sigma(), params: *p, frame: frame_m0(p, orientation)? })
    }

    pub fn profile(&self, xi: f64) -> Vec3 {
        profile_m0(self.params.mu, self.sigma, xi)
    }

    pub fn derivs(&self, xi: f64) -> (Vec3, Vec3, Vec3) {
        profile_m0_derivs(self.params.mu, self.sigma, xi)
    }
}

/// Field bound below which the explicit wall is linearly stable.
pub fn stability_threshold(p: &MaterialParams) -> f64 {
    p.beta / p.alpha - 9.0 * p.mu / (9.0 + 2.0 * 3f64.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalFields {
    /// Lower field where the explicit speed meets the linear spreading speed.
    pub h_s_plus: f64,
    /// Upper field where the explicit speed meets the linear spreading speed.
    pub h_s_minus: f64,
    /// Field where the explicit frequency meets the linear spreading frequency.
    pub h_omega: f64,
}

pub fn critical_fields(p: &MaterialParams) -> Result<CriticalFields> {
    require_homogeneous(p)?;
    let a2 = p.alpha * p.alpha;
    let base = p.beta / p.alpha - 2.0 * p.mu - 2.0 * p.mu / a2;
    let root = 2.0 * p.mu / a2 * (1.0 + a2).sqrt();
    Ok(CriticalFields {
        h_s_plus: base + root,
        h_s_minus: base - root,
        h_omega: p.beta / p.alpha - 2.0 * p.mu,
    })
}

/// Polar and azimuthal angles sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphericalProfile {
    pub xi0: f64,
    pub dxi: f64,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

impl SphericalProfile {
    /// Samples the explicit wall on `[-half_width, half_width]` with `n` points.
    pub fn explicit(mu: f64, sigma: f64, half_width: f64, n: usize) -> Self {
        let dxi = 2.0 * half_width / (n - 1) as f64;
        let k = (-mu).sqrt();
        let theta = (0..n)
            .map(|i| {
                let xi = -half_width + i as f64 * dxi;
                2.0 * (sigma * k * xi).exp().atan()
            })
            .collect();
        SphericalProfile { xi0: -half_width, dxi, theta, phi: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// Max-norm residuals `(r_theta, r_phi)` of the steady coherent-structure
/// equations, with centered second-order differences at interior points where
/// `sin(theta) > 1e-3`.
pub fn coherent_ode_residual(prof: &SphericalProfile, f: Frame, p: &MaterialParams) -> Result<(f64, f64)> {
    let n = prof.len();
    if prof.phi.len() != n {
        return Err(Error::InvalidParams("theta and phi lengths differ".into()));
    }
    let (th, ph, dx) = (&prof.theta, &prof.phi, prof.dxi);
    let (s, om, a) = (f.s, f.omega, p.alpha);
    let mut r_theta = 0.0f64;
    let mut r_phi = 0.0f64;
    let mut used = 0usize;
    for i in 1..n.saturating_sub(1) {
        let (sin, cos) = th[i].sin_cos();
        if sin <= 1e-3 {
            continue;
        }
        used += 1;
        let t1 = (th[i + 1] - th[i - 1]) / (2.0 * dx);
        let t2 = (th[i + 1] - 2.0 * th[i] + th[i - 1]) / (dx * dx);
        let p1 = (ph[i + 1] - ph[i - 1]) / (2.0 * dx);
        let p2 = (ph[i + 1] - 2.0 * ph[i] + ph[i - 1]) / (dx * dx);
        let rt = t2 + a * s * t1 - sin * (s * p1 + p1 * p1 * cos + p.h - p.mu * cos - om);
        let rp = p2 * sin + s * t1 + 2.0 * p1 * t1 * cos + sin * (a * s * p1 + p.beta_at(cos) - a * om);
        r_theta = r_theta.max(rt.abs());
        r_phi = r_phi.max(rp.abs());
    }
    if used == 0 {
        return Err(Error::SingularProfile);
    }
    Ok((r_theta, r_phi))
}

/// Heuristic standing field: where the two rest states have equal modified
/// potential. Even in ccp, equal to beta/alpha at ccp = 0.
pub fn standing_field_h(p: &MaterialParams) -> f64 {
    let c = p.ccp;
    let ratio = if c.abs() < 1e-4 { 1.0 + c * c / 3.0 } else { c.atanh() / c };
    p.beta / p.alpha * ratio
}

/// `ln(1 + c x) / c`, continuous through c = 0.
fn log_ratio(c: f64, x: f64) -> f64 {
    if c.abs() < 1e-4 {
        let cx = c * x;
        x * (1.0 - cx / 2.0 + cx * cx / 3.0 - cx * cx * cx / 4.0)
    } else {
        (c * x).ln_1p() / c
    }
}

/// `(V, V~)` at `m3`: the field/anisotropy potential with the current folded
/// in as a field shift, and the variant carrying the spin-torque potential.
pub fn potentials(m3: f64, p: &MaterialParams) -> Result<(f64, f64)> {
    if !(m3.abs() <= 1.0) {
        return Err(Error::InvalidParams(format!("|m3| = {} exceeds 1", m3.abs())));
    }
    let arg = 1.0 + p.ccp * m3;
    if arg <= 0.0 {
        return Err(Error::LogDomain(arg));
    }
    let v = -(p.h - p.beta / p.alpha) * m3 + 0.5 * p.mu * m3 * m3;
    let vt = -p.h * m3 + 0.5 * p.mu * m3 * m3 + p.beta / p.alpha * log_ratio(p.ccp, m3);
    Ok((v, vt))
}

fn sign_with_tol(x: f64, scale: f64) -> i8 {
    if x.abs() <= 1e-12 * scale {
        0
    } else if x > 0.0 {
        1
    } else {
        -1
    }
}

/// Leading-order propagation sign `sgn(Delta3) sgn(beta - alpha h)`.
pub fn propagation_sign_leading_order(p: &MaterialParams, orientation: Orientation) -> i8 {
    let scale = 1.0 + p.beta + (p.alpha * p.h).abs();
    let d3 = orientation.delta3().signum() as i8;
    d3 * sign_with_tol(p.beta - p.alpha * p.h, scale)
}

/// Predicted direction of a bistable wall (sign of its speed), from the
/// standing-field heuristic: the rest state with the lower modified potential
/// invades the other. Exact at ccp = 0 to leading order; a heuristic otherwise.
pub fn propagation_sign(p: &MaterialParams, orientation: Orientation) -> Result<i8> {
    if classify_regime(p).regime != Regime::Bistable {
        return Err(Error::NotBistable);
    }
    if p.ccp == 0.0 {
        return Ok(propagation_sign_leading_order(p, orientation));
    }
    let hh = standing_field_h(p);
    let s = sign_with_tol(p.h - hh, 1.0 + p.h.abs() + hh.abs());
    Ok(match orientation {
        Orientation::PlusLeft => s,
        Orientation::MinusLeft => -s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Pole;
    use crate::spectral::{linear_spreading_frequency, linear_spreading_speed};

    fn params(ccp: f64, h: f64) -> MaterialParams {
        MaterialParams::new(1.0, 0.75, -1.0, ccp, h).unwrap()
    }

    #[test]
    fn profile_limits_and_norm() {
        assert_eq!(profile_m0(-1.0, 1.0, 0.0), [1.0, 0.0, 0.0]);
        let r = profile_m0(-1.0, 1.0, 40.0);
        assert!((r[2] + 1.0).abs() < 1e-15);
        let l = profile_m0(-1.0, 1.0, -40.0);
        assert!((l[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn derivs_match_differences() {
        let h = 1e-5;
        for &xi in &[-2.0, -0.3, 0.0, 0.7, 3.1] {
            for &sigma in &[1.0, -1.0] {
                let (_, mp, mpp) = profile_m0_derivs(-2.0, sigma, xi);
                let a = profile_m0(-2.0, sigma, xi + h);
                let b = profile_m0(-2.0, sigma, xi - h);
                let c = profile_m0(-2.0, sigma, xi);
                for i in 0..3 {
                    assert!(((a[i] - b[i]) / (2.0 * h) - mp[i]).abs() < 1e-8);
                    assert!(((a[i] - 2.0 * c[i] + b[i]) / (h * h) - mpp[i]).abs() < 1e-4);
                }
            }
        }
    }

    #[test]
    fn frame_examples() {
        let f = frame_m0(&params(0.0, 1.9), Orientation::PlusLeft).unwrap();
        assert!((f.s - 0.575).abs() < 1e-12 && (f.omega - 1.325).abs() < 1e-12);
        let f = frame_m0(&params(0.0, 0.75), Orientation::PlusLeft).unwrap();
        assert_eq!(f.s, 0.0);
        let f = frame_m0(&params(0.0, 1.0), Orientation::MinusLeft).unwrap();
        assert!((f.omega - 0.875).abs() < 1e-15 && (f.s.abs() - 0.125).abs() < 1e-15);
        assert!(frame_m0(&params(0.5, 1.0), Orientation::PlusLeft).is_err());
    }

    #[test]
    fn explicit_wall_is_steady_in_its_frame() {
        for orient in [Orientation::PlusLeft, Orientation::MinusLeft] {
            let p = MaterialParams::new(0.7, 0.4, -1.6, 0.0, 2.3).unwrap();
            let w = ExplicitDW::new(&p, orient).unwrap();
            for &xi in &[-3.0, -0.5, 0.0, 0.4, 2.5] {
                let (m, mp, mpp) = w.derivs(xi);
                let r = p.quasilinear_rhs(w.frame, m, mp, mpp);
                assert!(r.iter().all(|v| v.abs() < 1e-13), "{r:?}");
            }
        }
    }

    #[test]
    fn threshold_values() {
        let p0 = MaterialParams::new(1.0, 0.0, -1.0, 0.0, 0.0).unwrap();
        assert!((stability_threshold(&p0) - 0.7220).abs() < 1e-4);
        assert!((stability_threshold(&params(0.0, 0.0)) - 1.4720).abs() < 1e-4);
    }

    #[test]
    fn critical_field_values() {
        let p = params(0.0, 0.0);
        let c = critical_fields(&p).unwrap();
        assert!((c.h_s_plus - 1.92).abs() < 5e-3);
        assert!((c.h_s_minus - 7.58).abs() < 5e-3);
        assert!((c.h_omega - 2.75).abs() < 1e-12);
        for h in [c.h_s_plus, c.h_s_minus] {
            let q = p.with_h(h);
            let s = frame_m0(&q, Orientation::PlusLeft).unwrap().s;
            assert!((s - linear_spreading_speed(&q, Pole::Minus).unwrap()).abs() < 1e-10);
        }
        let q = p.with_h(c.h_omega);
        let om = frame_m0(&q, Orientation::PlusLeft).unwrap().omega;
        assert!((om - linear_spreading_frequency(&q, Pole::Minus).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn residual_of_explicit_wall() {
        let p = params(0.0, 2.0);
        let f = frame_m0(&p, Orientation::PlusLeft).unwrap();
        let prof = SphericalProfile::explicit(p.mu, 1.0, 20.0, 4001);
        let (rt, rp) = coherent_ode_residual(&prof, f, &p).unwrap();
        assert!(rt < 1e-4 && rp < 1e-4, "{rt} {rp}");
        let (rt, _) = coherent_ode_residual(&prof, Frame::new(f.s, f.omega + 0.1), &p).unwrap();
        assert!(rt > 1e-2);
    }

    #[test]
    fn residual_of_constant_state() {
        let p = MaterialParams::new(0.8, 0.3, -1.2, 0.2, 1.7).unwrap();
        let f = Frame::new(0.4, 0.9);
        let prof = SphericalProfile {
            xi0: 0.0,
            dxi: 0.1,
            theta: vec![std::f64::consts::FRAC_PI_2; 5],
            phi: vec![0.0; 5],
        };
        let (rt, rp) = coherent_ode_residual(&prof, f, &p).unwrap();
        assert!((rt - (p.h - f.omega).abs()).abs() < 1e-14);
        assert!((rp - (p.beta - p.alpha * f.omega).abs()).abs() < 1e-14);
    }

    #[test]
    fn residual_needs_interior_window() {
        let p = params(0.0, 2.0);
        let prof = SphericalProfile { xi0: 0.0, dxi: 0.1, theta: vec![0.0; 5], phi: vec![0.0; 5] };
        assert_eq!(coherent_ode_residual(&prof, Frame::default(), &p), Err(Error::SingularProfile));
    }

    #[test]
    fn standing_field_values() {
        assert!((standing_field_h(&params(0.0, 0.0)) - 0.75).abs() < 1e-15);
        let v = standing_field_h(&params(0.5, 0.0));
        assert!((v - 0.75 * 3f64.ln()).abs() < 1e-14);
        assert!((v - 0.8240).abs() < 1e-4);
        for c in [0.99e-4, 1.01e-4, -1.01e-4] {
            let v = standing_field_h(&params(c, 0.0));
            assert!((v - 0.75 * (1.0 + c * c / 3.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn potentials_examples() {
        let p = params(0.0, 1.3);
        for m3 in [-1.0, -0.3, 0.0, 0.6, 1.0] {
            let (v, vt) = potentials(m3, &p).unwrap();
            assert!((v - vt).abs() < 1e-15);
        }
        let q = params(0.0, 0.9);
        let (vp, _) = potentials(1.0, &q).unwrap();
        let (vm, _) = potentials(-1.0, &q).unwrap();
        assert!(vp < vm);
        assert!(potentials(1.5, &p).is_err());
    }

    #[test]
    fn propagation_examples() {
        assert_eq!(propagation_sign(&params(0.0, 0.75), Orientation::PlusLeft).unwrap(), 0);
        assert_eq!(propagation_sign(&params(0.5, 1.0), Orientation::PlusLeft).unwrap(), 1);
        assert_eq!(propagation_sign(&params(0.5, 1.0), Orientation::MinusLeft).unwrap(), -1);
        assert_eq!(propagation_sign(&params(0.5, 0.7), Orientation::PlusLeft).unwrap(), -1);
        assert_eq!(propagation_sign(&params(0.0, 10.0), Orientation::PlusLeft), Err(Error::NotBistable));
    }

    #[test]
    fn explicit_speed_sign_matches_prediction() {
        for h in [0.1, 0.5, 1.0, 1.5] {
            let p = params(0.0, h);
            for o in [Orientation::PlusLeft, Orientation::MinusLeft] {
                let s = frame_m0(&p, o).unwrap().s;
                assert_eq!(propagation_sign(&p, o).unwrap(), s.signum() as i8);
            }
        }
    }
}
