//! Strategies and checks shared by the property tests and the acceptance run.
#![allow(dead_code)]

use dwsel::model::classify_regime;
use dwsel::spectral::*;
use dwsel::{Frame, MaterialParams, Pole, Regime};
use nalgebra::Matrix4;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub type Check = Result<(), TestCaseError>;

pub fn cplx(r: std::ops::Range<f64>) -> impl Strategy<Value = C64> {
    (r.clone(), r).prop_map(|(a, b)| C64::new(a, b))
}

/// Coefficient sets satisfying the linear ellipticity rule with `b2 != 0`.
pub fn coefficients() -> impl Strategy<Value = OperatorCoefficients> {
    (0.2..3.0f64, -2.0..2.0f64, -2.0..2.0f64, -0.95..0.95f64, cplx(-3.0..3.0), cplx(-3.0..3.0), cplx(-3.0..3.0), cplx(-3.0..3.0))
        .prop_filter_map("b2 vanishes", |(a2r, a2i, b2r, frac, a1, a0, b1, b0)| {
            let a2 = C64::new(a2r, a2i);
            let b2 = C64::new(b2r, frac * a2r);
            if b2.norm() < 1e-3 {
                return None;
            }
            OperatorCoefficients::new(a2, a1, a0, b2, b1, b0).ok()
        })
}

pub fn material() -> impl Strategy<Value = MaterialParams> {
    (0.2..3.0f64, 0.0..3.0f64, -3.0..-0.1f64, -0.8..0.8f64, -15.0..15.0f64)
        .prop_filter_map("invalid", |(a, b, mu, ccp, h)| MaterialParams::new(a, b, mu, ccp, h).ok())
}

/// Parameters in one of the two monostable regimes, with the pole being invaded.
pub fn monostable() -> impl Strategy<Value = (MaterialParams, Pole)> {
    material().prop_filter_map("not monostable", |p| {
        let info = classify_regime(&p);
        if info.marginal {
            return None;
        }
        match info.regime {
            Regime::MonostablePlus => Some((p, Pole::Minus)),
            Regime::MonostableMinus => Some((p, Pole::Plus)),
            _ => None,
        }
    })
}

pub fn pole() -> impl Strategy<Value = Pole> {
    prop_oneof![Just(Pole::Plus), Just(Pole::Minus)]
}

pub fn poly_mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Roots of the dispersion quartic from the eigenvalues of its companion
/// matrix, expanding the sum of squares directly (no factorization).
pub fn companion_roots(c: &OperatorCoefficients, lambda: C64) -> Vec<C64> {
    // ascending powers of nu
    let x = [c.a0 - lambda, c.a1, c.a2];
    let y = [c.b0, c.b1, c.b2];
    let xx = poly_mul(&x, &x);
    let yy = poly_mul(&y, &y);
    let d: Vec<C64> = xx.iter().zip(&yy).map(|(u, v)| u + v).collect();
    let lead = d[4];
    let mut m = Matrix4::<C64>::zeros();
    for i in 1..4 {
        m[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    for i in 0..4 {
        m[(i, 3)] = -d[i] / lead;
    }
    m.schur().eigenvalues().expect("triangular Schur form").iter().copied().collect()
}

pub fn scale_of(c: &OperatorCoefficients) -> f64 {
    [c.a2, c.a1, c.a0, c.b2, c.b1, c.b0].iter().map(|z| z.norm()).fold(1.0, f64::max)
}

/// Largest real part of `q` along the line where its two roots share a real
/// part, by grid search followed by golden-section refinement.
pub fn grid_search_abscissa(q: &Quadratic) -> f64 {
    // Vieta: equal real parts means both equal half the real part of the sum.
    let x = -0.5 * (q.c1 / q.c2).re;
    let re_at = |y: f64| q.eval(C64::new(x, y)).re;
    let (lo, hi, n) = (-60.0, 60.0, 24_001);
    let step = (hi - lo) / (n - 1) as f64;
    let best = (0..n).map(|k| lo + step * k as f64).max_by(|a, b| re_at(*a).total_cmp(&re_at(*b))).unwrap();
    let (mut a, mut b) = (best - step, best + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if re_at(c) > re_at(d) {
            b = d;
        } else {
            a = c;
        }
    }
    re_at(0.5 * (a + b))
}

pub fn check_factorization(c: &OperatorCoefficients, lambda: C64, nu: C64) -> Check {
    let (p, m) = factor_dispersion(c, lambda);
    let d = c.dispersion(lambda, nu);
    let x = (c.a2 * nu + c.a1) * nu + c.a0 - lambda;
    let y = (c.b2 * nu + c.b1) * nu + c.b0;
    let scale = (x.norm() + y.norm()).powi(2).max(1.0);
    prop_assert!((d - p.eval(nu) * m.eval(nu)).norm() <= 1e-12 * scale);
    Ok(())
}

pub fn check_roots(c: &OperatorCoefficients, lambda: C64) -> Check {
    let r = spatial_roots(c, lambda).unwrap().roots;
    for w in r.windows(2) {
        prop_assert!(w[0].re >= w[1].re);
    }
    let oracle = companion_roots(c, lambda);
    let sep = (0..4)
        .flat_map(|i| (i + 1..4).map(move |j| (i, j)))
        .map(|(i, j)| (r[i] - r[j]).norm())
        .fold(f64::INFINITY, f64::min);
    let (p, m) = factor_dispersion(c, lambda);
    for nu in r {
        let mag = (p.c2.norm() * nu.norm_sqr() + p.c1.norm() * nu.norm() + p.c0.norm())
            * (m.c2.norm() * nu.norm_sqr() + m.c1.norm() * nu.norm() + m.c0.norm());
        prop_assert!(c.dispersion(lambda, nu).norm() <= 1e-10 * mag.max(1.0), "residual at {}", nu);
        if sep > 1e-3 {
            let near = oracle.iter().map(|z| (z - nu).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(near <= 1e-8 * (1.0 + nu.norm()), "{} not among {:?}", nu, oracle);
        }
    }
    Ok(())
}

pub fn check_morse_index(c: &OperatorCoefficients) -> Check {
    prop_assert_eq!(morse_index(c).unwrap(), 2);
    Ok(())
}

pub fn check_anchor_maximal(c: &OperatorCoefficients, r: f64) -> Check {
    let (hp, hm) = absolute_spectrum(c);
    let top = absolute_abscissa(c);
    prop_assert!(hp.direction.re < 0.0 && hm.direction.re < 0.0);
    for h in [hp, hm] {
        prop_assert!(h.point(r).re <= top + 1e-12);
    }
    Ok(())
}

pub fn check_anchor_grid_search(c: &OperatorCoefficients) -> Check {
    let (hp, hm) = absolute_spectrum(c);
    for (q, h) in [(c.plus_symbol(), hp), (c.minus_symbol(), hm)] {
        prop_assume!(q.vertex().im.abs() < 50.0);
        let g = grid_search_abscissa(&q);
        prop_assert!((g - h.anchor.re).abs() <= 1e-6 * scale_of(c), "{} vs {}", g, h.anchor.re);
    }
    Ok(())
}

pub fn check_closed_form_speed(p: &MaterialParams, pole: Pole) -> Check {
    let closed = linear_spreading_speed(p, pole).unwrap();
    let bisect = spreading_speed_by_bisection(p, pole).unwrap();
    prop_assert!((closed - bisect).abs() <= 1e-10 * (1.0 + closed), "{} vs {}", closed, bisect);
    Ok(())
}

pub fn check_double_root_at_spreading_frame(p: &MaterialParams, pole: Pole) -> Check {
    let pred = spreading_prediction(p, pole).unwrap();
    let c = llgs_coefficients(p, Frame::new(pred.s_lin, pred.omega_lin), pole);
    for d in double_roots(&c) {
        prop_assert!(d.lambda.re.abs() < 1e-12 && d.lambda.im.abs() < 1e-12, "{}", d.lambda);
    }
    Ok(())
}

pub fn check_conjugate_double_roots(p: &MaterialParams, pole: Pole, s: f64, omega: f64) -> Check {
    let d = double_roots(&llgs_coefficients(p, Frame::new(s, omega), pole));
    prop_assert_eq!(d.len(), 2);
    prop_assert!((d[0].lambda - d[1].lambda.conj()).norm() <= 1e-12 * (1.0 + d[0].lambda.norm()));
    prop_assert!((d[0].nu - d[1].nu.conj()).norm() <= 1e-12 * (1.0 + d[0].nu.norm()));
    Ok(())
}
