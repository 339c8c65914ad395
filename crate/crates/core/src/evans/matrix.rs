//! First-order 6x6 systems for the linearization about the explicit wall.
//!
//! State ordering is `(n1, n1', n2, n2', n3, n3')` throughout. Three
//! constructions are provided: the entrywise table ([`assemble_a`]), the
//! analytic linearization ([`linearized_a`]) and a finite-difference
//! Jacobian of the quasilinear right side ([`jacobian_oracle`]).

use num_complex::Complex64 as C64;
use serde::Serialize;

use super::{EvansProblem, Mat6};
use crate::dwfamily::profile_m0_derivs;
use crate::model::Vec3;

type M3 = [[f64; 3]; 3];

/// Profile values used by the matrix entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileData {
    pub m: Vec3,
    pub mp: Vec3,
    pub mpp: Vec3,
}

impl ProfileData {
    pub fn at(prob: &EvansProblem, xi: f64) -> Self {
        let (m, mp, mpp) = profile_m0_derivs(prob.params.mu, 1.0, xi);
        ProfileData { m, mp, mpp }
    }

    /// `|m'|^2`.
    pub fn grad2(&self) -> f64 {
        self.mp.iter().map(|x| x * x).sum()
    }
}

fn zero6() -> Mat6 {
    [[C64::new(0.0, 0.0); 6]; 6]
}

/// Interleave lower blocks `n'' = r n + q n'` into the first-order matrix.
fn interleave(r: [[C64; 3]; 3], q: [[C64; 3]; 3]) -> Mat6 {
    let mut a = zero6();
    for i in 0..3 {
        a[2 * i][2 * i + 1] = C64::new(1.0, 0.0);
        for j in 0..3 {
            a[2 * i + 1][2 * j] = r[i][j];
            a[2 * i + 1][2 * j + 1] = q[i][j];
        }
    }
    a
}

/// The closed-form table of entries `u_ij`, `v_ij`, placed as
/// `n_i'' = -sum_j (u_ij n_j + v_ij n_j')`. The weight is built into the entries.
pub fn assemble_a(prob: &EvansProblem, lambda: C64, xi: f64) -> Mat6 {
    let (al, be, mu, h) = (prob.params.alpha, prob.params.beta, prob.params.mu, prob.params.h);
    let (s, om, eta) = (prob.frame.s, prob.frame.omega, prob.eta);
    let pd = ProfileData::at(prob, xi);
    let (m1, m3) = (pd.m[0], pd.m[2]);
    let (m1pp, m3pp) = (pd.mpp[0], pd.mpp[2]);
    let q = pd.grad2();
    let norm2: f64 = pd.m.iter().map(|x| x * x).sum();
    let a2 = 1.0 + al * al;
    let hm = h - mu * m3;
    let l = lambda;
    let (c11, c33) = (al * al + m1 * m1, al * al + m3 * m3);
    let se = s * eta;

    let mut u = [[C64::new(0.0, 0.0); 3]; 3];
    u[0][0] = c11 / a2 * q + be * c11 / (al * a2) * m3 - c11 * hm / a2 * m3 - c11 / al * l - m3 * m3pp / a2
        + om * m3
        - (al * be + hm) / a2 * m3
        + se * c11 / al
        + eta * eta;
    u[0][1] = -c11 / (al * a2) * m3pp + om * c11 / al - c11 * (hm + al * be) / (al * a2) - al / a2 * q * m3
        + (al * hm - be) / a2 * m3
        - l * m3
        + m1 * m3 * m1pp / (al * a2)
        - se * m3;
    u[0][2] = be * c11 / (al * a2) * m1 + mu * c11 / a2 * m1 * m3 - c11 * hm / a2 * m1 + m1pp * m3 / a2
        + mu * m1 * m3 / a2
        + m1 * m3 / a2 * q
        - (2.0 * al * hm - 2.0 * be) / (al * a2) * m1 * m3
        + mu * (m3 * m3 - 1.0) / a2 * m1 * m3
        - m1 * m3 / al * l
        + se / al * m1 * m3;
    u[1][0] = al / a2 * norm2 * m3 + be / a2 * m3 * m3 - al * hm / a2 * m3 * m3 - l * m3 + al / a2 * m3pp - al * om
        + (al * al * be + al * hm) / a2
        + se * m3;
    u[1][1] = -m3 * m3pp / a2 + om * m3 - al * be / a2 * m3 - hm / a2 * m3 + al * al / a2 * q + al * be / a2 * m3
        - al * al * hm / m3
        - al * l
        - m1 * m1pp / a2
        + al * se
        + eta * eta;
    u[1][2] = -(al * hm - be) / a2 * m1 * m3 + al * mu / a2 * m1 * m3 * m3 - al / a2 * m1pp - al * mu / a2 * m1
        - al / a2 * q * m1
        - 2.0 * be / a2 * m1 * m3
        + 2.0 * al * hm / a2 * m1 * m3
        - al * mu * (m3 * m3 - 1.0) / a2 * m1
        + l * m1
        - se * m1;
    u[2][0] = m1 * m3 / a2 * q + (be - al * hm) / a2 * m1 * m3 * m3 - m1 * m3 / a2 * l + m1 * m3pp / a2 - om * m1
        + (hm + al * be) / a2 * m1
        + se / al * m1 * m3;
    u[2][1] = -m1 * m3 * m3pp / (al * a2) + m1 * m3 / al * om - (hm + al * be) / (al * a2) * m1 * m3 * m3
        - m1 * m3 / al * l
        + al / a2 * q * m1
        - (al * hm - be) / a2 * m1 * m3
        - l * m1
        + c33 / (al * a2) * m1pp
        + se * m1;
    u[2][2] = be / (al * a2) * m1 * m1 * m3 - al * hm / (al * a2) * m1 * m1 * m3 + mu / a2 * m1 * m1 * m3 * m3
        - m1 * m1pp / a2
        - mu / a2 * m1 * m1
        + c33 / a2 * q
        - c33 * (2.0 * al * hm - 2.0 * be) / (al * a2) * m3
        + mu * c33 * (m3 * m3 - 1.0) / a2
        - c33 / al * l
        + c33 / al * se
        + eta * eta;

    let r = |x: f64| C64::new(x, 0.0);
    let v = [
        [r(c11 / al * s + 2.0 * eta), r(-m3 * s), r(m1 * m3 / al * s)],
        [r(m3 * s), r(al * s + 2.0 * eta), r(-m1 * s)],
        [r(m1 * m3 / al * s), r(m1 * s), r(c33 / al * s + 2.0 * eta)],
    ];
    let neg = |b: [[C64; 3]; 3]| b.map(|row| row.map(|x| -x));
    interleave(neg(u), neg(v))
}

/// Jacobian blocks `(K, C, D)` of the quasilinear right side with respect to
/// `m`, `m'` and `m''`, so that the linearized operator is `D n'' + C n' + K n`.
pub struct Blocks {
    pub k: M3,
    pub c: M3,
    pub d: M3,
}

fn skew(v: Vec3) -> M3 {
    // skew(v) x = v x x
    [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
}

/// Analytic Jacobian blocks at the profile point, with the normal penalty
/// `-kappa m m^T` included in `K`.
pub fn analytic_blocks(prob: &EvansProblem, pd: &ProfileData) -> Blocks {
    let p = &prob.params;
    let (a, d) = (p.alpha, p.damping());
    let (m, mp, mpp) = (pd.m, pd.mp, pd.mpp);
    let c = a / d;
    let sk = skew(m);
    let mut dd = [[0.0; 3]; 3];
    let mut cc = [[0.0; 3]; 3];
    let mut k = skew(mpp);
    let g2 = pd.grad2();
    for i in 0..3 {
        for j in 0..3 {
            dd[i][j] = (if i == j { a } else { 0.0 } - sk[i][j]) / d;
            cc[i][j] = if i == j { prob.frame.s } else { 0.0 } + 2.0 * c * m[i] * mp[j];
            k[i][j] /= d;
            k[i][j] -= prob.normal_penalty * m[i] * m[j];
        }
        k[i][i] += c * g2;
    }
    k[0][1] += prob.frame.omega;
    k[1][0] -= prob.frame.omega;

    // reaction Jacobian
    let (m1, m2, m3) = (m[0], m[1], m[2]);
    let den = 1.0 + p.ccp * m3;
    let b = p.beta / den / d;
    let db = -p.beta * p.ccp / (den * den) / d;
    let hm = (p.h - p.mu * m3) / d;
    let dhm = -p.mu / d;
    let g = b - hm * a;
    let q = m3 * m3 - 1.0;
    let jf = [
        [g * m3, -b * a - hm, g * m1 + db * (m1 * m3 - a * m2) - dhm * (a * m1 * m3 + m2)],
        [b * a + hm, g * m3, g * m2 + db * (m2 * m3 + a * m1) - dhm * (a * m2 * m3 - m1)],
        [0.0, 0.0, 2.0 * g * m3 + (db - dhm * a) * q],
    ];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] += jf[i][j];
        }
    }
    Blocks { k, c: cc, d: dd }
}

/// Finite-difference Jacobian blocks of [`MaterialParams::quasilinear_rhs`](crate::model::MaterialParams::quasilinear_rhs).
pub fn fd_blocks(prob: &EvansProblem, pd: &ProfileData) -> Blocks {
    const EPS: f64 = 1e-6;
    let f = |m: Vec3, mp: Vec3, mpp: Vec3| prob.params.quasilinear_rhs(prob.frame, m, mp, mpp);
    let column = |which: usize, j: usize| {
        let mut args = [[pd.m, pd.mp, pd.mpp], [pd.m, pd.mp, pd.mpp]];
        args[0][which][j] += EPS;
        args[1][which][j] -= EPS;
        let up = f(args[0][0], args[0][1], args[0][2]);
        let dn = f(args[1][0], args[1][1], args[1][2]);
        [0, 1, 2].map(|i| (up[i] - dn[i]) / (2.0 * EPS))
    };
    let block = |which: usize| {
        let cols = [column(which, 0), column(which, 1), column(which, 2)];
        let mut b = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                b[i][j] = cols[j][i];
            }
        }
        b
    };
    let mut k = block(0);
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] -= prob.normal_penalty * pd.m[i] * pd.m[j];
        }
    }
    Blocks { k, c: block(1), d: block(2) }
}

fn inverse3(m: &M3) -> Option<M3> {
    let c = |i: usize, j: usize| {
        let r = [(i + 1) % 3, (i + 2) % 3];
        let s = [(j + 1) % 3, (j + 2) % 3];
        m[r[0]][s[0]] * m[r[1]][s[1]] - m[r[0]][s[1]] * m[r[1]][s[0]]
    };
    let det = m[0][0] * c(0, 0) + m[0][1] * c(0, 1) + m[0][2] * c(0, 2);
    if det.abs() < 1e-300 {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            inv[j][i] = c(i, j) / det;
        }
    }
    Some(inv)
}

/// First-order matrix from Jacobian blocks, shifted into the weighted
/// variable `w = exp(-eta xi) n`.
pub fn first_order(b: &Blocks, lambda: C64, eta: f64) -> Mat6 {
    let di = inverse3(&b.d).expect("D(m) is invertible for alpha > 0");
    let mut r = [[C64::new(0.0, 0.0); 3]; 3];
    let mut q = [[C64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut dk = 0.0;
            let mut dc = 0.0;
            for l in 0..3 {
                dk += di[i][l] * b.k[l][j];
                dc += di[i][l] * b.c[l][j];
            }
            // n'' = D^-1 (lambda - K) n - D^-1 C n'
            r[i][j] = lambda * di[i][j] - dk;
            q[i][j] = C64::new(-dc, 0.0);
        }
    }
    // weight: r + eta q - eta^2, q - 2 eta
    let mut rw = r;
    for i in 0..3 {
        for j in 0..3 {
            rw[i][j] += q[i][j] * eta;
        }
        rw[i][i] -= eta * eta;
    }
    let mut qw = q;
    for (i, row) in qw.iter_mut().enumerate() {
        row[i] -= 2.0 * eta;
    }
    interleave(rw, qw)
}

/// Analytic linearization in the weighted variable.
pub fn linearized_a(prob: &EvansProblem, lambda: C64, xi: f64) -> Mat6 {
    let pd = ProfileData::at(prob, xi);
    first_order(&analytic_blocks(prob, &pd), lambda, prob.eta)
}

/// Finite-difference Jacobian of the quasilinear right side about the wall,
/// rewritten first order and weight-shifted.
pub fn jacobian_oracle(prob: &EvansProblem, lambda: C64, xi: f64) -> Mat6 {
    let pd = ProfileData::at(prob, xi);
    first_order(&fd_blocks(prob, &pd), lambda, prob.eta)
}

/// Largest deviation seen for one matrix entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntryDeviation {
    pub row: usize,
    pub col: usize,
    pub max_abs: f64,
    pub lambda: C64,
    pub xi: f64,
}

/// Entrywise comparison of the table against the oracle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscrepancyReport {
    pub samples: usize,
    pub tolerance: f64,
    /// Entries whose deviation exceeds the tolerance, worst first.
    pub entries: Vec<EntryDeviation>,
}

impl DiscrepancyReport {
    pub fn agrees(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(row, col)` pairs of disagreeing entries, 1-based as in the table.
    pub fn labels(&self) -> Vec<(usize, usize)> {
        let mut v: Vec<_> = self.entries.iter().map(|e| (e.row + 1, e.col + 1)).collect();
        v.sort();
        v
    }
}

/// Compare [`assemble_a`] with [`jacobian_oracle`] at the given sample points.
/// The normal penalty is switched off for the comparison.
pub fn discrepancy_report(prob: &EvansProblem, points: &[(C64, f64)], tolerance: f64) -> DiscrepancyReport {
    let mut plain = prob.clone();
    plain.normal_penalty = 0.0;
    let mut worst: Vec<Option<EntryDeviation>> = vec![None; 36];
    for &(lambda, xi) in points {
        let a = assemble_a(&plain, lambda, xi);
        let b = jacobian_oracle(&plain, lambda, xi);
        for i in 0..6 {
            for j in 0..6 {
                let dev = (a[i][j] - b[i][j]).norm();
                let slot = &mut worst[6 * i + j];
                if dev.is_nan() || slot.is_none_or(|w| dev > w.max_abs) {
                    *slot = Some(EntryDeviation { row: i, col: j, max_abs: dev, lambda, xi });
                }
            }
        }
    }
    let mut entries: Vec<_> = worst.into_iter().flatten().filter(|e| !(e.max_abs <= tolerance)).collect();
    entries.sort_by(|x, y| y.max_abs.total_cmp(&x.max_abs));
    DiscrepancyReport { samples: points.len(), tolerance, entries }
}
