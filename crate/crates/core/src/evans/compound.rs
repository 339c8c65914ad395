//! Third exterior power of C^6: coordinates, induced derivation, Hodge pairing.

use std::sync::OnceLock;

use num_complex::Complex64 as C64;

use super::Mat6;

pub const DIM: usize = 20;
pub type Wedge = [C64; DIM];

/// Increasing index triples in lexicographic order.
pub fn combos() -> &'static [[usize; 3]; DIM] {
    static C: OnceLock<[[usize; 3]; DIM]> = OnceLock::new();
    C.get_or_init(|| {
        let mut out = [[0; 3]; DIM];
        let mut k = 0;
        for i in 0..6 {
            for j in i + 1..6 {
                for l in j + 1..6 {
                    out[k] = [i, j, l];
                    k += 1;
                }
            }
        }
        out
    })
}

fn index_of(t: [usize; 3]) -> usize {
    combos().iter().position(|c| *c == t).expect("sorted triple")
}

/// Sort a short index list, returning the permutation sign.
fn sort_signed<const N: usize>(mut v: [usize; N]) -> ([usize; N], f64) {
    let mut sign = 1.0;
    for i in 0..N {
        for j in 0..N - 1 - i {
            if v[j] > v[j + 1] {
                v.swap(j, j + 1);
                sign = -sign;
            }
        }
    }
    (v, sign)
}

/// One nonzero entry of the induced matrix: `C[row, col] += sign * A[i, j]`.
#[derive(Clone, Copy)]
struct Term {
    row: u8,
    col: u8,
    i: u8,
    j: u8,
    sign: f64,
}

fn terms() -> &'static [Term] {
    static T: OnceLock<Vec<Term>> = OnceLock::new();
    T.get_or_init(|| {
        let mut out = Vec::new();
        for (col, c) in combos().iter().enumerate() {
            for p in 0..3 {
                for i in 0..6 {
                    let mut t = *c;
                    t[p] = i;
                    if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                        continue;
                    }
                    let (sorted, sign) = sort_signed(t);
                    out.push(Term { row: index_of(sorted) as u8, col: col as u8, i: i as u8, j: c[p] as u8, sign });
                }
            }
        }
        out
    })
}

/// `(A^(3) - shift) w`, where `A^(3)` is the derivation induced by `A` on
/// the third exterior power.
pub fn apply(a: &Mat6, w: &Wedge, shift: C64) -> Wedge {
    let mut out = [C64::new(0.0, 0.0); DIM];
    for (o, x) in out.iter_mut().zip(w) {
        *o = -shift * x;
    }
    for t in terms() {
        let v = a[t.i as usize][t.j as usize] * w[t.col as usize];
        out[t.row as usize] += if t.sign > 0.0 { v } else { -v };
    }
    out
}

/// Dense induced matrix; only used to check [`apply`].
#[cfg(test)]
fn dense(a: &Mat6) -> [[C64; DIM]; DIM] {
    let mut out = [[C64::new(0.0, 0.0); DIM]; DIM];
    for t in terms() {
        out[t.row as usize][t.col as usize] += a[t.i as usize][t.j as usize] * t.sign;
    }
    out
}

fn det3(m: [[C64; 3]; 3]) -> C64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Plücker coordinates of `v0 ^ v1 ^ v2`.
pub fn wedge(v: [[C64; 6]; 3]) -> Wedge {
    let mut out = [C64::new(0.0, 0.0); DIM];
    for (o, c) in out.iter_mut().zip(combos()) {
        let mut m = [[C64::new(0.0, 0.0); 3]; 3];
        for (r, &row) in c.iter().enumerate() {
            for k in 0..3 {
                m[r][k] = v[k][row];
            }
        }
        *o = det3(m);
    }
    out
}

/// `a ^ b` as a multiple of `e0 ^ ... ^ e5`.
pub fn pairing(a: &Wedge, b: &Wedge) -> C64 {
    static P: OnceLock<[(usize, f64); DIM]> = OnceLock::new();
    let table = P.get_or_init(|| {
        let mut out = [(0, 0.0); DIM];
        for (k, c) in combos().iter().enumerate() {
            let rest: Vec<usize> = (0..6).filter(|i| !c.contains(i)).collect();
            let comp = [rest[0], rest[1], rest[2]];
            let (_, sign) = sort_signed([c[0], c[1], c[2], comp[0], comp[1], comp[2]]);
            out[k] = (index_of(comp), sign);
        }
        out
    });
    let mut acc = C64::new(0.0, 0.0);
    for (k, &(j, sign)) in table.iter().enumerate() {
        acc += a[k] * b[j] * sign;
    }
    acc
}
