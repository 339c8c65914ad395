//! Semi-implicit finite-difference time stepping of the quasilinear equation
//! in a co-moving, co-rotating frame, with symmetry freezing of (s, omega).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dwfamily::{critical_fields, frame_m0};
use crate::error::{Error, Result};
use crate::model::{classify_regime, dot, Frame, MaterialParams, Orientation, Pole, Regime, Vec3};
use crate::spectral::spreading_prediction;

/// Uniform grid on `[-half_width, half_width]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub half_width: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        let g = Grid { half_width, n };
        g.validate()?;
        Ok(g)
    }

    /// Grid with spacing as close as possible to `dx`.
    pub fn with_spacing(half_width: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(Error::InvalidParams(format!("dx = {dx} must be positive")));
        }
        Grid::new(half_width, (2.0 * half_width / dx).round() as usize + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(Error::InvalidParams(format!("half width {} must be positive", self.half_width)));
        }
        if self.n < 3 {
            return Err(Error::InvalidParams(format!("need at least 3 grid points, got {}", self.n)));
        }
        Ok(())
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }

    #[inline]
    pub fn xi(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.dx()
    }
}

/// Unit vectors sampled on a grid, with homogeneous Neumann ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnetizationField {
    pub grid: Grid,
    pub values: Vec<Vec3>,
}

impl MagnetizationField {
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Vec3) -> Self {
        MagnetizationField { grid, values: (0..grid.n).map(|i| f(grid.xi(i))).collect() }
    }

    pub fn constant(grid: Grid, v: Vec3) -> Self {
        MagnetizationField { grid, values: vec![v; grid.n] }
    }

    /// Largest deviation of |m| from 1.
    pub fn norm_defect(&self) -> f64 {
        self.values.iter().map(|m| (dot(*m, *m).sqrt() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// First and second centered differences at `i`, with mirror ghosts at the ends.
#[inline]
fn derivs(m: &[Vec3], i: usize, inv2dx: f64, invdx2: f64) -> (Vec3, Vec3) {
    let n = m.len();
    let (l, r) = match i {
        0 => (m[1], m[1]),
        _ if i == n - 1 => (m[n - 2], m[n - 2]),
        _ => (m[i - 1], m[i + 1]),
    };
    let c = m[i];
    let mut mp = [0.0; 3];
    let mut mpp = [0.0; 3];
    for k in 0..3 {
        mp[k] = (r[k] - l[k]) * inv2dx;
        mpp[k] = (r[k] - 2.0 * c[k] + l[k]) * invdx2;
    }
    (mp, mpp)
}

/// Full right side at every grid point, with the radial part removed.
pub fn rhs(field: &MagnetizationField, p: &MaterialParams, f: Frame) -> Vec<Vec3> {
    let dx = field.grid.dx();
    let (inv2dx, invdx2) = (0.5 / dx, 1.0 / (dx * dx));
    let m = &field.values;
    (0..m.len())
        .map(|i| {
            let (mp, mpp) = derivs(m, i, inv2dx, invdx2);
            let mut r = p.quasilinear_rhs(f, m[i], mp, mpp);
            let radial = dot(r, m[i]) / dot(m[i], m[i]);
            for k in 0..3 {
                r[k] -= radial * m[i][k];
            }
            r
        })
        .collect()
}

/// Divides every value by its norm.
pub fn renormalize(field: &mut MagnetizationField) -> Result<()> {
    renormalize_values(&mut field.values)
}

fn renormalize_values(values: &mut [Vec3]) -> Result<()> {
    for (i, m) in values.iter_mut().enumerate() {
        let nrm = dot(*m, *m).sqrt();
        if !(nrm > 0.0) || !nrm.is_finite() {
            return Err(Error::ZeroVector(i));
        }
        for v in m.iter_mut() {
            *v /= nrm;
        }
    }
    Ok(())
}

/// Constant-coefficient tridiagonal system `(I - r L)` with mirror-ghost rows,
/// factored once.
#[derive(Debug, Clone)]
struct ImplicitLaplacian {
    cp: Vec<f64>,
    inv: Vec<f64>,
    /// Sub-diagonal multiplier `-sub_i * inv_i` of the forward sweep.
    lower: Vec<f64>,
}

impl ImplicitLaplacian {
    fn new(n: usize, r: f64) -> Result<Self> {
        let diag = 1.0 + 2.0 * r;
        let mut cp = vec![0.0; n];
        let mut inv = vec![0.0; n];
        // Row 0: diag, -2r; interior: -r, diag, -r; last: -2r, diag.
        let sup = |i: usize| if i == 0 { -2.0 * r } else { -r };
        let sub = |i: usize| if i == n - 1 { -2.0 * r } else { -r };
        let mut den = diag;
        for i in 0..n {
            if i > 0 {
                den = diag - sub(i) * cp[i - 1];
            }
            if den.abs() < 1e-300 || !den.is_finite() {
                return Err(Error::SolverFailure(i));
            }
            inv[i] = 1.0 / den;
            cp[i] = if i + 1 < n { sup(i) * inv[i] } else { 0.0 };
        }
        let lower = (0..n).map(|i| if i == 0 { 0.0 } else { -sub(i) * inv[i] }).collect();
        Ok(ImplicitLaplacian { cp, inv, lower })
    }

    /// In-place solve of three right-hand sides at once.
    fn solve3(&self, x: &mut [f64], y: &mut [f64], z: &mut [f64]) {
        let n = x.len();
        assert!(y.len() == n && z.len() == n && self.inv.len() == n && self.cp.len() == n);
        let (inv, cp, lo) = (&self.inv[..], &self.cp[..], &self.lower[..n]);
        x[0] *= inv[0];
        y[0] *= inv[0];
        z[0] *= inv[0];
        // One fused multiply-add on the recurrence chain per row.
        for i in 1..n {
            x[i] = lo[i].mul_add(x[i - 1], x[i] * inv[i]);
            y[i] = lo[i].mul_add(y[i - 1], y[i] * inv[i]);
            z[i] = lo[i].mul_add(z[i - 1], z[i] * inv[i]);
        }
        for i in (0..n - 1).rev() {
            x[i] = (-cp[i]).mul_add(x[i + 1], x[i]);
            y[i] = (-cp[i]).mul_add(y[i + 1], y[i]);
            z[i] = (-cp[i]).mul_add(z[i + 1], z[i]);
        }
    }

    #[cfg(test)]
    fn solve(&self, v: &mut [Vec3]) {
        let mut x: Vec<f64> = v.iter().map(|a| a[0]).collect();
        let mut y: Vec<f64> = v.iter().map(|a| a[1]).collect();
        let mut z: Vec<f64> = v.iter().map(|a| a[2]).collect();
        self.solve3(&mut x, &mut y, &mut z);
        for (i, a) in v.iter_mut().enumerate() {
            *a = [x[i], y[i], z[i]];
        }
    }
}

/// Sets flush-to-zero and denormals-are-zero for the lifetime of the guard.
/// Far wall tails otherwise underflow into subnormals and stall the stepper.
struct FlushDenormals {
    #[cfg(target_arch = "x86_64")]
    saved: u32,
}

impl FlushDenormals {
    fn new() -> Self {
        #[cfg(target_arch = "x86_64")]
        {
            let mut saved: u32 = 0;
            // SAFETY: stmxcsr/ldmxcsr only touch the SSE control register.
            unsafe {
                std::arch::asm!("stmxcsr [{}]", in(reg) &mut saved, options(nostack));
                let flushed = saved | 0x8040;
                std::arch::asm!("ldmxcsr [{}]", in(reg) &flushed, options(nostack));
            }
            FlushDenormals { saved }
        }
        #[cfg(not(target_arch = "x86_64"))]
        FlushDenormals {}
    }
}

impl Drop for FlushDenormals {
    fn drop(&mut self) {
        #[cfg(target_arch = "x86_64")]
        // SAFETY: restores the value read in `new`.
        unsafe {
            std::arch::asm!("ldmxcsr [{}]", in(reg) &self.saved, options(nostack));
        }
    }
}

/// Loop constants of the explicit sweep.
#[derive(Clone, Copy)]
struct Consts {
    dt: f64,
    inv2dx: f64,
    skew: f64,
    a: f64,
    alpha: f64,
    ccp: f64,
    beta_d: f64,
    h_d: f64,
    mu_d: f64,
    s: f64,
    omega: f64,
}

impl Consts {
    /// `m + dt * explicit(m)` at one point from its neighbours, where the
    /// explicit part is everything except `a m''` (the symmetric half of
    /// `D(m) m''` cancels against the implicit term). Also returns `m'`.
    #[inline(always)]
    fn update(&self, l: Vec3, c: Vec3, r: Vec3) -> (Vec3, Vec3) {
        let k = self;
        let mp = [(r[0] - l[0]) * k.inv2dx, (r[1] - l[1]) * k.inv2dx, (r[2] - l[2]) * k.inv2dx];
        // m'' / (1 + alpha^2)
        let w = [
            (r[0] - 2.0 * c[0] + l[0]) * k.skew,
            (r[1] - 2.0 * c[1] + l[1]) * k.skew,
            (r[2] - 2.0 * c[2] + l[2]) * k.skew,
        ];
        let vxm = crate::model::cross(w, c);
        let g2 = k.a * dot(mp, mp);
        let bt = k.beta_d / (1.0 + k.ccp * c[2]);
        let hm = k.h_d - k.mu_d * c[2];
        let q = c[2] * c[2] - 1.0;
        let am = k.alpha * c[2];
        let e = [
            vxm[0] + k.s * mp[0] + k.omega * c[1] + g2 * c[0] + bt * (c[0] * c[2] - k.alpha * c[1])
                - hm * (am * c[0] + c[1]),
            vxm[1] + k.s * mp[1] - k.omega * c[0] + g2 * c[1] + bt * (c[1] * c[2] + k.alpha * c[0])
                - hm * (am * c[1] - c[0]),
            vxm[2] + k.s * mp[2] + g2 * c[2] + (bt - k.alpha * hm) * q,
        ];
        ([c[0] + k.dt * e[0], c[1] + k.dt * e[1], c[2] + k.dt * e[2]], mp)
    }
}

/// Reusable state for repeated steps at fixed grid, parameters and dt.
/// Components are stored as separate arrays so the sweeps vectorize.
#[derive(Debug, Clone)]
pub struct Stepper {
    params: MaterialParams,
    dt: f64,
    dx: f64,
    lap: ImplicitLaplacian,
    m: [Vec<f64>; 3],
    next: [Vec<f64>; 3],
    tangent: [Vec<f64>; 3],
    /// Third components of the linearly unstable poles.
    unstable: Vec<f64>,
}

/// End nodes closer than this to an unstable pole are held at the pole.
/// With mirror ends the constant tangential perturbation of an unstable pole
/// is an exact growing mode of the truncated problem; the leading edge of a
/// pulled front feeds it and it eventually swamps the front.
const PIN_RADIUS: f64 = 1e-6;

fn unstable_poles(p: &MaterialParams) -> Vec<f64> {
    match classify_regime(p).regime {
        Regime::Bistable => vec![],
        Regime::MonostablePlus => vec![-1.0],
        Regime::MonostableMinus => vec![1.0],
        Regime::Biunstable => vec![1.0, -1.0],
    }
}

impl Stepper {
    pub fn new(grid: Grid, p: MaterialParams, dt: f64) -> Result<Self> {
        grid.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParams(format!("dt = {dt} must be positive")));
        }
        let dx = grid.dx();
        let a = p.alpha / p.damping();
        let z = || [vec![0.0; grid.n], vec![0.0; grid.n], vec![0.0; grid.n]];
        Ok(Stepper {
            params: p,
            dt,
            dx,
            lap: ImplicitLaplacian::new(grid.n, dt * a / (dx * dx))?,
            m: z(),
            next: z(),
            tangent: z(),
            unstable: unstable_poles(&p),
        })
    }

    pub fn load(&mut self, values: &[Vec3]) {
        assert_eq!(values.len(), self.m[0].len());
        for (i, v) in values.iter().enumerate() {
            for k in 0..3 {
                self.m[k][i] = v[k];
            }
        }
    }

    pub fn values(&self) -> Vec<Vec3> {
        (0..self.m[0].len()).map(|i| [self.m[0][i], self.m[1][i], self.m[2][i]]).collect()
    }

    /// Third components of the current state.
    pub fn m3(&self) -> &[f64] {
        &self.m[2]
    }

    /// One step: implicit scalar Laplacian, everything else explicit, then
    /// pointwise renormalization.
    pub fn step(&mut self, f: Frame) -> Result<()> {
        self.advance(f, false).map(|_| ())
    }

    /// Step followed by the freezing projection of the change, using the
    /// pre-step state as template. Returns the frame increment as in
    /// [`freeze_step`].
    pub fn step_frozen(&mut self, f: Frame) -> Result<(f64, f64)> {
        self.advance(f, true)
    }

    fn consts(&self, f: Frame) -> Consts {
        let p = &self.params;
        let d = p.damping();
        Consts {
            dt: self.dt,
            inv2dx: 0.5 / self.dx,
            skew: 1.0 / (self.dx * self.dx * d),
            a: p.alpha / d,
            alpha: p.alpha,
            ccp: p.ccp,
            beta_d: p.beta / d,
            h_d: p.h / d,
            mu_d: p.mu / d,
            s: f.s,
            omega: f.omega,
        }
    }

    fn explicit_sweep(&mut self, k: &Consts) {
        let n = self.m[0].len();
        let [x, y, z] = &self.m;
        let [bx, by, bz] = &mut self.next;
        let [tx, ty, tz] = &mut self.tangent;
        let at = |i: usize| [x[i], y[i], z[i]];
        let mut put = |i: usize, l: Vec3, c: Vec3, r: Vec3| {
            let (b, t) = k.update(l, c, r);
            bx[i] = b[0];
            by[i] = b[1];
            bz[i] = b[2];
            tx[i] = t[0];
            ty[i] = t[1];
            tz[i] = t[2];
        };
        put(0, at(1), at(0), at(1));
        put(n - 1, at(n - 2), at(n - 1), at(n - 2));
        // Interior: equal-length shifted slices so the loop vectorizes.
        let m = n - 2;
        let (xl, xc, xr) = (&x[..m], &x[1..m + 1], &x[2..]);
        let (yl, yc, yr) = (&y[..m], &y[1..m + 1], &y[2..]);
        let (zl, zc, zr) = (&z[..m], &z[1..m + 1], &z[2..]);
        let (bx, by, bz) = (&mut bx[1..m + 1], &mut by[1..m + 1], &mut bz[1..m + 1]);
        let (tx, ty, tz) = (&mut tx[1..m + 1], &mut ty[1..m + 1], &mut tz[1..m + 1]);
        for i in 0..m {
            let (b, t) = k.update([xl[i], yl[i], zl[i]], [xc[i], yc[i], zc[i]], [xr[i], yr[i], zr[i]]);
            bx[i] = b[0];
            by[i] = b[1];
            bz[i] = b[2];
            tx[i] = t[0];
            ty[i] = t[1];
            tz[i] = t[2];
        }
    }

    fn advance(&mut self, f: Frame, freeze: bool) -> Result<(f64, f64)> {
        let _ftz = FlushDenormals::new();
        let k = self.consts(f);
        self.explicit_sweep(&k);
        {
            let [bx, by, bz] = &mut self.next;
            self.lap.solve3(bx, by, bz);
        }
        {
            let [bx, by, bz] = &mut self.next;
            for ((x, y), z) in bx.iter_mut().zip(by.iter_mut()).zip(bz.iter_mut()) {
                let s = 1.0 / (*x * *x + *y * *y + *z * *z).sqrt();
                *x *= s;
                *y *= s;
                *z *= s;
            }
        }
        self.pin_ends();
        // A zero or non-finite vector leaves a NaN or infinity behind.
        if let Some(i) = self.next[2].iter().position(|v| !v.is_finite()) {
            let zero = self.m.iter().all(|c| c[i].is_finite());
            return Err(if zero { Error::ZeroVector(i) } else { Error::NumericalBlowup(f64::NAN) });
        }
        let inc = if freeze { self.projection() } else { Ok((0.0, 0.0)) };
        std::mem::swap(&mut self.m, &mut self.next);
        inc
    }

    fn pin_ends(&mut self) {
        let n = self.next[0].len();
        let [x, y, z] = &mut self.next;
        for i in [0, n - 1] {
            for &pole in &self.unstable {
                if x[i].hypot(y[i]) < PIN_RADIUS && z[i] * pole > 0.0 {
                    x[i] = 0.0;
                    y[i] = 0.0;
                    z[i] = pole;
                }
            }
        }
    }

    /// Gram system of the change `next - m` against the generators at `m`.
    fn projection(&self) -> Result<(f64, f64)> {
        const L: usize = 4;
        let [x, y, z] = &self.m;
        let [nx, ny, nz] = &self.next;
        let [tx, ty, tz] = &self.tangent;
        let n = x.len();
        let mut acc = [[0.0f64; L]; 5];
        let mut add = |i: &[f64; L], t: [[f64; L]; 8]| {
            let [x, y, z, nx, ny, nz, tx, ty] = t;
            let tz = i;
            for l in 0..L {
                let (dx, dy, dz) = (nx[l] - x[l], ny[l] - y[l], nz[l] - z[l]);
                let (gx, gy) = (-y[l], x[l]);
                acc[0][l] += tx[l] * tx[l] + ty[l] * ty[l] + tz[l] * tz[l];
                acc[1][l] += tx[l] * gx + ty[l] * gy;
                acc[2][l] += gx * gx + gy * gy;
                acc[3][l] += dx * tx[l] + dy * ty[l] + dz * tz[l];
                acc[4][l] += dx * gx + dy * gy;
            }
        };
        fn c(v: &[f64]) -> &[[f64; L]] {
            v.as_chunks::<L>().0
        }
        let (cx, cy, cz, cnx, cny, cnz, ctx, cty, ctz) =
            (c(x), c(y), c(z), c(nx), c(ny), c(nz), c(tx), c(ty), c(tz));
        for j in 0..cx.len() {
            add(&ctz[j], [cx[j], cy[j], cz[j], cnx[j], cny[j], cnz[j], ctx[j], cty[j]]);
        }
        for i in cx.len() * L..n {
            let pad = |v: &Vec<f64>| [v[i], 0.0, 0.0, 0.0];
            add(&pad(tz), [pad(x), pad(y), pad(z), pad(nx), pad(ny), pad(nz), pad(tx), pad(ty)]);
        }
        let sum = |j: usize| acc[j].iter().sum::<f64>() * self.dx;
        let inv_dt = 1.0 / self.dt;
        solve_gram(sum(0), sum(1), sum(2), sum(3) * inv_dt, sum(4) * inv_dt)
    }
}

fn solve_gram(tt: f64, tr: f64, rr: f64, bt: f64, br: f64) -> Result<(f64, f64)> {
    let det = tt * rr - tr * tr;
    if !(det.abs() > 1e-12) {
        return Err(Error::DegenerateGram(det));
    }
    let c_t = (bt * rr - br * tr) / det;
    let c_r = (tt * br - tr * bt) / det;
    // d_t m = c_t m' + c_r (-m2, m1, 0): motion to the right at speed -c_t.
    Ok((-c_t, c_r))
}

/// One time step of `dt` in the frame `f`.
pub fn step(field: &MagnetizationField, p: &MaterialParams, f: Frame, dt: f64) -> Result<MagnetizationField> {
    let mut st = Stepper::new(field.grid, *p, dt)?;
    st.load(&field.values);
    st.step(f)?;
    Ok(MagnetizationField { grid: field.grid, values: st.values() })
}

/// Residual translation speed and rotation frequency of the change from
/// `old` to `new`: least-squares fit of the time difference by the
/// translation generator `d/dxi m` and rotation generator `(-m2, m1, 0)`,
/// using `old` as template. Returned as velocities to add to the frame.
pub fn freeze_step(new: &MagnetizationField, old: &MagnetizationField, dt: f64) -> Result<(f64, f64)> {
    freeze_values(&new.values, &old.values, old.grid.dx(), dt)
}

fn freeze_values(new: &[Vec3], old: &[Vec3], dx: f64, dt: f64) -> Result<(f64, f64)> {
    let n = old.len();
    let inv2dx = 0.5 / dx;
    let (mut tt, mut tr, mut rr, mut bt, mut br) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let (l, r) = match i {
            0 => (old[1], old[1]),
            _ if i == n - 1 => (old[n - 2], old[n - 2]),
            _ => (old[i - 1], old[i + 1]),
        };
        let t = [(r[0] - l[0]) * inv2dx, (r[1] - l[1]) * inv2dx, (r[2] - l[2]) * inv2dx];
        let g = [-old[i][1], old[i][0], 0.0];
        let d = [(new[i][0] - old[i][0]) / dt, (new[i][1] - old[i][1]) / dt, (new[i][2] - old[i][2]) / dt];
        tt += dot(t, t);
        tr += dot(t, g);
        rr += dot(g, g);
        bt += dot(d, t);
        br += dot(d, g);
    }
    solve_gram(tt * dx, tr * dx, rr * dx, bt * dx, br * dx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialData {
    /// Smooth wall, by default of width `1/sqrt(-mu)`. Its tail decays like
    /// `exp(-|xi|/width)`; a pulled front started from a tail shallower than
    /// the selected leading edge first runs ahead of the linear speed.
    StepWall {
        orientation: Orientation,
        #[serde(default)]
        width: Option<f64>,
    },
    /// Rotation of the unstable rest state by `amplitude exp(-(xi-center)^2/width^2)`,
    /// lowered by its value at six widths so the support is compact.
    /// `center = None` places the bump half way into the left half of the domain.
    LocalizedBump {
        #[serde(default = "default_amp")]
        amplitude: f64,
        #[serde(default = "default_width")]
        width: f64,
        #[serde(default)]
        center: Option<f64>,
    },
}

/// `exp(-36)`. A Gaussian tail left in place seeds the homogeneous mode of the
/// unstable state ahead of the front, which Neumann ends keep alive.
const BUMP_FLOOR: f64 = 2.319_522_830_243_569_6e-16;

pub const SHARP_WIDTH: f64 = 0.2;

fn default_amp() -> f64 {
    0.5
}
fn default_width() -> f64 {
    2.0
}
fn default_window() -> f64 {
    0.2
}
fn default_record() -> f64 {
    0.01
}
fn default_true() -> bool {
    true
}

impl InitialData {
    pub fn step(orientation: Orientation) -> Self {
        InitialData::StepWall { orientation, width: None }
    }

    /// Near-discontinuous wall of width 0.2, for pulled-front runs.
    pub fn sharp_step(orientation: Orientation) -> Self {
        InitialData::StepWall { orientation, width: Some(SHARP_WIDTH) }
    }

    pub fn bump() -> Self {
        InitialData::LocalizedBump { amplitude: default_amp(), width: default_width(), center: None }
    }

    pub fn sample(&self, grid: Grid, p: &MaterialParams) -> MagnetizationField {
        match *self {
            InitialData::StepWall { orientation, width } => {
                let w = width.unwrap_or(1.0 / (-p.mu).sqrt());
                let sg = orientation.sigma();
                MagnetizationField::from_fn(grid, |x| [1.0 / (x / w).cosh(), 0.0, -sg * (x / w).tanh()])
            }
            InitialData::LocalizedBump { amplitude, width, center } => {
                let c = center.unwrap_or(-grid.half_width / 2.0);
                let base = if classify_regime(p).regime == Regime::MonostableMinus { 1.0 } else { -1.0 };
                MagnetizationField::from_fn(grid, |x| {
                    let z = (x - c) / width;
                    let th = amplitude * ((-z * z).exp() - BUMP_FLOOR).max(0.0);
                    [th.sin(), 0.0, base * th.cos()]
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub grid: Grid,
    pub dt: f64,
    pub t_final: f64,
    pub params: MaterialParams,
    pub initial: InitialData,
    /// Trailing fraction of the run used for averaging.
    #[serde(default = "default_window")]
    pub averaging_window: f64,
    /// Time between recorded history samples.
    #[serde(default = "default_record")]
    pub record_interval: f64,
    /// Extend runs near the lower critical field until converged (up to t = 500).
    #[serde(default = "default_true")]
    pub auto_extend: bool,
    /// Frame at t = 0.
    #[serde(default)]
    pub initial_frame: Frame,
}

/// Longest time an automatically extended run may reach.
pub const EXTENDED_T_MAX: f64 = 500.0;
/// Trailing standard deviation below which a run counts as converged.
pub const CONVERGENCE_STD: f64 = 1e-3;

impl SimConfig {
    pub fn new(grid: Grid, dt: f64, t_final: f64, params: MaterialParams, initial: InitialData) -> Self {
        SimConfig {
            grid,
            dt,
            t_final,
            params,
            initial,
            averaging_window: default_window(),
            record_interval: default_record(),
            auto_extend: true,
            initial_frame: Frame::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.params.validate()?;
        self.params.require_easy_axis()?;
        if !(self.dt > 0.0 && self.t_final > 0.0 && self.dt.is_finite() && self.t_final.is_finite()) {
            return Err(Error::InvalidParams("dt and t_final must be positive".into()));
        }
        if !(self.averaging_window > 0.0 && self.averaging_window < 1.0) {
            return Err(Error::InvalidParams("averaging_window must lie in (0, 1)".into()));
        }
        if let InitialData::StepWall { width: Some(w), .. } = self.initial {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidParams(format!("step width {w} must be positive")));
            }
        }
        if !(self.record_interval > 0.0) {
            return Err(Error::InvalidParams("record_interval must be positive".into()));
        }
        // Explicit skew diffusion against implicit damping: |1 + i b x| <= 1 + a x
        // for x up to 4 dt / dx^2.
        let p = &self.params;
        let (a, b) = (p.alpha / p.damping(), 1.0 / p.damping());
        if b > a {
            let dx = self.grid.dx();
            let limit = 2.0 * a / (b * b - a * a) * dx * dx / 4.0;
            if self.dt > limit {
                return Err(Error::InvalidParams(format!("dt = {} exceeds the stability limit {limit:e}", self.dt)));
            }
        }
        Ok(())
    }

    fn extension_applies(&self) -> bool {
        let p = &self.params;
        self.auto_extend
            && p.ccp == 0.0
            && critical_fields(p).map(|c| (p.h - c.h_s_plus).abs() <= 0.1).unwrap_or(false)
    }
}

/// Recorded time series of the frozen frame.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FreezingState {
    pub time: Vec<f64>,
    pub s_history: Vec<f64>,
    pub omega_history: Vec<f64>,
    pub wall_position: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub s_inf: f64,
    pub omega_inf: f64,
    pub converged: bool,
    pub s_std: f64,
    pub omega_std: f64,
    /// Half the peak-to-peak range of s over the averaging window.
    pub oscillation_amplitude: f64,
    pub t_end: f64,
    pub freezing: FreezingState,
    pub final_field: MagnetizationField,
}

/// Position of the first sign change of m3 (linear interpolation), or NaN.
pub fn wall_position(field: &MagnetizationField) -> f64 {
    let m3: Vec<f64> = field.values.iter().map(|v| v[2]).collect();
    zero_crossing(field.grid, &m3)
}

fn zero_crossing(grid: Grid, m3: &[f64]) -> f64 {
    for i in 0..m3.len() - 1 {
        let (a, b) = (m3[i], m3[i + 1]);
        if a == 0.0 {
            return grid.xi(i);
        }
        if a * b < 0.0 {
            return grid.xi(i) + grid.dx() * a / (a - b);
        }
    }
    f64::NAN
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs the frozen evolution and reports trailing-window statistics.
pub fn run(config: &SimConfig) -> Result<RunResult> {
    config.validate()?;
    let grid = config.grid;
    let mut st = Stepper::new(grid, config.params, config.dt)?;
    st.load(&config.initial.sample(grid, &config.params).values);
    let mut frame = config.initial_frame;
    let mut hist = FreezingState::default();
    let record_every = ((config.record_interval / config.dt).round() as usize).max(1);

    let mut t_target = config.t_final;
    let extend = config.extension_applies();
    let mut nstep: usize = 0;
    loop {
        let steps_to = (t_target / config.dt).round() as usize;
        while nstep < steps_to {
            let (ds, dom) = st.step_frozen(frame).map_err(|e| match e {
                Error::NumericalBlowup(_) => Error::NumericalBlowup(nstep as f64 * config.dt),
                other => other,
            })?;
            frame.s += ds;
            frame.omega += dom;
            if !(frame.s.is_finite() && frame.omega.is_finite()) {
                return Err(Error::NumericalBlowup(nstep as f64 * config.dt));
            }
            nstep += 1;
            if nstep % record_every == 0 {
                hist.time.push(nstep as f64 * config.dt);
                hist.s_history.push(frame.s);
                hist.omega_history.push(frame.omega);
                hist.wall_position.push(zero_crossing(grid, st.m3()));
            }
        }
        let stats = window_stats(&hist, t_target * config.averaging_window);
        let converged = stats.1 < CONVERGENCE_STD && stats.3 < CONVERGENCE_STD;
        if converged || !extend || t_target >= EXTENDED_T_MAX {
            return Ok(RunResult {
                s_inf: stats.0,
                omega_inf: stats.2,
                converged,
                s_std: stats.1,
                omega_std: stats.3,
                oscillation_amplitude: stats.4,
                t_end: nstep as f64 * config.dt,
                freezing: hist,
                final_field: MagnetizationField { grid, values: st.values() },
            });
        }
        t_target = (t_target + 100.0).min(EXTENDED_T_MAX);
    }
}

/// (s mean, s std, omega mean, omega std, s half-range) over the last `span` time units.
fn window_stats(h: &FreezingState, span: f64) -> (f64, f64, f64, f64, f64) {
    let t_end = h.time.last().copied().unwrap_or(0.0);
    let start = h.time.iter().position(|&t| t >= t_end - span).unwrap_or(0);
    let s = &h.s_history[start..];
    let o = &h.omega_history[start..];
    if s.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN);
    }
    let (sm, ss) = mean_std(s);
    let (om, os) = mean_std(o);
    let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (sm, ss, om, os, 0.5 * (hi - lo))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrontLabel {
    Pushed,
    Pulled,
    Ambiguous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub h: f64,
    pub s_sim: f64,
    pub omega_sim: f64,
    pub converged: bool,
    pub s_m0: f64,
    pub omega_m0: f64,
    pub s_lin: f64,
    pub omega_lin: f64,
    pub label: FrontLabel,
}

/// Relative dead band on the difference of distances to the two predictions.
pub const DEAD_BAND: f64 = 0.05;

/// Labels a measured (s, omega) by the nearer of the explicit-wall and
/// linear predictions, distances normalized by the linear values.
pub fn classify_front(measured: Frame, m0: Frame, lin: Frame) -> FrontLabel {
    let scale_s = lin.s.abs().max(1e-12);
    let scale_o = lin.omega.abs().max(1e-12);
    let dist = |a: Frame, b: Frame| ((a.s - b.s) / scale_s).hypot((a.omega - b.omega) / scale_o);
    let d_m0 = dist(measured, m0);
    let d_lin = dist(measured, lin);
    let sep = dist(m0, lin);
    if (d_m0 - d_lin).abs() <= DEAD_BAND * sep.max(1e-12) {
        FrontLabel::Ambiguous
    } else if d_m0 < d_lin {
        FrontLabel::Pushed
    } else {
        FrontLabel::Pulled
    }
}

/// Runs `template` at each field in `hs` (ccp taken from the template) and
/// compares against the explicit wall and linear predictions.
pub fn pushed_pulled_scan(template: &SimConfig, hs: &[f64]) -> Result<Vec<ScanRow>> {
    hs.par_iter()
        .map(|&h| {
            let mut cfg = *template;
            cfg.params = cfg.params.with_h(h);
            let res = run(&cfg)?;
            let pred = spreading_prediction(&cfg.params, Pole::Minus)?;
            let lin = Frame::new(pred.s_lin, pred.omega_lin);
            // The explicit wall only exists at ccp = 0; its frame is the reference there.
            let m0 = frame_m0(&cfg.params.with_ccp(0.0), Orientation::PlusLeft)?;
            let measured = Frame::new(res.s_inf, res.omega_inf);
            Ok(ScanRow {
                h,
                s_sim: res.s_inf,
                omega_sim: res.omega_inf,
                converged: res.converged,
                s_m0: m0.s,
                omega_m0: m0.omega,
                s_lin: lin.s,
                omega_lin: lin.omega,
                label: classify_front(measured, m0, lin),
            })
        })
        .collect()
}
