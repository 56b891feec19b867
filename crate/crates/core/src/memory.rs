//! Aerodynamic memory: escape time, retarded characteristic points, the plate
//! history buffer and the delay potential
//! `q(u^t)(x) = 1/(2 pi) int_0^{t*} ds int_0^{2 pi} dtheta [M_theta^2 u_ext](x - s (U + sin theta, cos theta), t - s)`
//! with `M_theta = sin theta d1 + cos theta d2`.
//!
//! The derivative fields of every snapshot are cached on the grid and extended
//! by zero outside the plate. For a fixed `(theta, s)` the displacement is the
//! same for every target node, so each quadrature node is a translated bilinear
//! stencil applied to a linear combination of the cached fields.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{sample_bilinear, GridSpec, PlateField, Point2};
use crate::ops::{d1, d11, d12, d2, d22, Boundary};

/// Retarded characteristic point `(x1 - (U + sin theta) s, x2 - s cos theta)`.
pub fn characteristic_point(x: Point2, u_flow: f64, theta: f64, s: f64) -> Point2 {
    [x[0] - (u_flow + theta.sin()) * s, x[1] - s * theta.cos()]
}

fn check_flow_speed(u_flow: f64) -> Result<()> {
    if !(0.0..1.0).contains(&u_flow) {
        return Err(Error::InvalidArgument(format!(
            "flow speed U = {u_flow} outside the subsonic range [0, 1)"
        )));
    }
    Ok(())
}

/// Time for the characteristic from `x` with direction `theta` to leave the
/// closed rectangle `[0, lx] x [0, ly]`.
pub fn exit_time(g: &GridSpec, x: Point2, u_flow: f64, theta: f64) -> f64 {
    let c = [u_flow + theta.sin(), theta.cos()];
    let len = [g.lx(), g.ly()];
    let mut t = f64::INFINITY;
    for a in 0..2 {
        if c[a] > 0.0 {
            t = t.min(x[a] / c[a]);
        } else if c[a] < 0.0 {
            t = t.min((len[a] - x[a]) / -c[a]);
        }
    }
    t
}

/// Escape time `t*`: the supremum over plate points and directions of the exit
/// time, times a safety factor `1 + 1e-6`.
///
/// For a fixed direction the exit time is largest from the upstream corner, so
/// the supremum over `x` is taken over the four corners in closed form and the
/// direction is sampled densely, then refined by golden-section search.
pub fn escape_time(g: &GridSpec, u_flow: f64) -> Result<f64> {
    check_flow_speed(u_flow)?;
    let corners = [[0.0, 0.0], [g.lx(), 0.0], [0.0, g.ly()], [g.lx(), g.ly()]];
    let worst = |theta: f64| {
        corners
            .iter()
            .map(|&x| exit_time(g, x, u_flow, theta))
            .fold(0.0, f64::max)
    };
    let n = 4096;
    let dth = 2.0 * PI / n as f64;
    let (mut best, mut best_k) = (0.0, 0);
    for k in 0..n {
        let v = worst(k as f64 * dth);
        if v > best {
            best = v;
            best_k = k;
        }
    }
    // golden-section refinement on the bracketing cell
    let (mut a, mut b) = ((best_k as f64 - 1.0) * dth, (best_k as f64 + 1.0) * dth);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if worst(c) > worst(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best = best.max(worst(0.5 * (a + b)));
    Ok(best * (1.0 + 1e-6))
}

/// Node counts of the theta (periodic trapezoid) and s (composite trapezoid) rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadratureSpec {
    n_theta: usize,
    n_s: usize,
}

impl QuadratureSpec {
    pub fn new(n_theta: usize, n_s: usize) -> Result<Self> {
        if n_theta < 8 || n_theta % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "n_theta = {n_theta} must be an even integer >= 8"
            )));
        }
        if n_s < 16 {
            return Err(Error::InvalidArgument(format!("n_s = {n_s} must be >= 16")));
        }
        Ok(Self { n_theta, n_s })
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    /// Both counts doubled (`n_s` on the nested grid `2 n_s - 1`).
    pub fn refined(&self) -> Self {
        Self {
            n_theta: 2 * self.n_theta,
            n_s: 2 * self.n_s - 1,
        }
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { n_theta: 32, n_s: 128 }
    }
}

/// Flow speed, escape time and quadrature for the delay potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AeroConfig {
    u_flow: f64,
    t_star: f64,
    quad: QuadratureSpec,
}

impl AeroConfig {
    pub fn new(g: &GridSpec, u_flow: f64, quad: QuadratureSpec) -> Result<Self> {
        Ok(Self {
            u_flow,
            t_star: escape_time(g, u_flow)?,
            quad,
        })
    }

    pub fn u_flow(&self) -> f64 {
        self.u_flow
    }

    pub fn t_star(&self) -> f64 {
        self.t_star
    }

    pub fn quad(&self) -> QuadratureSpec {
        self.quad
    }

    pub fn with_quad(self, quad: QuadratureSpec) -> Self {
        Self { quad, ..self }
    }
}

/// Derivative fields cached for one snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct Derivatives {
    pub d1: PlateField,
    pub d2: PlateField,
    pub d11: PlateField,
    pub d12: PlateField,
    pub d22: PlateField,
}

impl Derivatives {
    pub fn of(u: &PlateField, g: &GridSpec) -> Self {
        let bc = Boundary::Clamped;
        Self {
            d1: d1(u, g, bc),
            d2: d2(u, g, bc),
            d11: d11(u, g, bc),
            d12: d12(u, g, bc),
            d22: d22(u, g, bc),
        }
    }
}

/// One history record: time, displacement and cached derivatives.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub u: Arc<PlateField>,
    pub der: Arc<Derivatives>,
}

/// Uniformly spaced displacement snapshots covering at least the trailing
/// window `[t - t*, t]`.
#[derive(Clone, Debug)]
pub struct HistoryBuffer {
    grid: GridSpec,
    dt: f64,
    t_star: f64,
    snaps: VecDeque<Snapshot>,
}

impl HistoryBuffer {
    pub fn new(g: &GridSpec, dt_hist: f64, t_star: f64) -> Result<Self> {
        if !(dt_hist > 0.0 && dt_hist.is_finite()) {
            return Err(Error::InvalidArgument(format!("history spacing {dt_hist} must be positive")));
        }
        if !(t_star > 0.0 && t_star.is_finite()) {
            return Err(Error::InvalidArgument(format!("escape time {t_star} must be positive")));
        }
        Ok(Self {
            grid: *g,
            dt: dt_hist,
            t_star,
            snaps: VecDeque::new(),
        })
    }

    /// Number of snapshots retained after warm-up.
    pub fn capacity(&self) -> usize {
        ((self.t_star + 2.0 * self.dt) / self.dt + 1e-9).floor() as usize + 1
    }

    /// History holding `u` at every time `t0 - m dt`, `m = 0..capacity`.
    pub fn constant(g: &GridSpec, dt_hist: f64, t_star: f64, t0: f64, u: &PlateField) -> Result<Self> {
        let mut h = Self::new(g, dt_hist, t_star)?;
        h.check_field(u)?;
        let u = Arc::new(u.clone());
        let der = Arc::new(Derivatives::of(&u, g));
        let m = h.capacity();
        for k in (0..m).rev() {
            h.snaps.push_back(Snapshot {
                t: t0 - k as f64 * dt_hist,
                u: u.clone(),
                der: der.clone(),
            });
        }
        Ok(h)
    }

    fn check_field(&self, u: &PlateField) -> Result<()> {
        self.grid.check(u)?;
        if !u.is_clamped() {
            return Err(Error::NotClamped("history snapshot"));
        }
        if !u.is_finite() {
            return Err(Error::NonFinite("history snapshot"));
        }
        Ok(())
    }

    /// Appends `u` at time `t = t_newest + dt_hist` and evicts snapshots older
    /// than `t - t* - 2 dt_hist`.
    pub fn push(&mut self, t: f64, u: PlateField) -> Result<()> {
        self.check_field(&u)?;
        if let Some(last) = self.snaps.back() {
            let expected = last.t + self.dt;
            let tol = 64.0 * f64::EPSILON * expected.abs().max(self.dt);
            if (t - expected).abs() > tol {
                return Err(Error::NonUniformPush { expected, got: t });
            }
        }
        let der = Arc::new(Derivatives::of(&u, &self.grid));
        self.snaps.push_back(Snapshot {
            t,
            u: Arc::new(u),
            der,
        });
        let cutoff = t - self.t_star - 2.0 * self.dt;
        let tol = 1e-9 * self.dt;
        while self.snaps.front().is_some_and(|s| s.t < cutoff - tol) {
            self.snaps.pop_front();
        }
        Ok(())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_star(&self) -> f64 {
        self.t_star
    }

    pub fn len(&self) -> usize {
        self.snaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snaps.is_empty()
    }

    pub fn newest(&self) -> Option<&Snapshot> {
        self.snaps.back()
    }

    pub fn oldest(&self) -> Option<&Snapshot> {
        self.snaps.front()
    }

    pub fn get(&self, k: usize) -> Option<&Snapshot> {
        self.snaps.get(k)
    }

    pub fn snapshots(&self) -> impl Iterator<Item = &Snapshot> {
        self.snaps.iter()
    }

    pub fn span(&self) -> f64 {
        match (self.snaps.front(), self.snaps.back()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    /// Bracketing snapshot index `k` and weight `w` with
    /// `u(tau) = (1 - w) u_k + w u_{k+1}`.
    pub fn locate(&self, tau: f64) -> Result<(usize, f64)> {
        let (first, last) = match (self.snaps.front(), self.snaps.back()) {
            (Some(a), Some(b)) => (a.t, b.t),
            _ => {
                return Err(Error::HistoryUnderrun {
                    needed: tau,
                    available: f64::NAN,
                })
            }
        };
        let tol = 1e-9 * self.dt;
        if tau < first - tol {
            return Err(Error::HistoryUnderrun {
                needed: tau,
                available: first,
            });
        }
        if tau > last + tol {
            return Err(Error::InvalidArgument(format!(
                "time {tau} lies after the newest snapshot at {last}"
            )));
        }
        let n = self.snaps.len();
        let p = ((tau - first) / self.dt).clamp(0.0, (n - 1) as f64);
        let mut k = p.floor() as usize;
        let mut w = p - k as f64;
        if w < 1e-9 {
            w = 0.0;
        } else if w > 1.0 - 1e-9 {
            k += 1;
            w = 0.0;
        }
        if k >= n - 1 {
            return Ok((n - 1, 0.0));
        }
        Ok((k, w))
    }

    /// Displacement at `tau` by linear interpolation.
    pub fn u_at(&self, tau: f64) -> Result<PlateField> {
        let (k, w) = self.locate(tau)?;
        let a = &self.snaps[k].u;
        if w == 0.0 {
            return Ok((**a).clone());
        }
        Ok(PlateField::lincomb(1.0 - w, a, w, &self.snaps[k + 1].u))
    }

    /// Velocity at snapshot `k` by centred differences, with the three-point
    /// one-sided formula at the two ends.
    pub fn velocity_at_index(&self, k: usize) -> Result<PlateField> {
        let n = self.snaps.len();
        if n < 3 || k >= n {
            return Err(Error::InvalidArgument("velocity needs three snapshots".into()));
        }
        let u = |m: usize| self.snaps[m].u.as_ref();
        let h = self.dt;
        let mut v = if k == 0 {
            let mut v = u(0).scaled(-1.5 / h);
            v.axpy(2.0 / h, u(1));
            v.axpy(-0.5 / h, u(2));
            v
        } else if k == n - 1 {
            let mut v = u(n - 1).scaled(1.5 / h);
            v.axpy(-2.0 / h, u(n - 2));
            v.axpy(0.5 / h, u(n - 3));
            v
        } else {
            PlateField::lincomb(0.5 / h, u(k + 1), -0.5 / h, u(k - 1))
        };
        v.zero_boundary();
        Ok(v)
    }
}

/// One quadrature node: a translated bilinear stencil applied to
/// `sin^2 d11 + 2 sin cos d12 + cos^2 d22` at a fixed lag.
#[derive(Clone, Copy, Debug)]
struct Tap {
    weight: f64,
    c: [f64; 3],
    /// Source index offset and fractional part in each direction.
    mi: isize,
    fx: f64,
    mj: isize,
    fy: f64,
}

/// Split a displacement `d` (in cells) into `floor(-d)` and the fraction.
fn split_shift(d: f64) -> (isize, f64) {
    let x = -d;
    let r = x.round();
    if (x - r).abs() < 1e-10 {
        return (r as isize, 0.0);
    }
    let m = x.floor();
    (m as isize, x - m)
}

/// Target index range `[lo, hi]` whose source `i + m (+1 if f > 0)` stays on the grid.
fn target_range(m: isize, f: f64, n: usize) -> Option<(usize, usize)> {
    let top = n as isize - 1 - if f > 0.0 { 1 } else { 0 };
    let lo = (-m).max(0);
    let hi = (top - m).min(n as isize - 1);
    (lo <= hi).then_some((lo as usize, hi as usize))
}

/// Precomputed quadrature of the delay potential on a grid.
#[derive(Clone, Debug)]
pub struct MemoryKernel {
    grid: GridSpec,
    cfg: AeroConfig,
    lags: Vec<f64>,
    taps: Vec<Vec<Tap>>,
    exit_correction: bool,
}

impl MemoryKernel {
    pub fn new(g: &GridSpec, cfg: &AeroConfig) -> Self {
        let q = cfg.quad();
        let (nt, ns) = (q.n_theta(), q.n_s());
        let hs = cfg.t_star() / (ns - 1) as f64;
        let wt = 2.0 * PI / nt as f64;
        let mut lags = Vec::with_capacity(ns);
        let mut taps = Vec::with_capacity(ns);
        for l in 0..ns {
            let s = l as f64 * hs;
            let ws = if l == 0 || l == ns - 1 { 0.5 * hs } else { hs };
            let mut row = Vec::new();
            for k in 0..nt {
                let th = k as f64 * wt;
                let (sn, cs) = th.sin_cos();
                let (mi, fx) = split_shift((cfg.u_flow() + sn) * s / g.hx());
                let (mj, fy) = split_shift(cs * s / g.hy());
                if target_range(mi, fx, g.nx()).is_none() || target_range(mj, fy, g.ny()).is_none() {
                    continue;
                }
                row.push(Tap {
                    weight: ws * wt / (2.0 * PI),
                    c: [sn * sn, 2.0 * sn * cs, cs * cs],
                    mi,
                    fx,
                    mj,
                    fy,
                });
            }
            lags.push(s);
            taps.push(row);
        }
        Self {
            grid: *g,
            cfg: *cfg,
            lags,
            taps,
            exit_correction: true,
        }
    }

    /// Plain composite trapezoid in `s`, without the exit-cell correction.
    pub fn without_exit_correction(mut self) -> Self {
        self.exit_correction = false;
        self
    }

    pub fn config(&self) -> &AeroConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Number of quadrature nodes whose stencil touches the grid.
    pub fn active_taps(&self) -> usize {
        self.taps.iter().map(Vec::len).sum()
    }

    /// Delay potential at `t = t_newest` from the buffered history.
    pub fn eval(&self, hist: &HistoryBuffer, t: f64) -> Result<PlateField> {
        let g = &self.grid;
        if hist.grid() != g {
            return Err(Error::InvalidArgument("history grid differs from kernel grid".into()));
        }
        let newest = hist
            .newest()
            .ok_or(Error::HistoryUnderrun { needed: t - self.cfg.t_star(), available: f64::NAN })?;
        if (newest.t - t).abs() > 1e-9 * hist.dt().max(t.abs() * f64::EPSILON) {
            return Err(Error::InvalidArgument(format!(
                "delay potential requested at t = {t}, newest snapshot is at {}",
                newest.t
            )));
        }
        let oldest = hist.oldest().map_or(t, |s| s.t);
        let needed = t - self.cfg.t_star();
        if oldest > needed + 1e-9 * hist.dt() {
            return Err(Error::HistoryUnderrun { needed, available: oldest });
        }
        let mut out = PlateField::zeros(g);
        let mut blend: Option<[PlateField; 3]> = None;
        for (l, &s) in self.lags.iter().enumerate() {
            if self.taps[l].is_empty() {
                continue;
            }
            let (k, w) = hist.locate(t - s)?;
            let a = &hist.get(k).expect("located index").der;
            let fields: [&PlateField; 3] = if w == 0.0 {
                [&a.d11, &a.d12, &a.d22]
            } else {
                let b = &hist.get(k + 1).expect("located index").der;
                let bl = blend.get_or_insert_with(|| {
                    [PlateField::zeros(g), PlateField::zeros(g), PlateField::zeros(g)]
                });
                for (dst, (x, y)) in bl.iter_mut().zip([(&a.d11, &b.d11), (&a.d12, &b.d12), (&a.d22, &b.d22)]) {
                    for (d, (p, q)) in dst.values_mut().iter_mut().zip(x.values().iter().zip(y.values())) {
                        *d = (1.0 - w) * p + w * q;
                    }
                }
                let bl = blend.as_ref().expect("blend initialized");
                [&bl[0], &bl[1], &bl[2]]
            };
            self.apply_taps(&self.taps[l], fields, &mut out);
        }
        if self.exit_correction {
            let val = |s: f64, p: Point2, c: [f64; 3]| {
                let (k, w) = hist.locate(t - s).expect("history span checked above");
                let a = combo(&hist.get(k).expect("located index").der, g, p, c);
                if w == 0.0 {
                    a
                } else {
                    let b = combo(&hist.get(k + 1).expect("located index").der, g, p, c);
                    (1.0 - w) * a + w * b
                }
            };
            self.correct_exit_cells(&mut out, &val);
        }
        Ok(out)
    }

    /// Delay potential of the time-constant history `u(., tau) = u`.
    pub fn eval_static(&self, u: &PlateField) -> Result<PlateField> {
        let g = &self.grid;
        g.check(u)?;
        if !u.is_clamped() {
            return Err(Error::NotClamped("static displacement"));
        }
        let der = Derivatives::of(u, g);
        Ok(self.eval_static_derivatives(&der))
    }

    pub(crate) fn eval_static_derivatives(&self, der: &Derivatives) -> PlateField {
        let mut out = PlateField::zeros(&self.grid);
        for row in &self.taps {
            self.apply_taps(row, [&der.d11, &der.d12, &der.d22], &mut out);
        }
        if self.exit_correction {
            let g = &self.grid;
            self.correct_exit_cells(&mut out, &|_, p, c| combo(der, g, p, c));
        }
        out
    }

    /// Replaces the trapezoid on the cell where each ray leaves the plate by
    /// the trapezoid on the part of the cell inside the plate.
    ///
    /// The integrand jumps to zero at the exit time `s0`, which is known in
    /// closed form per node and direction; without this correction the jump
    /// costs a first-order error in the `s` step.
    fn correct_exit_cells(&self, out: &mut PlateField, val: &(dyn Fn(f64, Point2, [f64; 3]) -> f64 + Sync)) {
        let g = &self.grid;
        let ny = g.ny();
        let (nt, ns) = (self.cfg.quad().n_theta(), self.cfg.quad().n_s());
        let hs = self.cfg.t_star() / (ns - 1) as f64;
        let u_flow = self.cfg.u_flow();
        let dirs: Vec<(f64, [f64; 3])> = (0..nt)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / nt as f64;
                let (sn, cs) = th.sin_cos();
                (th, [sn * sn, 2.0 * sn * cs, cs * cs])
            })
            .collect();
        let wt = 1.0 / nt as f64;
        out.values_mut().par_chunks_mut(ny).enumerate().for_each(|(i, row)| {
            for (j, o) in row.iter_mut().enumerate() {
                let x = g.node(i, j);
                let mut acc = 0.0;
                for &(th, c) in &dirs {
                    let s0 = exit_time(g, x, u_flow, th);
                    let l = (s0 / hs).floor() as usize;
                    if l + 1 >= ns {
                        continue;
                    }
                    let sl = l as f64 * hs;
                    let fl = val(sl, characteristic_point(x, u_flow, th, sl), c);
                    let f0 = val(s0, characteristic_point(x, u_flow, th, s0), c);
                    acc += 0.5 * (s0 - sl) * (fl + f0) - 0.5 * hs * fl;
                }
                *o += wt * acc;
            }
        });
    }

    /// Adds the contributions of `taps` to `out`, parallel over blocks of rows.
    fn apply_taps(&self, taps: &[Tap], f: [&PlateField; 3], out: &mut PlateField) {
        let g = &self.grid;
        let (nx, ny) = (g.nx(), g.ny());
        let rows_per = nx.div_ceil(rayon::current_num_threads().max(1) * 2).max(1);
        let (f11, f12, f22) = (f[0].values(), f[1].values(), f[2].values());
        out.values_mut()
            .par_chunks_mut(rows_per * ny)
            .enumerate()
            .for_each(|(blk, chunk)| {
                let i0 = blk * rows_per;
                let i1 = (i0 + chunk.len() / ny).min(nx);
                let mut comb = vec![0.0; 2 * ny];
                for tap in taps {
                    let Some((lo_i, hi_i)) = target_range(tap.mi, tap.fx, nx) else { continue };
                    let Some((lo_j, hi_j)) = target_range(tap.mj, tap.fy, ny) else { continue };
                    let (lo_i, hi_i) = (lo_i.max(i0), hi_i.min(i1.saturating_sub(1)));
                    if lo_i > hi_i || i1 == 0 {
                        continue;
                    }
                    let [c0, c1, c2] = tap.c;
                    let wgt = tap.weight;
                    let (fx, fy) = (tap.fx, tap.fy);
                    let sj = tap.mj;
                    for i in lo_i..=hi_i {
                        let si = (i as isize + tap.mi) as usize;
                        let nrow = if fx > 0.0 { 2 } else { 1 };
                        // combined field on the one or two source rows
                        for r in 0..nrow {
                            let base = (si + r) * ny;
                            let jlo = (lo_j as isize + sj) as usize;
                            let jhi = (hi_j as isize + sj) as usize + if fy > 0.0 { 1 } else { 0 };
                            for jj in jlo..=jhi {
                                let k = base + jj;
                                comb[r * ny + jj] = c0 * f11[k] + c1 * f12[k] + c2 * f22[k];
                            }
                        }
                        let orow = &mut chunk[(i - i0) * ny..(i - i0 + 1) * ny];
                        let r0 = &comb[..ny];
                        if fx > 0.0 {
                            let r1 = &comb[ny..];
                            let (a00, a10) = ((1.0 - fx) * (1.0 - fy) * wgt, fx * (1.0 - fy) * wgt);
                            let (a01, a11) = ((1.0 - fx) * fy * wgt, fx * fy * wgt);
                            for j in lo_j..=hi_j {
                                let s = (j as isize + sj) as usize;
                                let v = a00 * r0[s] + a10 * r1[s];
                                orow[j] += if fy > 0.0 { v + a01 * r0[s + 1] + a11 * r1[s + 1] } else { v };
                            }
                        } else {
                            let (a0, a1) = ((1.0 - fy) * wgt, fy * wgt);
                            for j in lo_j..=hi_j {
                                let s = (j as isize + sj) as usize;
                                orow[j] += if fy > 0.0 { a0 * r0[s] + a1 * r0[s + 1] } else { a0 * r0[s] };
                            }
                        }
                    }
                }
            });
    }
}

/// `c0 d11 + c1 d12 + c2 d22` sampled at `p`, zero outside the plate.
fn combo(d: &Derivatives, g: &GridSpec, p: Point2, c: [f64; 3]) -> f64 {
    c[0] * sample_bilinear(&d.d11, g, p) + c[1] * sample_bilinear(&d.d12, g, p) + c[2] * sample_bilinear(&d.d22, g, p)
}

/// Delay potential at `t = t_newest` (builds the quadrature on the fly).
pub fn q_eval(hist: &HistoryBuffer, t: f64, cfg: &AeroConfig, g: &GridSpec) -> Result<PlateField> {
    MemoryKernel::new(g, cfg).eval(hist, t)
}

/// Delay potential of a time-constant history.
pub fn q_static(u: &PlateField, cfg: &AeroConfig, g: &GridSpec) -> Result<PlateField> {
    MemoryKernel::new(g, cfg).eval_static(u)
}
