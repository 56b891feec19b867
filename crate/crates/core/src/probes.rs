//! Dynamical-systems probes run on recorded trajectories: Lipschitz
//! dependence on data, quasi-stability of trajectory differences, Lyapunov
//! decay and the distance to a set of equilibria.
//!
//! Every probe fits the smallest constants for which its inequality holds at
//! all sampled times and reports the margin, so the same constants can be
//! checked on held-out runs.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::diagnostics::{EnergyReport, LyapunovWeights};
use crate::error::{Error, Result};
use crate::grid::{norm_h1_sq, norm_h2, norm_l2alpha_sq, seminorm_h2, GridSpec, PlateField, PlateState};
use crate::integrator::{Integrator, PhysParams, Prehistory};
use crate::memory::QuadratureSpec;

/// Factor by which fitted constants are inflated for held-out checks.
pub const HELD_OUT_FACTOR: f64 = 2.0;

/// Smooth clamped random data: displacement and velocity are finite sums
/// `sin(pi x) sin(pi y) sin(m pi x) sin(n pi y)` with random coefficients,
/// scaled so that `||u||_2 = amp_u` and `||u_t||_2 = amp_v`.
pub fn random_state(g: &GridSpec, seed: u64, modes: usize, amp_u: f64, amp_v: f64) -> Result<PlateState> {
    if modes == 0 {
        return Err(Error::InvalidArgument("random data needs at least one mode".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field = |rng: &mut ChaCha8Rng| {
        let c: Vec<f64> = (0..modes * modes).map(|_| rng.gen_range(-1.0..1.0)).collect();
        PlateField::clamped_from_fn(g, |x, y| {
            let (xs, ys) = (x / g.lx(), y / g.ly());
            let env = (PI * xs).sin() * (PI * ys).sin();
            let mut s = 0.0;
            for m in 0..modes {
                for n in 0..modes {
                    let w = 1.0 / ((m + n + 1) as f64).powi(2);
                    s += w * c[m * modes + n] * ((m + 1) as f64 * PI * xs).sin() * ((n + 1) as f64 * PI * ys).sin();
                }
            }
            env * s
        })
    };
    let mut u = field(&mut rng);
    let mut v = field(&mut rng);
    let nu = norm_h2(&u, g)?;
    let nv = norm_h2(&v, g)?;
    if nu > 0.0 {
        u.scale(amp_u / nu);
    }
    if nv > 0.0 {
        v.scale(amp_v / nv);
    }
    PlateState::new(0.0, u, v)
}

/// Settings shared by the runs of a probe.
#[derive(Clone, Debug)]
pub struct RunSpec {
    pub grid: GridSpec,
    pub params: PhysParams,
    pub quad: QuadratureSpec,
    pub dt: f64,
    pub horizon: f64,
    /// Steps between recorded samples.
    pub cadence: usize,
    pub weights: LyapunovWeights,
}

/// Recorded run: the prehistory snapshots at `t <= 0`, then states and
/// energy reports every `cadence` steps.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: GridSpec,
    pub alpha: f64,
    pub t_star: f64,
    pub dt: f64,
    pub pre: Vec<(f64, PlateField)>,
    pub states: Vec<PlateState>,
    pub reports: Vec<EnergyReport>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }
}

/// Runs one trajectory with constant prehistory `u = u0`.
pub fn run_trajectory(spec: &RunSpec, state0: PlateState) -> Result<Trajectory> {
    if spec.cadence == 0 {
        return Err(Error::InvalidArgument("cadence must be at least 1".into()));
    }
    let mut it = Integrator::new(
        &spec.grid,
        spec.params.clone(),
        spec.quad,
        spec.dt,
        state0,
        Prehistory::Constant,
    )?;
    let pre = it.history().snapshots().map(|s| (s.t, (*s.u).clone())).collect();
    let steps = (spec.horizon / spec.dt).round() as usize;
    let mut states = vec![it.state().clone()];
    let mut reports = vec![it.report(&spec.weights)?];
    for n in 1..=steps {
        it.step()?;
        if n % spec.cadence == 0 || n == steps {
            states.push(it.state().clone());
            reports.push(it.report(&spec.weights)?);
        }
    }
    Ok(Trajectory {
        grid: spec.grid,
        alpha: spec.params.alpha,
        t_star: it.t_star(),
        dt: spec.dt,
        pre,
        states,
        reports,
    })
}

/// Runs two trajectories concurrently.
pub fn run_pair(spec: &RunSpec, a: PlateState, b: PlateState) -> Result<(Trajectory, Trajectory)> {
    let (ra, rb) = rayon::join(|| run_trajectory(spec, a), || run_trajectory(spec, b));
    Ok((ra?, rb?))
}

/// Fitted constants with pass flag. `margin` is the smallest ratio of the
/// bound to the observed quantity over the samples (at least 1 on the data
/// the constants were fitted to).
#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub probe: String,
    pub constants: BTreeMap<String, f64>,
    pub pass: bool,
    pub margin: f64,
    pub samples: usize,
    pub note: Option<String>,
    pub held_out: Vec<HeldOut>,
}

/// Check of fitted constants, inflated by [`HELD_OUT_FACTOR`], on other data.
#[derive(Clone, Debug, Serialize)]
pub struct HeldOut {
    pub label: String,
    pub margin: f64,
    pub pass: bool,
}

impl ProbeReport {
    fn new(probe: &str, constants: &[(&str, f64)], pass: bool, margin: f64, samples: usize) -> Self {
        Self {
            probe: probe.into(),
            constants: constants.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            pass,
            margin,
            samples,
            note: None,
            held_out: Vec::new(),
        }
    }

    pub fn constant(&self, key: &str) -> Option<f64> {
        self.constants.get(key).copied()
    }

    /// Records a held-out check whose inflated bound holds when `margin >= 1 / HELD_OUT_FACTOR`.
    pub fn add_held_out(&mut self, label: &str, margin: f64) {
        self.held_out.push(HeldOut {
            label: label.into(),
            margin,
            pass: margin * HELD_OUT_FACTOR >= 1.0,
        });
    }

    pub fn all_pass(&self) -> bool {
        self.pass && self.held_out.iter().all(|h| h.pass)
    }
}

fn ratio_margin(bound: f64, observed: f64) -> f64 {
    if observed <= 0.0 {
        f64::INFINITY
    } else {
        bound / observed
    }
}

fn check_pair(a: &Trajectory, b: &Trajectory) -> Result<()> {
    if a.grid != b.grid || a.states.len() != b.states.len() || (a.alpha - b.alpha).abs() > 0.0 {
        return Err(Error::Probe("trajectories of a pair must share grid, parameters and sampling".into()));
    }
    for (x, y) in a.states.iter().zip(&b.states) {
        if (x.t - y.t).abs() > 1e-9 {
            return Err(Error::Probe("trajectories of a pair are sampled at different times".into()));
        }
    }
    Ok(())
}

/// `E_z = ||z_t||^2_{L2_alpha} + ||Delta z||^2` for `z = u1 - u2`.
fn difference_energy(a: &PlateState, b: &PlateState, alpha: f64, g: &GridSpec) -> Result<f64> {
    let zu = PlateField::lincomb(1.0, &a.u, -1.0, &b.u);
    let zv = PlateField::lincomb(1.0, &a.v, -1.0, &b.v);
    Ok(norm_l2alpha_sq(&zv, alpha, g)? + seminorm_h2(&zu, g)?.powi(2))
}

fn difference_series(a: &Trajectory, b: &Trajectory) -> Result<Vec<(f64, f64)>> {
    check_pair(a, b)?;
    a.states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| Ok((x.t, difference_energy(x, y, a.alpha, &a.grid)?)))
        .collect()
}

/// Minimal `(log C, a)` with `a >= 0` and `log r_i <= log C + a t_i`,
/// minimizing the mean log-bound `log C + a T / 2`. The optimum lies at
/// `a = 0` or at a slope between two samples.
fn fit_log_linear(pts: &[(f64, f64)]) -> (f64, f64) {
    let horizon = pts.iter().map(|p| p.0).fold(0.0, f64::max);
    let level = |a: f64| pts.iter().map(|&(t, l)| l - a * t).fold(f64::NEG_INFINITY, f64::max);
    let mut cands = vec![0.0];
    for (i, &(ti, li)) in pts.iter().enumerate() {
        for &(tj, lj) in &pts[i + 1..] {
            if (tj - ti).abs() > 1e-12 {
                let s = (lj - li) / (tj - ti);
                if s > 0.0 {
                    cands.push(s);
                }
            }
        }
    }
    let mut best = (level(0.0), 0.0);
    let mut best_obj = best.0;
    for a in cands {
        let lc = level(a);
        let obj = lc + 0.5 * a * horizon;
        if obj < best_obj {
            best_obj = obj;
            best = (lc, a);
        }
    }
    best
}

/// Fits `E_z(t) <= C e^{a t} E_z(0)` for the difference of two runs.
pub fn lipschitz_probe(a: &Trajectory, b: &Trajectory) -> Result<ProbeReport> {
    let series = difference_series(a, b)?;
    let e0 = series[0].1;
    if e0 == 0.0 {
        let identical = series.iter().all(|p| p.1 == 0.0);
        let mut r = ProbeReport::new("lipschitz", &[("C", 1.0), ("a", 0.0)], identical, f64::INFINITY, series.len());
        r.note = Some(if identical {
            "identical data: difference vanishes".into()
        } else {
            "zero initial difference but nonzero later".into()
        });
        return Ok(r);
    }
    let t0 = series[0].0;
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|&(t, e)| (t - t0, (e / e0).ln()))
        .collect();
    let (log_c, rate) = fit_log_linear(&pts);
    let c = log_c.exp();
    let margin = lipschitz_margin(&series, c, rate);
    let pass = c.is_finite() && rate.is_finite() && rate >= 0.0;
    Ok(ProbeReport::new("lipschitz", &[("C", c), ("a", rate)], pass, margin, series.len()))
}

fn lipschitz_margin(series: &[(f64, f64)], c: f64, rate: f64) -> f64 {
    let (t0, e0) = series[0];
    series
        .iter()
        .map(|&(t, e)| ratio_margin(c * (rate * (t - t0)).exp() * e0, e))
        .fold(f64::INFINITY, f64::min)
}

/// Margin of fitted Lipschitz constants on another pair.
pub fn lipschitz_held_out(report: &ProbeReport, a: &Trajectory, b: &Trajectory) -> Result<f64> {
    let series = difference_series(a, b)?;
    let c = report.constant("C").ok_or_else(|| Error::Probe("missing constant C".into()))?;
    let rate = report.constant("a").ok_or_else(|| Error::Probe("missing constant a".into()))?;
    Ok(lipschitz_margin(&series, c, rate))
}

/// One window `[s, s + T]` of the quasi-stability inequality:
/// `lhs <= beta * p + c_q * kq`.
#[derive(Clone, Copy, Debug)]
struct QuasiWindow {
    lhs: f64,
    p: f64,
    kq: f64,
}

fn interp_norm_sq(z: &PlateField, g: &GridSpec, delta: f64) -> Result<f64> {
    let n1 = norm_h1_sq(z, g)?.sqrt();
    let n2 = norm_h2(z, g)?;
    Ok((n1.powf(delta) * n2.powf(1.0 - delta)).powi(2))
}

fn trapezoid(pts: &[(f64, f64)]) -> f64 {
    pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum()
}

/// Integral of `f` over `[lo, hi]` from samples, by the trapezoid rule with
/// linear interpolation at the ends.
fn integrate_window(pts: &[(f64, f64)], lo: f64, hi: f64) -> f64 {
    let at = |s: f64| -> f64 {
        match pts.iter().position(|p| p.0 >= s - 1e-12) {
            Some(0) | None => pts.first().map_or(0.0, |p| p.1),
            Some(k) => {
                let (a, b) = (pts[k - 1], pts[k]);
                a.1 + (s - a.0) / (b.0 - a.0) * (b.1 - a.1)
            }
        }
    };
    let mut inner: Vec<(f64, f64)> = vec![(lo, at(lo))];
    inner.extend(pts.iter().copied().filter(|p| p.0 > lo + 1e-12 && p.0 < hi - 1e-12));
    inner.push((hi, at(hi)));
    trapezoid(&inner)
}

fn quasi_windows(a: &Trajectory, b: &Trajectory, window: f64, delta: f64) -> Result<Vec<QuasiWindow>> {
    check_pair(a, b)?;
    let g = &a.grid;
    let ts = a.t_star;
    let mut h2: Vec<(f64, f64)> = Vec::new();
    if a.pre.len() == b.pre.len() {
        for ((t, ua), (_, ub)) in a.pre.iter().zip(&b.pre) {
            if *t < a.states[0].t - 1e-12 {
                h2.push((*t, norm_h2(&PlateField::lincomb(1.0, ua, -1.0, ub), g)?.powi(2)));
            }
        }
    }
    let mut ez = Vec::with_capacity(a.states.len());
    let mut lower = Vec::with_capacity(a.states.len());
    for (x, y) in a.states.iter().zip(&b.states) {
        let z = PlateField::lincomb(1.0, &x.u, -1.0, &y.u);
        h2.push((x.t, norm_h2(&z, g)?.powi(2)));
        ez.push(difference_energy(x, y, a.alpha, g)?);
        lower.push(interp_norm_sq(&z, g, delta)?);
    }
    let t_first = h2.first().map_or(0.0, |p| p.0);
    let times = a.times();
    let t_end = *times.last().expect("nonempty trajectory");
    let mut out = Vec::new();
    for (i, &s) in times.iter().enumerate() {
        if s - ts < t_first - 1e-9 || s + window > t_end + 1e-9 {
            continue;
        }
        let Some(j) = times.iter().position(|&t| t >= s + window - 1e-9) else {
            continue;
        };
        let lhs = ez[j] + integrate_window(&h2, times[j] - ts, times[j]);
        let p = ez[i] + integrate_window(&h2, s - ts, s);
        let kq = lower[i..=j].iter().copied().fold(0.0, f64::max);
        out.push(QuasiWindow { lhs, p, kq });
    }
    if out.is_empty() {
        return Err(Error::Probe(format!(
            "run too short for quasi-stability windows of length {window} (t* = {ts})"
        )));
    }
    Ok(out)
}

/// Minimal `(beta, c_q) >= 0` with `lhs_i <= beta p_i + c_q kq_i`, minimizing
/// the summed right-hand side. A two-variable LP solved over its vertices.
fn fit_quasi(w: &[QuasiWindow]) -> Option<(f64, f64)> {
    let feasible = |b: f64, c: f64| w.iter().all(|x| x.lhs <= (b * x.p + c * x.kq) * (1.0 + 1e-12) + 1e-300);
    let (sp, sk): (f64, f64) = w.iter().fold((0.0, 0.0), |acc, x| (acc.0 + x.p, acc.1 + x.kq));
    let mut cands: Vec<(f64, f64)> = Vec::new();
    for x in w {
        if x.p > 0.0 {
            cands.push((x.lhs / x.p, 0.0));
        }
        if x.kq > 0.0 {
            cands.push((0.0, x.lhs / x.kq));
        }
    }
    for (i, x) in w.iter().enumerate() {
        for y in &w[i + 1..] {
            let det = x.p * y.kq - x.kq * y.p;
            if det.abs() > 1e-300 {
                let b = (x.lhs * y.kq - x.kq * y.lhs) / det;
                let c = (x.p * y.lhs - x.lhs * y.p) / det;
                if b >= 0.0 && c >= 0.0 {
                    cands.push((b, c));
                }
            }
        }
    }
    cands
        .into_iter()
        .map(|(b, c)| {
            let b = b.max(w.iter().filter(|x| x.kq == 0.0 && x.p > 0.0).map(|x| x.lhs / x.p).fold(b, f64::max));
            (b, c)
        })
        .filter(|&(b, c)| feasible(b, c))
        .min_by(|x, y| (x.0 * sp + x.1 * sk).total_cmp(&(y.0 * sp + y.1 * sk)))
}

fn quasi_margin(w: &[QuasiWindow], beta: f64, cq: f64) -> f64 {
    w.iter()
        .map(|x| ratio_margin(beta * x.p + cq * x.kq, x.lhs))
        .fold(f64::INFINITY, f64::min)
}

/// Fits `E_z(s+T) + int_{s+T-t*}^{s+T} ||z||_2^2 <= beta (E_z(s) + int_{s-t*}^s ||z||_2^2) + C_q sup ||z||^2_{2-delta}`
/// over every window `[s, s+T]` of the pair; passes when `beta < 1`.
pub fn quasistability_probe(a: &Trajectory, b: &Trajectory, window: f64, delta: f64) -> Result<ProbeReport> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!("delta = {delta} must lie in [0, 1]")));
    }
    let w = quasi_windows(a, b, window, delta)?;
    if w.iter().all(|x| x.lhs == 0.0) {
        let mut r = ProbeReport::new("quasi", &[("beta", 0.0), ("C_q", 0.0)], true, f64::INFINITY, w.len());
        r.note = Some("zero difference: both sides vanish".into());
        return Ok(r);
    }
    match fit_quasi(&w) {
        Some((beta, cq)) => {
            let margin = quasi_margin(&w, beta, cq);
            Ok(ProbeReport::new("quasi", &[("beta", beta), ("C_q", cq), ("T", window), ("delta", delta)], beta < 1.0, margin, w.len()))
        }
        None => {
            let mut r = ProbeReport::new("quasi", &[("T", window), ("delta", delta)], false, 0.0, w.len());
            r.note = Some("no feasible constants".into());
            Ok(r)
        }
    }
}

/// Margin of fitted quasi-stability constants on another pair.
pub fn quasistability_held_out(report: &ProbeReport, a: &Trajectory, b: &Trajectory) -> Result<f64> {
    let get = |k: &str| report.constant(k).ok_or_else(|| Error::Probe(format!("missing constant {k}")));
    let w = quasi_windows(a, b, get("T")?, get("delta")?)?;
    Ok(quasi_margin(&w, get("beta")?, get("C_q")?))
}

fn lyapunov_series(reports: &[EnergyReport]) -> Result<Vec<(f64, f64)>> {
    let pts: Vec<(f64, f64)> = reports.iter().filter_map(|r| r.v.map(|v| (r.t, v))).collect();
    if pts.len() < 2 {
        return Err(Error::Probe("fewer than two samples with V recorded".into()));
    }
    Ok(pts)
}

/// Smallest asymptotic level `C_V / delta` for a given rate.
fn lyapunov_level(pts: &[(f64, f64)], delta: f64) -> f64 {
    let (t0, v0) = pts[0];
    pts[1..]
        .iter()
        .filter(|p| p.0 > t0)
        .map(|&(t, v)| {
            let e = (-delta * (t - t0)).exp();
            (v - v0 * e) / (1.0 - e)
        })
        .fold(0.0, f64::max)
}

fn lyapunov_margin(pts: &[(f64, f64)], delta: f64, level: f64) -> f64 {
    let (t0, v0) = pts[0];
    pts.iter()
        .map(|&(t, v)| {
            let e = (-delta * (t - t0)).exp();
            ratio_margin(v0 * e + level * (1.0 - e), v)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Fits `V(t) <= V(0) e^{-delta t} + C_V / delta (1 - e^{-delta t})` with the
/// smallest asymptotic level `C_V / delta` over a log-spaced rate grid, taking
/// the largest rate among ties. Passes when `delta > 0` and the level lies
/// below `V(0)`, so the bound predicts decay.
pub fn lyapunov_probe(reports: &[EnergyReport]) -> Result<ProbeReport> {
    let pts = lyapunov_series(reports)?;
    let v0 = pts[0].1;
    let rates: Vec<f64> = (0..=240).map(|i| 10f64.powf(-4.0 + 6.0 * i as f64 / 240.0)).collect();
    let mut best = (f64::INFINITY, 0.0);
    for &d in &rates {
        let lvl = lyapunov_level(&pts, d);
        if lvl < best.0 * (1.0 - 1e-9) || (lvl <= best.0 * (1.0 + 1e-9) && d > best.1) {
            best = (lvl.min(best.0), d);
        }
    }
    let (level, delta) = best;
    let margin = lyapunov_margin(&pts, delta, level);
    let pass = delta > 0.0 && level < v0;
    let mut r = ProbeReport::new(
        "lyapunov",
        &[("delta", delta), ("C_V", delta * level), ("level", level), ("V0", v0)],
        pass,
        margin,
        pts.len(),
    );
    if !pass {
        r.note = Some("fit degenerates: no decay below the initial value".into());
    }
    Ok(r)
}

/// Margin of fitted Lyapunov constants on another run.
pub fn lyapunov_held_out(report: &ProbeReport, reports: &[EnergyReport]) -> Result<f64> {
    let pts = lyapunov_series(reports)?;
    let delta = report.constant("delta").ok_or_else(|| Error::Probe("missing constant delta".into()))?;
    let level = report.constant("level").ok_or_else(|| Error::Probe("missing constant level".into()))?;
    Ok(lyapunov_margin(&pts, delta, level))
}

/// Distance `min_ubar ||u - ubar||_2^2 + ||u_t||_1^2` to a finite set of equilibria.
#[derive(Clone, Debug)]
pub struct ConvergenceMonitor {
    grid: GridSpec,
    equilibria: Vec<PlateField>,
}

impl ConvergenceMonitor {
    pub fn new(g: &GridSpec, equilibria: Vec<PlateField>) -> Result<Self> {
        if equilibria.is_empty() {
            return Err(Error::InvalidArgument("convergence monitor needs at least one equilibrium".into()));
        }
        for e in &equilibria {
            g.check(e)?;
        }
        Ok(Self {
            grid: *g,
            equilibria,
        })
    }

    pub fn distance(&self, state: &PlateState) -> Result<f64> {
        let g = &self.grid;
        let kin = norm_h1_sq(&state.v, g)?;
        let mut best = f64::INFINITY;
        for e in &self.equilibria {
            let d = norm_h2(&PlateField::lincomb(1.0, &state.u, -1.0, e), g)?.powi(2);
            best = best.min(d);
        }
        Ok(best + kin)
    }

    /// Index of the nearest equilibrium in the `H2` distance.
    pub fn nearest(&self, u: &PlateField) -> Result<usize> {
        let mut best = (f64::INFINITY, 0);
        for (i, e) in self.equilibria.iter().enumerate() {
            let d = norm_h2(&PlateField::lincomb(1.0, u, -1.0, e), &self.grid)?;
            if d < best.0 {
                best = (d, i);
            }
        }
        Ok(best.1)
    }
}

/// Summary of a distance series.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceSummary {
    pub initial: f64,
    pub last: f64,
    /// First sampled time at which the distance falls below `threshold * initial`, per threshold.
    pub crossings: Vec<(f64, Option<f64>)>,
}

pub fn summarize_convergence(series: &[(f64, f64)], thresholds: &[f64]) -> Result<ConvergenceSummary> {
    let (&(_, initial), &(_, last)) = series
        .first()
        .zip(series.last())
        .ok_or_else(|| Error::Probe("empty distance series".into()))?;
    let crossings = thresholds
        .iter()
        .map(|&th| (th, series.iter().find(|p| p.1 <= th * initial).map(|p| p.0)))
        .collect();
    Ok(ConvergenceSummary { initial, last, crossings })
}

/// Distance series of a recorded trajectory.
pub fn convergence_monitor(traj: &Trajectory, monitor: &ConvergenceMonitor) -> Result<Vec<(f64, f64)>> {
    traj.states.iter().map(|s| Ok((s.t, monitor.distance(s)?))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, u: f64, k: f64, horizon: f64) -> RunSpec {
        let g = GridSpec::unit_square(n).unwrap();
        RunSpec {
            grid: g,
            params: PhysParams::unloaded(&g, u, 0.1, k).unwrap(),
            quad: QuadratureSpec::new(8, 16).unwrap(),
            dt: 0.02,
            horizon,
            cadence: 5,
            weights: LyapunovWeights::default(),
        }
    }

    #[test]
    fn random_state_is_clamped_and_scaled() {
        let g = GridSpec::unit_square(17).unwrap();
        let s = random_state(&g, 7, 3, 0.5, 0.2).unwrap();
        assert!(s.u.is_clamped() && s.v.is_clamped());
        assert!((norm_h2(&s.u, &g).unwrap() - 0.5).abs() < 1e-12);
        let again = random_state(&g, 7, 3, 0.5, 0.2).unwrap();
        assert_eq!(s.u, again.u);
    }

    #[test]
    fn identical_data_passes_trivially() {
        let sp = spec(9, 0.3, 0.1, 0.4);
        let s = random_state(&sp.grid, 1, 2, 0.3, 0.1).unwrap();
        let (a, b) = run_pair(&sp, s.clone(), s).unwrap();
        let r = lipschitz_probe(&a, &b).unwrap();
        assert!(r.pass);
        let q = quasistability_probe(&a, &b, 0.1, 0.5);
        // the window needs a full t* of history, which a short run lacks
        assert!(q.is_err() || q.unwrap().pass);
    }

    #[test]
    fn log_linear_fit_recovers_exponential() {
        let pts: Vec<(f64, f64)> = (0..20).map(|i| (i as f64 * 0.1, 0.3 + 1.5 * i as f64 * 0.1)).collect();
        let (lc, a) = fit_log_linear(&pts);
        assert!((a - 1.5).abs() < 1e-9 && (lc - 0.3).abs() < 1e-9);
        let flat: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, -(i as f64))).collect();
        let (lc, a) = fit_log_linear(&flat);
        assert_eq!(a, 0.0);
        assert_eq!(lc, 0.0);
    }

    #[test]
    fn quasi_fit_is_feasible_and_minimal() {
        let w = vec![
            QuasiWindow { lhs: 0.5, p: 1.0, kq: 0.0 },
            QuasiWindow { lhs: 1.0, p: 1.0, kq: 1.0 },
            QuasiWindow { lhs: 0.2, p: 0.1, kq: 0.5 },
        ];
        let (b, c) = fit_quasi(&w).unwrap();
        assert!(quasi_margin(&w, b, c) >= 1.0 - 1e-12);
        assert!((b - 0.5).abs() < 1e-12 && (c - 0.5).abs() < 1e-12, "{b} {c}");
    }

    #[test]
    fn lyapunov_fit_on_exponential_series() {
        let reps: Vec<EnergyReport> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.1;
                EnergyReport {
                    t,
                    v: Some(2.0 * (-0.7 * t).exp()),
                    ..Default::default()
                }
            })
            .collect();
        let r = lyapunov_probe(&reps).unwrap();
        assert!(r.pass);
        let d = r.constant("delta").unwrap();
        assert!(d > 0.6 && d <= 0.7 + 1e-9, "{d}");
        assert!(r.margin >= 1.0 - 1e-12);
        let flat: Vec<EnergyReport> = (0..50)
            .map(|i| EnergyReport {
                t: i as f64 * 0.1,
                v: Some(1.0),
                ..Default::default()
            })
            .collect();
        assert!(!lyapunov_probe(&flat).unwrap().pass);
    }

    #[test]
    fn monitor_distance_at_equilibrium_is_zero() {
        let g = GridSpec::unit_square(9).unwrap();
        let s = random_state(&g, 3, 2, 0.4, 0.0).unwrap();
        let m = ConvergenceMonitor::new(&g, vec![PlateField::zeros(&g), s.u.clone()]).unwrap();
        assert!(m.distance(&s).unwrap() < 1e-28);
        assert_eq!(m.nearest(&s.u).unwrap(), 1);
        assert!(ConvergenceMonitor::new(&g, vec![]).is_err());
    }

    #[test]
    fn damped_pair_contracts() {
        let sp = spec(9, 0.5, 0.2, 6.0);
        let a = random_state(&sp.grid, 11, 2, 0.3, 0.1).unwrap();
        let b = random_state(&sp.grid, 12, 2, 0.3, 0.1).unwrap();
        let (ta, tb) = run_pair(&sp, a, b).unwrap();
        let l = lipschitz_probe(&ta, &tb).unwrap();
        assert!(l.pass && l.margin >= 1.0 - 1e-9);
        let v = lyapunov_probe(&ta.reports).unwrap();
        assert!(v.pass, "{v:?}");
    }
}
