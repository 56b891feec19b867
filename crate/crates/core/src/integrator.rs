//! Time integration of the reduced plate equation with memory
//! `M_alpha u_tt + Delta^2 u + k M_alpha u_t + f_v(u) = p0 - (d_t + U d1) u - q(u^t)`.
//!
//! The scheme is Crank-Nicolson on the linear part (`M_alpha`, `Delta^2`,
//! `k M_alpha d_t`, the piston term) and second-order Adams-Bashforth
//! extrapolation of `N(u) = p0 - f_v(u) - U d1 u - q(u^t)`:
//!
//! ```text
//! (u1 - u0) / dt = (w1 + w0) / 2
//! M (w1 - w0) / dt + A (u1 + u0) / 2 + (k M + I) (w1 + w0) / 2 = 3/2 N0 - 1/2 N_prev
//! ```
//!
//! Eliminating `u1` leaves one solve per step with the fixed matrix
//! `S = (1/dt + k/2) M + dt/4 A + 1/2 I`, factored once. The first step uses
//! `N0` alone. Testing the momentum equation with `u1 - u0` gives the exact
//! discrete identity for the quadratic energy, so the per-step power-balance
//! defect only measures the explicit terms.

use std::sync::Arc;

use crate::banded::{BandedCholesky, BandedSpd};
use crate::diagnostics::{energy_report, plate_energy, EnergyReport, LyapunovWeights, PiSeries, StaticEnergy};
use crate::error::{Error, Result};
use crate::grid::{inner_l2, norm_l2alpha_sq, GridSpec, PlateField, PlateState};
use crate::memory::{AeroConfig, HistoryBuffer, MemoryKernel, QuadratureSpec};
use crate::ops::{assemble_neg_laplacian, d1, Biharmonic, Boundary, Helmholtz, InteriorMap};
use crate::vonkarman::{LoadSet, VonKarman};

/// Physical configuration: flow speed, rotational inertia, damping and loads.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysParams {
    pub u_flow: f64,
    pub alpha: f64,
    pub k: f64,
    pub loads: LoadSet,
}

impl PhysParams {
    pub fn new(u_flow: f64, alpha: f64, k: f64, loads: LoadSet) -> Result<Self> {
        if !(0.0..1.0).contains(&u_flow) {
            return Err(Error::InvalidArgument(format!("U = {u_flow} must lie in [0, 1)")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha = {alpha} must be positive")));
        }
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::InvalidArgument(format!("k = {k} must be nonnegative")));
        }
        Ok(Self {
            u_flow,
            alpha,
            k,
            loads,
        })
    }

    pub fn unloaded(g: &GridSpec, u_flow: f64, alpha: f64, k: f64) -> Result<Self> {
        Self::new(u_flow, alpha, k, LoadSet::zero(g))
    }
}

/// Plate history before the initial time.
#[derive(Clone, Debug)]
pub enum Prehistory {
    /// `u = 0` before `t0`.
    Zero,
    /// `u = u0` before `t0`.
    Constant,
    /// A supplied buffer whose newest snapshot is `u0` at `t0`.
    Supplied(HistoryBuffer),
}

/// Explicit force `N(u) = p0 - f_v(u) - U d1 u - q`.
fn explicit_force(p: &PhysParams, fv: &PlateField, u: &PlateField, q: &PlateField, g: &GridSpec) -> PlateField {
    let mut n = p.loads.p0.clone();
    n.axpy(-1.0, fv);
    n.axpy(-p.u_flow, &d1(u, g, Boundary::Clamped));
    n.axpy(-1.0, q);
    n.zero_boundary();
    n
}

/// Residual of the reduced plate equation on interior nodes:
/// `M_alpha a + Delta^2 u + k M_alpha u_t + f_v(u) - p0 + u_t + U d1 u + q`.
pub fn pde_residual(
    vk: &VonKarman,
    p: &PhysParams,
    state: &PlateState,
    accel: &PlateField,
    q: &PlateField,
) -> Result<PlateField> {
    let g = vk.grid();
    g.check(accel)?;
    g.check(q)?;
    let m = Helmholtz::new(g, p.alpha)?;
    let mut r = m.apply(accel);
    r.axpy(1.0, &vk.biharmonic().apply(&state.u));
    r.axpy(p.k, &m.apply(&state.v));
    r.axpy(1.0, &state.v);
    r.axpy(-1.0, &explicit_force(p, &vk.fv(&state.u)?, &state.u, q, g));
    r.zero_boundary();
    Ok(r)
}

/// Everything needed to continue a run bit-for-bit.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub state: PlateState,
    pub history: HistoryBuffer,
    /// Explicit force of the previous step, absent before the first step.
    pub n_prev: Option<PlateField>,
    pub diss_accum: f64,
    pub power_accum: f64,
    pub steps: u64,
    pub t0: f64,
}

/// Time stepper holding the factorizations, the history and the running sums.
#[derive(Clone, Debug)]
pub struct Integrator {
    grid: GridSpec,
    params: PhysParams,
    dt: f64,
    t0: f64,
    vk: VonKarman,
    kernel: MemoryKernel,
    map: InteriorMap,
    lap: BandedSpd,
    step_chol: Arc<BandedCholesky>,
    state: PlateState,
    history: HistoryBuffer,
    pis: PiSeries,
    airy: PlateField,
    n_cur: PlateField,
    n_prev: Option<PlateField>,
    q_cur: PlateField,
    energy: f64,
    power: f64,
    e_star0: f64,
    diss_accum: f64,
    power_accum: f64,
    last_defect: f64,
    last_accel: Option<PlateField>,
    steps: u64,
    instability_factor: f64,
}

impl Integrator {
    /// Starts a run at `state0` with the given prehistory.
    pub fn new(
        g: &GridSpec,
        params: PhysParams,
        quad: QuadratureSpec,
        dt: f64,
        state0: PlateState,
        prehistory: Prehistory,
    ) -> Result<Self> {
        let g = *g;
        g.check(&state0.u)?;
        let aero = AeroConfig::new(&g, params.u_flow, quad)?;
        let history = match prehistory {
            Prehistory::Zero => {
                let mut h = HistoryBuffer::constant(&g, dt, aero.t_star(), state0.t - dt, &PlateField::zeros(&g))?;
                h.push(state0.t, state0.u.clone())?;
                h
            }
            Prehistory::Constant => HistoryBuffer::constant(&g, dt, aero.t_star(), state0.t, &state0.u)?,
            Prehistory::Supplied(h) => h,
        };
        let t0 = state0.t;
        Self::from_parts(params, aero, dt, state0, history, None, 0.0, 0.0, 0, t0)
    }

    /// Continues a run from a checkpoint.
    pub fn resume(params: PhysParams, quad: QuadratureSpec, dt: f64, cp: Checkpoint) -> Result<Self> {
        let g = *cp.history.grid();
        let aero = AeroConfig::new(&g, params.u_flow, quad)?;
        Self::from_parts(
            params,
            aero,
            dt,
            cp.state,
            cp.history,
            cp.n_prev,
            cp.diss_accum,
            cp.power_accum,
            cp.steps,
            cp.t0,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn from_parts(
        params: PhysParams,
        aero: AeroConfig,
        dt: f64,
        state: PlateState,
        history: HistoryBuffer,
        n_prev: Option<PlateField>,
        diss_accum: f64,
        power_accum: f64,
        steps: u64,
        t0: f64,
    ) -> Result<Self> {
        let g = *history.grid();
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step {dt} must be positive")));
        }
        g.check(&state.u)?;
        g.check(&state.v)?;
        g.check(&params.loads.p0)?;
        if (history.dt() - dt).abs() > 1e-12 * dt {
            return Err(Error::InvalidArgument(format!(
                "history spacing {} differs from the time step {dt}",
                history.dt()
            )));
        }
        let newest = history.newest().ok_or_else(|| Error::InvalidArgument("empty history".into()))?;
        if (newest.t - state.t).abs() > 1e-9 * dt || newest.u.as_ref() != &state.u {
            return Err(Error::InvalidArgument(
                "the newest history snapshot must be the current displacement".into(),
            ));
        }
        if history.t_star() < aero.t_star() * (1.0 - 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "history window {} is shorter than the escape time {}",
                history.t_star(),
                aero.t_star()
            )));
        }
        let bih = Arc::new(Biharmonic::new(&g)?);
        let vk = VonKarman::with_biharmonic(bih.clone(), params.loads.clone());
        let kernel = MemoryKernel::new(&g, &aero);
        let map = InteriorMap::new(&g);
        let lap = assemble_neg_laplacian(&g);
        let a = bih.matrix();
        let mut s = BandedSpd::zeros(a.n(), a.bandwidth());
        s.add_scaled(0.25 * dt, a);
        let c = 1.0 / dt + 0.5 * params.k;
        s.add_scaled(c * params.alpha, &lap);
        s.shift_diagonal(c + 0.5);
        let step_chol = Arc::new(s.factor()?);

        // Pi_* along the stored history, for the Lyapunov memory term
        let mut pis = PiSeries::new();
        let mut last: Option<(Arc<PlateField>, f64)> = None;
        for snap in history.snapshots() {
            let pi = match &last {
                Some((u, pi)) if Arc::ptr_eq(u, &snap.u) => *pi,
                _ => vk.pi_star(&snap.u)?,
            };
            pis.push(snap.t, pi);
            last = Some((snap.u.clone(), pi));
        }

        let (fv, airy) = vk.fv_and_airy(&state.u)?;
        let q = kernel.eval(&history, state.t)?;
        let n_cur = explicit_force(&params, &fv, &state.u, &q, &g);
        let ke = 0.5 * norm_l2alpha_sq(&state.v, params.alpha, &g)?;
        let st = StaticEnergy::new(&vk, &state.u, &airy);
        let energy = plate_energy(ke, &st);
        let e_star0 = ke + st.pi_star();
        let mut me = Self {
            grid: g,
            dt,
            t0,
            vk,
            kernel,
            map,
            lap,
            step_chol,
            history,
            pis,
            airy,
            n_cur,
            n_prev,
            q_cur: q,
            energy,
            power: 0.0,
            e_star0,
            diss_accum,
            power_accum,
            last_defect: 0.0,
            last_accel: None,
            steps,
            instability_factor: 1e6,
            params,
            state,
        };
        me.power = me.power_at(&me.state.u, &me.state.v, &me.q_cur)?;
        Ok(me)
    }

    /// Energy growth factor that aborts the run (`E* > factor (E*(0) + 1)`).
    pub fn set_instability_factor(&mut self, factor: f64) {
        self.instability_factor = factor;
    }

    fn power_at(&self, u: &PlateField, w: &PlateField, q: &PlateField) -> Result<f64> {
        let g = &self.grid;
        let p = &self.params;
        let mut work = p.k * norm_l2alpha_sq(w, p.alpha, g)? + inner_l2(w, w, g)?;
        work += p.u_flow * inner_l2(&d1(u, g, Boundary::Clamped), w, g)?;
        work += inner_l2(q, w, g)?;
        Ok(work)
    }

    /// Advances one step of size `dt`.
    pub fn step(&mut self) -> Result<()> {
        let g = self.grid;
        let (dt, p) = (self.dt, &self.params);
        let nh = match &self.n_prev {
            Some(prev) => PlateField::lincomb(1.5, &self.n_cur, -0.5, prev),
            None => self.n_cur.clone(),
        };
        let xu = self.map.gather(&self.state.u);
        let xw = self.map.gather(&self.state.v);
        let n = xu.len();
        let (mut lw, mut au, mut aw) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        self.lap.matvec(&xw, &mut lw);
        let a = self.vk.biharmonic().matrix();
        a.matvec(&xu, &mut au);
        a.matvec(&xw, &mut aw);
        let mut rhs = self.map.gather(&nh);
        let c = 1.0 / dt - 0.5 * p.k;
        for r in 0..n {
            rhs[r] += c * (xw[r] + p.alpha * lw[r]) - 0.5 * xw[r] - au[r] - 0.25 * dt * aw[r];
        }
        let eta = self.step_chol.solve_in_place(&mut rhs);
        if eta > 1e-10 {
            return Err(Error::Solver {
                what: "time step",
                residual: eta,
            });
        }
        let w1 = self.map.scatter(&g, &rhs);
        let mut u1 = self.state.u.clone();
        u1.axpy(0.5 * dt, &w1);
        u1.axpy(0.5 * dt, &self.state.v);
        u1.zero_boundary();
        if !u1.is_finite() {
            return Err(Error::NonFinite("plate displacement"));
        }

        self.steps += 1;
        let t1 = self.t0 + self.steps as f64 * dt;
        let t1 = if (t1 - (self.state.t + dt)).abs() <= 1e-9 * dt {
            t1
        } else {
            self.state.t + dt
        };
        self.history.push(t1, u1.clone())?;
        let (fv, airy) = self.vk.fv_and_airy(&u1)?;
        let q = self.kernel.eval(&self.history, t1)?;
        let n1 = explicit_force(p, &fv, &u1, &q, &g);

        let ke1 = 0.5 * norm_l2alpha_sq(&w1, p.alpha, &g)?;
        let st = StaticEnergy::new(&self.vk, &u1, &airy);
        let e1 = plate_energy(ke1, &st);
        let ke0 = 0.5 * norm_l2alpha_sq(&self.state.v, p.alpha, &g)?;
        let p1 = self.power_at(&u1, &w1, &q)?;
        self.last_defect = e1 - self.energy + 0.5 * dt * (self.power + p1);
        self.power_accum += self.last_defect.abs();
        self.diss_accum += p.k * dt * (ke0 + ke1);
        let e_star = ke1 + st.pi_star();

        self.pis.push(t1, st.pi_star());
        let oldest = self.history.oldest().map_or(t1, |s| s.t);
        self.pis.evict_before(oldest - 1e-9 * dt);

        let mut accel = PlateField::lincomb(1.0 / dt, &w1, -1.0 / dt, &self.state.v);
        accel.zero_boundary();
        self.last_accel = Some(accel);
        self.state = PlateState {
            t: t1,
            u: u1,
            v: w1,
        };
        self.airy = airy;
        self.n_prev = Some(std::mem::replace(&mut self.n_cur, n1));
        self.q_cur = q;
        self.energy = e1;
        self.power = p1;

        let bound = self.instability_factor * (self.e_star0 + 1.0);
        if !(e_star <= bound) {
            return Err(Error::Instability {
                t: t1,
                e_star,
                bound,
            });
        }
        Ok(())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn params(&self) -> &PhysParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t(&self) -> f64 {
        self.state.t
    }

    pub fn t_star(&self) -> f64 {
        self.kernel.config().t_star()
    }

    pub fn aero(&self) -> &AeroConfig {
        self.kernel.config()
    }

    pub fn state(&self) -> &PlateState {
        &self.state
    }

    pub fn history(&self) -> &HistoryBuffer {
        &self.history
    }

    pub fn von_karman(&self) -> &VonKarman {
        &self.vk
    }

    pub fn kernel(&self) -> &MemoryKernel {
        &self.kernel
    }

    /// Delay potential at the current time.
    pub fn q(&self) -> &PlateField {
        &self.q_cur
    }

    /// Airy stress function of the current displacement.
    pub fn airy(&self) -> &PlateField {
        &self.airy
    }

    /// Plate energy `E_pl` at the current state.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn diss_accum(&self) -> f64 {
        self.diss_accum
    }

    /// Sum of the absolute per-step power-balance defects so far.
    pub fn power_accum(&self) -> f64 {
        self.power_accum
    }

    pub fn last_defect(&self) -> f64 {
        self.last_defect
    }

    /// `(w1 - w0) / dt` of the last step.
    pub fn last_accel(&self) -> Option<&PlateField> {
        self.last_accel.as_ref()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn report(&self, weights: &LyapunovWeights) -> Result<EnergyReport> {
        energy_report(
            &self.vk,
            self.params.alpha,
            self.params.k,
            &self.state,
            &self.airy,
            &self.pis,
            self.t_star(),
            weights,
            self.diss_accum,
            self.power_accum,
        )
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            state: self.state.clone(),
            history: self.history.clone(),
            n_prev: self.n_prev.clone(),
            diss_accum: self.diss_accum,
            power_accum: self.power_accum,
            steps: self.steps,
            t0: self.t0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(g: &GridSpec, a: f64) -> PlateField {
        PlateField::clamped_from_fn(g, |x, y| {
            let s = (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin();
            a * s * s
        })
    }

    fn run(n: usize, dt: f64, t_end: f64, u_flow: f64, k: f64) -> Integrator {
        let g = GridSpec::unit_square(n).unwrap();
        let p = PhysParams::unloaded(&g, u_flow, 0.1, k).unwrap();
        let st = PlateState::new(0.0, bump(&g, 0.5), PlateField::zeros(&g)).unwrap();
        let mut it = Integrator::new(&g, p, QuadratureSpec::new(16, 32).unwrap(), dt, st, Prehistory::Constant).unwrap();
        let steps = (t_end / dt).round() as usize;
        for _ in 0..steps {
            it.step().unwrap();
        }
        it
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = GridSpec::unit_square(13).unwrap();
        let p = PhysParams::unloaded(&g, 0.5, 0.1, 0.1).unwrap();
        let mut z = Integrator::new(&g, p, QuadratureSpec::default(), 0.05, PlateState::zero(&g), Prehistory::Zero).unwrap();
        for _ in 0..20 {
            z.step().unwrap();
        }
        assert_eq!(z.state().u.max_abs(), 0.0);
        assert_eq!(z.state().v.max_abs(), 0.0);
    }

    #[test]
    fn power_defect_is_second_order() {
        let defects: Vec<f64> = [0.04, 0.02, 0.01].iter().map(|&dt| run(17, dt, 2.0, 0.5, 0.1).power_accum()).collect();
        eprintln!("power defects {defects:?}");
        assert!(defects[0] / defects[1] > 3.5 && defects[1] / defects[2] > 3.5, "{defects:?}");
    }

    #[test]
    fn damped_energy_decreases_without_flow() {
        let g = GridSpec::unit_square(17).unwrap();
        let p = PhysParams::unloaded(&g, 0.0, 0.1, 0.2).unwrap();
        let st = PlateState::new(0.0, bump(&g, 0.3), PlateField::zeros(&g)).unwrap();
        let mut it = Integrator::new(&g, p, QuadratureSpec::new(16, 32).unwrap(), 0.02, st, Prehistory::Constant).unwrap();
        let e0 = it.energy();
        for _ in 0..100 {
            it.step().unwrap();
        }
        assert!(it.energy() < e0);
        assert!(it.diss_accum() > 0.0);
    }

    #[test]
    fn self_convergence_is_second_order() {
        let u: Vec<PlateField> = [0.01, 0.005, 0.0025].iter().map(|&dt| run(13, dt, 0.5, 0.5, 0.1).state().u.clone()).collect();
        let e1 = u[0].max_abs_diff(&u[1]);
        let e2 = u[1].max_abs_diff(&u[2]);
        eprintln!("self-convergence {e1:e} {e2:e}");
        assert!(e1 / e2 > 3.5, "{e1} {e2}");
    }

    #[test]
    fn checkpoint_resume_is_bitwise() {
        let mut a = run(13, 0.05, 0.5, 0.5, 0.1);
        let cp = a.checkpoint();
        let mut b = Integrator::resume(a.params().clone(), QuadratureSpec::new(16, 32).unwrap(), 0.05, cp).unwrap();
        for _ in 0..5 {
            a.step().unwrap();
            b.step().unwrap();
        }
        assert_eq!(a.state(), b.state());
        assert_eq!(a.power_accum(), b.power_accum());
    }
}
