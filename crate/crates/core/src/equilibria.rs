//! Stationary states of the reduced dynamics
//! `G(u) = Delta^2 u + f_v(u) + U d1 u + q_static(u) - p0 = 0`,
//! their stability indicator, the buckling load of the radial pre-stress
//! family and natural-parameter continuation.
//!
//! Residuals are measured as `||Delta_h^{-2} G||_2 / (1 + ||Delta_h^{-2} p0||_2)`
//! in the discrete `H2` norm, the dual scaling of the fourth-order operator.

use std::sync::Arc;

use serde::Serialize;

use crate::banded::BandedSpd;
use crate::error::{Error, Result};
use crate::grid::{norm_h2, GridSpec, PlateField};
use crate::integrator::PhysParams;
use crate::linalg::{gmres, lanczos_lowest};
use crate::memory::{AeroConfig, MemoryKernel, QuadratureSpec};
use crate::ops::{assemble_neg_laplacian, d1, Biharmonic, Boundary, InteriorMap};
use crate::vonkarman::{radial_prestress, LoadSet, Linearization, VonKarman};

/// Discretized stationary operator at fixed parameters.
#[derive(Clone, Debug)]
pub struct StaticProblem {
    grid: GridSpec,
    params: PhysParams,
    vk: VonKarman,
    kernel: MemoryKernel,
    map: InteriorMap,
    p0_scale: f64,
}

impl StaticProblem {
    pub fn new(g: &GridSpec, params: PhysParams, quad: QuadratureSpec) -> Result<Self> {
        let bih = Arc::new(Biharmonic::new(g)?);
        Self::with_biharmonic(bih, params, quad)
    }

    pub fn with_biharmonic(bih: Arc<Biharmonic>, params: PhysParams, quad: QuadratureSpec) -> Result<Self> {
        let g = *bih.grid();
        let aero = AeroConfig::new(&g, params.u_flow, quad)?;
        let kernel = MemoryKernel::new(&g, &aero);
        let vk = VonKarman::with_biharmonic(bih.clone(), params.loads.clone());
        let p0_scale = norm_h2(&bih.solve(&params.loads.p0)?.0, &g)?;
        Ok(Self {
            grid: g,
            params,
            vk,
            kernel,
            map: InteriorMap::new(&g),
            p0_scale,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn params(&self) -> &PhysParams {
        &self.params
    }

    pub fn von_karman(&self) -> &VonKarman {
        &self.vk
    }

    fn flow_terms(&self, u: &PlateField) -> Result<PlateField> {
        let mut out = self.kernel.eval_static(u)?;
        if self.params.u_flow != 0.0 {
            out.axpy(self.params.u_flow, &d1(u, &self.grid, Boundary::Clamped));
        }
        Ok(out)
    }

    /// `G(u)` with a zero boundary ring.
    pub fn residual(&self, u: &PlateField) -> Result<PlateField> {
        let mut r = self.vk.biharmonic().apply(u);
        r.axpy(1.0, &self.vk.fv(u)?);
        r.axpy(1.0, &self.flow_terms(u)?);
        r.axpy(-1.0, &self.params.loads.p0);
        r.zero_boundary();
        Ok(r)
    }

    /// Scaled residual norm used as the convergence measure.
    pub fn residual_norm(&self, r: &PlateField) -> Result<f64> {
        let w = self.vk.biharmonic().solve(r)?.0;
        Ok(norm_h2(&w, &self.grid)? / (1.0 + self.p0_scale))
    }

    /// `J(u) h = Delta^2 h + f_v'(u) h + U d1 h + q_static(h)`.
    pub fn jacobian_apply(&self, lin: &Linearization, h: &PlateField) -> Result<PlateField> {
        let mut r = self.vk.biharmonic().apply(h);
        r.axpy(1.0, &self.vk.jacobian_apply_lin(lin, h)?);
        r.axpy(1.0, &self.flow_terms(h)?);
        r.zero_boundary();
        Ok(r)
    }

    /// Symmetric part `Delta^2 h + f_v'(u) h`: the Hessian of the plate potential.
    fn hessian_apply(&self, lin: &Linearization, h: &PlateField) -> Result<PlateField> {
        let mut r = self.vk.biharmonic().apply(h);
        r.axpy(1.0, &self.vk.jacobian_apply_lin(lin, h)?);
        r.zero_boundary();
        Ok(r)
    }

    /// Lowest eigenpair of `Delta_h^{-2} H(u)` with `H` the potential Hessian.
    /// Negative values mark equilibria that are unstable for the plate
    /// potential; the eigenvector is normalized in the `Delta_h^2` energy.
    pub fn lowest_mode(&self, u: &PlateField) -> Result<(f64, PlateField)> {
        let g = self.grid;
        let lin = self.vk.linearize(u)?;
        let bih = self.vk.biharmonic().clone();
        let a = bih.matrix().clone();
        let map = &self.map;
        let start: Vec<f64> = map.gather(&PlateField::clamped_from_fn(&g, |x, y| {
            let s = (std::f64::consts::PI * x / g.lx()).sin() * (std::f64::consts::PI * y / g.ly()).sin();
            s * s * (1.0 + 0.1 * x + 0.07 * y)
        }));
        let (lam, v) = lanczos_lowest(
            &mut |x| {
                let h = map.scatter(&g, x);
                let kh = self.hessian_apply(&lin, &h)?;
                let kx = map.gather(&kh);
                let (bx, _) = bih.solve(&kh)?;
                Ok((map.gather(&bx), kx))
            },
            &mut |x| {
                let mut y = vec![0.0; x.len()];
                a.matvec(x, &mut y);
                y
            },
            &start,
            80,
            1e-10,
        )?;
        Ok((lam, map.scatter(&g, &v)))
    }
}

/// Newton controls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub inner_tol: f64,
    pub max_halvings: usize,
    /// Compute the lowest Hessian eigenvalue at the converged state.
    pub with_eig: bool,
    /// Deflate the trivial solution with `M(u) = 1/|u|^2 + shift`, so that
    /// Newton cannot converge to `u = 0`.
    pub deflate_origin: Option<f64>,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            inner_tol: 1e-8,
            max_halvings: 30,
            with_eig: true,
            deflate_origin: None,
        }
    }
}

/// Result of a Newton solve.
#[derive(Clone, Debug)]
pub struct EquilibriumResult {
    pub u_bar: PlateField,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub smallest_eig: Option<f64>,
}

/// `G(u)` for the given parameters (builds the operators on the fly).
pub fn stationary_residual(g: &GridSpec, u: &PlateField, p: &PhysParams, quad: QuadratureSpec) -> Result<PlateField> {
    StaticProblem::new(g, p.clone(), quad)?.residual(u)
}

/// Damped Newton iteration with GMRES inner solves preconditioned by the
/// factorized biharmonic operator.
pub fn newton_solve(prob: &StaticProblem, guess: &PlateField, opts: &NewtonOptions) -> Result<EquilibriumResult> {
    let g = prob.grid;
    g.check(guess)?;
    if !guess.is_clamped() {
        return Err(Error::NotClamped("Newton guess"));
    }
    let map = &prob.map;
    let bih = prob.vk.biharmonic().clone();
    let w = g.hx() * g.hy();
    let deflation = |u: &PlateField| opts.deflate_origin.map_or(1.0, |shift| 1.0 / (w * u.dot_raw(u)) + shift);
    let mut u = guess.clone();
    let mut r = prob.residual(&u)?;
    let mut rn = prob.residual_norm(&r)?;
    let mut merit = deflation(&u) * rn;
    let mut it = 0;
    while rn > opts.tol {
        if it == opts.max_iter {
            return Err(Error::Newton(format!(
                "no convergence in {} iterations, residual {rn:e}",
                opts.max_iter
            )));
        }
        it += 1;
        let lin = prob.vk.linearize(&u)?;
        let b: Vec<f64> = map.gather(&r).iter().map(|c| -c).collect();
        let (dx, _) = gmres(
            &mut |x| Ok(map.gather(&prob.jacobian_apply(&lin, &map.scatter(&g, x))?)),
            &mut |x| {
                let mut y = x.to_vec();
                bih.solve_vec(&mut y);
                y
            },
            &b,
            opts.inner_tol,
            60,
            600,
        )?;
        let mut du = map.scatter(&g, &dx);
        if let Some(shift) = opts.deflate_origin {
            let n2 = w * u.dot_raw(&u);
            let m = 1.0 / n2 + shift;
            let dm = -2.0 * w * u.dot_raw(&du) / (n2 * n2);
            du.scale(1.0 / (1.0 - dm / m));
        }
        let mut lam = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let mut trial = u.clone();
            trial.axpy(lam, &du);
            let rt = prob.residual(&trial)?;
            let rtn = prob.residual_norm(&rt)?;
            let mt = deflation(&trial) * rtn;
            if mt < (1.0 - 1e-4 * lam) * merit || rtn <= opts.tol {
                u = trial;
                r = rt;
                rn = rtn;
                merit = mt;
                accepted = true;
                break;
            }
            lam *= 0.5;
        }
        if !accepted {
            return Err(Error::Newton(format!(
                "line search failed after {} halvings at residual {rn:e}",
                opts.max_halvings
            )));
        }
    }
    let smallest_eig = if opts.with_eig { Some(prob.lowest_mode(&u)?.0) } else { None };
    Ok(EquilibriumResult {
        u_bar: u,
        residual_norm: rn,
        iterations: it,
        converged: true,
        smallest_eig,
    })
}

/// Lowest eigenvalue of the clamped buckling problem `Delta_h^2 h = lambda (-Delta_h) h`
/// by inverse iteration, with the eigenvector.
pub fn buckling_eigen(g: &GridSpec, tol: f64, max_iter: usize) -> Result<(f64, PlateField)> {
    let bih = Biharmonic::new(g)?;
    let l: BandedSpd = assemble_neg_laplacian(g);
    let map = InteriorMap::new(g);
    let a = bih.matrix();
    let mut x = map.gather(&PlateField::clamped_from_fn(g, |x, y| {
        let s = (std::f64::consts::PI * x / g.lx()).sin() * (std::f64::consts::PI * y / g.ly()).sin();
        s * s
    }));
    let n = x.len();
    let (mut ax, mut lx) = (vec![0.0; n], vec![0.0; n]);
    let mut lam_old = f64::INFINITY;
    for _ in 0..max_iter {
        l.matvec(&x, &mut lx);
        let mut y = lx.clone();
        bih.solve_vec(&mut y);
        let s = y.iter().map(|c| c * c).sum::<f64>().sqrt();
        x = y.iter().map(|c| c / s).collect();
        a.matvec(&x, &mut ax);
        l.matvec(&x, &mut lx);
        let lam = x.iter().zip(&ax).map(|(p, q)| p * q).sum::<f64>() / x.iter().zip(&lx).map(|(p, q)| p * q).sum::<f64>();
        if (lam - lam_old).abs() <= tol * lam {
            return Ok((lam, map.scatter(g, &x)));
        }
        lam_old = lam;
    }
    Err(Error::Eigen(format!("inverse iteration did not converge in {max_iter} steps")))
}

/// Critical load `beta_0 = lambda_1 / 2` of the pre-stress `F0 = -beta |x - c|^2`,
/// from `f_v'(0) h = 2 beta Delta_h h`.
pub fn buckling_critical_load(g: &GridSpec) -> Result<f64> {
    Ok(0.5 * buckling_eigen(g, 1e-12, 2000)?.0)
}

/// Parameters of the radial pre-stress family at load `beta` (p0 = 0).
pub fn radial_family(g: &GridSpec, u_flow: f64, alpha: f64, k: f64, beta: f64) -> Result<PhysParams> {
    let loads = LoadSet::new(g, PlateField::zeros(g), radial_prestress(g, beta))?;
    PhysParams::new(u_flow, alpha, k, loads)
}

/// Whether Newton finds a solution with `||u||_2 > threshold` at load `beta`,
/// trying the guesses `a * shape` for the given amplitudes.
pub fn nontrivial_exists(
    g: &GridSpec,
    beta: f64,
    quad: QuadratureSpec,
    shape: &PlateField,
    amplitudes: &[f64],
    threshold: f64,
) -> Result<Option<EquilibriumResult>> {
    let prob = StaticProblem::new(g, radial_family(g, 0.0, 0.1, 0.1, beta)?, quad)?;
    let opts = NewtonOptions {
        max_iter: 30,
        max_halvings: 12,
        with_eig: false,
        deflate_origin: Some(1.0),
        ..Default::default()
    };
    for &a in amplitudes {
        if let Ok(res) = newton_solve(&prob, &shape.scaled(a), &opts) {
            if norm_h2(&res.u_bar, g)? > threshold {
                return Ok(Some(res));
            }
        }
    }
    Ok(None)
}

/// Locates the onset of nontrivial equilibria in `beta` by bisection on
/// Newton success, independently of the eigenvalue prediction.
/// `hi` must admit a nontrivial solution and `lo` must not.
pub fn bisect_critical_load(
    g: &GridSpec,
    quad: QuadratureSpec,
    mut lo: f64,
    mut hi: f64,
    rel_tol: f64,
) -> Result<f64> {
    let shape = PlateField::clamped_from_fn(g, |x, y| {
        let s = (std::f64::consts::PI * x / g.lx()).sin() * (std::f64::consts::PI * y / g.ly()).sin();
        s * s
    });
    let amps = [0.1, 1.0];
    let thr = 1e-8;
    if nontrivial_exists(g, lo, quad, &shape, &amps, thr)?.is_some() {
        return Err(Error::InvalidArgument(format!("nontrivial equilibrium already at beta = {lo}")));
    }
    if nontrivial_exists(g, hi, quad, &shape, &amps, thr)?.is_none() {
        return Err(Error::InvalidArgument(format!("no nontrivial equilibrium found at beta = {hi}")));
    }
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if nontrivial_exists(g, mid, quad, &shape, &amps, thr)?.is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Continued parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Family {
    Beta,
    FlowSpeed,
}

/// One converged point on a branch.
#[derive(Clone, Debug)]
pub struct BranchPoint {
    pub param: f64,
    pub u_bar: PlateField,
    pub norm_u2: f64,
    pub residual: f64,
    pub iterations: usize,
    pub smallest_eig: Option<f64>,
}

/// Branches of a sweep: the branch continued from the initial guess and,
/// once its lowest eigenvalue turns negative, the two branches seeded by
/// `+-` the unstable mode.
#[derive(Clone, Debug, Default)]
pub struct Sweep {
    pub base: Vec<BranchPoint>,
    pub plus: Vec<BranchPoint>,
    pub minus: Vec<BranchPoint>,
    /// Parameter at which a branch failed, with the reason.
    pub failures: Vec<(f64, String)>,
}

/// Natural-parameter continuation. `build(param)` returns the parameters at
/// each value; the previous solution is the next warm start.
pub fn continuation_sweep(
    g: &GridSpec,
    quad: QuadratureSpec,
    values: &[f64],
    build: &dyn Fn(f64) -> Result<PhysParams>,
    guess: &PlateField,
) -> Result<Sweep> {
    let bih = Arc::new(Biharmonic::new(g)?);
    let opts = NewtonOptions::default();
    let mut out = Sweep::default();
    let mut base_guess = Some(guess.clone());
    let mut side: [Option<PlateField>; 2] = [None, None];
    let to_point = |param: f64, r: EquilibriumResult| -> Result<BranchPoint> {
        Ok(BranchPoint {
            param,
            norm_u2: norm_h2(&r.u_bar, g)?,
            residual: r.residual_norm,
            iterations: r.iterations,
            smallest_eig: r.smallest_eig,
            u_bar: r.u_bar,
        })
    };
    for &val in values {
        let prob = StaticProblem::with_biharmonic(bih.clone(), build(val)?, quad)?;
        let mut base_now: Option<PlateField> = None;
        if let Some(gs) = base_guess.take() {
            match newton_solve(&prob, &gs, &opts) {
                Ok(r) => {
                    let unstable = r.smallest_eig.is_some_and(|e| e < -1e-8);
                    if unstable && side[0].is_none() && out.plus.is_empty() {
                        let (mu, mode) = prob.lowest_mode(&r.u_bar)?;
                        let amp = seed_amplitude(&prob, &mode, mu)?;
                        let mut p = r.u_bar.clone();
                        p.axpy(amp, &mode);
                        let mut m = r.u_bar.clone();
                        m.axpy(-amp, &mode);
                        side = [Some(p), Some(m)];
                    }
                    base_guess = Some(r.u_bar.clone());
                    base_now = Some(r.u_bar.clone());
                    out.base.push(to_point(val, r)?);
                }
                Err(e) => out.failures.push((val, format!("base branch: {e}"))),
            }
        }
        for (s, branch) in side.iter_mut().zip([&mut out.plus, &mut out.minus]) {
            if let Some(gs) = s.take() {
                match newton_solve(&prob, &gs, &opts) {
                    Ok(r) => {
                        // a side branch that falls back onto the base branch is dropped
                        let apart = match &base_now {
                            Some(b) => norm_h2(&(&r.u_bar - b), g)? > 1e-8 * (1.0 + norm_h2(b, g)?),
                            None => true,
                        };
                        if apart {
                            *s = Some(r.u_bar.clone());
                            branch.push(to_point(val, r)?);
                        }
                    }
                    Err(e) => out.failures.push((val, format!("side branch: {e}"))),
                }
            }
        }
    }
    Ok(out)
}

/// Amplitude `a` of `u + a h` balancing the quadratic and quartic terms of the
/// potential along the unstable mode `h`: `a^2 = -mu <A h, h> / (4 Pi_quartic(h))`.
fn seed_amplitude(prob: &StaticProblem, h: &PlateField, mu: f64) -> Result<f64> {
    let vk0 = VonKarman::with_biharmonic(prob.vk.biharmonic().clone(), LoadSet::zero(&prob.grid));
    let quartic = 0.25 * vk0.h2_energy(&vk0.airy_solve(h)?.v);
    let ah = prob.vk.h2_energy(h);
    if quartic <= 0.0 {
        return Ok(1.0);
    }
    Ok((-mu * ah / (4.0 * quartic)).max(0.0).sqrt().max(1e-3))
}
