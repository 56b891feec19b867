//! Run orchestration behind the command-line subcommands: simulation with
//! CSV, snapshot and checkpoint output; equilibria and branch sweeps; flow
//! reconstruction from a saved history; the probe suite; and the quick
//! invariant check.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::config::{PrehistorySpec, SimConfig};
use crate::diagnostics::EnergyReport;
use crate::equilibria::{continuation_sweep, newton_solve, NewtonOptions, StaticProblem, Sweep};
use crate::error::{Error, Result};
use crate::flow::{reconstruct, FlowHistory, FlowSampleSet};
use crate::grid::{norm_h2, GridSpec, PlateField};
use crate::integrator::{Integrator, PhysParams, Prehistory};
use crate::io::{
    fmt17, load_checkpoint, load_history, save_checkpoint, save_snapshot, write_snapshot, write_table, CsvWriter,
    RunManifest,
};
use crate::memory::{escape_time, HistoryBuffer, QuadratureSpec};
use crate::probes::{
    lipschitz_held_out, lipschitz_probe, lyapunov_held_out, lyapunov_probe, quasistability_held_out,
    quasistability_probe, random_state, run_pair, ProbeReport, RunSpec,
};
use crate::vonkarman::{radial_prestress, LoadSet};

/// Builds the integrator for a configuration: fresh start with the
/// configured prehistory and history window, or resume from a checkpoint.
pub fn build_integrator(cfg: &SimConfig) -> Result<Integrator> {
    let g = cfg.grid;
    let params = cfg.phys()?;
    let mut it = match &cfg.prehistory {
        PrehistorySpec::Checkpoint(dir) => {
            let cp = load_checkpoint(&cfg.resolve(dir))?;
            if *cp.history.grid() != g {
                return Err(Error::config("prehistory.checkpoint", "checkpoint grid differs from grid"));
            }
            Integrator::resume(params, cfg.quad, cfg.dt, cp)?
        }
        pre => {
            let state0 = cfg.initial_state()?;
            let t_star = escape_time(&g, cfg.u_flow)?;
            let window = cfg.history_window.unwrap_or(t_star);
            if window < t_star {
                return Err(Error::config(
                    "time.history_window",
                    format!("{window} is shorter than the escape time {t_star}"),
                ));
            }
            let hist = match pre {
                PrehistorySpec::Zero => {
                    let mut h = HistoryBuffer::constant(&g, cfg.dt, window, state0.t - cfg.dt, &PlateField::zeros(&g))?;
                    h.push(state0.t, state0.u.clone())?;
                    h
                }
                _ => HistoryBuffer::constant(&g, cfg.dt, window, state0.t, &state0.u)?,
            };
            Integrator::new(&g, params, cfg.quad, cfg.dt, state0, Prehistory::Supplied(hist))?
        }
    };
    it.set_instability_factor(cfg.instability_factor);
    Ok(it)
}

/// Summary of a finished simulation.
#[derive(Clone, Debug)]
pub struct SimOutcome {
    pub manifest: RunManifest,
    pub first: EnergyReport,
    pub last: EnergyReport,
    /// Largest `E*` over the written rows.
    pub e_star_max: f64,
    pub steps: u64,
}

/// Runs a simulation for `time.horizon` from the start (or resume) time and
/// writes `energy.csv`, optional snapshots, the final checkpoint and the manifest.
pub fn simulate(cfg: &SimConfig) -> Result<SimOutcome> {
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir)?;
    let mut manifest = RunManifest::new(&cfg.raw, cfg.seed);
    let mut it = build_integrator(cfg)?;
    let g = cfg.grid;
    let csv_path = dir.join("energy.csv");
    let mut csv = CsvWriter::create(&csv_path)?;
    let first = it.report(&cfg.weights)?;
    csv.write(&first)?;
    let snap_dir = dir.join("snapshots");
    let snap = |it: &Integrator, n: usize, manifest: &mut RunManifest| -> Result<()> {
        fs::create_dir_all(&snap_dir)?;
        let p = snap_dir.join(format!("u_{n:08}.pflb"));
        save_snapshot(&p, &g, it.t(), &it.state().u)?;
        manifest.add_output(&p);
        Ok(())
    };
    let every = cfg.output.snapshot_every;
    if every > 0 {
        snap(&it, 0, &mut manifest)?;
    }
    let steps = (cfg.horizon / cfg.dt).round() as usize;
    let mut last = first;
    let mut e_star_max = first.e_star;
    for n in 1..=steps {
        it.step()?;
        if n % cfg.output.cadence == 0 || n == steps {
            last = it.report(&cfg.weights)?;
            e_star_max = e_star_max.max(last.e_star);
            csv.write(&last)?;
        }
        if every > 0 && n % every == 0 {
            snap(&it, n, &mut manifest)?;
        }
    }
    csv.finish()?;
    manifest.add_output(&csv_path);
    for p in save_checkpoint(&dir.join("checkpoint"), &it.checkpoint())? {
        manifest.add_output(&p);
    }
    let manifest = manifest.finish(&dir)?;
    Ok(SimOutcome {
        manifest,
        first,
        last,
        e_star_max,
        steps: it.steps(),
    })
}

/// Continued parameter of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SweepParam {
    /// Radial pre-stress `F0 = -beta |x - c|^2`.
    Beta,
    /// Flow speed `U`.
    FlowSpeed,
}

/// `name:lo:hi:n`, with `name` one of `beta` or `U`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl FromStr for SweepSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("sweep `{s}` must look like beta:0:3:60 or U:0:0.9:10"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(bad());
        }
        let param = match parts[0] {
            "beta" => SweepParam::Beta,
            "U" => SweepParam::FlowSpeed,
            _ => return Err(bad()),
        };
        let lo: f64 = parts[1].parse().map_err(|_| bad())?;
        let hi: f64 = parts[2].parse().map_err(|_| bad())?;
        let n: usize = parts[3].parse().map_err(|_| bad())?;
        if n == 0 || !lo.is_finite() || !hi.is_finite() {
            return Err(bad());
        }
        Ok(Self { param, lo, hi, n })
    }
}

impl SweepSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        (0..self.n)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64)
            .collect()
    }
}

#[derive(Serialize)]
struct EquilibriumSummary {
    norm_u2: f64,
    residual: f64,
    iterations: usize,
    smallest_eig: Option<f64>,
}

#[derive(Serialize)]
struct SweepSummary {
    param: SweepParam,
    values: usize,
    base: usize,
    plus: usize,
    minus: usize,
    failures: Vec<(f64, String)>,
}

pub const BRANCH_COLUMNS: [&str; 5] = ["param", "norm_u2", "residual", "iterations", "smallest_eig"];

fn params_for(cfg: &SimConfig, base: &LoadSet, param: SweepParam, value: f64) -> Result<PhysParams> {
    match param {
        SweepParam::Beta => PhysParams::new(
            cfg.u_flow,
            cfg.alpha,
            cfg.k,
            LoadSet::new(&cfg.grid, base.p0.clone(), radial_prestress(&cfg.grid, value))?,
        ),
        SweepParam::FlowSpeed => PhysParams::new(value, cfg.alpha, cfg.k, base.clone()),
    }
}

/// Solves for one equilibrium, or runs a continuation sweep, and writes the
/// results into the output directory.
pub fn run_equilibria(cfg: &SimConfig, sweep: Option<&SweepSpec>) -> Result<(RunManifest, Option<Sweep>)> {
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir)?;
    let g = cfg.grid;
    let mut manifest = RunManifest::new(&cfg.raw, cfg.seed);
    let guess = cfg.equilibria.guess.build_clamped(&g, &cfg.base)?;
    let Some(sw) = sweep else {
        let prob = StaticProblem::new(&g, cfg.phys()?, cfg.quad)?;
        let opts = NewtonOptions {
            tol: cfg.equilibria.tol,
            max_iter: cfg.equilibria.max_iter,
            ..Default::default()
        };
        let res = newton_solve(&prob, &guess, &opts)?;
        let p = dir.join("equilibrium.pflb");
        save_snapshot(&p, &g, 0.0, &res.u_bar)?;
        manifest.add_output(&p);
        let summary = EquilibriumSummary {
            norm_u2: norm_h2(&res.u_bar, &g)?,
            residual: res.residual_norm,
            iterations: res.iterations,
            smallest_eig: res.smallest_eig,
        };
        let p = dir.join("equilibrium.json");
        fs::write(&p, serde_json::to_string_pretty(&summary)?)?;
        manifest.add_output(&p);
        return Ok((manifest.finish(&dir)?, None));
    };
    let base = cfg.loads()?;
    let values = sw.values();
    let build = |v: f64| params_for(cfg, &base, sw.param, v);
    let result = continuation_sweep(&g, cfg.quad, &values, &build, &guess)?;
    for (name, branch) in [("base", &result.base), ("plus", &result.plus), ("minus", &result.minus)] {
        let rows: Vec<Vec<Option<f64>>> = branch
            .iter()
            .map(|b| vec![Some(b.param), Some(b.norm_u2), Some(b.residual), Some(b.iterations as f64), b.smallest_eig])
            .collect();
        let p = dir.join(format!("branch_{name}.csv"));
        write_table(&p, &BRANCH_COLUMNS, &rows)?;
        manifest.add_output(&p);
    }
    let summary = SweepSummary {
        param: sw.param,
        values: values.len(),
        base: result.base.len(),
        plus: result.plus.len(),
        minus: result.minus.len(),
        failures: result.failures.clone(),
    };
    let p = dir.join("sweep.json");
    fs::write(&p, serde_json::to_string_pretty(&summary)?)?;
    manifest.add_output(&p);
    Ok((manifest.finish(&dir)?, Some(result)))
}

pub const ENSEMBLE_COLUMNS: [&str; 7] =
    ["param", "E_star", "ut_l2alpha", "diss_accum", "power_residual", "u_center", "E_star_max"];

/// One member of a simulation ensemble.
#[derive(Clone, Debug)]
pub struct EnsembleMember {
    pub param: f64,
    pub dir: PathBuf,
    pub outcome: std::result::Result<SimOutcome, String>,
}

/// Runs one simulation per sweep value concurrently, each in its own
/// subdirectory `run_NNN` of the output directory, and writes
/// `ensemble.csv` with the final diagnostics. Failed members get a `NaN` row.
pub fn run_ensemble(cfg: &SimConfig, sweep: &SweepSpec) -> Result<(RunManifest, Vec<EnsembleMember>)> {
    use rayon::prelude::*;
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir)?;
    let mut manifest = RunManifest::new(&cfg.raw, cfg.seed);
    let members: Vec<EnsembleMember> = sweep
        .values()
        .into_par_iter()
        .enumerate()
        .map(|(i, v)| {
            let mut c = cfg.clone();
            match sweep.param {
                SweepParam::Beta => c.f0 = crate::config::FieldSpec::RadialBeta(v),
                SweepParam::FlowSpeed => c.u_flow = v,
            }
            let sub = dir.join(format!("run_{i:03}"));
            c.output.dir = sub.clone();
            let outcome = simulate(&c).map_err(|e| e.to_string());
            EnsembleMember { param: v, dir: sub, outcome }
        })
        .collect();
    let rows: Vec<Vec<Option<f64>>> = members
        .iter()
        .map(|m| match &m.outcome {
            Ok(o) => vec![
                Some(m.param),
                Some(o.last.e_star),
                Some(o.last.ut_l2alpha),
                Some(o.last.diss_accum),
                Some(o.last.power_residual),
                Some(o.last.u_center),
                Some(o.e_star_max),
            ],
            Err(_) => vec![Some(m.param), None, None, None, None, None, None],
        })
        .collect();
    let p = dir.join("ensemble.csv");
    write_table(&p, &ENSEMBLE_COLUMNS, &rows)?;
    manifest.add_output(&p);
    for m in &members {
        if let Ok(o) = &m.outcome {
            for f in &o.manifest.outputs {
                manifest.add_output(Path::new(f));
            }
        }
    }
    Ok((manifest.finish(&dir)?, members))
}

/// Request for a flow reconstruction on a box of sample points.
#[derive(Clone, Debug)]
pub struct FlowRequest {
    pub history: PathBuf,
    pub bounds: [f64; 6],
    pub n: [usize; 3],
    /// Reconstruction time; defaults to the newest snapshot.
    pub t: Option<f64>,
    pub u_flow: f64,
    pub quad: QuadratureSpec,
    pub out_dir: PathBuf,
}

pub const FLOW_COLUMNS: [&str; 8] = ["x1", "x2", "x3", "phi", "phi_t", "phi_x1", "phi_x2", "phi_x3"];

/// Reconstructs the potential on a box from a saved history. Writes
/// `flow.csv` and, when each `x3` level is a valid plate grid, one file per
/// component holding one snapshot record per `x3` level.
pub fn run_flow(req: &FlowRequest) -> Result<(RunManifest, FlowSampleSet)> {
    fs::create_dir_all(&req.out_dir)?;
    let raw = serde_json::json!({
        "history": req.history.display().to_string(),
        "box": req.bounds,
        "n": req.n,
        "t": req.t,
        "U": req.u_flow,
        "quad": [req.quad.n_theta(), req.quad.n_s()],
    });
    let mut manifest = RunManifest::new(&raw, 0);
    let hist = load_history(&req.history)?;
    let newest = hist.newest().map(|s| s.t).ok_or_else(|| Error::InvalidArgument("empty history".into()))?;
    let t = req.t.unwrap_or(newest);
    let fh = FlowHistory::new(&hist, req.u_flow, req.quad)?;
    let rec = reconstruct(&fh, &FlowSampleSet::tensor_box(req.bounds, req.n, t)?)?;
    let rows: Vec<Vec<Option<f64>>> = (0..rec.len())
        .map(|k| {
            let p = rec.points[k];
            let gr = rec.grad_phi[k];
            [p[0], p[1], p[2], rec.phi[k], rec.phi_t[k], gr[0], gr[1], gr[2]].iter().map(|&x| Some(x)).collect()
        })
        .collect();
    let p = req.out_dir.join("flow.csv");
    write_table(&p, &FLOW_COLUMNS, &rows)?;
    manifest.add_output(&p);
    let [nx, ny, nz] = req.n;
    let lx = req.bounds[1] - req.bounds[0];
    let ly = req.bounds[3] - req.bounds[2];
    if let Ok(layer) = GridSpec::new(lx, ly, nx, ny) {
        let comps: [(&str, Box<dyn Fn(usize) -> f64>); 5] = [
            ("phi", Box::new(|k| rec.phi[k])),
            ("phi_t", Box::new(|k| rec.phi_t[k])),
            ("phi_x1", Box::new(|k| rec.grad_phi[k][0])),
            ("phi_x2", Box::new(|k| rec.grad_phi[k][1])),
            ("phi_x3", Box::new(|k| rec.grad_phi[k][2])),
        ];
        for (name, get) in comps {
            let p = req.out_dir.join(format!("{name}.pflb"));
            let mut w = std::io::BufWriter::new(fs::File::create(&p)?);
            for iz in 0..nz {
                let vals: Vec<f64> = (0..nx * ny).map(|ij| get(ij * nz + iz)).collect();
                write_snapshot(&mut w, &layer, t, &PlateField::from_values(&layer, vals)?)?;
            }
            std::io::Write::flush(&mut w)?;
            manifest.add_output(&p);
        }
    }
    Ok((manifest.finish(&req.out_dir)?, rec))
}

/// Which probe to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeKind {
    Lipschitz,
    Quasi,
    Lyapunov,
}

impl FromStr for ProbeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lipschitz" => Ok(Self::Lipschitz),
            "quasi" => Ok(Self::Quasi),
            "lyapunov" => Ok(Self::Lyapunov),
            _ => Err(Error::InvalidArgument(format!("unknown probe `{s}` (lipschitz, quasi, lyapunov)"))),
        }
    }
}

impl ProbeKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Lipschitz => "lipschitz",
            Self::Quasi => "quasi",
            Self::Lyapunov => "lyapunov",
        }
    }
}

/// Runs a probe on the training pair, checks the fitted constants on the
/// held-out pair and writes `probe_<kind>.json`.
pub fn run_probe(cfg: &SimConfig, kind: ProbeKind) -> Result<ProbeReport> {
    let g = cfg.grid;
    let pr = &cfg.probe;
    let t_star = escape_time(&g, cfg.u_flow)?;
    let window = pr.window * t_star;
    let spec = RunSpec {
        grid: g,
        params: cfg.phys()?,
        quad: cfg.quad,
        dt: cfg.dt,
        horizon: pr.horizon.unwrap_or(window + 3.0 * t_star),
        cadence: cfg.output.cadence,
        weights: cfg.weights,
    };
    let data = |seed: u64| random_state(&g, seed, pr.modes, pr.amp_u, pr.amp_v);
    let [s0, s1, s2, s3] = pr.seeds;
    let ((a, b), (c, d)) = {
        let (x, y) = rayon::join(
            || run_pair(&spec, data(s0)?, data(s1)?),
            || run_pair(&spec, data(s2)?, data(s3)?),
        );
        (x?, y?)
    };
    let held = format!("seeds {s2},{s3}");
    let report = match kind {
        ProbeKind::Lipschitz => {
            let mut r = lipschitz_probe(&a, &b)?;
            let m = lipschitz_held_out(&r, &c, &d)?;
            r.add_held_out(&held, m);
            r
        }
        ProbeKind::Quasi => {
            let mut r = quasistability_probe(&a, &b, window, pr.delta)?;
            if r.constant("beta").is_some() {
                let m = quasistability_held_out(&r, &c, &d)?;
                r.add_held_out(&held, m);
            }
            r
        }
        ProbeKind::Lyapunov => {
            let mut r = lyapunov_probe(&a.reports)?;
            for (label, t) in [(format!("seed {s2}"), &c), (format!("seed {s3}"), &d)] {
                let m = lyapunov_held_out(&r, &t.reports)?;
                r.add_held_out(&label, m);
            }
            r
        }
    };
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join(format!("probe_{}.json", kind.name())), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

/// One line of the invariant check.
#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn outcome(name: &str, r: Result<(bool, String)>) -> CheckOutcome {
    match r {
        Ok((pass, detail)) => CheckOutcome {
            name: name.into(),
            pass,
            detail,
        },
        Err(e) => CheckOutcome {
            name: name.into(),
            pass: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Quick invariant suite on small grids.
pub fn run_check() -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    out.push(outcome("zero data stays zero", (|| {
        let g = GridSpec::unit_square(9)?;
        let mut it = Integrator::new(
            &g,
            PhysParams::unloaded(&g, 0.5, 0.1, 0.1)?,
            QuadratureSpec::new(8, 16)?,
            0.05,
            crate::grid::PlateState::zero(&g),
            Prehistory::Constant,
        )?;
        for _ in 0..20 {
            it.step()?;
        }
        let m = it.state().u.max_abs().max(it.state().v.max_abs());
        Ok((m == 0.0, format!("max |u|, |u_t| = {m:e}")))
    })()));
    out.push(outcome("power balance defect is second order", (|| {
        let g = GridSpec::unit_square(9)?;
        let s0 = random_state(&g, 5, 2, 0.5, 0.2)?;
        let run = |dt: f64| -> Result<f64> {
            let mut it = Integrator::new(
                &g,
                PhysParams::new(0.4, 0.1, 0.1, LoadSet::new(&g, PlateField::zeros(&g), radial_prestress(&g, 5.0))?)?,
                QuadratureSpec::new(8, 16)?,
                dt,
                s0.clone(),
                Prehistory::Constant,
            )?;
            for _ in 0..(1.0 / dt).round() as usize {
                it.step()?;
            }
            Ok(it.power_accum())
        };
        let (a, b) = (run(0.02)?, run(0.01)?);
        let ratio = a / b;
        Ok((ratio >= 3.0, format!("defects {a:.3e}, {b:.3e}, ratio {ratio:.2}")))
    })()));
    out.push(outcome("dissipation accumulator is nondecreasing", (|| {
        let g = GridSpec::unit_square(9)?;
        let mut it = Integrator::new(
            &g,
            PhysParams::unloaded(&g, 0.5, 0.1, 0.1)?,
            QuadratureSpec::new(8, 16)?,
            0.02,
            random_state(&g, 6, 2, 0.5, 0.2)?,
            Prehistory::Constant,
        )?;
        let mut prev = it.diss_accum();
        let mut ok = true;
        for _ in 0..200 {
            it.step()?;
            ok &= it.diss_accum() >= prev;
            prev = it.diss_accum();
        }
        Ok((ok, format!("diss_accum(4) = {prev:.6e}")))
    })()));
    out.push(outcome("flow potential vanishes above the causal cone", (|| {
        let g = GridSpec::unit_square(9)?;
        let mut it = Integrator::new(
            &g,
            PhysParams::unloaded(&g, 0.3, 0.1, 0.1)?,
            QuadratureSpec::new(8, 16)?,
            0.05,
            random_state(&g, 7, 2, 0.5, 0.2)?,
            Prehistory::Zero,
        )?;
        for _ in 0..10 {
            it.step()?;
        }
        let t = it.t();
        let fh = FlowHistory::new(it.history(), 0.3, QuadratureSpec::new(8, 16)?)?;
        let pts = vec![[0.5, 0.5, t + 0.01], [0.3, 0.6, t + 1.0]];
        let rec = reconstruct(&fh, &FlowSampleSet::new(pts, t)?)?;
        let zero = rec.phi.iter().all(|&p| p == 0.0);
        Ok((zero, format!("phi above x3 = t: {:?}", rec.phi)))
    })()));
    out.push(outcome("trace relation on a coarse grid", (|| {
        let g = GridSpec::unit_square(17)?;
        let quad = QuadratureSpec::new(16, 32)?;
        let mut it = Integrator::new(
            &g,
            PhysParams::unloaded(&g, 0.5, 0.1, 0.1)?,
            quad,
            0.02,
            random_state(&g, 8, 2, 0.5, 0.5)?,
            Prehistory::Constant,
        )?;
        let steps = ((it.t_star() + 0.5) / 0.02).ceil() as usize;
        for _ in 0..steps {
            it.step()?;
        }
        let tc = crate::flow::trace_material_derivative(it.history(), 0.5, quad)?;
        Ok((tc.rel_residual < 0.1, format!("relative residual {}", fmt17(tc.rel_residual))))
    })()));
    out.push(outcome("pressure-loaded equilibrium", (|| {
        let g = GridSpec::unit_square(9)?;
        let p0 = PlateField::clamped_from_fn(&g, |_, _| 20.0);
        let params = PhysParams::new(0.4, 0.1, 0.1, LoadSet::new(&g, p0, PlateField::zeros(&g))?)?;
        let prob = StaticProblem::new(&g, params, QuadratureSpec::new(8, 16)?)?;
        let r = newton_solve(&prob, &PlateField::zeros(&g), &NewtonOptions::default())?;
        Ok((r.converged && r.residual_norm <= 1e-10, format!("residual {:.3e} in {} iterations", r.residual_norm, r.iterations)))
    })()));
    out.push(outcome("snapshot round trip", (|| {
        let g = GridSpec::unit_square(9)?;
        let s = random_state(&g, 9, 2, 0.5, 0.0)?;
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &g, 1.25, &s.u)?;
        let (g2, t, f) = crate::io::read_snapshot(&mut buf.as_slice(), Path::new("<memory>"))?;
        let exact = g2 == g && t == 1.25 && f.values().iter().zip(s.u.values()).all(|(a, b)| a.to_bits() == b.to_bits());
        Ok((exact, "bit-exact".into()))
    })()));
    out.push(outcome("sonic flow speed is rejected", (|| {
        let e = crate::config::parse_config(r#"{"phys":{"U":1.0}}"#, Path::new("."));
        Ok((e.is_err(), e.err().map(|e| e.to_string()).unwrap_or_default()))
    })()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn sweep_spec_parses() {
        let s: SweepSpec = "beta:0:3:60".parse().unwrap();
        assert_eq!(s.param, SweepParam::Beta);
        assert_eq!(s.values().len(), 60);
        assert_eq!(s.values()[59], 3.0);
        assert!("beta:0:3".parse::<SweepSpec>().is_err());
        assert!("gamma:0:3:4".parse::<SweepSpec>().is_err());
        assert_eq!("U:0:0.5:2".parse::<SweepSpec>().unwrap().param, SweepParam::FlowSpeed);
    }

    #[test]
    fn simulate_is_deterministic_and_resumable() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path();
        let text = |out: &str, horizon: f64, pre: &str| {
            format!(
                r#"{{"grid":{{"nx":9,"ny":9}},"phys":{{"U":0.4,"alpha":0.1,"k":0.1}},
                "initial":{{"u0":{{"random":{{"seed":3,"modes":2,"amp":0.5}}}}}},
                "time":{{"dt":0.05,"horizon":{horizon}}},"quad":{{"n_theta":8,"n_s":16}},
                "prehistory":{pre},"output":{{"dir":"{out}","cadence":4,"snapshot_every":50}}}}"#
            )
        };
        let a = simulate(&parse_config(&text("a", 5.0, "\"constant\""), base).unwrap()).unwrap();
        simulate(&parse_config(&text("b", 5.0, "\"constant\""), base).unwrap()).unwrap();
        assert_eq!(a.steps, 100);
        assert_eq!(fs::read(base.join("a/energy.csv")).unwrap(), fs::read(base.join("b/energy.csv")).unwrap());
        assert!(a.manifest.outputs.iter().any(|p| p.ends_with("u_00000050.pflb")));
        for p in &a.manifest.outputs {
            assert!(Path::new(p).exists(), "{p}");
        }
        simulate(&parse_config(&text("c", 3.0, "\"constant\""), base).unwrap()).unwrap();
        let d = simulate(&parse_config(&text("d", 2.0, r#"{"checkpoint":"c/checkpoint"}"#), base).unwrap()).unwrap();
        let full = crate::io::load_checkpoint(&base.join("a/checkpoint")).unwrap();
        let resumed = crate::io::load_checkpoint(&base.join("d/checkpoint")).unwrap();
        assert_eq!(d.steps, 100);
        assert!(full.state.u.max_abs_diff(&resumed.state.u) <= 1e-12);
        assert!(full.state.v.max_abs_diff(&resumed.state.v) <= 1e-12);
    }

    #[test]
    fn single_equilibrium_and_short_sweep() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config(
            r#"{"grid":{"nx":9,"ny":9},"phys":{"U":0.2},"loads":{"p0":{"constant":5}},
                "quad":{"n_theta":8,"n_s":16},"output":{"dir":"eq"}}"#,
            dir.path(),
        )
        .unwrap();
        let (m, none) = run_equilibria(&cfg, None).unwrap();
        assert!(none.is_none());
        assert!(m.outputs.iter().any(|p| p.ends_with("equilibrium.pflb")));
        let sw: SweepSpec = "beta:0:10:3".parse().unwrap();
        let (_, s) = run_equilibria(&cfg, Some(&sw)).unwrap();
        assert_eq!(s.unwrap().base.len(), 3);
        let csv = fs::read_to_string(dir.path().join("eq/branch_base.csv")).unwrap();
        assert!(csv.starts_with("param,norm_u2,residual,iterations,smallest_eig\n"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn ensemble_runs_each_value() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config(
            r#"{"grid":{"nx":9,"ny":9},"initial":{"u0":{"random":{"seed":1,"modes":2,"amp":0.3}}},
                "time":{"dt":0.05,"horizon":0.5},"quad":{"n_theta":8,"n_s":16},"output":{"dir":"ens","cadence":2}}"#,
            dir.path(),
        )
        .unwrap();
        let (m, members) = run_ensemble(&cfg, &"U:0:0.6:3".parse().unwrap()).unwrap();
        assert_eq!(members.len(), 3);
        assert!(members.iter().all(|m| m.outcome.is_ok()));
        let csv = fs::read_to_string(dir.path().join("ens/ensemble.csv")).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(m.outputs.iter().any(|p| p.contains("run_002")));
    }

    #[test]
    fn check_suite_passes() {
        let res = run_check();
        for r in &res {
            assert!(r.pass, "{}: {}", r.name, r.detail);
        }
    }
}
