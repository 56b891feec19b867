//! JSON run configuration: parsing, defaults and validation. Every error
//! names the offending key path, and unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::diagnostics::LyapunovWeights;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, PlateField, PlateState};
use crate::integrator::PhysParams;
use crate::io::load_snapshot;
use crate::memory::QuadratureSpec;
use crate::probes::random_state;
use crate::vonkarman::{radial_prestress, LoadSet};

/// Reference for every configuration key, printed by the command-line help.
pub const CONFIG_DOC: &str = "\
CONFIGURATION (JSON; unknown keys are rejected, errors name the key path)
  seed                      integer seed recorded in the manifest and used by random data [0]
  grid.lx, grid.ly          plate side lengths [1.0, 1.0]
  grid.nx, grid.ny          nodes per direction, at least 5 [33, 33]
  phys.U                    flow speed, subsonic: 0 <= U < 1 [0.0]
  phys.alpha                rotational inertia, alpha > 0 [0.1]
  phys.k                    damping coefficient, k >= 0 [0.1]
  loads.p0                  transverse pressure, a field spec [\"zero\"]
  loads.F0                  in-plane stress function, a field spec [\"zero\"]
  initial.u0                initial displacement, a field spec (boundary ring set to 0) [\"zero\"]
  initial.u1                initial velocity, a field spec (boundary ring set to 0) [\"zero\"]
  time.dt                   time step, dt > 0 [0.01]
  time.horizon              run length from the start or resume time, > 0 [10.0]
  time.history_window       retained history length, at least the escape time t* [t*]
  quad.n_theta              angular nodes of the memory quadrature, even, >= 8 [32]
  quad.n_s                  radial nodes of the memory quadrature, >= 16 [128]
  prehistory                \"constant\" (u = u0 before t = 0), \"zero\", or
                            {\"checkpoint\": <dir>} to resume a saved run [\"constant\"]
  diagnostics.nu            Lyapunov cross-term weight, > 0 [0.01]
  diagnostics.mu            Lyapunov memory-term weight, > 0 [0.01]
  diagnostics.instability_factor
                            abort when E* exceeds factor * (E*(0) + 1) [1e6]
  output.dir                output directory [\"out\"]
  output.cadence            steps between CSV rows, >= 1 [10]
  output.snapshot_every     steps between displacement snapshots, 0 for none [0]
  equilibria.tol            Newton tolerance on the scaled residual [1e-10]
  equilibria.max_iter       Newton iteration limit [50]
  equilibria.guess          initial guess, a field spec [\"zero\"]
  probe.seeds               four data seeds: training pair, held-out pair [[1, 2, 3, 4]]
  probe.modes               modes per direction in random data [3]
  probe.amp_u, probe.amp_v  H2 norms of random displacement and velocity [0.5, 0.2]
  probe.window              quasi-stability window length in units of t* [4.0]
  probe.delta               interpolation exponent of the lower-order norm [0.5]
  probe.horizon             probe run length; default window + 3 t*

FIELD SPECS
  \"zero\"                                        zero field
  {\"constant\": c}                               constant c
  {\"radial_beta\": b}                            -b |x - centre|^2
  {\"gaussian\": {\"cx\", \"cy\", \"sigma\", \"amp\"}}  amp exp(-|x - c|^2 / (2 sigma^2))
  {\"random\": {\"seed\", \"modes\", \"amp\"}}        smooth clamped random field, H2 norm amp
  {\"snapshot\": <path>} or a bare path string    PFLB snapshot file on the same grid
";

/// A field described in the configuration.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldSpec {
    Zero,
    Constant(f64),
    RadialBeta(f64),
    Gaussian { cx: f64, cy: f64, sigma: f64, amp: f64 },
    Random { seed: u64, modes: usize, amp: f64 },
    Snapshot(PathBuf),
}

impl FieldSpec {
    /// Builds the field; relative snapshot paths resolve against `base`.
    pub fn build(&self, g: &GridSpec, base: &Path) -> Result<PlateField> {
        Ok(match self {
            FieldSpec::Zero => PlateField::zeros(g),
            FieldSpec::Constant(c) => PlateField::constant(g, *c),
            FieldSpec::RadialBeta(b) => radial_prestress(g, *b),
            FieldSpec::Gaussian { cx, cy, sigma, amp } => PlateField::from_fn(g, |x, y| {
                amp * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * sigma * sigma)).exp()
            }),
            FieldSpec::Random { seed, modes, amp } => random_state(g, *seed, *modes, *amp, 0.0)?.u,
            FieldSpec::Snapshot(p) => {
                let path = if p.is_absolute() { p.clone() } else { base.join(p) };
                let (g2, _, f) = load_snapshot(&path)?;
                if g2 != *g {
                    return Err(Error::Format {
                        path,
                        msg: format!("snapshot grid {}x{} differs from the configured grid", g2.nx(), g2.ny()),
                    });
                }
                f
            }
        })
    }

    /// Builds the field with a zero boundary ring.
    pub fn build_clamped(&self, g: &GridSpec, base: &Path) -> Result<PlateField> {
        let mut f = self.build(g, base)?;
        f.zero_boundary();
        Ok(f)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PrehistorySpec {
    Constant,
    Zero,
    Checkpoint(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub cadence: usize,
    pub snapshot_every: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriaSpec {
    pub tol: f64,
    pub max_iter: usize,
    pub guess: FieldSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSpec {
    pub seeds: [u64; 4],
    pub modes: usize,
    pub amp_u: f64,
    pub amp_v: f64,
    pub window: f64,
    pub delta: f64,
    pub horizon: Option<f64>,
}

/// Validated run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub grid: GridSpec,
    pub u_flow: f64,
    pub alpha: f64,
    pub k: f64,
    pub p0: FieldSpec,
    pub f0: FieldSpec,
    pub u0: FieldSpec,
    pub u1: FieldSpec,
    pub dt: f64,
    pub horizon: f64,
    pub history_window: Option<f64>,
    pub quad: QuadratureSpec,
    pub prehistory: PrehistorySpec,
    pub weights: LyapunovWeights,
    pub instability_factor: f64,
    pub output: OutputSpec,
    pub equilibria: EquilibriaSpec,
    pub probe: ProbeSpec,
    /// The document as given, for hashing.
    pub raw: Value,
    /// Directory against which relative paths resolve.
    pub base: PathBuf,
}

/// Object cursor that tracks its key path and which keys were consumed.
struct Obj<'a> {
    path: String,
    map: Option<&'a Map<String, Value>>,
    used: Vec<&'static str>,
}

impl<'a> Obj<'a> {
    fn root(v: &'a Value) -> Result<Self> {
        match v {
            Value::Object(m) => Ok(Self {
                path: String::new(),
                map: Some(m),
                used: Vec::new(),
            }),
            _ => Err(Error::config("<root>", "expected a JSON object")),
        }
    }

    fn key_path(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn get(&mut self, key: &'static str) -> Option<&'a Value> {
        self.used.push(key);
        self.map.and_then(|m| m.get(key)).filter(|v| !v.is_null())
    }

    fn child(&mut self, key: &'static str) -> Result<Obj<'a>> {
        let path = self.key_path(key);
        match self.get(key) {
            None => Ok(Obj {
                path,
                map: None,
                used: Vec::new(),
            }),
            Some(Value::Object(m)) => Ok(Obj {
                path,
                map: Some(m),
                used: Vec::new(),
            }),
            Some(_) => Err(Error::config(path, "expected an object")),
        }
    }

    fn f64_or(&mut self, key: &'static str, default: f64) -> Result<f64> {
        let path = self.key_path(key);
        match self.get(key) {
            None => Ok(default),
            Some(v) => number(v, &path),
        }
    }

    fn opt_f64(&mut self, key: &'static str) -> Result<Option<f64>> {
        let path = self.key_path(key);
        self.get(key).map(|v| number(v, &path)).transpose()
    }

    fn usize_or(&mut self, key: &'static str, default: usize) -> Result<usize> {
        let path = self.key_path(key);
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .map(|x| x as usize)
                .ok_or_else(|| Error::config(path, "expected a nonnegative integer")),
        }
    }

    fn u64_or(&mut self, key: &'static str, default: u64) -> Result<u64> {
        let path = self.key_path(key);
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.as_u64().ok_or_else(|| Error::config(path, "expected a nonnegative integer")),
        }
    }

    fn string_or(&mut self, key: &'static str, default: &str) -> Result<String> {
        let path = self.key_path(key);
        match self.get(key) {
            None => Ok(default.to_string()),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(Error::config(path, "expected a string")),
        }
    }

    fn field_or(&mut self, key: &'static str) -> Result<FieldSpec> {
        let path = self.key_path(key);
        match self.get(key) {
            None => Ok(FieldSpec::Zero),
            Some(v) => field_spec(v, &path),
        }
    }

    /// Rejects keys that were never asked for.
    fn finish(self) -> Result<()> {
        if let Some(m) = self.map {
            for k in m.keys() {
                if !self.used.contains(&k.as_str()) {
                    let path = self.key_path(k);
                    return Err(Error::config(path, "unknown key"));
                }
            }
        }
        Ok(())
    }
}

fn number(v: &Value, path: &str) -> Result<f64> {
    let x = v.as_f64().ok_or_else(|| Error::config(path, "expected a number"))?;
    if !x.is_finite() {
        return Err(Error::config(path, "must be finite"));
    }
    Ok(x)
}

fn field_spec(v: &Value, path: &str) -> Result<FieldSpec> {
    match v {
        Value::String(s) if s == "zero" => Ok(FieldSpec::Zero),
        Value::String(s) if s.is_empty() => Err(Error::config(path, "empty snapshot path")),
        Value::String(s) => Ok(FieldSpec::Snapshot(PathBuf::from(s))),
        Value::Object(m) if m.len() == 1 => {
            let (kind, inner) = m.iter().next().expect("one entry");
            let sub = format!("{path}.{kind}");
            match kind.as_str() {
                "constant" => Ok(FieldSpec::Constant(number(inner, &sub)?)),
                "radial_beta" => Ok(FieldSpec::RadialBeta(number(inner, &sub)?)),
                "snapshot" => match inner {
                    Value::String(s) if !s.is_empty() => Ok(FieldSpec::Snapshot(PathBuf::from(s))),
                    _ => Err(Error::config(sub, "expected a file path")),
                },
                "gaussian" => {
                    let mut o = Obj {
                        path: sub.clone(),
                        map: inner.as_object(),
                        used: Vec::new(),
                    };
                    if o.map.is_none() {
                        return Err(Error::config(sub, "expected an object"));
                    }
                    let spec = FieldSpec::Gaussian {
                        cx: o.f64_or("cx", 0.5)?,
                        cy: o.f64_or("cy", 0.5)?,
                        sigma: o.f64_or("sigma", 0.1)?,
                        amp: o.f64_or("amp", 1.0)?,
                    };
                    if let FieldSpec::Gaussian { sigma, .. } = spec {
                        if sigma <= 0.0 {
                            return Err(Error::config(format!("{sub}.sigma"), "must be positive"));
                        }
                    }
                    o.finish()?;
                    Ok(spec)
                }
                "random" => {
                    let mut o = Obj {
                        path: sub.clone(),
                        map: inner.as_object(),
                        used: Vec::new(),
                    };
                    if o.map.is_none() {
                        return Err(Error::config(sub, "expected an object"));
                    }
                    let spec = FieldSpec::Random {
                        seed: o.u64_or("seed", 0)?,
                        modes: o.usize_or("modes", 3)?,
                        amp: o.f64_or("amp", 0.5)?,
                    };
                    if let FieldSpec::Random { modes: 0, .. } = spec {
                        return Err(Error::config(format!("{sub}.modes"), "must be at least 1"));
                    }
                    o.finish()?;
                    Ok(spec)
                }
                other => Err(Error::config(
                    path,
                    format!("unknown field spec `{other}` (zero, constant, radial_beta, gaussian, random, snapshot)"),
                )),
            }
        }
        _ => Err(Error::config(
            path,
            "expected \"zero\", a snapshot path, or an object with one of constant, radial_beta, gaussian, random, snapshot",
        )),
    }
}

fn positive(path: &str, x: f64) -> Result<f64> {
    if x > 0.0 {
        Ok(x)
    } else {
        Err(Error::config(path, format!("must be positive, got {x}")))
    }
}

/// Parses and validates a configuration document. Relative paths in it
/// resolve against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<SimConfig> {
    let raw: Value = serde_json::from_str(text).map_err(|e| Error::config("<document>", e.to_string()))?;
    let mut root = Obj::root(&raw)?;
    let seed = root.u64_or("seed", 0)?;

    let mut grid = root.child("grid")?;
    let lx = positive("grid.lx", grid.f64_or("lx", 1.0)?)?;
    let ly = positive("grid.ly", grid.f64_or("ly", 1.0)?)?;
    let nx = grid.usize_or("nx", 33)?;
    let ny = grid.usize_or("ny", 33)?;
    grid.finish()?;
    let g = GridSpec::new(lx, ly, nx, ny).map_err(|e| Error::config("grid", e.to_string()))?;

    let mut phys = root.child("phys")?;
    let u_flow = phys.f64_or("U", 0.0)?;
    let alpha = phys.f64_or("alpha", 0.1)?;
    let k = phys.f64_or("k", 0.1)?;
    phys.finish()?;
    if !(0.0..1.0).contains(&u_flow) {
        return Err(Error::config(
            "phys.U",
            format!("U = {u_flow} is outside the subsonic range: the model assumes U in [0, 1)"),
        ));
    }
    if alpha <= 0.0 {
        return Err(Error::config("phys.alpha", format!("alpha = {alpha}: rotational inertia must be positive")));
    }
    if k < 0.0 {
        return Err(Error::config("phys.k", format!("k = {k}: damping must be nonnegative")));
    }

    let mut loads = root.child("loads")?;
    let p0 = loads.field_or("p0")?;
    let f0 = loads.field_or("F0")?;
    loads.finish()?;

    let mut initial = root.child("initial")?;
    let u0 = initial.field_or("u0")?;
    let u1 = initial.field_or("u1")?;
    initial.finish()?;

    let mut time = root.child("time")?;
    let dt = positive("time.dt", time.f64_or("dt", 0.01)?)?;
    let horizon = positive("time.horizon", time.f64_or("horizon", 10.0)?)?;
    let history_window = time.opt_f64("history_window")?;
    time.finish()?;
    if let Some(w) = history_window {
        positive("time.history_window", w)?;
    }

    let mut quad = root.child("quad")?;
    let n_theta = quad.usize_or("n_theta", 32)?;
    let n_s = quad.usize_or("n_s", 128)?;
    quad.finish()?;
    let quad = QuadratureSpec::new(n_theta, n_s).map_err(|e| Error::config("quad", e.to_string()))?;

    let prehistory = match root.get("prehistory") {
        None => PrehistorySpec::Constant,
        Some(Value::String(s)) if s == "constant" => PrehistorySpec::Constant,
        Some(Value::String(s)) if s == "zero" => PrehistorySpec::Zero,
        Some(Value::Object(m)) if m.len() == 1 && m.contains_key("checkpoint") => match &m["checkpoint"] {
            Value::String(s) if !s.is_empty() => PrehistorySpec::Checkpoint(PathBuf::from(s)),
            _ => return Err(Error::config("prehistory.checkpoint", "expected a directory path")),
        },
        Some(_) => {
            return Err(Error::config(
                "prehistory",
                "expected \"constant\", \"zero\" or {\"checkpoint\": <dir>}",
            ))
        }
    };

    let mut diag = root.child("diagnostics")?;
    let nu = diag.f64_or("nu", 0.01)?;
    let mu = diag.f64_or("mu", 0.01)?;
    let instability_factor = positive("diagnostics.instability_factor", diag.f64_or("instability_factor", 1e6)?)?;
    diag.finish()?;
    let weights = LyapunovWeights::new(nu, mu).map_err(|e| Error::config("diagnostics", e.to_string()))?;

    let mut out = root.child("output")?;
    let dir = PathBuf::from(out.string_or("dir", "out")?);
    let cadence = out.usize_or("cadence", 10)?;
    let snapshot_every = out.usize_or("snapshot_every", 0)?;
    out.finish()?;
    if cadence == 0 {
        return Err(Error::config("output.cadence", "must be at least 1"));
    }

    let mut eq = root.child("equilibria")?;
    let equilibria = EquilibriaSpec {
        tol: positive("equilibria.tol", eq.f64_or("tol", 1e-10)?)?,
        max_iter: eq.usize_or("max_iter", 50)?,
        guess: eq.field_or("guess")?,
    };
    eq.finish()?;

    let mut pr = root.child("probe")?;
    let seeds = match pr.get("seeds") {
        None => [1, 2, 3, 4],
        Some(Value::Array(a)) if a.len() == 4 && a.iter().all(|v| v.as_u64().is_some()) => {
            let s: Vec<u64> = a.iter().map(|v| v.as_u64().expect("checked")).collect();
            [s[0], s[1], s[2], s[3]]
        }
        Some(_) => return Err(Error::config("probe.seeds", "expected four nonnegative integers")),
    };
    let probe = ProbeSpec {
        seeds,
        modes: pr.usize_or("modes", 3)?,
        amp_u: pr.f64_or("amp_u", 0.5)?,
        amp_v: pr.f64_or("amp_v", 0.2)?,
        window: positive("probe.window", pr.f64_or("window", 4.0)?)?,
        delta: pr.f64_or("delta", 0.5)?,
        horizon: pr.opt_f64("horizon")?,
    };
    pr.finish()?;
    if probe.modes == 0 {
        return Err(Error::config("probe.modes", "must be at least 1"));
    }
    if !(0.0..=1.0).contains(&probe.delta) {
        return Err(Error::config("probe.delta", "must lie in [0, 1]"));
    }
    root.finish()?;

    Ok(SimConfig {
        seed,
        grid: g,
        u_flow,
        alpha,
        k,
        p0,
        f0,
        u0,
        u1,
        dt,
        horizon,
        history_window,
        quad,
        prehistory,
        weights,
        instability_factor,
        output: OutputSpec {
            dir,
            cadence,
            snapshot_every,
        },
        equilibria,
        probe,
        raw,
        base: base.to_path_buf(),
    })
}

/// Reads and parses a configuration file; relative paths resolve against its directory.
pub fn load_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config(&text, &base)
}

impl SimConfig {
    pub fn loads(&self) -> Result<LoadSet> {
        let g = &self.grid;
        LoadSet::new(g, self.p0.build(g, &self.base)?, self.f0.build(g, &self.base)?)
    }

    pub fn phys(&self) -> Result<PhysParams> {
        PhysParams::new(self.u_flow, self.alpha, self.k, self.loads()?)
    }

    pub fn initial_state(&self) -> Result<PlateState> {
        let g = &self.grid;
        PlateState::new(0.0, self.u0.build_clamped(g, &self.base)?, self.u1.build_clamped(g, &self.base)?)
    }

    /// Output directory, resolved against the configuration's directory.
    pub fn output_dir(&self) -> PathBuf {
        if self.output.dir.is_absolute() {
            self.output.dir.clone()
        } else {
            self.base.join(&self.output.dir)
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }
}
