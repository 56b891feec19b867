//! Binary snapshots, history and checkpoint files, the energy CSV and the run
//! manifest.
//!
//! A snapshot record is the magic `PFLB`, a `u32` version, `u32` `nx` and
//! `ny`, `f64` `lx`, `ly` and `t`, then `nx * ny` `f64` values with the node
//! index `i * ny + j`. Everything is little-endian. A history file is a header
//! (`u32` count, `f64` spacing, `f64` window) followed by snapshot records.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::EnergyReport;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, PlateField, PlateState};
use crate::integrator::Checkpoint;
use crate::memory::HistoryBuffer;

pub const MAGIC: [u8; 4] = *b"PFLB";
pub const VERSION: u32 = 1;

/// Column order of the energy time series.
pub const CSV_COLUMNS: [&str; 10] = [
    "t",
    "E_pl",
    "E_star",
    "Pi_star",
    "V",
    "ke",
    "ut_l2alpha",
    "diss_accum",
    "power_residual",
    "u_center",
];

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

fn read_exact_or(r: &mut impl Read, buf: &mut [u8], path: &Path, what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => format_err(path, format!("truncated while reading {what}")),
        _ => Error::Io(e),
    })
}

fn read_u32(r: &mut impl Read, path: &Path, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact_or(r, &mut b, path, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read, path: &Path, what: &str) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact_or(r, &mut b, path, what)?;
    Ok(f64::from_le_bytes(b))
}

/// Writes one snapshot record.
pub fn write_snapshot(w: &mut impl Write, g: &GridSpec, t: f64, f: &PlateField) -> Result<()> {
    g.check(f)?;
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(g.nx() as u32).to_le_bytes())?;
    w.write_all(&(g.ny() as u32).to_le_bytes())?;
    w.write_all(&g.lx().to_le_bytes())?;
    w.write_all(&g.ly().to_le_bytes())?;
    w.write_all(&t.to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 * f.values().len());
    for v in f.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads one snapshot record; `path` only labels errors.
pub fn read_snapshot(r: &mut impl Read, path: &Path) -> Result<(GridSpec, f64, PlateField)> {
    let mut magic = [0u8; 4];
    read_exact_or(r, &mut magic, path, "magic")?;
    if magic != MAGIC {
        return Err(format_err(path, format!("bad magic {magic:?}, expected \"PFLB\"")));
    }
    let version = read_u32(r, path, "version")?;
    if version != VERSION {
        return Err(format_err(path, format!("unsupported version {version}, expected {VERSION}")));
    }
    let nx = read_u32(r, path, "nx")? as usize;
    let ny = read_u32(r, path, "ny")? as usize;
    let lx = read_f64(r, path, "lx")?;
    let ly = read_f64(r, path, "ly")?;
    let t = read_f64(r, path, "t")?;
    let g = GridSpec::new(lx, ly, nx, ny).map_err(|e| format_err(path, e.to_string()))?;
    let mut bytes = vec![0u8; 8 * g.len()];
    read_exact_or(r, &mut bytes, path, "values")?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((g, t, PlateField::from_values(&g, values)?))
}

pub fn save_snapshot(path: &Path, g: &GridSpec, t: f64, f: &PlateField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_snapshot(&mut w, g, t, f)?;
    w.flush()?;
    Ok(())
}

pub fn load_snapshot(path: &Path) -> Result<(GridSpec, f64, PlateField)> {
    let mut r = BufReader::new(File::open(path)?);
    let out = read_snapshot(&mut r, path)?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(format_err(path, "trailing bytes after snapshot record"));
    }
    Ok(out)
}

/// Writes the history buffer as a header and one record per snapshot.
pub fn save_history(path: &Path, h: &HistoryBuffer) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(h.len() as u32).to_le_bytes())?;
    w.write_all(&h.dt().to_le_bytes())?;
    w.write_all(&h.t_star().to_le_bytes())?;
    for s in h.snapshots() {
        write_snapshot(&mut w, h.grid(), s.t, &s.u)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_history(path: &Path) -> Result<HistoryBuffer> {
    let mut r = BufReader::new(File::open(path)?);
    let count = read_u32(&mut r, path, "history count")? as usize;
    let dt = read_f64(&mut r, path, "history spacing")?;
    let window = read_f64(&mut r, path, "history window")?;
    if count == 0 {
        return Err(format_err(path, "history holds no snapshots"));
    }
    let mut hist: Option<HistoryBuffer> = None;
    for k in 0..count {
        let (g, t, u) = read_snapshot(&mut r, path)?;
        let h = match &mut hist {
            Some(h) => h,
            None => hist.insert(HistoryBuffer::new(&g, dt, window)?),
        };
        if *h.grid() != g {
            return Err(format_err(path, format!("snapshot {k} is on a different grid")));
        }
        h.push(t, u)?;
    }
    let h = hist.expect("count > 0");
    if h.len() != count {
        return Err(format_err(path, "snapshots older than the history window"));
    }
    Ok(h)
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    t: f64,
    t0: f64,
    steps: u64,
    diss_accum: f64,
    power_accum: f64,
    has_n_prev: bool,
}

const CK_META: &str = "checkpoint.json";
const CK_U: &str = "u.pflb";
const CK_V: &str = "v.pflb";
const CK_N: &str = "n_prev.pflb";
const CK_HIST: &str = "history.pflb";

/// Writes a checkpoint directory: displacement, velocity, the previous
/// explicit force, the history file and the running sums. Returns the files written.
pub fn save_checkpoint(dir: &Path, cp: &Checkpoint) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let g = *cp.history.grid();
    let mut files = Vec::new();
    let p = dir.join(CK_U);
    save_snapshot(&p, &g, cp.state.t, &cp.state.u)?;
    files.push(p);
    let p = dir.join(CK_V);
    save_snapshot(&p, &g, cp.state.t, &cp.state.v)?;
    files.push(p);
    if let Some(n) = &cp.n_prev {
        let p = dir.join(CK_N);
        save_snapshot(&p, &g, cp.state.t, n)?;
        files.push(p);
    }
    let p = dir.join(CK_HIST);
    save_history(&p, &cp.history)?;
    files.push(p);
    let meta = CheckpointMeta {
        t: cp.state.t,
        t0: cp.t0,
        steps: cp.steps,
        diss_accum: cp.diss_accum,
        power_accum: cp.power_accum,
        has_n_prev: cp.n_prev.is_some(),
    };
    let p = dir.join(CK_META);
    fs::write(&p, serde_json::to_string_pretty(&meta)?)?;
    files.push(p);
    Ok(files)
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let meta_path = dir.join(CK_META);
    let meta: CheckpointMeta =
        serde_json::from_str(&fs::read_to_string(&meta_path)?).map_err(|e| format_err(&meta_path, e.to_string()))?;
    let (g, tu, u) = load_snapshot(&dir.join(CK_U))?;
    let (gv, tv, v) = load_snapshot(&dir.join(CK_V))?;
    if g != gv || tu != meta.t || tv != meta.t {
        return Err(format_err(dir, "displacement and velocity records disagree"));
    }
    let n_prev = if meta.has_n_prev {
        Some(load_snapshot(&dir.join(CK_N))?.2)
    } else {
        None
    };
    let history = load_history(&dir.join(CK_HIST))?;
    Ok(Checkpoint {
        state: PlateState::new(meta.t, u, v)?,
        history,
        n_prev,
        diss_accum: meta.diss_accum,
        power_accum: meta.power_accum,
        steps: meta.steps,
        t0: meta.t0,
    })
}

/// Formats a float with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "NaN".into()
    }
}

/// Energy time-series writer.
pub struct CsvWriter<W: Write> {
    out: W,
}

impl CsvWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?))
    }
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{}", CSV_COLUMNS.join(","))?;
        Ok(Self { out })
    }

    pub fn write(&mut self, r: &EnergyReport) -> Result<()> {
        let row = [
            r.t,
            r.e_pl,
            r.e_star,
            r.pi_star,
            r.v.unwrap_or(f64::NAN),
            r.ke,
            r.ut_l2alpha,
            r.diss_accum,
            r.power_residual,
            r.u_center,
        ];
        let cells: Vec<String> = row.iter().map(|&x| fmt17(x)).collect();
        writeln!(self.out, "{}", cells.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Writes rows of floats under a header, 17 significant digits; `None` cells are `NaN`.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<Option<f64>>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|c| fmt17(c.unwrap_or(f64::NAN))).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Record of one run: what was configured and which files were written.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub seed: u64,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<String>,
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

/// SHA-256 of the canonical form of a JSON document: object keys sorted at
/// every level, no whitespace.
pub fn config_hash(value: &serde_json::Value) -> String {
    fn canonical(v: &serde_json::Value) -> serde_json::Value {
        match v {
            serde_json::Value::Object(m) => {
                let sorted: std::collections::BTreeMap<String, serde_json::Value> =
                    m.iter().map(|(k, v)| (k.clone(), canonical(v))).collect();
                serde_json::Value::Object(sorted.into_iter().collect())
            }
            serde_json::Value::Array(a) => serde_json::Value::Array(a.iter().map(canonical).collect()),
            other => other.clone(),
        }
    }
    let text = serde_json::to_string(&canonical(value)).expect("JSON values serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl RunManifest {
    pub fn new(config: &serde_json::Value, seed: u64) -> Self {
        Self {
            config_hash: config_hash(config),
            code_version: env!("CARGO_PKG_VERSION").into(),
            seed,
            started_unix: unix_now(),
            finished_unix: f64::NAN,
            outputs: Vec::new(),
        }
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Stamps the finish time and writes `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> Result<Self> {
        self.finished_unix = unix_now();
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&self)?)?;
        Ok(self)
    }
}
