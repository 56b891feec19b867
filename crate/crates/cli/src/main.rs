use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use flutterlab_core::config::{load_config, SimConfig, CONFIG_DOC};
use flutterlab_core::memory::QuadratureSpec;
use flutterlab_core::run::{
    run_check, run_ensemble, run_equilibria, run_flow, run_probe, simulate, FlowRequest, ProbeKind, SweepSpec,
};

const THREADS_ENV: &str = "FLUTTERLAB_THREADS";

#[derive(Parser)]
#[command(
    name = "flutterlab",
    version,
    about = "Subsonic panel flutter laboratory: von Karman plate with aerodynamic memory",
    after_help = after_help()
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn after_help() -> String {
    format!("{CONFIG_DOC}\nENVIRONMENT\n  {THREADS_ENV}            worker threads for parallel loops and ensembles\n")
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the plate in time and write energy.csv, snapshots, a checkpoint and manifest.json
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Solve for an equilibrium, or continue branches with --sweep
    Equilibria {
        #[arg(long)]
        config: PathBuf,
        /// Continuation range `name:lo:hi:n` with name `beta` (radial pre-stress) or `U`
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Reconstruct the flow potential on a box from a saved history
    Flow {
        /// History file, or a checkpoint directory holding history.pflb
        #[arg(long)]
        checkpoint: PathBuf,
        /// Box bounds x0,x1,y0,y1,z0,z1 (z0 >= 0)
        #[arg(long = "box", value_delimiter = ',', allow_negative_numbers = true)]
        bounds: Vec<f64>,
        /// Nodes per axis nx,ny,nz
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        /// Reconstruction time; defaults to the newest snapshot
        #[arg(long)]
        t: Option<f64>,
        /// Configuration supplying phys.U and quad
        #[arg(long)]
        config: Option<PathBuf>,
        /// Flow speed, overriding the configuration
        #[arg(long = "flow-speed")]
        flow_speed: Option<f64>,
        /// Output directory
        #[arg(long, default_value = "flow_out")]
        out: PathBuf,
    },
    /// Run a dynamical-systems probe and print its JSON report
    Probe {
        /// lipschitz, quasi or lyapunov
        kind: String,
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the quick invariant suite on small grids; exit code 1 on any failure
    Check,
    /// Run one simulation per parameter value concurrently and write ensemble.csv
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Range `name:lo:hi:n` with name `beta` or `U`
        #[arg(long)]
        param: String,
    },
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().with_context(|| format!("{THREADS_ENV} = {v:?} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn config_at(p: &Path) -> Result<SimConfig> {
    load_config(p).with_context(|| format!("loading configuration {}", p.display()))
}

fn history_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("history.pflb")
    } else {
        p.to_path_buf()
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate { config } => {
            let cfg = config_at(&config)?;
            let out = simulate(&cfg)?;
            println!(
                "{} steps to t = {:.6}: E* = {:.6e}, |u_t| = {:.6e}, diss = {:.6e}",
                out.steps, out.last.t, out.last.e_star, out.last.ut_l2alpha, out.last.diss_accum
            );
            println!("wrote {}", cfg.output_dir().display());
            Ok(true)
        }
        Command::Equilibria { config, sweep } => {
            let cfg = config_at(&config)?;
            let spec: Option<SweepSpec> = sweep.as_deref().map(str::parse).transpose()?;
            let (_, result) = run_equilibria(&cfg, spec.as_ref())?;
            if let Some(s) = result {
                println!(
                    "branch points: base {}, plus {}, minus {}, failures {}",
                    s.base.len(),
                    s.plus.len(),
                    s.minus.len(),
                    s.failures.len()
                );
            }
            println!("wrote {}", cfg.output_dir().display());
            Ok(true)
        }
        Command::Flow {
            checkpoint,
            bounds,
            n,
            t,
            config,
            flow_speed,
            out,
        } => {
            let (u_cfg, quad) = match &config {
                Some(p) => {
                    let c = config_at(p)?;
                    (c.u_flow, c.quad)
                }
                None => (0.0, QuadratureSpec::default()),
            };
            let u_flow = flow_speed.unwrap_or(u_cfg);
            if !(0.0..1.0).contains(&u_flow) {
                bail!("flow speed {u_flow} must satisfy 0 <= U < 1");
            }
            let bounds: [f64; 6] = bounds
                .try_into()
                .map_err(|b: Vec<f64>| anyhow::anyhow!("--box needs 6 values x0,x1,y0,y1,z0,z1, got {}", b.len()))?;
            let n: [usize; 3] = n
                .try_into()
                .map_err(|v: Vec<usize>| anyhow::anyhow!("--n needs 3 values nx,ny,nz, got {}", v.len()))?;
            let req = FlowRequest {
                history: history_path(&checkpoint),
                bounds,
                n,
                t,
                u_flow,
                quad,
                out_dir: out.clone(),
            };
            let (_, rec) = run_flow(&req)?;
            println!("reconstructed {} points at t = {}; wrote {}", rec.len(), rec.t, out.display());
            Ok(true)
        }
        Command::Probe { kind, config } => {
            let kind: ProbeKind = kind.parse()?;
            let cfg = config_at(&config)?;
            let report = run_probe(&cfg, kind)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(report.all_pass())
        }
        Command::Check => {
            let mut ok = true;
            for r in run_check() {
                println!("[{}] {}: {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
                ok &= r.pass;
            }
            Ok(ok)
        }
        Command::Sweep { config, param } => {
            let cfg = config_at(&config)?;
            let spec: SweepSpec = param.parse()?;
            let (_, members) = run_ensemble(&cfg, &spec)?;
            let mut ok = true;
            for m in &members {
                match &m.outcome {
                    Ok(o) => println!("{:>12.6} E* = {:.6e} |u_t| = {:.6e}", m.param, o.last.e_star, o.last.ut_l2alpha),
                    Err(e) => {
                        ok = false;
                        println!("{:>12.6} failed: {e}", m.param);
                    }
                }
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
