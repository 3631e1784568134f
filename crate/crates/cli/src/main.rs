//! `glhf run | sweep | probe`.
//!
//! Exit status: 0 on success, 1 for invalid input or I/O failures, 2 when the
//! numerics fail.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use glhf::diagnostics::build_ledger;
use glhf::dump::{read_dump, write_dump};
use glhf::harness::sweep;
use glhf::probes::{evaluate_probe, ProbeReport, ProbeSpec};
use glhf::report::{write_file, write_ledger, write_probes, write_sweep, write_sweep_summary};
use glhf::{GlhfError, Result, RunConfig, Trajectory};

/// Overrides `output_dir` from the config file.
const OUTPUT_ENV: &str = "GLHF_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "glhf", version, about = "Penalized harmonic map heat flow laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one lambda; write the trajectory dump, ledger and probe tables.
    Run { config: PathBuf },
    /// Integrate every lambda of the ladder and write the sweep table.
    Sweep { config: PathBuf },
    /// Recompute probes from a stored trajectory dump.
    Probe {
        dump: PathBuf,
        /// `t0,rho0,R1[,R2,...]`; repeatable.
        #[arg(long = "probe", required = true)]
        probes: Vec<String>,
        #[arg(long)]
        eps0: Option<f64>,
        /// Probe CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config } => cmd_run(&config),
        Command::Sweep { config } => cmd_sweep(&config),
        Command::Probe {
            dump,
            probes,
            eps0,
            out,
        } => cmd_probe(&dump, &probes, eps0, out.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("glhf: error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn output_dir(cfg: &RunConfig) -> PathBuf {
    std::env::var_os(OUTPUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| cfg.output_dir.clone())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| GlhfError::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn evaluate_all(traj: &Trajectory, specs: &[ProbeSpec], eps0: Option<f64>) -> Result<Vec<ProbeReport>> {
    specs
        .iter()
        .enumerate()
        .map(|(id, spec)| evaluate_probe(traj, id, spec, eps0))
        .collect()
}

fn write_artifacts(dir: &Path, traj: &Trajectory, cfg: &RunConfig) -> Result<()> {
    create_dir(dir)?;
    write_dump(traj, &dir.join("trajectory.glhf"))?;
    let ledger = build_ledger(traj)?;
    write_file(&dir.join("ledger.csv"), |b| write_ledger(&ledger, b))?;
    let probes = evaluate_all(traj, &cfg.probes, cfg.eps0)?;
    write_file(&dir.join("probes.csv"), |b| write_probes(&probes, b))
}

fn cmd_run(path: &Path) -> Result<()> {
    let cfg = RunConfig::load(path)?;
    if cfg.lambdas.len() != 1 {
        return Err(GlhfError::InvalidParameter(format!(
            "`run` needs a single lambda, {} given (use `sweep` for ladders)",
            cfg.lambdas.len()
        )));
    }
    let traj = cfg.run_member(cfg.lambdas[0])?;
    write_artifacts(&output_dir(&cfg), &traj, &cfg)
}

fn cmd_sweep(path: &Path) -> Result<()> {
    let cfg = RunConfig::load(path)?;
    let report = sweep(&cfg, &cfg.lambdas)?;
    let dir = output_dir(&cfg);
    for (i, m) in report.members.iter().enumerate() {
        let sub = dir.join(format!("lambda_{i:02}_{:e}", m.lambda));
        write_artifacts(&sub, &m.trajectory, &cfg)?;
    }
    write_file(&dir.join("sweep.csv"), |b| write_sweep(&report, b))?;
    write_file(&dir.join("sweep_summary.txt"), |b| write_sweep_summary(&report, b))
}

fn parse_probe(text: &str) -> Result<ProbeSpec> {
    let nums = text
        .split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|_| {
                GlhfError::InvalidParameter(format!("probe `{text}`: cannot parse `{}`", s.trim()))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if nums.len() < 3 {
        return Err(GlhfError::InvalidParameter(format!(
            "probe `{text}` needs `t0,rho0,R1[,R2,...]`"
        )));
    }
    ProbeSpec::new(nums[0], nums[1], nums[2..].to_vec())
}

fn cmd_probe(dump: &Path, probes: &[String], eps0: Option<f64>, out: Option<&Path>) -> Result<()> {
    let specs = probes.iter().map(|p| parse_probe(p)).collect::<Result<Vec<_>>>()?;
    let traj = read_dump(dump)?;
    let reports = evaluate_all(&traj, &specs, eps0)?;
    match out {
        Some(path) => write_file(path, |b| write_probes(&reports, b)),
        None => write_probes(&reports, std::io::stdout().lock()),
    }
}
