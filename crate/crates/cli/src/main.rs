use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rsgd::analysis::{write_bound_report, write_stability_trace};
use rsgd::harness::{
    bounds_report, compare, compare_csv, execute, output_root, persist, stability_report, sweep, RunConfig, RunLog,
    DEFAULT_WINDOWS, LOG_FILE,
};
use rsgd::Error;

/// Residual-wrapped optimizer experiments.
///
/// Output goes under $RSGD_OUTPUT_ROOT (default ./runs).
#[derive(Parser)]
#[command(name = "rsgd", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write its log and checkpoint.
    Run { config: PathBuf },
    /// Run every `*.cfg` file in a directory over several seeds.
    Sweep {
        config_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        replicas: usize,
        /// Number of equal step windows for best-metric columns.
        #[arg(long, default_value_t = DEFAULT_WINDOWS)]
        windows: usize,
    },
    /// Merge run logs into one long-format CSV.
    Compare {
        /// Log files, or run directories containing log.csv.
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Twin-training stability experiment.
    Stability { config: PathBuf },
    /// Convergence bounds against a training run.
    Bounds { config: PathBuf },
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn load(path: &Path) -> Result<RunConfig, Failure> {
    RunConfig::load(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn run_dir(name: &str) -> Result<PathBuf, Failure> {
    let dir = output_root().join(name);
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn cmd_run(config: &Path) -> Result<(), Failure> {
    let cfg = load(config)?;
    let (log, dir) = execute(&cfg, &output_root())?;
    let last = log.last();
    println!(
        "{}: step {} train_loss {} min_grad_norm_sq {}",
        log.run_id, last.step, last.train_loss, log.min_grad_norm_sq
    );
    if let Some(acc) = last.heldout_acc {
        println!("heldout_acc {acc}");
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_sweep(dir: &Path, replicas: usize, windows: usize) -> Result<(), Failure> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "cfg"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::Config(format!("no .cfg files in {}", dir.display())));
    }
    let configs = paths.iter().map(|p| load(p)).collect::<Result<Vec<_>, _>>()?;
    let root = output_root();
    let summary = sweep(&configs, replicas, windows, Some(&root))?;
    let csv = summary.to_csv();
    fs::create_dir_all(&root)?;
    fs::write(root.join("summary.csv"), &csv)?;
    print!("{csv}");
    if summary.has_failures() {
        return Err(Failure::Numerical("some replicas failed".into()));
    }
    Ok(())
}

fn cmd_compare(logs: &[PathBuf], out: Option<&Path>) -> Result<(), Failure> {
    let mut parsed = Vec::with_capacity(logs.len());
    for path in logs {
        let file = if path.is_dir() {
            path.join(LOG_FILE)
        } else {
            path.clone()
        };
        parsed.push(RunLog::read(&file).map_err(|e| Failure::Config(format!("{}: {e}", file.display())))?);
    }
    let csv = compare_csv(&compare(&parsed)?);
    match out {
        Some(path) => fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_stability(config: &Path) -> Result<(), Failure> {
    let cfg = load(config)?;
    let report = stability_report(&cfg)?;
    let dir = run_dir(&cfg.name)?;
    let mut trace = Vec::new();
    write_stability_trace(&mut trace, &report.trace)?;
    fs::write(dir.join("stability.csv"), trace)?;
    let (d, se) = report.trace.final_divergence();
    println!(
        "{}: {} pairs, final divergence {d} ± {se}",
        cfg.name,
        report.trace.pairs.len()
    );
    if let Some(rows) = &report.bounds {
        let mut out = Vec::new();
        write_bound_report(&mut out, rows)?;
        fs::write(dir.join("stability_bounds.csv"), out)?;
        if let Some(last) = rows.last() {
            let kind = if report.convex { "convex" } else { "nonconvex" };
            println!(
                "{kind} bound {} vs measured loss divergence {}",
                last.bound, last.empirical
            );
        }
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_bounds(config: &Path) -> Result<(), Failure> {
    let cfg = load(config)?;
    let report = bounds_report(&cfg)?;
    let dir = persist(&report.log, &output_root())?;
    let mut out = Vec::new();
    write_bound_report(&mut out, &report.convergence)?;
    fs::write(dir.join("bounds_convergence.csv"), out)?;
    if let Some(last) = report.convergence.last() {
        println!("convergence bound {} vs min grad norm^2 {}", last.bound, last.empirical);
    }
    if let Some(rows) = &report.scale_form {
        let mut out = Vec::new();
        write_bound_report(&mut out, rows)?;
        fs::write(dir.join("bounds_scale.csv"), out)?;
        if let Some(last) = rows.last() {
            println!("scale-scheme bound {}", last.bound);
        }
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors exit with 1 like other config errors; 2 is reserved for
    // numerical failures.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Run { config } => cmd_run(config),
        Command::Sweep {
            config_dir,
            replicas,
            windows,
        } => cmd_sweep(config_dir, *replicas, *windows),
        Command::Compare { logs, out } => cmd_compare(logs, out.as_deref()),
        Command::Stability { config } => cmd_stability(config),
        Command::Bounds { config } => cmd_bounds(config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}
