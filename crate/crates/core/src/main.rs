use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use overact::config::{ExperimentConfig, ExperimentKind};
use overact::runner::{run, RunOptions};
use overact::Error;

#[derive(Parser)]
#[command(name = "overact", version, about = "Exploration experiments on overactuated arms and the mountain car")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// End-effector coverage per controller and action multiplier.
    Explore(Common),
    /// Simplified DEP on the mountain car over a sweep of time distances.
    McarDemo(Common),
    /// Action correlation matrices per controller.
    Correlate(Common),
    /// Effective variance of collapsed redundant actuators.
    VarianceSweep(Common),
    /// Spectral slope of colored noise and OU autocorrelation fits.
    PsdCheck(Common),
    /// Coverage of DEP versus white-noise buffer prefill.
    PrefillCompare(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment file; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
    /// Worker threads (overrides the config file).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory (overrides the config file).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-step NDJSON logs where supported.
    #[arg(long)]
    log_steps: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Explore(a) => (ExperimentKind::Explore, a),
        Command::McarDemo(a) => (ExperimentKind::McarDemo, a),
        Command::Correlate(a) => (ExperimentKind::Correlate, a),
        Command::VarianceSweep(a) => (ExperimentKind::VarianceSweep, a),
        Command::PsdCheck(a) => (ExperimentKind::PsdCheck, a),
        Command::PrefillCompare(a) => (ExperimentKind::PrefillCompare, a),
    };
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

fn execute(kind: ExperimentKind, args: Common) -> overact::Result<()> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(kind, vec![0]),
    };
    if cfg.kind != kind {
        return Err(Error::Config(format!(
            "config is for '{}' but the '{}' subcommand was used",
            cfg.kind.as_str(),
            kind.as_str()
        )));
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    let out = args
        .out
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let opts = RunOptions {
        seed_offset: args.seed_offset,
        workers: cfg.workers,
        log_steps: args.log_steps,
    };
    let report = run(&cfg, &opts)?;
    report.write_to(&out)?;
    for name in report.files.keys() {
        println!("{}", out.join(name).display());
    }
    Ok(())
}
