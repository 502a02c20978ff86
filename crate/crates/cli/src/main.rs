mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use laguerre_lab::LabError;

use crate::config::{Lambda0, RunConfig};

#[derive(Parser)]
#[command(name = "laguerre-lab", version, about = "Deformed Laguerre ensemble laboratory")]
struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Limiting density curve and support.
    Density(Common),
    /// Finite-n saddle branch, contours and lemma predicates.
    Saddle(Common),
    /// Local kernel surface against the sine kernel.
    Kernel(Common),
    /// Sine-kernel gap probability, optionally against a saved batch.
    Gap(Stats),
    /// Sine-kernel spacing law, optionally against a saved batch.
    Spacing(Stats),
    /// Sample a batch of spectra and save the unfolded points.
    Simulate(Common),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration (a previous manifest.json also works).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Σ preset as inline JSON, e.g. '{"preset":"identity","params":{"n":100}}'.
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    c: Option<f64>,
    /// A number or "auto".
    #[arg(long)]
    lambda0: Option<Lambda0>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    window: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct Stats {
    #[command(flatten)]
    common: Common,
    /// Directory written by `simulate`.
    #[arg(long)]
    batch: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated criterion ids; all by default.
    #[arg(long, value_delimiter = ',')]
    only: Vec<usize>,
}

/// A result outside its tolerance, as opposed to an error.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct NumericalFailure(pub String);

fn resolve(common: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.manifest = None;
    if let Ok(seed) = std::env::var("LAB_SEED") {
        cfg.seed = seed.trim().parse().map_err(|_| LabError::InvalidInput(format!("LAB_SEED must be an integer, got {seed:?}")))?;
    }
    if let Some(s) = &common.sigma {
        cfg.sigma = laguerre_lab::ensemble::SigmaPreset::from_json(s)?;
    }
    if let Some(m) = common.m {
        cfg.m = Some(m);
    }
    if let Some(c) = common.c {
        cfg.c = Some(c);
        if common.m.is_none() {
            cfg.m = None;
        }
    }
    if let Some(l) = common.lambda0 {
        cfg.lambda0 = l;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.trials {
        cfg.trials = t;
    }
    if let Some(w) = common.window {
        cfg.window = w;
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<NumericalFailure>().is_some() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<LabError>() {
            return if e.is_invalid_input() { 2 } else { 1 };
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() || cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(LabError::InvalidInput("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    let (name, cfg, batch, only) = match &cli.command {
        Command::Density(c) => ("density", resolve(c)?, None, vec![]),
        Command::Saddle(c) => ("saddle", resolve(c)?, None, vec![]),
        Command::Kernel(c) => ("kernel", resolve(c)?, None, vec![]),
        Command::Simulate(c) => ("simulate", resolve(c)?, None, vec![]),
        Command::Gap(s) => ("gap", resolve(&s.common)?, s.batch.clone(), vec![]),
        Command::Spacing(s) => ("spacing", resolve(&s.common)?, s.batch.clone(), vec![]),
        Command::Verify(v) => ("verify", resolve(&v.common)?, None, v.only.clone()),
    };
    commands::dispatch(name, &cfg, batch.as_deref(), &only)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
