use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use relayfair::baselines::{SchemeId, SchemeSpec};
use relayfair::harness::{self, Emit, ExperimentConfig};

/// Monte Carlo comparison of max-min rate allocation schemes for a
/// wireless-powered multi-pair relay.
#[derive(Debug, Parser)]
#[command(name = "relayfair", version)]
struct Args {
    /// Experiment file; the built-in reference point is used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated scheme names, e.g. `Alg1,EPS,DCC`.
    #[arg(long)]
    schemes: Option<String>,
    /// Worker threads.
    #[arg(long)]
    parallel: Option<usize>,
    /// Which files to write: table, cdf, trace or all.
    #[arg(long, default_value = "table")]
    emit: String,
}

fn load(args: &Args) -> Result<(ExperimentConfig, Emit)> {
    let mut cfg = match &args.config {
        Some(path) => {
            ExperimentConfig::from_file(path).with_context(|| format!("reading {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(p) = args.parallel {
        cfg.parallel = p;
    }
    if let Some(list) = &args.schemes {
        cfg.schemes = list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<SchemeId>().map(SchemeSpec::of))
            .collect::<Result<_, _>>()?;
    }
    cfg.validate()?;
    Ok((cfg, args.emit.parse()?))
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (cfg, emit) = match load(&args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let run = || -> Result<usize> {
        let table = harness::run_experiment(&cfg)?;
        let paths = harness::write_outputs(&table, &args.out, emit)
            .with_context(|| format!("writing outputs to {}", args.out.display()))?;
        for p in paths {
            println!("{}", p.display());
        }
        Ok(table.failures())
    };
    match run() {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("{n} scheme runs failed; see the status column of results.csv");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
