//! `rbx` — runs the conditional-averaging experiments and writes
//! `report.json` and `curves.csv` per run. Exit code 0 iff every asserted
//! check in the run passed.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use rbx_core::experiments::{
    run_damage, run_microsphere, run_poisson, run_rubber, run_steelbar, run_yield, DamageConfig,
    MicrosphereConfig, PoissonConfig, RubberConfig, RunOutput, SteelbarConfig, YieldConfig,
};

#[derive(Parser)]
#[command(
    name = "rbx",
    about = "Conditional-averaging (Rao-Blackwell) material-modeling experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    experiment: Experiment,
}

#[derive(Subcommand)]
enum Experiment {
    /// Yield-surface classification with an effective-stress output filter
    Yield(CommonArgs),
    /// Orbit average of a stretch tensor vs. a third of the first invariant
    Microsphere(CommonArgs),
    /// Dimensional vs. dimensionless force prediction for drilled bars
    Steelbar(CommonArgs),
    /// Damage-energy split: output filter vs. data augmentation vs.
    /// statistic-valued inputs
    Damage(CommonArgs),
    /// Homogenize/rotate/extend pipeline vs. additional band truncation
    Rubber(CommonArgs),
    /// Truncation bias of a lateral-ratio regression
    Poisson(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON file overriding the default configuration (missing fields keep
    /// their defaults)
    #[arg(long)]
    config: Option<PathBuf>,

    /// Replace the configured seed list with this single seed
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory; the run writes <out>/<experiment>/report.json and
    /// curves.csv
    #[arg(long, default_value = "rbx-out")]
    out: PathBuf,

    /// Override the statistic interval count (yield and damage filters)
    #[arg(long)]
    bins: Option<usize>,

    /// Evaluate the damage test lattice at full resolution (step 0.001)
    #[arg(long)]
    full_resolution: bool,
}

fn load_config<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

fn write_outputs(out_dir: &Path, name: &str, output: &RunOutput) -> Result<PathBuf> {
    let dir = out_dir.join(name);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let report_path = dir.join("report.json");
    fs::write(&report_path, serde_json::to_string_pretty(&output.report)?)?;
    let mut curves = Vec::new();
    output.curves.write_csv(&mut curves)?;
    fs::write(dir.join("curves.csv"), curves)?;
    Ok(report_path)
}

fn finish(name: &str, args: &CommonArgs, output: RunOutput) -> Result<i32> {
    let report_path = write_outputs(&args.out, name, &output)?;
    for check in &output.report.checks {
        let tag = if check.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {}: {}", check.name, check.detail);
    }
    for (key, value) in &output.report.aggregate {
        println!("       {key} = {value}");
    }
    println!(
        "{name}: {} in {:.2} s -> {}",
        if output.report.passed { "PASS" } else { "FAIL" },
        output.report.wall_time_s,
        report_path.display()
    );
    Ok(if output.report.passed { 0 } else { 1 })
}

fn run(cli: Cli) -> Result<i32> {
    match cli.experiment {
        Experiment::Yield(args) => {
            let mut cfg: YieldConfig = load_config(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seeds = vec![seed];
            }
            if let Some(bins) = args.bins {
                cfg.bins = bins;
            }
            finish("yield", &args, run_yield(&cfg)?)
        }
        Experiment::Microsphere(args) => {
            let mut cfg: MicrosphereConfig = load_config(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            finish("microsphere", &args, run_microsphere(&cfg)?)
        }
        Experiment::Steelbar(args) => {
            let mut cfg: SteelbarConfig = load_config(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seeds = vec![seed];
            }
            finish("steelbar", &args, run_steelbar(&cfg)?)
        }
        Experiment::Damage(args) => {
            let mut cfg: DamageConfig = load_config(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seeds = vec![seed];
            }
            if let Some(bins) = args.bins {
                cfg.filter_bins = (bins, bins);
            }
            cfg.full_resolution |= args.full_resolution;
            finish("damage", &args, run_damage(&cfg)?)
        }
        Experiment::Rubber(args) => {
            let mut cfg: RubberConfig = load_config(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seeds = vec![seed];
            }
            finish("rubber", &args, run_rubber(&cfg)?)
        }
        Experiment::Poisson(args) => {
            let mut cfg: PoissonConfig = load_config(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seeds = vec![seed];
            }
            finish("poisson", &args, run_poisson(&cfg)?)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(2);
        }
    }
}
