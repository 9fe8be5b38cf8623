use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use roundabout::harness::{
    compute_metrics, histogram, read_records, run_baseline, run_policy, train, write_records, ExperimentConfig,
    HistogramMetric, HistogramSpec, TrainMode, OUTPUT_DIR_ENV,
};
use roundabout::perturbation::{NoiseKind, NoiseMode};

#[derive(Parser)]
#[command(name = "roundabout", version, about = "Roundabout traffic simulation, PPO training and evaluation")]
struct Cli {
    /// TOML experiment config; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Where results go. Overrides `output_dir` from the config.
    #[arg(long, global = true, env = OUTPUT_DIR_ENV)]
    output_dir: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    SingleAgent,
    Adversarial,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    TravelTime,
    MeanSpeed,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy with PPO.
    Train {
        #[arg(long, value_enum, default_value = "single-agent")]
        mode: Mode,
        /// none, state, action or action_state.
        #[arg(long)]
        noise_mode: Option<NoiseMode>,
        /// gaussian or adversarial; adversarial training implies adversarial.
        #[arg(long)]
        noise_kind: Option<NoiseKind>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Run all-IDM episodes and write their records.
    Baseline {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value = "baseline.jsonl")]
        out: PathBuf,
    },
    /// Run a saved policy (mean actions) and write its records.
    Evaluate {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        noise_mode: Option<NoiseMode>,
        #[arg(long, default_value = "evaluation.jsonl")]
        out: PathBuf,
    },
    /// Compare two record files.
    Metrics {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        baseline_records: PathBuf,
    },
    /// Relative-frequency histogram of a per-vehicle metric.
    Histogram {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, value_enum, default_value = "travel-time")]
        metric: Metric,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[arg(long)]
        min: Option<f64>,
        #[arg(long)]
        max: Option<f64>,
    },
    /// Print the default configuration as TOML.
    PrintConfig,
}

fn output_path(dir: &Path, file: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(if file.is_absolute() { file.to_path_buf() } else { dir.join(file) })
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out_dir = cli.output_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());

    match cli.command {
        Command::Train {
            mode,
            noise_mode,
            noise_kind,
            iterations,
        } => {
            if let Some(m) = noise_mode {
                cfg.noise.mode = m;
            }
            if let Some(k) = noise_kind {
                cfg.noise.kind = k;
            }
            if let Some(n) = iterations {
                cfg.ppo.iterations = n;
            }
            let mode = match mode {
                Mode::SingleAgent => {
                    if cfg.noise.kind == NoiseKind::Adversarial && cfg.noise.mode != NoiseMode::None {
                        bail!("adversarial noise needs --mode adversarial");
                    }
                    TrainMode::SingleAgent
                }
                Mode::Adversarial => {
                    if cfg.noise.mode == NoiseMode::None {
                        bail!("adversarial training needs --noise-mode state, action or action_state");
                    }
                    cfg.noise.kind = NoiseKind::Adversarial;
                    TrainMode::Adversarial
                }
            };
            cfg.validate()?;
            let (_, art) = train(&cfg, mode, &out_dir, |log| {
                eprintln!(
                    "iter {:>4}  reward {:>9.3}  kl {:.4}  epochs {:>2}  crashes {}",
                    log.iteration, log.mean_episode_reward, log.approx_kl, log.epochs, log.crashes
                );
            })?;
            std::fs::write(out_dir.join("config.toml"), cfg.to_toml_string())?;
            eprintln!("policy written to {}", art.policy.display());
        }
        Command::Baseline { trials, out } => {
            let records = run_baseline(&cfg, trials.unwrap_or(cfg.trials))?;
            let path = output_path(&out_dir, &out)?;
            write_records(&path, &records)?;
            eprintln!("{} episodes written to {}", records.len(), path.display());
        }
        Command::Evaluate {
            weights,
            trials,
            noise_mode,
            out,
        } => {
            if let Some(m) = noise_mode {
                cfg.noise.mode = m;
            }
            cfg.validate()?;
            let records = run_policy(&cfg, &weights, trials.unwrap_or(cfg.trials))?;
            let path = output_path(&out_dir, &out)?;
            write_records(&path, &records)?;
            eprintln!("{} episodes written to {}", records.len(), path.display());
        }
        Command::Metrics {
            records,
            baseline_records,
        } => {
            let recs = read_records(&records).with_context(|| format!("reading {}", records.display()))?;
            let base =
                read_records(&baseline_records).with_context(|| format!("reading {}", baseline_records.display()))?;
            print_json(&compute_metrics(&recs, &base)?)?;
        }
        Command::Histogram {
            records,
            metric,
            bins,
            min,
            max,
        } => {
            let recs = read_records(&records).with_context(|| format!("reading {}", records.display()))?;
            let (metric, lo, hi) = match metric {
                Metric::TravelTime => (HistogramMetric::TravelTime, 0.0, 60.0),
                Metric::MeanSpeed => (HistogramMetric::MeanSpeed, 0.0, cfg.env.v_max),
            };
            let spec = HistogramSpec::uniform(metric, min.unwrap_or(lo), max.unwrap_or(hi), bins)?;
            print_json(&histogram(&recs, &spec)?)?;
        }
        Command::PrintConfig => print!("{}", cfg.to_toml_string()),
    }
    Ok(())
}
