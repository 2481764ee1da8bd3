//! Command-line front end, file formats and parallel execution for
//! `emohlc-core`.

pub mod bundle;
pub mod commands;
pub mod config;
pub mod formats;
pub mod io;
pub mod parallel;

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::Context as _;
use clap::{Parser, Subcommand};
use emohlc_core::metrics::LogBase;
use emohlc_core::model_selection::{ParamGrid, TprStrategy};

use crate::commands::{Context, Part, Status, SynthKind, Task};
use crate::config::RunConfig;
use crate::parallel::PoolRunner;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "emohlc", version, about = "Image emotion prediction from high-level concepts")]
pub struct Cli {
    /// Master seed for splits, folds and synthetic data.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// JSON run configuration; explicit flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and validate a dataset, then print a summary.
    Ingest { manifest: PathBuf },
    /// Recover emotion profiles of a concept family.
    Admixture {
        manifest: PathBuf,
        /// imagenet or places; every concept family when omitted.
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        topk: Option<usize>,
        /// Ground-truth file written by `synth --kind admixture`.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        detect_threshold: Option<f64>,
        #[arg(long)]
        frequency_threshold: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Split, tune and fit an ensemble.
    Train {
        manifest: PathBuf,
        #[arg(long, value_enum)]
        task: Task,
        /// Also write per-job grid-search tables.
        #[arg(long)]
        report: bool,
        /// Comma-separated C values.
        #[arg(long, value_delimiter = ',')]
        c_values: Option<Vec<f64>>,
        /// Comma-separated gamma values.
        #[arg(long, value_delimiter = ',')]
        gamma_values: Option<Vec<f64>>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        split_fraction: Option<f64>,
        /// fold-average or full-train.
        #[arg(long)]
        tpr_strategy: Option<TprStrategy>,
        #[arg(long)]
        detect_threshold: Option<f64>,
        #[arg(long)]
        frequency_threshold: Option<f64>,
    },
    /// Apply a trained bundle to a dataset.
    Predict {
        bundle: PathBuf,
        manifest: PathBuf,
        /// split.json written by `train`.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "all")]
        part: Part,
    },
    /// Score predictions against dataset labels.
    Evaluate {
        predictions: PathBuf,
        manifest: PathBuf,
        /// Print the published reference rows regardless of dataset name.
        #[arg(long)]
        reference: bool,
        /// natural or two.
        #[arg(long)]
        kld_base: Option<String>,
        #[arg(long)]
        kld_smoothing: Option<f64>,
    },
    /// Generate a synthetic dataset with known ground truth.
    Synth {
        #[arg(long, value_enum)]
        kind: SynthKind,
        #[arg(long)]
        n: Option<usize>,
        /// Concept dimension (feature dimension for artphoto).
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        classes: Option<usize>,
    },
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn build_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    match &cli.command {
        Command::Admixture {
            topk,
            detect_threshold,
            frequency_threshold,
            max_iter,
            tol,
            ..
        } => {
            set(&mut cfg.top_k, *topk);
            set(&mut cfg.detect_threshold, *detect_threshold);
            set(&mut cfg.frequency_threshold, *frequency_threshold);
            set(&mut cfg.admixture.max_iter, *max_iter);
            set(&mut cfg.admixture.tol, *tol);
        }
        Command::Train {
            c_values,
            gamma_values,
            epsilon,
            folds,
            split_fraction,
            tpr_strategy,
            detect_threshold,
            frequency_threshold,
            ..
        } => {
            if c_values.is_some() || gamma_values.is_some() {
                let c = c_values.clone().unwrap_or_else(|| cfg.grid.c_values().to_vec());
                let g = gamma_values.clone().unwrap_or_else(|| cfg.grid.gamma_values().to_vec());
                cfg.grid = ParamGrid::new(c, g)?;
            }
            set(&mut cfg.epsilon, *epsilon);
            set(&mut cfg.folds, *folds);
            set(&mut cfg.split_fraction, *split_fraction);
            set(&mut cfg.tpr_strategy, *tpr_strategy);
            set(&mut cfg.detect_threshold, *detect_threshold);
            set(&mut cfg.frequency_threshold, *frequency_threshold);
        }
        Command::Evaluate {
            kld_base,
            kld_smoothing,
            ..
        } => {
            if let Some(b) = kld_base {
                cfg.kld_base = match b.as_str() {
                    "natural" | "e" => LogBase::Natural,
                    "two" | "2" => LogBase::Two,
                    other => anyhow::bail!("unknown --kld-base {other:?} (natural or two)"),
                };
            }
            set(&mut cfg.kld_smoothing, *kld_smoothing);
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> anyhow::Result<Status> {
    if let Command::Ingest { manifest } = &cli.command {
        return commands::ingest(manifest);
    }
    let config = build_config(&cli)?;
    let runner = PoolRunner::new(cli.threads).context("starting worker pool")?;
    let ctx = Context {
        config,
        out: cli.out.clone(),
        runner,
    };
    match cli.command {
        Command::Ingest { .. } => unreachable!(),
        Command::Admixture {
            manifest, family, truth, ..
        } => commands::admixture(
            &ctx,
            &commands::AdmixtureArgs {
                manifest,
                family,
                truth,
            },
        ),
        Command::Train {
            manifest, task, report, ..
        } => commands::train(&ctx, &commands::TrainArgs { manifest, task, report }),
        Command::Predict {
            bundle,
            manifest,
            split,
            part,
        } => commands::predict(
            &ctx,
            &commands::PredictArgs {
                bundle,
                manifest,
                split,
                part,
            },
        ),
        Command::Evaluate {
            predictions,
            manifest,
            reference,
            ..
        } => commands::evaluate(
            &ctx,
            &commands::EvaluateArgs {
                predictions,
                manifest,
                reference,
            },
        ),
        Command::Synth {
            kind,
            n,
            d,
            noise,
            classes,
        } => commands::synth(
            &ctx,
            &commands::SynthArgs {
                kind,
                n,
                d,
                noise,
                classes,
            },
        ),
    }
}

/// Parse `args` (program name first), run the command and return the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(Status::Ok) => EXIT_OK,
        Ok(Status::NotConverged) => {
            eprintln!("warning: a solver stopped at its iteration cap; outputs were written");
            EXIT_NOT_CONVERGED
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_INVALID
        }
    }
}
