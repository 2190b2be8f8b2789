//! Command-line front end.
//!
//! Every subcommand except `selftest` reads an experiment file (see
//! [`config`]), runs on a worker pool of the requested size and writes one
//! CSV table (or its JSON mirror). Results depend only on the resolved
//! configuration and the master seed, never on the worker count.
//!
//! Flags may also be given through environment variables with the
//! `MIMO_ARQ_` prefix: `MIMO_ARQ_CONFIG`, `MIMO_ARQ_SEED`,
//! `MIMO_ARQ_WORKERS`, `MIMO_ARQ_COMBINER`, `MIMO_ARQ_RATE_NORMALIZATION`,
//! `MIMO_ARQ_OUT` and `MIMO_ARQ_JSON`.

pub mod config;
pub mod output;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use log::info;

use crate::arq::{bler_curve, mfb_reference, throughput_curve};
use crate::combiner::Receiver;
use crate::outage::{simulate_outage, RateNormalization};
use crate::seeding::DEFAULT_MASTER_SEED;
use crate::{selftest, Error, Result};

pub use config::{parse_config, ExperimentConfig};
use output::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Outage probability and power loss for every K up to the configured one.
    Outage,
    /// Per-round BLER of the configured receivers.
    Bler,
    /// Renewal-reward throughput of the configured receivers.
    Throughput,
    /// Per-round BLER of the matched filter bound genie.
    Mfb,
    /// Oracle-equivalence checks; exits nonzero on any failure.
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Outage => "outage",
            Command::Bler => "bler",
            Command::Throughput => "throughput",
            Command::Mfb => "mfb",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mimo-arq", version, about = "Turbo packet combining over MIMO-ISI channels with Chase ARQ")]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,

    /// Experiment file (TOML).
    #[arg(long, global = true, env = "MIMO_ARQ_CONFIG")]
    pub config: Option<PathBuf>,

    /// Master seed of all random streams.
    #[arg(long, global = true, env = "MIMO_ARQ_SEED", default_value_t = DEFAULT_MASTER_SEED)]
    pub seed: u64,

    /// Worker threads.
    #[arg(long, global = true, env = "MIMO_ARQ_WORKERS", default_value_t = 1)]
    pub workers: usize,

    /// Receivers to simulate, overriding the file (comma separated:
    /// signal, symbol, llr, map-oracle).
    #[arg(long, global = true, env = "MIMO_ARQ_COMBINER", value_delimiter = ',')]
    pub combiner: Vec<Receiver>,

    /// Outage acceptance rule: per-round or none.
    #[arg(long, global = true, env = "MIMO_ARQ_RATE_NORMALIZATION")]
    pub rate_normalization: Option<RateNormalization>,

    /// Output file; standard output when absent.
    #[arg(long, global = true, env = "MIMO_ARQ_OUT")]
    pub out: Option<PathBuf>,

    /// Write JSON instead of CSV.
    #[arg(long, global = true, env = "MIMO_ARQ_JSON")]
    pub json: bool,
}

/// Everything needed to reproduce one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub command: Command,
    pub config_path: Option<PathBuf>,
    pub master_seed: u64,
    pub workers: usize,
    pub output_path: Option<PathBuf>,
    pub combiners: Vec<Receiver>,
    pub rate_normalization: Option<RateNormalization>,
    pub json: bool,
}

impl From<Args> for RunSpec {
    fn from(a: Args) -> Self {
        RunSpec {
            command: a.command,
            config_path: a.config,
            master_seed: a.seed,
            workers: a.workers,
            output_path: a.out,
            combiners: a.combiner,
            rate_normalization: a.rate_normalization,
            json: a.json,
        }
    }
}

impl RunSpec {
    /// Experiment file with the command-line overrides applied.
    pub fn resolved_config(&self) -> Result<ExperimentConfig> {
        let path = self
            .config_path
            .as_ref()
            .ok_or_else(|| Error::Config(format!("`{}` needs --config", self.command.name())))?;
        let mut cfg = parse_config(path)?;
        if !self.combiners.is_empty() {
            cfg.receivers = self.combiners.clone();
        }
        if let Some(r) = self.rate_normalization {
            cfg.rate_normalization = r;
        }
        cfg.resolve()
    }
}

fn emit(spec: &RunSpec, bytes: &[u8]) -> Result<()> {
    match &spec.output_path {
        Some(path) => std::fs::write(path, bytes).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        }),
        None => std::io::stdout().write_all(bytes).map_err(|source| Error::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

/// Runs one invocation; returns the process exit status.
pub fn run(spec: &RunSpec) -> Result<i32> {
    if spec.workers == 0 {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_in_pool(spec))
}

fn run_in_pool(spec: &RunSpec) -> Result<i32> {
    if spec.command == Command::Selftest {
        let reports = selftest::run_all(spec.master_seed)?;
        let mut text = String::new();
        for r in &reports {
            text.push_str(&format!("{r}\n"));
        }
        emit(spec, text.as_bytes())?;
        return Ok(if reports.iter().all(|r| r.passed) { 0 } else { 1 });
    }
    let cfg = spec.resolved_config()?;
    info!("running {} with seed {}", spec.command.name(), spec.master_seed);
    let table = match spec.command {
        Command::Outage => Table::outage(&simulate_outage(&cfg.outage_config(spec.master_seed)?)?),
        Command::Bler => Table::bler("bler", &bler_curve(&cfg.arq_config(spec.master_seed)?)?),
        Command::Mfb => Table::bler("mfb", &mfb_reference(&cfg.arq_config(spec.master_seed)?)?),
        Command::Throughput => Table::throughput(&throughput_curve(&cfg.arq_config(spec.master_seed)?)?),
        Command::Selftest => unreachable!(),
    };
    let bytes = if spec.json {
        table.to_json(&cfg, spec.master_seed)?
    } else {
        table.to_csv(&cfg, spec.master_seed)?
    };
    emit(spec, &bytes)?;
    Ok(0)
}
