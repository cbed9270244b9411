mod commands;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use shipmatch_core::catalog::{Config, ExportPolicy};
use std::path::{Path, PathBuf};

/// Weak ship annotation from AIS over satellite imagery, and everything around it.
#[derive(Debug, Parser)]
#[command(name = "shipmatch", version, about)]
pub struct Cli {
    /// Dataset root.
    #[arg(long, global = true, default_value = ".")]
    pub root: PathBuf,
    /// TOML settings; defaults to `<root>/shipmatch.toml` when that file exists.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every randomised step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalise Marine Cadastre CSV or raw NMEA logs into AIS JSON-lines.
    IngestAis {
        /// `.csv` files are read as Marine Cadastre exports, anything else as NMEA.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output file; defaults to `<root>/ais/records.jsonl`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Receive time (ISO-8601) for NMEA lines that carry none.
        #[arg(long)]
        nmea_time: Option<String>,
    },
    /// Box stationary AIS ships on every catalogued image.
    Annotate {
        /// AIS JSON-lines; defaults to `<root>/ais/records.jsonl`.
        #[arg(long)]
        ais: Option<PathBuf>,
    },
    /// Cut images into overlapping patches.
    Tile {
        /// Keep patches without annotations as well.
        #[arg(long)]
        all: bool,
    },
    /// Fit boxes and lengths to the Kaggle Airbus masks and apply the length filter.
    AirbusPrepare {
        /// `train_ship_segmentations` CSV.
        #[arg(long)]
        index: PathBuf,
        /// Output directory; defaults to `<root>/airbus`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write seeded scale/rotate/blur copies of Airbus images.
    Augment {
        /// Directory holding the Airbus images named by `ImageId`.
        #[arg(long)]
        images: PathBuf,
        /// Prepared annotations; defaults to `<root>/airbus/annotations.jsonl`.
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Output directory; defaults to `<root>/airbus/augmented`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Augmented copies per image.
        #[arg(long, default_value_t = 1)]
        copies: u32,
    },
    /// Run the configured detector over every image and merge tile detections.
    Detect {
        /// Name the detections are filed under; defaults to the detector kind.
        #[arg(long)]
        regime: Option<String>,
    },
    /// Score stored detections against AIS positions.
    Evaluate {
        /// Regimes to score; defaults to every directory under `<root>/detections`.
        #[arg(long)]
        regime: Vec<String>,
        /// Report directory; defaults to `<root>/reports`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Start the curation web service.
    ServeReview {
        #[arg(long)]
        port: Option<u16>,
        /// Built review UI assets served under `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Write a curated dataset bundle.
    Export {
        #[arg(long)]
        policy: Option<ExportPolicy>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print dataset and curation counts as JSON.
    Stats,
}

fn load_config(cli: &Cli) -> Result<Config> {
    let default = cli.root.join("shipmatch.toml");
    let path: Option<&Path> = match &cli.config {
        Some(p) => Some(p),
        None if default.exists() => Some(&default),
        None => None,
    };
    match path {
        Some(p) => Config::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(Config::default()),
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    let cfg = load_config(&cli)?;
    commands::run(&cli, &cfg)
}
