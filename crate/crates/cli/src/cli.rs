use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use spkver::corpus::SynthSpec;
use spkver::eval::{Condition, Role};

use crate::commands;
use crate::config::{FileConfig, RunConfig, TextList};

#[derive(Debug, Parser)]
#[command(name = "spkver", version, about = "Text-independent speaker verification on LPC cepstra")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand; they override the config file.
#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML file with any of the global keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Recording manifest (CSV).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Output directory; must be empty unless --force.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for corpus synthesis.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Parameterization chains, separated by ';' or ',' (e.g. "LPCC;CMS+ACW+SIGMA").
    #[arg(long, global = true)]
    pub chains: Option<String>,
    /// LPC order P.
    #[arg(long, global = true)]
    pub order: Option<usize>,
    /// Cohort size K.
    #[arg(long, global = true)]
    pub cohorts: Option<usize>,
    /// on, off or both.
    #[arg(long, global = true)]
    pub cohort_mode: Option<String>,
    /// Threshold grid size.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Likelihood scale a in exp(-a d).
    #[arg(long, global = true)]
    pub likelihood_scale: Option<f64>,
    /// Minimum training speech per model, in seconds.
    #[arg(long, global = true)]
    pub min_train_seconds: Option<f64>,
    /// Condition pairs, e.g. "M1M1,M1M3" (with --base S4c) or "S4cM1S2cM2".
    #[arg(long, global = true)]
    pub protocol: Option<String>,
    /// Session and language prefix for short protocol pairs, e.g. "S4c".
    #[arg(long, global = true)]
    pub base: Option<String>,
    #[arg(long, global = true)]
    pub force: bool,
}

impl GlobalArgs {
    fn as_file_config(&self) -> FileConfig {
        FileConfig {
            manifest: self.manifest.clone(),
            out: self.out.clone(),
            seed: self.seed,
            chains: self.chains.clone().map(TextList::One),
            order: self.order,
            cohorts: self.cohorts,
            cohort_mode: self.cohort_mode.clone(),
            grid: self.grid,
            likelihood_scale: self.likelihood_scale,
            min_train_seconds: self.min_train_seconds,
            protocol: self.protocol.clone().map(TextList::One),
            base: self.base.clone(),
            force: self.force.then_some(true),
        }
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        RunConfig::resolve(file.overlay(self.as_file_config()))
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic corpus (WAVs plus manifest.csv).
    Synth(SynthArgs),
    /// Write per-utterance feature matrices as CSV.
    Extract {
        /// Restrict to these roles (train, dev, test).
        #[arg(long, value_delimiter = ',')]
        roles: Vec<Role>,
    },
    /// Train covariance models, one file per speaker, condition and chain.
    Train {
        /// Training conditions, e.g. "S1cM1,S2cM1"; default all in the manifest.
        #[arg(long, value_delimiter = ',')]
        conditions: Vec<Condition>,
    },
    /// Fix per-speaker thresholds on the protocol pairs' dev sentences.
    Thresholds {
        /// Directory of trained models; trains in memory if absent.
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Evaluate the protocol: dev EER and test HTER per cell.
    Evaluate {
        #[arg(long)]
        models: Option<PathBuf>,
        /// Threshold files (or directories of them) fixed by `thresholds`;
        /// reports test HTER under those thresholds.
        #[arg(long, value_delimiter = ',')]
        fixed_thresholds: Vec<PathBuf>,
    },
    /// Evaluate all thirteen standard parameterization chains.
    Sweep {
        #[arg(long)]
        models: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    pub speakers: usize,
    #[arg(long, default_value_t = 2)]
    pub sessions: u8,
    #[arg(long, default_value_t = 2)]
    pub microphones: u8,
    #[arg(long, default_value_t = 2)]
    pub languages: u8,
    #[arg(long, default_value_t = 60.0)]
    pub train_seconds: f64,
    #[arg(long, default_value_t = 5)]
    pub dev_sentences: usize,
    #[arg(long, default_value_t = 5)]
    pub test_sentences: usize,
    #[arg(long, default_value_t = 3.0)]
    pub sentence_seconds: f64,
}

impl SynthArgs {
    fn spec(&self) -> SynthSpec {
        SynthSpec {
            n_speakers: self.speakers,
            seed: 0,
            sessions: self.sessions,
            microphones: self.microphones,
            languages: self.languages,
            train_seconds: self.train_seconds,
            dev_sentences: self.dev_sentences,
            test_sentences: self.test_sentences,
            sentence_seconds: self.sentence_seconds,
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = cli.global.resolve()?;
    match &cli.command {
        Command::Synth(args) => commands::synth(&cfg, args.spec()),
        Command::Extract { roles } => commands::extract(&cfg, roles),
        Command::Train { conditions } => commands::train(&cfg, conditions),
        Command::Thresholds { models } => commands::thresholds(&cfg, models.as_deref()),
        Command::Evaluate { models, fixed_thresholds } => {
            commands::evaluate(&cfg, models.as_deref(), fixed_thresholds)
        }
        Command::Sweep { models } => commands::sweep(&cfg, models.as_deref()),
    }
}
