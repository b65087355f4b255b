//! Run configuration: an optional TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use spkver::eval::{CohortMode, ConditionPair, GRID_SIZE};
use spkver::features::ParamChain;
use spkver::frontend::LPC_ORDER;
use spkver::model::{COHORT_SIZE, LIKELIHOOD_SCALE};

pub const DEFAULT_MIN_TRAIN_SECONDS: f64 = 60.0;
pub const CONFIG_ECHO: &str = "config.toml";

/// A list given either as one delimited string or as a TOML array.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum TextList {
    One(String),
    Many(Vec<String>),
}

impl TextList {
    fn joined(&self) -> String {
        match self {
            TextList::One(s) => s.clone(),
            TextList::Many(v) => v.join(";"),
        }
    }
}

/// Every key is optional; missing keys fall back to defaults.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub chains: Option<TextList>,
    pub order: Option<usize>,
    pub cohorts: Option<usize>,
    pub cohort_mode: Option<String>,
    pub grid: Option<usize>,
    pub likelihood_scale: Option<f64>,
    pub min_train_seconds: Option<f64>,
    pub protocol: Option<TextList>,
    pub base: Option<String>,
    pub force: Option<bool>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(self, other: FileConfig) -> FileConfig {
        FileConfig {
            manifest: other.manifest.or(self.manifest),
            out: other.out.or(self.out),
            seed: other.seed.or(self.seed),
            chains: other.chains.or(self.chains),
            order: other.order.or(self.order),
            cohorts: other.cohorts.or(self.cohorts),
            cohort_mode: other.cohort_mode.or(self.cohort_mode),
            grid: other.grid.or(self.grid),
            likelihood_scale: other.likelihood_scale.or(self.likelihood_scale),
            min_train_seconds: other.min_train_seconds.or(self.min_train_seconds),
            protocol: other.protocol.or(self.protocol),
            base: other.base.or(self.base),
            force: other.force.or(self.force),
        }
    }
}

/// Fully resolved and validated settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub chains: Vec<ParamChain>,
    pub order: usize,
    pub cohorts: usize,
    pub cohort_mode: CohortMode,
    pub grid: usize,
    pub likelihood_scale: f64,
    pub min_train_seconds: f64,
    pub protocol: Vec<ConditionPair>,
    pub base: Option<String>,
    pub force: bool,
}

impl RunConfig {
    pub fn resolve(file: FileConfig) -> Result<Self> {
        let Some(out) = file.out else {
            bail!("no output directory: pass --out or set `out` in the config file");
        };
        let order = file.order.unwrap_or(LPC_ORDER);
        if !(1..=64).contains(&order) {
            bail!("order must be between 1 and 64, got {order}");
        }
        let chains = match &file.chains {
            Some(list) => ParamChain::parse_list(&list.joined())?,
            None => vec![ParamChain::default()],
        };
        if chains.is_empty() {
            bail!("empty chain list");
        }
        for c in &chains {
            if c.drop_first >= order {
                bail!("chain {c} drops {} of {order} coefficients", c.drop_first);
            }
        }
        let cohorts = file.cohorts.unwrap_or(COHORT_SIZE);
        if cohorts == 0 {
            bail!("cohort size must be at least 1");
        }
        let cohort_mode = match &file.cohort_mode {
            Some(s) => s.parse().map_err(anyhow::Error::msg)?,
            None => CohortMode::Both,
        };
        let grid = file.grid.unwrap_or(GRID_SIZE);
        if grid < 2 {
            bail!("threshold grid needs at least 2 points, got {grid}");
        }
        let likelihood_scale = file.likelihood_scale.unwrap_or(LIKELIHOOD_SCALE);
        if !(likelihood_scale.is_finite() && likelihood_scale > 0.0) {
            bail!("likelihood scale must be positive, got {likelihood_scale}");
        }
        let min_train_seconds = file.min_train_seconds.unwrap_or(DEFAULT_MIN_TRAIN_SECONDS);
        if !(min_train_seconds.is_finite() && min_train_seconds >= 0.0) {
            bail!("min_train_seconds must be nonnegative, got {min_train_seconds}");
        }
        let protocol = match &file.protocol {
            Some(list) => ConditionPair::parse_list(&list.joined(), file.base.as_deref())?,
            None => Vec::new(),
        };
        Ok(RunConfig {
            manifest: file.manifest,
            out,
            seed: file.seed.unwrap_or(0),
            chains,
            order,
            cohorts,
            cohort_mode,
            grid,
            likelihood_scale,
            min_train_seconds,
            protocol,
            base: file.base,
            force: file.force.unwrap_or(false),
        })
    }

    /// The resolved settings in config-file form.
    pub fn echo(&self) -> FileConfig {
        FileConfig {
            manifest: self.manifest.clone(),
            out: Some(self.out.clone()),
            seed: Some(self.seed),
            chains: Some(TextList::Many(self.chains.iter().map(|c| c.to_string()).collect())),
            order: Some(self.order),
            cohorts: Some(self.cohorts),
            cohort_mode: Some(self.cohort_mode.to_string()),
            grid: Some(self.grid),
            likelihood_scale: Some(self.likelihood_scale),
            min_train_seconds: Some(self.min_train_seconds),
            protocol: Some(TextList::Many(self.protocol.iter().map(|p| p.to_string()).collect())),
            base: self.base.clone(),
            force: Some(self.force),
        }
    }

    /// The echo written next to a run's outputs. It leaves out `out` so
    /// identical runs into different directories produce identical files.
    pub fn render_echo(&self) -> Result<String> {
        let echo = FileConfig {
            out: None,
            ..self.echo()
        };
        Ok(toml::to_string(&echo)?)
    }
}
