//! Experiment cells: one (train condition, test condition, chain) triple,
//! evaluated with and without cohort normalization.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use super::{
    evaluate_fixed_thresholds, score_trials, set_thresholds, summarize_eer, ConditionPair, DetCurve,
    EvalResult, Role, SpeakerThreshold, TestUtterance, ThresholdFile, TrialSet, GRID_SIZE,
};
use crate::error::{Error, Result};
use crate::eval::Condition;
use crate::features::{apply_chain, FeatureMatrix, FrameAnalysis, ParamChain};
use crate::model::{
    estimate_covariance, read_model, select_cohorts, train_covariance, CohortSet, SpeakerModel,
    COHORT_SIZE, LIKELIHOOD_SCALE,
};

#[derive(Debug, Clone)]
pub struct UtteranceAnalysis {
    pub frames: Vec<FrameAnalysis>,
    pub duration_seconds: f64,
}

/// Access to analyzed utterances, indexed by speaker, condition and role.
pub trait FrameSource: Sync {
    fn speakers(&self) -> Vec<String>;
    /// Utterance ids in presentation order (dev sentences by dev index).
    fn utterances(&self, speaker: &str, condition: &Condition, role: Role) -> Vec<String>;
    fn analysis(&self, utterance: &str) -> Result<Arc<UtteranceAnalysis>>;
}

pub trait ModelProvider: Sync {
    /// `Ok(None)` when the speaker has no model for the condition.
    fn model(&self, speaker: &str, condition: &Condition, chain: &ParamChain) -> Result<Option<SpeakerModel>>;
}

/// Trains models on demand from a source's train utterances.
pub struct TrainingModels<'a, S> {
    pub source: &'a S,
    pub min_train_seconds: f64,
}

impl<S: FrameSource> TrainingModels<'_, S> {
    pub fn train_features(&self, speaker: &str, condition: &Condition, chain: &ParamChain) -> Result<Option<FeatureMatrix>> {
        let ids = self.source.utterances(speaker, condition, Role::Train);
        if ids.is_empty() {
            return Ok(None);
        }
        let mut seconds = 0.0;
        let mut parts = Vec::with_capacity(ids.len());
        for id in &ids {
            let a = self.source.analysis(id)?;
            seconds += a.duration_seconds;
            parts.push(apply_chain(&a.frames, chain)?);
        }
        if seconds + 1e-9 < self.min_train_seconds {
            return Err(Error::InvalidArgument(format!(
                "speaker {speaker} has {seconds:.1} s of training speech under {condition}, need {}",
                self.min_train_seconds
            )));
        }
        FeatureMatrix::vstack(&parts).map(Some)
    }
}

impl<S: FrameSource> ModelProvider for TrainingModels<'_, S> {
    fn model(&self, speaker: &str, condition: &Condition, chain: &ParamChain) -> Result<Option<SpeakerModel>> {
        match self.train_features(speaker, condition, chain)? {
            Some(f) => train_covariance(&f, speaker).map(Some),
            None => Ok(None),
        }
    }
}

pub const MODEL_EXTENSION: &str = "spkm";

/// Models previously written to a directory, one file per (speaker,
/// condition, chain).
#[derive(Debug, Clone)]
pub struct ModelDirectory {
    pub dir: PathBuf,
}

impl ModelDirectory {
    pub fn file_name(speaker: &str, condition: &Condition, chain: &ParamChain) -> String {
        format!("{speaker}__{condition}__{}.{MODEL_EXTENSION}", chain.file_stem())
    }

    pub fn path(&self, speaker: &str, condition: &Condition, chain: &ParamChain) -> PathBuf {
        self.dir.join(Self::file_name(speaker, condition, chain))
    }
}

impl ModelProvider for ModelDirectory {
    fn model(&self, speaker: &str, condition: &Condition, chain: &ParamChain) -> Result<Option<SpeakerModel>> {
        let path = self.path(speaker, condition, chain);
        if !path.exists() {
            return Err(Error::MissingModel(format!(
                "speaker {speaker} under {condition} with {chain}: {} not found",
                path.display()
            )));
        }
        let model = read_model(&path)?;
        if model.speaker_id != speaker {
            return Err(Error::ModelFile(format!(
                "{} holds speaker {}, expected {speaker}",
                path.display(),
                model.speaker_id
            )));
        }
        Ok(Some(model))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CohortMode {
    On,
    Off,
    Both,
}

impl CohortMode {
    pub fn settings(self) -> &'static [bool] {
        match self {
            CohortMode::On => &[true],
            CohortMode::Off => &[false],
            CohortMode::Both => &[true, false],
        }
    }
}

impl std::str::FromStr for CohortMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "on" => Ok(CohortMode::On),
            "off" => Ok(CohortMode::Off),
            "both" => Ok(CohortMode::Both),
            _ => Err(format!("cohort mode must be on, off or both, got {s:?}")),
        }
    }
}

impl fmt::Display for CohortMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CohortMode::On => "on",
            CohortMode::Off => "off",
            CohortMode::Both => "both",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    pub chains: Vec<ParamChain>,
    pub cohort_mode: CohortMode,
    pub cohort_size: usize,
    pub likelihood_scale: f64,
    pub grid_size: usize,
    pub min_dev_sentences: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            chains: vec![ParamChain::default()],
            cohort_mode: CohortMode::Both,
            cohort_size: COHORT_SIZE,
            likelihood_scale: LIKELIHOOD_SCALE,
            grid_size: GRID_SIZE,
            min_dev_sentences: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    DevEer,
    TestHter,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::DevEer => "dev_eer",
            Phase::TestHter => "test_hter",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub pair: ConditionPair,
    pub chain: String,
    pub cohort_mode: bool,
    pub phase: Phase,
    pub far: f64,
    pub frr: f64,
    /// EER for the dev phase, half total error rate for the test phase.
    pub value: f64,
    pub threshold_count: usize,
    pub n_target: usize,
    pub n_impostor: usize,
}

impl ResultRow {
    fn from_result(pair: ConditionPair, phase: Phase, r: &EvalResult) -> Self {
        Self {
            pair,
            chain: r.chain_id.clone(),
            cohort_mode: r.cohort_mode,
            phase,
            far: r.far,
            frr: r.frr,
            value: match phase {
                Phase::DevEer => r.eer.unwrap_or(r.hter),
                Phase::TestHter => r.hter,
            },
            threshold_count: r.thresholds.len(),
            n_target: r.target_trials,
            n_impostor: r.impostor_trials,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetTable {
    pub pair: ConditionPair,
    pub chain: String,
    pub cohort_mode: bool,
    /// Per-speaker sweep and the selected grid index.
    pub curves: BTreeMap<String, (DetCurve, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub pair: ConditionPair,
    pub chain: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ProtocolOutput {
    pub rows: Vec<ResultRow>,
    pub det: Vec<DetTable>,
    pub skipped: Vec<Skipped>,
}

/// Everything needed to score one cell: models and test-side covariances.
#[derive(Debug, Clone)]
pub struct CellData {
    pub pair: ConditionPair,
    pub chain_id: String,
    pub models: BTreeMap<String, SpeakerModel>,
    pub utterances: BTreeMap<String, TestUtterance>,
    /// Dev sentence ids per speaker, first one used for cohort selection.
    pub dev: BTreeMap<String, Vec<String>>,
    pub test: BTreeMap<String, Vec<String>>,
}

impl CellData {
    /// Exhaustive trials over the given sentences (`dev` or `test`).
    pub fn trial_set(&self, by_speaker: &BTreeMap<String, Vec<String>>) -> TrialSet {
        let claimed: Vec<String> = self.models.keys().cloned().collect();
        let utts: Vec<(String, String)> = by_speaker
            .iter()
            .flat_map(|(spk, ids)| ids.iter().map(move |id| (id.clone(), spk.clone())))
            .collect();
        TrialSet::exhaustive(self.pair, &claimed, &utts)
    }

    fn cohorts(&self, cfg: &ProtocolConfig) -> Result<BTreeMap<String, CohortSet>> {
        let selection = self
            .dev
            .iter()
            .map(|(spk, ids)| {
                let first = &ids[0];
                Ok((spk.clone(), self.utterances[first].covariance.clone()))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        select_cohorts(&self.models, &selection, cfg.cohort_size, cfg.likelihood_scale)
    }
}

fn test_utterance<S: FrameSource>(source: &S, id: &str, speaker: &str, chain: &ParamChain) -> Result<TestUtterance> {
    let a = source.analysis(id)?;
    let f = apply_chain(&a.frames, chain)?;
    let est = estimate_covariance(&f, &format!("test covariance of {id}"))?;
    Ok(TestUtterance {
        speaker_id: speaker.to_string(),
        chain_id: f.chain_id().to_string(),
        covariance: est.spd,
    })
}

/// Trains or loads the models for `pair.train` and computes test-side
/// statistics for the dev and test sentences of `pair.test`.
pub fn collect_cell<S: FrameSource, M: ModelProvider>(
    source: &S,
    models: &M,
    pair: ConditionPair,
    chain: &ParamChain,
    cfg: &ProtocolConfig,
) -> Result<CellData> {
    let speakers = source.speakers();
    let trained: Vec<(String, Option<SpeakerModel>)> = speakers
        .par_iter()
        .map(|s| Ok((s.clone(), models.model(s, &pair.train, chain)?)))
        .collect::<Result<_>>()?;
    let models: BTreeMap<String, SpeakerModel> = trained
        .into_iter()
        .filter_map(|(s, m)| m.map(|m| (s, m)))
        .collect();
    if models.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "{} speaker(s) have training data under {}, need at least 2",
            models.len(),
            pair.train
        )));
    }
    let chain_id = chain.to_string();
    if let Some(m) = models.values().find(|m| m.chain_id != chain_id) {
        return Err(Error::ChainMismatch {
            model: m.chain_id.clone(),
            features: chain_id,
        });
    }

    let mut dev = BTreeMap::new();
    let mut test = BTreeMap::new();
    for spk in models.keys() {
        let d = source.utterances(spk, &pair.test, Role::Dev);
        if d.len() < cfg.min_dev_sentences.max(1) {
            return Err(Error::InvalidArgument(format!(
                "speaker {spk} has {} dev sentence(s) under {}, need {}",
                d.len(),
                pair.test,
                cfg.min_dev_sentences.max(1)
            )));
        }
        dev.insert(spk.clone(), d);
        test.insert(spk.clone(), source.utterances(spk, &pair.test, Role::Test));
    }

    let jobs: Vec<(&String, &String)> = dev
        .iter()
        .chain(&test)
        .flat_map(|(spk, ids)| ids.iter().map(move |id| (id, spk)))
        .collect();
    let utterances = jobs
        .par_iter()
        .map(|&(id, spk)| Ok((id.clone(), test_utterance(source, id, spk, chain)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;

    Ok(CellData {
        pair,
        chain_id,
        models,
        utterances,
        dev,
        test,
    })
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub dev: EvalResult,
    pub test: Option<EvalResult>,
    pub det: DetTable,
    pub cohorts: Option<BTreeMap<String, CohortSet>>,
}

/// Sets per-speaker thresholds on the dev sentences, then applies them to the
/// held-out test sentences.
pub fn evaluate_cell(cell: &CellData, cohort_mode: bool, cfg: &ProtocolConfig) -> Result<CellOutcome> {
    let cohorts = if cohort_mode { Some(cell.cohorts(cfg)?) } else { None };
    let dev_trials = cell.trial_set(&cell.dev);
    let dev_scores = score_trials(
        &dev_trials,
        &cell.models,
        &cell.utterances,
        cohorts.as_ref(),
        cfg.likelihood_scale,
    )?;
    let points = set_thresholds(&dev_scores, cohort_mode, cfg.grid_size)?;
    let dev = summarize_eer(&points, &dev_scores, &cell.chain_id, cohort_mode);

    let test = if cell.test.values().any(|v| !v.is_empty()) {
        let trials = cell.trial_set(&cell.test);
        let scores = score_trials(&trials, &cell.models, &cell.utterances, cohorts.as_ref(), cfg.likelihood_scale)?;
        Some(evaluate_fixed_thresholds(&scores, &dev.thresholds, &cell.chain_id, cohort_mode)?)
    } else {
        None
    };
    let det = DetTable {
        pair: cell.pair,
        chain: cell.chain_id.clone(),
        cohort_mode,
        curves: points
            .into_iter()
            .map(|(k, p)| (k, (p.curve, p.point.index)))
            .collect(),
    };
    Ok(CellOutcome { dev, test, det, cohorts })
}

/// Per-speaker thresholds (and cohorts) fixed under the cell's conditions.
pub fn compute_thresholds(cell: &CellData, cohort_mode: bool, cfg: &ProtocolConfig) -> Result<ThresholdFile> {
    let outcome = evaluate_cell(cell, cohort_mode, cfg)?;
    let entries = outcome
        .dev
        .thresholds
        .iter()
        .map(|(spk, &t)| {
            let cohort = outcome
                .cohorts
                .as_ref()
                .map(|c| c[spk].cohort_ids.clone())
                .unwrap_or_default();
            (
                spk.clone(),
                SpeakerThreshold {
                    threshold: t,
                    cohort,
                },
            )
        })
        .collect();
    Ok(ThresholdFile {
        fix_pair: cell.pair,
        chain: cell.chain_id.clone(),
        cohort_mode,
        likelihood_scale: cfg.likelihood_scale,
        entries,
    })
}

/// Applies thresholds fixed elsewhere to this cell's test sentences.
pub fn evaluate_fixed_cell(cell: &CellData, fixed: &ThresholdFile) -> Result<ResultRow> {
    if fixed.chain != cell.chain_id {
        return Err(Error::ChainMismatch {
            model: fixed.chain.clone(),
            features: cell.chain_id.clone(),
        });
    }
    if fixed.fix_pair.train != cell.pair.train {
        return Err(Error::InvalidArgument(format!(
            "thresholds were fixed for models trained on {}, cell trains on {}",
            fixed.fix_pair.train, cell.pair.train
        )));
    }
    let cohorts = fixed.cohort_mode.then(|| {
        fixed
            .entries
            .iter()
            .map(|(spk, e)| {
                (
                    spk.clone(),
                    CohortSet {
                        speaker_id: spk.clone(),
                        cohort_ids: e.cohort.clone(),
                    },
                )
            })
            .collect::<BTreeMap<_, _>>()
    });
    let trials = cell.trial_set(&cell.test);
    let scores = score_trials(&trials, &cell.models, &cell.utterances, cohorts.as_ref(), fixed.likelihood_scale)?;
    let thresholds = fixed.thresholds();
    let r = evaluate_fixed_thresholds(&scores, &thresholds, &cell.chain_id, fixed.cohort_mode)?;
    Ok(ResultRow::from_result(cell.pair, Phase::TestHter, &r))
}

/// Runs every (pair, chain) cell under the configured cohort settings. Cells
/// lacking data are recorded in `skipped` instead of failing the run.
pub fn run_protocol<S: FrameSource, M: ModelProvider>(
    source: &S,
    models: &M,
    pairs: &[ConditionPair],
    cfg: &ProtocolConfig,
) -> ProtocolOutput {
    let mut out = ProtocolOutput::default();
    for pair in pairs {
        for chain in &cfg.chains {
            let outcome = collect_cell(source, models, *pair, chain, cfg).and_then(|cell| {
                cfg.cohort_mode
                    .settings()
                    .iter()
                    .map(|&c| evaluate_cell(&cell, c, cfg))
                    .collect::<Result<Vec<_>>>()
            });
            match outcome {
                Ok(results) => {
                    for r in results {
                        out.rows.push(ResultRow::from_result(*pair, Phase::DevEer, &r.dev));
                        if let Some(t) = &r.test {
                            out.rows.push(ResultRow::from_result(*pair, Phase::TestHter, t));
                        }
                        out.det.push(r.det);
                    }
                }
                Err(e) => {
                    log::warn!("skipping {pair} / {chain}: {e}");
                    out.skipped.push(Skipped {
                        pair: *pair,
                        chain: chain.to_string(),
                        reason: e.to_string(),
                    });
                }
            }
        }
    }
    out
}

pub const RESULT_HEADER: [&str; 11] = [
    "train_condition",
    "test_condition",
    "chain",
    "cohort_mode",
    "phase",
    "FAR",
    "FRR",
    "value",
    "threshold_count",
    "n_target",
    "n_impostor",
];

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

pub fn write_results_csv<W: Write>(w: W, rows: &[ResultRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(RESULT_HEADER)?;
    for r in rows {
        wtr.write_record([
            r.pair.train.to_string(),
            r.pair.test.to_string(),
            r.chain.clone(),
            on_off(r.cohort_mode).to_string(),
            r.phase.name().to_string(),
            r.far.to_string(),
            r.frr.to_string(),
            r.value.to_string(),
            r.threshold_count.to_string(),
            r.n_target.to_string(),
            r.n_impostor.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<results>", e))
}

pub fn write_det_csv<W: Write>(w: W, table: &DetTable) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["speaker_id", "index", "threshold", "far", "frr", "selected"])?;
    for (spk, (curve, selected)) in &table.curves {
        for i in 0..curve.thresholds.len() {
            wtr.write_record([
                spk.clone(),
                i.to_string(),
                curve.thresholds[i].to_string(),
                curve.far[i].to_string(),
                curve.frr[i].to_string(),
                u8::from(i == *selected).to_string(),
            ])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<det>", e))
}

pub fn write_skipped_csv<W: Write>(w: W, skipped: &[Skipped]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["train_condition", "test_condition", "chain", "reason"])?;
    for s in skipped {
        wtr.write_record([
            s.pair.train.to_string(),
            s.pair.test.to_string(),
            s.chain.clone(),
            s.reason.clone(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<skipped>", e))
}

/// Writes results, skipped cells and one DET file per cell into `dir`.
pub fn write_protocol_output(dir: &Path, out: &ProtocolOutput) -> Result<()> {
    let create = |p: &Path| std::fs::File::create(p).map_err(|e| Error::io(p, e));
    write_results_csv(create(&dir.join("results.csv"))?, &out.rows)?;
    write_skipped_csv(create(&dir.join("skipped.csv"))?, &out.skipped)?;
    let det_dir = dir.join("det");
    std::fs::create_dir_all(&det_dir).map_err(|e| Error::io(&det_dir, e))?;
    for t in &out.det {
        let chain: ParamChain = t.chain.parse()?;
        let name = format!("{}__{}__cohort-{}.csv", t.pair, chain.file_stem(), on_off(t.cohort_mode));
        write_det_csv(create(&det_dir.join(name))?, t)?;
    }
    Ok(())
}
