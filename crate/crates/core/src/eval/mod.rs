//! Trial scoring, per-speaker EER thresholds and fixed-threshold error rates.

mod condition;
mod protocol;
mod threshold_file;

pub use condition::{Channel, Condition, ConditionPair, Language, Role, MAX_MICROPHONE, MAX_SESSION};
pub use protocol::{
    collect_cell, compute_thresholds, evaluate_cell, evaluate_fixed_cell, run_protocol, write_det_csv,
    write_protocol_output, write_results_csv, write_skipped_csv, CellData, CellOutcome, CohortMode,
    DetTable, FrameSource, ModelDirectory, ModelProvider, Phase, ProtocolConfig, ProtocolOutput,
    ResultRow, Skipped, TrainingModels, UtteranceAnalysis, MODEL_EXTENSION, RESULT_HEADER,
};
pub use threshold_file::{SpeakerThreshold, ThresholdFile};

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{likelihood, normalize_score, CohortSet, SpdMatrix, SpeakerModel};

pub const GRID_SIZE: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trial {
    pub claimed: String,
    pub utterance: String,
    pub is_target: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet {
    pub train_condition: Condition,
    pub test_condition: Condition,
    pub trials: Vec<Trial>,
}

impl TrialSet {
    /// Every utterance is tried against every claimed speaker; trials where
    /// the utterance belongs to the claimed speaker are targets.
    pub fn exhaustive(
        pair: ConditionPair,
        claimed: &[String],
        utterances: &[(String, String)],
    ) -> TrialSet {
        let trials = claimed
            .iter()
            .flat_map(|c| {
                utterances.iter().map(move |(utt, owner)| Trial {
                    claimed: c.clone(),
                    utterance: utt.clone(),
                    is_target: owner == c,
                })
            })
            .collect();
        TrialSet {
            train_condition: pair.train,
            test_condition: pair.test,
            trials,
        }
    }
}

/// Test-side statistics of one utterance.
#[derive(Debug, Clone)]
pub struct TestUtterance {
    pub speaker_id: String,
    pub chain_id: String,
    pub covariance: SpdMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Score {
    pub claimed_speaker: String,
    pub test_utterance: String,
    pub is_target: bool,
    pub distance: f64,
    pub likelihood: f64,
    /// Likelihood minus the best cohort likelihood, when cohorts are used.
    pub normalized: Option<f64>,
}

impl Score {
    /// The value thresholds are compared against.
    pub fn value(&self) -> f64 {
        self.normalized.unwrap_or(self.likelihood)
    }
}

/// Scores every trial in order. With cohorts, each score also carries the
/// cohort-normalized likelihood.
pub fn score_trials(
    trials: &TrialSet,
    models: &BTreeMap<String, SpeakerModel>,
    utterances: &BTreeMap<String, TestUtterance>,
    cohorts: Option<&BTreeMap<String, CohortSet>>,
    a: f64,
) -> Result<Vec<Score>> {
    let mut needed: BTreeSet<(&str, &str)> = BTreeSet::new();
    for t in &trials.trials {
        needed.insert((&t.claimed, &t.utterance));
        if let Some(cohorts) = cohorts {
            let set = cohorts
                .get(&t.claimed)
                .ok_or_else(|| Error::MissingModel(format!("cohort set of {}", t.claimed)))?;
            for id in &set.cohort_ids {
                needed.insert((id, &t.utterance));
            }
        }
    }
    let needed: Vec<(&str, &str)> = needed.into_iter().collect();
    let distances: HashMap<(&str, &str), f64> = needed
        .par_iter()
        .map(|&(model_id, utt_id)| {
            let model = models
                .get(model_id)
                .ok_or_else(|| Error::MissingModel(format!("claimed speaker {model_id}")))?;
            let utt = utterances
                .get(utt_id)
                .ok_or_else(|| Error::MissingUtterance(utt_id.to_string()))?;
            if model.chain_id != utt.chain_id {
                return Err(Error::ChainMismatch {
                    model: model.chain_id.clone(),
                    features: utt.chain_id.clone(),
                });
            }
            Ok(((model_id, utt_id), model.distance(&utt.covariance)?))
        })
        .collect::<Result<_>>()?;

    Ok(trials
        .trials
        .iter()
        .map(|t| {
            let distance = distances[&(t.claimed.as_str(), t.utterance.as_str())];
            let l = likelihood(distance, a);
            let normalized = cohorts.map(|c| {
                let cohort_l: Vec<f64> = c[&t.claimed]
                    .cohort_ids
                    .iter()
                    .map(|id| likelihood(distances[&(id.as_str(), t.utterance.as_str())], a))
                    .collect();
                normalize_score(l, &cohort_l)
            });
            Score {
                claimed_speaker: t.claimed.clone(),
                test_utterance: t.utterance.clone(),
                is_target: t.is_target,
                distance,
                likelihood: l,
                normalized,
            }
        })
        .collect())
}

/// `n` evenly spaced thresholds from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Grid over [0, 1] for raw likelihoods, or over the observed score range
/// for cohort-normalized scores.
pub fn threshold_grid(scores: impl IntoIterator<Item = f64>, cohort_mode: bool, n: usize) -> Vec<f64> {
    if !cohort_mode {
        return linear_grid(0.0, 1.0, n);
    }
    let (lo, hi) = scores
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s), hi.max(s)));
    if lo > hi {
        return linear_grid(0.0, 1.0, n);
    }
    linear_grid(lo, hi, n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetCurve {
    pub thresholds: Vec<f64>,
    pub far: Vec<f64>,
    pub frr: Vec<f64>,
}

/// False acceptance (`impostor >= t`) and false rejection (`target < t`)
/// fractions at every grid threshold.
pub fn sweep_thresholds(speaker: &str, targets: &[f64], impostors: &[f64], grid: &[f64]) -> Result<DetCurve> {
    if targets.is_empty() {
        return Err(Error::EmptyScores {
            speaker: speaker.to_string(),
            kind: "target",
        });
    }
    if impostors.is_empty() {
        return Err(Error::EmptyScores {
            speaker: speaker.to_string(),
            kind: "impostor",
        });
    }
    let mut t_sorted = targets.to_vec();
    let mut i_sorted = impostors.to_vec();
    t_sorted.sort_by(f64::total_cmp);
    i_sorted.sort_by(f64::total_cmp);
    let nt = t_sorted.len() as f64;
    let ni = i_sorted.len() as f64;
    let mut far = Vec::with_capacity(grid.len());
    let mut frr = Vec::with_capacity(grid.len());
    for &t in grid {
        let below_t = t_sorted.partition_point(|&s| s < t);
        let below_i = i_sorted.partition_point(|&s| s < t);
        frr.push(below_t as f64 / nt);
        far.push((i_sorted.len() - below_i) as f64 / ni);
    }
    Ok(DetCurve {
        thresholds: grid.to_vec(),
        far,
        frr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EerPoint {
    pub index: usize,
    pub far: f64,
    pub frr: f64,
    pub eer: f64,
    /// No grid point had `far <= frr`; the last point was taken.
    pub no_crossing: bool,
}

/// Scans upward from the lowest threshold and stops at the first grid point
/// with `far <= frr`, the low end of any tied range.
pub fn select_eer_threshold(far: &[f64], frr: &[f64]) -> Result<EerPoint> {
    if far.len() != frr.len() || far.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "far/frr arrays must be non-empty and equal length ({} vs {})",
            far.len(),
            frr.len()
        )));
    }
    let (index, no_crossing) = match far.iter().zip(frr).position(|(a, r)| a <= r) {
        Some(i) => (i, false),
        None => (far.len() - 1, true),
    };
    Ok(EerPoint {
        index,
        far: far[index],
        frr: frr[index],
        eer: (far[index] + frr[index]) / 2.0,
        no_crossing,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerOperatingPoint {
    pub threshold: f64,
    pub point: EerPoint,
    pub curve: DetCurve,
}

/// Per-speaker EER operating points from a set of scores.
pub fn set_thresholds(
    scores: &[Score],
    cohort_mode: bool,
    grid_size: usize,
) -> Result<BTreeMap<String, SpeakerOperatingPoint>> {
    let mut by_speaker: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for s in scores {
        let e = by_speaker.entry(&s.claimed_speaker).or_default();
        if s.is_target {
            e.0.push(s.value());
        } else {
            e.1.push(s.value());
        }
    }
    by_speaker
        .into_iter()
        .map(|(speaker, (targets, impostors))| {
            let grid = threshold_grid(targets.iter().chain(&impostors).copied(), cohort_mode, grid_size);
            let curve = sweep_thresholds(speaker, &targets, &impostors, &grid)?;
            let point = select_eer_threshold(&curve.far, &curve.frr)?;
            Ok((
                speaker.to_string(),
                SpeakerOperatingPoint {
                    threshold: grid[point.index],
                    point,
                    curve,
                },
            ))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub thresholds: BTreeMap<String, f64>,
    pub far: f64,
    pub frr: f64,
    /// Mean per-speaker EER; present for threshold-setting runs.
    pub eer: Option<f64>,
    pub hter: f64,
    pub chain_id: String,
    pub cohort_mode: bool,
    pub false_accepts: usize,
    pub impostor_trials: usize,
    pub false_rejects: usize,
    pub target_trials: usize,
    /// Speakers whose sweep found no crossing.
    pub no_crossing: usize,
}

/// Summary of a threshold-setting sweep: speaker-averaged FAR, FRR and EER at
/// each speaker's selected threshold.
pub fn summarize_eer(
    points: &BTreeMap<String, SpeakerOperatingPoint>,
    scores: &[Score],
    chain_id: &str,
    cohort_mode: bool,
) -> EvalResult {
    let n = points.len().max(1) as f64;
    let far = points.values().map(|p| p.point.far).sum::<f64>() / n;
    let frr = points.values().map(|p| p.point.frr).sum::<f64>() / n;
    let eer = points.values().map(|p| p.point.eer).sum::<f64>() / n;
    let thresholds: BTreeMap<String, f64> =
        points.iter().map(|(k, p)| (k.clone(), p.threshold)).collect();
    let counts = count_errors(scores, &thresholds);
    EvalResult {
        thresholds,
        far,
        frr,
        eer: Some(eer),
        hter: (far + frr) / 2.0,
        chain_id: chain_id.to_string(),
        cohort_mode,
        false_accepts: counts.0,
        impostor_trials: counts.1,
        false_rejects: counts.2,
        target_trials: counts.3,
        no_crossing: points.values().filter(|p| p.point.no_crossing).count(),
    }
}

fn count_errors(scores: &[Score], thresholds: &BTreeMap<String, f64>) -> (usize, usize, usize, usize) {
    let (mut fa, mut ni, mut fr, mut nt) = (0, 0, 0, 0);
    for s in scores {
        let Some(&t) = thresholds.get(&s.claimed_speaker) else {
            continue;
        };
        let accept = s.value() >= t;
        if s.is_target {
            nt += 1;
            fr += usize::from(!accept);
        } else {
            ni += 1;
            fa += usize::from(accept);
        }
    }
    (fa, ni, fr, nt)
}

/// Applies pre-set per-speaker thresholds: accept iff score >= T(claimed).
pub fn evaluate_fixed_thresholds(
    scores: &[Score],
    thresholds: &BTreeMap<String, f64>,
    chain_id: &str,
    cohort_mode: bool,
) -> Result<EvalResult> {
    if let Some(s) = scores.iter().find(|s| !thresholds.contains_key(&s.claimed_speaker)) {
        return Err(Error::MissingThreshold(s.claimed_speaker.clone()));
    }
    let (fa, ni, fr, nt) = count_errors(scores, thresholds);
    let far = if ni == 0 { 0.0 } else { fa as f64 / ni as f64 };
    let frr = if nt == 0 { 0.0 } else { fr as f64 / nt as f64 };
    Ok(EvalResult {
        thresholds: thresholds.clone(),
        far,
        frr,
        eer: None,
        hter: (far + frr) / 2.0,
        chain_id: chain_id.to_string(),
        cohort_mode,
        false_accepts: fa,
        impostor_trials: ni,
        false_rejects: fr,
        target_trials: nt,
        no_crossing: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn score(claimed: &str, target: bool, v: f64) -> Score {
        Score {
            claimed_speaker: claimed.into(),
            test_utterance: format!("u{v}"),
            is_target: target,
            distance: 0.0,
            likelihood: v,
            normalized: None,
        }
    }

    #[test]
    fn grid_shape() {
        let g = linear_grid(0.0, 1.0, GRID_SIZE);
        assert_eq!(g.len(), 100);
        assert_eq!((g[0], g[99]), (0.0, 1.0));
        let g = threshold_grid([-0.5, 0.25, 0.1], true, 5);
        assert_eq!(g, [-0.5, -0.3125, -0.125, 0.0625, 0.25]);
    }

    #[test]
    fn separable_sweep() {
        let grid = linear_grid(0.0, 1.0, 11);
        let c = sweep_thresholds("s1", &[1.0, 1.0], &[0.0, 0.0, 0.0], &grid).unwrap();
        assert_eq!(c.far[0], 1.0);
        assert!(c.far[1..].iter().all(|&v| v == 0.0));
        assert!(c.frr.iter().all(|&v| v == 0.0));
        let err = sweep_thresholds("s7", &[], &[0.1], &grid).unwrap_err();
        assert!(err.to_string().contains("s7"));
        assert!(sweep_thresholds("s7", &[0.1], &[], &grid).is_err());
    }

    #[test]
    fn identical_distributions_cross_near_median() {
        let vals: Vec<f64> = (0..200).map(|i| ((i * 37) % 200) as f64 / 200.0).collect();
        let grid = linear_grid(0.0, 1.0, 101);
        let c = sweep_thresholds("s", &vals, &vals, &grid).unwrap();
        for (i, &t) in grid.iter().enumerate() {
            // brute-force recount
            let far = vals.iter().filter(|&&v| v >= t).count() as f64 / 200.0;
            let frr = vals.iter().filter(|&&v| v < t).count() as f64 / 200.0;
            assert_eq!((c.far[i], c.frr[i]), (far, frr));
            assert!((c.far[i] + c.frr[i] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eer_selection_examples() {
        let p = select_eer_threshold(&[0.9, 0.5, 0.2, 0.1], &[0.0, 0.1, 0.2, 0.4]).unwrap();
        assert_eq!(p.index, 2);
        assert!((p.eer - 0.2).abs() < 1e-15);
        assert!(!p.no_crossing);
        let p = select_eer_threshold(&[0.0, 0.0], &[0.1, 0.5]).unwrap();
        assert_eq!(p.index, 0);
        let p = select_eer_threshold(&[0.9, 0.8], &[0.1, 0.5]).unwrap();
        assert_eq!(p.index, 1);
        assert!(p.no_crossing);
        assert!(select_eer_threshold(&[], &[]).is_err());
        assert!(select_eer_threshold(&[0.1], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn fixed_threshold_examples() {
        let scores = vec![score("a", true, 0.9), score("a", false, 0.1), score("b", true, 0.8), score("b", false, 0.2)];
        let t: BTreeMap<String, f64> = [("a".into(), 0.5), ("b".into(), 0.5)].into();
        let r = evaluate_fixed_thresholds(&scores, &t, "LPCC", false).unwrap();
        assert_eq!((r.far, r.frr, r.hter), (0.0, 0.0, 0.0));

        let inf: BTreeMap<String, f64> = [("a".into(), f64::INFINITY), ("b".into(), f64::INFINITY)].into();
        let r = evaluate_fixed_thresholds(&scores, &inf, "LPCC", false).unwrap();
        assert_eq!((r.far, r.frr, r.hter), (0.0, 1.0, 0.5));

        let only_a: BTreeMap<String, f64> = [("a".into(), 0.5)].into();
        assert!(matches!(
            evaluate_fixed_thresholds(&scores, &only_a, "LPCC", false),
            Err(Error::MissingThreshold(s)) if s == "b"
        ));
    }

    #[test]
    fn threshold_ties_accept() {
        let scores = vec![score("a", true, 0.5), score("a", false, 0.5)];
        let t: BTreeMap<String, f64> = [("a".into(), 0.5)].into();
        let r = evaluate_fixed_thresholds(&scores, &t, "LPCC", false).unwrap();
        assert_eq!((r.false_accepts, r.false_rejects), (1, 0));
    }

    fn spd(diag: &[f64]) -> SpdMatrix {
        SpdMatrix::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag.to_vec())), "t").unwrap()
    }

    #[test]
    fn scoring_self_similarity_and_order() {
        let mut models = BTreeMap::new();
        models.insert("a".to_string(), SpeakerModel::new("a", "LPCC", spd(&[1.0, 2.0]), 10, false));
        models.insert("b".to_string(), SpeakerModel::new("b", "LPCC", spd(&[3.0, 1.0]), 10, false));
        let mut utts = BTreeMap::new();
        for (id, spk, d) in [("ua", "a", [1.0, 2.0]), ("ub", "b", [2.0, 1.5])] {
            utts.insert(
                id.to_string(),
                TestUtterance {
                    speaker_id: spk.into(),
                    chain_id: "LPCC".into(),
                    covariance: spd(&d),
                },
            );
        }
        let pair = ConditionPair::matched("S1cM1".parse().unwrap());
        let claimed = vec!["a".to_string(), "b".to_string()];
        let list = vec![("ua".to_string(), "a".to_string()), ("ub".to_string(), "b".to_string())];
        let trials = TrialSet::exhaustive(pair, &claimed, &list);
        let scores = score_trials(&trials, &models, &utts, None, 2.0).unwrap();
        assert_eq!(scores.len(), 4);
        assert_eq!(scores[0].distance, 0.0);
        assert_eq!(scores[0].likelihood, 1.0);
        assert!(scores.iter().all(|s| s.normalized.is_none()));

        let mut rev = trials.clone();
        rev.trials.reverse();
        let rscores = score_trials(&rev, &models, &utts, None, 2.0).unwrap();
        let mut back = rscores.clone();
        back.reverse();
        assert_eq!(back, scores);

        let cohorts: BTreeMap<String, CohortSet> = [
            ("a".to_string(), CohortSet { speaker_id: "a".into(), cohort_ids: vec!["b".into()] }),
            ("b".to_string(), CohortSet { speaker_id: "b".into(), cohort_ids: vec!["a".into()] }),
        ]
        .into();
        let c = score_trials(&trials, &models, &utts, Some(&cohorts), 2.0).unwrap();
        let expect = c[0].likelihood - c[2].likelihood;
        assert!((c[0].normalized.unwrap() - expect).abs() < 1e-15);

        let mut wrong = utts.clone();
        wrong.get_mut("ua").unwrap().chain_id = "CMS".into();
        assert!(matches!(
            score_trials(&trials, &models, &wrong, None, 2.0),
            Err(Error::ChainMismatch { .. })
        ));
        let mut missing = models.clone();
        missing.remove("b");
        assert!(matches!(
            score_trials(&trials, &missing, &utts, None, 2.0),
            Err(Error::MissingModel(_))
        ));
    }
}
