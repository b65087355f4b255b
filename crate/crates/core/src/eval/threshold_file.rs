//! Text format for per-speaker thresholds fixed under one condition pair.
//!
//! ```text
//! spkver-thresholds 1
//! fix_condition=S4cM1M1
//! chain=CMS+ACW
//! cohort_mode=on
//! likelihood_scale=2
//! speaker_id,threshold,cohort
//! spk01,0.4242,spk03;spk07
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::ConditionPair;
use crate::error::{Error, Result};
use crate::features::ParamChain;

const MAGIC: &str = "spkver-thresholds 1";
const COLUMNS: &str = "speaker_id,threshold,cohort";

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerThreshold {
    pub threshold: f64,
    pub cohort: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdFile {
    pub fix_pair: ConditionPair,
    pub chain: String,
    pub cohort_mode: bool,
    pub likelihood_scale: f64,
    pub entries: BTreeMap<String, SpeakerThreshold>,
}

fn bad(line: usize, reason: impl Into<String>) -> Error {
    Error::ThresholdFile {
        line,
        reason: reason.into(),
    }
}

fn valid_id(s: &str) -> bool {
    !s.is_empty() && !s.contains([',', ';', '\n', '\r']) && s.trim() == s
}

impl ThresholdFile {
    pub fn thresholds(&self) -> BTreeMap<String, f64> {
        self.entries
            .iter()
            .map(|(k, v)| (k.clone(), v.threshold))
            .collect()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(s, "fix_condition={}", self.fix_pair);
        let _ = writeln!(s, "chain={}", self.chain);
        let _ = writeln!(s, "cohort_mode={}", if self.cohort_mode { "on" } else { "off" });
        let _ = writeln!(s, "likelihood_scale={}", self.likelihood_scale);
        let _ = writeln!(s, "{COLUMNS}");
        for (spk, e) in &self.entries {
            let _ = writeln!(s, "{spk},{},{}", e.threshold, e.cohort.join(";"));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
        match lines.next() {
            Some((_, MAGIC)) => {}
            _ => return Err(bad(1, format!("expected {MAGIC:?}"))),
        }
        let mut fix_pair = None;
        let mut chain = None;
        let mut cohort_mode = None;
        let mut scale = None;
        let mut saw_columns = false;
        for (n, line) in lines.by_ref() {
            if line == COLUMNS {
                saw_columns = true;
                break;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(n, "expected key=value"))?;
            match key {
                "fix_condition" => {
                    fix_pair = Some(ConditionPair::parse(value, None).map_err(|e| bad(n, e.to_string()))?)
                }
                "chain" => {
                    let c: ParamChain = value.parse().map_err(|e: Error| bad(n, e.to_string()))?;
                    chain = Some(c.to_string());
                }
                "cohort_mode" => {
                    cohort_mode = Some(match value {
                        "on" => true,
                        "off" => false,
                        _ => return Err(bad(n, "cohort_mode must be on or off")),
                    })
                }
                "likelihood_scale" => {
                    let a: f64 = value.parse().map_err(|_| bad(n, "likelihood_scale is not a number"))?;
                    if !(a.is_finite() && a > 0.0) {
                        return Err(bad(n, "likelihood_scale must be positive"));
                    }
                    scale = Some(a);
                }
                other => return Err(bad(n, format!("unknown key {other:?}"))),
            }
        }
        if !saw_columns {
            return Err(bad(0, format!("missing column header {COLUMNS:?}")));
        }
        let mut entries = BTreeMap::new();
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let (Some(spk), Some(t), Some(cohort), None) =
                (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(bad(n, "expected 3 fields"));
            };
            if !valid_id(spk) {
                return Err(bad(n, "empty or malformed speaker id"));
            }
            let threshold: f64 = t.parse().map_err(|_| bad(n, format!("bad threshold {t:?}")))?;
            if threshold.is_nan() {
                return Err(bad(n, "threshold is NaN"));
            }
            let cohort: Vec<String> = if cohort.is_empty() {
                Vec::new()
            } else {
                cohort.split(';').map(str::to_string).collect()
            };
            if cohort.iter().any(|c| !valid_id(c) || c == spk) {
                return Err(bad(n, "malformed cohort list"));
            }
            if entries
                .insert(spk.to_string(), SpeakerThreshold { threshold, cohort })
                .is_some()
            {
                return Err(bad(n, format!("duplicate speaker {spk:?}")));
            }
        }
        Ok(ThresholdFile {
            fix_pair: fix_pair.ok_or_else(|| bad(0, "missing fix_condition"))?,
            chain: chain.ok_or_else(|| bad(0, "missing chain"))?,
            cohort_mode: cohort_mode.ok_or_else(|| bad(0, "missing cohort_mode"))?,
            likelihood_scale: scale.ok_or_else(|| bad(0, "missing likelihood_scale"))?,
            entries,
        })
    }
}
