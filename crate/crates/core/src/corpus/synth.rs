//! Seeded synthetic corpus: all-pole speakers, FIR microphones, per-session
//! pole-angle jitter and language-dependent excitation.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::path::Path;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::manifest::{Manifest, ManifestRecord};
use crate::audio::{write_wav, AudioSignal};
use crate::error::{Error, Result};
use crate::eval::{Condition, FrameSource, Language, Role, UtteranceAnalysis};
use crate::pipeline::{analyze, FrontendConfig};

pub const SAMPLE_RATE: u32 = 8000;
pub const SOURCE_ORDER: usize = 10;
pub const MIC_TAPS: usize = 9;
pub const MIN_SPEAKERS: usize = 7;

const POLE_PAIRS: usize = SOURCE_ORDER / 2;
const RADIUS_RANGE: (f64, f64) = (0.6, 0.95);
const SESSION_JITTER: f64 = 0.02;
const PITCH_RANGE_HZ: (f64, f64) = (90.0, 250.0);
/// Share of noise power in the pulse-train excitation.
const PULSE_NOISE_SHARE: f64 = 0.9;
const GAIN_JITTER_DB: f64 = 3.0;
const TARGET_RMS: f64 = 0.05;
const WARMUP: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_speakers: usize,
    pub seed: u64,
    pub sessions: u8,
    pub microphones: u8,
    pub languages: u8,
    pub train_seconds: f64,
    pub dev_sentences: usize,
    pub test_sentences: usize,
    pub sentence_seconds: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_speakers: 20,
            seed: 0,
            sessions: 2,
            microphones: 2,
            languages: 2,
            train_seconds: 60.0,
            dev_sentences: 5,
            test_sentences: 5,
            sentence_seconds: 3.0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::SynthSpec(m));
        if self.n_speakers < MIN_SPEAKERS {
            return err(format!(
                "need at least {MIN_SPEAKERS} speakers (cohort of 5, the target and one impostor), got {}",
                self.n_speakers
            ));
        }
        if self.n_speakers > 999 {
            return err(format!("at most 999 speakers, got {}", self.n_speakers));
        }
        if !(1..=crate::eval::MAX_SESSION).contains(&self.sessions) {
            return err(format!("sessions must be 1..={}", crate::eval::MAX_SESSION));
        }
        if !(1..=crate::eval::MAX_MICROPHONE).contains(&self.microphones) {
            return err(format!("microphones must be 1..={}", crate::eval::MAX_MICROPHONE));
        }
        if !(1..=2).contains(&self.languages) {
            return err("languages must be 1 or 2".into());
        }
        if self.dev_sentences == 0 || self.dev_sentences > 255 {
            return err("dev_sentences must be 1..=255".into());
        }
        let min_seconds = 240.0 / f64::from(SAMPLE_RATE);
        for (name, v) in [("train_seconds", self.train_seconds), ("sentence_seconds", self.sentence_seconds)] {
            if !(v.is_finite() && v >= min_seconds && v <= 3600.0) {
                return err(format!("{name} must be between {min_seconds} and 3600, got {v}"));
            }
        }
        Ok(())
    }

    pub fn conditions(&self) -> Vec<Condition> {
        let mut out = Vec::new();
        for session in 1..=self.sessions {
            for &language in &Language::ALL[..self.languages as usize] {
                for mic in 1..=self.microphones {
                    out.push(Condition::new(session, language, mic));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
struct SpeakerParams {
    radii: [f64; POLE_PAIRS],
    angles: [f64; POLE_PAIRS],
    pitch_hz: f64,
    /// Angle multipliers per session.
    session_scale: Vec<[f64; POLE_PAIRS]>,
}

/// One recording of the synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthUtterance {
    pub id: String,
    pub speaker: usize,
    pub condition: Condition,
    pub role: Role,
    /// 1-based sentence index for dev and test, 0 for train.
    pub index: usize,
    pub seconds: f64,
}

pub struct SynthCorpus {
    spec: SynthSpec,
    speakers: Vec<SpeakerParams>,
    mics: Vec<[f64; MIC_TAPS]>,
}

pub fn speaker_id(i: usize) -> String {
    format!("spk{:02}", i + 1)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5EED_u64, |acc, &p| splitmix(acc ^ splitmix(p)))
}

/// Expands conjugate pole pairs into `1 + sum a_k z^-k`.
pub fn poles_to_lpc(radii: &[f64], angles: &[f64]) -> Vec<f64> {
    let mut poly = vec![1.0];
    for (&r, &th) in radii.iter().zip(angles) {
        let quad = [1.0, -2.0 * r * th.cos(), r * r];
        let mut next = vec![0.0; poly.len() + 2];
        for (i, p) in poly.iter().enumerate() {
            for (j, q) in quad.iter().enumerate() {
                next[i + j] += p * q;
            }
        }
        poly = next;
    }
    poly[1..].to_vec()
}

impl SynthCorpus {
    /// Draws all speaker and microphone parameters from the seed, in a fixed
    /// order.
    pub fn new(spec: SynthSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mics = (0..spec.microphones)
            .map(|_| {
                let mut h = [0.0; MIC_TAPS];
                h[0] = 1.0;
                for (k, tap) in h.iter_mut().enumerate().skip(1) {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    *tap = 0.6 * g * 0.8f64.powi(k as i32 - 1);
                }
                let norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
                h.map(|v| v / norm)
            })
            .collect();
        let band = PI / POLE_PAIRS as f64;
        let speakers = (0..spec.n_speakers)
            .map(|_| {
                let mut radii = [0.0; POLE_PAIRS];
                let mut angles = [0.0; POLE_PAIRS];
                for k in 0..POLE_PAIRS {
                    radii[k] = rng.random_range(RADIUS_RANGE.0..=RADIUS_RANGE.1);
                    angles[k] = band * (k as f64 + rng.random_range(0.1..0.9));
                }
                let pitch_hz = rng.random_range(PITCH_RANGE_HZ.0..PITCH_RANGE_HZ.1);
                let session_scale = (0..spec.sessions)
                    .map(|_| {
                        let mut s = [1.0; POLE_PAIRS];
                        for v in &mut s {
                            *v += if rng.random_bool(0.5) { SESSION_JITTER } else { -SESSION_JITTER };
                        }
                        s
                    })
                    .collect();
                SpeakerParams {
                    radii,
                    angles,
                    pitch_hz,
                    session_scale,
                }
            })
            .collect();
        Ok(Self { spec, speakers, mics })
    }

    pub fn spec(&self) -> &SynthSpec {
        &self.spec
    }

    pub fn mic_filter(&self, mic: u8) -> &[f64; MIC_TAPS] {
        &self.mics[mic as usize - 1]
    }

    /// Source polynomial of a speaker in a session.
    pub fn source_lpc(&self, speaker: usize, session: u8) -> Vec<f64> {
        let p = &self.speakers[speaker];
        let scale = &p.session_scale[session as usize - 1];
        let angles: Vec<f64> = p.angles.iter().zip(scale).map(|(a, s)| (a * s).min(PI - 1e-3)).collect();
        poles_to_lpc(&p.radii, &angles)
    }

    pub fn utterances(&self) -> Vec<SynthUtterance> {
        let mut out = Vec::new();
        for spk in 0..self.spec.n_speakers {
            for cond in self.spec.conditions() {
                let id = |role: &str, i: Option<usize>| {
                    format!("{}_{}_{}{}", speaker_id(spk), cond, role, i.map(|i| i.to_string()).unwrap_or_default())
                };
                out.push(SynthUtterance {
                    id: id("train", None),
                    speaker: spk,
                    condition: cond,
                    role: Role::Train,
                    index: 0,
                    seconds: self.spec.train_seconds,
                });
                for (role, name, count) in [
                    (Role::Dev, "dev", self.spec.dev_sentences),
                    (Role::Test, "test", self.spec.test_sentences),
                ] {
                    for i in 1..=count {
                        out.push(SynthUtterance {
                            id: id(name, Some(i)),
                            speaker: spk,
                            condition: cond,
                            role,
                            index: i,
                            seconds: self.spec.sentence_seconds,
                        });
                    }
                }
            }
        }
        out
    }

    /// Microphone-independent acoustic signal; every microphone of a
    /// condition hears the same source.
    fn acoustic(&self, u: &SynthUtterance) -> Vec<f64> {
        let c = u.condition;
        let role_tag = match u.role {
            Role::Train => 0,
            Role::Dev => 1,
            Role::Test => 2,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(mix(&[
            self.spec.seed,
            u.speaker as u64,
            u64::from(c.session),
            c.language as u64,
            role_tag,
            u.index as u64,
        ]));
        let n = (u.seconds * f64::from(SAMPLE_RATE)).round() as usize;
        let total = n + WARMUP;
        let params = &self.speakers[u.speaker];

        let mut excitation: Vec<f64> = (0..total).map(|_| StandardNormal.sample(&mut rng)).collect();
        if c.language == Language::Catalan {
            let period = f64::from(SAMPLE_RATE) / params.pitch_hz;
            let pulse = period.sqrt();
            let mut next = rng.random_range(0.0..period);
            let (wp, wn) = ((1.0 - PULSE_NOISE_SHARE).sqrt(), PULSE_NOISE_SHARE.sqrt());
            excitation.iter_mut().for_each(|e| *e *= wn);
            while (next as usize) < total {
                excitation[next as usize] += wp * pulse;
                next += period * (1.0 + rng.random_range(-0.01..0.01));
            }
        }

        let a = self.source_lpc(u.speaker, c.session);
        let mut y = vec![0.0; total];
        for t in 0..total {
            let mut v = excitation[t];
            for (k, ak) in a.iter().enumerate() {
                if t > k {
                    v -= ak * y[t - k - 1];
                }
            }
            y[t] = v;
        }
        y.drain(..WARMUP);
        let gain_db = rng.random_range(-GAIN_JITTER_DB..=GAIN_JITTER_DB);
        let rms = (y.iter().map(|v| v * v).sum::<f64>() / y.len().max(1) as f64).sqrt();
        let scale = if rms > 0.0 {
            TARGET_RMS * 10f64.powf(gain_db / 20.0) / rms
        } else {
            0.0
        };
        y.iter_mut().for_each(|v| *v *= scale);
        y
    }

    /// Renders an utterance as the 16-bit quantized signal written to disk.
    pub fn render(&self, u: &SynthUtterance) -> AudioSignal {
        let x = self.acoustic(u);
        let h = self.mic_filter(u.condition.microphone);
        let out: Vec<f64> = (0..x.len())
            .map(|t| {
                let v: f64 = h
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| t >= *k)
                    .map(|(k, hk)| hk * x[t - k])
                    .sum();
                (v * 32768.0).round().clamp(-32768.0, 32767.0) / 32768.0
            })
            .collect();
        AudioSignal::new(out, SAMPLE_RATE).expect("synthetic samples are finite")
    }
}

/// Writes every utterance under `out_dir/wav/` plus `out_dir/manifest.csv`.
pub fn synthesize_corpus(spec: &SynthSpec, out_dir: &Path) -> Result<Manifest> {
    let corpus = SynthCorpus::new(spec.clone())?;
    let wav_dir = out_dir.join("wav");
    std::fs::create_dir_all(&wav_dir).map_err(|e| Error::io(&wav_dir, e))?;
    let utts = corpus.utterances();
    utts.par_iter().try_for_each(|u| {
        let path = wav_dir.join(format!("{}.wav", u.id));
        write_wav(&path, &corpus.render(u))
    })?;
    let records = utts
        .iter()
        .enumerate()
        .map(|(i, u)| ManifestRecord {
            utterance_id: u.id.clone(),
            speaker_id: speaker_id(u.speaker),
            condition: u.condition,
            role: u.role,
            dev_index: (u.role == Role::Dev).then_some(u.index as u8),
            path: Path::new("wav").join(format!("{}.wav", u.id)),
            line: i as u64 + 2,
        })
        .collect();
    let manifest = Manifest {
        records,
        base_dir: out_dir.to_path_buf(),
    };
    let path = out_dir.join("manifest.csv");
    std::fs::write(&path, manifest.render()?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// In-memory [`FrameSource`] over a synthetic corpus; renders on demand.
pub struct SynthSource {
    corpus: SynthCorpus,
    frontend: FrontendConfig,
    utterances: HashMap<String, SynthUtterance>,
    index: BTreeMap<(String, Condition, Role), Vec<String>>,
    cache: Mutex<HashMap<String, Arc<UtteranceAnalysis>>>,
}

impl SynthSource {
    pub fn new(spec: SynthSpec, frontend: FrontendConfig) -> Result<Self> {
        let corpus = SynthCorpus::new(spec)?;
        let mut index: BTreeMap<(String, Condition, Role), Vec<String>> = BTreeMap::new();
        let mut utterances = HashMap::new();
        for u in corpus.utterances() {
            index
                .entry((speaker_id(u.speaker), u.condition, u.role))
                .or_default()
                .push(u.id.clone());
            utterances.insert(u.id.clone(), u);
        }
        Ok(Self {
            corpus,
            frontend,
            utterances,
            index,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn corpus(&self) -> &SynthCorpus {
        &self.corpus
    }
}

impl FrameSource for SynthSource {
    fn speakers(&self) -> Vec<String> {
        (0..self.corpus.spec.n_speakers).map(speaker_id).collect()
    }

    fn utterances(&self, speaker: &str, condition: &Condition, role: Role) -> Vec<String> {
        self.index
            .get(&(speaker.to_string(), *condition, role))
            .cloned()
            .unwrap_or_default()
    }

    fn analysis(&self, utterance: &str) -> Result<Arc<UtteranceAnalysis>> {
        if let Some(a) = self.cache.lock().unwrap().get(utterance) {
            return Ok(a.clone());
        }
        let u = self
            .utterances
            .get(utterance)
            .ok_or_else(|| Error::MissingUtterance(utterance.to_string()))?;
        let signal = self.corpus.render(u);
        let a = Arc::new(UtteranceAnalysis {
            frames: analyze(&signal, &self.frontend)?,
            duration_seconds: signal.duration_seconds(),
        });
        self.cache.lock().unwrap().insert(utterance.to_string(), a.clone());
        Ok(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        SynthSpec {
            n_speakers: 7,
            seed: 42,
            sessions: 1,
            microphones: 2,
            languages: 1,
            train_seconds: 1.0,
            dev_sentences: 2,
            test_sentences: 1,
            sentence_seconds: 0.5,
        }
    }

    #[test]
    fn rejects_too_few_speakers() {
        let spec = SynthSpec {
            n_speakers: 6,
            ..SynthSpec::default()
        };
        assert!(matches!(SynthCorpus::new(spec), Err(Error::SynthSpec(_))));
    }

    #[test]
    fn poles_expand_correctly() {
        let a = poles_to_lpc(&[0.9], &[0.5]);
        assert!((a[0] + 2.0 * 0.9 * 0.5f64.cos()).abs() < 1e-15);
        assert!((a[1] - 0.81).abs() < 1e-15);
        assert_eq!(poles_to_lpc(&[0.5, 0.5], &[0.1, 0.2]).len(), 4);
    }

    #[test]
    fn durations_match_spec() {
        let c = SynthCorpus::new(small()).unwrap();
        let utts = c.utterances();
        assert_eq!(utts.len(), 7 * 2 * (1 + 2 + 1));
        let train = utts.iter().find(|u| u.role == Role::Train).unwrap();
        assert_eq!(c.render(train).len(), 8000);
        let dev = utts.iter().find(|u| u.role == Role::Dev).unwrap();
        assert_eq!(c.render(dev).len(), 4000);
    }

    #[test]
    fn rendering_is_deterministic_and_mics_share_source() {
        let a = SynthCorpus::new(small()).unwrap();
        let b = SynthCorpus::new(small()).unwrap();
        let utts = a.utterances();
        assert_eq!(a.render(&utts[3]), b.render(&utts[3]));
        let m1 = utts.iter().find(|u| u.condition.microphone == 1 && u.role == Role::Train).unwrap();
        let m2 = utts
            .iter()
            .find(|u| u.condition.microphone == 2 && u.role == Role::Train && u.speaker == m1.speaker)
            .unwrap();
        assert_eq!(a.acoustic(m1), a.acoustic(m2));
        assert_ne!(a.render(m1), a.render(m2));
    }

    #[test]
    fn sources_are_stable() {
        let c = SynthCorpus::new(SynthSpec::default()).unwrap();
        for spk in 0..20 {
            for session in 1..=2 {
                let a = c.source_lpc(spk, session);
                let r = crate::frontend::autocorrelate(&{
                    // impulse response energy as a proxy: a stable filter decays
                    let mut y = vec![0.0; 2000];
                    for t in 0..2000 {
                        let mut v = if t == 0 { 1.0 } else { 0.0 };
                        for (k, ak) in a.iter().enumerate() {
                            if t > k {
                                v -= ak * y[t - k - 1];
                            }
                        }
                        y[t] = v;
                    }
                    y[1900..].to_vec()
                }, 0)
                .unwrap();
                assert!(r[0] < 1e-20);
            }
        }
    }
}
