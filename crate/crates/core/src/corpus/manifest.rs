//! CSV manifest of recordings and a [`FrameSource`] backed by it.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use crate::audio::{read_wav, AudioSignal};
use crate::error::{Error, Result};
use crate::eval::{Channel, Condition, FrameSource, Language, Role, UtteranceAnalysis};
use crate::frontend::decimate_to_8khz;
use crate::pipeline::{analyze, FrontendConfig};

pub const MANIFEST_HEADER: [&str; 9] = [
    "utterance_id",
    "speaker_id",
    "session",
    "language",
    "microphone",
    "channel",
    "role",
    "dev_index",
    "path",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    pub utterance_id: String,
    pub speaker_id: String,
    pub condition: Condition,
    pub role: Role,
    pub dev_index: Option<u8>,
    /// As written in the manifest; relative paths resolve against the
    /// manifest's directory.
    pub path: PathBuf,
    pub line: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub records: Vec<ManifestRecord>,
    pub base_dir: PathBuf,
}

fn field_err(line: u64, field: &str, value: &str, expected: &str) -> Error {
    Error::Manifest {
        line,
        reason: format!("field {field}: unknown value {value:?} (expected {expected})"),
    }
}

fn parse_prefixed(value: &str, prefix: char, max: u8) -> Option<u8> {
    let v = value.trim();
    let digits = v
        .strip_prefix(prefix)
        .or_else(|| v.strip_prefix(prefix.to_ascii_lowercase()))
        .unwrap_or(v);
    digits.parse().ok().filter(|n| (1..=max).contains(n))
}

impl Manifest {
    /// Parses manifest text. With `base_dir`, every path must name an
    /// existing file.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = rdr.headers()?.clone();
        if header.iter().ne(MANIFEST_HEADER.iter().copied()) {
            return Err(Error::Manifest {
                line: 1,
                reason: format!("header must be {}", MANIFEST_HEADER.join(",")),
            });
        }
        let mut records = Vec::new();
        let mut seen: HashMap<String, u64> = HashMap::new();
        let mut dev_slots: HashMap<(String, Condition, u8), u64> = HashMap::new();
        for row in rdr.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line());
            if row.len() != MANIFEST_HEADER.len() {
                return Err(Error::Manifest {
                    line,
                    reason: format!("expected {} fields, got {}", MANIFEST_HEADER.len(), row.len()),
                });
            }
            let get = |i: usize| row.get(i).unwrap_or("");
            let utterance_id = get(0).to_string();
            let speaker_id = get(1).to_string();
            for (name, v) in [("utterance_id", &utterance_id), ("speaker_id", &speaker_id)] {
                if v.is_empty() || v.contains([';', '/', '\\']) {
                    return Err(Error::Manifest {
                        line,
                        reason: format!("field {name}: empty or contains a separator"),
                    });
                }
            }
            let session = parse_prefixed(get(2), 'S', crate::eval::MAX_SESSION)
                .ok_or_else(|| field_err(line, "session", get(2), "S1..S4"))?;
            let language = match get(3).to_ascii_lowercase().as_str() {
                "c" | "catalan" => Language::Catalan,
                "s" | "spanish" => Language::Spanish,
                _ => return Err(field_err(line, "language", get(3), "c or s")),
            };
            let microphone = parse_prefixed(get(4), 'M', crate::eval::MAX_MICROPHONE)
                .ok_or_else(|| field_err(line, "microphone", get(4), "M1..M3"))?;
            let channel: Channel = get(5)
                .parse()
                .map_err(|_| field_err(line, "channel", get(5), "normal, AR or ISDN"))?;
            let role: Role = get(6)
                .parse()
                .map_err(|_| field_err(line, "role", get(6), "train, dev or test"))?;
            let dev_index = match (role, get(7)) {
                (Role::Dev, v) => Some(
                    v.parse::<u8>()
                        .ok()
                        .filter(|&i| i >= 1)
                        .ok_or_else(|| field_err(line, "dev_index", v, "a positive integer for dev rows"))?,
                ),
                (_, "") => None,
                (_, v) => return Err(field_err(line, "dev_index", v, "empty for train and test rows")),
            };
            let path = PathBuf::from(get(8));
            if get(8).is_empty() {
                return Err(Error::Manifest {
                    line,
                    reason: "field path: empty".into(),
                });
            }
            if let Some(first) = seen.insert(utterance_id.clone(), line) {
                return Err(Error::DuplicateUtterance {
                    id: utterance_id,
                    first,
                    second: line,
                });
            }
            let condition = Condition {
                session,
                channel,
                language,
                microphone,
            };
            if let Some(i) = dev_index {
                if let Some(prev) = dev_slots.insert((speaker_id.clone(), condition, i), line) {
                    return Err(Error::Manifest {
                        line,
                        reason: format!("dev_index {i} for {speaker_id} under {condition} already used on line {prev}"),
                    });
                }
            }
            if let Some(dir) = base_dir {
                let full = dir.join(&path);
                if !full.is_file() {
                    return Err(Error::Manifest {
                        line,
                        reason: format!("missing file {}", full.display()),
                    });
                }
            }
            records.push(ManifestRecord {
                utterance_id,
                speaker_id,
                condition,
                role,
                dev_index,
                path,
                line,
            });
        }
        Ok(Manifest {
            records,
            base_dir: base_dir.map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    pub fn render(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(MANIFEST_HEADER)?;
        for r in &self.records {
            wtr.write_record([
                r.utterance_id.clone(),
                r.speaker_id.clone(),
                format!("S{}", r.condition.session),
                r.condition.language.code().to_string(),
                format!("M{}", r.condition.microphone),
                r.condition.channel.name().to_string(),
                r.role.name().to_string(),
                r.dev_index.map(|i| i.to_string()).unwrap_or_default(),
                r.path.to_string_lossy().into_owned(),
            ])?;
        }
        let bytes = wtr.into_inner().map_err(|e| Error::io("<manifest>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output of UTF-8 fields is UTF-8"))
    }

    pub fn resolve(&self, record: &ManifestRecord) -> PathBuf {
        self.base_dir.join(&record.path)
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    Manifest::parse(&text, Some(dir))
}

/// Decodes a manifest recording and brings it to 8 kHz.
pub fn read_utterance(manifest: &Manifest, record: &ManifestRecord) -> Result<AudioSignal> {
    let path = manifest.resolve(record);
    let signal = read_wav(&path)?;
    decimate_to_8khz(&signal).map_err(|e| match e {
        Error::UnsupportedSampleRate(r) => Error::Manifest {
            line: record.line,
            reason: format!("{}: unsupported sample rate {r} Hz", path.display()),
        },
        other => other,
    })
}

/// Analyzes manifest recordings lazily, caching per utterance.
pub struct ManifestSource {
    manifest: Manifest,
    frontend: FrontendConfig,
    index: BTreeMap<(String, Condition, Role), Vec<(u8, usize)>>,
    by_id: HashMap<String, usize>,
    cache: Mutex<HashMap<String, Arc<UtteranceAnalysis>>>,
}

impl ManifestSource {
    pub fn new(manifest: Manifest, frontend: FrontendConfig) -> Self {
        let mut index: BTreeMap<(String, Condition, Role), Vec<(u8, usize)>> = BTreeMap::new();
        let mut by_id = HashMap::new();
        for (i, r) in manifest.records.iter().enumerate() {
            index
                .entry((r.speaker_id.clone(), r.condition, r.role))
                .or_default()
                .push((r.dev_index.unwrap_or(0), i));
            by_id.insert(r.utterance_id.clone(), i);
        }
        for v in index.values_mut() {
            v.sort();
        }
        Self {
            manifest,
            frontend,
            index,
            by_id,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn conditions(&self, role: Role) -> Vec<Condition> {
        let mut c: Vec<Condition> = self
            .index
            .keys()
            .filter(|k| k.2 == role)
            .map(|k| k.1)
            .collect();
        c.sort();
        c.dedup();
        c
    }
}

impl FrameSource for ManifestSource {
    fn speakers(&self) -> Vec<String> {
        let mut s: Vec<String> = self.manifest.records.iter().map(|r| r.speaker_id.clone()).collect();
        s.sort();
        s.dedup();
        s
    }

    fn utterances(&self, speaker: &str, condition: &Condition, role: Role) -> Vec<String> {
        self.index
            .get(&(speaker.to_string(), *condition, role))
            .map(|v| {
                v.iter()
                    .map(|&(_, i)| self.manifest.records[i].utterance_id.clone())
                    .collect()
            })
            .unwrap_or_default()
    }

    fn analysis(&self, utterance: &str) -> Result<Arc<UtteranceAnalysis>> {
        if let Some(a) = self.cache.lock().unwrap().get(utterance) {
            return Ok(a.clone());
        }
        let &i = self
            .by_id
            .get(utterance)
            .ok_or_else(|| Error::MissingUtterance(utterance.to_string()))?;
        let record = &self.manifest.records[i];
        let signal = read_utterance(&self.manifest, record)?;
        let frames = analyze(&signal, &self.frontend).map_err(|e| Error::InvalidArgument(format!(
            "utterance {} (speaker {}, {}): {e}",
            record.utterance_id, record.speaker_id, record.condition
        )))?;
        let a = Arc::new(UtteranceAnalysis {
            frames,
            duration_seconds: signal.duration_seconds(),
        });
        self.cache
            .lock()
            .unwrap()
            .insert(utterance.to_string(), a.clone());
        Ok(a)
    }
}
