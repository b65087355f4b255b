//! Recording manifests and the synthetic corpus generator.

mod manifest;
mod synth;

pub use manifest::{load_manifest, read_utterance, Manifest, ManifestRecord, ManifestSource, MANIFEST_HEADER};
pub use synth::{
    poles_to_lpc, speaker_id, synthesize_corpus, SynthCorpus, SynthSource, SynthSpec, SynthUtterance,
    MIC_TAPS, MIN_SPEAKERS, SAMPLE_RATE, SOURCE_ORDER,
};
