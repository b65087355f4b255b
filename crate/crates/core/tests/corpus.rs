use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use spkver::corpus::{load_manifest, synthesize_corpus, ManifestSource, SynthCorpus, SynthSource, SynthSpec};
use spkver::eval::{Condition, FrameSource, Language, Role};
use spkver::features::{apply_chain, ParamChain};
use spkver::model::{estimate_covariance, sphericity_distance};
use spkver::pipeline::FrontendConfig;

fn small(seed: u64) -> SynthSpec {
    SynthSpec {
        n_speakers: 7,
        seed,
        sessions: 2,
        microphones: 2,
        languages: 2,
        train_seconds: 4.0,
        dev_sentences: 2,
        test_sentences: 1,
        sentence_seconds: 1.0,
    }
}

fn tree_hashes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, Sha256::digest(std::fs::read(&p).unwrap()).to_vec());
            }
        }
    }
    out
}

#[test]
fn generation_is_bit_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    synthesize_corpus(&small(3), a.path()).unwrap();
    synthesize_corpus(&small(3), b.path()).unwrap();
    let ha = tree_hashes(a.path());
    assert_eq!(ha.len(), 7 * 8 * 4 + 1);
    assert_eq!(ha, tree_hashes(b.path()));

    let c = tempfile::tempdir().unwrap();
    synthesize_corpus(&small(4), c.path()).unwrap();
    assert_ne!(ha, tree_hashes(c.path()));
}

#[test]
fn manifest_source_matches_in_memory_source() {
    let dir = tempfile::tempdir().unwrap();
    synthesize_corpus(&small(5), dir.path()).unwrap();
    let manifest = load_manifest(&dir.path().join("manifest.csv")).unwrap();
    assert_eq!(manifest.records.len(), 7 * 8 * 4);
    let disk = ManifestSource::new(manifest, FrontendConfig::default());
    let mem = SynthSource::new(small(5), FrontendConfig::default()).unwrap();
    assert_eq!(disk.speakers(), mem.speakers());
    let cond = Condition::new(2, Language::Spanish, 2);
    for role in [Role::Train, Role::Dev, Role::Test] {
        let ids = disk.utterances("spk04", &cond, role);
        assert_eq!(ids, mem.utterances("spk04", &cond, role));
        for id in ids {
            let x = disk.analysis(&id).unwrap();
            let y = mem.analysis(&id).unwrap();
            assert_eq!(x.frames.len(), y.frames.len());
            assert_eq!(x.frames[3].cepstrum, y.frames[3].cepstrum);
        }
    }
}

#[test]
fn microphone_filters_do_not_depend_on_speaker() {
    let a = SynthCorpus::new(small(1)).unwrap();
    let b = SynthCorpus::new(SynthSpec { n_speakers: 12, ..small(1) }).unwrap();
    for m in 1..=2 {
        assert_eq!(a.mic_filter(m), b.mic_filter(m));
    }
    assert_ne!(a.mic_filter(1), a.mic_filter(2));
}

#[test]
fn same_speaker_pairs_are_closer_than_cross_speaker_pairs() {
    let chain = ParamChain::default();
    let cond = Condition::new(1, Language::Catalan, 1);
    for seed in 0..5 {
        let source = SynthSource::new(small(seed), FrontendConfig::default()).unwrap();
        let cov = |id: &str| {
            let f = apply_chain(&source.analysis(id).unwrap().frames, &chain).unwrap();
            estimate_covariance(&f, id).unwrap().spd
        };
        let speakers = source.speakers();
        let train: Vec<_> = speakers
            .iter()
            .map(|s| cov(&source.utterances(s, &cond, Role::Train)[0]))
            .collect();
        let (mut same, mut ns, mut cross, mut nc) = (0.0, 0, 0.0, 0);
        for (j, s) in speakers.iter().enumerate() {
            for id in source.utterances(s, &cond, Role::Dev) {
                let t = cov(&id);
                for (k, m) in train.iter().enumerate() {
                    let d = sphericity_distance(m, &t).unwrap();
                    if j == k {
                        same += d;
                        ns += 1;
                    } else {
                        cross += d;
                        nc += 1;
                    }
                }
            }
        }
        let (same, cross) = (same / ns as f64, cross / nc as f64);
        assert!(same < cross, "seed {seed}: same {same} cross {cross}");
    }
}
