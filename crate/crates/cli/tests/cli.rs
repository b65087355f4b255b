use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn spkver(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spkver"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = spkver(args);
    assert!(
        out.status.success(),
        "spkver {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fail(args: &[&str]) -> String {
    let out = spkver(args);
    assert!(!out.status.success(), "spkver {args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SYNTH: [&str; 14] = [
    "synth",
    "--speakers",
    "8",
    "--seed",
    "42",
    "--microphones",
    "3",
    "--languages",
    "1",
    "--train-seconds",
    "6",
    "--sentence-seconds",
    "1",
    "--test-sentences=2",
];

/// One small corpus shared by the tests in this file.
fn corpus() -> &'static Path {
    static DIR: OnceLock<(TempDir, PathBuf)> = OnceLock::new();
    let (_, path) = DIR.get_or_init(|| {
        let tmp = TempDir::new().unwrap();
        let path = tmp.path().join("corpus");
        let mut args = SYNTH.to_vec();
        args.extend(["--out", s(&path)]);
        ok(&args);
        (tmp, path)
    });
    path
}

fn manifest() -> String {
    corpus().join("manifest.csv").to_string_lossy().into_owned()
}

fn hashes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
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

fn read_rows(path: &Path) -> Vec<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    lines
        .map(|l| header.iter().map(|h| h.to_string()).zip(l.split(',').map(str::to_string)).collect())
        .collect()
}

#[test]
fn synth_is_reproducible_and_needs_out() {
    let tmp = TempDir::new().unwrap();
    let again = tmp.path().join("again");
    let mut args = SYNTH.to_vec();
    args.extend(["--out", s(&again)]);
    ok(&args);
    assert_eq!(hashes(corpus()), hashes(&again));

    let err = fail(&SYNTH);
    assert!(err.contains("--out"), "{err}");
    let err = fail(&args);
    assert!(err.contains("not empty"), "{err}");
    args.push("--force");
    ok(&args);
}

#[test]
fn train_writes_one_model_per_speaker_condition_and_chain() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("train");
    let m = manifest();
    let stdout = ok(&[
        "train", "--manifest", &m, "--chains", "LPCC;cms+acw", "--conditions", "S1cM1", "--min-train-seconds", "5",
        "--out", s(&out),
    ]);
    let models: Vec<String> = std::fs::read_dir(out.join("models"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(models.len(), 8 * 2);
    assert!(models.contains(&"spk03__S1cM1__CMS+ACW.spkm".to_string()));
    assert_eq!(stdout.lines().filter(|l| l.contains(" frames")).count(), 16);
    assert_eq!(read_rows(&out.join("train_summary.csv")).len(), 16);

    let err = fail(&["train", "--manifest", &m, "--conditions", "S1cM1", "--out", s(&tmp.path().join("short"))]);
    assert!(err.contains("need 60"), "{err}");
}

#[test]
fn silent_training_utterance_names_the_speaker() {
    let tmp = TempDir::new().unwrap();
    let wav = tmp.path().join("silent.wav");
    let mut bytes = b"RIFF".to_vec();
    let data = vec![0u8; 16000];
    bytes.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
    bytes.extend_from_slice(b"WAVEfmt ");
    bytes.extend_from_slice(&16u32.to_le_bytes());
    for v in [1u16, 1] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes.extend_from_slice(&8000u32.to_le_bytes());
    bytes.extend_from_slice(&16000u32.to_le_bytes());
    bytes.extend_from_slice(&2u16.to_le_bytes());
    bytes.extend_from_slice(&16u16.to_le_bytes());
    bytes.extend_from_slice(b"data");
    bytes.extend_from_slice(&(data.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&data);
    std::fs::write(&wav, bytes).unwrap();
    let manifest = tmp.path().join("manifest.csv");
    std::fs::write(
        &manifest,
        "utterance_id,speaker_id,session,language,microphone,channel,role,dev_index,path\n\
         quiet,spkQ,S1,c,M1,normal,train,,silent.wav\n",
    )
    .unwrap();
    let err = fail(&["train", "--manifest", s(&manifest), "--min-train-seconds", "0", "--out", s(&tmp.path().join("o"))]);
    assert!(err.contains("spkQ") && err.contains("S1cM1") && err.contains("silent"), "{err}");
}

#[test]
fn evaluate_table_layout_and_identical_lifter_rows() {
    let tmp = TempDir::new().unwrap();
    let m = manifest();
    let run = |name: &str| {
        let out = tmp.path().join(name);
        ok(&[
            "evaluate", "--manifest", &m, "--chains", "CMS;CMS-LW", "--protocol", "M1M1,M1M3,M3M3,M3M1", "--base", "S1c",
            "--min-train-seconds", "5", "--out", s(&out),
        ]);
        out
    };
    let a = run("a");
    let rows = read_rows(&a.join("results.csv"));
    for chain in ["CMS", "CMS+LW"] {
        for mode in ["on", "off"] {
            let n = rows
                .iter()
                .filter(|r| r["chain"] == chain && r["cohort_mode"] == mode && r["phase"] == "dev_eer")
                .count();
            assert_eq!(n, 4, "{chain} {mode}");
        }
    }
    let value = |chain: &str, r: &BTreeMap<String, String>| {
        rows.iter()
            .find(|x| {
                x["chain"] == chain
                    && x["train_condition"] == r["train_condition"]
                    && x["test_condition"] == r["test_condition"]
                    && x["cohort_mode"] == r["cohort_mode"]
                    && x["phase"] == r["phase"]
            })
            .map(|x| x["value"].parse::<f64>().unwrap())
            .unwrap()
    };
    for r in rows.iter().filter(|r| r["chain"] == "CMS") {
        assert!((value("CMS", r) - value("CMS+LW", r)).abs() <= 1e-9);
    }
    assert!(a.join("det/S1cM1M3__CMS__cohort-on.csv").exists());
    assert!(std::fs::read_to_string(a.join("config.toml")).unwrap().contains("CMS+LW"));

    let b = run("b");
    assert_eq!(hashes(&a), hashes(&b));
}

#[test]
fn fixed_thresholds_from_stored_models() {
    let tmp = TempDir::new().unwrap();
    let m = manifest();
    let train = tmp.path().join("train");
    ok(&["train", "--manifest", &m, "--chains", "CMS", "--conditions", "S1cM1", "--min-train-seconds", "5", "--out", s(&train)]);
    let models = train.join("models");
    let th = tmp.path().join("th");
    ok(&[
        "thresholds", "--manifest", &m, "--chains", "CMS", "--models", s(&models), "--protocol", "S1cM1M1,S1cM1S2cM2",
        "--out", s(&th),
    ]);
    let files = th.join("thresholds");
    assert_eq!(std::fs::read_dir(&files).unwrap().count(), 4);

    let eval = |name: &str| {
        let out = tmp.path().join(name);
        ok(&[
            "evaluate", "--manifest", &m, "--chains", "CMS", "--models", s(&models), "--protocol", "S1cM1M2,S1cM1S2cM3",
            "--fixed-thresholds", s(&files), "--out", s(&out),
        ]);
        std::fs::read(out.join("results.csv")).unwrap()
    };
    let first = eval("e1");
    assert_eq!(first, eval("e2"));
    let text = String::from_utf8(first).unwrap();
    assert_eq!(text.lines().filter(|l| l.contains("test_hter")).count(), 2 * 4);

    // No model trained for M2: the cell is skipped, not fatal.
    let out = tmp.path().join("skip");
    ok(&[
        "evaluate", "--manifest", &m, "--chains", "CMS", "--models", s(&models), "--protocol", "S1cM2M2", "--out", s(&out),
    ]);
    let skipped = std::fs::read_to_string(out.join("skipped.csv")).unwrap();
    assert!(skipped.contains("S1cM2") && skipped.contains("not found"), "{skipped}");
}

#[test]
fn config_file_supplies_keys_and_flags_override() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.toml");
    let out = tmp.path().join("o");
    std::fs::write(
        &cfg,
        format!(
            "manifest = {:?}\nout = {:?}\nchains = [\"LPCC\"]\nprotocol = \"M1M1\"\nbase = \"S1c\"\ngrid = 50\nmin_train_seconds = 5.0\ncohort_mode = \"off\"\n",
            manifest(),
            s(&out)
        ),
    )
    .unwrap();
    ok(&["evaluate", "--config", s(&cfg), "--grid", "20"]);
    let echo = std::fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(echo.contains("grid = 20"), "{echo}");
    let rows = read_rows(&out.join("results.csv"));
    assert!(rows.iter().all(|r| r["cohort_mode"] == "off"));
    let det = std::fs::read_to_string(out.join("det/S1cM1M1__LPCC__cohort-off.csv")).unwrap();
    assert_eq!(det.lines().filter(|l| l.starts_with("spk01,")).count(), 20);

    let err = fail(&["evaluate", "--config", s(&cfg), "--chains", "LPCC[25..P]", "--force"]);
    assert!(err.contains("drops"), "{err}");
    let err = fail(&["evaluate", "--config", s(&cfg), "--protocol", "M1M7", "--force"]);
    assert!(err.contains("M7") || err.contains("microphone"), "{err}");
}

#[test]
fn sweep_covers_every_table_chain() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sweep");
    ok(&[
        "sweep", "--manifest", &manifest(), "--protocol", "S1cM1M3", "--cohort-mode", "off", "--min-train-seconds", "5",
        "--out", s(&out),
    ]);
    let rows = read_rows(&out.join("results.csv"));
    let chains: std::collections::BTreeSet<&str> = rows.iter().map(|r| r["chain"].as_str()).collect();
    assert_eq!(chains.len(), 13, "{chains:?}");
    assert_eq!(rows.iter().filter(|r| r["phase"] == "dev_eer").count(), 13);
}
