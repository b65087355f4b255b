use std::path::PathBuf;

use spkver_cli::config::{FileConfig, RunConfig};

#[test]
fn config_seeds_parse_or_fail_cleanly() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/config_parse");
    let mut verdicts = Vec::new();
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let resolved = FileConfig::parse(&text).and_then(RunConfig::resolve);
        verdicts.push((path.file_name().unwrap().to_string_lossy().into_owned(), resolved.is_ok()));
    }
    verdicts.sort();
    let get = |n: &str| verdicts.iter().find(|v| v.0 == n).unwrap().1;
    assert!(get("echo.toml"));
    assert!(get("chains_string.toml"));
    assert!(!get("unknown_key.toml"));
    assert!(!get("bad_grid.toml"));
}
