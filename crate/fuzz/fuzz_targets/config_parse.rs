#![no_main]

use libfuzzer_sys::fuzz_target;
use spkver_cli::config::{FileConfig, RunConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(file) = FileConfig::parse(text) {
        let _ = RunConfig::resolve(file);
    }
});
