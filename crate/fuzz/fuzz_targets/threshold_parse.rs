#![no_main]

use libfuzzer_sys::fuzz_target;
use spkver::eval::ThresholdFile;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(file) = ThresholdFile::parse(text) {
        let again = ThresholdFile::parse(&file.render()).expect("rendered thresholds parse");
        assert_eq!(again, file);
    }
});
