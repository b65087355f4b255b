#![no_main]

use libfuzzer_sys::fuzz_target;
use spkver::corpus::Manifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = Manifest::parse(text, None) {
        let rendered = m.render().expect("parsed manifest renders");
        let again = Manifest::parse(&rendered, None).expect("rendered manifest parses");
        assert_eq!(again.records.len(), m.records.len());
    }
});
