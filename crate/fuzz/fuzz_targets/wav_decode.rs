#![no_main]

use libfuzzer_sys::fuzz_target;
use spkver::audio::{decode_wav, encode_wav};

fuzz_target!(|data: &[u8]| {
    if let Ok(signal) = decode_wav(data) {
        // PCM16 samples survive a re-encode exactly.
        let again = decode_wav(&encode_wav(&signal)).expect("re-encoded WAV decodes");
        assert_eq!(again, signal);
    }
});
