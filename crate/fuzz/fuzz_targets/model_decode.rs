#![no_main]

use libfuzzer_sys::fuzz_target;
use spkver::model::{decode_model, encode_model};

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = decode_model(data) {
        let again = decode_model(&encode_model(&model)).expect("re-encoded model decodes");
        assert_eq!(again.speaker_id, model.speaker_id);
        assert_eq!(again.dim(), model.dim());
    }
});
