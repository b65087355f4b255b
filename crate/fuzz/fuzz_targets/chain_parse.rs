#![no_main]

use libfuzzer_sys::fuzz_target;
use spkver::features::ParamChain;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(chain) = text.parse::<ParamChain>() {
        let again: ParamChain = chain.to_string().parse().expect("canonical id parses");
        assert_eq!(again, chain);
    }
    let _ = ParamChain::parse_list(text);
});
