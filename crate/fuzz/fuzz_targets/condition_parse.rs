#![no_main]

use libfuzzer_sys::fuzz_target;
use spkver::eval::{Condition, ConditionPair};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = text.parse::<Condition>() {
        assert_eq!(c.to_string().parse::<Condition>().unwrap(), c);
    }
    if let Ok(p) = ConditionPair::parse(text, None) {
        assert_eq!(ConditionPair::parse(&p.to_string(), None).unwrap(), p);
    }
    let _ = ConditionPair::parse_list(text, Some("S4c"));
});
