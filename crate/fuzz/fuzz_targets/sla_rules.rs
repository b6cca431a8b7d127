#![no_main]

use libfuzzer_sys::fuzz_target;
use netmas::detect::parse_sla_rules;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rules) = parse_sla_rules(text) {
        for r in &rules {
            assert!(r.sustain > 0 && r.threshold.is_finite());
        }
    }
});
