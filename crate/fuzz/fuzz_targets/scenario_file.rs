#![no_main]

use libfuzzer_sys::fuzz_target;
use netmas::telemetry::scenario::{parse_scenario, render_scenario};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = parse_scenario(text) {
        assert_eq!(parse_scenario(&render_scenario(&spec)).as_ref(), Ok(&spec));
    }
});
