#![no_main]

use libfuzzer_sys::fuzz_target;
use netmas::planner::{parse_plan_text, render_plan_text};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(plan) = parse_plan_text(text) else { return };
    // Whatever parses must survive a render and parse again unchanged.
    let rendered = render_plan_text(&plan.reasoning, &plan.steps);
    let again = parse_plan_text(&rendered).expect("rendered plan parses");
    assert_eq!(again.steps, plan.steps);
    assert_eq!(again.reasoning, plan.reasoning);
});
