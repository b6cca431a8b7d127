//! Scenario files: a JSON object with the [`FaultSpec`] field names.
//!
//! ```json
//! { "scenario": "ran_input_power_failure", "target_nodes": ["rru-7"],
//!   "window": [1700001000, 1700001900], "magnitude": 1.0, "seed": 42 }
//! ```
//!
//! `window` may also be written as `{"start": .., "end": ..}`. `magnitude`
//! defaults to 1.0 and `seed` to 0.

use serde::Deserialize;

use super::{FaultSpec, ScenarioKind, TelemetryError};
use crate::time::Window;

#[derive(Deserialize)]
#[serde(untagged)]
enum WindowRepr {
    Pair([i64; 2]),
    Object { start: i64, end: i64 },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    scenario: String,
    target_nodes: Vec<String>,
    window: WindowRepr,
    #[serde(default = "default_magnitude")]
    magnitude: f64,
    #[serde(default)]
    seed: u64,
}

fn default_magnitude() -> f64 {
    1.0
}

/// Parses and structurally validates a scenario document. Topology checks
/// happen when the `FaultSpec` is handed to a simulator.
pub fn parse_scenario(text: &str) -> Result<FaultSpec, TelemetryError> {
    let file: ScenarioFile =
        serde_json::from_str(text).map_err(|e| TelemetryError::MalformedScenario(e.to_string()))?;
    let scenario = ScenarioKind::parse(&file.scenario)
        .ok_or_else(|| TelemetryError::UnknownScenario(file.scenario.clone()))?;
    let window = match file.window {
        WindowRepr::Pair([start, end]) => Window::new(start, end),
        WindowRepr::Object { start, end } => Window::new(start, end),
    };
    if window.start >= window.end {
        return Err(TelemetryError::InvalidWindow {
            start: window.start,
            end: window.end,
        });
    }
    if file.target_nodes.is_empty() {
        return Err(TelemetryError::EmptyTargets);
    }
    if !file.magnitude.is_finite() || file.magnitude < 0.0 {
        return Err(TelemetryError::InvalidMagnitude(file.magnitude));
    }
    Ok(FaultSpec {
        scenario,
        target_nodes: file.target_nodes,
        window,
        magnitude: file.magnitude,
        seed: file.seed,
    })
}

pub fn render_scenario(spec: &FaultSpec) -> String {
    serde_json::to_string_pretty(spec).expect("fault spec serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_window_forms() {
        let a = parse_scenario(
            r#"{"scenario":"ran_input_power_failure","target_nodes":["rru-7"],"window":[10,20],"seed":3}"#,
        )
        .unwrap();
        let b = parse_scenario(
            r#"{"scenario":"ran_input_power_failure","target_nodes":["rru-7"],"window":{"start":10,"end":20},"magnitude":1.0,"seed":3}"#,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rendered_spec_parses_back() {
        let spec = FaultSpec::reference(ScenarioKind::CorePduDegradation, 9);
        assert_eq!(parse_scenario(&render_scenario(&spec)).unwrap(), spec);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse_scenario(r#"{"scenario":"meteor_strike","target_nodes":["a"],"window":[1,2]}"#),
            Err(TelemetryError::UnknownScenario(s)) if s == "meteor_strike"
        ));
        assert!(matches!(
            parse_scenario(r#"{"scenario":"core_pdu_degradation","target_nodes":["a"],"window":[2,2]}"#),
            Err(TelemetryError::InvalidWindow { .. })
        ));
        assert!(matches!(parse_scenario("{"), Err(TelemetryError::MalformedScenario(_))));
    }
}
