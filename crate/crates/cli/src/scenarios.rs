//! Built-in systems, embedded at compile time.

use serde::Serialize;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Scenario {
    pub name: &'static str,
    pub description: &'static str,
    #[serde(skip)]
    pub source: &'static str,
}

macro_rules! scenario {
    ($name:literal, $desc:literal) => {
        Scenario { name: $name, description: $desc, source: include_str!(concat!("scenarios/", $name, ".json")) }
    };
}

pub const SCENARIOS: [Scenario; 5] = [
    scenario!("paper_example", "two-dimensional impulsive system with non-local history, R = 100"),
    scenario!("linear_homogeneous", "damped rotation z' = A z, no drift"),
    scenario!("pure_delay", "scalar z'(t) = z(t - 1) with history 1"),
    scenario!("riccati_blowup", "scalar z' = z^2 from 2, escapes at t = 0.5"),
    scenario!("rotation_matrix", "undamped rotation over one period"),
];

pub fn find(name: &str) -> Option<&'static Scenario> {
    SCENARIOS.iter().find(|s| s.name == name)
}
