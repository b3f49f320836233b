//! Built-in scenarios. The TOML sources live in `scenarios/` and can be
//! copied and edited as starting points.

use super::config::ScenarioConfig;

pub const LATENCY_SWEEP: &str = include_str!("../../scenarios/latency_sweep.toml");
pub const INSTABILITY: &str = include_str!("../../scenarios/instability.toml");
pub const RANGE_OF_MOTION: &str = include_str!("../../scenarios/range_of_motion.toml");
pub const HEAD_TURN: &str = include_str!("../../scenarios/head_turn.toml");
pub const TURN_BEYOND_SCANNED: &str = include_str!("../../scenarios/turn_beyond_scanned.toml");

pub const ALL: [(&str, &str); 5] = [
    ("latency_sweep", LATENCY_SWEEP),
    ("instability", INSTABILITY),
    ("range_of_motion", RANGE_OF_MOTION),
    ("head_turn", HEAD_TURN),
    ("turn_beyond_scanned", TURN_BEYOND_SCANNED),
];

fn parse(text: &str) -> ScenarioConfig {
    ScenarioConfig::from_toml_str(text).expect("built-in scenario is valid")
}

pub fn by_name(name: &str) -> Option<ScenarioConfig> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, t)| parse(t))
}

pub fn latency_sweep() -> ScenarioConfig {
    parse(LATENCY_SWEEP)
}

pub fn instability() -> ScenarioConfig {
    parse(INSTABILITY)
}

pub fn range_of_motion() -> ScenarioConfig {
    parse(RANGE_OF_MOTION)
}

pub fn head_turn() -> ScenarioConfig {
    parse(HEAD_TURN)
}

pub fn turn_beyond_scanned() -> ScenarioConfig {
    parse(TURN_BEYOND_SCANNED)
}
