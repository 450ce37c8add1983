//! Shipped experiment presets. The TOML sources live in `presets/` and are
//! the reference for the desk-scale settings; see the comments in each file.

use super::config::ExperimentConfig;

pub const DESK_LT10: &str = include_str!("../../presets/desk_lt10.toml");
pub const BINARY_ANOMALY: &str = include_str!("../../presets/binary_anomaly.toml");

/// `(name, toml source)` for every preset.
pub const ALL: [(&str, &str); 2] = [("desk_lt10", DESK_LT10), ("binary_anomaly", BINARY_ANOMALY)];

pub fn load(name: &str) -> Option<ExperimentConfig> {
    ALL.iter()
        .find(|(n, _)| *n == name)
        .map(|(_, src)| ExperimentConfig::from_toml_str(src).expect("shipped preset parses"))
}

pub fn desk_lt10() -> ExperimentConfig {
    load("desk_lt10").expect("preset exists")
}

pub fn binary_anomaly() -> ExperimentConfig {
    load("binary_anomaly").expect("preset exists")
}
