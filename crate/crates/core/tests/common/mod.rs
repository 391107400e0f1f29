#![allow(dead_code)]

use std::path::PathBuf;

use qident::sim::SimConfig;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

pub fn load(name: &str) -> SimConfig {
    SimConfig::from_path(&config_path(name)).expect("shipped config parses")
}
