#![allow(dead_code)]

pub mod oracle;

use std::sync::Arc;

use shine_core::scenario::{compile, parse_scenario, CompiledScenario};

pub const HEATER_WINDOW: &[u8] = include_bytes!("../../../../scenarios/heater-window.scenario.json");

pub fn heater_window() -> Arc<CompiledScenario> {
    Arc::new(compile(parse_scenario(HEATER_WINDOW).unwrap()).unwrap())
}
