use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TaskState;
use crate::literal::Literal;

/// Immutable, serializable copy of a world's observable state.
///
/// Maps are ordered, so two snapshots are equal iff their JSON forms are
/// byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StateSnapshot {
    pub devices: BTreeMap<String, BTreeMap<String, Literal>>,
    pub context: BTreeMap<String, Literal>,
    pub clock_ms: u64,
    pub tasks: BTreeMap<String, TaskState>,
}

impl StateSnapshot {
    pub fn device_value(&self, device_id: &str, property: &str) -> Option<&Literal> {
        self.devices.get(device_id)?.get(property)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshots always serialize")
    }
}
