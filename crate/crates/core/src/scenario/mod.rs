//! The scenario configuration language.
//!
//! A scenario document declares the floorplan, the devices and their
//! properties, automation rules, timed and event-driven triggers, participant
//! tasks, explanation templates and the explanation delivery configuration.
//! Documents go through three stages:
//!
//! 1. [`parse_scenario`] turns JSON text into a typed [`ScenarioSpec`],
//!    rejecting syntax errors, type mismatches and unknown fields with a path.
//! 2. [`validate_scenario`] checks every structural and referential
//!    invariant and reports all violations at once.
//! 3. [`compile`] builds the indexed [`CompiledScenario`] used at runtime.

mod compile;
pub mod condition;
mod parse;
pub mod template;
mod validate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::literal::{Literal, LiteralKind};

pub use compile::{compile, CompileError, CompiledScenario, Slot, SlotTable, SlotTarget};
pub(crate) use compile::seconds_to_ms;
pub use condition::{
    compile_condition, CheckedCondition, CmpOp, ConditionError, ConditionExpr, Operand,
};
pub use parse::{parse_scenario, to_json, ParseError};
pub use validate::{validate_scenario, Issue, Severity, ValidationReport};

/// Current (and only) supported value of the top-level `schemaVersion` field.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScenarioSpec {
    pub schema_version: u32,
    pub id: String,
    pub name: String,
    pub rooms: Vec<RoomSpec>,
    #[serde(default)]
    pub devices: Vec<DeviceSpec>,
    #[serde(default)]
    pub rules: Vec<RuleSpec>,
    #[serde(default)]
    pub triggers: Vec<TriggerSpec>,
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub explanations: Vec<ExplanationSpec>,
    #[serde(default)]
    pub context_defaults: BTreeMap<String, Literal>,
    pub explanation_config: ExplanationConfig,
}

/// Integer tile coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TilePos {
    pub x: i64,
    pub y: i64,
}

/// Axis-aligned rectangle in tile units; covers `x..x+width` by `y..y+height`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub x: i64,
    pub y: i64,
    pub width: i64,
    pub height: i64,
}

impl Bounds {
    pub fn contains(&self, p: TilePos) -> bool {
        p.x >= self.x && p.x < self.x + self.width && p.y >= self.y && p.y < self.y + self.height
    }

    /// True when `p` is one of the outermost tiles of the rectangle.
    pub fn on_boundary(&self, p: TilePos) -> bool {
        self.contains(p)
            && (p.x == self.x
                || p.x == self.x + self.width - 1
                || p.y == self.y
                || p.y == self.y + self.height - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RoomSpec {
    pub id: String,
    pub bounds: Bounds,
    #[serde(default)]
    pub doors: Vec<DoorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DoorSpec {
    pub target: String,
    pub position: TilePos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DeviceSpec {
    pub id: String,
    #[serde(rename = "type")]
    pub device_type: String,
    pub room_id: String,
    pub position: TilePos,
    #[serde(default)]
    pub properties: Vec<PropertySpec>,
}

impl DeviceSpec {
    pub fn property(&self, name: &str) -> Option<&PropertySpec> {
        self.properties.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PropertySpec {
    pub name: String,
    pub kind: PropertyKind,
    pub initial: Literal,
    #[serde(default)]
    pub user_writable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub widget_hint: Option<WidgetHint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", deny_unknown_fields)]
pub enum PropertyKind {
    Boolean {},
    Enumeration { values: Vec<String> },
    Numeric { min: f64, max: f64, step: f64 },
}

/// Relative tolerance for step-grid membership of numeric values.
const GRID_EPS: f64 = 1e-9;

pub(crate) fn on_grid(offset: f64, step: f64) -> bool {
    let k = offset / step;
    (k - k.round()).abs() <= GRID_EPS * k.abs().max(1.0)
}

impl PropertyKind {
    pub fn literal_kind(&self) -> LiteralKind {
        match self {
            PropertyKind::Boolean {} => LiteralKind::Boolean,
            PropertyKind::Enumeration { .. } => LiteralKind::String,
            PropertyKind::Numeric { .. } => LiteralKind::Numeric,
        }
    }

    /// Whether `value` lies in the property's domain.
    pub fn contains(&self, value: &Literal) -> bool {
        match (self, value) {
            (PropertyKind::Boolean {}, Literal::Bool(_)) => true,
            (PropertyKind::Enumeration { values }, Literal::Str(s)) => values.contains(s),
            (PropertyKind::Numeric { min, max, step }, Literal::Num(v)) => {
                v.is_finite()
                    && *v >= *min - GRID_EPS
                    && *v <= *max + GRID_EPS
                    && *step > 0.0
                    && on_grid(*v - *min, *step)
            }
            _ => false,
        }
    }

    /// The widget a client renders when no hint is given.
    pub fn default_widget(&self) -> WidgetHint {
        match self {
            PropertyKind::Boolean {} => WidgetHint::Toggle,
            PropertyKind::Enumeration { .. } => WidgetHint::Dropdown,
            PropertyKind::Numeric { .. } => WidgetHint::Slider,
        }
    }

    pub fn accepts_widget(&self, hint: WidgetHint) -> bool {
        matches!(
            (self, hint),
            (PropertyKind::Boolean {}, WidgetHint::Toggle)
                | (PropertyKind::Enumeration { .. }, WidgetHint::Dropdown | WidgetHint::Radio)
                | (PropertyKind::Numeric { .. }, WidgetHint::Slider | WidgetHint::Stepper)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum WidgetHint {
    Toggle,
    Dropdown,
    Radio,
    Slider,
    Stepper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RuleKind {
    Action,
    Constraint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RuleSpec {
    pub id: String,
    pub kind: RuleKind,
    pub condition: ConditionExpr,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub actions: Vec<ActionSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub blocks: Vec<BlockSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation_id: Option<String>,
    /// Lower runs first. Defaults to the rule's position in the document.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priority: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ActionSpec {
    pub device_id: String,
    pub property: String,
    pub value: Literal,
}

/// A device write that a constraint rule forbids while its condition holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BlockSpec {
    pub device_id: String,
    pub property: String,
    /// When absent, every write to the property is covered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocked_value: Option<Literal>,
}

impl BlockSpec {
    pub fn covers(&self, device_id: &str, property: &str, value: &Literal) -> bool {
        self.device_id == device_id
            && self.property == property
            && self.blocked_value.as_ref().is_none_or(|v| v == value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TriggerSpec {
    pub id: String,
    pub when: TriggerWhen,
    pub effects: Vec<EffectSpec>,
    #[serde(default)]
    pub one_shot: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub enum TriggerWhen {
    /// Seconds since session start.
    AtTime(f64),
    AfterEvent(AfterEventSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AfterEventSpec {
    pub event_type: TriggerEventType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device_id: Option<String>,
    pub delay_seconds: f64,
}

/// Session events a trigger can follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TriggerEventType {
    /// A participant write that changed a device value.
    DeviceInteraction,
    /// A participant write rejected by a constraint rule.
    InteractionBlocked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub enum EffectSpec {
    SetDevice(ActionSpec),
    SetContext(ContextSet),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ContextSet {
    pub name: String,
    pub value: Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TaskSpec {
    pub id: String,
    pub description: String,
    pub goal: ConditionExpr,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depends_on: Option<String>,
    #[serde(default)]
    pub abortable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExplanationSpec {
    pub id: String,
    /// Text with `{{device.<id>.<prop>}}` and `{{context.<name>}}` placeholders.
    /// For external explanations this is the fallback text.
    pub template: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub follow_ups: Vec<FollowUpSpec>,
    #[serde(default)]
    pub external: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FollowUpSpec {
    pub keywords: Vec<String>,
    pub explanation_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DeliveryMode {
    Push,
    Pull,
    Interactive,
}

impl std::fmt::Display for DeliveryMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DeliveryMode::Push => "push",
            DeliveryMode::Pull => "pull",
            DeliveryMode::Interactive => "interactive",
        })
    }
}

impl std::str::FromStr for DeliveryMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "push" => Ok(DeliveryMode::Push),
            "pull" => Ok(DeliveryMode::Pull),
            "interactive" => Ok(DeliveryMode::Interactive),
            other => Err(format!("unknown delivery mode `{other}`")),
        }
    }
}

pub const DEFAULT_ENGINE_TIMEOUT_MS: u64 = 2000;

fn default_engine_timeout() -> u64 {
    DEFAULT_ENGINE_TIMEOUT_MS
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExplanationConfig {
    pub default_delivery_mode: DeliveryMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine_endpoint: Option<EngineEndpoint>,
    #[serde(default = "default_engine_timeout")]
    pub engine_timeout_ms: u64,
    /// In pull mode, send an `explanation_available` notice when an
    /// explanation is held for the participant.
    #[serde(default = "default_true")]
    pub notify_availability: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct EngineEndpoint {
    pub url: String,
    pub transport: EngineTransport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EngineTransport {
    Rest,
    Websocket,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_domain_uses_step_grid() {
        let k = PropertyKind::Numeric { min: 5.0, max: 30.0, step: 0.5 };
        assert!(k.contains(&Literal::Num(5.0)));
        assert!(k.contains(&Literal::Num(15.5)));
        assert!(k.contains(&Literal::Num(30.0)));
        assert!(!k.contains(&Literal::Num(15.25)));
        assert!(!k.contains(&Literal::Num(30.5)));
        assert!(!k.contains(&Literal::Num(f64::NAN)));
        assert!(!k.contains(&Literal::Bool(true)));
        let k = PropertyKind::Numeric { min: 0.0, max: 1.0, step: 0.1 };
        assert!(k.contains(&Literal::Num(0.7)));
        assert!(k.contains(&Literal::Num(0.1 + 0.2)));
    }

    #[test]
    fn bounds_boundary() {
        let b = Bounds { x: 0, y: 0, width: 3, height: 3 };
        assert!(b.on_boundary(TilePos { x: 0, y: 1 }));
        assert!(b.on_boundary(TilePos { x: 2, y: 2 }));
        assert!(!b.on_boundary(TilePos { x: 1, y: 1 }));
        assert!(!b.on_boundary(TilePos { x: 3, y: 1 }));
        let single = Bounds { x: 4, y: 4, width: 1, height: 1 };
        assert!(single.on_boundary(TilePos { x: 4, y: 4 }));
    }

    #[test]
    fn block_without_value_covers_everything() {
        let b = BlockSpec { device_id: "h".into(), property: "p".into(), blocked_value: None };
        assert!(b.covers("h", "p", &Literal::Bool(false)));
        assert!(!b.covers("h", "q", &Literal::Bool(false)));
        let b = BlockSpec { blocked_value: Some(Literal::Bool(false)), ..b };
        assert!(!b.covers("h", "p", &Literal::Bool(true)));
    }

    #[test]
    fn widget_compatibility() {
        assert!(PropertyKind::Boolean {}.accepts_widget(WidgetHint::Toggle));
        assert!(!PropertyKind::Boolean {}.accepts_widget(WidgetHint::Slider));
        let e = PropertyKind::Enumeration { values: vec!["a".into(), "b".into()] };
        assert!(e.accepts_widget(WidgetHint::Radio));
        assert_eq!(e.default_widget(), WidgetHint::Dropdown);
    }
}
