use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::condition::{check_condition, CheckedCondition};
use super::template::{parse_template, Segment};
use super::{
    validate_scenario, EffectSpec, PropertyKind, RuleKind, ScenarioSpec, TriggerEventType,
    TriggerWhen, ValidationReport,
};
use crate::literal::{Literal, LiteralKind};

/// What a world-state slot holds.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum SlotTarget {
    #[serde(rename_all = "camelCase")]
    Device { device_id: String, property: String },
    Context { name: String },
}

impl std::fmt::Display for SlotTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SlotTarget::Device { device_id, property } => write!(f, "device.{device_id}.{property}"),
            SlotTarget::Context { name } => write!(f, "context.{name}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub target: SlotTarget,
    pub kind: LiteralKind,
    /// Property domain; `None` for context variables (typed by their default).
    pub domain: Option<PropertyKind>,
    pub initial: Literal,
    pub user_writable: bool,
    /// Render booleans as on/off (toggle-style properties).
    pub on_off: bool,
    pub decimals: usize,
}

impl Slot {
    pub fn accepts(&self, value: &Literal) -> bool {
        match &self.domain {
            Some(kind) => kind.contains(value),
            None => value.kind() == self.kind && value.as_f64().is_none_or(f64::is_finite),
        }
    }
}

/// Dense numbering of every device property and context variable.
///
/// Device properties come first in document order, then context variables
/// in name order. Duplicate ids resolve to their first definition.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SlotTable {
    slots: Vec<Slot>,
    devices: HashMap<String, HashMap<String, usize>>,
    context: HashMap<String, usize>,
}

impl SlotTable {
    pub fn build(spec: &ScenarioSpec) -> Self {
        let mut table = SlotTable::default();
        for device in &spec.devices {
            if table.devices.contains_key(&device.id) {
                continue;
            }
            let mut props = HashMap::new();
            for prop in &device.properties {
                if props.contains_key(&prop.name) {
                    continue;
                }
                let decimals = match prop.kind {
                    PropertyKind::Numeric { step, .. } => crate::literal::decimals_of(step),
                    _ => 0,
                };
                let on_off = matches!(prop.kind, PropertyKind::Boolean {})
                    && prop.widget_hint == Some(super::WidgetHint::Toggle);
                props.insert(prop.name.clone(), table.slots.len());
                table.slots.push(Slot {
                    target: SlotTarget::Device {
                        device_id: device.id.clone(),
                        property: prop.name.clone(),
                    },
                    kind: prop.kind.literal_kind(),
                    domain: Some(prop.kind.clone()),
                    initial: prop.initial.clone(),
                    user_writable: prop.user_writable,
                    on_off,
                    decimals,
                });
            }
            table.devices.insert(device.id.clone(), props);
        }
        for (name, default) in &spec.context_defaults {
            table.context.insert(name.clone(), table.slots.len());
            table.slots.push(Slot {
                target: SlotTarget::Context { name: name.clone() },
                kind: default.kind(),
                domain: None,
                initial: default.clone(),
                user_writable: false,
                on_off: false,
                decimals: 6,
            });
        }
        table
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slot(&self, index: usize) -> &Slot {
        &self.slots[index]
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn device_slot(&self, device_id: &str, property: &str) -> Option<usize> {
        self.devices.get(device_id)?.get(property).copied()
    }

    pub fn has_device(&self, device_id: &str) -> bool {
        self.devices.contains_key(device_id)
    }

    pub fn context_slot(&self, name: &str) -> Option<usize> {
        self.context.get(name).copied()
    }

    pub fn slot_kind(&self, index: usize) -> LiteralKind {
        self.slots[index].kind
    }

    pub fn slot_domain(&self, index: usize) -> Option<&PropertyKind> {
        self.slots[index].domain.as_ref()
    }

    pub fn resolve(&self, target: &SlotTarget) -> Option<usize> {
        match target {
            SlotTarget::Device { device_id, property } => self.device_slot(device_id, property),
            SlotTarget::Context { name } => self.context_slot(name),
        }
    }
}

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("scenario failed validation with {} error(s)", .0.error_count())]
    Invalid(ValidationReport),
}

/// An action rule ready for evaluation.
#[derive(Debug, Clone)]
pub struct CompiledRule {
    /// Index into `spec.rules`.
    pub index: usize,
    pub condition: CheckedCondition,
    pub writes: Vec<(usize, Literal)>,
}

#[derive(Debug, Clone)]
pub struct CompiledTrigger {
    pub index: usize,
    pub writes: Vec<(usize, Literal)>,
}

/// A validated scenario plus the lookup structures the simulation needs.
#[derive(Debug, Clone)]
pub struct CompiledScenario {
    spec: ScenarioSpec,
    slots: SlotTable,
    rooms: HashMap<String, usize>,
    devices: HashMap<String, usize>,
    rules: HashMap<String, usize>,
    triggers: HashMap<String, usize>,
    tasks: HashMap<String, usize>,
    explanations: HashMap<String, usize>,
    rule_order: Vec<usize>,
    conditions: Vec<CheckedCondition>,
    action_rules: Vec<CompiledRule>,
    action_rules_by_slot: Vec<Vec<usize>>,
    constraints_by_device: HashMap<String, Vec<usize>>,
    compiled_triggers: Vec<CompiledTrigger>,
    timed_triggers: Vec<(u64, usize)>,
    triggers_by_event: HashMap<TriggerEventType, Vec<usize>>,
    task_goals: Vec<CheckedCondition>,
    task_order: Vec<usize>,
    task_dependents: Vec<Vec<usize>>,
    templates: Vec<Vec<(Segment, Option<usize>)>>,
}

pub(crate) fn seconds_to_ms(s: f64) -> u64 {
    (s * 1000.0).round().max(0.0) as u64
}

/// Builds the indexed form of a scenario; fails when validation reports errors.
pub fn compile(spec: ScenarioSpec) -> Result<CompiledScenario, CompileError> {
    let report = validate_scenario(&spec);
    if !report.ok {
        return Err(CompileError::Invalid(report));
    }
    let slots = SlotTable::build(&spec);
    let index = |ids: Vec<&String>| -> HashMap<String, usize> {
        ids.into_iter().enumerate().map(|(i, id)| (id.clone(), i)).collect()
    };
    let rooms = index(spec.rooms.iter().map(|r| &r.id).collect());
    let devices = index(spec.devices.iter().map(|d| &d.id).collect());
    let rules = index(spec.rules.iter().map(|r| &r.id).collect());
    let triggers = index(spec.triggers.iter().map(|t| &t.id).collect());
    let tasks = index(spec.tasks.iter().map(|t| &t.id).collect());
    let explanations = index(spec.explanations.iter().map(|e| &e.id).collect());

    let check = |e| check_condition(e, &slots).expect("validated condition");
    let conditions: Vec<CheckedCondition> = spec.rules.iter().map(|r| check(&r.condition)).collect();

    let mut rule_order: Vec<usize> = (0..spec.rules.len()).collect();
    rule_order.sort_by_key(|&i| (spec.rules[i].priority.unwrap_or(i as i64), i));

    let slot_of = |device: &str, prop: &str| slots.device_slot(device, prop).expect("validated ref");
    let mut action_rules = Vec::new();
    let mut action_rules_by_slot = vec![Vec::new(); slots.len()];
    let mut constraints_by_device: HashMap<String, Vec<usize>> = HashMap::new();
    for &i in &rule_order {
        let rule = &spec.rules[i];
        match rule.kind {
            RuleKind::Action => {
                let position = action_rules.len();
                for &s in conditions[i].slots() {
                    action_rules_by_slot[s].push(position);
                }
                action_rules.push(CompiledRule {
                    index: i,
                    condition: conditions[i].clone(),
                    writes: rule
                        .actions
                        .iter()
                        .map(|a| (slot_of(&a.device_id, &a.property), a.value.clone()))
                        .collect(),
                });
            }
            RuleKind::Constraint => {
                for block in &rule.blocks {
                    let list = constraints_by_device.entry(block.device_id.clone()).or_default();
                    if !list.contains(&i) {
                        list.push(i);
                    }
                }
            }
        }
    }

    let mut compiled_triggers = Vec::new();
    let mut timed_triggers = Vec::new();
    let mut triggers_by_event: HashMap<TriggerEventType, Vec<usize>> = HashMap::new();
    for (i, trigger) in spec.triggers.iter().enumerate() {
        let writes = trigger
            .effects
            .iter()
            .map(|e| match e {
                EffectSpec::SetDevice(a) => (slot_of(&a.device_id, &a.property), a.value.clone()),
                EffectSpec::SetContext(c) => {
                    (slots.context_slot(&c.name).expect("validated ref"), c.value.clone())
                }
            })
            .collect();
        compiled_triggers.push(CompiledTrigger { index: i, writes });
        match &trigger.when {
            TriggerWhen::AtTime(s) => timed_triggers.push((seconds_to_ms(*s), i)),
            TriggerWhen::AfterEvent(ev) => {
                triggers_by_event.entry(ev.event_type).or_default().push(i)
            }
        }
    }
    timed_triggers.sort();

    let task_goals: Vec<CheckedCondition> = spec.tasks.iter().map(|t| check(&t.goal)).collect();
    let mut task_dependents = vec![Vec::new(); spec.tasks.len()];
    for (i, task) in spec.tasks.iter().enumerate() {
        if let Some(dep) = &task.depends_on {
            task_dependents[tasks[dep]].push(i);
        }
    }
    // Kahn's algorithm; ties keep document order.
    let mut task_order = Vec::with_capacity(spec.tasks.len());
    let mut ready: Vec<usize> =
        (0..spec.tasks.len()).filter(|&i| spec.tasks[i].depends_on.is_none()).collect();
    while !ready.is_empty() {
        ready.sort_unstable_by(|a, b| b.cmp(a));
        let next = ready.pop().expect("non-empty");
        task_order.push(next);
        ready.extend(task_dependents[next].iter().copied());
    }

    let templates = spec
        .explanations
        .iter()
        .map(|e| {
            parse_template(&e.template)
                .expect("validated template")
                .into_iter()
                .map(|seg| {
                    let slot = match &seg {
                        Segment::Ref(super::Operand::Device { device_id, property }) => {
                            slots.device_slot(device_id, property)
                        }
                        Segment::Ref(super::Operand::Context(name)) => slots.context_slot(name),
                        _ => None,
                    };
                    (seg, slot)
                })
                .collect()
        })
        .collect();

    Ok(CompiledScenario {
        spec,
        slots,
        rooms,
        devices,
        rules,
        triggers,
        tasks,
        explanations,
        rule_order,
        conditions,
        action_rules,
        action_rules_by_slot,
        constraints_by_device,
        compiled_triggers,
        timed_triggers,
        triggers_by_event,
        task_goals,
        task_order,
        task_dependents,
        templates,
    })
}

impl CompiledScenario {
    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn id(&self) -> &str {
        &self.spec.id
    }

    pub fn slots(&self) -> &SlotTable {
        &self.slots
    }

    pub fn room_index(&self, id: &str) -> Option<usize> {
        self.rooms.get(id).copied()
    }

    pub fn device_index(&self, id: &str) -> Option<usize> {
        self.devices.get(id).copied()
    }

    pub fn rule_index(&self, id: &str) -> Option<usize> {
        self.rules.get(id).copied()
    }

    pub fn trigger_index(&self, id: &str) -> Option<usize> {
        self.triggers.get(id).copied()
    }

    pub fn task_index(&self, id: &str) -> Option<usize> {
        self.tasks.get(id).copied()
    }

    pub fn explanation_index(&self, id: &str) -> Option<usize> {
        self.explanations.get(id).copied()
    }

    /// Rule indices ordered by (priority, document order).
    pub fn rule_order(&self) -> &[usize] {
        &self.rule_order
    }

    pub fn rule_condition(&self, rule: usize) -> &CheckedCondition {
        &self.conditions[rule]
    }

    /// Action rules in compiled order.
    pub fn action_rules(&self) -> &[CompiledRule] {
        &self.action_rules
    }

    /// Positions in [`Self::action_rules`] whose condition reads `slot`, ascending.
    pub fn action_rules_reading(&self, slot: usize) -> &[usize] {
        &self.action_rules_by_slot[slot]
    }

    /// Constraint rules (indices into `spec.rules`, compiled order) with a block entry on `device_id`.
    pub fn constraints_for_device(&self, device_id: &str) -> &[usize] {
        self.constraints_by_device.get(device_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn trigger(&self, index: usize) -> &CompiledTrigger {
        &self.compiled_triggers[index]
    }

    /// `(deadline ms, trigger index)` for every `atTime` trigger, ascending.
    pub fn timed_triggers(&self) -> &[(u64, usize)] {
        &self.timed_triggers
    }

    pub fn triggers_for_event(&self, event: TriggerEventType) -> &[usize] {
        self.triggers_by_event.get(&event).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn task_goal(&self, task: usize) -> &CheckedCondition {
        &self.task_goals[task]
    }

    /// Task indices in dependency order.
    pub fn task_order(&self) -> &[usize] {
        &self.task_order
    }

    pub fn task_dependents(&self, task: usize) -> &[usize] {
        &self.task_dependents[task]
    }

    pub(crate) fn template(&self, explanation: usize) -> &[(Segment, Option<usize>)] {
        &self.templates[explanation]
    }

    /// Device ids that an action rule or trigger writes to.
    pub fn devices_written_by_rule(&self, rule: usize) -> Vec<&str> {
        let mut out: Vec<&str> =
            self.spec.rules[rule].actions.iter().map(|a| a.device_id.as_str()).collect();
        out.dedup();
        out
    }

    pub fn context_defaults(&self) -> &BTreeMap<String, Literal> {
        &self.spec.context_defaults
    }
}
