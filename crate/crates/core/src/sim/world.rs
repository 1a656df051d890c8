use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::StateSnapshot;
use crate::literal::Literal;
use crate::scenario::{seconds_to_ms, CompiledScenario, SlotTarget, TriggerEventType, TriggerWhen};

pub const DEFAULT_CASCADE_LIMIT: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TaskStatus {
    Locked,
    Active,
    Completed,
    TimedOut,
    Aborted,
}

impl TaskStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, TaskStatus::Completed | TaskStatus::TimedOut | TaskStatus::Aborted)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskState {
    pub status: TaskStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ended_at_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum MutationCause {
    #[serde(rename_all = "camelCase")]
    UserInteraction { event_id: u64 },
    #[serde(rename_all = "camelCase")]
    RuleFired { rule_id: String, depth: u32 },
    #[serde(rename_all = "camelCase")]
    TriggerFired { trigger_id: String },
    SessionInit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StateDelta {
    pub target: SlotTarget,
    pub old_value: Literal,
    pub new_value: Literal,
    pub cause: MutationCause,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskChange {
    pub task_id: String,
    pub from: TaskStatus,
    pub to: TaskStatus,
    pub at_ms: u64,
}

/// One observable step of a simulation operation, in application order.
///
/// `RuleFired` and `TriggerFired` precede the deltas they cause.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum SimEvent {
    Changed(StateDelta),
    #[serde(rename_all = "camelCase")]
    RuleFired { rule_id: String, depth: u32 },
    #[serde(rename_all = "camelCase")]
    TriggerFired { trigger_id: String, deadline_ms: u64 },
    TaskChanged(TaskChange),
    /// The fixpoint hit the cascade limit with rules still due to fire.
    CascadeTruncated { depth: u32 },
}

impl SimEvent {
    pub fn as_delta(&self) -> Option<&StateDelta> {
        match self {
            SimEvent::Changed(d) => Some(d),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InteractionOutcome {
    /// Events in application order; empty for a write of the current value.
    Committed(Vec<SimEvent>),
    Blocked { rule_id: String, explanation_id: Option<String> },
}

impl InteractionOutcome {
    pub fn is_blocked(&self) -> bool {
        matches!(self, InteractionOutcome::Blocked { .. })
    }

    pub fn deltas(&self) -> Vec<&StateDelta> {
        match self {
            InteractionOutcome::Committed(events) => events.iter().filter_map(SimEvent::as_delta).collect(),
            InteractionOutcome::Blocked { .. } => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("device `{device_id}` has no property `{property}`")]
    UnknownProperty { device_id: String, property: String },
    #[error("property `{0}` is not user-writable")]
    NotWritable(String),
    #[error("value {value} is outside the domain of `{target}`")]
    OutOfDomain { target: String, value: String },
    #[error("unknown context variable `{0}`")]
    UnknownContextVariable(String),
    #[error("clock cannot move backwards from {from} ms to {to} ms")]
    ClockRegression { from: u64, to: u64 },
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("task `{0}` is not active")]
    TaskNotActive(String),
    #[error("task `{0}` is not abortable")]
    TaskNotAbortable(String),
}

/// Live state of one session.
#[derive(Debug, Clone)]
pub struct WorldState {
    scenario: Arc<CompiledScenario>,
    values: Vec<Literal>,
    clock_ms: u64,
    tasks: Vec<TaskState>,
    fired_one_shot: BTreeSet<usize>,
    /// Scheduled event-driven firings: (deadline, trigger index, schedule serial).
    pending: BTreeSet<(u64, usize, u64)>,
    next_serial: u64,
    /// Position in `scenario.timed_triggers()` of the next unfired entry.
    next_timed: usize,
    cascade_limit: u32,
}

impl WorldState {
    pub fn scenario(&self) -> &Arc<CompiledScenario> {
        &self.scenario
    }

    pub fn clock_ms(&self) -> u64 {
        self.clock_ms
    }

    pub fn values(&self) -> &[Literal] {
        &self.values
    }

    pub fn value(&self, target: &SlotTarget) -> Option<&Literal> {
        self.scenario.slots().resolve(target).map(|s| &self.values[s])
    }

    pub fn device_value(&self, device_id: &str, property: &str) -> Option<&Literal> {
        self.scenario.slots().device_slot(device_id, property).map(|s| &self.values[s])
    }

    pub fn context_value(&self, name: &str) -> Option<&Literal> {
        self.scenario.slots().context_slot(name).map(|s| &self.values[s])
    }

    pub fn task_state(&self, task_id: &str) -> Option<&TaskState> {
        self.scenario.task_index(task_id).map(|t| &self.tasks[t])
    }

    pub fn fired_one_shot(&self) -> impl Iterator<Item = &str> {
        self.fired_one_shot.iter().map(|&t| self.scenario.spec().triggers[t].id.as_str())
    }

    pub fn cascade_limit(&self) -> u32 {
        self.cascade_limit
    }

    pub fn set_cascade_limit(&mut self, limit: u32) {
        self.cascade_limit = limit.max(1);
    }

    /// Earliest pending trigger deadline, if any.
    pub fn next_deadline(&self) -> Option<u64> {
        let timed = self.scenario.timed_triggers().get(self.next_timed).map(|&(ms, _)| ms);
        let pending = self.pending.first().map(|&(ms, _, _)| ms);
        let timeout = self.next_timeout().map(|(ms, _)| ms);
        [timed, pending, timeout].into_iter().flatten().min()
    }

    /// Writes a value directly, bypassing constraints and rules.
    ///
    /// Returns `None` when the value equals the current one.
    pub fn set_value(
        &mut self,
        target: &SlotTarget,
        value: Literal,
        cause: MutationCause,
    ) -> Result<Option<StateDelta>, SimError> {
        let slot = self.scenario.slots().resolve(target).ok_or_else(|| match target {
            SlotTarget::Device { device_id, .. } if !self.scenario.slots().has_device(device_id) => {
                SimError::UnknownDevice(device_id.clone())
            }
            SlotTarget::Device { device_id, property } => SimError::UnknownProperty {
                device_id: device_id.clone(),
                property: property.clone(),
            },
            SlotTarget::Context { name } => SimError::UnknownContextVariable(name.clone()),
        })?;
        self.check_domain(slot, &value)?;
        Ok(self.write(slot, value, cause))
    }

    fn check_domain(&self, slot: usize, value: &Literal) -> Result<(), SimError> {
        let s = self.scenario.slots().slot(slot);
        if s.accepts(value) {
            Ok(())
        } else {
            Err(SimError::OutOfDomain { target: s.target.to_string(), value: value.to_string() })
        }
    }

    fn write(&mut self, slot: usize, value: Literal, cause: MutationCause) -> Option<StateDelta> {
        if self.values[slot] == value {
            return None;
        }
        let old = std::mem::replace(&mut self.values[slot], value.clone());
        Some(StateDelta {
            target: self.scenario.slots().slot(slot).target.clone(),
            old_value: old,
            new_value: value,
            cause,
        })
    }

    fn slot_of(&self, target: &SlotTarget) -> usize {
        self.scenario.slots().resolve(target).expect("delta targets come from this scenario")
    }

    /// Earliest timeout deadline among active tasks: (ms, task index).
    fn next_timeout(&self) -> Option<(u64, usize)> {
        self.tasks
            .iter()
            .enumerate()
            .filter(|(_, t)| t.status == TaskStatus::Active)
            .filter_map(|(i, t)| {
                let timeout = self.scenario.spec().tasks[i].timeout_seconds?;
                // strict `elapsed > timeout`
                Some((t.started_at_ms? + seconds_to_ms(timeout) + 1, i))
            })
            .min()
    }

    fn schedule(&mut self, event: TriggerEventType, device_id: &str) {
        let scenario = Arc::clone(&self.scenario);
        for &t in scenario.triggers_for_event(event) {
            let spec = &scenario.spec().triggers[t];
            let TriggerWhen::AfterEvent(ev) = &spec.when else { continue };
            if ev.device_id.as_deref().is_some_and(|d| d != device_id) {
                continue;
            }
            if spec.one_shot && self.fired_one_shot.contains(&t) {
                continue;
            }
            let deadline = self.clock_ms + seconds_to_ms(ev.delay_seconds);
            self.pending.insert((deadline, t, self.next_serial));
            self.next_serial += 1;
        }
    }

    fn fire_trigger(&mut self, trigger: usize, deadline_ms: u64, out: &mut Vec<SimEvent>) {
        let scenario = Arc::clone(&self.scenario);
        let spec = &scenario.spec().triggers[trigger];
        if spec.one_shot && !self.fired_one_shot.insert(trigger) {
            return;
        }
        out.push(SimEvent::TriggerFired { trigger_id: spec.id.clone(), deadline_ms });
        let cause = MutationCause::TriggerFired { trigger_id: spec.id.clone() };
        let mut seeds = Vec::new();
        for (slot, value) in &scenario.trigger(trigger).writes {
            if let Some(d) = self.write(*slot, value.clone(), cause.clone()) {
                out.push(SimEvent::Changed(d.clone()));
                seeds.push(d);
            }
        }
        out.extend(evaluate_rules(self, &seeds));
        out.extend(check_tasks(self).into_iter().map(SimEvent::TaskChanged));
    }
}

/// Creates a world: initial values, context overrides, the initial rule
/// fixpoint, `atTime` 0 triggers, then task activation.
///
/// Rules whose condition already holds on the initial state fire once.
pub fn init_world(
    scenario: Arc<CompiledScenario>,
    context: &BTreeMap<String, Literal>,
) -> Result<(WorldState, Vec<SimEvent>), SimError> {
    let values = scenario.slots().slots().iter().map(|s| s.initial.clone()).collect();
    let tasks = vec![TaskState { status: TaskStatus::Locked, started_at_ms: None, ended_at_ms: None }; scenario.spec().tasks.len()];
    let mut world = WorldState {
        scenario,
        values,
        clock_ms: 0,
        tasks,
        fired_one_shot: BTreeSet::new(),
        pending: BTreeSet::new(),
        next_serial: 0,
        next_timed: 0,
        cascade_limit: DEFAULT_CASCADE_LIMIT,
    };
    let mut events = Vec::new();
    for (name, value) in context {
        let slot = world
            .scenario
            .slots()
            .context_slot(name)
            .ok_or_else(|| SimError::UnknownContextVariable(name.clone()))?;
        world.check_domain(slot, value)?;
        if let Some(d) = world.write(slot, value.clone(), MutationCause::SessionInit) {
            events.push(SimEvent::Changed(d));
        }
    }
    let all: Vec<usize> = (0..world.scenario.action_rules().len()).collect();
    let baseline = vec![false; all.len()];
    fixpoint(&mut world, all, Some(baseline), None, &mut events);
    events.extend(advance_clock(&mut world, 0)?);
    for i in 0..world.tasks.len() {
        if world.scenario.spec().tasks[i].depends_on.is_none() {
            world.tasks[i] = TaskState { status: TaskStatus::Active, started_at_ms: Some(0), ended_at_ms: None };
            events.push(SimEvent::TaskChanged(TaskChange {
                task_id: world.scenario.spec().tasks[i].id.clone(),
                from: TaskStatus::Locked,
                to: TaskStatus::Active,
                at_ms: 0,
            }));
        }
    }
    events.extend(check_tasks(&mut world).into_iter().map(SimEvent::TaskChanged));
    Ok((world, events))
}

/// Attempts a participant write at the current clock.
///
/// Constraint rules covering the write are tested on the hypothetical
/// post-state; the first holding one in compiled order blocks it and the
/// world is left untouched. Otherwise the write commits and the rule
/// fixpoint and task check run.
pub fn apply_interaction(
    world: &mut WorldState,
    device_id: &str,
    property: &str,
    value: Literal,
    event_id: u64,
) -> Result<InteractionOutcome, SimError> {
    let scenario = Arc::clone(&world.scenario);
    if !scenario.slots().has_device(device_id) {
        return Err(SimError::UnknownDevice(device_id.to_string()));
    }
    let slot = scenario.slots().device_slot(device_id, property).ok_or_else(|| SimError::UnknownProperty {
        device_id: device_id.to_string(),
        property: property.to_string(),
    })?;
    if !scenario.slots().slot(slot).user_writable {
        return Err(SimError::NotWritable(format!("{device_id}.{property}")));
    }
    world.check_domain(slot, &value)?;
    if world.values[slot] == value {
        return Ok(InteractionOutcome::Committed(Vec::new()));
    }
    let mut hypothetical: Option<Vec<Literal>> = None;
    for &r in scenario.constraints_for_device(device_id) {
        let rule = &scenario.spec().rules[r];
        if !rule.blocks.iter().any(|b| b.covers(device_id, property, &value)) {
            continue;
        }
        let post = hypothetical.get_or_insert_with(|| {
            let mut v = world.values.clone();
            v[slot] = value.clone();
            v
        });
        if scenario.rule_condition(r).eval(post) {
            return Ok(InteractionOutcome::Blocked {
                rule_id: rule.id.clone(),
                explanation_id: rule.explanation_id.clone(),
            });
        }
    }
    let mut events = Vec::new();
    let delta = world
        .write(slot, value, MutationCause::UserInteraction { event_id })
        .expect("value differs from current");
    events.push(SimEvent::Changed(delta.clone()));
    events.extend(evaluate_rules(world, &[delta]));
    events.extend(check_tasks(world).into_iter().map(SimEvent::TaskChanged));
    Ok(InteractionOutcome::Committed(events))
}

/// [`apply_interaction`] followed by scheduling of event-driven triggers and
/// firing of those already due (zero delay).
///
/// Returns the outcome and the events of the settling step.
pub fn interact(
    world: &mut WorldState,
    device_id: &str,
    property: &str,
    value: Literal,
    event_id: u64,
) -> Result<(InteractionOutcome, Vec<SimEvent>), SimError> {
    let outcome = apply_interaction(world, device_id, property, value, event_id)?;
    match &outcome {
        InteractionOutcome::Blocked { .. } => world.schedule(TriggerEventType::InteractionBlocked, device_id),
        InteractionOutcome::Committed(events) if !events.is_empty() => {
            world.schedule(TriggerEventType::DeviceInteraction, device_id)
        }
        InteractionOutcome::Committed(_) => {}
    }
    let clock = world.clock_ms;
    let settle = advance_clock(world, clock)?;
    Ok((outcome, settle))
}

/// Runs the edge-triggered action-rule fixpoint after `seeds` were applied.
///
/// Pass k fires, in compiled order, every action rule whose condition holds
/// on the state at the start of pass k and did not hold at the start of pass
/// k-1 (for pass 1: the state before the seeds). Conditions are read from
/// the pass-start state; actions apply in sequence. Depth is the pass
/// number. When a pass beyond the cascade limit would fire, a
/// `CascadeTruncated` event ends evaluation.
pub fn evaluate_rules(world: &mut WorldState, seeds: &[StateDelta]) -> Vec<SimEvent> {
    let mut events = Vec::new();
    if seeds.is_empty() {
        return events;
    }
    let mut before = world.values.clone();
    for d in seeds.iter().rev() {
        before[world.slot_of(&d.target)] = d.old_value.clone();
    }
    let candidates = rules_reading_changes(world, &before);
    fixpoint(world, candidates, None, Some(before), &mut events);
    events
}

fn rules_reading_changes(world: &WorldState, before: &[Literal]) -> Vec<usize> {
    let mut set = BTreeSet::new();
    for (slot, (a, b)) in before.iter().zip(&world.values).enumerate() {
        if a != b {
            set.extend(world.scenario.action_rules_reading(slot).iter().copied());
        }
    }
    set.into_iter().collect()
}

/// Shared pass loop. `baseline` overrides the previous truth of the first
/// pass's candidates (used at init, where everything counts as false);
/// otherwise `before` supplies the previous state.
fn fixpoint(
    world: &mut WorldState,
    mut candidates: Vec<usize>,
    mut baseline: Option<Vec<bool>>,
    mut before: Option<Vec<Literal>>,
    out: &mut Vec<SimEvent>,
) {
    let scenario = Arc::clone(&world.scenario);
    let rules = scenario.action_rules();
    let mut depth = 0u32;
    while !candidates.is_empty() {
        let start = world.values.clone();
        let firing: Vec<usize> = candidates
            .iter()
            .enumerate()
            .filter(|&(k, &r)| {
                let was = match (&baseline, &before) {
                    (Some(b), _) => b[k],
                    (None, Some(prev)) => rules[r].condition.eval(prev),
                    (None, None) => unreachable!("fixpoint needs a baseline"),
                };
                !was && rules[r].condition.eval(&start)
            })
            .map(|(_, &r)| r)
            .collect();
        if firing.is_empty() {
            break;
        }
        depth += 1;
        if depth > world.cascade_limit {
            out.push(SimEvent::CascadeTruncated { depth: world.cascade_limit });
            break;
        }
        for r in firing {
            let rule_id = scenario.spec().rules[rules[r].index].id.clone();
            out.push(SimEvent::RuleFired { rule_id: rule_id.clone(), depth });
            let cause = MutationCause::RuleFired { rule_id, depth };
            for (slot, value) in &rules[r].writes {
                if let Some(d) = world.write(*slot, value.clone(), cause.clone()) {
                    out.push(SimEvent::Changed(d));
                }
            }
        }
        baseline = None;
        candidates = rules_reading_changes(world, &start);
        before = Some(start);
    }
}

/// Fires due triggers and task timeouts up to `to_ms`, then sets the clock.
///
/// Trigger firings are ordered by (deadline, document order); at equal
/// deadlines triggers run before timeouts.
pub fn advance_clock(world: &mut WorldState, to_ms: u64) -> Result<Vec<SimEvent>, SimError> {
    if to_ms < world.clock_ms {
        return Err(SimError::ClockRegression { from: world.clock_ms, to: to_ms });
    }
    let scenario = Arc::clone(&world.scenario);
    let mut events = Vec::new();
    loop {
        let timed = scenario
            .timed_triggers()
            .get(world.next_timed)
            .map(|&(ms, t)| (ms, 0u8, t, 0u64))
            .filter(|&(ms, ..)| ms <= to_ms);
        let pending = world.pending.first().map(|&(ms, t, serial)| (ms, 0u8, t, serial)).filter(|&(ms, ..)| ms <= to_ms);
        let timeout = world.next_timeout().map(|(ms, t)| (ms, 1u8, t, 0u64)).filter(|&(ms, ..)| ms <= to_ms);
        let Some(next) = [timed, pending, timeout].into_iter().flatten().min() else { break };
        let (deadline, class, index, serial) = next;
        world.clock_ms = world.clock_ms.max(deadline);
        if class == 1 {
            let task = &mut world.tasks[index];
            task.status = TaskStatus::TimedOut;
            task.ended_at_ms = Some(world.clock_ms);
            events.push(SimEvent::TaskChanged(TaskChange {
                task_id: scenario.spec().tasks[index].id.clone(),
                from: TaskStatus::Active,
                to: TaskStatus::TimedOut,
                at_ms: world.clock_ms,
            }));
            continue;
        }
        if timed == Some(next) {
            world.next_timed += 1;
        } else {
            world.pending.remove(&(deadline, index, serial));
        }
        world.fire_trigger(index, deadline, &mut events);
    }
    world.clock_ms = to_ms;
    Ok(events)
}

/// Completes active tasks whose goal holds and activates tasks whose
/// dependency completed, in dependency order.
pub fn check_tasks(world: &mut WorldState) -> Vec<TaskChange> {
    let scenario = Arc::clone(&world.scenario);
    let mut changes = Vec::new();
    let now = world.clock_ms;
    for &t in scenario.task_order() {
        let spec = &scenario.spec().tasks[t];
        if world.tasks[t].status == TaskStatus::Locked {
            let ready = spec
                .depends_on
                .as_ref()
                .and_then(|d| scenario.task_index(d))
                .is_none_or(|d| world.tasks[d].status == TaskStatus::Completed);
            if ready {
                world.tasks[t] = TaskState { status: TaskStatus::Active, started_at_ms: Some(now), ended_at_ms: None };
                changes.push(TaskChange { task_id: spec.id.clone(), from: TaskStatus::Locked, to: TaskStatus::Active, at_ms: now });
            }
        }
        if world.tasks[t].status == TaskStatus::Active && scenario.task_goal(t).eval(&world.values) {
            world.tasks[t].status = TaskStatus::Completed;
            world.tasks[t].ended_at_ms = Some(now);
            changes.push(TaskChange { task_id: spec.id.clone(), from: TaskStatus::Active, to: TaskStatus::Completed, at_ms: now });
        }
    }
    changes
}

/// Participant abort of an active, abortable task.
pub fn abort_task(world: &mut WorldState, task_id: &str) -> Result<TaskChange, SimError> {
    let t = world.scenario.task_index(task_id).ok_or_else(|| SimError::UnknownTask(task_id.to_string()))?;
    if world.tasks[t].status != TaskStatus::Active {
        return Err(SimError::TaskNotActive(task_id.to_string()));
    }
    if !world.scenario.spec().tasks[t].abortable {
        return Err(SimError::TaskNotAbortable(task_id.to_string()));
    }
    world.tasks[t].status = TaskStatus::Aborted;
    world.tasks[t].ended_at_ms = Some(world.clock_ms);
    Ok(TaskChange { task_id: task_id.to_string(), from: TaskStatus::Active, to: TaskStatus::Aborted, at_ms: world.clock_ms })
}

pub fn snapshot(world: &WorldState) -> StateSnapshot {
    let spec = world.scenario.spec();
    let slots = world.scenario.slots();
    let mut devices: BTreeMap<String, BTreeMap<String, Literal>> = BTreeMap::new();
    let mut context = BTreeMap::new();
    for (i, slot) in slots.slots().iter().enumerate() {
        match &slot.target {
            SlotTarget::Device { device_id, property } => {
                devices.entry(device_id.clone()).or_default().insert(property.clone(), world.values[i].clone());
            }
            SlotTarget::Context { name } => {
                context.insert(name.clone(), world.values[i].clone());
            }
        }
    }
    let tasks = spec.tasks.iter().zip(&world.tasks).map(|(s, t)| (s.id.clone(), t.clone())).collect();
    StateSnapshot { devices, context, clock_ms: world.clock_ms, tasks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{compile, parse_scenario, ScenarioSpec};

    fn bundled_spec() -> ScenarioSpec {
        parse_scenario(include_bytes!("../../../../scenarios/heater-window.scenario.json")).unwrap()
    }

    fn world_with(spec: ScenarioSpec, ctx: &[(&str, Literal)]) -> (WorldState, Vec<SimEvent>) {
        let ctx = ctx.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        init_world(Arc::new(compile(spec).unwrap()), &ctx).unwrap()
    }

    fn bundled(ctx: &[(&str, Literal)]) -> WorldState {
        world_with(bundled_spec(), ctx).0
    }

    fn fired(events: &[SimEvent]) -> Vec<(String, u32)> {
        events
            .iter()
            .filter_map(|e| match e {
                SimEvent::RuleFired { rule_id, depth } => Some((rule_id.clone(), *depth)),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn cold_context_keeps_heater_on_at_init() {
        let (w, events) = world_with(bundled_spec(), &[("outside_temp", Literal::Num(10.0))]);
        assert_eq!(w.device_value("heater", "power"), Some(&Literal::Bool(true)));
        assert!(fired(&events).iter().any(|(r, d)| r == "cold-outside-heating" && *d == 1));
        assert_eq!(
            events[0],
            SimEvent::Changed(StateDelta {
                target: SlotTarget::Context { name: "outside_temp".into() },
                old_value: Literal::Num(18.0),
                new_value: Literal::Num(10.0),
                cause: MutationCause::SessionInit,
            })
        );
    }

    #[test]
    fn init_turns_heater_on_when_cold_and_off() {
        let mut spec = bundled_spec();
        spec.devices[0].properties[0].initial = Literal::Bool(false);
        let (w, events) = world_with(spec, &[("outside_temp", Literal::Num(10.0))]);
        assert_eq!(w.device_value("heater", "power"), Some(&Literal::Bool(true)));
        let heater_delta = events.iter().filter_map(SimEvent::as_delta).find(|d| {
            d.target == SlotTarget::Device { device_id: "heater".into(), property: "power".into() }
        });
        assert_eq!(
            heater_delta.unwrap().cause,
            MutationCause::RuleFired { rule_id: "cold-outside-heating".into(), depth: 1 }
        );
    }

    #[test]
    fn init_rejects_unknown_or_mistyped_context() {
        let c = Arc::new(compile(bundled_spec()).unwrap());
        let mut ctx = BTreeMap::new();
        ctx.insert("humidity".to_string(), Literal::Num(1.0));
        assert_eq!(init_world(c.clone(), &ctx).unwrap_err(), SimError::UnknownContextVariable("humidity".into()));
        let mut ctx = BTreeMap::new();
        ctx.insert("outside_temp".to_string(), Literal::Str("cold".into()));
        assert!(matches!(init_world(c, &ctx).unwrap_err(), SimError::OutOfDomain { .. }));
    }

    #[test]
    fn empty_scenario_init_has_no_events() {
        let spec = parse_scenario(include_bytes!("../../../../scenarios/minimal.scenario.json")).unwrap();
        let (w, events) = world_with(spec, &[]);
        assert!(events.is_empty());
        assert_eq!(w.clock_ms(), 0);
    }

    #[test]
    fn blocked_heater_off_with_window_open_and_cold() {
        let mut w = bundled(&[("outside_temp", Literal::Num(10.0))]);
        apply_interaction(&mut w, "window", "open", true.into(), 1).unwrap();
        let before = snapshot(&w).to_json();
        let out = apply_interaction(&mut w, "heater", "power", false.into(), 2).unwrap();
        assert_eq!(
            out,
            InteractionOutcome::Blocked {
                rule_id: "window-keeps-heater-on".into(),
                explanation_id: Some("exp-heater-blocked".into()),
            }
        );
        assert_eq!(snapshot(&w).to_json(), before);
    }

    #[test]
    fn heater_off_commits_with_window_closed() {
        let mut w = bundled(&[("outside_temp", Literal::Num(10.0))]);
        let out = apply_interaction(&mut w, "heater", "power", false.into(), 7).unwrap();
        assert!(!out.is_blocked());
        assert_eq!(w.device_value("heater", "power"), Some(&Literal::Bool(false)));
        let deltas = out.deltas();
        assert_eq!(deltas[0].cause, MutationCause::UserInteraction { event_id: 7 });
    }

    #[test]
    fn same_value_write_is_a_no_op() {
        let mut w = bundled(&[]);
        let before = snapshot(&w);
        let out = apply_interaction(&mut w, "heater", "power", true.into(), 1).unwrap();
        assert_eq!(out, InteractionOutcome::Committed(vec![]));
        assert_eq!(snapshot(&w), before);
    }

    #[test]
    fn interaction_errors() {
        let mut w = bundled(&[]);
        assert_eq!(
            apply_interaction(&mut w, "oven", "power", true.into(), 1).unwrap_err(),
            SimError::UnknownDevice("oven".into())
        );
        assert!(matches!(
            apply_interaction(&mut w, "heater", "colour", true.into(), 1).unwrap_err(),
            SimError::UnknownProperty { .. }
        ));
        assert!(matches!(
            apply_interaction(&mut w, "thermostat", "indoor_temp", 20.into(), 1).unwrap_err(),
            SimError::NotWritable(_)
        ));
        assert!(matches!(
            apply_interaction(&mut w, "heater", "target", 20.25.into(), 1).unwrap_err(),
            SimError::OutOfDomain { .. }
        ));
        assert!(matches!(
            apply_interaction(&mut w, "heater", "power", "on".into(), 1).unwrap_err(),
            SimError::OutOfDomain { .. }
        ));
    }

    #[test]
    fn at_time_trigger_fires_once_in_interval() {
        let mut w = bundled(&[]);
        let events = advance_clock(&mut w, 59_999).unwrap();
        assert!(events.is_empty());
        let events = advance_clock(&mut w, 180_000).unwrap();
        let triggers: Vec<_> = events.iter().filter(|e| matches!(e, SimEvent::TriggerFired { .. })).collect();
        assert_eq!(triggers.len(), 1);
        assert_eq!(
            triggers[0],
            &SimEvent::TriggerFired { trigger_id: "weather-turns-cold".into(), deadline_ms: 60_000 }
        );
        assert_eq!(w.context_value("outside_temp"), Some(&Literal::Num(10.0)));
        assert_eq!(w.clock_ms(), 180_000);
        assert!(advance_clock(&mut w, 400_000).unwrap().iter().all(|e| !matches!(e, SimEvent::TriggerFired { .. })));
    }

    #[test]
    fn zero_advance_is_empty_and_regression_fails() {
        let mut w = bundled(&[]);
        advance_clock(&mut w, 1000).unwrap();
        assert!(advance_clock(&mut w, 1000).unwrap().is_empty());
        assert_eq!(advance_clock(&mut w, 999).unwrap_err(), SimError::ClockRegression { from: 1000, to: 999 });
    }

    #[test]
    fn task_timeout_is_strictly_greater() {
        let mut spec = bundled_spec();
        spec.tasks[1].depends_on = None;
        let (mut w, _) = world_with(spec, &[]);
        assert_eq!(w.task_state("heater-off").unwrap().status, TaskStatus::Active);
        advance_clock(&mut w, 180_000).unwrap();
        assert_eq!(w.task_state("heater-off").unwrap().status, TaskStatus::Active);
        let events = advance_clock(&mut w, 180_001).unwrap();
        assert_eq!(
            events,
            vec![SimEvent::TaskChanged(TaskChange {
                task_id: "heater-off".into(),
                from: TaskStatus::Active,
                to: TaskStatus::TimedOut,
                at_ms: 180_001,
            })]
        );
        let t = w.task_state("heater-off").unwrap();
        assert_eq!((t.started_at_ms, t.ended_at_ms), (Some(0), Some(180_001)));
    }

    #[test]
    fn dependent_task_stays_locked_then_activates_with_parent() {
        let mut w = bundled(&[]);
        assert_eq!(w.task_state("heater-off").unwrap().status, TaskStatus::Locked);
        advance_clock(&mut w, 5_000).unwrap();
        let out = apply_interaction(&mut w, "window", "open", true.into(), 1).unwrap();
        let InteractionOutcome::Committed(events) = out else { panic!() };
        let changes: Vec<_> = events
            .iter()
            .filter_map(|e| match e {
                SimEvent::TaskChanged(c) => Some((c.task_id.as_str(), c.to)),
                _ => None,
            })
            .collect();
        assert_eq!(changes, vec![("air-room", TaskStatus::Completed), ("heater-off", TaskStatus::Active)]);
        assert_eq!(w.task_state("heater-off").unwrap().started_at_ms, Some(5_000));
    }

    #[test]
    fn activation_with_goal_already_met_completes_immediately() {
        let mut spec = bundled_spec();
        spec.rules.retain(|r| r.id != "cold-outside-heating");
        spec.devices[0].properties[0].initial = Literal::Bool(false);
        let (mut w, _) = world_with(spec, &[]);
        apply_interaction(&mut w, "window", "open", true.into(), 1).unwrap();
        assert_eq!(w.task_state("heater-off").unwrap().status, TaskStatus::Completed);
    }

    #[test]
    fn abort_rules() {
        let mut w = bundled(&[]);
        assert_eq!(abort_task(&mut w, "heater-off").unwrap_err(), SimError::TaskNotActive("heater-off".into()));
        assert_eq!(abort_task(&mut w, "air-room").unwrap_err(), SimError::TaskNotAbortable("air-room".into()));
        assert_eq!(abort_task(&mut w, "nope").unwrap_err(), SimError::UnknownTask("nope".into()));
        apply_interaction(&mut w, "window", "open", true.into(), 1).unwrap();
        let change = abort_task(&mut w, "heater-off").unwrap();
        assert_eq!(change.to, TaskStatus::Aborted);
        assert!(abort_task(&mut w, "heater-off").is_err());
    }

    #[test]
    fn after_event_trigger_fires_after_delay_and_repeats() {
        let mut w = bundled(&[]);
        let (out, settle) = interact(&mut w, "light", "power", true.into(), 1).unwrap();
        assert!(!out.is_blocked());
        assert!(settle.is_empty());
        assert_eq!(w.next_deadline(), Some(60_000));
        advance_clock(&mut w, 299_999).unwrap();
        assert_eq!(w.device_value("light", "power"), Some(&Literal::Bool(true)));
        let events = advance_clock(&mut w, 300_000).unwrap();
        assert_eq!(events[0], SimEvent::TriggerFired { trigger_id: "light-auto-off".into(), deadline_ms: 300_000 });
        assert_eq!(w.device_value("light", "power"), Some(&Literal::Bool(false)));
        interact(&mut w, "light", "power", true.into(), 2).unwrap();
        advance_clock(&mut w, 600_000).unwrap();
        assert_eq!(w.device_value("light", "power"), Some(&Literal::Bool(false)));
    }

    #[test]
    fn no_op_interaction_schedules_nothing() {
        let mut w = bundled(&[]);
        advance_clock(&mut w, 61_000).unwrap();
        interact(&mut w, "light", "color", "neutral".into(), 1).unwrap();
        assert_eq!(w.next_deadline(), None);
    }

    #[test]
    fn one_shot_after_event_fires_at_most_once() {
        let mut spec = bundled_spec();
        spec.triggers[1].one_shot = true;
        let (mut w, _) = world_with(spec, &[]);
        interact(&mut w, "light", "power", true.into(), 1).unwrap();
        interact(&mut w, "light", "brightness", 50.into(), 2).unwrap();
        advance_clock(&mut w, 300_000).unwrap();
        assert_eq!(w.fired_one_shot().collect::<Vec<_>>(), vec!["weather-turns-cold", "light-auto-off"]);
        interact(&mut w, "light", "power", true.into(), 3).unwrap();
        let events = advance_clock(&mut w, 900_000).unwrap();
        assert!(events.is_empty());
        assert_eq!(w.device_value("light", "power"), Some(&Literal::Bool(true)));
    }

    #[test]
    fn zero_delay_trigger_fires_in_settle_step() {
        let mut spec = bundled_spec();
        if let TriggerWhen::AfterEvent(ev) = &mut spec.triggers[1].when {
            ev.delay_seconds = 0.0;
        }
        let (mut w, _) = world_with(spec, &[]);
        let (_, settle) = interact(&mut w, "light", "power", true.into(), 1).unwrap();
        assert_eq!(settle[0], SimEvent::TriggerFired { trigger_id: "light-auto-off".into(), deadline_ms: 0 });
        assert_eq!(w.device_value("light", "power"), Some(&Literal::Bool(false)));
    }

    #[test]
    fn cascade_through_context_and_rules() {
        let mut w = bundled(&[]);
        apply_interaction(&mut w, "window", "open", true.into(), 1).unwrap();
        let events = advance_clock(&mut w, 60_000).unwrap();
        assert_eq!(
            fired(&events),
            vec![("cold-outside-heating".to_string(), 1), ("window-cools-room".to_string(), 1)]
        );
        assert_eq!(w.device_value("thermostat", "indoor_temp"), Some(&Literal::Num(14.0)));
    }

    #[test]
    fn snapshot_is_detached_and_round_trips() {
        let mut w = bundled(&[]);
        let snap = snapshot(&w);
        assert_eq!(snap.device_value("heater", "target"), Some(&Literal::Num(21.0)));
        apply_interaction(&mut w, "heater", "target", 22.5.into(), 1).unwrap();
        assert_eq!(snap.device_value("heater", "target"), Some(&Literal::Num(21.0)));
        let json = snap.to_json();
        let back: StateSnapshot = serde_json::from_str(&json).unwrap();
        assert_eq!(back, snap);
        assert_eq!(back.to_json(), json);
    }
}
