//! Explanation selection, rendering, delivery, follow-up queries and ratings.

mod external;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::literal::{format_number, Literal};
use crate::scenario::template::Segment;
use crate::scenario::{CompiledScenario, DeliveryMode, EffectSpec, ExplanationSpec, Slot};
use crate::sim::StateSnapshot;

pub use external::{
    fetch_external, EngineError, EngineState, ExplanationEngine, ExternalOutcome, ExternalRequest,
    ExternalResponse,
};

/// Text of the instance produced when a follow-up query matches nothing.
pub const UNMATCHED_TEXT: &str = "I have no further explanation for this.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum ExplanationCause {
    #[serde(rename_all = "camelCase")]
    BlockedInteraction { rule_id: String, device_id: String, property: String, attempted_value: Literal },
    #[serde(rename_all = "camelCase")]
    RuleFired { rule_id: String },
    #[serde(rename_all = "camelCase")]
    TriggerFired { trigger_id: String },
    #[serde(rename_all = "camelCase")]
    UserRequest {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        device_id: Option<String>,
    },
    #[serde(rename_all = "camelCase")]
    FollowUpQuery { parent_instance_id: String, text: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ExplanationSource {
    Internal,
    External,
    ExternalFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExplanationInstance {
    pub instance_id: String,
    /// Spec id, or `None` for the unmatched-query fallback.
    pub spec_id: Option<String>,
    pub text: String,
    pub mode: DeliveryMode,
    pub cause: ExplanationCause,
    pub created_at_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delivered_at_ms: Option<u64>,
    pub source: ExplanationSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_instance_id: Option<String>,
    /// Spec ids from the chain root down to this instance.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub chain: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<DeliveryDecision>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "camelCase")]
pub enum DeliveryDecision {
    #[serde(rename_all = "camelCase")]
    SendNow { chat_enabled: bool },
    Hold { notify: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RatingValue {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Rating {
    pub instance_id: String,
    pub value: RatingValue,
    pub at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExplainError {
    #[error("unknown explanation instance `{0}`")]
    UnknownInstance(String),
    #[error("explanation `{0}` has not been delivered")]
    NotDelivered(String),
    #[error("follow-up queries need interactive mode (session is {0})")]
    NotInteractive(DeliveryMode),
    #[error("nothing to explain for this request")]
    NothingToExplain,
}

/// Formats a slot value the way templates show it.
pub fn format_value(slot: &Slot, value: &Literal) -> String {
    match value {
        Literal::Bool(b) if slot.on_off => if *b { "on" } else { "off" }.to_string(),
        Literal::Bool(b) => b.to_string(),
        Literal::Num(n) => format_number(*n, slot.decimals),
        Literal::Str(s) => s.clone(),
    }
}

/// Substitutes every placeholder of an explanation template with the
/// current value in canonical form.
pub fn render_template(scenario: &CompiledScenario, spec: &ExplanationSpec, snapshot: &StateSnapshot) -> String {
    let Some(index) = scenario.explanation_index(&spec.id) else {
        return spec.template.clone();
    };
    let mut out = String::new();
    for (segment, slot) in scenario.template(index) {
        match (segment, slot) {
            (Segment::Text(t), _) => out.push_str(t),
            (Segment::Ref(op), Some(slot)) => {
                let slot = scenario.slots().slot(*slot);
                let value = match &slot.target {
                    crate::scenario::SlotTarget::Device { device_id, property } => {
                        snapshot.device_value(device_id, property)
                    }
                    crate::scenario::SlotTarget::Context { name } => snapshot.context.get(name),
                };
                match value {
                    Some(v) => out.push_str(&format_value(slot, v)),
                    None => out.push_str(&format!("{{{{{op}}}}}")),
                }
            }
            (Segment::Ref(op), None) => out.push_str(&format!("{{{{{op}}}}}")),
        }
    }
    out
}

/// Push and interactive send immediately; pull holds the text until the
/// participant asks for it.
pub fn deliver(instance: &mut ExplanationInstance, session_mode: DeliveryMode, notify_availability: bool, now_ms: u64) -> DeliveryDecision {
    let decision = match session_mode {
        DeliveryMode::Push => DeliveryDecision::SendNow { chat_enabled: false },
        DeliveryMode::Interactive => DeliveryDecision::SendNow { chat_enabled: true },
        DeliveryMode::Pull => DeliveryDecision::Hold { notify: notify_availability },
    };
    if matches!(decision, DeliveryDecision::SendNow { .. }) {
        instance.delivered_at_ms = Some(now_ms.max(instance.created_at_ms));
    }
    instance.decision = Some(decision);
    decision
}

/// Lowercase alphanumeric words.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Picks the follow-up of `spec` best matching `query`.
///
/// Score is the number of distinct query words among the keywords; the
/// highest score of at least 1 wins and ties go to the earliest entry.
/// Follow-ups leading to a spec already in `visited` are skipped.
pub fn match_follow_up<'a>(spec: &'a ExplanationSpec, query: &str, visited: &[String]) -> Option<&'a str> {
    let words: std::collections::HashSet<String> = tokenize(query).into_iter().collect();
    let mut best: Option<(usize, &str)> = None;
    for f in &spec.follow_ups {
        if visited.iter().any(|v| v == &f.explanation_id) {
            continue;
        }
        let keywords: std::collections::HashSet<String> =
            f.keywords.iter().map(|k| k.trim().to_lowercase()).collect();
        let score = keywords.iter().filter(|k| words.contains(*k)).count();
        if score >= 1 && best.is_none_or(|(s, _)| score > s) {
            best = Some((score, f.explanation_id.as_str()));
        }
    }
    best.map(|(_, id)| id)
}

/// Devices a cause is about, for request-by-device lookups.
pub fn devices_touched(scenario: &CompiledScenario, cause: &ExplanationCause) -> Vec<String> {
    let mut out: Vec<String> = match cause {
        ExplanationCause::BlockedInteraction { device_id, .. } => vec![device_id.clone()],
        ExplanationCause::RuleFired { rule_id } => scenario
            .rule_index(rule_id)
            .map(|r| scenario.devices_written_by_rule(r).into_iter().map(str::to_string).collect())
            .unwrap_or_default(),
        ExplanationCause::TriggerFired { trigger_id } => scenario
            .trigger_index(trigger_id)
            .map(|t| {
                scenario.spec().triggers[t]
                    .effects
                    .iter()
                    .filter_map(|e| match e {
                        EffectSpec::SetDevice(a) => Some(a.device_id.clone()),
                        EffectSpec::SetContext(_) => None,
                    })
                    .collect()
            })
            .unwrap_or_default(),
        ExplanationCause::UserRequest { .. } | ExplanationCause::FollowUpQuery { .. } => Vec::new(),
    };
    out.sort();
    out.dedup();
    out
}

/// Per-session explanation bookkeeping.
#[derive(Debug, Clone, Default)]
pub struct ExplanationBook {
    instances: Vec<ExplanationInstance>,
    by_id: HashMap<String, usize>,
    /// Most recent instance per device, for `UserRequest(device)`.
    recent_by_device: HashMap<String, usize>,
    recent_any: Option<usize>,
    ratings: HashMap<String, Rating>,
    rating_events: usize,
}

impl ExplanationBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn instances(&self) -> &[ExplanationInstance] {
        &self.instances
    }

    pub fn get(&self, instance_id: &str) -> Option<&ExplanationInstance> {
        self.by_id.get(instance_id).map(|&i| &self.instances[i])
    }

    pub fn get_mut(&mut self, instance_id: &str) -> Option<&mut ExplanationInstance> {
        self.by_id.get(instance_id).map(|&i| &mut self.instances[i])
    }

    pub fn ratings(&self) -> &HashMap<String, Rating> {
        &self.ratings
    }

    /// Number of rating submissions, revisions included.
    pub fn rating_events(&self) -> usize {
        self.rating_events
    }

    pub fn delivered_count(&self) -> usize {
        self.instances.iter().filter(|i| i.delivered_at_ms.is_some()).count()
    }

    /// Stores a new instance and updates the recency index.
    pub fn insert(&mut self, scenario: &CompiledScenario, instance: ExplanationInstance) -> &ExplanationInstance {
        let idx = self.instances.len();
        if !matches!(instance.cause, ExplanationCause::FollowUpQuery { .. } | ExplanationCause::UserRequest { .. }) {
            for d in devices_touched(scenario, &instance.cause) {
                self.recent_by_device.insert(d, idx);
            }
            self.recent_any = Some(idx);
        }
        self.by_id.insert(instance.instance_id.clone(), idx);
        self.instances.push(instance);
        &self.instances[idx]
    }

    /// The most recent cause-driven instance for a device (any device when
    /// `None`).
    pub fn most_recent(&self, device_id: Option<&str>) -> Option<&ExplanationInstance> {
        let idx = match device_id {
            Some(d) => self.recent_by_device.get(d).copied(),
            None => self.recent_any,
        }?;
        Some(&self.instances[idx])
    }

    /// Newest held (undelivered) instance for a device, or for any device.
    pub fn held_for(&self, scenario: &CompiledScenario, device_id: Option<&str>) -> Option<&ExplanationInstance> {
        self.instances.iter().rev().find(|i| {
            i.delivered_at_ms.is_none()
                && matches!(i.decision, Some(DeliveryDecision::Hold { .. }))
                && device_id.is_none_or(|d| devices_touched(scenario, &i.cause).iter().any(|x| x == d))
        })
    }

    pub fn mark_delivered(&mut self, instance_id: &str, now_ms: u64) -> Result<(), ExplainError> {
        let inst = self.get_mut(instance_id).ok_or_else(|| ExplainError::UnknownInstance(instance_id.to_string()))?;
        inst.delivered_at_ms = Some(now_ms.max(inst.created_at_ms));
        Ok(())
    }

    /// Stores a rating; returns it with a flag telling whether it replaced
    /// an earlier one.
    pub fn record_rating(&mut self, instance_id: &str, value: RatingValue, at_ms: u64) -> Result<(Rating, bool), ExplainError> {
        let inst = self.get(instance_id).ok_or_else(|| ExplainError::UnknownInstance(instance_id.to_string()))?;
        if inst.delivered_at_ms.is_none() {
            return Err(ExplainError::NotDelivered(instance_id.to_string()));
        }
        let rating = Rating { instance_id: instance_id.to_string(), value, at_ms };
        let revision = self.ratings.insert(instance_id.to_string(), rating.clone()).is_some();
        self.rating_events += 1;
        Ok((rating, revision))
    }
}

/// The explanation spec attached to a cause.
///
/// `UserRequest(device)` resolves through the session's recency index to the
/// spec of the most recent explained cause touching that device.
pub fn select_explanation<'a>(
    cause: &ExplanationCause,
    scenario: &'a CompiledScenario,
    book: &ExplanationBook,
) -> Option<&'a ExplanationSpec> {
    let spec = scenario.spec();
    let id = match cause {
        ExplanationCause::BlockedInteraction { rule_id, .. } | ExplanationCause::RuleFired { rule_id } => {
            spec.rules[scenario.rule_index(rule_id)?].explanation_id.clone()
        }
        ExplanationCause::TriggerFired { trigger_id } => {
            spec.triggers[scenario.trigger_index(trigger_id)?].explanation_id.clone()
        }
        ExplanationCause::UserRequest { device_id } => book.most_recent(device_id.as_deref())?.spec_id.clone(),
        ExplanationCause::FollowUpQuery { .. } => None,
    }?;
    scenario.explanation_index(&id).map(|i| &spec.explanations[i])
}

/// Answers a follow-up query on `parent`.
///
/// Returns the new instance (not yet stored) and whether the query matched.
/// The unmatched fallback instance has no spec id.
pub fn handle_query(
    text: &str,
    parent: &ExplanationInstance,
    scenario: &CompiledScenario,
    snapshot: &StateSnapshot,
    session_mode: DeliveryMode,
    instance_id: String,
) -> Result<(ExplanationInstance, bool), ExplainError> {
    if session_mode != DeliveryMode::Interactive {
        return Err(ExplainError::NotInteractive(session_mode));
    }
    let parent_spec = parent
        .spec_id
        .as_deref()
        .and_then(|id| scenario.explanation_index(id))
        .map(|i| &scenario.spec().explanations[i]);
    let winner = parent_spec
        .and_then(|s| match_follow_up(s, text, &parent.chain))
        .and_then(|id| scenario.explanation_index(id))
        .map(|i| &scenario.spec().explanations[i]);
    let cause = ExplanationCause::FollowUpQuery { parent_instance_id: parent.instance_id.clone(), text: text.to_string() };
    let mut chain = parent.chain.clone();
    let (spec_id, text, matched) = match winner {
        Some(spec) => {
            chain.push(spec.id.clone());
            (Some(spec.id.clone()), render_template(scenario, spec, snapshot), true)
        }
        None => (None, UNMATCHED_TEXT.to_string(), false),
    };
    Ok((
        ExplanationInstance {
            instance_id,
            spec_id,
            text,
            mode: session_mode,
            cause,
            created_at_ms: snapshot.clock_ms,
            delivered_at_ms: None,
            source: ExplanationSource::Internal,
            parent_instance_id: Some(parent.instance_id.clone()),
            chain,
            decision: None,
        },
        matched,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{compile, parse_scenario, FollowUpSpec};
    use crate::sim::{apply_interaction, init_world, snapshot};
    use std::collections::BTreeMap;
    use std::sync::Arc;

    fn scenario() -> Arc<CompiledScenario> {
        let spec = parse_scenario(include_bytes!("../../../../scenarios/heater-window.scenario.json")).unwrap();
        Arc::new(compile(spec).unwrap())
    }

    fn cold_snapshot(c: &Arc<CompiledScenario>) -> StateSnapshot {
        let mut ctx = BTreeMap::new();
        ctx.insert("outside_temp".to_string(), Literal::Num(10.0));
        let (w, _) = init_world(c.clone(), &ctx).unwrap();
        snapshot(&w)
    }

    fn spec<'a>(c: &'a CompiledScenario, id: &str) -> &'a ExplanationSpec {
        &c.spec().explanations[c.explanation_index(id).unwrap()]
    }

    fn blocked_cause() -> ExplanationCause {
        ExplanationCause::BlockedInteraction {
            rule_id: "window-keeps-heater-on".into(),
            device_id: "heater".into(),
            property: "power".into(),
            attempted_value: Literal::Bool(false),
        }
    }

    fn instance(c: &CompiledScenario, snap: &StateSnapshot, cause: ExplanationCause, id: &str) -> ExplanationInstance {
        let s = select_explanation(&cause, c, &ExplanationBook::new()).unwrap();
        ExplanationInstance {
            instance_id: id.into(),
            spec_id: Some(s.id.clone()),
            text: render_template(c, s, snap),
            mode: DeliveryMode::Interactive,
            cause,
            created_at_ms: 0,
            delivered_at_ms: None,
            source: ExplanationSource::Internal,
            parent_instance_id: None,
            chain: vec![s.id.clone()],
            decision: None,
        }
    }

    #[test]
    fn blocked_interaction_selects_heater_explanation() {
        let c = scenario();
        let s = select_explanation(&blocked_cause(), &c, &ExplanationBook::new()).unwrap();
        assert_eq!(s.id, "exp-heater-blocked");
        assert_eq!(render_template(&c, s, &cold_snapshot(&c)), "The indoor temperature is lower than 15°C.");
    }

    #[test]
    fn rule_without_explanation_selects_none() {
        let c = scenario();
        let cause = ExplanationCause::RuleFired { rule_id: "window-cools-room".into() };
        assert!(select_explanation(&cause, &c, &ExplanationBook::new()).is_none());
    }

    #[test]
    fn user_request_follows_recency() {
        let c = scenario();
        let snap = cold_snapshot(&c);
        let mut book = ExplanationBook::new();
        let req = ExplanationCause::UserRequest { device_id: Some("heater".into()) };
        assert!(select_explanation(&req, &c, &book).is_none());
        book.insert(&c, instance(&c, &snap, ExplanationCause::RuleFired { rule_id: "cold-outside-heating".into() }, "i1"));
        assert_eq!(select_explanation(&req, &c, &book).unwrap().id, "exp-heating-on");
        book.insert(&c, instance(&c, &snap, blocked_cause(), "i2"));
        assert_eq!(select_explanation(&req, &c, &book).unwrap().id, "exp-heater-blocked");
        let light = ExplanationCause::UserRequest { device_id: Some("light".into()) };
        assert!(select_explanation(&light, &c, &book).is_none());
        let any = ExplanationCause::UserRequest { device_id: None };
        assert_eq!(select_explanation(&any, &c, &book).unwrap().id, "exp-heater-blocked");
    }

    #[test]
    fn rendering_substitutes_canonical_values() {
        let c = scenario();
        let snap = cold_snapshot(&c);
        assert_eq!(
            render_template(&c, spec(&c, "exp-heating-on"), &snap),
            "The heater was switched on because it is 10°C outside."
        );
        assert_eq!(
            render_template(&c, spec(&c, "exp-heater-howto"), &snap),
            "Close the window first; the heater can then be switched off."
        );
        let slot = c.slots().slot(c.slots().device_slot("heater", "target").unwrap());
        assert_eq!(format_value(slot, &Literal::Num(15.50)), "15.5");
        let window = c.slots().slot(c.slots().device_slot("window", "open").unwrap());
        assert_eq!(format_value(window, &Literal::Bool(true)), "true");
    }

    #[test]
    fn rendering_is_pure() {
        let c = scenario();
        let snap = cold_snapshot(&c);
        let s = spec(&c, "exp-weather");
        assert_eq!(render_template(&c, s, &snap), render_template(&c, s, &snap));
    }

    #[test]
    fn delivery_decisions() {
        let c = scenario();
        let snap = cold_snapshot(&c);
        let mut inst = instance(&c, &snap, blocked_cause(), "i1");
        assert_eq!(deliver(&mut inst.clone(), DeliveryMode::Push, true, 5), DeliveryDecision::SendNow { chat_enabled: false });
        assert_eq!(deliver(&mut inst.clone(), DeliveryMode::Interactive, true, 5), DeliveryDecision::SendNow { chat_enabled: true });
        assert_eq!(deliver(&mut inst, DeliveryMode::Pull, false, 5), DeliveryDecision::Hold { notify: false });
        assert_eq!(inst.delivered_at_ms, None);
    }

    #[test]
    fn pull_hold_then_release_by_request() {
        let c = scenario();
        let snap = cold_snapshot(&c);
        let mut book = ExplanationBook::new();
        let mut inst = instance(&c, &snap, blocked_cause(), "i1");
        deliver(&mut inst, DeliveryMode::Pull, true, 0);
        book.insert(&c, inst);
        assert!(book.record_rating("i1", RatingValue::Up, 1).is_err());
        assert_eq!(book.held_for(&c, Some("heater")).unwrap().instance_id, "i1");
        assert!(book.held_for(&c, Some("light")).is_none());
        book.mark_delivered("i1", 10).unwrap();
        assert!(book.held_for(&c, None).is_none());
        assert_eq!(book.get("i1").unwrap().delivered_at_ms, Some(10));
    }

    #[test]
    fn follow_up_query_reaches_window_cause() {
        let c = scenario();
        let snap = cold_snapshot(&c);
        let parent = instance(&c, &snap, blocked_cause(), "i1");
        let (child, matched) =
            handle_query("why is the indoor temperature low?", &parent, &c, &snap, DeliveryMode::Interactive, "i2".into()).unwrap();
        assert!(matched);
        assert_eq!(child.text, "The window is open and the outside temperature is below 15°C.");
        assert_eq!(child.parent_instance_id.as_deref(), Some("i1"));
        assert_eq!(child.chain, vec!["exp-heater-blocked", "exp-window-cause"]);
        let (grandchild, _) =
            handle_query("how do I fix it", &child, &c, &snap, DeliveryMode::Interactive, "i3".into()).unwrap();
        assert_eq!(grandchild.spec_id.as_deref(), Some("exp-heater-howto"));
    }

    #[test]
    fn empty_query_is_unmatched() {
        let c = scenario();
        let snap = cold_snapshot(&c);
        let parent = instance(&c, &snap, blocked_cause(), "i1");
        let (child, matched) = handle_query("", &parent, &c, &snap, DeliveryMode::Interactive, "i2".into()).unwrap();
        assert!(!matched);
        assert_eq!(child.text, UNMATCHED_TEXT);
        assert_eq!(child.spec_id, None);
    }

    #[test]
    fn query_needs_interactive_mode() {
        let c = scenario();
        let snap = cold_snapshot(&c);
        let parent = instance(&c, &snap, blocked_cause(), "i1");
        assert_eq!(
            handle_query("why", &parent, &c, &snap, DeliveryMode::Push, "i2".into()).unwrap_err(),
            ExplainError::NotInteractive(DeliveryMode::Push)
        );
    }

    #[test]
    fn equal_scores_pick_first_follow_up() {
        let mut s = spec(&scenario(), "exp-heater-blocked").clone();
        s.follow_ups = vec![
            FollowUpSpec { keywords: vec!["heater".into(), "why".into()], explanation_id: "a".into() },
            FollowUpSpec { keywords: vec!["why".into(), "heater".into()], explanation_id: "b".into() },
        ];
        assert_eq!(match_follow_up(&s, "Why the HEATER?", &[]), Some("a"));
        assert_eq!(match_follow_up(&s, "Why the HEATER?", &["a".into()]), Some("b"));
        assert_eq!(match_follow_up(&s, "nothing relevant", &[]), None);
    }

    #[test]
    fn rating_revision_keeps_last_value() {
        let c = scenario();
        let snap = cold_snapshot(&c);
        let mut book = ExplanationBook::new();
        let mut inst = instance(&c, &snap, blocked_cause(), "i1");
        deliver(&mut inst, DeliveryMode::Push, true, 0);
        book.insert(&c, inst);
        assert!(!book.record_rating("i1", RatingValue::Down, 1).unwrap().1);
        assert!(book.record_rating("i1", RatingValue::Up, 2).unwrap().1);
        assert_eq!(book.ratings()["i1"].value, RatingValue::Up);
        assert_eq!(book.rating_events(), 2);
        assert_eq!(book.record_rating("zz", RatingValue::Up, 3).unwrap_err(), ExplainError::UnknownInstance("zz".into()));
    }

    #[test]
    fn trigger_cause_touches_written_devices_only() {
        let c = scenario();
        let weather = ExplanationCause::TriggerFired { trigger_id: "weather-turns-cold".into() };
        assert!(devices_touched(&c, &weather).is_empty());
        let timer = ExplanationCause::TriggerFired { trigger_id: "light-auto-off".into() };
        assert_eq!(devices_touched(&c, &timer), vec!["light"]);
    }

    #[test]
    fn live_blocked_state_renders_window_cause() {
        let c = scenario();
        let mut ctx = BTreeMap::new();
        ctx.insert("outside_temp".to_string(), Literal::Num(10.0));
        let (mut w, _) = init_world(c.clone(), &ctx).unwrap();
        apply_interaction(&mut w, "window", "open", true.into(), 1).unwrap();
        let snap = snapshot(&w);
        assert_eq!(
            render_template(&c, spec(&c, "exp-window-cause"), &snap),
            "The window is open and the outside temperature is below 15°C."
        );
    }
}
