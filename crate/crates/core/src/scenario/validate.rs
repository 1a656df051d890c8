use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::compile::SlotTable;
use super::condition::{check_condition, ConditionExpr, Operand};
use super::template::{parse_template, Segment};
use super::{
    on_grid, ActionSpec, EffectSpec, EngineTransport, PropertyKind, RuleKind, ScenarioSpec,
    TriggerWhen, SCHEMA_VERSION,
};
use crate::literal::Literal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    /// Dotted path into the document, e.g. `devices[0].properties[1].initial`.
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }

    pub fn error_count(&self) -> usize {
        self.errors().count()
    }

    /// Human-readable listing, one issue per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for issue in &self.issues {
            let tag = match issue.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            out.push_str(&format!("{tag}: {}: {}\n", issue.path, issue.message));
        }
        let warnings = self.issues.len() - self.error_count();
        out.push_str(&format!(
            "{}: {} error(s), {} warning(s)\n",
            if self.ok { "ok" } else { "invalid" },
            self.error_count(),
            warnings
        ));
        out
    }
}

#[derive(Default)]
struct Collector {
    issues: Vec<Issue>,
}

impl Collector {
    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue {
            severity: Severity::Error,
            path: path.into(),
            message: message.into(),
        });
    }

    fn warning(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue {
            severity: Severity::Warning,
            path: path.into(),
            message: message.into(),
        });
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// Checks every structural and referential invariant of a parsed scenario.
///
/// The report lists all violations; `ok` is true iff none has error severity.
/// The function is pure.
pub fn validate_scenario(spec: &ScenarioSpec) -> ValidationReport {
    let mut c = Collector::default();
    let table = SlotTable::build(spec);

    if spec.schema_version != SCHEMA_VERSION {
        c.error("schemaVersion", format!("expected {SCHEMA_VERSION}, found {}", spec.schema_version));
    }
    if spec.id.trim().is_empty() {
        c.error("id", "scenario id must not be empty");
    }

    let rooms = unique_ids(&mut c, "rooms", "room", spec.rooms.iter().map(|r| r.id.as_str()));
    let devices = unique_ids(&mut c, "devices", "device", spec.devices.iter().map(|d| d.id.as_str()));
    unique_ids(&mut c, "rules", "rule", spec.rules.iter().map(|r| r.id.as_str()));
    unique_ids(&mut c, "triggers", "trigger", spec.triggers.iter().map(|t| t.id.as_str()));
    let tasks = unique_ids(&mut c, "tasks", "task", spec.tasks.iter().map(|t| t.id.as_str()));
    let explanations = unique_ids(
        &mut c,
        "explanations",
        "explanation",
        spec.explanations.iter().map(|e| e.id.as_str()),
    );

    check_rooms(&mut c, spec, &rooms);
    check_devices(&mut c, spec, &rooms);
    for name in spec.context_defaults.keys() {
        if !is_identifier(name) {
            c.error(format!("contextDefaults.{name}"), format!("`{name}` is not a valid variable name"));
        }
    }
    check_rules(&mut c, spec, &table, &explanations);
    check_triggers(&mut c, spec, &table, &devices, &explanations);
    check_tasks(&mut c, spec, &table, &tasks);
    check_explanations(&mut c, spec, &table, &explanations);
    check_explanation_config(&mut c, spec);

    let ok = !c.issues.iter().any(|i| i.severity == Severity::Error);
    ValidationReport { ok, issues: c.issues }
}

/// Reports duplicates and returns id -> index of first definition.
fn unique_ids<'a>(
    c: &mut Collector,
    section: &str,
    what: &str,
    ids: impl Iterator<Item = &'a str>,
) -> HashMap<&'a str, usize> {
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (i, id) in ids.enumerate() {
        if id.is_empty() {
            c.error(format!("{section}[{i}].id"), format!("{what} id must not be empty"));
            continue;
        }
        if let Some(first) = seen.get(id) {
            c.error(
                format!("{section}[{i}].id"),
                format!("duplicate {what} id `{id}` (first defined at {section}[{first}])"),
            );
        } else {
            seen.insert(id, i);
        }
    }
    seen
}

fn check_rooms(c: &mut Collector, spec: &ScenarioSpec, rooms: &HashMap<&str, usize>) {
    if spec.rooms.is_empty() {
        c.error("rooms", "at least one room is required");
        return;
    }
    let mut edges: Vec<Vec<usize>> = vec![Vec::new(); spec.rooms.len()];
    for (i, room) in spec.rooms.iter().enumerate() {
        let b = room.bounds;
        let degenerate = b.width < 1 || b.height < 1;
        if degenerate {
            c.error(
                format!("rooms[{i}].bounds"),
                format!("room bounds must be at least 1x1, found {}x{}", b.width, b.height),
            );
        }
        for (k, door) in room.doors.iter().enumerate() {
            let path = format!("rooms[{i}].doors[{k}]");
            match rooms.get(door.target.as_str()) {
                None => c.error(format!("{path}.target"), format!("unknown room `{}`", door.target)),
                Some(&j) if j == i => {
                    c.error(format!("{path}.target"), "a door must lead to a different room")
                }
                Some(&j) => {
                    edges[i].push(j);
                    edges[j].push(i);
                }
            }
            if !degenerate && !b.on_boundary(door.position) {
                c.error(
                    format!("{path}.position"),
                    format!(
                        "door at ({}, {}) is not on the boundary of room `{}`",
                        door.position.x, door.position.y, room.id
                    ),
                );
            }
        }
    }
    // Connectivity over the undirected door graph, starting at the first room.
    let mut reached = vec![false; spec.rooms.len()];
    let mut queue = VecDeque::from([0usize]);
    reached[0] = true;
    while let Some(r) = queue.pop_front() {
        for &n in &edges[r] {
            if !reached[n] {
                reached[n] = true;
                queue.push_back(n);
            }
        }
    }
    for (i, room) in spec.rooms.iter().enumerate() {
        if !reached[i] {
            c.error(
                format!("rooms[{i}].doors"),
                format!(
                    "door graph disconnected: room `{}` is not reachable from `{}`",
                    room.id, spec.rooms[0].id
                ),
            );
        }
    }
}

fn check_property_kind(c: &mut Collector, path: &str, kind: &PropertyKind) -> bool {
    match kind {
        PropertyKind::Boolean {} => true,
        PropertyKind::Enumeration { values } => {
            let distinct: HashSet<&String> = values.iter().collect();
            if distinct.len() != values.len() {
                c.error(format!("{path}.kind.values"), "enumeration values must be distinct");
                false
            } else if values.len() < 2 {
                c.error(format!("{path}.kind.values"), "an enumeration needs at least 2 values");
                false
            } else {
                true
            }
        }
        PropertyKind::Numeric { min, max, step } => {
            let mut ok = true;
            if !(min.is_finite() && max.is_finite() && step.is_finite()) {
                c.error(format!("{path}.kind"), "numeric bounds and step must be finite");
                return false;
            }
            if min >= max {
                c.error(format!("{path}.kind.max"), format!("max ({max}) must exceed min ({min})"));
                ok = false;
            }
            if *step <= 0.0 {
                c.error(format!("{path}.kind.step"), format!("step must be positive, found {step}"));
                ok = false;
            } else if ok && !on_grid(max - min, *step) {
                c.error(
                    format!("{path}.kind.step"),
                    format!("range {min}..{max} is not a whole number of steps of {step}"),
                );
                ok = false;
            }
            ok
        }
    }
}

fn check_devices(c: &mut Collector, spec: &ScenarioSpec, rooms: &HashMap<&str, usize>) {
    for (i, device) in spec.devices.iter().enumerate() {
        let path = format!("devices[{i}]");
        if !device.id.is_empty() && !is_identifier(&device.id) {
            c.error(format!("{path}.id"), format!("`{}` is not a valid device id", device.id));
        }
        match rooms.get(device.room_id.as_str()) {
            None => c.error(format!("{path}.roomId"), format!("unknown room `{}`", device.room_id)),
            Some(&r) => {
                let bounds = spec.rooms[r].bounds;
                if bounds.width >= 1 && bounds.height >= 1 && !bounds.contains(device.position) {
                    c.error(
                        format!("{path}.position"),
                        format!(
                            "({}, {}) lies outside room `{}`",
                            device.position.x, device.position.y, device.room_id
                        ),
                    );
                }
            }
        }
        let mut names = HashSet::new();
        for (j, prop) in device.properties.iter().enumerate() {
            let ppath = format!("{path}.properties[{j}]");
            if !is_identifier(&prop.name) {
                c.error(format!("{ppath}.name"), format!("`{}` is not a valid property name", prop.name));
            } else if !names.insert(prop.name.as_str()) {
                c.error(format!("{ppath}.name"), format!("duplicate property `{}`", prop.name));
            }
            let kind_ok = check_property_kind(c, &ppath, &prop.kind);
            if kind_ok && !prop.kind.contains(&prop.initial) {
                c.error(
                    format!("{ppath}.initial"),
                    format!("initial value {} is outside the property's domain", prop.initial),
                );
            }
            if let Some(hint) = prop.widget_hint {
                if !prop.kind.accepts_widget(hint) {
                    c.error(
                        format!("{ppath}.widgetHint"),
                        format!("widget {hint:?} cannot edit a {} property", prop.kind.literal_kind()),
                    );
                }
            }
        }
    }
}

/// Checks a device write target; returns the slot when it resolves.
fn check_write(c: &mut Collector, path: &str, table: &SlotTable, action: &ActionSpec) {
    if !table.has_device(&action.device_id) {
        c.error(format!("{path}.deviceId"), format!("unknown device `{}`", action.device_id));
        return;
    }
    let Some(slot) = table.device_slot(&action.device_id, &action.property) else {
        c.error(
            format!("{path}.property"),
            format!("device `{}` has no property `{}`", action.device_id, action.property),
        );
        return;
    };
    if !table.slot(slot).accepts(&action.value) {
        c.error(
            format!("{path}.value"),
            format!("{} is outside the domain of {}", action.value, table.slot(slot).target),
        );
    }
}

fn check_condition_at(c: &mut Collector, path: &str, table: &SlotTable, expr: &ConditionExpr) {
    match check_condition(expr, table) {
        Ok(checked) => {
            for w in checked.warnings() {
                c.warning(path, w.clone());
            }
        }
        Err(e) => c.error(path, e.to_string()),
    }
}

fn check_explanation_ref(
    c: &mut Collector,
    path: String,
    id: &Option<String>,
    explanations: &HashMap<&str, usize>,
) {
    if let Some(id) = id {
        if !explanations.contains_key(id.as_str()) {
            c.error(path, format!("unknown explanation `{id}`"));
        }
    }
}

fn check_rules(
    c: &mut Collector,
    spec: &ScenarioSpec,
    table: &SlotTable,
    explanations: &HashMap<&str, usize>,
) {
    for (i, rule) in spec.rules.iter().enumerate() {
        let path = format!("rules[{i}]");
        check_condition_at(c, &format!("{path}.condition"), table, &rule.condition);
        match rule.kind {
            RuleKind::Action => {
                if rule.actions.is_empty() {
                    c.error(format!("{path}.actions"), "an action rule needs at least one action");
                }
                if !rule.blocks.is_empty() {
                    c.error(format!("{path}.blocks"), "only constraint rules may block writes");
                }
            }
            RuleKind::Constraint => {
                if rule.blocks.is_empty() {
                    c.error(format!("{path}.blocks"), "a constraint rule needs at least one block entry");
                }
                if !rule.actions.is_empty() {
                    c.error(format!("{path}.actions"), "constraint rules cannot have actions");
                }
            }
        }
        for (k, action) in rule.actions.iter().enumerate() {
            check_write(c, &format!("{path}.actions[{k}]"), table, action);
        }
        for (k, block) in rule.blocks.iter().enumerate() {
            let bpath = format!("{path}.blocks[{k}]");
            if !table.has_device(&block.device_id) {
                c.error(format!("{bpath}.deviceId"), format!("unknown device `{}`", block.device_id));
                continue;
            }
            let Some(slot) = table.device_slot(&block.device_id, &block.property) else {
                c.error(
                    format!("{bpath}.property"),
                    format!("device `{}` has no property `{}`", block.device_id, block.property),
                );
                continue;
            };
            if let Some(v) = &block.blocked_value {
                if !table.slot(slot).accepts(v) {
                    c.error(format!("{bpath}.blockedValue"), format!("{v} is outside the property's domain"));
                }
            }
            if !table.slot(slot).user_writable {
                c.warning(bpath, "blocked property is not user-writable, so the block never applies");
            }
        }
        check_explanation_ref(c, format!("{path}.explanationId"), &rule.explanation_id, explanations);
    }
}

fn check_triggers(
    c: &mut Collector,
    spec: &ScenarioSpec,
    table: &SlotTable,
    devices: &HashMap<&str, usize>,
    explanations: &HashMap<&str, usize>,
) {
    for (i, trigger) in spec.triggers.iter().enumerate() {
        let path = format!("triggers[{i}]");
        match &trigger.when {
            TriggerWhen::AtTime(s) => {
                if !s.is_finite() || *s < 0.0 {
                    c.error(format!("{path}.when.atTime"), format!("time must be >= 0 seconds, found {s}"));
                }
            }
            TriggerWhen::AfterEvent(ev) => {
                if !ev.delay_seconds.is_finite() || ev.delay_seconds < 0.0 {
                    c.error(
                        format!("{path}.when.afterEvent.delaySeconds"),
                        format!("delay must be >= 0 seconds, found {}", ev.delay_seconds),
                    );
                }
                if let Some(d) = &ev.device_id {
                    if !devices.contains_key(d.as_str()) {
                        c.error(format!("{path}.when.afterEvent.deviceId"), format!("unknown device `{d}`"));
                    }
                }
            }
        }
        if trigger.effects.is_empty() {
            c.error(format!("{path}.effects"), "a trigger needs at least one effect");
        }
        for (k, effect) in trigger.effects.iter().enumerate() {
            match effect {
                EffectSpec::SetDevice(a) => {
                    check_write(c, &format!("{path}.effects[{k}].setDevice"), table, a)
                }
                EffectSpec::SetContext(set) => {
                    let epath = format!("{path}.effects[{k}].setContext");
                    match table.context_slot(&set.name) {
                        None => c.error(
                            format!("{epath}.name"),
                            format!("context variable `{}` has no default in contextDefaults", set.name),
                        ),
                        Some(slot) => {
                            if !table.slot(slot).accepts(&set.value) {
                                c.error(
                                    format!("{epath}.value"),
                                    format!(
                                        "{} does not match the {} type of context.{}",
                                        set.value,
                                        table.slot(slot).kind,
                                        set.name
                                    ),
                                );
                            }
                        }
                    }
                }
            }
        }
        check_explanation_ref(c, format!("{path}.explanationId"), &trigger.explanation_id, explanations);
    }
}

fn check_tasks(c: &mut Collector, spec: &ScenarioSpec, table: &SlotTable, tasks: &HashMap<&str, usize>) {
    for (i, task) in spec.tasks.iter().enumerate() {
        let path = format!("tasks[{i}]");
        check_condition_at(c, &format!("{path}.goal"), table, &task.goal);
        if task.description.trim().is_empty() {
            c.warning(format!("{path}.description"), "participants will see an empty task description");
        }
        if let Some(t) = task.timeout_seconds {
            if !t.is_finite() || t <= 0.0 {
                c.error(format!("{path}.timeoutSeconds"), format!("timeout must be positive, found {t}"));
            }
        }
        if let Some(dep) = &task.depends_on {
            if !tasks.contains_key(dep.as_str()) {
                c.error(format!("{path}.dependsOn"), format!("unknown task `{dep}`"));
            }
        }
    }
    // Each task has at most one dependency, so following the chain finds any cycle.
    for (i, task) in spec.tasks.iter().enumerate() {
        let mut seen = HashSet::from([i]);
        let mut chain = vec![task.id.as_str()];
        let mut current = task.depends_on.as_deref();
        while let Some(dep) = current {
            let Some(&j) = tasks.get(dep) else { break };
            chain.push(dep);
            if j == i {
                c.error(
                    format!("tasks[{i}].dependsOn"),
                    format!("task dependency cycle: {}", chain.join(" -> ")),
                );
                break;
            }
            if !seen.insert(j) {
                break;
            }
            current = spec.tasks[j].depends_on.as_deref();
        }
    }
}

fn check_explanations(
    c: &mut Collector,
    spec: &ScenarioSpec,
    table: &SlotTable,
    explanations: &HashMap<&str, usize>,
) {
    let has_engine = spec.explanation_config.engine_endpoint.is_some();
    for (i, exp) in spec.explanations.iter().enumerate() {
        let path = format!("explanations[{i}]");
        if exp.template.trim().is_empty() {
            c.error(format!("{path}.template"), "template must not be empty");
        }
        match parse_template(&exp.template) {
            Err(e) => c.error(format!("{path}.template"), e),
            Ok(segments) => {
                for seg in segments {
                    if let Segment::Ref(op) = seg {
                        let resolved = match &op {
                            Operand::Device { device_id, property } => {
                                table.device_slot(device_id, property).is_some()
                            }
                            Operand::Context(name) => table.context_slot(name).is_some(),
                            Operand::Literal(_) => true,
                        };
                        if !resolved {
                            c.error(format!("{path}.template"), format!("placeholder `{op}` does not resolve"));
                        }
                    }
                }
            }
        }
        if exp.external && !has_engine {
            c.warning(
                format!("{path}.external"),
                "no engine endpoint is configured; the template will always be used",
            );
        }
        for (k, f) in exp.follow_ups.iter().enumerate() {
            let fpath = format!("{path}.followUps[{k}]");
            if f.keywords.iter().all(|w| w.trim().is_empty()) {
                c.error(format!("{fpath}.keywords"), "a follow-up needs at least one keyword");
            }
            if !explanations.contains_key(f.explanation_id.as_str()) {
                c.error(format!("{fpath}.explanationId"), format!("unknown explanation `{}`", f.explanation_id));
            }
        }
    }
    check_follow_up_cycles(c, spec, explanations);
}

/// Reports every follow-up edge that lies on a cycle.
fn check_follow_up_cycles(c: &mut Collector, spec: &ScenarioSpec, explanations: &HashMap<&str, usize>) {
    let n = spec.explanations.len();
    let edges: Vec<Vec<usize>> = spec
        .explanations
        .iter()
        .map(|e| {
            e.follow_ups
                .iter()
                .filter_map(|f| explanations.get(f.explanation_id.as_str()).copied())
                .collect()
        })
        .collect();
    let reaches = |from: usize, to: usize| -> bool {
        let mut seen = vec![false; n];
        let mut stack = vec![from];
        while let Some(x) = stack.pop() {
            if x == to {
                return true;
            }
            if std::mem::replace(&mut seen[x], true) {
                continue;
            }
            stack.extend(edges[x].iter().copied());
        }
        false
    };
    for (i, exp) in spec.explanations.iter().enumerate() {
        if explanations.get(exp.id.as_str()) != Some(&i) {
            continue;
        }
        for (k, f) in exp.follow_ups.iter().enumerate() {
            if let Some(&j) = explanations.get(f.explanation_id.as_str()) {
                if reaches(j, i) {
                    c.error(
                        format!("explanations[{i}].followUps[{k}].explanationId"),
                        format!("follow-up `{}` leads back to `{}`", f.explanation_id, exp.id),
                    );
                }
            }
        }
    }
}

fn check_explanation_config(c: &mut Collector, spec: &ScenarioSpec) {
    let cfg = &spec.explanation_config;
    if cfg.engine_timeout_ms == 0 {
        c.error("explanationConfig.engineTimeoutMs", "timeout must be positive");
    }
    if let Some(endpoint) = &cfg.engine_endpoint {
        match url::Url::parse(&endpoint.url) {
            Err(e) => c.error("explanationConfig.engineEndpoint.url", format!("malformed URL: {e}")),
            Ok(u) => {
                let expected: &[&str] = match endpoint.transport {
                    EngineTransport::Rest => &["http", "https"],
                    EngineTransport::Websocket => &["ws", "wss"],
                };
                if !expected.contains(&u.scheme()) || u.host_str().is_none() {
                    c.error(
                        "explanationConfig.engineEndpoint.url",
                        format!("{:?} transport needs a {} URL with a host", endpoint.transport, expected.join("/")),
                    );
                }
            }
        }
    }
}

/// Literal helper for tests and mutation fixtures.
#[allow(dead_code)]
pub(crate) fn lit(v: impl Into<Literal>) -> Literal {
    v.into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    fn bundled() -> ScenarioSpec {
        parse_scenario(include_bytes!("../../../../scenarios/heater-window.scenario.json")).unwrap()
    }

    fn error_paths(spec: &ScenarioSpec) -> Vec<String> {
        validate_scenario(spec).errors().map(|i| i.path.clone()).collect()
    }

    #[test]
    fn bundled_scenario_is_valid() {
        let report = validate_scenario(&bundled());
        assert!(report.ok, "{}", report.render());
        assert_eq!(report.error_count(), 0);
        assert_eq!(report.warnings().count(), 0, "{}", report.render());
    }

    #[test]
    fn dangling_device_in_rule_condition() {
        let mut spec = bundled();
        spec.rules[1].condition = ConditionExpr::parse("device.heaterX.power == on").unwrap();
        let report = validate_scenario(&spec);
        assert!(!report.ok);
        assert_eq!(error_paths(&spec), vec!["rules[1].condition"]);
        assert!(report.issues[0].message.contains("heaterX"));
    }

    #[test]
    fn rooms_without_connecting_door() {
        let mut spec = bundled();
        spec.rooms.truncate(2);
        spec.rooms[0].doors.retain(|d| d.target == "kitchen");
        spec.rooms[1].doors.clear();
        spec.rooms[0].doors.clear();
        let report = validate_scenario(&spec);
        let err: Vec<_> = report.errors().collect();
        assert_eq!(err.len(), 1);
        assert_eq!(err[0].path, "rooms[1].doors");
        assert!(err[0].message.starts_with("door graph disconnected"));
    }

    #[test]
    fn one_way_door_connects() {
        let mut spec = bundled();
        spec.rooms[1].doors.clear();
        assert!(validate_scenario(&spec).ok);
    }

    #[test]
    fn report_is_pure() {
        let mut spec = bundled();
        spec.rules[0].blocks.clear();
        spec.tasks[1].depends_on = Some("heater-off".into());
        let a = validate_scenario(&spec);
        let b = validate_scenario(&spec);
        assert_eq!(a, b);
        assert!(!a.ok);
    }

    #[test]
    fn ok_iff_no_errors_even_with_warnings() {
        let mut spec = bundled();
        spec.explanations[0].external = true;
        let r = validate_scenario(&spec);
        assert!(r.ok);
        assert_eq!(r.warnings().count(), 1);
    }

    #[test]
    fn enumeration_comparison_with_impossible_value_warns() {
        let mut spec = bundled();
        spec.tasks[2].goal = ConditionExpr::parse("device.light.color == \"purple\"").unwrap();
        let r = validate_scenario(&spec);
        assert!(r.ok);
        assert_eq!(r.warnings().next().unwrap().path, "tasks[2].goal");
    }

    #[test]
    fn websocket_endpoint_needs_ws_scheme() {
        let mut spec = bundled();
        spec.explanation_config.engine_endpoint = Some(crate::scenario::EngineEndpoint {
            url: "http://localhost:9000/explain".into(),
            transport: EngineTransport::Websocket,
        });
        assert_eq!(error_paths(&spec), vec!["explanationConfig.engineEndpoint.url"]);
        spec.explanation_config.engine_endpoint.as_mut().unwrap().url = "ws://localhost:9000/x".into();
        assert!(validate_scenario(&spec).ok);
    }

    #[test]
    fn minimal_scenario_is_valid() {
        let spec =
            parse_scenario(include_bytes!("../../../../scenarios/minimal.scenario.json")).unwrap();
        assert!(validate_scenario(&spec).ok);
    }
}
