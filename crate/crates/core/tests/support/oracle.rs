//! Brute-force model of the action-rule fixpoint over boolean properties,
//! written without the library's slot tables, compiled conditions or
//! reading-set indexes.
//!
//! Semantics modelled: a rule fires in pass k when its condition holds at
//! the start of pass k and did not hold at the start of pass k-1 (at pass 1,
//! before the triggering write; at session start, never). All rules firing
//! in a pass evaluate against the pass-start state and apply in order of
//! (priority or document index, document index). More than 16 passes
//! truncate the cascade. A write is blocked by the first constraint in that
//! order that covers it and holds on the post-write state.

use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use shine_core::scenario::{compile, parse_scenario, CompiledScenario};
use shine_core::sim::{apply_interaction, init_world, snapshot, InteractionOutcome, SimEvent, WorldState};
use shine_core::Literal;

pub const CASCADE_LIMIT: u32 = 16;

#[derive(Debug, Clone)]
pub enum Cond {
    Atom { var: usize, negate: bool, value: bool },
    Not(Box<Cond>),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
}

impl Cond {
    pub fn eval(&self, state: &[bool]) -> bool {
        match self {
            Cond::Atom { var, negate, value } => (state[*var] == *value) != *negate,
            Cond::Not(c) => !c.eval(state),
            Cond::And(a, b) => a.eval(state) && b.eval(state),
            Cond::Or(a, b) => a.eval(state) || b.eval(state),
        }
    }

    fn render(&self, vars: &[(usize, usize)]) -> String {
        match self {
            Cond::Atom { var, negate, value } => {
                let (d, p) = vars[*var];
                format!("device.d{d}.p{p} {} {value}", if *negate { "!=" } else { "==" })
            }
            Cond::Not(c) => format!("NOT ({})", c.render(vars)),
            Cond::And(a, b) => format!("({}) AND ({})", a.render(vars), b.render(vars)),
            Cond::Or(a, b) => format!("({}) OR ({})", a.render(vars), b.render(vars)),
        }
    }

    fn random(rng: &mut ChaCha8Rng, vars: usize, depth: u32) -> Cond {
        if depth == 0 || rng.random_bool(0.45) {
            return Cond::Atom { var: rng.random_range(0..vars), negate: rng.random_bool(0.3), value: rng.random() };
        }
        let a = Box::new(Cond::random(rng, vars, depth - 1));
        match rng.random_range(0..3) {
            0 => Cond::Not(a),
            1 => Cond::And(a, Box::new(Cond::random(rng, vars, depth - 1))),
            _ => Cond::Or(a, Box::new(Cond::random(rng, vars, depth - 1))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub constraint: bool,
    pub cond: Cond,
    pub priority: Option<i64>,
    pub writes: Vec<(usize, bool)>,
    pub blocks: Vec<(usize, Option<bool>)>,
}

/// A random scenario: ≤ 4 devices with boolean properties, ≤ 6 rules, and a
/// sequence of participant writes.
#[derive(Debug, Clone)]
pub struct Model {
    /// (device index, property index) per variable.
    pub vars: Vec<(usize, usize)>,
    pub initial: Vec<bool>,
    pub rules: Vec<Rule>,
    pub writes: Vec<(usize, bool)>,
}

impl Model {
    pub fn random(seed: u64) -> Model {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let devices = rng.random_range(1..=4);
        let mut vars = Vec::new();
        for d in 0..devices {
            for p in 0..rng.random_range(1..=2) {
                vars.push((d, p));
            }
        }
        let n = vars.len();
        let initial = (0..n).map(|_| rng.random()).collect();
        let rules = (0..rng.random_range(1..=6))
            .map(|_| {
                let constraint = rng.random_bool(0.25);
                let cond = Cond::random(&mut rng, n, 2);
                let priority = rng.random_bool(0.2).then(|| rng.random_range(-2..8));
                let mut rule = Rule { constraint, cond, priority, writes: Vec::new(), blocks: Vec::new() };
                for _ in 0..rng.random_range(1..=2) {
                    if constraint {
                        rule.blocks.push((rng.random_range(0..n), rng.random_bool(0.7).then(|| rng.random())));
                    } else {
                        rule.writes.push((rng.random_range(0..n), rng.random()));
                    }
                }
                rule
            })
            .collect();
        let writes = (0..rng.random_range(1..=8)).map(|_| (rng.random_range(0..n), rng.random())).collect();
        Model { vars, initial, rules, writes }
    }

    fn var_ref(&self, var: usize) -> (String, String) {
        let (d, p) = self.vars[var];
        (format!("d{d}"), format!("p{p}"))
    }

    pub fn to_json(&self) -> Value {
        let devices: Vec<Value> = {
            let count = self.vars.iter().map(|v| v.0).max().unwrap() + 1;
            (0..count)
                .map(|d| {
                    let props: Vec<Value> = self
                        .vars
                        .iter()
                        .enumerate()
                        .filter(|(_, v)| v.0 == d)
                        .map(|(i, v)| {
                            json!({"name": format!("p{}", v.1), "kind": {"type": "boolean"}, "initial": self.initial[i], "userWritable": true})
                        })
                        .collect();
                    json!({"id": format!("d{d}"), "type": "switch", "roomId": "r", "position": {"x": d, "y": 0}, "properties": props})
                })
                .collect()
        };
        let rules: Vec<Value> = self
            .rules
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut rule = json!({
                    "id": format!("r{i}"),
                    "kind": if r.constraint { "constraint" } else { "action" },
                    "condition": r.cond.render(&self.vars),
                });
                if r.constraint {
                    let blocks: Vec<Value> = r
                        .blocks
                        .iter()
                        .map(|&(v, value)| {
                            let (d, p) = self.var_ref(v);
                            let mut b = json!({"deviceId": d, "property": p});
                            if let Some(value) = value {
                                b["blockedValue"] = json!(value);
                            }
                            b
                        })
                        .collect();
                    rule["blocks"] = json!(blocks);
                } else {
                    let actions: Vec<Value> = r
                        .writes
                        .iter()
                        .map(|&(v, value)| {
                            let (d, p) = self.var_ref(v);
                            json!({"deviceId": d, "property": p, "value": value})
                        })
                        .collect();
                    rule["actions"] = json!(actions);
                }
                if let Some(p) = r.priority {
                    rule["priority"] = json!(p);
                }
                rule
            })
            .collect();
        json!({
            "schemaVersion": 1,
            "id": "generated",
            "name": "generated",
            "rooms": [{"id": "r", "bounds": {"x": 0, "y": 0, "width": 8, "height": 2}}],
            "devices": devices,
            "rules": rules,
            "triggers": [],
            "tasks": [],
            "explanations": [],
            "contextDefaults": {},
            "explanationConfig": {"defaultDeliveryMode": "push", "engineTimeoutMs": 2000}
        })
    }

    pub fn compile(&self) -> Arc<CompiledScenario> {
        let spec = parse_scenario(self.to_json().to_string().as_bytes()).expect("generated scenario parses");
        Arc::new(compile(spec).expect("generated scenario is valid"))
    }

    fn order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.rules.len()).collect();
        order.sort_by_key(|&i| (self.rules[i].priority.unwrap_or(i as i64), i));
        order
    }
}

/// What one operation did.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub blocked_by: Option<String>,
    pub fired: Vec<(String, u32)>,
    pub truncated: bool,
    pub state: Vec<bool>,
}

pub struct Oracle<'a> {
    model: &'a Model,
    order: Vec<usize>,
    state: Vec<bool>,
}

impl<'a> Oracle<'a> {
    pub fn start(model: &'a Model) -> (Oracle<'a>, Observation) {
        let mut o = Oracle { model, order: model.order(), state: model.initial.clone() };
        let (fired, truncated) = o.fixpoint(None);
        let obs = Observation { blocked_by: None, fired, truncated, state: o.state.clone() };
        (o, obs)
    }

    pub fn write(&mut self, var: usize, value: bool) -> Observation {
        if self.state[var] == value {
            return Observation { blocked_by: None, fired: vec![], truncated: false, state: self.state.clone() };
        }
        let mut post = self.state.clone();
        post[var] = value;
        for &i in &self.order {
            let r = &self.model.rules[i];
            let covers = r.blocks.iter().any(|&(v, bv)| v == var && bv.is_none_or(|b| b == value));
            if r.constraint && covers && r.cond.eval(&post) {
                return Observation { blocked_by: Some(format!("r{i}")), fired: vec![], truncated: false, state: self.state.clone() };
            }
        }
        let before = std::mem::replace(&mut self.state, post);
        let (fired, truncated) = self.fixpoint(Some(before));
        Observation { blocked_by: None, fired, truncated, state: self.state.clone() }
    }

    /// `prev == None`: every rule counts as previously false.
    fn fixpoint(&mut self, mut prev: Option<Vec<bool>>) -> (Vec<(String, u32)>, bool) {
        let mut fired = Vec::new();
        let mut depth = 0;
        loop {
            let start = self.state.clone();
            let due: Vec<usize> = self
                .order
                .iter()
                .copied()
                .filter(|&i| {
                    let r = &self.model.rules[i];
                    let was = prev.as_ref().is_some_and(|p| r.cond.eval(p));
                    !r.constraint && !was && r.cond.eval(&start)
                })
                .collect();
            if due.is_empty() {
                return (fired, false);
            }
            depth += 1;
            if depth > CASCADE_LIMIT {
                return (fired, true);
            }
            for i in due {
                fired.push((format!("r{i}"), depth));
                for &(v, value) in &self.model.rules[i].writes {
                    self.state[v] = value;
                }
            }
            prev = Some(start);
        }
    }
}

fn observe(model: &Model, world: &WorldState, events: &[SimEvent], blocked_by: Option<String>) -> Observation {
    let snap = snapshot(world);
    let state = model
        .vars
        .iter()
        .map(|&(d, p)| match &snap.devices[&format!("d{d}")][&format!("p{p}")] {
            Literal::Bool(b) => *b,
            other => panic!("non-boolean value {other:?}"),
        })
        .collect();
    let mut fired = Vec::new();
    let mut truncated = false;
    for e in events {
        match e {
            SimEvent::RuleFired { rule_id, depth } => fired.push((rule_id.clone(), *depth)),
            SimEvent::CascadeTruncated { .. } => truncated = true,
            _ => {}
        }
    }
    Observation { blocked_by, fired, truncated, state }
}

/// Runs the model through the library simulation.
pub fn run_library(model: &Model) -> Vec<Observation> {
    let (mut world, events) = init_world(model.compile(), &Default::default()).expect("world starts");
    let mut out = vec![observe(model, &world, &events, None)];
    for (n, &(var, value)) in model.writes.iter().enumerate() {
        let (d, p) = model.var_ref(var);
        let outcome = apply_interaction(&mut world, &d, &p, Literal::Bool(value), n as u64 + 2).expect("write accepted");
        out.push(match outcome {
            InteractionOutcome::Blocked { rule_id, .. } => observe(model, &world, &[], Some(rule_id)),
            InteractionOutcome::Committed(events) => observe(model, &world, &events, None),
        });
    }
    out
}

pub fn run_oracle(model: &Model) -> Vec<Observation> {
    let (mut oracle, first) = Oracle::start(model);
    let mut out = vec![first];
    for &(var, value) in &model.writes {
        out.push(oracle.write(var, value));
    }
    out
}

/// A random writable value for a heater-window device property.
pub fn random_heater_window_write(rng: &mut ChaCha8Rng) -> (&'static str, &'static str, Value) {
    let choices: [(&str, &str); 6] =
        [("heater", "power"), ("heater", "target"), ("window", "open"), ("light", "power"), ("light", "brightness"), ("light", "color")];
    let &(device, prop) = choices.choose(rng).unwrap();
    let value = match prop {
        "target" => json!(5.0 + 0.5 * rng.random_range(0..=50) as f64),
        "brightness" => json!(10 * rng.random_range(0..=10)),
        "color" => json!(*["warm", "neutral", "cool"].choose(rng).unwrap()),
        _ => json!(rng.random_bool(0.5)),
    };
    (device, prop, value)
}
