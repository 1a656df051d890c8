use std::sync::Arc;

use thiserror::Error;

use super::{InteractionResult, LogEvent, LogPayload};
use crate::scenario::CompiledScenario;
use crate::sim::{abort_task, advance_clock, init_world, interact, snapshot, SimError, StateSnapshot};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error("log is empty")]
    Empty,
    #[error("first event must be SESSION_START, found {0}")]
    MissingStart(String),
    #[error("seq gap: expected {expected}, found {found}")]
    SeqGap { expected: u64, found: u64 },
    #[error("event seq {seq} belongs to session `{found}`, not `{expected}`")]
    MixedSessions { seq: u64, expected: String, found: String },
    #[error("log is for scenario `{log}`, replaying against `{given}`")]
    ScenarioMismatch { log: String, given: String },
    #[error("tMs decreases at seq {0}")]
    TimeRegression(u64),
    #[error("seq {seq}: {source}")]
    Sim { seq: u64, source: SimError },
    #[error("seq {seq}: logged outcome {logged:?} but replay produced {replayed:?}")]
    Divergence { seq: u64, logged: InteractionResult, replayed: InteractionResult },
}

/// Rebuilds a session's world from its log.
///
/// Inputs are the SESSION_START context, every DEVICE_INTERACTION and every
/// TASK_ABORTED row, each applied at its logged time; the clock finally
/// advances to the last row's time. Triggers, rules and timeouts re-fire
/// from the scenario.
pub fn replay(scenario: Arc<CompiledScenario>, events: &[LogEvent]) -> Result<StateSnapshot, ReplayError> {
    let first = events.first().ok_or(ReplayError::Empty)?;
    let LogPayload::SessionStart(start) = &first.body else {
        return Err(ReplayError::MissingStart(first.event_type().to_string()));
    };
    if start.scenario_id != scenario.id() {
        return Err(ReplayError::ScenarioMismatch { log: start.scenario_id.clone(), given: scenario.id().to_string() });
    }
    let mut last_t = 0;
    for (i, e) in events.iter().enumerate() {
        let expected = i as u64 + 1;
        if e.seq != expected {
            return Err(ReplayError::SeqGap { expected, found: e.seq });
        }
        if e.session_id != first.session_id {
            return Err(ReplayError::MixedSessions { seq: e.seq, expected: first.session_id.clone(), found: e.session_id.clone() });
        }
        if e.t_ms < last_t {
            return Err(ReplayError::TimeRegression(e.seq));
        }
        last_t = e.t_ms;
    }

    let sim = |seq: u64| move |source: SimError| ReplayError::Sim { seq, source };
    let (mut world, _) = init_world(scenario, &start.context_vars).map_err(sim(first.seq))?;
    for e in &events[1..] {
        match &e.body {
            LogPayload::DeviceInteraction(p) => {
                advance_clock(&mut world, e.t_ms).map_err(sim(e.seq))?;
                let (outcome, _) =
                    interact(&mut world, &p.device_id, &p.property, p.value.clone(), e.seq).map_err(sim(e.seq))?;
                let replayed = match &outcome {
                    o if o.is_blocked() => InteractionResult::Blocked,
                    crate::sim::InteractionOutcome::Committed(ev) if ev.is_empty() => InteractionResult::Noop,
                    _ => InteractionResult::Committed,
                };
                if replayed != p.outcome {
                    return Err(ReplayError::Divergence { seq: e.seq, logged: p.outcome, replayed });
                }
            }
            LogPayload::TaskAborted(p) => {
                advance_clock(&mut world, e.t_ms).map_err(sim(e.seq))?;
                abort_task(&mut world, &p.task_id).map_err(sim(e.seq))?;
            }
            _ => {}
        }
    }
    advance_clock(&mut world, last_t).map_err(sim(events.last().expect("non-empty").seq))?;
    Ok(snapshot(&world))
}
