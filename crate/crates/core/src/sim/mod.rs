//! Per-session world simulation.
//!
//! A [`WorldState`] holds device and context values in dense slots (see
//! [`crate::scenario::SlotTable`]), the virtual clock, task progress and the
//! trigger schedule. Every operation returns the ordered [`SimEvent`]s it
//! produced; callers log and broadcast them verbatim.

mod snapshot;
mod world;

pub use snapshot::StateSnapshot;
pub use world::{
    abort_task, advance_clock, apply_interaction, check_tasks, evaluate_rules, init_world,
    interact, snapshot, InteractionOutcome, MutationCause, SimError, SimEvent, StateDelta,
    TaskChange, TaskState, TaskStatus, WorldState, DEFAULT_CASCADE_LIMIT,
};
