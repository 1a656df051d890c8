//! Append-only session log: event schema, storage drivers, export and
//! event-sourced replay.

mod event;
mod export;
mod replay;
mod storage;

pub use event::{
    CascadeTruncatedPayload, DeviceInteractionPayload, EndReason, ErrorPayload, EventType,
    ExplanationCreatedPayload, ExplanationDeliveredPayload, ExplanationQueryPayload,
    ExplanationRatedPayload, ExplanationRequestedPayload, ExternalEngineFallbackPayload,
    InteractionBlockedPayload, InteractionResult, LogEvent, LogPayload, RuleFiredPayload,
    SessionEndPayload, SessionStartPayload, TaskPayload, TimeMode, TriggerFiredPayload,
};
pub use export::{
    export_events, export_session, parse_csv, parse_export, parse_jsonl, to_csv, to_jsonl,
    ExportError, ExportFormat, CSV_HEADER,
};
pub use replay::{replay, ReplayError};
pub use storage::{
    open_storage, storage_from_env, DocStore, MemoryStore, SessionFilter, SessionRecord,
    SessionStatus, StorageDriver, StorageError, StorageKind,
};
