use chrono::{DateTime, SecondsFormat, Utc};
use thiserror::Error;

use super::{LogEvent, LogPayload, StorageDriver, StorageError};

pub const CSV_HEADER: [&str; 6] = ["sessionId", "seq", "tMs", "wallTime", "type", "payloadJson"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Jsonl,
    Csv,
}

impl ExportFormat {
    pub fn content_type(self) -> &'static str {
        match self {
            ExportFormat::Jsonl => "application/x-ndjson",
            ExportFormat::Csv => "text/csv; charset=utf-8",
        }
    }
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(ExportFormat::Jsonl),
            "csv" => Ok(ExportFormat::Csv),
            other => Err(format!("unknown export format `{other}` (expected jsonl or csv)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExportError {
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// One JSON object per line, newline-terminated.
pub fn to_jsonl(events: &[LogEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("log events always serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_jsonl(text: &str) -> Result<Vec<LogEvent>, ExportError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| ExportError::Parse { line: n + 1, message: e.to_string() }))
        .collect()
}

fn wall(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// Header plus one row per event; the payload is a JSON string column.
pub fn to_csv(events: &[LogEvent]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for e in events {
        let payload = serde_json::to_value(&e.body).expect("log payloads always serialize");
        w.write_record([
            e.session_id.clone(),
            e.seq.to_string(),
            e.t_ms.to_string(),
            wall(&e.wall_time),
            e.event_type().as_str().to_string(),
            payload["payload"].to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

pub fn parse_csv(text: &str) -> Result<Vec<LogEvent>, ExportError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| ExportError::Parse { line: 1, message: e.to_string() })?;
    if header.iter().ne(CSV_HEADER) {
        return Err(ExportError::Parse { line: 1, message: format!("unexpected header {header:?}") });
    }
    let mut out = Vec::new();
    for (n, row) in r.records().enumerate() {
        let line = n + 2;
        let err = |message: String| ExportError::Parse { line, message };
        let row = row.map_err(|e| err(e.to_string()))?;
        if row.len() != CSV_HEADER.len() {
            return Err(err(format!("expected {} columns, found {}", CSV_HEADER.len(), row.len())));
        }
        let payload: serde_json::Value = serde_json::from_str(&row[5]).map_err(|e| err(e.to_string()))?;
        let body: LogPayload = serde_json::from_value(serde_json::json!({"type": &row[4], "payload": payload}))
            .map_err(|e| err(e.to_string()))?;
        out.push(LogEvent {
            session_id: row[0].to_string(),
            seq: row[1].parse().map_err(|e| err(format!("seq: {e}")))?,
            t_ms: row[2].parse().map_err(|e| err(format!("tMs: {e}")))?,
            wall_time: DateTime::parse_from_rfc3339(&row[3]).map_err(|e| err(format!("wallTime: {e}")))?.with_timezone(&Utc),
            body,
        });
    }
    Ok(out)
}

pub fn export_events(events: &[LogEvent], format: ExportFormat) -> String {
    match format {
        ExportFormat::Jsonl => to_jsonl(events),
        ExportFormat::Csv => to_csv(events),
    }
}

pub fn parse_export(text: &str, format: ExportFormat) -> Result<Vec<LogEvent>, ExportError> {
    match format {
        ExportFormat::Jsonl => parse_jsonl(text),
        ExportFormat::Csv => parse_csv(text),
    }
}

/// Reads a session from storage and renders it in `format`.
pub fn export_session(store: &dyn StorageDriver, session_id: &str, format: ExportFormat) -> Result<Vec<u8>, ExportError> {
    let events = store.read_session(session_id)?;
    Ok(export_events(&events, format).into_bytes())
}
