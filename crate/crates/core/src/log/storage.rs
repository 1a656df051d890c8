use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use dashmap::DashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::LogEvent;
use crate::scenario::DeliveryMode;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StorageError {
    #[error("seq conflict in session `{session_id}`: expected {expected}, got {got}")]
    SeqConflict { session_id: String, expected: u64, got: u64 },
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("invalid session id `{0}`")]
    InvalidId(String),
    #[error("storage I/O error: {0}")]
    Io(String),
    #[error("corrupt stored data: {0}")]
    Corrupt(String),
    #[error("unsupported storage configuration: {0}")]
    Config(String),
}

impl From<std::io::Error> for StorageError {
    fn from(e: std::io::Error) -> Self {
        StorageError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SessionStatus {
    Active,
    Completed,
    Expired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionRecord {
    pub session_id: String,
    pub scenario_id: String,
    pub participant_id: String,
    pub delivery_mode: DeliveryMode,
    #[serde(default)]
    pub user_context: BTreeMap<String, serde_json::Value>,
    pub status: SessionStatus,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ended_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionFilter {
    pub scenario_id: Option<String>,
    pub status: Option<SessionStatus>,
}

impl SessionFilter {
    pub fn matches(&self, r: &SessionRecord) -> bool {
        self.scenario_id.as_ref().is_none_or(|s| s == &r.scenario_id) && self.status.is_none_or(|s| s == r.status)
    }
}

/// Persistence contract for session logs and records.
///
/// `append` requires `seq` to be exactly one past the session's last seq
/// and returns it once stored. Appends to different sessions may run in
/// parallel.
pub trait StorageDriver: Send + Sync {
    fn append(&self, event: &LogEvent) -> Result<u64, StorageError>;
    fn read_session(&self, session_id: &str) -> Result<Vec<LogEvent>, StorageError>;
    fn put_session(&self, record: &SessionRecord) -> Result<(), StorageError>;
    fn get_session(&self, session_id: &str) -> Result<Option<SessionRecord>, StorageError>;
    /// Matching records ordered by (createdAt, sessionId).
    fn list_sessions(&self, filter: &SessionFilter) -> Result<Vec<SessionRecord>, StorageError>;
}

fn sort_records(records: &mut [SessionRecord]) {
    records.sort_by(|a, b| (a.created_at, &a.session_id).cmp(&(b.created_at, &b.session_id)));
}

/// Volatile driver for tests and headless runs.
#[derive(Default)]
pub struct MemoryStore {
    events: DashMap<String, Vec<LogEvent>>,
    sessions: DashMap<String, SessionRecord>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl StorageDriver for MemoryStore {
    fn append(&self, event: &LogEvent) -> Result<u64, StorageError> {
        let mut log = self.events.entry(event.session_id.clone()).or_default();
        let expected = log.last().map_or(1, |e| e.seq + 1);
        if event.seq != expected {
            return Err(StorageError::SeqConflict {
                session_id: event.session_id.clone(),
                expected,
                got: event.seq,
            });
        }
        log.push(event.clone());
        Ok(event.seq)
    }

    fn read_session(&self, session_id: &str) -> Result<Vec<LogEvent>, StorageError> {
        self.events
            .get(session_id)
            .map(|log| log.clone())
            .ok_or_else(|| StorageError::UnknownSession(session_id.to_string()))
    }

    fn put_session(&self, record: &SessionRecord) -> Result<(), StorageError> {
        self.sessions.insert(record.session_id.clone(), record.clone());
        Ok(())
    }

    fn get_session(&self, session_id: &str) -> Result<Option<SessionRecord>, StorageError> {
        Ok(self.sessions.get(session_id).map(|r| r.clone()))
    }

    fn list_sessions(&self, filter: &SessionFilter) -> Result<Vec<SessionRecord>, StorageError> {
        let mut out: Vec<SessionRecord> =
            self.sessions.iter().filter(|r| filter.matches(r.value())).map(|r| r.value().clone()).collect();
        sort_records(&mut out);
        Ok(out)
    }
}

struct LogFile {
    file: File,
    last_seq: u64,
}

/// File-backed document store.
///
/// Layout: `<root>/events/<sessionId>.jsonl` (one event per line, synced
/// to disk before `append` returns) and `<root>/sessions/<sessionId>.json`.
pub struct DocStore {
    root: PathBuf,
    open: DashMap<String, Arc<Mutex<LogFile>>>,
}

fn check_id(id: &str) -> Result<(), StorageError> {
    let ok = !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(StorageError::InvalidId(id.to_string()))
    }
}

fn read_jsonl(path: &Path) -> Result<Vec<LogEvent>, StorageError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| StorageError::Corrupt(format!("{}:{}: {e}", path.display(), n + 1)))?,
        );
    }
    Ok(out)
}

impl DocStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StorageError> {
        let root = root.into();
        fs::create_dir_all(root.join("events"))?;
        fs::create_dir_all(root.join("sessions"))?;
        Ok(DocStore { root, open: DashMap::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn events_path(&self, id: &str) -> PathBuf {
        self.root.join("events").join(format!("{id}.jsonl"))
    }

    fn record_path(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.json"))
    }

    fn log_file(&self, id: &str) -> Result<Arc<Mutex<LogFile>>, StorageError> {
        if let Some(f) = self.open.get(id) {
            return Ok(Arc::clone(&f));
        }
        let path = self.events_path(id);
        let last_seq = if path.exists() { read_jsonl(&path)?.last().map_or(0, |e| e.seq) } else { 0 };
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let entry = self.open.entry(id.to_string()).or_insert_with(|| Arc::new(Mutex::new(LogFile { file, last_seq })));
        Ok(Arc::clone(&entry))
    }
}

impl StorageDriver for DocStore {
    fn append(&self, event: &LogEvent) -> Result<u64, StorageError> {
        check_id(&event.session_id)?;
        let handle = self.log_file(&event.session_id)?;
        let mut log = handle.lock().expect("log file lock poisoned");
        let expected = log.last_seq + 1;
        if event.seq != expected {
            return Err(StorageError::SeqConflict {
                session_id: event.session_id.clone(),
                expected,
                got: event.seq,
            });
        }
        let mut line = serde_json::to_vec(event).map_err(|e| StorageError::Corrupt(e.to_string()))?;
        line.push(b'\n');
        log.file.write_all(&line)?;
        log.file.sync_data()?;
        log.last_seq = event.seq;
        Ok(event.seq)
    }

    fn read_session(&self, session_id: &str) -> Result<Vec<LogEvent>, StorageError> {
        check_id(session_id)?;
        let path = self.events_path(session_id);
        if !path.exists() {
            return Err(StorageError::UnknownSession(session_id.to_string()));
        }
        // Hold the append lock so a concurrent append is never read half-written.
        let handle = self.log_file(session_id)?;
        let _guard = handle.lock().expect("log file lock poisoned");
        read_jsonl(&path)
    }

    fn put_session(&self, record: &SessionRecord) -> Result<(), StorageError> {
        check_id(&record.session_id)?;
        let path = self.record_path(&record.session_id);
        let tmp = path.with_extension("json.tmp");
        let data = serde_json::to_vec_pretty(record).map_err(|e| StorageError::Corrupt(e.to_string()))?;
        let mut f = File::create(&tmp)?;
        f.write_all(&data)?;
        f.sync_all()?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    fn get_session(&self, session_id: &str) -> Result<Option<SessionRecord>, StorageError> {
        check_id(session_id)?;
        let path = self.record_path(session_id);
        if !path.exists() {
            return Ok(None);
        }
        let data = fs::read(&path)?;
        serde_json::from_slice(&data)
            .map(Some)
            .map_err(|e| StorageError::Corrupt(format!("{}: {e}", path.display())))
    }

    fn list_sessions(&self, filter: &SessionFilter) -> Result<Vec<SessionRecord>, StorageError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(self.root.join("sessions"))? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let data = fs::read(&path)?;
            let record: SessionRecord = serde_json::from_slice(&data)
                .map_err(|e| StorageError::Corrupt(format!("{}: {e}", path.display())))?;
            if filter.matches(&record) {
                out.push(record);
            }
        }
        sort_records(&mut out);
        Ok(out)
    }
}

/// Storage backends selectable at startup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageKind {
    Memory,
    DocStore,
}

impl std::str::FromStr for StorageKind {
    type Err = StorageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "memory" => Ok(StorageKind::Memory),
            "docstore" => Ok(StorageKind::DocStore),
            other => Err(StorageError::Config(format!("unknown storage `{other}` (expected memory or docstore)"))),
        }
    }
}

/// Opens a driver. The docstore location is a directory path or a
/// `file://` URL.
pub fn open_storage(kind: StorageKind, location: Option<&str>) -> Result<Arc<dyn StorageDriver>, StorageError> {
    match kind {
        StorageKind::Memory => Ok(Arc::new(MemoryStore::new())),
        StorageKind::DocStore => {
            let loc = location.ok_or_else(|| StorageError::Config("docstore needs SHINE_STORAGE_URL".into()))?;
            let path = if loc.starts_with("file:") {
                url::Url::parse(loc)
                    .ok()
                    .and_then(|u| u.to_file_path().ok())
                    .ok_or_else(|| StorageError::Config(format!("bad file URL `{loc}`")))?
            } else if loc.contains("://") {
                return Err(StorageError::Config(format!("only file:// locations are supported, got `{loc}`")));
            } else {
                PathBuf::from(loc)
            };
            Ok(Arc::new(DocStore::open(path)?))
        }
    }
}

/// Reads `SHINE_STORAGE` (default memory) and `SHINE_STORAGE_URL`.
pub fn storage_from_env() -> Result<Arc<dyn StorageDriver>, StorageError> {
    let kind: StorageKind = std::env::var("SHINE_STORAGE").unwrap_or_else(|_| "memory".into()).parse()?;
    let url = std::env::var("SHINE_STORAGE_URL").ok();
    open_storage(kind, url.as_deref())
}
