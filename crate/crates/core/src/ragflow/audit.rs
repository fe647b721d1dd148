use std::fs::{File, OpenOptions};
use std::io::{ErrorKind, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{QueryTrace, RagError};

/// A reviewer decision on a screened record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewAction {
    pub record_id: String,
    pub decision: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reviewer: Option<String>,
    #[serde(default)]
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuditEvent {
    Query { trace: Box<QueryTrace> },
    Review(ReviewAction),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub seq: u64,
    pub logged_at: DateTime<Utc>,
    pub event: AuditEvent,
}

/// Append-only audit trail. On disk each record is `<byte length>\t<json>\n`, synced before the
/// append returns. Opening a file with a torn tail keeps every complete record and cuts the rest.
#[derive(Debug, Default)]
pub struct AuditLog {
    records: Vec<AuditRecord>,
    file: Option<File>,
    path: Option<PathBuf>,
    bytes: u64,
    max_bytes: Option<u64>,
    recovered_bytes: u64,
}

/// Parses complete records from the start of `data`, returning them with the valid prefix length.
fn scan(data: &[u8]) -> (Vec<AuditRecord>, usize) {
    let mut records: Vec<AuditRecord> = Vec::new();
    let mut pos = 0;
    while pos < data.len() {
        let Some(tab) = data[pos..].iter().position(|&b| b == b'\t') else {
            break;
        };
        let Some(len) = std::str::from_utf8(&data[pos..pos + tab]).ok().and_then(|s| s.parse::<usize>().ok()) else {
            break;
        };
        let start = pos + tab + 1;
        let end = start + len;
        if end >= data.len() || data[end] != b'\n' {
            break;
        }
        let Ok(record) = serde_json::from_slice::<AuditRecord>(&data[start..end]) else {
            break;
        };
        if records.last().is_some_and(|r| r.seq >= record.seq) {
            break;
        }
        records.push(record);
        pos = end + 1;
    }
    (records, pos)
}

impl AuditLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: &Path, max_bytes: Option<u64>) -> Result<Self, RagError> {
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(path)?;
        let mut data = Vec::new();
        file.read_to_end(&mut data)?;
        let (records, valid) = scan(&data);
        let recovered_bytes = (data.len() - valid) as u64;
        if recovered_bytes > 0 {
            file.set_len(valid as u64)?;
            file.sync_data()?;
        }
        Ok(Self {
            records,
            file: Some(file),
            path: Some(path.to_path_buf()),
            bytes: valid as u64,
            max_bytes,
            recovered_bytes,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Bytes of torn tail discarded when the log was opened.
    pub fn recovered_bytes(&self) -> u64 {
        self.recovered_bytes
    }

    pub fn records(&self) -> &[AuditRecord] {
        &self.records
    }

    pub fn next_seq(&self) -> u64 {
        self.records.last().map_or(1, |r| r.seq + 1)
    }

    pub fn append(&mut self, event: AuditEvent) -> Result<&AuditRecord, RagError> {
        let record = AuditRecord {
            seq: self.next_seq(),
            logged_at: Utc::now(),
            event,
        };
        let json = serde_json::to_string(&record).expect("plain data");
        let line = format!("{}\t{}\n", json.len(), json);
        let needed = self.bytes + line.len() as u64;
        if let Some(limit) = self.max_bytes {
            if needed > limit {
                return Err(RagError::StorageFull { needed, limit });
            }
        }
        if let Some(file) = &mut self.file {
            let written = file.write_all(line.as_bytes()).and_then(|_| file.sync_data());
            if let Err(e) = written {
                return Err(match e.kind() {
                    ErrorKind::StorageFull => RagError::StorageFull {
                        needed,
                        limit: self.bytes,
                    },
                    _ => RagError::Io(e),
                });
            }
        }
        self.bytes = needed;
        self.records.push(record);
        Ok(self.records.last().expect("just pushed"))
    }

    pub fn log_interaction(&mut self, trace: QueryTrace) -> Result<&AuditRecord, RagError> {
        self.append(AuditEvent::Query { trace: Box::new(trace) })
    }

    pub fn traces(&self) -> impl Iterator<Item = &QueryTrace> {
        self.records.iter().filter_map(|r| match &r.event {
            AuditEvent::Query { trace } => Some(trace.as_ref()),
            AuditEvent::Review(_) => None,
        })
    }
}
