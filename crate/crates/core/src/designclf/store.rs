use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{DesignError, DesignLabel, DesignProvider};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredDesignLabel {
    pub record_id: String,
    pub provider: DesignProvider,
    pub labeled_at: DateTime<Utc>,
    pub label: DesignLabel,
}

/// Append-only label history, optionally mirrored to a JSONL file.
#[derive(Debug, Default)]
pub struct DesignStore {
    entries: Vec<StoredDesignLabel>,
    path: Option<PathBuf>,
}

impl DesignStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or starts) the JSONL file at `path`, loading existing entries.
    pub fn open(path: &Path) -> Result<Self, DesignError> {
        let mut entries = Vec::new();
        if path.exists() {
            for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                entries.push(serde_json::from_str(&line).map_err(|e| DesignError::Corrupt {
                    line: i + 1,
                    reason: e.to_string(),
                })?);
            }
        }
        Ok(Self {
            entries,
            path: Some(path.to_path_buf()),
        })
    }

    pub fn append(&mut self, record_id: &str, provider: DesignProvider, label: DesignLabel) -> Result<&StoredDesignLabel, DesignError> {
        let entry = StoredDesignLabel {
            record_id: record_id.to_string(),
            provider,
            labeled_at: Utc::now(),
            label,
        };
        if let Some(path) = &self.path {
            let mut file = OpenOptions::new().create(true).append(true).open(path)?;
            let mut line = serde_json::to_string(&entry).expect("plain data");
            line.push('\n');
            file.write_all(line.as_bytes())?;
        }
        self.entries.push(entry);
        Ok(self.entries.last().expect("just pushed"))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn history<'a>(&'a self, record_id: &'a str) -> impl Iterator<Item = &'a StoredDesignLabel> + 'a {
        self.entries.iter().filter(move |e| e.record_id == record_id)
    }

    /// Most recent label for the record, optionally from one provider only.
    pub fn latest(&self, record_id: &str, provider: Option<DesignProvider>) -> Option<&StoredDesignLabel> {
        self.entries
            .iter()
            .rfind(|e| e.record_id == record_id && provider.is_none_or(|p| e.provider == p))
    }

    /// Record ids whose latest rule and LLM labels name different leaves.
    pub fn disagreements(&self) -> Vec<String> {
        let mut ids: Vec<&str> = self.entries.iter().map(|e| e.record_id.as_str()).collect();
        ids.sort();
        ids.dedup();
        ids.into_iter()
            .filter(|id| {
                match (self.latest(id, Some(DesignProvider::Rules)), self.latest(id, Some(DesignProvider::Llm))) {
                    (Some(a), Some(b)) => a.label.leaf() != b.label.leaf(),
                    _ => false,
                }
            })
            .map(str::to_string)
            .collect()
    }
}
