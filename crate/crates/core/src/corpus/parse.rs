use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{CorpusError, StudyRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    Jsonl,
    Csv,
    Ris,
}

impl SourceFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Jsonl => "jsonl",
            Self::Csv => "csv",
            Self::Ris => "ris",
        }
    }
}

impl fmt::Display for SourceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "jsonl" | "ndjson" => Ok(Self::Jsonl),
            "csv" => Ok(Self::Csv),
            "ris" => Ok(Self::Ris),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

/// An input entry that could not be turned into a record. `line` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseOutcome {
    pub records: Vec<StudyRecord>,
    pub rejects: Vec<Reject>,
}

/// Parses a batch. Malformed entries land in `rejects`; only an empty or non-UTF-8 payload
/// fails the whole call.
pub fn parse_records(payload: &[u8], format: SourceFormat) -> Result<ParseOutcome, CorpusError> {
    let text = std::str::from_utf8(payload)?;
    if text.trim().is_empty() {
        return Err(CorpusError::EmptyPayload);
    }
    let mut outcome = match format {
        SourceFormat::Jsonl => parse_jsonl(text),
        SourceFormat::Csv => parse_csv(text),
        SourceFormat::Ris => parse_ris(text),
    };
    for record in &mut outcome.records {
        if record.source_tag.is_empty() {
            record.source_tag = format.as_str().to_string();
        }
    }
    Ok(outcome)
}

fn accept(outcome: &mut ParseOutcome, line: usize, mut record: StudyRecord) {
    record.normalize_entities();
    match record.validate() {
        Ok(()) => outcome.records.push(record),
        Err(err) => outcome.rejects.push(Reject {
            line,
            reason: err.to_string(),
        }),
    }
}

fn parse_jsonl(text: &str) -> ParseOutcome {
    let mut outcome = ParseOutcome::default();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<StudyRecord>(line) {
            Ok(record) => accept(&mut outcome, n + 1, record),
            Err(err) => outcome.rejects.push(Reject {
                line: n + 1,
                reason: err.to_string(),
            }),
        }
    }
    outcome
}

fn split_list(cell: &str) -> Vec<String> {
    cell.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn parse_csv(text: &str) -> ParseOutcome {
    let mut outcome = ParseOutcome::default();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = match reader.headers() {
        Ok(h) => h.iter().map(|h| h.trim().to_ascii_lowercase()).collect::<Vec<_>>(),
        Err(err) => {
            outcome.rejects.push(Reject {
                line: 1,
                reason: format!("bad header row: {err}"),
            });
            return outcome;
        }
    };
    for row in reader.records() {
        let row = match row {
            Ok(row) => row,
            Err(err) => {
                let line = err.position().map(|p| p.line() as usize).unwrap_or(0);
                outcome.rejects.push(Reject {
                    line,
                    reason: err.to_string(),
                });
                continue;
            }
        };
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let mut record = StudyRecord::new("", "");
        let mut bad_year = None;
        for (header, cell) in headers.iter().zip(row.iter()) {
            let cell = cell.trim();
            if cell.is_empty() {
                continue;
            }
            match header.as_str() {
                "id" => record.id = cell.to_string(),
                "title" => record.title = cell.to_string(),
                "abstract" => record.abstract_text = Some(cell.to_string()),
                "year" => match cell.parse::<i32>() {
                    Ok(y) => record.year = Some(y),
                    Err(_) => bad_year = Some(cell.to_string()),
                },
                "venue" => record.venue = Some(cell.to_string()),
                "authors" => record.authors = split_list(cell),
                "interventions" => record.interventions = Some(split_list(cell)),
                "outcomes" => record.outcomes = Some(split_list(cell)),
                "population" => record.population = Some(split_list(cell)),
                "source_tag" => record.source_tag = cell.to_string(),
                other => {
                    record.raw.insert(other.to_string(), Value::String(cell.to_string()));
                }
            }
        }
        if let Some(year) = bad_year {
            outcome.rejects.push(Reject {
                line,
                reason: format!("year {year:?} is not an integer"),
            });
            continue;
        }
        accept(&mut outcome, line, record);
    }
    outcome
}

/// Splits `"TI  - Some title"` into (`"TI"`, `"Some title"`).
fn ris_tag(line: &str) -> Option<(&str, &str)> {
    let bytes = line.as_bytes();
    if bytes.len() < 5 || !line.is_char_boundary(2) {
        return None;
    }
    let tag = &line[..2];
    if !tag.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit()) {
        return None;
    }
    if &bytes[2..5] != b"  -" {
        return None;
    }
    Some((tag, line[5..].trim()))
}

fn parse_ris(text: &str) -> ParseOutcome {
    let mut outcome = ParseOutcome::default();
    let mut fields: Vec<(String, String)> = Vec::new();
    let mut start_line = 0;
    let mut in_entry = false;

    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        match ris_tag(line) {
            Some(("ER", _)) => {
                if in_entry {
                    finish_ris_entry(&mut outcome, start_line, std::mem::take(&mut fields));
                }
                in_entry = false;
            }
            Some((tag, value)) => {
                if !in_entry {
                    in_entry = true;
                    start_line = n + 1;
                }
                fields.push((tag.to_string(), value.to_string()));
            }
            None if line.trim().is_empty() => {}
            None => match fields.last_mut() {
                // continuation of a wrapped value
                Some((_, value)) if in_entry => {
                    value.push(' ');
                    value.push_str(line.trim());
                }
                _ => outcome.rejects.push(Reject {
                    line: n + 1,
                    reason: "text outside of a RIS entry".to_string(),
                }),
            },
        }
    }
    if in_entry {
        outcome.rejects.push(Reject {
            line: start_line,
            reason: "entry not terminated by ER".to_string(),
        });
    }
    outcome
}

fn finish_ris_entry(outcome: &mut ParseOutcome, line: usize, fields: Vec<(String, String)>) {
    let mut record = StudyRecord::new("", "");
    let mut extra: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (tag, value) in fields {
        match tag.as_str() {
            "ID" => record.id = value,
            "TI" | "T1" if record.title.is_empty() => record.title = value,
            "AB" | "N2" if record.abstract_text.is_none() => record.abstract_text = Some(value),
            "PY" | "Y1" if record.year.is_none() => {
                let digits: String = value.chars().take_while(|c| c.is_ascii_digit()).collect();
                match digits.parse::<i32>() {
                    Ok(y) if digits.len() == 4 => record.year = Some(y),
                    _ => {
                        outcome.rejects.push(Reject {
                            line,
                            reason: format!("unparseable year {value:?}"),
                        });
                        return;
                    }
                }
            }
            "AU" | "A1" => record.authors.push(value),
            "JO" | "JF" | "T2" if record.venue.is_none() => record.venue = Some(value),
            _ => extra.entry(tag).or_default().push(value),
        }
    }
    for (tag, mut values) in extra {
        let value = if values.len() == 1 {
            Value::String(values.remove(0))
        } else {
            Value::Array(values.into_iter().map(Value::String).collect())
        };
        record.raw.insert(tag, value);
    }
    if record.id.is_empty() {
        outcome.rejects.push(Reject {
            line,
            reason: "missing ID tag".to_string(),
        });
        return;
    }
    accept(outcome, line, record);
}

/// One JSON object per line, the same schema [`parse_records`] reads.
pub fn records_to_jsonl(records: &[StudyRecord]) -> String {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn rejects_to_jsonl(rejects: &[Reject]) -> String {
    let mut out = String::new();
    for reject in rejects {
        out.push_str(&serde_json::to_string(reject).expect("rejects serialize"));
        out.push('\n');
    }
    out
}
