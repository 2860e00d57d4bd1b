//! Trajectory logs: one header plus one record per primitive action, stored
//! as JSON lines.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::sim::{Action, ActionResult};

pub const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema_version: u32,
    pub episode_id: String,
    pub seed: u64,
    /// SHA-256 of the canonical JSON of the configuration in force.
    pub config_digest: String,
    /// Who drove the session, e.g. `oracle`, `greedy-template` or `human`.
    pub driver: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub action_index: u64,
    /// Metric steps (navigation plus manipulation) after this action.
    pub metric_step: u64,
    pub action: Action,
    pub result: ActionResult,
    /// Checklist items satisfied so far under the ever-satisfied convention.
    pub satisfied: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directive: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
enum LogLine {
    Header(LogHeader),
    Record(LogRecord),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryLog {
    pub header: LogHeader,
    pub records: Vec<LogRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("log has no header")]
    MissingHeader,
    #[error("record {index} has action_index {found}")]
    NonContiguous { index: usize, found: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Hex SHA-256 of a value's JSON form.
pub fn config_digest<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

impl TrajectoryLog {
    pub fn new(header: LogHeader) -> Self {
        Self { header, records: Vec::new() }
    }

    pub fn header_line(&self) -> String {
        serde_json::to_string(&LogLine::Header(self.header.clone())).expect("header serializes")
    }

    pub fn record_line(record: &LogRecord) -> String {
        serde_json::to_string(&LogLine::Record(record.clone())).expect("record serializes")
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{}", self.header_line())?;
        for r in &self.records {
            writeln!(w, "{}", Self::record_line(r))?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<Self, LogError> {
        let mut header = None;
        let mut records = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: LogLine = serde_json::from_str(&line)
                .map_err(|e| LogError::Malformed { line: i + 1, message: e.to_string() })?;
            match parsed {
                LogLine::Header(h) if header.is_none() && records.is_empty() => header = Some(h),
                LogLine::Header(_) => {
                    return Err(LogError::Malformed { line: i + 1, message: "unexpected header".into() })
                }
                LogLine::Record(r) => {
                    if r.action_index != records.len() as u64 {
                        return Err(LogError::NonContiguous { index: records.len(), found: r.action_index });
                    }
                    records.push(r)
                }
            }
        }
        Ok(Self { header: header.ok_or(LogError::MissingHeader)?, records })
    }

    pub fn from_jsonl(s: &str) -> Result<Self, LogError> {
        Self::read_jsonl(s.as_bytes())
    }

    pub fn actions(&self) -> impl Iterator<Item = &Action> {
        self.records.iter().map(|r| &r.action)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TrajectoryLog {
        let mut log = TrajectoryLog::new(LogHeader {
            schema_version: LOG_SCHEMA_VERSION,
            episode_id: "e".into(),
            seed: 1,
            config_digest: config_digest(&1u32),
            driver: "test".into(),
        });
        log.records.push(LogRecord {
            action_index: 0,
            metric_step: 1,
            action: Action::RotateLeft,
            result: ActionResult::ok("rotated"),
            satisfied: 0,
            directive: Some("Pass".into()),
            diagnostic: None,
        });
        log
    }

    #[test]
    fn jsonl_round_trip() {
        let log = sample();
        assert_eq!(TrajectoryLog::from_jsonl(&log.to_jsonl()).unwrap(), log);
    }

    #[test]
    fn gaps_are_rejected() {
        let mut log = sample();
        log.records[0].action_index = 3;
        assert!(matches!(TrajectoryLog::from_jsonl(&log.to_jsonl()), Err(LogError::NonContiguous { .. })));
    }
}
