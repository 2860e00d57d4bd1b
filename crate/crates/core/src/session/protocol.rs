//! Wire types for the session protocol: one JSON object per line in each
//! direction. Every command carries a sequence number and is answered by
//! exactly one event with the same number; the server's greeting uses 0.

use serde::{Deserialize, Serialize};

use crate::metrics::MetricsReport;
use crate::sim::{Action, ActionResult, Observation};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandFrame {
    pub seq: u64,
    #[serde(flatten)]
    pub command: SessionCommand,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum SessionCommand {
    Reset { episode_id: String },
    Step { action: Action },
    Observe,
    Snapshot,
    End,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventFrame {
    pub seq: u64,
    #[serde(flatten)]
    pub event: SessionEvent,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChecklistChange {
    pub index: usize,
    pub satisfied: bool,
}

/// Checklist flags that changed with one action.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChecklistDelta {
    pub changes: Vec<ChecklistChange>,
    pub satisfied: usize,
    pub total: usize,
}

impl ChecklistDelta {
    pub fn between(before: &[bool], after: &[bool]) -> Self {
        let changes = before
            .iter()
            .zip(after)
            .enumerate()
            .filter(|(_, (b, a))| b != a)
            .map(|(index, (_, a))| ChecklistChange { index, satisfied: *a })
            .collect();
        Self { changes, satisfied: after.iter().filter(|b| **b).count(), total: after.len() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Hello {
        protocol_version: u32,
        episodes: Vec<String>,
    },
    /// Answer to Reset and Observe; carries the full checklist.
    Observation {
        episode_id: String,
        observation: Observation,
        checklist: Vec<String>,
        satisfied: Vec<bool>,
        total_actions: u64,
        nav_steps: u64,
        manip_steps: u64,
    },
    /// Answer to Step.
    ActionResult {
        action_index: u64,
        metric_step: u64,
        result: ActionResult,
        observation: Observation,
        done: bool,
        nav_steps: u64,
        manip_steps: u64,
        checklist: ChecklistDelta,
    },
    Snapshot {
        world: serde_json::Value,
    },
    /// Answer to End.
    Metrics {
        report: MetricsReport,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        log_file: Option<String>,
    },
    Error {
        code: String,
        message: String,
    },
}

impl EventFrame {
    pub fn error(seq: u64, code: &str, message: impl Into<String>) -> Self {
        Self { seq, event: SessionEvent::Error { code: code.into(), message: message.into() } }
    }
}
