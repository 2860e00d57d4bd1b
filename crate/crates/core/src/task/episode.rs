//! Episode definition and its JSON schema.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::checklist::ChecklistItem;
use super::TaskError;
use crate::sim::{Action, HouseLayout};

pub const EPISODE_SCHEMA_VERSION: u32 = 1;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "Daily Cleaning & Tidying")]
    CleaningTidying,
    #[serde(rename = "Work & Study Preparation")]
    WorkStudy,
    #[serde(rename = "Rest & Entertainment")]
    RestEntertainment,
    #[serde(rename = "Dining & Kitchen Related")]
    DiningKitchen,
}

impl Scenario {
    pub const ALL: [Scenario; 4] =
        [Scenario::CleaningTidying, Scenario::WorkStudy, Scenario::RestEntertainment, Scenario::DiningKitchen];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::CleaningTidying => "Daily Cleaning & Tidying",
            Scenario::WorkStudy => "Work & Study Preparation",
            Scenario::RestEntertainment => "Rest & Entertainment",
            Scenario::DiningKitchen => "Dining & Kitchen Related",
        }
    }

    /// Short machine-friendly name used in file names and CLI flags.
    pub fn slug(self) -> &'static str {
        match self {
            Scenario::CleaningTidying => "cleaning",
            Scenario::WorkStudy => "work",
            Scenario::RestEntertainment => "rest",
            Scenario::DiningKitchen => "dining",
        }
    }

    pub fn from_slug(s: &str) -> Option<Scenario> {
        Scenario::ALL.into_iter().find(|sc| sc.slug() == s || sc.name() == s)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub schema_version: u32,
    pub id: String,
    pub scenario: Scenario,
    pub seed: u64,
    pub layout: HouseLayout,
    pub instruction_detailed: String,
    pub instruction_concise: String,
    pub checklist: Vec<ChecklistItem>,
    pub goal_count: usize,
    /// Primitive action plan that satisfies the whole checklist.
    pub witness_plan: Vec<Action>,
}

fn violation(path: impl Into<String>, message: impl Into<String>) -> TaskError {
    TaskError::SchemaViolation { path: path.into(), message: message.into() }
}

impl Episode {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("episode serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, TaskError> {
        let de = &mut serde_json::Deserializer::from_str(s);
        let ep: Episode = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            violation(if path == "." { String::new() } else { path }, e.into_inner().to_string())
        })?;
        ep.check()?;
        Ok(ep)
    }

    pub fn load(path: &Path) -> Result<Self, TaskError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), TaskError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Semantic checks the type system cannot express.
    pub fn check(&self) -> Result<(), TaskError> {
        if self.schema_version != EPISODE_SCHEMA_VERSION {
            return Err(violation("schema_version", format!("unsupported version {}", self.schema_version)));
        }
        if self.goal_count != self.checklist.len() {
            return Err(violation("goal_count", "must equal the checklist length"));
        }
        if self.goal_count < 2 {
            return Err(violation("goal_count", "at least two goals are required"));
        }
        for (i, item) in self.checklist.iter().enumerate() {
            if !item.tag_consistent() {
                return Err(violation(format!("checklist[{i}].category"), "tag does not match the condition"));
            }
        }
        Ok(())
    }
}
