//! Episodic memory: agent status, subgoal history and experience rules.

use serde::{Deserialize, Serialize};

use crate::sim::{ErrorCode, ObjectId, Pose};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentStatus {
    pub held_object: Option<ObjectId>,
    pub pose: Option<Pose>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryObject {
    pub id: ObjectId,
    pub category: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub goal_id: Option<u32>,
    pub subgoal: String,
    /// Kind of the subgoal, e.g. `PickUp`.
    pub kind: String,
    pub objects: Vec<HistoryObject>,
    pub success: bool,
    pub step: u64,
}

/// Corrective behaviour attached to a failure pattern.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Remedy {
    RotateToward,
    StepCloser,
    OpenContainer,
    PlaceOnSurface,
    PutDownHeld,
    FetchKnife,
    ReplanPath,
}

impl Remedy {
    pub fn text(self) -> &'static str {
        match self {
            Remedy::RotateToward => "rotate toward target",
            Remedy::StepCloser => "step closer to target",
            Remedy::OpenContainer => "open the enclosing container",
            Remedy::PlaceOnSurface => "place the target on a flat surface",
            Remedy::PutDownHeld => "put down the held object",
            Remedy::FetchKnife => "fetch a knife",
            Remedy::ReplanPath => "replan the path around the obstacle",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RulePattern {
    pub subgoal_kind: String,
    pub error: ErrorCode,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperienceRule {
    pub pattern: RulePattern,
    pub guidance: String,
    pub remedy: Remedy,
    pub origin_episode: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum EpisodicEvent {
    Outcome(HistoryEntry),
    Status(AgentStatus),
    Experience(ExperienceRule),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodicMemory {
    pub status: AgentStatus,
    pub history: Vec<HistoryEntry>,
    pub experience: Vec<ExperienceRule>,
}

/// Rules every agent starts with unless seeding is turned off.
pub fn seed_rules() -> Vec<ExperienceRule> {
    vec![
        ExperienceRule {
            pattern: RulePattern { subgoal_kind: "PickUp".into(), error: ErrorCode::HandFull },
            guidance: "only one object can be held at a time".into(),
            remedy: Remedy::PutDownHeld,
            origin_episode: "seed".into(),
        },
        ExperienceRule {
            pattern: RulePattern { subgoal_kind: "Slice".into(), error: ErrorCode::InvalidTarget },
            guidance: "objects must be placed on a flat surface prior to manipulation".into(),
            remedy: Remedy::PlaceOnSurface,
            origin_episode: "seed".into(),
        },
    ]
}

impl EpisodicMemory {
    pub fn with_seed_rules() -> Self {
        Self { experience: seed_rules(), ..Self::default() }
    }

    /// Applies one event: history appends, status overwrites, experience
    /// rules are deduplicated by pattern. Returns whether anything changed.
    pub fn record(&mut self, event: EpisodicEvent) -> bool {
        match event {
            EpisodicEvent::Outcome(h) => {
                self.history.push(h);
                true
            }
            EpisodicEvent::Status(s) => {
                let changed = self.status != s;
                self.status = s;
                changed
            }
            EpisodicEvent::Experience(rule) => {
                if self.experience.iter().any(|r| r.pattern == rule.pattern) {
                    false
                } else {
                    self.experience.push(rule);
                    true
                }
            }
        }
    }

    /// Most recent successfully handled object of a category.
    pub fn recent_object(&self, category: &str) -> Option<ObjectId> {
        self.history
            .iter()
            .rev()
            .filter(|h| h.success)
            .flat_map(|h| h.objects.iter())
            .find(|o| o.category == category)
            .map(|o| o.id)
    }

    pub fn rule_for(&self, subgoal_kind: &str, error: ErrorCode) -> Option<&ExperienceRule> {
        self.experience.iter().find(|r| r.pattern.subgoal_kind == subgoal_kind && r.pattern.error == error)
    }

    /// Remedies to apply before a subgoal of this kind, from known rules.
    pub fn proactive_remedies(&self, subgoal_kind: &str) -> Vec<Remedy> {
        self.experience.iter().filter(|r| r.pattern.subgoal_kind == subgoal_kind).map(|r| r.remedy).collect()
    }

    /// Clears per-episode state but keeps experience.
    pub fn start_episode(&mut self) {
        self.status = AgentStatus::default();
        self.history.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn history_appends_and_rules_dedup() {
        let mut m = EpisodicMemory::with_seed_rules();
        let h = HistoryEntry {
            goal_id: Some(1),
            subgoal: "pick".into(),
            kind: "PickUp".into(),
            objects: vec![],
            success: true,
            step: 3,
        };
        assert!(m.record(EpisodicEvent::Outcome(h)));
        assert_eq!(m.history.len(), 1);
        let n = m.experience.len();
        assert!(!m.record(EpisodicEvent::Experience(seed_rules()[0].clone())));
        assert_eq!(m.experience.len(), n);
    }

    #[test]
    fn seed_rules_cover_single_hand_and_flat_surface() {
        let m = EpisodicMemory::with_seed_rules();
        assert!(m.experience.iter().any(|r| r.guidance.contains("only one object can be held at a time")));
        assert!(m.experience.iter().any(|r| r.guidance.contains("placed on a flat surface")));
    }
}
