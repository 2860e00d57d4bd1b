//! Spatial memory (object map with spatial and semantic indices) and
//! episodic memory (status, history, experience).

pub mod embedding;
pub mod episodic;
pub mod spatial;
pub mod verify;

pub use embedding::{embed, AttributeSnapshot, EmbeddingProvider, FeatureVector, HashingEmbedder, DEFAULT_DIM};
pub use episodic::{AgentStatus, EpisodicEvent, EpisodicMemory, ExperienceRule, HistoryEntry, HistoryObject, Remedy, RulePattern};
pub use spatial::{MemId, MemoryConfig, MemoryObject, SpatialMemory, UpdateSummary, ViewRecord};
pub use verify::{locate, RuleVerifier, Verifier, VerifyContext};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MemoryError {
    #[error("memory is empty")]
    EmptyMemory,
}
