//! Episodes, checklists and the procedural episode generator.

pub mod checklist;
pub mod episode;
pub mod generator;
pub mod selector;
pub mod witness;

pub use checklist::{evaluate_all, evaluate_item, CategoryTag, ChecklistItem, Condition, ReceptacleRef};
pub use episode::{Episode, Scenario, EPISODE_SCHEMA_VERSION};
pub use generator::generate_episode;
pub use selector::{resolve_selector, ObjectSelector, Relation};

#[derive(Debug, thiserror::Error)]
pub enum TaskError {
    #[error("unknown object category `{0}`")]
    UnknownCategory(String),
    #[error("episode generation failed: {0}")]
    GenerationFailed(String),
    #[error("schema violation at `{path}`: {message}")]
    SchemaViolation { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
