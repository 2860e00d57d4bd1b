//! Deterministic grid-world household simulator.

pub mod catalog;
pub mod layout;
pub mod types;
pub mod world;

pub use catalog::{Affordance, CategorySpec, Placement};
pub use layout::generate_layout;
pub use types::*;
pub use world::{validate_layout, Grid, SimConfig, StepCost, Violation, WorldState, EPISODE_ACTION_CAP};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SimError {
    #[error("unknown object {0}")]
    UnknownObject(ObjectId),
}
