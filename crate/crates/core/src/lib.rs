//! Long-horizon household activity: simulator, task specifications, metrics,
//! spatial memory, a hierarchical agent and session tooling.

pub mod geom;
pub mod sim;
pub mod nav;
pub mod task;
pub mod metrics;
pub mod trajectory;
pub mod memory;
pub mod agent;
pub mod par;
pub mod session;
