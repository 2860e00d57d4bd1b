//! Hierarchical agent: goal-graph planning, refinement against episodic
//! memory, grounding against spatial memory, skill execution and critic
//! supervision. All reasoning goes through the [`Reasoner`] trait.

pub mod critic;
pub mod dag;
pub mod env;
pub mod executor;
pub mod external;
pub mod map;
pub mod reasoner;
pub mod refine;
pub mod run;

pub use critic::{distill_experience, Critic, CriticContext, CriticDirective, ExperiencePool, ExperiencePoolEntry, FailureSignature, Review};
pub use dag::{decompose, next_goal, Goal, GoalDag, GoalId};
pub use env::{floor_plan_of, DirectEnv, Environment, StepOutcome};
pub use executor::Executor;
pub use external::{ExternalReasoner, ProcessTransport, Transport};
pub use map::KnownMap;
pub use reasoner::{
    DecomposeRequest, GreedyTemplateReasoner, NoopReasoner, OracleReasoner, RandomReasoner, Reasoner, SceneSummary,
    SkillCall,
};
pub use refine::{ground_subgoals, refine_goal, Binding, GroundingContext, NavTarget, RefinedGoal, SubGoal};
pub use run::{run_episode, AgentConfig, DirectiveRecord, EpisodeOutcome};

use crate::sim::ErrorCode;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgentError {
    #[error("malformed plan: {0}")]
    MalformedPlan(String),
    #[error("malformed refinement: {0}")]
    MalformedRefinement(String),
    #[error("goal graph has pending goals but none is ready")]
    DeadlockedDag,
    #[error("subgoal failed with {code} after {attempts} attempts")]
    SubgoalFailed { code: ErrorCode, attempts: usize },
    #[error("experience entry was never validated")]
    NotValidated,
    #[error("reasoner error: {0}")]
    Reasoner(String),
    #[error("episode is over")]
    EpisodeOver,
}
