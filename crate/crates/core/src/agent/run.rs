//! One episode end to end: decompose, pick the next goal, refine, execute
//! under the critic, and distill what was learned.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::critic::{distill_experience, Critic, CriticDirective};
use super::dag::{decompose, next_goal, GoalDag, GoalId};
use super::env::Environment;
use super::executor::Executor;
use super::reasoner::{Reasoner, SceneSummary};
use super::refine::SubGoal;
use super::AgentError;
use crate::memory::{EpisodicEvent, EpisodicMemory, ExperienceRule, MemoryConfig, Remedy};
use crate::sim::{Action, SimConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    /// Refine directives per subgoal before the critic asks for a replan.
    pub refine_budget: usize,
    /// Replans per goal before it is skipped.
    pub max_replans: usize,
    /// Start with the built-in experience rules.
    pub seed_experience: bool,
    /// Carry distilled rules into the next episode.
    pub cross_episode_experience: bool,
    pub memory: MemoryConfig,
    /// Reach and view thresholds the agent plans with.
    pub sim: SimConfig,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            refine_budget: 2,
            max_replans: 3,
            seed_experience: true,
            cross_episode_experience: true,
            memory: MemoryConfig::default(),
            sim: SimConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectiveRecord {
    pub goal: Option<GoalId>,
    pub subgoal_kind: String,
    /// Actions issued when the directive was given.
    pub action_index: u64,
    pub directive: CriticDirective,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub reasoner: String,
    pub dag: GoalDag,
    /// Goals in the order they were first attempted.
    pub goal_order: Vec<GoalId>,
    pub failed_attempts: usize,
    pub directives: Vec<DirectiveRecord>,
    /// Rules to hand to the next episode.
    pub experience: Vec<ExperienceRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn run_direct(env: &mut dyn Environment, reasoner: &mut dyn Reasoner, out: &mut EpisodeOutcome) {
    while !env.is_done() {
        let obs = env.observation();
        let Some(a) = reasoner.policy(&obs) else { break };
        if !env.step(&a).result.success {
            out.failed_attempts += 1;
        }
    }
    if !env.is_done() {
        env.step(&Action::Stop);
    }
}

fn run_goals(
    ex: &mut Executor<'_>,
    dag: &mut GoalDag,
    reasoner: &mut dyn Reasoner,
    config: &AgentConfig,
    out: &mut EpisodeOutcome,
) -> Result<(), AgentError> {
    let mut replans: BTreeMap<GoalId, usize> = BTreeMap::new();
    while !ex.is_done() {
        let Some(id) = next_goal(dag, ex.here(), |g| ex.locate_cell(&g.target))? else { break };
        if !out.goal_order.contains(&id) {
            out.goal_order.push(id);
        }
        let goal = dag.nodes[&id].clone();
        let attempt = reasoner.refine(&goal, &ex.episodic).and_then(|rg| {
            rg.check()?;
            for remedy in &rg.prelude {
                if *remedy == Remedy::PutDownHeld {
                    ex.execute_subgoal(&SubGoal::PutDownHeld, reasoner)?;
                }
            }
            ex.run_goal(&rg, reasoner)
        });
        match attempt {
            Ok(()) => {
                dag.completed.insert(id);
            }
            Err(AgentError::EpisodeOver) => return Err(AgentError::EpisodeOver),
            Err(e) => {
                let n = replans.entry(id).or_insert(0);
                *n += 1;
                log::debug!("goal {id} failed ({e}), replan {n}");
                if *n > config.max_replans {
                    dag.skipped.insert(id);
                }
            }
        }
    }
    Ok(())
}

/// Runs the agent until every goal is resolved or the episode ends, then
/// issues `Stop`. `carried` are rules distilled in earlier episodes.
pub fn run_episode(
    env: &mut dyn Environment,
    instruction: &str,
    reasoner: &mut dyn Reasoner,
    config: &AgentConfig,
    carried: &[ExperienceRule],
) -> EpisodeOutcome {
    let mut out = EpisodeOutcome { reasoner: reasoner.name(), ..EpisodeOutcome::default() };
    if reasoner.direct_control() {
        run_direct(env, reasoner, &mut out);
        out.experience = carried.to_vec();
        return out;
    }

    let mut episodic = if config.seed_experience { EpisodicMemory::with_seed_rules() } else { EpisodicMemory::default() };
    for r in carried {
        episodic.record(EpisodicEvent::Experience(r.clone()));
    }
    let mut ex = Executor::new(env, config.sim.clone(), config.memory.clone(), episodic, Critic::new(config.refine_budget));
    let scene = SceneSummary {
        rooms: ex.floor_plan.rooms.iter().map(|r| r.name.clone()).collect(),
        visible: ex.observation().visible.iter().map(|v| v.category.clone()).collect(),
    };

    let result = decompose(instruction, &scene, reasoner).and_then(|mut dag| {
        let r = run_goals(&mut ex, &mut dag, reasoner, config, &mut out);
        out.dag = dag;
        r
    });
    match result {
        Ok(()) | Err(AgentError::EpisodeOver) => {}
        Err(e) => out.error = Some(e.to_string()),
    }
    if !ex.is_done() {
        let _ = ex.act_primitive(Action::Stop);
    }

    for entry in ex.critic.pool.entries.iter().filter(|e| e.validated) {
        if let Ok(epi) = distill_experience(entry, std::mem::take(&mut ex.episodic)) {
            ex.episodic = epi;
        }
    }
    out.failed_attempts = ex.failed_attempts;
    out.directives = std::mem::take(&mut ex.directives);
    out.experience = if config.cross_episode_experience { ex.episodic.experience.clone() } else { carried.to_vec() };
    out
}
