//! Episode lifecycle: live sessions with logging, replay, batch runs, the
//! line-delimited JSON protocol and its TCP server.

pub mod batch;
pub mod protocol;
pub mod server;
pub mod store;

pub use batch::{run_agent_episode, run_batch, Aggregates, AgentRun, EpisodeRun, ReasonerKind, RunConfig, RunManifest};
pub use protocol::{ChecklistChange, ChecklistDelta, CommandFrame, EventFrame, SessionCommand, SessionEvent, PROTOCOL_VERSION};
pub use server::{serve, Connection, ServerHandle};
pub use store::{CorpusEntry, CorpusManifest, EpisodeStore};

use serde::{Deserialize, Serialize};

use crate::agent::{floor_plan_of, Environment, StepOutcome};
use crate::metrics::{evaluate_log, report, MetricsError, MetricsReport, ScoreMode, ScoreTracker, DEFAULT_MAX_SEGMENTS};
use crate::sim::{Action, ActionResult, ErrorCode, HouseLayout, Observation, SimConfig, WorldState};
use crate::task::{Episode, TaskError};
use crate::trajectory::{config_digest, LogError, LogHeader, LogRecord, TrajectoryLog, LOG_SCHEMA_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("unknown episode `{0}`")]
    UnknownEpisode(String),
    #[error("session is closed")]
    SessionClosed,
    #[error("no episode loaded")]
    NoEpisode,
    #[error("log belongs to episode `{found}`, expected `{expected}`")]
    WrongEpisode { expected: String, found: String },
    #[error(transparent)]
    Replay(#[from] MetricsError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: String, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Everything that affects simulation and scoring. Its digest goes into
/// every log header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub sim: SimConfig,
    pub score_mode: ScoreMode,
    /// Maximum segmentation for the Improvement Rate.
    pub ir_segments: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self { sim: SimConfig::default(), score_mode: ScoreMode::EverSatisfied, ir_segments: DEFAULT_MAX_SEGMENTS }
    }
}

impl SessionConfig {
    pub fn digest(&self) -> String {
        config_digest(self)
    }
}

/// What one step produced.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReply {
    pub observation: Observation,
    pub result: ActionResult,
    pub done: bool,
    pub record: LogRecord,
}

/// A single-writer episode run: world state, score tracker and log.
pub struct Session {
    episode: Episode,
    config: SessionConfig,
    driver: String,
    world: WorldState,
    tracker: ScoreTracker,
    log: TrajectoryLog,
    ended: bool,
}

impl Session {
    pub fn new(episode: Episode, config: SessionConfig, driver: impl Into<String>) -> Self {
        let world = WorldState::from_layout(episode.layout.clone(), config.sim.clone());
        let tracker = ScoreTracker::new(&world, &episode.checklist, config.score_mode);
        let log = TrajectoryLog::new(LogHeader {
            schema_version: LOG_SCHEMA_VERSION,
            episode_id: episode.id.clone(),
            seed: episode.seed,
            config_digest: config.digest(),
            driver: driver.into(),
        });
        let driver = log.header.driver.clone();
        Self { episode, config, driver, world, tracker, log, ended: false }
    }

    /// Fresh world, zeroed counters, empty log.
    pub fn reset(&mut self) -> Observation {
        *self = Self::new(self.episode.clone(), self.config.clone(), self.driver.clone());
        self.world.render_observation()
    }

    pub fn episode(&self) -> &Episode {
        &self.episode
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn log(&self) -> &TrajectoryLog {
        &self.log
    }

    pub fn into_log(self) -> TrajectoryLog {
        self.log
    }

    pub fn is_closed(&self) -> bool {
        self.ended || self.world.terminated
    }

    pub fn satisfied(&self) -> usize {
        self.tracker.count()
    }

    pub fn checklist_flags(&self) -> &[bool] {
        match self.config.score_mode {
            ScoreMode::EverSatisfied => self.tracker.ever_satisfied(),
            ScoreMode::Instantaneous => self.tracker.currently_satisfied(),
        }
    }

    pub fn observe(&self) -> Observation {
        self.world.render_observation()
    }

    pub fn snapshot(&self) -> String {
        self.world.snapshot_json()
    }

    pub fn step(&mut self, action: &Action) -> Result<StepReply, SessionError> {
        if self.is_closed() {
            return Err(SessionError::SessionClosed);
        }
        let result = self.world.apply_action(action);
        self.tracker.observe(&self.world, &self.episode.checklist, action, result.success);
        let record = LogRecord {
            action_index: self.log.records.len() as u64,
            metric_step: self.world.agent.metric_steps(),
            action: action.clone(),
            result: result.clone(),
            satisfied: self.tracker.count(),
            directive: None,
            diagnostic: None,
        };
        self.log.records.push(record.clone());
        Ok(StepReply { observation: self.world.render_observation(), result, done: self.world.terminated, record })
    }

    /// Metrics of the run so far.
    pub fn report(&self) -> MetricsReport {
        report(&self.world, &self.episode.checklist, &self.tracker.series(), self.config.ir_segments)
    }

    /// Closes the session and returns its final metrics.
    pub fn end(&mut self) -> MetricsReport {
        self.ended = true;
        self.report()
    }
}

impl Environment for Session {
    fn observation(&self) -> Observation {
        self.observe()
    }

    fn step(&mut self, action: &Action) -> StepOutcome {
        match Session::step(self, action) {
            Ok(r) => StepOutcome { observation: r.observation, result: r.result, done: r.done },
            Err(_) => StepOutcome {
                observation: self.observe(),
                result: ActionResult::fail(ErrorCode::EpisodeTerminated, "session is closed"),
                done: true,
            },
        }
    }

    fn annotate(&mut self, directive: Option<&str>, diagnostic: Option<&str>) {
        if let Some(r) = self.log.records.last_mut() {
            if let Some(d) = directive {
                r.directive = Some(d.to_owned());
            }
            if let Some(d) = diagnostic {
                r.diagnostic = Some(d.to_owned());
            }
        }
    }

    fn is_done(&self) -> bool {
        self.is_closed()
    }

    fn floor_plan(&self) -> HouseLayout {
        floor_plan_of(&self.world.layout)
    }
}

/// Re-simulates a log against its episode and recomputes the metrics.
pub fn replay(episode: &Episode, log: &TrajectoryLog, config: &SessionConfig) -> Result<MetricsReport, SessionError> {
    if log.header.episode_id != episode.id {
        return Err(SessionError::WrongEpisode { expected: episode.id.clone(), found: log.header.episode_id.clone() });
    }
    let initial = WorldState::from_layout(episode.layout.clone(), config.sim.clone());
    Ok(evaluate_log(&initial, log, &episode.checklist, config.ir_segments, config.score_mode)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::generate_layout;
    use crate::task::{generate_episode, Scenario};

    fn episode() -> Episode {
        generate_episode(&generate_layout(4), Scenario::CleaningTidying, 4).unwrap()
    }

    #[test]
    fn reset_twice_gives_identical_observations() {
        let mut s = Session::new(episode(), SessionConfig::default(), "test");
        let a = s.reset();
        s.step(&Action::MoveAhead).unwrap();
        let b = s.reset();
        assert_eq!(a, b);
        assert_eq!(s.world().agent.total_actions, 0);
        assert!(s.log().records.is_empty());
        let direct = WorldState::from_layout(s.episode().layout.clone(), SimConfig::default()).render_observation();
        assert_eq!(a, direct);
    }

    #[test]
    fn stop_closes_the_session() {
        let mut s = Session::new(episode(), SessionConfig::default(), "test");
        assert!(s.step(&Action::Stop).unwrap().done);
        assert!(matches!(s.step(&Action::MoveAhead), Err(SessionError::SessionClosed)));
    }

    #[test]
    fn witness_log_replays_to_live_report() {
        let ep = episode();
        let mut s = Session::new(ep.clone(), SessionConfig::default(), "witness");
        for a in &ep.witness_plan {
            s.step(a).unwrap();
        }
        s.step(&Action::Stop).unwrap();
        let live = s.end();
        assert!(live.sr);
        let log = TrajectoryLog::from_jsonl(&s.log().to_jsonl()).unwrap();
        assert_eq!(replay(&ep, &log, &SessionConfig::default()).unwrap(), live);
    }

    #[test]
    fn tampered_record_names_its_index() {
        let ep = episode();
        let mut s = Session::new(ep.clone(), SessionConfig::default(), "witness");
        for a in ep.witness_plan.iter().take(30) {
            s.step(a).unwrap();
        }
        let mut log = s.into_log();
        log.records[17].result.message.push('!');
        assert!(matches!(
            replay(&ep, &log, &SessionConfig::default()),
            Err(SessionError::Replay(MetricsError::ReplayMismatch { index: 17 }))
        ));
    }
}
