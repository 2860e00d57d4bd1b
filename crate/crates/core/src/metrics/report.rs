//! Score series reconstruction and per-episode metric reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ir::improvement_rate;
use super::MetricsError;
use crate::sim::{Action, ActionClass, WorldState};
use crate::task::{evaluate_all, CategoryTag, ChecklistItem};
use crate::trajectory::TrajectoryLog;

/// How a satisfied-item count is accumulated over a trajectory.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMode {
    /// Items that have been satisfied at any point so far (monotone).
    #[default]
    EverSatisfied,
    /// Items satisfied right now.
    Instantaneous,
}

/// `s_0 ..= s_T`, indexed by metric step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreSeries {
    pub values: Vec<f64>,
}

impl ScoreSeries {
    /// Final metric step `T`.
    pub fn t(&self) -> usize {
        self.values.len().saturating_sub(1)
    }
}

/// Incremental builder shared by live sessions and log replay.
#[derive(Clone, Debug)]
pub struct ScoreTracker {
    mode: ScoreMode,
    ever: Vec<bool>,
    current: Vec<bool>,
    values: Vec<f64>,
    metric_step: u64,
}

impl ScoreTracker {
    pub fn new(initial: &WorldState, checklist: &[ChecklistItem], mode: ScoreMode) -> Self {
        let current = evaluate_all(initial, checklist);
        let mut t = Self { mode, ever: current.clone(), current, values: Vec::new(), metric_step: 0 };
        t.values.push(t.count() as f64);
        t
    }

    /// Satisfied count under the tracker's mode.
    pub fn count(&self) -> usize {
        match self.mode {
            ScoreMode::EverSatisfied => self.ever.iter().filter(|b| **b).count(),
            ScoreMode::Instantaneous => self.current.iter().filter(|b| **b).count(),
        }
    }

    pub fn ever_satisfied(&self) -> &[bool] {
        &self.ever
    }

    pub fn currently_satisfied(&self) -> &[bool] {
        &self.current
    }

    /// Folds in the state after one action. Object states only change on
    /// successful manipulation; relations to a carried object also change on moves.
    pub fn observe(&mut self, state: &WorldState, checklist: &[ChecklistItem], action: &Action, success: bool) {
        let relevant = success
            && (action.class() == ActionClass::Manipulation
                || (action.class() == ActionClass::Move && state.agent.held_object.is_some()));
        if relevant {
            self.current = evaluate_all(state, checklist);
            for (e, c) in self.ever.iter_mut().zip(&self.current) {
                *e |= *c;
            }
        }
        let now = state.agent.metric_steps();
        let v = self.count() as f64;
        while self.metric_step < now {
            self.metric_step += 1;
            self.values.push(v);
        }
        *self.values.last_mut().expect("series starts non-empty") = v;
    }

    pub fn series(&self) -> ScoreSeries {
        ScoreSeries { values: self.values.clone() }
    }
}

/// Replays a log from `initial`, checking every recorded result, and returns
/// the score series and the final state.
pub fn replay_series(
    initial: &WorldState,
    log: &TrajectoryLog,
    checklist: &[ChecklistItem],
    mode: ScoreMode,
) -> Result<(ScoreSeries, WorldState), MetricsError> {
    let mut state = initial.clone();
    let mut tracker = ScoreTracker::new(&state, checklist, mode);
    for (i, rec) in log.records.iter().enumerate() {
        let result = state.apply_action(&rec.action);
        if result != rec.result || state.agent.metric_steps() != rec.metric_step {
            return Err(MetricsError::ReplayMismatch { index: i });
        }
        tracker.observe(&state, checklist, &rec.action, result.success);
    }
    Ok((tracker.series(), state))
}

/// Score series of a logged trajectory.
pub fn score_series(
    initial: &WorldState,
    log: &TrajectoryLog,
    checklist: &[ChecklistItem],
    mode: ScoreMode,
) -> Result<ScoreSeries, MetricsError> {
    replay_series(initial, log, checklist, mode).map(|(s, _)| s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub gc_avg: f64,
    /// Fraction satisfied per tag, for tags present in the checklist.
    pub gc_by_category: BTreeMap<CategoryTag, f64>,
    pub category_counts: BTreeMap<CategoryTag, usize>,
    pub sr: bool,
    pub nav_steps: u64,
    pub manip_steps: u64,
    pub total_actions: u64,
    /// `None` when the series is too short for the requested segmentation.
    pub ir: Option<f64>,
    pub n: usize,
    /// Length `T` of the score series in metric steps.
    pub t: usize,
}

/// Metrics of a finished episode. `gc_avg` counts checklist items.
pub fn report(final_state: &WorldState, checklist: &[ChecklistItem], series: &ScoreSeries, n: usize) -> MetricsReport {
    let flags = evaluate_all(final_state, checklist);
    let satisfied = flags.iter().filter(|b| **b).count();
    let mut counts: BTreeMap<CategoryTag, usize> = BTreeMap::new();
    let mut hits: BTreeMap<CategoryTag, usize> = BTreeMap::new();
    for (item, ok) in checklist.iter().zip(&flags) {
        *counts.entry(item.category).or_default() += 1;
        *hits.entry(item.category).or_default() += usize::from(*ok);
    }
    let gc_by_category = counts.iter().map(|(t, c)| (*t, hits[t] as f64 / *c as f64)).collect();
    let gc_avg = if checklist.is_empty() { 1.0 } else { satisfied as f64 / checklist.len() as f64 };
    MetricsReport {
        gc_avg,
        gc_by_category,
        category_counts: counts,
        sr: satisfied == checklist.len(),
        nav_steps: final_state.agent.nav_steps,
        manip_steps: final_state.agent.manip_steps,
        total_actions: final_state.agent.total_actions,
        ir: improvement_rate(&series.values, n).ok(),
        n,
        t: series.t(),
    }
}

/// Replays a log and reports on it.
pub fn evaluate_log(
    initial: &WorldState,
    log: &TrajectoryLog,
    checklist: &[ChecklistItem],
    n: usize,
    mode: ScoreMode,
) -> Result<MetricsReport, MetricsError> {
    let (series, fin) = replay_series(initial, log, checklist, mode)?;
    Ok(report(&fin, checklist, &series, n))
}
