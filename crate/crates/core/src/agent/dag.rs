//! Goals, the dependency graph between them and proximity-first scheduling.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::reasoner::{DecomposeRequest, Reasoner, SceneSummary};
use super::AgentError;
use crate::geom::Cell;
use crate::sim::catalog;
use crate::task::{Condition, ObjectSelector, ReceptacleRef, Relation};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GoalId(pub u32);

impl std::fmt::Display for GoalId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "g{}", self.0)
    }
}

/// One object-centred goal: bring the selected object into a condition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub id: GoalId,
    pub description: String,
    pub target: ObjectSelector,
    pub condition: Condition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room_hint: Option<String>,
}

fn selector_known(s: &ObjectSelector) -> bool {
    catalog::is_known_category(&s.category)
        && match &s.relation {
            Some(Relation::NearestTo { anchor }) => selector_known(anchor),
            _ => true,
        }
}

impl Goal {
    pub fn check(&self) -> Result<(), String> {
        if self.description.trim().is_empty() {
            return Err(format!("goal {} has no description", self.id));
        }
        if !selector_known(&self.target) {
            return Err(format!("goal {} targets unknown category `{}`", self.id, self.target.category));
        }
        if let Condition::InReceptacle { target: ReceptacleRef::Selector { selector } } = &self.condition {
            if !selector_known(selector) {
                return Err(format!("goal {} names unknown receptacle `{}`", self.id, selector.category));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalDag {
    pub nodes: BTreeMap<GoalId, Goal>,
    /// `(prerequisite, dependent)` pairs.
    pub edges: BTreeSet<(GoalId, GoalId)>,
    #[serde(default)]
    pub completed: BTreeSet<GoalId>,
    /// Goals given up on. They unblock their dependents like completed ones.
    #[serde(default)]
    pub skipped: BTreeSet<GoalId>,
}

impl GoalDag {
    pub fn new(goals: impl IntoIterator<Item = Goal>, edges: impl IntoIterator<Item = (GoalId, GoalId)>) -> Self {
        Self {
            nodes: goals.into_iter().map(|g| (g.id, g)).collect(),
            edges: edges.into_iter().collect(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: String| Err(AgentError::MalformedPlan(m));
        for (id, g) in &self.nodes {
            if *id != g.id {
                return bad(format!("node key {id} holds goal {}", g.id));
            }
            if let Err(m) = g.check() {
                return bad(m);
            }
        }
        for (a, b) in &self.edges {
            if !self.nodes.contains_key(a) || !self.nodes.contains_key(b) {
                return bad(format!("edge {a}->{b} references a missing goal"));
            }
        }
        if !self.completed.is_subset(&self.nodes.keys().copied().collect()) {
            return bad("completed goals outside the graph".into());
        }
        if self.topological_order().is_none() {
            return bad("dependency cycle".into());
        }
        Ok(())
    }

    /// Kahn's algorithm with smallest-id-first ties; `None` on a cycle.
    pub fn topological_order(&self) -> Option<Vec<GoalId>> {
        let mut indeg: BTreeMap<GoalId, usize> = self.nodes.keys().map(|k| (*k, 0)).collect();
        for (_, b) in &self.edges {
            *indeg.get_mut(b)? += 1;
        }
        let mut ready: BTreeSet<GoalId> = indeg.iter().filter(|(_, d)| **d == 0).map(|(k, _)| *k).collect();
        let mut out = Vec::with_capacity(self.nodes.len());
        while let Some(n) = ready.pop_first() {
            out.push(n);
            for (_, b) in self.edges.iter().filter(|(a, _)| *a == n) {
                let d = indeg.get_mut(b)?;
                *d -= 1;
                if *d == 0 {
                    ready.insert(*b);
                }
            }
        }
        (out.len() == self.nodes.len()).then_some(out)
    }

    pub fn prerequisites(&self, id: GoalId) -> impl Iterator<Item = GoalId> + '_ {
        self.edges.iter().filter(move |(_, b)| *b == id).map(|(a, _)| *a)
    }

    pub fn is_resolved(&self, id: GoalId) -> bool {
        self.completed.contains(&id) || self.skipped.contains(&id)
    }

    pub fn is_ready(&self, id: GoalId) -> bool {
        !self.is_resolved(id) && self.prerequisites(id).all(|p| self.is_resolved(p))
    }

    pub fn pending(&self) -> impl Iterator<Item = GoalId> + '_ {
        self.nodes.keys().copied().filter(|id| !self.is_resolved(*id))
    }

    /// Whether `order` lists goals so that every prerequisite precedes its
    /// dependents.
    pub fn respects_order(&self, order: &[GoalId]) -> bool {
        let pos: BTreeMap<GoalId, usize> = order.iter().enumerate().map(|(i, g)| (*g, i)).collect();
        self.edges.iter().all(|(a, b)| match (pos.get(a), pos.get(b)) {
            (Some(pa), Some(pb)) => pa < pb,
            (None, Some(_)) => false,
            _ => true,
        })
    }
}

/// Asks the reasoner for a goal graph and validates it, giving the reasoner
/// one chance to repair a rejected graph.
pub fn decompose(instruction: &str, scene: &SceneSummary, r: &mut dyn Reasoner) -> Result<GoalDag, AgentError> {
    if instruction.trim().is_empty() {
        return Err(AgentError::MalformedPlan("empty instruction".into()));
    }
    let mut req = DecomposeRequest { instruction: instruction.to_owned(), scene: scene.clone(), feedback: None };
    let first = r.decompose(&req).and_then(|d| d.validate().map(|()| d));
    match first {
        Ok(d) => Ok(d),
        Err(e) => {
            log::debug!("rejected plan, asking for a repair: {e}");
            req.feedback = Some(e.to_string());
            let d = r.decompose(&req)?;
            d.validate()?;
            Ok(d)
        }
    }
}

/// Picks the ready goal whose best-known target location is nearest to
/// `here`. Goals with no known location come last; ties go to the lower id.
pub fn next_goal(
    dag: &GoalDag,
    here: Cell,
    locate: impl Fn(&Goal) -> Option<Cell>,
) -> Result<Option<GoalId>, AgentError> {
    let mut ready: Vec<(f64, GoalId)> = dag
        .nodes
        .values()
        .filter(|g| dag.is_ready(g.id))
        .map(|g| {
            let d = locate(g).map_or(f64::INFINITY, |c| {
                f64::from(c.x - here.x).hypot(f64::from(c.z - here.z))
            });
            (d, g.id)
        })
        .collect();
    if ready.is_empty() {
        return if dag.pending().next().is_some() { Err(AgentError::DeadlockedDag) } else { Ok(None) };
    }
    ready.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(Some(ready[0].1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn goal(i: u32) -> Goal {
        Goal {
            id: GoalId(i),
            description: format!("open cabinet {i}"),
            target: ObjectSelector::category("cabinet"),
            condition: Condition::Open { value: true },
            room_hint: None,
        }
    }

    #[test]
    fn chain_starts_at_its_head() {
        let dag = GoalDag::new((0..3).map(goal), [(GoalId(0), GoalId(1)), (GoalId(1), GoalId(2))]);
        assert_eq!(next_goal(&dag, Cell::new(0, 0), |_| None).unwrap(), Some(GoalId(0)));
    }

    #[test]
    fn nearer_goal_wins() {
        let dag = GoalDag::new((0..2).map(goal), []);
        // one metre is 20 cells
        let at = |g: &Goal| Some(if g.id == GoalId(0) { Cell::new(200, 0) } else { Cell::new(20, 0) });
        assert_eq!(next_goal(&dag, Cell::new(0, 0), at).unwrap(), Some(GoalId(1)));
        let tie = |_: &Goal| Some(Cell::new(5, 5));
        assert_eq!(next_goal(&dag, Cell::new(0, 0), tie).unwrap(), Some(GoalId(0)));
    }

    #[test]
    fn cycles_are_rejected() {
        let dag = GoalDag::new((0..2).map(goal), [(GoalId(0), GoalId(1)), (GoalId(1), GoalId(0))]);
        assert!(matches!(dag.validate(), Err(AgentError::MalformedPlan(_))));
    }

    #[test]
    fn corrupted_graph_deadlocks() {
        let mut dag = GoalDag::new((0..2).map(goal), [(GoalId(0), GoalId(1)), (GoalId(1), GoalId(0))]);
        dag.completed.clear();
        assert_eq!(next_goal(&dag, Cell::new(0, 0), |_| None), Err(AgentError::DeadlockedDag));
    }

    proptest! {
        #[test]
        fn emitted_order_is_topological(n in 1u32..12, raw in proptest::collection::vec((0u32..12, 0u32..12), 0..30), locs in proptest::collection::vec((0i32..100, 0i32..100), 12)) {
            let edges: Vec<_> = raw.into_iter().filter(|(a, b)| a < b && *b < n).map(|(a, b)| (GoalId(a), GoalId(b))).collect();
            let mut dag = GoalDag::new((0..n).map(goal), edges);
            let mut order = Vec::new();
            while let Some(g) = next_goal(&dag, Cell::new(50, 50), |g| Some(Cell::new(locs[g.id.0 as usize].0, locs[g.id.0 as usize].1))).unwrap() {
                order.push(g);
                dag.completed.insert(g);
            }
            prop_assert_eq!(order.len(), n as usize);
            prop_assert!(dag.respects_order(&order));
        }
    }
}
