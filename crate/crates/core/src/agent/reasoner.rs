//! The reasoning contract and the scripted reasoners that ship in-tree.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::critic::{CriticContext, Review};
use super::dag::{Goal, GoalDag, GoalId};
use super::refine::{refine_goal, RefinedGoal, SubGoal};
use super::AgentError;
use crate::memory::EpisodicMemory;
use crate::sim::{catalog, Action, ObjectId, Observation, SimConfig, WorldState};
use crate::task::{resolve_selector, ChecklistItem, Condition, Episode, ObjectSelector, ReceptacleRef, Relation};

/// What the planner knows before exploring: room names and what is in view.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneSummary {
    pub rooms: Vec<String>,
    pub visible: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecomposeRequest {
    pub instruction: String,
    pub scene: SceneSummary,
    /// Why the previous answer was rejected, on a repair attempt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<String>,
}

/// How a subgoal is carried out: by a library skill or a raw primitive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "call", rename_all = "kebab-case")]
pub enum SkillCall {
    Skill { subgoal: SubGoal },
    Primitive { action: Action },
}

pub trait Reasoner {
    fn name(&self) -> String;

    fn decompose(&mut self, req: &DecomposeRequest) -> Result<GoalDag, AgentError>;

    fn refine(&mut self, goal: &Goal, epi: &EpisodicMemory) -> Result<RefinedGoal, AgentError> {
        refine_goal(goal, epi)
    }

    fn translate(&mut self, subgoal: &SubGoal, _obs: &Observation) -> SkillCall {
        SkillCall::Skill { subgoal: subgoal.clone() }
    }

    /// Overrides the rule-based critic when it returns a review.
    fn critique(&mut self, _ctx: &CriticContext<'_>) -> Option<Review> {
        None
    }

    /// Reasoners that drive primitives directly return true here and
    /// answer [`policy`](Self::policy) instead of planning.
    fn direct_control(&self) -> bool {
        false
    }

    fn policy(&mut self, _obs: &Observation) -> Option<Action> {
        None
    }
}

/// Ordering of goal families on one object: slice before cook before fill,
/// state changes next, relocation last.
pub fn chain_rank(c: &Condition) -> u8 {
    match c {
        Condition::Sliced => 0,
        Condition::Cooked => 1,
        Condition::FilledWith { .. } => 2,
        Condition::Open { .. } | Condition::ToggledOn { .. } => 3,
        Condition::InReceptacle { .. } | Condition::InRoom { .. } => 4,
    }
}

/// Dependency edges between goals on the same object, level by level.
pub fn chain_edges(goals: &[Goal], same_object: impl Fn(&Goal, &Goal) -> bool) -> BTreeSet<(GoalId, GoalId)> {
    let mut group: Vec<usize> = (0..goals.len()).collect();
    for i in 0..goals.len() {
        for j in i + 1..goals.len() {
            if same_object(&goals[i], &goals[j]) {
                let (gi, gj) = (group[i], group[j]);
                for g in group.iter_mut() {
                    if *g == gj {
                        *g = gi;
                    }
                }
            }
        }
    }
    let mut edges = BTreeSet::new();
    for (i, a) in goals.iter().enumerate() {
        let ra = chain_rank(&a.condition);
        let next = goals
            .iter()
            .enumerate()
            .filter(|(j, b)| group[*j] == group[i] && chain_rank(&b.condition) > ra)
            .map(|(_, b)| chain_rank(&b.condition))
            .min();
        for (j, b) in goals.iter().enumerate() {
            if group[j] == group[i] && Some(chain_rank(&b.condition)) == next {
                edges.insert((a.id, b.id));
            }
        }
    }
    edges
}

fn room_hint(s: &ObjectSelector) -> Option<String> {
    match &s.relation {
        Some(Relation::InRoom { room }) => Some(room.clone()),
        _ => None,
    }
}

fn goal_from_item(i: usize, item: &ChecklistItem) -> Goal {
    Goal {
        id: GoalId(i as u32),
        description: item.to_string(),
        target: item.selector.clone(),
        condition: item.condition.clone(),
        room_hint: room_hint(&item.selector),
    }
}

/// Plans straight from the stored checklist. Goals on the same object are
/// chained; same-object is decided on the episode's initial state.
pub struct OracleReasoner {
    checklist: Vec<ChecklistItem>,
    initial: WorldState,
}

impl OracleReasoner {
    pub fn new(episode: &Episode) -> Self {
        Self {
            checklist: episode.checklist.clone(),
            initial: WorldState::from_layout(episode.layout.clone(), SimConfig::default()),
        }
    }
}

impl Reasoner for OracleReasoner {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn decompose(&mut self, _req: &DecomposeRequest) -> Result<GoalDag, AgentError> {
        let goals: Vec<Goal> = self.checklist.iter().enumerate().map(|(i, it)| goal_from_item(i, it)).collect();
        let resolved: Vec<BTreeSet<ObjectId>> =
            goals.iter().map(|g| resolve_selector(&self.initial, &g.target).unwrap_or_default()).collect();
        let edges = chain_edges(&goals, |a, b| {
            !resolved[a.id.0 as usize].is_disjoint(&resolved[b.id.0 as usize])
        });
        Ok(GoalDag::new(goals, edges))
    }
}

/// Pattern-matches the detailed instruction templates sentence by sentence.
pub struct GreedyTemplateReasoner {
    patterns: Vec<(Regex, Template)>,
}

#[derive(Copy, Clone)]
enum Template {
    PutIntoObject,
    PutInto,
    Bring,
    Open,
    Close,
    TurnOn,
    TurnOff,
    Slice,
    Cook,
    Fill,
}

impl Default for GreedyTemplateReasoner {
    fn default() -> Self {
        let p = |re: &str, t| (Regex::new(re).expect("static pattern"), t);
        Self {
            patterns: vec![
                p(r"^Put the (.+) into object (\d+)$", Template::PutIntoObject),
                p(r"^Put the (.+?) (?:into|on) the (.+)$", Template::PutInto),
                p(r"^Bring the (.+) to the (.+)$", Template::Bring),
                p(r"^Open the (.+)$", Template::Open),
                p(r"^Close the (.+)$", Template::Close),
                p(r"^Turn on the (.+)$", Template::TurnOn),
                p(r"^Turn off the (.+)$", Template::TurnOff),
                p(r"^Slice the (.+)$", Template::Slice),
                p(r"^Cook the (.+)$", Template::Cook),
                p(r"^Fill the (.+) with (\w+)$", Template::Fill),
            ],
        }
    }
}

/// Parses "red mug", "cabinet in the kitchen" or "mug nearest to the sink".
pub fn parse_selector(phrase: &str, rooms: &[String]) -> Option<ObjectSelector> {
    let phrase = phrase.trim();
    if let Some((noun, anchor)) = phrase.split_once(" nearest to the ") {
        return Some(parse_noun(noun)?.nearest_to(parse_selector(anchor, rooms)?));
    }
    if let Some((noun, room)) = phrase.rsplit_once(" in the ") {
        let room = room.replace(' ', "_");
        if rooms.contains(&room) {
            return Some(parse_noun(noun)?.in_room(room));
        }
    }
    parse_noun(phrase)
}

fn parse_noun(noun: &str) -> Option<ObjectSelector> {
    let best = catalog::categories()
        .iter()
        .map(|c| (c.name, c.name.replace('_', " ")))
        .filter(|(_, spaced)| noun == spaced || noun.ends_with(&format!(" {spaced}")))
        .max_by_key(|(_, spaced)| spaced.len())?;
    let prefix = &noun[..noun.len() - best.1.len()];
    Some(prefix.split_whitespace().fold(ObjectSelector::category(best.0), |s, a| s.with_attribute(a)))
}

impl GreedyTemplateReasoner {
    fn parse_sentence(&self, s: &str, rooms: &[String]) -> Option<(ObjectSelector, Condition)> {
        let (re, t) = self.patterns.iter().find(|(re, _)| re.is_match(s))?;
        let caps = re.captures(s)?;
        let sel = |i: usize| parse_selector(&caps[i], rooms);
        Some(match t {
            Template::PutIntoObject => {
                let id = caps[2].parse().ok()?;
                (sel(1)?, Condition::InReceptacle { target: ReceptacleRef::Id { id: ObjectId(id) } })
            }
            Template::PutInto => (sel(1)?, Condition::InReceptacle { target: ReceptacleRef::Selector { selector: sel(2)? } }),
            Template::Bring => (sel(1)?, Condition::InRoom { room: caps[2].replace(' ', "_") }),
            Template::Open => (sel(1)?, Condition::Open { value: true }),
            Template::Close => (sel(1)?, Condition::Open { value: false }),
            Template::TurnOn => (sel(1)?, Condition::ToggledOn { value: true }),
            Template::TurnOff => (sel(1)?, Condition::ToggledOn { value: false }),
            Template::Slice => (sel(1)?, Condition::Sliced),
            Template::Cook => (sel(1)?, Condition::Cooked),
            Template::Fill => (sel(1)?, Condition::FilledWith { liquid: caps[2].to_owned() }),
        })
    }
}

impl Reasoner for GreedyTemplateReasoner {
    fn name(&self) -> String {
        "greedy-template".into()
    }

    fn decompose(&mut self, req: &DecomposeRequest) -> Result<GoalDag, AgentError> {
        let mut goals = Vec::new();
        for sentence in req.instruction.split(". ").map(|s| s.trim().trim_end_matches('.')) {
            if sentence.is_empty() {
                continue;
            }
            match self.parse_sentence(sentence, &req.scene.rooms) {
                Some((target, condition)) => goals.push(Goal {
                    id: GoalId(goals.len() as u32),
                    description: format!("{sentence}."),
                    room_hint: room_hint(&target),
                    target,
                    condition,
                }),
                None => log::debug!("no template matches `{sentence}`"),
            }
        }
        let edges = chain_edges(&goals, |a, b| a.target == b.target);
        Ok(GoalDag::new(goals, edges))
    }
}

/// Uniformly random primitives (never `Stop`) for a fixed budget.
pub struct RandomReasoner {
    rng: ChaCha8Rng,
    budget: usize,
}

impl RandomReasoner {
    pub fn new(seed: u64, budget: usize) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), budget }
    }
}

impl Reasoner for RandomReasoner {
    fn name(&self) -> String {
        "random".into()
    }

    fn decompose(&mut self, _req: &DecomposeRequest) -> Result<GoalDag, AgentError> {
        Ok(GoalDag::default())
    }

    fn direct_control(&self) -> bool {
        true
    }

    fn policy(&mut self, obs: &Observation) -> Option<Action> {
        if self.budget == 0 {
            return None;
        }
        self.budget -= 1;
        let object = if obs.visible.is_empty() {
            ObjectId(0)
        } else {
            obs.visible[self.rng.gen_range(0..obs.visible.len())].id
        };
        Some(match self.rng.gen_range(0..15) {
            0 => Action::MoveAhead,
            1 => Action::MoveBack,
            2 => Action::MoveLeft,
            3 => Action::MoveRight,
            4 => Action::RotateRight,
            5 => Action::RotateLeft,
            6 => Action::LookUp,
            7 => Action::LookDown,
            8 => Action::Pick { object },
            9 => Action::Place { receptacle: object },
            10 => Action::Open { object },
            11 => Action::Close { object },
            12 => Action::ToggleOn { object },
            13 => Action::ToggleOff { object },
            _ => Action::Slice { object },
        })
    }
}

/// Plans nothing, so the episode ends with an immediate `Stop`.
#[derive(Default)]
pub struct NoopReasoner;

impl Reasoner for NoopReasoner {
    fn name(&self) -> String {
        "noop".into()
    }

    fn decompose(&mut self, _req: &DecomposeRequest) -> Result<GoalDag, AgentError> {
        Ok(GoalDag::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> SceneSummary {
        SceneSummary { rooms: vec!["kitchen".into(), "living_room".into()], visible: vec![] }
    }

    fn plan(text: &str) -> GoalDag {
        let req = DecomposeRequest { instruction: text.into(), scene: scene(), feedback: None };
        GreedyTemplateReasoner::default().decompose(&req).unwrap()
    }

    #[test]
    fn single_goal_gives_one_node() {
        let dag = plan("Open the fridge.");
        assert_eq!((dag.nodes.len(), dag.edges.len()), (1, 0));
    }

    #[test]
    fn slice_precedes_placement_of_the_same_object() {
        let dag = plan("Put the bread into the plate. Slice the bread.");
        assert_eq!(dag.edges, BTreeSet::from([(GoalId(1), GoalId(0))]));
    }

    #[test]
    fn selectors_parse_attributes_rooms_and_anchors() {
        let rooms = scene().rooms;
        let s = parse_selector("red remote control in the living room", &rooms).unwrap();
        assert_eq!(s, ObjectSelector::category("remote_control").with_attribute("red").in_room("living_room"));
        let s = parse_selector("mug nearest to the sink", &rooms).unwrap();
        assert_eq!(s, ObjectSelector::category("mug").nearest_to(ObjectSelector::category("sink")));
        assert_eq!(parse_selector("floor lamp", &rooms).unwrap().category, "floor_lamp");
    }

    #[test]
    fn templates_round_trip_checklist_text() {
        use crate::sim::generate_layout;
        use crate::task::{generate_episode, Scenario};
        for (i, sc) in Scenario::ALL.into_iter().enumerate() {
            let layout = generate_layout(i as u64 + 40);
            let ep = generate_episode(&layout, sc, 3).unwrap();
            let rooms: Vec<String> = layout.rooms.iter().map(|r| r.name.clone()).collect();
            let req = DecomposeRequest { instruction: ep.instruction_detailed.clone(), scene: SceneSummary { rooms, visible: vec![] }, feedback: None };
            let dag = GreedyTemplateReasoner::default().decompose(&req).unwrap();
            let parsed: Vec<_> = dag.nodes.values().map(|g| (g.target.clone(), g.condition.clone())).collect();
            let expected: Vec<_> = ep.checklist.iter().map(|c| (c.selector.clone(), c.condition.clone())).collect();
            assert_eq!(parsed, expected);
        }
    }
}
