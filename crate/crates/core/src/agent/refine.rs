//! Goal refinement against episodic memory and grounding into subgoals
//! against spatial memory.

use serde::{Deserialize, Serialize};

use super::dag::{Goal, GoalId};
use super::AgentError;
use crate::geom::Cell;
use crate::memory::{locate, EmbeddingProvider, EpisodicMemory, MemId, MemoryObject, Remedy, SpatialMemory, Verifier};
use crate::sim::{catalog, Affordance, ErrorCode, ObjectId, Placement, Room};
use crate::task::{Condition, ObjectSelector, ReceptacleRef};

/// A goal target, either pinned to a known object or still described.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "by", rename_all = "kebab-case")]
pub enum Binding {
    Object { id: ObjectId },
    Selector { selector: ObjectSelector },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinedGoal {
    pub goal: Goal,
    pub refined_text: String,
    pub target: Binding,
    /// Corrective steps to run before the goal proper.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prelude: Vec<Remedy>,
    pub residual_searches: Vec<ObjectSelector>,
}

impl RefinedGoal {
    pub fn id(&self) -> GoalId {
        self.goal.id
    }

    /// The goal this refinement came from; refining it again yields `self`.
    pub fn as_goal(&self) -> &Goal {
        &self.goal
    }

    pub fn check(&self) -> Result<(), AgentError> {
        let target_ok = match &self.target {
            Binding::Object { .. } => true,
            Binding::Selector { selector } => self.residual_searches.contains(selector),
        };
        if !target_ok {
            return Err(AgentError::MalformedRefinement(format!("{}: unbound target not searched", self.goal.id)));
        }
        if let Condition::InReceptacle { target: ReceptacleRef::Selector { selector } } = &self.goal.condition {
            if !self.residual_searches.contains(selector) {
                return Err(AgentError::MalformedRefinement(format!("{}: receptacle not searched", self.goal.id)));
            }
        }
        Ok(())
    }
}

fn needs_pickup(c: &Condition) -> bool {
    matches!(
        c,
        Condition::InReceptacle { .. } | Condition::InRoom { .. } | Condition::Cooked | Condition::FilledWith { .. }
    )
}

/// Rule-based refinement: binds bare category references to the object the
/// history last handled, and prepends a put-down when the hand is full and
/// experience says only one object can be held.
pub fn refine_goal(goal: &Goal, epi: &EpisodicMemory) -> Result<RefinedGoal, AgentError> {
    goal.check().map_err(AgentError::MalformedRefinement)?;
    let sel = &goal.target;
    let bare = sel.attributes.is_empty() && sel.relation.is_none();
    let target = match epi.recent_object(&sel.category).filter(|_| bare) {
        Some(id) => Binding::Object { id },
        None => Binding::Selector { selector: sel.clone() },
    };
    let holding_other = match (epi.status.held_object, &target) {
        (Some(h), Binding::Object { id }) => h != *id,
        (Some(_), Binding::Selector { .. }) => true,
        (None, _) => false,
    };
    let mut prelude = Vec::new();
    if holding_other && needs_pickup(&goal.condition) {
        if let Some(rule) = epi.rule_for("PickUp", ErrorCode::HandFull) {
            prelude.push(rule.remedy);
        }
    }
    let mut residual_searches = Vec::new();
    if let Binding::Selector { selector } = &target {
        residual_searches.push(selector.clone());
    }
    if let Condition::InReceptacle { target: ReceptacleRef::Selector { selector } } = &goal.condition {
        residual_searches.push(selector.clone());
    }
    let mut refined_text = String::new();
    for r in &prelude {
        refined_text.push_str(&format!("First {}. ", r.text()));
    }
    refined_text.push_str(&goal.description);
    if let Binding::Object { id } = &target {
        refined_text.push_str(&format!(" The {} is object {}.", sel.noun(), id.0));
    }
    let rg = RefinedGoal { goal: goal.clone(), refined_text, target, prelude, residual_searches };
    rg.check()?;
    Ok(rg)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "to", rename_all = "kebab-case")]
pub enum NavTarget {
    Object { id: ObjectId },
    Cell { cell: Cell },
    /// Go to the room and look around.
    Room { room: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SubGoal {
    NavigateTo { target: NavTarget },
    Search { selector: ObjectSelector, hints: Vec<String> },
    PickUp { object: ObjectId },
    PlaceIn { object: ObjectId, receptacle: ObjectId },
    Open { object: ObjectId },
    Close { object: ObjectId },
    Toggle { object: ObjectId, on: bool },
    Slice { object: ObjectId },
    FillFrom { object: ObjectId, source: ObjectId },
    CookOn { object: ObjectId, appliance: ObjectId },
    PutDownHeld,
}

impl SubGoal {
    pub fn kind(&self) -> &'static str {
        match self {
            SubGoal::NavigateTo { .. } => "NavigateTo",
            SubGoal::Search { .. } => "Search",
            SubGoal::PickUp { .. } => "PickUp",
            SubGoal::PlaceIn { .. } => "PlaceIn",
            SubGoal::Open { .. } => "Open",
            SubGoal::Close { .. } => "Close",
            SubGoal::Toggle { .. } => "Toggle",
            SubGoal::Slice { .. } => "Slice",
            SubGoal::FillFrom { .. } => "FillFrom",
            SubGoal::CookOn { .. } => "CookOn",
            SubGoal::PutDownHeld => "PutDownHeld",
        }
    }

    /// The object the subgoal acts on, if any.
    pub fn object(&self) -> Option<ObjectId> {
        match self {
            SubGoal::NavigateTo { target: NavTarget::Object { id } } => Some(*id),
            SubGoal::PickUp { object }
            | SubGoal::PlaceIn { object, .. }
            | SubGoal::Open { object }
            | SubGoal::Close { object }
            | SubGoal::Toggle { object, .. }
            | SubGoal::Slice { object }
            | SubGoal::FillFrom { object, .. }
            | SubGoal::CookOn { object, .. } => Some(*object),
            _ => None,
        }
    }

    pub fn is_exploratory(&self) -> bool {
        matches!(self, SubGoal::Search { .. } | SubGoal::NavigateTo { target: NavTarget::Room { .. } })
    }
}

impl std::fmt::Display for SubGoal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SubGoal::NavigateTo { target: NavTarget::Object { id } } => write!(f, "go to object {}", id.0),
            SubGoal::NavigateTo { target: NavTarget::Cell { cell } } => write!(f, "go to ({}, {})", cell.x, cell.z),
            SubGoal::NavigateTo { target: NavTarget::Room { room } } => write!(f, "look around the {}", room.replace('_', " ")),
            SubGoal::Search { selector, .. } => write!(f, "search for the {selector}"),
            SubGoal::PickUp { object } => write!(f, "pick up object {}", object.0),
            SubGoal::PlaceIn { object, receptacle } => write!(f, "put object {} into object {}", object.0, receptacle.0),
            SubGoal::Open { object } => write!(f, "open object {}", object.0),
            SubGoal::Close { object } => write!(f, "close object {}", object.0),
            SubGoal::Toggle { object, on } => write!(f, "switch object {} {}", object.0, if *on { "on" } else { "off" }),
            SubGoal::Slice { object } => write!(f, "slice object {}", object.0),
            SubGoal::FillFrom { object, source } => write!(f, "fill object {} at object {}", object.0, source.0),
            SubGoal::CookOn { object, appliance } => write!(f, "cook object {} in object {}", object.0, appliance.0),
            SubGoal::PutDownHeld => write!(f, "put down the held object"),
        }
    }
}

/// Read-only view of what grounding may consult.
pub struct GroundingContext<'a> {
    pub memory: &'a SpatialMemory,
    pub rooms: &'a [Room],
    pub provider: &'a dyn EmbeddingProvider,
    pub verifier: &'a dyn Verifier,
    pub here: Cell,
    pub held: Option<ObjectId>,
}

impl GroundingContext<'_> {
    fn dist(&self, o: &MemoryObject) -> f64 {
        if o.held {
            return 0.0;
        }
        let c = o.bounds().center();
        (c.0 - f64::from(self.here.x)).hypot(c.1 - f64::from(self.here.z))
    }

    fn nearest(&self, ids: impl IntoIterator<Item = MemId>) -> Option<&MemoryObject> {
        ids.into_iter()
            .filter_map(|id| self.memory.get(id))
            .min_by(|a, b| self.dist(a).total_cmp(&self.dist(b)).then(a.mem_id.cmp(&b.mem_id)))
    }

    fn located(&self, s: &ObjectSelector) -> Vec<MemId> {
        locate(s, self.memory, self.rooms, self.provider, self.verifier)
    }

    /// Nearest known piece of furniture passing `pred`.
    pub fn nearest_furniture(&self, pred: impl Fn(&catalog::CategorySpec) -> bool) -> Option<&MemoryObject> {
        self.nearest(self.memory.objects.values().filter_map(|o| {
            let spec = catalog::category(o.category())?;
            (spec.placement == Placement::Furniture && pred(spec)).then_some(o.mem_id)
        }))
    }

    fn room_of(&self, o: &MemoryObject) -> Option<&str> {
        crate::memory::verify::room_of(self.rooms, o.bounds().center_cell())
    }
}

/// Prior receptacle categories to look in for an object category.
pub fn search_hints(category: &str) -> Vec<String> {
    catalog::priors_for(category).to_vec()
}

fn search_for(selector: ObjectSelector) -> SubGoal {
    let hints = search_hints(&selector.category);
    SubGoal::Search { selector, hints }
}

/// Whether remembered states already say the condition holds.
fn remembered_satisfied(ctx: &GroundingContext<'_>, o: &MemoryObject, c: &Condition, rec: Option<ObjectId>) -> bool {
    let s = &o.states;
    match c {
        Condition::InReceptacle { .. } => rec.is_some() && !o.held && o.containing_receptacle == rec,
        Condition::InRoom { room } => !o.held && ctx.room_of(o) == Some(room.as_str()),
        Condition::Open { value } => s.open == Some(*value),
        Condition::ToggledOn { value } => s.toggled_on == Some(*value),
        Condition::Sliced => s.sliced == Some(true),
        Condition::Cooked => s.cooked == Some(true),
        Condition::FilledWith { liquid } => s.filled_with.as_deref() == Some(liquid.as_str()),
    }
}

/// Turns a refined goal into subgoals. Anything not yet in memory becomes a
/// `Search`, and only searches are returned until everything is resolved.
pub fn ground_subgoals(rg: &RefinedGoal, ctx: &GroundingContext<'_>) -> Vec<SubGoal> {
    let cond = &rg.goal.condition;
    let target = match &rg.target {
        Binding::Object { id } => ctx.memory.by_world_id(*id),
        Binding::Selector { selector } => ctx.nearest(ctx.located(selector)),
    };
    let mut searches = Vec::new();
    if target.is_none() {
        let selector = match &rg.target {
            Binding::Selector { selector } => selector.clone(),
            Binding::Object { .. } => rg.goal.target.clone(),
        };
        searches.push(search_for(selector));
    }
    let target_world = target.and_then(MemoryObject::world_id);
    // Secondary object: receptacle, appliance or liquid source.
    let secondary: Option<Option<&MemoryObject>> = match cond {
        Condition::InReceptacle { target: ReceptacleRef::Id { id } } => Some(ctx.memory.by_world_id(*id)),
        Condition::InReceptacle { target: ReceptacleRef::Selector { selector } } => {
            let ids = ctx.located(selector).into_iter().filter(|m| {
                let o = &ctx.memory.objects[m];
                o.world_id() != target_world && !o.held
            });
            let found = ctx.nearest(ids);
            if found.is_none() {
                searches.push(search_for(selector.clone()));
            }
            Some(found)
        }
        Condition::InRoom { room } => {
            let found = ctx.nearest(ctx.memory.objects.values().filter_map(|o| {
                let spec = catalog::category(o.category())?;
                let ok = spec.placement == Placement::Furniture
                    && spec.has(Affordance::Receptacle)
                    && !spec.has(Affordance::Openable)
                    && !spec.cooker
                    && spec.liquid.is_none()
                    && ctx.room_of(o) == Some(room.as_str());
                ok.then_some(o.mem_id)
            }));
            if found.is_none() {
                searches.push(SubGoal::NavigateTo { target: NavTarget::Room { room: room.clone() } });
            }
            Some(found)
        }
        Condition::Cooked => {
            let found = ctx.nearest_furniture(|s| s.cooker);
            if found.is_none() {
                searches.push(search_for(ObjectSelector::category("stove")));
            }
            Some(found)
        }
        Condition::FilledWith { liquid } => {
            let found = ctx.nearest_furniture(|s| s.liquid == Some(liquid.as_str()));
            if found.is_none() {
                let source = catalog::categories().iter().find(|c| c.liquid == Some(liquid.as_str()));
                searches.push(search_for(ObjectSelector::category(source.map_or("sink", |c| c.name))));
            }
            Some(found)
        }
        _ => None,
    };
    if !searches.is_empty() {
        searches.sort_by(|a, b| search_cost(ctx, a).total_cmp(&search_cost(ctx, b)));
        return searches;
    }
    let (Some(t), Some(obj)) = (target, target_world) else { return Vec::new() };
    let sec = secondary.flatten();
    let sec_world = sec.and_then(MemoryObject::world_id);
    if remembered_satisfied(ctx, t, cond, sec_world) {
        return Vec::new();
    }
    let mut out = Vec::new();
    if rg.prelude.contains(&Remedy::PutDownHeld) && ctx.held.is_some() && ctx.held != Some(obj) {
        out.push(SubGoal::PutDownHeld);
    }
    let fetch = |out: &mut Vec<SubGoal>| {
        if ctx.held != Some(obj) {
            out.push(SubGoal::NavigateTo { target: NavTarget::Object { id: obj } });
            out.push(SubGoal::PickUp { object: obj });
        }
    };
    let visit = |out: &mut Vec<SubGoal>, id: ObjectId| out.push(SubGoal::NavigateTo { target: NavTarget::Object { id } });
    match cond {
        Condition::InReceptacle { .. } | Condition::InRoom { .. } => {
            let Some(rec) = sec_world else { return Vec::new() };
            fetch(&mut out);
            visit(&mut out, rec);
            out.push(SubGoal::PlaceIn { object: obj, receptacle: rec });
        }
        Condition::Cooked | Condition::FilledWith { .. } => {
            let Some(app) = sec_world else { return Vec::new() };
            fetch(&mut out);
            visit(&mut out, app);
            out.push(if matches!(cond, Condition::Cooked) {
                SubGoal::CookOn { object: obj, appliance: app }
            } else {
                SubGoal::FillFrom { object: obj, source: app }
            });
        }
        Condition::Open { value } => {
            visit(&mut out, obj);
            out.push(if *value { SubGoal::Open { object: obj } } else { SubGoal::Close { object: obj } });
        }
        Condition::ToggledOn { value } => {
            visit(&mut out, obj);
            out.push(SubGoal::Toggle { object: obj, on: *value });
        }
        Condition::Sliced => {
            visit(&mut out, obj);
            out.push(SubGoal::Slice { object: obj });
        }
    }
    out
}

/// Distance to the nearest known hinted receptacle; unknown sorts last.
fn search_cost(ctx: &GroundingContext<'_>, sg: &SubGoal) -> f64 {
    match sg {
        SubGoal::Search { hints, .. } => ctx
            .memory
            .objects
            .values()
            .filter(|o| hints.iter().any(|h| h == o.category()))
            .map(|o| ctx.dist(o))
            .fold(f64::INFINITY, f64::min),
        _ => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::{EpisodicEvent, HashingEmbedder, HistoryEntry, HistoryObject, MemoryConfig, RuleVerifier};
    use crate::sim::{generate_layout, SimConfig, WorldState};

    fn goal(sel: ObjectSelector, condition: Condition) -> Goal {
        Goal { id: GoalId(0), description: "do it".into(), target: sel, condition, room_hint: None }
    }

    #[test]
    fn bare_reference_binds_to_history() {
        let mut epi = EpisodicMemory::default();
        epi.record(EpisodicEvent::Outcome(HistoryEntry {
            goal_id: Some(0),
            subgoal: "put mug".into(),
            kind: "PlaceIn".into(),
            objects: vec![HistoryObject { id: ObjectId(17), category: "mug".into() }],
            success: true,
            step: 10,
        }));
        let g = goal(ObjectSelector::category("mug"), Condition::FilledWith { liquid: "water".into() });
        let rg = refine_goal(&g, &epi).unwrap();
        assert_eq!(rg.target, Binding::Object { id: ObjectId(17) });
        assert!(rg.refined_text.contains("object 17"));
    }

    #[test]
    fn full_hand_gets_a_put_down_prelude() {
        let mut epi = EpisodicMemory::with_seed_rules();
        epi.status.held_object = Some(ObjectId(3));
        let g = goal(ObjectSelector::category("apple"), Condition::InRoom { room: "kitchen".into() });
        assert_eq!(refine_goal(&g, &epi).unwrap().prelude, vec![Remedy::PutDownHeld]);
        let g = goal(ObjectSelector::category("fridge"), Condition::Open { value: true });
        assert!(refine_goal(&g, &epi).unwrap().prelude.is_empty());
    }

    #[test]
    fn refinement_is_idempotent() {
        let mut epi = EpisodicMemory::with_seed_rules();
        epi.status.held_object = Some(ObjectId(3));
        let g = goal(
            ObjectSelector::category("apple"),
            Condition::InReceptacle { target: ReceptacleRef::Selector { selector: ObjectSelector::category("bowl") } },
        );
        let once = refine_goal(&g, &epi).unwrap();
        let twice = refine_goal(once.as_goal(), &epi).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn unknown_category_is_rejected() {
        let g = goal(ObjectSelector::category("unicorn"), Condition::Sliced);
        assert!(matches!(refine_goal(&g, &EpisodicMemory::default()), Err(AgentError::MalformedRefinement(_))));
    }

    fn ctx_parts(seed: u64) -> (WorldState, SpatialMemory, HashingEmbedder) {
        let w = WorldState::from_layout(generate_layout(seed), SimConfig::default());
        (w, SpatialMemory::new(MemoryConfig::default()), HashingEmbedder::default())
    }

    #[test]
    fn empty_memory_grounds_to_search_with_prior_hints() {
        let (w, mem, p) = ctx_parts(2);
        let ctx = GroundingContext {
            memory: &mem,
            rooms: &w.layout.rooms,
            provider: &p,
            verifier: &RuleVerifier,
            here: w.agent.pose.cell(),
            held: None,
        };
        let g = goal(ObjectSelector::category("fork"), Condition::InRoom { room: "kitchen".into() });
        let sgs = ground_subgoals(&refine_goal(&g, &EpisodicMemory::default()).unwrap(), &ctx);
        let SubGoal::Search { selector, hints } = &sgs[0] else { panic!("expected a search first, got {sgs:?}") };
        assert_eq!(selector.category, "fork");
        assert!(hints.contains(&"drawer".to_string()) && hints.contains(&"counter".to_string()));
        assert!(sgs.iter().all(SubGoal::is_exploratory));
    }

    #[test]
    fn remembered_target_grounds_without_search() {
        let (w, mut mem, p) = ctx_parts(2);
        let fridge = w.objects.values().find(|o| o.category == "fridge").unwrap();
        let rec = crate::sim::VisibleRecord {
            id: fridge.id,
            category: fridge.category.clone(),
            attributes: fridge.attributes.clone(),
            distance: 1.0,
            mask_area: 4.0,
            containing_receptacle: None,
            footprint: fridge.footprint.unwrap(),
            states: fridge.states.clone(),
        };
        let mut obs = w.render_observation();
        obs.visible = vec![rec];
        mem.observe_update(&obs, 0, &p);
        let ctx = GroundingContext {
            memory: &mem,
            rooms: &w.layout.rooms,
            provider: &p,
            verifier: &RuleVerifier,
            here: w.agent.pose.cell(),
            held: None,
        };
        let want = !fridge.is_open();
        let g = goal(ObjectSelector::category("fridge"), Condition::Open { value: want });
        let sgs = ground_subgoals(&refine_goal(&g, &EpisodicMemory::default()).unwrap(), &ctx);
        assert_eq!(sgs[0], SubGoal::NavigateTo { target: NavTarget::Object { id: fridge.id } });
        assert!(!sgs.iter().any(SubGoal::is_exploratory));
    }
}
