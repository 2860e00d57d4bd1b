//! Skill library and self-recovery: runs subgoals as primitive actions,
//! with every failure reviewed by the critic.

use std::collections::BTreeSet;

use super::critic::{Critic, CriticContext, CriticDirective, FailureSignature};
use super::dag::GoalId;
use super::env::Environment;
use super::map::KnownMap;
use super::reasoner::{Reasoner, SkillCall};
use super::refine::{ground_subgoals, GroundingContext, NavTarget, RefinedGoal, SubGoal};
use super::run::DirectiveRecord;
use super::AgentError;
use crate::geom::{Cell, CellRect, CELL_M, ROTATION_DEG};
use crate::memory::{
    locate, AgentStatus, EpisodicEvent, EpisodicMemory, HashingEmbedder, HistoryEntry, HistoryObject, MemoryConfig,
    MemoryObject, Remedy, RuleVerifier, SpatialMemory,
};
use crate::nav::{face_rect, is_approach_cell, moves_along, shortest_path, Occupancy};
use crate::sim::{catalog, Action, ActionResult, Affordance, ErrorCode, HouseLayout, ObjectId, Observation, Placement, SimConfig};
use crate::task::ObjectSelector;

/// Replans allowed within one navigation call.
const MAX_NAV_REPLANS: usize = 64;
/// Grounding rounds per goal: searches first, then the concrete plan.
const MAX_GROUNDING_ROUNDS: usize = 5;

type Hints = BTreeSet<Remedy>;

#[derive(Clone, Debug)]
struct Fail {
    code: ErrorCode,
    action: Option<Action>,
    message: String,
}

impl Fail {
    fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self { code, action: None, message: message.into() }
    }

    fn is_over(&self) -> bool {
        matches!(self.code, ErrorCode::EpisodeCapExceeded | ErrorCode::EpisodeTerminated)
    }
}

type SkillResult = Result<(), Fail>;

pub struct Executor<'e> {
    env: &'e mut dyn Environment,
    pub floor_plan: HouseLayout,
    pub map: KnownMap,
    pub memory: SpatialMemory,
    pub episodic: EpisodicMemory,
    pub critic: Critic,
    provider: HashingEmbedder,
    verifier: RuleVerifier,
    sim: SimConfig,
    obs: Observation,
    actions: u64,
    swept: BTreeSet<String>,
    inspected: BTreeSet<ObjectId>,
    pub failed_attempts: usize,
    pub directives: Vec<DirectiveRecord>,
    goal: Option<GoalId>,
}

impl<'e> Executor<'e> {
    pub fn new(
        env: &'e mut dyn Environment,
        sim: SimConfig,
        memory: MemoryConfig,
        episodic: EpisodicMemory,
        critic: Critic,
    ) -> Self {
        let floor_plan = env.floor_plan();
        let obs = env.observation();
        let mut ex = Self {
            map: KnownMap::new(&floor_plan),
            floor_plan,
            env,
            memory: SpatialMemory::new(memory),
            episodic,
            critic,
            provider: HashingEmbedder::default(),
            verifier: RuleVerifier,
            sim,
            obs: obs.clone(),
            actions: 0,
            swept: BTreeSet::new(),
            inspected: BTreeSet::new(),
            failed_attempts: 0,
            directives: Vec::new(),
            goal: None,
        };
        ex.absorb(obs);
        ex
    }

    pub fn observation(&self) -> &Observation {
        &self.obs
    }

    pub fn here(&self) -> Cell {
        self.obs.agent_pose.cell()
    }

    pub fn is_done(&self) -> bool {
        self.env.is_done()
    }

    pub fn held(&self) -> Option<ObjectId> {
        self.obs.held_object
    }

    pub fn env(&mut self) -> &mut dyn Environment {
        self.env
    }

    fn absorb(&mut self, obs: Observation) {
        self.map.absorb(&obs);
        self.memory.observe_update(&obs, self.actions, &self.provider);
        self.episodic.record(EpisodicEvent::Status(AgentStatus {
            held_object: obs.held_object,
            pose: Some(obs.agent_pose),
        }));
        self.obs = obs;
    }

    /// Issues one primitive and folds in the resulting observation.
    pub fn act_primitive(&mut self, a: Action) -> Result<ActionResult, AgentError> {
        if self.env.is_done() {
            return Err(AgentError::EpisodeOver);
        }
        let held_before = self.obs.held_object;
        let out = self.env.step(&a);
        self.actions += 1;
        if out.result.success {
            self.note_success(&a, held_before);
        }
        self.absorb(out.observation);
        Ok(out.result)
    }

    fn act(&mut self, a: Action) -> SkillResult {
        let r = self.act_primitive(a.clone()).map_err(|_| Fail::new(ErrorCode::EpisodeTerminated, "episode over"))?;
        match r.error {
            None => Ok(()),
            Some(code) => Err(Fail { code, action: Some(a), message: r.message }),
        }
    }

    /// Memory bookkeeping for changes the agent itself caused.
    fn note_success(&mut self, a: &Action, held_before: Option<ObjectId>) {
        match a {
            Action::Pick { object } => self.memory.mark_held(*object),
            Action::Place { receptacle } => {
                if let (Some(h), Some(rect)) = (held_before, self.rect_of(*receptacle)) {
                    self.memory.relocate(h, rect, *receptacle, self.actions);
                }
            }
            Action::Open { object } => self.memory.update_states(*object, |s| s.open = Some(true)),
            Action::Close { object } => self.memory.update_states(*object, |s| s.open = Some(false)),
            Action::ToggleOn { object } => self.memory.update_states(*object, |s| s.toggled_on = Some(true)),
            Action::ToggleOff { object } => self.memory.update_states(*object, |s| s.toggled_on = Some(false)),
            Action::Slice { object } => self.memory.update_states(*object, |s| s.sliced = Some(true)),
            _ => {}
        }
    }

    fn rect_of(&self, id: ObjectId) -> Option<CellRect> {
        self.memory.by_world_id(id).map(MemoryObject::bounds)
    }

    fn mem(&self, id: ObjectId) -> Option<&MemoryObject> {
        self.memory.by_world_id(id)
    }

    fn remembered_closed(&self, id: ObjectId) -> bool {
        self.mem(id).is_some_and(|o| o.states.open == Some(false))
    }

    fn spec_of(&self, id: ObjectId) -> Option<&'static catalog::CategorySpec> {
        self.mem(id).and_then(|o| catalog::category(o.category()))
    }

    pub fn grounding_context(&self) -> GroundingContext<'_> {
        GroundingContext {
            memory: &self.memory,
            rooms: &self.floor_plan.rooms,
            provider: &self.provider,
            verifier: &self.verifier,
            here: self.here(),
            held: self.held(),
        }
    }

    /// Best-known location of anything matching the selector.
    pub fn locate_cell(&self, s: &ObjectSelector) -> Option<Cell> {
        let here = self.here();
        locate(s, &self.memory, &self.floor_plan.rooms, &self.provider, &self.verifier)
            .into_iter()
            .map(|id| self.memory.objects[&id].bounds().center_cell())
            .min_by_key(|c| c.manhattan(here))
    }

    fn found(&self, s: &ObjectSelector) -> bool {
        !locate(s, &self.memory, &self.floor_plan.rooms, &self.provider, &self.verifier).is_empty()
    }

    // ---- navigation ----

    fn navigate(&mut self, is_goal: &dyn Fn(&KnownMap, Cell) -> bool, h: &dyn Fn(Cell) -> i32) -> SkillResult {
        for _ in 0..MAX_NAV_REPLANS {
            let start = self.here();
            let path = shortest_path(&self.map, start, |c| is_goal(&self.map, c), h)
                .ok_or_else(|| Fail::new(ErrorCode::NotReachable, "no known route"))?;
            let mut clean = true;
            for (i, &next) in path.iter().enumerate() {
                if self.map.blocked(next) {
                    clean = false;
                    break;
                }
                let step = moves_along(self.obs.agent_pose.heading, self.here(), &[next]);
                match self.act(step[0].clone()) {
                    Ok(()) => {}
                    Err(f) if f.code == ErrorCode::Collision => {
                        self.map.mark(next, true);
                        clean = false;
                        break;
                    }
                    Err(f) => return Err(f),
                }
                if path[i + 1..].iter().any(|c| self.map.blocked(*c)) {
                    clean = false;
                    break;
                }
            }
            if clean && is_goal(&self.map, self.here()) {
                return Ok(());
            }
        }
        Err(Fail::new(ErrorCode::NotReachable, "route kept changing"))
    }

    fn go_to_cell(&mut self, target: Cell) -> SkillResult {
        self.navigate(&|m, c| c == target && !m.blocked(c), &|c| c.manhattan(target))
    }

    /// Walks to a spot from which `id` is in reach and in view, then faces it.
    fn approach(&mut self, id: ObjectId, closer: bool) -> SkillResult {
        let o = self.mem(id).ok_or_else(|| Fail::new(ErrorCode::NotVisible, "object not in memory"))?;
        if o.held {
            return Ok(());
        }
        let rect = o.bounds();
        let reach = self.sim.reach_m * if closer { 0.5 } else { 0.9 };
        let view = self.sim.view_distance_m * 0.9;
        let slack = (reach / CELL_M * std::f64::consts::SQRT_2).floor() as i32;
        self.navigate(&|m, c| is_approach_cell(m, c, &rect, reach, view), &|c| rect.manhattan(c) - slack)?;
        for a in face_rect(self.obs.agent_pose.heading, self.here(), &rect) {
            self.act(a)?;
        }
        Ok(())
    }

    /// Turns on the spot until the whole circle has been in view.
    fn look_around(&mut self) -> SkillResult {
        let turns = ((360.0 - self.sim.fov_deg) / f64::from(ROTATION_DEG)).ceil().max(0.0) as usize;
        for _ in 0..turns {
            self.act(Action::RotateRight)?;
        }
        Ok(())
    }

    /// Goes near the middle of a room and looks around.
    fn sweep(&mut self, room: &str) -> SkillResult {
        self.swept.insert(room.to_owned());
        let Some(r) = self.floor_plan.room(room).map(|r| r.rect) else {
            return Err(Fail::new(ErrorCode::InvalidTarget, format!("no room named {room}")));
        };
        let center = r.center_cell();
        let mut last = Fail::new(ErrorCode::NotReachable, "room interior unreachable");
        for radius in [4, 12, 40] {
            let zone = CellRect::new(center.x - radius, center.z - radius, 2 * radius + 1, 2 * radius + 1);
            let Some(zone) = zone.intersection(&r) else { continue };
            match self.navigate(&|m, c| zone.contains(c) && !m.blocked(c), &|c| zone.manhattan(c)) {
                Ok(()) => return self.look_around(),
                Err(f) if f.is_over() => return Err(f),
                Err(f) => last = f,
            }
        }
        Err(last)
    }

    // ---- manipulation ----

    fn interact(&mut self, id: ObjectId, a: Action, hints: &Hints) -> SkillResult {
        if hints.contains(&Remedy::RotateToward) {
            self.approach(id, false)?;
            self.look_around()?;
        }
        self.approach(id, hints.contains(&Remedy::StepCloser))?;
        self.act(a)
    }

    /// Remembered containers around `id`, outermost first.
    fn containers(&self, id: ObjectId) -> Vec<ObjectId> {
        let mut out = Vec::new();
        let mut cur = self.mem(id).and_then(|o| o.containing_receptacle);
        while let Some(p) = cur {
            if p == id || out.contains(&p) {
                break;
            }
            out.push(p);
            cur = self.mem(p).and_then(|o| o.containing_receptacle);
        }
        out.reverse();
        out
    }

    /// Opens every closed container around `id`; returns those opened.
    fn expose(&mut self, id: ObjectId, hints: &Hints) -> Result<Vec<ObjectId>, Fail> {
        let mut opened = Vec::new();
        for c in self.containers(id) {
            if self.remembered_closed(c) {
                if let Err(f) = self.interact(c, Action::Open { object: c }, hints) {
                    let _ = self.restore(opened);
                    return Err(f);
                }
                opened.push(c);
            }
        }
        Ok(opened)
    }

    fn restore(&mut self, opened: Vec<ObjectId>) -> SkillResult {
        for c in opened.into_iter().rev() {
            self.interact(c, Action::Close { object: c }, &Hints::new())?;
        }
        Ok(())
    }

    /// One manipulation with its target exposed, then containers closed again.
    fn manipulate(&mut self, id: ObjectId, a: Action, hints: &Hints) -> SkillResult {
        let mut opened = self.expose(id, hints)?;
        if matches!(a, Action::Place { .. }) && self.remembered_closed(id) {
            match self.interact(id, Action::Open { object: id }, hints) {
                Ok(()) => opened.push(id),
                Err(f) => {
                    let _ = self.restore(opened);
                    return Err(f);
                }
            }
        }
        let r = self.interact(id, a, hints);
        if r.as_ref().is_err_and(Fail::is_over) {
            return r;
        }
        let back = self.restore(opened);
        r.and(back)
    }

    fn nearest_furniture(&self, pred: impl Fn(&catalog::CategorySpec) -> bool) -> Option<ObjectId> {
        self.grounding_context().nearest_furniture(pred).and_then(MemoryObject::world_id)
    }

    /// Somewhere neutral to set an object down: a receptacle that neither
    /// opens, cooks nor dispenses, preferring flat surfaces.
    fn set_down_spot(&self, flat_only: bool) -> Option<ObjectId> {
        let neutral = |s: &catalog::CategorySpec| {
            s.has(Affordance::Receptacle) && !s.has(Affordance::Openable) && !s.cooker && s.liquid.is_none()
        };
        self.nearest_furniture(|s| neutral(s) && s.has(Affordance::FlatSurface))
            .or_else(|| if flat_only { None } else { self.nearest_furniture(neutral) })
    }

    fn put_down_held(&mut self) -> SkillResult {
        if self.held().is_none() {
            return Ok(());
        }
        let spot = self.set_down_spot(false).ok_or_else(|| Fail::new(ErrorCode::InvalidTarget, "nowhere to set down"))?;
        self.manipulate(spot, Action::Place { receptacle: spot }, &Hints::new())
    }

    fn pick(&mut self, id: ObjectId, hints: &Hints) -> SkillResult {
        if self.held() == Some(id) {
            return Ok(());
        }
        if self.held().is_some() && hints.contains(&Remedy::PutDownHeld) {
            self.put_down_held()?;
        }
        self.manipulate(id, Action::Pick { object: id }, hints)
    }

    /// Pick as part of a composite skill, clearing the hand first.
    fn pick_clearing(&mut self, id: ObjectId, hints: &Hints) -> SkillResult {
        if self.held().is_some() && self.held() != Some(id) {
            self.put_down_held()?;
        }
        self.pick(id, hints)
    }

    fn place(&mut self, obj: ObjectId, rec: ObjectId, hints: &Hints) -> SkillResult {
        if self.held() != Some(obj) {
            self.pick_clearing(obj, hints)?;
        }
        self.manipulate(rec, Action::Place { receptacle: rec }, hints)
    }

    fn open_close(&mut self, id: ObjectId, open: bool, hints: &Hints) -> SkillResult {
        if self.mem(id).is_some_and(|o| o.states.open == Some(open)) {
            return Ok(());
        }
        let opened = self.expose(id, hints)?;
        let a = if open { Action::Open { object: id } } else { Action::Close { object: id } };
        let r = self.interact(id, a, hints);
        if r.as_ref().is_err_and(Fail::is_over) {
            return r;
        }
        let back = self.restore(opened);
        r.and(back)
    }

    fn toggle(&mut self, id: ObjectId, on: bool, hints: &Hints) -> SkillResult {
        if self.mem(id).is_some_and(|o| o.states.toggled_on == Some(on)) {
            return Ok(());
        }
        let a = if on { Action::ToggleOn { object: id } } else { Action::ToggleOff { object: id } };
        self.manipulate(id, a, hints)
    }

    /// Puts the object into a switched-on appliance, restoring the switch.
    fn use_appliance(&mut self, obj: ObjectId, app: ObjectId, hints: &Hints) -> SkillResult {
        if self.held() != Some(obj) {
            self.pick_clearing(obj, hints)?;
        }
        let was_on = self.mem(app).is_some_and(|o| o.states.toggled_on == Some(true));
        if !was_on {
            self.manipulate(app, Action::ToggleOn { object: app }, hints)?;
        }
        self.manipulate(app, Action::Place { receptacle: app }, hints)?;
        if !was_on {
            self.manipulate(app, Action::ToggleOff { object: app }, hints)?;
        }
        Ok(())
    }

    fn on_flat_surface(&self, id: ObjectId) -> bool {
        self.mem(id)
            .and_then(|o| o.containing_receptacle)
            .and_then(|p| self.spec_of(p))
            .is_some_and(|s| s.has(Affordance::FlatSurface))
    }

    fn holding_knife(&self) -> bool {
        self.held().and_then(|h| self.spec_of(h)).is_some_and(|s| s.knife)
    }

    fn known_knife(&self) -> Option<ObjectId> {
        let ctx = self.grounding_context();
        self.memory
            .objects
            .values()
            .filter(|o| catalog::category(o.category()).is_some_and(|s| s.knife))
            .min_by_key(|o| o.bounds().manhattan(ctx.here))
            .and_then(MemoryObject::world_id)
    }

    fn slice(&mut self, id: ObjectId, hints: &Hints) -> SkillResult {
        if hints.contains(&Remedy::PlaceOnSurface) && !self.on_flat_surface(id) {
            let surface =
                self.set_down_spot(true).ok_or_else(|| Fail::new(ErrorCode::InvalidTarget, "no flat surface known"))?;
            self.pick_clearing(id, hints)?;
            self.manipulate(surface, Action::Place { receptacle: surface }, hints)?;
        }
        if !self.holding_knife() {
            let knife = match self.known_knife() {
                Some(k) => k,
                None => {
                    let sel = ObjectSelector::category("knife");
                    self.search(&sel, &catalog::priors_for("knife").to_vec())?;
                    self.known_knife().ok_or_else(|| Fail::new(ErrorCode::NoKnife, "no knife found"))?
                }
            };
            self.pick_clearing(knife, hints)?;
        }
        self.manipulate(id, Action::Slice { object: id }, hints)?;
        let spot = self.mem(id).and_then(|o| o.containing_receptacle).or_else(|| self.set_down_spot(false));
        match spot {
            Some(s) => self.manipulate(s, Action::Place { receptacle: s }, &Hints::new()),
            None => self.put_down_held(),
        }
    }

    // ---- search ----

    fn room_of_rect(&self, r: &CellRect) -> Option<String> {
        crate::memory::verify::room_of(&self.floor_plan.rooms, r.center_cell()).map(str::to_owned)
    }

    /// Looks inside a receptacle: opens and closes it, or walks up to it.
    fn look_into(&mut self, id: ObjectId) -> SkillResult {
        self.inspected.insert(id);
        if self.remembered_closed(id) {
            let none = Hints::new();
            let opened = self.expose(id, &none)?;
            self.interact(id, Action::Open { object: id }, &none)?;
            self.interact(id, Action::Close { object: id }, &none)?;
            self.restore(opened)
        } else {
            let opened = self.expose(id, &Hints::new())?;
            self.approach(id, false)?;
            self.restore(opened)
        }
    }

    fn next_hinted(&self, hints: &[String]) -> Option<ObjectId> {
        let here = self.here();
        self.memory
            .objects
            .values()
            .filter(|o| !o.held && hints.iter().any(|h| h == o.category()))
            .filter(|o| o.world_id().is_some_and(|w| !self.inspected.contains(&w)))
            .filter(|o| {
                o.states.open == Some(false)
                    || self.room_of_rect(&o.bounds()).is_some_and(|r| !self.swept.contains(&r))
            })
            .min_by_key(|o| (o.bounds().manhattan(here), o.mem_id))
            .and_then(MemoryObject::world_id)
    }

    fn next_room(&self, preferred: Option<&str>) -> Option<String> {
        if let Some(p) = preferred.filter(|p| !self.swept.contains(*p)) {
            if self.floor_plan.room(p).is_some() {
                return Some(p.to_owned());
            }
        }
        let here = self.here();
        self.floor_plan
            .rooms
            .iter()
            .filter(|r| !self.swept.contains(&r.name))
            .min_by_key(|r| (r.rect.manhattan(here), r.name.clone()))
            .map(|r| r.name.clone())
    }

    fn next_closed(&self) -> Option<ObjectId> {
        let here = self.here();
        self.memory
            .objects
            .values()
            .filter(|o| !o.held && o.states.open == Some(false))
            .filter(|o| catalog::category(o.category()).is_some_and(|s| s.has(Affordance::Receptacle)))
            .filter(|o| o.world_id().is_some_and(|w| !self.inspected.contains(&w)))
            .min_by_key(|o| (o.bounds().manhattan(here), o.mem_id))
            .and_then(MemoryObject::world_id)
    }

    /// Likely receptacles first, then unexplored rooms, then every closed
    /// container. Dead ends are skipped rather than reported.
    fn search(&mut self, sel: &ObjectSelector, hints: &[String]) -> SkillResult {
        let preferred = match &sel.relation {
            Some(crate::task::Relation::InRoom { room }) => Some(room.clone()),
            _ => None,
        };
        loop {
            if self.found(sel) {
                return Ok(());
            }
            let r = if let Some(id) = self.next_hinted(hints) {
                self.look_into(id)
            } else if let Some(room) = self.next_room(preferred.as_deref()) {
                self.sweep(&room)
            } else if let Some(id) = self.next_closed() {
                self.look_into(id)
            } else {
                return Err(Fail::new(ErrorCode::NotVisible, format!("no {} anywhere", sel.noun())));
            };
            match r {
                Err(f) if f.is_over() => return Err(f),
                Err(f) => log::debug!("search step failed: {}", f.message),
                Ok(()) => {}
            }
        }
    }

    // ---- subgoals ----

    fn run_skill(&mut self, sg: &SubGoal, hints: &Hints) -> SkillResult {
        if hints.contains(&Remedy::PutDownHeld) && !matches!(sg, SubGoal::PickUp { .. }) {
            let keep = sg.object();
            if self.held().is_some() && self.held() != keep && !matches!(sg, SubGoal::PlaceIn { .. } | SubGoal::Slice { .. }) {
                self.put_down_held()?;
            }
        }
        match sg {
            SubGoal::NavigateTo { target: NavTarget::Object { id } } => self.approach(*id, hints.contains(&Remedy::StepCloser)),
            SubGoal::NavigateTo { target: NavTarget::Cell { cell } } => self.go_to_cell(*cell),
            SubGoal::NavigateTo { target: NavTarget::Room { room } } => self.sweep(room),
            SubGoal::Search { selector, hints: places } => self.search(selector, places),
            SubGoal::PickUp { object } => self.pick(*object, hints),
            SubGoal::PlaceIn { object, receptacle } => self.place(*object, *receptacle, hints),
            SubGoal::Open { object } => self.open_close(*object, true, hints),
            SubGoal::Close { object } => self.open_close(*object, false, hints),
            SubGoal::Toggle { object, on } => self.toggle(*object, *on, hints),
            SubGoal::Slice { object } => self.slice(*object, hints),
            SubGoal::FillFrom { object, source } => self.use_appliance(*object, *source, hints),
            SubGoal::CookOn { object, appliance } => self.use_appliance(*object, *appliance, hints),
            SubGoal::PutDownHeld => self.put_down_held(),
        }
    }

    fn history_object(&self, id: ObjectId) -> Option<HistoryObject> {
        self.mem(id).map(|o| HistoryObject { id, category: o.category().to_owned() })
    }

    fn record_outcome(&mut self, sg: &SubGoal, success: bool) {
        let mut objects: Vec<HistoryObject> = sg.object().and_then(|id| self.history_object(id)).into_iter().collect();
        if let SubGoal::PlaceIn { receptacle: r, .. } | SubGoal::CookOn { appliance: r, .. } | SubGoal::FillFrom { source: r, .. } = sg {
            objects.extend(self.history_object(*r));
        }
        self.episodic.record(EpisodicEvent::Outcome(HistoryEntry {
            goal_id: self.goal.map(|g| g.0),
            subgoal: sg.to_string(),
            kind: sg.kind().to_owned(),
            objects,
            success,
            step: self.actions,
        }));
    }

    /// Remedies that known experience rules say to apply up front.
    fn proactive_hints(&self, sg: &SubGoal) -> Hints {
        self.episodic.proactive_remedies(sg.kind()).into_iter().collect()
    }

    /// Runs one subgoal under the critic: Refine adds a local fix and
    /// retries, Replan gives the subgoal back to the planner.
    pub fn execute_subgoal(&mut self, sg: &SubGoal, reasoner: &mut dyn Reasoner) -> Result<(), AgentError> {
        let mut hints = self.proactive_hints(sg);
        let mut attempt = 0usize;
        let mut trying: Option<(FailureSignature, Remedy)> = None;
        let context = sg.object().and_then(|id| self.mem(id)).map(|o| o.category().to_owned()).unwrap_or_default();
        loop {
            let r = match reasoner.translate(sg, &self.obs) {
                SkillCall::Skill { subgoal } => self.run_skill(&subgoal, &hints),
                SkillCall::Primitive { action } => self.act(action),
            };
            let f = match r {
                Ok(()) => {
                    if let Some((sig, remedy)) = &trying {
                        self.critic.pool.validate(sig, *remedy);
                    }
                    self.record_outcome(sg, true);
                    return Ok(());
                }
                Err(f) if f.is_over() => return Err(AgentError::EpisodeOver),
                Err(f) => f,
            };
            attempt += 1;
            self.failed_attempts += 1;
            let result = ActionResult::fail(f.code, f.message.clone());
            let ctx = CriticContext {
                subgoal_kind: sg.kind(),
                subgoal: sg.to_string(),
                action: f.action.as_ref(),
                result: &result,
                attempt,
                context: context.clone(),
            };
            let review = reasoner.critique(&ctx).unwrap_or_else(|| self.critic.review(&ctx));
            let directive = review.directive.to_string();
            self.env.annotate(Some(&directive), Some(&review.diagnostic));
            self.directives.push(DirectiveRecord {
                goal: self.goal,
                subgoal_kind: sg.kind().to_owned(),
                action_index: self.actions,
                directive: review.directive.clone(),
            });
            match review.directive {
                CriticDirective::Refine { .. } => {
                    if let (Some(remedy), Some(sig)) = (review.remedy, ctx.signature()) {
                        hints.insert(remedy);
                        self.critic.pool.record_attempt(&sig, remedy);
                        trying = Some((sig, remedy));
                    }
                }
                CriticDirective::Replan { .. } | CriticDirective::Pass => {
                    self.record_outcome(sg, false);
                    return Err(AgentError::SubgoalFailed { code: f.code, attempts: attempt });
                }
            }
        }
    }

    /// Grounds and executes a refined goal, searching first when needed.
    pub fn run_goal(&mut self, rg: &RefinedGoal, reasoner: &mut dyn Reasoner) -> Result<(), AgentError> {
        self.goal = Some(rg.id());
        for _ in 0..MAX_GROUNDING_ROUNDS {
            let subgoals = ground_subgoals(rg, &self.grounding_context());
            if subgoals.is_empty() {
                return Ok(());
            }
            let exploratory = subgoals.iter().any(SubGoal::is_exploratory);
            for sg in &subgoals {
                self.execute_subgoal(sg, reasoner)?;
            }
            if !exploratory {
                return Ok(());
            }
        }
        Err(AgentError::SubgoalFailed { code: ErrorCode::NotVisible, attempts: MAX_GROUNDING_ROUNDS })
    }

    /// Deterministic survey: every room swept, nearest first.
    pub fn survey(&mut self) -> Result<(), AgentError> {
        while let Some(room) = self.next_room(None) {
            match self.sweep(&room) {
                Err(f) if f.is_over() => return Err(AgentError::EpisodeOver),
                _ => {}
            }
        }
        Ok(())
    }

    pub fn placement_of(&self, id: ObjectId) -> Option<Placement> {
        self.spec_of(id).map(|s| s.placement)
    }
}
