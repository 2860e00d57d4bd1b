//! Mutable world state and action semantics.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use super::catalog::Affordance;
use super::types::*;
use super::SimError;
use crate::geom::{angle_diff_deg, bearing_deg, Cell, CellRect, Dir4, CELL_M, QUANTA_PER_NAV_STEP, ROTATION_DEG};

/// Hard cap on issued actions per episode.
pub const EPISODE_ACTION_CAP: u64 = 16_000;

/// Half-width in cells of the occupancy patch returned with each observation.
pub const OCCUPANCY_RADIUS: i32 = 20;

/// Perception and interaction thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub reach_m: f64,
    pub view_distance_m: f64,
    pub fov_deg: f64,
    pub action_cap: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { reach_m: 1.5, view_distance_m: 5.0, fov_deg: 90.0, action_cap: EPISODE_ACTION_CAP }
    }
}

/// Static blocked-cell masks derived from a layout.
#[derive(Debug)]
pub struct Grid {
    pub width: i32,
    pub height: i32,
    wall: Vec<bool>,
    solid: Vec<bool>,
}

impl Grid {
    pub fn build(layout: &HouseLayout) -> Self {
        let n = (layout.width.max(0) * layout.height.max(0)) as usize;
        let mut g = Self { width: layout.width, height: layout.height, wall: vec![false; n], solid: vec![false; n] };
        for w in &layout.walls {
            for c in w.cells() {
                if let Some(i) = g.index(c) {
                    g.wall[i] = true;
                }
            }
        }
        for d in &layout.doorways {
            for c in d.rect.cells() {
                if let Some(i) = g.index(c) {
                    g.wall[i] = false;
                }
            }
        }
        for o in &layout.objects {
            if let Some(fp) = o.footprint {
                for c in fp.cells() {
                    if let Some(i) = g.index(c) {
                        g.solid[i] = true;
                    }
                }
            }
        }
        g
    }

    fn index(&self, c: Cell) -> Option<usize> {
        (c.x >= 0 && c.z >= 0 && c.x < self.width && c.z < self.height)
            .then(|| (c.z * self.width + c.x) as usize)
    }

    /// Out-of-bounds cells count as walls.
    pub fn is_wall(&self, c: Cell) -> bool {
        self.index(c).map_or(true, |i| self.wall[i])
    }

    pub fn is_blocked(&self, c: Cell) -> bool {
        self.index(c).map_or(true, |i| self.wall[i] || self.solid[i])
    }

    /// True when the straight segment between two points (cell units) crosses
    /// no wall cell. Sampling at a fifth of a cell cannot skip a one-cell wall.
    pub fn line_clear(&self, from: (f64, f64), to: (f64, f64)) -> bool {
        let (dx, dz) = (to.0 - from.0, to.1 - from.1);
        let len = (dx * dx + dz * dz).sqrt();
        let samples = (len * 5.0).ceil() as usize + 1;
        for s in 0..=samples {
            let t = s as f64 / samples as f64;
            let c = Cell::new((from.0 + dx * t).round() as i32, (from.1 + dz * t).round() as i32);
            if self.is_wall(c) {
                return false;
            }
        }
        true
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCost {
    pub nav: u32,
    pub manip: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WorldState {
    pub layout: HouseLayout,
    pub config: SimConfig,
    pub objects: BTreeMap<ObjectId, ObjectInstance>,
    pub agent: AgentState,
    pub terminated: bool,
    #[serde(skip)]
    grid: Arc<OnceLock<Grid>>,
}

impl PartialEq for WorldState {
    fn eq(&self, other: &Self) -> bool {
        self.layout == other.layout
            && self.config == other.config
            && self.objects == other.objects
            && self.agent == other.agent
            && self.terminated == other.terminated
    }
}

impl WorldState {
    pub fn from_layout(layout: HouseLayout, config: SimConfig) -> Self {
        let objects = layout.objects.iter().map(|o| (o.id, o.clone())).collect();
        let agent = AgentState::new(layout.agent_start);
        Self { layout, config, objects, agent, terminated: false, grid: Arc::default() }
    }

    pub fn grid(&self) -> &Grid {
        self.grid.get_or_init(|| Grid::build(&self.layout))
    }

    pub fn object(&self, id: ObjectId) -> Option<&ObjectInstance> {
        self.objects.get(&id)
    }

    /// Canonical JSON snapshot; byte-stable for equal states.
    pub fn snapshot_json(&self) -> String {
        serde_json::to_string(self).expect("world state serializes")
    }

    pub fn from_snapshot_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Parent chain of an object, nearest first. Stops on cycles or dangling ids.
    pub fn ancestors(&self, id: ObjectId) -> Vec<ObjectId> {
        let mut out = Vec::new();
        let mut cur = self.objects.get(&id).and_then(|o| o.states.parent_receptacle);
        while let Some(p) = cur {
            if p == id || out.contains(&p) {
                break;
            }
            out.push(p);
            cur = self.objects.get(&p).and_then(|o| o.states.parent_receptacle);
        }
        out
    }

    /// Held by the agent, directly or inside a held receptacle.
    pub fn is_carried(&self, id: ObjectId) -> bool {
        match self.agent.held_object {
            Some(h) => h == id || self.ancestors(id).contains(&h),
            None => false,
        }
    }

    /// Floor footprint of the object or of the furniture it rests in.
    pub fn anchor_rect(&self, id: ObjectId) -> Option<CellRect> {
        if self.is_carried(id) {
            return None;
        }
        let o = self.objects.get(&id)?;
        if let Some(fp) = o.footprint {
            return Some(fp);
        }
        self.ancestors(id).into_iter().find_map(|a| self.objects.get(&a).and_then(|o| o.footprint))
    }

    /// Grid position of an object; carried objects sit at the agent.
    pub fn object_cell(&self, id: ObjectId) -> Option<Cell> {
        if self.is_carried(id) {
            return Some(self.agent.pose.cell());
        }
        self.anchor_rect(id).map(|r| r.center_cell())
    }

    pub fn room_of_object(&self, id: ObjectId) -> Option<&str> {
        self.object_cell(id).and_then(|c| self.layout.room_at(c))
    }

    fn enclosed(&self, id: ObjectId) -> bool {
        self.ancestors(id).iter().any(|a| self.objects.get(a).is_some_and(|o| !o.is_open()))
    }

    /// Perception predicate: in the facing cone, within view distance, not
    /// behind a wall, not inside a closed receptacle, not carried.
    pub fn visibility(&self, id: ObjectId) -> Result<bool, SimError> {
        if !self.objects.contains_key(&id) {
            return Err(SimError::UnknownObject(id));
        }
        Ok(self.visible_unchecked(id).is_some())
    }

    /// Distance to the object's center when visible.
    fn visible_unchecked(&self, id: ObjectId) -> Option<(f64, CellRect)> {
        if self.enclosed(id) {
            return None;
        }
        let rect = self.anchor_rect(id)?;
        let here = self.agent.pose.cell();
        let p = (f64::from(here.x), f64::from(here.z));
        let c = rect.center();
        let dist = ((c.0 - p.0).powi(2) + (c.1 - p.1).powi(2)).sqrt() * CELL_M;
        if dist > self.config.view_distance_m {
            return None;
        }
        if dist > 1e-9 {
            let off = angle_diff_deg(bearing_deg(p, c), f64::from(self.agent.pose.heading));
            if off > self.config.fov_deg / 2.0 + 1e-9 {
                return None;
            }
        }
        self.grid().line_clear(p, c).then_some((dist, rect))
    }

    pub fn in_reach(&self, id: ObjectId) -> bool {
        self.anchor_rect(id)
            .is_some_and(|r| r.dist_m(self.agent.pose.cell()) <= self.config.reach_m + 1e-9)
    }

    pub fn render_observation(&self) -> Observation {
        let visible = self
            .objects
            .values()
            .filter_map(|o| {
                let (dist, rect) = self.visible_unchecked(o.id)?;
                let d = dist.max(0.1);
                Some(VisibleRecord {
                    id: o.id,
                    category: o.category.clone(),
                    attributes: o.attributes.clone(),
                    distance: dist,
                    mask_area: (f64::from(o.size_cells) / (d * d)).max(1.0),
                    containing_receptacle: o.states.parent_receptacle,
                    footprint: rect,
                    states: o.states.clone(),
                })
            })
            .collect();
        Observation {
            agent_pose: self.agent.pose,
            held_object: self.agent.held_object,
            visible,
            local_occupancy: self.local_occupancy(),
        }
    }

    fn local_occupancy(&self) -> LocalOccupancy {
        let here = self.agent.pose.cell();
        let r = OCCUPANCY_RADIUS;
        let origin = Cell::new(here.x - r, here.z - r);
        let side = 2 * r + 1;
        let grid = self.grid();
        let rows = (0..side)
            .map(|dz| {
                (0..side)
                    .map(|dx| {
                        if grid.is_blocked(Cell::new(origin.x + dx, origin.z + dz)) {
                            '#'
                        } else {
                            '.'
                        }
                    })
                    .collect()
            })
            .collect();
        LocalOccupancy { origin, width: side, height: side, rows }
    }

    /// Metric-step increments earned by an action with a known result.
    pub fn step_cost(&self, action: &Action, result: &ActionResult) -> StepCost {
        if !result.success {
            return StepCost::default();
        }
        match action.class() {
            ActionClass::Move => StepCost {
                nav: u32::from(self.agent.pending_quanta + 1 >= QUANTA_PER_NAV_STEP),
                manip: 0,
            },
            ActionClass::Rotate | ActionClass::Tilt => StepCost { nav: 1, manip: 0 },
            ActionClass::Manipulation => StepCost { nav: 0, manip: 1 },
            ActionClass::Stop => StepCost::default(),
        }
    }

    /// Applies one action. Failed actions only advance `total_actions`.
    pub fn apply_action(&mut self, action: &Action) -> ActionResult {
        if self.terminated {
            let code = if self.agent.total_actions >= self.config.action_cap {
                ErrorCode::EpisodeCapExceeded
            } else {
                ErrorCode::EpisodeTerminated
            };
            return ActionResult::fail(code, "episode already terminated");
        }
        self.agent.total_actions += 1;
        if self.agent.total_actions >= self.config.action_cap {
            self.terminated = true;
            return ActionResult::fail(ErrorCode::EpisodeCapExceeded, "action cap reached");
        }
        let result = self.execute(action);
        let cost = self.step_cost(action, &result);
        if result.success && action.class() == ActionClass::Move {
            self.agent.pending_quanta = (self.agent.pending_quanta + 1) % QUANTA_PER_NAV_STEP;
        }
        self.agent.nav_steps += u64::from(cost.nav);
        self.agent.manip_steps += u64::from(cost.manip);
        if result.success && *action == Action::Stop {
            self.terminated = true;
        }
        result
    }

    /// Pure variant of [`apply_action`](Self::apply_action).
    pub fn applied(&self, action: &Action) -> (WorldState, ActionResult) {
        let mut next = self.clone();
        let r = next.apply_action(action);
        (next, r)
    }

    fn execute(&mut self, action: &Action) -> ActionResult {
        use Action::*;
        let fwd = Dir4::from_heading(self.agent.pose.heading);
        match action {
            MoveAhead => self.translate(fwd),
            MoveBack => self.translate(fwd.opposite()),
            MoveRight => self.translate(fwd.clockwise()),
            MoveLeft => self.translate(fwd.counter_clockwise()),
            RotateRight => self.rotate(ROTATION_DEG),
            RotateLeft => self.rotate(-ROTATION_DEG),
            LookUp => self.tilt(ROTATION_DEG),
            LookDown => self.tilt(-ROTATION_DEG),
            Pick { object } => self.pick(*object),
            Place { receptacle } => self.place(*receptacle),
            Open { object } => self.set_open(*object, true),
            Close { object } => self.set_open(*object, false),
            ToggleOn { object } => self.toggle(*object, true),
            ToggleOff { object } => self.toggle(*object, false),
            Slice { object } => self.slice(*object),
            Stop => ActionResult::ok("stopped"),
        }
    }

    fn translate(&mut self, d: Dir4) -> ActionResult {
        let next = self.agent.pose.cell().offset(d);
        if self.grid().is_blocked(next) {
            return ActionResult::fail(ErrorCode::Collision, "path blocked");
        }
        self.agent.pose.x = next.x;
        self.agent.pose.z = next.z;
        ActionResult::ok("moved")
    }

    fn rotate(&mut self, delta: i32) -> ActionResult {
        self.agent.pose.heading = (self.agent.pose.heading + delta).rem_euclid(360);
        ActionResult::ok("rotated")
    }

    fn tilt(&mut self, delta: i32) -> ActionResult {
        let p = self.agent.pose.pitch + delta;
        if !(MIN_PITCH..=MAX_PITCH).contains(&p) {
            return ActionResult::fail(ErrorCode::InvalidTarget, "pitch limit");
        }
        self.agent.pose.pitch = p;
        ActionResult::ok("tilted")
    }

    /// Visibility then reach, the shared gate for manipulation.
    fn perceivable(&self, id: ObjectId) -> Result<(), ActionResult> {
        if self.visible_unchecked(id).is_none() {
            return Err(ActionResult::fail(ErrorCode::NotVisible, "target not visible"));
        }
        if !self.in_reach(id) {
            return Err(ActionResult::fail(ErrorCode::NotReachable, "target out of reach"));
        }
        Ok(())
    }

    fn target(&self, id: ObjectId, need: Affordance) -> Result<&ObjectInstance, ActionResult> {
        match self.objects.get(&id) {
            None => Err(ActionResult::fail(ErrorCode::InvalidTarget, "unknown object")),
            Some(o) if !o.has(need) => {
                Err(ActionResult::fail(ErrorCode::InvalidTarget, format!("{} is not {need:?}", o.category)))
            }
            Some(_) if self.is_carried(id) => {
                Err(ActionResult::fail(ErrorCode::InvalidTarget, "target is being carried"))
            }
            Some(o) => Ok(o),
        }
    }

    fn pick(&mut self, id: ObjectId) -> ActionResult {
        if let Err(r) = self.target(id, Affordance::Pickupable) {
            return r;
        }
        if self.agent.held_object.is_some() {
            return ActionResult::fail(ErrorCode::HandFull, "already holding an object");
        }
        if let Err(r) = self.perceivable(id) {
            return r;
        }
        let parent = self.objects[&id].states.parent_receptacle;
        if let Some(p) = parent {
            if !self.objects.get(&p).map_or(true, ObjectInstance::is_open) {
                return ActionResult::fail(ErrorCode::ClosedReceptacle, "receptacle closed");
            }
        }
        self.objects.get_mut(&id).expect("checked").states.parent_receptacle = None;
        self.agent.held_object = Some(id);
        ActionResult::ok("picked up")
    }

    fn place(&mut self, rec: ObjectId) -> ActionResult {
        let Some(held) = self.agent.held_object else {
            return ActionResult::fail(ErrorCode::HandEmpty, "not holding anything");
        };
        let r = match self.target(rec, Affordance::Receptacle) {
            Ok(r) => r,
            Err(e) => return e,
        };
        if rec == held {
            return ActionResult::fail(ErrorCode::InvalidTarget, "cannot place an object into itself");
        }
        let open = r.is_open();
        if let Err(e) = self.perceivable(rec) {
            return e;
        }
        if !open {
            return ActionResult::fail(ErrorCode::ClosedReceptacle, "receptacle closed");
        }
        let r = &self.objects[&rec];
        let (on, liquid, cooker) = (r.is_on(), r.spec().and_then(|s| s.liquid), r.spec().is_some_and(|s| s.cooker));
        let obj = self.objects.get_mut(&held).expect("held object exists");
        obj.states.parent_receptacle = Some(rec);
        if on && cooker && obj.has(Affordance::Cookable) {
            obj.states.cooked = Some(true);
        }
        if on && obj.has(Affordance::Fillable) {
            if let Some(l) = liquid {
                obj.states.filled_with = Some(l.to_string());
            }
        }
        self.agent.held_object = None;
        ActionResult::ok("placed")
    }

    fn set_open(&mut self, id: ObjectId, open: bool) -> ActionResult {
        match self.target(id, Affordance::Openable) {
            Err(r) => return r,
            Ok(o) if o.states.open == Some(open) => {
                return ActionResult::fail(ErrorCode::InvalidTarget, if open { "already open" } else { "already closed" })
            }
            Ok(_) => {}
        }
        if let Err(r) = self.perceivable(id) {
            return r;
        }
        self.objects.get_mut(&id).expect("checked").states.open = Some(open);
        ActionResult::ok(if open { "opened" } else { "closed" })
    }

    fn toggle(&mut self, id: ObjectId, on: bool) -> ActionResult {
        match self.target(id, Affordance::Toggleable) {
            Err(r) => return r,
            Ok(o) if o.states.toggled_on == Some(on) => {
                return ActionResult::fail(ErrorCode::InvalidTarget, if on { "already on" } else { "already off" })
            }
            Ok(_) => {}
        }
        if let Err(r) = self.perceivable(id) {
            return r;
        }
        self.objects.get_mut(&id).expect("checked").states.toggled_on = Some(on);
        ActionResult::ok(if on { "switched on" } else { "switched off" })
    }

    fn slice(&mut self, id: ObjectId) -> ActionResult {
        let o = match self.target(id, Affordance::Sliceable) {
            Ok(o) => o,
            Err(r) => return r,
        };
        if o.states.sliced == Some(true) {
            return ActionResult::fail(ErrorCode::InvalidTarget, "already sliced");
        }
        let on_surface = o
            .states
            .parent_receptacle
            .and_then(|p| self.objects.get(&p))
            .is_some_and(|p| p.has(Affordance::FlatSurface));
        if !on_surface {
            return ActionResult::fail(ErrorCode::InvalidTarget, "target is not on a flat surface");
        }
        let has_knife = self.agent.held_object.and_then(|h| self.objects.get(&h)).is_some_and(ObjectInstance::is_knife);
        if !has_knife {
            return ActionResult::fail(ErrorCode::NoKnife, "slicing needs a knife in hand");
        }
        if let Err(r) = self.perceivable(id) {
            return r;
        }
        self.objects.get_mut(&id).expect("checked").states.sliced = Some(true);
        ActionResult::ok("sliced")
    }

    /// Lists every violated world invariant; empty when the state is valid.
    pub fn validate_world(&self) -> Vec<Violation> {
        let mut out = validate_layout(&self.layout);
        let grid = self.grid();
        let solids: Vec<(&ObjectInstance, CellRect)> =
            self.objects.values().filter_map(|o| o.footprint.map(|f| (o, f))).collect();
        for (i, (a, fa)) in solids.iter().enumerate() {
            for (b, fb) in &solids[i + 1..] {
                if fa.intersects(fb) {
                    out.push(Violation::Overlap { a: a.id, b: b.id });
                }
            }
            if fa.cells().any(|c| grid.is_wall(c)) {
                out.push(Violation::FootprintInWall { object: a.id });
            }
        }
        for o in self.objects.values() {
            let held = self.agent.held_object == Some(o.id);
            let placements =
                usize::from(o.footprint.is_some()) + usize::from(o.states.parent_receptacle.is_some()) + usize::from(held);
            if placements != 1 {
                out.push(Violation::Placement { object: o.id, placements });
            }
            if let Some(p) = o.states.parent_receptacle {
                match self.objects.get(&p) {
                    None => out.push(Violation::DanglingReference { object: o.id, parent: p }),
                    Some(po) if !po.has(Affordance::Receptacle) => {
                        out.push(Violation::NotAReceptacle { object: o.id, parent: p })
                    }
                    _ => {}
                }
                if self.contains_cycle(o.id) {
                    out.push(Violation::ContainmentCycle { object: o.id });
                }
            }
            let s = &o.states;
            let checks = [
                ("open", s.open.is_some(), Affordance::Openable),
                ("toggled_on", s.toggled_on.is_some(), Affordance::Toggleable),
                ("sliced", s.sliced.is_some(), Affordance::Sliceable),
                ("cooked", s.cooked.is_some(), Affordance::Cookable),
                ("filled_with", s.filled_with.is_some(), Affordance::Fillable),
            ];
            for (field, present, aff) in checks {
                if present && !o.has(aff) {
                    out.push(Violation::StateWithoutAffordance { object: o.id, field: field.to_string() });
                }
            }
        }
        if let Some(h) = self.agent.held_object {
            match self.objects.get(&h) {
                None => out.push(Violation::DanglingReference { object: h, parent: h }),
                Some(o) if !o.has(Affordance::Pickupable) => out.push(Violation::HeldNotPickupable { object: h }),
                _ => {}
            }
        }
        if !self.agent.pose.is_quantized() {
            out.push(Violation::PoseNotQuantized);
        }
        if grid.is_blocked(self.agent.pose.cell()) {
            out.push(Violation::AgentBlocked);
        }
        out
    }

    fn contains_cycle(&self, id: ObjectId) -> bool {
        let mut seen = BTreeSet::from([id]);
        let mut cur = self.objects.get(&id).and_then(|o| o.states.parent_receptacle);
        while let Some(p) = cur {
            if !seen.insert(p) {
                return true;
            }
            cur = self.objects.get(&p).and_then(|o| o.states.parent_receptacle);
        }
        false
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation")]
pub enum Violation {
    Overlap { a: ObjectId, b: ObjectId },
    FootprintInWall { object: ObjectId },
    DanglingReference { object: ObjectId, parent: ObjectId },
    NotAReceptacle { object: ObjectId, parent: ObjectId },
    ContainmentCycle { object: ObjectId },
    Placement { object: ObjectId, placements: usize },
    StateWithoutAffordance { object: ObjectId, field: String },
    HeldNotPickupable { object: ObjectId },
    PoseNotQuantized,
    AgentBlocked,
    RoomOverlap { a: String, b: String },
    UncoveredWalkableCell { x: i32, z: i32 },
    BadDoorway { index: usize },
    Disconnected { unreachable: usize },
}

/// Structural checks on a layout: rooms tile the walkable area, doorways
/// join exactly two rooms, and the walkable graph is connected.
pub fn validate_layout(layout: &HouseLayout) -> Vec<Violation> {
    let mut out = Vec::new();
    let grid = Grid::build(layout);
    for (i, a) in layout.rooms.iter().enumerate() {
        for b in &layout.rooms[i + 1..] {
            if a.rect.intersects(&b.rect) {
                out.push(Violation::RoomOverlap { a: a.name.clone(), b: b.name.clone() });
            }
        }
    }
    let mut walkable = Vec::new();
    for z in 0..layout.height {
        for x in 0..layout.width {
            let c = Cell::new(x, z);
            if grid.is_wall(c) {
                continue;
            }
            let covered = layout.rooms.iter().any(|r| r.rect.contains(c))
                || layout.doorways.iter().any(|d| d.rect.contains(c));
            if !covered {
                out.push(Violation::UncoveredWalkableCell { x, z });
            }
            if !grid.is_blocked(c) {
                walkable.push(c);
            }
        }
    }
    for (i, d) in layout.doorways.iter().enumerate() {
        let mut touched = BTreeSet::new();
        for c in d.rect.inflate(1).cells() {
            if d.rect.contains(c) {
                continue;
            }
            if let Some(r) = layout.rooms.iter().find(|r| r.rect.contains(c)) {
                touched.insert(r.name.clone());
            }
        }
        let named: BTreeSet<String> = d.rooms.iter().cloned().collect();
        if touched.len() != 2 || touched != named {
            out.push(Violation::BadDoorway { index: i });
        }
    }
    if let Some(&start) = walkable.first() {
        let mut seen = BTreeSet::from([start]);
        let mut q = VecDeque::from([start]);
        while let Some(c) = q.pop_front() {
            for d in Dir4::ALL {
                let n = c.offset(d);
                if !grid.is_blocked(n) && seen.insert(n) {
                    q.push_back(n);
                }
            }
        }
        if seen.len() != walkable.len() {
            out.push(Violation::Disconnected { unreachable: walkable.len() - seen.len() });
        }
    }
    out
}
