//! Omniscient planner that turns checklist goals into a primitive action plan
//! by driving a private copy of the world.

use crate::geom::Cell;
use crate::nav;
use crate::sim::{catalog, Action, Affordance, ErrorCode, ObjectId, WorldState};

use super::checklist::{Condition, ReceptacleRef};
use super::selector::resolve_selector;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WitnessError {
    #[error("no route to object {0}")]
    Unreachable(ObjectId),
    #[error("{action} failed: {code}")]
    ActionFailed { action: &'static str, code: ErrorCode },
    #[error("no suitable {0} in the house")]
    Missing(&'static str),
}

/// A goal the witness knows how to achieve, pinned to a concrete object.
#[derive(Clone, Debug)]
pub struct PinnedGoal {
    pub object: ObjectId,
    pub condition: Condition,
}

#[derive(Clone)]
pub struct Witness {
    pub world: WorldState,
    pub plan: Vec<Action>,
}

impl Witness {
    pub fn new(world: WorldState) -> Self {
        Self { world, plan: Vec::new() }
    }

    fn act(&mut self, a: Action) -> Result<(), WitnessError> {
        let r = self.world.apply_action(&a);
        let name = a.name();
        self.plan.push(a);
        if r.success {
            Ok(())
        } else {
            Err(WitnessError::ActionFailed { action: name, code: r.error.unwrap_or(ErrorCode::InvalidTarget) })
        }
    }

    fn here(&self) -> Cell {
        self.world.agent.pose.cell()
    }

    /// Walks to an interaction spot for `id` and turns to face it.
    fn approach(&mut self, id: ObjectId) -> Result<(), WitnessError> {
        let rect = self.world.anchor_rect(id).ok_or(WitnessError::Unreachable(id))?;
        let cfg = &self.world.config;
        let path = nav::approach_path(self.world.grid(), self.here(), &rect, cfg.reach_m, cfg.view_distance_m)
            .ok_or(WitnessError::Unreachable(id))?;
        let start = self.here();
        for a in nav::moves_along(self.world.agent.pose.heading, start, &path) {
            self.act(a)?;
        }
        for a in nav::face_rect(self.world.agent.pose.heading, self.here(), &rect) {
            self.act(a)?;
        }
        Ok(())
    }

    fn interact(&mut self, id: ObjectId, a: Action) -> Result<(), WitnessError> {
        self.approach(id)?;
        self.act(a)
    }

    /// Opens every closed container around `id`, outermost first. Returns
    /// the ones opened so they can be closed again.
    fn expose(&mut self, id: ObjectId) -> Result<Vec<ObjectId>, WitnessError> {
        let mut opened = Vec::new();
        for anc in self.world.ancestors(id).into_iter().rev() {
            if !self.world.objects[&anc].is_open() {
                self.interact(anc, Action::Open { object: anc })?;
                opened.push(anc);
            }
        }
        Ok(opened)
    }

    fn restore(&mut self, opened: Vec<ObjectId>) -> Result<(), WitnessError> {
        for id in opened.into_iter().rev() {
            self.interact(id, Action::Close { object: id })?;
        }
        Ok(())
    }

    /// Runs a manipulation with its target exposed, then closes what it opened.
    /// Receptacles that must be open for placing are opened too.
    fn manipulate(&mut self, id: ObjectId, a: Action) -> Result<(), WitnessError> {
        let mut opened = self.expose(id)?;
        if matches!(a, Action::Place { .. }) && !self.world.objects[&id].is_open() {
            self.interact(id, Action::Open { object: id })?;
            opened.push(id);
        }
        self.interact(id, a)?;
        self.restore(opened)
    }

    fn pick(&mut self, id: ObjectId) -> Result<(), WitnessError> {
        self.manipulate(id, Action::Pick { object: id })
    }

    fn place(&mut self, rec: ObjectId) -> Result<(), WitnessError> {
        self.manipulate(rec, Action::Place { receptacle: rec })
    }

    fn dist_to(&self, id: ObjectId) -> f64 {
        self.world.anchor_rect(id).map_or(f64::INFINITY, |r| r.dist_m(self.here()))
    }

    /// Nearest non-carried furniture satisfying a predicate.
    fn nearest_furniture(&self, pred: impl Fn(&crate::sim::ObjectInstance) -> bool) -> Option<ObjectId> {
        self.world
            .objects
            .values()
            .filter(|o| o.footprint.is_some() && pred(o))
            .map(|o| o.id)
            .min_by(|a, b| self.dist_to(*a).total_cmp(&self.dist_to(*b)).then(a.cmp(b)))
    }

    /// Moves `id` into some receptacle when it isn't already satisfied.
    fn relocate(&mut self, id: ObjectId, rec: ObjectId) -> Result<(), WitnessError> {
        self.pick(id)?;
        self.place(rec)
    }

    pub fn achieve(&mut self, g: &PinnedGoal) -> Result<(), WitnessError> {
        let id = g.object;
        match &g.condition {
            Condition::InReceptacle { target } => {
                let candidates = match target {
                    ReceptacleRef::Id { id } => vec![*id],
                    ReceptacleRef::Selector { selector } => {
                        resolve_selector(&self.world, selector).unwrap_or_default().into_iter().collect()
                    }
                };
                let rec = candidates
                    .into_iter()
                    .filter(|&r| r != id && !self.world.ancestors(r).contains(&id) && self.world.anchor_rect(r).is_some())
                    .min_by(|a, b| self.dist_to(*a).total_cmp(&self.dist_to(*b)).then(a.cmp(b)))
                    .ok_or(WitnessError::Missing("receptacle"))?;
                self.relocate(id, rec)
            }
            Condition::InRoom { room } => {
                let room = self.world.layout.room(room).ok_or(WitnessError::Missing("room"))?.rect;
                let rec = self
                    .nearest_furniture(|o| {
                        o.has(Affordance::Receptacle) && !o.has(Affordance::Openable) && o.footprint.is_some_and(|f| room.intersects(&f))
                    })
                    .ok_or(WitnessError::Missing("receptacle in room"))?;
                self.relocate(id, rec)
            }
            Condition::Open { value } => {
                let opened = self.expose(id)?;
                let a = if *value { Action::Open { object: id } } else { Action::Close { object: id } };
                self.interact(id, a)?;
                self.restore(opened)
            }
            Condition::ToggledOn { value } => {
                let a = if *value { Action::ToggleOn { object: id } } else { Action::ToggleOff { object: id } };
                self.manipulate(id, a)
            }
            Condition::Sliced => self.slice(id),
            Condition::Cooked => {
                let cooker = self
                    .nearest_furniture(|o| o.spec().is_some_and(|s| s.cooker))
                    .ok_or(WitnessError::Missing("cooker"))?;
                self.fill_or_cook(id, cooker)
            }
            Condition::FilledWith { liquid } => {
                let source = self
                    .nearest_furniture(|o| o.spec().and_then(|s| s.liquid) == Some(liquid.as_str()))
                    .ok_or(WitnessError::Missing("liquid source"))?;
                self.fill_or_cook(id, source)
            }
        }
    }

    /// Pick the object, switch the appliance on, place it in, restore the switch.
    fn fill_or_cook(&mut self, id: ObjectId, appliance: ObjectId) -> Result<(), WitnessError> {
        self.pick(id)?;
        let was_on = self.world.objects[&appliance].is_on();
        if !was_on {
            self.manipulate(appliance, Action::ToggleOn { object: appliance })?;
        }
        self.place(appliance)?;
        if !was_on {
            self.manipulate(appliance, Action::ToggleOff { object: appliance })?;
        }
        Ok(())
    }

    fn slice(&mut self, id: ObjectId) -> Result<(), WitnessError> {
        let on_surface = self.world.objects[&id]
            .states
            .parent_receptacle
            .is_some_and(|p| self.world.objects[&p].has(Affordance::FlatSurface));
        if !on_surface {
            self.pick(id)?;
            let surface = self
                .nearest_furniture(|o| o.has(Affordance::FlatSurface))
                .ok_or(WitnessError::Missing("flat surface"))?;
            self.place(surface)?;
        }
        let knife = self
            .world
            .objects
            .values()
            .filter(|o| catalog::category(&o.category).is_some_and(|s| s.knife))
            .map(|o| o.id)
            .min_by(|a, b| self.dist_to(*a).total_cmp(&self.dist_to(*b)).then(a.cmp(b)))
            .ok_or(WitnessError::Missing("knife"))?;
        self.pick(knife)?;
        self.manipulate(id, Action::Slice { object: id })?;
        let surface = self.world.objects[&id].states.parent_receptacle.ok_or(WitnessError::Missing("surface"))?;
        self.place(surface)
    }
}
