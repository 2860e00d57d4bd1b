//! What the agent may see of the world.

use crate::sim::{Action, ActionResult, HouseLayout, Observation, WorldState};

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub result: ActionResult,
    pub done: bool,
}

/// An episode the agent can act in. Implemented by logged sessions and by
/// [`DirectEnv`].
pub trait Environment {
    fn observation(&self) -> Observation;
    fn step(&mut self, action: &Action) -> StepOutcome;
    /// Attaches a critic directive or diagnostic to the latest action.
    fn annotate(&mut self, directive: Option<&str>, diagnostic: Option<&str>);
    fn is_done(&self) -> bool;
    /// Walls, rooms and doorways. Carries no objects.
    fn floor_plan(&self) -> HouseLayout;
}

/// The layout with every object removed.
pub fn floor_plan_of(layout: &HouseLayout) -> HouseLayout {
    HouseLayout { objects: Vec::new(), ..layout.clone() }
}

/// Unlogged environment over a bare world state.
pub struct DirectEnv {
    pub world: WorldState,
    pub annotations: Vec<(u64, Option<String>, Option<String>)>,
}

impl DirectEnv {
    pub fn new(world: WorldState) -> Self {
        Self { world, annotations: Vec::new() }
    }
}

impl Environment for DirectEnv {
    fn observation(&self) -> Observation {
        self.world.render_observation()
    }

    fn step(&mut self, action: &Action) -> StepOutcome {
        let result = self.world.apply_action(action);
        StepOutcome { observation: self.world.render_observation(), result, done: self.world.terminated }
    }

    fn annotate(&mut self, directive: Option<&str>, diagnostic: Option<&str>) {
        self.annotations.push((
            self.world.agent.total_actions,
            directive.map(str::to_owned),
            diagnostic.map(str::to_owned),
        ));
    }

    fn is_done(&self) -> bool {
        self.world.terminated
    }

    fn floor_plan(&self) -> HouseLayout {
        floor_plan_of(&self.world.layout)
    }
}
