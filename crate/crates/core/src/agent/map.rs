//! The agent's belief about blocked cells: walls from the floor plan plus
//! whatever it has observed.

use crate::geom::{Cell, CellRect};
use crate::nav::Occupancy;
use crate::sim::{Grid, HouseLayout, Observation};

#[derive(Debug)]
pub struct KnownMap {
    walls: Grid,
    seen: Vec<bool>,
}

impl KnownMap {
    pub fn new(floor_plan: &HouseLayout) -> Self {
        let walls = Grid::build(floor_plan);
        let n = (walls.width.max(0) * walls.height.max(0)) as usize;
        Self { walls, seen: vec![false; n] }
    }

    fn index(&self, c: Cell) -> Option<usize> {
        (c.x >= 0 && c.z >= 0 && c.x < self.walls.width && c.z < self.walls.height)
            .then(|| (c.z * self.walls.width + c.x) as usize)
    }

    pub fn mark(&mut self, c: Cell, blocked: bool) {
        if let Some(i) = self.index(c) {
            self.seen[i] = blocked;
        }
    }

    pub fn mark_rect(&mut self, r: &CellRect) {
        for c in r.cells() {
            self.mark(c, true);
        }
    }

    /// Folds in the occupancy patch and the footprints of visible objects.
    /// Returns whether any cell changed to blocked.
    pub fn absorb(&mut self, obs: &Observation) -> bool {
        let mut changed = false;
        for (c, blocked) in obs.local_occupancy.cells() {
            if let Some(i) = self.index(c) {
                changed |= blocked && !self.seen[i];
                self.seen[i] = blocked;
            }
        }
        for r in &obs.visible {
            for c in r.footprint.cells() {
                if let Some(i) = self.index(c) {
                    changed |= !self.seen[i];
                    self.seen[i] = true;
                }
            }
        }
        changed
    }
}

impl Occupancy for KnownMap {
    fn size(&self) -> (i32, i32) {
        (self.walls.width, self.walls.height)
    }

    fn blocked(&self, c: Cell) -> bool {
        self.walls.is_wall(c) || self.index(c).is_some_and(|i| self.seen[i])
    }

    fn sight_clear(&self, from: (f64, f64), to: (f64, f64)) -> bool {
        self.walls.line_clear(from, to)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::floor_plan_of;
    use crate::sim::{generate_layout, SimConfig, WorldState};

    #[test]
    fn observed_cells_agree_with_the_true_grid() {
        let layout = generate_layout(5);
        let world = WorldState::from_layout(layout.clone(), SimConfig::default());
        let mut map = KnownMap::new(&floor_plan_of(&layout));
        let obs = world.render_observation();
        map.absorb(&obs);
        for (c, _) in obs.local_occupancy.cells() {
            assert_eq!(map.blocked(c), world.grid().is_blocked(c), "{c:?}");
        }
    }
}
