//! Grid path planning and conversion of paths to primitive actions.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::geom::{angle_diff_deg, bearing_deg, quantize_heading, Cell, CellRect, Dir4, CELL_M, ROTATION_DEG};
use crate::sim::{Action, Grid};

/// Anything that can answer blocked-cell and line-of-sight queries.
pub trait Occupancy {
    /// Width and height in cells; cells outside are blocked.
    fn size(&self) -> (i32, i32);
    fn blocked(&self, c: Cell) -> bool;
    /// True when no wall lies on the segment between two points in cell units.
    fn sight_clear(&self, from: (f64, f64), to: (f64, f64)) -> bool;
}

impl Occupancy for Grid {
    fn size(&self) -> (i32, i32) {
        (self.width, self.height)
    }

    fn blocked(&self, c: Cell) -> bool {
        self.is_blocked(c)
    }

    fn sight_clear(&self, from: (f64, f64), to: (f64, f64)) -> bool {
        self.line_clear(from, to)
    }
}

/// A* over 4-connected cells. Returns the cells to step into, excluding
/// `start`; an empty path means `start` already satisfies `is_goal`.
/// `heuristic` must never overestimate the remaining number of moves.
pub fn shortest_path<O: Occupancy + ?Sized>(
    map: &O,
    start: Cell,
    is_goal: impl Fn(Cell) -> bool,
    heuristic: impl Fn(Cell) -> i32,
) -> Option<Vec<Cell>> {
    let (w, h) = map.size();
    if w <= 0 || h <= 0 {
        return None;
    }
    let idx = |c: Cell| (c.z * w + c.x) as usize;
    let in_bounds = |c: Cell| c.x >= 0 && c.z >= 0 && c.x < w && c.z < h;
    if !in_bounds(start) {
        return None;
    }
    let n = (w * h) as usize;
    let mut g = vec![u32::MAX; n];
    let mut came = vec![u32::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    g[idx(start)] = 0;
    open.push(Reverse((heuristic(start).max(0) as u32, heuristic(start).max(0) as u32, idx(start) as u32)));
    while let Some(Reverse((_, _, i))) = open.pop() {
        let i = i as usize;
        if closed[i] {
            continue;
        }
        closed[i] = true;
        let c = Cell::new(i as i32 % w, i as i32 / w);
        if is_goal(c) {
            let mut path = Vec::new();
            let mut cur = i;
            while cur != idx(start) {
                path.push(Cell::new(cur as i32 % w, cur as i32 / w));
                cur = came[cur] as usize;
            }
            path.reverse();
            return Some(path);
        }
        for d in Dir4::ALL {
            let nb = c.offset(d);
            if !in_bounds(nb) || map.blocked(nb) {
                continue;
            }
            let j = idx(nb);
            let ng = g[i] + 1;
            if ng < g[j] {
                g[j] = ng;
                came[j] = i as u32;
                let hh = heuristic(nb).max(0) as u32;
                open.push(Reverse((ng + hh, hh, j as u32)));
            }
        }
    }
    None
}

/// Shortest path to a single cell.
pub fn path_to_cell<O: Occupancy + ?Sized>(map: &O, start: Cell, target: Cell) -> Option<Vec<Cell>> {
    shortest_path(map, start, |c| c == target, |c| c.manhattan(target))
}

/// Whether a cell is a valid spot to interact with an object occupying `rect`:
/// within reach of its nearest cell, within view of its center, and with a
/// wall-free line of sight.
pub fn is_approach_cell<O: Occupancy + ?Sized>(map: &O, c: Cell, rect: &CellRect, reach_m: f64, view_m: f64) -> bool {
    if map.blocked(c) || rect.dist_m(c) > reach_m - 1e-9 {
        return false;
    }
    let center = rect.center();
    let p = (f64::from(c.x), f64::from(c.z));
    let d = ((center.0 - p.0).powi(2) + (center.1 - p.1).powi(2)).sqrt() * CELL_M;
    d <= view_m - 1e-9 && d > 1e-9 && map.sight_clear(p, center)
}

/// Shortest path to any approach cell of `rect`.
pub fn approach_path<O: Occupancy + ?Sized>(
    map: &O,
    start: Cell,
    rect: &CellRect,
    reach_m: f64,
    view_m: f64,
) -> Option<Vec<Cell>> {
    let slack = (reach_m / CELL_M * std::f64::consts::SQRT_2).floor() as i32;
    shortest_path(
        map,
        start,
        |c| is_approach_cell(map, c, rect, reach_m, view_m),
        |c| rect.manhattan(c) - slack,
    )
}

/// Primitive moves that follow a path without turning: the agent strafes
/// or backs up as needed relative to the axis it faces.
pub fn moves_along(heading: i32, start: Cell, path: &[Cell]) -> Vec<Action> {
    let fwd = Dir4::from_heading(heading);
    let mut prev = start;
    let mut out = Vec::with_capacity(path.len());
    for &c in path {
        let d = Dir4::between(prev, c).expect("path cells are 4-adjacent");
        out.push(if d == fwd {
            Action::MoveAhead
        } else if d == fwd.opposite() {
            Action::MoveBack
        } else if d == fwd.clockwise() {
            Action::MoveRight
        } else {
            Action::MoveLeft
        });
        prev = c;
    }
    out
}

/// Shortest rotation sequence from `heading` to `target_heading`.
pub fn turn_to(heading: i32, target_heading: i32) -> Vec<Action> {
    let diff = (target_heading - heading).rem_euclid(360);
    if diff <= 180 {
        vec![Action::RotateRight; (diff / ROTATION_DEG) as usize]
    } else {
        vec![Action::RotateLeft; ((360 - diff) / ROTATION_DEG) as usize]
    }
}

/// Rotations that bring the center of `rect` into the facing direction.
pub fn face_rect(heading: i32, from: Cell, rect: &CellRect) -> Vec<Action> {
    let b = bearing_deg((f64::from(from.x), f64::from(from.z)), rect.center());
    if angle_diff_deg(b, f64::from(heading)) <= f64::from(ROTATION_DEG) / 2.0 {
        return Vec::new();
    }
    turn_to(heading, quantize_heading(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    struct TestMap {
        w: i32,
        h: i32,
        blocked: Vec<bool>,
    }

    impl Occupancy for TestMap {
        fn size(&self) -> (i32, i32) {
            (self.w, self.h)
        }
        fn blocked(&self, c: Cell) -> bool {
            c.x < 0 || c.z < 0 || c.x >= self.w || c.z >= self.h || self.blocked[(c.z * self.w + c.x) as usize]
        }
        fn sight_clear(&self, _: (f64, f64), _: (f64, f64)) -> bool {
            true
        }
    }

    fn bfs_len(m: &TestMap, s: Cell, t: Cell) -> Option<usize> {
        let mut dist = std::collections::HashMap::from([(s, 0usize)]);
        let mut q = VecDeque::from([s]);
        while let Some(c) = q.pop_front() {
            if c == t {
                return Some(dist[&c]);
            }
            for (dx, dz) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let n = Cell::new(c.x + dx, c.z + dz);
                if !m.blocked(n) && !dist.contains_key(&n) {
                    dist.insert(n, dist[&c] + 1);
                    q.push_back(n);
                }
            }
        }
        None
    }

    #[test]
    fn astar_matches_bfs_on_random_grids() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let (w, h) = (rng.gen_range(5..40), rng.gen_range(5..40));
            let blocked = (0..w * h).map(|_| rng.gen_bool(0.3)).collect();
            let mut m = TestMap { w, h, blocked };
            let s = Cell::new(rng.gen_range(0..w), rng.gen_range(0..h));
            let t = Cell::new(rng.gen_range(0..w), rng.gen_range(0..h));
            m.blocked[(s.z * w + s.x) as usize] = false;
            m.blocked[(t.z * w + t.x) as usize] = false;
            let got = path_to_cell(&m, s, t).map(|p| p.len());
            assert_eq!(got, bfs_len(&m, s, t));
        }
    }

    #[test]
    fn moves_follow_facing_axis() {
        let start = Cell::new(0, 0);
        let path = [Cell::new(0, 1), Cell::new(1, 1), Cell::new(1, 0), Cell::new(0, 0)];
        assert_eq!(
            moves_along(0, start, &path),
            vec![Action::MoveAhead, Action::MoveRight, Action::MoveBack, Action::MoveLeft]
        );
        assert_eq!(moves_along(90, start, &path[..1]), vec![Action::MoveLeft]);
    }

    #[test]
    fn turning_takes_the_short_way() {
        assert_eq!(turn_to(0, 90).len(), 3);
        assert!(turn_to(0, 270).iter().all(|a| *a == Action::RotateLeft));
        assert_eq!(turn_to(330, 30), vec![Action::RotateRight; 2]);
        assert!(turn_to(120, 120).is_empty());
    }
}
