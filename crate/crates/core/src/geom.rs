//! Planar grid geometry shared by the simulator, the planners and memory.
//!
//! Positions are integer grid points spaced one movement quantum apart, so
//! every pose the simulator can reach is exactly representable.

use serde::{Deserialize, Serialize};

/// Side length of one grid cell in meters (the movement quantum).
pub const CELL_M: f64 = 0.05;
/// Rotation and tilt quantum in degrees.
pub const ROTATION_DEG: i32 = 30;
/// Movement quanta that make up one navigation metric step (0.25 m).
pub const QUANTA_PER_NAV_STEP: u32 = 5;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub z: i32,
}

impl Cell {
    pub const fn new(x: i32, z: i32) -> Self {
        Self { x, z }
    }

    pub fn offset(self, d: Dir4) -> Self {
        let (dx, dz) = d.delta();
        Self::new(self.x + dx, self.z + dz)
    }

    pub fn manhattan(self, other: Cell) -> i32 {
        (self.x - other.x).abs() + (self.z - other.z).abs()
    }

    /// Euclidean distance in meters.
    pub fn dist_m(self, other: Cell) -> f64 {
        let dx = f64::from(self.x - other.x);
        let dz = f64::from(self.z - other.z);
        (dx * dx + dz * dz).sqrt() * CELL_M
    }

    pub fn x_m(self) -> f64 {
        f64::from(self.x) * CELL_M
    }

    pub fn z_m(self) -> f64 {
        f64::from(self.z) * CELL_M
    }
}

/// Axis-aligned block of cells `[x0, x0 + w) x [z0, z0 + h)`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellRect {
    pub x0: i32,
    pub z0: i32,
    pub w: i32,
    pub h: i32,
}

impl CellRect {
    pub const fn new(x0: i32, z0: i32, w: i32, h: i32) -> Self {
        Self { x0, z0, w, h }
    }

    pub fn x1(&self) -> i32 {
        self.x0 + self.w
    }

    pub fn z1(&self) -> i32 {
        self.z0 + self.h
    }

    pub fn area(&self) -> u32 {
        (self.w.max(0) * self.h.max(0)) as u32
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x >= self.x0 && c.x < self.x1() && c.z >= self.z0 && c.z < self.z1()
    }

    pub fn intersects(&self, o: &CellRect) -> bool {
        self.x0 < o.x1() && o.x0 < self.x1() && self.z0 < o.z1() && o.z0 < self.z1()
    }

    pub fn intersection(&self, o: &CellRect) -> Option<CellRect> {
        let (x0, z0) = (self.x0.max(o.x0), self.z0.max(o.z0));
        let (x1, z1) = (self.x1().min(o.x1()), self.z1().min(o.z1()));
        (x0 < x1 && z0 < z1).then(|| CellRect::new(x0, z0, x1 - x0, z1 - z0))
    }

    /// Grows the rectangle by `m` cells on every side.
    pub fn inflate(&self, m: i32) -> CellRect {
        CellRect::new(self.x0 - m, self.z0 - m, self.w + 2 * m, self.h + 2 * m)
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let (x0, x1, z0, z1) = (self.x0, self.x1(), self.z0, self.z1());
        (z0..z1).flat_map(move |z| (x0..x1).map(move |x| Cell::new(x, z)))
    }

    /// Center in cell units (may fall between grid points).
    pub fn center(&self) -> (f64, f64) {
        (
            f64::from(self.x0) + f64::from(self.w - 1) / 2.0,
            f64::from(self.z0) + f64::from(self.h - 1) / 2.0,
        )
    }

    pub fn center_cell(&self) -> Cell {
        Cell::new(self.x0 + (self.w - 1) / 2, self.z0 + (self.h - 1) / 2)
    }

    /// The cell of this rectangle closest to `c`.
    pub fn nearest_cell(&self, c: Cell) -> Cell {
        Cell::new(
            c.x.clamp(self.x0, self.x1() - 1),
            c.z.clamp(self.z0, self.z1() - 1),
        )
    }

    /// Distance in meters from `c` to the nearest cell of the rectangle.
    pub fn dist_m(&self, c: Cell) -> f64 {
        c.dist_m(self.nearest_cell(c))
    }

    /// Manhattan distance in cells from `c` to the rectangle.
    pub fn manhattan(&self, c: Cell) -> i32 {
        c.manhattan(self.nearest_cell(c))
    }
}

/// Cardinal grid direction. `North` is +z, `East` is +x.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Dir4 {
    North,
    East,
    South,
    West,
}

impl Dir4 {
    pub const ALL: [Dir4; 4] = [Dir4::North, Dir4::East, Dir4::South, Dir4::West];

    pub fn delta(self) -> (i32, i32) {
        match self {
            Dir4::North => (0, 1),
            Dir4::East => (1, 0),
            Dir4::South => (0, -1),
            Dir4::West => (-1, 0),
        }
    }

    pub fn clockwise(self) -> Dir4 {
        match self {
            Dir4::North => Dir4::East,
            Dir4::East => Dir4::South,
            Dir4::South => Dir4::West,
            Dir4::West => Dir4::North,
        }
    }

    pub fn opposite(self) -> Dir4 {
        self.clockwise().clockwise()
    }

    pub fn counter_clockwise(self) -> Dir4 {
        self.opposite().clockwise()
    }

    pub fn between(from: Cell, to: Cell) -> Option<Dir4> {
        match (to.x - from.x, to.z - from.z) {
            (0, 1) => Some(Dir4::North),
            (1, 0) => Some(Dir4::East),
            (0, -1) => Some(Dir4::South),
            (-1, 0) => Some(Dir4::West),
            _ => None,
        }
    }

    /// The cardinal axis nearest to a heading. Headings are multiples of 30
    /// degrees so no heading sits exactly between two axes.
    pub fn from_heading(heading_deg: i32) -> Dir4 {
        match heading_deg.rem_euclid(360) {
            0..=44 | 316..=359 => Dir4::North,
            45..=134 => Dir4::East,
            135..=224 => Dir4::South,
            _ => Dir4::West,
        }
    }
}

/// Compass bearing in degrees (0 = +z, clockwise) from one point to another,
/// both in cell units.
pub fn bearing_deg(from: (f64, f64), to: (f64, f64)) -> f64 {
    let dx = to.0 - from.0;
    let dz = to.1 - from.1;
    dx.atan2(dz).to_degrees().rem_euclid(360.0)
}

/// Smallest absolute difference between two angles in degrees.
pub fn angle_diff_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Nearest multiple of the rotation quantum to a bearing.
pub fn quantize_heading(bearing: f64) -> i32 {
    let q = f64::from(ROTATION_DEG);
    (((bearing / q).round() as i32) * ROTATION_DEG).rem_euclid(360)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heading_axes() {
        assert_eq!(Dir4::from_heading(0), Dir4::North);
        assert_eq!(Dir4::from_heading(30), Dir4::North);
        assert_eq!(Dir4::from_heading(60), Dir4::East);
        assert_eq!(Dir4::from_heading(120), Dir4::East);
        assert_eq!(Dir4::from_heading(150), Dir4::South);
        assert_eq!(Dir4::from_heading(210), Dir4::South);
        assert_eq!(Dir4::from_heading(240), Dir4::West);
        assert_eq!(Dir4::from_heading(330), Dir4::North);
    }

    #[test]
    fn bearing_quantization() {
        assert_eq!(quantize_heading(bearing_deg((0.0, 0.0), (0.0, 5.0))), 0);
        assert_eq!(quantize_heading(bearing_deg((0.0, 0.0), (5.0, 0.0))), 90);
        assert_eq!(quantize_heading(bearing_deg((0.0, 0.0), (-5.0, 0.0))), 270);
        assert_eq!(quantize_heading(359.0), 0);
        assert!((angle_diff_deg(350.0, 10.0) - 20.0).abs() < 1e-12);
    }

    #[test]
    fn rect_distance_and_clamp() {
        let r = CellRect::new(10, 10, 4, 2);
        assert_eq!(r.nearest_cell(Cell::new(0, 0)), Cell::new(10, 10));
        assert_eq!(r.manhattan(Cell::new(20, 11)), 7);
        assert_eq!(r.cells().count(), 8);
        assert!(r.contains(Cell::new(13, 11)));
        assert!(!r.contains(Cell::new(14, 11)));
    }
}
