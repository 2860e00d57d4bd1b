use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::catalog::{self, Affordance, CategorySpec};
use crate::geom::{Cell, CellRect, ROTATION_DEG};

pub const MIN_PITCH: i32 = -60;
pub const MAX_PITCH: i32 = 60;

/// Agent pose. `x` and `z` are grid units of one movement quantum (0.05 m).
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pose {
    pub x: i32,
    pub z: i32,
    pub heading: i32,
    pub pitch: i32,
}

impl Pose {
    pub fn new(cell: Cell, heading: i32) -> Self {
        Self { x: cell.x, z: cell.z, heading: heading.rem_euclid(360), pitch: 0 }
    }

    pub fn cell(&self) -> Cell {
        Cell::new(self.x, self.z)
    }

    pub fn x_m(&self) -> f64 {
        self.cell().x_m()
    }

    pub fn z_m(&self) -> f64 {
        self.cell().z_m()
    }

    pub fn is_quantized(&self) -> bool {
        self.heading % ROTATION_DEG == 0
            && (0..360).contains(&self.heading)
            && self.pitch % ROTATION_DEG == 0
            && (MIN_PITCH..=MAX_PITCH).contains(&self.pitch)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u32);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// The six state families monitored by checklists.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectStateSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toggled_on: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sliced: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cooked: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filled_with: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_receptacle: Option<ObjectId>,
}

impl ObjectStateSet {
    /// Default state for a fresh object of the given category.
    pub fn for_category(spec: &CategorySpec) -> Self {
        Self {
            open: spec.has(Affordance::Openable).then_some(false),
            toggled_on: spec.has(Affordance::Toggleable).then_some(false),
            sliced: spec.has(Affordance::Sliceable).then_some(false),
            cooked: spec.has(Affordance::Cookable).then_some(false),
            filled_with: None,
            parent_receptacle: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: ObjectId,
    pub category: String,
    #[serde(default)]
    pub attributes: BTreeSet<String>,
    /// Floor cells for furniture; `None` for objects inside a receptacle or held.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub footprint: Option<CellRect>,
    pub size_cells: u32,
    pub affordances: BTreeSet<Affordance>,
    pub states: ObjectStateSet,
}

impl ObjectInstance {
    pub fn has(&self, a: Affordance) -> bool {
        self.affordances.contains(&a)
    }

    pub fn spec(&self) -> Option<&'static CategorySpec> {
        catalog::category(&self.category)
    }

    pub fn is_knife(&self) -> bool {
        self.spec().is_some_and(|s| s.knife)
    }

    pub fn is_open(&self) -> bool {
        self.states.open.unwrap_or(true)
    }

    pub fn is_on(&self) -> bool {
        self.states.toggled_on == Some(true)
    }

    /// Human-readable label, e.g. "red mug".
    pub fn label(&self) -> String {
        let mut parts: Vec<&str> = self.attributes.iter().map(String::as_str).collect();
        parts.push(&self.category);
        parts.join(" ").replace('_', " ")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Room {
    pub name: String,
    /// Walkable interior of the room.
    pub rect: CellRect,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Doorway {
    pub rect: CellRect,
    pub rooms: [String; 2],
}

pub const LAYOUT_SCHEMA_VERSION: u32 = 1;

/// Static house description plus the initial objects.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HouseLayout {
    pub schema_version: u32,
    pub name: String,
    pub width: i32,
    pub height: i32,
    pub rooms: Vec<Room>,
    pub walls: Vec<CellRect>,
    pub doorways: Vec<Doorway>,
    pub objects: Vec<ObjectInstance>,
    pub agent_start: Pose,
}

impl HouseLayout {
    pub fn room(&self, name: &str) -> Option<&Room> {
        self.rooms.iter().find(|r| r.name == name)
    }

    /// Room containing a cell; doorway cells belong to the first room listed.
    pub fn room_at(&self, c: Cell) -> Option<&str> {
        if let Some(r) = self.rooms.iter().find(|r| r.rect.contains(c)) {
            return Some(&r.name);
        }
        self.doorways
            .iter()
            .find(|d| d.rect.contains(c))
            .map(|d| d.rooms[0].as_str())
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.z >= 0 && c.x < self.width && c.z < self.height
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentState {
    pub pose: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held_object: Option<ObjectId>,
    pub nav_steps: u64,
    pub manip_steps: u64,
    pub total_actions: u64,
    /// Movement quanta accumulated since the last navigation step tick.
    pub pending_quanta: u32,
}

impl AgentState {
    pub fn new(pose: Pose) -> Self {
        Self { pose, held_object: None, nav_steps: 0, manip_steps: 0, total_actions: 0, pending_quanta: 0 }
    }

    /// Metric steps: navigation plus manipulation.
    pub fn metric_steps(&self) -> u64 {
        self.nav_steps + self.manip_steps
    }

    pub fn accumulated_distance_m(&self) -> f64 {
        f64::from(self.pending_quanta) * crate::geom::CELL_M
    }
}

/// The 8 navigation actions, 7 manipulation actions and `Stop`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "action")]
pub enum Action {
    MoveAhead,
    MoveBack,
    MoveLeft,
    MoveRight,
    RotateRight,
    RotateLeft,
    LookUp,
    LookDown,
    Pick { object: ObjectId },
    Place { receptacle: ObjectId },
    Open { object: ObjectId },
    Close { object: ObjectId },
    ToggleOn { object: ObjectId },
    ToggleOff { object: ObjectId },
    Slice { object: ObjectId },
    Stop,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ActionClass {
    Move,
    Rotate,
    Tilt,
    Manipulation,
    Stop,
}

impl Action {
    pub const NAMES: [&'static str; 16] = [
        "MoveAhead", "MoveBack", "MoveLeft", "MoveRight", "RotateRight", "RotateLeft", "LookUp",
        "LookDown", "Pick", "Place", "Open", "Close", "ToggleOn", "ToggleOff", "Slice", "Stop",
    ];

    pub fn class(&self) -> ActionClass {
        use Action::*;
        match self {
            MoveAhead | MoveBack | MoveLeft | MoveRight => ActionClass::Move,
            RotateLeft | RotateRight => ActionClass::Rotate,
            LookUp | LookDown => ActionClass::Tilt,
            Stop => ActionClass::Stop,
            _ => ActionClass::Manipulation,
        }
    }

    pub fn is_navigation(&self) -> bool {
        matches!(self.class(), ActionClass::Move | ActionClass::Rotate | ActionClass::Tilt)
    }

    pub fn target(&self) -> Option<ObjectId> {
        use Action::*;
        match self {
            Pick { object } | Open { object } | Close { object } | ToggleOn { object }
            | ToggleOff { object } | Slice { object } => Some(*object),
            Place { receptacle } => Some(*receptacle),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        use Action::*;
        let i = match self {
            MoveAhead => 0,
            MoveBack => 1,
            MoveLeft => 2,
            MoveRight => 3,
            RotateRight => 4,
            RotateLeft => 5,
            LookUp => 6,
            LookDown => 7,
            Pick { .. } => 8,
            Place { .. } => 9,
            Open { .. } => 10,
            Close { .. } => 11,
            ToggleOn { .. } => 12,
            ToggleOff { .. } => 13,
            Slice { .. } => 14,
            Stop => 15,
        };
        Self::NAMES[i]
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorCode {
    Collision,
    NotVisible,
    NotReachable,
    HandFull,
    HandEmpty,
    NoKnife,
    ClosedReceptacle,
    InvalidTarget,
    EpisodeCapExceeded,
    EpisodeTerminated,
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionResult {
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorCode>,
    pub message: String,
}

impl ActionResult {
    pub fn ok(message: impl Into<String>) -> Self {
        Self { success: true, error: None, message: message.into() }
    }

    pub fn fail(code: ErrorCode, message: impl Into<String>) -> Self {
        Self { success: false, error: Some(code), message: message.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibleRecord {
    pub id: ObjectId,
    pub category: String,
    pub attributes: BTreeSet<String>,
    /// Distance in meters from the agent to the object's location.
    pub distance: f64,
    /// Apparent size proxy: cells / distance^2, at least 1.
    pub mask_area: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub containing_receptacle: Option<ObjectId>,
    /// Floor cells of the object or of the furniture it rests in.
    pub footprint: CellRect,
    pub states: ObjectStateSet,
}

/// Blocked/free patch centred on the agent. Rows run from `origin.z` upward,
/// `#` marks a blocked cell and `.` a free one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalOccupancy {
    pub origin: Cell,
    pub width: i32,
    pub height: i32,
    pub rows: Vec<String>,
}

impl LocalOccupancy {
    pub fn cells(&self) -> impl Iterator<Item = (Cell, bool)> + '_ {
        self.rows.iter().enumerate().flat_map(move |(dz, row)| {
            row.bytes().enumerate().map(move |(dx, b)| {
                (Cell::new(self.origin.x + dx as i32, self.origin.z + dz as i32), b == b'#')
            })
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub agent_pose: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held_object: Option<ObjectId>,
    pub visible: Vec<VisibleRecord>,
    pub local_occupancy: LocalOccupancy,
}
