//! Seeded procedural house layouts.
//!
//! Rooms sit on a 2 x 2 or 3 x 2 grid separated by one-cell walls. A random
//! spanning tree over neighbouring rooms gets doorways, so the house is always
//! connected. Furniture is placed against walls away from doorways and each
//! placement is kept only if the room stays connected.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::catalog::{self, Affordance, Placement, COLORS, FINISHES};
use super::types::*;
use crate::geom::{Cell, CellRect, Dir4};

const DOOR_WIDTH: i32 = 16;
const DOOR_CLEARANCE: i32 = 20;

fn room_furniture(room: &str, has_dining_room: bool) -> Vec<&'static str> {
    match room {
        "kitchen" => {
            let mut v = vec![
                "fridge", "counter", "stove", "sink", "counter", "coffee_machine", "microwave", "cabinet", "drawer",
                "garbage_can",
            ];
            if !has_dining_room {
                v.push("dining_table");
            }
            v
        }
        "living_room" => vec!["sofa", "coffee_table", "tv", "floor_lamp", "shelf", "cabinet"],
        "bedroom" => vec!["bed", "nightstand", "desk", "drawer", "floor_lamp", "shelf"],
        "bathroom" => vec!["sink", "bathtub", "towel_rack", "cabinet"],
        "office" => vec!["desk", "shelf", "drawer", "floor_lamp", "garbage_can"],
        "dining_room" => vec!["dining_table", "cabinet", "shelf", "floor_lamp"],
        _ => vec![],
    }
}

fn room_portables(room: &str) -> Vec<(&'static str, usize)> {
    match room {
        "kitchen" => vec![
            ("mug", 2),
            ("cup", 1),
            ("bowl", 1),
            ("plate", 2),
            ("pot", 1),
            ("kettle", 1),
            ("apple", 2),
            ("bread", 1),
            ("tomato", 1),
            ("potato", 1),
            ("egg", 2),
            ("knife", 1),
            ("fork", 1),
            ("spoon", 1),
        ],
        "living_room" => vec![("remote_control", 1), ("newspaper", 1), ("book", 2), ("pillow", 1), ("keys", 1)],
        "bedroom" => vec![("book", 1), ("pillow", 1), ("laptop", 1), ("cell_phone", 1), ("pen", 1)],
        "bathroom" => vec![("towel", 2), ("soap_bottle", 1)],
        "office" => vec![("laptop", 1), ("book", 1), ("pen", 2), ("pencil", 1), ("mug", 1)],
        "dining_room" => vec![("plate", 1), ("fork", 1), ("cup", 1)],
        _ => vec![],
    }
}

struct Builder {
    rng: ChaCha8Rng,
    width: i32,
    height: i32,
    rooms: Vec<Room>,
    walls: Vec<CellRect>,
    doorways: Vec<Doorway>,
    clearance: Vec<CellRect>,
    objects: Vec<ObjectInstance>,
    next_id: u32,
}

/// Builds a house from a seed. The same seed always yields the same layout.
pub fn generate_layout(seed: u64) -> HouseLayout {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_1A70);
    let cols: usize = if rng.gen_bool(0.5) { 2 } else { 3 };
    let rows = 2usize;
    let widths: Vec<i32> = (0..cols).map(|_| rng.gen_range(64..=84)).collect();
    let heights: Vec<i32> = (0..rows).map(|_| rng.gen_range(64..=84)).collect();
    let mut xs = vec![0];
    for w in &widths {
        xs.push(xs.last().unwrap() + w + 1);
    }
    let mut zs = vec![0];
    for h in &heights {
        zs.push(zs.last().unwrap() + h + 1);
    }
    let width = xs[cols] + 1;
    let height = zs[rows] + 1;

    let mut names: Vec<&str> = vec!["living_room", "kitchen", "bedroom", "bathroom"];
    if cols == 3 {
        names.extend(["office", "dining_room"]);
    }
    names.shuffle(&mut rng);

    let mut b = Builder {
        rng,
        width,
        height,
        rooms: Vec::new(),
        walls: Vec::new(),
        doorways: Vec::new(),
        clearance: Vec::new(),
        objects: Vec::new(),
        next_id: 1,
    };
    for &x in &xs {
        b.walls.push(CellRect::new(x, 0, 1, height));
    }
    for &z in &zs {
        b.walls.push(CellRect::new(0, z, width, 1));
    }
    let mut grid_names = BTreeMap::new();
    for r in 0..rows {
        for c in 0..cols {
            let name = names[r * cols + c].to_string();
            b.rooms.push(Room { name: name.clone(), rect: CellRect::new(xs[c] + 1, zs[r] + 1, widths[c], heights[r]) });
            grid_names.insert((c, r), name);
        }
    }

    // Candidate doorways between grid neighbours; a shuffled Kruskal pass keeps
    // a spanning tree and a few extra loops.
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push(((c, r), (c + 1, r)));
            }
            if r + 1 < rows {
                edges.push(((c, r), (c, r + 1)));
            }
        }
    }
    edges.shuffle(&mut b.rng);
    let mut parent: Vec<usize> = (0..rows * cols).collect();
    fn find(p: &mut Vec<usize>, i: usize) -> usize {
        let mut i = i;
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for (a, bb) in edges {
        let (ia, ib) = (a.1 * cols + a.0, bb.1 * cols + bb.0);
        let (ra, rb) = (find(&mut parent, ia), find(&mut parent, ib));
        let joins = ra != rb;
        if joins {
            parent[ra] = rb;
        }
        if !(joins || b.rng.gen_bool(0.3)) {
            continue;
        }
        let rooms = [grid_names[&a].clone(), grid_names[&bb].clone()];
        let (rect, zone) = if a.1 == bb.1 {
            let x = xs[a.0 + 1];
            let span = heights[a.1];
            let off = b.rng.gen_range(12..=span - 12 - DOOR_WIDTH);
            let z0 = zs[a.1] + 1 + off;
            (CellRect::new(x, z0, 1, DOOR_WIDTH), CellRect::new(x - DOOR_CLEARANCE, z0 - 4, 2 * DOOR_CLEARANCE + 1, DOOR_WIDTH + 8))
        } else {
            let z = zs[a.1 + 1];
            let span = widths[a.0];
            let off = b.rng.gen_range(12..=span - 12 - DOOR_WIDTH);
            let x0 = xs[a.0] + 1 + off;
            (CellRect::new(x0, z, DOOR_WIDTH, 1), CellRect::new(x0 - 4, z - DOOR_CLEARANCE, DOOR_WIDTH + 8, 2 * DOOR_CLEARANCE + 1))
        };
        b.doorways.push(Doorway { rect, rooms });
        b.clearance.push(zone);
    }

    let has_dining = b.rooms.iter().any(|r| r.name == "dining_room");
    let room_list = b.rooms.clone();
    for room in &room_list {
        for cat in room_furniture(&room.name, has_dining) {
            b.place_furniture(room, cat);
        }
    }
    for room in &room_list {
        b.place_fixtures(room);
    }
    for room in &room_list {
        for (cat, n) in room_portables(&room.name) {
            for _ in 0..n {
                b.place_portable(room, cat);
            }
        }
    }
    b.randomize_states();

    let living = room_list.iter().find(|r| r.name == "living_room").expect("living room present").clone();
    let start = b.free_cell_in(&living);
    let heading = 30 * b.rng.gen_range(0..12);
    HouseLayout {
        schema_version: LAYOUT_SCHEMA_VERSION,
        name: format!("house-{seed}"),
        width: b.width,
        height: b.height,
        rooms: b.rooms,
        walls: b.walls,
        doorways: b.doorways,
        objects: b.objects,
        agent_start: Pose::new(start, heading),
    }
}

impl Builder {
    fn new_object(&mut self, category: &str, attribute: Option<&str>) -> ObjectInstance {
        let spec = catalog::category(category).expect("catalog category");
        let id = ObjectId(self.next_id);
        self.next_id += 1;
        ObjectInstance {
            id,
            category: category.to_string(),
            attributes: attribute.map(|a| BTreeSet::from([a.to_string()])).unwrap_or_default(),
            footprint: None,
            size_cells: spec.size_cells,
            affordances: spec.affordances.iter().copied().collect(),
            states: ObjectStateSet::for_category(spec),
        }
    }

    fn blocked_in(&self, room: &Room, extra: Option<CellRect>) -> impl Fn(Cell) -> bool + '_ {
        let rect = room.rect;
        let solids: Vec<CellRect> = self.objects.iter().filter_map(|o| o.footprint).chain(extra).collect();
        move |c: Cell| !rect.contains(c) || solids.iter().any(|s| s.contains(c))
    }

    fn room_connected(&self, room: &Room, extra: CellRect) -> bool {
        let blocked = self.blocked_in(room, Some(extra));
        let free: Vec<Cell> = room.rect.cells().filter(|&c| !blocked(c)).collect();
        let Some(&start) = free.first() else { return false };
        let mut seen = BTreeSet::from([start]);
        let mut q = VecDeque::from([start]);
        while let Some(c) = q.pop_front() {
            for d in Dir4::ALL {
                let n = c.offset(d);
                if !blocked(n) && seen.insert(n) {
                    q.push_back(n);
                }
            }
        }
        seen.len() == free.len()
    }

    fn place_furniture(&mut self, room: &Room, category: &str) -> Option<ObjectId> {
        let spec = catalog::category(category)?;
        let (along, depth) = spec.footprint;
        let r = room.rect;
        for _ in 0..60 {
            let side = self.rng.gen_range(0..4);
            let rect = match side {
                0 if r.w > along => CellRect::new(r.x0 + self.rng.gen_range(0..=r.w - along), r.z1() - depth, along, depth),
                1 if r.w > along => CellRect::new(r.x0 + self.rng.gen_range(0..=r.w - along), r.z0, along, depth),
                2 if r.h > along => CellRect::new(r.x1() - depth, r.z0 + self.rng.gen_range(0..=r.h - along), depth, along),
                3 if r.h > along => CellRect::new(r.x0, r.z0 + self.rng.gen_range(0..=r.h - along), depth, along),
                _ => continue,
            };
            let inflated = rect.inflate(3);
            if self.objects.iter().filter_map(|o| o.footprint).any(|f| f.intersects(&inflated)) {
                continue;
            }
            if self.clearance.iter().any(|z| z.intersects(&rect)) {
                continue;
            }
            if !self.room_connected(room, rect) {
                continue;
            }
            let finish = *FINISHES.choose(&mut self.rng).expect("non-empty");
            let mut o = self.new_object(category, Some(finish));
            o.footprint = Some(rect);
            let id = o.id;
            self.objects.push(o);
            return Some(id);
        }
        None
    }

    fn place_fixtures(&mut self, room: &Room) {
        let hosts: Vec<ObjectId> = self
            .objects
            .iter()
            .filter(|o| o.footprint.is_some_and(|f| room.rect.intersects(&f)))
            .filter(|o| o.category == "desk" || o.category == "nightstand")
            .map(|o| o.id)
            .collect();
        for host in hosts {
            if self.rng.gen_bool(0.6) {
                let finish = *FINISHES.choose(&mut self.rng).expect("non-empty");
                let mut lamp = self.new_object("desk_lamp", Some(finish));
                lamp.states.parent_receptacle = Some(host);
                self.objects.push(lamp);
            }
        }
    }

    fn place_portable(&mut self, room: &Room, category: &str) {
        let used: BTreeSet<String> = self
            .objects
            .iter()
            .filter(|o| o.category == category)
            .flat_map(|o| o.attributes.iter().cloned())
            .collect();
        let free_colors: Vec<&str> = COLORS.iter().copied().filter(|c| !used.contains(*c)).collect();
        let Some(&color) = free_colors.choose(&mut self.rng) else { return };
        let priors = catalog::priors_for(category);
        let in_room = |o: &ObjectInstance| o.footprint.is_some_and(|f| room.rect.intersects(&f));
        let mut hosts: Vec<ObjectId> = self
            .objects
            .iter()
            .filter(|o| o.footprint.is_some() && priors.contains(&o.category) && in_room(o))
            .map(|o| o.id)
            .collect();
        if hosts.is_empty() {
            hosts = self
                .objects
                .iter()
                .filter(|o| o.footprint.is_some() && priors.contains(&o.category))
                .map(|o| o.id)
                .collect();
        }
        let Some(&host) = hosts.choose(&mut self.rng) else { return };
        let mut o = self.new_object(category, Some(color));
        o.states.parent_receptacle = Some(host);
        self.objects.push(o);
    }

    fn randomize_states(&mut self) {
        for i in 0..self.objects.len() {
            let spec = catalog::category(&self.objects[i].category).expect("catalog category");
            if spec.placement == Placement::Furniture && spec.has(Affordance::Openable) && self.rng.gen_bool(0.2) {
                self.objects[i].states.open = Some(true);
            }
            if spec.has(Affordance::Toggleable) {
                let p = match spec.name {
                    "floor_lamp" | "desk_lamp" => 0.4,
                    "tv" => 0.3,
                    _ => 0.0,
                };
                if p > 0.0 && self.rng.gen_bool(p) {
                    self.objects[i].states.toggled_on = Some(true);
                }
            }
        }
    }

    fn free_cell_in(&mut self, room: &Room) -> Cell {
        let blocked = self.blocked_in(room, None);
        let r = room.rect;
        let candidates: Vec<Cell> = r
            .inflate(-16)
            .cells()
            .filter(|&c| !blocked(c))
            .collect();
        let pool: Vec<Cell> =
            if candidates.is_empty() { r.cells().filter(|&c| !blocked(c)).collect() } else { candidates };
        drop(blocked);
        *pool.choose(&mut self.rng).expect("room has free cells")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{SimConfig, WorldState};

    #[test]
    fn generated_layouts_are_valid() {
        for seed in 0..12 {
            let layout = generate_layout(seed);
            let world = WorldState::from_layout(layout, SimConfig::default());
            assert_eq!(world.validate_world(), vec![], "seed {seed}");
        }
    }

    #[test]
    fn same_seed_same_layout() {
        assert_eq!(generate_layout(42), generate_layout(42));
        assert_ne!(generate_layout(42), generate_layout(43));
    }

    #[test]
    fn portable_duplicates_have_distinct_attributes() {
        for seed in 0..12 {
            let layout = generate_layout(seed);
            let mut seen = BTreeSet::new();
            for o in layout.objects.iter().filter(|o| o.has(Affordance::Pickupable)) {
                assert!(seen.insert((o.category.clone(), o.attributes.clone())), "seed {seed}: {}", o.label());
            }
        }
    }

    #[test]
    fn kitchen_essentials_present() {
        for seed in 0..12 {
            let layout = generate_layout(seed);
            for cat in ["fridge", "counter", "stove", "sink", "knife"] {
                assert!(layout.objects.iter().any(|o| o.category == cat), "seed {seed} lacks {cat}");
            }
        }
    }
}
