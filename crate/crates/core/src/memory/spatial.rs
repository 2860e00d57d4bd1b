//! Object-centric spatial memory with a cell index and a feature index.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::embedding::{embed, AttributeSnapshot, EmbeddingProvider, FeatureVector};
use super::MemoryError;
use crate::geom::{Cell, CellRect};
use crate::sim::{ObjectId, ObjectStateSet, Observation, VisibleRecord};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MemId(pub u32);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewRecord {
    pub step: u64,
    pub mask_area: f64,
    pub distance: f64,
    pub snapshot: AttributeSnapshot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryObject {
    pub mem_id: MemId,
    pub label: String,
    pub voxels: BTreeSet<Cell>,
    pub views: Vec<ViewRecord>,
    pub feature: FeatureVector,
    pub last_seen_step: u64,
    pub source_world_ids: BTreeSet<ObjectId>,
    /// Sum of mask areas over all views.
    pub observed_area: f64,
    /// Latest known states and container.
    pub states: ObjectStateSet,
    pub containing_receptacle: Option<ObjectId>,
    /// Set while the agent carries the object.
    pub held: bool,
    /// Distinct footprints whose union is `voxels`, and their bounding box.
    rects: Vec<CellRect>,
    bounds: CellRect,
}

impl MemoryObject {
    pub fn category(&self) -> &str {
        &self.views.last().expect("views are never empty").snapshot.category
    }

    pub fn attributes(&self) -> &BTreeSet<String> {
        &self.views.last().expect("views are never empty").snapshot.attributes
    }

    /// Bounding rectangle of the voxels.
    pub fn bounds(&self) -> CellRect {
        self.bounds
    }

    /// Voxel IoU against a footprint.
    fn iou(&self, rect: &CellRect) -> f64 {
        let inter = match self.rects.as_slice() {
            [only] => only.intersection(rect).map_or(0, |r| r.area()) as f64,
            _ => self.voxels.iter().filter(|c| rect.contains(**c)).count() as f64,
        };
        let union = self.voxels.len() as f64 + f64::from(rect.area()) - inter;
        if union == 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    fn set_voxels(&mut self, rect: CellRect) {
        self.voxels = rect.cells().collect();
        self.rects = vec![rect];
        self.bounds = rect;
    }

    /// Adds a footprint; returns the cells that were not covered before.
    fn add_voxels(&mut self, rect: CellRect) -> Vec<Cell> {
        if self.rects.contains(&rect) {
            return Vec::new();
        }
        self.rects.push(rect);
        let b = self.bounds;
        let (x0, z0) = (b.x0.min(rect.x0), b.z0.min(rect.z0));
        self.bounds = CellRect::new(x0, z0, b.x1().max(rect.x1()) - x0, b.z1().max(rect.z1()) - z0);
        rect.cells().filter(|c| self.voxels.insert(*c)).collect()
    }

    pub fn world_id(&self) -> Option<ObjectId> {
        self.source_world_ids.iter().next().copied()
    }
}

/// Match thresholds for merging a new view into an existing object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryConfig {
    pub voxel_iou: f64,
    pub cosine: f64,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self { voxel_iou: 0.3, cosine: 0.8 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateSummary {
    pub created: usize,
    pub merged: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpatialMemory {
    pub config: MemoryConfig,
    pub objects: BTreeMap<MemId, MemoryObject>,
    pub spatial_index: BTreeMap<Cell, BTreeSet<MemId>>,
    pub semantic_index: BTreeMap<MemId, FeatureVector>,
    next_id: u32,
}

fn label_of(r: &VisibleRecord) -> String {
    r.attributes.iter().cloned().chain([r.category.clone()]).collect::<Vec<_>>().join(" ").replace('_', " ")
}

/// Views kept per object; older ones only survive in `observed_area`.
pub const MAX_VIEWS: usize = 16;

impl SpatialMemory {
    pub fn new(config: MemoryConfig) -> Self {
        Self { config, ..Self::default() }
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn get(&self, id: MemId) -> Option<&MemoryObject> {
        self.objects.get(&id)
    }

    /// Memory object that was built from a given simulator object.
    pub fn by_world_id(&self, id: ObjectId) -> Option<&MemoryObject> {
        self.objects.values().find(|o| o.source_world_ids.contains(&id))
    }

    fn index_insert(&mut self, id: MemId) {
        let o = &self.objects[&id];
        for c in &o.voxels {
            self.spatial_index.entry(*c).or_default().insert(id);
        }
        self.semantic_index.insert(id, o.feature.clone());
    }

    fn index_remove(&mut self, id: MemId) {
        let cells: Vec<Cell> = self.objects[&id].voxels.iter().copied().collect();
        for c in cells {
            if let Some(set) = self.spatial_index.get_mut(&c) {
                set.remove(&id);
                if set.is_empty() {
                    self.spatial_index.remove(&c);
                }
            }
        }
        self.semantic_index.remove(&id);
    }

    /// Folds every visible record of an observation into memory.
    pub fn observe_update(&mut self, obs: &Observation, step: u64, p: &dyn EmbeddingProvider) -> UpdateSummary {
        let mut summary = UpdateSummary::default();
        for r in &obs.visible {
            let label = label_of(r);
            let snapshot = AttributeSnapshot { category: r.category.clone(), attributes: r.attributes.clone() };
            let f_new = embed(&snapshot, &label, p);
            let view = ViewRecord { step, mask_area: r.mask_area, distance: r.distance, snapshot };
            let best = self
                .objects
                .values()
                .filter(|o| o.bounds().intersects(&r.footprint))
                .filter_map(|o| {
                    let overlap = o.iou(&r.footprint);
                    let sim = o.feature.cosine(&f_new);
                    (overlap >= self.config.voxel_iou && sim >= self.config.cosine).then_some((o.mem_id, overlap, sim))
                })
                .max_by(|a, b| a.1.total_cmp(&b.1).then(a.2.total_cmp(&b.2)).then(b.0.cmp(&a.0)));
            match best {
                Some((id, _, _)) => {
                    self.merge(id, r, view, &f_new);
                    summary.merged += 1;
                }
                None => {
                    self.create(r, label, view, f_new);
                    summary.created += 1;
                }
            }
        }
        summary
    }

    fn create(&mut self, r: &VisibleRecord, label: String, view: ViewRecord, feature: FeatureVector) {
        let id = MemId(self.next_id);
        self.next_id += 1;
        let obj = MemoryObject {
            mem_id: id,
            label,
            voxels: r.footprint.cells().collect(),
            rects: vec![r.footprint],
            bounds: r.footprint,
            observed_area: view.mask_area,
            last_seen_step: view.step,
            views: vec![view],
            feature,
            source_world_ids: BTreeSet::from([r.id]),
            states: r.states.clone(),
            containing_receptacle: r.containing_receptacle,
            held: false,
        };
        self.objects.insert(id, obj);
        self.index_insert(id);
    }

    /// Area-weighted feature merge: `alpha = A_old / (A_old + A_new)` with
    /// `A_old` the cumulative area of all earlier views.
    fn merge(&mut self, id: MemId, r: &VisibleRecord, view: ViewRecord, f_new: &FeatureVector) {
        let o = self.objects.get_mut(&id).expect("merge target exists");
        let alpha = o.observed_area / (o.observed_area + view.mask_area);
        o.feature = o.feature.blend(f_new, alpha);
        o.observed_area += view.mask_area;
        let fresh = o.add_voxels(r.footprint);
        o.last_seen_step = view.step;
        o.views.push(view);
        if o.views.len() > MAX_VIEWS {
            o.views.remove(0);
        }
        o.source_world_ids.insert(r.id);
        o.states = r.states.clone();
        o.containing_receptacle = r.containing_receptacle;
        o.held = false;
        let feature = o.feature.clone();
        for c in fresh {
            self.spatial_index.entry(c).or_default().insert(id);
        }
        self.semantic_index.insert(id, feature);
    }

    /// Top-`k` objects by cosine similarity to the query text, most recently
    /// seen first among equals.
    pub fn retrieve(&self, query: &str, k: usize, p: &dyn EmbeddingProvider) -> Result<Vec<(MemId, f64)>, MemoryError> {
        if self.objects.is_empty() {
            return Err(MemoryError::EmptyMemory);
        }
        let q = p.embed_text(query);
        let mut scored: Vec<(MemId, f64, u64)> =
            self.semantic_index.iter().map(|(id, f)| (*id, q.cosine(f), self.objects[id].last_seen_step)).collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(b.2.cmp(&a.2)).then(a.0.cmp(&b.0)));
        Ok(scored.into_iter().take(k).map(|(id, s, _)| (id, s)).collect())
    }

    /// Memory objects nested inside the object built from `world_id`, at any depth.
    fn contents_of(&self, world_id: ObjectId) -> Vec<MemId> {
        let mut out = Vec::new();
        let mut frontier = vec![world_id];
        while let Some(w) = frontier.pop() {
            for o in self.objects.values() {
                if o.containing_receptacle == Some(w) && !out.contains(&o.mem_id) {
                    out.push(o.mem_id);
                    frontier.extend(o.source_world_ids.iter().copied());
                }
            }
        }
        out
    }

    /// The agent picked this object up, along with anything inside it.
    pub fn mark_held(&mut self, world_id: ObjectId) {
        let inner = self.contents_of(world_id);
        if let Some(o) = self.objects.values_mut().find(|o| o.source_world_ids.contains(&world_id)) {
            o.held = true;
            o.containing_receptacle = None;
            o.states.parent_receptacle = None;
        }
        for id in inner {
            self.objects.get_mut(&id).expect("exists").held = true;
        }
    }

    fn move_voxels(&mut self, id: MemId, rect: CellRect, step: u64) {
        self.index_remove(id);
        let o = self.objects.get_mut(&id).expect("exists");
        o.set_voxels(rect);
        o.held = false;
        o.last_seen_step = step;
        self.index_insert(id);
    }

    /// The agent put this object into a receptacle occupying `rect`; its
    /// contents travel with it.
    pub fn relocate(&mut self, world_id: ObjectId, rect: CellRect, receptacle: ObjectId, step: u64) {
        let Some(id) = self.by_world_id(world_id).map(|o| o.mem_id) else { return };
        for inner in self.contents_of(world_id) {
            self.move_voxels(inner, rect, step);
        }
        self.move_voxels(id, rect, step);
        let o = self.objects.get_mut(&id).expect("exists");
        o.containing_receptacle = Some(receptacle);
        o.states.parent_receptacle = Some(receptacle);
    }

    /// Records a state change the agent itself caused.
    pub fn update_states(&mut self, world_id: ObjectId, f: impl FnOnce(&mut ObjectStateSet)) {
        if let Some(o) = self.objects.values_mut().find(|o| o.source_world_ids.contains(&world_id)) {
            f(&mut o.states);
        }
    }

    /// Indices rebuilt from the object table.
    pub fn rebuilt_indices(&self) -> (BTreeMap<Cell, BTreeSet<MemId>>, BTreeMap<MemId, FeatureVector>) {
        let mut spatial: BTreeMap<Cell, BTreeSet<MemId>> = BTreeMap::new();
        for o in self.objects.values() {
            for c in &o.voxels {
                spatial.entry(*c).or_default().insert(o.mem_id);
            }
        }
        let semantic = self.objects.values().map(|o| (o.mem_id, o.feature.clone())).collect();
        (spatial, semantic)
    }

    pub fn indices_consistent(&self) -> bool {
        let (s, f) = self.rebuilt_indices();
        s == self.spatial_index && f == self.semantic_index
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::HashingEmbedder;
    use crate::sim::{LocalOccupancy, Pose};
    use proptest::prelude::*;

    fn record(id: u32, cat: &str, attrs: &[&str], rect: CellRect, area: f64) -> VisibleRecord {
        VisibleRecord {
            id: ObjectId(id),
            category: cat.into(),
            attributes: attrs.iter().map(|s| s.to_string()).collect(),
            distance: 1.0,
            mask_area: area,
            containing_receptacle: None,
            footprint: rect,
            states: ObjectStateSet::default(),
        }
    }

    fn obs(visible: Vec<VisibleRecord>) -> Observation {
        Observation {
            agent_pose: Pose::new(Cell::new(0, 0), 0),
            held_object: None,
            visible,
            local_occupancy: LocalOccupancy { origin: Cell::new(0, 0), width: 0, height: 0, rows: vec![] },
        }
    }

    #[test]
    fn equal_area_views_merge_with_even_weights() {
        let p = HashingEmbedder::default();
        let mut m = SpatialMemory::new(MemoryConfig::default());
        let r1 = record(1, "mug", &["red"], CellRect::new(10, 10, 4, 4), 2.0);
        let mut r2 = record(1, "mug", &["red"], CellRect::new(11, 10, 4, 4), 2.0);
        r2.distance = 2.0;
        assert_eq!(m.observe_update(&obs(vec![r1.clone()]), 1, &p).created, 1);
        let f_old = m.objects[&MemId(0)].feature.clone();
        assert_eq!(m.observe_update(&obs(vec![r2.clone()]), 2, &p).merged, 1);
        let f_new = embed(&AttributeSnapshot { category: "mug".into(), attributes: r2.attributes.clone() }, "red mug", &p);
        // Oracle: average, then renormalize, coordinate by coordinate.
        let avg: Vec<f64> = f_old.as_slice().iter().zip(f_new.as_slice()).map(|(a, b)| 0.5 * a + 0.5 * b).collect();
        let n = avg.iter().map(|v| v * v).sum::<f64>().sqrt();
        let got = &m.objects[&MemId(0)];
        for (g, e) in got.feature.as_slice().iter().zip(&avg) {
            assert!((g - e / n).abs() < 1e-12);
        }
        assert_eq!(got.voxels.len(), 20);
        assert_eq!(got.views.len(), 2);
        assert_eq!(got.last_seen_step, 2);
        assert!(m.indices_consistent());
    }

    #[test]
    fn distinct_categories_do_not_merge() {
        let p = HashingEmbedder::default();
        let mut m = SpatialMemory::new(MemoryConfig::default());
        let rect = CellRect::new(0, 0, 3, 3);
        let s = m.observe_update(&obs(vec![record(1, "mug", &[], rect, 1.0), record(2, "apple", &[], rect, 1.0)]), 0, &p);
        assert_eq!(s, UpdateSummary { created: 2, merged: 0 });
    }

    #[test]
    fn repeated_sightings_are_deduplicated() {
        let p = HashingEmbedder::default();
        let mut m = SpatialMemory::new(MemoryConfig::default());
        let r = record(4, "book", &["blue"], CellRect::new(5, 5, 6, 2), 1.5);
        for step in 0..5 {
            m.observe_update(&obs(vec![r.clone()]), step, &p);
        }
        assert_eq!(m.len(), 1);
        assert_eq!(m.objects[&MemId(0)].views.len(), 5);
    }

    #[test]
    fn retrieval_on_empty_memory_fails() {
        let m = SpatialMemory::default();
        assert_eq!(m.retrieve("mug", 3, &HashingEmbedder::default()), Err(MemoryError::EmptyMemory));
    }

    #[test]
    fn retrieval_matches_brute_force_ranking() {
        let p = HashingEmbedder::default();
        let mut m = SpatialMemory::new(MemoryConfig::default());
        let cats = ["mug", "apple", "book", "bowl", "plate", "bread"];
        let recs: Vec<_> = cats
            .iter()
            .enumerate()
            .map(|(i, c)| record(i as u32, c, &["red"], CellRect::new(i as i32 * 20, 0, 2, 2), 1.0))
            .collect();
        m.observe_update(&obs(recs), 0, &p);
        let got = m.retrieve("red bowl", 3, &p).unwrap();
        let q = p.embed_text("red bowl");
        let mut brute: Vec<(MemId, f64)> = m.objects.values().map(|o| (o.mem_id, q.cosine(&o.feature))).collect();
        brute.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        assert_eq!(got, brute[..3].to_vec());
        assert_eq!(m.objects[&got[0].0].category(), "bowl");
    }

    proptest! {
        #[test]
        fn indices_stay_consistent(ops in proptest::collection::vec((0u32..6, 0i32..30, 0i32..30, 1i32..5, 0u8..3), 1..40)) {
            let p = HashingEmbedder::default();
            let mut m = SpatialMemory::new(MemoryConfig::default());
            let cats = ["mug", "apple", "book"];
            for (step, (id, x, z, s, kind)) in ops.into_iter().enumerate() {
                let rect = CellRect::new(x, z, s, s);
                match kind {
                    0 | 1 => {
                        let r = record(id, cats[(id % 3) as usize], &[], rect, f64::from(s));
                        m.observe_update(&obs(vec![r]), step as u64, &p);
                    }
                    _ => m.relocate(ObjectId(id), rect, ObjectId(99), step as u64),
                }
                prop_assert!(m.indices_consistent());
            }
        }
    }
}
