//! Checking retrieved memory objects against a structured description.

use super::embedding::EmbeddingProvider;
use super::spatial::{MemId, MemoryObject, SpatialMemory};
use crate::geom::Cell;
use crate::sim::Room;
use crate::task::{ObjectSelector, Relation};

/// What a verifier may consult besides the candidate itself.
pub struct VerifyContext<'a> {
    pub memory: &'a SpatialMemory,
    pub rooms: &'a [Room],
}

pub trait Verifier: Send + Sync {
    fn verify(&self, candidate: &MemoryObject, query: &ObjectSelector, ctx: &VerifyContext<'_>) -> bool;
}

/// Checks category, attributes and spatial relation against stored views.
#[derive(Clone, Copy, Debug, Default)]
pub struct RuleVerifier;

pub fn room_of(rooms: &[Room], c: Cell) -> Option<&str> {
    rooms.iter().find(|r| r.rect.contains(c)).map(|r| r.name.as_str())
}

fn sq_dist(a: Cell, b: Cell) -> i64 {
    let (dx, dz) = (i64::from(a.x - b.x), i64::from(a.z - b.z));
    dx * dx + dz * dz
}

impl RuleVerifier {
    fn matches_noun(o: &MemoryObject, q: &ObjectSelector) -> bool {
        o.category() == q.category && q.attributes.is_subset(o.attributes())
    }
}

impl Verifier for RuleVerifier {
    fn verify(&self, candidate: &MemoryObject, query: &ObjectSelector, ctx: &VerifyContext<'_>) -> bool {
        if !Self::matches_noun(candidate, query) {
            return false;
        }
        match &query.relation {
            None => true,
            Some(Relation::InRoom { room }) => {
                !candidate.held && room_of(ctx.rooms, candidate.bounds().center_cell()) == Some(room.as_str())
            }
            Some(Relation::NearestTo { anchor }) => {
                let anchors: Vec<Cell> = ctx
                    .memory
                    .objects
                    .values()
                    .filter(|o| self.verify(o, anchor, ctx))
                    .map(|o| o.bounds().center_cell())
                    .collect();
                let dist = |o: &MemoryObject| anchors.iter().map(|a| sq_dist(o.bounds().center_cell(), *a)).min();
                let Some(mine) = dist(candidate) else { return false };
                ctx.memory
                    .objects
                    .values()
                    .filter(|o| Self::matches_noun(o, query))
                    .filter_map(dist)
                    .all(|d| d >= mine)
            }
        }
    }
}

/// Retrieval followed by verification: every stored object matching the
/// selector, in retrieval order.
pub fn locate(
    selector: &ObjectSelector,
    memory: &SpatialMemory,
    rooms: &[Room],
    provider: &dyn EmbeddingProvider,
    verifier: &dyn Verifier,
) -> Vec<MemId> {
    let Ok(ranked) = memory.retrieve(&selector.to_string(), memory.len(), provider) else { return Vec::new() };
    let ctx = VerifyContext { memory, rooms };
    ranked.into_iter().map(|(id, _)| id).filter(|id| verifier.verify(&memory.objects[id], selector, &ctx)).collect()
}
