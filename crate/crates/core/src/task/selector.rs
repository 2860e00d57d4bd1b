//! Attribute- and relation-qualified object references.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::TaskError;
use crate::sim::{catalog, ObjectId, WorldState};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Relation {
    /// Resting somewhere inside the named room. Carried objects are in no room.
    InRoom { room: String },
    /// Closest to any object matching the anchor; ties keep every closest one.
    NearestTo { anchor: Box<ObjectSelector> },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectSelector {
    pub category: String,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub attributes: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<Relation>,
}

impl ObjectSelector {
    pub fn category(category: impl Into<String>) -> Self {
        Self { category: category.into(), attributes: BTreeSet::new(), relation: None }
    }

    pub fn with_attribute(mut self, a: impl Into<String>) -> Self {
        self.attributes.insert(a.into());
        self
    }

    pub fn in_room(mut self, room: impl Into<String>) -> Self {
        self.relation = Some(Relation::InRoom { room: room.into() });
        self
    }

    pub fn nearest_to(mut self, anchor: ObjectSelector) -> Self {
        self.relation = Some(Relation::NearestTo { anchor: Box::new(anchor) });
        self
    }

    /// Object noun phrase without the relation, e.g. "red mug".
    pub fn noun(&self) -> String {
        let mut parts: Vec<&str> = self.attributes.iter().map(String::as_str).collect();
        parts.push(&self.category);
        parts.join(" ").replace('_', " ")
    }
}

impl fmt::Display for ObjectSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.noun())?;
        match &self.relation {
            None => Ok(()),
            Some(Relation::InRoom { room }) => write!(f, " in the {}", room.replace('_', " ")),
            Some(Relation::NearestTo { anchor }) => write!(f, " nearest to the {anchor}"),
        }
    }
}

/// Objects matching category, every attribute and the relation.
pub fn resolve_selector(state: &WorldState, s: &ObjectSelector) -> Result<BTreeSet<ObjectId>, TaskError> {
    if !catalog::is_known_category(&s.category) {
        return Err(TaskError::UnknownCategory(s.category.clone()));
    }
    let base = state
        .objects
        .values()
        .filter(|o| o.category == s.category && s.attributes.is_subset(&o.attributes))
        .map(|o| o.id);
    match &s.relation {
        None => Ok(base.collect()),
        Some(Relation::InRoom { room }) => Ok(base
            .filter(|&id| !state.is_carried(id) && state.room_of_object(id) == Some(room.as_str()))
            .collect()),
        Some(Relation::NearestTo { anchor }) => {
            let anchors: Vec<_> =
                resolve_selector(state, anchor)?.into_iter().filter_map(|a| state.object_cell(a)).collect();
            let scored: Vec<(ObjectId, i64)> = base
                .filter_map(|id| {
                    let c = state.object_cell(id)?;
                    let d = anchors.iter().map(|a| sq_dist(c, *a)).min()?;
                    Some((id, d))
                })
                .collect();
            let best = scored.iter().map(|&(_, d)| d).min();
            Ok(scored.into_iter().filter(|&(_, d)| Some(d) == best).map(|(id, _)| id).collect())
        }
    }
}

fn sq_dist(a: crate::geom::Cell, b: crate::geom::Cell) -> i64 {
    let (dx, dz) = (i64::from(a.x - b.x), i64::from(a.z - b.z));
    dx * dx + dz * dz
}
