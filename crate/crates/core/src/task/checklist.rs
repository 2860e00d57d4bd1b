//! Checklist items and their existential evaluation.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::selector::{resolve_selector, ObjectSelector};
use crate::sim::{catalog, Affordance, ObjectId, WorldState};

/// Which receptacle an `InReceptacle` condition refers to.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "by", rename_all = "kebab-case")]
pub enum ReceptacleRef {
    Id { id: ObjectId },
    Selector { selector: ObjectSelector },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Condition {
    /// Directly inside (or on) a matching receptacle.
    InReceptacle { target: ReceptacleRef },
    InRoom { room: String },
    Open { value: bool },
    ToggledOn { value: bool },
    Sliced,
    Cooked,
    FilledWith { liquid: String },
}

/// Goal family tag used for per-category scores.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CategoryTag {
    PP,
    TO,
    OC,
    Sl,
    CK,
    FW,
}

impl CategoryTag {
    pub const ALL: [CategoryTag; 6] =
        [CategoryTag::PP, CategoryTag::TO, CategoryTag::OC, CategoryTag::Sl, CategoryTag::CK, CategoryTag::FW];
}

impl fmt::Display for CategoryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Condition {
    pub fn tag(&self) -> CategoryTag {
        match self {
            Condition::InReceptacle { .. } | Condition::InRoom { .. } => CategoryTag::PP,
            Condition::ToggledOn { .. } => CategoryTag::TO,
            Condition::Open { .. } => CategoryTag::OC,
            Condition::Sliced => CategoryTag::Sl,
            Condition::Cooked => CategoryTag::CK,
            Condition::FilledWith { .. } => CategoryTag::FW,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChecklistItem {
    pub selector: ObjectSelector,
    pub condition: Condition,
    pub category: CategoryTag,
}

impl ChecklistItem {
    pub fn new(selector: ObjectSelector, condition: Condition) -> Self {
        let category = condition.tag();
        Self { selector, condition, category }
    }

    pub fn tag_consistent(&self) -> bool {
        self.category == self.condition.tag()
    }
}

fn receptacles(state: &WorldState, r: &ReceptacleRef) -> BTreeSet<ObjectId> {
    match r {
        ReceptacleRef::Id { id } => BTreeSet::from([*id]),
        ReceptacleRef::Selector { selector } => resolve_selector(state, selector).unwrap_or_default(),
    }
}

/// Whether one specific object satisfies a condition.
pub fn object_satisfies(state: &WorldState, id: ObjectId, cond: &Condition) -> bool {
    let Some(o) = state.object(id) else { return false };
    let s = &o.states;
    match cond {
        Condition::InReceptacle { target } => {
            s.parent_receptacle.is_some_and(|p| receptacles(state, target).contains(&p))
        }
        Condition::InRoom { room } => !state.is_carried(id) && state.room_of_object(id) == Some(room.as_str()),
        Condition::Open { value } => s.open == Some(*value),
        Condition::ToggledOn { value } => s.toggled_on == Some(*value),
        Condition::Sliced => s.sliced == Some(true),
        Condition::Cooked => s.cooked == Some(true),
        Condition::FilledWith { liquid } => s.filled_with.as_deref() == Some(liquid.as_str()),
    }
}

/// True iff some object resolved by the selector satisfies the condition.
pub fn evaluate_item(state: &WorldState, item: &ChecklistItem) -> bool {
    resolve_selector(state, &item.selector)
        .map(|ids| ids.into_iter().any(|id| object_satisfies(state, id, &item.condition)))
        .unwrap_or(false)
}

/// Per-item satisfaction flags.
pub fn evaluate_all(state: &WorldState, items: &[ChecklistItem]) -> Vec<bool> {
    items.iter().map(|i| evaluate_item(state, i)).collect()
}

impl fmt::Display for ChecklistItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let obj = &self.selector;
        match &self.condition {
            Condition::InReceptacle { target: ReceptacleRef::Selector { selector } } => {
                let on = catalog::category(&selector.category).is_some_and(|c| c.has(Affordance::FlatSurface));
                write!(f, "Put the {obj} {} the {selector}.", if on { "on" } else { "into" })
            }
            Condition::InReceptacle { target: ReceptacleRef::Id { id } } => write!(f, "Put the {obj} into object {}.", id.0),
            Condition::InRoom { room } => write!(f, "Bring the {obj} to the {}.", room.replace('_', " ")),
            Condition::Open { value: true } => write!(f, "Open the {obj}."),
            Condition::Open { value: false } => write!(f, "Close the {obj}."),
            Condition::ToggledOn { value: true } => write!(f, "Turn on the {obj}."),
            Condition::ToggledOn { value: false } => write!(f, "Turn off the {obj}."),
            Condition::Sliced => write!(f, "Slice the {obj}."),
            Condition::Cooked => write!(f, "Cook the {obj}."),
            Condition::FilledWith { liquid } => write!(f, "Fill the {obj} with {liquid}."),
        }
    }
}
