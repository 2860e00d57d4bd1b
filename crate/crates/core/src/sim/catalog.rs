//! Static object catalog: categories, affordances and sizes.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Affordance {
    Openable,
    Toggleable,
    Sliceable,
    Cookable,
    Fillable,
    Pickupable,
    Receptacle,
    FlatSurface,
}

/// How an object of a category is placed in a layout.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Placement {
    /// Solid, occupies floor cells, never moves.
    Furniture,
    /// Sits inside a receptacle but cannot be picked up.
    Fixture,
    /// Sits inside a receptacle and can be carried.
    Portable,
}

#[derive(Clone, Debug)]
pub struct CategorySpec {
    pub name: &'static str,
    pub affordances: &'static [Affordance],
    pub placement: Placement,
    /// Footprint (along-wall, depth) in cells for furniture.
    pub footprint: (i32, i32),
    /// Nominal visible area in cells, used for the mask-area proxy.
    pub size_cells: u32,
    /// Liquid dispensed into fillable objects placed inside while switched on.
    pub liquid: Option<&'static str>,
    /// Cooks cookable objects placed inside while switched on.
    pub cooker: bool,
    pub knife: bool,
}

impl CategorySpec {
    pub fn has(&self, a: Affordance) -> bool {
        self.affordances.contains(&a)
    }
}

use Affordance::*;

const fn furniture(
    name: &'static str,
    affordances: &'static [Affordance],
    footprint: (i32, i32),
) -> CategorySpec {
    CategorySpec {
        name,
        affordances,
        placement: Placement::Furniture,
        footprint,
        size_cells: (footprint.0 * footprint.1) as u32,
        liquid: None,
        cooker: false,
        knife: false,
    }
}

const fn portable(name: &'static str, affordances: &'static [Affordance], size: u32) -> CategorySpec {
    CategorySpec {
        name,
        affordances,
        placement: Placement::Portable,
        footprint: (1, 1),
        size_cells: size,
        liquid: None,
        cooker: false,
        knife: false,
    }
}

static CATEGORIES: &[CategorySpec] = &[
    furniture("fridge", &[Openable, Receptacle], (14, 14)),
    furniture("counter", &[Receptacle, FlatSurface], (36, 12)),
    CategorySpec { cooker: true, ..furniture("stove", &[Receptacle, Toggleable], (14, 12)) },
    CategorySpec {
        cooker: true,
        ..furniture("microwave", &[Openable, Toggleable, Receptacle], (10, 8))
    },
    CategorySpec { liquid: Some("water"), ..furniture("sink", &[Receptacle, Toggleable], (14, 10)) },
    CategorySpec {
        liquid: Some("coffee"),
        ..furniture("coffee_machine", &[Receptacle, Toggleable], (8, 8))
    },
    furniture("cabinet", &[Openable, Receptacle], (16, 10)),
    furniture("drawer", &[Openable, Receptacle], (12, 10)),
    furniture("dining_table", &[Receptacle, FlatSurface], (30, 20)),
    furniture("garbage_can", &[Receptacle], (6, 6)),
    furniture("sofa", &[Receptacle], (40, 16)),
    furniture("coffee_table", &[Receptacle, FlatSurface], (20, 12)),
    furniture("tv", &[Toggleable], (24, 6)),
    furniture("floor_lamp", &[Toggleable], (6, 6)),
    furniture("shelf", &[Receptacle, FlatSurface], (24, 8)),
    furniture("bed", &[Receptacle], (40, 30)),
    furniture("nightstand", &[Receptacle, FlatSurface], (10, 10)),
    furniture("desk", &[Receptacle, FlatSurface], (28, 14)),
    furniture("bathtub", &[Receptacle], (34, 16)),
    furniture("towel_rack", &[Receptacle], (12, 4)),
    CategorySpec {
        placement: Placement::Fixture,
        ..portable("desk_lamp", &[Toggleable], 4)
    },
    portable("mug", &[Pickupable, Fillable, Receptacle], 4),
    portable("cup", &[Pickupable, Fillable], 3),
    portable("bowl", &[Pickupable, Fillable, Receptacle], 6),
    portable("plate", &[Pickupable, Receptacle, FlatSurface], 8),
    portable("pot", &[Pickupable, Fillable, Receptacle], 12),
    portable("kettle", &[Pickupable, Fillable], 8),
    portable("apple", &[Pickupable, Sliceable], 3),
    portable("bread", &[Pickupable, Sliceable, Cookable], 6),
    portable("tomato", &[Pickupable, Sliceable], 3),
    portable("potato", &[Pickupable, Sliceable, Cookable], 3),
    portable("egg", &[Pickupable, Cookable], 2),
    CategorySpec { knife: true, ..portable("knife", &[Pickupable], 3) },
    portable("fork", &[Pickupable], 2),
    portable("spoon", &[Pickupable], 2),
    portable("book", &[Pickupable], 6),
    portable("laptop", &[Pickupable, Openable, Toggleable], 10),
    portable("pen", &[Pickupable], 1),
    portable("pencil", &[Pickupable], 1),
    portable("remote_control", &[Pickupable], 2),
    portable("pillow", &[Pickupable], 10),
    portable("towel", &[Pickupable], 6),
    portable("soap_bottle", &[Pickupable], 2),
    portable("cell_phone", &[Pickupable], 2),
    portable("keys", &[Pickupable], 1),
    portable("newspaper", &[Pickupable], 6),
];

pub fn categories() -> &'static [CategorySpec] {
    CATEGORIES
}

pub fn category(name: &str) -> Option<&'static CategorySpec> {
    CATEGORIES.iter().find(|c| c.name == name)
}

pub fn is_known_category(name: &str) -> bool {
    category(name).is_some()
}

/// Colors used to tell apart portable objects of the same category.
pub const COLORS: &[&str] = &["red", "blue", "green", "white", "black", "yellow"];
/// Finishes used as furniture attributes.
pub const FINISHES: &[&str] = &["wooden", "white", "black", "metal"];

/// Category -> likely receptacle categories, loaded from the bundled table.
pub fn receptacle_priors() -> &'static BTreeMap<String, Vec<String>> {
    static PRIORS: OnceLock<BTreeMap<String, Vec<String>>> = OnceLock::new();
    PRIORS.get_or_init(|| {
        serde_json::from_str(include_str!("../../data/receptacle_priors.json"))
            .expect("bundled receptacle prior table is valid JSON")
    })
}

pub fn priors_for(category: &str) -> &'static [String] {
    receptacle_priors()
        .get(category)
        .map(Vec::as_slice)
        .unwrap_or(&[])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prior_table_refers_to_known_receptacles() {
        for (obj, recs) in receptacle_priors() {
            assert!(is_known_category(obj), "{obj}");
            for r in recs {
                let spec = category(r).unwrap_or_else(|| panic!("unknown receptacle {r}"));
                assert!(spec.has(Receptacle), "{r} is not a receptacle");
            }
        }
    }

    #[test]
    fn category_names_unique() {
        let mut names: Vec<_> = categories().iter().map(|c| c.name).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), categories().len());
    }
}
