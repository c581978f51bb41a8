//! The bundled seven-room flat. Layout and furniture are hand-placed; the orange's
//! exact point is the cavity point nearest the fridge's mid-height that the default
//! planner covers.

use nalgebra::Point3;

use super::{Catalog, Door, Item, Room, Scene, SimSetup, World, SCENE_VERSION};
use crate::geometry::Feature;

pub const FLAT_JSON: &str = include_str!("../../fixtures/flat.json");

const RES: f64 = 0.05;

struct Placement {
    label: &'static str,
    corner: [f64; 2],
    turns: u8,
}

const fn at(label: &'static str, x: f64, y: f64, turns: u8) -> Placement {
    Placement { label, corner: [x, y], turns }
}

struct RoomPlan {
    id: &'static str,
    room_type: &'static str,
    rect: [f64; 4],
    furniture: &'static [Placement],
    decor: &'static [&'static str],
}

const ROOMS: &[RoomPlan] = &[
    RoomPlan {
        id: "hallway",
        room_type: "hallway",
        rect: [4.0, 0.0, 7.0, 4.0],
        furniture: &[at("shoe rack", 4.1, 0.1, 0)],
        decor: &["coat hook", "mirror"],
    },
    RoomPlan {
        id: "kitchen",
        room_type: "kitchen",
        rect: [0.0, 0.0, 4.0, 4.0],
        furniture: &[at("fridge", 0.1, 2.0, 1), at("kitchen counter", 1.2, 0.1, 2), at("kitchen cabinet", 3.1, 0.1, 2)],
        decor: &["stove", "window", "plant"],
    },
    RoomPlan {
        id: "bathroom",
        room_type: "bathroom",
        rect: [7.0, 0.0, 10.0, 4.0],
        furniture: &[at("bathtub", 8.2, 3.15, 0), at("sink", 7.2, 0.1, 2), at("bathroom cabinet", 9.3, 0.1, 2)],
        decor: &["toilet", "towel rail", "mirror"],
    },
    RoomPlan {
        id: "office",
        room_type: "office",
        rect: [10.0, 0.0, 13.0, 4.0],
        furniture: &[
            at("desk", 11.5, 3.3, 0),
            at("chair", 11.8, 2.5, 2),
            at("filing cabinet", 12.4, 0.1, 2),
            at("bookshelf", 10.1, 0.1, 2),
        ],
        decor: &["computer", "lamp"],
    },
    RoomPlan {
        id: "living",
        room_type: "living room",
        rect: [0.0, 4.0, 5.0, 9.0],
        furniture: &[
            at("coffee table", 2.0, 6.2, 0),
            at("sofa", 1.5, 8.0, 0),
            at("tv stand", 3.2, 4.1, 2),
            at("bookshelf", 4.0, 8.55, 0),
        ],
        decor: &["television", "rug", "lamp", "plant"],
    },
    RoomPlan {
        id: "dining",
        room_type: "dining room",
        rect: [5.0, 4.0, 8.0, 9.0],
        furniture: &[at("dining table", 5.8, 6.0, 0), at("chair", 7.3, 8.3, 0), at("sideboard", 5.5, 8.45, 0)],
        decor: &["lamp", "painting", "window"],
    },
    RoomPlan {
        id: "bedroom",
        room_type: "bedroom",
        rect: [8.0, 4.0, 13.0, 9.0],
        furniture: &[
            at("bed", 10.5, 6.9, 0),
            at("nightstand", 12.1, 8.4, 0),
            at("dressing table", 8.2, 8.4, 0),
            at("wardrobe", 8.1, 4.1, 2),
        ],
        decor: &["pillow", "lamp", "mirror"],
    },
];

const DOORS: &[(&str, &str, [f64; 2])] = &[
    ("hallway", "kitchen", [4.0, 2.0]),
    ("hallway", "bathroom", [7.0, 2.0]),
    ("hallway", "dining", [6.0, 4.0]),
    ("bathroom", "office", [10.0, 2.0]),
    ("kitchen", "living", [2.0, 4.0]),
    ("living", "dining", [5.0, 6.5]),
    ("dining", "bedroom", [8.0, 6.5]),
];

/// Distractors: (label, carrier id, feature).
const DISTRACTORS: &[(&str, &str, Feature)] = &[
    ("remote control", "living.coffee_table", Feature::Top),
    ("keys", "hallway.shoe_rack", Feature::Top),
    ("towel", "bathroom.bathtub", Feature::Top),
    ("book", "office.bookshelf", Feature::Top),
];

pub(crate) fn slug(label: &str) -> String {
    label.replace(' ', "_")
}

/// Point of `carrier`'s feature nearest `target`, as an item offset.
fn offset_near(scene: &Scene, world: &World, carrier: &str, feature: Feature, candidates: &[usize], target: Point3<f64>) -> [f64; 3] {
    let ci = scene.carrier_index(carrier).expect("fixture carrier");
    let fm = world.carriers[ci].features.get(feature);
    let best = candidates
        .iter()
        .map(|&i| fm.points[i])
        .min_by(|a, b| (a - target).norm().total_cmp(&(b - target).norm()))
        .expect("non-empty candidates");
    let c = &scene.carriers[ci];
    let r9 = |v: f64| (v * 1e9).round() / 1e9;
    [r9(best.x - c.pose[0]), r9(best.y - c.pose[1]), r9(best.z)]
}

/// Rebuilds the flat from its layout tables.
pub fn build_flat(setup: &SimSetup) -> Scene {
    let catalog = Catalog::shipped();
    let mut scene = Scene {
        version: SCENE_VERSION,
        name: "flat".into(),
        resolution: RES,
        rooms: Vec::new(),
        doors: DOORS
            .iter()
            .map(|(a, b, at)| Door { rooms: [a.to_string(), b.to_string()], at: *at })
            .collect(),
        carriers: Vec::new(),
        items: Vec::new(),
    };
    for r in ROOMS {
        let [x0, y0, x1, y1] = r.rect;
        let mut room = Room {
            id: r.id.into(),
            room_type: r.room_type.into(),
            footprint: vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]],
            carriers: Vec::new(),
            objects: Vec::new(),
        };
        for p in r.furniture {
            let id = format!("{}.{}", r.id, slug(p.label));
            let c = catalog.instantiate(&id, p.label, p.corner, p.turns, RES).expect("catalog label");
            room.carriers.push(id);
            room.objects.push(p.label.to_string());
            scene.carriers.push(c);
        }
        room.objects.extend(r.decor.iter().map(|d| d.to_string()));
        scene.rooms.push(room);
    }

    let world = World::new(scene.clone()).expect("flat layout is valid");
    for (label, carrier, feature) in DISTRACTORS {
        let ci = scene.carrier_index(carrier).expect("fixture carrier");
        let fm = world.carriers[ci].features.get(*feature);
        let g = world.carriers[ci].centroid;
        let all: Vec<usize> = (0..fm.len()).collect();
        let z = fm.points.iter().map(|p| p.z).fold(f64::MIN, f64::max);
        let offset = offset_near(&scene, &world, carrier, *feature, &all, Point3::new(g.x, g.y, z));
        scene.items.push(Item { label: label.to_string(), carrier: carrier.to_string(), feature: *feature, offset });
    }

    let fridge = scene.carrier_index("kitchen.fridge").expect("fixture carrier");
    let report = world.plan(fridge, Feature::Inside, setup).expect("fridge interior plannable");
    let covered: Vec<usize> = world.plan_coverage(fridge, &report.plan, &setup.camera).into_iter().collect();
    let g = world.carriers[fridge].centroid;
    let offset = offset_near(&scene, &world, "kitchen.fridge", Feature::Inside, &covered, Point3::new(g.x, g.y, 1.0));
    scene.items.insert(0, Item { label: "orange".into(), carrier: "kitchen.fridge".into(), feature: Feature::Inside, offset });
    scene
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{parse_scene, scene_to_string};

    #[test]
    fn bundled_flat_matches_builder() {
        let built = scene_to_string(&build_flat(&SimSetup::default()));
        if std::env::var_os("OBJSEARCH_WRITE_FIXTURES").is_some() {
            let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/flat.json");
            std::fs::write(path, &built).unwrap();
            return;
        }
        assert_eq!(built, FLAT_JSON, "rerun with OBJSEARCH_WRITE_FIXTURES=1 to refresh");
    }

    #[test]
    fn bundled_flat_loads() {
        let s = parse_scene(FLAT_JSON).unwrap();
        assert_eq!(s.rooms.len(), 7);
        assert_eq!(s.items_labelled("orange").count(), 1);
    }
}
