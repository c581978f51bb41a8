//! Seeded procedural scenes. Rooms sit on a rectangular grid; the target's placement is
//! drawn from the knowledge-base priors and its exact point from what the default
//! planner can see, so every generated target is findable.

use std::collections::BTreeSet;

use nalgebra::Point3;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fixtures::slug;
use super::{validate_scene, Catalog, Door, Item, Room, Scene, SimSetup, World, SCENE_VERSION};
use crate::error::SceneError;
use crate::geometry::Feature;
use crate::semantics::KnowledgeBase;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    /// Inclusive room-count range.
    pub rooms: [usize; 2],
    /// Inclusive carriers-per-room range.
    pub carriers_per_room: [usize; 2],
    pub target: String,
    /// Labels available for distractor items.
    pub items: Vec<String>,
    pub distractors: usize,
    pub resolution: f64,
    /// Inclusive range of room side lengths, meters.
    pub room_size: [f64; 2],
    /// Minimum gap between carriers in a room, meters.
    pub carrier_gap: f64,
    pub setup: SimSetup,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            rooms: [4, 7],
            carriers_per_room: [2, 4],
            target: "orange".into(),
            items: ["remote control", "book", "towel", "keys", "mug"].iter().map(|s| s.to_string()).collect(),
            distractors: 3,
            resolution: 0.05,
            room_size: [3.5, 5.0],
            carrier_gap: 0.75,
            setup: SimSetup::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedScene {
    pub scene: Scene,
    pub target: String,
}

const ATTEMPTS: usize = 25;
const PLACE_TRIES: usize = 80;

pub fn generate_scene(config: &GenerationConfig, seed: u64) -> Result<GeneratedScene, SceneError> {
    generate_scene_with(config, &KnowledgeBase::shipped(), &Catalog::shipped(), seed)
}

struct TargetDraw {
    room_type: String,
    carrier: String,
    feature: Feature,
}

fn snap(v: f64, step: f64) -> f64 {
    ((v / step).round() * step * 1e6).round() / 1e6
}

/// Placements with positive prior mass: room prior × carrier prior × 1/(feature rank + 1).
fn target_draws(kb: &KnowledgeBase, catalog: &Catalog, target: &str) -> Vec<(TargetDraw, f64)> {
    let mut out = Vec::new();
    for (room_type, furnishing) in &catalog.rooms {
        let rp = kb.room_prior(target, room_type);
        if rp <= 0.0 {
            continue;
        }
        for carrier in &furnishing.carriers {
            let cp = kb.carrier_prior(target, carrier);
            let Some(template) = catalog.templates.get(carrier) else { continue };
            if cp <= 0.0 {
                continue;
            }
            let openable = template.kind == super::TemplateKind::Cabinet;
            for (rank, f) in kb.features_for(carrier, target).unwrap_or(&[]).iter().enumerate() {
                if *f == Feature::Inside && !openable {
                    continue;
                }
                let draw = TargetDraw { room_type: room_type.clone(), carrier: carrier.clone(), feature: *f };
                out.push((draw, rp * cp / (rank as f64 + 1.0)));
            }
        }
    }
    out
}

fn pick_weighted<'a, T>(rng: &mut ChaCha8Rng, items: &'a [(T, f64)]) -> &'a T {
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    let mut x = rng.random::<f64>() * total;
    for (t, w) in items {
        if x < *w {
            return t;
        }
        x -= w;
    }
    &items.last().expect("non-empty").0
}

pub fn generate_scene_with(
    config: &GenerationConfig,
    kb: &KnowledgeBase,
    catalog: &Catalog,
    seed: u64,
) -> Result<GeneratedScene, SceneError> {
    let infeasible = |m: &str| Err(SceneError::Infeasible(m.to_string()));
    let [rmin, rmax] = config.rooms;
    let [cmin, cmax] = config.carriers_per_room;
    if rmin == 0 || rmin > rmax {
        return infeasible("room count range must satisfy 1 <= min <= max");
    }
    if rmax > catalog.rooms.len() {
        return infeasible(&format!("at most {} rooms (one per room type)", catalog.rooms.len()));
    }
    if cmin == 0 || cmin > cmax {
        return infeasible("carriers-per-room range must satisfy 1 <= min <= max");
    }
    if !(config.resolution > 0.0) || !(config.room_size[0] > 0.0 && config.room_size[0] <= config.room_size[1]) {
        return infeasible("resolution and room size must be positive");
    }
    let draws = target_draws(kb, catalog, &config.target);
    if draws.is_empty() {
        return infeasible(&format!("no prior mass for target `{}`", config.target));
    }
    let distractor_labels: Vec<&String> = config.items.iter().filter(|l| **l != config.target).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..ATTEMPTS {
        let draw = pick_weighted(&mut rng, &draws);
        if let Some(g) = attempt(config, catalog, draw, &distractor_labels, seed, &mut rng)? {
            return Ok(g);
        }
    }
    infeasible("no plannable target placement found; widen rooms or reduce carriers")
}

fn attempt(
    config: &GenerationConfig,
    catalog: &Catalog,
    draw: &TargetDraw,
    distractor_labels: &[&String],
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<Option<GeneratedScene>, SceneError> {
    let res = config.resolution;
    let n = rng.random_range(config.rooms[0]..=config.rooms[1]);
    let mut types: Vec<&String> = catalog.rooms.keys().filter(|t| **t != draw.room_type).collect();
    types.shuffle(rng);
    let mut room_types: Vec<String> = types.into_iter().take(n - 1).cloned().collect();
    room_types.insert(rng.random_range(0..n), draw.room_type.clone());

    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let side = |rng: &mut ChaCha8Rng| snap(rng.random_range(config.room_size[0]..=config.room_size[1]), 0.1);
    let widths: Vec<f64> = (0..cols).map(|_| side(rng)).collect();
    let heights: Vec<f64> = (0..rows).map(|_| side(rng)).collect();
    let xs: Vec<f64> = std::iter::once(0.0).chain(widths.iter().scan(0.0, |a, w| { *a = snap(*a + w, 0.1); Some(*a) })).collect();
    let ys: Vec<f64> = std::iter::once(0.0).chain(heights.iter().scan(0.0, |a, h| { *a = snap(*a + h, 0.1); Some(*a) })).collect();
    let rect = |i: usize| {
        let (c, r) = (i % cols, i / cols);
        [xs[c], ys[r], xs[c + 1], ys[r + 1]]
    };
    let ids: Vec<String> = room_types.iter().enumerate().map(|(i, t)| format!("r{i}-{}", slug(t))).collect();

    let mut doors = Vec::new();
    let mut linked = BTreeSet::new();
    let door = |a: usize, b: usize| {
        let (ra, rb) = (rect(a), rect(b));
        let at = if (ra[2] - rb[0]).abs() < 1e-9 {
            [ra[2], snap((ra[1].max(rb[1]) + ra[3].min(rb[3])) / 2.0, res)]
        } else {
            [snap((ra[0].max(rb[0]) + ra[2].min(rb[2])) / 2.0, res), ra[3]]
        };
        Door { rooms: [ids[a].clone(), ids[b].clone()], at }
    };
    for i in 1..n {
        let mut back = Vec::new();
        if i % cols > 0 {
            back.push(i - 1);
        }
        if i >= cols {
            back.push(i - cols);
        }
        let j = *back.choose(rng).expect("grid neighbour exists");
        linked.insert((j, i));
        doors.push(door(j, i));
        for &k in &back {
            if !linked.contains(&(k, i)) && rng.random_bool(0.3) {
                linked.insert((k, i));
                doors.push(door(k, i));
            }
        }
    }

    let target_room = room_types.iter().position(|t| *t == draw.room_type).expect("target room present");
    let mut scene = Scene {
        version: SCENE_VERSION,
        name: format!("gen-{seed}"),
        resolution: res,
        rooms: Vec::new(),
        doors,
        carriers: Vec::new(),
        items: Vec::new(),
    };
    let mut target_carrier = None;
    for (i, t) in room_types.iter().enumerate() {
        let furnishing = &catalog.rooms[t];
        let [x0, y0, x1, y1] = rect(i);
        let k = rng.random_range(config.carriers_per_room[0]..=config.carriers_per_room[1]).min(furnishing.carriers.len());
        let mut labels: Vec<&String> = furnishing.carriers.iter().collect();
        labels.shuffle(rng);
        if i == target_room {
            labels.retain(|l| **l != draw.carrier);
            labels.insert(0, &draw.carrier);
        }
        let mut placed: Vec<[f64; 4]> = Vec::new();
        let mut room = Room {
            id: ids[i].clone(),
            room_type: t.clone(),
            footprint: vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]],
            carriers: Vec::new(),
            objects: Vec::new(),
        };
        for label in labels.into_iter().take(k) {
            let turns = rng.random_range(0..4u8);
            let fp = catalog.footprint(label, turns).expect("catalog label");
            let margin = 0.1;
            let (lo_x, hi_x) = (x0 + margin, x1 - margin - fp[0]);
            let (lo_y, hi_y) = (y0 + margin, y1 - margin - fp[1]);
            if lo_x > hi_x || lo_y > hi_y {
                continue;
            }
            let mut spot = None;
            for _ in 0..PLACE_TRIES {
                let cx = snap(rng.random_range(lo_x..=hi_x), res).clamp(lo_x, hi_x);
                let cy = snap(rng.random_range(lo_y..=hi_y), res).clamp(lo_y, hi_y);
                let b = [cx, cy, cx + fp[0], cy + fp[1]];
                let gap = config.carrier_gap;
                let clear = placed.iter().all(|p| {
                    b[0] >= p[2] + gap || p[0] >= b[2] + gap || b[1] >= p[3] + gap || p[1] >= b[3] + gap
                });
                if clear {
                    spot = Some(b);
                    break;
                }
            }
            let Some(b) = spot else { continue };
            placed.push(b);
            let id = format!("{}.{}{}", ids[i], slug(label), room.carriers.len());
            let carrier = catalog.instantiate(&id, label, [snap(b[0], res), snap(b[1], res)], turns, res).expect("catalog label");
            if i == target_room && *label == draw.carrier && target_carrier.is_none() {
                target_carrier = Some(id.clone());
            }
            room.carriers.push(id);
            room.objects.push(label.clone());
            scene.carriers.push(carrier);
        }
        let mut decor: Vec<&String> = furnishing.decor.iter().collect();
        decor.shuffle(rng);
        let nd = rng.random_range(1..=decor.len().max(1)).min(decor.len());
        room.objects.extend(decor.into_iter().take(nd).cloned());
        scene.rooms.push(room);
    }
    let Some(target_id) = target_carrier else { return Ok(None) };

    let world = World::new(scene.clone())?;
    let ci = scene.carrier_index(&target_id).expect("just placed");
    let Ok(report) = world.plan(ci, draw.feature, &config.setup) else { return Ok(None) };
    let covered: Vec<usize> = world.plan_coverage(ci, &report.plan, &config.setup.camera).into_iter().collect();
    let Some(&pi) = covered.choose(rng) else { return Ok(None) };
    let point = world.carriers[ci].features.get(draw.feature).points[pi];
    scene.items.push(item(&scene, &config.target, &target_id, draw.feature, point));

    for _ in 0..config.distractors {
        let Some(label) = distractor_labels.choose(rng) else { break };
        let ci = rng.random_range(0..scene.carriers.len());
        let feats: Vec<Feature> = Feature::ALL
            .into_iter()
            .filter(|f| *f != Feature::Inside || scene.carriers[ci].openable)
            .filter(|f| !world.carriers[ci].features.get(*f).is_empty())
            .collect();
        let Some(&f) = feats.choose(rng) else { continue };
        let pts = &world.carriers[ci].features.get(f).points;
        let p = pts[rng.random_range(0..pts.len())];
        let id = scene.carriers[ci].id.clone();
        scene.items.push(item(&scene, label, &id, f, p));
    }

    let report = validate_scene(&scene);
    if !report.is_empty() {
        return Err(SceneError::Invalid(report));
    }
    Ok(Some(GeneratedScene { scene, target: config.target.clone() }))
}

fn item(scene: &Scene, label: &str, carrier: &str, feature: Feature, p: Point3<f64>) -> Item {
    let c = scene.carrier(carrier).expect("carrier exists");
    let r6 = |v: f64| (v * 1e9).round() / 1e9;
    Item { label: label.to_string(), carrier: carrier.to_string(), feature, offset: [r6(p.x - c.pose[0]), r6(p.y - c.pose[1]), r6(p.z)] }
}
