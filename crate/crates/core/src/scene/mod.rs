//! World description: rooms, doors, carriers and items with ground-truth placements.
//!
//! Scenes are stored as JSON. Carriers are unions of grid-aligned boxes in world
//! coordinates, sampled into point clouds at the scene resolution. The first room in
//! `rooms` is the entry room.

mod catalog;
mod fixtures;
mod generate;
mod world;

pub use catalog::{Catalog, CarrierTemplate, RoomFurnishing, TemplateKind};
pub use fixtures::{build_flat, FLAT_JSON};
pub use generate::{generate_scene, generate_scene_with, GeneratedScene, GenerationConfig};
pub use world::{CarrierGeometry, PlanCache, RoomGeometry, SimSetup, World};

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use nalgebra::{Point2, Point3};
use serde::{Deserialize, Serialize};

use crate::error::SceneError;
use crate::geometry::{Cell, CarrierFeatures, Feature, GridFrame};
use crate::planner::point_in_polygon;

pub const SCENE_VERSION: u32 = 1;

/// Axis-aligned box in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: &[f64; 3], tol: f64) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] - tol && p[k] <= self.max[k] + tol)
    }

    pub fn contains_box(&self, other: &Aabb, tol: f64) -> bool {
        self.contains(&other.min, tol) && self.contains(&other.max, tol)
    }

    pub fn is_proper(&self) -> bool {
        (0..3).all(|k| self.max[k] > self.min[k] && self.min[k].is_finite() && self.max[k].is_finite())
    }

    fn aligned(&self, res: f64) -> bool {
        let on = |v: f64| ((v / res) - (v / res).round()).abs() < 1e-6;
        self.min.iter().chain(&self.max).all(|v| on(*v))
    }

    /// Integer cells covered by an aligned box.
    pub fn cells(&self, res: f64) -> impl Iterator<Item = Cell> {
        let lo: [i32; 3] = std::array::from_fn(|k| (self.min[k] / res).round() as i32);
        let hi: [i32; 3] = std::array::from_fn(|k| (self.max[k] / res).round() as i32);
        (lo[2]..hi[2]).flat_map(move |z| (lo[1]..hi[1]).flat_map(move |y| (lo[0]..hi[0]).map(move |x| [x, y, z])))
    }

    pub fn union(boxes: &[Aabb]) -> Option<Aabb> {
        let first = *boxes.first()?;
        Some(boxes.iter().fold(first, |acc, b| Aabb {
            min: std::array::from_fn(|k| acc.min[k].min(b.min[k])),
            max: std::array::from_fn(|k| acc.max[k].max(b.max[k])),
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Room {
    pub id: String,
    /// Ground-truth category.
    #[serde(rename = "type")]
    pub room_type: String,
    /// Outline polygon, meters.
    pub footprint: Vec<[f64; 2]>,
    pub carriers: Vec<String>,
    /// Everything a robot standing in the room can recognise, carriers included.
    pub objects: Vec<String>,
}

impl Room {
    pub fn outline(&self) -> Vec<Point2<f64>> {
        self.footprint.iter().map(|p| Point2::new(p[0], p[1])).collect()
    }

    /// Vertex mean, used as the room's waypoint.
    pub fn center(&self) -> Point2<f64> {
        let n = self.footprint.len().max(1) as f64;
        let (x, y) = self.footprint.iter().fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
        Point2::new(x / n, y / n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Door {
    pub rooms: [String; 2],
    /// Passage point on the shared wall.
    pub at: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Carrier {
    pub id: String,
    pub label: String,
    /// (x, y, yaw): bounding-box center and the direction its front faces.
    pub pose: [f64; 3],
    pub openable: bool,
    pub interior: Option<Aabb>,
    /// Height of the bottom feature plane.
    pub z0: f64,
    pub boxes: Vec<Aabb>,
}

impl Carrier {
    pub fn cells(&self, res: f64) -> BTreeSet<Cell> {
        self.boxes.iter().flat_map(|b| b.cells(res)).collect()
    }

    /// Cell centers of the box union, ordered by cell index.
    pub fn point_cloud(&self, res: f64) -> Vec<Point3<f64>> {
        let frame = GridFrame { origin: Point3::origin(), resolution: res };
        self.cells(res).into_iter().map(|c| frame.cell_center(c)).collect()
    }

    pub fn bounds(&self) -> Option<Aabb> {
        Aabb::union(&self.boxes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Item {
    pub label: String,
    pub carrier: String,
    pub feature: Feature,
    /// Relative to (carrier.pose.x, carrier.pose.y, 0).
    pub offset: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub version: u32,
    pub name: String,
    pub resolution: f64,
    pub rooms: Vec<Room>,
    pub doors: Vec<Door>,
    pub carriers: Vec<Carrier>,
    pub items: Vec<Item>,
}

impl Scene {
    pub fn room(&self, id: &str) -> Option<&Room> {
        self.rooms.iter().find(|r| r.id == id)
    }

    pub fn room_index(&self, id: &str) -> Option<usize> {
        self.rooms.iter().position(|r| r.id == id)
    }

    pub fn carrier(&self, id: &str) -> Option<&Carrier> {
        self.carriers.iter().find(|c| c.id == id)
    }

    pub fn carrier_index(&self, id: &str) -> Option<usize> {
        self.carriers.iter().position(|c| c.id == id)
    }

    pub fn items_labelled<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a Item> + 'a {
        self.items.iter().filter(move |i| i.label == label)
    }

    pub fn item_position(&self, item: &Item) -> Option<Point3<f64>> {
        let c = self.carrier(&item.carrier)?;
        Some(Point3::new(c.pose[0] + item.offset[0], c.pose[1] + item.offset[1], item.offset[2]))
    }

    /// Room adjacency, rooms in file order, neighbours sorted by index.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.rooms.len()];
        for d in &self.doors {
            if let (Some(a), Some(b)) = (self.room_index(&d.rooms[0]), self.room_index(&d.rooms[1])) {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
        adj.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Carrier index to owning room index.
    pub fn carrier_rooms(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for (ri, r) in self.rooms.iter().enumerate() {
            for id in &r.carriers {
                if let Some(ci) = self.carrier_index(id) {
                    out.entry(ci).or_insert(ri);
                }
            }
        }
        out
    }
}

fn parse_error(e: serde_json::Error) -> SceneError {
    SceneError::Parse { line: e.line(), column: e.column(), message: e.to_string() }
}

/// Parses and validates scene JSON.
pub fn parse_scene(text: &str) -> Result<Scene, SceneError> {
    let raw: serde_json::Value = serde_json::from_str(text).map_err(parse_error)?;
    if let Some(v) = raw.get("version").and_then(|v| v.as_u64()) {
        if v != SCENE_VERSION as u64 {
            return Err(SceneError::UnsupportedVersion(v as u32));
        }
    }
    let scene: Scene = serde_json::from_str(text).map_err(parse_error)?;
    let report = validate_scene(&scene);
    if report.is_empty() {
        Ok(scene)
    } else {
        Err(SceneError::Invalid(report))
    }
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| SceneError::Io { path: path.display().to_string(), source })?;
    parse_scene(&text)
}

/// Canonical form: fixed field order, two-space indentation, trailing newline.
pub fn scene_to_string(scene: &Scene) -> String {
    let mut s = serde_json::to_string_pretty(scene).expect("scene serializes");
    s.push('\n');
    s
}

pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<(), SceneError> {
    let path = path.as_ref();
    std::fs::write(path, scene_to_string(scene))
        .map_err(|source| SceneError::Io { path: path.display().to_string(), source })
}

fn segments_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let orient = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
    let on = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| {
        r[0] >= p[0].min(q[0]) - 1e-12
            && r[0] <= p[0].max(q[0]) + 1e-12
            && r[1] >= p[1].min(q[1]) - 1e-12
            && r[1] <= p[1].max(q[1]) + 1e-12
    };
    let (d1, d2, d3, d4) = (orient(c, d, a), orient(c, d, b), orient(a, b, c), orient(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on(c, d, a)) || (d2 == 0.0 && on(c, d, b)) || (d3 == 0.0 && on(a, b, c)) || (d4 == 0.0 && on(a, b, d))
}

/// True when no two non-adjacent edges touch.
pub fn polygon_is_simple(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Lists every violated invariant; empty when the scene is valid.
pub fn validate_scene(scene: &Scene) -> Vec<String> {
    let mut v = Vec::new();
    if scene.version != SCENE_VERSION {
        v.push(format!("unsupported version {}", scene.version));
    }
    let res = scene.resolution;
    if !(res > 0.0 && res.is_finite()) {
        v.push(format!("resolution must be positive, got {res}"));
        return v;
    }
    if scene.rooms.is_empty() {
        v.push("scene has no rooms".into());
    }

    let mut room_ids = BTreeSet::new();
    for r in &scene.rooms {
        if !room_ids.insert(r.id.as_str()) {
            v.push(format!("duplicate room id `{}`", r.id));
        }
        if r.footprint.len() < 3 {
            v.push(format!("room `{}`: footprint needs at least 3 vertices", r.id));
        } else if !polygon_is_simple(&r.footprint) {
            v.push(format!("room `{}`: footprint self-intersects", r.id));
        }
    }
    for d in &scene.doors {
        for id in &d.rooms {
            if !room_ids.contains(id.as_str()) {
                v.push(format!("door references unknown room id `{id}`"));
            }
        }
    }
    if !scene.rooms.is_empty() {
        let adj = scene.adjacency();
        let mut seen = vec![false; scene.rooms.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        for (i, s) in seen.iter().enumerate() {
            if !s {
                v.push(format!("unreachable room `{}`", scene.rooms[i].id));
            }
        }
    }

    let mut carrier_ids = BTreeSet::new();
    for c in &scene.carriers {
        if !carrier_ids.insert(c.id.as_str()) {
            v.push(format!("duplicate carrier id `{}`", c.id));
        }
    }
    let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
    for r in &scene.rooms {
        for id in &r.carriers {
            if !carrier_ids.contains(id.as_str()) {
                v.push(format!("room `{}` lists unknown carrier id `{id}`", r.id));
            } else if let Some(prev) = owner.insert(id, &r.id) {
                v.push(format!("carrier `{id}` listed in rooms `{prev}` and `{}`", r.id));
            }
        }
    }

    let mut claimed: BTreeMap<Cell, &str> = BTreeMap::new();
    let mut features: BTreeMap<&str, CarrierFeatures> = BTreeMap::new();
    for c in &scene.carriers {
        let Some(room_id) = owner.get(c.id.as_str()) else {
            v.push(format!("carrier `{}` is not listed in any room", c.id));
            continue;
        };
        if c.boxes.is_empty() {
            v.push(format!("carrier `{}`: empty point cloud", c.id));
            continue;
        }
        if let Some(b) = c.boxes.iter().find(|b| !b.is_proper()) {
            v.push(format!("carrier `{}`: degenerate box {:?}..{:?}", c.id, b.min, b.max));
            continue;
        }
        if c.boxes.iter().any(|b| !b.aligned(res)) {
            v.push(format!("carrier `{}`: box not aligned to the {res} m grid", c.id));
            continue;
        }
        if !(c.z0 >= 0.0) {
            v.push(format!("carrier `{}`: negative bottom height {}", c.id, c.z0));
        }
        if c.pose.iter().any(|p| !p.is_finite()) {
            v.push(format!("carrier `{}`: non-finite pose", c.id));
        }
        if let Some(room) = scene.room(room_id) {
            let outline = room.outline();
            let outside = c.boxes.iter().any(|b| {
                let cx = (b.min[0] + b.max[0]) / 2.0;
                let cy = (b.min[1] + b.max[1]) / 2.0;
                [(b.min[0], b.min[1]), (b.max[0], b.min[1]), (b.max[0], b.max[1]), (b.min[0], b.max[1])]
                    .iter()
                    .any(|&(x, y)| {
                        let p = Point2::new(x + (cx - x).signum() * 1e-6, y + (cy - y).signum() * 1e-6);
                        !point_in_polygon(&p, &outline)
                    })
            });
            if outside {
                v.push(format!("carrier `{}`: footprint not contained in room `{room_id}`", c.id));
            }
        }
        let cells = c.cells(res);
        for cell in &cells {
            if let Some(other) = claimed.insert(*cell, &c.id) {
                if other != c.id {
                    v.push(format!("carriers `{other}` and `{}` overlap", c.id));
                    break;
                }
            }
        }
        let cloud = c.point_cloud(res);
        let f = match CarrierFeatures::extract(&cloud, res, c.z0.max(0.0)) {
            Ok(f) => f,
            Err(e) => {
                v.push(format!("carrier `{}`: {e}", c.id));
                continue;
            }
        };
        let bounds = c.bounds().expect("non-empty");
        match &c.interior {
            Some(int) => {
                if !int.is_proper() || !bounds.contains_box(int, 1e-9) {
                    v.push(format!("carrier `{}`: interior region outside point cloud bounds", c.id));
                }
                if !c.openable {
                    v.push(format!("carrier `{}`: interior region on a non-openable carrier", c.id));
                }
                let expected: BTreeSet<Cell> = if int.aligned(res) { int.cells(res).collect() } else { BTreeSet::new() };
                let found: BTreeSet<Cell> = f.inside.points.iter().map(|p| f.grid.frame.cell_of(p)).collect();
                if expected != found {
                    v.push(format!("carrier `{}`: interior region disagrees with the enclosed cavity", c.id));
                }
            }
            None => {
                if !f.inside.is_empty() {
                    v.push(format!("carrier `{}`: enclosed cavity without an interior annotation", c.id));
                }
            }
        }
        features.insert(&c.id, f);
    }

    for item in &scene.items {
        let Some(c) = scene.carrier(&item.carrier) else {
            v.push(format!("item `{}`: unknown carrier id `{}`", item.label, item.carrier));
            continue;
        };
        if item.feature == Feature::Inside && !c.openable {
            v.push(format!("item `{}`: feature inside on carrier `{}` which is not openable", item.label, c.id));
            continue;
        }
        let Some(f) = features.get(c.id.as_str()) else { continue };
        let fm = f.get(item.feature);
        let p = scene.item_position(item).expect("carrier exists");
        let bbox = Aabb::union(&fm.points.iter().map(|q| Aabb::new([q.x, q.y, q.z], [q.x, q.y, q.z])).collect::<Vec<_>>());
        match bbox {
            Some(b) if b.contains(&[p.x, p.y, p.z], 1e-6) => {}
            Some(_) => v.push(format!(
                "item `{}`: offset outside the {} feature of carrier `{}`",
                item.label, item.feature, c.id
            )),
            None => v.push(format!("item `{}`: carrier `{}` exposes no {} feature", item.label, c.id, item.feature)),
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn minimal() -> Scene {
        Scene {
            version: 1,
            name: "minimal".into(),
            resolution: 0.05,
            rooms: vec![Room {
                id: "r0".into(),
                room_type: "kitchen".into(),
                footprint: vec![[0.0, 0.0], [3.0, 0.0], [3.0, 3.0], [0.0, 3.0]],
                carriers: vec!["c0".into()],
                objects: vec!["kitchen counter".into()],
            }],
            doors: vec![],
            carriers: vec![Carrier {
                id: "c0".into(),
                label: "kitchen counter".into(),
                pose: [1.5, 1.5, 0.0],
                openable: false,
                interior: None,
                z0: 0.025,
                boxes: vec![Aabb::new([1.0, 1.0, 0.0], [2.0, 2.0, 0.9])],
            }],
            items: vec![Item { label: "mug".into(), carrier: "c0".into(), feature: Feature::Top, offset: [0.025, 0.025, 0.875] }],
        }
    }

    #[test]
    fn minimal_scene_is_valid_and_round_trips() {
        let s = minimal();
        assert_eq!(validate_scene(&s), Vec::<String>::new());
        let text = scene_to_string(&s);
        let back = parse_scene(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(scene_to_string(&back), text);
        assert_eq!(back.rooms.len(), 1);
        assert_eq!(back.carriers.len(), 1);
    }

    #[test]
    fn unknown_carrier_reported() {
        let mut s = minimal();
        s.items[0].carrier = "nope".into();
        let r = validate_scene(&s);
        assert!(r.iter().any(|m| m.contains("unknown carrier id")), "{r:?}");
    }

    #[test]
    fn inside_on_closed_carrier_reported() {
        let mut s = minimal();
        s.items[0].feature = Feature::Inside;
        let r = validate_scene(&s);
        assert!(r.iter().any(|m| m.contains("not openable")), "{r:?}");
    }

    #[test]
    fn disconnected_doors_reported() {
        let mut s = minimal();
        let mut r1 = s.rooms[0].clone();
        r1.id = "r1".into();
        r1.carriers.clear();
        r1.footprint = vec![[3.0, 0.0], [6.0, 0.0], [6.0, 3.0], [3.0, 3.0]];
        s.rooms.push(r1);
        let r = validate_scene(&s);
        assert!(r.iter().any(|m| m.contains("unreachable room")), "{r:?}");
        s.doors.push(Door { rooms: ["r0".into(), "r1".into()], at: [3.0, 1.5] });
        assert!(validate_scene(&s).is_empty());
    }

    #[test]
    fn offset_outside_feature_reported() {
        let mut s = minimal();
        s.items[0].offset = [0.0, 0.0, 2.0];
        assert!(validate_scene(&s).iter().any(|m| m.contains("offset outside")));
    }

    #[test]
    fn misc_violations() {
        let mut s = minimal();
        s.rooms[0].footprint = vec![[0.0, 0.0], [3.0, 3.0], [3.0, 0.0], [0.0, 3.0]];
        assert!(validate_scene(&s).iter().any(|m| m.contains("self-intersects")));
        let mut s = minimal();
        s.carriers[0].boxes[0].max[0] = 3.5;
        assert!(validate_scene(&s).iter().any(|m| m.contains("not contained")));
        let mut s = minimal();
        s.carriers[0].z0 = -1.0;
        assert!(validate_scene(&s).iter().any(|m| m.contains("negative bottom")));
        let mut s = minimal();
        s.carriers[0].interior = Some(Aabb::new([1.1, 1.1, 0.1], [1.2, 1.2, 0.2]));
        let r = validate_scene(&s);
        assert!(r.iter().any(|m| m.contains("non-openable")), "{r:?}");
        assert!(r.iter().any(|m| m.contains("disagrees")), "{r:?}");
    }

    #[test]
    fn version_and_parse_errors() {
        let s = minimal();
        let text = scene_to_string(&s).replacen("\"version\": 1", "\"version\": 7", 1);
        assert!(matches!(parse_scene(&text), Err(SceneError::UnsupportedVersion(7))));
        let err = parse_scene("{\n  \"version\": 1,\n  \"name\": 3\n}").unwrap_err();
        match err {
            SceneError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
