//! Derived, read-only geometry for a validated scene: carrier feature maps, a labelled
//! scene occupancy grid, per-room chassis maps and door-graph routing.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, OnceLock};

use nalgebra::{Point2, Point3};
use serde::{Deserialize, Serialize};

use super::{Scene, validate_scene};
use crate::error::{PlanError, SceneError};
use crate::geometry::{centroid, segment_clear, CarrierFeatures, Cell2, Feature, GridFrame, LabelGrid};
use crate::planner::{
    cone_covers, coverage_set, plan_feature, point_in_polygon, CameraModel, EEPose, PlanReport, PlannerParams, PlanningScene, PosePlan,
    RobotModel, RoomOccupancy,
};

/// Robot, camera and planner parameters shared by every trial.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSetup {
    pub camera: CameraModel,
    pub robot: RobotModel,
    pub planner: PlannerParams,
}

#[derive(Debug, Clone)]
pub struct CarrierGeometry {
    pub cloud: Vec<Point3<f64>>,
    pub features: CarrierFeatures,
    pub centroid: Point2<f64>,
    /// Label in the scene [`LabelGrid`]; carrier index + 1.
    pub label_id: u16,
}

#[derive(Debug, Clone)]
pub struct RoomGeometry {
    pub occupancy: RoomOccupancy,
    /// Floor columns whose centers lie inside the outline.
    pub cells: BTreeSet<Cell2>,
    pub center: Point2<f64>,
}

#[derive(Debug, Clone)]
pub struct World {
    pub scene: Scene,
    pub frame: GridFrame,
    pub carriers: Vec<CarrierGeometry>,
    pub rooms: Vec<RoomGeometry>,
    pub grid: LabelGrid,
    /// Owning room index per carrier.
    pub carrier_room: Vec<usize>,
}

impl World {
    pub fn new(scene: Scene) -> Result<Self, SceneError> {
        let report = validate_scene(&scene);
        if !report.is_empty() {
            return Err(SceneError::Invalid(report));
        }
        let res = scene.resolution;
        let frame = GridFrame::at_origin(res)?;
        let mut carriers = Vec::with_capacity(scene.carriers.len());
        for (i, c) in scene.carriers.iter().enumerate() {
            let cloud = c.point_cloud(res);
            let features = CarrierFeatures::extract(&cloud, res, c.z0)?;
            let centroid = centroid(&cloud)?;
            carriers.push(CarrierGeometry { cloud, features, centroid, label_id: (i + 1) as u16 });
        }
        let grid = LabelGrid::from_grids(frame, carriers.iter().map(|c| (c.label_id, &c.features.grid)));
        let owner = scene.carrier_rooms();
        let carrier_room: Vec<usize> = (0..scene.carriers.len()).map(|i| owner[&i]).collect();
        let rooms = scene
            .rooms
            .iter()
            .enumerate()
            .map(|(ri, r)| {
                let outline = r.outline();
                let blocked = carrier_room
                    .iter()
                    .enumerate()
                    .filter(|(_, &owner)| owner == ri)
                    .flat_map(|(ci, _)| carriers[ci].features.footprint.cells.iter().copied())
                    .collect();
                let (lo, hi) = outline.iter().fold(
                    (Point2::new(f64::MAX, f64::MAX), Point2::new(f64::MIN, f64::MIN)),
                    |(lo, hi), p| (Point2::new(lo.x.min(p.x), lo.y.min(p.y)), Point2::new(hi.x.max(p.x), hi.y.max(p.y))),
                );
                let (a, b) = (frame.column_of(lo.x, lo.y), frame.column_of(hi.x, hi.y));
                let cells = (a[0]..=b[0])
                    .flat_map(|x| (a[1]..=b[1]).map(move |y| [x, y]))
                    .filter(|c| point_in_polygon(&frame.column_center(*c), &outline))
                    .collect();
                RoomGeometry { occupancy: RoomOccupancy { frame, outline, blocked }, cells, center: r.center() }
            })
            .collect();
        Ok(Self { scene, frame, carriers, rooms, grid, carrier_room })
    }

    /// Labels of the given carriers, for occupancy views that ignore them.
    pub fn labels(&self, carriers: &[usize]) -> Vec<u16> {
        carriers.iter().map(|&c| self.carriers[c].label_id).collect()
    }

    /// Plans one carrier feature. Inside features are planned with the carrier's own
    /// shell removed (it is opened before inspection).
    pub fn plan(&self, carrier: usize, feature: Feature, setup: &SimSetup) -> Result<PlanReport, PlanError> {
        let cg = &self.carriers[carrier];
        let fm = cg.features.get(feature);
        if fm.is_empty() {
            return Err(PlanError::EmptyFeatureMap);
        }
        let own = [cg.label_id];
        let transparent: &[u16] = if feature == Feature::Inside { &own } else { &[] };
        let view = self.grid.view(transparent);
        let scene = PlanningScene {
            carrier: &self.scene.carriers[carrier].id,
            footprint: &cg.features.footprint,
            centroid: cg.centroid,
            room: &self.rooms[self.carrier_room[carrier]].occupancy,
            grid: &view,
        };
        plan_feature(&scene, fm, &setup.camera, &setup.robot, &setup.planner)
    }

    /// Feature-point indices seen by at least one camera pose of `plan`, with the
    /// carrier opened for inside features.
    pub fn plan_coverage(&self, carrier: usize, plan: &PosePlan, cam: &CameraModel) -> BTreeSet<usize> {
        let cg = &self.carriers[carrier];
        let own = [cg.label_id];
        let transparent: &[u16] = if plan.feature == Feature::Inside { &own } else { &[] };
        let view = self.grid.view(transparent);
        let fm = cg.features.get(plan.feature);
        plan.entries
            .iter()
            .flat_map(|e| e.ee.iter())
            .flat_map(|ee| coverage_set(ee, cam, fm, &view))
            .collect()
    }

    /// Frustum plus line of sight through the scene with `opened` carriers transparent.
    pub fn visible(&self, ee: &EEPose, cam: &CameraModel, p: &Point3<f64>, opened: &[usize]) -> bool {
        let labels = self.labels(opened);
        cone_covers(ee, cam, p) && segment_clear(&self.grid.view(&labels), &ee.position(), p)
    }

    /// Every (carrier, feature) pair with a non-empty feature map.
    pub fn placements(&self) -> Vec<(usize, Feature)> {
        self.carriers
            .iter()
            .enumerate()
            .flat_map(|(ci, c)| Feature::ALL.into_iter().filter(move |f| !c.features.get(*f).is_empty()).map(move |f| (ci, f)))
            .collect()
    }

    /// Shortest travel from `from` (in room `a`) to `to` (in room `b`) through door
    /// points; straight line inside a room. Returns length and via-points.
    pub fn route(&self, a: usize, from: Point2<f64>, b: usize, to: Point2<f64>) -> (f64, Vec<Point2<f64>>) {
        if a == b {
            return ((to - from).norm(), vec![to]);
        }
        let doors: Vec<(usize, usize, Point2<f64>)> = self
            .scene
            .doors
            .iter()
            .filter_map(|d| {
                Some((self.scene.room_index(&d.rooms[0])?, self.scene.room_index(&d.rooms[1])?, Point2::new(d.at[0], d.at[1])))
            })
            .collect();
        let n = doors.len();
        // Nodes: doors 0..n, goal n.
        let mut dist = vec![f64::INFINITY; n + 1];
        let mut prev = vec![usize::MAX; n + 1];
        let mut done = vec![false; n + 1];
        for (i, d) in doors.iter().enumerate() {
            if d.0 == a || d.1 == a {
                dist[i] = (d.2 - from).norm();
            }
        }
        loop {
            let Some(u) = (0..=n).filter(|&i| !done[i] && dist[i].is_finite()).min_by(|&i, &j| dist[i].total_cmp(&dist[j]))
            else {
                break;
            };
            done[u] = true;
            if u == n {
                break;
            }
            let (ua, ub, up) = doors[u];
            let mut relax = |v: usize, w: f64| {
                if dist[u] + w < dist[v] {
                    dist[v] = dist[u] + w;
                    prev[v] = u;
                }
            };
            if ua == b || ub == b {
                relax(n, (to - up).norm());
            }
            for (v, d) in doors.iter().enumerate() {
                if v != u && (d.0 == ua || d.0 == ub || d.1 == ua || d.1 == ub) {
                    relax(v, (d.2 - up).norm());
                }
            }
        }
        if !dist[n].is_finite() {
            return ((to - from).norm(), vec![to]);
        }
        let mut path = vec![to];
        let mut u = prev[n];
        while u != usize::MAX {
            path.push(doors[u].2);
            u = prev[u];
        }
        path.reverse();
        (dist[n], path)
    }

    pub fn item_point(&self, label: &str) -> Option<(usize, Feature, Point3<f64>)> {
        let item = self.scene.items_labelled(label).next()?;
        let ci = self.scene.carrier_index(&item.carrier)?;
        Some((ci, item.feature, self.scene.item_position(item)?))
    }
}

type Slot = OnceLock<Result<Arc<PlanReport>, PlanError>>;

/// Lazily computed, unsorted plans per (carrier, feature); shareable across threads.
pub struct PlanCache<'w> {
    world: &'w World,
    setup: SimSetup,
    slots: Vec<[Slot; 4]>,
}

impl<'w> PlanCache<'w> {
    pub fn new(world: &'w World, setup: SimSetup) -> Self {
        let slots = (0..world.carriers.len()).map(|_| std::array::from_fn(|_| OnceLock::new())).collect();
        Self { world, setup, slots }
    }

    pub fn world(&self) -> &'w World {
        self.world
    }

    pub fn setup(&self) -> &SimSetup {
        &self.setup
    }

    pub fn get(&self, carrier: usize, feature: Feature) -> Result<Arc<PlanReport>, PlanError> {
        self.slots[carrier][feature.index()]
            .get_or_init(|| self.world.plan(carrier, feature, &self.setup).map(Arc::new))
            .clone()
    }

    /// Snapshot of the plans computed so far.
    pub fn computed(&self) -> BTreeMap<(usize, Feature), Arc<PlanReport>> {
        let mut out = BTreeMap::new();
        for (ci, slots) in self.slots.iter().enumerate() {
            for f in Feature::ALL {
                if let Some(Ok(p)) = slots[f.index()].get() {
                    out.insert((ci, f), p.clone());
                }
            }
        }
        out
    }
}
