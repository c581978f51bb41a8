//! Trial execution: exploration and mapping, the semantic descent and the two
//! non-semantic baselines, all sharing one pose-plan executor and detection model.

mod map;
mod strategies;
mod trace;

pub use map::{explore_scene, MappedRoom, SceneMap};
pub use strategies::{run_coverage, run_godhs, run_plan, run_random, run_trial};
pub use trace::{Event, MoveKind, Phase, SkipReason, Trace, TraceEvent, TraceHeader, TraceTotals, TRACE_FORMAT};

use std::collections::BTreeSet;

use nalgebra::{Point2, Point3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Feature;
use crate::planner::{CameraModel, ChassisPose, EEPose, SortingMode};
use crate::scene::{PlanCache, World};
use crate::semantics::KnowledgeBase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Godhs,
    Coverage,
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Godhs, Strategy::Coverage, Strategy::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Godhs => "godhs",
            Strategy::Coverage => "coverage",
            Strategy::Random => "random",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown strategy {s:?} (expected godhs, coverage or random)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeModel {
    /// Chassis speed, m/s.
    pub base_speed: f64,
    /// Camera speed, m/s.
    pub ee_speed: f64,
    /// Per camera pose.
    pub inspect_seconds: f64,
    /// Per successful open-action.
    pub open_seconds: f64,
}

impl Default for TimeModel {
    fn default() -> Self {
        Self { base_speed: 0.5, ee_speed: 0.2, inspect_seconds: 2.0, open_seconds: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    /// Seeds exploration order, the random walk and detection noise (separate streams).
    pub seed: u64,
    pub time: TimeModel,
    /// Probability that a geometrically visible target is missed.
    pub noise: f64,
    pub sorting: SortingMode,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self { strategy: Strategy::Godhs, seed: 0, time: TimeModel::default(), noise: 0.0, sorting: SortingMode::Both }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<(), String> {
        let t = &self.time;
        if !(t.base_speed > 0.0 && t.ee_speed > 0.0) {
            return Err("speeds must be positive".into());
        }
        if !(t.inspect_seconds >= 0.0 && t.open_seconds >= 0.0) {
            return Err("inspection and opening times must be non-negative".into());
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(format!("noise {} outside [0, 1)", self.noise));
        }
        Ok(())
    }
}

/// ChaCha8 stream ids derived from the trial seed.
const STREAM_EXPLORE: u64 = 1;
const STREAM_WALK: u64 = 2;
const STREAM_NOISE: u64 = 3;

pub(crate) fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Shared, immutable inputs of a trial.
pub struct SearchContext<'a> {
    pub plans: &'a PlanCache<'a>,
    pub kb: &'a KnowledgeBase,
}

impl<'a> SearchContext<'a> {
    pub fn new(plans: &'a PlanCache<'a>, kb: &'a KnowledgeBase) -> Self {
        Self { plans, kb }
    }

    pub fn world(&self) -> &'a World {
        self.plans.world()
    }
}

/// Where the target really is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSpot {
    pub carrier: usize,
    pub feature: Feature,
    pub point: Point3<f64>,
}

/// True when the target point is inside the frustum with a clear line of sight through
/// the scene (opened carriers transparent), and for inside placements only once its
/// carrier is open. A visible target is still missed with probability `noise`, drawn
/// from `rng` only on visible checks.
pub fn detect_target(
    ee: &EEPose,
    cam: &CameraModel,
    world: &World,
    target: &TargetSpot,
    opened: &BTreeSet<usize>,
    noise: f64,
    rng: &mut impl Rng,
) -> bool {
    if target.feature == Feature::Inside && !opened.contains(&target.carrier) {
        return false;
    }
    let open: Vec<usize> = opened.iter().copied().collect();
    if !world.visible(ee, cam, &target.point, &open) {
        return false;
    }
    noise <= 0.0 || rng.random::<f64>() >= noise
}

/// Mutable state of one trial: robot pose, clock and the growing trace.
pub(crate) struct Exec<'a> {
    pub ctx: &'a SearchContext<'a>,
    pub cfg: &'a StrategyConfig,
    pub target: Option<TargetSpot>,
    pub trace: Trace,
    noise_rng: ChaCha8Rng,
    t: f64,
    pub pos: ChassisPose,
    pub room: usize,
    pub found: bool,
}

impl<'a> Exec<'a> {
    pub fn new(ctx: &'a SearchContext<'a>, cfg: &'a StrategyConfig, target: &'a str, strategy: Option<Strategy>, ranker: &str) -> Self {
        let world = ctx.world();
        let header = TraceHeader {
            format: TRACE_FORMAT,
            scene: world.scene.name.clone(),
            target: target.to_string(),
            strategy,
            ranker: ranker.to_string(),
            config: cfg.clone(),
            setup: ctx.plans.setup().clone(),
        };
        let spot = world.item_point(target).map(|(carrier, feature, point)| TargetSpot { carrier, feature, point });
        let c = world.rooms[0].center;
        Self {
            ctx,
            cfg,
            target: spot,
            trace: Trace { header, events: Vec::new() },
            noise_rng: stream(cfg.seed, STREAM_NOISE),
            t: 0.0,
            pos: ChassisPose::new(c.x, c.y, 0.0),
            room: 0,
            found: false,
        }
    }

    pub fn world(&self) -> &'a World {
        self.ctx.world()
    }

    pub fn push(&mut self, event: Event, dt: f64) {
        self.t += dt;
        let seq = self.trace.events.len();
        self.trace.events.push(TraceEvent { seq, t: self.t, event });
    }

    fn ee_home(&self, at: &ChassisPose) -> [f64; 3] {
        let p = self.ctx.plans.setup().robot.stow_position(at);
        [p.x, p.y, p.z]
    }

    fn chassis_move(&mut self, kind: MoveKind, to: ChassisPose, length: f64) {
        let from = [self.pos.x, self.pos.y];
        let ee_home = self.ee_home(&to);
        self.pos = to;
        let dt = length / self.cfg.time.base_speed;
        self.push(Event::ChassisMove { kind, from, to: [to.x, to.y, to.theta], length, ee_home }, dt);
    }

    /// Door-graph route to the centre of room `ri`.
    pub fn move_to_room(&mut self, ri: usize, kind: MoveKind) {
        let world = self.world();
        let target = world.rooms[ri].center;
        let from = Point2::new(self.pos.x, self.pos.y);
        let (length, path) = world.route(self.room, from, ri, target);
        let last_leg_from = if path.len() >= 2 { path[path.len() - 2] } else { from };
        let d = target - last_leg_from;
        let heading = if d.norm() > 1e-12 { d.y.atan2(d.x) } else { self.pos.theta };
        self.room = ri;
        self.chassis_move(kind, ChassisPose::new(target.x, target.y, heading), length);
    }

    pub fn enter_room(&mut self, ri: usize, phase: Phase) {
        let kind = if phase == Phase::Exploration { MoveKind::Explore } else { MoveKind::Room };
        // The robot starts at the entry room's centre.
        if !self.trace.events.is_empty() {
            self.move_to_room(ri, kind);
        }
        let room = self.world().scene.rooms[ri].id.clone();
        self.push(Event::RoomEntered { room, phase }, 0.0);
    }

    pub fn carrier_inspected(&mut self, ci: usize) {
        let c = &self.world().scene.carriers[ci];
        self.push(Event::CarrierInspected { carrier: c.id.clone(), label: c.label.clone() }, 0.0);
    }

    /// Executes one feature's plan in the configured order. Returns true on detection.
    pub fn inspect_feature(&mut self, ci: usize, feature: Feature) -> bool {
        let world = self.world();
        let carrier = world.scene.carriers[ci].id.clone();
        let skip = |s: &mut Self, reason| s.push(Event::FeatureSkipped { carrier: carrier.clone(), feature, reason }, 0.0);
        if world.carriers[ci].features.get(feature).is_empty() {
            skip(self, SkipReason::EmptyFeatureMap);
            return false;
        }
        let plan = match self.ctx.plans.get(ci, feature) {
            Ok(r) if !r.plan.is_empty() => r,
            _ => {
                skip(self, SkipReason::EmptyPlan);
                return false;
            }
        };
        let mut opened = BTreeSet::new();
        if feature == Feature::Inside {
            let ok = world.scene.carriers[ci].openable;
            let dt = if ok { self.cfg.time.open_seconds } else { 0.0 };
            self.push(Event::OpenAction { carrier: carrier.clone(), success: ok }, dt);
            if !ok {
                skip(self, SkipReason::NotOpenable);
                return false;
            }
            opened.insert(ci);
        }
        let sorted = plan.plan.sorted(self.cfg.sorting, &self.pos);
        self.push(
            Event::FeatureInspected {
                carrier: carrier.clone(),
                feature,
                chassis_poses: sorted.entries.len(),
                ee_poses: sorted.ee_count(),
            },
            0.0,
        );
        let cam = self.ctx.plans.setup().camera;
        for entry in &sorted.entries {
            let length = (entry.chassis.position() - self.pos.position()).norm();
            self.chassis_move(MoveKind::Plan, entry.chassis, length);
            let mut ee_at = Point3::from(self.ee_home(&entry.chassis));
            for ee in &entry.ee {
                let length = (ee.position() - ee_at).norm();
                ee_at = ee.position();
                self.push(Event::EeMove { to: *ee, length }, length / self.cfg.time.ee_speed);
                let spot = self.target;
                let hit = match &spot {
                    Some(spot) => detect_target(ee, &cam, world, spot, &opened, self.cfg.noise, &mut self.noise_rng),
                    None => false,
                };
                self.push(
                    Event::DetectionCheck { carrier: carrier.clone(), feature, hit },
                    self.cfg.time.inspect_seconds,
                );
                if let (true, Some(spot)) = (hit, spot) {
                    self.found = true;
                    let at = world.scene.carriers[spot.carrier].id.clone();
                    self.push(Event::TargetFound { carrier: at, feature: spot.feature }, 0.0);
                    return true;
                }
            }
        }
        false
    }

    pub fn finish(mut self) -> Trace {
        if !self.found {
            self.push(Event::TargetNotFound, 0.0);
        }
        self.trace
    }
}
