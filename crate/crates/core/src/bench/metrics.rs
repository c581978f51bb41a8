use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::MetricsError;
use crate::geometry::Feature;
use crate::scene::World;
use crate::search::{Event, MoveKind, Phase, SkipReason, Trace};

pub const DEFAULT_WEIGHTS: [f64; 3] = [0.2, 0.3, 0.5];

/// Largest waypoint set [`optimal_tour_length`] accepts.
pub const MAX_TOUR_WAYPOINTS: usize = 10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Count {
    pub num: usize,
    pub den: usize,
}

impl Count {
    pub fn percent(&self) -> f64 {
        100.0 * self.num as f64 / self.den as f64
    }
}

/// Percentages of rooms, carriers and placements searched before the target was seen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchRates {
    pub r_r: f64,
    pub r_c: f64,
    pub r_i: f64,
    pub rooms: Count,
    pub carriers: Count,
    pub placements: Count,
    /// False when the trace ended without a detection; all rates are then 100.
    pub found: bool,
}

/// Rooms entered after exploration, carriers whose inspection began and (carrier,
/// feature) placements with at least one detection check, over the scene's rooms,
/// carriers and non-empty placements.
pub fn compute_rates(trace: &Trace, world: &World) -> Result<SearchRates, MetricsError> {
    let complete = matches!(
        trace.events.last().map(|e| &e.event),
        Some(Event::TargetFound { .. } | Event::TargetNotFound)
    );
    if !complete {
        return Err(MetricsError::Report("trace does not end with a search outcome".into()));
    }
    let totals = [world.scene.rooms.len(), world.scene.carriers.len(), world.placements().len()];
    if totals.contains(&0) {
        return Err(MetricsError::Report("scene has no rooms, carriers or placements".into()));
    }
    let mut rooms = BTreeSet::new();
    let mut carriers = BTreeSet::new();
    let mut placements: BTreeSet<(&str, Feature)> = BTreeSet::new();
    for e in &trace.events {
        match &e.event {
            Event::RoomEntered { room, phase: Phase::Search } => {
                rooms.insert(room.as_str());
            }
            Event::CarrierInspected { carrier, .. } => {
                carriers.insert(carrier.as_str());
            }
            Event::DetectionCheck { carrier, feature, .. } => {
                placements.insert((carrier.as_str(), *feature));
            }
            _ => {}
        }
    }
    let found = trace.found();
    let count = |n: usize, den: usize| Count { num: if found { n } else { den }, den };
    let (rooms, carriers, placements) =
        (count(rooms.len(), totals[0]), count(carriers.len(), totals[1]), count(placements.len(), totals[2]));
    Ok(SearchRates {
        r_r: rooms.percent(),
        r_c: carriers.percent(),
        r_i: placements.percent(),
        rooms,
        carriers,
        placements,
        found,
    })
}

pub fn check_weights(w: [f64; 3]) -> Result<(), MetricsError> {
    if w.iter().any(|v| !(*v >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(MetricsError::Weights(w));
    }
    Ok(())
}

/// Weighted average of the three rates.
pub fn compute_osr(rates: &SearchRates, weights: [f64; 3]) -> Result<f64, MetricsError> {
    osr(rates.r_r, rates.r_c, rates.r_i, weights)
}

pub fn osr(r_r: f64, r_c: f64, r_i: f64, weights: [f64; 3]) -> Result<f64, MetricsError> {
    check_weights(weights)?;
    Ok(weights[0] * r_r + weights[1] * r_c + weights[2] * r_i)
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Exact shortest open path from `start` through every waypoint: exhaustive search over
/// visiting orders, pruning partial paths already no shorter than the best complete one.
pub fn optimal_tour_length(waypoints: &[[f64; 3]], start: [f64; 3]) -> Result<f64, MetricsError> {
    let n = waypoints.len();
    if n > MAX_TOUR_WAYPOINTS {
        return Err(MetricsError::TourTooLarge(n));
    }
    fn search(w: &[[f64; 3]], at: &[f64; 3], used: &mut [bool], left: usize, so_far: f64, best: &mut f64) {
        if so_far >= *best {
            return;
        }
        if left == 0 {
            *best = so_far;
            return;
        }
        for i in 0..w.len() {
            if !used[i] {
                used[i] = true;
                search(w, &w[i], used, left - 1, so_far + dist(at, &w[i]), best);
                used[i] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    search(waypoints, &start, &mut vec![false; n], n, 0.0, &mut best);
    Ok(if n == 0 { 0.0 } else { best })
}

/// Executed versus shortest travel, per camera tour (chassis pose) and per chassis tour
/// (feature plan), read from a trace. Raw lengths are summed over all tours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    pub ee_executed: f64,
    pub ee_optimal: f64,
    pub ch_executed: f64,
    pub ch_optimal: f64,
    pub time: f64,
    /// `None` when the trace has no camera tour.
    pub ee_ratio: Option<f64>,
    /// `None` when the trace has no feature plan execution.
    pub ch_ratio: Option<f64>,
    /// Against the paired unsorted run; `None` without one.
    pub time_ratio: Option<f64>,
}

fn ratio(executed: f64, optimal: f64) -> f64 {
    if optimal > 0.0 {
        executed / optimal
    } else {
        1.0
    }
}

#[derive(Default)]
struct Tour {
    start: [f64; 3],
    points: Vec<[f64; 3]>,
    executed: f64,
}

pub fn path_stats(trace: &Trace, paired: Option<&Trace>) -> Result<PathStats, MetricsError> {
    let mut ee_tours: Vec<Tour> = Vec::new();
    let mut ch_tours: Vec<Tour> = Vec::new();
    let mut in_plan = false;
    let mut in_ee = false;
    for e in &trace.events {
        match &e.event {
            Event::FeatureInspected { .. } => {
                in_plan = true;
                ch_tours.push(Tour::default());
            }
            Event::ChassisMove { kind: MoveKind::Plan, from, to, length, ee_home } if in_plan => {
                let tour = ch_tours.last_mut().expect("opened by feature-inspected");
                if tour.points.is_empty() {
                    tour.start = [from[0], from[1], 0.0];
                }
                tour.points.push([to[0], to[1], 0.0]);
                tour.executed += length;
                ee_tours.push(Tour { start: *ee_home, ..Tour::default() });
                in_ee = true;
            }
            Event::ChassisMove { .. } => {
                in_plan = false;
                in_ee = false;
            }
            Event::EeMove { to, length } if in_ee => {
                let tour = ee_tours.last_mut().expect("opened by chassis-move");
                tour.points.push([to.x, to.y, to.z]);
                tour.executed += length;
            }
            Event::FeatureSkipped { reason: SkipReason::NotOpenable, .. } | Event::CarrierInspected { .. } => {
                in_plan = false;
                in_ee = false;
            }
            _ => {}
        }
    }
    let sum = |tours: &[Tour]| -> Result<(f64, f64), MetricsError> {
        let mut exec = 0.0;
        let mut opt = 0.0;
        for t in tours {
            exec += t.executed;
            opt += optimal_tour_length(&t.points, t.start)?;
        }
        Ok((exec, opt))
    };
    let (ee_executed, ee_optimal) = sum(&ee_tours)?;
    let (ch_executed, ch_optimal) = sum(&ch_tours)?;
    let time = trace.totals().time;
    let time_ratio = match paired {
        Some(p) => {
            let base = p.totals().time;
            (base > 0.0).then(|| time / base)
        }
        None => None,
    };
    Ok(PathStats {
        ee_executed,
        ee_optimal,
        ch_executed,
        ch_optimal,
        time,
        ee_ratio: (!ee_tours.is_empty()).then(|| ratio(ee_executed, ee_optimal)),
        ch_ratio: (!ch_tours.is_empty()).then(|| ratio(ch_executed, ch_optimal)),
        time_ratio,
    })
}

/// Why a trial ended without a detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureCategory {
    /// The target's feature was attempted but no camera pose saw the target.
    HardwareReach,
    /// The descent never reached the target's carrier or feature, or tried to open a
    /// carrier that does not open.
    CommonSense,
    /// The target's room was typed wrongly and its carrier never inspected.
    SemanticAmbiguity,
    /// The target was in view at least once but missed by noisy detection.
    DetectionMiss,
    /// The scene holds no item with the target label.
    TargetAbsent,
    /// The trial did not complete.
    Crash,
}

/// `None` for found traces.
pub fn classify_failure(trace: &Trace, world: &World) -> Option<FailureCategory> {
    if trace.found() {
        return None;
    }
    let Some((ci, feature, _)) = world.item_point(&trace.header.target) else {
        return Some(FailureCategory::TargetAbsent);
    };
    let carrier = &world.scene.carriers[ci];
    let room = &world.scene.rooms[world.carrier_room[ci]];
    let mut inspected = false;
    let mut attempted = false;
    let mut checked = false;
    let mut room_type = None;
    let mut open_failed = false;
    for e in &trace.events {
        match &e.event {
            Event::RoomTypeInferred { room: r, room_type: t, .. } if *r == room.id => room_type = Some(t.clone()),
            Event::CarrierInspected { carrier: c, .. } if *c == carrier.id => inspected = true,
            Event::FeatureInspected { carrier: c, feature: f, .. } | Event::FeatureSkipped { carrier: c, feature: f, .. }
                if *c == carrier.id && *f == feature =>
            {
                attempted = true
            }
            Event::DetectionCheck { carrier: c, feature: f, .. } if *c == carrier.id && *f == feature => checked = true,
            Event::OpenAction { success: false, .. } => open_failed = true,
            _ => {}
        }
    }
    if !inspected && room_type.as_deref().is_some_and(|t| t != room.room_type) {
        return Some(FailureCategory::SemanticAmbiguity);
    }
    if !attempted || open_failed && !checked {
        return Some(FailureCategory::CommonSense);
    }
    if checked && trace.header.config.noise > 0.0 {
        return Some(FailureCategory::DetectionMiss);
    }
    Some(FailureCategory::HardwareReach)
}
