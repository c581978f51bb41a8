//! Coverage-driven chassis/end-effector pose planning for one carrier feature.
//!
//! Pipeline per feature map: camera candidates → greedy visual coverage → chassis ring
//! candidates → greedy reachability cover → IK validation into a [`PosePlan`] → optional
//! polar (chassis) and lexicographic (camera) ordering at execution time.

mod camera;
mod candidates;
mod robot;
mod select;
mod sorting;

pub use camera::{cone_covers, normalize_angle, CameraModel, ChassisPose, EEPose, ViewCone};
pub use candidates::{
    generate_ch_candidates, generate_ee_candidates, point_in_polygon, ChCandidateParams, EeCandidateParams,
    RoomOccupancy, BOTTOM_PITCH,
};
pub use robot::{restart_seeds, solve_ik, IkOutcome, IkParams, IkSolution, JointSpec, RobotModel};
pub use select::{
    coverage_set, greedy_cover, greedy_cover_budget, greedy_select_ch, greedy_select_ee, reachable_fast, ChSelection, EeSelection,
    GreedyCover,
};
pub use sorting::{compare_ee, ee_sort_key, polar_angle, sort_ch_polar, sort_ee_lexicographic, PolarOrder, SortingMode};

use nalgebra::Point2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::PlanError;
use crate::geometry::{Feature, FeatureMap, Footprint2D, Occupancy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerParams {
    pub ee: EeCandidateParams,
    pub ch: ChCandidateParams,
    pub coverage_target: f64,
    /// Most camera poses selected for one feature.
    pub max_views: usize,
    /// Most camera poses assigned to one chassis pose.
    pub max_views_per_chassis: usize,
    pub ik: IkParams,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            ee: EeCandidateParams::default(),
            ch: ChCandidateParams::default(),
            coverage_target: 0.95,
            max_views: 10,
            max_views_per_chassis: 10,
            ik: IkParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub chassis: ChassisPose,
    pub ee: Vec<EEPose>,
}

/// Chassis poses, each owning a non-empty list of camera poses, in execution order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosePlan {
    pub carrier: String,
    pub feature: Feature,
    /// Carrier cloud centroid used for polar ordering.
    pub centroid: [f64; 2],
    pub entries: Vec<PlanEntry>,
}

impl PosePlan {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ee_count(&self) -> usize {
        self.entries.iter().map(|e| e.ee.len()).sum()
    }

    /// Reorders for execution. `start` is the chassis pose the robot arrives from.
    pub fn sorted(&self, mode: SortingMode, start: &ChassisPose) -> PosePlan {
        let mut entries = self.entries.clone();
        if mode.sorts_ch() && !entries.is_empty() {
            let centroid = Point2::new(self.centroid[0], self.centroid[1]);
            let poses: Vec<ChassisPose> = entries.iter().map(|e| e.chassis).collect();
            let order = sort_ch_polar(&poses, &centroid, start);
            let mut remaining = entries;
            entries = order
                .poses
                .iter()
                .map(|p| {
                    let i = remaining.iter().position(|e| e.chassis == *p).expect("permutation");
                    remaining.remove(i)
                })
                .collect();
        }
        if mode.sorts_ee() {
            for e in &mut entries {
                e.ee = sort_ee_lexicographic(&e.ee);
            }
        }
        PosePlan { entries, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanBuild {
    pub plan: PosePlan,
    /// EE indices (into the input list) with no chassis pose passing IK.
    pub ik_dropped: Vec<usize>,
}

/// Assigns every camera pose to the first chassis pose (in selection order) with room
/// left under `per_chassis` that passes both the reach screen and IK. A pose no selected
/// chassis pose can take tries the `spare` poses nearest it first; the first that works
/// joins the plan. Chassis poses owning nothing are omitted.
pub fn build_pose_plan<O: Occupancy + ?Sized>(
    chassis: &[ChassisPose],
    spare: &[ChassisPose],
    ee_poses: &[EEPose],
    robot: &RobotModel,
    grid: &O,
    ik: &IkParams,
    per_chassis: usize,
    carrier: &str,
    feature: Feature,
    centroid: Point2<f64>,
) -> PlanBuild {
    let mut chassis: Vec<ChassisPose> = chassis.to_vec();
    let mut owned: Vec<Vec<EEPose>> = vec![Vec::new(); chassis.len()];
    let mut dropped = Vec::new();
    let works = |ch: &ChassisPose, ee: &EEPose| reachable_fast(ch, ee, robot, grid) && solve_ik(ch, ee, robot, ik).is_solved();
    for (i, ee) in ee_poses.iter().enumerate() {
        if let Some(c) = (0..chassis.len()).find(|&c| owned[c].len() < per_chassis && works(&chassis[c], ee)) {
            owned[c].push(*ee);
            continue;
        }
        let cam = Point2::new(ee.x, ee.y);
        let mut order: Vec<&ChassisPose> = spare.iter().filter(|s| !chassis.contains(s)).collect();
        order.sort_by(|a, b| (a.position() - cam).norm().total_cmp(&(b.position() - cam).norm()));
        match order.into_iter().find(|ch| works(ch, ee)) {
            Some(ch) => {
                chassis.push(*ch);
                owned.push(vec![*ee]);
            }
            None => dropped.push(i),
        }
    }
    let entries = chassis
        .iter()
        .zip(owned)
        .filter(|(_, ee)| !ee.is_empty())
        .map(|(ch, ee)| PlanEntry { chassis: *ch, ee })
        .collect();
    PlanBuild {
        plan: PosePlan { carrier: carrier.to_string(), feature, centroid: [centroid.x, centroid.y], entries },
        ik_dropped: dropped,
    }
}

/// Everything the planner needs to know about one carrier's surroundings.
pub struct PlanningScene<'a, O: Occupancy + Sync + ?Sized> {
    pub carrier: &'a str,
    pub footprint: &'a Footprint2D,
    pub centroid: Point2<f64>,
    pub room: &'a RoomOccupancy,
    pub grid: &'a O,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanReport {
    pub plan: PosePlan,
    pub candidates: usize,
    pub ee_selected: usize,
    pub covered_fraction: f64,
    pub saturated: bool,
    pub uncoverable: usize,
    pub ik_dropped: usize,
}

/// Selection rounds; each drops the camera poses that failed IK in the previous one.
pub const IK_RESELECT_ROUNDS: usize = 3;

/// Full pipeline for one feature map. Camera candidates inside an occupied voxel, outside
/// the room outline, or beyond the reach of every chassis candidate are discarded before
/// coverage scoring. Camera poses failing IK everywhere are removed and selection rerun,
/// up to [`IK_RESELECT_ROUNDS`] rounds.
pub fn plan_feature<O: Occupancy + Sync + ?Sized>(
    scene: &PlanningScene<'_, O>,
    fm: &FeatureMap,
    cam: &CameraModel,
    robot: &RobotModel,
    params: &PlannerParams,
) -> Result<PlanReport, PlanError> {
    let all = generate_ee_candidates(fm, &params.ee)?;
    let frame = scene.grid.frame();
    let ch_candidates = generate_ch_candidates(scene.footprint, scene.room, robot, &params.ch);
    let candidates: Vec<EEPose> = all
        .into_par_iter()
        .filter(|c| {
            let p = c.position();
            !scene.grid.is_occupied(frame.cell_of(&p))
                && (scene.room.outline.is_empty() || point_in_polygon(&Point2::new(p.x, p.y), &scene.room.outline))
                && ch_candidates.iter().any(|ch| reachable_fast(ch, c, robot, scene.grid))
        })
        .collect();
    let mut candidates = candidates;
    let mut round = 0;
    loop {
        let selection = greedy_select_ee(&candidates, cam, fm, scene.grid, params.coverage_target, params.max_views)?;
        let ch = greedy_select_ch(&ch_candidates, &selection.poses, robot, scene.grid);
        let coverable: Vec<EEPose> = selection
            .poses
            .iter()
            .enumerate()
            .filter(|(i, _)| !ch.uncoverable.contains(i))
            .map(|(_, p)| *p)
            .collect();
        let build = build_pose_plan(
            &ch.poses,
            &ch_candidates,
            &coverable,
            robot,
            scene.grid,
            &params.ik,
            params.max_views_per_chassis.max(1),
            scene.carrier,
            fm.feature,
            scene.centroid,
        );
        round += 1;
        if build.ik_dropped.is_empty() || round >= IK_RESELECT_ROUNDS {
            return Ok(PlanReport {
                plan: build.plan,
                candidates: candidates.len(),
                ee_selected: selection.poses.len(),
                covered_fraction: selection.covered_fraction,
                saturated: selection.saturated,
                uncoverable: ch.uncoverable.len(),
                ik_dropped: build.ik_dropped.len(),
            });
        }
        let dropped: Vec<EEPose> = build.ik_dropped.iter().map(|&i| coverable[i]).collect();
        candidates.retain(|c| !dropped.contains(c));
    }
}
