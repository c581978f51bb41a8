use rayon::prelude::*;

use super::camera::{CameraModel, ChassisPose, EEPose, ViewCone};
use super::robot::RobotModel;
use crate::error::PlanError;
use crate::geometry::{segment_clear, FeatureMap, Occupancy};

/// Indices of feature points inside the frustum with an unobstructed line of sight.
pub fn coverage_set<O: Occupancy + ?Sized>(ee: &EEPose, cam: &CameraModel, fm: &FeatureMap, grid: &O) -> Vec<usize> {
    let eye = ee.position();
    let cone = ViewCone::new(ee, cam);
    fm.points
        .iter()
        .enumerate()
        .filter(|(_, p)| cone.covers(p) && segment_clear(grid, &eye, p))
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyCover {
    /// Chosen set indices in selection order.
    pub picks: Vec<usize>,
    pub covered: usize,
    /// No remaining set adds coverage before the target was met.
    pub saturated: bool,
}

/// Greedy maximum coverage: repeatedly take the set adding the most uncovered elements
/// (ties to the lowest index) until `required` elements are covered or nothing helps.
pub fn greedy_cover(sets: &[Vec<usize>], universe: usize, required: usize) -> GreedyCover {
    greedy_cover_budget(sets, universe, required, usize::MAX)
}

/// [`greedy_cover`] stopping after at most `max_picks` sets.
pub fn greedy_cover_budget(sets: &[Vec<usize>], universe: usize, required: usize, max_picks: usize) -> GreedyCover {
    let mut covered = vec![false; universe];
    let mut count = 0usize;
    let mut used = vec![false; sets.len()];
    let mut picks = Vec::new();
    while count < required && picks.len() < max_picks {
        let mut best: Option<(usize, usize)> = None;
        for (i, s) in sets.iter().enumerate() {
            if used[i] {
                continue;
            }
            let gain = s.iter().filter(|&&e| !covered[e]).count();
            if gain > 0 && best.is_none_or(|(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        let Some((i, gain)) = best else {
            return GreedyCover { picks, covered: count, saturated: true };
        };
        used[i] = true;
        for &e in &sets[i] {
            covered[e] = true;
        }
        count += gain;
        picks.push(i);
    }
    GreedyCover { picks, covered: count, saturated: false }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EeSelection {
    pub poses: Vec<EEPose>,
    pub covered_fraction: f64,
    pub saturated: bool,
}

/// Coverage sets are scored in parallel; the pick sequence itself is sequential.
pub fn greedy_select_ee<O: Occupancy + Sync + ?Sized>(
    candidates: &[EEPose],
    cam: &CameraModel,
    fm: &FeatureMap,
    grid: &O,
    coverage_target: f64,
    max_views: usize,
) -> Result<EeSelection, PlanError> {
    if !(coverage_target > 0.0 && coverage_target <= 1.0) {
        return Err(PlanError::CoverageTarget(coverage_target));
    }
    let sets: Vec<Vec<usize>> = candidates.par_iter().map(|c| coverage_set(c, cam, fm, grid)).collect();
    let n = fm.points.len();
    let required = ((coverage_target * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let result = greedy_cover_budget(&sets, n, required.min(n), max_views.max(1));
    Ok(EeSelection {
        poses: result.picks.iter().map(|&i| candidates[i]).collect(),
        covered_fraction: if n == 0 { 0.0 } else { result.covered as f64 / n as f64 },
        saturated: result.saturated,
    })
}

/// Geometric screen: camera within the arm's reach shell, the implied flange within the
/// links' span of the first joint, and a clear straight line from the arm mount.
pub fn reachable_fast<O: Occupancy + ?Sized>(ch: &ChassisPose, ee: &EEPose, robot: &RobotModel, grid: &O) -> bool {
    let mount = robot.mount_position(ch);
    let d = (ee.position() - mount).norm();
    d >= robot.reach_min
        && d <= robot.reach_max
        && (robot.flange_position(ee) - robot.shoulder_position(ch)).norm() <= robot.link_reach() + 1e-9
        && segment_clear(grid, &mount, &ee.position())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChSelection {
    pub poses: Vec<ChassisPose>,
    /// EE indices no candidate can reach; dropped from the plan.
    pub uncoverable: Vec<usize>,
}

pub fn greedy_select_ch<O: Occupancy + Sync + ?Sized>(
    candidates: &[ChassisPose],
    ee_poses: &[EEPose],
    robot: &RobotModel,
    grid: &O,
) -> ChSelection {
    let sets: Vec<Vec<usize>> = candidates
        .par_iter()
        .map(|ch| {
            ee_poses
                .iter()
                .enumerate()
                .filter(|(_, ee)| reachable_fast(ch, ee, robot, grid))
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    let mut coverable = vec![false; ee_poses.len()];
    for s in &sets {
        for &i in s {
            coverable[i] = true;
        }
    }
    let n_coverable = coverable.iter().filter(|c| **c).count();
    let result = greedy_cover(&sets, ee_poses.len(), n_coverable);
    ChSelection {
        poses: result.picks.iter().map(|&i| candidates[i]).collect(),
        uncoverable: coverable.iter().enumerate().filter(|(_, c)| !**c).map(|(i, _)| i).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{voxelize, Feature};
    use nalgebra::Point3;

    #[test]
    fn greedy_prefers_larger_then_lowest_index() {
        // c1 {A,B}, c2 {B,C}, c3 {C}
        let sets = vec![vec![0, 1], vec![1, 2], vec![2]];
        let r = greedy_cover(&sets, 3, 3);
        assert_eq!(r.picks, vec![0, 1]);
        assert!(!r.saturated);
    }

    #[test]
    fn greedy_single_and_empty() {
        assert_eq!(greedy_cover(&[vec![0, 1, 2]], 3, 3).picks, vec![0]);
        let r = greedy_cover(&[vec![], vec![]], 3, 3);
        assert!(r.picks.is_empty() && r.saturated);
    }

    #[test]
    fn budget_stops_early() {
        let sets = vec![vec![0], vec![1], vec![2]];
        let r = greedy_cover_budget(&sets, 3, 3, 2);
        assert_eq!(r.picks, vec![0, 1]);
        assert_eq!(r.covered, 2);
        assert!(!r.saturated);
    }

    #[test]
    fn coverage_and_occlusion() {
        let cam = CameraModel { fov_h: 1.5, fov_v: 1.0, near: 0.0, far: 5.0 };
        let fm = FeatureMap { feature: Feature::Sides, points: vec![Point3::new(1.05, 0.05, 0.05)] };
        let ee = EEPose::new(0.05, 0.05, 0.05, 0.0, 0.0, 0.0);
        let far_block = voxelize(&[Point3::new(3.0, 3.0, 3.0)], 0.1).unwrap();
        assert_eq!(coverage_set(&ee, &cam, &fm, &far_block), vec![0]);
        let wall = voxelize(&[Point3::new(0.55, 0.05, 0.05)], 0.1).unwrap();
        assert!(coverage_set(&ee, &cam, &fm, &wall).is_empty());
    }

    #[test]
    fn reach_screen() {
        let robot = RobotModel { mount: [0.0, 0.0, 0.5], ..RobotModel::default() };
        let ch = ChassisPose::new(0.0, 0.0, 0.0);
        let empty = voxelize(&[Point3::new(50.0, 50.0, 50.0)], 0.05).unwrap();
        let near = EEPose::new(0.5, 0.0, 0.5, 0.0, 0.0, 0.0);
        assert!(reachable_fast(&ch, &near, &robot, &empty));
        let far = EEPose::new(2.0, 0.0, 0.5, 0.0, 0.0, 0.0);
        assert!(!reachable_fast(&ch, &far, &robot, &empty));
        let slab: Vec<_> = (-5..5)
            .flat_map(|y| (5..15).map(move |z| Point3::new(0.275, y as f64 * 0.05 + 0.025, z as f64 * 0.05 + 0.025)))
            .collect();
        let slab = voxelize(&slab, 0.05).unwrap();
        assert!(!reachable_fast(&ch, &near, &robot, &slab));
    }

    #[test]
    fn ch_selection_reports_uncoverable() {
        let robot = RobotModel::default();
        let grid = voxelize(&[Point3::new(50.0, 50.0, 50.0)], 0.05).unwrap();
        let ch = [ChassisPose::new(0.0, 0.0, 0.0)];
        let ee = [EEPose::new(0.6, 0.0, 0.9, 0.0, 0.0, 0.0), EEPose::new(5.0, 0.0, 0.9, 0.0, 0.0, 0.0)];
        let sel = greedy_select_ch(&ch, &ee, &robot, &grid);
        assert_eq!(sel.poses.len(), 1);
        assert_eq!(sel.uncoverable, vec![1]);
    }

    #[test]
    fn coverage_target_validated() {
        let fm = FeatureMap { feature: Feature::Top, points: vec![Point3::origin()] };
        let grid = voxelize(&[Point3::new(9.0, 9.0, 9.0)], 0.1).unwrap();
        assert!(greedy_select_ee(&[], &CameraModel::default(), &fm, &grid, 0.0, 10).is_err());
        assert!(greedy_select_ee(&[], &CameraModel::default(), &fm, &grid, 1.5, 10).is_err());
    }
}
