//! Serial-chain arm on a mobile base, with forward kinematics and a damped
//! least-squares (Levenberg-Marquardt) IK solver.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector, Isometry3, Point3, Rotation3, Translation3, Unit, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::camera::{ChassisPose, EEPose};
use crate::error::PlanError;

/// One revolute joint: fixed translation from the previous frame, then rotation about `axis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub offset: [f64; 3],
    pub axis: [f64; 3],
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotModel {
    /// Arm base position in the chassis frame.
    pub mount: [f64; 3],
    pub joints: Vec<JointSpec>,
    /// Fixed flange-to-camera transform: translation then roll/pitch/yaw.
    pub tool_offset: [f64; 3],
    pub tool_rpy: [f64; 3],
    pub reach_min: f64,
    pub reach_max: f64,
    pub chassis_radius: f64,
    /// Joint vector the arm is tucked into while the base drives; empty means all zeros.
    #[serde(default)]
    pub stow: Vec<f64>,
}

impl Default for RobotModel {
    /// A 7-DOF anthropomorphic arm on a tall omnidirectional base.
    fn default() -> Self {
        let z = [0.0, 0.0, 1.0];
        let y = [0.0, 1.0, 0.0];
        let joint = |offset: [f64; 3], axis: [f64; 3], lim: f64| JointSpec { offset, axis, lower: -lim, upper: lim };
        Self {
            mount: [0.1, 0.0, 0.8],
            joints: vec![
                joint([0.0, 0.0, 0.0], z, 2.9),
                joint([0.0, 0.0, 0.0], y, 2.2),
                joint([0.0, 0.0, 0.2], z, 2.9),
                joint([0.0, 0.0, 0.2], y, 2.6),
                joint([0.0, 0.0, 0.2], z, 2.9),
                joint([0.0, 0.0, 0.2], y, 2.2),
                joint([0.0, 0.0, 0.0], z, 2.9),
            ],
            tool_offset: [0.0, 0.0, 0.1],
            tool_rpy: [0.0, -FRAC_PI_2, 0.0],
            reach_min: 0.2,
            reach_max: 0.9,
            chassis_radius: 0.35,
            // Elbow folded back so the camera rides near mount height.
            stow: vec![0.0, 0.0, 0.0, 2.5, 0.0, 0.0, 0.0],
        }
    }
}

impl RobotModel {
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.joints.len() < 2 {
            return Err(PlanError::InvalidRobot("chain needs at least two joints".into()));
        }
        if !(self.reach_min < self.reach_max) {
            return Err(PlanError::InvalidRobot("reach_min must be below reach_max".into()));
        }
        for (i, j) in self.joints.iter().enumerate() {
            if !(j.lower <= j.upper) || Vector3::from(j.axis).norm() < 1e-12 {
                return Err(PlanError::InvalidRobot(format!("joint {i} has bad limits or axis")));
            }
        }
        if !self.stow.is_empty() && !self.within_limits(&self.stow) {
            return Err(PlanError::InvalidRobot("stow pose must give one in-limit angle per joint".into()));
        }
        Ok(())
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn chassis_iso(ch: &ChassisPose) -> Isometry3<f64> {
        Isometry3::from_parts(
            Translation3::new(ch.x, ch.y, 0.0),
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), ch.theta),
        )
    }

    /// Arm base position in the world.
    pub fn mount_position(&self, ch: &ChassisPose) -> Point3<f64> {
        Self::chassis_iso(ch) * Point3::from(self.mount)
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.len() == self.dof() && q.iter().zip(&self.joints).all(|(v, j)| *v >= j.lower && *v <= j.upper)
    }

    fn clamp(&self, q: &mut DVector<f64>) {
        for (v, j) in q.iter_mut().zip(&self.joints) {
            *v = v.clamp(j.lower, j.upper);
        }
    }

    fn tool(&self) -> Isometry3<f64> {
        let [r, p, y] = self.tool_rpy;
        Isometry3::from_parts(
            Translation3::from(Vector3::from(self.tool_offset)),
            UnitQuaternion::from_euler_angles(r, p, y),
        )
    }

    /// Camera pose in the world, plus each joint's world origin and axis.
    fn fk_full(&self, ch: &ChassisPose, q: &[f64]) -> (Isometry3<f64>, Vec<(Point3<f64>, Vector3<f64>)>) {
        let mut t = Self::chassis_iso(ch) * Translation3::from(Vector3::from(self.mount));
        let mut joints = Vec::with_capacity(q.len());
        for (j, &angle) in self.joints.iter().zip(q) {
            t *= Translation3::from(Vector3::from(j.offset));
            let axis = Unit::new_normalize(Vector3::from(j.axis));
            joints.push((t * Point3::origin(), t.rotation * axis.into_inner()));
            t *= UnitQuaternion::from_axis_angle(&axis, angle);
        }
        (t * self.tool(), joints)
    }

    /// Upper bound on the distance from the first joint to the flange: the summed
    /// lengths of the later joint offsets.
    pub fn link_reach(&self) -> f64 {
        self.joints.iter().skip(1).map(|j| Vector3::from(j.offset).norm()).sum()
    }

    /// First joint origin in the world.
    pub fn shoulder_position(&self, ch: &ChassisPose) -> Point3<f64> {
        let first = self.joints.first().map_or([0.0; 3], |j| j.offset);
        Self::chassis_iso(ch) * Point3::from(Vector3::from(self.mount) + Vector3::from(first))
    }

    /// Flange origin implied by a camera pose.
    pub fn flange_position(&self, ee: &EEPose) -> Point3<f64> {
        let cam = Isometry3::from_parts(
            Translation3::from(ee.position().coords),
            UnitQuaternion::from_rotation_matrix(&ee.rotation()),
        );
        cam * self.tool().inverse() * Point3::origin()
    }

    /// Camera position with the arm stowed; every camera tour starts here.
    pub fn stow_position(&self, ch: &ChassisPose) -> Point3<f64> {
        let q = if self.stow.is_empty() { vec![0.0; self.dof()] } else { self.stow.clone() };
        self.fk_pose(ch, &q).position()
    }

    pub fn forward_kinematics(&self, ch: &ChassisPose, q: &[f64]) -> Isometry3<f64> {
        self.fk_full(ch, q).0
    }

    pub fn fk_pose(&self, ch: &ChassisPose, q: &[f64]) -> EEPose {
        let iso = self.forward_kinematics(ch, q);
        EEPose::from_rotation(iso.translation.vector.into(), &iso.rotation.to_rotation_matrix())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkParams {
    pub tol: f64,
    pub tol_rot: f64,
    pub max_iters: usize,
    pub restarts: usize,
    pub orientation_weight: f64,
    pub initial_damping: f64,
    pub seed: u64,
}

impl Default for IkParams {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            tol_rot: 1e-2,
            max_iters: 200,
            restarts: 4,
            orientation_weight: 0.5,
            initial_damping: 1e-2,
            seed: 17,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkSolution {
    pub joints: Vec<f64>,
    pub position_error: f64,
    pub orientation_error: f64,
    pub iterations: usize,
    pub attempt: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IkOutcome {
    Solved(IkSolution),
    Failed { best_position_error: f64, best_orientation_error: f64 },
}

impl IkOutcome {
    pub fn solution(&self) -> Option<&IkSolution> {
        match self {
            IkOutcome::Solved(s) => Some(s),
            IkOutcome::Failed { .. } => None,
        }
    }

    pub fn is_solved(&self) -> bool {
        matches!(self, IkOutcome::Solved(_))
    }
}

fn pose_error(current: &Isometry3<f64>, target_pos: &Point3<f64>, target_rot: &Rotation3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let pos = target_pos - Point3::from(current.translation.vector);
    let rot = (target_rot * current.rotation.to_rotation_matrix().inverse()).scaled_axis();
    (pos, rot)
}

/// Seeded restart configurations, fixed for a given robot and seed.
pub fn restart_seeds(robot: &RobotModel, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| robot.joints.iter().map(|j| rng.random_range(j.lower..=j.upper) * 0.5).collect())
        .collect()
}

/// Damped least squares on the weighted 6D pose error, starting from all-zeros and then
/// each seeded restart. Steps are projected onto the joint limits; the damping factor
/// halves after an accepted step and doubles after a rejected one.
pub fn solve_ik(ch: &ChassisPose, ee: &EEPose, robot: &RobotModel, params: &IkParams) -> IkOutcome {
    let target_pos = ee.position();
    let target_rot = ee.rotation();
    let n = robot.dof();
    let w = params.orientation_weight;

    let weighted_cost = |p: &Vector3<f64>, r: &Vector3<f64>| p.norm_squared() + w * w * r.norm_squared();

    let mut starts = vec![vec![0.0; n]];
    starts.extend(restart_seeds(robot, params.restarts, params.seed));

    let mut best = (f64::INFINITY, f64::INFINITY);
    for (attempt, start) in starts.into_iter().enumerate() {
        let mut q = DVector::from_vec(start);
        robot.clamp(&mut q);
        let (mut iso, mut frames) = robot.fk_full(ch, q.as_slice());
        let (mut ep, mut er) = pose_error(&iso, &target_pos, &target_rot);
        let mut cost = weighted_cost(&ep, &er);
        let mut lambda = params.initial_damping;

        for iter in 0..=params.max_iters {
            if ep.norm() < params.tol && er.norm() < params.tol_rot {
                if robot.within_limits(q.as_slice()) {
                    return IkOutcome::Solved(IkSolution {
                        joints: q.as_slice().to_vec(),
                        position_error: ep.norm(),
                        orientation_error: er.norm(),
                        iterations: iter,
                        attempt,
                    });
                }
                break;
            }
            if iter == params.max_iters {
                break;
            }
            let tip = Point3::from(iso.translation.vector);
            let mut jac = DMatrix::<f64>::zeros(6, n);
            for (i, (origin, axis)) in frames.iter().enumerate() {
                let lin = axis.cross(&(tip - origin));
                for k in 0..3 {
                    jac[(k, i)] = lin[k];
                    jac[(k + 3, i)] = w * axis[k];
                }
            }
            let err = DVector::from_iterator(6, ep.iter().copied().chain(er.iter().map(|v| w * v)));
            let jt = jac.transpose();
            let mut a = &jt * &jac;
            for i in 0..n {
                a[(i, i)] += lambda;
            }
            let g = &jt * err;
            let Some(chol) = a.cholesky() else {
                lambda *= 2.0;
                continue;
            };
            let mut q_new = &q + chol.solve(&g);
            robot.clamp(&mut q_new);
            let (iso_new, frames_new) = robot.fk_full(ch, q_new.as_slice());
            let (ep_new, er_new) = pose_error(&iso_new, &target_pos, &target_rot);
            let cost_new = weighted_cost(&ep_new, &er_new);
            if cost_new < cost {
                q = q_new;
                iso = iso_new;
                frames = frames_new;
                ep = ep_new;
                er = er_new;
                cost = cost_new;
                lambda = (lambda * 0.5).max(1e-9);
            } else {
                lambda = (lambda * 2.0).min(1e6);
            }
        }
        if ep.norm() < best.0 {
            best = (ep.norm(), er.norm());
        }
    }
    IkOutcome::Failed { best_position_error: best.0, best_orientation_error: best.1 }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_link() -> RobotModel {
        // planar chain in the x-y plane: two unit links about z, tool at the tip
        RobotModel {
            mount: [0.0, 0.0, 0.0],
            joints: vec![
                JointSpec { offset: [0.0, 0.0, 0.0], axis: [0.0, 0.0, 1.0], lower: -3.1, upper: 3.1 },
                JointSpec { offset: [1.0, 0.0, 0.0], axis: [0.0, 0.0, 1.0], lower: -3.1, upper: 3.1 },
            ],
            tool_offset: [1.0, 0.0, 0.0],
            tool_rpy: [0.0, 0.0, 0.0],
            reach_min: 0.0,
            reach_max: 2.0,
            chassis_radius: 0.1,
            stow: Vec::new(),
        }
    }

    fn position_only() -> IkParams {
        IkParams { orientation_weight: 0.0, tol_rot: f64::INFINITY, ..IkParams::default() }
    }

    #[test]
    fn two_link_matches_closed_form() {
        let robot = two_link();
        let ch = ChassisPose::new(0.0, 0.0, 0.0);
        // target (1,1): elbow-down (0, pi/2) or elbow-up (pi/2, -pi/2)
        let target = EEPose::new(1.0, 1.0, 0.0, 0.0, 0.0, 0.0);
        let out = solve_ik(&ch, &target, &robot, &position_only());
        let sol = out.solution().expect("two-link target is reachable");
        let q = &sol.joints;
        let down = (q[0]).abs() < 1e-2 && (q[1] - FRAC_PI_2).abs() < 1e-2;
        let up = (q[0] - FRAC_PI_2).abs() < 1e-2 && (q[1] + FRAC_PI_2).abs() < 1e-2;
        assert!(down || up, "unexpected joints {q:?}");
        let tip = robot.forward_kinematics(&ch, q).translation.vector;
        assert!((tip - Vector3::new(1.0, 1.0, 0.0)).norm() < 1e-3);
    }

    #[test]
    fn flange_from_camera_matches_fk() {
        let robot = RobotModel::default();
        let ch = ChassisPose::new(0.3, -0.2, 0.7);
        let q = [0.3, -0.4, 0.2, 0.9, -0.1, 0.5, 0.2];
        let ee = robot.fk_pose(&ch, &q);
        let (_, frames) = robot.fk_full(&ch, &q);
        let last = frames.last().unwrap().0;
        assert!((robot.flange_position(&ee) - last).norm() < 1e-9);
        assert!((robot.shoulder_position(&ch) - frames[0].0).norm() < 1e-12);
        assert!((robot.link_reach() - 0.8).abs() < 1e-12);
        assert!((last - frames[0].0).norm() <= robot.link_reach() + 1e-9);
    }

    #[test]
    fn out_of_reach_fails() {
        let robot = two_link();
        let ch = ChassisPose::new(0.0, 0.0, 0.0);
        let target = EEPose::new(2.5, 0.3, 0.0, 0.0, 0.0, 0.0);
        assert!(!solve_ik(&ch, &target, &robot, &position_only()).is_solved());
    }

    #[test]
    fn default_arm_round_trip() {
        let robot = RobotModel::default();
        robot.validate().unwrap();
        let ch = ChassisPose::new(1.0, -2.0, 0.7);
        let q = [0.3, 0.8, -0.4, 1.2, 0.2, -0.6, 0.5];
        let target = robot.fk_pose(&ch, &q);
        let out = solve_ik(&ch, &target, &robot, &IkParams::default());
        let sol = out.solution().expect("FK target must be solvable");
        assert!(robot.within_limits(&sol.joints));
        let reached = robot.fk_pose(&ch, &sol.joints);
        assert!((reached.position() - target.position()).norm() < 1e-3);
    }

    #[test]
    fn camera_points_along_last_link() {
        let robot = RobotModel::default();
        let ch = ChassisPose::new(0.0, 0.0, 0.0);
        let pose = robot.fk_pose(&ch, &[0.0; 7]);
        // straight up from the mount: camera at mount + 0.9 m, looking up
        assert!((pose.z - 1.7).abs() < 1e-12);
        assert!((pose.view_direction() - Vector3::z()).norm() < 1e-9);
    }

    #[test]
    fn validation() {
        let mut r = two_link();
        r.joints.truncate(1);
        assert!(r.validate().is_err());
        let mut r = two_link();
        r.reach_min = 3.0;
        assert!(r.validate().is_err());
    }
}
