use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_8, PI};

use nalgebra::{Point2, Point3, Vector2};
use serde::{Deserialize, Serialize};

use super::camera::{normalize_angle, ChassisPose, EEPose};
use super::robot::RobotModel;
use crate::error::PlanError;
use crate::geometry::{Cell2, Feature, FeatureMap, Footprint2D, GridFrame};

const DEDUP_TOL: f64 = 1e-6;
/// Downward tilt used when peeking under a carrier.
pub const BOTTOM_PITCH: f64 = -FRAC_PI_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EeCandidateParams {
    pub standoff: f64,
    pub angular_step: f64,
    pub cap: usize,
}

impl Default for EeCandidateParams {
    fn default() -> Self {
        Self { standoff: 0.4, angular_step: PI / 4.0, cap: 256 }
    }
}

/// Evenly strided subsample keeping at most `cap` indices.
fn subsample(n: usize, cap: usize) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    (0..cap).map(|i| i * n / cap).collect()
}

struct Bounds2 {
    lo: Point2<f64>,
    hi: Point2<f64>,
}

impl Bounds2 {
    fn of(points: impl Iterator<Item = Point2<f64>>) -> Option<Self> {
        let mut b: Option<Bounds2> = None;
        for p in points {
            match &mut b {
                None => b = Some(Bounds2 { lo: p, hi: p }),
                Some(b) => {
                    b.lo = Point2::new(b.lo.x.min(p.x), b.lo.y.min(p.y));
                    b.hi = Point2::new(b.hi.x.max(p.x), b.hi.y.max(p.y));
                }
            }
        }
        b
    }

    /// Distance from `p` (inside or on the box) along unit `dir` to the box edge.
    fn exit_distance(&self, p: &Point2<f64>, dir: &Vector2<f64>) -> f64 {
        let mut t = f64::INFINITY;
        for k in 0..2 {
            if dir[k] > 1e-12 {
                t = t.min((self.hi[k] - p[k]) / dir[k]);
            } else if dir[k] < -1e-12 {
                t = t.min((self.lo[k] - p[k]) / dir[k]);
            }
        }
        if t.is_finite() {
            t.max(0.0)
        } else {
            0.0
        }
    }
}

fn snap(angle: f64, step: f64) -> f64 {
    normalize_angle((angle / step).round() * step)
}

/// Camera candidates for one feature map.
///
/// Top points are viewed straight down from `standoff` above, and again obliquely from
/// `standoff` above the bounding-box edge along the point's outward direction. Sides and inside points are
/// viewed horizontally along the point-to-centroid direction (yaw snapped to
/// `angular_step`) from `standoff` outside the map's bounding box. Bottom points are
/// viewed the same way from outside, tilted down by [`BOTTOM_PITCH`] so the optical axis
/// meets the bottom plane at the box edge.
pub fn generate_ee_candidates(fm: &FeatureMap, params: &EeCandidateParams) -> Result<Vec<EEPose>, PlanError> {
    if fm.is_empty() {
        return Err(PlanError::EmptyFeatureMap);
    }
    let xy = |p: &Point3<f64>| Point2::new(p.x, p.y);
    let n = fm.points.len() as f64;
    let (sx, sy) = fm.points.iter().fold((0.0, 0.0), |(a, b), p| (a + p.x, b + p.y));
    let center = Point2::new(sx / n, sy / n);
    let bounds = Bounds2::of(fm.points.iter().map(xy)).expect("non-empty");
    let step = if params.angular_step > 0.0 { params.angular_step } else { PI / 4.0 };

    let mut out: Vec<EEPose> = Vec::new();
    let mut push = |pose: EEPose| {
        if !out.iter().any(|o| o.max_abs_diff(&pose) < DEDUP_TOL) {
            out.push(pose);
        }
    };
    for i in subsample(fm.points.len(), params.cap.max(1)) {
        let p = fm.points[i];
        let out_dir = xy(&p) - center;
        let raw = if out_dir.norm() < 1e-9 { 0.0 } else { out_dir.y.atan2(out_dir.x) };
        let yaw_out = snap(raw, step);
        let dir = Vector2::new(yaw_out.cos(), yaw_out.sin());
        let exit = bounds.exit_distance(&xy(&p), &dir);
        match fm.feature {
            Feature::Top => {
                push(EEPose::new(p.x, p.y, p.z + params.standoff, 0.0, -FRAC_PI_2, 0.0));
                if exit > DEDUP_TOL {
                    let cam = xy(&p) + dir * exit;
                    let pitch = -params.standoff.atan2(exit);
                    push(EEPose::new(cam.x, cam.y, p.z + params.standoff, 0.0, pitch, yaw_out + PI));
                }
            }
            Feature::Sides | Feature::Inside | Feature::Bottom => {
                let dist = exit + params.standoff;
                let cam = xy(&p) + dir * dist;
                let (z, pitch) = if fm.feature == Feature::Bottom {
                    (p.z + dist * (-BOTTOM_PITCH).tan(), BOTTOM_PITCH)
                } else {
                    (p.z, 0.0)
                };
                push(EEPose::new(cam.x, cam.y, z, 0.0, pitch, yaw_out + PI));
            }
        }
    }
    Ok(out)
}

/// Axis-aligned cells plus a room outline for chassis collision checks.
#[derive(Debug, Clone)]
pub struct RoomOccupancy {
    pub frame: GridFrame,
    pub outline: Vec<Point2<f64>>,
    pub blocked: BTreeSet<Cell2>,
}

pub fn point_in_polygon(p: &Point2<f64>, poly: &[Point2<f64>]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + n - 1) % n]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn segment_distance(p: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm()
}

impl RoomOccupancy {
    /// Distance from `p` to the nearest point of cell `c`'s square.
    pub fn cell_distance(&self, p: &Point2<f64>, c: Cell2) -> f64 {
        let r = self.frame.resolution;
        let lo = Point2::new(self.frame.origin.x + c[0] as f64 * r, self.frame.origin.y + c[1] as f64 * r);
        let dx = (lo.x - p.x).max(0.0).max(p.x - (lo.x + r));
        let dy = (lo.y - p.y).max(0.0).max(p.y - (lo.y + r));
        (dx * dx + dy * dy).sqrt()
    }

    /// True when a disc of `radius` at `p` is inside the outline and touches no blocked cell.
    pub fn disc_free(&self, p: &Point2<f64>, radius: f64) -> bool {
        if !self.outline.is_empty() {
            if !point_in_polygon(p, &self.outline) {
                return false;
            }
            let n = self.outline.len();
            for i in 0..n {
                if segment_distance(p, &self.outline[i], &self.outline[(i + 1) % n]) < radius {
                    return false;
                }
            }
        }
        let lo = self.frame.column_of(p.x - radius, p.y - radius);
        let hi = self.frame.column_of(p.x + radius, p.y + radius);
        for x in lo[0] - 1..=hi[0] + 1 {
            for y in lo[1] - 1..=hi[1] + 1 {
                if self.blocked.contains(&[x, y]) && self.cell_distance(p, [x, y]) < radius {
                    return false;
                }
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChCandidateParams {
    pub radial_step: f64,
    pub angular_step: f64,
    /// Gap kept between the chassis disc and the carrier's bounding box.
    pub clearance: f64,
}

impl Default for ChCandidateParams {
    fn default() -> Self {
        Self { radial_step: 0.15, angular_step: PI / 8.0, clearance: 0.05 }
    }
}

/// Ring samples around the carrier footprint facing its centroid. Rings sit at
/// distances from `chassis_radius + clearance` up to `reach_max` beyond the footprint's
/// bounding box; colliding poses are removed. Order: ring by ring, counter-clockwise
/// from +x within a ring.
pub fn generate_ch_candidates(
    footprint: &Footprint2D,
    room: &RoomOccupancy,
    robot: &RobotModel,
    params: &ChCandidateParams,
) -> Vec<ChassisPose> {
    if footprint.is_empty() {
        return Vec::new();
    }
    let f = footprint.frame;
    let r = f.resolution;
    let centers: Vec<Point2<f64>> = footprint.cells.iter().map(|c| f.column_center(*c)).collect();
    let n = centers.len() as f64;
    let (sx, sy) = centers.iter().fold((0.0, 0.0), |(a, b), p| (a + p.x, b + p.y));
    let centroid = Point2::new(sx / n, sy / n);
    let half = Vector2::new(r / 2.0, r / 2.0);
    let bounds = Bounds2::of(centers.iter().copied()).expect("non-empty");
    let bounds = Bounds2 { lo: bounds.lo - half, hi: bounds.hi + half };

    let d_min = robot.chassis_radius + params.clearance;
    let d_max = robot.reach_max.max(d_min);
    let radial = if params.radial_step > 0.0 { params.radial_step } else { 0.15 };
    let n_ang = ((2.0 * PI / params.angular_step.max(1e-3)).round() as usize).max(1);

    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let d = d_min + k as f64 * radial;
        if d > d_max + 1e-9 {
            break;
        }
        for a in 0..n_ang {
            let alpha = a as f64 * 2.0 * PI / n_ang as f64;
            let dir = Vector2::new(alpha.cos(), alpha.sin());
            let pos = centroid + dir * (bounds.exit_distance(&centroid, &dir) + d);
            if room.disc_free(&pos, robot.chassis_radius) {
                let face = centroid - pos;
                out.push(ChassisPose::new(pos.x, pos.y, face.y.atan2(face.x)));
            }
        }
        k += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Feature;

    fn fm(feature: Feature, pts: &[[f64; 3]]) -> FeatureMap {
        FeatureMap { feature, points: pts.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect() }
    }

    #[test]
    fn single_top_point() {
        let c = generate_ee_candidates(&fm(Feature::Top, &[[0.5, 0.5, 0.8]]), &EeCandidateParams::default()).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c[0].z - 1.2).abs() < 1e-12);
        assert_eq!((c[0].x, c[0].y), (0.5, 0.5));
        assert!((c[0].theta + FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn oblique_top_views_aim_at_their_point() {
        let map = fm(Feature::Top, &[[0.0, 0.0, 0.8], [1.0, 0.0, 0.8], [0.2, 0.0, 0.8]]);
        let c = generate_ee_candidates(&map, &EeCandidateParams { angular_step: FRAC_PI_2, ..Default::default() }).unwrap();
        // points on the box edge get only the overhead view
        assert_eq!(c.iter().filter(|e| (e.theta + FRAC_PI_2).abs() > 1e-9).count(), 1);
        let o = c.iter().find(|e| (e.theta + FRAC_PI_2).abs() > 1e-9).expect("oblique view");
        // centre x = 0.4, so the point at 0.2 looks out toward -x: camera above x = 0
        assert!(o.x.abs() < 1e-9 && (o.z - 1.2).abs() < 1e-9);
        let target = Point3::new(0.2, 0.0, 0.8);
        let to = (target - o.position()).normalize();
        assert!((o.view_direction() - to).norm() < 1e-9);
    }

    #[test]
    fn empty_map_is_an_error() {
        assert_eq!(
            generate_ee_candidates(&fm(Feature::Sides, &[]), &EeCandidateParams::default()),
            Err(PlanError::EmptyFeatureMap)
        );
    }

    #[test]
    fn deterministic_and_deduplicated() {
        let map = fm(Feature::Sides, &[[0.0, 0.0, 0.1], [1.0, 0.0, 0.1], [1.0, 1.0, 0.1], [0.0, 1.0, 0.1], [0.0, 0.0, 0.1]]);
        let params = EeCandidateParams { standoff: 0.4, angular_step: FRAC_PI_2, cap: 256 };
        let a = generate_ee_candidates(&map, &params).unwrap();
        let b = generate_ee_candidates(&map, &params).unwrap();
        assert_eq!(a, b);
        assert!(a.len() <= 4);
        for (i, x) in a.iter().enumerate() {
            for y in &a[i + 1..] {
                assert!(x.max_abs_diff(y) >= DEDUP_TOL);
            }
        }
    }

    #[test]
    fn sides_candidates_face_the_carrier() {
        let map = fm(Feature::Sides, &[[1.0, 0.5, 0.3], [0.0, 0.5, 0.3], [0.5, 0.5, 0.3]]);
        let c = generate_ee_candidates(&map, &EeCandidateParams { angular_step: FRAC_PI_2, ..Default::default() }).unwrap();
        // the +x point gets a camera at x = 1.4 looking toward -x
        let first = c[0];
        assert!((first.x - 1.4).abs() < 1e-9 && (first.y - 0.5).abs() < 1e-9);
        assert!((first.psi.abs() - PI).abs() < 1e-9);
    }

    #[test]
    fn polygon_and_disc() {
        let f = GridFrame::at_origin(0.1).unwrap();
        let room = RoomOccupancy {
            frame: f,
            outline: vec![Point2::new(0., 0.), Point2::new(4., 0.), Point2::new(4., 4.), Point2::new(0., 4.)],
            blocked: BTreeSet::from([[20, 20]]),
        };
        assert!(room.disc_free(&Point2::new(1.0, 1.0), 0.3));
        assert!(!room.disc_free(&Point2::new(0.2, 1.0), 0.3));
        assert!(!room.disc_free(&Point2::new(2.05, 2.35), 0.3));
        assert!(room.disc_free(&Point2::new(2.05, 2.45), 0.3));
        assert!(!room.disc_free(&Point2::new(5.0, 1.0), 0.3));
    }
}
