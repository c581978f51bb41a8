use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use super::camera::{ChassisPose, EEPose};

/// Which halves of a plan get reordered before execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortingMode {
    None,
    Ee,
    Ch,
    Both,
}

impl SortingMode {
    pub const ALL: [SortingMode; 4] = [SortingMode::None, SortingMode::Ee, SortingMode::Ch, SortingMode::Both];

    pub fn sorts_ee(self) -> bool {
        matches!(self, SortingMode::Ee | SortingMode::Both)
    }

    pub fn sorts_ch(self) -> bool {
        matches!(self, SortingMode::Ch | SortingMode::Both)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SortingMode::None => "none",
            SortingMode::Ee => "ee",
            SortingMode::Ch => "ch",
            SortingMode::Both => "both",
        }
    }
}

impl fmt::Display for SortingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SortingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(SortingMode::None),
            "ee" => Ok(SortingMode::Ee),
            "ch" => Ok(SortingMode::Ch),
            "both" => Ok(SortingMode::Both),
            other => Err(format!("unknown sorting mode `{other}` (none|ee|ch|both)")),
        }
    }
}

pub fn ee_sort_key(p: &EEPose) -> [f64; 6] {
    [p.z, p.y, p.x, p.psi, p.theta, p.phi]
}

pub fn compare_ee(a: &EEPose, b: &EEPose) -> Ordering {
    let (ka, kb) = (ee_sort_key(a), ee_sort_key(b));
    ka.iter()
        .zip(&kb)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Ascending by (z, y, x, yaw, pitch, roll); equal keys keep input order.
pub fn sort_ee_lexicographic(poses: &[EEPose]) -> Vec<EEPose> {
    let mut out = poses.to_vec();
    out.sort_by(compare_ee);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarOrder {
    pub poses: Vec<ChassisPose>,
    /// Number of trailing poses that coincide with the centroid (no defined angle).
    pub coincident: usize,
}

pub fn polar_angle(p: &ChassisPose, centroid: &Point2<f64>) -> f64 {
    (p.y - centroid.y).atan2(p.x - centroid.x)
}

/// Clockwise sweep around the centroid: descending polar angle (ties by radius), rotated
/// so the pose nearest `start_hint` comes first. Poses at the centroid go last.
pub fn sort_ch_polar(poses: &[ChassisPose], centroid: &Point2<f64>, start_hint: &ChassisPose) -> PolarOrder {
    let radius = |p: &ChassisPose| (p.position() - centroid).norm();
    let (mut ring, at_center): (Vec<ChassisPose>, Vec<ChassisPose>) =
        poses.iter().copied().partition(|p| radius(p) > 1e-9);
    ring.sort_by(|a, b| {
        polar_angle(b, centroid)
            .total_cmp(&polar_angle(a, centroid))
            .then_with(|| radius(a).total_cmp(&radius(b)))
    });
    if let Some(first) = ring
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.distance(start_hint).total_cmp(&b.distance(start_hint)))
        .map(|(i, _)| i)
    {
        ring.rotate_left(first);
    }
    let coincident = at_center.len();
    ring.extend(at_center);
    PolarOrder { poses: ring, coincident }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ee(x: f64, y: f64, z: f64) -> EEPose {
        EEPose::new(x, y, z, 0.0, 0.0, 0.0)
    }

    #[test]
    fn lexicographic_examples() {
        let s = sort_ee_lexicographic(&[ee(0., 0., 1.), ee(0., 0., 0.)]);
        assert_eq!(s[0].z, 0.0);
        let s = sort_ee_lexicographic(&[ee(0., 2., 1.), ee(5., 1., 1.)]);
        assert_eq!(s[0].y, 1.0);
    }

    #[test]
    fn polar_compass_example() {
        let c = Point2::new(0.0, 0.0);
        let poses = [
            ChassisPose::new(1., 0., 0.),
            ChassisPose::new(0., 1., 0.),
            ChassisPose::new(-1., 0., 0.),
            ChassisPose::new(0., -1., 0.),
        ];
        let hint = ChassisPose::new(1.1, 0.05, 0.0);
        let order = sort_ch_polar(&poses, &c, &hint);
        let xy: Vec<(f64, f64)> = order.poses.iter().map(|p| (p.x, p.y)).collect();
        assert_eq!(xy, vec![(1., 0.), (0., -1.), (-1., 0.), (0., 1.)]);
        assert_eq!(order.coincident, 0);
    }

    #[test]
    fn polar_single_and_coincident() {
        let c = Point2::new(0.0, 0.0);
        let one = [ChassisPose::new(2., 2., 0.)];
        assert_eq!(sort_ch_polar(&one, &c, &one[0]).poses, one.to_vec());
        let with_center = [ChassisPose::new(0., 0., 0.), ChassisPose::new(1., 0., 0.)];
        let o = sort_ch_polar(&with_center, &c, &with_center[0]);
        assert_eq!(o.coincident, 1);
        assert_eq!((o.poses[1].x, o.poses[1].y), (0.0, 0.0));
    }

    #[test]
    fn sorting_mode_parse() {
        for m in SortingMode::ALL {
            assert_eq!(m.as_str().parse::<SortingMode>().unwrap(), m);
        }
        assert!("all".parse::<SortingMode>().is_err());
    }
}
