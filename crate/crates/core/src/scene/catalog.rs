//! Parametric carrier shapes and per-room furnishing lists used by the generator and
//! the bundled fixtures.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::{Aabb, Carrier};
use crate::error::SceneError;
use crate::planner::normalize_angle;

const CATALOG_JSON: &str = include_str!("../../data/catalog.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    /// Filled box.
    Solid,
    /// Slab on four corner legs.
    Table,
    /// Sealed hollow shell; openable, with an interior region.
    Cabinet,
    /// Hollow shell without a lid (bathtub, bin).
    OpenBox,
    /// Back, sides and horizontal boards, open at the front.
    Shelf,
    Sofa,
    Bed,
    Chair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarrierTemplate {
    pub kind: TemplateKind,
    /// Width (x), depth (y), height (z) before rotation; the front is the -y face.
    pub size: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomFurnishing {
    pub carriers: Vec<String>,
    pub decor: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub version: u32,
    pub templates: BTreeMap<String, CarrierTemplate>,
    pub rooms: BTreeMap<String, RoomFurnishing>,
}

fn snap(v: f64, res: f64) -> f64 {
    ((v / res).round() * res * 1e6).round() / 1e6
}

impl Catalog {
    pub fn shipped() -> Self {
        serde_json::from_str(CATALOG_JSON).expect("bundled catalog parses")
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        serde_json::from_str(text)
            .map_err(|e| SceneError::Parse { line: e.line(), column: e.column(), message: e.to_string() })
    }

    /// Footprint (x, y extent) after `quarter_turns` counter-clockwise rotations.
    pub fn footprint(&self, label: &str, quarter_turns: u8) -> Option<[f64; 2]> {
        let t = self.templates.get(label)?;
        Some(if quarter_turns % 2 == 0 { [t.size[0], t.size[1]] } else { [t.size[1], t.size[0]] })
    }

    /// Instantiates `label` with its rotated bounding box's minimum corner at `corner`.
    pub fn instantiate(
        &self,
        id: &str,
        label: &str,
        corner: [f64; 2],
        quarter_turns: u8,
        res: f64,
    ) -> Option<Carrier> {
        let t = self.templates.get(label)?;
        Some(t.instantiate(id, label, corner, quarter_turns, res))
    }
}

impl CarrierTemplate {
    fn local_boxes(&self, res: f64) -> (Vec<Aabb>, Option<Aabb>) {
        let [w, d, h] = self.size.map(|v| snap(v, res));
        let t = snap(res * (0.05 / res - 1e-9).ceil(), res);
        let b = |x0: f64, y0: f64, z0: f64, x1: f64, y1: f64, z1: f64| Aabb::new([x0, y0, z0], [x1, y1, z1]);
        let legs = |top: f64| {
            vec![
                b(0.0, 0.0, 0.0, t, t, top),
                b(w - t, 0.0, 0.0, w, t, top),
                b(0.0, d - t, 0.0, t, d, top),
                b(w - t, d - t, 0.0, w, d, top),
            ]
        };
        match self.kind {
            TemplateKind::Solid => (vec![b(0.0, 0.0, 0.0, w, d, h)], None),
            TemplateKind::Table => {
                let mut v = vec![b(0.0, 0.0, h - t, w, d, h)];
                v.extend(legs(h - t));
                (v, None)
            }
            TemplateKind::Cabinet | TemplateKind::OpenBox => {
                let lidded = self.kind == TemplateKind::Cabinet;
                let wall_top = if lidded { h - t } else { h };
                let mut v = vec![
                    b(0.0, 0.0, 0.0, w, d, t),
                    b(0.0, 0.0, t, t, d, wall_top),
                    b(w - t, 0.0, t, w, d, wall_top),
                    b(t, 0.0, t, w - t, t, wall_top),
                    b(t, d - t, t, w - t, d, wall_top),
                ];
                if lidded {
                    v.push(b(0.0, 0.0, h - t, w, d, h));
                    (v, Some(b(t, t, t, w - t, d - t, h - t)))
                } else {
                    (v, None)
                }
            }
            TemplateKind::Shelf => {
                let mut v = vec![b(0.0, d - t, 0.0, w, d, h), b(0.0, 0.0, 0.0, t, d - t, h), b(w - t, 0.0, 0.0, w, d - t, h)];
                let spacing = snap(0.35, res).max(2.0 * t);
                let mut z = 0.0;
                while z < h - t - 1e-9 {
                    v.push(b(t, 0.0, z, w - t, d - t, z + t));
                    z = snap(z + spacing, res);
                }
                v.push(b(t, 0.0, h - t, w - t, d - t, h));
                (v, None)
            }
            TemplateKind::Sofa => {
                let seat = snap(h * 0.5, res);
                let back = snap(0.2, res).min(d - t);
                (vec![b(0.0, 0.0, 0.0, w, d, seat), b(0.0, d - back, seat, w, d, h)], None)
            }
            TemplateKind::Bed => (vec![b(0.0, 0.0, 0.0, w, d, h), b(0.0, d - t, h, w, d, snap(h + 0.4, res))], None),
            TemplateKind::Chair => {
                let seat = snap(0.45f64.min(h - t), res);
                let mut v = vec![b(0.0, 0.0, seat - t, w, d, seat), b(0.0, d - t, seat, w, d, h)];
                v.extend(legs(seat - t));
                (v, None)
            }
        }
    }

    pub fn instantiate(&self, id: &str, label: &str, corner: [f64; 2], quarter_turns: u8, res: f64) -> Carrier {
        let k = quarter_turns % 4;
        let [w, d, _] = self.size.map(|v| snap(v, res));
        let rot = |x: f64, y: f64| -> (f64, f64) {
            match k {
                0 => (x, y),
                1 => (d - y, x),
                2 => (w - x, d - y),
                _ => (y, w - x),
            }
        };
        let place = |bx: &Aabb| -> Aabb {
            let (ax, ay) = rot(bx.min[0], bx.min[1]);
            let (cx, cy) = rot(bx.max[0], bx.max[1]);
            Aabb::new(
                [snap(corner[0] + ax.min(cx), res), snap(corner[1] + ay.min(cy), res), bx.min[2]],
                [snap(corner[0] + ax.max(cx), res), snap(corner[1] + ay.max(cy), res), bx.max[2]],
            )
        };
        let (local, interior) = self.local_boxes(res);
        let boxes: Vec<Aabb> = local.iter().map(place).collect();
        let bounds = Aabb::union(&boxes).expect("templates have boxes");
        let t = snap(res * (0.05 / res - 1e-9).ceil(), res);
        Carrier {
            id: id.to_string(),
            label: label.to_string(),
            pose: [
                snap((bounds.min[0] + bounds.max[0]) / 2.0, res / 2.0),
                snap((bounds.min[1] + bounds.max[1]) / 2.0, res / 2.0),
                normalize_angle(-FRAC_PI_2 + k as f64 * FRAC_PI_2),
            ],
            openable: interior.is_some(),
            interior: interior.as_ref().map(place),
            z0: t / 2.0,
            boxes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{cavity_cells, voxelize, CarrierFeatures};

    #[test]
    fn shipped_catalog_covers_room_lists() {
        let c = Catalog::shipped();
        for (room, f) in &c.rooms {
            for label in &f.carriers {
                assert!(c.templates.contains_key(label), "{room}: {label}");
            }
        }
    }

    #[test]
    fn cavities_match_annotations_for_every_template_and_rotation() {
        let c = Catalog::shipped();
        for label in c.templates.keys() {
            for k in 0..4 {
                let car = c.instantiate("x", label, [1.0, 2.0], k, 0.05).unwrap();
                let grid = voxelize(&car.point_cloud(0.05), 0.05).unwrap();
                let cavity = cavity_cells(&grid);
                match &car.interior {
                    Some(int) => {
                        let expected: std::collections::BTreeSet<_> = int.cells(0.05).collect();
                        assert_eq!(cavity, expected, "{label} k={k}");
                    }
                    None => assert!(cavity.is_empty(), "{label} k={k}"),
                }
                let b = car.bounds().unwrap();
                assert!((b.min[0] - 1.0).abs() < 1e-9 && (b.min[1] - 2.0).abs() < 1e-9, "{label} k={k}");
                assert!(CarrierFeatures::extract(&car.point_cloud(0.05), 0.05, car.z0).is_ok());
            }
        }
    }

    #[test]
    fn rotation_swaps_footprint_and_turns_front() {
        let c = Catalog::shipped();
        let a = c.instantiate("a", "sofa", [0.0, 0.0], 0, 0.05).unwrap();
        let b = c.instantiate("b", "sofa", [0.0, 0.0], 1, 0.05).unwrap();
        let (ba, bb) = (a.bounds().unwrap(), b.bounds().unwrap());
        assert!((ba.max[0] - 2.0).abs() < 1e-9 && (bb.max[1] - 2.0).abs() < 1e-9);
        assert!((a.pose[2] + FRAC_PI_2).abs() < 1e-12);
        assert!(b.pose[2].abs() < 1e-12);
        assert_eq!(a.point_cloud(0.05).len(), b.point_cloud(0.05).len());
    }
}
