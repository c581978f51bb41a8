use nalgebra::Point3;

use super::{Cell, Occupancy};

// Crossing parameters closer than this (in segment-parameter units) are a simultaneous
// crossing: the segment passes through an edge or corner and steps diagonally.
const TIE_EPS: f64 = 1e-9;

/// Cells whose interior the segment `a -> b` passes through, in traversal order,
/// from the cell of `a` to the cell of `b` (3D DDA).
pub fn segment_cells(frame: super::GridFrame, a: &Point3<f64>, b: &Point3<f64>) -> Vec<Cell> {
    SegmentCells::new(frame, a, b).collect()
}

/// Lazy form of [`segment_cells`].
pub struct SegmentCells {
    cell: Cell,
    end: Cell,
    step: [i32; 3],
    t_max: [f64; 3],
    t_delta: [f64; 3],
    left: u32,
    started: bool,
    done: bool,
}

impl SegmentCells {
    pub fn new(frame: super::GridFrame, a: &Point3<f64>, b: &Point3<f64>) -> Self {
        let r = frame.resolution;
        let pa = (a - frame.origin) / r;
        let pb = (b - frame.origin) / r;
        let start = frame.cell_of(a);
        let end = frame.cell_of(b);
        let d = pb - pa;
        let mut step = [0i32; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for k in 0..3 {
            if d[k] > 0.0 {
                step[k] = 1;
                t_max[k] = (start[k] as f64 + 1.0 - pa[k]) / d[k];
                t_delta[k] = 1.0 / d[k];
            } else if d[k] < 0.0 {
                step[k] = -1;
                t_max[k] = (pa[k] - start[k] as f64) / -d[k];
                t_delta[k] = -1.0 / d[k];
            }
        }
        let left = (start[0] - end[0]).unsigned_abs()
            + (start[1] - end[1]).unsigned_abs()
            + (start[2] - end[2]).unsigned_abs()
            + 3;
        Self { cell: start, end, step, t_max, t_delta, left, started: false, done: false }
    }
}

impl Iterator for SegmentCells {
    type Item = Cell;

    fn next(&mut self) -> Option<Cell> {
        if !self.started {
            self.started = true;
            return Some(self.cell);
        }
        if self.done || self.left == 0 || self.cell == self.end {
            return None;
        }
        self.left -= 1;
        let t_min = self.t_max[0].min(self.t_max[1]).min(self.t_max[2]);
        if t_min > 1.0 + TIE_EPS {
            self.done = true;
            return None;
        }
        for k in 0..3 {
            if self.t_max[k] <= t_min + TIE_EPS {
                self.cell[k] += self.step[k];
                self.t_max[k] += self.t_delta[k];
            }
        }
        Some(self.cell)
    }
}

/// True when no occupied cell lies strictly between the endpoint cells.
pub fn segment_clear<O: Occupancy + ?Sized>(occ: &O, a: &Point3<f64>, b: &Point3<f64>) -> bool {
    let frame = occ.frame();
    let start = frame.cell_of(a);
    let end = frame.cell_of(b);
    SegmentCells::new(frame, a, b).filter(|c| *c != start && *c != end).all(|c| !occ.is_occupied(c))
}

#[cfg(test)]
mod tests {
    use super::super::{voxelize, GridFrame};
    use super::*;

    #[test]
    fn straight_line_cells() {
        let f = GridFrame::at_origin(1.0).unwrap();
        let cells = segment_cells(f, &Point3::new(0.5, 0.5, 0.5), &Point3::new(3.5, 0.5, 0.5));
        assert_eq!(cells, vec![[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]]);
    }

    #[test]
    fn exact_diagonal_skips_side_cells() {
        let f = GridFrame::at_origin(1.0).unwrap();
        let cells = segment_cells(f, &Point3::new(0.5, 0.5, 0.5), &Point3::new(2.5, 2.5, 0.5));
        assert_eq!(cells, vec![[0, 0, 0], [1, 1, 0], [2, 2, 0]]);
    }

    #[test]
    fn wall_blocks_and_endpoints_excluded() {
        let wall: Vec<_> = (0..5)
            .flat_map(|y| (0..5).map(move |z| Point3::new(0.25, y as f64 * 0.1 + 0.05, z as f64 * 0.1 + 0.05)))
            .collect();
        let g = voxelize(&wall, 0.1).unwrap();
        let a = Point3::new(0.75, 0.25, 0.25);
        assert!(!segment_clear(&g, &a, &Point3::new(-0.35, 0.25, 0.25)));
        // endpoint inside the wall cell is not an obstruction
        assert!(segment_clear(&g, &a, &Point3::new(0.25, 0.25, 0.25)));
    }
}
