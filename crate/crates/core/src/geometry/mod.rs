//! Voxel/grid geometry and carrier feature extraction.
//!
//! A carrier's point cloud is binned into a [`VoxelGrid`]; its 2D projection is the
//! [`Footprint2D`]. From these the four feature maps are built:
//!
//! * `top`: one point per footprint column at the column's maximum height,
//! * `sides`: vertical point columns above the 4-connected footprint boundary,
//! * `bottom`: the footprint at a fixed height `z0`,
//! * `inside`: enclosed empty cells found by a 6-connected exterior flood fill.
//!
//! All emitted points use cell-center x/y so results are exact and deterministic.

mod raycast;

pub use raycast::{segment_cells, segment_clear};

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use nalgebra::{Point2, Point3};
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

pub type Cell = [i32; 3];
pub type Cell2 = [i32; 2];

/// Placement of an integer lattice in world space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridFrame {
    pub origin: Point3<f64>,
    pub resolution: f64,
}

impl GridFrame {
    pub fn new(origin: Point3<f64>, resolution: f64) -> Result<Self, GeometryError> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(GeometryError::NonPositiveResolution(resolution));
        }
        Ok(Self { origin, resolution })
    }

    pub fn at_origin(resolution: f64) -> Result<Self, GeometryError> {
        Self::new(Point3::origin(), resolution)
    }

    /// Floor binning; lower bounds inclusive.
    pub fn cell_of(&self, p: &Point3<f64>) -> Cell {
        let r = self.resolution;
        [
            ((p.x - self.origin.x) / r).floor() as i32,
            ((p.y - self.origin.y) / r).floor() as i32,
            ((p.z - self.origin.z) / r).floor() as i32,
        ]
    }

    pub fn column_of(&self, x: f64, y: f64) -> Cell2 {
        let r = self.resolution;
        [
            ((x - self.origin.x) / r).floor() as i32,
            ((y - self.origin.y) / r).floor() as i32,
        ]
    }

    pub fn cell_center(&self, c: Cell) -> Point3<f64> {
        let r = self.resolution;
        Point3::new(
            self.origin.x + (c[0] as f64 + 0.5) * r,
            self.origin.y + (c[1] as f64 + 0.5) * r,
            self.origin.z + (c[2] as f64 + 0.5) * r,
        )
    }

    pub fn column_center(&self, c: Cell2) -> Point2<f64> {
        let r = self.resolution;
        Point2::new(
            self.origin.x + (c[0] as f64 + 0.5) * r,
            self.origin.y + (c[1] as f64 + 0.5) * r,
        )
    }
}

/// Anything that can answer "is this cell blocked" for line-of-sight queries.
pub trait Occupancy {
    fn frame(&self) -> GridFrame;
    fn is_occupied(&self, cell: Cell) -> bool;
}

/// Sparse occupancy of a single carrier.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub frame: GridFrame,
    pub occupied: BTreeSet<Cell>,
}

impl VoxelGrid {
    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    /// Inclusive min/max cell of the occupied set.
    pub fn bounds(&self) -> Option<(Cell, Cell)> {
        let mut it = self.occupied.iter();
        let first = *it.next()?;
        let (mut lo, mut hi) = (first, first);
        for c in it {
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        Some((lo, hi))
    }

    /// 2D projection of the occupied cells.
    pub fn footprint(&self) -> Footprint2D {
        Footprint2D {
            frame: self.frame,
            cells: self.occupied.iter().map(|c| [c[0], c[1]]).collect(),
        }
    }
}

impl Occupancy for VoxelGrid {
    fn frame(&self) -> GridFrame {
        self.frame
    }

    fn is_occupied(&self, cell: Cell) -> bool {
        self.occupied.contains(&cell)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Footprint2D {
    pub frame: GridFrame,
    pub cells: BTreeSet<Cell2>,
}

impl Footprint2D {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// The closed feature vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Top,
    Bottom,
    Sides,
    Inside,
}

impl Feature {
    pub const ALL: [Feature; 4] = [Feature::Top, Feature::Bottom, Feature::Sides, Feature::Inside];

    /// Position in [`Feature::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Feature::Top => "top",
            Feature::Bottom => "bottom",
            Feature::Sides => "sides",
            Feature::Inside => "inside",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Feature {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "top" => Ok(Feature::Top),
            "bottom" => Ok(Feature::Bottom),
            "sides" => Ok(Feature::Sides),
            "inside" => Ok(Feature::Inside),
            other => Err(GeometryError::UnknownFeature(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub feature: Feature,
    pub points: Vec<Point3<f64>>,
}

impl FeatureMap {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }
}

pub fn voxelize(cloud: &[Point3<f64>], resolution: f64) -> Result<VoxelGrid, GeometryError> {
    let frame = GridFrame::at_origin(resolution)?;
    if cloud.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    let occupied = cloud.iter().map(|p| frame.cell_of(p)).collect();
    Ok(VoxelGrid { frame, occupied })
}

fn column_max(cloud: &[Point3<f64>], frame: &GridFrame) -> BTreeMap<Cell2, f64> {
    let mut max: BTreeMap<Cell2, f64> = BTreeMap::new();
    for p in cloud {
        let col = frame.column_of(p.x, p.y);
        max.entry(col)
            .and_modify(|z| {
                if p.z > *z {
                    *z = p.z
                }
            })
            .or_insert(p.z);
    }
    max
}

/// Highest point of every footprint column.
pub fn extract_top(cloud: &[Point3<f64>], footprint: &Footprint2D) -> Result<FeatureMap, GeometryError> {
    let max = column_max(cloud, &footprint.frame);
    let mut points = Vec::with_capacity(footprint.len());
    for cell in &footprint.cells {
        let z = *max.get(cell).ok_or(GeometryError::EmptyColumn(*cell))?;
        let c = footprint.frame.column_center(*cell);
        points.push(Point3::new(c.x, c.y, z));
    }
    Ok(FeatureMap { feature: Feature::Top, points })
}

/// Occupied cells with at least one unoccupied 4-neighbour.
pub fn footprint_boundary(footprint: &Footprint2D) -> BTreeSet<Cell2> {
    footprint
        .cells
        .iter()
        .filter(|c| {
            [[1, 0], [-1, 0], [0, 1], [0, -1]]
                .iter()
                .any(|d| !footprint.cells.contains(&[c[0] + d[0], c[1] + d[1]]))
        })
        .copied()
        .collect()
}

/// Heights `0, r, 2r, ...` up to and including `top`.
pub(crate) fn column_heights(top: f64, resolution: f64) -> Vec<f64> {
    let mut zs = Vec::new();
    let eps = resolution * 1e-9;
    let mut k = 0u32;
    loop {
        let z = k as f64 * resolution;
        if z < top - eps {
            zs.push(z);
            k += 1;
        } else {
            break;
        }
    }
    zs.push(top.max(0.0));
    zs
}

/// Vertical sample columns above each boundary cell, from the floor to the column max.
pub fn extract_sides(
    cloud: &[Point3<f64>],
    boundary: &BTreeSet<Cell2>,
    frame: &GridFrame,
) -> Result<FeatureMap, GeometryError> {
    let max = column_max(cloud, frame);
    let mut points = Vec::new();
    for cell in boundary {
        let top = *max.get(cell).ok_or(GeometryError::EmptyColumn(*cell))?;
        let c = frame.column_center(*cell);
        for z in column_heights(top, frame.resolution) {
            points.push(Point3::new(c.x, c.y, z));
        }
    }
    Ok(FeatureMap { feature: Feature::Sides, points })
}

pub fn extract_bottom(footprint: &Footprint2D, z0: f64) -> Result<FeatureMap, GeometryError> {
    if !(z0 >= 0.0) {
        return Err(GeometryError::NegativeHeight(z0));
    }
    if footprint.is_empty() {
        return Err(GeometryError::EmptyFootprint);
    }
    let points = footprint
        .cells
        .iter()
        .map(|c| {
            let p = footprint.frame.column_center(*c);
            Point3::new(p.x, p.y, z0)
        })
        .collect();
    Ok(FeatureMap { feature: Feature::Bottom, points })
}

/// Empty cells of the carrier's bounding box that the exterior cannot reach.
pub fn cavity_cells(grid: &VoxelGrid) -> BTreeSet<Cell> {
    let Some((lo, hi)) = grid.bounds() else {
        return BTreeSet::new();
    };
    // pad by one layer so the exterior is a single connected shell
    let lo = [lo[0] - 1, lo[1] - 1, lo[2] - 1];
    let hi = [hi[0] + 1, hi[1] + 1, hi[2] + 1];
    let dims = [
        (hi[0] - lo[0] + 1) as usize,
        (hi[1] - lo[1] + 1) as usize,
        (hi[2] - lo[2] + 1) as usize,
    ];
    let index = |c: Cell| -> usize {
        (c[0] - lo[0]) as usize + dims[0] * ((c[1] - lo[1]) as usize + dims[1] * (c[2] - lo[2]) as usize)
    };
    let mut reached = vec![false; dims[0] * dims[1] * dims[2]];
    let mut queue = VecDeque::from([lo]);
    reached[index(lo)] = true;
    const NEIGHBOURS: [Cell; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];
    while let Some(c) = queue.pop_front() {
        for d in NEIGHBOURS {
            let n = [c[0] + d[0], c[1] + d[1], c[2] + d[2]];
            if (0..3).any(|a| n[a] < lo[a] || n[a] > hi[a]) {
                continue;
            }
            let i = index(n);
            if !reached[i] && !grid.occupied.contains(&n) {
                reached[i] = true;
                queue.push_back(n);
            }
        }
    }
    let mut cavity = BTreeSet::new();
    for z in lo[2] + 1..hi[2] {
        for y in lo[1] + 1..hi[1] {
            for x in lo[0] + 1..hi[0] {
                let c = [x, y, z];
                if !reached[index(c)] && !grid.occupied.contains(&c) {
                    cavity.insert(c);
                }
            }
        }
    }
    cavity
}

/// Centers of enclosed cavity cells; empty when the carrier has no sealed interior.
pub fn extract_inside(grid: &VoxelGrid) -> FeatureMap {
    let points = cavity_cells(grid)
        .into_iter()
        .map(|c| grid.frame.cell_center(c))
        .collect();
    FeatureMap { feature: Feature::Inside, points }
}

/// Mean (x, y) of the cloud.
pub fn centroid(cloud: &[Point3<f64>]) -> Result<Point2<f64>, GeometryError> {
    if cloud.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    let n = cloud.len() as f64;
    let (sx, sy) = cloud.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Ok(Point2::new(sx / n, sy / n))
}

/// All four feature maps of one carrier.
#[derive(Debug, Clone)]
pub struct CarrierFeatures {
    pub grid: VoxelGrid,
    pub footprint: Footprint2D,
    pub top: FeatureMap,
    pub sides: FeatureMap,
    pub bottom: FeatureMap,
    pub inside: FeatureMap,
}

impl CarrierFeatures {
    pub fn extract(cloud: &[Point3<f64>], resolution: f64, z0: f64) -> Result<Self, GeometryError> {
        let grid = voxelize(cloud, resolution)?;
        let footprint = grid.footprint();
        let top = extract_top(cloud, &footprint)?;
        let boundary = footprint_boundary(&footprint);
        let sides = extract_sides(cloud, &boundary, &grid.frame)?;
        let bottom = extract_bottom(&footprint, z0)?;
        let inside = extract_inside(&grid);
        Ok(Self { grid, footprint, top, sides, bottom, inside })
    }

    pub fn get(&self, feature: Feature) -> &FeatureMap {
        match feature {
            Feature::Top => &self.top,
            Feature::Bottom => &self.bottom,
            Feature::Sides => &self.sides,
            Feature::Inside => &self.inside,
        }
    }
}

/// Dense labelled occupancy over a whole scene; label 0 is free space.
#[derive(Debug, Clone)]
pub struct LabelGrid {
    frame: GridFrame,
    min: Cell,
    dims: [usize; 3],
    labels: Vec<u16>,
}

impl LabelGrid {
    pub fn from_grids<'a>(
        frame: GridFrame,
        grids: impl IntoIterator<Item = (u16, &'a VoxelGrid)> + Clone,
    ) -> Self {
        let mut lo = [i32::MAX; 3];
        let mut hi = [i32::MIN; 3];
        for (_, g) in grids.clone() {
            if let Some((a, b)) = g.bounds() {
                for k in 0..3 {
                    lo[k] = lo[k].min(a[k]);
                    hi[k] = hi[k].max(b[k]);
                }
            }
        }
        if lo[0] > hi[0] {
            return Self { frame, min: [0; 3], dims: [0; 3], labels: Vec::new() };
        }
        let dims = [
            (hi[0] - lo[0] + 1) as usize,
            (hi[1] - lo[1] + 1) as usize,
            (hi[2] - lo[2] + 1) as usize,
        ];
        let mut out = Self { frame, min: lo, dims, labels: vec![0; dims[0] * dims[1] * dims[2]] };
        for (label, g) in grids {
            for c in &g.occupied {
                if let Some(i) = out.index(*c) {
                    out.labels[i] = label;
                }
            }
        }
        out
    }

    fn index(&self, c: Cell) -> Option<usize> {
        let mut rel = [0usize; 3];
        for a in 0..3 {
            let d = c[a] - self.min[a];
            if d < 0 || d as usize >= self.dims[a] {
                return None;
            }
            rel[a] = d as usize;
        }
        Some(rel[0] + self.dims[0] * (rel[1] + self.dims[1] * rel[2]))
    }

    pub fn label(&self, c: Cell) -> u16 {
        self.index(c).map_or(0, |i| self.labels[i])
    }

    /// Occupancy view ignoring the given labels (opened carriers).
    pub fn view<'a>(&'a self, transparent: &'a [u16]) -> LabelView<'a> {
        LabelView { grid: self, transparent }
    }
}

impl Occupancy for LabelGrid {
    fn frame(&self) -> GridFrame {
        self.frame
    }

    fn is_occupied(&self, cell: Cell) -> bool {
        self.label(cell) != 0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LabelView<'a> {
    grid: &'a LabelGrid,
    transparent: &'a [u16],
}

impl Occupancy for LabelView<'_> {
    fn frame(&self) -> GridFrame {
        self.grid.frame
    }

    fn is_occupied(&self, cell: Cell) -> bool {
        let l = self.grid.label(cell);
        l != 0 && !self.transparent.contains(&l)
    }
}
