//! Domains, lattice point clouds, the interior/layer partition and
//! fixed-radius neighbor search.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("spacing h = {0} must be positive and finite")]
    Spacing(f64),
    #[error("no lattice points fall inside `{0}`")]
    EmptyCloud(String),
    #[error("horizon δ = {0} must be positive")]
    Delta(f64),
    #[error("degenerate partition: every point lies within 2δ = {0} of the boundary")]
    DegeneratePartition(f64),
    #[error("cloud csv: {0}")]
    Csv(String),
}

/// Analytic shape of a built-in domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Shape {
    /// Ball of the given radius centered at the origin.
    Ball { radius: f64 },
    /// Unit cube `[0, 1]ⁿ`. Its corners are not C².
    UnitCube,
}

/// A bounded domain with an exact signed distance (negative inside).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub name: String,
    pub dim: usize,
    pub shape: Shape,
}

pub const BUILTIN_DOMAINS: [&str; 4] = ["unit-disk", "unit-square", "unit-interval", "unit-ball"];

impl Domain {
    pub fn builtin(name: &str) -> Result<Self, GeometryError> {
        let (dim, shape) = match name {
            "unit-disk" => (2, Shape::Ball { radius: 1.0 }),
            "unit-ball" => (3, Shape::Ball { radius: 1.0 }),
            "unit-square" => (2, Shape::UnitCube),
            "unit-interval" => (1, Shape::UnitCube),
            other => return Err(GeometryError::UnknownDomain(other.to_string())),
        };
        Ok(Self {
            name: name.to_string(),
            dim,
            shape,
        })
    }

    pub fn unit_disk() -> Self {
        Self::builtin("unit-disk").unwrap()
    }

    /// Disk of arbitrary radius centered at the origin.
    pub fn disk(radius: f64) -> Self {
        Self {
            name: format!("disk-r{radius}"),
            dim: 2,
            shape: Shape::Ball { radius },
        }
    }

    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        match self.shape {
            Shape::Ball { radius } => x.iter().map(|v| v * v).sum::<f64>().sqrt() - radius,
            Shape::UnitCube => {
                // Exact box distance for [0,1]^n.
                let mut outside = 0.0;
                let mut inside = f64::NEG_INFINITY;
                for &v in x {
                    let q = (v - 0.5).abs() - 0.5;
                    outside += q.max(0.0).powi(2);
                    inside = inside.max(q);
                }
                outside.sqrt() + inside.min(0.0)
            }
        }
    }

    /// Axis-aligned bounding box as (lower, upper) corners.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self.shape {
            Shape::Ball { radius } => (vec![-radius; self.dim], vec![radius; self.dim]),
            Shape::UnitCube => (vec![0.0; self.dim], vec![1.0; self.dim]),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self.shape {
            Shape::Ball { radius } => 2.0 * radius,
            Shape::UnitCube => (self.dim as f64).sqrt(),
        }
    }

    pub fn volume(&self) -> f64 {
        match self.shape {
            Shape::Ball { radius } => match self.dim {
                1 => 2.0 * radius,
                2 => std::f64::consts::PI * radius * radius,
                _ => 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3),
            },
            Shape::UnitCube => 1.0,
        }
    }

    pub fn surface_area(&self) -> f64 {
        match self.shape {
            Shape::Ball { radius } => match self.dim {
                1 => 2.0,
                2 => 2.0 * std::f64::consts::PI * radius,
                _ => 4.0 * std::f64::consts::PI * radius * radius,
            },
            Shape::UnitCube => 2.0 * self.dim as f64,
        }
    }
}

/// Region tag of a sample point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tag {
    /// Farther than 2δ from the boundary: the momentum equation holds here.
    Interior,
    /// Within 2δ of the boundary: velocity is constrained to zero.
    Layer,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Interior => "interior",
            Tag::Layer => "layer",
        }
    }
}

/// Sample points with quadrature weights, before partitioning.
#[derive(Debug, Clone)]
pub struct PointCloud {
    pub dim: usize,
    /// Flat coordinates, `dim` per point.
    pub coords: Vec<f64>,
    pub weights: Vec<f64>,
    /// Signed distance of each point to the boundary.
    pub distance: Vec<f64>,
    pub h: f64,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Lattice points `(k + ½)h` strictly inside `domain`, each weighted `hⁿ`.
pub fn sample_grid(domain: &Domain, h: f64) -> Result<PointCloud, GeometryError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(GeometryError::Spacing(h));
    }
    if h >= domain.diameter() {
        return Err(GeometryError::EmptyCloud(domain.name.clone()));
    }
    let dim = domain.dim;
    let (lo, hi) = domain.bounding_box();
    let kmin: Vec<i64> = lo.iter().map(|v| (v / h - 0.5).floor() as i64).collect();
    let kmax: Vec<i64> = hi.iter().map(|v| (v / h - 0.5).ceil() as i64).collect();
    let weight = h.powi(dim as i32);

    let mut coords = Vec::new();
    let mut distance = Vec::new();
    let mut idx = kmin.clone();
    let mut x = vec![0.0; dim];
    'outer: loop {
        for d in 0..dim {
            x[d] = (idx[d] as f64 + 0.5) * h;
        }
        let s = domain.signed_distance(&x);
        if s < 0.0 {
            coords.extend_from_slice(&x);
            distance.push(s);
        }
        // Odometer increment, last axis fastest.
        let mut d = dim;
        loop {
            if d == 0 {
                break 'outer;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] <= kmax[d] {
                break;
            }
            idx[d] = kmin[d];
        }
    }
    if distance.is_empty() {
        return Err(GeometryError::EmptyCloud(domain.name.clone()));
    }
    Ok(PointCloud {
        dim,
        weights: vec![weight; distance.len()],
        coords,
        distance,
        h,
    })
}

const CELLS_PER_RADIUS: i64 = 2;

/// Uniform spatial hash with cubic cells.
#[derive(Debug, Clone)]
pub struct NeighborGrid {
    dim: usize,
    cell: f64,
    radius: f64,
    cells: HashMap<[i64; 3], Vec<u32>>,
}

impl NeighborGrid {
    /// Indexes `coords` for queries with radius `radius` (cell size = radius/2).
    pub fn build(dim: usize, coords: &[f64], radius: f64) -> Self {
        let cell = radius / CELLS_PER_RADIUS as f64;
        let mut cells: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        let n = coords.len() / dim;
        for i in 0..n {
            let key = Self::key_of(dim, cell, &coords[i * dim..(i + 1) * dim]);
            cells.entry(key).or_default().push(i as u32);
        }
        Self { dim, cell, radius, cells }
    }

    fn key_of(dim: usize, cell: f64, x: &[f64]) -> [i64; 3] {
        let mut key = [0i64; 3];
        for d in 0..dim {
            key[d] = (x[d] / cell).floor() as i64;
        }
        key
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Indices `j` with `‖x − x_j‖ < radius`, ascending.
    pub fn query(&self, coords: &[f64], x: &[f64], out: &mut Vec<u32>) {
        out.clear();
        let dim = self.dim;
        let center = Self::key_of(dim, self.cell, x);
        let r2 = self.radius * self.radius;
        let reach = CELLS_PER_RADIUS;
        let span = |d: usize| if d < dim { -reach..=reach } else { 0..=0 };
        for a in span(0) {
            for b in span(1) {
                for c in span(2) {
                    let key = [center[0] + a, center[1] + b, center[2] + c];
                    if let Some(list) = self.cells.get(&key) {
                        for &j in list {
                            let y = &coords[j as usize * dim..(j as usize + 1) * dim];
                            let d2: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
                            if d2 < r2 {
                                out.push(j);
                            }
                        }
                    }
                }
            }
        }
        // Each cell contributes an ascending run; the stable sort merges runs.
        out.sort();
    }
}

/// A point cloud partitioned at horizon δ, with a neighbor index of radius 2δ.
#[derive(Debug, Clone)]
pub struct TaggedCloud {
    pub dim: usize,
    pub coords: Vec<f64>,
    pub weights: Vec<f64>,
    pub tags: Vec<Tag>,
    pub delta: f64,
    pub h: f64,
    grid: NeighborGrid,
    interior: Vec<usize>,
    // Position of each point in `interior`, if any.
    interior_slot: Vec<Option<usize>>,
}

/// Tags each point Interior when its distance to the boundary exceeds 2δ,
/// Layer otherwise (ties go to the Layer).
pub fn partition(cloud: &PointCloud, delta: f64) -> Result<TaggedCloud, GeometryError> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(GeometryError::Delta(delta));
    }
    let tags: Vec<Tag> = cloud
        .distance
        .iter()
        .map(|&s| if s < -2.0 * delta { Tag::Interior } else { Tag::Layer })
        .collect();
    TaggedCloud::new(cloud.dim, cloud.coords.clone(), cloud.weights.clone(), tags, delta, cloud.h)
}

impl TaggedCloud {
    pub fn new(dim: usize, coords: Vec<f64>, weights: Vec<f64>, tags: Vec<Tag>, delta: f64, h: f64) -> Result<Self, GeometryError> {
        let interior: Vec<usize> = (0..tags.len()).filter(|&i| tags[i] == Tag::Interior).collect();
        if interior.is_empty() {
            return Err(GeometryError::DegeneratePartition(2.0 * delta));
        }
        let mut interior_slot = vec![None; tags.len()];
        for (k, &i) in interior.iter().enumerate() {
            interior_slot[i] = Some(k);
        }
        let grid = NeighborGrid::build(dim, &coords, 2.0 * delta);
        Ok(Self {
            dim,
            coords,
            weights,
            tags,
            delta,
            h,
            grid,
            interior,
            interior_slot,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Indices of Interior points, ascending.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Position of point `i` among the Interior points.
    pub fn interior_slot(&self, i: usize) -> Option<usize> {
        self.interior_slot[i]
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.tags[i] == Tag::Interior
    }

    /// All `j` with `‖x_i − x_j‖ < 2δ`, including `i`, ascending.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut buf = Vec::new();
        self.neighbors_into(i, &mut buf);
        buf.into_iter().map(|j| j as usize).collect()
    }

    pub fn neighbors_into(&self, i: usize, out: &mut Vec<u32>) {
        self.grid.query(&self.coords, self.point(i), out);
    }

    /// Neighbors of an arbitrary location (not necessarily a cloud point).
    pub fn neighbors_of_point(&self, x: &[f64], out: &mut Vec<u32>) {
        self.grid.query(&self.coords, x, out);
    }

    /// Writes `x1..xn,V,tag` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), GeometryError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..=self.dim).map(|d| format!("x{d}")).collect();
        header.push("V".into());
        header.push("tag".into());
        out.write_record(&header).map_err(|e| GeometryError::Csv(e.to_string()))?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.point(i).iter().map(|v| format!("{v:.17e}")).collect();
            row.push(format!("{:.17e}", self.weights[i]));
            row.push(self.tags[i].as_str().into());
            out.write_record(&row).map_err(|e| GeometryError::Csv(e.to_string()))?;
        }
        out.flush().map_err(|e| GeometryError::Csv(e.to_string()))
    }

    /// Reads a cloud written by [`TaggedCloud::write_csv`]. The spacing is
    /// recovered from the first weight as `V^{1/n}`.
    pub fn read_csv<R: Read>(r: R, dim: usize, delta: f64) -> Result<Self, GeometryError> {
        let mut reader = csv::Reader::from_reader(r);
        let (mut coords, mut weights, mut tags) = (Vec::new(), Vec::new(), Vec::new());
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| GeometryError::Csv(e.to_string()))?;
            if rec.len() != dim + 2 {
                return Err(GeometryError::Csv(format!("row {}: expected {} columns", line + 1, dim + 2)));
            }
            for d in 0..=dim {
                let v: f64 = rec[d]
                    .trim()
                    .parse()
                    .map_err(|_| GeometryError::Csv(format!("row {}: bad number `{}`", line + 1, &rec[d])))?;
                if d < dim {
                    coords.push(v);
                } else {
                    weights.push(v);
                }
            }
            tags.push(match rec[dim + 1].trim() {
                "interior" => Tag::Interior,
                "layer" => Tag::Layer,
                other => return Err(GeometryError::Csv(format!("row {}: bad tag `{other}`", line + 1))),
            });
        }
        let h = weights.first().map(|v: &f64| v.powf(1.0 / dim as f64)).unwrap_or(0.0);
        Self::new(dim, coords, weights, tags, delta, h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_lattice() {
        let c = sample_grid(&Domain::builtin("unit-square").unwrap(), 0.25).unwrap();
        assert_eq!(c.len(), 16);
        assert!(c.weights.iter().all(|&v| v == 0.0625));
    }

    #[test]
    fn disk_area() {
        let c = sample_grid(&Domain::unit_disk(), 0.1).unwrap();
        let err = (c.total_weight() - std::f64::consts::PI).abs();
        assert!(err <= 0.1 * 2.0 * std::f64::consts::PI * 5.0);
        assert!(c.distance.iter().all(|&s| s < 0.0));
    }

    #[test]
    fn oversized_spacing() {
        assert!(matches!(sample_grid(&Domain::unit_disk(), 3.0), Err(GeometryError::EmptyCloud(_))));
        assert!(matches!(sample_grid(&Domain::unit_disk(), -0.1), Err(GeometryError::Spacing(_))));
    }

    #[test]
    fn empty_cloud() {
        // h just under the diameter: the only lattice sites (±h/2) fall outside.
        assert!(matches!(sample_grid(&Domain::unit_disk(), 1.9), Err(GeometryError::EmptyCloud(_))));
    }

    #[test]
    fn tags_follow_distance() {
        let cloud = sample_grid(&Domain::unit_disk(), 0.05).unwrap();
        let t = partition(&cloud, 0.1).unwrap();
        for i in 0..t.len() {
            let x = t.point(i);
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if 1.0 - r > 0.2 {
                assert_eq!(t.tags[i], Tag::Interior);
            } else {
                assert_eq!(t.tags[i], Tag::Layer);
            }
        }
        let origin = Domain::unit_disk().signed_distance(&[0.0, 0.0]);
        assert!(origin < -0.2);
        assert!(Domain::unit_disk().signed_distance(&[0.85, 0.0]) >= -0.2);
    }

    #[test]
    fn degenerate() {
        let cloud = sample_grid(&Domain::unit_disk(), 0.2).unwrap();
        assert!(matches!(partition(&cloud, 0.6), Err(GeometryError::DegeneratePartition(_))));
    }

    #[test]
    fn square_distance_is_exact() {
        let d = Domain::builtin("unit-square").unwrap();
        assert!((d.signed_distance(&[0.5, 0.5]) + 0.5).abs() < 1e-15);
        assert!((d.signed_distance(&[0.1, 0.7]) + 0.1).abs() < 1e-15);
        assert!((d.signed_distance(&[1.3, 1.4]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn csv_roundtrip() {
        let cloud = sample_grid(&Domain::unit_disk(), 0.2).unwrap();
        let t = partition(&cloud, 0.1).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = TaggedCloud::read_csv(&buf[..], 2, 0.1).unwrap();
        assert_eq!(back.coords, t.coords);
        assert_eq!(back.weights, t.weights);
        assert_eq!(back.tags, t.tags);
        assert!((back.h - 0.2).abs() < 1e-12);
    }
}
