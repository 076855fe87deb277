//! Tabulated forcing, transferred to a cloud by nearest neighbor.
//!
//! Nearest-neighbor transfer is first-order accurate in the table spacing, so
//! a table coarser than the cloud caps the accuracy of the solve.

use std::collections::HashMap;
use std::path::Path;

use crate::error::CliError;

#[derive(Debug)]
pub struct ForcingTable {
    dim: usize,
    coords: Vec<f64>,
    values: Vec<f64>,
    cell: f64,
    buckets: HashMap<[i64; 3], Vec<usize>>,
}

impl ForcingTable {
    /// Reads `x1..xn,f1..fn` rows (header required).
    pub fn read(path: &Path, dim: usize) -> Result<Self, CliError> {
        let err = |m: String| CliError::Config(format!("`case.forcing_table`: {m}"));
        let mut reader = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
        let width = reader.headers().map_err(|e| err(e.to_string()))?.len();
        if width != 2 * dim {
            return Err(err(format!("expected {} columns for a {dim}-dimensional domain, found {width}", 2 * dim)));
        }
        let (mut coords, mut values) = (Vec::new(), Vec::new());
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| err(e.to_string()))?;
            for (k, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| err(format!("row {}: `{field}` is not a finite number", line + 1)))?;
                if k < dim {
                    coords.push(v);
                } else {
                    values.push(v);
                }
            }
        }
        if coords.is_empty() {
            return Err(err("table has no rows".into()));
        }
        Ok(Self::new(dim, coords, values))
    }

    pub fn new(dim: usize, coords: Vec<f64>, values: Vec<f64>) -> Self {
        let n = coords.len() / dim;
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for i in 0..n {
            for d in 0..dim {
                lo[d] = lo[d].min(coords[i * dim + d]);
                hi[d] = hi[d].max(coords[i * dim + d]);
            }
        }
        let extent = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
        // About one table point per bucket on average.
        let cell = if extent > 0.0 {
            extent / (n as f64).powf(1.0 / dim as f64).max(1.0)
        } else {
            1.0
        };
        let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for i in 0..n {
            buckets.entry(key(dim, cell, &coords[i * dim..(i + 1) * dim])).or_default().push(i);
        }
        Self {
            dim,
            coords,
            values,
            cell,
            buckets,
        }
    }

    /// Index of the nearest table point; ties go to the lowest index.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let dim = self.dim;
        let center = key(dim, self.cell, x);
        let mut best = (f64::INFINITY, usize::MAX);
        for ring in 0i64.. {
            // Every point outside rings 0..=ring is at least ring·cell away.
            if best.1 != usize::MAX && (ring as f64 - 1.0) * self.cell > best.0.sqrt() {
                break;
            }
            let span = |d: usize| if d < dim { -ring..=ring } else { 0..=0 };
            for a in span(0) {
                for b in span(1) {
                    for c in span(2) {
                        if a.abs().max(b.abs()).max(c.abs()) != ring {
                            continue;
                        }
                        let k = [center[0] + a, center[1] + b, center[2] + c];
                        for &j in self.buckets.get(&k).map(Vec::as_slice).unwrap_or(&[]) {
                            let y = &self.coords[j * dim..(j + 1) * dim];
                            let d2: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
                            if d2 < best.0 || (d2 == best.0 && j < best.1) {
                                best = (d2, j);
                            }
                        }
                    }
                }
            }
        }
        best.1
    }

    pub fn sample(&self, x: &[f64], out: &mut [f64]) {
        let j = self.nearest(x);
        out.copy_from_slice(&self.values[j * self.dim..(j + 1) * self.dim]);
    }
}

fn key(dim: usize, cell: f64, x: &[f64]) -> [i64; 3] {
    let mut k = [0i64; 3];
    for d in 0..dim {
        k[d] = (x[d] / cell).floor() as i64;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nearest_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in 1..=3 {
            let n = 300;
            let coords: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let table = ForcingTable::new(dim, coords.clone(), vec![0.0; n * dim]);
            for _ in 0..200 {
                let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
                let brute = (0..n)
                    .min_by(|&a, &b| {
                        let da: f64 = (0..dim).map(|d| (x[d] - coords[a * dim + d]).powi(2)).sum();
                        let db: f64 = (0..dim).map(|d| (x[d] - coords[b * dim + d]).powi(2)).sum();
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                assert_eq!(table.nearest(&x), brute);
            }
        }
    }
}
