//! Compressed-row storage with scalar or small-vector entries.
//!
//! Operators assembled on the same cloud share one [`Pattern`]; entries of
//! block size `b` store `b` consecutive scalars per `(row, col)` slot.

use std::io::Write;
use std::sync::Arc;

/// Row offsets and strictly ascending column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
}

impl Pattern {
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u32] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    /// True when every row's columns are strictly increasing and in range.
    pub fn is_sorted(&self) -> bool {
        (0..self.nrows).all(|i| {
            let r = self.row(i);
            r.windows(2).all(|w| w[0] < w[1]) && r.iter().all(|&c| (c as usize) < self.ncols)
        })
    }
}

#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pattern: Arc<Pattern>,
    values: Arc<Vec<f64>>,
    block: usize,
}

impl SparseMatrix {
    pub fn new(pattern: Arc<Pattern>, values: Vec<f64>, block: usize) -> Self {
        assert_eq!(values.len(), pattern.nnz() * block, "values do not match pattern");
        Self {
            pattern,
            values: Arc::new(values),
            block,
        }
    }

    /// Builds a scalar matrix from per-row `(column, value)` lists; columns
    /// need not be sorted and duplicates are summed.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(u32, f64)>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            let mut last: Option<u32> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let pattern = Pattern {
            nrows,
            ncols,
            row_ptr,
            col_idx,
        };
        Self::new(Arc::new(pattern), values, 1)
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn nrows(&self) -> usize {
        self.pattern.nrows
    }

    pub fn ncols(&self) -> usize {
        self.pattern.ncols
    }

    pub fn nnz(&self) -> usize {
        self.pattern.nnz()
    }

    /// Row `i` as (columns, values); values hold `block` scalars per column.
    #[inline]
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let range = self.pattern.row_range(i);
        let vals = &self.values[range.start * self.block..range.end * self.block];
        (&self.pattern.col_idx[range], vals)
    }

    /// Entry `(i, j)` for scalar matrices; zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert_eq!(self.block, 1);
        let (cols, vals) = self.row(i);
        match cols.binary_search(&(j as u32)) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// `y = A x` for scalar matrices.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(self.block, 1);
        assert_eq!(x.len(), self.ncols());
        assert_eq!(y.len(), self.nrows());
        let body = |(i, yi): (usize, &mut f64)| {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c as usize];
            }
            *yi = acc;
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            y.par_iter_mut().enumerate().for_each(body);
        }
        #[cfg(not(feature = "parallel"))]
        y.iter_mut().enumerate().for_each(body);
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        self.mul_vec(x, &mut y);
        y
    }

    /// For block-`n` entries: scalar field in, `n`-vector per row out
    /// (`y[i*n + c] = Σ_j A_ij[c] x_j`).
    pub fn apply_scalar_to_vector(&self, x: &[f64]) -> Vec<f64> {
        let b = self.block;
        assert_eq!(x.len(), self.ncols());
        let mut y = vec![0.0; self.nrows() * b];
        for (i, yi) in y.chunks_mut(b).enumerate() {
            let (cols, vals) = self.row(i);
            for (k, c) in cols.iter().enumerate() {
                let xj = x[*c as usize];
                for d in 0..b {
                    yi[d] += vals[k * b + d] * xj;
                }
            }
        }
        y
    }

    /// For block-`n` entries: `n`-vector field in, scalar per row out
    /// (`y_i = Σ_j A_ij · x_j`).
    pub fn apply_vector_to_scalar(&self, x: &[f64]) -> Vec<f64> {
        let b = self.block;
        assert_eq!(x.len(), self.ncols() * b);
        (0..self.nrows())
            .map(|i| {
                let (cols, vals) = self.row(i);
                let mut acc = 0.0;
                for (k, c) in cols.iter().enumerate() {
                    let xj = &x[*c as usize * b..(*c as usize + 1) * b];
                    for d in 0..b {
                        acc += vals[k * b + d] * xj[d];
                    }
                }
                acc
            })
            .collect()
    }

    /// Row sums of a scalar matrix.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows()).map(|i| self.row(i).1.iter().sum()).collect()
    }

    /// Largest `|A_ij − A_ji|` relative to the largest `|A_ij|`.
    pub fn symmetry_defect(&self) -> f64 {
        assert_eq!(self.block, 1);
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..self.nrows() {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                scale = scale.max(v.abs());
                worst = worst.max((v - self.get(*c as usize, i)).abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// Coordinate text export: one `row col value` line per scalar, with a
    /// trailing component index for block entries. Indices are 0-based.
    pub fn write_coo<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "% {} {} {} block={}", self.nrows(), self.ncols(), self.nnz(), self.block)?;
        for i in 0..self.nrows() {
            let (cols, vals) = self.row(i);
            for (k, c) in cols.iter().enumerate() {
                if self.block == 1 {
                    writeln!(w, "{i} {c} {:.17e}", vals[k])?;
                } else {
                    for d in 0..self.block {
                        writeln!(w, "{i} {c} {:.17e} {d}", vals[k * self.block + d])?;
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_rows_sorts_and_merges() {
        let m = SparseMatrix::from_rows(3, vec![vec![(2, 1.0), (0, 2.0), (2, 0.5)], vec![], vec![(1, -1.0)]]);
        assert!(m.pattern().is_sorted());
        assert_eq!(m.row(0).0, &[0, 2]);
        assert_eq!(m.row(0).1, &[2.0, 1.5]);
        assert_eq!(m.apply(&[1.0, 2.0, 3.0]), vec![6.5, 0.0, -2.0]);
        assert_eq!(m.get(2, 1), -1.0);
        assert_eq!(m.get(1, 1), 0.0);
    }

    #[test]
    fn block_products() {
        let pattern = Arc::new(Pattern {
            nrows: 2,
            ncols: 2,
            row_ptr: vec![0, 2, 3],
            col_idx: vec![0, 1, 1],
        });
        let m = SparseMatrix::new(pattern, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 2);
        assert_eq!(m.apply_scalar_to_vector(&[1.0, 10.0]), vec![31.0, 42.0, 50.0, 60.0]);
        assert_eq!(m.apply_vector_to_scalar(&[1.0, 0.0, 0.0, 1.0]), vec![1.0 + 4.0, 6.0]);
    }

    #[test]
    fn coo_export() {
        let m = SparseMatrix::from_rows(2, vec![vec![(1, 2.5)], vec![(0, -1.0)]]);
        let mut buf = Vec::new();
        m.write_coo(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().starts_with("0 1 2.5"));
    }
}
