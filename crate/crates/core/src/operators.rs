//! Point-cloud quadrature of the nonlocal Laplacian `L_δ`, gradient `G_δ`,
//! divergence `D_δ`, pressure stabilizer `L̄_δ` and the `R̄_δ` mollifier.
//!
//! With `V_j` the quadrature weights:
//!
//! ```text
//! (L u)_i = 1/δ²   Σ_j R_δ(x_i,x_j) (u_j − u_i) V_j
//! (G p)_i = 1/2δ²  Σ_j R_δ(x_i,x_j) (x_j − x_i) p_j V_j
//! (D u)_i = 1/2δ²  Σ_j R_δ(x_i,x_j) (x_j − x_i) · u_j V_j
//! (L̄ p)_i =        Σ_j R̄_δ(x_i,x_j) (p_j − p_i) V_j
//! (M f)_i =        Σ_j R̄_δ(x_i,x_j) f_j V_j
//! ```
//!
//! `G` and `D` carry the same coefficients and share storage.

use std::sync::Arc;

use crate::geometry::TaggedCloud;
use crate::kernels::ScaledKernel;
use crate::par::map_range;
use crate::sparse::{Pattern, SparseMatrix};

/// Kernel values below this are treated as outside the support.
pub const DROP_BELOW: f64 = 1e-300;

#[derive(Debug, thiserror::Error)]
pub enum OperatorError {
    #[error("kernel horizon δ = {kernel} does not match the cloud's δ = {cloud}")]
    DeltaMismatch { kernel: f64, cloud: f64 },
    #[error("kernel dimension {kernel} does not match the cloud's dimension {cloud}")]
    DimMismatch { kernel: usize, cloud: usize },
}

fn check(cloud: &TaggedCloud, kernel: &ScaledKernel) -> Result<(), OperatorError> {
    if kernel.dim() != cloud.dim {
        return Err(OperatorError::DimMismatch {
            kernel: kernel.dim(),
            cloud: cloud.dim,
        });
    }
    let (a, b) = (kernel.delta(), cloud.delta);
    if (a - b).abs() > 1e-12 * a.max(b) {
        return Err(OperatorError::DeltaMismatch { kernel: a, cloud: b });
    }
    Ok(())
}

#[derive(Clone, Copy, Default)]
struct Wanted {
    lap: bool,
    grad: bool,
    stab: bool,
    moll: bool,
}

struct Parts {
    pattern: Arc<Pattern>,
    lap: Vec<f64>,
    grad: Vec<f64>,
    stab: Vec<f64>,
    moll: Vec<f64>,
}

#[derive(Default)]
struct Row {
    cols: Vec<u32>,
    lap: Vec<f64>,
    grad: Vec<f64>,
    stab: Vec<f64>,
    moll: Vec<f64>,
}

/// One operator row. Neighbors with `R̄_δ` below [`DROP_BELOW`] are left out;
/// since `R > 0` forces `R̄ > 0`, this keeps every neighbor with a
/// representable `R_δ` as well, and all operators share the pattern.
fn compute_row(cloud: &TaggedCloud, kernel: &ScaledKernel, want: Wanted, i: usize) -> Row {
    let n = cloud.dim;
    let delta2 = kernel.delta() * kernel.delta();
    let xi = cloud.point(i);
    let mut nbrs = Vec::new();
    cloud.neighbors_into(i, &mut nbrs);
    let mut row = Row {
        cols: Vec::with_capacity(nbrs.len()),
        ..Default::default()
    };
    let mut diag = None;
    let (mut lap_sum, mut stab_sum) = (0.0, 0.0);
    for &j in &nbrs {
        let ju = j as usize;
        let xj = cloud.point(ju);
        let vj = cloud.weights[ju];
        let d2 = crate::kernels::dist2(xi, xj);
        let rbar = kernel.rbar_dist2(d2);
        if rbar < DROP_BELOW {
            continue;
        }
        let rb = rbar * vj;
        if ju == i {
            diag = Some(row.cols.len());
        }
        row.cols.push(j);
        if want.lap || want.grad {
            let r = kernel.r_dist2(d2) * vj;
            if want.lap {
                let v = if ju == i { 0.0 } else { r / delta2 };
                row.lap.push(v);
                lap_sum += v;
            }
            if want.grad {
                row.grad.extend((0..n).map(|c| r * (xj[c] - xi[c]) / (2.0 * delta2)));
            }
        }
        if want.stab {
            let v = if ju == i { 0.0 } else { rb };
            row.stab.push(v);
            stab_sum += v;
        }
        if want.moll {
            row.moll.push(rb);
        }
    }
    let d = diag.expect("a point is always its own neighbor");
    if want.lap {
        row.lap[d] = -lap_sum;
    }
    if want.stab {
        row.stab[d] = -stab_sum;
    }
    row
}

// Rows are built a block at a time, so the only large allocations are the
// output arrays themselves.
const ROW_BLOCK: usize = 512;

fn assemble_parts(cloud: &TaggedCloud, kernel: &ScaledKernel, want: Wanted) -> Result<Parts, OperatorError> {
    check(cloud, kernel)?;
    let npts = cloud.len();
    let mut row_ptr = Vec::with_capacity(npts + 1);
    row_ptr.push(0usize);
    let mut all = Row::default();
    for start in (0..npts).step_by(ROW_BLOCK) {
        let end = (start + ROW_BLOCK).min(npts);
        let rows = map_range(end - start, |k| compute_row(cloud, kernel, want, start + k));
        for r in rows {
            row_ptr.push(row_ptr.last().unwrap() + r.cols.len());
            all.cols.extend_from_slice(&r.cols);
            all.lap.extend_from_slice(&r.lap);
            all.grad.extend_from_slice(&r.grad);
            all.stab.extend_from_slice(&r.stab);
            all.moll.extend_from_slice(&r.moll);
        }
    }
    for v in [&mut all.lap, &mut all.grad, &mut all.stab, &mut all.moll] {
        v.shrink_to_fit();
    }
    all.cols.shrink_to_fit();
    Ok(Parts {
        pattern: Arc::new(Pattern {
            nrows: npts,
            ncols: npts,
            row_ptr,
            col_idx: all.cols,
        }),
        lap: all.lap,
        grad: all.grad,
        stab: all.stab,
        moll: all.moll,
    })
}

/// Discrete nonlocal Laplacian (scalar weights, applied per component).
pub fn assemble_laplacian(cloud: &TaggedCloud, kernel: &ScaledKernel) -> Result<SparseMatrix, OperatorError> {
    let p = assemble_parts(
        cloud,
        kernel,
        Wanted {
            lap: true,
            ..Default::default()
        },
    )?;
    Ok(SparseMatrix::new(p.pattern, p.lap, 1))
}

/// Discrete nonlocal gradient; entries are `n`-vectors.
pub fn assemble_gradient(cloud: &TaggedCloud, kernel: &ScaledKernel) -> Result<SparseMatrix, OperatorError> {
    let p = assemble_parts(
        cloud,
        kernel,
        Wanted {
            grad: true,
            ..Default::default()
        },
    )?;
    Ok(SparseMatrix::new(p.pattern, p.grad, cloud.dim))
}

/// Discrete nonlocal divergence; entries are `n`-vectors dotted with `u_j`.
pub fn assemble_divergence(cloud: &TaggedCloud, kernel: &ScaledKernel) -> Result<SparseMatrix, OperatorError> {
    assemble_gradient(cloud, kernel)
}

/// Discrete pressure stabilizer `L̄_δ`.
pub fn assemble_stabilizer(cloud: &TaggedCloud, kernel: &ScaledKernel) -> Result<SparseMatrix, OperatorError> {
    let p = assemble_parts(
        cloud,
        kernel,
        Wanted {
            stab: true,
            ..Default::default()
        },
    )?;
    Ok(SparseMatrix::new(p.pattern, p.stab, 1))
}

/// `R̄_δ`-weighted mollifier used for the forcing.
pub fn assemble_mollifier(cloud: &TaggedCloud, kernel: &ScaledKernel) -> Result<SparseMatrix, OperatorError> {
    let p = assemble_parts(
        cloud,
        kernel,
        Wanted {
            moll: true,
            ..Default::default()
        },
    )?;
    Ok(SparseMatrix::new(p.pattern, p.moll, 1))
}

/// All five operators on one cloud, sharing a sparsity pattern.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub cloud: Arc<TaggedCloud>,
    pub kernel: ScaledKernel,
    pub lap: SparseMatrix,
    pub grad: SparseMatrix,
    pub div: SparseMatrix,
    pub stab: SparseMatrix,
    pub mollify: SparseMatrix,
}

impl OperatorSet {
    pub fn assemble(cloud: Arc<TaggedCloud>, kernel: ScaledKernel) -> Result<Self, OperatorError> {
        let all = Wanted {
            lap: true,
            grad: true,
            stab: true,
            moll: true,
        };
        let p = assemble_parts(&cloud, &kernel, all)?;
        let n = cloud.dim;
        let grad = SparseMatrix::new(p.pattern.clone(), p.grad, n);
        Ok(Self {
            lap: SparseMatrix::new(p.pattern.clone(), p.lap, 1),
            div: grad.clone(),
            grad,
            stab: SparseMatrix::new(p.pattern.clone(), p.stab, 1),
            mollify: SparseMatrix::new(p.pattern, p.moll, 1),
            cloud,
            kernel,
        })
    }

    pub fn dim(&self) -> usize {
        self.cloud.dim
    }

    pub fn delta(&self) -> f64 {
        self.kernel.delta()
    }

    /// Laplacian applied to each component of an `n`-vector field.
    pub fn apply_lap_vector(&self, u: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; u.len()];
        for i in 0..self.cloud.len() {
            let (cols, vals) = self.lap.row(i);
            for (c, v) in cols.iter().zip(vals) {
                let j = *c as usize;
                for d in 0..n {
                    out[i * n + d] += v * u[j * n + d];
                }
            }
        }
        out
    }

    pub fn apply_grad(&self, p: &[f64]) -> Vec<f64> {
        self.grad.apply_scalar_to_vector(p)
    }

    pub fn apply_div(&self, u: &[f64]) -> Vec<f64> {
        self.div.apply_vector_to_scalar(u)
    }

    pub fn apply_stab(&self, p: &[f64]) -> Vec<f64> {
        self.stab.apply(p)
    }

    pub fn apply_mollify(&self, f: &[f64]) -> Vec<f64> {
        self.mollify.apply(f)
    }

    /// Mollifier applied to each component of an `n`-vector field.
    pub fn apply_mollify_vector(&self, f: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; f.len()];
        for i in 0..self.cloud.len() {
            let (cols, vals) = self.mollify.row(i);
            for (c, v) in cols.iter().zip(vals) {
                let j = *c as usize;
                for d in 0..n {
                    out[i * n + d] += v * f[j * n + d];
                }
            }
        }
        out
    }

    /// `(1/δ²) Σ_ij R_δ |u_i − u_j|² V_i V_j` for an `n`-vector field.
    pub fn velocity_energy(&self, u: &[f64]) -> f64 {
        let n = self.dim();
        let w = &self.cloud.weights;
        let mut total = 0.0;
        for i in 0..self.cloud.len() {
            let (cols, vals) = self.lap.row(i);
            let mut row = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                let j = *c as usize;
                if j == i {
                    continue;
                }
                let d2: f64 = (0..n).map(|d| (u[i * n + d] - u[j * n + d]).powi(2)).sum();
                row += v * d2;
            }
            total += w[i] * row;
        }
        total
    }

    /// `Σ_ij R̄_δ (p_i − p_j)² V_i V_j` for a scalar field.
    pub fn pressure_energy(&self, p: &[f64]) -> f64 {
        let w = &self.cloud.weights;
        let mut total = 0.0;
        for i in 0..self.cloud.len() {
            let (cols, vals) = self.stab.row(i);
            let mut row = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                let j = *c as usize;
                if j != i {
                    row += v * (p[i] - p[j]).powi(2);
                }
            }
            total += w[i] * row;
        }
        total
    }
}

/// `Σ_i V_i a_i b_i` over `n`-component fields.
pub fn weighted_dot(weights: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() / weights.len();
    weights
        .iter()
        .enumerate()
        .map(|(i, w)| w * (0..n).map(|d| a[i * n + d] * b[i * n + d]).sum::<f64>())
        .sum()
}

/// V-weighted discrete L² norm of an `n`-component field.
pub fn weighted_norm(weights: &[f64], a: &[f64]) -> f64 {
    weighted_dot(weights, a, a).sqrt()
}
