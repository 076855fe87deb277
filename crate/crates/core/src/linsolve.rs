//! Iterative and direct solvers for the assembled systems.

use crate::sparse::SparseMatrix;

pub trait LinearOperator {
    fn size(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for SparseMatrix {
    fn size(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec(x, y)
    }
}

#[derive(Debug, Clone)]
pub struct KrylovOutcome {
    pub iterations: usize,
    /// True relative residual `‖b − Ax‖ / ‖b‖` at exit.
    pub residual: f64,
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("{method} did not reach relative residual {target:e} in {iterations} iterations (last {last:e})")]
pub struct KrylovFailure {
    pub method: &'static str,
    pub target: f64,
    pub iterations: usize,
    pub last: f64,
    /// Relative residual estimate after every iteration.
    pub history: Vec<f64>,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual<A: LinearOperator + ?Sized>(a: &A, b: &[f64], x: &[f64], r: &mut [f64]) -> f64 {
    a.apply(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    norm(r)
}

/// Preconditioned MINRES for symmetric (possibly indefinite) systems.
///
/// `inv_diag` is the inverse of a symmetric positive diagonal
/// preconditioner. The recurrence's residual estimate lives in the
/// preconditioned norm, so on apparent convergence the true residual is
/// checked and the iteration restarted from the current iterate until
/// `‖b − Ax‖ ≤ rtol ‖b‖` or `max_iter` total iterations are spent.
pub fn minres<A: LinearOperator + ?Sized>(
    a: &A,
    inv_diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    rtol: f64,
    max_iter: usize,
) -> Result<KrylovOutcome, KrylovFailure> {
    let n = a.size();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(KrylovOutcome {
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut history = Vec::new();
    let mut total = 0;
    let mut inner_tol = rtol;
    let mut scratch = vec![0.0; n];
    loop {
        let true_res = residual(a, b, x, &mut scratch) / bnorm;
        if true_res <= rtol {
            return Ok(KrylovOutcome {
                iterations: total,
                residual: true_res,
            });
        }
        if total >= max_iter {
            return Err(KrylovFailure {
                method: "MINRES",
                target: rtol,
                iterations: total,
                last: true_res,
                history,
            });
        }
        let (its, est) = minres_cycle(a, inv_diag, b, x, inner_tol, max_iter - total, &mut history, true_res);
        total += its;
        let after = residual(a, b, x, &mut scratch) / bnorm;
        if after > rtol && est > 0.0 {
            // Tighten the preconditioned-norm target by the observed mismatch.
            inner_tol = (inner_tol * rtol / after).max(1e-16);
        }
        if its == 0 {
            inner_tol *= 0.1;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn minres_cycle<A: LinearOperator + ?Sized>(
    a: &A,
    inv_diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    history: &mut Vec<f64>,
    start_rel: f64,
) -> (usize, f64) {
    let n = a.size();
    let mut r1 = vec![0.0; n];
    residual(a, b, x, &mut r1);
    let mut y: Vec<f64> = r1.iter().zip(inv_diag).map(|(r, m)| r * m).collect();
    let beta1 = dot(&r1, &y).sqrt();
    if beta1 == 0.0 {
        return (0, 0.0);
    }
    let mut r2 = r1.clone();
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let (mut oldb, mut beta, mut dbar, mut epsln) = (0.0, beta1, 0.0, 0.0);
    let (mut phibar, mut cs, mut sn) = (beta1, -1.0, 0.0);

    for itn in 1..=max_iter {
        let s = 1.0 / beta;
        for (vi, yi) in v.iter_mut().zip(&y) {
            *vi = s * yi;
        }
        a.apply(&v, &mut y);
        if itn >= 2 {
            let f = beta / oldb;
            for (yi, ri) in y.iter_mut().zip(&r1) {
                *yi -= f * ri;
            }
        }
        let alfa = dot(&v, &y);
        let f = alfa / beta;
        for (yi, ri) in y.iter_mut().zip(&r2) {
            *yi -= f * ri;
        }
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        for (yi, (ri, m)) in y.iter_mut().zip(r2.iter().zip(inv_diag)) {
            *yi = ri * m;
        }
        oldb = beta;
        beta = dot(&r2, &y).max(0.0).sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = (gbar * gbar + beta * beta).sqrt().max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for k in 0..n {
            w[k] = (v[k] - oldeps * w1[k] - delta * w2[k]) / gamma;
            x[k] += phi * w[k];
        }
        let est = start_rel * phibar / beta1;
        history.push(est);
        if est <= tol || beta == 0.0 {
            return (itn, est);
        }
    }
    (max_iter, start_rel * phibar / beta1)
}

/// Jacobi-preconditioned conjugate gradients for symmetric positive
/// (semi)definite systems. For singular systems `b` must lie in the range.
pub fn cg<A: LinearOperator + ?Sized>(
    a: &A,
    inv_diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    rtol: f64,
    max_iter: usize,
) -> Result<KrylovOutcome, KrylovFailure> {
    let n = a.size();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(KrylovOutcome {
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    let mut rel = residual(a, b, x, &mut r) / bnorm;
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(r, m)| r * m).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut history = Vec::new();
    for it in 0..max_iter {
        if rel <= rtol {
            return Ok(KrylovOutcome {
                iterations: it,
                residual: rel,
            });
        }
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        rel = norm(&r) / bnorm;
        history.push(rel);
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    let last = residual(a, b, x, &mut r) / bnorm;
    if last <= rtol {
        return Ok(KrylovOutcome {
            iterations: max_iter,
            residual: last,
        });
    }
    Err(KrylovFailure {
        method: "CG",
        target: rtol,
        iterations: max_iter,
        last,
        history,
    })
}

#[derive(Debug, thiserror::Error)]
pub enum DirectError {
    #[error("sparse LU factorization failed: {0}")]
    Factorization(String),
    #[error("direct solver compiled out (enable the `direct` feature)")]
    Unavailable,
}

/// Sparse LU with partial pivoting on a square scalar matrix.
#[cfg(feature = "direct")]
pub struct DirectSolver {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

#[cfg(feature = "direct")]
impl DirectSolver {
    pub fn factor(a: &SparseMatrix) -> Result<Self, DirectError> {
        use faer::sparse::{SparseColMat, Triplet};
        assert_eq!(a.block(), 1);
        let mut triplets = Vec::with_capacity(a.nnz());
        for i in 0..a.nrows() {
            let (cols, vals) = a.row(i);
            for (c, v) in cols.iter().zip(vals) {
                triplets.push(Triplet::new(i, *c as usize, *v));
            }
        }
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(a.nrows(), a.ncols(), &triplets)
            .map_err(|e| DirectError::Factorization(format!("{e:?}")))?;
        drop(triplets);
        let lu = m.sp_lu().map_err(|e| DirectError::Factorization(format!("{e:?}")))?;
        Ok(Self { lu })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        use faer::linalg::solvers::Solve;
        let rhs = faer::Col::<f64>::from_fn(b.len(), |i| b[i]);
        let x = self.lu.solve(&rhs);
        (0..b.len()).map(|i| x[i]).collect()
    }
}

#[cfg(not(feature = "direct"))]
pub struct DirectSolver;

#[cfg(not(feature = "direct"))]
impl DirectSolver {
    pub fn factor(_a: &SparseMatrix) -> Result<Self, DirectError> {
        Err(DirectError::Unavailable)
    }

    pub fn solve(&self, _b: &[f64]) -> Vec<f64> {
        unreachable!()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn indefinite() -> SparseMatrix {
        // 1-D Laplacian block coupled to a negative diagonal block.
        let n = 40;
        let mut rows = vec![Vec::new(); 2 * n];
        for i in 0..n {
            rows[i].push((i as u32, 2.0));
            if i > 0 {
                rows[i].push((i as u32 - 1, -1.0));
            }
            if i + 1 < n {
                rows[i].push((i as u32 + 1, -1.0));
            }
            rows[i].push(((n + i) as u32, 0.5));
            rows[n + i].push((i as u32, 0.5));
            rows[n + i].push(((n + i) as u32, -1.0 - i as f64 / n as f64));
        }
        SparseMatrix::from_rows(2 * n, rows)
    }

    #[test]
    fn minres_solves_indefinite() {
        let a = indefinite();
        let b: Vec<f64> = (0..a.nrows()).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let inv: Vec<f64> = (0..a.nrows()).map(|i| 1.0 / a.get(i, i).abs()).collect();
        let mut x = vec![0.0; a.nrows()];
        let out = minres(&a, &inv, &b, &mut x, 1e-12, 1000).unwrap();
        assert!(out.residual <= 1e-12);
        let r: Vec<f64> = a.apply(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm(&r) <= 1e-12 * norm(&b));
    }

    #[test]
    fn minres_reports_failure() {
        let a = indefinite();
        let b = vec![1.0; a.nrows()];
        let inv = vec![1.0; a.nrows()];
        let mut x = vec![0.0; a.nrows()];
        let err = minres(&a, &inv, &b, &mut x, 1e-14, 3).unwrap_err();
        assert_eq!(err.iterations, 3);
        assert_eq!(err.history.len(), 3);
    }

    #[test]
    fn cg_solves_spd() {
        let n = 50;
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i as u32, 2.5)];
                if i > 0 {
                    r.push((i as u32 - 1, -1.0));
                }
                if i + 1 < n {
                    r.push((i as u32 + 1, -1.0));
                }
                r
            })
            .collect();
        let a = SparseMatrix::from_rows(n, rows);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = vec![0.0; n];
        let out = cg(&a, &vec![0.4; n], &b, &mut x, 1e-12, 500).unwrap();
        assert!(out.residual <= 1e-12);
    }

    #[cfg(feature = "direct")]
    #[test]
    fn direct_matches_minres() {
        let a = indefinite();
        let b: Vec<f64> = (0..a.nrows()).map(|i| (i as f64 * 0.3).cos()).collect();
        let xd = DirectSolver::factor(&a).unwrap().solve(&b);
        let inv: Vec<f64> = (0..a.nrows()).map(|i| 1.0 / a.get(i, i).abs()).collect();
        let mut xk = vec![0.0; a.nrows()];
        minres(&a, &inv, &b, &mut xk, 1e-13, 1000).unwrap();
        let diff: f64 = xd.iter().zip(&xk).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        assert!(diff <= 1e-9 * norm(&xd));
    }
}
