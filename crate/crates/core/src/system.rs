//! The volume-constrained, stabilized nonlocal Stokes saddle-point system.
//!
//! Unknowns are ordered `[u at Interior points (n each) | p at all points | λ]`.
//! Momentum rows are imposed at Interior points only and Layer velocities are
//! eliminated (they are zero). Continuity rows are imposed at every point and
//! the multiplier `λ` enforces `Σ V_i p_i = 0`.
//!
//! Every row is multiplied by `−V_i`, which turns the quadrature scheme into
//! the symmetric block matrix
//!
//! ```text
//! [ −V L_II    V G   0 ]   [u]   [ −V M f ]
//! [ −V D_·I    V L̄   V ] · [p] = [   0    ]
//! [    0       Vᵀ    0 ]   [λ]   [   0    ]
//! ```
//!
//! Symmetry follows from `V G = −(V D)ᵀ` and the symmetric V-weighted forms
//! of `L` and `L̄`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::clock::Stopwatch;
use crate::geometry::TaggedCloud;
use crate::kernels::ScaledKernel;
use crate::linsolve::{self, DirectError, DirectSolver, KrylovFailure, LinearOperator};
use crate::operators::{weighted_dot, weighted_norm, OperatorError, OperatorSet};
use crate::sparse::{Pattern, SparseMatrix};

/// Largest system solved directly under [`Method::Auto`].
pub const DIRECT_LIMIT: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Krylov,
    Auto,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Krylov => "krylov",
            Method::Auto => "auto",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub method: Method,
    pub rtol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: Method::Auto,
            rtol: 1e-10,
            max_iter: 5000,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SystemError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("forcing has {got} entries, expected {want}")]
    ForcingLength { got: usize, want: usize },
    #[error("forcing is not finite at point {0}")]
    ForcingNotFinite(usize),
    #[error("structurally singular system: no Interior points")]
    NoInterior,
    #[error(transparent)]
    Direct(#[from] DirectError),
    #[error("direct solve residual {residual:e} exceeds {target:e} after refinement")]
    DirectResidual { residual: f64, target: f64, history: Vec<f64> },
    #[error(transparent)]
    Krylov(#[from] KrylovFailure),
    #[error("stability ratio undefined for zero forcing")]
    ZeroForcing,
}

impl SystemError {
    /// Residual history for solver failures, empty otherwise.
    pub fn residual_history(&self) -> &[f64] {
        match self {
            SystemError::DirectResidual { history, .. } => history,
            SystemError::Krylov(k) => &k.history,
            _ => &[],
        }
    }
}

/// Cloud, kernel and pointwise forcing samples `f_i ∈ ℝⁿ`.
#[derive(Debug, Clone)]
pub struct NonlocalStokesProblem {
    pub cloud: Arc<TaggedCloud>,
    pub kernel: ScaledKernel,
    /// `n` values per point.
    pub forcing: Vec<f64>,
    pub options: SolverOptions,
}

impl NonlocalStokesProblem {
    pub fn new(cloud: Arc<TaggedCloud>, kernel: ScaledKernel, forcing: Vec<f64>, options: SolverOptions) -> Result<Self, SystemError> {
        let want = cloud.len() * cloud.dim;
        if forcing.len() != want {
            return Err(SystemError::ForcingLength { got: forcing.len(), want });
        }
        if let Some(k) = forcing.iter().position(|v| !v.is_finite()) {
            return Err(SystemError::ForcingNotFinite(k / cloud.dim));
        }
        Ok(Self {
            cloud,
            kernel,
            forcing,
            options,
        })
    }

    /// Samples `f` at every cloud point.
    pub fn from_fn<F: Fn(&[f64], &mut [f64])>(
        cloud: Arc<TaggedCloud>,
        kernel: ScaledKernel,
        f: F,
        options: SolverOptions,
    ) -> Result<Self, SystemError> {
        let n = cloud.dim;
        let mut forcing = vec![0.0; cloud.len() * n];
        for i in 0..cloud.len() {
            f(cloud.point(i), &mut forcing[i * n..(i + 1) * n]);
        }
        Self::new(cloud, kernel, forcing, options)
    }
}

/// Index bookkeeping for the saddle-point unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub dim: usize,
    pub n_points: usize,
    pub n_interior: usize,
}

impl Layout {
    pub fn p_offset(&self) -> usize {
        self.dim * self.n_interior
    }

    pub fn lambda_index(&self) -> usize {
        self.p_offset() + self.n_points
    }

    pub fn size(&self) -> usize {
        self.lambda_index() + 1
    }
}

#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub ops: Arc<OperatorSet>,
    pub layout: Layout,
    pub rhs: Vec<f64>,
    /// `M f`, `n` values per point.
    pub mollified_forcing: Vec<f64>,
}

pub fn assemble_system(problem: &NonlocalStokesProblem) -> Result<AssembledSystem, SystemError> {
    let ops = Arc::new(OperatorSet::assemble(problem.cloud.clone(), problem.kernel.clone())?);
    assemble_with_operators(ops, &problem.forcing)
}

/// Builds the saddle-point system from already-assembled operators.
pub fn assemble_with_operators(ops: Arc<OperatorSet>, forcing: &[f64]) -> Result<AssembledSystem, SystemError> {
    let cloud = ops.cloud.clone();
    let n = cloud.dim;
    let npts = cloud.len();
    if forcing.len() != npts * n {
        return Err(SystemError::ForcingLength {
            got: forcing.len(),
            want: npts * n,
        });
    }
    let interior = cloud.interior();
    if interior.is_empty() {
        return Err(SystemError::NoInterior);
    }
    let layout = Layout {
        dim: n,
        n_points: npts,
        n_interior: interior.len(),
    };
    let mollified_forcing = ops.apply_mollify_vector(forcing);
    let mut rhs = vec![0.0; layout.size()];
    for (k, &i) in interior.iter().enumerate() {
        for c in 0..n {
            rhs[k * n + c] = -cloud.weights[i] * mollified_forcing[i * n + c];
        }
    }
    Ok(AssembledSystem {
        ops,
        layout,
        rhs,
        mollified_forcing,
    })
}

/// Solved fields with diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct Solution {
    /// Velocity at every point (`n` values each); exactly zero on the Layer.
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub lambda: f64,
    pub method: Method,
    pub iterations: usize,
    /// `‖b − Ax‖ / ‖b‖` (zero for a zero right-hand side).
    pub residual: f64,
    pub energy_gap: f64,
    pub solve_seconds: f64,
}

impl AssembledSystem {
    pub fn unknowns(&self) -> usize {
        self.layout.size()
    }

    /// The saddle-point matrix in compressed-row form.
    pub fn matrix(&self) -> SparseMatrix {
        let ops = &self.ops;
        let cloud = &ops.cloud;
        let layout = &self.layout;
        let n = layout.dim;
        let npts = layout.n_points;
        let interior = cloud.interior();
        let p_off = layout.p_offset();
        let lam = layout.lambda_index();
        let w = &cloud.weights;
        let pat = ops.lap.pattern().clone();

        // Exact row lengths so the arrays are allocated once.
        let interior_cols = |i: usize| pat.row(i).iter().filter(|&&j| cloud.is_interior(j as usize)).count();
        let mut row_ptr = Vec::with_capacity(layout.size() + 1);
        row_ptr.push(0usize);
        for &i in interior {
            let len = interior_cols(i) + pat.row(i).len();
            for _ in 0..n {
                row_ptr.push(row_ptr.last().unwrap() + len);
            }
        }
        for i in 0..npts {
            let len = n * interior_cols(i) + pat.row(i).len() + 1;
            row_ptr.push(row_ptr.last().unwrap() + len);
        }
        row_ptr.push(row_ptr.last().unwrap() + npts);
        let nnz = *row_ptr.last().unwrap();
        let mut col_idx: Vec<u32> = Vec::with_capacity(nnz);
        let mut values: Vec<f64> = Vec::with_capacity(nnz);

        // Momentum rows.
        for &i in interior {
            let (cols, lap) = ops.lap.row(i);
            let (_, grad) = ops.grad.row(i);
            for c in 0..n {
                for (k, &j) in cols.iter().enumerate() {
                    if let Some(s) = cloud.interior_slot(j as usize) {
                        col_idx.push((s * n + c) as u32);
                        values.push(-w[i] * lap[k]);
                    }
                }
                for (k, &j) in cols.iter().enumerate() {
                    col_idx.push((p_off + j as usize) as u32);
                    values.push(w[i] * grad[k * n + c]);
                }
            }
        }
        // Continuity rows.
        for i in 0..npts {
            let (cols, stab) = ops.stab.row(i);
            let (_, div) = ops.div.row(i);
            for (k, &j) in cols.iter().enumerate() {
                if let Some(s) = cloud.interior_slot(j as usize) {
                    for c in 0..n {
                        col_idx.push((s * n + c) as u32);
                        values.push(-w[i] * div[k * n + c]);
                    }
                }
            }
            for (k, &j) in cols.iter().enumerate() {
                col_idx.push((p_off + j as usize) as u32);
                values.push(w[i] * stab[k]);
            }
            col_idx.push(lam as u32);
            values.push(w[i]);
        }
        // Mean-zero constraint.
        for (j, wj) in w.iter().enumerate() {
            col_idx.push((p_off + j) as u32);
            values.push(*wj);
        }
        debug_assert_eq!(col_idx.len(), nnz);

        SparseMatrix::new(
            Arc::new(Pattern {
                nrows: layout.size(),
                ncols: layout.size(),
                row_ptr,
                col_idx,
            }),
            values,
            1,
        )
    }

    /// Splits a solution vector into full-cloud `u`, `p` and `λ`.
    pub fn unpack(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        let l = &self.layout;
        let n = l.dim;
        let mut u = vec![0.0; l.n_points * n];
        for (k, &i) in self.ops.cloud.interior().iter().enumerate() {
            u[i * n..(i + 1) * n].copy_from_slice(&x[k * n..(k + 1) * n]);
        }
        let p = x[l.p_offset()..l.lambda_index()].to_vec();
        (u, p, x[l.lambda_index()])
    }

    pub fn pack(&self, u: &[f64], p: &[f64], lambda: f64) -> Vec<f64> {
        let l = &self.layout;
        let n = l.dim;
        let mut x = vec![0.0; l.size()];
        for (k, &i) in self.ops.cloud.interior().iter().enumerate() {
            x[k * n..(k + 1) * n].copy_from_slice(&u[i * n..(i + 1) * n]);
        }
        x[l.p_offset()..l.lambda_index()].copy_from_slice(p);
        x[l.lambda_index()] = lambda;
        x
    }

    fn relative_residual(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; x.len()];
        LinearOperator::apply(self, x, &mut ax);
        let r: f64 = ax.iter().zip(&self.rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let b = linsolve::norm(&self.rhs);
        if b == 0.0 {
            r
        } else {
            r / b
        }
    }

    /// Inverse of a positive diagonal preconditioner: `|A_kk|` for velocity
    /// and pressure unknowns and a Schur-complement estimate for `λ`.
    fn jacobi_inverse(&self) -> Vec<f64> {
        let ops = &self.ops;
        let w = &ops.cloud.weights;
        let n = self.layout.dim;
        let p_off = self.layout.p_offset();
        let lam = self.layout.lambda_index();
        let safe_inv = |d: f64| if d > 0.0 { 1.0 / d } else { 1.0 };
        let mut inv = vec![0.0; self.unknowns()];
        for (k, &i) in ops.cloud.interior().iter().enumerate() {
            let d = safe_inv((w[i] * ops.lap.get(i, i)).abs());
            inv[k * n..(k + 1) * n].fill(d);
        }
        let mut schur = 0.0;
        for i in 0..self.layout.n_points {
            let d = safe_inv((w[i] * ops.stab.get(i, i)).abs());
            inv[p_off + i] = d;
            schur += w[i] * w[i] * d;
        }
        inv[lam] = safe_inv(schur);
        inv
    }

    /// Left-hand sides of the unscaled quadrature scheme evaluated at
    /// `(u, p)`: momentum `L u − G p − M f` at Interior points and continuity
    /// `D u − L̄ p` at every point.
    pub fn scheme_residuals(&self, u: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let ops = &self.ops;
        let n = self.layout.dim;
        let lu = ops.apply_lap_vector(u);
        let gp = ops.apply_grad(p);
        let mut momentum = Vec::with_capacity(self.layout.n_interior * n);
        for &i in ops.cloud.interior() {
            for c in 0..n {
                momentum.push(lu[i * n + c] - gp[i * n + c] - self.mollified_forcing[i * n + c]);
            }
        }
        let du = ops.apply_div(u);
        let sp = ops.apply_stab(p);
        let continuity = du.iter().zip(&sp).map(|(a, b)| a - b).collect();
        (momentum, continuity)
    }
}

/// Matrix-free product with the saddle-point matrix; agrees with
/// [`AssembledSystem::matrix`] up to summation order.
impl LinearOperator for AssembledSystem {
    fn size(&self) -> usize {
        self.unknowns()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let ops = &self.ops;
        let cloud = &ops.cloud;
        let w = &cloud.weights;
        let n = self.layout.dim;
        let p_off = self.layout.p_offset();
        let lam = self.layout.lambda_index();
        let (yu, rest) = y.split_at_mut(p_off);
        let (yp, ylam) = rest.split_at_mut(self.layout.n_points);
        let xp = &x[p_off..lam];
        let momentum = |(k, out): (usize, &mut [f64])| {
            let i = cloud.interior()[k];
            let (cols, lap) = ops.lap.row(i);
            let (_, grad) = ops.grad.row(i);
            out.fill(0.0);
            for (m, &j) in cols.iter().enumerate() {
                let j = j as usize;
                if let Some(s) = cloud.interior_slot(j) {
                    for c in 0..n {
                        out[c] -= lap[m] * x[s * n + c];
                    }
                }
                for c in 0..n {
                    out[c] += grad[m * n + c] * xp[j];
                }
            }
            for v in out.iter_mut() {
                *v *= w[i];
            }
        };
        let continuity = |(i, out): (usize, &mut f64)| {
            let (cols, stab) = ops.stab.row(i);
            let (_, div) = ops.div.row(i);
            let mut acc = x[lam];
            for (m, &j) in cols.iter().enumerate() {
                let j = j as usize;
                if let Some(s) = cloud.interior_slot(j) {
                    for c in 0..n {
                        acc -= div[m * n + c] * x[s * n + c];
                    }
                }
                acc += stab[m] * xp[j];
            }
            *out = w[i] * acc;
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            yu.par_chunks_mut(n).enumerate().for_each(momentum);
            yp.par_iter_mut().enumerate().for_each(continuity);
        }
        #[cfg(not(feature = "parallel"))]
        {
            yu.chunks_mut(n).enumerate().for_each(momentum);
            yp.iter_mut().enumerate().for_each(continuity);
        }
        ylam[0] = w.iter().zip(xp).map(|(a, b)| a * b).sum();
    }
}

pub fn solve(system: &AssembledSystem, options: &SolverOptions) -> Result<Solution, SystemError> {
    let start = Stopwatch::start();
    let size = system.unknowns();
    let method = match options.method {
        Method::Auto if size <= DIRECT_LIMIT && cfg!(feature = "direct") => Method::Direct,
        Method::Auto => Method::Krylov,
        m => m,
    };
    let bnorm = linsolve::norm(&system.rhs);
    let (x, iterations, residual) = if bnorm == 0.0 {
        (vec![0.0; size], 0, 0.0)
    } else {
        match method {
            Method::Direct => {
                let matrix = system.matrix();
                let lu = DirectSolver::factor(&matrix)?;
                drop(matrix);
                let mut x = lu.solve(&system.rhs);
                let target = options.rtol.max(1e-10);
                let mut history = vec![system.relative_residual(&x)];
                // A few steps of iterative refinement if the first solve is
                // not accurate enough.
                while *history.last().unwrap() > target && history.len() < 4 {
                    let mut ax = vec![0.0; size];
                    LinearOperator::apply(system, &x, &mut ax);
                    let r: Vec<f64> = system.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
                    let dx = lu.solve(&r);
                    x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
                    history.push(system.relative_residual(&x));
                }
                let res = *history.last().unwrap();
                if res > target {
                    return Err(SystemError::DirectResidual {
                        residual: res,
                        target,
                        history,
                    });
                }
                (x, history.len() - 1, res)
            }
            _ => {
                let inv = system.jacobi_inverse();
                let mut x = vec![0.0; size];
                let out = linsolve::minres(system, &inv, &system.rhs, &mut x, options.rtol, options.max_iter)?;
                (x, out.iterations, out.residual)
            }
        }
    };
    let (u, p, lambda) = system.unpack(&x);
    let mut solution = Solution {
        u,
        p,
        lambda,
        method,
        iterations,
        residual,
        energy_gap: 0.0,
        solve_seconds: 0.0,
    };
    solution.energy_gap = energy_identity_gap(&solution, system);
    solution.solve_seconds = start.seconds();
    Ok(solution)
}

impl NonlocalStokesProblem {
    pub fn solve(&self) -> Result<(AssembledSystem, Solution), SystemError> {
        let system = assemble_system(self)?;
        let solution = solve(&system, &self.options)?;
        Ok((system, solution))
    }
}

/// Relative defect of the discrete energy balance
/// `E_u + E_p = −2 Σ_i V_i (M f)_i · u_i`.
pub fn energy_identity_gap(solution: &Solution, system: &AssembledSystem) -> f64 {
    let ops = &system.ops;
    let e_u = ops.velocity_energy(&solution.u);
    let e_p = ops.pressure_energy(&solution.p);
    let work = weighted_dot(&ops.cloud.weights, &system.mollified_forcing, &solution.u);
    let gap = (e_u + e_p + 2.0 * work).abs();
    if gap == 0.0 {
        0.0
    } else {
        gap / e_u.max(f64::MIN_POSITIVE)
    }
}

/// `(‖u‖ + ‖p‖) / ‖f‖` in V-weighted discrete L² norms.
pub fn stability_ratio(solution: &Solution, problem: &NonlocalStokesProblem) -> Result<f64, SystemError> {
    let w = &problem.cloud.weights;
    let f = weighted_norm(w, &problem.forcing);
    if f == 0.0 {
        return Err(SystemError::ZeroForcing);
    }
    Ok((weighted_norm(w, &solution.u) + weighted_norm(w, &solution.p)) / f)
}

/// `Σ_i V_i p_i`.
pub fn pressure_mean(solution: &Solution, cloud: &TaggedCloud) -> f64 {
    cloud.weights.iter().zip(&solution.p).map(|(w, p)| w * p).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{partition, sample_grid, Domain, Tag};
    use crate::kernels::make_profile;

    fn problem(delta: f64, h: f64, f: impl Fn(&[f64], &mut [f64]), method: Method) -> NonlocalStokesProblem {
        let cloud = Arc::new(partition(&sample_grid(&Domain::unit_disk(), h).unwrap(), delta).unwrap());
        let kernel = ScaledKernel::new(make_profile("quadratic").unwrap(), 2, delta).unwrap();
        let options = SolverOptions {
            method,
            ..Default::default()
        };
        NonlocalStokesProblem::from_fn(cloud, kernel, f, options).unwrap()
    }

    fn swirl_forcing(x: &[f64], out: &mut [f64]) {
        out[0] = -32.0 * x[1] - 1.0;
        out[1] = 32.0 * x[0];
    }

    #[test]
    fn layout_arithmetic() {
        let pb = problem(0.25, 0.1, |_, o| o.fill(0.0), Method::Auto);
        let sys = assemble_system(&pb).unwrap();
        let ni = pb.cloud.interior().len();
        assert_eq!(sys.unknowns(), 2 * ni + pb.cloud.len() + 1);
        assert!(sys.rhs.iter().all(|&v| v == 0.0));
        let a = sys.matrix();
        assert_eq!(a.nrows(), sys.unknowns());
        assert!(a.pattern().is_sorted());
        assert!(a.symmetry_defect() <= 1e-12);
    }

    #[test]
    fn matrix_free_product_matches_csr() {
        let pb = problem(0.25, 0.08, swirl_forcing, Method::Auto);
        let sys = assemble_system(&pb).unwrap();
        let a = sys.matrix();
        let x: Vec<f64> = (0..sys.unknowns()).map(|k| ((k * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let dense = a.apply(&x);
        let mut free = vec![0.0; x.len()];
        LinearOperator::apply(&sys, &x, &mut free);
        let scale = linsolve::norm(&dense);
        let diff: Vec<f64> = dense.iter().zip(&free).map(|(a, b)| a - b).collect();
        assert!(linsolve::norm(&diff) <= 1e-13 * scale);
    }

    #[test]
    fn homogeneous_solution_is_zero() {
        let pb = problem(0.25, 0.1, |_, o| o.fill(0.0), Method::Krylov);
        let (_, s) = pb.solve().unwrap();
        assert!(s.u.iter().chain(&s.p).all(|&v| v == 0.0));
        assert_eq!(s.lambda, 0.0);
        assert_eq!(s.energy_gap, 0.0);
        assert!(matches!(stability_ratio(&s, &pb), Err(SystemError::ZeroForcing)));
    }

    #[test]
    fn krylov_contract_and_volume_constraint() {
        let pb = problem(0.25, 0.08, swirl_forcing, Method::Krylov);
        let (sys, s) = pb.solve().unwrap();
        assert!(s.residual <= 1e-10, "{}", s.residual);
        for i in 0..pb.cloud.len() {
            if pb.cloud.tags[i] == Tag::Layer {
                assert_eq!(s.u[2 * i], 0.0);
                assert_eq!(s.u[2 * i + 1], 0.0);
            }
        }
        let (mom, cont) = sys.scheme_residuals(&s.u, &s.p);
        let scale = linsolve::norm(&sys.mollified_forcing);
        assert!(linsolve::norm(&mom) <= 1e-6 * scale);
        assert!(cont.iter().all(|v| (v - s.lambda).abs() <= 1e-6 * scale));
    }

    #[test]
    fn forcing_validation() {
        let cloud = Arc::new(partition(&sample_grid(&Domain::unit_disk(), 0.1).unwrap(), 0.2).unwrap());
        let kernel = ScaledKernel::new(make_profile("quadratic").unwrap(), 2, 0.2).unwrap();
        let opts = SolverOptions::default();
        assert!(matches!(
            NonlocalStokesProblem::new(cloud.clone(), kernel.clone(), vec![0.0; 3], opts),
            Err(SystemError::ForcingLength { .. })
        ));
        let mut f = vec![0.0; cloud.len() * 2];
        f[5] = f64::NAN;
        assert!(matches!(
            NonlocalStokesProblem::new(cloud, kernel, f, opts),
            Err(SystemError::ForcingNotFinite(2))
        ));
    }
}
