//! Manufactured solutions, consistency and coercivity diagnostics, error
//! norms and horizon-refinement studies.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::clock::Stopwatch;
use crate::geometry::{partition, sample_grid, Domain, GeometryError, TaggedCloud};
use crate::kernels::{dist2, KernelError, KernelProfile, ScaledKernel};
use crate::linsolve::{self, KrylovFailure};
use crate::par::map_range;
use crate::sparse::SparseMatrix;
use crate::system::{self, assemble_system, stability_ratio, Method, NonlocalStokesProblem, SolverOptions, SystemError};

/// Relative eigenvalue tolerance of the Poincaré estimates.
pub const EIGEN_TOL: f64 = 1e-6;
const EIGEN_MAX_ITER: usize = 300;

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("unknown manufactured case `{0}`")]
    UnknownCase(String),
    #[error("case `{case}` is {case_dim}-dimensional but the domain is {domain_dim}-dimensional")]
    Dimension { case: String, case_dim: usize, domain_dim: usize },
    #[error("{0}")]
    Precondition(String),
    #[error("{what}: eigenvalue iteration stagnated after {iterations} steps")]
    Stagnation {
        what: &'static str,
        iterations: usize,
        history: Vec<f64>,
    },
    #[error("{what}: inner solve failed: {source}")]
    InnerSolve {
        what: &'static str,
        #[source]
        source: KrylovFailure,
    },
}

/// A closed-form Stokes pair with `f = Δu − ∇p`.
///
/// Vector outputs are written into `out`; `grad_u` is row-major with
/// `out[a·n + b] = ∂u_a/∂x_b`.
pub trait ManufacturedCase: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn u(&self, x: &[f64], out: &mut [f64]);
    fn grad_u(&self, x: &[f64], out: &mut [f64]);
    fn lap_u(&self, x: &[f64], out: &mut [f64]);
    fn p(&self, x: &[f64]) -> f64;
    fn grad_p(&self, x: &[f64], out: &mut [f64]);

    fn f(&self, x: &[f64], out: &mut [f64]) {
        let mut g = [0.0; 3];
        let n = self.dim();
        self.lap_u(x, out);
        self.grad_p(x, &mut g[..n]);
        for (o, gi) in out.iter_mut().zip(&g[..n]) {
            *o -= gi;
        }
    }
}

impl fmt::Debug for dyn ManufacturedCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ManufacturedCase({})", self.name())
    }
}

pub const BUILTIN_CASES: [&str; 2] = ["disk-swirl", "zero"];

/// Looks up a two-dimensional built-in case.
pub fn builtin_case(name: &str) -> Result<Arc<dyn ManufacturedCase>, AnalysisError> {
    match name {
        "disk-swirl" => Ok(Arc::new(DiskSwirl::default())),
        "zero" => Ok(Arc::new(ZeroCase { dim: 2 })),
        other => Err(AnalysisError::UnknownCase(other.to_string())),
    }
}

/// Swirl on the unit disk from the stream function `ψ = (1 − ‖x‖²)²`:
/// `u = (4y(1 − ‖x‖²), −4x(1 − ‖x‖²))`, `p = x₁`, `f = (−32y − 1, 32x)`,
/// all multiplied by `amplitude`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskSwirl {
    pub amplitude: f64,
}

impl Default for DiskSwirl {
    fn default() -> Self {
        Self { amplitude: 1.0 }
    }
}

impl ManufacturedCase for DiskSwirl {
    fn name(&self) -> &str {
        "disk-swirl"
    }

    fn dim(&self) -> usize {
        2
    }

    fn u(&self, x: &[f64], out: &mut [f64]) {
        let a = self.amplitude;
        let s = 1.0 - x[0] * x[0] - x[1] * x[1];
        out[0] = a * 4.0 * x[1] * s;
        out[1] = -a * 4.0 * x[0] * s;
    }

    fn grad_u(&self, x: &[f64], out: &mut [f64]) {
        let a = self.amplitude;
        let (x, y) = (x[0], x[1]);
        out[0] = a * (-8.0 * x * y);
        out[1] = a * (4.0 - 4.0 * x * x - 12.0 * y * y);
        out[2] = a * (-4.0 + 12.0 * x * x + 4.0 * y * y);
        out[3] = a * (8.0 * x * y);
    }

    fn lap_u(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -32.0 * self.amplitude * x[1];
        out[1] = 32.0 * self.amplitude * x[0];
    }

    fn p(&self, x: &[f64]) -> f64 {
        self.amplitude * x[0]
    }

    fn grad_p(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = self.amplitude;
        out[1] = 0.0;
    }
}

/// `u = A x + b`, `p = g · x`; not divergence free in general.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearField {
    pub dim: usize,
    /// Row-major `n × n`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub g: Vec<f64>,
}

impl ManufacturedCase for LinearField {
    fn name(&self) -> &str {
        "linear"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn u(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for r in 0..n {
            out[r] = self.b[r] + (0..n).map(|c| self.a[r * n + c] * x[c]).sum::<f64>();
        }
    }

    fn grad_u(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.a);
    }

    fn lap_u(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn p(&self, x: &[f64]) -> f64 {
        self.g.iter().zip(x).map(|(g, x)| g * x).sum()
    }

    fn grad_p(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.g);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroCase {
    pub dim: usize,
}

impl ManufacturedCase for ZeroCase {
    fn name(&self) -> &str {
        "zero"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn u(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn grad_u(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn lap_u(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn p(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn grad_p(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// Evaluates an `n`-vector field at every point of a flat coordinate array.
pub fn sample_vector<F: Fn(&[f64], &mut [f64])>(coords: &[f64], dim: usize, f: F) -> Vec<f64> {
    let mut out = vec![0.0; coords.len()];
    for (x, o) in coords.chunks(dim).zip(out.chunks_mut(dim)) {
        f(x, o);
    }
    out
}

fn check_dim(case: &dyn ManufacturedCase, dim: usize) -> Result<(), AnalysisError> {
    if case.dim() != dim {
        return Err(AnalysisError::Dimension {
            case: case.name().to_string(),
            case_dim: case.dim(),
            domain_dim: dim,
        });
    }
    Ok(())
}

/// Consistency residual of the nonlocal Laplacian against the mollified
/// local Laplacian,
/// `r_i = −(1/δ²) Σ_j R_δ(u_i − u_j) V_j − Σ_j R̄_δ (Δu)_j V_j`,
/// as a V-weighted L² norm over Interior points.
pub fn truncation_residual(case: &dyn ManufacturedCase, cloud: &TaggedCloud, kernel: &ScaledKernel) -> Result<f64, AnalysisError> {
    let n = cloud.dim;
    check_dim(case, n)?;
    let u = sample_vector(&cloud.coords, n, |x, o| case.u(x, o));
    let lap = sample_vector(&cloud.coords, n, |x, o| case.lap_u(x, o));
    let inv_d2 = 1.0 / (kernel.delta() * kernel.delta());
    let interior = cloud.interior();
    let per_point = map_range(interior.len(), |k| {
        let i = interior[k];
        let xi = cloud.point(i);
        let mut nbrs = Vec::new();
        cloud.neighbors_into(i, &mut nbrs);
        let mut r = [0.0; 3];
        for &j in &nbrs {
            let j = j as usize;
            let d2 = dist2(xi, cloud.point(j));
            let (wr, wb) = (kernel.r_dist2(d2) * cloud.weights[j], kernel.rbar_dist2(d2) * cloud.weights[j]);
            for c in 0..n {
                r[c] -= inv_d2 * wr * (u[i * n + c] - u[j * n + c]) + wb * lap[j * n + c];
            }
        }
        cloud.weights[i] * r[..n].iter().map(|v| v * v).sum::<f64>()
    });
    Ok(per_point.iter().sum::<f64>().sqrt())
}

fn pair_form(
    cloud: &TaggedCloud,
    rows: &[usize],
    col_of: impl Fn(usize) -> Option<usize> + Sync,
    weight: impl Fn(f64) -> f64 + Sync,
    ncols: usize,
    extra: impl Fn(usize, f64) -> bool + Sync,
) -> SparseMatrix {
    // Assembles `Σ_{ij} K_ij (v_i − v_j)² V_i V_j` restricted to `rows`, plus
    // a diagonal mass from neighbors flagged by `extra`.
    let built = map_range(rows.len(), |k| {
        let i = rows[k];
        let xi = cloud.point(i);
        let mut nbrs = Vec::new();
        cloud.neighbors_into(i, &mut nbrs);
        let mut row: Vec<(u32, f64)> = Vec::with_capacity(nbrs.len());
        let mut diag = 0.0;
        for &j in &nbrs {
            let j = j as usize;
            if j == i {
                continue;
            }
            let wij = weight(dist2(xi, cloud.point(j))) * cloud.weights[i] * cloud.weights[j];
            match col_of(j) {
                Some(c) => {
                    row.push((c as u32, -2.0 * wij));
                    diag += 2.0 * wij;
                }
                None if extra(j, wij) => diag += wij,
                None => {}
            }
        }
        row.push((k as u32, diag));
        row
    });
    SparseMatrix::from_rows(ncols, built)
}

/// Matrix of the velocity Poincaré form over Interior points (indexed by
/// Interior slot), scaled by `δ²`:
/// `Σ_{i,j∈I} R_δ(u_i − u_j)² V_i V_j + Σ_{i∈I} u_i² V_i Σ_{j∈L} R_δ V_j`.
pub fn velocity_form_matrix(cloud: &TaggedCloud, kernel: &ScaledKernel) -> SparseMatrix {
    let interior = cloud.interior();
    pair_form(
        cloud,
        interior,
        |j| cloud.interior_slot(j),
        |d2| kernel.r_dist2(d2),
        interior.len(),
        |_, _| true,
    )
}

/// Matrix of `Σ_{ij} R̄_δ (p_i − p_j)² V_i V_j` over all points.
pub fn pressure_form_matrix(cloud: &TaggedCloud, kernel: &ScaledKernel) -> SparseMatrix {
    let all: Vec<usize> = (0..cloud.len()).collect();
    pair_form(cloud, &all, Some, |d2| kernel.rbar_dist2(d2), cloud.len(), |_, _| false)
}

#[derive(Debug, Clone, Serialize)]
pub struct PoincareEstimate {
    pub value: f64,
    pub iterations: usize,
    /// Rayleigh quotient after every outer step.
    pub history: Vec<f64>,
}

fn jacobi(a: &SparseMatrix) -> Vec<f64> {
    (0..a.nrows())
        .map(|i| {
            let d = a.get(i, i);
            if d > 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect()
}

/// Smallest `λ` of `A x = λ N x` by inverse iteration, where `N` is applied
/// through `mass`. `A` may be singular as long as `N` annihilates its null
/// space and `mass` outputs are orthogonal to it; `deflate` removes the
/// null-space component after each solve.
fn inverse_iteration(
    what: &'static str,
    a: &SparseMatrix,
    mass: impl Fn(&[f64]) -> Vec<f64>,
    deflate: impl Fn(&mut [f64]),
    mut x: Vec<f64>,
) -> Result<PoincareEstimate, AnalysisError> {
    let inv = jacobi(a);
    let quotient = |x: &[f64]| linsolve::dot(x, &a.apply(x)) / linsolve::dot(x, &mass(x));
    let mut lambda = quotient(&x);
    let mut history = vec![lambda];
    for it in 1..=EIGEN_MAX_ITER {
        let rhs = mass(&x);
        let mut y: Vec<f64> = x.iter().map(|v| v / lambda).collect();
        linsolve::cg(a, &inv, &rhs, &mut y, 1e-11, 20 * a.nrows().max(100)).map_err(|source| AnalysisError::InnerSolve { what, source })?;
        deflate(&mut y);
        let scale = linsolve::dot(&y, &mass(&y)).sqrt();
        x = y.into_iter().map(|v| v / scale).collect();
        let next = quotient(&x);
        history.push(next);
        let change = (next - lambda).abs();
        lambda = next;
        // The Rayleigh quotient converges monotonically from above, so a
        // step change well below the tolerance bounds the remaining error.
        if change <= 0.01 * EIGEN_TOL * lambda {
            return Ok(PoincareEstimate {
                value: lambda,
                iterations: it,
                history,
            });
        }
    }
    Err(AnalysisError::Stagnation {
        what,
        iterations: EIGEN_MAX_ITER,
        history,
    })
}

fn start_vector(cloud: &TaggedCloud, points: &[usize], pressure: bool) -> Vec<f64> {
    points
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let x = cloud.point(i);
            let wobble = 1e-3 * (((k * 2654435761) % 1000) as f64 / 1000.0 - 0.5);
            if pressure {
                x[0] + 0.37 * x.get(1).copied().unwrap_or(0.0) + wobble
            } else {
                1.0 + wobble
            }
        })
        .collect()
}

/// Smallest Rayleigh quotient of the velocity Poincaré form
/// `(1/δ²)[Σ_{i,j∈I} R_δ(u_i − u_j)² V_i V_j + Σ_{i∈I} u_i²(Σ_{j∈L} R_δ V_j) V_i] / Σ_{i∈I} u_i² V_i`.
pub fn poincare_constant_velocity(cloud: &TaggedCloud, kernel: &ScaledKernel) -> Result<PoincareEstimate, AnalysisError> {
    let a = velocity_form_matrix(cloud, kernel);
    let v: Vec<f64> = cloud.interior().iter().map(|&i| cloud.weights[i]).collect();
    let x0 = start_vector(cloud, cloud.interior(), false);
    let mass = |x: &[f64]| x.iter().zip(&v).map(|(a, b)| a * b).collect::<Vec<_>>();
    let mut est = inverse_iteration("velocity Poincaré constant", &a, mass, |_| {}, x0)?;
    let s = 1.0 / (kernel.delta() * kernel.delta());
    est.value *= s;
    est.history.iter_mut().for_each(|h| *h *= s);
    Ok(est)
}

/// Smallest Rayleigh quotient of `(1/δ²) Σ_{ij} R̄_δ(p_i − p_j)² V_i V_j / Σ_i V_i p_i²`
/// over fields with `Σ_{i∈I} V_i p_i = 0`.
pub fn poincare_constant_pressure(cloud: &TaggedCloud, kernel: &ScaledKernel) -> Result<PoincareEstimate, AnalysisError> {
    let b = pressure_form_matrix(cloud, kernel);
    let npts = cloud.len();
    let v = &cloud.weights;
    let c: Vec<f64> = (0..npts).map(|i| if cloud.is_interior(i) { v[i] } else { 0.0 }).collect();
    let c_total: f64 = c.iter().sum();
    // Q z = z − 1 (cᵀz)/(cᵀ1) maps any field onto the constraint set and is
    // blind to constants, the null space of the form.
    let project = |z: &[f64]| {
        let s = linsolve::dot(&c, z) / c_total;
        z.iter().map(|zi| zi - s).collect::<Vec<_>>()
    };
    let mass = |z: &[f64]| {
        let q = project(z);
        let mq: Vec<f64> = q.iter().zip(v).map(|(a, b)| a * b).collect();
        let total: f64 = mq.iter().sum();
        mq.iter().zip(&c).map(|(m, ci)| m - ci * total / c_total).collect::<Vec<_>>()
    };
    let deflate = |y: &mut [f64]| {
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        y.iter_mut().for_each(|v| *v -= mean);
    };
    let all: Vec<usize> = (0..npts).collect();
    let x0 = project(&start_vector(cloud, &all, true));
    let mut est = inverse_iteration("pressure Poincaré constant", &b, mass, deflate, x0)?;
    let s = 1.0 / (kernel.delta() * kernel.delta());
    est.value *= s;
    est.history.iter_mut().for_each(|h| *h *= s);
    Ok(est)
}

/// `Σ_{i∈Layer} V_i |u(x_i)|²` on a lattice cloud of spacing `h`.
pub fn boundary_layer_norm(case: &dyn ManufacturedCase, domain: &Domain, delta: f64, h: f64) -> Result<f64, AnalysisError> {
    check_dim(case, domain.dim)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(GeometryError::Delta(delta).into());
    }
    let cloud = sample_grid(domain, h)?;
    let n = cloud.dim;
    let mut u = vec![0.0; n];
    let mut total = 0.0;
    for i in 0..cloud.len() {
        if cloud.distance[i] >= -2.0 * delta {
            case.u(cloud.point(i), &mut u);
            total += cloud.weights[i] * u.iter().map(|v| v * v).sum::<f64>();
        }
    }
    Ok(total)
}

/// Discretization parameters for one solve.
#[derive(Debug, Clone)]
pub struct SolveSetup {
    pub domain: Domain,
    pub profile: Arc<KernelProfile>,
    pub delta: f64,
    pub h: f64,
    pub options: SolverOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub n_points: usize,
    pub n_interior: usize,
    pub unknowns: usize,
    /// V-weighted L² of `u − u_δ` over Interior points.
    pub error_u_l2: f64,
    /// `√[(1/δ²) Σ_ij R_δ |e_i − e_j|² V_i V_j]` with `e = u − u_δ`.
    pub error_u_energy: f64,
    /// V-weighted L² over all points of `p − p_δ` minus its Interior mean.
    pub error_p_l2: f64,
    pub method: Method,
    pub iterations: usize,
    pub residual: f64,
    pub energy_gap: f64,
    pub stability_ratio: Option<f64>,
    pub assemble_seconds: f64,
    pub solve_seconds: f64,
}

/// Solves the nonlocal system for the case's forcing and measures the
/// distance to the exact local solution.
pub fn solve_errors(case: &dyn ManufacturedCase, setup: &SolveSetup) -> Result<ErrorRecord, AnalysisError> {
    check_dim(case, setup.domain.dim)?;
    let start = Stopwatch::start();
    let cloud = Arc::new(partition(&sample_grid(&setup.domain, setup.h)?, setup.delta)?);
    let kernel = ScaledKernel::shared(setup.profile.clone(), cloud.dim, setup.delta)?;
    let problem = NonlocalStokesProblem::from_fn(cloud.clone(), kernel, |x, o| case.f(x, o), setup.options)?;
    let sys = assemble_system(&problem)?;
    let assemble_seconds = start.seconds();
    let sol = system::solve(&sys, &setup.options)?;
    let n = cloud.dim;
    let w = &cloud.weights;
    let u_exact = sample_vector(&cloud.coords, n, |x, o| case.u(x, o));
    let e: Vec<f64> = u_exact.iter().zip(&sol.u).map(|(a, b)| a - b).collect();
    let error_u_l2 = cloud
        .interior()
        .iter()
        .map(|&i| w[i] * e[i * n..(i + 1) * n].iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    let error_u_energy = sys.ops.velocity_energy(&e).max(0.0).sqrt();
    let d: Vec<f64> = (0..cloud.len()).map(|i| case.p(cloud.point(i)) - sol.p[i]).collect();
    let error_p_l2 = mean_aligned_l2(&cloud, &d);
    Ok(ErrorRecord {
        n_points: cloud.len(),
        n_interior: cloud.interior().len(),
        unknowns: sys.unknowns(),
        error_u_l2,
        error_u_energy,
        error_p_l2,
        method: sol.method,
        iterations: sol.iterations,
        residual: sol.residual,
        energy_gap: sol.energy_gap,
        stability_ratio: stability_ratio(&sol, &problem).ok(),
        assemble_seconds,
        solve_seconds: sol.solve_seconds,
    })
}

/// V-weighted L² norm over all points of `d` minus its V-weighted mean over
/// Interior points.
pub fn mean_aligned_l2(cloud: &TaggedCloud, d: &[f64]) -> f64 {
    let w = &cloud.weights;
    let (num, den) = cloud.interior().iter().fold((0.0, 0.0), |(a, b), &i| (a + w[i] * d[i], b + w[i]));
    let mean = num / den;
    d.iter().zip(w).map(|(di, wi)| wi * (di - mean).powi(2)).sum::<f64>().sqrt()
}

/// How the lattice spacing follows the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coupling {
    Fixed {
        h: f64,
    },
    /// `h = δ^exponent / divisor`.
    Power {
        exponent: f64,
        divisor: f64,
    },
}

impl Default for Coupling {
    fn default() -> Self {
        Coupling::Power { exponent: 1.5, divisor: 2.0 }
    }
}

impl Coupling {
    pub fn h(&self, delta: f64) -> f64 {
        match *self {
            Coupling::Fixed { h } => h,
            Coupling::Power { exponent, divisor } => delta.powf(exponent) / divisor,
        }
    }

    /// Parses `delta^a/c`, `delta^a`, `delta/c` or `delta`.
    pub fn parse_rule(rule: &str) -> Option<Self> {
        let rest = rule.trim().strip_prefix("delta")?;
        let (power, div) = match rest.split_once('/') {
            Some((p, d)) => (p, Some(d)),
            None => (rest, None),
        };
        let exponent = match power.strip_prefix('^') {
            Some(a) => a.trim().parse().ok()?,
            None if power.trim().is_empty() => 1.0,
            None => return None,
        };
        let divisor = match div {
            Some(d) => d.trim().parse().ok()?,
            None => 1.0,
        };
        let ok = |v: f64| v.is_finite() && v > 0.0;
        (ok(exponent) && ok(divisor)).then_some(Coupling::Power { exponent, divisor })
    }
}

impl fmt::Display for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coupling::Fixed { h } => write!(f, "h={h}"),
            Coupling::Power { exponent, divisor } => write!(f, "delta^{exponent}/{divisor}"),
        }
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyRecord {
    pub delta: f64,
    pub h: f64,
    pub errors: Option<ErrorRecord>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservedOrders {
    pub error_u_l2: f64,
    pub error_u_energy: f64,
    pub error_p_l2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub case: String,
    pub domain: String,
    pub kernel: String,
    pub coupling: String,
    pub solver: SolverOptions,
    pub version: String,
    /// Sorted by descending δ.
    pub records: Vec<StudyRecord>,
    /// Present when at least three ladder points succeeded.
    pub orders: Option<ObservedOrders>,
}

/// Runs [`solve_errors`] down a descending ladder of horizons and fits
/// observed orders. A failing ladder point is recorded, not fatal.
pub fn convergence_study(
    case: &dyn ManufacturedCase,
    domain: &Domain,
    profile: Arc<KernelProfile>,
    deltas: &[f64],
    coupling: Coupling,
    options: SolverOptions,
) -> Result<StudyReport, AnalysisError> {
    if deltas.len() < 3 {
        return Err(AnalysisError::Precondition(format!(
            "a study needs at least 3 horizons, got {}",
            deltas.len()
        )));
    }
    if deltas.windows(2).any(|w| !(w[0] > w[1])) || deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(AnalysisError::Precondition("horizons must be positive and strictly descending".into()));
    }
    check_dim(case, domain.dim)?;
    let mut records = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let h = coupling.h(delta);
        let setup = SolveSetup {
            domain: domain.clone(),
            profile: profile.clone(),
            delta,
            h,
            options,
        };
        let (errors, failure) = match solve_errors(case, &setup) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        records.push(StudyRecord { delta, h, errors, failure });
    }
    let orders = observed_orders(&records);
    Ok(StudyReport {
        case: case.name().to_string(),
        domain: domain.name.clone(),
        kernel: profile.name().to_string(),
        coupling: coupling.to_string(),
        solver: options,
        version: concat!("nlstokes ", env!("CARGO_PKG_VERSION")).to_string(),
        records,
        orders,
    })
}

fn observed_orders(records: &[StudyRecord]) -> Option<ObservedOrders> {
    let ok: Vec<(f64, &ErrorRecord)> = records.iter().filter_map(|r| r.errors.as_ref().map(|e| (r.delta, e))).collect();
    if ok.len() < 3 {
        return None;
    }
    let d: Vec<f64> = ok.iter().map(|(d, _)| *d).collect();
    let col = |f: fn(&ErrorRecord) -> f64| loglog_slope(&d, &ok.iter().map(|(_, e)| f(e)).collect::<Vec<_>>());
    Some(ObservedOrders {
        error_u_l2: col(|e| e.error_u_l2),
        error_u_energy: col(|e| e.error_u_energy),
        error_p_l2: col(|e| e.error_p_l2),
    })
}

pub const STUDY_CSV_HEADER: [&str; 13] = [
    "delta",
    "h",
    "n_points",
    "unknowns",
    "method",
    "iterations",
    "residual",
    "energy_gap",
    "stability_ratio",
    "error_u_l2",
    "error_u_energy",
    "error_p_l2",
    "status",
];

impl StudyReport {
    pub fn failed(&self) -> bool {
        self.records.iter().any(|r| r.failure.is_some())
    }

    /// One row per ladder point followed by `# order,...` lines. Timings are
    /// left out so reruns of a direct-solver study are byte-identical.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(STUDY_CSV_HEADER)?;
        for r in &self.records {
            let mut row = vec![format!("{:e}", r.delta), format!("{:e}", r.h)];
            match (&r.errors, &r.failure) {
                (Some(e), _) => row.extend([
                    e.n_points.to_string(),
                    e.unknowns.to_string(),
                    e.method.as_str().to_string(),
                    e.iterations.to_string(),
                    format!("{:e}", e.residual),
                    format!("{:e}", e.energy_gap),
                    e.stability_ratio.map(|s| format!("{s:e}")).unwrap_or_default(),
                    format!("{:e}", e.error_u_l2),
                    format!("{:e}", e.error_u_energy),
                    format!("{:e}", e.error_p_l2),
                    "ok".to_string(),
                ]),
                (None, f) => {
                    row.extend(std::iter::repeat_n(String::new(), 10));
                    row.push(format!("failed: {}", f.as_deref().unwrap_or("unknown")));
                }
            }
            out.write_record(&row)?;
        }
        let mut inner = out.into_inner().map_err(|e| e.into_error())?;
        match &self.orders {
            Some(o) => {
                writeln!(inner, "# order,error_u_l2,error_u_energy,error_p_l2")?;
                writeln!(inner, "# order,{:e},{:e},{:e}", o.error_u_l2, o.error_u_energy, o.error_p_l2)?;
            }
            None => writeln!(inner, "# order,unavailable (fewer than 3 successful ladder points)")?,
        }
        inner.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::make_profile;

    fn kernel(delta: f64) -> ScaledKernel {
        ScaledKernel::new(make_profile("quadratic").unwrap(), 2, delta).unwrap()
    }

    fn disk_cloud(delta: f64, h: f64) -> TaggedCloud {
        partition(&sample_grid(&Domain::unit_disk(), h).unwrap(), delta).unwrap()
    }

    #[test]
    fn disk_swirl_values() {
        let c = DiskSwirl::default();
        let x = [0.5, 0.0];
        let (mut u, mut f) = ([0.0; 2], [0.0; 2]);
        c.u(&x, &mut u);
        c.f(&x, &mut f);
        assert!((u[0] - 0.0).abs() < 1e-15 && (u[1] + 1.5).abs() < 1e-15);
        assert_eq!(c.p(&x), 0.5);
        assert!((f[0] + 1.0).abs() < 1e-14 && (f[1] - 16.0).abs() < 1e-14);
    }

    #[test]
    fn disk_swirl_derivatives_match_finite_differences() {
        let c = DiskSwirl { amplitude: 1.3 };
        let eps = 1e-4;
        for x in [[0.3, -0.2], [-0.6, 0.1], [0.05, 0.7]] {
            let mut g = [0.0; 4];
            c.grad_u(&x, &mut g);
            let mut lap_fd = [0.0; 2];
            for b in 0..2 {
                let (mut xp, mut xm) = (x, x);
                xp[b] += eps;
                xm[b] -= eps;
                let (mut up, mut um, mut u0) = ([0.0; 2], [0.0; 2], [0.0; 2]);
                c.u(&xp, &mut up);
                c.u(&xm, &mut um);
                c.u(&x, &mut u0);
                for a in 0..2 {
                    assert!(((up[a] - um[a]) / (2.0 * eps) - g[a * 2 + b]).abs() < 1e-6);
                    lap_fd[a] += (up[a] - 2.0 * u0[a] + um[a]) / (eps * eps);
                }
            }
            let mut lap = [0.0; 2];
            c.lap_u(&x, &mut lap);
            assert!((lap[0] - lap_fd[0]).abs() < 1e-5 && (lap[1] - lap_fd[1]).abs() < 1e-5);
            assert!((g[0] + g[3]).abs() < 1e-12);
        }
    }

    #[test]
    fn unknown_case() {
        assert!(matches!(builtin_case("lid-driven"), Err(AnalysisError::UnknownCase(_))));
        assert_eq!(builtin_case("disk-swirl").unwrap().name(), "disk-swirl");
    }

    #[test]
    fn truncation_residual_vanishes_on_linear_fields() {
        let cloud = disk_cloud(0.2, 0.05);
        let lin = LinearField {
            dim: 2,
            a: vec![1.0, -2.0, 0.5, 3.0],
            b: vec![0.25, -1.0],
            g: vec![0.0, 0.0],
        };
        assert!(truncation_residual(&lin, &cloud, &kernel(0.2)).unwrap() <= 1e-10);
    }

    // Quartic velocity with a nonzero continuum truncation term; the swirl's
    // cubic velocity has none, leaving only quadrature error.
    struct Quartic;

    impl ManufacturedCase for Quartic {
        fn name(&self) -> &str {
            "quartic"
        }
        fn dim(&self) -> usize {
            2
        }
        fn u(&self, x: &[f64], out: &mut [f64]) {
            out[0] = x[0].powi(4);
            out[1] = x[0] * x[0] * x[1] * x[1];
        }
        fn grad_u(&self, x: &[f64], out: &mut [f64]) {
            out.copy_from_slice(&[4.0 * x[0].powi(3), 0.0, 2.0 * x[0] * x[1] * x[1], 2.0 * x[0] * x[0] * x[1]]);
        }
        fn lap_u(&self, x: &[f64], out: &mut [f64]) {
            out[0] = 12.0 * x[0] * x[0];
            out[1] = 2.0 * (x[0] * x[0] + x[1] * x[1]);
        }
        fn p(&self, _x: &[f64]) -> f64 {
            0.0
        }
        fn grad_p(&self, _x: &[f64], out: &mut [f64]) {
            out.fill(0.0);
        }
    }

    #[test]
    fn truncation_residual_shrinks_with_delta() {
        let h = 0.01;
        let r1 = truncation_residual(&Quartic, &disk_cloud(0.2, h), &kernel(0.2)).unwrap();
        let r2 = truncation_residual(&Quartic, &disk_cloud(0.1, h), &kernel(0.1)).unwrap();
        assert!(r2 <= 0.5 * r1, "{r1} {r2}");
    }

    #[test]
    fn velocity_constant_is_positive_and_below_constant_field_quotient() {
        let delta = 0.2;
        let cloud = disk_cloud(delta, 0.05);
        let k = kernel(delta);
        let est = poincare_constant_velocity(&cloud, &k).unwrap();
        assert!(est.value > 0.0);
        let mut layer_mass = 0.0;
        let mut vol = 0.0;
        let mut nbrs = Vec::new();
        for &i in cloud.interior() {
            cloud.neighbors_into(i, &mut nbrs);
            let m: f64 = nbrs
                .iter()
                .filter(|&&j| !cloud.is_interior(j as usize))
                .map(|&j| k.eval_r(cloud.point(i), cloud.point(j as usize)) * cloud.weights[j as usize])
                .sum();
            layer_mass += m * cloud.weights[i];
            vol += cloud.weights[i];
        }
        let constant_quotient = layer_mass / (delta * delta * vol);
        assert!(est.value <= constant_quotient * (1.0 + 1e-9));
    }

    #[test]
    fn pressure_constant_positive_and_constants_are_null() {
        let delta = 0.2;
        let cloud = disk_cloud(delta, 0.05);
        let k = kernel(delta);
        let est = poincare_constant_pressure(&cloud, &k).unwrap();
        assert!(est.value > 0.0);
        let b = pressure_form_matrix(&cloud, &k);
        let ones = vec![1.0; cloud.len()];
        let q = linsolve::dot(&ones, &b.apply(&ones));
        assert!(q.abs() <= 1e-12 * b.values().iter().map(|v| v.abs()).sum::<f64>());
    }

    #[test]
    fn boundary_layer_norm_properties() {
        let d = Domain::unit_disk();
        assert_eq!(boundary_layer_norm(&ZeroCase { dim: 2 }, &d, 0.1, 0.01).unwrap(), 0.0);
        let a = boundary_layer_norm(&DiskSwirl::default(), &d, 0.1, 0.01).unwrap();
        let b = boundary_layer_norm(&DiskSwirl::default(), &d, 0.05, 0.005).unwrap();
        assert!(b < a);
    }

    #[test]
    fn solve_errors_scale_with_amplitude_and_ignore_pressure_shift() {
        let setup = SolveSetup {
            domain: Domain::unit_disk(),
            profile: Arc::new(make_profile("quadratic").unwrap()),
            delta: 0.32,
            h: 0.08,
            options: SolverOptions::default(),
        };
        let one = solve_errors(&DiskSwirl::default(), &setup).unwrap();
        let two = solve_errors(&DiskSwirl { amplitude: 2.0 }, &setup).unwrap();
        for (a, b) in [
            (one.error_u_l2, two.error_u_l2),
            (one.error_u_energy, two.error_u_energy),
            (one.error_p_l2, two.error_p_l2),
        ] {
            assert!(a.is_finite() && a > 0.0);
            assert!((b - 2.0 * a).abs() <= 1e-8 * b, "{a} {b}");
        }
        let cloud = disk_cloud(0.32, 0.08);
        let d: Vec<f64> = (0..cloud.len()).map(|i| cloud.point(i)[0].powi(2)).collect();
        let shifted: Vec<f64> = d.iter().map(|v| v + 7.5).collect();
        assert!((mean_aligned_l2(&cloud, &d) - mean_aligned_l2(&cloud, &shifted)).abs() < 1e-12);
    }

    #[test]
    fn study_preconditions() {
        let p = Arc::new(make_profile("quadratic").unwrap());
        let d = Domain::unit_disk();
        let c = DiskSwirl::default();
        let opts = SolverOptions::default();
        assert!(matches!(
            convergence_study(&c, &d, p.clone(), &[0.3], Coupling::default(), opts),
            Err(AnalysisError::Precondition(_))
        ));
        assert!(matches!(
            convergence_study(&c, &d, p, &[0.3, 0.4, 0.2], Coupling::default(), opts),
            Err(AnalysisError::Precondition(_))
        ));
    }

    #[test]
    fn coupling_rules() {
        assert_eq!(Coupling::parse_rule("delta^1.5/2"), Some(Coupling::default()));
        assert_eq!(Coupling::parse_rule("delta/4"), Some(Coupling::Power { exponent: 1.0, divisor: 4.0 }));
        assert_eq!(Coupling::parse_rule("delta^2"), Some(Coupling::Power { exponent: 2.0, divisor: 1.0 }));
        assert_eq!(Coupling::parse_rule("h^2"), None);
        assert_eq!(Coupling::parse_rule("delta^-1"), None);
        assert!((Coupling::default().h(0.16) - 0.032).abs() < 1e-15);
        assert_eq!(Coupling::default().to_string(), "delta^1.5/2");
    }

    #[test]
    fn slope_of_power_law() {
        let x = [0.4, 0.2, 0.1, 0.05];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.7)).collect();
        assert!((loglog_slope(&x, &y) - 1.7).abs() < 1e-12);
    }
}
