//! Browser bindings: kernel profile curves, a small disk-swirl solve, and a
//! truncation-residual sweep over horizons.

use std::sync::Arc;

use nlstokes::analysis::{mean_aligned_l2, sample_vector, truncation_residual, Coupling, DiskSwirl, ManufacturedCase};
use nlstokes::geometry::{partition, sample_grid, Domain, Tag};
use nlstokes::kernels::{make_profile, KernelProfile, ScaledKernel, BUILTIN_PROFILES};
use nlstokes::system::{Method, NonlocalStokesProblem, SolverOptions};
use wasm_bindgen::prelude::*;

/// Largest cloud the page will build; bigger ones stall the tab.
pub const MAX_POINTS: usize = 12_000;

fn profile(name: &str) -> Result<KernelProfile, String> {
    make_profile(name).map_err(|e| e.to_string())
}

fn checked_cloud_size(h: f64) -> Result<(), String> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(format!("spacing must be positive, got {h}"));
    }
    let estimate = std::f64::consts::PI / (h * h);
    if estimate > MAX_POINTS as f64 {
        return Err(format!("h = {h} gives about {estimate:.0} points; the demo stops at {MAX_POINTS}"));
    }
    Ok(())
}

#[wasm_bindgen]
pub fn profile_names() -> Vec<String> {
    BUILTIN_PROFILES.iter().map(|s| s.to_string()).collect()
}

/// `samples` values each of `r`, `R(r)` and `R̄(r)` on `[0, 1]`, concatenated.
pub fn kernel_curves_impl(name: &str, samples: usize) -> Result<Vec<f64>, String> {
    if samples < 2 {
        return Err("need at least two samples".into());
    }
    let p = profile(name)?;
    let r: Vec<f64> = (0..samples).map(|k| k as f64 / (samples - 1) as f64).collect();
    let mut out = r.clone();
    out.extend(r.iter().map(|&s| p.r(s)));
    out.extend(r.iter().map(|&s| p.rbar(s)));
    Ok(out)
}

#[wasm_bindgen]
pub fn kernel_curves(name: &str, samples: usize) -> Result<Vec<f64>, JsError> {
    kernel_curves_impl(name, samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub struct SwirlSolve {
    coords: Vec<f64>,
    interior: Vec<u8>,
    u: Vec<f64>,
    p: Vec<f64>,
    exact_u: Vec<f64>,
    error_u: f64,
    error_p: f64,
    iterations: usize,
    residual: f64,
    energy_gap: f64,
}

#[wasm_bindgen]
impl SwirlSolve {
    /// Flat `x, y` pairs.
    #[wasm_bindgen(getter)]
    pub fn coords(&self) -> Vec<f64> {
        self.coords.clone()
    }

    /// 1 for Interior points, 0 for the Layer.
    #[wasm_bindgen(getter)]
    pub fn interior(&self) -> Vec<u8> {
        self.interior.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn u(&self) -> Vec<f64> {
        self.u.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn p(&self) -> Vec<f64> {
        self.p.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn exact_u(&self) -> Vec<f64> {
        self.exact_u.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn error_u(&self) -> f64 {
        self.error_u
    }

    #[wasm_bindgen(getter)]
    pub fn error_p(&self) -> f64 {
        self.error_p
    }

    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    #[wasm_bindgen(getter)]
    pub fn residual(&self) -> f64 {
        self.residual
    }

    #[wasm_bindgen(getter)]
    pub fn energy_gap(&self) -> f64 {
        self.energy_gap
    }
}

pub fn solve_swirl_impl(name: &str, delta: f64, h: f64) -> Result<SwirlSolve, String> {
    checked_cloud_size(h)?;
    let case = DiskSwirl::default();
    let cloud = sample_grid(&Domain::unit_disk(), h)
        .and_then(|c| partition(&c, delta))
        .map_err(|e| e.to_string())?;
    let cloud = Arc::new(cloud);
    let kernel = ScaledKernel::new(profile(name)?, 2, delta).map_err(|e| e.to_string())?;
    let options = SolverOptions {
        method: Method::Krylov,
        ..Default::default()
    };
    let problem = NonlocalStokesProblem::from_fn(cloud.clone(), kernel, |x, o| case.f(x, o), options).map_err(|e| e.to_string())?;
    let (_, sol) = problem.solve().map_err(|e| e.to_string())?;

    let exact_u = sample_vector(&cloud.coords, 2, |x, o| case.u(x, o));
    let w = &cloud.weights;
    let error_u = cloud
        .interior()
        .iter()
        .map(|&i| w[i] * ((exact_u[2 * i] - sol.u[2 * i]).powi(2) + (exact_u[2 * i + 1] - sol.u[2 * i + 1]).powi(2)))
        .sum::<f64>()
        .sqrt();
    let d: Vec<f64> = (0..cloud.len()).map(|i| case.p(cloud.point(i)) - sol.p[i]).collect();
    Ok(SwirlSolve {
        coords: cloud.coords.clone(),
        interior: cloud.tags.iter().map(|t| u8::from(*t == Tag::Interior)).collect(),
        error_u,
        error_p: mean_aligned_l2(&cloud, &d),
        iterations: sol.iterations,
        residual: sol.residual,
        energy_gap: sol.energy_gap,
        u: sol.u,
        p: sol.p,
        exact_u,
    })
}

/// Solves the disk-swirl problem at horizon `delta` on a lattice of spacing `h`.
#[wasm_bindgen]
pub fn solve_swirl(name: &str, delta: f64, h: f64) -> Result<SwirlSolve, JsError> {
    solve_swirl_impl(name, delta, h).map_err(|e| JsError::new(&e))
}

/// Truncation residual of the disk-swirl velocity for each horizon, with
/// `h = δ^exponent / divisor`.
pub fn truncation_sweep_impl(name: &str, deltas: &[f64], exponent: f64, divisor: f64) -> Result<Vec<f64>, String> {
    let coupling = Coupling::Power { exponent, divisor };
    let p = Arc::new(profile(name)?);
    deltas
        .iter()
        .map(|&delta| {
            let h = coupling.h(delta);
            checked_cloud_size(h)?;
            let cloud = sample_grid(&Domain::unit_disk(), h)
                .and_then(|c| partition(&c, delta))
                .map_err(|e| e.to_string())?;
            let kernel = ScaledKernel::shared(p.clone(), 2, delta).map_err(|e| e.to_string())?;
            truncation_residual(&DiskSwirl::default(), &cloud, &kernel).map_err(|e| e.to_string())
        })
        .collect()
}

#[wasm_bindgen]
pub fn truncation_sweep(name: &str, deltas: Vec<f64>, exponent: f64, divisor: f64) -> Result<Vec<f64>, JsError> {
    truncation_sweep_impl(name, &deltas, exponent, divisor).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curves_have_three_blocks() {
        let c = kernel_curves_impl("quadratic", 11).unwrap();
        assert_eq!(c.len(), 33);
        assert_eq!(c[0], 0.0);
        assert_eq!(c[10], 1.0);
        // R(0) = 1 and R(1) = 0 for the quadratic profile; R̄(0) = 1/3.
        assert_eq!(c[11], 1.0);
        assert_eq!(c[21], 0.0);
        assert!((c[22] - 1.0 / 3.0).abs() < 1e-14);
        assert!(kernel_curves_impl("gaussian", 11).is_err());
    }

    #[test]
    fn small_swirl_solve() {
        let s = solve_swirl_impl("cosine", 0.25, 0.06).unwrap();
        let n = s.coords.len() / 2;
        assert_eq!(s.u.len(), 2 * n);
        assert_eq!(s.interior.len(), n);
        assert!(s.residual <= 1e-10);
        assert!(s.energy_gap <= 1e-6);
        assert!(s.error_u.is_finite() && s.error_p.is_finite());
        for i in 0..n {
            if s.interior[i] == 0 {
                assert_eq!((s.u[2 * i], s.u[2 * i + 1]), (0.0, 0.0));
            }
        }
    }

    #[test]
    fn oversized_cloud_is_refused() {
        assert!(solve_swirl_impl("quadratic", 0.1, 0.005).is_err());
    }

    #[test]
    fn sweep_returns_one_value_per_horizon() {
        let r = truncation_sweep_impl("quadratic", &[0.4, 0.3], 1.5, 2.0).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|v| v.is_finite() && *v >= 0.0));
    }
}
