//! Radial kernel profiles and their δ-rescaled, normalized forms.
//!
//! A profile `R` lives on `[0, 1]` and vanishes beyond. Its integrated form
//! `R̄(r) = ∫_r^1 R(s) ds` drives the mollifier and the pressure stabilizer.
//! Scaled kernels evaluate both at `‖x − y‖² / 4δ²`, so their support radius
//! is `2δ`.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::quadrature::integrate;

/// Absolute tolerance for every radial quadrature in this module.
pub const QUAD_TOL: f64 = 1e-12;

const FD_STEP: f64 = 1e-6;

/// Which admissibility condition a profile failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    Positivity,
    Support,
    Regularity,
    Nondegeneracy,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Assumption::Positivity => "positivity",
            Assumption::Support => "support",
            Assumption::Regularity => "regularity",
            Assumption::Nondegeneracy => "nondegeneracy",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum KernelError {
    #[error("kernel profile violates {assumption}: {detail}")]
    Assumption { assumption: Assumption, detail: String },
    #[error("unknown kernel profile `{0}`")]
    UnknownProfile(String),
    #[error("invalid kernel table: {0}")]
    InvalidTable(String),
    #[error("unsupported dimension {0} (expected 1, 2 or 3)")]
    Dimension(usize),
    #[error("horizon must be positive and finite, got {0}")]
    Delta(f64),
    #[error("normalization integral is not positive ({0})")]
    NonpositiveIntegral(f64),
    #[error("reading kernel table: {0}")]
    Csv(#[from] csv::Error),
}

fn violation(assumption: Assumption, detail: impl Into<String>) -> KernelError {
    KernelError::Assumption {
        assumption,
        detail: detail.into(),
    }
}

/// Scalar function handle used for user-supplied profiles.
pub type ProfileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Piecewise-cubic Hermite (PCHIP) interpolant of a tabulated profile.
///
/// The monotone slope limiter keeps the interpolant within the range of the
/// data on each interval, so nonnegative tables stay nonnegative.
#[derive(Debug, Clone)]
pub struct TabulatedProfile {
    knots: Vec<f64>,
    // Power-basis coefficients per interval in s = r - knots[k].
    coeffs: Vec<[f64; 4]>,
    // tail[k] = ∫_{knots[k]}^{1} R.
    tail: Vec<f64>,
}

impl TabulatedProfile {
    pub fn new(r: &[f64], values: &[f64]) -> Result<Self, KernelError> {
        if r.len() != values.len() {
            return Err(KernelError::InvalidTable("column lengths differ".into()));
        }
        if r.len() < 2 {
            return Err(KernelError::InvalidTable("need at least two rows".into()));
        }
        if r.iter().chain(values).any(|v| !v.is_finite()) {
            return Err(KernelError::InvalidTable("non-finite entry".into()));
        }
        if r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(KernelError::InvalidTable("r grid must be strictly increasing".into()));
        }
        if r[0] != 0.0 || *r.last().unwrap() != 1.0 {
            return Err(violation(
                Assumption::Support,
                format!("table must span exactly [0, 1], got [{}, {}]", r[0], r.last().unwrap()),
            ));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(violation(Assumption::Positivity, format!("R({}) = {} is negative", r[i], v)));
        }

        let n = r.len();
        let h: Vec<f64> = r.windows(2).map(|w| w[1] - w[0]).collect();
        let slope: Vec<f64> = (0..n - 1).map(|k| (values[k + 1] - values[k]) / h[k]).collect();
        let mut m = vec![0.0; n];
        if n == 2 {
            m[0] = slope[0];
            m[1] = slope[0];
        } else {
            for k in 1..n - 1 {
                if slope[k - 1] * slope[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    m[k] = (w1 + w2) / (w1 / slope[k - 1] + w2 / slope[k]);
                }
            }
            m[0] = pchip_end(h[0], h[1], slope[0], slope[1]);
            m[n - 1] = pchip_end(h[n - 2], h[n - 3], slope[n - 2], slope[n - 3]);
        }

        let coeffs: Vec<[f64; 4]> = (0..n - 1)
            .map(|k| {
                let (hk, d) = (h[k], slope[k]);
                [
                    values[k],
                    m[k],
                    (3.0 * d - 2.0 * m[k] - m[k + 1]) / hk,
                    (m[k] + m[k + 1] - 2.0 * d) / (hk * hk),
                ]
            })
            .collect();
        let mut tail = vec![0.0; n];
        for k in (0..n - 1).rev() {
            tail[k] = tail[k + 1] + poly_integral(&coeffs[k], h[k]);
        }
        Ok(Self {
            knots: r.to_vec(),
            coeffs,
            tail,
        })
    }

    /// Reads a two-column `r,R` CSV (header row required).
    pub fn from_csv_path(path: &Path) -> Result<Self, KernelError> {
        let mut reader = csv::Reader::from_path(path)?;
        let (mut r, mut v) = (Vec::new(), Vec::new());
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() < 2 {
                return Err(KernelError::InvalidTable(format!("row {} has fewer than two columns", line + 1)));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| KernelError::InvalidTable(format!("row {}: cannot parse `{}`", line + 1, s)))
            };
            r.push(parse(&record[0])?);
            v.push(parse(&record[1])?);
        }
        Self::new(&r, &v)
    }

    fn segment(&self, r: f64) -> usize {
        match self.knots.binary_search_by(|k| k.partial_cmp(&r).unwrap()) {
            Ok(i) => i.min(self.coeffs.len() - 1),
            Err(i) => i.saturating_sub(1).min(self.coeffs.len() - 1),
        }
    }

    fn value(&self, r: f64) -> f64 {
        let k = self.segment(r);
        let [a, b, c, d] = self.coeffs[k];
        let s = r - self.knots[k];
        a + s * (b + s * (c + s * d))
    }

    fn derivative(&self, r: f64) -> f64 {
        let k = self.segment(r);
        let [_, b, c, d] = self.coeffs[k];
        let s = r - self.knots[k];
        b + s * (2.0 * c + 3.0 * s * d)
    }

    fn integral_from(&self, r: f64) -> f64 {
        let k = self.segment(r);
        let s = r - self.knots[k];
        self.tail[k] - poly_integral(&self.coeffs[k], s)
    }
}

fn pchip_end(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

fn poly_integral(c: &[f64; 4], s: f64) -> f64 {
    s * (c[0] + s * (c[1] / 2.0 + s * (c[2] / 3.0 + s * c[3] / 4.0)))
}

#[derive(Clone)]
enum Shape {
    Quadratic,
    Cosine,
    Tabulated(Arc<TabulatedProfile>),
    Custom { r: ProfileFn, rprime: ProfileFn },
}

/// An admissible radial kernel profile `R` together with `R′`, `R̄` and the
/// nondegeneracy floor `γ₀ = min_{[0,1/2]} R`.
#[derive(Clone)]
pub struct KernelProfile {
    name: String,
    shape: Shape,
    gamma0: f64,
}

impl fmt::Debug for KernelProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelProfile")
            .field("name", &self.name)
            .field("gamma0", &self.gamma0)
            .finish()
    }
}

/// Names accepted by [`make_profile`].
pub const BUILTIN_PROFILES: [&str; 2] = ["quadratic", "cosine"];

/// Built-in profile by name: `"quadratic"` is `(1 − r)²`, `"cosine"` is
/// `(1 + cos πr)/2`.
pub fn make_profile(name: &str) -> Result<KernelProfile, KernelError> {
    let shape = match name {
        "quadratic" => Shape::Quadratic,
        "cosine" => Shape::Cosine,
        other => return Err(KernelError::UnknownProfile(other.to_string())),
    };
    let mut profile = KernelProfile {
        name: name.to_string(),
        shape,
        gamma0: 0.0,
    };
    // Both built-ins decrease on [0, 1].
    profile.gamma0 = profile.r(0.5);
    Ok(profile)
}

impl KernelProfile {
    /// Profile from tabulated samples, validated eagerly.
    pub fn tabulated(name: &str, table: TabulatedProfile) -> Result<Self, KernelError> {
        let profile = KernelProfile {
            name: name.to_string(),
            shape: Shape::Tabulated(Arc::new(table)),
            gamma0: 0.0,
        };
        profile.validated()
    }

    /// Profile from caller-supplied `R` and `R′`. Both are checked against
    /// every admissibility condition before the profile is returned.
    pub fn custom(name: &str, r: ProfileFn, rprime: ProfileFn) -> Result<Self, KernelError> {
        for k in 1..=200 {
            let s = 1.0 + k as f64 / 100.0;
            let v = r(s);
            if v != 0.0 {
                return Err(violation(Assumption::Support, format!("R({s}) = {v} but must vanish beyond 1")));
            }
        }
        for k in 1..200 {
            let s = k as f64 / 200.0;
            let fd = (r(s + FD_STEP) - r(s - FD_STEP)) / (2.0 * FD_STEP);
            let d = rprime(s);
            if !d.is_finite() || (fd - d).abs() > 10.0 * FD_STEP {
                return Err(violation(
                    Assumption::Regularity,
                    format!("R'({s}) = {d} disagrees with finite difference {fd}"),
                ));
            }
        }
        let profile = KernelProfile {
            name: name.to_string(),
            shape: Shape::Custom { r, rprime },
            gamma0: 0.0,
        };
        profile.validated()
    }

    fn validated(mut self) -> Result<Self, KernelError> {
        const SAMPLES: usize = 2000;
        let mut gamma0 = f64::INFINITY;
        for k in 0..=SAMPLES {
            let s = k as f64 / SAMPLES as f64;
            let v = self.r(s);
            if !v.is_finite() || v < 0.0 {
                return Err(violation(Assumption::Positivity, format!("R({s}) = {v}")));
            }
            if s <= 0.5 {
                gamma0 = gamma0.min(v);
            }
        }
        if let Shape::Tabulated(t) = &self.shape {
            for &s in t.knots.iter().filter(|s| **s <= 0.5) {
                gamma0 = gamma0.min(self.r(s));
            }
        }
        if gamma0 <= 0.0 {
            return Err(violation(
                Assumption::Nondegeneracy,
                "R must be bounded below by a positive constant on [0, 1/2]",
            ));
        }
        self.gamma0 = gamma0;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    /// `R(r)`; zero for `r > 1`.
    #[inline]
    pub fn r(&self, r: f64) -> f64 {
        if !(0.0..=1.0).contains(&r) {
            return 0.0;
        }
        match &self.shape {
            Shape::Quadratic => (1.0 - r) * (1.0 - r),
            Shape::Cosine => 0.5 * (1.0 + (std::f64::consts::PI * r).cos()),
            Shape::Tabulated(t) => t.value(r),
            Shape::Custom { r: f, .. } => f(r),
        }
    }

    /// `R′(r)`; zero for `r > 1`.
    pub fn rprime(&self, r: f64) -> f64 {
        if !(0.0..=1.0).contains(&r) {
            return 0.0;
        }
        match &self.shape {
            Shape::Quadratic => -2.0 * (1.0 - r),
            Shape::Cosine => -0.5 * std::f64::consts::PI * (std::f64::consts::PI * r).sin(),
            Shape::Tabulated(t) => t.derivative(r),
            Shape::Custom { rprime, .. } => rprime(r),
        }
    }

    /// `R̄(r) = ∫_r^1 R(s) ds`; zero for `r ≥ 1`.
    #[inline]
    pub fn rbar(&self, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        let r = r.max(0.0);
        match &self.shape {
            Shape::Quadratic => (1.0 - r).powi(3) / 3.0,
            Shape::Cosine => {
                let pi = std::f64::consts::PI;
                0.5 * (1.0 - r) - (pi * r).sin() / (2.0 * pi)
            }
            Shape::Tabulated(t) => t.integral_from(r),
            Shape::Custom { r: f, .. } => integrate(|s| f(s), r, 1.0, QUAD_TOL),
        }
    }
}

/// `R̄(r)` for any profile (free-function form).
pub fn rbar_of(profile: &KernelProfile, r: f64) -> f64 {
    profile.rbar(r)
}

/// Surface area of the unit sphere in `ℝⁿ`.
pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => f64::NAN,
    }
}

fn check_dim(dim: usize) -> Result<(), KernelError> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(KernelError::Dimension(dim))
    }
}

/// `αₙ` such that `αₙ Sₙ ∫₀² R̄(t²/4) tⁿ⁻¹ dt = 1`.
///
/// The map `t ↦ R̄(t²/4)` is supported on `[0, 2]`, so the radial integral
/// runs to 2; this makes `∫ R̄_δ = 1` hold exactly.
pub fn normalization_constant(profile: &KernelProfile, dim: usize) -> Result<f64, KernelError> {
    check_dim(dim)?;
    let p = dim as i32 - 1;
    let integral = integrate(|t| profile.rbar(0.25 * t * t) * t.powi(p), 0.0, 2.0, QUAD_TOL);
    if !(integral > 0.0) {
        return Err(KernelError::NonpositiveIntegral(integral));
    }
    Ok(1.0 / (sphere_area(dim) * integral))
}

/// A profile rescaled to horizon `δ` in dimension `n`:
/// `R_δ(x, y) = C_δ R(‖x − y‖²/4δ²)` with `C_δ = αₙ δ⁻ⁿ`.
#[derive(Debug, Clone)]
pub struct ScaledKernel {
    profile: Arc<KernelProfile>,
    delta: f64,
    dim: usize,
    alpha: f64,
    c_delta: f64,
    inv_four_delta2: f64,
}

impl ScaledKernel {
    pub fn new(profile: KernelProfile, dim: usize, delta: f64) -> Result<Self, KernelError> {
        Self::shared(Arc::new(profile), dim, delta)
    }

    pub fn shared(profile: Arc<KernelProfile>, dim: usize, delta: f64) -> Result<Self, KernelError> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(KernelError::Delta(delta));
        }
        let alpha = normalization_constant(&profile, dim)?;
        Ok(Self {
            profile,
            delta,
            dim,
            alpha,
            c_delta: alpha * delta.powi(-(dim as i32)),
            inv_four_delta2: 0.25 / (delta * delta),
        })
    }

    /// Same profile and dimension at a different horizon.
    pub fn with_delta(&self, delta: f64) -> Result<Self, KernelError> {
        Self::shared(self.profile.clone(), self.dim, delta)
    }

    pub fn profile(&self) -> &KernelProfile {
        &self.profile
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c_delta(&self) -> f64 {
        self.c_delta
    }

    pub fn support_radius(&self) -> f64 {
        2.0 * self.delta
    }

    /// `R_δ` as a function of the squared separation.
    #[inline]
    pub fn r_dist2(&self, d2: f64) -> f64 {
        self.c_delta * self.profile.r(d2 * self.inv_four_delta2)
    }

    /// `R̄_δ` as a function of the squared separation.
    #[inline]
    pub fn rbar_dist2(&self, d2: f64) -> f64 {
        self.c_delta * self.profile.rbar(d2 * self.inv_four_delta2)
    }

    pub fn eval_r(&self, x: &[f64], y: &[f64]) -> f64 {
        self.r_dist2(dist2(x, y))
    }

    pub fn eval_rbar(&self, x: &[f64], y: &[f64]) -> f64 {
        self.rbar_dist2(dist2(x, y))
    }

    /// Radial quadrature of `∫_{ℝⁿ} g(‖z‖) dz` over the kernel support.
    fn radial<F: Fn(f64) -> f64>(&self, g: F, tol: f64) -> f64 {
        let p = self.dim as i32 - 1;
        let area = sphere_area(self.dim);
        area * integrate(|t| g(t) * t.powi(p), 0.0, self.support_radius(), tol / area)
    }

    /// `∫_{ℝⁿ} R̄_δ(z) dz`; equals 1 by construction.
    pub fn normalization_integral(&self) -> f64 {
        self.radial(|t| self.rbar_dist2(t * t), QUAD_TOL)
    }

    /// `(1/2δ²) ∫ R_δ(z) z₁² dz`, which must equal 1 for the nonlocal
    /// gradient and divergence to reproduce their local limits.
    pub fn second_moment(&self) -> f64 {
        let d2 = self.delta * self.delta;
        self.radial(|t| self.r_dist2(t * t) * t * t, QUAD_TOL * d2) / (2.0 * d2 * self.dim as f64)
    }

    /// `βₙ = (1/2nδ²) ∫ R̄_δ(z) ‖z‖² dz`, the local-limit coefficient of the
    /// stabilizer (`L̄_δ ≈ βₙ δ² Δ`).
    pub fn stabilizer_coefficient(&self) -> f64 {
        let d2 = self.delta * self.delta;
        self.radial(|t| self.rbar_dist2(t * t) * t * t, QUAD_TOL * d2) / (2.0 * d2 * self.dim as f64)
    }
}

#[inline]
pub fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn builtin_values() {
        let q = make_profile("quadratic").unwrap();
        assert_eq!(q.r(0.5), 0.25);
        assert_eq!(q.gamma0(), 0.25);
        assert_eq!(q.r(1.5), 0.0);
        let c = make_profile("cosine").unwrap();
        assert!((c.r(0.5) - 0.5).abs() < 1e-15);
        assert!((c.gamma0() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rbar_quadratic() {
        let q = make_profile("quadratic").unwrap();
        assert!((rbar_of(&q, 0.0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(rbar_of(&q, 1.0), 0.0);
        assert!((rbar_of(&q, 0.5) - 1.0 / 24.0).abs() < 1e-15);
        assert_eq!(rbar_of(&q, 3.0), 0.0);
    }

    #[test]
    fn rbar_is_antiderivative_of_minus_r() {
        for name in BUILTIN_PROFILES {
            let p = make_profile(name).unwrap();
            assert!(p.rbar(1.0).abs() < 1e-15);
            let e = 1e-5;
            for k in 1..100 {
                let r = k as f64 / 100.0;
                let fd = (p.rbar(r + e) - p.rbar(r - e)) / (2.0 * e);
                assert!((fd + p.r(r)).abs() < 1e-8, "{name} r={r}");
                assert!(p.rbar(r) <= p.rbar(r - 0.01));
            }
        }
    }

    #[test]
    fn rprime_matches_finite_difference() {
        for name in BUILTIN_PROFILES {
            let p = make_profile(name).unwrap();
            for k in 1..100 {
                let r = k as f64 / 100.0;
                let fd = (p.r(r + FD_STEP) - p.r(r - FD_STEP)) / (2.0 * FD_STEP);
                assert!((fd - p.rprime(r)).abs() <= 10.0 * FD_STEP);
            }
        }
    }

    #[test]
    fn closed_form_normalization() {
        let q = make_profile("quadratic").unwrap();
        assert!((normalization_constant(&q, 2).unwrap() - 3.0 / PI).abs() < 1e-13);
        assert!((normalization_constant(&q, 1).unwrap() - 105.0 / 64.0).abs() < 1e-13);
        assert!(matches!(normalization_constant(&q, 4), Err(KernelError::Dimension(4))));
    }

    #[test]
    fn point_evaluations() {
        let k = ScaledKernel::new(make_profile("quadratic").unwrap(), 2, 0.1).unwrap();
        let x = [0.3, -0.2];
        assert!((k.eval_r(&x, &x) - 300.0 / PI).abs() < 1e-10);
        assert!((k.eval_rbar(&x, &x) - 100.0 / PI).abs() < 1e-10);
        assert_eq!(k.eval_r(&x, &[0.5, -0.2]), 0.0);
        assert_eq!(k.eval_rbar(&x, &[0.3, 0.0]), 0.0);
        let y = [0.35, -0.1];
        assert_eq!(k.eval_r(&x, &y), k.eval_r(&y, &x));
        assert!(k.eval_rbar(&x, &[0.4, -0.2]) <= k.eval_rbar(&x, &[0.35, -0.2]));
    }

    #[test]
    fn moments() {
        let q = make_profile("quadratic").unwrap();
        let k = ScaledKernel::new(q.clone(), 2, 0.1).unwrap();
        assert!((k.second_moment() - 1.0).abs() < 1e-10);
        assert!((k.stabilizer_coefficient() - 0.2).abs() < 1e-10);
        let k2 = k.with_delta(0.05).unwrap();
        assert!((k2.stabilizer_coefficient() - k.stabilizer_coefficient()).abs() < 1e-12);
        let k1 = ScaledKernel::new(q, 1, 0.05).unwrap();
        assert!((k1.second_moment() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn bad_delta() {
        let q = make_profile("quadratic").unwrap();
        assert!(matches!(ScaledKernel::new(q.clone(), 2, 0.0), Err(KernelError::Delta(_))));
        assert!(matches!(ScaledKernel::new(q, 2, f64::NAN), Err(KernelError::Delta(_))));
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(make_profile("gaussian"), Err(KernelError::UnknownProfile(_))));
    }

    fn expect_violation(res: Result<KernelProfile, KernelError>, want: Assumption) {
        match res {
            Err(KernelError::Assumption { assumption, .. }) => assert_eq!(assumption, want),
            other => panic!("expected {want} violation, got {other:?}"),
        }
    }

    #[test]
    fn custom_profile_validation() {
        let ok = KernelProfile::custom(
            "quartic",
            Arc::new(|r: f64| if r <= 1.0 { (1.0 - r * r).powi(2) } else { 0.0 }),
            Arc::new(|r: f64| if r <= 1.0 { -4.0 * r * (1.0 - r * r) } else { 0.0 }),
        );
        let ok = ok.unwrap();
        assert!((ok.gamma0() - 0.5625).abs() < 1e-12);
        // ∫_0^1 (1 - r²)² dr = 8/15
        assert!((ok.rbar(0.0) - 8.0 / 15.0).abs() < 1e-12);

        expect_violation(
            KernelProfile::custom("neg", Arc::new(|r: f64| if r <= 1.0 { r - 0.1 } else { 0.0 }), Arc::new(|_| 1.0)),
            Assumption::Positivity,
        );
        expect_violation(
            KernelProfile::custom("wide", Arc::new(|r: f64| (2.0 - r).max(0.0)), Arc::new(|_| -1.0)),
            Assumption::Support,
        );
        expect_violation(
            KernelProfile::custom("wrongderiv", Arc::new(|r: f64| if r <= 1.0 { 1.0 - r } else { 0.0 }), Arc::new(|_| 0.0)),
            Assumption::Regularity,
        );
        expect_violation(
            KernelProfile::custom("degenerate", Arc::new(|r: f64| if r <= 1.0 { r * r } else { 0.0 }), Arc::new(|r| 2.0 * r)),
            Assumption::Nondegeneracy,
        );
    }

    #[test]
    fn tabulated_profile_reproduces_quadratic() {
        let r: Vec<f64> = (0..=200).map(|k| k as f64 / 200.0).collect();
        let v: Vec<f64> = r.iter().map(|s| (1.0 - s) * (1.0 - s)).collect();
        let p = KernelProfile::tabulated("tab", TabulatedProfile::new(&r, &v).unwrap()).unwrap();
        let q = make_profile("quadratic").unwrap();
        for k in 0..=97 {
            let s = k as f64 / 97.0;
            assert!((p.r(s) - q.r(s)).abs() < 1e-5);
            assert!((p.rbar(s) - q.rbar(s)).abs() < 1e-6);
        }
        assert!((normalization_constant(&p, 2).unwrap() - 3.0 / PI).abs() < 1e-5);
    }

    #[test]
    fn tabulated_profile_errors() {
        let bad = TabulatedProfile::new(&[0.0, 0.5, 1.0], &[1.0, -0.2, 0.0]);
        match bad {
            Err(KernelError::Assumption { assumption, .. }) => assert_eq!(assumption, Assumption::Positivity),
            other => panic!("{other:?}"),
        }
        assert!(TabulatedProfile::new(&[0.0, 0.5, 0.5, 1.0], &[1.0, 1.0, 1.0, 0.0]).is_err());
        let t = TabulatedProfile::new(&[0.0, 0.3, 1.0], &[0.0, 0.0, 0.0]).unwrap();
        match KernelProfile::tabulated("zero", t) {
            Err(KernelError::Assumption { assumption, .. }) => assert_eq!(assumption, Assumption::Nondegeneracy),
            other => panic!("{other:?}"),
        }
    }
}
