//! Run configuration (JSON). See `docs/config.md` for the schema.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nlstokes::analysis::{builtin_case, Coupling, ManufacturedCase, ZeroCase};
use nlstokes::geometry::{Domain, BUILTIN_DOMAINS};
use nlstokes::kernels::{make_profile, KernelProfile, TabulatedProfile};
use nlstokes::system::{Method, SolverOptions};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub version: Option<u32>,
    pub domain: DomainConfig,
    pub kernel: KernelConfig,
    pub delta: DeltaSpec,
    #[serde(default)]
    pub coupling: Option<CouplingConfig>,
    pub case: CaseConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub name: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default)]
    pub profile: Option<String>,
    /// Two-column `r,R` CSV, relative to the config file.
    #[serde(default)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaSpec {
    Single(f64),
    Ladder(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub rule: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CaseConfig {
    Named(String),
    Table(ForcingTable),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingTable {
    /// CSV with columns `x1..xn,f1..fn`, relative to the config file.
    pub forcing_table: PathBuf,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_method() -> Method {
    SolverOptions::default().method
}

fn default_rtol() -> f64 {
    SolverOptions::default().rtol
}

fn default_max_iter() -> usize {
    SolverOptions::default().max_iter
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            method: d.method,
            rtol: d.rtol,
            max_iter: d.max_iter,
        }
    }
}

/// Forcing source after resolution.
#[derive(Debug, Clone)]
pub enum Forcing {
    Case(Arc<dyn ManufacturedCase>),
    Table(PathBuf),
}

/// A validated configuration with every name resolved.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub raw: RunConfig,
    pub domain: Domain,
    pub profile: Result<Arc<KernelProfile>, String>,
    pub deltas: Vec<f64>,
    pub coupling: Coupling,
    pub forcing: Forcing,
    pub options: SolverOptions,
    pub output: Option<PathBuf>,
}

fn bad(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {msg}"))
}

pub fn load(path: &Path) -> Result<Resolved, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let raw: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        if at == "." {
            CliError::Config(e.inner().to_string())
        } else {
            bad(&at, e.inner())
        }
    })?;
    resolve(raw, path.parent().unwrap_or(Path::new(".")))
}

fn resolve(raw: RunConfig, base: &Path) -> Result<Resolved, CliError> {
    if let Some(v) = raw.version {
        if v != SCHEMA_VERSION {
            return Err(bad(
                "version",
                format!("unsupported schema version {v} (this build reads {SCHEMA_VERSION})"),
            ));
        }
    }
    let domain = resolve_domain(&raw.domain)?;

    // A bad kernel table is reported by `check`, so keep the error instead of failing here.
    let profile = match (&raw.kernel.profile, &raw.kernel.table) {
        (Some(name), None) => Ok(make_profile(name).map_err(|e| bad("kernel.profile", e))?),
        (None, Some(table)) => {
            let path = base.join(table);
            if !path.is_file() {
                return Err(bad("kernel.table", format!("no such file {}", path.display())));
            }
            let stem = table.file_stem().and_then(|s| s.to_str()).unwrap_or("table").to_string();
            TabulatedProfile::from_csv_path(&path)
                .and_then(|t| KernelProfile::tabulated(&stem, t))
                .map_err(|e| e.to_string())
        }
        _ => return Err(bad("kernel", "give exactly one of `profile` or `table`")),
    }
    .map(Arc::new);

    let deltas = match &raw.delta {
        DeltaSpec::Single(d) => vec![*d],
        DeltaSpec::Ladder(v) => v.clone(),
    };
    if deltas.is_empty() {
        return Err(bad("delta", "ladder is empty"));
    }
    if let Some(d) = deltas.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        return Err(bad("delta", format!("horizons must be positive and finite, got {d}")));
    }
    if deltas.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(bad("delta", "ladder values must be strictly descending"));
    }

    let coupling = match &raw.coupling {
        None => Coupling::default(),
        Some(CouplingConfig { h: Some(h), rule: None }) => {
            if !(*h > 0.0 && h.is_finite()) {
                return Err(bad("coupling.h", format!("spacing must be positive, got {h}")));
            }
            Coupling::Fixed { h: *h }
        }
        Some(CouplingConfig { h: None, rule: Some(rule) }) => {
            Coupling::parse_rule(rule).ok_or_else(|| bad("coupling.rule", format!("cannot parse `{rule}` (expected delta^a/c)")))?
        }
        Some(_) => return Err(bad("coupling", "give exactly one of `h` or `rule`")),
    };

    let forcing = match &raw.case {
        // The zero case makes sense in any dimension.
        CaseConfig::Named(name) if name == "zero" => Forcing::Case(Arc::new(ZeroCase { dim: domain.dim })),
        CaseConfig::Named(name) => {
            let case = builtin_case(name).map_err(|e| bad("case", e))?;
            if case.dim() != domain.dim {
                return Err(bad(
                    "case",
                    format!("`{name}` is {}-dimensional but the domain is {}-dimensional", case.dim(), domain.dim),
                ));
            }
            Forcing::Case(case)
        }
        CaseConfig::Table(t) => {
            let path = base.join(&t.forcing_table);
            if !path.is_file() {
                return Err(bad("case.forcing_table", format!("no such file {}", path.display())));
            }
            Forcing::Table(path)
        }
    };

    let s = raw.solver;
    if !(s.rtol > 0.0 && s.rtol.is_finite()) {
        return Err(bad("solver.rtol", format!("tolerance must be positive, got {}", s.rtol)));
    }
    if s.max_iter == 0 {
        return Err(bad("solver.max_iter", "must be positive"));
    }
    let options = SolverOptions {
        method: s.method,
        rtol: s.rtol,
        max_iter: s.max_iter,
    };
    let output = raw.output.as_ref().map(|o| base.join(o));
    Ok(Resolved {
        domain,
        profile,
        deltas,
        coupling,
        forcing,
        options,
        output,
        raw,
    })
}

fn resolve_domain(cfg: &DomainConfig) -> Result<Domain, CliError> {
    if cfg.name == "disk" {
        for key in cfg.parameters.keys() {
            if key != "radius" {
                return Err(bad(&format!("domain.parameters.{key}"), "unknown parameter (disk takes `radius`)"));
            }
        }
        let r = *cfg
            .parameters
            .get("radius")
            .ok_or_else(|| bad("domain.parameters.radius", "required for `disk`"))?;
        if !(r > 0.0 && r.is_finite()) {
            return Err(bad("domain.parameters.radius", format!("must be positive, got {r}")));
        }
        return Ok(Domain::disk(r));
    }
    if let Some(key) = cfg.parameters.keys().next() {
        return Err(bad(&format!("domain.parameters.{key}"), format!("`{}` takes no parameters", cfg.name)));
    }
    Domain::builtin(&cfg.name).map_err(|_| {
        bad(
            "domain.name",
            format!("unknown domain `{}` (known: disk, {})", cfg.name, BUILTIN_DOMAINS.join(", ")),
        )
    })
}

impl Resolved {
    pub fn profile(&self) -> Result<Arc<KernelProfile>, CliError> {
        self.profile.clone().map_err(|e| bad("kernel.table", e))
    }

    pub fn single_delta(&self) -> Result<f64, CliError> {
        match self.deltas.as_slice() {
            [d] => Ok(*d),
            _ => Err(bad("delta", "this command takes a single horizon, not a ladder")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Resolved, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| bad(&e.path().to_string(), e.inner()))?;
        resolve(raw, Path::new("."))
    }

    const MINIMAL: &str = r#"{"domain":{"name":"unit-disk"},"kernel":{"profile":"quadratic"},"delta":0.2,"case":"disk-swirl"}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let r = parse(MINIMAL).unwrap();
        assert_eq!(r.deltas, vec![0.2]);
        assert_eq!(r.coupling, Coupling::default());
        assert_eq!(r.options.rtol, 1e-10);
        assert_eq!(r.raw.seed, 0);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace(r#""delta":0.2"#, r#""delta":0.2,"detla":1"#);
        let msg = parse(&text).unwrap_err().to_string();
        assert!(msg.contains("detla"), "{msg}");
    }

    #[test]
    fn nested_type_error_names_path() {
        let text = MINIMAL.replace(r#""case":"disk-swirl""#, r#""case":"disk-swirl","solver":{"rtol":"tight"}"#);
        let msg = parse(&text).unwrap_err().to_string();
        assert!(msg.contains("solver.rtol"), "{msg}");
    }

    #[test]
    fn ladder_must_descend() {
        let text = MINIMAL.replace("0.2", "[0.1,0.2,0.05]");
        assert!(parse(&text).unwrap_err().to_string().contains("descending"));
    }

    #[test]
    fn coupling_forms() {
        let text = MINIMAL.replace(r#""case""#, r#""coupling":{"rule":"delta^2/4"},"case""#);
        assert_eq!(parse(&text).unwrap().coupling, Coupling::Power { exponent: 2.0, divisor: 4.0 });
        let text = MINIMAL.replace(r#""case""#, r#""coupling":{"h":0.05,"rule":"delta"},"case""#);
        assert!(parse(&text).is_err());
    }

    #[test]
    fn disk_radius_parameter() {
        let text = MINIMAL.replace(r#"{"name":"unit-disk"}"#, r#"{"name":"disk","parameters":{"radius":0.5}}"#);
        assert_eq!(parse(&text).unwrap().domain, Domain::disk(0.5));
        let text = MINIMAL.replace(r#"{"name":"unit-disk"}"#, r#"{"name":"disk","parameters":{"radius":0.5,"r":1}}"#);
        assert!(parse(&text).unwrap_err().to_string().contains("domain.parameters.r"));
    }

    #[test]
    fn case_dimension_must_match() {
        let text = MINIMAL.replace("unit-disk", "unit-interval");
        assert!(parse(&text).is_err());
    }
}
