//! Invariant suites with measured values against fixed thresholds.

use std::str::FromStr;

use nlstokes::analysis::{poincare_constant_pressure, poincare_constant_velocity};
use nlstokes::kernels::ScaledKernel;
use nlstokes::operators::{weighted_dot, weighted_norm, OperatorSet};
use nlstokes::sparse::SparseMatrix;
use nlstokes::system::{self, assemble_system, Method, NonlocalStokesProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::bundle::Bundle;
use crate::config::Resolved;
use crate::error::CliError;
use crate::solve::{build_cloud, build_kernel, build_problem, write_run};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Kernels,
    Operators,
    Poincare,
    Energy,
}

pub const SUITES: [Suite; 4] = [Suite::Kernels, Suite::Operators, Suite::Poincare, Suite::Energy];

impl Suite {
    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Kernels => "kernels",
            Suite::Operators => "operators",
            Suite::Poincare => "poincare",
            Suite::Energy => "energy",
        }
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        SUITES
            .iter()
            .copied()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| format!("unknown suite `{s}` (known: kernels, operators, poincare, energy)"))
    }
}

/// How a measured value is compared with its threshold.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case")]
enum Cmp {
    AtMost,
    AtLeast,
    Above,
    /// Within `threshold` of the target.
    Near(f64),
}

impl Cmp {
    fn symbol(self) -> String {
        match self {
            Cmp::AtMost => "<=".into(),
            Cmp::AtLeast => ">=".into(),
            Cmp::Above => ">".into(),
            Cmp::Near(target) => format!("{target}+-"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    suite: &'static str,
    name: String,
    measured: Option<f64>,
    threshold: Option<f64>,
    comparison: Option<Cmp>,
    pass: bool,
    note: String,
}

#[derive(Default)]
struct Table {
    rows: Vec<CheckRow>,
}

impl Table {
    fn measure(&mut self, suite: Suite, name: impl Into<String>, measured: f64, cmp: Cmp, threshold: f64) {
        let pass = match cmp {
            Cmp::AtMost => measured <= threshold,
            Cmp::AtLeast => measured >= threshold,
            Cmp::Above => measured > threshold,
            Cmp::Near(target) => (measured - target).abs() <= threshold,
        };
        self.rows.push(CheckRow {
            suite: suite.as_str(),
            name: name.into(),
            measured: Some(measured),
            threshold: Some(threshold),
            comparison: Some(cmp),
            pass,
            note: String::new(),
        });
    }

    fn fail(&mut self, suite: Suite, name: impl Into<String>, note: impl Into<String>) {
        self.rows.push(CheckRow {
            suite: suite.as_str(),
            name: name.into(),
            measured: None,
            threshold: None,
            comparison: None,
            pass: false,
            note: note.into(),
        });
    }
}

pub fn run(cfg: &Resolved, suites: &[Suite], bundle: &mut Bundle) -> Result<(), CliError> {
    let mut table = Table::default();
    for &suite in suites {
        match suite {
            Suite::Kernels => kernels(cfg, &mut table),
            Suite::Operators => operators(cfg, &mut table)?,
            Suite::Poincare => poincare(cfg, &mut table)?,
            Suite::Energy => energy(cfg, &mut table)?,
        }
    }

    let mut out = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Output(e.to_string());
    out.write_record(["suite", "check", "measured", "comparison", "threshold", "status", "note"])
        .map_err(csv_err)?;
    for r in &table.rows {
        out.write_record([
            r.suite.to_string(),
            r.name.clone(),
            r.measured.map(|v| format!("{v:e}")).unwrap_or_default(),
            r.comparison.map(Cmp::symbol).unwrap_or_default(),
            r.threshold.map(|v| format!("{v:e}")).unwrap_or_default(),
            if r.pass { "pass" } else { "fail" }.into(),
            r.note.clone(),
        ])
        .map_err(csv_err)?;
    }
    bundle.write("checks.csv", &out.into_inner().map_err(|e| CliError::Output(e.to_string()))?)?;
    bundle.write_json("checks.json", &table.rows)?;
    write_run(bundle, cfg, "check", json!({}))?;

    for r in &table.rows {
        let value = match (r.measured, r.comparison, r.threshold) {
            (Some(m), Some(c), Some(t)) => format!("{} ({} {t:e})", show(m), c.symbol()),
            _ => r.note.clone(),
        };
        println!("{:<4} {:<10} {:<40} {value}", if r.pass { "pass" } else { "FAIL" }, r.suite, r.name);
    }
    let failed = table.rows.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        for r in table.rows.iter().filter(|r| !r.pass) {
            eprintln!("failed: {} / {} {}", r.suite, r.name, r.note);
        }
        return Err(CliError::FailedChecks(failed));
    }
    Ok(())
}

fn show(v: f64) -> String {
    if v == 0.0 || (1e-3..1e4).contains(&v.abs()) {
        format!("{v:.6}")
    } else {
        format!("{v:.3e}")
    }
}

fn kernels(cfg: &Resolved, t: &mut Table) {
    let s = Suite::Kernels;
    let profile = match &cfg.profile {
        Ok(p) => p.clone(),
        Err(msg) => {
            // The message names the violated assumption, e.g. positivity.
            t.fail(s, "admissibility", msg.clone());
            return;
        }
    };
    t.measure(s, "nondegeneracy gamma0", profile.gamma0(), Cmp::Above, 0.0);
    let delta = cfg.deltas[0];
    let mut dims = vec![1, 2, cfg.domain.dim];
    dims.sort_unstable();
    dims.dedup();
    for n in dims {
        match ScaledKernel::shared(profile.clone(), n, delta) {
            Ok(k) => {
                let norm = k.normalization_integral();
                t.measure(s, format!("normalization n={n}"), norm, Cmp::Near(1.0), 1e-10);
                t.measure(s, format!("second moment n={n}"), k.second_moment(), Cmp::Near(1.0), 1e-10);
            }
            Err(e) => t.fail(s, format!("scaling n={n}"), e.to_string()),
        }
    }
}

fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn operators(cfg: &Resolved, t: &mut Table) -> Result<(), CliError> {
    let s = Suite::Operators;
    let delta = cfg.deltas[0];
    let (cloud, _) = build_cloud(cfg, delta)?;
    let ops = match build_kernel(cfg, delta) {
        Ok(k) => OperatorSet::assemble(cloud.clone(), k).map_err(|e| CliError::Config(e.to_string()))?,
        Err(e) => {
            t.fail(s, "assembly", e.to_string());
            return Ok(());
        }
    };
    let w = &cloud.weights;
    let n = cloud.len();
    let dim = cloud.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.raw.seed);

    let mut adj: f64 = 0.0;
    for _ in 0..50 {
        let v = random_vec(&mut rng, dim * n);
        let p = random_vec(&mut rng, n);
        let gp = ops.apply_grad(&p);
        let dv = ops.apply_div(&v);
        let scale = weighted_norm(w, &v) * weighted_norm(w, &gp) + weighted_norm(w, &dv) * weighted_norm(w, &p);
        adj = adj.max((weighted_dot(w, &v, &gp) + weighted_dot(w, &dv, &p)).abs() / scale);
    }
    t.measure(s, "adjointness <v,Gp>+<Dv,p>", adj, Cmp::AtMost, 1e-12);

    let row_defect = |m: &SparseMatrix| {
        (0..m.nrows())
            .map(|i| {
                let vals = m.row(i).1;
                vals.iter().sum::<f64>().abs() / vals.iter().map(|v| v.abs()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    };
    t.measure(s, "laplacian row sums", row_defect(&ops.lap), Cmp::AtMost, 1e-12);
    t.measure(s, "stabilizer row sums", row_defect(&ops.stab), Cmp::AtMost, 1e-12);

    let form = |m: &SparseMatrix, v: &[f64]| {
        let mv = m.apply(v);
        weighted_dot(w, v, &mv) / (weighted_norm(w, v) * weighted_norm(w, &mv))
    };
    let (mut lap, mut stab) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for _ in 0..50 {
        let v = random_vec(&mut rng, n);
        lap = lap.max(form(&ops.lap, &v));
        stab = stab.max(form(&ops.stab, &v));
    }
    t.measure(s, "laplacian form (normalized max)", lap, Cmp::AtMost, 1e-10);
    t.measure(s, "stabilizer form (normalized max)", stab, Cmp::AtMost, 1e-10);

    // Any valid forcing will do for the symmetry check.
    let problem = NonlocalStokesProblem::new(cloud.clone(), ops.kernel.clone(), vec![1.0; dim * n], cfg.options)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let system = assemble_system(&problem).map_err(|e| CliError::Solver(e.to_string()))?;
    t.measure(s, "saddle matrix symmetry", system.matrix().symmetry_defect(), Cmp::AtMost, 1e-13);
    Ok(())
}

fn poincare(cfg: &Resolved, t: &mut Table) -> Result<(), CliError> {
    let s = Suite::Poincare;
    let (mut first_v, mut first_p) = (None, None);
    for &delta in &cfg.deltas {
        let (cloud, _) = build_cloud(cfg, delta)?;
        let kernel = match build_kernel(cfg, delta) {
            Ok(k) => k,
            Err(e) => {
                t.fail(s, "kernel", e.to_string());
                return Ok(());
            }
        };
        for (label, est, first) in [
            ("velocity", poincare_constant_velocity(&cloud, &kernel), &mut first_v),
            ("pressure", poincare_constant_pressure(&cloud, &kernel), &mut first_p),
        ] {
            match est {
                Ok(e) => {
                    t.measure(s, format!("{label} constant delta={delta}"), e.value, Cmp::Above, 0.0);
                    match *first {
                        None => *first = Some(e.value),
                        Some(f0) => t.measure(s, format!("{label} ratio to first delta={delta}"), e.value / f0, Cmp::AtLeast, 0.5),
                    }
                }
                Err(e) => t.fail(s, format!("{label} constant delta={delta}"), e.to_string()),
            }
        }
    }
    Ok(())
}

fn energy(cfg: &Resolved, t: &mut Table) -> Result<(), CliError> {
    let s = Suite::Energy;
    for &delta in &cfg.deltas {
        let (cloud, _) = build_cloud(cfg, delta)?;
        let kernel = match build_kernel(cfg, delta) {
            Ok(k) => k,
            Err(e) => {
                t.fail(s, "kernel", e.to_string());
                return Ok(());
            }
        };
        let problem = build_problem(cfg, cloud, kernel)?;
        let system = assemble_system(&problem).map_err(|e| CliError::Solver(e.to_string()))?;
        match system::solve(&system, &cfg.options) {
            Ok(sol) => {
                // An iterative solve only balances energy to about its residual.
                let limit = if sol.method == Method::Direct {
                    1e-8
                } else {
                    (100.0 * cfg.options.rtol).max(1e-8)
                };
                t.measure(
                    s,
                    format!("energy gap delta={delta} ({})", sol.method.as_str()),
                    sol.energy_gap,
                    Cmp::AtMost,
                    limit,
                );
                t.measure(
                    s,
                    format!("residual delta={delta}"),
                    sol.residual,
                    Cmp::AtMost,
                    cfg.options.rtol.max(1e-10),
                );
            }
            Err(e) => t.fail(s, format!("solve delta={delta}"), e.to_string()),
        }
    }
    Ok(())
}
