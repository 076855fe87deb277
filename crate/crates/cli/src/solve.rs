use std::sync::Arc;
use std::time::Instant;

use nlstokes::analysis::{mean_aligned_l2, sample_vector};
use nlstokes::geometry::{partition, sample_grid, TaggedCloud};
use nlstokes::kernels::ScaledKernel;
use nlstokes::system::{self, assemble_system, stability_ratio, NonlocalStokesProblem, Solution};
use serde::Serialize;
use serde_json::json;

use crate::bundle::Bundle;
use crate::config::{Forcing, Resolved};
use crate::error::CliError;
use crate::forcing::ForcingTable;

pub fn build_cloud(cfg: &Resolved, delta: f64) -> Result<(Arc<TaggedCloud>, f64), CliError> {
    let h = cfg.coupling.h(delta);
    let cloud = sample_grid(&cfg.domain, h)
        .and_then(|c| partition(&c, delta))
        .map_err(|e| CliError::Config(format!("`delta`/`coupling` (delta = {delta}, h = {h}): {e}")))?;
    Ok((Arc::new(cloud), h))
}

pub fn build_kernel(cfg: &Resolved, delta: f64) -> Result<ScaledKernel, CliError> {
    ScaledKernel::shared(cfg.profile()?, cfg.domain.dim, delta).map_err(|e| CliError::Config(format!("`kernel`: {e}")))
}

pub fn build_problem(cfg: &Resolved, cloud: Arc<TaggedCloud>, kernel: ScaledKernel) -> Result<NonlocalStokesProblem, CliError> {
    let problem = match &cfg.forcing {
        Forcing::Case(case) => NonlocalStokesProblem::from_fn(cloud, kernel, |x, o| case.f(x, o), cfg.options),
        Forcing::Table(path) => {
            let table = ForcingTable::read(path, cloud.dim)?;
            NonlocalStokesProblem::from_fn(cloud, kernel, |x, o| table.sample(x, o), cfg.options)
        }
    };
    problem.map_err(|e| CliError::Config(format!("`case`: {e}")))
}

#[derive(Serialize)]
struct Diagnostics {
    status: &'static str,
    delta: f64,
    h: f64,
    n_points: usize,
    n_interior: usize,
    unknowns: usize,
    method: Option<String>,
    iterations: Option<usize>,
    residual: Option<f64>,
    energy_gap: Option<f64>,
    stability_ratio: Option<f64>,
    lambda: Option<f64>,
    error_u_l2: Option<f64>,
    error_p_l2: Option<f64>,
    failure: Option<String>,
    residual_history: Vec<f64>,
}

/// `x1..xn,tag,u1..un,p`, one row per point.
pub fn solution_csv(cloud: &TaggedCloud, sol: &Solution) -> Result<Vec<u8>, CliError> {
    let n = cloud.dim;
    let mut out = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=n).map(|d| format!("x{d}")).collect();
    header.push("tag".into());
    header.extend((1..=n).map(|d| format!("u{d}")));
    header.push("p".into());
    let csv_err = |e: csv::Error| CliError::Output(e.to_string());
    out.write_record(&header).map_err(csv_err)?;
    for i in 0..cloud.len() {
        let mut row: Vec<String> = cloud.point(i).iter().map(|v| format!("{v:e}")).collect();
        row.push(cloud.tags[i].as_str().to_string());
        row.extend(sol.u[i * n..(i + 1) * n].iter().map(|v| format!("{v:e}")));
        row.push(format!("{:e}", sol.p[i]));
        out.write_record(&row).map_err(csv_err)?;
    }
    out.into_inner().map_err(|e| CliError::Output(e.to_string()))
}

pub fn run(cfg: &Resolved, bundle: &mut Bundle) -> Result<(), CliError> {
    let delta = cfg.single_delta()?;
    let start = Instant::now();
    let (cloud, h) = build_cloud(cfg, delta)?;
    let kernel = build_kernel(cfg, delta)?;
    let problem = build_problem(cfg, cloud.clone(), kernel)?;
    let system = assemble_system(&problem).map_err(|e| CliError::Solver(e.to_string()))?;
    let assemble_seconds = start.elapsed().as_secs_f64();

    let mut diag = Diagnostics {
        status: "ok",
        delta,
        h,
        n_points: cloud.len(),
        n_interior: cloud.interior().len(),
        unknowns: system.unknowns(),
        method: None,
        iterations: None,
        residual: None,
        energy_gap: None,
        stability_ratio: None,
        lambda: None,
        error_u_l2: None,
        error_p_l2: None,
        failure: None,
        residual_history: Vec::new(),
    };

    let sol = match system::solve(&system, &cfg.options) {
        Ok(sol) => sol,
        Err(e) => {
            diag.status = "failed";
            diag.failure = Some(e.to_string());
            diag.residual_history = e.residual_history().to_vec();
            bundle.write_json("diagnostics.json", &diag)?;
            write_run(bundle, cfg, "solve", json!({ "assemble_seconds": assemble_seconds }))?;
            return Err(CliError::Solver(e.to_string()));
        }
    };

    diag.method = Some(sol.method.as_str().to_string());
    diag.iterations = Some(sol.iterations);
    diag.residual = Some(sol.residual);
    diag.energy_gap = Some(sol.energy_gap);
    diag.stability_ratio = stability_ratio(&sol, &problem).ok();
    diag.lambda = Some(sol.lambda);
    if let Forcing::Case(case) = &cfg.forcing {
        let n = cloud.dim;
        let w = &cloud.weights;
        let exact = sample_vector(&cloud.coords, n, |x, o| case.u(x, o));
        let e_u = cloud
            .interior()
            .iter()
            .map(|&i| w[i] * (0..n).map(|c| (exact[i * n + c] - sol.u[i * n + c]).powi(2)).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        let d: Vec<f64> = (0..cloud.len()).map(|i| case.p(cloud.point(i)) - sol.p[i]).collect();
        diag.error_u_l2 = Some(e_u);
        diag.error_p_l2 = Some(mean_aligned_l2(&cloud, &d));
    }

    bundle.write("solution.csv", &solution_csv(&cloud, &sol)?)?;
    bundle.write_json("diagnostics.json", &diag)?;
    write_run(
        bundle,
        cfg,
        "solve",
        json!({ "assemble_seconds": assemble_seconds, "solve_seconds": sol.solve_seconds }),
    )?;
    println!(
        "solved {} unknowns ({}, {} iterations): residual {:.3e}, energy gap {:.3e}",
        system.unknowns(),
        sol.method.as_str(),
        sol.iterations,
        sol.residual,
        sol.energy_gap
    );
    Ok(())
}

/// Config echo, versions and timings. Kept apart from the payload files so
/// those stay byte-identical across reruns.
pub fn write_run(bundle: &mut Bundle, cfg: &Resolved, command: &str, timings: serde_json::Value) -> Result<(), CliError> {
    let meta = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg.raw,
        "threads": rayon::current_num_threads(),
        "timings": timings,
    });
    bundle.write_json("run.json", &meta)
}
