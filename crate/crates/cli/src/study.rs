use nlstokes::analysis::{convergence_study, AnalysisError};
use serde_json::json;

use crate::bundle::Bundle;
use crate::config::{Forcing, Resolved};
use crate::error::CliError;
use crate::plot::study_svg;
use crate::solve::write_run;

pub fn run(cfg: &Resolved, bundle: &mut Bundle) -> Result<(), CliError> {
    let Forcing::Case(case) = &cfg.forcing else {
        return Err(CliError::Config("`case`: a study needs a manufactured case with a known solution".into()));
    };
    let report = convergence_study(case.as_ref(), &cfg.domain, cfg.profile()?, &cfg.deltas, cfg.coupling, cfg.options).map_err(|e| match e {
        AnalysisError::Precondition(m) => CliError::Config(format!("`delta`: {m}")),
        other => CliError::Config(other.to_string()),
    })?;

    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    bundle.write("study.csv", &csv)?;
    // Timings live in run.json; zero them here so study.json is reproducible.
    let mut stable = report.clone();
    let mut timings = Vec::new();
    for r in &mut stable.records {
        if let Some(e) = &mut r.errors {
            timings.push(json!({ "delta": r.delta, "assemble_seconds": e.assemble_seconds, "solve_seconds": e.solve_seconds }));
            e.assemble_seconds = 0.0;
            e.solve_seconds = 0.0;
        }
    }
    bundle.write_json("study.json", &stable)?;
    bundle.write("study.svg", study_svg(&report).as_bytes())?;
    write_run(bundle, cfg, "study", json!({ "ladder": timings }))?;

    for r in &report.records {
        match (&r.errors, &r.failure) {
            (Some(e), _) => println!(
                "delta {:<8} h {:<10.4e} N {:>7}  e_u {:.4e}  e_energy {:.4e}  e_p {:.4e}",
                r.delta, r.h, e.n_points, e.error_u_l2, e.error_u_energy, e.error_p_l2
            ),
            (None, f) => println!("delta {:<8} failed: {}", r.delta, f.as_deref().unwrap_or("unknown")),
        }
    }
    if let Some(o) = &report.orders {
        println!(
            "observed orders: u {:.3}, energy {:.3}, p {:.3}",
            o.error_u_l2, o.error_u_energy, o.error_p_l2
        );
    }
    let failed = report.records.iter().filter(|r| r.failure.is_some()).count();
    if failed > 0 {
        return Err(CliError::PartialStudy(failed));
    }
    Ok(())
}
