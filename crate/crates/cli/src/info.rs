use std::fmt::Write;

use nlstokes::analysis::{Coupling, BUILTIN_CASES, EIGEN_TOL};
use nlstokes::geometry::{Domain, BUILTIN_DOMAINS};
use nlstokes::kernels::{BUILTIN_PROFILES, QUAD_TOL};
use nlstokes::system::{SolverOptions, DIRECT_LIMIT};

use crate::check::SUITES;
use crate::config::SCHEMA_VERSION;

pub fn text() -> String {
    let mut s = String::new();
    let d = SolverOptions::default();
    let _ = writeln!(s, "nlstokes {} (config schema {SCHEMA_VERSION})", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "\ndomains:");
    for name in BUILTIN_DOMAINS {
        let dim = Domain::builtin(name).map(|d| d.dim).unwrap_or(0);
        let _ = writeln!(s, "  {name:<14} {dim}-d");
    }
    let _ = writeln!(s, "  {:<14} 2-d, parameters: radius", "disk");
    let _ = writeln!(s, "\nkernel profiles:");
    for name in BUILTIN_PROFILES {
        let _ = writeln!(s, "  {name}");
    }
    let _ = writeln!(s, "  (or a two-column r,R table via kernel.table)");
    let _ = writeln!(s, "\ncases:");
    for name in BUILTIN_CASES {
        let _ = writeln!(s, "  {name}");
    }
    let _ = writeln!(s, "  (or case.forcing_table, solve and check only)");
    let _ = writeln!(s, "\nsolver methods:\n  direct\n  krylov\n  auto (direct up to {DIRECT_LIMIT} unknowns)");
    let _ = writeln!(s, "\ncheck suites:");
    for suite in SUITES {
        let _ = writeln!(s, "  {}", suite.as_str());
    }
    let _ = writeln!(s, "\ndefaults:");
    let _ = writeln!(s, "  solver.method   {}", d.method.as_str());
    let _ = writeln!(s, "  solver.rtol     {:e}", d.rtol);
    let _ = writeln!(s, "  solver.max_iter {}", d.max_iter);
    let _ = writeln!(s, "  coupling.rule   {}", Coupling::default());
    let _ = writeln!(s, "  quadrature tol  {QUAD_TOL:e}");
    let _ = writeln!(s, "  eigen tol       {EIGEN_TOL:e}");
    s
}
