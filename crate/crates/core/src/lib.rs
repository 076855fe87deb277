//! Meshfree solver for the volume-constrained nonlocal Stokes system with a
//! nonlocal pressure stabilizer.
//!
//! The pipeline is: a [`kernels::KernelProfile`] scaled to a horizon δ, a
//! quadrature [`geometry::PointCloud`] partitioned into Interior and Layer
//! points, the discrete nonlocal [`operators`], and the saddle-point
//! [`system`]. [`analysis`] holds manufactured solutions, Poincaré constant
//! estimates and convergence studies.

pub mod analysis;
pub mod geometry;
pub mod kernels;
pub mod linsolve;
pub mod operators;
pub mod quadrature;
pub mod sparse;
pub mod system;

pub use geometry::{partition, sample_grid, Domain, PointCloud, Tag, TaggedCloud};
pub use kernels::{make_profile, KernelProfile, ScaledKernel};
pub use operators::OperatorSet;
pub use system::{assemble_system, solve, Method, NonlocalStokesProblem, Solution, SolverOptions};

pub(crate) mod par {
    /// `(0..n).map(f).collect()`, spread over the rayon pool when available.
    pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..n).map(f).collect()
        }
    }
}

pub(crate) mod clock {
    /// Wall-clock stopwatch. Browsers have no `std::time::Instant`, so there
    /// it always reads zero.
    pub struct Stopwatch {
        #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
        start: std::time::Instant,
    }

    impl Stopwatch {
        pub fn start() -> Self {
            Self {
                #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
                start: std::time::Instant::now(),
            }
        }

        pub fn seconds(&self) -> f64 {
            #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
            return self.start.elapsed().as_secs_f64();
            #[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
            return 0.0;
        }
    }
}
