//! Numerical defaults in one place. Every field can be overridden from the
//! command line (`--tol-*` flags).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative singular-value cutoff for the rank of `A_d`.
    pub rank_tol: f64,
    /// Strict LMIs are decided as `margin > definiteness_tol`.
    pub definiteness_tol: f64,
    /// Width of the final bracket in delay bisection.
    pub bisection_tol: f64,
    /// Above this condition estimate the Lyapunov boundary matrix is rejected.
    pub cond_limit: f64,
    /// Minimum Gauss points for projection integrals (actual: `max(this, n + 2)`).
    pub quad_points: usize,
    /// Gauss points per axis for the complete-functional double integral.
    pub functional_quad_points: usize,
    /// Residual cutoff for retaining an approximate characteristic root.
    pub root_residual: f64,
    /// Abscissa band treated as "boundary" by the stability oracle.
    pub spectrum_margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_tol: 1e-10,
            definiteness_tol: 1e-7,
            bisection_tol: 1e-4,
            cond_limit: 1e12,
            quad_points: 32,
            functional_quad_points: 48,
            root_residual: 1e-6,
            spectrum_margin: 1e-4,
        }
    }
}

impl Tolerances {
    pub fn quad_points_for(&self, n: usize) -> usize {
        self.quad_points.max(n + 2)
    }
}

/// Environment variable capping the worker count of sweep commands.
pub const THREADS_ENV: &str = "TDS_CERTIFY_THREADS";

/// Thread pool for grid sweeps, sized by [`THREADS_ENV`] when set to a
/// positive integer (rayon's default otherwise).
pub fn sweep_pool() -> rayon::ThreadPool {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
}
