//! Parallel grid evaluation and path ensembles.

use pairdisp_core::verify::Executor;
use rayon::prelude::*;

/// Environment variable giving the default worker count.
pub const WORKERS_ENV: &str = "PAIRDISP_WORKERS";

#[derive(Debug, Clone, Copy, Default)]
pub struct Parallel;

impl Executor for Parallel {
    fn map(&self, pts: &[[f64; 3]], f: &(dyn Fn([f64; 3]) -> Option<f64> + Sync)) -> Vec<Option<f64>> {
        pts.par_iter().with_min_len(64).map(|&p| f(p)).collect()
    }
}

/// Runs `f(i)` for `i in 0..n` in parallel, results in index order.
pub fn ensemble<T: Send, F: Fn(u64) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    (0..n as u64).into_par_iter().map(f).collect()
}

/// Sizes the global pool once; later calls are ignored. `0` keeps rayon's default.
pub fn init_workers(workers: usize) {
    if workers > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    }
}
