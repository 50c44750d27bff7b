//! Independent runs on a fixed-size worker pool. Each job derives its own
//! random streams from its index, so results do not depend on scheduling.

use rayon::prelude::*;

use crate::error::{invalid, Result};

/// Runs `job(0) .. job(n-1)` on `workers` threads and returns the results in
/// index order. The first error wins.
pub fn run_indexed<T, F>(n: usize, workers: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| invalid(format!("worker pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(&job).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let out = run_indexed(50, 4, |i| Ok(i * i)).unwrap();
        assert_eq!(out, (0..50).map(|i| i * i).collect::<Vec<_>>());
    }

    #[test]
    fn errors_propagate() {
        let r: Result<Vec<usize>> = run_indexed(10, 2, |i| if i == 7 { Err(invalid("boom")) } else { Ok(i) });
        assert!(r.is_err());
    }
}
