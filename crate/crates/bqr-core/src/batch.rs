//! Instance-level data parallelism with a sequential fallback.
//!
//! Batch drivers (verification batteries, comparison tables, grid scans) are
//! embarrassingly parallel over instances or sample chunks. With the
//! `parallel` feature (default) [`ExecMode::Parallel`] fans work out over
//! rayon; without it, or with [`ExecMode::Sequential`], the same closure runs
//! on one thread. Results are always assembled in input order, so the two
//! modes produce identical output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How a batch driver schedules its per-item work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    /// One thread, input order.
    Sequential,
    /// Rayon work-stealing when the `parallel` feature is enabled; falls back
    /// to sequential otherwise.
    #[default]
    Parallel,
}

impl ExecMode {
    pub fn from_jobs(jobs: usize) -> ExecMode {
        if jobs == 1 {
            ExecMode::Sequential
        } else {
            ExecMode::Parallel
        }
    }
}

/// Maps `f` over `items`, returning results in input order.
pub fn map_ordered<T, U, F>(items: &[T], mode: ExecMode, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match mode {
        ExecMode::Sequential => items.iter().map(f).collect(),
        ExecMode::Parallel => {
            #[cfg(feature = "parallel")]
            {
                items.par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                items.iter().map(f).collect()
            }
        }
    }
}

/// Maps `f` over the index range `0..count` in input order.
pub fn map_indices<U, F>(count: usize, mode: ExecMode, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    match mode {
        ExecMode::Sequential => (0..count).map(f).collect(),
        ExecMode::Parallel => {
            #[cfg(feature = "parallel")]
            {
                (0..count).into_par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..count).map(f).collect()
            }
        }
    }
}

/// Configures the global rayon pool size. Returns false when the pool was
/// already initialized (rayon allows one global configuration) or when the
/// `parallel` feature is off.
pub fn configure_jobs(jobs: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        if jobs == 0 {
            return false;
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_preserve_order() {
        let items: Vec<u64> = (0..100).collect();
        let seq = map_ordered(&items, ExecMode::Sequential, |&x| x * x + 1);
        let par = map_ordered(&items, ExecMode::Parallel, |&x| x * x + 1);
        assert_eq!(seq, par);
        assert_eq!(seq[10], 101);

        let seq = map_indices(50, ExecMode::Sequential, |i| 2 * i);
        let par = map_indices(50, ExecMode::Parallel, |i| 2 * i);
        assert_eq!(seq, par);
    }

    #[test]
    fn jobs_mapping() {
        assert_eq!(ExecMode::from_jobs(1), ExecMode::Sequential);
        assert_eq!(ExecMode::from_jobs(4), ExecMode::Parallel);
    }
}
