//! Data-parallel helpers. With the `parallel` feature the maps run on the
//! rayon pool; without it they fall back to plain iterators. Output order is
//! always the input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Requested execution strategy. `Parallel` degrades to sequential when the
/// crate is built without the `parallel` feature.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

pub fn map<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Runs `f` on a dedicated pool of `jobs` threads (sequentially if the
/// feature is off or `jobs <= 1`).
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if jobs > 1 {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            return pool.install(f);
        }
    }
    let _ = jobs;
    f()
}
