//! Data-parallel map with a sequential fallback.
//!
//! Results always come back in input order, so a parallel run and a
//! sequential run over the same items are interchangeable. Without the
//! `parallel` feature every mode runs on the calling thread.

/// Environment variable that caps the worker count.
pub const THREADS_ENV: &str = "CSIM_THREADS";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// `Parallel` only when the library was built with it.
    pub fn effective(self) -> Self {
        if cfg!(feature = "parallel") {
            self
        } else {
            Execution::Sequential
        }
    }
}

/// Worker cap from [`THREADS_ENV`]; `None` when unset, empty or invalid.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

#[cfg(feature = "parallel")]
fn pool() -> Option<&'static rayon::ThreadPool> {
    use std::sync::OnceLock;
    static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();
    POOL.get_or_init(|| {
        thread_cap().and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok())
    })
    .as_ref()
}

/// `items.iter().map(f).collect()`, spread over the worker pool when asked.
pub fn map_collect<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec.effective() {
        Execution::Sequential => items.iter().map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            let run = || items.par_iter().map(&f).collect();
            match pool() {
                Some(p) => p.install(run),
                None => run(),
            }
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel => unreachable!(),
    }
}

/// Fallible variant; the first error in input order wins.
pub fn try_map_collect<T, R, E, F>(items: &[T], exec: Execution, f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync + Send,
{
    map_collect(items, exec, f).into_iter().collect()
}
