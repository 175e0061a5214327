//! Switch between rayon data parallelism and plain sequential loops.
//!
//! Without the `parallel` feature, [`Execution::Parallel`] silently runs
//! sequentially, so callers never need their own `cfg` gates.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How data-parallel loops are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run loops in parallel.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    /// `(0..len).map(f).collect()`, order preserved.
    pub fn map_range<R, F>(self, len: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..len).into_par_iter().map(f).collect(),
            _ => (0..len).map(f).collect(),
        }
    }

    /// `items.iter().map(f).collect()`, order preserved.
    pub fn map_slice<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().map(f).collect(),
            _ => items.iter().map(f).collect(),
        }
    }

    /// Sum of `f(i)` over `0..len`.
    ///
    /// The parallel reduction order differs from the sequential one, so
    /// floating-point results may differ in the last bits.
    pub fn sum_range<F>(self, len: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..len).into_par_iter().map(f).sum(),
            _ => (0..len).map(f).sum(),
        }
    }
}

/// Runs `f` on a dedicated pool of `threads` workers (`0` keeps the global pool).
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if threads > 0 {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            return pool.install(f);
        }
    }
    let _ = threads;
    f()
}
