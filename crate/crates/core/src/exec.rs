//! Data-parallel helpers with a sequential fallback.
//!
//! Every hot loop in the crate (node evaluations, degree cell scans, flow
//! integration of independent starts, Ekeland candidate scoring) goes through
//! [`Exec::map_range`] so that the same code path runs either on the rayon
//! pool or on the calling thread. Results always come back in index order,
//! which keeps reductions deterministic regardless of the backend.

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Execution backend for the data-parallel inner loops.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exec {
    /// Parallel when the `parallel` feature is compiled in, sequential otherwise.
    #[default]
    Auto,
    Sequential,
    Parallel,
}

impl Exec {
    /// Whether this backend actually fans out work to a thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && !matches!(self, Exec::Sequential)
    }

    /// Evaluates `f(0..n)` and returns the results in index order.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() && n > 1 {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Evaluates `f` on every element of `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        self.map_range(items.len(), |i| f(&items[i]))
    }

    /// Fallible variant of [`Exec::map_range`]; the first error in index order wins.
    pub fn try_map_range<R, E, F>(self, n: usize, f: F) -> Result<Vec<R>, E>
    where
        R: Send,
        E: Send,
        F: Fn(usize) -> Result<R, E> + Sync + Send,
    {
        self.map_range(n, f).into_iter().collect()
    }
}
