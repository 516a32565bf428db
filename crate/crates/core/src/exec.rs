//! Sequential and data-parallel execution of independent jobs.
//!
//! With the `parallel` feature, [`Execution::Parallel`] runs jobs on the rayon
//! global pool. Without it, every execution mode runs sequentially. Results are
//! always returned in job-index order.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether jobs will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// `(0..n).map(job)` collected in index order.
    pub fn map_indexed<T, F>(self, n: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(job).collect();
        }
        (0..n).map(job).collect()
    }
}
