//! Data-parallel map over independent work items.
//!
//! With the `parallel` feature, work runs on a dedicated rayon pool; without
//! it (or with one job) items run in order on the calling thread. Results are
//! always returned in item order.

use crate::error::Result;

pub struct Execution {
    jobs: usize,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Execution {
    pub fn sequential() -> Self {
        Self {
            jobs: 1,
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    /// `jobs = 0` uses every available core.
    #[cfg(feature = "parallel")]
    pub fn with_jobs(jobs: usize) -> Result<Self> {
        if jobs == 1 {
            return Ok(Self::sequential());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| crate::Error::InvalidParameter(format!("thread pool: {e}")))?;
        Ok(Self {
            jobs: pool.current_num_threads(),
            pool: Some(pool),
        })
    }

    #[cfg(not(feature = "parallel"))]
    pub fn with_jobs(jobs: usize) -> Result<Self> {
        if jobs > 1 {
            log::warn!("built without the `parallel` feature; running {jobs} jobs sequentially");
        }
        Ok(Self::sequential())
    }

    pub fn jobs(&self) -> usize {
        self.jobs
    }

    pub fn is_parallel(&self) -> bool {
        self.jobs > 1
    }

    /// Evaluates `f(0..n)`, returning results in index order.
    pub fn map_indexed<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| (0..n).into_par_iter().map(&f).collect());
        }
        (0..n).map(f).collect()
    }
}

impl Default for Execution {
    fn default() -> Self {
        Self::sequential()
    }
}
