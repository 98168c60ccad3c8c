use rayon::prelude::*;
use srelu_core::experiments::JobRunner;

/// Runs experiment jobs on a dedicated rayon pool.
pub struct ThreadPoolRunner {
    pool: rayon::ThreadPool,
}

impl ThreadPoolRunner {
    /// `threads = 0` lets rayon pick the number of cores.
    pub fn new(threads: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        Ok(ThreadPoolRunner { pool: rayon::ThreadPoolBuilder::new().num_threads(threads).build()? })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl JobRunner for ThreadPoolRunner {
    fn map<I, O, F>(&self, items: &[I], f: F) -> Vec<O>
    where
        I: Sync,
        O: Send,
        F: Fn(&I) -> O + Sync + Send,
    {
        self.pool.install(|| items.par_iter().map(f).collect())
    }
}
