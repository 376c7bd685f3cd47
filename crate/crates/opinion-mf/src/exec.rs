use std::sync::OnceLock;
use std::time::Instant;

use opinion_mf_core::montecarlo::Executor;
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::error::{invalid, Result};

/// Caps the worker count; `0` or unset means one per core.
pub const THREADS_ENV: &str = "OPINION_MF_THREADS";

/// Executor on a dedicated rayon pool.
///
/// Jobs run in waves of one job per worker; results of a wave are folded in
/// job order before the next wave starts, so at most one result per worker is
/// alive at a time and the fold order never depends on scheduling.
pub struct RayonExecutor {
    pool: ThreadPool,
}

impl RayonExecutor {
    pub fn new(threads: usize) -> Result<Self> {
        let pool = ThreadPoolBuilder::new().num_threads(threads).build()?;
        Ok(Self { pool })
    }

    /// Pool sized from [`THREADS_ENV`].
    pub fn from_env() -> Result<Self> {
        let threads = match std::env::var(THREADS_ENV) {
            Ok(v) if !v.trim().is_empty() => v
                .trim()
                .parse()
                .map_err(|_| invalid(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}")))?,
            _ => 0,
        };
        Self::new(threads)
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for RayonExecutor {
    fn map_fold<T, M, F>(&self, jobs: usize, map: M, mut fold: F)
    where
        T: Send,
        M: Fn(usize) -> T + Sync + Send,
        F: FnMut(usize, T),
    {
        let wave = self.threads().max(1);
        let mut start = 0;
        while start < jobs {
            let end = (start + wave).min(jobs);
            let out: Vec<T> = self.pool.install(|| (start..end).into_par_iter().map(&map).collect());
            for (offset, value) in out.into_iter().enumerate() {
                fold(start + offset, value);
            }
            start = end;
        }
    }

    fn now_ms(&self) -> f64 {
        static START: OnceLock<Instant> = OnceLock::new();
        START.get_or_init(Instant::now).elapsed().as_secs_f64() * 1e3
    }
}
