use std::time::Duration;

use rayon::prelude::*;
use rayon::ThreadPool;

use super::engine::{Block, ScaledProblem};
use crate::domain::{Cache, Evaluation};
use crate::error::{Error, Result};

/// Evaluates blocks of candidates concurrently.
///
/// Results always come back in candidate order, so the outcome of a run does
/// not depend on the number of worker threads.
pub struct Executor {
    pool: Option<ThreadPool>,
    delay: Option<Duration>,
}

impl Executor {
    /// Evaluations run on the caller's rayon pool.
    pub fn ambient() -> Self {
        Self {
            pool: None,
            delay: None,
        }
    }

    /// Evaluations run on a dedicated pool of `threads` workers.
    pub fn with_threads(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        Ok(Self {
            pool: Some(pool),
            delay: None,
        })
    }

    /// Adds an artificial delay to every evaluation.
    pub fn sleep_per_eval(mut self, delay: Duration) -> Self {
        self.delay = (!delay.is_zero()).then_some(delay);
        self
    }

    pub fn evaluate(&self, problem: &ScaledProblem, points: &[Vec<f64>]) -> Vec<Evaluation> {
        let work = || {
            points
                .par_iter()
                .map(|u| {
                    if let Some(d) = self.delay {
                        std::thread::sleep(d);
                    }
                    problem.evaluate(u)
                })
                .collect()
        };
        match &self.pool {
            Some(pool) => pool.install(work),
            None => work(),
        }
    }

    /// Runs `f` inside this executor's pool, if it has one.
    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> T {
        match &self.pool {
            Some(pool) => pool.install(f),
            None => f(),
        }
    }
}

/// Evaluates every candidate of `block`, then inserts the results into
/// `cache` in candidate order. Returns the evaluations in the same order.
pub fn evaluate_block(exec: &Executor, problem: &ScaledProblem, block: &Block, cache: &mut Cache) -> Vec<Evaluation> {
    let evals = exec.evaluate(problem, &block.points());
    for e in &evals {
        cache.insert(e.clone());
    }
    evals
}
