//! Reproducible stream-parallel execution.
//!
//! Every random stream is a ChaCha8 generator seeded from the master seed and
//! positioned on its own stream index, so results depend only on
//! `(master_seed, n_streams)` and never on the thread schedule. With the
//! `parallel` feature disabled everything runs on the calling thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether work will actually be spread over threads in this build.
    pub fn is_threaded(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

pub fn stream_rng(master_seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Evaluates `f(0), …, f(n - 1)` and returns the results in index order.
pub fn map_indexed<T, F>(n: usize, execution: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if execution == Execution::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = execution;
    (0..n).map(f).collect()
}

/// How many samples to draw and how to split them over random streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub n_samples: u64,
    pub master_seed: u64,
    pub n_streams: usize,
    pub execution: Execution,
}

impl SamplingPlan {
    pub fn new(n_samples: u64, master_seed: u64, n_streams: usize) -> Result<Self> {
        if n_streams == 0 {
            return Err(Error::invalid("n_streams", "must be >= 1"));
        }
        if n_samples < n_streams as u64 {
            return Err(Error::invalid(
                "n_samples",
                format!("must be >= n_streams ({n_streams})"),
            ));
        }
        Ok(SamplingPlan {
            n_samples,
            master_seed,
            n_streams,
            execution: Execution::default(),
        })
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    /// Samples assigned to each stream; the first `n_samples % n_streams`
    /// streams take one extra.
    pub fn stream_sizes(&self) -> Vec<u64> {
        let k = self.n_streams as u64;
        let base = self.n_samples / k;
        let extra = self.n_samples % k;
        (0..k).map(|s| base + u64::from(s < extra)).collect()
    }

    /// Runs `work(rng, n)` once per stream and returns the per-stream results
    /// in stream order.
    pub fn run<T, F>(&self, work: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&mut StreamRng, u64) -> T + Sync + Send,
    {
        let sizes = self.stream_sizes();
        let seed = self.master_seed;
        map_indexed(self.n_streams, self.execution, |s| {
            let mut rng = stream_rng(seed, s as u64);
            work(&mut rng, sizes[s])
        })
    }
}
