//! Wall-clock latency measurement for repeated inference.

use std::time::{Duration, Instant};

use crate::error::{config_err, Result};

/// Untimed runs before measurement starts.
pub const DEFAULT_WARMUP: usize = 5;
pub const DEFAULT_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyStats {
    pub iterations: usize,
    pub mean: Duration,
    pub min: Duration,
    pub max: Duration,
}

impl LatencyStats {
    pub fn fps(&self) -> f64 {
        1.0 / self.mean.as_secs_f64()
    }

    pub fn from_samples(samples: &[Duration]) -> Option<Self> {
        let min = *samples.iter().min()?;
        let max = *samples.iter().max()?;
        let total: Duration = samples.iter().sum();
        Some(Self {
            iterations: samples.len(),
            mean: total / samples.len() as u32,
            min,
            max,
        })
    }
}

/// Runs `f` `warmup` times untimed, then `iterations` times timed. Stops at
/// the first error.
pub fn measure<F>(warmup: usize, iterations: usize, mut f: F) -> Result<LatencyStats>
where
    F: FnMut() -> Result<()>,
{
    if iterations == 0 {
        return Err(config_err("need at least one timed iteration"));
    }
    for _ in 0..warmup {
        f()?;
    }
    let mut samples = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let start = Instant::now();
        f()?;
        samples.push(start.elapsed());
    }
    Ok(LatencyStats::from_samples(&samples).expect("iterations > 0"))
}
