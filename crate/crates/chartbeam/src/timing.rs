// SPDX-License-Identifier: Apache-2.0

//! Wall-clock inference timing. Runs on the calling thread only.

use std::hint::black_box;
use std::time::Instant;

use serde::Serialize;

use crate::error::{PipelineError, Result};

pub const MIN_REPETITIONS: usize = 10;

/// Per-query nanoseconds over repeated passes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingStats {
    pub mean_ns: f64,
    /// Sample standard deviation of the per-pass means.
    pub std_ns: f64,
    pub repetitions: usize,
    pub queries: usize,
}

/// Time `predict` over every query, `repetitions` times, after one untimed
/// warm-up pass.
pub fn time_inference<Q, T>(predict: impl Fn(&Q) -> T, queries: &[Q], repetitions: usize) -> Result<TimingStats> {
    if queries.is_empty() {
        return Err(PipelineError::Validation("timing needs at least one query".into()));
    }
    if repetitions < MIN_REPETITIONS {
        return Err(PipelineError::Validation(format!("timing needs at least {MIN_REPETITIONS} repetitions")));
    }
    for q in queries {
        black_box(predict(black_box(q)));
    }
    let per_query: Vec<f64> = (0..repetitions)
        .map(|_| {
            let start = Instant::now();
            for q in queries {
                black_box(predict(black_box(q)));
            }
            start.elapsed().as_nanos() as f64 / queries.len() as f64
        })
        .collect();
    let n = per_query.len() as f64;
    let mean_ns = per_query.iter().sum::<f64>() / n;
    let var = per_query.iter().map(|t| (t - mean_ns).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(TimingStats { mean_ns, std_ns: var.sqrt(), repetitions, queries: queries.len() })
}
