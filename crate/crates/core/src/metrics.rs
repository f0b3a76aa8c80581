// SPDX-License-Identifier: Apache-2.0

//! Beam-prediction metrics and overhead accounting.

use alloc::vec::Vec;

use crate::codebook::BeamRanking;
use crate::{Error, Result};

/// Number of thresholds in a correlation CDF (0.00, 0.01, ..., 1.00).
pub const CDF_POINTS: usize = 101;

/// Fraction of UEs whose predicted beam is among their `k` best beams.
pub fn top_k_accuracy(predicted: &[usize], rankings: &[BeamRanking], k: usize) -> Result<f64> {
    if predicted.len() != rankings.len() {
        return Err(Error::DimensionMismatch { expected: rankings.len(), got: predicted.len() });
    }
    if predicted.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if let Some(r) = rankings.iter().find(|r| k > r.len()) {
        return Err(Error::InvalidConfig(alloc::format!("k = {k} exceeds the {} beams of the codebook", r.len())));
    }
    let hits = predicted.iter().zip(rankings).filter(|(p, r)| r.top(k).contains(p)).count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// Empirical CDF of correlation samples on a fixed grid of
/// [`CDF_POINTS`] thresholds: pairs `(t, fraction of samples <= t)`.
pub fn correlation_cdf(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::Empty("correlation samples"));
    }
    if let Some(&bad) = samples.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
        return Err(Error::OutOfRange(bad));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok((0..CDF_POINTS)
        .map(|i| {
            let t = i as f64 / (CDF_POINTS - 1) as f64;
            let count = sorted.partition_point(|&x| x <= t);
            (t, count as f64 / n)
        })
        .collect())
}

/// Channel coefficients exchanged per beam-management round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Overhead {
    /// Every BS estimates the full channel: `B * D`.
    pub sweeping_cost: usize,
    /// One channel estimate plus a pseudo-location per BS: `D + B * d`.
    pub proposed_cost: usize,
}

pub fn overhead_report(n_bs: usize, ambient_dim: usize, chart_dim: usize) -> Overhead {
    Overhead { sweeping_cost: n_bs * ambient_dim, proposed_cost: ambient_dim + n_bs * chart_dim }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}
