// SPDX-License-Identifier: Apache-2.0

//! Oversampled 2D-DFT codebooks and exhaustive best-beam ranking.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::linalg::{cdot, cnorm_sqr};
use crate::{Error, Result, C64};

/// Oversampled 1D-DFT matrix of shape `(o * n) x n`, row-major, with entry
/// `(m, k) = exp(j 2 pi m k / (o n))`.
pub fn dft_1d(n: usize, o: usize) -> Vec<C64> {
    assert!(n >= 1 && o >= 1, "dft_1d requires n >= 1 and o >= 1");
    let rows = o * n;
    let mut out = Vec::with_capacity(rows * n);
    for m in 0..rows {
        for k in 0..n {
            // reduce m*k modulo the period so the phase stays exact for large codebooks
            let r = (m * k) % rows;
            out.push(C64::from_polar(1.0, 2.0 * PI * r as f64 / rows as f64));
        }
    }
    out
}

/// `C = (Psi_v kron Psi_h) / sqrt(N_v N_h)`.
///
/// Row `m` of the codebook decomposes as `m = m_v * (o_h * n_h) + m_h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub n_v: usize,
    pub n_h: usize,
    pub o_v: usize,
    pub o_h: usize,
    beams: Vec<Vec<C64>>,
}

impl Codebook {
    pub fn new(n_v: usize, n_h: usize, o_v: usize, o_h: usize) -> Result<Self> {
        if n_v == 0 || n_h == 0 || o_v == 0 || o_h == 0 {
            return Err(Error::InvalidConfig("codebook dimensions must be at least 1".into()));
        }
        let psi_v = dft_1d(n_v, o_v);
        let psi_h = dft_1d(n_h, o_h);
        let scale = 1.0 / ((n_v * n_h) as f64).sqrt();
        let mut beams = Vec::with_capacity(o_v * n_v * o_h * n_h);
        for mv in 0..o_v * n_v {
            for mh in 0..o_h * n_h {
                let mut row = Vec::with_capacity(n_v * n_h);
                for kv in 0..n_v {
                    for kh in 0..n_h {
                        row.push(psi_v[mv * n_v + kv] * psi_h[mh * n_h + kh] * scale);
                    }
                }
                beams.push(row);
            }
        }
        Ok(Self { n_v, n_h, o_v, o_h, beams })
    }

    pub fn n_beams(&self) -> usize {
        self.beams.len()
    }

    pub fn n_antennas(&self) -> usize {
        self.n_v * self.n_h
    }

    pub fn beam(&self, index: usize) -> &[C64] {
        &self.beams[index]
    }

    pub fn beams(&self) -> &[Vec<C64>] {
        &self.beams
    }

    /// Split a beam index into its (vertical, horizontal) DFT indices.
    pub fn beam_coordinates(&self, index: usize) -> (usize, usize) {
        let per_row = self.o_h * self.n_h;
        (index / per_row, index % per_row)
    }

    /// Rank every beam by its mean normalized correlation with the
    /// per-subcarrier channels.
    pub fn rank_beams(&self, subcarriers: &[Vec<C64>]) -> Result<BeamRanking> {
        if subcarriers.is_empty() {
            return Err(Error::Empty("downlink subcarriers"));
        }
        let n_a = self.n_antennas();
        let mut energies = Vec::with_capacity(subcarriers.len());
        for g in subcarriers {
            if g.len() != n_a {
                return Err(Error::DimensionMismatch { expected: n_a, got: g.len() });
            }
            let e = cnorm_sqr(g);
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::ZeroNorm("downlink subcarrier channel"));
            }
            energies.push(e);
        }
        let n_s = subcarriers.len() as f64;
        let scores: Vec<f64> = self
            .beams
            .iter()
            .map(|c| subcarriers.iter().zip(&energies).map(|(g, e)| cdot(c, g).norm_sqr() / e).sum::<f64>() / n_s)
            .collect();
        let mut indices: Vec<usize> = (0..scores.len()).collect();
        // stable sort keeps the lowest index first among ties
        indices.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        let scores = indices.iter().map(|&i| scores[i]).collect();
        Ok(BeamRanking { indices, scores })
    }
}

/// Beams sorted by decreasing score.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamRanking {
    pub indices: Vec<usize>,
    pub scores: Vec<f64>,
}

impl BeamRanking {
    pub fn best(&self) -> usize {
        self.indices[0]
    }

    /// The `k` best beam indices.
    pub fn top(&self, k: usize) -> &[usize] {
        &self.indices[..k.min(self.indices.len())]
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// `|w^H g|^2 / ||g||^2` for a unit-norm precoder `w`.
pub fn precoder_correlation(w: &[C64], channel: &[C64]) -> Result<f64> {
    if w.len() != channel.len() {
        return Err(Error::DimensionMismatch { expected: channel.len(), got: w.len() });
    }
    let e = cnorm_sqr(channel);
    if !(e > 0.0) || !e.is_finite() {
        return Err(Error::ZeroNorm("downlink channel"));
    }
    let wn = cnorm_sqr(w).sqrt();
    if (wn - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidConfig(alloc::format!("precoder norm {wn} is not 1")));
    }
    Ok((cdot(w, channel).norm_sqr() / e).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn dft_first_row_and_small_cases() {
        let m = dft_1d(5, 3);
        assert!(m[..5].iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-15));
        let m = dft_1d(2, 1);
        let expect = [1.0, 1.0, 1.0, -1.0];
        for (z, e) in m.iter().zip(expect) {
            assert!((z - C64::new(e, 0.0)).norm() < 1e-15);
        }
        let m = dft_1d(4, 2);
        // entry (3, 2) = exp(j 2 pi 6 / 8)
        let direct = C64::new(0.0, 2.0 * PI * 6.0 / 8.0).exp();
        assert!((m[3 * 4 + 2] - direct).norm() < 1e-15);
        assert!((m[3 * 4 + 2] - C64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn full_size_codebook_shape() {
        let cb = Codebook::new(8, 8, 2, 2).unwrap();
        assert_eq!(cb.n_beams(), 256);
        assert_eq!(cb.n_antennas(), 64);
        for b in cb.beams() {
            assert!((cnorm_sqr(b) - 1.0).abs() < 1e-12);
        }
        assert_eq!(cb.beam_coordinates(17), (1, 1));
    }

    #[test]
    fn critically_sampled_codebook_is_unitary() {
        let cb = Codebook::new(2, 4, 1, 1).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let g = cdot(cb.beam(i), cb.beam(j));
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g - C64::new(e, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn aligned_channel_ranks_first() {
        let cb = Codebook::new(2, 2, 2, 2).unwrap();
        let alpha = C64::new(-0.3, 2.0);
        let g: Vec<C64> = cb.beam(5).iter().map(|x| x * alpha).collect();
        let r = cb.rank_beams(&[g.clone(), g]).unwrap();
        assert_eq!(r.best(), 5);
        assert!((r.scores[0] - 1.0).abs() < 1e-12);
        assert!(cb.rank_beams(&[vec![C64::new(0.0, 0.0); 4]]).is_err());
    }

    #[test]
    fn correlation_hand_cases() {
        let w = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let s = 3.0 / 2f64.sqrt();
        let g = [C64::new(0.0, s), C64::new(0.0, s)];
        assert!((precoder_correlation(&w, &g).unwrap() - 0.5).abs() < 1e-12);
        let g2 = [C64::new(0.0, 0.0), C64::new(1.0, 1.0)];
        assert!(precoder_correlation(&w, &g2).unwrap().abs() < 1e-15);
        let g3 = [C64::new(2.0, -1.0), C64::new(0.0, 0.0)];
        assert!((precoder_correlation(&w, &g3).unwrap() - 1.0).abs() < 1e-12);
        assert!(precoder_correlation(&w, &[C64::new(0.0, 0.0); 2]).is_err());
    }
}
