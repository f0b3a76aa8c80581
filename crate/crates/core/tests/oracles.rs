// SPDX-License-Identifier: Apache-2.0

//! Implementations checked against independent brute-force oracles.

use std::f64::consts::PI;

use chartbeam_core::chart::{chart_quality, isomap, Chart, ChartParams};
use chartbeam_core::codebook::{precoder_correlation, Codebook};
use chartbeam_core::predict::{BeamPredictor, NearestNeighbor, PrecoderPredictor};
use chartbeam_core::{C32, C64};
use rand::Rng;

fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    chartbeam_core::seed::rng(seed)
}

fn random_c64(r: &mut impl Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5)).collect()
}

/// Straight-line evaluation of the mean normalized correlation of every
/// beam, with the codebook entries written out element by element.
fn brute_force_scores(n_v: usize, n_h: usize, o_v: usize, o_h: usize, g: &[Vec<C64>]) -> Vec<f64> {
    let n_a = n_v * n_h;
    let mut scores = Vec::new();
    for mv in 0..o_v * n_v {
        for mh in 0..o_h * n_h {
            let mut total = 0.0;
            for gs in g {
                let mut inner = C64::new(0.0, 0.0);
                let mut energy = 0.0;
                for kv in 0..n_v {
                    for kh in 0..n_h {
                        let phase = 2.0 * PI * ((mv * kv) as f64 / (o_v * n_v) as f64 + (mh * kh) as f64 / (o_h * n_h) as f64);
                        let c = C64::new(phase.cos(), phase.sin()) / (n_a as f64).sqrt();
                        inner += c.conj() * gs[kv * n_h + kh];
                        energy += gs[kv * n_h + kh].norm_sqr();
                    }
                }
                total += inner.norm_sqr() / energy;
            }
            scores.push(total / g.len() as f64);
        }
    }
    scores
}

#[test]
fn rank_beams_matches_brute_force() {
    let mut r = rng(1);
    for _ in 0..50 {
        let (n_v, n_h) = (r.random_range(1..=2), r.random_range(1..=4));
        let n_s = r.random_range(1..=4);
        let cb = Codebook::new(n_v, n_h, 2, 2).unwrap();
        let g: Vec<Vec<C64>> = (0..n_s).map(|_| random_c64(&mut r, n_v * n_h)).collect();
        let ranking = cb.rank_beams(&g).unwrap();
        let oracle = brute_force_scores(n_v, n_h, 2, 2, &g);
        let best = (0..oracle.len()).fold(0, |b, i| if oracle[i] > oracle[b] { i } else { b });
        assert_eq!(ranking.best(), best);
        for (i, s) in ranking.indices.iter().zip(&ranking.scores) {
            assert!((oracle[*i] - s).abs() < 1e-12);
        }
    }
}

#[test]
fn top_score_equals_precoder_correlation_single_carrier() {
    let mut r = rng(2);
    let cb = Codebook::new(2, 4, 2, 2).unwrap();
    for _ in 0..20 {
        let g = random_c64(&mut r, 8);
        let ranking = cb.rank_beams(std::slice::from_ref(&g)).unwrap();
        let eta = precoder_correlation(cb.beam(ranking.best()), &g).unwrap();
        assert!((eta - ranking.scores[0]).abs() < 1e-12);
    }
}

/// Residual of the best orthogonal alignment of `y` onto `x` (both 2D,
/// centered): a rotation, or a rotation after flipping the second axis.
fn procrustes_residual(x: &[[f64; 2]], y: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for flip in [1.0, -1.0] {
        let yy: Vec<[f64; 2]> = y.iter().map(|p| [p[0], flip * p[1]]).collect();
        let (mut s_cos, mut s_sin) = (0.0, 0.0);
        for (a, b) in x.iter().zip(&yy) {
            s_cos += a[0] * b[0] + a[1] * b[1];
            s_sin += b[0] * a[1] - b[1] * a[0];
        }
        let t = s_sin.atan2(s_cos);
        let (c, s) = (t.cos(), t.sin());
        let r: f64 = x
            .iter()
            .zip(&yy)
            .map(|(a, b)| (c * b[0] - s * b[1] - a[0]).powi(2) + (s * b[0] + c * b[1] - a[1]).powi(2))
            .sum();
        best = best.min(r.sqrt());
    }
    best
}

#[test]
fn mds_recovers_planted_grid() {
    let mut r = rng(3);
    let mut pts: Vec<[f64; 2]> = (0..49).map(|i| [(i % 7) as f64 + 0.2 * r.random::<f64>(), (i / 7) as f64 * 1.5]).collect();
    let n = pts.len();
    let (mx, my) = (pts.iter().map(|p| p[0]).sum::<f64>() / n as f64, pts.iter().map(|p| p[1]).sum::<f64>() / n as f64);
    pts.iter_mut().for_each(|p| {
        p[0] -= mx;
        p[1] -= my;
    });
    let dist: Vec<f64> = (0..n * n)
        .map(|k| {
            let (a, b) = (pts[k / n], pts[k % n]);
            ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
        })
        .collect();
    // a complete graph makes geodesics equal to the Euclidean distances
    let params = ChartParams::with_dim(n - 1, 2);
    let (emb, diag) = isomap(&dist, n, &params).unwrap();
    assert_eq!(diag.repaired_edges, 0);
    assert!(procrustes_residual(&pts, &emb) < 1e-6);
}

/// Rank of `j` from `i`, by counting closer points (ties by index).
fn rank_oracle(p: &[Vec<f64>], i: usize, j: usize) -> usize {
    let d = |a: usize, b: usize| p[a].iter().zip(&p[b]).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    1 + (0..p.len()).filter(|&l| l != i && (d(i, l) < d(i, j) || (d(i, l) == d(i, j) && l < j))).count()
}

fn tw_ct_oracle(x: &[Vec<f64>], y: &[Vec<f64>], k: usize) -> (f64, f64) {
    let n = x.len();
    let (mut tw, mut ct) = (0usize, 0usize);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (rx, ry) = (rank_oracle(x, i, j), rank_oracle(y, i, j));
            if ry <= k && rx > k {
                tw += rx - k;
            }
            if rx <= k && ry > k {
                ct += ry - k;
            }
        }
    }
    let (nf, kf) = (n as f64, k as f64);
    let norm = 2.0 / (nf * kf * (2.0 * nf - 3.0 * kf - 1.0));
    (1.0 - norm * tw as f64, 1.0 - norm * ct as f64)
}

#[test]
fn trustworthiness_continuity_match_rank_tables() {
    let mut r = rng(4);
    for trial in 0..5 {
        let n = 10 + 3 * trial;
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![r.random::<f64>(), r.random::<f64>(), 0.0]).collect();
        let mut y: Vec<Vec<f64>> = x.iter().map(|p| vec![p[0], p[1]]).collect();
        // plant one swapped pair plus a small distortion
        y.swap(0, 3);
        y[5][0] += 0.3;
        for frac in [0.1, 0.2, 0.3] {
            let k = (frac * n as f64).round() as usize;
            let q = chart_quality(&x, &y, frac).unwrap();
            let (tw, ct) = tw_ct_oracle(&x, &y, k);
            assert!((q.trustworthiness - tw).abs() < 1e-12, "n={n} k={k}");
            assert!((q.continuity - ct).abs() < 1e-12);
            assert!(q.trustworthiness < 1.0 || q.continuity < 1.0 || k == 0);
        }
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain, counter-clockwise.
fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn inside_hull(hull: &[[f64; 2]], p: [f64; 2], tol: f64) -> bool {
    (0..hull.len()).all(|i| cross(hull[i], hull[(i + 1) % hull.len()], p) >= -tol)
}

fn random_chart(seed: u64, n: usize, len: usize) -> Chart {
    let mut r = rng(seed);
    let chans: Vec<Vec<C32>> = (0..n)
        .map(|_| (0..len).map(|_| C32::new(r.random::<f32>() - 0.5, r.random::<f32>() - 0.5)).collect())
        .collect();
    Chart::build(chans, ChartParams::with_dim(5, 2)).unwrap().0
}

#[test]
fn out_of_sample_embedding_is_convex_and_consistent() {
    let chart = random_chart(5, 60, 12);
    let mut r = rng(6);
    for _ in 0..100 {
        let h = random_c64(&mut r, 12);
        let weights = chart.embedding_weights(&h).unwrap();
        assert_eq!(weights.len(), 6);
        assert!(weights.iter().all(|w| w.1 >= 0.0));
        assert!((weights.iter().map(|w| w.1).sum::<f64>() - 1.0).abs() < 1e-12);
        let z = chart.embed(&h).unwrap();
        let hull = convex_hull(weights.iter().map(|(i, _)| [chart.cal_embedding[*i][0], chart.cal_embedding[*i][1]]).collect());
        assert!(inside_hull(&hull, [z[0], z[1]], 1e-9));
    }
    for n in 0..chart.n_calibration() {
        let z = chart.embed_c32(&chart.cal_channels[n]).unwrap();
        let err = ((z[0] - chart.cal_embedding[n][0]).powi(2) + (z[1] - chart.cal_embedding[n][1]).powi(2)).sqrt();
        assert!(err < 1e-6, "calibration point {n}: {err}");
    }
}

#[test]
fn tree_and_linear_scan_agree() {
    let mut r = rng(7);
    let refs: Vec<Vec<f64>> = (0..500).map(|_| vec![r.random::<f64>() * 10.0, r.random::<f64>() * 10.0]).collect();
    // include exact duplicates and grid-aligned ties
    let mut refs = refs;
    refs.extend((0..50).map(|i| vec![(i % 5) as f64, (i / 5) as f64]));
    refs.extend((0..50).map(|i| vec![(i % 5) as f64, (i / 5) as f64]));
    let tree = NearestNeighbor::new(refs.clone(), true).unwrap();
    let flat = NearestNeighbor::new(refs, false).unwrap();
    for q in 0..1000 {
        let query = if q % 4 == 0 {
            vec![(q % 7) as f64 + 0.5, (q % 11) as f64]
        } else {
            vec![r.random::<f64>() * 12.0 - 1.0, r.random::<f64>() * 12.0 - 1.0]
        };
        assert_eq!(tree.nearest(&query).unwrap(), flat.nearest_linear(&query).unwrap(), "query {query:?}");
    }
}

#[test]
fn nn1_matches_exhaustive_scan() {
    let refs = vec![vec![0.0, 0.0], vec![3.0, 1.0], vec![-2.0, 4.0], vec![1.0, -3.0], vec![5.0, 5.0]];
    let labels = vec![10, 11, 12, 13, 14];
    let p = BeamPredictor::nearest_neighbor(refs.clone(), labels.clone(), true).unwrap();
    let mut r = rng(8);
    for _ in 0..200 {
        let q = [r.random::<f64>() * 10.0 - 4.0, r.random::<f64>() * 10.0 - 4.0];
        let mut best = 0;
        for i in 1..refs.len() {
            let di = (refs[i][0] - q[0]).powi(2) + (refs[i][1] - q[1]).powi(2);
            let db = (refs[best][0] - q[0]).powi(2) + (refs[best][1] - q[1]).powi(2);
            if di < db {
                best = i;
            }
        }
        assert_eq!(p.predict_beam(&q).unwrap(), labels[best]);
    }
}

#[test]
fn nn1_precoder_self_consistency() {
    let mut r = rng(9);
    let refs: Vec<Vec<f64>> = (0..30).map(|_| vec![r.random::<f64>(), r.random::<f64>()]).collect();
    let chans: Vec<Vec<C64>> = (0..30).map(|_| random_c64(&mut r, 8)).collect();
    let p = PrecoderPredictor::nearest_neighbor(refs.clone(), &chans, false).unwrap();
    for (z, g) in refs.iter().zip(&chans) {
        let w = p.predict_precoder(z).unwrap();
        assert!((w.iter().map(|x| x.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((precoder_correlation(&w, g).unwrap() - 1.0).abs() < 1e-12);
    }
}
