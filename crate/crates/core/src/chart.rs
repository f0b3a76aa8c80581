// SPDX-License-Identifier: Apache-2.0

//! Channel charting at the first BS.
//!
//! Calibration uplink channels are compared with a phase-insensitive
//! distance, linked into a symmetric k-nearest-neighbour graph, and
//! embedded with ISOMAP (graph geodesics followed by classical MDS). New
//! channels are charted without re-running ISOMAP: their pseudo-location is
//! a convex combination of the pseudo-locations of the nearest calibration
//! channels.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::linalg::{cdot, euclidean, normalized, top_eigenpairs};
use crate::{Error, Result, C32, C64};

/// Floor added to distances before inverting them into weights.
pub const OOS_EPSILON: f64 = 1e-9;
const EIGEN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChartParams {
    /// Neighbours per node in the ISOMAP graph.
    pub n_neighbors: usize,
    /// Pseudo-location dimension.
    pub target_dim: usize,
    /// Calibration neighbours combined when embedding a new channel.
    pub oos_neighbors: usize,
}

impl Default for ChartParams {
    fn default() -> Self {
        Self::with_dim(10, 2)
    }
}

impl ChartParams {
    /// Parameters with the default `3 * target_dim` out-of-sample neighbours.
    pub fn with_dim(n_neighbors: usize, target_dim: usize) -> Self {
        Self { n_neighbors, target_dim, oos_neighbors: 3 * target_dim }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_neighbors < 2 {
            return Err(Error::InvalidConfig("n_neighbors must be at least 2".into()));
        }
        if !(1..=3).contains(&self.target_dim) {
            return Err(Error::InvalidConfig("target_dim must be 1, 2 or 3".into()));
        }
        if self.oos_neighbors < self.target_dim + 1 {
            return Err(Error::InvalidConfig("oos_neighbors must exceed target_dim".into()));
        }
        Ok(())
    }
}

/// Sine of the principal angle between two channel rays, in `[0, 1]`.
///
/// Zero exactly when one vector is a complex multiple of the other.
pub fn channel_distance(h1: &[C64], h2: &[C64]) -> Result<f64> {
    if h1.len() != h2.len() {
        return Err(Error::DimensionMismatch { expected: h1.len(), got: h2.len() });
    }
    let u = normalized(h1).ok_or(Error::ZeroNorm("channel"))?;
    let v = normalized(h2).ok_or(Error::ZeroNorm("channel"))?;
    Ok(unit_distance(&u, &v))
}

/// [`channel_distance`] for unit-norm inputs.
pub fn unit_distance(u: &[C64], v: &[C64]) -> f64 {
    let inner = cdot(v, u);
    let c2 = inner.norm_sqr().min(1.0);
    if 1.0 - c2 > 1e-4 {
        (1.0 - c2).sqrt()
    } else {
        // near-collinear rays: the residual of projecting u onto v avoids the
        // cancellation in 1 - c^2
        u.iter().zip(v).map(|(a, b)| (a - inner * b).norm_sqr()).sum::<f64>().sqrt().min(1.0)
    }
}

/// Symmetric `n x n` row-major matrix of [`unit_distance`] values.
pub fn pairwise_distances(units: &[Vec<C64>]) -> Vec<f64> {
    let n = units.len();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = unit_distance(&units[i], &units[j]);
            out[i * n + j] = d;
            out[j * n + i] = d;
        }
    }
    out
}

/// Weighted undirected graph as adjacency lists.
pub type Graph = Vec<Vec<(usize, f64)>>;

/// k-nearest-neighbour graph, keeping an edge when either endpoint lists
/// the other. Ties are broken by lower index.
pub fn knn_graph(dist: &[f64], n: usize, k: usize) -> Graph {
    let mut keep = vec![vec![false; n]; n];
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| dist[i * n + a].total_cmp(&dist[i * n + b]).then(a.cmp(&b)));
        for &j in others.iter().take(k) {
            keep[i][j] = true;
            keep[j][i] = true;
        }
    }
    (0..n).map(|i| (0..n).filter(|&j| keep[i][j]).map(|j| (j, dist[i * n + j])).collect()).collect()
}

fn components(graph: &Graph) -> Vec<usize> {
    let n = graph.len();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        label[start] = next;
        while let Some(u) = stack.pop() {
            for &(v, _) in &graph[u] {
                if label[v] == usize::MAX {
                    label[v] = next;
                    stack.push(v);
                }
            }
        }
        next += 1;
    }
    label
}

/// Join components by repeatedly adding the shortest edge between two
/// different components. Returns the number of edges added.
pub fn repair_connectivity(graph: &mut Graph, dist: &[f64]) -> usize {
    let n = graph.len();
    let mut added = 0;
    loop {
        let label = components(graph);
        if label.iter().all(|&l| l == 0) {
            return added;
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            for j in i + 1..n {
                if label[i] != label[j] {
                    let d = dist[i * n + j];
                    if best.is_none_or(|(bd, _, _)| d < bd) {
                        best = Some((d, i, j));
                    }
                }
            }
        }
        let (d, i, j) = best.expect("more than one component implies a cross edge");
        graph[i].push((j, d));
        graph[j].push((i, d));
        added += 1;
    }
}

#[derive(Copy, Clone, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-path distances from `source` (Dijkstra).
pub fn single_source(graph: &Graph, source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; graph.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry { dist: 0.0, node: source });
    while let Some(HeapEntry { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for &(next, w) in &graph[node] {
            let nd = d + w;
            if nd < dist[next] {
                dist[next] = nd;
                heap.push(HeapEntry { dist: nd, node: next });
            }
        }
    }
    dist
}

/// All-pairs geodesic distances, `n x n` row-major and symmetrized.
pub fn geodesic_distances(graph: &Graph) -> Vec<f64> {
    let n = graph.len();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        out[i * n..(i + 1) * n].copy_from_slice(&single_source(graph, i));
    }
    for i in 0..n {
        for j in i + 1..n {
            let m = 0.5 * (out[i * n + j] + out[j * n + i]);
            out[i * n + j] = m;
            out[j * n + i] = m;
        }
    }
    out
}

/// Classical MDS of an `n x n` distance matrix: double-center the squared
/// distances and scale the top `dim` eigenvectors by the square roots of
/// their eigenvalues. Returns one `dim`-vector per point, centered.
pub fn classical_mds(dist: &[f64], n: usize, dim: usize) -> Vec<Vec<f64>> {
    let sq: Vec<f64> = dist.iter().map(|d| d * d).collect();
    let row_mean: Vec<f64> = (0..n).map(|i| sq[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            gram[i * n + j] = -0.5 * (sq[i * n + j] - row_mean[i] - row_mean[j] + grand);
        }
    }
    let pairs = top_eigenpairs(&gram, n, dim, EIGEN_TOLERANCE);
    let mut points = vec![vec![0.0; dim]; n];
    for (k, (val, vec_k)) in pairs.values.iter().zip(&pairs.vectors).enumerate() {
        let s = val.max(0.0).sqrt();
        // fix the sign so the largest-magnitude component is positive
        let pivot = vec_k.iter().copied().fold(0.0_f64, |p, x| if x.abs() > p.abs() { x } else { p });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (p, v) in points.iter_mut().zip(vec_k) {
            p[k] = sign * s * v;
        }
    }
    for k in 0..dim {
        let mean = points.iter().map(|p| p[k]).sum::<f64>() / n as f64;
        points.iter_mut().for_each(|p| p[k] -= mean);
    }
    points
}

/// Side information produced while building a chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChartDiagnostics {
    /// Edges added to connect a disconnected neighbour graph.
    pub repaired_edges: usize,
}

/// ISOMAP on a precomputed distance matrix.
pub fn isomap(dist: &[f64], n: usize, params: &ChartParams) -> Result<(Vec<Vec<f64>>, ChartDiagnostics)> {
    params.validate()?;
    if n < params.n_neighbors + 1 {
        return Err(Error::TooFewPoints { got: n, need: params.n_neighbors + 1 });
    }
    if dist.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, got: dist.len() });
    }
    if !dist.iter().any(|&d| d > 1e-12) {
        return Err(Error::DegenerateDistances);
    }
    let mut graph = knn_graph(dist, n, params.n_neighbors);
    let repaired_edges = repair_connectivity(&mut graph, dist);
    let geo = geodesic_distances(&graph);
    Ok((classical_mds(&geo, n, params.target_dim), ChartDiagnostics { repaired_edges }))
}

/// Calibration state of a channel chart: the calibration channels (`D`) and
/// their pseudo-locations (`Z`).
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub params: ChartParams,
    /// One vectorized calibration channel per column of `D`.
    pub cal_channels: Vec<Vec<C32>>,
    /// One pseudo-location per calibration channel.
    pub cal_embedding: Vec<Vec<f64>>,
    units: Vec<Vec<C64>>,
}

fn widen(h: &[C32]) -> Vec<C64> {
    h.iter().map(|z| C64::new(z.re.into(), z.im.into())).collect()
}

fn unit_columns(channels: &[Vec<C32>]) -> Result<Vec<Vec<C64>>> {
    channels.iter().map(|h| normalized(&widen(h)).ok_or(Error::ZeroNorm("calibration channel"))).collect()
}

impl Chart {
    /// Run ISOMAP on the calibration channels.
    pub fn build(cal_channels: Vec<Vec<C32>>, params: ChartParams) -> Result<(Self, ChartDiagnostics)> {
        let units = unit_columns(&cal_channels)?;
        let dist = pairwise_distances(&units);
        Self::build_with_distances(cal_channels, units, &dist, params)
    }

    /// Like [`Chart::build`], with the pairwise distance matrix supplied by
    /// the caller (for instance computed in parallel).
    pub fn build_with_distances(
        cal_channels: Vec<Vec<C32>>,
        units: Vec<Vec<C64>>,
        dist: &[f64],
        params: ChartParams,
    ) -> Result<(Self, ChartDiagnostics)> {
        let n = cal_channels.len();
        if units.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: units.len() });
        }
        check_lengths(&cal_channels)?;
        let (cal_embedding, diag) = isomap(dist, n, &params)?;
        Ok((Self { params, cal_channels, cal_embedding, units }, diag))
    }

    /// Reassemble a chart from persisted parts.
    pub fn from_parts(params: ChartParams, cal_channels: Vec<Vec<C32>>, cal_embedding: Vec<Vec<f64>>) -> Result<Self> {
        params.validate()?;
        if cal_channels.len() != cal_embedding.len() {
            return Err(Error::DimensionMismatch { expected: cal_channels.len(), got: cal_embedding.len() });
        }
        if cal_channels.len() < params.oos_neighbors {
            return Err(Error::TooFewPoints { got: cal_channels.len(), need: params.oos_neighbors });
        }
        check_lengths(&cal_channels)?;
        if let Some(z) = cal_embedding.iter().find(|z| z.len() != params.target_dim) {
            return Err(Error::DimensionMismatch { expected: params.target_dim, got: z.len() });
        }
        let units = unit_columns(&cal_channels)?;
        Ok(Self { params, cal_channels, cal_embedding, units })
    }

    pub fn n_calibration(&self) -> usize {
        self.cal_channels.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.cal_channels.first().map_or(0, Vec::len)
    }

    pub fn dim(&self) -> usize {
        self.params.target_dim
    }

    /// Calibration neighbours and convex weights used to embed `h`.
    pub fn embedding_weights(&self, h: &[C64]) -> Result<Vec<(usize, f64)>> {
        if h.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch { expected: self.ambient_dim(), got: h.len() });
        }
        let u = normalized(h).ok_or(Error::ZeroNorm("channel"))?;
        let mut dists: Vec<(usize, f64)> = self.units.iter().map(|c| unit_distance(&u, c)).enumerate().collect();
        let k = self.params.oos_neighbors.min(dists.len());
        let by_dist = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
        if k < dists.len() {
            dists.select_nth_unstable_by(k - 1, by_dist);
            dists.truncate(k);
        }
        dists.sort_by(by_dist);
        let mut weights: Vec<(usize, f64)> = dists.iter().map(|&(i, d)| (i, 1.0 / (d + OOS_EPSILON))).collect();
        let total: f64 = weights.iter().map(|w| w.1).sum();
        weights.iter_mut().for_each(|w| w.1 /= total);
        Ok(weights)
    }

    /// Pseudo-location of a new channel.
    pub fn embed(&self, h: &[C64]) -> Result<Vec<f64>> {
        let weights = self.embedding_weights(h)?;
        let mut z = vec![0.0; self.dim()];
        for (i, w) in weights {
            for (zk, ck) in z.iter_mut().zip(&self.cal_embedding[i]) {
                *zk += w * ck;
            }
        }
        Ok(z)
    }

    pub fn embed_c32(&self, h: &[C32]) -> Result<Vec<f64>> {
        self.embed(&widen(h))
    }
}

fn check_lengths(channels: &[Vec<C32>]) -> Result<()> {
    let len = channels.first().map_or(0, Vec::len);
    match channels.iter().find(|h| h.len() != len) {
        Some(h) => Err(Error::DimensionMismatch { expected: len, got: h.len() }),
        None => Ok(()),
    }
}

/// Neighbourhood preservation and distance fidelity of a chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartQuality {
    pub trustworthiness: f64,
    pub continuity: f64,
    pub kruskal_stress: f64,
    pub neighborhood_fraction: f64,
}

/// Rank (1 = nearest) of every other point as seen from `i`, ties broken by
/// index; `rank[i] = 0`.
fn ranks_from<P: AsRef<[f64]>>(points: &[P], i: usize) -> (Vec<usize>, Vec<usize>) {
    let n = points.len();
    let d: Vec<f64> = points.iter().map(|p| euclidean(points[i].as_ref(), p.as_ref())).collect();
    let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    let mut rank = vec![0; n];
    for (r, &j) in order.iter().enumerate() {
        rank[j] = r + 1;
    }
    (order, rank)
}

/// Trustworthiness, continuity and Kruskal stress of `embedding` against
/// `true_positions`, with neighbourhoods of `round(fraction * N)` points.
pub fn chart_quality<P: AsRef<[f64]>, Q: AsRef<[f64]>>(
    true_positions: &[P],
    embedding: &[Q],
    neighborhood_fraction: f64,
) -> Result<ChartQuality> {
    let n = true_positions.len();
    if embedding.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: embedding.len() });
    }
    if n < 10 {
        return Err(Error::TooFewPoints { got: n, need: 10 });
    }
    if !(neighborhood_fraction > 0.0 && neighborhood_fraction < 1.0) {
        return Err(Error::InvalidConfig("neighborhood_fraction must lie in (0, 1)".into()));
    }
    let k = (neighborhood_fraction * n as f64).round() as usize;
    if k < 1 || 2 * k > n - 1 {
        return Err(Error::InvalidNeighborhood { k, n });
    }
    let mut tw_penalty = 0usize;
    let mut ct_penalty = 0usize;
    for i in 0..n {
        let (orig_order, orig_rank) = ranks_from(true_positions, i);
        let (emb_order, emb_rank) = ranks_from(embedding, i);
        // embedding neighbours that are not true neighbours
        tw_penalty += emb_order[..k].iter().filter(|&&j| orig_rank[j] > k).map(|&j| orig_rank[j] - k).sum::<usize>();
        // true neighbours missing from the embedding neighbourhood
        ct_penalty += orig_order[..k].iter().filter(|&&j| emb_rank[j] > k).map(|&j| emb_rank[j] - k).sum::<usize>();
    }
    let (nf, kf) = (n as f64, k as f64);
    let norm = 2.0 / (nf * kf * (2.0 * nf - 3.0 * kf - 1.0));

    let (mut s_dd, mut s_hh, mut s_d2) = (0.0, 0.0, 0.0);
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d = euclidean(true_positions[i].as_ref(), true_positions[j].as_ref());
            let dh = euclidean(embedding[i].as_ref(), embedding[j].as_ref());
            s_dd += d * dh;
            s_hh += dh * dh;
            s_d2 += d * d;
            pairs.push((d, dh));
        }
    }
    let beta = if s_hh > 0.0 { s_dd / s_hh } else { 0.0 };
    let resid: f64 = pairs.iter().map(|(d, dh)| (beta * dh - d).powi(2)).sum();
    let kruskal_stress = if s_d2 > 0.0 { (resid / s_d2).sqrt() } else { 0.0 };

    Ok(ChartQuality {
        trustworthiness: 1.0 - norm * tw_penalty as f64,
        continuity: 1.0 - norm * ct_penalty as f64,
        kruskal_stress,
        neighborhood_fraction,
    })
}
