// SPDX-License-Identifier: Apache-2.0

//! Beam and precoder decoders behind one interface.
//!
//! Networks decode by argmax (classification) or by their normalized output
//! (regression). The nearest-neighbour baseline copies the label or the
//! normalized downlink channel of the closest reference pseudo-location.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::codebook::Codebook;
use crate::linalg::{euclidean_sqr, normalized};
use crate::neural::{HeadKind, InputKind, Network, Output};
use crate::{Error, Result, C64};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum KdNode {
    Leaf(Vec<usize>),
    Split { dim: usize, value: f64, left: Box<KdNode>, right: Box<KdNode> },
}

/// Exact Euclidean nearest-neighbour search over reference points.
///
/// Ties go to the lowest reference index, for the linear scan and the k-d
/// tree alike.
#[derive(Debug, Clone)]
pub struct NearestNeighbor {
    points: Vec<Vec<f64>>,
    tree: Option<KdNode>,
}

fn closer(candidate: (f64, usize), best: (f64, usize)) -> bool {
    candidate.0 < best.0 || (candidate.0 == best.0 && candidate.1 < best.1)
}

impl NearestNeighbor {
    /// Linear-scan index; `accelerate` additionally builds a k-d tree.
    pub fn new(points: Vec<Vec<f64>>, accelerate: bool) -> Result<Self> {
        let dim = points.first().ok_or(Error::Empty("reference set"))?.len();
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
        }
        if points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("reference points"));
        }
        let mut nn = Self { points, tree: None };
        if accelerate {
            let idx: Vec<usize> = (0..nn.points.len()).collect();
            nn.tree = Some(nn.build(idx, 0));
        }
        Ok(nn)
    }

    fn build(&self, mut idx: Vec<usize>, depth: usize) -> KdNode {
        if idx.len() <= LEAF_SIZE {
            return KdNode::Leaf(idx);
        }
        let dim = depth % self.dim();
        idx.sort_by(|&a, &b| self.points[a][dim].total_cmp(&self.points[b][dim]).then(a.cmp(&b)));
        let mid = idx.len() / 2;
        let value = self.points[idx[mid]][dim];
        let right = idx.split_off(mid);
        KdNode::Split {
            dim,
            value,
            left: Box::new(self.build(idx, depth + 1)),
            right: Box::new(self.build(right, depth + 1)),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn is_accelerated(&self) -> bool {
        self.tree.is_some()
    }

    fn check(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: q.len() });
        }
        Ok(())
    }

    /// Brute-force scan.
    pub fn nearest_linear(&self, q: &[f64]) -> Result<usize> {
        self.check(q)?;
        let mut best = (f64::INFINITY, usize::MAX);
        for (i, p) in self.points.iter().enumerate() {
            let c = (euclidean_sqr(p, q), i);
            if closer(c, best) {
                best = c;
            }
        }
        Ok(best.1)
    }

    /// Tree search; falls back to the linear scan without a tree.
    pub fn nearest(&self, q: &[f64]) -> Result<usize> {
        let Some(tree) = &self.tree else { return self.nearest_linear(q) };
        self.check(q)?;
        let mut best = (f64::INFINITY, usize::MAX);
        self.search(tree, q, &mut best);
        Ok(best.1)
    }

    fn search(&self, node: &KdNode, q: &[f64], best: &mut (f64, usize)) {
        match node {
            KdNode::Leaf(idx) => {
                for &i in idx {
                    let c = (euclidean_sqr(&self.points[i], q), i);
                    if closer(c, *best) {
                        *best = c;
                    }
                }
            }
            KdNode::Split { dim, value, left, right } => {
                let diff = q[*dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // equal distances still need a visit for the index tie rule
                if diff * diff <= best.0 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

/// Which decoder a predictor runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    RffNet,
    MlpNet,
    Nn1,
    CodebookClassifier,
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::RffNet => "rff",
            Backend::MlpNet => "mlp",
            Backend::Nn1 => "nn1",
            Backend::CodebookClassifier => "codebook",
        }
    }
}

fn network_backend(net: &Network) -> Backend {
    match net.input_kind() {
        InputKind::Rff => Backend::RffNet,
        InputKind::Dense => Backend::MlpNet,
    }
}

/// Maps a pseudo-location to a codebook beam index.
#[derive(Debug, Clone)]
pub enum BeamPredictor {
    Network(Network),
    NearestNeighbor { index: NearestNeighbor, labels: Vec<usize> },
}

impl BeamPredictor {
    pub fn network(net: Network) -> Result<Self> {
        if net.head != HeadKind::Classification {
            return Err(Error::InvalidConfig("beam prediction needs a classification head".into()));
        }
        Ok(Self::Network(net))
    }

    /// 1-NN beam decoder over labelled reference pseudo-locations.
    pub fn nearest_neighbor(reference_z: Vec<Vec<f64>>, labels: Vec<usize>, accelerate: bool) -> Result<Self> {
        if reference_z.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: reference_z.len(), got: labels.len() });
        }
        Ok(Self::NearestNeighbor { index: NearestNeighbor::new(reference_z, accelerate)?, labels })
    }

    pub fn backend(&self) -> Backend {
        match self {
            Self::Network(net) => network_backend(net),
            Self::NearestNeighbor { .. } => Backend::Nn1,
        }
    }

    pub fn predict_beam(&self, z: &[f64]) -> Result<usize> {
        match self {
            Self::Network(net) => {
                let Output::Probabilities(p) = net.forward(z)? else { unreachable!("classification head") };
                Ok(argmax(&p))
            }
            Self::NearestNeighbor { index, labels } => Ok(labels[index.nearest(z)?]),
        }
    }
}

/// First index of the maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Maps a pseudo-location to a unit-norm precoder.
#[derive(Debug, Clone)]
pub enum PrecoderPredictor {
    Network(Network),
    NearestNeighbor { index: NearestNeighbor, precoders: Vec<Vec<C64>> },
    Codebook { classifier: BeamPredictor, codebook: Codebook },
}

impl PrecoderPredictor {
    pub fn network(net: Network) -> Result<Self> {
        if net.head != HeadKind::Regression {
            return Err(Error::InvalidConfig("precoder prediction needs a regression head".into()));
        }
        Ok(Self::Network(net))
    }

    /// 1-NN precoder decoder; the stored precoders are the normalized
    /// reference channels.
    pub fn nearest_neighbor(reference_z: Vec<Vec<f64>>, channels: &[Vec<C64>], accelerate: bool) -> Result<Self> {
        if reference_z.len() != channels.len() {
            return Err(Error::DimensionMismatch { expected: reference_z.len(), got: channels.len() });
        }
        let precoders =
            channels.iter().map(|g| normalized(g).ok_or(Error::ZeroNorm("reference channel"))).collect::<Result<_>>()?;
        Ok(Self::NearestNeighbor { index: NearestNeighbor::new(reference_z, accelerate)?, precoders })
    }

    /// Precoder = codebook row of the classifier's beam.
    pub fn codebook(classifier: BeamPredictor, codebook: Codebook) -> Self {
        Self::Codebook { classifier, codebook }
    }

    pub fn backend(&self) -> Backend {
        match self {
            Self::Network(net) => network_backend(net),
            Self::NearestNeighbor { .. } => Backend::Nn1,
            Self::Codebook { .. } => Backend::CodebookClassifier,
        }
    }

    pub fn predict_precoder(&self, z: &[f64]) -> Result<Vec<C64>> {
        match self {
            Self::Network(net) => {
                let Output::Precoder(w) = net.forward(z)? else { unreachable!("regression head") };
                Ok(w)
            }
            Self::NearestNeighbor { index, precoders } => Ok(precoders[index.nearest(z)?].clone()),
            Self::Codebook { classifier, codebook } => {
                let i = classifier.predict_beam(z)?;
                if i >= codebook.n_beams() {
                    return Err(Error::IndexOutOfRange { index: i, len: codebook.n_beams() });
                }
                Ok(codebook.beam(i).to_vec())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn nn_exact_hit_and_single_reference() {
        let refs = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, -1.0]];
        let p = BeamPredictor::nearest_neighbor(refs, vec![7, 3, 9], true).unwrap();
        assert_eq!(p.predict_beam(&[1.0, 1.0]).unwrap(), 3);
        let one = BeamPredictor::nearest_neighbor(vec![vec![5.0, 5.0]], vec![4], false).unwrap();
        for q in [[0.0, 0.0], [100.0, -3.0]] {
            assert_eq!(one.predict_beam(&q).unwrap(), 4);
        }
    }

    #[test]
    fn duplicate_references_take_lowest_index() {
        let refs = vec![vec![1.0, 1.0]; 20];
        let labels: Vec<usize> = (0..20).rev().collect();
        for accel in [false, true] {
            let p = BeamPredictor::nearest_neighbor(refs.clone(), labels.clone(), accel).unwrap();
            assert_eq!(p.predict_beam(&[1.0, 1.0]).unwrap(), 19);
            assert_eq!(p.predict_beam(&[3.0, 0.0]).unwrap(), 19);
        }
    }

    #[test]
    fn nn_rejects_bad_input() {
        assert!(BeamPredictor::nearest_neighbor(vec![], vec![], false).is_err());
        assert!(BeamPredictor::nearest_neighbor(vec![vec![0.0]], vec![1, 2], false).is_err());
        let p = BeamPredictor::nearest_neighbor(vec![vec![0.0, 1.0]], vec![1], false).unwrap();
        assert!(p.predict_beam(&[0.0]).is_err());
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.1, 0.4, 0.4, 0.1]), 1);
    }
}
