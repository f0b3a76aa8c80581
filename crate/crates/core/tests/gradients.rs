// SPDX-License-Identifier: Apache-2.0

//! Analytic gradients against central finite differences.

use chartbeam_core::neural::{init_network, HeadKind, InputKind, Network, NetworkDims, Target};
use chartbeam_core::C64;
use rand::Rng;

const STEP: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;
// gradients below this magnitude are compared absolutely; finite differences
// cannot resolve them
const ABS_FLOOR: f64 = 1e-6;

fn batch(head: HeadKind, seed: u64, zero_inputs: bool) -> (Vec<Vec<f64>>, Vec<Target>) {
    let mut rng = chartbeam_core::seed::rng(seed);
    let inputs: Vec<Vec<f64>> = (0..4)
        .map(|_| if zero_inputs { vec![0.0, 0.0] } else { vec![rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0] })
        .collect();
    let targets = (0..4)
        .map(|_| match head {
            HeadKind::Classification => Target::Beam(rng.random_range(0..5)),
            HeadKind::Regression => Target::Channel(
                (0..5).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect(),
            ),
        })
        .collect();
    (inputs, targets)
}

fn finite_difference(net: &Network, inputs: &[Vec<f64>], targets: &[Target], block: usize, i: usize) -> f64 {
    let mut plus = net.clone();
    plus.param_blocks_mut()[block][i] += STEP;
    let mut minus = net.clone();
    minus.param_blocks_mut()[block][i] -= STEP;
    (plus.loss(inputs, targets).unwrap() - minus.loss(inputs, targets).unwrap()) / (2.0 * STEP)
}

fn check(kind: InputKind, head: HeadKind, seed: u64) -> f64 {
    let dims = NetworkDims { input_dim: 2, n_freq: 3, hidden: 4, n_out: 5 };
    let net = init_network(kind, head, dims, 1.0, seed).unwrap();
    let (inputs, targets) = batch(head, seed + 100, false);
    let (_, grads) = net.backward(&inputs, &targets).unwrap();
    let mut worst = 0.0_f64;
    for (b, block) in grads.blocks.iter().enumerate() {
        for (i, &analytic) in block.iter().enumerate() {
            let numeric = finite_difference(&net, &inputs, &targets, b, i);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ABS_FLOOR);
            assert!(rel < REL_TOL, "{kind:?}/{head:?} block {b}[{i}]: analytic {analytic} numeric {numeric}");
            worst = worst.max(rel);
        }
    }
    worst
}

#[test]
fn rff_classification_gradients() {
    for seed in 0..3 {
        check(InputKind::Rff, HeadKind::Classification, seed);
    }
}

#[test]
fn rff_regression_gradients() {
    for seed in 0..3 {
        check(InputKind::Rff, HeadKind::Regression, seed);
    }
}

#[test]
fn mlp_classification_gradients() {
    for seed in 0..3 {
        check(InputKind::Dense, HeadKind::Classification, seed);
    }
}

#[test]
fn mlp_regression_gradients() {
    for seed in 0..3 {
        check(InputKind::Dense, HeadKind::Regression, seed);
    }
}

#[test]
fn frequency_gradient_vanishes_at_origin() {
    let dims = NetworkDims { input_dim: 2, n_freq: 3, hidden: 4, n_out: 5 };
    for head in [HeadKind::Classification, HeadKind::Regression] {
        let net = init_network(InputKind::Rff, head, dims, 1.0, 11).unwrap();
        let (inputs, targets) = batch(head, 12, true);
        let (_, grads) = net.backward(&inputs, &targets).unwrap();
        for (i, g) in grads.blocks[0].iter().enumerate() {
            assert_eq!(*g, 0.0);
            assert!(finite_difference(&net, &inputs, &targets, 0, i).abs() < 1e-9);
        }
    }
}

#[test]
fn saturated_probability_gives_bounded_gradient() {
    let dims = NetworkDims { input_dim: 2, n_freq: 3, hidden: 4, n_out: 5 };
    let mut net = init_network(InputKind::Rff, HeadKind::Classification, dims, 1.0, 5).unwrap();
    // force a huge logit on class 0 so p[4] underflows the clamp
    net.output.biases[0] = 100.0;
    let (inputs, _) = batch(HeadKind::Classification, 6, false);
    let targets = vec![Target::Beam(4); inputs.len()];
    let (loss, grads) = net.backward(&inputs, &targets).unwrap();
    assert!((loss - 1e12f64.log2()).abs() < 1e-9);
    assert!(grads.blocks.iter().flatten().all(|g| *g == 0.0));
    // the perfectly predicted class has (near) zero loss and tiny gradients
    let targets = vec![Target::Beam(0); inputs.len()];
    let (loss, grads) = net.backward(&inputs, &targets).unwrap();
    assert!((0.0..1e-30).contains(&loss));
    assert!(grads.blocks.iter().flatten().all(|g| g.abs() < 1e-30));
}
