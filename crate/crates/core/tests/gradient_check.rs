//! Analytic gradients against central finite differences on a 3-4-2-1 net.

use proptest::prelude::*;
use soc_dfn::network::{self, Activation, LayerSpec, LossKind, Mode, Network, RegConfig};
use soc_dfn::rng::derive_seed;
use soc_dfn::{Matrix, Vector};

const STEP: f64 = 1e-7;
const TOL: f64 = 1e-4;
// Central differences at STEP carry roughly 1e-16 * |J| / STEP of rounding
// noise, so below this magnitude the comparison is absolute (TOL * FLOOR).
const FLOOR: f64 = 1e-4;
// Sampled points closer than this to a kink are rejected.
const MARGIN: f64 = 1e-4;

fn specs(dropout: f64) -> Vec<LayerSpec> {
    vec![
        LayerSpec::new(3, 4, Activation::Relu, dropout),
        LayerSpec::new(4, 2, Activation::Relu, dropout),
        LayerSpec::new(2, 1, Activation::Linear, 0.0),
    ]
}

/// He-initialized weights with random biases, so pre-activations are not
/// exactly zero on rows whose inputs are all zero.
fn net_at(dropout: f64, seed: u64) -> Network {
    let mut net = Network::init(&specs(dropout), seed).unwrap();
    for (l, b) in net.biases_mut().iter_mut().enumerate() {
        for (j, v) in b.as_mut_slice().iter_mut().enumerate() {
            *v = uniform(seed, 1000 + 10 * l as u64 + j as u64, -0.5, 0.5);
        }
    }
    net
}

fn uniform(seed: u64, i: u64, lo: f64, hi: f64) -> f64 {
    let u = (derive_seed(seed, i) >> 11) as f64 / (1u64 << 53) as f64;
    lo + (hi - lo) * u
}

fn batch(seed: u64) -> (Matrix, Vector) {
    let x = Matrix::new(8, 3, (0..24).map(|i| uniform(seed, i, -2.0, 2.0)).collect()).unwrap();
    let y = (0..8).map(|i| uniform(seed, 100 + i, -1.0, 1.0)).collect();
    (x, y)
}

fn objective(net: &Network, x: &Matrix, y: &Vector, reg: &RegConfig, loss: LossKind, mode: Mode, seed: u64) -> f64 {
    let (pred, _) = network::forward(net, x, mode, seed).unwrap();
    loss.value(&pred, y).unwrap() + network::penalty(net, reg)
}

fn perturbed(net: &Network, slice: usize, idx: usize, delta: f64) -> Network {
    let mut n = net.clone();
    n.param_slices_mut().nth(slice).unwrap()[idx] += delta;
    n
}

/// Distance from the nearest kink of the objective: hidden pre-activations
/// (ReLU), weights when L1 is on, and residuals under MAE. Finite differences
/// are only meaningful when this is much larger than the step.
fn kink_margin(net: &Network, x: &Matrix, y: &Vector, reg: &RegConfig, loss: LossKind, dropout_seed: u64) -> f64 {
    let (pred, cache) = network::forward(net, x, Mode::Train, dropout_seed).unwrap();
    let mut margin = f64::INFINITY;
    for l in 0..net.specs().len() - 1 {
        let input = if l == 0 { x } else { cache.activation(l - 1) };
        let pre = input.matmul(&net.weights()[l]).unwrap().add_row_broadcast(&net.biases()[l]).unwrap();
        margin = pre.as_slice().iter().fold(margin, |m, z| m.min(z.abs()));
    }
    if reg.l1 > 0.0 {
        margin = net.weights().iter().flat_map(|w| w.as_slice()).fold(margin, |m, w| m.min(w.abs()));
    }
    if loss == LossKind::Mae {
        margin = pred.iter().zip(y.iter()).fold(margin, |m, (p, t)| m.min((p - t).abs()));
    }
    margin
}

/// Largest relative error between analytic and central-difference gradients
/// over every parameter.
fn worst_error(net: &Network, x: &Matrix, y: &Vector, reg: &RegConfig, loss: LossKind, dropout_seed: u64) -> f64 {
    let (_, cache) = network::forward(net, x, Mode::Train, dropout_seed).unwrap();
    let (grads, obj) = network::backward_with_loss(net, &cache, y, reg, loss).unwrap();
    let f = |n: &Network| objective(n, x, y, reg, loss, Mode::Train, dropout_seed);
    assert!((obj - f(net)).abs() <= 1e-12 * obj.abs().max(1.0));

    let mut worst: f64 = 0.0;
    for (s, g) in grads.slices().enumerate() {
        for (i, &analytic) in g.iter().enumerate() {
            let numeric = (f(&perturbed(net, s, i, STEP)) - f(&perturbed(net, s, i, -STEP))) / (2.0 * STEP);
            let scale = analytic.abs().max(numeric.abs()).max(FLOOR);
            worst = worst.max((analytic - numeric).abs() / scale);
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn plain_mse(seed in any::<u64>()) {
        let net = net_at(0.0, seed);
        let (x, y) = batch(seed ^ 1);
        prop_assume!(kink_margin(&net, &x, &y, &RegConfig::NONE, LossKind::Mse, 0) > MARGIN);
        let err = worst_error(&net, &x, &y, &RegConfig::NONE, LossKind::Mse, 0);
        prop_assert!(err < TOL, "relative error {err}");
    }

    #[test]
    fn with_l1_and_l2(seed in any::<u64>(), l1 in 0.0..0.5f64, l2 in 0.0..0.5f64) {
        let net = net_at(0.0, seed);
        let (x, y) = batch(seed ^ 2);
        let reg = RegConfig { l1, l2 };
        prop_assume!(kink_margin(&net, &x, &y, &reg, LossKind::Mse, 0) > MARGIN);
        let err = worst_error(&net, &x, &y, &reg, LossKind::Mse, 0);
        prop_assert!(err < TOL, "relative error {err}");
    }

    #[test]
    fn with_replayed_dropout_mask(seed in any::<u64>(), rate in 0.1..0.7f64) {
        let net = net_at(rate, seed);
        let (x, y) = batch(seed ^ 3);
        let reg = RegConfig { l1: 0.01, l2: 0.02 };
        prop_assume!(kink_margin(&net, &x, &y, &reg, LossKind::Mse, seed) > MARGIN);
        let err = worst_error(&net, &x, &y, &reg, LossKind::Mse, seed);
        prop_assert!(err < TOL, "relative error {err}");
    }

    #[test]
    fn mae_loss(seed in any::<u64>()) {
        let net = net_at(0.0, seed);
        let (x, y) = batch(seed ^ 4);
        prop_assume!(kink_margin(&net, &x, &y, &RegConfig::NONE, LossKind::Mae, 0) > MARGIN);
        let err = worst_error(&net, &x, &y, &RegConfig::NONE, LossKind::Mae, 0);
        prop_assert!(err < TOL, "relative error {err}");
    }
}

#[test]
fn dropout_mask_replays_under_perturbation() {
    let net = Network::init(&specs(0.5), 9).unwrap();
    let (x, _) = batch(9);
    let (_, a) = network::forward(&net, &x, Mode::Train, 77).unwrap();
    let (_, b) = network::forward(&perturbed(&net, 0, 3, 0.25), &x, Mode::Train, 77).unwrap();
    for l in 0..2 {
        assert_eq!(a.mask(l).unwrap(), b.mask(l).unwrap());
    }
    let (_, c) = network::forward(&net, &x, Mode::Train, 78).unwrap();
    assert!((0..2).any(|l| a.mask(l) != c.mask(l)));
}

#[test]
fn biases_carry_no_penalty_gradient() {
    let net = Network::init(&specs(0.0), 4).unwrap();
    let (x, y) = batch(4);
    let (_, cache) = network::forward(&net, &x, Mode::Train, 0).unwrap();
    let (plain, _) = network::backward_with_loss(&net, &cache, &y, &RegConfig::NONE, LossKind::Mse).unwrap();
    let reg = RegConfig { l1: 0.3, l2: 0.7 };
    let (pen, _) = network::backward_with_loss(&net, &cache, &y, &reg, LossKind::Mse).unwrap();
    assert_eq!(plain.biases, pen.biases);
    assert_ne!(plain.weights, pen.weights);
}
