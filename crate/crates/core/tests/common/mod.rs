#![allow(dead_code)]

use bngeom_core::{BatchNormSlot, CpaActivation, HiddenBlock, LinearLayer, Network};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random 2-input network with uniform weights and biases in `[-1, 1]`.
pub fn random_net(widths: &[usize], classes: usize, bn: bool, act: CpaActivation<f64>, seed: u64) -> Network<f64> {
    let mut r = rng(seed);
    let mut blocks = Vec::new();
    let mut prev = 2;
    for &w in widths {
        let weight = Array2::from_shape_fn((w, prev), |_| r.random_range(-1.0..1.0));
        let bias = Array1::from_shape_fn(w, |_| r.random_range(-1.0..1.0));
        let slot = bn.then(|| {
            let mut s = BatchNormSlot::new(w);
            s.gamma.mapv_inplace(|_| r.random_range(0.5..1.5));
            s.beta.mapv_inplace(|_| r.random_range(-0.5..0.5));
            s.running_mean.mapv_inplace(|_| r.random_range(-0.5..0.5));
            s.running_var.mapv_inplace(|_| r.random_range(0.5..2.0));
            s
        });
        blocks.push(HiddenBlock {
            linear: LinearLayer::new(weight, bias).unwrap(),
            bn: slot,
        });
        prev = w;
    }
    let ow = Array2::from_shape_fn((classes, prev), |_| r.random_range(-1.0..1.0));
    let ob = Array1::from_shape_fn(classes, |_| r.random_range(-1.0..1.0));
    Network::new(blocks, LinearLayer::new(ow, ob).unwrap(), act).unwrap()
}

pub fn random_points(n: usize, lo: f64, hi: f64, seed: u64) -> Array2<f64> {
    let mut r = rng(seed);
    Array2::from_shape_fn((n, 2), |_| r.random_range(lo..hi))
}
