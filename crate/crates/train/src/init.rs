//! Network construction and Kaiming-uniform initialization.

use bngeom_core::{BatchNormSlot, CpaActivation, HiddenBlock, LinearLayer, Network};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

/// Weight bound `gain * sqrt(3 / fan_in)` with the ReLU gain `sqrt(2)`,
/// i.e. `sqrt(6 / fan_in)`.
pub fn kaiming_bound(fan_in: usize) -> f64 {
    (6.0 / fan_in as f64).sqrt()
}

fn init_linear<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize) -> Result<LinearLayer<f64>> {
    let wb = kaiming_bound(fan_in);
    let bb = 1.0 / (fan_in as f64).sqrt();
    let w = Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-wb..wb));
    let b = Array1::from_shape_simple_fn(fan_out, || rng.random_range(-bb..bb));
    Ok(LinearLayer::new(w, b)?)
}

/// Fresh network with Kaiming-uniform weights, uniform biases in
/// `+-1/sqrt(fan_in)`, and BN slots at `gamma = 1, beta = 0`.
///
/// Draws depend only on the seed and the layer shapes, so the BN and
/// non-BN networks built from one seed share their linear parameters.
pub fn init_network(
    input_dim: usize,
    widths: &[usize],
    classes: usize,
    use_bn: bool,
    activation: CpaActivation<f64>,
    seed: u64,
) -> Result<Network<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocks = Vec::with_capacity(widths.len());
    let mut fan_in = input_dim;
    for &w in widths {
        blocks.push(HiddenBlock {
            linear: init_linear(&mut rng, fan_in, w)?,
            bn: use_bn.then(|| BatchNormSlot::new(w)),
        });
        fan_in = w;
    }
    let output = init_linear(&mut rng, fan_in, classes)?;
    Ok(Network::new(blocks, output, activation)?)
}
