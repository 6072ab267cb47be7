//! The matched BN / non-BN training loop.

use bngeom_core::io::{Checkpoint, CheckpointMeta};
use bngeom_core::{CpaActivation, Mode, Network};
use ndarray::Axis;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Result, TrainError};
use crate::grad::{loss_and_grad, param_vector, set_param_vector, TrainMode};
use crate::init::init_network;
use crate::optim::Adam;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub widths: Vec<usize>,
    pub use_bn: bool,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Epochs after which a checkpoint is kept (0 is the initialization).
    pub checkpoint_epochs: Vec<usize>,
    pub val_frac: f64,
    pub activation: CpaActivation<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            widths: vec![64],
            use_bn: false,
            epochs: 100,
            lr: 1e-4,
            batch_size: 64,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            checkpoint_epochs: vec![100],
            val_frac: 0.25,
            activation: CpaActivation::relu(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean training-batch loss over the epoch (NaN for epoch 0).
    pub loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub net: Network<f64>,
    pub checkpoints: Vec<Checkpoint>,
    pub metrics: Vec<EpochMetrics>,
    pub train_set: Dataset,
    pub val_set: Dataset,
}

/// Classification accuracy with BN in inference mode.
pub fn accuracy(net: &Network<f64>, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(f64::NAN);
    }
    let mode = if net.has_bn() { Mode::BnEval } else { Mode::NoBn };
    let logits = net.forward_batch(data.x.view(), mode)?;
    let hits = logits
        .axis_iter(Axis(0))
        .zip(&data.y)
        .filter(|(row, &y)| bngeom_core::enumerate::argmax(row.view()) == y)
        .count();
    Ok(hits as f64 / data.len() as f64)
}

fn validate(config: &TrainConfig, n_train: usize) -> Result<()> {
    if config.widths.is_empty() || config.widths.contains(&0) {
        return Err(TrainError::InvalidConfig("widths must be nonempty and positive".into()));
    }
    if config.batch_size == 0 || config.batch_size > n_train {
        return Err(TrainError::InvalidConfig(format!(
            "batch size {} not in 1..={n_train}",
            config.batch_size
        )));
    }
    if !(config.lr >= 0.0) || !(config.val_frac >= 0.0 && config.val_frac < 1.0) {
        return Err(TrainError::InvalidConfig("learning rate / validation fraction out of range".into()));
    }
    Ok(())
}

/// Trains a freshly initialized network on `data`.
///
/// The shuffling stream depends only on the seed, so BN and non-BN runs
/// with one seed see the same mini-batches. The last incomplete batch of
/// each epoch is dropped.
pub fn train(data: &Dataset, config: &TrainConfig) -> Result<TrainResult> {
    let (train_set, val_set) = data.split(config.val_frac);
    validate(config, train_set.len())?;
    let mut net = init_network(
        data.x.ncols(),
        &config.widths,
        data.classes,
        config.use_bn,
        config.activation.clone(),
        config.seed,
    )?;
    let mode = if config.use_bn { TrainMode::BnTrain } else { TrainMode::NoBn };
    let mut params = param_vector(&net);
    let mut adam = Adam::new(config.lr, config.beta1, config.beta2, config.adam_eps, params.len());
    let mut shuffle = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9E37_79B9));

    let meta = |epoch: usize| CheckpointMeta {
        seed: config.seed,
        epoch,
        dataset: data.name.clone(),
        widths: config.widths.clone(),
        use_bn: config.use_bn,
        manifest: None,
    };
    let mut checkpoints = Vec::new();
    let mut metrics = vec![EpochMetrics {
        epoch: 0,
        loss: f64::NAN,
        train_acc: accuracy(&net, &train_set)?,
        val_acc: accuracy(&net, &val_set)?,
    }];
    if config.checkpoint_epochs.contains(&0) {
        checkpoints.push(Checkpoint {
            meta: meta(0),
            net: net.clone(),
        });
    }

    let n = train_set.len();
    let bs = config.batch_size;
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle);
        let mut loss_sum = 0.0;
        let batches = n / bs;
        for b in 0..batches {
            let idx = &order[b * bs..(b + 1) * bs];
            let x = train_set.x.select(Axis(0), idx);
            let y: Vec<usize> = idx.iter().map(|&i| train_set.y[i]).collect();
            let step = loss_and_grad(&net, x.view(), &y, mode)?;
            if !step.loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: b,
                    loss: step.loss,
                });
            }
            loss_sum += step.loss;
            for (block, stats) in net.blocks_mut().iter_mut().zip(&step.stats) {
                if let (Some(bn), Some(s)) = (&mut block.bn, stats) {
                    bn.update_running_stats(s);
                }
            }
            adam.step(&mut params, &step.grads.flat());
            set_param_vector(&mut net, &params);
        }
        metrics.push(EpochMetrics {
            epoch,
            loss: loss_sum / batches as f64,
            train_acc: accuracy(&net, &train_set)?,
            val_acc: accuracy(&net, &val_set)?,
        });
        if config.checkpoint_epochs.contains(&epoch) {
            checkpoints.push(Checkpoint {
                meta: meta(epoch),
                net: net.clone(),
            });
        }
    }
    Ok(TrainResult {
        net,
        checkpoints,
        metrics,
        train_set,
        val_set,
    })
}
