//! Toy datasets, initialization, manual backpropagation (including
//! training-mode batch normalization), Adam, and the training loop used to
//! produce matched BN / non-BN checkpoints.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod grad;
pub mod init;
pub mod optim;
pub mod train;

pub use dataset::{gen_gaussian_quantiles, gen_random_uniform, gen_two_moons, Dataset, DatasetKind};
pub use error::{Result, TrainError};
pub use grad::{loss_and_grad, param_vector, set_param_vector, Grads, TrainMode};
pub use init::{init_network, kaiming_bound};
pub use optim::Adam;
pub use train::{accuracy, train, EpochMetrics, TrainConfig, TrainResult};
