//! Batch statistics, train/eval BN transforms, the affine form of BN, and
//! freezing a reference batch into deterministic per-layer statistics.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::cpa::{LinearLayer, Network};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.1;

/// Per-feature mean and biased (1/M) variance of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats<T> {
    pub mean: Array1<T>,
    pub var: Array1<T>,
    pub batch_size: usize,
}

/// Column statistics of `z` (one sample per row), single pass.
pub fn batch_stats<T: Scalar>(z: ArrayView2<T>) -> Result<BatchStats<T>> {
    let m = z.nrows();
    if m == 0 {
        return Err(Error::EmptyBatch);
    }
    let width = z.ncols();
    let mut mean = Array1::<T>::zeros(width);
    let mut m2 = Array1::<T>::zeros(width);
    // Welford update per column
    for (k, row) in z.axis_iter(Axis(0)).enumerate() {
        let n = T::lit((k + 1) as f64);
        for j in 0..width {
            let x = row[j];
            let d = x - mean[j];
            mean[j] = mean[j] + d / n;
            m2[j] = m2[j] + d * (x - mean[j]);
        }
    }
    let mf = T::lit(m as f64);
    let var = m2.mapv(|s| (s / mf).max(T::zero()));
    Ok(BatchStats {
        mean,
        var,
        batch_size: m,
    })
}

/// `gamma * (z - mean) / sqrt(var + eps) + beta`, with the zero-variance
/// coordinates mapped to `beta` exactly.
pub fn bn_train_transform<T: Scalar>(
    z: ArrayView1<T>,
    stats: &BatchStats<T>,
    gamma: ArrayView1<T>,
    beta: ArrayView1<T>,
    eps: T,
) -> Array1<T> {
    standardize(z, stats.mean.view(), stats.var.view(), gamma, beta, eps)
}

/// Same transform with running statistics.
pub fn bn_eval_transform<T: Scalar>(
    z: ArrayView1<T>,
    running_mean: ArrayView1<T>,
    running_var: ArrayView1<T>,
    gamma: ArrayView1<T>,
    beta: ArrayView1<T>,
    eps: T,
) -> Array1<T> {
    standardize(z, running_mean, running_var, gamma, beta, eps)
}

fn standardize<T: Scalar>(
    z: ArrayView1<T>,
    mean: ArrayView1<T>,
    var: ArrayView1<T>,
    gamma: ArrayView1<T>,
    beta: ArrayView1<T>,
    eps: T,
) -> Array1<T> {
    Array1::from_shape_fn(z.len(), |j| {
        if var[j] == T::zero() && z[j] == mean[j] {
            beta[j]
        } else {
            gamma[j] * (z[j] - mean[j]) / (var[j] + eps).sqrt() + beta[j]
        }
    })
}

/// BN written as a diagonal affine map acting on raw pre-activations.
#[derive(Debug, Clone, PartialEq)]
pub struct BnAffine<T> {
    /// `gamma / sqrt(var + eps)`.
    pub scale: Array1<T>,
    pub mean: Array1<T>,
    pub beta: Array1<T>,
}

pub fn bn_as_affine<T: Scalar>(
    gamma: ArrayView1<T>,
    beta: ArrayView1<T>,
    eps: T,
    mean: ArrayView1<T>,
    var: ArrayView1<T>,
) -> BnAffine<T> {
    let scale = Array1::from_shape_fn(gamma.len(), |j| gamma[j] / (var[j] + eps).sqrt());
    BnAffine {
        scale,
        mean: mean.to_owned(),
        beta: beta.to_owned(),
    }
}

impl<T: Scalar> BnAffine<T> {
    /// Shift `scale ⊙ (b_raw - mean) + beta` for a layer with raw bias `b_raw`.
    pub fn shift(&self, b_raw: ArrayView1<T>) -> Array1<T> {
        Array1::from_shape_fn(b_raw.len(), |j| {
            self.scale[j] * (b_raw[j] - self.mean[j]) + self.beta[j]
        })
    }

    /// Applies the map to raw pre-activations `z`.
    pub fn apply(&self, z: ArrayView1<T>) -> Array1<T> {
        Array1::from_shape_fn(z.len(), |j| {
            self.scale[j] * z[j] + (self.beta[j] - self.scale[j] * self.mean[j])
        })
    }

    /// `(diag(scale) W, shift(b))`.
    pub fn absorb(&self, layer: &LinearLayer<T>) -> LinearLayer<T> {
        let mut weight = layer.weight.clone();
        for (mut row, &s) in weight.axis_iter_mut(Axis(0)).zip(self.scale.iter()) {
            row.mapv_inplace(|w| w * s);
        }
        LinearLayer {
            weight,
            bias: self.shift(layer.bias.view()),
        }
    }
}

/// Learnable and running parameters of one BN layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormSlot<T> {
    pub gamma: Array1<T>,
    pub beta: Array1<T>,
    pub eps: T,
    pub momentum: T,
    pub running_mean: Array1<T>,
    pub running_var: Array1<T>,
}

impl<T: Scalar> BatchNormSlot<T> {
    /// Fresh slot: `gamma = 1`, `beta = 0`, running mean 0, running variance 1.
    pub fn new(width: usize) -> Self {
        Self {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            eps: T::lit(DEFAULT_EPS),
            momentum: T::lit(DEFAULT_MOMENTUM),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
        }
    }

    pub fn width(&self) -> usize {
        self.gamma.len()
    }

    pub fn check_width(&self, width: usize) -> Result<()> {
        let lens = [
            self.gamma.len(),
            self.beta.len(),
            self.running_mean.len(),
            self.running_var.len(),
        ];
        if lens.iter().any(|&n| n != width) {
            return Err(Error::DimensionMismatch(format!(
                "batch-norm slot vectors {lens:?} do not match width {width}"
            )));
        }
        if !(self.eps > T::zero()) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.momentum > T::zero() && self.momentum <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "momentum must lie in (0, 1], got {}",
                self.momentum
            )));
        }
        if self.running_var.iter().any(|&v| v < T::zero()) {
            return Err(Error::InvalidParameter("negative running variance".into()));
        }
        Ok(())
    }

    /// Geometric operations divide by gamma.
    pub fn check_gamma(&self) -> Result<()> {
        match self.gamma.iter().position(|&g| g == T::zero()) {
            Some(j) => Err(Error::ZeroGamma(j)),
            None => Ok(()),
        }
    }

    pub fn train_transform(&self, z: ArrayView1<T>, stats: &BatchStats<T>) -> Array1<T> {
        bn_train_transform(z, stats, self.gamma.view(), self.beta.view(), self.eps)
    }

    pub fn eval_transform(&self, z: ArrayView1<T>) -> Array1<T> {
        bn_eval_transform(
            z,
            self.running_mean.view(),
            self.running_var.view(),
            self.gamma.view(),
            self.beta.view(),
            self.eps,
        )
    }

    pub fn running_affine(&self) -> BnAffine<T> {
        bn_as_affine(
            self.gamma.view(),
            self.beta.view(),
            self.eps,
            self.running_mean.view(),
            self.running_var.view(),
        )
    }

    pub fn batch_affine(&self, stats: &BatchStats<T>) -> BnAffine<T> {
        bn_as_affine(
            self.gamma.view(),
            self.beta.view(),
            self.eps,
            stats.mean.view(),
            stats.var.view(),
        )
    }

    /// Exponential moving average `r <- (1 - momentum) r + momentum * batch`.
    pub fn update_running_stats(&mut self, stats: &BatchStats<T>) {
        let m = self.momentum;
        let keep = T::one() - m;
        self.running_mean
            .zip_mut_with(&stats.mean, |r, &b| *r = keep * *r + m * b);
        self.running_var
            .zip_mut_with(&stats.var, |r, &b| *r = keep * *r + m * b);
    }
}

/// Statistics captured at one hidden block while propagating the reference batch.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenLayer<T> {
    /// Centroid of the block's input representations over the batch.
    pub input_centroid: Array1<T>,
    /// Pre-activation statistics, present when the block has a BN slot.
    pub stats: Option<BatchStats<T>>,
}

/// Reference batch frozen into per-layer statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenBatch<T> {
    pub layers: Vec<FrozenLayer<T>>,
    pub batch_id: String,
    pub batch_size: usize,
}

impl<T: Scalar> FrozenBatch<T> {
    pub fn stats(&self, layer: usize) -> Option<&BatchStats<T>> {
        self.layers.get(layer).and_then(|l| l.stats.as_ref())
    }

    pub fn input_centroid(&self, layer: usize) -> Option<&Array1<T>> {
        self.layers.get(layer).map(|l| &l.input_centroid)
    }
}

/// Content digest of a batch, used as its identifier.
pub fn batch_content_id<T: Scalar>(batch: ArrayView2<T>) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update((batch.nrows() as u64).to_le_bytes());
    hasher.update((batch.ncols() as u64).to_le_bytes());
    for &v in batch.iter() {
        hasher.update(v.as_f64().to_bits().to_le_bytes());
    }
    crate::hex_prefix(&hasher.finalize(), 8)
}

fn sorted_rows<T: Scalar>(batch: ArrayView2<T>) -> Array2<T> {
    let mut rows: Vec<ArrayView1<T>> = batch.axis_iter(Axis(0)).collect();
    rows.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.as_f64().total_cmp(&y.as_f64()))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out = Array2::zeros((batch.nrows(), batch.ncols()));
    for (mut dst, src) in out.axis_iter_mut(Axis(0)).zip(rows) {
        dst.assign(&src);
    }
    out
}

/// Propagates `batch` through `net` in training mode and records the
/// statistics each BN slot sees. Rows are put in a canonical order first,
/// so the result does not depend on the order of the batch.
pub fn freeze_batch<T: Scalar>(
    net: &Network<T>,
    batch: ArrayView2<T>,
    batch_id: impl Into<String>,
) -> Result<FrozenBatch<T>> {
    if batch.nrows() == 0 {
        return Err(Error::EmptyBatch);
    }
    if batch.ncols() != net.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "batch has {} columns, network expects {}",
            batch.ncols(),
            net.input_dim()
        )));
    }
    let mut h = sorted_rows(batch);
    let m = T::lit(h.nrows() as f64);
    let act = net.activation();
    let mut layers = Vec::with_capacity(net.num_hidden());
    for block in net.blocks() {
        let input_centroid = h.sum_axis(Axis(0)).mapv(|s| s / m);
        let mut z = block.linear.apply_batch(h.view());
        let stats = match &block.bn {
            Some(bn) => {
                let stats = batch_stats(z.view())?;
                for mut row in z.axis_iter_mut(Axis(0)) {
                    let zn = bn.train_transform(row.view(), &stats);
                    row.assign(&zn);
                }
                Some(stats)
            }
            None => None,
        };
        h = z.mapv(|t| act.eval(t));
        layers.push(FrozenLayer {
            input_centroid,
            stats,
        });
    }
    Ok(FrozenBatch {
        layers,
        batch_id: batch_id.into(),
        batch_size: batch.nrows(),
    })
}
