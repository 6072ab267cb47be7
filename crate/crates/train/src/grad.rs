//! Softmax cross-entropy and its gradient by manual backpropagation,
//! including training-mode batch normalization.

use bngeom_core::batchnorm::BatchStats;
use bngeom_core::Network;
use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

use crate::error::{Result, TrainError};

/// How BN slots behave during a training step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    /// BN slots are bypassed.
    NoBn,
    /// BN normalizes with the statistics of the current batch and is
    /// differentiated through them.
    BnTrain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub gamma: Option<Array1<f64>>,
    pub beta: Option<Array1<f64>>,
}

/// Gradient with the same layout as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub hidden: Vec<LayerGrad>,
    pub output_weight: Array2<f64>,
    pub output_bias: Array1<f64>,
}

impl Grads {
    /// Flattened in [`param_vector`] order.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for g in &self.hidden {
            v.extend(g.weight.iter());
            v.extend(g.bias.iter());
            if let (Some(gg), Some(gb)) = (&g.gamma, &g.beta) {
                v.extend(gg.iter());
                v.extend(gb.iter());
            }
        }
        v.extend(self.output_weight.iter());
        v.extend(self.output_bias.iter());
        v
    }
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub loss: f64,
    pub grads: Grads,
    /// Batch statistics per hidden layer (`None` without BN or in `NoBn`).
    pub stats: Vec<Option<BatchStats<f64>>>,
    pub correct: usize,
}

struct LayerCache {
    input: Array2<f64>,
    xhat: Option<Array2<f64>>,
    inv_std: Option<Array1<f64>>,
    slope: Array2<f64>,
}

/// Mean softmax cross-entropy over the batch and its gradient.
pub fn loss_and_grad(net: &Network<f64>, x: ArrayView2<f64>, y: &[usize], mode: TrainMode) -> Result<StepOutput> {
    let m = x.nrows();
    if m == 0 || y.len() != m {
        return Err(TrainError::InvalidConfig(format!("batch has {m} rows and {} labels", y.len())));
    }
    let classes = net.output_dim();
    if y.iter().any(|&c| c >= classes) {
        return Err(TrainError::InvalidConfig("label out of range".into()));
    }
    let act = net.activation();
    let mf = m as f64;

    let mut h = x.to_owned();
    let mut caches = Vec::with_capacity(net.num_hidden());
    let mut stats_out = Vec::with_capacity(net.num_hidden());
    for block in net.blocks() {
        let mut z = block.linear.apply_batch(h.view());
        let (mut xhat, mut inv_std, mut stats) = (None, None, None);
        if let (Some(bn), TrainMode::BnTrain) = (&block.bn, mode) {
            let s = bngeom_core::batchnorm::batch_stats(z.view())?;
            let istd = s.var.mapv(|v| 1.0 / (v + bn.eps).sqrt());
            let xh = (&z - &s.mean) * &istd;
            z = &xh * &bn.gamma + &bn.beta;
            xhat = Some(xh);
            inv_std = Some(istd);
            stats = Some(s);
        }
        let slope = z.mapv(|t| act.slopes()[act.piece_of(t)]);
        let out = z.mapv(|t| act.eval(t));
        caches.push(LayerCache {
            input: std::mem::replace(&mut h, out),
            xhat,
            inv_std,
            slope,
        });
        stats_out.push(stats);
    }
    let logits = net.output().apply_batch(h.view());

    // stable log-softmax
    let mut loss = 0.0;
    let mut correct = 0;
    let mut dlogits = Array2::zeros((m, classes));
    for (i, row) in logits.rows().into_iter().enumerate() {
        let mx = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let se: f64 = row.iter().map(|&v| (v - mx).exp()).sum();
        let lse = mx + se.ln();
        loss += lse - row[y[i]];
        if bngeom_core::enumerate::argmax(row) == y[i] {
            correct += 1;
        }
        for c in 0..classes {
            let p = (row[c] - lse).exp();
            dlogits[[i, c]] = (p - if c == y[i] { 1.0 } else { 0.0 }) / mf;
        }
    }
    loss /= mf;

    let output_weight = dlogits.t().dot(&h);
    let output_bias = dlogits.sum_axis(Axis(0));
    let mut dh = dlogits.dot(&net.output().weight);
    let mut hidden = Vec::with_capacity(net.num_hidden());
    for (block, cache) in net.blocks().iter().zip(caches).rev() {
        let mut dz = dh * &cache.slope;
        let (mut gamma, mut beta) = (None, None);
        if let (Some(bn), Some(xhat), Some(istd)) = (&block.bn, &cache.xhat, &cache.inv_std) {
            gamma = Some((&dz * xhat).sum_axis(Axis(0)));
            beta = Some(dz.sum_axis(Axis(0)));
            let dxhat = &dz * &bn.gamma;
            let sum_d = dxhat.sum_axis(Axis(0));
            let sum_dx = (&dxhat * xhat).sum_axis(Axis(0));
            Zip::from(dz.rows_mut())
                .and(dxhat.rows())
                .and(xhat.rows())
                .for_each(|mut out, d, xh| {
                    for j in 0..out.len() {
                        out[j] = istd[j] / mf * (mf * d[j] - sum_d[j] - xh[j] * sum_dx[j]);
                    }
                });
        }
        let weight = dz.t().dot(&cache.input);
        let bias = dz.sum_axis(Axis(0));
        dh = dz.dot(&block.linear.weight);
        hidden.push(LayerGrad {
            weight,
            bias,
            gamma: gamma.or_else(|| block.bn.as_ref().map(|bn| Array1::zeros(bn.width()))),
            beta: beta.or_else(|| block.bn.as_ref().map(|bn| Array1::zeros(bn.width()))),
        });
    }
    hidden.reverse();
    Ok(StepOutput {
        loss,
        grads: Grads {
            hidden,
            output_weight,
            output_bias,
        },
        stats: stats_out,
        correct,
    })
}

/// All trainable parameters: per hidden layer `W` (row-major), `b`, then
/// `gamma`, `beta` when BN is present; finally the output `W`, `b`.
pub fn param_vector(net: &Network<f64>) -> Vec<f64> {
    let mut v = Vec::new();
    for b in net.blocks() {
        v.extend(b.linear.weight.iter());
        v.extend(b.linear.bias.iter());
        if let Some(bn) = &b.bn {
            v.extend(bn.gamma.iter());
            v.extend(bn.beta.iter());
        }
    }
    v.extend(net.output().weight.iter());
    v.extend(net.output().bias.iter());
    v
}

/// Writes a vector in [`param_vector`] order back into the network.
pub fn set_param_vector(net: &mut Network<f64>, v: &[f64]) {
    let mut it = v.iter().copied();
    let mut fill = |dst: &mut dyn Iterator<Item = &mut f64>| {
        for d in dst {
            *d = it.next().expect("parameter vector too short");
        }
    };
    for b in net.blocks_mut() {
        fill(&mut b.linear.weight.iter_mut());
        fill(&mut b.linear.bias.iter_mut());
        if let Some(bn) = &mut b.bn {
            fill(&mut bn.gamma.iter_mut());
            fill(&mut bn.beta.iter_mut());
        }
    }
    let out = net.output_mut();
    fill(&mut out.weight.iter_mut());
    fill(&mut out.bias.iter_mut());
}

/// Loss only, for finite differences and evaluation.
pub fn loss(net: &Network<f64>, x: ArrayView2<f64>, y: &[usize], mode: TrainMode) -> Result<f64> {
    Ok(loss_and_grad(net, x, y, mode)?.loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use bngeom_core::{CpaActivation, HiddenBlock, LinearLayer};
    use ndarray::array;

    #[test]
    fn uniform_logits_give_log_c() {
        let net = Network::new(
            vec![HiddenBlock {
                linear: LinearLayer::new(Array2::ones((2, 2)), Array1::zeros(2)).unwrap(),
                bn: None,
            }],
            LinearLayer::new(Array2::zeros((3, 2)), Array1::zeros(3)).unwrap(),
            CpaActivation::relu(),
        )
        .unwrap();
        let x = array![[1.0, 2.0], [-1.0, 0.5]];
        let l = loss(&net, x.view(), &[0, 2], TrainMode::NoBn).unwrap();
        assert!((l - 3f64.ln()).abs() < 1e-15);
    }
}
