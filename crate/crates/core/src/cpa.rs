//! Continuous piecewise-affine (CPA) networks: activations, layer stacks,
//! forward evaluation, activation patterns and per-region affine maps.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::batchnorm::{BatchNormSlot, FrozenBatch};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Elementwise continuous piecewise-affine activation.
///
/// With breakpoints `tau[0] < ... < tau[K-2]`, piece `k` (0-based) covers
/// `(tau[k-1], tau[k])` and evaluates to `slopes[k] * t + intercepts[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CpaActivation<T> {
    breakpoints: Vec<T>,
    slopes: Vec<T>,
    intercepts: Vec<T>,
}

/// Returned by [`CpaActivation::piece_index`] when the argument sits on a breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OnBreakpoint {
    pub breakpoint: usize,
}

impl<T: Scalar> CpaActivation<T> {
    pub fn new(breakpoints: Vec<T>, slopes: Vec<T>, intercepts: Vec<T>) -> Result<Self> {
        if slopes.len() < 2 {
            return Err(Error::InvalidActivation(format!(
                "need at least two pieces, got {}",
                slopes.len()
            )));
        }
        if slopes.len() != intercepts.len() || breakpoints.len() + 1 != slopes.len() {
            return Err(Error::InvalidActivation(format!(
                "{} breakpoints, {} slopes, {} intercepts",
                breakpoints.len(),
                slopes.len(),
                intercepts.len()
            )));
        }
        if breakpoints
            .iter()
            .chain(slopes.iter())
            .chain(intercepts.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidActivation("non-finite coefficient".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidActivation(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        let tol = T::lit(1e-12);
        for (q, &tau) in breakpoints.iter().enumerate() {
            let left = slopes[q] * tau + intercepts[q];
            let right = slopes[q + 1] * tau + intercepts[q + 1];
            if (left - right).abs() > tol {
                return Err(Error::InvalidActivation(format!(
                    "discontinuous at breakpoint {q}: {left} vs {right}"
                )));
            }
        }
        Ok(Self {
            breakpoints,
            slopes,
            intercepts,
        })
    }

    pub fn relu() -> Self {
        Self::new(vec![T::zero()], vec![T::zero(), T::one()], vec![T::zero(); 2])
            .expect("relu is valid")
    }

    pub fn leaky_relu(alpha: T) -> Self {
        Self::new(vec![T::zero()], vec![alpha, T::one()], vec![T::zero(); 2])
            .expect("leaky relu is valid")
    }

    /// Clamp to `[-1, 1]`: three pieces, two breakpoints.
    pub fn hard_tanh() -> Self {
        let one = T::one();
        Self::new(
            vec![-one, one],
            vec![T::zero(), one, T::zero()],
            vec![-one, T::zero(), one],
        )
        .expect("hard tanh is valid")
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[T] {
        &self.slopes
    }

    pub fn intercepts(&self) -> &[T] {
        &self.intercepts
    }

    /// Number of pieces `K`.
    pub fn num_pieces(&self) -> usize {
        self.slopes.len()
    }

    /// Number of breakpoints `Q = K - 1`.
    pub fn num_breakpoints(&self) -> usize {
        self.breakpoints.len()
    }

    /// Piece containing `t`, without tolerance. Points exactly on a
    /// breakpoint are assigned to the piece on their right; the value is the
    /// same either way by continuity.
    pub fn piece_of(&self, t: T) -> usize {
        self.breakpoints.iter().take_while(|&&tau| t >= tau).count()
    }

    pub fn piece_index(&self, t: T, tol: T) -> std::result::Result<usize, OnBreakpoint> {
        if let Some(q) = self
            .breakpoints
            .iter()
            .position(|&tau| (t - tau).abs() <= tol)
        {
            return Err(OnBreakpoint { breakpoint: q });
        }
        Ok(self.piece_of(t))
    }

    pub fn eval(&self, t: T) -> T {
        let k = self.piece_of(t);
        self.slopes[k] * t + self.intercepts[k]
    }

    pub fn cast<U: Scalar>(&self) -> CpaActivation<U> {
        let conv = |v: &Vec<T>| v.iter().map(|x| U::lit(x.as_f64())).collect();
        CpaActivation {
            breakpoints: conv(&self.breakpoints),
            slopes: conv(&self.slopes),
            intercepts: conv(&self.intercepts),
        }
    }
}

/// Affine layer `u -> W u + b`, with `W` of shape `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> LinearLayer<T> {
    pub fn new(weight: Array2<T>, bias: Array1<T>) -> Result<Self> {
        if weight.nrows() != bias.len() {
            return Err(Error::DimensionMismatch(format!(
                "weight has {} rows but bias has {} entries",
                weight.nrows(),
                bias.len()
            )));
        }
        Ok(Self { weight, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn apply(&self, u: ArrayView1<T>) -> Array1<T> {
        self.weight.dot(&u) + &self.bias
    }

    /// Row-wise application to a batch with one sample per row.
    pub fn apply_batch(&self, u: ArrayView2<T>) -> Array2<T> {
        u.dot(&self.weight.t()) + &self.bias
    }
}

/// One hidden block: linear map, optional batch normalization, then the
/// network's shared activation.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenBlock<T> {
    pub linear: LinearLayer<T>,
    pub bn: Option<BatchNormSlot<T>>,
}

/// How batch normalization slots are evaluated.
#[derive(Debug, Clone, Copy)]
pub enum Mode<'a, T> {
    /// BN slots are bypassed.
    NoBn,
    /// BN uses running statistics.
    BnEval,
    /// BN uses statistics captured from a fixed reference batch.
    BnFrozen(&'a FrozenBatch<T>),
}

/// Feed-forward CPA network with a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    blocks: Vec<HiddenBlock<T>>,
    output: LinearLayer<T>,
    activation: CpaActivation<T>,
}

/// Per-layer intermediate values of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace<T> {
    /// Raw pre-activations `W h + b`.
    pub pre: Vec<Array1<T>>,
    /// Pre-activations after the BN slot (equal to `pre` without BN).
    pub normalized: Vec<Array1<T>>,
    /// Post-activations `sigma(normalized)`.
    pub post: Vec<Array1<T>>,
}

impl<T: Scalar> Network<T> {
    pub fn new(
        blocks: Vec<HiddenBlock<T>>,
        output: LinearLayer<T>,
        activation: CpaActivation<T>,
    ) -> Result<Self> {
        let mut prev: Option<usize> = None;
        for (l, block) in blocks.iter().enumerate() {
            if let Some(p) = prev {
                if block.linear.in_dim() != p {
                    return Err(Error::DimensionMismatch(format!(
                        "block {l} expects input {} but previous width is {p}",
                        block.linear.in_dim()
                    )));
                }
            }
            if let Some(bn) = &block.bn {
                bn.check_width(block.linear.out_dim())?;
            }
            prev = Some(block.linear.out_dim());
        }
        if let Some(p) = prev {
            if output.in_dim() != p {
                return Err(Error::DimensionMismatch(format!(
                    "output layer expects {} inputs but last width is {p}",
                    output.in_dim()
                )));
            }
        }
        Ok(Self {
            blocks,
            output,
            activation,
        })
    }

    pub fn blocks(&self) -> &[HiddenBlock<T>] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [HiddenBlock<T>] {
        &mut self.blocks
    }

    pub fn output(&self) -> &LinearLayer<T> {
        &self.output
    }

    pub fn output_mut(&mut self) -> &mut LinearLayer<T> {
        &mut self.output
    }

    pub fn activation(&self) -> &CpaActivation<T> {
        &self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.blocks
            .first()
            .map(|b| b.linear.in_dim())
            .unwrap_or_else(|| self.output.in_dim())
    }

    pub fn output_dim(&self) -> usize {
        self.output.out_dim()
    }

    pub fn num_hidden(&self) -> usize {
        self.blocks.len()
    }

    /// Hidden widths `D_1..D_L`.
    pub fn widths(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.linear.out_dim()).collect()
    }

    pub fn has_bn(&self) -> bool {
        self.blocks.iter().any(|b| b.bn.is_some())
    }

    /// Converts every parameter to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        let c1 = |a: &Array1<T>| a.mapv(|x| U::lit(x.as_f64()));
        let c2 = |a: &Array2<T>| a.mapv(|x| U::lit(x.as_f64()));
        let lin = |l: &LinearLayer<T>| LinearLayer {
            weight: c2(&l.weight),
            bias: c1(&l.bias),
        };
        Network {
            blocks: self
                .blocks
                .iter()
                .map(|b| HiddenBlock {
                    linear: lin(&b.linear),
                    bn: b.bn.as_ref().map(|s| BatchNormSlot {
                        gamma: c1(&s.gamma),
                        beta: c1(&s.beta),
                        eps: U::lit(s.eps.as_f64()),
                        momentum: U::lit(s.momentum.as_f64()),
                        running_mean: c1(&s.running_mean),
                        running_var: c1(&s.running_var),
                    }),
                })
                .collect(),
            output: lin(&self.output),
            activation: self.activation.cast(),
        }
    }

    /// Maps raw pre-activations of block `l` through its BN slot under `mode`.
    fn normalize(&self, l: usize, z: &Array1<T>, mode: Mode<'_, T>) -> Result<Array1<T>> {
        let Some(bn) = &self.blocks[l].bn else {
            return Ok(z.clone());
        };
        match mode {
            Mode::NoBn => Ok(z.clone()),
            Mode::BnEval => Ok(bn.eval_transform(z.view())),
            Mode::BnFrozen(frozen) => {
                let stats = frozen.stats(l).ok_or(Error::MissingFrozenStats)?;
                Ok(bn.train_transform(z.view(), stats))
            }
        }
    }

    fn check_input(&self, dim: usize) -> Result<()> {
        if dim != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "input has dimension {dim}, network expects {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView1<T>, mode: Mode<'_, T>) -> Result<(Array1<T>, ForwardTrace<T>)> {
        self.check_input(x.len())?;
        let mut trace = ForwardTrace {
            pre: Vec::with_capacity(self.blocks.len()),
            normalized: Vec::with_capacity(self.blocks.len()),
            post: Vec::with_capacity(self.blocks.len()),
        };
        let mut h = x.to_owned();
        for (l, block) in self.blocks.iter().enumerate() {
            let z = block.linear.apply(h.view());
            let zn = self.normalize(l, &z, mode)?;
            h = zn.mapv(|t| self.activation.eval(t));
            trace.pre.push(z);
            trace.normalized.push(zn);
            trace.post.push(h.clone());
        }
        Ok((self.output.apply(h.view()), trace))
    }

    /// Network output only.
    pub fn eval(&self, x: ArrayView1<T>, mode: Mode<'_, T>) -> Result<Array1<T>> {
        Ok(self.forward(x, mode)?.0)
    }

    /// Post-activations `h^(depth)` for every row of `x`; `depth = 0` returns `x`.
    pub fn representations(&self, x: ArrayView2<T>, mode: Mode<'_, T>, depth: usize) -> Result<Array2<T>> {
        self.check_input(x.ncols())?;
        let mut h = x.to_owned();
        for l in 0..depth.min(self.blocks.len()) {
            let eff = self.effective_layer(l, mode)?;
            let z = eff.apply_batch(h.view());
            h = z.mapv(|t| self.activation.eval(t));
        }
        Ok(h)
    }

    /// Outputs for every row of `x`.
    pub fn forward_batch(&self, x: ArrayView2<T>, mode: Mode<'_, T>) -> Result<Array2<T>> {
        let h = self.representations(x, mode, self.blocks.len())?;
        Ok(self.output.apply_batch(h.view()))
    }

    /// Block `l` with its BN slot absorbed into the linear map under `mode`.
    pub fn effective_layer(&self, l: usize, mode: Mode<'_, T>) -> Result<LinearLayer<T>> {
        let block = &self.blocks[l];
        let Some(bn) = &block.bn else {
            return Ok(block.linear.clone());
        };
        let affine = match mode {
            Mode::NoBn => return Ok(block.linear.clone()),
            Mode::BnEval => bn.running_affine(),
            Mode::BnFrozen(frozen) => {
                let stats = frozen.stats(l).ok_or(Error::MissingFrozenStats)?;
                bn.batch_affine(stats)
            }
        };
        Ok(affine.absorb(&block.linear))
    }

    /// All hidden layers with BN absorbed.
    pub fn effective_layers(&self, mode: Mode<'_, T>) -> Result<Vec<LinearLayer<T>>> {
        (0..self.blocks.len())
            .map(|l| self.effective_layer(l, mode))
            .collect()
    }

    /// Piece index of every hidden neuron at `x`, with breakpoint tolerance `tol`.
    pub fn activation_pattern_tol(
        &self,
        x: ArrayView1<T>,
        mode: Mode<'_, T>,
        tol: T,
    ) -> Result<ActivationPattern> {
        let (_, trace) = self.forward(x, mode)?;
        let mut layers = Vec::with_capacity(trace.normalized.len());
        for (l, zn) in trace.normalized.iter().enumerate() {
            let mut pieces = Vec::with_capacity(zn.len());
            for (j, &t) in zn.iter().enumerate() {
                let k = self.activation.piece_index(t, tol).map_err(|hit| {
                    Error::BreakpointHit {
                        layer: l,
                        neuron: j,
                        breakpoint: hit.breakpoint,
                        value: t.as_f64(),
                    }
                })?;
                pieces.push(k as u16);
            }
            layers.push(pieces);
        }
        Ok(ActivationPattern { layers })
    }

    pub fn activation_pattern(&self, x: ArrayView1<T>, mode: Mode<'_, T>) -> Result<ActivationPattern> {
        self.activation_pattern_tol(x, mode, T::breakpoint_tol())
    }

    fn check_pattern(&self, pattern: &ActivationPattern, depth: usize) -> Result<()> {
        if pattern.layers.len() < depth {
            return Err(Error::DimensionMismatch(format!(
                "pattern covers {} layers, need {depth}",
                pattern.layers.len()
            )));
        }
        let k = self.activation.num_pieces();
        for (l, (pieces, block)) in pattern.layers.iter().zip(&self.blocks).take(depth).enumerate() {
            if pieces.len() != block.linear.out_dim() {
                return Err(Error::DimensionMismatch(format!(
                    "pattern layer {l} has {} entries, width is {}",
                    pieces.len(),
                    block.linear.out_dim()
                )));
            }
            if pieces.iter().any(|&p| p as usize >= k) {
                return Err(Error::DimensionMismatch(format!(
                    "pattern layer {l} has a piece index >= {k}"
                )));
            }
        }
        Ok(())
    }

    /// Affine map `x -> h^(depth)(x)` valid on the region with the given
    /// pattern on its first `depth` layers. `depth = 0` is the identity.
    pub fn prefix_affine_map(
        &self,
        pattern: &ActivationPattern,
        mode: Mode<'_, T>,
        depth: usize,
    ) -> Result<AffineMap<T>> {
        let depth = depth.min(self.blocks.len());
        self.check_pattern(pattern, depth)?;
        let d0 = self.input_dim();
        let mut map = AffineMap::identity(d0);
        for l in 0..depth {
            let eff = self.effective_layer(l, mode)?;
            let pre = map.compose_after(&eff);
            map = pre.gate(&self.activation, &pattern.layers[l]);
        }
        Ok(map)
    }

    /// Affine coefficients `(A_R, b_R)` of the full network on the region with `pattern`.
    pub fn region_affine_map(&self, pattern: &ActivationPattern, mode: Mode<'_, T>) -> Result<AffineMap<T>> {
        let prefix = self.prefix_affine_map(pattern, mode, self.blocks.len())?;
        Ok(prefix.compose_after(&self.output))
    }
}

/// Piece index (0-based) of every hidden neuron, grouped by layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActivationPattern {
    pub layers: Vec<Vec<u16>>,
}

impl ActivationPattern {
    pub fn len(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// First `depth` layers only.
    pub fn prefix(&self, depth: usize) -> ActivationPattern {
        ActivationPattern {
            layers: self.layers.iter().take(depth).cloned().collect(),
        }
    }

    /// Stable 16-hex-digit digest of the pattern.
    pub fn hash_hex(&self) -> String {
        let mut hasher = Sha256::new();
        for layer in &self.layers {
            hasher.update((layer.len() as u64).to_le_bytes());
            for &p in layer {
                hasher.update(p.to_le_bytes());
            }
        }
        crate::hex_prefix(&hasher.finalize(), 8)
    }
}

/// `x -> A x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap<T> {
    pub a: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Scalar> AffineMap<T> {
    pub fn identity(dim: usize) -> Self {
        Self {
            a: Array2::eye(dim),
            b: Array1::zeros(dim),
        }
    }

    pub fn apply(&self, x: ArrayView1<T>) -> Array1<T> {
        self.a.dot(&x) + &self.b
    }

    pub fn in_dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.a.nrows()
    }

    /// `layer ∘ self`.
    pub fn compose_after(&self, layer: &LinearLayer<T>) -> AffineMap<T> {
        AffineMap {
            a: layer.weight.dot(&self.a),
            b: layer.weight.dot(&self.b) + &layer.bias,
        }
    }

    /// Applies the activation pieces selected by `pieces` row by row.
    pub fn gate(&self, act: &CpaActivation<T>, pieces: &[u16]) -> AffineMap<T> {
        let mut a = self.a.clone();
        let mut b = self.b.clone();
        for (j, (mut row, bj)) in a.axis_iter_mut(Axis(0)).zip(b.iter_mut()).enumerate() {
            let k = pieces[j] as usize;
            let slope = act.slopes()[k];
            row.mapv_inplace(|v| v * slope);
            *bj = slope * *bj + act.intercepts()[k];
        }
        AffineMap { a, b }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn one_neuron(w: [f64; 2], b: f64) -> Network<f64> {
        Network::new(
            vec![HiddenBlock {
                linear: LinearLayer::new(array![[w[0], w[1]]], array![b]).unwrap(),
                bn: None,
            }],
            LinearLayer::new(array![[1.0]], array![0.0]).unwrap(),
            CpaActivation::relu(),
        )
        .unwrap()
    }

    #[test]
    fn activation_values() {
        let relu = CpaActivation::<f64>::relu();
        assert_eq!(relu.eval(-1.0), 0.0);
        assert_eq!(relu.eval(2.0), 2.0);
        let leaky = CpaActivation::<f64>::leaky_relu(0.1);
        assert!((leaky.eval(-3.0) - (-0.3)).abs() < 1e-15);
        let ht = CpaActivation::<f64>::hard_tanh();
        assert_eq!(ht.eval(-5.0), -1.0);
        assert_eq!(ht.eval(0.25), 0.25);
        assert_eq!(ht.eval(7.0), 1.0);
        assert_eq!(ht.eval(1.0), 1.0);
    }

    #[test]
    fn piece_indices() {
        let relu = CpaActivation::<f64>::relu();
        // 0-based: the identity piece of ReLU is index 1.
        assert_eq!(relu.piece_index(0.5, 1e-12), Ok(1));
        assert_eq!(relu.piece_index(0.0, 1e-12), Err(OnBreakpoint { breakpoint: 0 }));
        let ht = CpaActivation::<f64>::hard_tanh();
        assert_eq!(ht.piece_index(-2.0, 1e-12), Ok(0));
        assert_eq!(ht.piece_index(1.0 + 1e-13, 1e-12), Err(OnBreakpoint { breakpoint: 1 }));
    }

    #[test]
    fn rejects_bad_activations() {
        assert!(CpaActivation::new(vec![0.0], vec![1.0], vec![0.0]).is_err());
        assert!(CpaActivation::new(vec![1.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0; 3]).is_err());
        // jump at the breakpoint
        assert!(CpaActivation::new(vec![0.0], vec![0.0, 1.0], vec![0.0, 1.0]).is_err());
        assert!(CpaActivation::new(vec![0.0], vec![0.0, 1.0, 2.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn identity_network_forward() {
        let net = Network::new(
            vec![HiddenBlock {
                linear: LinearLayer::new(Array2::eye(2), Array1::zeros(2)).unwrap(),
                bn: None,
            }],
            LinearLayer::new(Array2::eye(2), Array1::zeros(2)).unwrap(),
            CpaActivation::relu(),
        )
        .unwrap();
        let (y, trace) = net.forward(array![1.0, -1.0].view(), Mode::NoBn).unwrap();
        assert_eq!(y, array![1.0, 0.0]);
        assert_eq!(trace.pre[0], array![1.0, -1.0]);
        assert_eq!(trace.post[0], array![1.0, 0.0]);
    }

    #[test]
    fn dimension_errors() {
        let net = one_neuron([1.0, 0.0], 0.0);
        assert!(matches!(
            net.forward(array![1.0].view(), Mode::NoBn),
            Err(Error::DimensionMismatch(_))
        ));
        let bad = Network::new(
            vec![HiddenBlock {
                linear: LinearLayer::new(Array2::<f64>::zeros((3, 2)), Array1::zeros(3)).unwrap(),
                bn: None,
            }],
            LinearLayer::new(Array2::zeros((1, 2)), Array1::zeros(1)).unwrap(),
            CpaActivation::relu(),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn single_neuron_patterns() {
        let net = one_neuron([1.0, 0.0], 0.0);
        let p = net.activation_pattern(array![1.0, 0.0].view(), Mode::NoBn).unwrap();
        assert_eq!(p.layers, vec![vec![1]]);
        let p = net.activation_pattern(array![-1.0, 0.0].view(), Mode::NoBn).unwrap();
        assert_eq!(p.layers, vec![vec![0]]);
        assert!(matches!(
            net.activation_pattern(array![0.0, 3.0].view(), Mode::NoBn),
            Err(Error::BreakpointHit { layer: 0, neuron: 0, .. })
        ));
    }

    #[test]
    fn dead_pattern_affine_map() {
        let mut net = one_neuron([2.0, -1.0], 0.5);
        net.output_mut().weight = array![[3.0]];
        net.output_mut().bias = array![-0.25];
        let dead = ActivationPattern { layers: vec![vec![0]] };
        let map = net.region_affine_map(&dead, Mode::NoBn).unwrap();
        assert_eq!(map.a, array![[0.0, 0.0]]);
        assert_eq!(map.b, array![-0.25]);
    }

    #[test]
    fn linear_activation_gives_weight_product() {
        let w1 = array![[1.0, 2.0], [-0.5, 0.25], [3.0, -1.0]];
        let w2 = array![[0.5, -1.0, 2.0], [1.0, 1.0, -1.0]];
        let wo = array![[2.0, -3.0]];
        let net = Network::new(
            vec![
                HiddenBlock {
                    linear: LinearLayer::new(w1.clone(), array![0.1, 0.2, 0.3]).unwrap(),
                    bn: None,
                },
                HiddenBlock {
                    linear: LinearLayer::new(w2.clone(), array![-0.1, 0.4]).unwrap(),
                    bn: None,
                },
            ],
            LinearLayer::new(wo.clone(), array![0.0]).unwrap(),
            CpaActivation::<f64>::leaky_relu(1.0),
        )
        .unwrap();
        let pattern = ActivationPattern {
            layers: vec![vec![1, 1, 1], vec![1, 1]],
        };
        let map = net.region_affine_map(&pattern, Mode::NoBn).unwrap();
        let expect = wo.dot(&w2).dot(&w1);
        for (a, b) in map.a.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn pattern_hash_is_stable() {
        let p = ActivationPattern { layers: vec![vec![0, 1], vec![1]] };
        let q = ActivationPattern { layers: vec![vec![0], vec![1, 1]] };
        assert_eq!(p.hash_hex(), p.clone().hash_hex());
        assert_ne!(p.hash_hex(), q.hash_hex());
        assert_eq!(p.hash_hex().len(), 16);
    }
}
