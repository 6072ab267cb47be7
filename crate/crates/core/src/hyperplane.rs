//! Switching hyperplanes in a layer's input representation space, the exact
//! ℓ∞ window-cut test, normalized offsets and family-wise cut counts.
//!
//! A neuron with weight row `w` and bias `b` switches between activation
//! pieces on `{u : <w,u> + b = tau_q}`. Under frozen-batch BN the same set
//! becomes `{u : <w,u> = <w,ū> + delta * sqrt(v + eps)}` with
//! `delta = (tau_q - beta) / gamma`, which does not involve `b` at all.
//! For an ℓ∞ box of radius `r` around `u0`, a hyperplane `<w,u> = c` meets
//! the open box exactly when `|c - <w,u0>| < r * |w|_1`; dividing by
//! `|w|_1` gives the normalized offset compared against `r`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1};

use crate::cpa::{Mode, Network};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `{u : <normal, u> = offset}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane<T> {
    pub normal: Array1<T>,
    pub offset: T,
}

impl<T: Scalar> Hyperplane<T> {
    pub fn new(normal: Array1<T>, offset: T) -> Result<Self> {
        if normal.iter().all(|&w| w == T::zero()) {
            return Err(Error::ZeroWeight);
        }
        Ok(Self { normal, offset })
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    pub fn l1_norm(&self) -> T {
        l1(self.normal.view())
    }

    pub fn l2_norm(&self) -> T {
        self.normal.dot(&self.normal).sqrt()
    }

    /// `<normal, u> - offset`.
    pub fn eval(&self, u: ArrayView1<T>) -> T {
        self.normal.dot(&u) - self.offset
    }
}

fn l1<T: Scalar>(w: ArrayView1<T>) -> T {
    w.iter().map(|x| x.abs()).sum()
}

/// Closed ℓ∞ ball `B_∞(center, radius)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window<T> {
    pub center: Array1<T>,
    pub radius: T,
}

impl<T: Scalar> Window<T> {
    pub fn new(center: Array1<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!("window radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, u: ArrayView1<T>) -> bool {
        u.iter()
            .zip(self.center.iter())
            .all(|(&a, &c)| (a - c).abs() <= self.radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Interior of the box; boundary-only contact is not a cut.
    Open,
    /// Closed box.
    Closed,
}

/// Outcome of a window-cut test together with a flag for near-ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutTest {
    pub cut: bool,
    /// `|c - <w,u0>|` is within the boundary tolerance of `r |w|_1`.
    pub near_boundary: bool,
}

pub fn window_cut_test<T: Scalar>(h: &Hyperplane<T>, window: &Window<T>, boundary: Boundary) -> CutTest {
    let gap = (h.offset - h.normal.dot(&window.center)).abs();
    let reach = window.radius * h.l1_norm();
    let cut = match boundary {
        Boundary::Open => gap < reach,
        Boundary::Closed => gap <= reach,
    };
    CutTest {
        cut,
        near_boundary: (gap - reach).abs() <= T::boundary_tol() * (T::one() + reach),
    }
}

pub fn window_cut<T: Scalar>(h: &Hyperplane<T>, window: &Window<T>, boundary: Boundary) -> bool {
    window_cut_test(h, window, boundary).cut
}

/// `{u : <w,u> = tau - b}`.
pub fn baseline_hyperplane<T: Scalar>(w: ArrayView1<T>, b: T, tau: T) -> Result<Hyperplane<T>> {
    Hyperplane::new(w.to_owned(), tau - b)
}

/// `(tau - beta) / gamma`.
pub fn standardized_shift<T: Scalar>(tau: T, beta: T, gamma: T) -> Result<T> {
    if gamma == T::zero() {
        return Err(Error::ZeroGamma(0));
    }
    Ok((tau - beta) / gamma)
}

/// Switching hyperplane of a BN neuron conditioned on a batch with
/// centroid `centroid` and pre-activation variance `var`.
pub fn bn_hyperplane<T: Scalar>(
    w: ArrayView1<T>,
    centroid: ArrayView1<T>,
    var: T,
    gamma: T,
    beta: T,
    tau: T,
    eps: T,
) -> Result<Hyperplane<T>> {
    let delta = standardized_shift(tau, beta, gamma)?;
    Hyperplane::new(w.to_owned(), w.dot(&centroid) + delta * (var + eps).sqrt())
}

/// Zero level set of the batch-standardized pre-activation; contains the centroid.
pub fn through_centroid_hyperplane<T: Scalar>(w: ArrayView1<T>, centroid: ArrayView1<T>) -> Result<Hyperplane<T>> {
    Hyperplane::new(w.to_owned(), w.dot(&centroid))
}

/// Switching hyperplane of a BN neuron evaluated with running statistics.
#[allow(clippy::too_many_arguments)]
pub fn bn_running_hyperplane<T: Scalar>(
    w: ArrayView1<T>,
    b: T,
    running_mean: T,
    running_var: T,
    gamma: T,
    beta: T,
    tau: T,
    eps: T,
) -> Result<Hyperplane<T>> {
    let delta = standardized_shift(tau, beta, gamma)?;
    Hyperplane::new(w.to_owned(), running_mean - b + delta * (running_var + eps).sqrt())
}

/// Euclidean distance from `x0` to `h`.
pub fn centroid_distance_l2<T: Scalar>(h: &Hyperplane<T>, x0: ArrayView1<T>) -> T {
    (h.offset - h.normal.dot(&x0)).abs() / h.l2_norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OffsetVariant {
    Baseline,
    BnFrozen,
    BnRunning,
    ThroughCentroid,
}

impl OffsetVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            OffsetVariant::Baseline => "baseline",
            OffsetVariant::BnFrozen => "bn_frozen",
            OffsetVariant::BnRunning => "bn_running",
            OffsetVariant::ThroughCentroid => "through_centroid",
        }
    }
}

impl fmt::Display for OffsetVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OffsetVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(OffsetVariant::Baseline),
            "bn_frozen" => Ok(OffsetVariant::BnFrozen),
            "bn_running" => Ok(OffsetVariant::BnRunning),
            "through_centroid" => Ok(OffsetVariant::ThroughCentroid),
            other => Err(Error::InvalidParameter(format!("unknown offset variant {other:?}"))),
        }
    }
}

/// Per-neuron parameters needed to place a switching hyperplane.
#[derive(Debug, Clone, Copy)]
pub enum OffsetParams<'a, T> {
    Baseline {
        bias: T,
    },
    BnFrozen {
        batch_centroid: ArrayView1<'a, T>,
        var: T,
        gamma: T,
        beta: T,
        eps: T,
    },
    BnRunning {
        bias: T,
        running_mean: T,
        running_var: T,
        gamma: T,
        beta: T,
        eps: T,
    },
    ThroughCentroid {
        batch_centroid: ArrayView1<'a, T>,
    },
}

impl<T> OffsetParams<'_, T> {
    pub fn variant(&self) -> OffsetVariant {
        match self {
            OffsetParams::Baseline { .. } => OffsetVariant::Baseline,
            OffsetParams::BnFrozen { .. } => OffsetVariant::BnFrozen,
            OffsetParams::BnRunning { .. } => OffsetVariant::BnRunning,
            OffsetParams::ThroughCentroid { .. } => OffsetVariant::ThroughCentroid,
        }
    }
}

/// Normalized offset of one switching hyperplane from a window center.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetRecord<T> {
    pub layer: usize,
    pub neuron: usize,
    pub breakpoint: usize,
    pub variant: OffsetVariant,
    pub delta: T,
    pub numerator: T,
    pub l1_norm: T,
}

impl<T: Scalar> OffsetRecord<T> {
    /// The hyperplane cuts the open window of radius `r` around the center.
    pub fn cuts(&self, r: T) -> bool {
        self.delta < r
    }
}

/// `(numerator, |w|_1)` for one neuron/breakpoint relative to `center`.
pub fn normalized_offset<T: Scalar>(
    w: ArrayView1<T>,
    tau: T,
    params: &OffsetParams<'_, T>,
    center: ArrayView1<T>,
) -> Result<(T, T)> {
    let l1n = l1(w);
    if l1n == T::zero() {
        return Err(Error::ZeroWeight);
    }
    let numerator = match *params {
        OffsetParams::Baseline { bias } => (tau - (w.dot(&center) + bias)).abs(),
        OffsetParams::BnFrozen {
            batch_centroid,
            var,
            gamma,
            beta,
            eps,
        } => {
            let delta = standardized_shift(tau, beta, gamma)?;
            (w.dot(&(&batch_centroid - &center)) + delta * (var + eps).sqrt()).abs()
        }
        OffsetParams::BnRunning {
            bias,
            running_mean,
            running_var,
            gamma,
            beta,
            eps,
        } => {
            let delta = standardized_shift(tau, beta, gamma)?;
            (w.dot(&center) + bias - running_mean - delta * (running_var + eps).sqrt()).abs()
        }
        OffsetParams::ThroughCentroid { batch_centroid } => w.dot(&(&batch_centroid - &center)).abs(),
    };
    Ok((numerator, l1n))
}

/// Hyperplane matching `params`, consistent with [`normalized_offset`].
pub fn hyperplane_for<T: Scalar>(w: ArrayView1<T>, tau: T, params: &OffsetParams<'_, T>) -> Result<Hyperplane<T>> {
    match *params {
        OffsetParams::Baseline { bias } => baseline_hyperplane(w, bias, tau),
        OffsetParams::BnFrozen {
            batch_centroid,
            var,
            gamma,
            beta,
            eps,
        } => bn_hyperplane(w, batch_centroid, var, gamma, beta, tau, eps),
        OffsetParams::BnRunning {
            bias,
            running_mean,
            running_var,
            gamma,
            beta,
            eps,
        } => bn_running_hyperplane(w, bias, running_mean, running_var, gamma, beta, tau, eps),
        OffsetParams::ThroughCentroid { batch_centroid } => through_centroid_hyperplane(w, batch_centroid),
    }
}

/// Which variant describes block `layer` of `net` under `mode`.
pub fn variant_for(net: &Network<impl Scalar>, layer: usize, mode: Mode<'_, impl Scalar>) -> OffsetVariant {
    match (&net.blocks()[layer].bn, mode) {
        (None, _) | (_, Mode::NoBn) => OffsetVariant::Baseline,
        (Some(_), Mode::BnEval) => OffsetVariant::BnRunning,
        (Some(_), Mode::BnFrozen(_)) => OffsetVariant::BnFrozen,
    }
}

/// Parameters of neuron `j` of block `layer` under `mode`.
pub fn neuron_params<'a, T: Scalar>(
    net: &'a Network<T>,
    layer: usize,
    j: usize,
    mode: Mode<'a, T>,
) -> Result<OffsetParams<'a, T>> {
    let block = &net.blocks()[layer];
    let bias = block.linear.bias[j];
    Ok(match (&block.bn, mode) {
        (None, _) | (_, Mode::NoBn) => OffsetParams::Baseline { bias },
        (Some(bn), Mode::BnEval) => OffsetParams::BnRunning {
            bias,
            running_mean: bn.running_mean[j],
            running_var: bn.running_var[j],
            gamma: bn.gamma[j],
            beta: bn.beta[j],
            eps: bn.eps,
        },
        (Some(bn), Mode::BnFrozen(frozen)) => {
            let fl = frozen.layers.get(layer).ok_or(Error::MissingFrozenStats)?;
            let stats = fl.stats.as_ref().ok_or(Error::MissingFrozenStats)?;
            OffsetParams::BnFrozen {
                batch_centroid: fl.input_centroid.view(),
                var: stats.var[j],
                gamma: bn.gamma[j],
                beta: bn.beta[j],
                eps: bn.eps,
            }
        }
    })
}

/// Offset records for every neuron and breakpoint of block `layer`,
/// measured from `center` in the block's input space. Neurons with a
/// zero weight row are skipped.
pub fn layer_offsets<T: Scalar>(
    net: &Network<T>,
    layer: usize,
    mode: Mode<'_, T>,
    center: ArrayView1<T>,
) -> Result<Vec<OffsetRecord<T>>> {
    let block = net.blocks().get(layer).ok_or_else(|| {
        Error::InvalidParameter(format!("layer {layer} out of range (network has {})", net.num_hidden()))
    })?;
    if center.len() != block.linear.in_dim() {
        return Err(Error::DimensionMismatch(format!(
            "center has dimension {}, layer input is {}",
            center.len(),
            block.linear.in_dim()
        )));
    }
    let taus = net.activation().breakpoints();
    let mut out = Vec::with_capacity(block.linear.out_dim() * taus.len());
    for (j, w) in block.linear.weight.outer_iter().enumerate() {
        let params = neuron_params(net, layer, j, mode)?;
        for (q, &tau) in taus.iter().enumerate() {
            match normalized_offset(w, tau, &params, center) {
                Ok((numerator, l1_norm)) => out.push(OffsetRecord {
                    layer,
                    neuron: j,
                    breakpoint: q,
                    variant: params.variant(),
                    delta: numerator / l1_norm,
                    numerator,
                    l1_norm,
                }),
                Err(Error::ZeroWeight) => {
                    log::warn!("layer {layer} neuron {j} has a zero weight row; excluded");
                    break;
                }
                Err(Error::ZeroGamma(_)) => return Err(Error::ZeroGamma(j)),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

/// Switching hyperplanes `(neuron, breakpoint, hyperplane)` of block `layer`.
pub fn layer_hyperplanes<T: Scalar>(
    net: &Network<T>,
    layer: usize,
    mode: Mode<'_, T>,
) -> Result<Vec<(usize, usize, Hyperplane<T>)>> {
    let block = &net.blocks()[layer];
    let taus = net.activation().breakpoints();
    let mut out = Vec::new();
    for (j, w) in block.linear.weight.outer_iter().enumerate() {
        let params = neuron_params(net, layer, j, mode)?;
        for (q, &tau) in taus.iter().enumerate() {
            match hyperplane_for(w, tau, &params) {
                Ok(h) => out.push((j, q, h)),
                Err(Error::ZeroWeight) => {
                    log::warn!("layer {layer} neuron {j} has a zero weight row; excluded");
                    break;
                }
                Err(Error::ZeroGamma(_)) => return Err(Error::ZeroGamma(j)),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

/// Per-neuron counts `M_j` of window-cutting breakpoint hyperplanes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyCutCounts {
    pub per_neuron: Vec<usize>,
    pub total: usize,
}

pub fn family_cut_counts<T: Scalar>(
    net: &Network<T>,
    layer: usize,
    mode: Mode<'_, T>,
    window: &Window<T>,
) -> Result<FamilyCutCounts> {
    let records = layer_offsets(net, layer, mode, window.center.view())?;
    let mut per_neuron = vec![0usize; net.blocks()[layer].linear.out_dim()];
    for rec in &records {
        if rec.cuts(window.radius) {
            per_neuron[rec.neuron] += 1;
        }
    }
    let total = per_neuron.iter().sum();
    Ok(FamilyCutCounts { per_neuron, total })
}
