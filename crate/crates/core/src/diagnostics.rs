//! Distributional comparisons of normalized offsets and related checks.

use ndarray::{Array1, ArrayView2, Axis};

use crate::batchnorm::{batch_content_id, freeze_batch};
use crate::cpa::{Mode, Network};
use crate::error::{Error, Result};
use crate::hyperplane::{centroid_distance_l2, layer_hyperplanes, layer_offsets, OffsetRecord};
use crate::scalar::Scalar;

/// Sorted copy of a sample, rejecting NaN.
pub fn sorted_sample(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if sample.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("NaN in sample".into()));
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Right-continuous empirical CDF of a sorted sample.
pub fn ecdf_at(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|&v| v <= x) as f64 / sorted.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcdfSummary {
    /// `max (F_a - F_b)` over the pooled sample points; signed, never clipped.
    pub d_plus: f64,
    /// Wasserstein-1 distance `int |F_a - F_b|`.
    pub w1: f64,
    /// Trapezoid estimate of `int (F_a - F_b)` over the grid.
    pub area: f64,
    pub n_a: usize,
    pub n_b: usize,
}

/// Compares sample `a` (e.g. BN offsets) against reference `b`.
pub fn ecdf_compare(a: &[f64], b: &[f64], grid: &[f64]) -> Result<EcdfSummary> {
    let sa = sorted_sample(a)?;
    let sb = sorted_sample(b)?;
    let mut pooled: Vec<f64> = sa.iter().chain(&sb).copied().collect();
    pooled.sort_by(f64::total_cmp);
    pooled.dedup();

    let mut d_plus = f64::NEG_INFINITY;
    let mut w1 = 0.0;
    for (i, &x) in pooled.iter().enumerate() {
        let diff = ecdf_at(&sa, x) - ecdf_at(&sb, x);
        d_plus = d_plus.max(diff);
        // both ECDFs are constant on [x_i, x_{i+1})
        if let Some(&next) = pooled.get(i + 1) {
            w1 += diff.abs() * (next - x);
        }
    }
    let mut area = 0.0;
    for w in grid.windows(2) {
        let f0 = ecdf_at(&sa, w[0]) - ecdf_at(&sb, w[0]);
        let f1 = ecdf_at(&sa, w[1]) - ecdf_at(&sb, w[1]);
        area += 0.5 * (f0 + f1) * (w[1] - w[0]);
    }
    Ok(EcdfSummary {
        d_plus,
        w1,
        area,
        n_a: sa.len(),
        n_b: sb.len(),
    })
}

/// Linear-interpolation quantile of a sorted sample (the common "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Fraction of offsets strictly below `r`, i.e. the window-cut rate.
pub fn cut_rate(offsets: &[f64], r: f64) -> Result<f64> {
    if offsets.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(offsets.iter().filter(|&&d| d < r).count() as f64 / offsets.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileCutRate {
    pub q: f64,
    /// Radius taken as the `q`-quantile of the reference offsets.
    pub radius: f64,
    pub rate: f64,
    pub reference_rate: f64,
}

/// Cut rate of `offsets` at the radius given by the `q`-quantile of `reference`.
pub fn cut_rate_at_quantile(offsets: &[f64], reference: &[f64], q: f64) -> Result<QuantileCutRate> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("quantile level {q} not in (0,1)")));
    }
    let sref = sorted_sample(reference)?;
    let radius = quantile_sorted(&sref, q);
    Ok(QuantileCutRate {
        q,
        radius,
        rate: cut_rate(offsets, radius)?,
        reference_rate: cut_rate(reference, radius)?,
    })
}

/// Pearson correlation; `None` when either series has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn centroid<T: Scalar>(x: ArrayView2<T>) -> Result<Array1<T>> {
    x.mean_axis(Axis(0)).ok_or(Error::EmptySample)
}

/// Offsets of every listed hidden layer (0-based) measured from the centroid
/// of that layer's input representations over `data`.
pub fn offsets_cdf_dataset<T: Scalar>(
    net: &Network<T>,
    data: ArrayView2<T>,
    layers: &[usize],
    mode: Mode<'_, T>,
) -> Result<Vec<Vec<OffsetRecord<T>>>> {
    layers
        .iter()
        .map(|&l| {
            let reps = net.representations(data, mode, l)?;
            let c = centroid(reps.view())?;
            layer_offsets(net, l, mode, c.view())
        })
        .collect()
}

/// Euclidean distances from each layer's representation centroid to its
/// switching hyperplanes.
pub fn distance_histogram<T: Scalar>(
    net: &Network<T>,
    data: ArrayView2<T>,
    layers: &[usize],
    mode: Mode<'_, T>,
) -> Result<Vec<Vec<f64>>> {
    layers
        .iter()
        .map(|&l| {
            let reps = net.representations(data, mode, l)?;
            let c = centroid(reps.view())?;
            Ok(layer_hyperplanes(net, l, mode)?
                .iter()
                .map(|(_, _, h)| centroid_distance_l2(h, c.view()).as_f64())
                .collect())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasShiftRow {
    pub layer: usize,
    pub neuron: usize,
    pub breakpoint: usize,
    /// Signed change of the baseline normalized offset.
    pub baseline_change: f64,
    /// Change of the baseline numerator, for comparison with `|c|`.
    pub baseline_numerator_change: f64,
    /// Absolute change of the frozen-batch offset.
    pub bn_change: f64,
    /// Absolute change of the frozen-batch hyperplane level `c`.
    pub bn_level_change: f64,
}

/// Adds `c` to every hidden bias, re-freezes `batch`, and reports how the
/// baseline and frozen-batch offsets of each BN layer move. Offsets are
/// measured from the batch centroid of each layer's input.
pub fn bias_shift_test<T: Scalar>(net: &Network<T>, batch: ArrayView2<T>, c: T) -> Result<Vec<BiasShiftRow>> {
    let mut shifted = net.clone();
    for block in shifted.blocks_mut() {
        block.linear.bias.mapv_inplace(|b| b + c);
    }
    let f0 = freeze_batch(net, batch, batch_content_id(batch))?;
    let f1 = freeze_batch(&shifted, batch, batch_content_id(batch))?;
    let mut rows = Vec::new();
    for l in 0..net.num_hidden() {
        if net.blocks()[l].bn.is_none() {
            continue;
        }
        let center = f0.input_centroid(l).ok_or(Error::MissingFrozenStats)?.clone();
        let bn0 = layer_offsets(net, l, Mode::BnFrozen(&f0), center.view())?;
        let bn1 = layer_offsets(&shifted, l, Mode::BnFrozen(&f1), center.view())?;
        let base0 = layer_offsets(net, l, Mode::NoBn, center.view())?;
        let base1 = layer_offsets(&shifted, l, Mode::NoBn, center.view())?;
        let h0 = layer_hyperplanes(net, l, Mode::BnFrozen(&f0))?;
        let h1 = layer_hyperplanes(&shifted, l, Mode::BnFrozen(&f1))?;
        for (((b0, b1), (p0, p1)), (g0, g1)) in bn0.iter().zip(&bn1).zip(base0.iter().zip(&base1)).zip(h0.iter().zip(&h1)) {
            rows.push(BiasShiftRow {
                layer: l,
                neuron: b0.neuron,
                breakpoint: b0.breakpoint,
                baseline_change: (p1.delta - p0.delta).as_f64(),
                baseline_numerator_change: (p1.numerator - p0.numerator).as_f64(),
                bn_change: (b1.delta - b0.delta).abs().as_f64(),
                bn_level_change: (g1.2.offset - g0.2.offset).abs().as_f64(),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasCorrelation {
    pub layer: usize,
    pub variant: crate::hyperplane::OffsetVariant,
    /// `None` when a series has zero variance.
    pub pearson: Option<f64>,
    pub neurons: usize,
}

/// Pearson correlation between `|b_j|` and each neuron's offset (averaged
/// over breakpoints), per layer, for the baseline and frozen-batch variants.
pub fn bias_offset_correlation<T: Scalar>(net: &Network<T>, batch: ArrayView2<T>) -> Result<Vec<BiasCorrelation>> {
    let frozen = freeze_batch(net, batch, batch_content_id(batch))?;
    let mut out = Vec::new();
    for l in 0..net.num_hidden() {
        let center = frozen.input_centroid(l).ok_or(Error::MissingFrozenStats)?.clone();
        let width = net.blocks()[l].linear.out_dim();
        let mut modes = vec![Mode::NoBn];
        if net.blocks()[l].bn.is_some() {
            modes.push(Mode::BnFrozen(&frozen));
        }
        for mode in modes {
            let recs = layer_offsets(net, l, mode, center.view())?;
            let mut sum = vec![0.0; width];
            let mut cnt = vec![0usize; width];
            for r in &recs {
                sum[r.neuron] += r.delta.as_f64();
                cnt[r.neuron] += 1;
            }
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for j in 0..width {
                if cnt[j] > 0 {
                    xs.push(net.blocks()[l].linear.bias[j].abs().as_f64());
                    ys.push(sum[j] / cnt[j] as f64);
                }
            }
            out.push(BiasCorrelation {
                layer: l,
                variant: crate::hyperplane::variant_for(net, l, mode),
                pearson: pearson(&xs, &ys),
                neurons: xs.len(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ecdf_examples() {
        let s = ecdf_compare(&[0.3, 0.1, 0.2], &[0.1, 0.2, 0.3], &[0.0, 0.5]).unwrap();
        assert_eq!((s.d_plus, s.w1, s.area), (0.0, 0.0, 0.0));
        let s = ecdf_compare(&[0.0], &[1.0], &[]).unwrap();
        assert_eq!((s.d_plus, s.w1), (1.0, 1.0));
        let s = ecdf_compare(&[1.0], &[0.0], &[]).unwrap();
        assert_eq!(s.d_plus, 0.0);
        assert!(ecdf_compare(&[], &[1.0], &[]).is_err());
    }

    #[test]
    fn quantile_and_rates() {
        let s: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(quantile_sorted(&s, 0.5), 4.5);
        assert_eq!(cut_rate(&[0.0; 5], 1e-9).unwrap(), 1.0);
        let r = cut_rate_at_quantile(&s, &s, 0.25).unwrap();
        assert!((r.rate - 0.25).abs() <= 0.1);
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 4.0, 7.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(pearson(&x, &[2.0; 4]), None);
    }
}
