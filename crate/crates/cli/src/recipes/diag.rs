use bngeom_core::batchnorm::{batch_content_id, freeze_batch};
use bngeom_core::diagnostics::{
    bias_offset_correlation, bias_shift_test, cut_rate_at_quantile, distance_histogram, ecdf_compare,
    offsets_cdf_dataset, quantile_sorted, sorted_sample, EcdfSummary, QuantileCutRate,
};
use bngeom_core::io::{fmt_f64, Table};
use bngeom_core::pullback::parent_region_conditioning;
use bngeom_core::{Mode, Network};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::args::{DiagnoseArgs, OffsetsArgs};
use crate::common::{layer_list, load_checkpoint, load_dataset};
use crate::error::{CliError, Result};
use crate::manifest::{ExperimentManifest, Output};
use crate::Summary;

pub fn offsets_cmd(a: &OffsetsArgs) -> Result<Summary> {
    let mut manifest = ExperimentManifest::new("offsets", a, Vec::new())?;
    let ckpt = load_checkpoint(&a.model, "model", &mut manifest)?;
    let data = load_dataset(&a.data, "data", &mut manifest)?;
    let net = &ckpt.net;
    let mode = a.mode.resolve(net, &mut manifest)?;
    let layers = layer_list(&a.layers, net)?;
    if let Some(r) = a.radius {
        if !(r > 0.0) {
            return Err(CliError::Usage("--radius must be positive".into()));
        }
    }
    let recs = offsets_cdf_dataset(net, data.x.view(), &layers, mode.mode())?;
    let mut t = Table::new([
        "seed", "epoch", "batch_id", "layer", "neuron", "breakpoint", "variant", "delta", "numerator", "l1_norm", "cuts",
    ]);
    let mut n = 0;
    for rec in recs.iter().flatten() {
        n += 1;
        t.push(vec![
            ckpt.meta.seed.to_string(),
            ckpt.meta.epoch.to_string(),
            mode.batch_id().to_string(),
            (rec.layer + 1).to_string(),
            rec.neuron.to_string(),
            rec.breakpoint.to_string(),
            rec.variant.to_string(),
            fmt_f64(rec.delta),
            fmt_f64(rec.numerator),
            fmt_f64(rec.l1_norm),
            a.radius.map_or(String::new(), |r| rec.cuts(r).to_string()),
        ]);
    }
    let mut out = Output::new(manifest);
    out.table(&a.out.join("offsets.csv"), &t)?;
    let files = out.finish(&a.out.join("manifest.json"))?;
    Ok(Summary {
        files,
        message: format!("{n} offsets over {} layers", layers.len()),
    })
}

/// One (reference batch, layer) comparison of BN against non-BN offsets.
#[derive(Debug, Clone)]
pub struct OffsetTrial {
    pub batch: usize,
    pub batch_seed: u64,
    pub batch_id: String,
    /// 0-based hidden layer.
    pub layer: usize,
    pub ecdf: EcdfSummary,
    /// BN cut rates at radii from the non-BN quantiles of the same layer.
    pub rates: Vec<QuantileCutRate>,
    pub bn_median: f64,
    pub nonbn_median: f64,
}

impl OffsetTrial {
    /// BN rate at least the non-BN rate at every quantile level.
    pub fn bn_dominates(&self) -> bool {
        self.rates.iter().all(|r| r.rate >= r.reference_rate)
    }
}

pub fn trial_batch_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_mul(0x1000_0000_01B3) ^ (k as u64).wrapping_add(0xD1A6_0000)
}

/// Draws `batches` reference batches from `data` and compares, per layer,
/// the frozen-batch BN offsets with the baseline offsets of the non-BN
/// network, both measured from the batch's own representation centroid.
pub fn offset_trials(
    bn: &Network<f64>,
    nonbn: &Network<f64>,
    data: &Array2<f64>,
    batches: usize,
    batch_size: usize,
    seed: u64,
    quantiles: &[f64],
) -> Result<Vec<OffsetTrial>> {
    if bn.num_hidden() != nonbn.num_hidden() || !bn.has_bn() {
        return Err(CliError::Usage("diagnostics need a BN network and a non-BN network of equal depth".into()));
    }
    if batch_size == 0 || batch_size > data.nrows() {
        return Err(CliError::Usage(format!("batch size must be in 1..={}", data.nrows())));
    }
    let layers: Vec<usize> = (0..bn.num_hidden()).collect();
    let mut out = Vec::new();
    for k in 0..batches {
        let bseed = trial_batch_seed(seed, k);
        let mut rng = ChaCha8Rng::seed_from_u64(bseed);
        let batch = sample(data, batch_size, &mut rng);
        let id = batch_content_id(batch.view());
        let frozen = freeze_batch(bn, batch.view(), id.clone())?;
        let with_bn = offsets_cdf_dataset(bn, batch.view(), &layers, Mode::BnFrozen(&frozen))?;
        let plain = offsets_cdf_dataset(nonbn, batch.view(), &layers, Mode::NoBn)?;
        for l in 0..layers.len() {
            let a: Vec<f64> = with_bn[l].iter().map(|r| r.delta).collect();
            let b: Vec<f64> = plain[l].iter().map(|r| r.delta).collect();
            let sa = sorted_sample(&a)?;
            let sb = sorted_sample(&b)?;
            let hi = sa.last().copied().unwrap_or(0.0).max(sb.last().copied().unwrap_or(0.0));
            let grid: Vec<f64> = (0..=200).map(|i| hi * i as f64 / 200.0).collect();
            let rates = quantiles
                .iter()
                .map(|&q| cut_rate_at_quantile(&a, &b, q))
                .collect::<bngeom_core::Result<Vec<_>>>()?;
            out.push(OffsetTrial {
                batch: k,
                batch_seed: bseed,
                batch_id: id.clone(),
                layer: l,
                ecdf: ecdf_compare(&a, &b, &grid)?,
                rates,
                bn_median: quantile_sorted(&sa, 0.5),
                nonbn_median: quantile_sorted(&sb, 0.5),
            });
        }
    }
    Ok(out)
}

fn sample(data: &Array2<f64>, m: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..data.nrows()).collect();
    idx.shuffle(rng);
    idx.truncate(m);
    data.select(ndarray::Axis(0), &idx)
}

pub fn diagnose_cmd(a: &DiagnoseArgs) -> Result<Summary> {
    let mut manifest = ExperimentManifest::new("diagnose", a, vec![a.seed])?;
    let bn = load_checkpoint(&a.bn_model, "bn-model", &mut manifest)?;
    let plain = load_checkpoint(&a.nonbn_model, "nonbn-model", &mut manifest)?;
    let data = load_dataset(&a.data, "data", &mut manifest)?;
    if a.batches == 0 {
        return Err(CliError::Usage("--batches must be positive".into()));
    }
    let trials = offset_trials(&bn.net, &plain.net, &data.x, a.batches, a.batch_size, a.seed, &a.quantiles)?;
    let tag = |t: &OffsetTrial| {
        vec![
            bn.meta.seed.to_string(),
            bn.meta.epoch.to_string(),
            t.batch.to_string(),
            t.batch_seed.to_string(),
            t.batch_id.clone(),
            (t.layer + 1).to_string(),
        ]
    };
    let head = ["seed", "epoch", "batch", "batch_seed", "batch_id", "layer"];
    let mut ecdf = Table::new(head.iter().copied().chain(["d_plus", "w1", "area", "n_bn", "n_nonbn", "median_bn", "median_nonbn"]));
    let mut rates = Table::new(head.iter().copied().chain(["q", "radius", "rate_bn", "rate_nonbn"]));
    for t in &trials {
        let mut row = tag(t);
        row.extend([
            fmt_f64(t.ecdf.d_plus),
            fmt_f64(t.ecdf.w1),
            fmt_f64(t.ecdf.area),
            t.ecdf.n_a.to_string(),
            t.ecdf.n_b.to_string(),
            fmt_f64(t.bn_median),
            fmt_f64(t.nonbn_median),
        ]);
        ecdf.push(row);
        for r in &t.rates {
            let mut row = tag(t);
            row.extend([fmt_f64(r.q), fmt_f64(r.radius), fmt_f64(r.rate), fmt_f64(r.reference_rate)]);
            rates.push(row);
        }
    }

    // bias decoupling and correlation on every reference batch
    let mut shift = Table::new([
        "batch",
        "batch_id",
        "c",
        "layer",
        "neuron",
        "breakpoint",
        "baseline_change",
        "baseline_numerator_change",
        "bn_change",
        "bn_level_change",
    ]);
    let mut corr = Table::new(["batch", "batch_id", "layer", "variant", "pearson", "neurons"]);
    let mut worst_shift = 0.0f64;
    for k in 0..a.batches {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_batch_seed(a.seed, k));
        let batch = sample(&data.x, a.batch_size, &mut rng);
        let id = batch_content_id(batch.view());
        for &c in &a.shifts {
            for r in bias_shift_test(&bn.net, batch.view(), c)? {
                worst_shift = worst_shift.max(r.bn_change).max(r.bn_level_change);
                shift.push(vec![
                    k.to_string(),
                    id.clone(),
                    fmt_f64(c),
                    (r.layer + 1).to_string(),
                    r.neuron.to_string(),
                    r.breakpoint.to_string(),
                    fmt_f64(r.baseline_change),
                    fmt_f64(r.baseline_numerator_change),
                    fmt_f64(r.bn_change),
                    fmt_f64(r.bn_level_change),
                ]);
            }
        }
        for r in bias_offset_correlation(&bn.net, batch.view())? {
            corr.push(vec![
                k.to_string(),
                id.clone(),
                (r.layer + 1).to_string(),
                r.variant.to_string(),
                r.pearson.map_or("undefined".into(), fmt_f64),
                r.neurons.to_string(),
            ]);
        }
    }

    // centroid distances and parent-region conditioning over the whole dataset
    let layers: Vec<usize> = (0..bn.net.num_hidden()).collect();
    let full = freeze_batch(&bn.net, data.x.view(), batch_content_id(data.x.view()))?;
    let mut dist = Table::new(["model", "layer", "n", "median", "mean"]);
    let mut cond = Table::new(["model", "depth", "points", "skipped", "drop_rank_ratio", "sigma_min_min", "sigma_min_median"]);
    for (name, net, mode) in [("bn", &bn.net, Mode::BnFrozen(&full)), ("nonbn", &plain.net, Mode::NoBn)] {
        for (l, d) in distance_histogram(net, data.x.view(), &layers, mode)?.iter().enumerate() {
            let s = sorted_sample(d)?;
            dist.push(vec![
                name.into(),
                (l + 1).to_string(),
                s.len().to_string(),
                fmt_f64(quantile_sorted(&s, 0.5)),
                fmt_f64(s.iter().sum::<f64>() / s.len() as f64),
            ]);
        }
        for depth in 1..net.num_hidden() {
            let c = parent_region_conditioning(net, mode, &data.x, depth)?;
            let s = sorted_sample(&c.sigma_min).unwrap_or_default();
            cond.push(vec![
                name.into(),
                depth.to_string(),
                c.ranks.len().to_string(),
                c.skipped.to_string(),
                fmt_f64(c.drop_rank_ratio),
                s.first().map_or(String::new(), |v| fmt_f64(*v)),
                if s.is_empty() { String::new() } else { fmt_f64(quantile_sorted(&s, 0.5)) },
            ]);
        }
    }

    let n = trials.len() as f64;
    let positive = trials.iter().filter(|t| t.ecdf.d_plus > 0.0).count() as f64 / n;
    let dominant = trials.iter().filter(|t| t.bn_dominates()).count() as f64 / n;
    let mut summary = Table::new(["statistic", "value"]);
    summary.push(vec!["trials".into(), trials.len().to_string()]);
    summary.push(vec!["fraction_d_plus_positive".into(), fmt_f64(positive)]);
    summary.push(vec!["fraction_cut_rate_dominant".into(), fmt_f64(dominant)]);
    summary.push(vec!["max_bn_shift_change".into(), fmt_f64(worst_shift)]);

    let mut out = Output::new(manifest);
    out.table(&a.out.join("ecdf.csv"), &ecdf)?;
    out.table(&a.out.join("cut_rates.csv"), &rates)?;
    out.table(&a.out.join("bias_shift.csv"), &shift)?;
    out.table(&a.out.join("bias_correlation.csv"), &corr)?;
    out.table(&a.out.join("distances.csv"), &dist)?;
    out.table(&a.out.join("conditioning.csv"), &cond)?;
    out.table(&a.out.join("summary.csv"), &summary)?;
    let files = out.finish(&a.out.join("manifest.json"))?;
    Ok(Summary {
        files,
        message: format!(
            "{} trials: D+ > 0 in {:.1}%, BN cut rates dominate in {:.1}%, max BN shift change {:e}",
            trials.len(),
            100.0 * positive,
            100.0 * dominant,
            worst_shift
        ),
    })
}
