//! The matched BN / non-BN counting protocol behind the table recipes.
//!
//! A pair is trained per (dataset, widths, seed) from one generated dataset
//! and one shuffling stream. The non-BN network is counted directly; the BN
//! network is counted once per reference batch, each batch drawn without
//! replacement from the training split with a logged seed.

use bngeom_core::batchnorm::{batch_content_id, freeze_batch};
use bngeom_core::enumerate::{enumerate_regions, self_check, SelfCheck};
use bngeom_core::{CpaActivation, Mode, Network, Window};
use bngeom_train::{accuracy, train, Dataset, DatasetKind, TrainConfig};
use ndarray::{array, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::args::ProtocolArgs;
use crate::error::{CliError, Result};

/// Area conservation tolerance (relative) for every enumeration.
pub const AREA_TOL: f64 = 1e-6;
/// Affine-map versus forward-pass tolerance for every enumeration.
pub const AFFINE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Protocol {
    pub n: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub activation: CpaActivation<f64>,
    pub ref_batches: usize,
    pub check_samples: usize,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            n: 200,
            epochs: 100,
            lr: 1e-4,
            batch: 64,
            activation: CpaActivation::relu(),
            ref_batches: 3,
            check_samples: 5,
        }
    }
}

pub fn parse_activation(name: &str) -> Result<CpaActivation<f64>> {
    match name {
        "relu" => Ok(CpaActivation::relu()),
        "hard-tanh" | "hardtanh" => Ok(CpaActivation::hard_tanh()),
        other => Err(CliError::Usage(format!("unknown activation {other:?} (relu, hard-tanh)"))),
    }
}

impl Protocol {
    pub fn from_args(a: &ProtocolArgs, ref_batches: usize) -> Result<Self> {
        if ref_batches == 0 {
            return Err(CliError::Usage("--ref-batches must be positive".into()));
        }
        Ok(Self {
            n: a.n,
            epochs: a.epochs,
            lr: a.lr,
            batch: a.batch,
            activation: parse_activation(&a.activation)?,
            ref_batches,
            check_samples: 5,
        })
    }

    pub fn train_config(&self, widths: &[usize], use_bn: bool, seed: u64) -> TrainConfig {
        TrainConfig {
            widths: widths.to_vec(),
            use_bn,
            epochs: self.epochs,
            lr: self.lr,
            batch_size: self.batch,
            seed,
            checkpoint_epochs: vec![self.epochs],
            activation: self.activation.clone(),
            ..TrainConfig::default()
        }
    }
}

pub fn window_for(kind: DatasetKind) -> Window<f64> {
    let (c, r) = kind.window();
    Window::new(array![c[0], c[1]], r).expect("positive radius")
}

/// Seed of reference batch `k` for training seed `seed`.
pub fn batch_seed(seed: u64, k: usize) -> u64 {
    0xBA7C_0000_0000 ^ seed.wrapping_mul(1_000_003).wrapping_add(k as u64)
}

pub fn reference_batch(train_set: &Dataset, seed: u64, k: usize, size: usize) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(batch_seed(seed, k));
    train_set.sample_rows(size, &mut rng)
}

#[derive(Debug, Clone)]
pub struct MatchedPair {
    pub kind: DatasetKind,
    pub widths: Vec<usize>,
    pub seed: u64,
    pub train_set: Dataset,
    pub nonbn: Network<f64>,
    pub bn: Network<f64>,
    /// (train, validation) accuracy of the non-BN and BN networks.
    pub nonbn_acc: (f64, f64),
    pub bn_acc: (f64, f64),
}

pub fn train_pair(kind: DatasetKind, widths: &[usize], seed: u64, p: &Protocol) -> Result<MatchedPair> {
    let data = kind.generate(p.n, seed)?;
    let plain = train(&data, &p.train_config(widths, false, seed))?;
    let with_bn = train(&data, &p.train_config(widths, true, seed))?;
    Ok(MatchedPair {
        kind,
        widths: widths.to_vec(),
        seed,
        nonbn_acc: (accuracy(&plain.net, &plain.train_set)?, accuracy(&plain.net, &plain.val_set)?),
        bn_acc: (accuracy(&with_bn.net, &with_bn.train_set)?, accuracy(&with_bn.net, &with_bn.val_set)?),
        train_set: plain.train_set,
        nonbn: plain.net,
        bn: with_bn.net,
    })
}

#[derive(Debug, Clone)]
pub struct CountRecord {
    pub dataset: DatasetKind,
    pub widths: Vec<usize>,
    pub seed: u64,
    pub use_bn: bool,
    /// Reference batch index and seed for BN runs.
    pub ref_batch: Option<(usize, u64)>,
    pub batch_id: String,
    pub count: usize,
    pub sliver_merges: usize,
    pub check: SelfCheck,
    pub train_acc: f64,
    pub val_acc: f64,
}

impl CountRecord {
    pub fn check_passes(&self) -> bool {
        self.check.passes(AREA_TOL, AFFINE_TOL)
    }
}

fn count_one(net: &Network<f64>, mode: Mode<'_, f64>, window: &Window<f64>, p: &Protocol) -> Result<(usize, usize, SelfCheck)> {
    let e = enumerate_regions(net, mode, window)?;
    let check = self_check(net, mode, &e, p.check_samples, 0)?;
    Ok((e.count(), e.sliver_merges, check))
}

/// Non-BN count followed by one BN count per reference batch.
pub fn count_pair(pair: &MatchedPair, p: &Protocol) -> Result<Vec<CountRecord>> {
    let window = window_for(pair.kind);
    let record = |use_bn, ref_batch, batch_id: String, (count, sliver_merges, check)| {
        let acc = if use_bn { pair.bn_acc } else { pair.nonbn_acc };
        CountRecord {
            dataset: pair.kind,
            widths: pair.widths.clone(),
            seed: pair.seed,
            use_bn,
            ref_batch,
            batch_id,
            count,
            sliver_merges,
            check,
            train_acc: acc.0,
            val_acc: acc.1,
        }
    };
    let mut out = vec![record(false, None, String::new(), count_one(&pair.nonbn, Mode::NoBn, &window, p)?)];
    for k in 0..p.ref_batches {
        let batch = reference_batch(&pair.train_set, pair.seed, k, p.batch);
        let id = batch_content_id(batch.view());
        let frozen = freeze_batch(&pair.bn, batch.view(), id.clone())?;
        let counted = count_one(&pair.bn, Mode::BnFrozen(&frozen), &window, p)?;
        out.push(record(true, Some((k, batch_seed(pair.seed, k))), id, counted));
    }
    Ok(out)
}

/// Trains and counts every (dataset, widths, seed) job; results keep job order.
pub fn run_jobs(jobs: &[(DatasetKind, Vec<usize>)], seeds: u64, p: &Protocol) -> Result<(Vec<MatchedPair>, Vec<CountRecord>)> {
    let flat: Vec<(DatasetKind, &[usize], u64)> = jobs
        .iter()
        .flat_map(|(k, w)| (0..seeds).map(move |s| (*k, w.as_slice(), s)))
        .collect();
    let results: Vec<Result<(MatchedPair, Vec<CountRecord>)>> = flat
        .par_iter()
        .map(|&(kind, widths, seed)| {
            let pair = train_pair(kind, widths, seed, p)?;
            let recs = count_pair(&pair, p)?;
            log::info!("{kind} {widths:?} seed {seed}: non-BN {} BN {:?}", recs[0].count, recs[1..].iter().map(|r| r.count).collect::<Vec<_>>());
            Ok((pair, recs))
        })
        .collect();
    let mut pairs = Vec::with_capacity(results.len());
    let mut records = Vec::new();
    for r in results {
        let (pair, recs) = r?;
        pairs.push(pair);
        records.extend(recs);
    }
    Ok((pairs, records))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub dataset: DatasetKind,
    pub widths: Vec<usize>,
    pub seeds: usize,
    pub nonbn_mean: f64,
    pub nonbn_std: f64,
    pub bn_mean: f64,
    pub bn_std: f64,
}

impl SummaryRow {
    pub fn gap(&self) -> f64 {
        self.bn_mean - self.nonbn_mean
    }

    pub fn ratio(&self) -> f64 {
        self.bn_mean / self.nonbn_mean
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per (dataset, widths): mean and sample standard deviation over seeds;
/// a BN seed contributes the mean over its reference batches.
pub fn summarize(records: &[CountRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(DatasetKind, Vec<usize>)> = Vec::new();
    for r in records {
        if !keys.iter().any(|(k, w)| *k == r.dataset && *w == r.widths) {
            keys.push((r.dataset, r.widths.clone()));
        }
    }
    keys.into_iter()
        .map(|(kind, widths)| {
            let sel: Vec<&CountRecord> = records.iter().filter(|r| r.dataset == kind && r.widths == widths).collect();
            let mut seeds: Vec<u64> = sel.iter().map(|r| r.seed).collect();
            seeds.dedup();
            let nonbn: Vec<f64> = sel.iter().filter(|r| !r.use_bn).map(|r| r.count as f64).collect();
            let bn: Vec<f64> = seeds
                .iter()
                .map(|&s| {
                    let c: Vec<f64> = sel.iter().filter(|r| r.use_bn && r.seed == s).map(|r| r.count as f64).collect();
                    mean_std(&c).0
                })
                .collect();
            let (nonbn_mean, nonbn_std) = mean_std(&nonbn);
            let (bn_mean, bn_std) = mean_std(&bn);
            SummaryRow {
                dataset: kind,
                widths,
                seeds: seeds.len(),
                nonbn_mean,
                nonbn_std,
                bn_mean,
                bn_std,
            }
        })
        .collect()
}

/// `dataset:WIDTHxDEPTH`, e.g. `two-moons:64x3`.
pub fn parse_deep_config(s: &str) -> Result<(DatasetKind, Vec<usize>)> {
    let bad = || CliError::Usage(format!("config {s:?} is not dataset:WIDTHxDEPTH"));
    let (name, arch) = s.split_once(':').ok_or_else(bad)?;
    let (w, d) = arch.split_once('x').ok_or_else(bad)?;
    let w: usize = w.parse().map_err(|_| bad())?;
    let d: usize = d.parse().map_err(|_| bad())?;
    if w == 0 || d == 0 {
        return Err(bad());
    }
    Ok((name.parse()?, vec![w; d]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deep_config_grammar() {
        assert_eq!(parse_deep_config("two-moons:64x3").unwrap(), (DatasetKind::TwoMoons, vec![64; 3]));
        assert!(parse_deep_config("two-moons:64").is_err());
        assert!(parse_deep_config("nope:2x2").is_err());
    }

    #[test]
    fn mean_std_matches_hand_values() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
    }
}
