//! Acceptance gate. Prints one `[PASS]` / `[FAIL]` line per criterion and
//! exits non-zero if any criterion fails.
//!
//! Training for the table criteria runs once and is shared by the
//! geometry, pullback, diagnostics and consistency checks.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use bngeom::protocol::{parse_deep_config, reference_batch, run_jobs, summarize, window_for, CountRecord, MatchedPair, Protocol, SummaryRow};
use bngeom::recipes::basic::regions_table;
use bngeom::recipes::diag::offset_trials;
use bngeom::recipes::geometry::{arrangement_selftest, pullback_search};
use bngeom::{parse_with_config, run};
use bngeom_core::batchnorm::{batch_content_id, batch_stats, bn_train_transform, freeze_batch, FrozenBatch};
use bngeom_core::diagnostics::bias_shift_test;
use bngeom_core::enumerate::enumerate_regions;
use bngeom_core::hyperplane::{bn_hyperplane, through_centroid_hyperplane, window_cut, Boundary, Hyperplane, Window};
use bngeom_core::pullback::{parent_region_conditioning, PullbackConfig};
use bngeom_core::{CpaActivation, Mode, Network};
use bngeom_train::{gen_two_moons, init_network, loss_and_grad, param_vector, set_param_vector, DatasetKind, TrainMode};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SELFTEST_INSTANCES: usize = 200;
const SELFTEST_BUDGET_S: f64 = 60.0;
const CENTROID_TOL: f64 = 1e-10;
const BIAS_SHIFT_TOL: f64 = 1e-12;
const CUT_ORACLE_INSTANCES: usize = 10_000;
const CUT_BAND: f64 = 1e-12;
const MOMENT_TOL: f64 = 1e-10;
const FD_REL_TOL: f64 = 1e-4;
const BIAS_GRAD_TOL: f64 = 1e-14;
const TABLE1_SEEDS: u64 = 10;
const TABLE2_SEEDS: u64 = 5;
const TABLE2_RATIO: f64 = 2.0;
const NONBN_64_RANGE: (f64, f64) = (100.0, 5000.0);
const PULLBACK_WINDOWS: usize = 20;
const TRIAL_BATCHES: usize = 5;
const TRIAL_FRACTION: f64 = 0.8;
const QUANTILES: [f64; 3] = [0.1, 0.25, 0.5];
const SHIFTS: [f64; 6] = [-10.0, -1.0, -0.1, 0.1, 1.0, 10.0];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

struct Trained {
    table1: Vec<MatchedPair>,
    table1_records: Vec<CountRecord>,
    table2: Vec<MatchedPair>,
    table2_records: Vec<CountRecord>,
    protocol: Protocol,
}

fn train_all() -> Trained {
    let protocol = Protocol::default();
    let jobs1: Vec<(DatasetKind, Vec<usize>)> = DatasetKind::ALL
        .iter()
        .flat_map(|&k| [32, 64, 128].map(|w| (k, vec![w])))
        .collect();
    let (table1, table1_records) = run_jobs(&jobs1, TABLE1_SEEDS, &protocol).expect("table 1 protocol runs");
    let jobs2: Vec<(DatasetKind, Vec<usize>)> = ["two-moons:64x3", "random-uniform:32x5"]
        .iter()
        .map(|c| parse_deep_config(c).unwrap())
        .collect();
    let (table2, table2_records) = run_jobs(&jobs2, TABLE2_SEEDS, &protocol).expect("table 2 protocol runs");
    Trained {
        table1,
        table1_records,
        table2,
        table2_records,
        protocol,
    }
}

fn frozen_for(pair: &MatchedPair, p: &Protocol) -> FrozenBatch<f64> {
    let batch = reference_batch(&pair.train_set, pair.seed, 0, p.batch);
    freeze_batch(&pair.bn, batch.view(), batch_content_id(batch.view())).unwrap()
}

// ---------------------------------------------------------------- 1

/// Closed-form counts recomputed from the family sizes alone.
fn independent_count(families: &[usize]) -> u128 {
    let m: Vec<u128> = families.iter().map(|&x| x as u128).collect();
    let mut pairs = 0u128;
    for i in 0..m.len() {
        for j in i + 1..m.len() {
            pairs += m[i] * m[j];
        }
    }
    1 + m.iter().sum::<u128>() + pairs
}

fn criterion_selftest() -> Outcome {
    let t0 = Instant::now();
    let rows = arrangement_selftest(0, SELFTEST_INSTANCES, 0.01).expect("selftest runs");
    let secs = t0.elapsed().as_secs_f64();
    let mut bad = 0;
    for r in &rows {
        let own = independent_count(&r.kind.family_sizes());
        if !r.matches() || r.formula.to_string() != own.to_string() {
            bad += 1;
        }
    }
    outcome(
        bad == 0 && rows.len() >= SELFTEST_INSTANCES && secs < SELFTEST_BUDGET_S,
        format!("{} instances, {bad} mismatches, {secs:.1}s (budget {SELFTEST_BUDGET_S}s)", rows.len()),
    )
}

// ---------------------------------------------------------------- 2

fn bn_nets(t: &Trained) -> impl Iterator<Item = &MatchedPair> {
    t.table1.iter().chain(&t.table2)
}

/// The batch centroid is mapped to `beta` by the frozen standardization, and
/// the BN hyperplane with `beta = tau` is the through-centroid hyperplane.
fn centroid_residual(t: &Trained) -> f64 {
    let mut worst: f64 = 0.0;
    for pair in bn_nets(t) {
        let frozen = frozen_for(pair, &t.protocol);
        let tau = pair.bn.activation().breakpoints()[0];
        for (l, block) in pair.bn.blocks().iter().enumerate() {
            let slot = block.bn.as_ref().unwrap();
            let stats = frozen.stats(l).unwrap();
            let u = frozen.input_centroid(l).unwrap();
            let z = block.linear.apply(u.view());
            let zhat = slot.train_transform(z.view(), stats);
            for j in 0..zhat.len() {
                let scale = 1.0 + slot.beta[j].abs() + slot.gamma[j].abs();
                worst = worst.max((zhat[j] - slot.beta[j]).abs() / scale);
                let w = block.linear.weight.row(j);
                let tc = through_centroid_hyperplane(w, u.view()).unwrap();
                let bn = bn_hyperplane(w, u.view(), stats.var[j], slot.gamma[j], tau, tau, slot.eps).unwrap();
                worst = worst.max(tc.eval(u.view()).abs() / (1.0 + tc.offset.abs()));
                worst = worst.max((bn.offset - tc.offset).abs() / (1.0 + tc.offset.abs()));
            }
        }
    }
    worst
}

fn bias_shift_worst(t: &Trained) -> f64 {
    let mut worst: f64 = 0.0;
    for pair in bn_nets(t) {
        let batch = reference_batch(&pair.train_set, pair.seed, 0, t.protocol.batch);
        for c in SHIFTS {
            for row in bias_shift_test(&pair.bn, batch.view(), c).unwrap() {
                worst = worst.max(row.bn_change).max(row.bn_level_change);
            }
        }
    }
    worst
}

/// Open-window cut decided from the extreme values of `<w,u>` over the box
/// corners, compared with the `l1` criterion away from the tie band.
fn cut_oracle_disagreements() -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC07);
    let (mut bad, mut excluded) = (0, 0);
    for _ in 0..CUT_ORACLE_INSTANCES {
        let d = rng.random_range(2..=6usize);
        let w = Array1::from_shape_fn(d, |_| rng.random_range(-2.0..2.0));
        let center = Array1::from_shape_fn(d, |_| rng.random_range(-3.0..3.0));
        let r: f64 = rng.random_range(0.01..3.0);
        let l1: f64 = w.iter().map(|v: &f64| v.abs()).sum();
        let c = w.dot(&center) + rng.random_range(-1.5..1.5) * r * l1;
        let gap = (c - w.dot(&center)).abs();
        if (gap - r * l1).abs() <= CUT_BAND * (1.0 + r * l1) {
            excluded += 1;
            continue;
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for mask in 0..(1u32 << d) {
            let v: f64 = (0..d)
                .map(|i| w[i] * (center[i] + if mask >> i & 1 == 1 { r } else { -r }))
                .sum();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let oracle = lo < c && c < hi;
        let h = Hyperplane::new(w, c).unwrap();
        let win = Window::new(center, r).unwrap();
        if window_cut(&h, &win, Boundary::Open) != oracle {
            bad += 1;
        }
    }
    (bad, excluded)
}

/// Standardized batches have mean `beta` and variance `gamma^2 v / (v + eps)`,
/// with `v` recomputed here by two-pass summation.
fn moment_worst() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0xB47);
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let m = rng.random_range(2..=100usize);
        let k = rng.random_range(1..=8usize);
        let scales: Vec<f64> = (0..k).map(|_| 10f64.powf(rng.random_range(-3.0..2.0))).collect();
        let shifts: Vec<f64> = (0..k).map(|_| rng.random_range(-5.0..5.0)).collect();
        let z = Array2::from_shape_fn((m, k), |(_, j)| shifts[j] + scales[j] * rng.random_range(-1.0..1.0));
        let gamma = Array1::from_shape_fn(k, |_| {
            let g: f64 = rng.random_range(0.2..3.0);
            if rng.random_bool(0.5) { g } else { -g }
        });
        let beta = Array1::from_shape_fn(k, |_| rng.random_range(-2.0..2.0));
        let stats = batch_stats(z.view()).unwrap();
        let mut out = Array2::zeros((m, k));
        for (mut o, row) in out.axis_iter_mut(Axis(0)).zip(z.rows()) {
            o.assign(&bn_train_transform(row, &stats, gamma.view(), beta.view(), eps));
        }
        for j in 0..k {
            let col = z.column(j);
            let mean = col.sum() / m as f64;
            let v = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m as f64;
            let oc = out.column(j);
            let om = oc.sum() / m as f64;
            let ov = oc.iter().map(|x| (x - om).powi(2)).sum::<f64>() / m as f64;
            let target = gamma[j] * gamma[j] * v / (v + eps);
            worst = worst.max((om - beta[j]).abs() / (1.0 + beta[j].abs()));
            worst = worst.max((ov - target).abs() / target.max(1.0));
        }
    }
    worst
}

fn criterion_identities(t: &Trained) -> Outcome {
    let a = centroid_residual(t);
    let b = bias_shift_worst(t);
    let (bad, excluded) = cut_oracle_disagreements();
    let d = moment_worst();
    outcome(
        a <= CENTROID_TOL && b <= BIAS_SHIFT_TOL && bad == 0 && d <= MOMENT_TOL,
        format!(
            "centroid residual {a:.1e} (tol {CENTROID_TOL:.0e}), bias-shift change {b:.1e} (tol {BIAS_SHIFT_TOL:.0e}), \
             cut oracle {bad} disagreements in {} ({excluded} tie-band), moments {d:.1e} (tol {MOMENT_TOL:.0e})",
            CUT_ORACLE_INSTANCES - excluded
        ),
    )
}

// ---------------------------------------------------------------- 3

fn oracle_loss(net: &Network<f64>, x: ArrayView2<f64>, y: &[usize], bn: bool) -> f64 {
    let logits = if bn {
        let frozen = freeze_batch(net, x, batch_content_id(x)).unwrap();
        net.forward_batch(x, Mode::BnFrozen(&frozen)).unwrap()
    } else {
        net.forward_batch(x, Mode::NoBn).unwrap()
    };
    let mut total = 0.0;
    for (row, &c) in logits.rows().into_iter().zip(y) {
        let top = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = top + row.iter().map(|v| (v - top).exp()).sum::<f64>().ln();
        total += lse - row[c];
    }
    total / y.len() as f64
}

fn fd_check(bn: bool, seed: u64) -> (f64, f64) {
    let data = gen_two_moons(40, 0.1, seed).unwrap();
    let mut net = init_network(2, &[8, 8], 2, bn, CpaActivation::relu(), seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    if bn {
        for b in net.blocks_mut() {
            let s = b.bn.as_mut().unwrap();
            s.gamma.mapv_inplace(|_| rng.random_range(0.5..1.5));
            s.beta.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
    }
    let mode = if bn { TrainMode::BnTrain } else { TrainMode::NoBn };
    let out = loss_and_grad(&net, data.x.view(), &data.y, mode).unwrap();
    let grads = out.grads.flat();
    let p0 = param_vector(&net);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let i = rng.random_range(0..p0.len());
        let mut probe = net.clone();
        let mut p = p0.clone();
        p[i] = p0[i] + h;
        set_param_vector(&mut probe, &p);
        let up = oracle_loss(&probe, data.x.view(), &data.y, bn);
        p[i] = p0[i] - h;
        set_param_vector(&mut probe, &p);
        let down = oracle_loss(&probe, data.x.view(), &data.y, bn);
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - grads[i]).abs() / fd.abs().max(grads[i].abs()).max(1e-6));
    }
    let mut bias: f64 = 0.0;
    if bn {
        for g in &out.grads.hidden {
            let scale = g.weight.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            bias = bias.max(g.bias.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale);
        }
    }
    (worst, bias)
}

fn criterion_gradients() -> Outcome {
    let (mut fd, mut bias) = (0.0f64, 0.0f64);
    for seed in 0..3 {
        for bn in [false, true] {
            let (e, b) = fd_check(bn, seed);
            fd = fd.max(e);
            bias = bias.max(b);
        }
    }
    outcome(
        fd < FD_REL_TOL && bias <= BIAS_GRAD_TOL,
        format!("worst relative error {fd:.1e} (tol {FD_REL_TOL:.0e}), BN bias gradient {bias:.1e} (tol {BIAS_GRAD_TOL:.0e})"),
    )
}

// ---------------------------------------------------------------- 4, 5

fn show(rows: &[SummaryRow]) {
    for r in rows {
        println!(
            "       {:<15} {:<8} non-BN {:>8.1} ± {:<6.1} BN {:>8.1} ± {:<6.1} ratio {:.2}",
            r.dataset.to_string(),
            r.widths.iter().map(|w| w.to_string()).collect::<Vec<_>>().join("x"),
            r.nonbn_mean,
            r.nonbn_std,
            r.bn_mean,
            r.bn_std,
            r.ratio()
        );
    }
}

fn criterion_table1(t: &Trained) -> Outcome {
    let rows = summarize(&t.table1_records);
    show(&rows);
    let bn_above = rows.iter().all(|r| r.bn_mean > r.nonbn_mean);
    let mut growing = 0;
    let mut in_range = true;
    for kind in DatasetKind::ALL {
        let mut gaps: Vec<(usize, f64)> = rows.iter().filter(|r| r.dataset == kind).map(|r| (r.widths[0], r.gap())).collect();
        gaps.sort_by_key(|g| g.0);
        if gaps.windows(2).all(|p| p[1].1 > p[0].1) {
            growing += 1;
        }
        if let Some(r) = rows.iter().find(|r| r.dataset == kind && r.widths == [64]) {
            in_range &= r.nonbn_mean >= NONBN_64_RANGE.0 && r.nonbn_mean <= NONBN_64_RANGE.1;
        }
    }
    outcome(
        bn_above && growing >= 2 && in_range,
        format!(
            "BN above non-BN everywhere: {bn_above}; gap grows with width on {growing}/3 datasets; \
             non-BN h=64 within [{}, {}]: {in_range}",
            NONBN_64_RANGE.0, NONBN_64_RANGE.1
        ),
    )
}

fn criterion_table2(t: &Trained) -> Outcome {
    let rows = summarize(&t.table2_records);
    show(&rows);
    let ok = rows.iter().all(|r| r.bn_mean > r.nonbn_mean && r.ratio() > TABLE2_RATIO);
    let ratios: Vec<String> = rows.iter().map(|r| format!("{:.2}", r.ratio())).collect();
    outcome(ok, format!("BN/non-BN ratios [{}] (need > {TABLE2_RATIO})", ratios.join(", ")))
}

// ---------------------------------------------------------------- 6

fn criterion_pullback(t: &Trained) -> Outcome {
    let config = PullbackConfig::default();
    let (mut retained, mut unequal, mut low_rank, mut deficient) = (0, 0, 0, 0);
    let mut short = 0;
    let mut drop_ratio: f64 = 0.0;
    let mut jaccard: f64 = 1.0;
    for pair in &t.table2 {
        let frozen = frozen_for(pair, &t.protocol);
        for (net, mode) in [(&pair.nonbn, Mode::NoBn), (&pair.bn, Mode::BnFrozen(&frozen))] {
            let depth = net.num_hidden();
            let per_layer = PULLBACK_WINDOWS.div_ceil(depth - 1);
            let mut kept = 0;
            for layer in 2..=depth {
                let s = pullback_search(net, mode, &pair.train_set.x, layer, per_layer, 1.0, 16, &config, pair.seed).unwrap();
                kept += s.retained.len();
                deficient += s.rank_deficient;
                for w in &s.retained {
                    unequal += usize::from(!w.report.counts_equal);
                    low_rank += usize::from(w.report.rank != 2);
                    if let Some(j) = w.report.min_jaccard {
                        jaccard = jaccard.min(j);
                    }
                }
                let c = parent_region_conditioning(net, mode, &pair.train_set.x, layer - 1).unwrap();
                drop_ratio = drop_ratio.max(c.drop_rank_ratio);
            }
            retained += kept;
            short += usize::from(kept < PULLBACK_WINDOWS);
        }
    }
    outcome(
        short == 0 && unequal == 0 && low_rank == 0 && deficient == 0 && drop_ratio == 0.0,
        format!(
            "{retained} windows over {} checkpoints ({short} short of {PULLBACK_WINDOWS}), {unequal} unequal counts, \
             {low_rank} below rank 2, {deficient} rank-deficient anchors, drop-rank ratio {drop_ratio}, min Jaccard {jaccard:.3}",
            2 * t.table2.len()
        ),
    )
}

// ---------------------------------------------------------------- 7

fn criterion_offsets(t: &Trained) -> Outcome {
    // (config, layer) -> (trials, positive D+, dominance)
    let mut groups: BTreeMap<(String, usize), (usize, usize, usize)> = BTreeMap::new();
    let pairs = t.table1.iter().filter(|p| p.widths == [64]).chain(&t.table2);
    for pair in pairs {
        let label = format!("{} {:?}", pair.kind, pair.widths);
        let trials = offset_trials(&pair.bn, &pair.nonbn, &pair.train_set.x, TRIAL_BATCHES, t.protocol.batch, pair.seed, &QUANTILES).unwrap();
        for tr in trials {
            let g = groups.entry((label.clone(), tr.layer + 1)).or_default();
            g.0 += 1;
            g.1 += usize::from(tr.ecdf.d_plus > 0.0);
            g.2 += usize::from(tr.bn_dominates());
        }
    }
    let mut worst_d: f64 = 1.0;
    let mut worst_r: f64 = 1.0;
    for (n, d, r) in groups.values() {
        worst_d = worst_d.min(*d as f64 / *n as f64);
        worst_r = worst_r.min(*r as f64 / *n as f64);
    }
    outcome(
        worst_d >= TRIAL_FRACTION && worst_r >= TRIAL_FRACTION,
        format!(
            "{} (config, layer) groups; worst D+ > 0 fraction {worst_d:.2}, worst cut-rate dominance {worst_r:.2} (need {TRIAL_FRACTION})",
            groups.len()
        ),
    )
}

// ---------------------------------------------------------------- 8

fn regions_csv_with_threads(net: &Network<f64>, mode: Mode<'_, f64>, window: &Window<f64>, threads: usize) -> String {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| regions_table(&enumerate_regions(net, mode, window).unwrap()).to_csv(None).unwrap())
}

fn criterion_consistency(t: &Trained) -> Outcome {
    let records: Vec<&CountRecord> = t.table1_records.iter().chain(&t.table2_records).collect();
    let failing = records.iter().filter(|r| !r.check_passes()).count();
    let worst_area = records.iter().map(|r| r.check.area_rel_error).fold(0.0, f64::max);
    let worst_affine = records.iter().map(|r| r.check.max_affine_error).fold(0.0, f64::max);
    let mut differing = 0;
    let mut compared = 0;
    let picks = t
        .table2
        .iter()
        .filter(|p| p.seed == 0)
        .chain(t.table1.iter().filter(|p| p.seed == 0 && p.widths == [128]));
    for pair in picks {
        let window = window_for(pair.kind);
        let frozen = frozen_for(pair, &t.protocol);
        for (net, mode) in [(&pair.nonbn, Mode::NoBn), (&pair.bn, Mode::BnFrozen(&frozen))] {
            let one = regions_csv_with_threads(net, mode, &window, 1);
            let four = regions_csv_with_threads(net, mode, &window, 4);
            compared += 1;
            differing += usize::from(one != four);
        }
    }
    outcome(
        failing == 0 && differing == 0,
        format!(
            "{failing}/{} runs fail self-check (worst area error {worst_area:.1e}, affine error {worst_affine:.1e}); \
             {differing}/{compared} region tables differ between 1 and 4 threads",
            records.len()
        ),
    )
}

// ---------------------------------------------------------------- 9

fn cli(args: &[String]) {
    let cli = parse_with_config(std::iter::once("bngeom".to_string()).chain(args.iter().cloned())).expect("arguments parse");
    run(&cli).unwrap_or_else(|e| panic!("{args:?}: {e}"));
}

fn pipeline(root: &Path, threads: usize) {
    let p = |s: &str| root.join(s).display().to_string();
    let t = threads.to_string();
    let base = |v: &[&str]| -> Vec<String> {
        let mut a = vec!["--threads".to_string(), t.clone()];
        a.extend(v.iter().map(|s| s.to_string()));
        a
    };
    let frozen = format!("frozen:{}", p("batch/batch.csv"));
    let model = p("bn/checkpoint_e0020.json");
    cli(&base(&["train", "--dataset", "two-moons", "--widths", "16,16", "--bn", "--seed", "1", "--epochs", "20", "--out", &p("bn")]));
    cli(&base(&["train", "--dataset", "two-moons", "--widths", "16,16", "--seed", "1", "--epochs", "20", "--out", &p("plain")]));
    cli(&base(&["freeze-batch", "--data", &p("bn/dataset.csv"), "--model", &model, "--seed", "2", "--out", &p("batch")]));
    cli(&base(&[
        "enumerate", "--model", &model, "--mode", &frozen, "--window", "0.5,0.5,1.5",
        "--csv", &p("enum/regions.csv"), "--svg", &p("enum/partition.svg"),
    ]));
    cli(&base(&["offsets", "--model", &model, "--data", &p("bn/dataset.csv"), "--mode", &frozen, "--out", &p("offsets")]));
    cli(&base(&["decision-map", "--model", &model, "--mode", &frozen, "--window", "0.5,0.5,1.5", "--out", &p("decision")]));
    cli(&base(&[
        "diagnose", "--bn-model", &model, "--nonbn-model", &p("plain/checkpoint_e0020.json"),
        "--data", &p("bn/dataset.csv"), "--batches", "5", "--out", &p("diag"),
    ]));
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn criterion_determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path(), 1);
    pipeline(b.path(), 4);
    let fa = files_under(a.path());
    let fb = files_under(b.path());
    let differing: Vec<String> = fa
        .iter()
        .filter(|f| std::fs::read(a.path().join(f)).ok() != std::fs::read(b.path().join(f)).ok())
        .map(|f| f.display().to_string())
        .collect();
    outcome(
        fa == fb && differing.is_empty() && !fa.is_empty(),
        format!(
            "{} files from train, freeze-batch, enumerate, offsets, decision-map, diagnose; \
             same file set: {}; differing bytes: [{}]",
            fa.len(),
            fa == fb,
            differing.join(", ")
        ),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut report = |name: &'static str, o: Outcome| {
        println!("[{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((name, o));
    };
    report("1 arrangement counts match enumeration", criterion_selftest());
    let trained = train_all();
    report("2 geometry identities", criterion_identities(&trained));
    report("3 gradients", criterion_gradients());
    report("4 single-layer local counts", criterion_table1(&trained));
    report("5 deep local counts", criterion_table2(&trained));
    report("6 pullback counts", criterion_pullback(&trained));
    report("7 offset diagnostics", criterion_offsets(&trained));
    report("8 enumeration self-consistency", criterion_consistency(&trained));
    report("9 end-to-end determinism", criterion_determinism());
    let passed = results.iter().filter(|r| r.1.pass).count();
    println!("acceptance: {passed}/{} criteria passed in {:.0}s", results.len(), start.elapsed().as_secs_f64());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
