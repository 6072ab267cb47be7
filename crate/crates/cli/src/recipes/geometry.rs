use bngeom_core::arrangement::{arrangement_network, enumerate_arrangement, generate_valid_arrangement, ArrangementKind};
use bngeom_core::enumerate::enumerate_regions;
use bngeom_core::io::{fmt_f64, Table};
use bngeom_core::pullback::{parent_region_conditioning, pullback_check, ConditioningStats, PullbackConfig, PullbackReport};
use bngeom_core::{Error as CoreError, Hyperplane, Mode, Network, Window};
use ndarray::{array, Array1, Array2};
use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::args::{PullbackArgs, SelftestArgs};
use crate::common::{layer_list, load_checkpoint, load_dataset};
use crate::error::{CliError, Result};
use crate::manifest::{ExperimentManifest, Output};
use crate::Summary;

#[derive(Debug, Clone)]
pub struct SelftestRow {
    pub id: usize,
    pub kind: ArrangementKind,
    pub formula: BigUint,
    /// Regions of the one-neuron-per-line network in the window.
    pub enumerated: usize,
    /// Regions found by splitting the window polygon line by line.
    pub polygon: usize,
    pub valid: bool,
    pub eta: f64,
}

impl SelftestRow {
    pub fn matches(&self) -> bool {
        self.formula == BigUint::from(self.enumerated) && self.enumerated == self.polygon
    }
}

/// Even instances are simple arrangements of 1..=12 lines, odd ones are
/// 1..=4 parallel families of 1..=4 lines each; windows are random.
pub fn arrangement_selftest(seed: u64, instances: usize, min_eta: f64) -> Result<Vec<SelftestRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(instances);
    for id in 0..instances {
        let kind = if id % 2 == 0 {
            ArrangementKind::Simple(rng.random_range(1..=12))
        } else {
            let n = rng.random_range(1..=4);
            ArrangementKind::ParallelFamilies((0..n).map(|_| rng.random_range(1..=4)).collect())
        };
        let center = array![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let window = Window::new(center, rng.random_range(0.5..3.0))?;
        let arr = generate_valid_arrangement(&kind, &window, min_eta, &mut rng)?;
        let lines: Vec<Hyperplane<f64>> = arr.lines().cloned().collect();
        let net = arrangement_network(&lines)?;
        let enumerated = enumerate_regions(&net, Mode::NoBn, &window)?.count();
        rows.push(SelftestRow {
            id,
            formula: kind.formula_count(),
            kind,
            enumerated,
            polygon: enumerate_arrangement(&lines, &window),
            valid: arr.report.overall_valid,
            eta: arr.report.eta,
        });
    }
    Ok(rows)
}

pub fn selftest_cmd(a: &SelftestArgs) -> Result<Summary> {
    if !(a.min_eta >= 0.0 && a.min_eta < 1.0) {
        return Err(CliError::Usage("--min-eta must be in [0,1)".into()));
    }
    let manifest = ExperimentManifest::new("arrangement-selftest", a, vec![a.seed])?;
    let rows = arrangement_selftest(a.seed, a.instances, a.min_eta)?;
    let mut t = Table::new([
        "instance_id",
        "kind",
        "m_vec",
        "formula_count",
        "enumerated_count",
        "valid",
        "eta",
        "polygon_count",
        "match",
    ]);
    for r in &rows {
        let m: Vec<String> = r.kind.family_sizes().iter().map(|s| s.to_string()).collect();
        t.push(vec![
            r.id.to_string(),
            r.kind.name().into(),
            m.join(" "),
            r.formula.to_string(),
            r.enumerated.to_string(),
            r.valid.to_string(),
            fmt_f64(r.eta),
            r.polygon.to_string(),
            r.matches().to_string(),
        ]);
    }
    let mut out = Output::new(manifest);
    out.table(&a.out.join("selftest.csv"), &t)?;
    let files = out.finish(&a.out.join("manifest.json"))?;
    let bad = rows.iter().filter(|r| !r.matches()).count();
    if bad > 0 {
        return Err(CliError::Numerical(format!(
            "formula/enumeration agreement violated on {bad} of {} instances",
            rows.len()
        )));
    }
    Ok(Summary {
        files,
        message: format!("{} arrangements, 0 formula/enumeration mismatches", rows.len()),
    })
}

/// A retained parent window.
#[derive(Debug, Clone)]
pub struct PullbackWindow {
    pub anchor: usize,
    pub radius: f64,
    pub report: PullbackReport,
}

/// Outcome of the window search for one layer.
#[derive(Debug, Clone, Default)]
pub struct PullbackSearch {
    pub retained: Vec<PullbackWindow>,
    /// Anchors whose parent prefix map lost rank.
    pub rank_deficient: usize,
    /// Anchors for which no radius gave enough in-region support.
    pub uncontained: usize,
    /// Anchors sitting exactly on a switching set.
    pub on_switching_set: usize,
}

/// For anchors taken from `points` in a seeded order, halves the radius
/// from `r0` until the window passes the support filter, and keeps the
/// first `want` windows of 1-based `layer`.
#[allow(clippy::too_many_arguments)]
pub fn pullback_search(
    net: &Network<f64>,
    mode: Mode<'_, f64>,
    points: &Array2<f64>,
    layer: usize,
    want: usize,
    r0: f64,
    halvings: usize,
    config: &PullbackConfig,
    seed: u64,
) -> Result<PullbackSearch> {
    let mut order: Vec<usize> = (0..points.nrows()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut s = PullbackSearch::default();
    'anchors: for i in order {
        if s.retained.len() >= want {
            break;
        }
        let anchor: Array1<f64> = points.row(i).to_owned();
        let mut r = r0;
        for _ in 0..=halvings {
            match pullback_check(net, mode, layer, &anchor, r, config) {
                Ok(report) => {
                    s.retained.push(PullbackWindow { anchor: i, radius: r, report });
                    continue 'anchors;
                }
                Err(CoreError::WindowNotContained { .. }) => r *= 0.5,
                Err(CoreError::RankDeficient { .. }) => {
                    s.rank_deficient += 1;
                    continue 'anchors;
                }
                Err(CoreError::BreakpointHit { .. }) => {
                    s.on_switching_set += 1;
                    continue 'anchors;
                }
                Err(e) => return Err(e.into()),
            }
        }
        s.uncontained += 1;
    }
    Ok(s)
}

pub fn pullback_cmd(a: &PullbackArgs) -> Result<Summary> {
    let mut manifest = ExperimentManifest::new("pullback-check", a, vec![a.seed])?;
    let ckpt = load_checkpoint(&a.model, "model", &mut manifest)?;
    let data = load_dataset(&a.data, "data", &mut manifest)?;
    let net = &ckpt.net;
    let mode = a.mode.resolve(net, &mut manifest)?;
    if net.num_hidden() < 2 {
        return Err(CliError::Usage("pullback checks need at least two hidden layers".into()));
    }
    let layers: Vec<usize> = if a.layers.is_empty() {
        (2..=net.num_hidden()).collect()
    } else {
        let l = layer_list(&a.layers, net)?.into_iter().map(|l| l + 1).collect::<Vec<_>>();
        if l.contains(&1) {
            return Err(CliError::Usage("layer 1 has no parent region; use layers >= 2".into()));
        }
        l
    };
    if !(a.radius > 0.0) || !(a.coverage > 0.0 && a.coverage <= 1.0) {
        return Err(CliError::Usage("--radius must be positive and --coverage in (0,1]".into()));
    }
    let config = PullbackConfig {
        grid: a.grid,
        coverage_threshold: a.coverage,
        jaccard: true,
    };
    let mut t = Table::new([
        "layer",
        "anchor",
        "radius",
        "parent_id",
        "rank",
        "sigma_min",
        "sigma_max",
        "coverage",
        "coverage_threshold",
        "input_count",
        "intrinsic_count",
        "counts_equal",
        "jacobian",
        "min_jaccard",
    ]);
    let mut searches = Table::new(["layer", "retained", "rank_deficient", "uncontained", "on_switching_set"]);
    let mut cond = Table::new(["depth", "points", "skipped", "drop_rank_ratio", "sigma_min_min"]);
    let mut mismatches = 0;
    let mut retained = 0;
    for &l in &layers {
        let s = pullback_search(net, mode.mode(), &data.x, l, a.windows, a.radius, a.halvings, &config, a.seed)?;
        for w in &s.retained {
            let r = &w.report;
            if !r.counts_equal {
                mismatches += 1;
            }
            t.push(vec![
                l.to_string(),
                w.anchor.to_string(),
                fmt_f64(w.radius),
                r.parent_id.clone(),
                r.rank.to_string(),
                fmt_f64(r.sigma_min),
                fmt_f64(r.sigma_max),
                fmt_f64(r.coverage),
                fmt_f64(r.coverage_threshold),
                r.input_count.to_string(),
                r.intrinsic_count.to_string(),
                r.counts_equal.to_string(),
                fmt_f64(r.jacobian),
                r.min_jaccard.map_or(String::new(), fmt_f64),
            ]);
        }
        retained += s.retained.len();
        searches.push(vec![
            l.to_string(),
            s.retained.len().to_string(),
            s.rank_deficient.to_string(),
            s.uncontained.to_string(),
            s.on_switching_set.to_string(),
        ]);
        let c: ConditioningStats = parent_region_conditioning(net, mode.mode(), &data.x, l - 1)?;
        cond.push(vec![
            (l - 1).to_string(),
            c.ranks.len().to_string(),
            c.skipped.to_string(),
            fmt_f64(c.drop_rank_ratio),
            c.sigma_min.iter().copied().reduce(f64::min).map_or(String::new(), fmt_f64),
        ]);
    }
    let mut out = Output::new(manifest);
    out.table(&a.out.join("pullback.csv"), &t)?;
    out.table(&a.out.join("search.csv"), &searches)?;
    out.table(&a.out.join("conditioning.csv"), &cond)?;
    let files = out.finish(&a.out.join("manifest.json"))?;
    if mismatches > 0 {
        return Err(CliError::Numerical(format!(
            "pullback count equality violated in {mismatches} of {retained} windows"
        )));
    }
    Ok(Summary {
        files,
        message: format!("{retained} retained windows over layers {layers:?}, all counts equal"),
    })
}
