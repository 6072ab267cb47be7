use std::path::{Path, PathBuf};

use bngeom_core::batchnorm::{batch_content_id, freeze_batch};
use bngeom_core::decision::decision_regions;
use bngeom_core::enumerate::{argmax, density_profile, enumerate_on_slice, self_check, Enumeration, SliceMap};
use bngeom_core::io::{fmt_f64, Table};
use bngeom_core::svg::{render, Fill};
use bngeom_core::{ConvexPolygon, Network, Window};
use bngeom_train::{train, DatasetKind, TrainConfig};
use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::args::{DecisionArgs, DensityArgs, EnumerateArgs, FreezeBatchArgs, TrainArgs};
use crate::common::{load_checkpoint, load_dataset, ResolvedMode, SliceSpec, WindowSpec};
use crate::error::{CliError, Result};
use crate::manifest::{ExperimentManifest, Output};
use crate::protocol::{parse_activation, AFFINE_TOL, AREA_TOL};
use crate::Summary;

const SVG_SIZE: u32 = 800;

pub fn train_cmd(a: &TrainArgs) -> Result<Summary> {
    let kind: DatasetKind = a.dataset.parse()?;
    let data = kind.generate(a.protocol.n, a.seed)?;
    let checkpoint_epochs = if a.checkpoint_epochs.is_empty() {
        vec![a.protocol.epochs]
    } else {
        a.checkpoint_epochs.clone()
    };
    if let Some(&e) = checkpoint_epochs.iter().find(|&&e| e > a.protocol.epochs) {
        return Err(CliError::Usage(format!("checkpoint epoch {e} exceeds --epochs {}", a.protocol.epochs)));
    }
    let config = TrainConfig {
        widths: a.widths.clone(),
        use_bn: a.bn,
        epochs: a.protocol.epochs,
        lr: a.protocol.lr,
        batch_size: a.protocol.batch,
        seed: a.seed,
        checkpoint_epochs,
        activation: parse_activation(&a.protocol.activation)?,
        ..TrainConfig::default()
    };
    let manifest = ExperimentManifest::new("train", a, vec![a.seed])?;
    let res = train(&data, &config)?;
    let mut out = Output::new(manifest);
    out.table(&a.out.join("dataset.csv"), &data.to_table())?;
    let mut metrics = Table::new(["epoch", "loss", "train_acc", "val_acc"]);
    for m in &res.metrics {
        metrics.push(vec![m.epoch.to_string(), fmt_f64(m.loss), fmt_f64(m.train_acc), fmt_f64(m.val_acc)]);
    }
    out.table(&a.out.join("metrics.csv"), &metrics)?;
    for c in &res.checkpoints {
        out.checkpoint(&a.out.join(format!("checkpoint_e{:04}.json", c.meta.epoch)), c)?;
    }
    let last = res.metrics.last().expect("epoch 0 metrics");
    let files = out.finish(&a.out.join("manifest.json"))?;
    Ok(Summary {
        files,
        message: format!(
            "trained {} {:?} bn={} for {} epochs: train acc {:.4}, val acc {:.4}",
            kind, a.widths, a.bn, a.protocol.epochs, last.train_acc, last.val_acc
        ),
    })
}

pub fn freeze_batch_cmd(a: &FreezeBatchArgs) -> Result<Summary> {
    let mut manifest = ExperimentManifest::new("freeze-batch", a, vec![a.seed])?;
    let data = load_dataset(&a.data, "data", &mut manifest)?;
    if a.size == 0 || a.size > data.len() {
        return Err(CliError::Usage(format!("--size must be in 1..={}", data.len())));
    }
    let ckpt = match &a.model {
        Some(p) => Some(load_checkpoint(p, "model", &mut manifest)?),
        None => None,
    };
    let batch = data.sample_rows(a.size, &mut ChaCha8Rng::seed_from_u64(a.seed));
    let id = batch_content_id(batch.view());
    let mut out = Output::new(manifest);
    out.matrix(&a.out.join("batch.csv"), &batch)?;
    if let Some(c) = ckpt {
        let frozen = freeze_batch(&c.net, batch.view(), id.clone())?;
        let mut t = Table::new(["batch_id", "layer", "neuron", "mean", "var"]);
        for (l, fl) in frozen.layers.iter().enumerate() {
            if let Some(s) = &fl.stats {
                for j in 0..s.mean.len() {
                    t.push(vec![id.clone(), (l + 1).to_string(), j.to_string(), fmt_f64(s.mean[j]), fmt_f64(s.var[j])]);
                }
            }
        }
        out.table(&a.out.join("frozen_stats.csv"), &t)?;
    }
    let files = out.finish(&a.out.join("manifest.json"))?;
    Ok(Summary {
        files,
        message: format!("reference batch {id} ({} rows)", a.size),
    })
}

fn slice_for(spec: &Option<SliceSpec>, net: &Network<f64>) -> Result<SliceMap<f64>> {
    match spec {
        Some(s) => s.slice_map(),
        None if net.input_dim() == 2 => Ok(SliceMap::identity()),
        None => Err(CliError::Usage(format!(
            "network input is {}-dimensional; pass --slice",
            net.input_dim()
        ))),
    }
}

fn window_of(w: &WindowSpec) -> Window<f64> {
    w.window()
}

fn bounds(w: &WindowSpec) -> ([f64; 2], [f64; 2]) {
    let [x, y] = w.center;
    ([x - w.radius, y - w.radius], [x + w.radius, y + w.radius])
}

fn vertex_list(p: &ConvexPolygon<f64>) -> String {
    p.vertices()
        .iter()
        .map(|v| format!("{} {}", fmt_f64(v[0]), fmt_f64(v[1])))
        .collect::<Vec<_>>()
        .join(";")
}

fn cell_label(e: &Enumeration<f64>, i: usize) -> usize {
    let c = e.cells[i].polygon.centroid();
    let logits = e.cells[i].affine.apply(Array1::from(vec![c[0], c[1]]).view());
    argmax(logits.view())
}

/// Regions CSV: one row per cell.
pub fn regions_table(e: &Enumeration<f64>) -> Table {
    let mut t = Table::new(["cell_id", "vertices", "pattern_hash", "label", "area", "on_boundary"]);
    for (i, c) in e.cells.iter().enumerate() {
        t.push(vec![
            i.to_string(),
            vertex_list(&c.polygon),
            c.pattern.hash_hex(),
            cell_label(e, i).to_string(),
            fmt_f64(c.polygon.area()),
            c.on_boundary.to_string(),
        ]);
    }
    t
}

/// Partition SVG; with `classes` the cells are colored by predicted label.
pub fn partition_svg(e: &Enumeration<f64>, w: &WindowSpec, classes: bool) -> String {
    let polys: Vec<(&ConvexPolygon<f64>, Fill)> = e
        .cells
        .iter()
        .enumerate()
        .map(|(i, c)| (&c.polygon, if classes { Fill::Class(cell_label(e, i)) } else { Fill::Cell(i) }))
        .collect();
    render(&polys, bounds(w), &[], SVG_SIZE)
}

pub fn enumerate_cmd(a: &EnumerateArgs) -> Result<Summary> {
    let mut manifest = ExperimentManifest::new("enumerate", a, vec![a.seed])?;
    let ckpt = load_checkpoint(&a.model, "model", &mut manifest)?;
    let net = &ckpt.net;
    let mode = a.mode.resolve(net, &mut manifest)?;
    let slice = slice_for(&a.slice, net)?;
    let e = enumerate_on_slice(net, mode.mode(), &slice, &window_of(&a.window))?;
    let check = self_check(net, mode.mode(), &e, a.check_samples, a.seed)?;
    let mut out = Output::new(manifest);
    if let Some(p) = &a.csv {
        out.table(p, &regions_table(&e))?;
    }
    if let Some(p) = &a.svg {
        out.svg(p, &partition_svg(&e, &a.window, a.classes))?;
    }
    let anchor: Option<&PathBuf> = a.csv.as_ref().or(a.svg.as_ref());
    let files = match anchor {
        Some(p) => out.finish(&manifest_beside(p))?,
        None => Vec::new(),
    };
    verify(&check)?;
    Ok(Summary {
        files,
        message: format!(
            "{} regions ({} sliver splits suppressed, batch {})",
            e.count(),
            e.sliver_merges,
            display_batch(&mode)
        ),
    })
}

fn display_batch(m: &ResolvedMode) -> &str {
    match m.batch_id() {
        "" => "-",
        id => id,
    }
}

fn manifest_beside(p: &Path) -> PathBuf {
    let mut name = p.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    p.with_file_name(name)
}

/// Fails with the name of the first violated enumeration invariant.
pub fn verify(check: &bngeom_core::enumerate::SelfCheck) -> Result<()> {
    if check.area_rel_error > AREA_TOL {
        return Err(CliError::Numerical(format!(
            "area conservation violated: relative error {:e} > {AREA_TOL:e}",
            check.area_rel_error
        )));
    }
    if check.impure_cells > 0 {
        return Err(CliError::Numerical(format!(
            "pattern purity violated in {} cells",
            check.impure_cells
        )));
    }
    if check.max_affine_error > AFFINE_TOL {
        return Err(CliError::Numerical(format!(
            "affine/forward agreement violated: error {:e} > {AFFINE_TOL:e}",
            check.max_affine_error
        )));
    }
    if check.duplicate_patterns > 0 {
        return Err(CliError::Numerical(format!(
            "pattern uniqueness violated: {} duplicated patterns",
            check.duplicate_patterns
        )));
    }
    Ok(())
}

pub fn decision_map_cmd(a: &DecisionArgs) -> Result<Summary> {
    let mut manifest = ExperimentManifest::new("decision-map", a, Vec::new())?;
    let ckpt = load_checkpoint(&a.model, "model", &mut manifest)?;
    let net = &ckpt.net;
    let mode = a.mode.resolve(net, &mut manifest)?;
    let slice = slice_for(&a.slice, net)?;
    let e = enumerate_on_slice(net, mode.mode(), &slice, &window_of(&a.window))?;
    let check = self_check(net, mode.mode(), &e, 5, 0)?;
    let map = decision_regions(&e.cells)?;

    let mut cells = Table::new(["piece_id", "cell_id", "label", "area", "vertices"]);
    for (i, c) in map.cells.iter().enumerate() {
        cells.push(vec![
            i.to_string(),
            c.cell.to_string(),
            c.label.to_string(),
            fmt_f64(c.polygon.area()),
            vertex_list(&c.polygon),
        ]);
    }
    let mut boundary = Table::new(["x1", "y1", "x2", "y2", "length"]);
    let mut length = 0.0;
    for (p, q) in &map.boundary {
        let l = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
        length += l;
        boundary.push(vec![fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(q[0]), fmt_f64(q[1]), fmt_f64(l)]);
    }
    let mut areas = Table::new(["label", "area"]);
    for (k, v) in map.label_areas().iter().enumerate() {
        areas.push(vec![k.to_string(), fmt_f64(*v)]);
    }
    let polys: Vec<(&ConvexPolygon<f64>, Fill)> = map.cells.iter().map(|c| (&c.polygon, Fill::Class(c.label))).collect();
    let svg = render(&polys, bounds(&a.window), &map.boundary, SVG_SIZE);

    let mut out = Output::new(manifest);
    out.table(&a.out.join("regions.csv"), &regions_table(&e))?;
    out.table(&a.out.join("decision.csv"), &cells)?;
    out.table(&a.out.join("boundary.csv"), &boundary)?;
    out.table(&a.out.join("label_areas.csv"), &areas)?;
    out.svg(&a.out.join("decision.svg"), &svg)?;
    out.svg(&a.out.join("partition.svg"), &partition_svg(&e, &a.window, false))?;
    let files = out.finish(&a.out.join("manifest.json"))?;
    verify(&check)?;
    Ok(Summary {
        files,
        message: format!(
            "{} regions, {} decision pieces, boundary length {:.6}, {} tied cells",
            e.count(),
            map.cells.len(),
            length,
            map.ties
        ),
    })
}

pub fn density_profile_cmd(a: &DensityArgs) -> Result<Summary> {
    let mut manifest = ExperimentManifest::new("density-profile", a, Vec::new())?;
    let ckpt = load_checkpoint(&a.model, "model", &mut manifest)?;
    let net = &ckpt.net;
    let mode = a.mode.resolve(net, &mut manifest)?;
    let data = match &a.data {
        Some(p) => Some(load_dataset(p, "data", &mut manifest)?),
        None => None,
    };
    let need_data = || {
        data.as_ref()
            .ok_or_else(|| CliError::Usage(format!("--centers {} needs --data", a.centers)))
    };
    let (names, centers, weights): (Vec<String>, Vec<Array1<f64>>, Option<Vec<f64>>) = match a.centers.as_str() {
        "data" => (vec!["data".into()], vec![need_data()?.centroid()], None),
        "classes" => {
            let mut names = Vec::new();
            let mut cs = Vec::new();
            let mut ws = Vec::new();
            for (k, c) in need_data()?.class_centroids().into_iter().enumerate() {
                if let Some((x, w)) = c {
                    names.push(format!("class{k}"));
                    cs.push(x);
                    ws.push(w);
                }
            }
            (names, cs, Some(ws))
        }
        other => {
            let v: Vec<f64> = other
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| CliError::Usage(format!("--centers {other:?} is not data, classes or x,y")))?;
            if v.len() != 2 {
                return Err(CliError::Usage("--centers point must be x,y".into()));
            }
            (vec!["point".into()], vec![Array1::from(v)], None)
        }
    };
    let profile = density_profile(net, mode.mode(), &centers, &a.radii, weights.as_deref())?;
    let mut t = Table::new(["center", "cx", "cy", "weight", "radius", "count", "density"]);
    for (ci, name) in names.iter().enumerate() {
        for (ri, r) in profile.radii.iter().enumerate() {
            t.push(vec![
                name.clone(),
                fmt_f64(centers[ci][0]),
                fmt_f64(centers[ci][1]),
                weights.as_ref().map_or(String::new(), |w| fmt_f64(w[ci])),
                fmt_f64(*r),
                profile.counts[ci][ri].to_string(),
                fmt_f64(profile.densities[ci][ri]),
            ]);
        }
    }
    if let Some(agg) = &profile.aggregate {
        for (ri, r) in profile.radii.iter().enumerate() {
            t.push(vec![
                "aggregate".into(),
                String::new(),
                String::new(),
                String::new(),
                fmt_f64(*r),
                String::new(),
                fmt_f64(agg[ri]),
            ]);
        }
    }
    let mut out = Output::new(manifest);
    out.table(&a.out.join("density.csv"), &t)?;
    let files = out.finish(&a.out.join("manifest.json"))?;
    Ok(Summary {
        files,
        message: format!("density profile over {} centers and {} radii", centers.len(), a.radii.len()),
    })
}
