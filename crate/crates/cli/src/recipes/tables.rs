use std::path::Path;

use bngeom_core::arrangement::region_count_simple;
use bngeom_core::io::{fmt_f64, Checkpoint, CheckpointMeta, Table};
use bngeom_train::DatasetKind;

use crate::args::{Table1Args, Table2Args};
use crate::error::{CliError, Result};
use crate::manifest::{ExperimentManifest, Output};
use crate::protocol::{parse_deep_config, run_jobs, summarize, CountRecord, MatchedPair, Protocol, SummaryRow};
use crate::recipes::basic::verify;
use crate::Summary;

fn widths_str(w: &[usize]) -> String {
    w.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("x")
}

pub fn runs_table(records: &[CountRecord]) -> Table {
    let mut t = Table::new([
        "dataset",
        "widths",
        "seed",
        "use_bn",
        "ref_batch",
        "batch_seed",
        "batch_id",
        "count",
        "sliver_merges",
        "train_acc",
        "val_acc",
        "area_rel_error",
        "impure_cells",
        "max_affine_error",
    ]);
    for r in records {
        t.push(vec![
            r.dataset.to_string(),
            widths_str(&r.widths),
            r.seed.to_string(),
            r.use_bn.to_string(),
            r.ref_batch.map_or(String::new(), |b| b.0.to_string()),
            r.ref_batch.map_or(String::new(), |b| b.1.to_string()),
            r.batch_id.clone(),
            r.count.to_string(),
            r.sliver_merges.to_string(),
            fmt_f64(r.train_acc),
            fmt_f64(r.val_acc),
            fmt_f64(r.check.area_rel_error),
            r.check.impure_cells.to_string(),
            fmt_f64(r.check.max_affine_error),
        ]);
    }
    t
}

pub fn summary_table(rows: &[SummaryRow]) -> Table {
    let mut t = Table::new([
        "dataset",
        "widths",
        "seeds",
        "nonbn_mean",
        "nonbn_std",
        "bn_mean",
        "bn_std",
        "gap",
        "ratio",
        "formula_max",
    ]);
    for r in rows {
        // a single ReLU layer of width h cuts the plane into at most R_2(h) regions
        let max = match r.widths.as_slice() {
            [h] => region_count_simple(*h as u64, 2).to_string(),
            _ => String::new(),
        };
        t.push(vec![
            r.dataset.to_string(),
            widths_str(&r.widths),
            r.seeds.to_string(),
            fmt_f64(r.nonbn_mean),
            fmt_f64(r.nonbn_std),
            fmt_f64(r.bn_mean),
            fmt_f64(r.bn_std),
            fmt_f64(r.gap()),
            fmt_f64(r.ratio()),
            max,
        ]);
    }
    t
}

fn save_pairs(out: &mut Output, dir: &Path, pairs: &[MatchedPair], p: &Protocol) -> Result<()> {
    for pair in pairs {
        for (tag, net, use_bn) in [("nonbn", &pair.nonbn, false), ("bn", &pair.bn, true)] {
            let ckpt = Checkpoint {
                meta: CheckpointMeta {
                    seed: pair.seed,
                    epoch: p.epochs,
                    dataset: pair.kind.to_string(),
                    widths: pair.widths.clone(),
                    use_bn,
                    manifest: None,
                },
                net: net.clone(),
            };
            let name = format!("{}_{}_s{}_{tag}.json", pair.kind, widths_str(&pair.widths), pair.seed);
            out.checkpoint(&dir.join("checkpoints").join(name), &ckpt)?;
        }
    }
    Ok(())
}

fn check_all(records: &[CountRecord]) -> Result<()> {
    for r in records {
        verify(&r.check).map_err(|e| {
            CliError::Numerical(format!("{} {:?} seed {} bn={}: {e}", r.dataset, r.widths, r.seed, r.use_bn))
        })?;
    }
    Ok(())
}

fn finish_tables(
    out: &mut Output,
    dir: &Path,
    prefix: &str,
    records: &[CountRecord],
) -> Result<Vec<SummaryRow>> {
    let rows = summarize(records);
    out.table(&dir.join(format!("{prefix}_runs.csv")), &runs_table(records))?;
    out.table(&dir.join(format!("{prefix}_summary.csv")), &summary_table(&rows))?;
    Ok(rows)
}

fn describe(rows: &[SummaryRow]) -> String {
    rows.iter()
        .map(|r| {
            format!(
                "{} {}: non-BN {:.1} ± {:.1}, BN {:.1} ± {:.1}",
                r.dataset,
                widths_str(&r.widths),
                r.nonbn_mean,
                r.nonbn_std,
                r.bn_mean,
                r.bn_std
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn table1_cmd(a: &Table1Args) -> Result<Summary> {
    let kinds: Vec<DatasetKind> = if a.dataset.is_empty() {
        DatasetKind::ALL.to_vec()
    } else {
        a.dataset.iter().map(|d| d.parse()).collect::<bngeom_train::Result<_>>()?
    };
    if a.width.is_empty() || a.width.contains(&0) || a.seeds == 0 {
        return Err(CliError::Usage("--width entries and --seeds must be positive".into()));
    }
    let p = Protocol::from_args(&a.protocol, a.ref_batches)?;
    let manifest = ExperimentManifest::new("reproduce-table1", a, (0..a.seeds).collect())?;
    let jobs: Vec<(DatasetKind, Vec<usize>)> = kinds
        .iter()
        .flat_map(|&k| a.width.iter().map(move |&w| (k, vec![w])))
        .collect();
    let (pairs, records) = run_jobs(&jobs, a.seeds, &p)?;
    let mut out = Output::new(manifest);
    let rows = finish_tables(&mut out, &a.out, "table1", &records)?;
    if a.save_checkpoints {
        save_pairs(&mut out, &a.out, &pairs, &p)?;
    }
    let files = out.finish(&a.out.join("manifest.json"))?;
    check_all(&records)?;
    Ok(Summary {
        files,
        message: describe(&rows),
    })
}

pub fn table2_cmd(a: &Table2Args) -> Result<Summary> {
    let jobs = a
        .configs
        .iter()
        .map(|c| parse_deep_config(c))
        .collect::<Result<Vec<_>>>()?;
    if a.seeds == 0 {
        return Err(CliError::Usage("--seeds must be positive".into()));
    }
    let p = Protocol::from_args(&a.protocol, a.ref_batches)?;
    let manifest = ExperimentManifest::new("reproduce-table2", a, (0..a.seeds).collect())?;
    let (pairs, records) = run_jobs(&jobs, a.seeds, &p)?;
    let mut out = Output::new(manifest);
    let rows = finish_tables(&mut out, &a.out, "table2", &records)?;
    if a.save_checkpoints {
        save_pairs(&mut out, &a.out, &pairs, &p)?;
    }
    let files = out.finish(&a.out.join("manifest.json"))?;
    check_all(&records)?;
    Ok(Summary {
        files,
        message: describe(&rows),
    })
}
