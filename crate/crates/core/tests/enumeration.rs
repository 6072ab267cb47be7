mod common;

use std::collections::BTreeSet;

use bngeom_core::arrangement::{arrangement_network, generate_valid_arrangement, ArrangementKind};
use bngeom_core::batchnorm::{batch_content_id, freeze_batch};
use bngeom_core::decision::decision_regions;
use bngeom_core::enumerate::{enumerate_regions, self_check};
use bngeom_core::{ActivationPattern, CpaActivation, Mode, Network, Window};
use common::{random_net, random_points, rng};
use ndarray::{arr1, Array1};

fn window(x: f64, y: f64, r: f64) -> Window<f64> {
    Window::new(arr1(&[x, y]), r).unwrap()
}

fn max_abs_diff(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn cell_affine_maps_agree_with_forward_pass() {
    for (seed, act) in [(1, CpaActivation::relu()), (2, CpaActivation::hard_tanh())] {
        let net = random_net(&[6, 5], 3, false, act, seed);
        let e = enumerate_regions(&net, Mode::NoBn, &window(0.0, 0.0, 2.0)).unwrap();
        for cell in &e.cells {
            let c = cell.polygon.centroid();
            let x = arr1(&c);
            let f = net.eval(x.view(), Mode::NoBn).unwrap();
            assert!(max_abs_diff(&f, &cell.affine.apply(x.view())) < 1e-10);
            assert_eq!(net.activation_pattern(x.view(), Mode::NoBn).unwrap(), cell.pattern);
        }
    }
}

#[test]
fn network_is_continuous_at_shared_vertices() {
    let net = random_net(&[5, 5], 2, false, CpaActivation::relu(), 3);
    let e = enumerate_regions(&net, Mode::NoBn, &window(0.2, -0.1, 1.5)).unwrap();
    for cell in &e.cells {
        for v in cell.polygon.vertices() {
            let x = arr1(v);
            let here = cell.affine.apply(x.view());
            for other in e.cells.iter().filter(|o| o.polygon.contains(v, 1e-9)) {
                let there = other.affine.apply(x.view());
                assert!(max_abs_diff(&here, &there) < 1e-8, "jump at {v:?}");
            }
        }
    }
}

#[test]
fn dense_grid_never_finds_more_patterns_than_cells() {
    let net = random_net(&[8], 2, false, CpaActivation::relu(), 4);
    let w = window(0.0, 0.0, 1.0);
    let e = enumerate_regions(&net, Mode::NoBn, &w).unwrap();
    let cells: BTreeSet<ActivationPattern> = e.cells.iter().map(|c| c.pattern.clone()).collect();
    assert_eq!(cells.len(), e.count());
    let n = 300;
    let mut seen = BTreeSet::new();
    for i in 0..n {
        for j in 0..n {
            let x = arr1(&[-1.0 + 2.0 * (i as f64 + 0.5) / n as f64, -1.0 + 2.0 * (j as f64 + 0.5) / n as f64]);
            seen.insert(net.activation_pattern(x.view(), Mode::NoBn).unwrap());
        }
    }
    assert!(seen.is_subset(&cells));
    // every cell large enough to hold a grid point is hit
    let cell_area = (2.0 / n as f64).powi(2);
    for c in &e.cells {
        if c.polygon.area() > 50.0 * cell_area {
            assert!(seen.contains(&c.pattern));
        }
    }
}

#[test]
fn counts_grow_with_nested_windows() {
    let net = random_net(&[10, 6], 2, false, CpaActivation::relu(), 5);
    let mut last = 0;
    for r in [0.1, 0.3, 0.7, 1.2, 2.0, 3.5] {
        let n = enumerate_regions(&net, Mode::NoBn, &window(0.3, 0.1, r)).unwrap().count();
        assert!(n >= last, "radius {r}: {n} < {last}");
        last = n;
    }
}

#[test]
fn single_layer_count_equals_closed_form_on_valid_arrangements() {
    let mut r = rng(6);
    for (kind, expect) in [
        (ArrangementKind::Simple(5), 16usize),
        (ArrangementKind::ParallelFamilies(vec![2, 3]), 12),
        (ArrangementKind::ParallelFamilies(vec![1, 2, 2]), 14),
    ] {
        let w = window(0.0, 0.0, 2.0);
        let g = generate_valid_arrangement(&kind, &w, 0.01, &mut r).unwrap();
        let lines: Vec<_> = g.lines().cloned().collect();
        let net = arrangement_network(&lines).unwrap();
        let n = enumerate_regions(&net, Mode::NoBn, &w).unwrap().count();
        assert_eq!(n, expect, "{kind:?}");
    }
}

#[test]
fn running_statistics_equal_to_a_frozen_batch_give_the_same_partition() {
    let mut net = random_net(&[6, 6], 2, true, CpaActivation::relu(), 7);
    let batch = random_points(64, -1.0, 1.0, 70);
    let frozen = freeze_batch(&net, batch.view(), batch_content_id(batch.view())).unwrap();
    for (l, block) in net.blocks_mut().iter_mut().enumerate() {
        let s = frozen.stats(l).unwrap();
        let slot = block.bn.as_mut().unwrap();
        slot.running_mean.assign(&s.mean);
        slot.running_var.assign(&s.var);
    }
    let w = window(0.0, 0.0, 1.5);
    let a = enumerate_regions(&net, Mode::BnEval, &w).unwrap();
    let b = enumerate_regions(&net, Mode::BnFrozen(&frozen), &w).unwrap();
    assert_eq!(a.count(), b.count());
    for (x, y) in a.cells.iter().zip(&b.cells) {
        assert_eq!(x.pattern, y.pattern);
        assert!((x.polygon.area() - y.polygon.area()).abs() < 1e-10);
    }
}

#[test]
fn freezing_does_not_depend_on_row_order() {
    let net = random_net(&[5, 4], 2, true, CpaActivation::relu(), 8);
    let batch = random_points(40, -2.0, 2.0, 80);
    let mut rows: Vec<usize> = (0..40).collect();
    rows.reverse();
    rows.swap(3, 17);
    let shuffled = batch.select(ndarray::Axis(0), &rows);
    let a = freeze_batch(&net, batch.view(), "a").unwrap();
    let b = freeze_batch(&net, shuffled.view(), "a").unwrap();
    assert_eq!(a, b);
}

#[test]
fn self_check_passes_on_bn_networks() {
    let net = random_net(&[8, 8], 3, true, CpaActivation::relu(), 9);
    let batch = random_points(64, -1.0, 1.0, 90);
    let frozen = freeze_batch(&net, batch.view(), "b").unwrap();
    let mode = Mode::BnFrozen(&frozen);
    let e = enumerate_regions(&net, mode, &window(0.0, 0.0, 1.0)).unwrap();
    let check = self_check(&net, mode, &e, 5, 1).unwrap();
    assert!(check.passes(1e-6, 1e-8), "{check:?}");
}

fn argmax_with_margin(logits: &Array1<f64>) -> (usize, f64) {
    let mut idx: Vec<usize> = (0..logits.len()).collect();
    idx.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]));
    (idx[0], logits[idx[0]] - logits[idx[1]])
}

fn decision_grid_oracle(net: &Network<f64>, seed: u64) {
    let w = window(0.0, 0.0, 1.5);
    let e = enumerate_regions(net, Mode::NoBn, &w).unwrap();
    let map = decision_regions(&e.cells).unwrap();
    let total: f64 = map.label_areas().iter().sum();
    assert!((total - 9.0).abs() < 1e-9);
    let pts = random_points(10_000, -1.5, 1.5, seed);
    let mut checked = 0;
    for p in pts.rows() {
        let (label, margin) = argmax_with_margin(&net.eval(p, Mode::NoBn).unwrap());
        if margin < 1e-9 {
            continue;
        }
        assert_eq!(map.label_at(&[p[0], p[1]], 1e-12), Some(label), "at {p}");
        checked += 1;
    }
    assert!(checked > 9_900);
}

#[test]
fn decision_map_matches_pointwise_argmax() {
    decision_grid_oracle(&random_net(&[6, 6], 3, false, CpaActivation::relu(), 10), 100);
    decision_grid_oracle(&random_net(&[8], 2, false, CpaActivation::hard_tanh(), 11), 110);
}

#[test]
fn single_precision_instantiation_finds_the_same_regions() {
    let net = random_net(&[6, 4], 2, false, CpaActivation::relu(), 12);
    let small: Network<f32> = net.cast();
    let a = enumerate_regions(&net, Mode::NoBn, &window(0.0, 0.0, 1.0)).unwrap();
    let w32 = Window::new(ndarray::arr1(&[0.0f32, 0.0]), 1.0).unwrap();
    let b = enumerate_regions(&small, Mode::NoBn, &w32).unwrap();
    assert_eq!(a.count(), b.count());
    let area: f32 = b.cells.iter().map(|c| c.polygon.area()).sum();
    assert!((area - 4.0).abs() < 1e-4);
}
