mod common;

use bngeom_core::batchnorm::freeze_batch;
use bngeom_core::diagnostics::bias_shift_test;
use bngeom_core::hyperplane::{layer_hyperplanes, layer_offsets, window_cut};
use bngeom_core::pullback::{pullback_check, PullbackConfig};
use bngeom_core::{Boundary, CpaActivation, Error, Mode, Window};
use common::{random_net, random_points};
use ndarray::arr1;

#[test]
fn frozen_offsets_ignore_hidden_bias_shifts() {
    let net = random_net(&[6, 6, 4], 2, true, CpaActivation::relu(), 20);
    let batch = random_points(64, -1.0, 1.0, 21);
    for c in [-10.0, -1.0, -0.1, 0.1, 1.0, 10.0] {
        for row in bias_shift_test(&net, batch.view(), c).unwrap() {
            assert!(row.bn_change < 1e-12 && row.bn_level_change < 1e-12, "{row:?}");
            // the baseline numerator moves by at most |c|
            assert!(row.baseline_numerator_change.abs() <= c.abs() + 1e-12);
        }
    }
}

#[test]
fn baseline_offsets_do_move_under_bias_shifts() {
    let net = random_net(&[6], 2, true, CpaActivation::relu(), 22);
    let batch = random_points(64, -1.0, 1.0, 23);
    let rows = bias_shift_test(&net, batch.view(), 1.0).unwrap();
    assert!(rows.iter().any(|r| r.baseline_change.abs() > 1e-3));
}

#[test]
fn offset_records_agree_with_hyperplane_cut_test() {
    let net = random_net(&[7, 5], 2, true, CpaActivation::hard_tanh(), 24);
    let batch = random_points(32, -1.0, 1.0, 25);
    let frozen = freeze_batch(&net, batch.view(), "x").unwrap();
    let mode = Mode::BnFrozen(&frozen);
    for l in 0..net.num_hidden() {
        let center = frozen.input_centroid(l).unwrap().clone();
        let offsets = layer_offsets(&net, l, mode, center.view()).unwrap();
        let planes = layer_hyperplanes(&net, l, mode).unwrap();
        assert_eq!(offsets.len(), planes.len());
        for r in [0.05, 0.2, 0.5, 1.0, 3.0] {
            let win = Window::new(center.clone(), r).unwrap();
            for (o, (_, _, h)) in offsets.iter().zip(&planes) {
                if (o.delta - r).abs() < 1e-9 {
                    continue;
                }
                assert_eq!(o.cuts(r), window_cut(h, &win, Boundary::Open));
            }
        }
    }
}

#[test]
fn pullback_counts_agree_inside_parent_regions() {
    let net = random_net(&[6, 6, 6], 2, false, CpaActivation::relu(), 26);
    let config = PullbackConfig::default();
    let anchors = random_points(30, -1.0, 1.0, 27);
    let mut checked = 0;
    for a in anchors.rows() {
        let anchor = a.to_owned();
        let mut r = 0.5;
        for _ in 0..12 {
            match pullback_check(&net, Mode::NoBn, 2, &anchor, r, &config) {
                Ok(rep) => {
                    assert!(rep.counts_equal, "{rep:?}");
                    assert_eq!(rep.rank, 2);
                    checked += 1;
                    break;
                }
                Err(Error::WindowNotContained { .. }) => r *= 0.5,
                Err(Error::RankDeficient { .. } | Error::BreakpointHit { .. }) => break,
                Err(e) => panic!("{e}"),
            }
        }
    }
    assert!(checked >= 10);
}

#[test]
fn width_one_parent_layer_is_rank_deficient() {
    let net = random_net(&[1, 4], 2, false, CpaActivation::leaky_relu(0.1), 28);
    let err = pullback_check(&net, Mode::NoBn, 2, &arr1(&[0.1, 0.2]), 0.01, &PullbackConfig::default());
    assert!(matches!(err, Err(Error::RankDeficient { .. })), "{err:?}");
}
