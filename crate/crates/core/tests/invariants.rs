use bngeom_core::arrangement::{region_count_parallel, region_count_simple};
use bngeom_core::diagnostics::{cut_rate_at_quantile, ecdf_compare};
use bngeom_core::hyperplane::window_cut;
use bngeom_core::polygon::{ConvexPolygon, LineFn, Split};
use bngeom_core::{Boundary, Hyperplane, Window};
use ndarray::Array1;
use proptest::prelude::*;

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..10.0, 1..60)
}

fn grid(a: &[f64], b: &[f64]) -> Vec<f64> {
    let hi = a.iter().chain(b).cloned().fold(0.0, f64::max);
    (0..=200).map(|i| hi * i as f64 / 200.0).collect()
}

proptest! {
    #[test]
    fn ecdf_of_identical_samples_is_flat(a in sample()) {
        let s = ecdf_compare(&a, &a, &grid(&a, &a)).unwrap();
        prop_assert_eq!(s.d_plus, 0.0);
        prop_assert_eq!(s.w1, 0.0);
    }

    #[test]
    fn d_plus_is_a_probability_difference(a in sample(), b in sample()) {
        let s = ecdf_compare(&a, &b, &grid(&a, &b)).unwrap();
        prop_assert!((-1.0..=1.0).contains(&s.d_plus));
        prop_assert!(s.w1 >= 0.0);
    }

    #[test]
    fn wasserstein_is_symmetric(a in sample(), b in sample()) {
        let g = grid(&a, &b);
        let ab = ecdf_compare(&a, &b, &g).unwrap().w1;
        let ba = ecdf_compare(&b, &a, &g).unwrap().w1;
        prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab));
    }

    #[test]
    fn wasserstein_of_equal_sizes_matches_sorted_matching(
        pairs in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 1..50)
    ) {
        let mut a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let mut b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let w1 = ecdf_compare(&a, &b, &grid(&a, &b)).unwrap().w1;
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let oracle = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64;
        prop_assert!((w1 - oracle).abs() <= 1e-9 * (1.0 + oracle));
    }

    #[test]
    fn cut_rate_grows_with_quantile(a in sample(), b in sample(), q1 in 0.01f64..0.98, dq in 0.0f64..0.5) {
        let q2 = (q1 + dq).min(0.99);
        let r1 = cut_rate_at_quantile(&a, &b, q1).unwrap();
        let r2 = cut_rate_at_quantile(&a, &b, q2).unwrap();
        prop_assert!(r1.radius <= r2.radius);
        prop_assert!(r1.rate <= r2.rate);
        prop_assert!(r1.reference_rate <= r2.reference_rate);
    }

    #[test]
    fn splitting_a_square_conserves_area(
        cx in -3.0f64..3.0, cy in -3.0f64..3.0, r in 0.1f64..3.0,
        angle in 0.0f64..std::f64::consts::TAU, off in -4.0f64..4.0,
    ) {
        let sq = ConvexPolygon::square([cx, cy], r);
        let f = LineFn::new([angle.cos(), angle.sin()], off);
        match sq.split(&f, 1e-12) {
            Split::Both(a, b) => {
                prop_assert!(((a.area() + b.area()) - sq.area()).abs() <= 1e-10 * sq.area());
                for v in a.vertices() { prop_assert!(f.eval(v) <= 1e-9); }
                for v in b.vertices() { prop_assert!(f.eval(v) >= -1e-9); }
            }
            Split::Negative => for v in sq.vertices() { prop_assert!(f.eval(v) <= 1e-9); },
            Split::Positive => for v in sq.vertices() { prop_assert!(f.eval(v) >= -1e-9); },
        }
    }

    #[test]
    fn cut_test_is_invariant_to_rescaling(
        w in prop::collection::vec(-2.0f64..2.0, 3),
        center in prop::collection::vec(-2.0f64..2.0, 3),
        c in -5.0f64..5.0, r in 0.1f64..2.0, scale in 0.01f64..100.0,
    ) {
        prop_assume!(w.iter().any(|v| v.abs() > 1e-3));
        let win = Window::new(Array1::from(center), r).unwrap();
        let h = Hyperplane::new(Array1::from(w.clone()), c).unwrap();
        let l1: f64 = w.iter().map(|v| v.abs()).sum();
        let gap = (c - h.normal.dot(&win.center)).abs();
        prop_assume!((gap - r * l1).abs() > 1e-9);
        let hs = Hyperplane::new(Array1::from(w).mapv(|v| v * scale), c * scale).unwrap();
        prop_assert_eq!(window_cut(&h, &win, Boundary::Open), window_cut(&hs, &win, Boundary::Open));
    }

    #[test]
    fn singleton_families_reduce_to_the_simple_count(m in 0u64..40) {
        prop_assert_eq!(region_count_parallel(&vec![1; m as usize], 2), region_count_simple(m, 2));
    }
}
