mod common;

use common::{all_specs, chamfer_oracle, rel_close};
use hypercd::metrics::{acosh1p, chamfer_poincare, clip_to_ball, poincare_distance, transform};
use hypercd::{chamfer, match_brute, match_indexed, MatchResult, Point3, PointCloud, TransformSpec};
use proptest::prelude::*;

fn assert_oracle_match(a: &PointCloud, b: &PointCloud, m: &MatchResult) {
    for (j, p) in a.iter().enumerate() {
        let (k, d) = common::nearest_oracle(p, b);
        assert_eq!((m.fwd_idx[j], m.fwd_sq[j]), (k, d), "forward {j}");
    }
    for (k, q) in b.iter().enumerate() {
        let (j, d) = common::nearest_oracle(q, a);
        assert_eq!((m.bwd_idx[k], m.bwd_sq[k]), (j, d), "backward {k}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn indexed_equals_brute_uniform(a in common::cloud_strategy(200, 1.0), b in common::cloud_strategy(200, 1.0)) {
        prop_assert_eq!(match_indexed(&a, &b), match_brute(&a, &b));
    }

    #[test]
    fn indexed_equals_brute_lattice(a in common::lattice_strategy(120), b in common::lattice_strategy(120)) {
        let m = match_indexed(&a, &b);
        prop_assert_eq!(&m, &match_brute(&a, &b));
        assert_oracle_match(&a, &b, &m);
    }

    #[test]
    fn match_then_transform_equals_brute_min(a in common::cloud_strategy(48, 2.0), b in common::cloud_strategy(48, 2.0)) {
        for spec in all_specs() {
            let got = chamfer(&a, &b, &spec).unwrap().value;
            let want = chamfer_oracle(&a, &b, &spec);
            prop_assert!(rel_close(got, want, 1e-12), "{spec}: {got} vs {want}");
        }
    }

    #[test]
    fn chamfer_is_symmetric_and_translation_invariant(
        a in common::cloud_strategy(40, 1.0),
        b in common::cloud_strategy(40, 1.0),
        shift in common::point_strategy(10.0),
    ) {
        for spec in all_specs() {
            let ab = chamfer(&a, &b, &spec).unwrap().value;
            let ba = chamfer(&b, &a, &spec).unwrap().value;
            prop_assert!(rel_close(ab, ba, 1e-12));
            let moved = chamfer(&a.translated(shift).unwrap(), &b.translated(shift).unwrap(), &spec).unwrap().value;
            // translation perturbs coordinates by rounding only
            prop_assert!((ab - moved).abs() <= 1e-9 * (1.0 + ab.abs()), "{spec}: {ab} vs {moved}");
        }
    }

    #[test]
    fn hyper_is_strictly_increasing(x1 in 0.0..50.0f64, gap in 1e-6..50.0f64, alpha in 1e-3..10.0f64, beta in 0.2..4.0f64) {
        let spec = TransformSpec::hyper(alpha, beta).unwrap();
        let x2 = x1 + gap;
        prop_assert!(transform(&spec, x1).unwrap() < transform(&spec, x2).unwrap());
    }

    #[test]
    fn hyper_small_distance_series(d in 1e-10..1e-4f64, alpha in 0.1..5.0f64) {
        let spec = TransformSpec::hypercd(alpha).unwrap();
        let series = (2.0 * alpha).sqrt() * d * (1.0 - alpha * d * d / 12.0);
        let v = transform(&spec, d).unwrap();
        prop_assert!(((v - series) / series).abs() < 1e-8, "d={d}: {v} vs {series}");
    }

    #[test]
    fn clip_respects_norm(c in common::cloud_strategy(64, 5.0), max_norm in 0.01..0.999f64) {
        let clipped = clip_to_ball(&c, max_norm).unwrap();
        for (p, q) in c.iter().zip(clipped.iter()) {
            prop_assert!(q.norm() <= max_norm * (1.0 + 1e-12));
            if p.norm() <= max_norm {
                prop_assert_eq!(p, q);
            }
        }
        prop_assert!(chamfer_poincare(&clipped, &clipped).unwrap().value == 0.0);
    }

    #[test]
    fn poincare_chamfer_matches_pairwise_oracle(a in common::cloud_strategy(40, 0.55), b in common::cloud_strategy(40, 0.55)) {
        let side = |x: &PointCloud, y: &PointCloud| {
            x.iter()
                .map(|p| y.iter().map(|q| poincare_distance(p, q).unwrap()).fold(f64::INFINITY, f64::min))
                .sum::<f64>() / x.len() as f64
        };
        let r = chamfer_poincare(&a, &b).unwrap();
        prop_assert!(rel_close(r.d1, side(&a, &b), 1e-12));
        prop_assert!(rel_close(r.d2, side(&b, &a), 1e-12));
        prop_assert!(rel_close(r.value, r.d1 + r.d2, 1e-15));
    }
}

#[test]
fn matching_big_and_clustered() {
    let mut rng = common::rng(7);
    for (n, m) in [(2048, 2048), (1, 2048), (2048, 1), (1000, 37)] {
        let a = common::uniform_cloud(&mut rng, n);
        let b = common::uniform_cloud(&mut rng, m);
        assert_eq!(match_indexed(&a, &b), match_brute(&a, &b));
        let a = common::clustered_cloud(&mut rng, n);
        let b = common::clustered_cloud(&mut rng, m);
        assert_eq!(match_indexed(&a, &b), match_brute(&a, &b));
        let a = common::lattice_cloud(&mut rng, n, 4);
        let b = common::lattice_cloud(&mut rng, m, 4);
        let mi = match_indexed(&a, &b);
        assert_eq!(mi, match_brute(&a, &b));
        assert_oracle_match(&a, &b, &mi);
    }
}

#[test]
fn all_duplicates_match_lowest_index() {
    let a = PointCloud::new(vec![Point3::new(0.5, 0.5, 0.5); 300]).unwrap();
    let b = PointCloud::new(vec![Point3::new(1.0, 0.5, 0.5); 50]).unwrap();
    let m = match_indexed(&a, &b);
    assert!(m.fwd_idx.iter().all(|&k| k == 0));
    assert!(m.bwd_idx.iter().all(|&j| j == 0));
}

#[test]
fn poincare_is_not_translation_invariant() {
    // hyperbolic distance grows toward the boundary of the ball
    let a = common::cloud(&[[0.0, 0.0, 0.0]]);
    let b = common::cloud(&[[0.1, 0.0, 0.0]]);
    let shift = Point3::new(0.8, 0.0, 0.0);
    let near = chamfer_poincare(&a, &b).unwrap().value;
    let far = chamfer_poincare(&a.translated(shift).unwrap(), &b.translated(shift).unwrap()).unwrap().value;
    assert!(far > 2.0 * near, "{near} vs {far}");
    assert!(chamfer_poincare(&common::cloud(&[[1.0, 0.0, 0.0]]), &a).is_err());
}

#[test]
fn closed_form_values() {
    assert!((acosh1p(1.0) - 1.316_957_896_924_816_6).abs() < 1e-15);
    let o = Point3::ORIGIN;
    let p = Point3::new(0.5, 0.0, 0.0);
    assert!((poincare_distance(&o, &p).unwrap() - 3f64.ln()).abs() < 1e-14);
    let hyper = TransformSpec::hypercd(1.0).unwrap();
    let r = chamfer(&common::cloud(&[[0.0, 0.0, 0.0]]), &common::cloud(&[[1.0, 0.0, 0.0]]), &hyper).unwrap();
    assert!((r.value - 2.0 * (2.0 + 3f64.sqrt()).ln()).abs() < 1e-14);
    assert!((r.value - 2.633_915_793_8).abs() < 1e-10);
}

#[test]
fn parallel_and_serial_agree() {
    let mut rng = common::rng(3);
    let a = common::uniform_cloud(&mut rng, 1500);
    let b = common::lattice_cloud(&mut rng, 900, 5);
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let ball_a = clip_to_ball(&a, 0.95).unwrap();
    let ball_b = clip_to_ball(&b.scaled(0.2).unwrap(), 0.95).unwrap();
    for spec in all_specs() {
        let s = serial.install(|| chamfer(&a, &b, &spec).unwrap());
        let w = wide.install(|| chamfer(&a, &b, &spec).unwrap());
        assert_eq!(s, w);
    }
    let s = serial.install(|| chamfer_poincare(&ball_a, &ball_b).unwrap());
    let w = wide.install(|| chamfer_poincare(&ball_a, &ball_b).unwrap());
    assert_eq!(s, w);
}
