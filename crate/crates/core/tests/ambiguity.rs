use gdrc_core::ambiguity::{
    biconjugate_bound, build_core_sets, calibrate_radius, drc_mean_radius, f_cdf, f_quantile, incomplete_beta,
};
use gdrc_core::data::Dataset;
use gdrc_core::{support_function, AmbiguityConfig, CoreSet, MomentProfile, NormOrder};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

fn randn_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

fn random_core_set(rng: &mut ChaCha8Rng, n: usize, p: NormOrder) -> CoreSet {
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let a = &g * g.transpose() + DMatrix::identity(n, n) * 0.5;
    let center = randn_vec(rng, n);
    CoreSet::new(center, a, rng.gen_range(0.1..4.0), p, 1.0).unwrap()
}

/// Exact support value by enumerating the extreme points of the unit p-ball
/// (vertices for L1 and Linf; the aligned direction for L2).
fn vertex_oracle(cs: &CoreSet, v: &DVector<f64>) -> f64 {
    let n = cs.dim();
    let rho = cs.radius_sq.sqrt();
    let atv = cs.perturbation.transpose() * v;
    let best_u = match cs.norm_order {
        NormOrder::L1 => (0..n).map(|i| atv[i].abs()).fold(f64::MIN, f64::max),
        NormOrder::Linf => (0..1u32 << n)
            .map(|mask| (0..n).map(|i| if mask >> i & 1 == 1 { atv[i] } else { -atv[i] }).sum::<f64>())
            .fold(f64::MIN, f64::max),
        NormOrder::L2 => atv.dot(&(&atv / atv.norm())),
    };
    cs.center.dot(v) + rho * best_u
}

/// Random point of the set: direction drawn uniformly, scaled to the p-sphere.
fn boundary_sample(rng: &mut ChaCha8Rng, cs: &CoreSet) -> DVector<f64> {
    let u = randn_vec(rng, cs.dim());
    let u = &u / cs.norm_order.norm(u.as_slice());
    &cs.center + &cs.perturbation * u * cs.radius_sq.sqrt()
}

#[test]
fn support_function_matches_vertex_oracle_on_50_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..50 {
        let p = [NormOrder::L1, NormOrder::L2, NormOrder::Linf][trial % 3];
        let n = 2 + trial % 5;
        let cs = random_core_set(&mut rng, n, p);
        let v = randn_vec(&mut rng, n);
        let h = support_function(&cs, &v);
        let exact = vertex_oracle(&cs, &v);
        assert!((h - exact).abs() <= 1e-10 * exact.abs().max(1.0), "{p:?} n={n}: {h} vs {exact}");
        // no sampled point of the set exceeds the support value
        let mut best = f64::MIN;
        for _ in 0..2000 {
            let x = boundary_sample(&mut rng, &cs);
            assert!(cs.contains(&x));
            best = best.max(v.dot(&x));
        }
        assert!(best <= h + 1e-9 * h.abs().max(1.0));
    }
}

#[test]
fn l2_support_is_attained_by_monte_carlo_in_2d() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cs = random_core_set(&mut rng, 2, NormOrder::L2);
    let v = DVector::from_vec(vec![0.3, -1.1]);
    let h = support_function(&cs, &v);
    let best = (0..20_000).map(|_| v.dot(&boundary_sample(&mut rng, &cs))).fold(f64::MIN, f64::max);
    assert!(h - best < 1e-3 * h.abs().max(1.0));
}

#[test]
fn support_is_sublinear_and_translation_covariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for p in [NormOrder::L1, NormOrder::L2, NormOrder::Linf] {
        let cs = random_core_set(&mut rng, 4, p);
        let (u, v) = (randn_vec(&mut rng, 4), randn_vec(&mut rng, 4));
        let h = |x: &DVector<f64>| support_function(&cs, x);
        assert!((h(&(&u * 3.5)) - 3.5 * h(&u)).abs() < 1e-10);
        assert!(h(&(&u + &v)) <= h(&u) + h(&v) + 1e-10);
        assert!(h(&DVector::zeros(4)).abs() < 1e-15);
        let shift = randn_vec(&mut rng, 4);
        let moved = CoreSet::new(&cs.center + &shift, cs.perturbation.clone(), cs.radius_sq, p, 1.0).unwrap();
        assert!((support_function(&moved, &u) - h(&u) - shift.dot(&u)).abs() < 1e-10);
    }
}

#[test]
fn singular_perturbation_is_rejected() {
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
    assert!(CoreSet::new(DVector::zeros(2), a, 1.0, NormOrder::L2, 1.0).is_err());
    assert!(CoreSet::new(DVector::zeros(2), DMatrix::identity(3, 3), 1.0, NormOrder::L2, 1.0).is_err());
    assert!(CoreSet::new(DVector::zeros(2), DMatrix::identity(2, 2), -1.0, NormOrder::L2, 1.0).is_err());
}

#[test]
fn biconjugate_bound_is_a_dual_norm_ball() {
    let cs = CoreSet::new(DVector::zeros(2), DMatrix::identity(2, 2), 1.0, NormOrder::L1, 2.0).unwrap();
    // q = inf, r theta = 1.5 * 2
    assert!(biconjugate_bound(&cs, 1.5, &DVector::from_vec(vec![3.0, -3.0])));
    assert!(!biconjugate_bound(&cs, 1.5, &DVector::from_vec(vec![3.01, 0.0])));
    // zero attention admits only v = 0
    let blind = CoreSet::new(DVector::zeros(2), DMatrix::identity(2, 2), 1.0, NormOrder::L2, 0.0).unwrap();
    for r in [0.0, 1.0, 1e6] {
        assert!(!biconjugate_bound(&blind, r, &DVector::from_vec(vec![1e-9, 0.0])));
        assert!(biconjugate_bound(&blind, r, &DVector::zeros(2)));
    }
}

#[test]
fn calibrated_radius_is_the_smallest_containing_enough_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
    let center = DVector::from_vec(vec![0.5, -0.2]);
    let points: Vec<DVector<f64>> = (0..57).map(|_| randn_vec(&mut rng, 2) * 2.0).collect();
    for frac in [0.1, 0.25, 0.5, 1.0] {
        let r = calibrate_radius(&center, &a, NormOrder::L2, &points, &center, frac).unwrap();
        let cs = CoreSet::new(center.clone(), a.clone(), r, NormOrder::L2, 0.0).unwrap();
        let need = (frac * 57.0_f64).ceil() as usize;
        let inside = points.iter().filter(|x| cs.contains(x)).count();
        assert!(inside >= need);
        let shrunk = cs.with_radius_sq(r * (1.0 - 1e-9));
        assert!(points.iter().filter(|x| shrunk.contains(x)).count() < need);
    }
    // the mean is forced inside
    let far = DVector::from_vec(vec![50.0, 50.0]);
    let r = calibrate_radius(&center, &a, NormOrder::L2, &points, &far, 0.1).unwrap();
    let cs = CoreSet::new(center, a, r, NormOrder::L2, 0.0).unwrap();
    assert!(cs.contains(&far));
}

fn two_blobs(seed: u64, n: usize, per_class: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = 2 * per_class;
    let feats = DMatrix::from_fn(rows, n, |i, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z + if i < per_class { 2.0 } else { -2.0 }
    });
    let labels = (0..rows).map(|i| if i < per_class { 1 } else { -1 }).collect();
    Dataset::new("blobs", feats, labels).unwrap()
}

fn profiles(ds: &Dataset) -> [MomentProfile; 2] {
    [0, 1].map(|k| MomentProfile::estimate(&ds.class_points(k), 0.1, 1.2).unwrap())
}

#[test]
fn built_core_sets_contain_their_class_means_and_fraction() {
    let ds = two_blobs(3, 3, 40);
    let prof = profiles(&ds);
    let cfg = AmbiguityConfig { lambda: 0.2, core_sets_per_class: 2, ..Default::default() };
    let sets = build_core_sets(&prof, &ds, &cfg).unwrap();
    for k in 0..2 {
        assert_eq!(sets[k].len(), 2);
        for (j, cs) in sets[k].iter().enumerate() {
            let l = 0.2 * (j + 1) as f64 / 2.0;
            let expect = &prof[k].mean * (1.0 - l) + &prof[1 - k].mean * l;
            assert!((&cs.center - expect).amax() < 1e-12);
            assert!(cs.contains(&prof[k].mean));
            let inside = ds.class_points(k).iter().filter(|x| cs.contains(x)).count();
            assert!(inside >= 4);
            assert_eq!(cs.attention, cfg.theta);
            assert!((&cs.perturbation * &cs.perturbation - &prof[k].covariance).amax() < 1e-9);
        }
    }
}

#[test]
fn radius_scale_shrinks_radius_but_keeps_mean_inside() {
    let ds = two_blobs(4, 3, 40);
    let prof = profiles(&ds);
    let base = build_core_sets(&prof, &ds, &AmbiguityConfig { lambda: 0.3, ..Default::default() }).unwrap();
    let half =
        build_core_sets(&prof, &ds, &AmbiguityConfig { lambda: 0.3, radius_scale: 0.5, ..Default::default() }).unwrap();
    let tiny = build_core_sets(&prof, &ds, &AmbiguityConfig { lambda: 0.3, radius_scale: 1e-9, ..Default::default() })
        .unwrap();
    for k in 0..2 {
        let floor = base[k][0].membership_stat(&prof[k].mean);
        assert!((half[k][0].radius_sq - (0.5 * base[k][0].radius_sq).max(floor)).abs() < 1e-12);
        assert!((tiny[k][0].radius_sq - floor).abs() < 1e-12);
        assert!(tiny[k][0].contains(&prof[k].mean));
    }
    for bad in [0.0, -1.0, f64::INFINITY, f64::NAN] {
        assert!(AmbiguityConfig { radius_scale: bad, ..Default::default() }.validate().is_err());
    }
}

#[test]
fn config_validation() {
    let ok = AmbiguityConfig::default();
    assert!(ok.validate().is_ok());
    let bad = [
        AmbiguityConfig { lambda: 0.5, ..ok.clone() },
        AmbiguityConfig { lambda: -0.1, ..ok.clone() },
        AmbiguityConfig { containment_fraction: 0.0, ..ok.clone() },
        AmbiguityConfig { gamma1: -1.0, ..ok.clone() },
        AmbiguityConfig { gamma2: 0.99, ..ok.clone() },
        AmbiguityConfig { epsilon: 1.0, ..ok.clone() },
        AmbiguityConfig { core_sets_per_class: 0, ..ok.clone() },
        AmbiguityConfig { theta: -1.0, ..ok.clone() },
    ];
    for b in bad {
        assert!(b.validate().is_err(), "{b:?}");
    }
}

#[test]
fn config_json_defaults_radius_scale() {
    let mut v = serde_json::to_value(AmbiguityConfig::default()).unwrap();
    v.as_object_mut().unwrap().remove("radius_scale");
    let back: AmbiguityConfig = serde_json::from_value(v).unwrap();
    assert_eq!(back, AmbiguityConfig::default());
}

#[test]
fn f_distribution_matches_statrs() {
    for &(d1, d2) in &[(1.0, 99.0), (2.0, 5.0), (5.0, 30.0), (30.0, 170.0), (50.0, 950.0)] {
        let oracle = FisherSnedecor::new(d1, d2).unwrap();
        for &x in &[0.05, 0.5, 1.0, 2.5, 7.0] {
            assert!((f_cdf(d1, d2, x) - oracle.cdf(x)).abs() < 1e-10, "cdf {d1} {d2} {x}");
        }
        for &q in &[0.05, 0.5, 0.9, 0.95, 0.99] {
            // statrs' own inverse is a coarse search, so check through its CDF
            let a = f_quantile(d1, d2, q);
            assert!((oracle.cdf(a) - q).abs() < 1e-10, "quantile {d1} {d2} {q}: {a}");
        }
    }
    assert_eq!(incomplete_beta(2.0, 3.0, 0.0), 0.0);
    assert_eq!(incomplete_beta(2.0, 3.0, 1.0), 1.0);
    // I_x(1, 1) = x
    assert!((incomplete_beta(1.0, 1.0, 0.37) - 0.37).abs() < 1e-14);
}

#[test]
fn drc_mean_radius_values() {
    // prefactor reduces to 1/100; the F_{1,99} median is about 0.458
    let oracle = FisherSnedecor::new(1.0, 99.0).unwrap();
    let r = drc_mean_radius(1, 100, 0.5).unwrap();
    assert!((oracle.cdf(100.0 * r) - 0.5).abs() < 1e-10);
    assert!((r - 0.01 * 0.458).abs() < 2e-5);

    let (n, n0) = (5.0, 40.0);
    let scale = n * (n0 - 1.0) / (n0 * (n0 - n));
    let f = drc_mean_radius(5, 40, 0.9).unwrap() / scale;
    assert!((FisherSnedecor::new(n, n0 - n).unwrap().cdf(f) - 0.9).abs() < 1e-10);

    assert!(drc_mean_radius(5, 5, 0.5).is_err());
    assert!(drc_mean_radius(2, 10, 1.0).is_err());
}

proptest! {
    #[test]
    fn support_dominates_every_member(
        seed in 0u64..10_000,
        n in 1usize..6,
        p in prop_oneof![Just(NormOrder::L1), Just(NormOrder::L2), Just(NormOrder::Linf)],
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cs = random_core_set(&mut rng, n, p);
        let v = randn_vec(&mut rng, n);
        let h = support_function(&cs, &v);
        for _ in 0..50 {
            let u = randn_vec(&mut rng, n);
            let scale: f64 = rng.gen_range(0.0..1.0);
            let u = &u * (scale / p.norm(u.as_slice()));
            let x = &cs.center + &cs.perturbation * u * cs.radius_sq.sqrt();
            prop_assert!(v.dot(&x) <= h + 1e-9 * h.abs().max(1.0));
        }
    }
}
