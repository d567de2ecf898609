use fraclab_core::delta_sets::{
    covering_number, gen_product_cantor, gen_random_regular_set, gen_sharpness_construction, validate_frostman_set,
    SharpnessParams,
};
use fraclab_core::geometry::dist;
use fraclab_core::PointCloud;
use proptest::prelude::*;

/// Smallest number of closed `rho`-balls centered at input points that cover them all.
fn exact_point_cover(points: &[Vec<f64>], rho: f64) -> usize {
    let n = points.len();
    let reach: Vec<u32> = (0..n)
        .map(|i| (0..n).filter(|&j| dist(&points[i], &points[j]) <= rho).fold(0u32, |m, j| m | 1 << j))
        .collect();
    let full = (1u32 << n) - 1;
    (0u32..1 << n)
        .filter(|s| (0..n).filter(|i| s >> i & 1 == 1).fold(0, |m, i| m | reach[i]) == full)
        .map(u32::count_ones)
        .min()
        .unwrap() as usize
}

proptest! {
    #[test]
    fn greedy_count_is_bracketed_by_exact_covers(
        pts in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 1..=12),
        rho in 0.05f64..0.6,
    ) {
        let cloud = PointCloud::from_points(&pts).unwrap();
        let g = covering_number(&cloud, rho).unwrap();
        prop_assert!(exact_point_cover(&pts, rho) <= g);
        prop_assert!(g <= exact_point_cover(&pts, rho / 2.0));
    }

    #[test]
    fn covering_number_is_monotone_on_clusters(
        centers in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 1..8),
        rhos in prop::collection::vec(0.001f64..1.0, 2..6),
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut rng = fraclab_core::rng::indexed_rng(seed, 0);
        let pts: Vec<Vec<f64>> = (0..150)
            .map(|i| centers[i % centers.len()].iter().map(|c| c + rng.random_range(-0.05..0.05)).collect())
            .collect();
        let cloud = PointCloud::from_points(&pts).unwrap();
        let mut rhos = rhos;
        rhos.sort_by(f64::total_cmp);
        let counts: Vec<usize> = rhos.iter().map(|&r| covering_number(&cloud, r).unwrap()).collect();
        prop_assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{:?} at {:?}", counts, rhos);
    }

    #[test]
    fn covering_number_is_monotone(
        pts in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2), 1..200),
        a in 0.01f64..0.5,
        b in 0.01f64..0.5,
    ) {
        let cloud = PointCloud::from_points(&pts).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(covering_number(&cloud, lo).unwrap() >= covering_number(&cloud, hi).unwrap());
    }
}

#[test]
fn equally_spaced_segment() {
    let pts: Vec<Vec<f64>> = (0..=50).map(|i| vec![i as f64 / 50.0, 0.0]).collect();
    let n = covering_number(&PointCloud::from_points(&pts).unwrap(), 0.25).unwrap();
    // Farthest-point order takes 0, 1, 1/2; every other point is within 1/4 of those.
    assert_eq!(n, 3);
    let spread: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 0.0]).collect();
    assert_eq!(covering_number(&PointCloud::from_points(&spread).unwrap(), 0.4).unwrap(), 10);
}

#[test]
fn lattice_frostman_constant_against_brute_force() {
    for m in [8usize, 16, 32] {
        let delta = 1.0 / m as f64;
        let pts: Vec<Vec<f64>> = (0..m * m)
            .map(|i| vec![(i % m) as f64 * delta, (i / m) as f64 * delta])
            .collect();
        let cloud = PointCloud::from_points(&pts).unwrap();
        let rep = validate_frostman_set(&cloud, delta, 2.0).unwrap();
        let mut brute = 0.0f64;
        let mut r = delta;
        while r <= 1.0 + 1e-12 {
            for c in &pts {
                let count = pts.iter().filter(|p| dist(p, c) <= r).count();
                brute = brute.max(count as f64 / ((m * m) as f64 * r * r));
            }
            r *= 2.0;
        }
        assert!(rep.best_constant >= brute - 1e-12, "m={m}: {} < brute {brute}", rep.best_constant);
        assert!(rep.best_constant <= 16.0, "m={m}: {}", rep.best_constant);
    }
}

#[test]
fn cantor_measure_frostman_bound() {
    let (cloud, mu) = gen_product_cantor(2, 4, &[0, 1, 3], 5).unwrap();
    assert_eq!(cloud.len(), 3usize.pow(10));
    assert!((mu.total_mass() - 1.0).abs() < 1e-9);
    let rep = validate_frostman_set(&cloud, 4f64.powi(-5), 1.58).unwrap();
    assert!(rep.best_constant <= 32.0, "{}", rep.best_constant);
}

#[test]
fn regular_sets_are_t_frostman() {
    for t in [1.25, 1.5, 1.75] {
        let p = gen_random_regular_set(2, t, 7, 4).unwrap();
        let expected = (t * 7.0f64).exp2().round();
        assert_eq!(p.len() as f64, expected);
        let rep = validate_frostman_set(&p, 1.0 / 128.0, t).unwrap();
        assert!(rep.best_constant <= 16.0, "t={t}: {}", rep.best_constant);
    }
}

#[test]
fn sharpness_line_count_tracks_its_exponent() {
    let mut counts = Vec::new();
    for k in [6u32, 8, 10] {
        let inst = gen_sharpness_construction(SharpnessParams::new(0.5, 1.5, k, 1.0).unwrap()).unwrap();
        counts.push(inst.lines.len() as f64);
    }
    // |L| ~ δ^-1.25: four binary levels multiply the count by about 2^5.
    let growth = (counts[2] / counts[0]).log2() / 4.0;
    assert!((growth - 1.25).abs() < 0.15, "{growth}");
}
