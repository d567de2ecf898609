use std::f64::consts::PI;

use fraclab_core::geometry::{
    dist_point_plane, grassmann_distance, orthocomplement, random_orthogonal, sample_grassmannian,
};
use fraclab_core::rng::indexed_rng;
use fraclab_core::stats::{ks_two_sample, ks_uniform};
use fraclab_core::AffinePlane;
use proptest::prelude::*;

fn line_angle(v: &AffinePlane) -> f64 {
    let b = v.basis_vector(0);
    b[1].atan2(b[0]).rem_euclid(PI)
}

fn affine_sample(d: usize, n: usize, count: usize, seed: u64) -> Vec<AffinePlane> {
    sample_grassmannian(d, n, count, seed)
        .unwrap()
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let shift: Vec<f64> = (0..d).map(|a| ((i * 7 + a * 3) % 11) as f64 / 5.0 - 1.0).collect();
            AffinePlane::through(&shift, &v.basis_vectors()).unwrap()
        })
        .collect()
}

#[test]
fn metric_axioms_on_sampled_planes() {
    for (d, n) in [(2, 1), (3, 1), (3, 2), (4, 2)] {
        let planes = affine_sample(d, n, 50, 3);
        let m: Vec<Vec<f64>> = planes
            .iter()
            .map(|a| planes.iter().map(|b| grassmann_distance(a, b).unwrap()).collect())
            .collect();
        for i in 0..50 {
            assert!(m[i][i] < 1e-12);
            for j in 0..50 {
                assert!(m[i][j] >= 0.0);
                assert!((m[i][j] - m[j][i]).abs() < 1e-12);
                for k in 0..50 {
                    assert!(m[i][k] <= m[i][j] + m[j][k] + 1e-12, "triangle fails d={d} n={n}");
                }
            }
        }
    }
}

#[test]
fn line_directions_are_uniform() {
    let angles: Vec<f64> = sample_grassmannian(2, 1, 10_000, 17).unwrap().iter().map(line_angle).collect();
    let ks = ks_uniform(&angles, 0.0, PI).unwrap();
    assert!(ks.p_value > 0.01, "{ks:?}");
}

#[test]
fn rotation_invariance_in_r3() {
    let a = sample_grassmannian(3, 1, 10_000, 21).unwrap();
    let b = sample_grassmannian(3, 1, 10_000, 22).unwrap();
    let rot = random_orthogonal(&mut indexed_rng(5, 0), 3);
    let rotated: Vec<AffinePlane> = a.iter().map(|v| v.transformed(&rot).unwrap()).collect();
    // Compare the law of |<e_3, u>|, which is uniform on [0,1] for the invariant measure.
    let z = |vs: &[AffinePlane]| vs.iter().map(|v| v.basis_vector(0)[2].abs()).collect::<Vec<_>>();
    let ks = ks_two_sample(&z(&rotated), &z(&b)).unwrap();
    assert!(ks.p_value > 0.01, "{ks:?}");
    assert!(ks_uniform(&z(&rotated), 0.0, 1.0).unwrap().p_value > 0.01);
}

#[test]
fn orthocomplement_preserves_the_invariant_measure() {
    let a = sample_grassmannian(2, 1, 10_000, 31).unwrap();
    let b = sample_grassmannian(2, 1, 10_000, 32).unwrap();
    let perp: Vec<f64> = a.iter().map(|v| line_angle(&orthocomplement(v).unwrap())).collect();
    let fresh: Vec<f64> = b.iter().map(line_angle).collect();
    assert!(ks_two_sample(&perp, &fresh).unwrap().p_value > 0.01);
}

#[test]
fn sample_count_and_orthonormality() {
    for (d, n) in [(2, 1), (3, 2), (4, 1), (4, 3)] {
        let vs = sample_grassmannian(d, n, 5, 9).unwrap();
        assert_eq!(vs.len(), 5);
        for v in &vs {
            for i in 0..n {
                for j in 0..n {
                    let ip: f64 = v.basis_vector(i).iter().zip(v.basis_vector(j)).map(|(a, b)| a * b).sum();
                    assert!((ip - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn distance_between_lines_is_sine_of_angle() {
    let x = AffinePlane::line2(0.0, 0.0);
    for k in 0..12 {
        let theta = k as f64 * PI / 12.0;
        let l = AffinePlane::line2(theta, 0.0);
        assert!((grassmann_distance(&x, &l).unwrap() - theta.sin().abs()).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn orthocomplement_is_an_involution(seed in 0u64..10_000, d in 2usize..=4, n in 1usize..4) {
        prop_assume!(n < d);
        let v = &sample_grassmannian(d, n, 1, seed).unwrap()[0];
        let back = orthocomplement(&orthocomplement(v).unwrap()).unwrap();
        prop_assert!(grassmann_distance(v, &back).unwrap() < 1e-10);
    }

    #[test]
    fn point_distance_matches_projection(x in prop::collection::vec(-3.0f64..3.0, 3), theta in 0.0f64..PI) {
        // Plane spanned by e_3 and (cos θ, sin θ, 0) through the origin; normal (-sin θ, cos θ, 0).
        let v = AffinePlane::linear(&[vec![theta.cos(), theta.sin(), 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let want = (-theta.sin() * x[0] + theta.cos() * x[1]).abs();
        prop_assert!((dist_point_plane(&x, &v).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn rotating_both_planes_keeps_distance(seed in 0u64..10_000) {
        let vs = affine_sample(3, 2, 2, seed);
        let rot = random_orthogonal(&mut indexed_rng(seed, 99), 3);
        let before = grassmann_distance(&vs[0], &vs[1]).unwrap();
        let after = grassmann_distance(&vs[0].transformed(&rot).unwrap(), &vs[1].transformed(&rot).unwrap()).unwrap();
        prop_assert!((before - after).abs() < 1e-10);
    }
}
