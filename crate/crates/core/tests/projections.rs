use std::f64::consts::PI;

use fraclab_core::delta_sets::{gen_random_regular_set, validate_frostman_set};
use fraclab_core::experiments::{coverage_disc, disc_l2_cross, DISC_L2_PROJECTION};
use fraclab_core::geometry::{orthocomplement, random_orthogonal};
use fraclab_core::projections::{
    ball_integral, lp_norm_pow, mattila_constant, mattila_identity_check, mollify_point_cloud, project_measure,
    projection_lp_integral, radial_slice_density, FnField, GridMeasure, MattilaConfig, MollifierSpec, PlaneSampling,
    RotationSampling,
};
use fraclab_core::rng::indexed_rng;
use fraclab_core::{AffinePlane, PointCloud};
use proptest::prelude::*;
use rand::Rng;

fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

fn bump(h: f64) -> GridMeasure {
    // (1 - |x|^2)^3 on the unit disc, normalized to mass 1.
    let m = (2.0 / h).round() as usize + 1;
    let mut mu = GridMeasure::from_fn(h, vec![-1.0, -1.0], vec![m, m], |x| (1.0 - x[0] * x[0] - x[1] * x[1]).max(0.0).powi(3)).unwrap();
    mu.normalize(1.0);
    mu
}

#[test]
fn disc_pushforward_matches_the_semicircle_law() {
    let h = 1.0 / 256.0;
    let mu = coverage_disc(h).unwrap();
    for theta in [0.0, 0.3, PI / 4.0, 1.2] {
        let g = project_measure(&mu, &AffinePlane::line2(theta, 0.0)).unwrap();
        assert!((g.total_mass() - 1.0).abs() < 1e-6);
        let mut worst = 0.0f64;
        for i in 0..=200 {
            let t = -0.95 + 1.9 * i as f64 / 200.0;
            let want = 2.0 * (1.0 - t * t).sqrt() / PI;
            worst = worst.max((g.value_at(&[t]) - want).abs());
        }
        assert!(worst <= 2.0 * h, "theta={theta}: {worst}");
    }
}

#[test]
fn disc_l2_norm_is_analytic() {
    // ∫ 4(1 - x^2)/π^2 over [-1, 1].
    let oracle = simpson(-1.0, 1.0, 1000, |x| 4.0 * (1.0 - x * x) / (PI * PI));
    assert!((oracle - DISC_L2_PROJECTION).abs() < 1e-12);
    let g = project_measure(&coverage_disc(1.0 / 256.0).unwrap(), &AffinePlane::line2(0.4, 0.0)).unwrap();
    let v = lp_norm_pow(&g, 2.0).unwrap();
    assert!((v / oracle - 1.0).abs() < 0.01, "{v}");
    let cross = disc_l2_cross(1.0 / 128.0, 32, 5).unwrap();
    assert!((cross.mean - oracle).abs() <= 3.0 * cross.std_error.max(1e-6), "{cross:?}");
}

#[test]
fn energy_integral_is_riesz_energy_over_pi() {
    // I_1 of the uniform disc from the distance density of two uniform points.
    let energy = simpson(0.0, 1.0, 20_000, |u| 8.0 / PI * (u.acos() - u * (1.0 - u * u).sqrt()));
    let mu = coverage_disc(1.0 / 256.0).unwrap();
    let est = projection_lp_integral(&mu, 1, 2.0, PlaneSampling::Equispaced { count: 32, phase: 0.5 }).unwrap();
    let factor = est.mean / energy;
    assert!((factor * PI - 1.0).abs() < 0.01, "factor {factor}");
}

#[test]
fn projection_is_rotation_equivariant() {
    let h = 1.0 / 128.0;
    let mu = bump(h);
    let base = AffinePlane::line2(0.2, 0.0);
    let g = project_measure(&mu, &base).unwrap();
    for seed in 0..3 {
        let rot = random_orthogonal(&mut indexed_rng(seed, 0), 2);
        // The bump is radial, so rotating it changes nothing; rotating V must not change the profile either.
        let gr = project_measure(&mu, &base.transformed(&rot).unwrap()).unwrap();
        for i in 0..=40 {
            let t = -1.0 + i as f64 / 20.0;
            assert!((g.value_at(&[t]) - gr.value_at(&[t])).abs() <= 2.0 * h);
        }
    }
}

#[test]
fn slice_density_equals_orthogonal_projection() {
    let h = 1.0 / 128.0;
    let mu = bump(h);
    let mut rng = indexed_rng(3, 0);
    for _ in 0..50 {
        let theta = rng.random_range(0.0..PI);
        let v = AffinePlane::line2(theta, 0.0);
        let perp = orthocomplement(&v).unwrap();
        let x = [rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9)];
        let slice = radial_slice_density(&mu, &x, &v).unwrap();
        let g = project_measure(&mu, &perp).unwrap();
        let want = g.value_at(&g.coordinates(&x));
        assert!((slice - want).abs() <= 3.0 * h, "{slice} vs {want}");
    }
    let far = radial_slice_density(&mu, &[0.0, 5.0], &AffinePlane::line2(0.0, 0.0)).unwrap();
    assert_eq!(far, 0.0);
}

#[test]
fn isolated_point_mollifier() {
    let spec = MollifierSpec::new(1.0, 0.05).unwrap();
    let p = PointCloud::from_points(&[vec![0.1, -0.2]]).unwrap();
    let h = 0.05 / 8.0;
    let mu = mollify_point_cloud(&p, &spec, h).unwrap();
    let top = 0.05f64.powi(-2);
    for r in [0.0, 0.05, 0.1, 0.14] {
        assert!((mu.value_at(&[0.1 + r, -0.2]) - top).abs() < 1e-9 * top, "r={r}");
    }
    assert_eq!(mu.value_at(&[0.1 + 0.21, -0.2]), 0.0);
    assert!(mu.max_lipschitz_quotient() <= spec.lipschitz_bound(2) * (1.0 + 1e-9));
    assert!((mu.total_mass() / MollifierSpec::profile_mass(2) - 1.0).abs() < 0.01);
}

#[test]
fn mollified_regular_set_is_frostman() {
    let (t, k) = (1.5, 6);
    let delta = 1.0 / 64.0;
    let p = gen_random_regular_set(2, t, k, 8).unwrap();
    let c_f = validate_frostman_set(&p, delta, t).unwrap().best_constant;
    let spec = MollifierSpec::new(1.0, delta).unwrap();
    let mu = mollify_point_cloud(&p, &spec, delta / 4.0).unwrap();
    // B(x, r) only sees points in B(x, r + 4δ) ⊂ B(x, 5r), and |P|_δ = |P|.
    let a = MollifierSpec::profile_mass(2) * 5f64.powf(t);
    let mut rng = indexed_rng(8, 1);
    let mut worst = 0.0f64;
    for _ in 0..300 {
        let x = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        let mut r = delta;
        while r <= 1.0 {
            worst = worst.max(mu.mass_in_ball(&x, r) / r.powf(t));
            r *= 2.0;
        }
    }
    assert!(worst <= a * c_f, "{worst} > {}", a * c_f);
}

#[test]
fn mattila_annulus_and_zero() {
    let annulus = FnField {
        d: 2,
        radius: 2.0,
        f: |x: &[f64]| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if (1.0..=2.0).contains(&r) {
                1.0
            } else {
                0.0
            }
        },
    };
    let cfg = MattilaConfig { n: 1, rotations: RotationSampling::Equispaced { count: 64 }, h: 1.0 / 512.0 };
    let rep = mattila_identity_check(&annulus, &cfg).unwrap();
    // Polar coordinates: c(2,1) = |S^0| / |S^1|.
    assert!((mattila_constant(2, 1) - 1.0 / PI).abs() < 1e-15);
    assert!((rep.ratio.unwrap() * PI - 1.0).abs() < 0.02, "{rep:?}");
    let zero = FnField { d: 2, radius: 1.0, f: |_: &[f64]| 0.0 };
    let rep = mattila_identity_check(&zero, &cfg).unwrap();
    assert_eq!((rep.lhs, rep.rhs), (0.0, 0.0));
}

#[test]
fn ball_integral_p1_is_fubini() {
    let mu = bump(1.0 / 64.0);
    for delta in [0.1, 0.2] {
        let v = ball_integral(&mu, 1.0, delta).unwrap();
        assert!((v / (PI * delta * delta) - 1.0).abs() < 0.02, "{v}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projections_conserve_mass(theta in 0.0f64..PI, seed in 0u64..1000) {
        let h = 1.0 / 64.0;
        let mut rng = indexed_rng(seed, 0);
        let values: Vec<f64> = (0..65 * 65).map(|_| rng.random_range(0.0..1.0)).collect();
        let mu = GridMeasure::new(h, vec![-0.5, -0.5], vec![65, 65], values).unwrap();
        let g = project_measure(&mu, &AffinePlane::line2(theta, 0.0)).unwrap();
        prop_assert!((g.total_mass() / mu.total_mass() - 1.0).abs() < 1e-6);
    }
}
