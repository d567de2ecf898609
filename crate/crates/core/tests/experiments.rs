use fraclab_core::constants::R_D;
use fraclab_core::duality::DualityContext;
use fraclab_core::experiments::{execute, run_experiment, ExperimentConfig};
use fraclab_core::rng::indexed_rng;
use fraclab_core::stats::fit_loglog_slope;
use fraclab_core::Error;
use rand_distr::{Distribution, Normal};

#[test]
fn noisy_slope_two_recovers_its_exponent() {
    let noise = Normal::new(0.0, 0.05).unwrap();
    for seed in 0..20 {
        let mut rng = indexed_rng(seed, 0);
        let pts: Vec<(f64, f64)> = (4..=10)
            .map(|k| {
                let delta = 2f64.powi(-k);
                (delta, 3.0 * delta * delta * (1.0 + noise.sample(&mut rng)))
            })
            .collect();
        let fit = fit_loglog_slope(&pts).unwrap();
        assert!((1.8..=2.2).contains(&fit.slope), "seed {seed}: {}", fit.slope);
        assert!((0.0..=1.0).contains(&fit.r_squared));
    }
}

#[test]
fn unknown_experiment_is_an_input_error() {
    assert!(matches!(execute(&ExperimentConfig::new("kakeya")), Err(Error::Input(_))));
}

#[test]
fn config_json_round_trip_and_strictness() {
    let c: ExperimentConfig = serde_json::from_str(r#"{"experiment": "mattila", "k_min": 5, "k_max": 6}"#).unwrap();
    assert_eq!(c.k_max, Some(6));
    let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
    assert_eq!(back, c);
    assert!(serde_json::from_str::<ExperimentConfig>(r#"{"experiment": "mattila", "kmax": 6}"#).is_err());
}

#[test]
fn sharpness_table_schema() {
    let mut c = ExperimentConfig::new("sharpness-incidence");
    c.k_min = Some(6);
    c.k_max = Some(8);
    let out = execute(&c).unwrap();
    assert_eq!(&out.table.columns[..7], &["k", "delta", "points", "lines", "incidences", "bound_rhs", "ratio"]);
    assert_eq!(out.table.rows.len(), 3);
    let dim = out.summary.predicted.iter().find(|p| p.quantity == "furstenberg dimension").unwrap();
    assert!((dim.value - 1.25).abs() < 1e-15);
}

#[test]
fn repeated_runs_write_identical_bytes() {
    for (id, measure) in [("mattila", None), ("ball-scaling", Some("cantor")), ("duality-pipeline", None)] {
        let mut c = ExperimentConfig::new(id);
        c.measure = measure.map(str::to_string);
        if id == "duality-pipeline" {
            c.k_max = Some(6);
        }
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_experiment(&c, Some(a.path())).unwrap();
        run_experiment(&c, Some(b.path())).unwrap();
        for ext in ["csv", "json"] {
            let name = format!("{id}.{ext}");
            let x = std::fs::read(a.path().join(&name)).unwrap();
            let y = std::fs::read(b.path().join(&name)).unwrap();
            assert!(!x.is_empty());
            assert_eq!(x, y, "{name}");
        }
    }
}

#[test]
fn frozen_duality_radius_is_below_calibration() {
    for d in [2, 3] {
        let ctx = DualityContext::calibrate(d, 20_000, 3).unwrap();
        assert!(R_D <= ctx.r_d, "d={d}: calibrated {}", ctx.r_d);
    }
}
