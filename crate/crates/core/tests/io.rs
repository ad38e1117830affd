use std::collections::BTreeMap;

use lcrip_core::metrics::gamma_km_exact;
use lcrip_core::sampler::Kind;
use lcrip_core::tails::{default_t_grid, BoundId};
use lcrip_core::xp::{self, BoundSection, ExperimentConfig, ExperimentKind, MethodKind, StatisticKind};
use lcrip_core::{DistributionSpec, Error, Matrix};
use proptest::prelude::*;

fn matrix() -> impl Strategy<Value = Matrix> {
    (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
        prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, r * c)
            .prop_map(move |d| Matrix::new(r, c, d).unwrap())
    })
}

proptest! {
    #[test]
    fn matrix_csv_round_trip_is_lossless(a in matrix()) {
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let b = Matrix::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn config_round_trips(
        seed in any::<u64>(),
        kind in 0usize..4,
        dim in 4usize..40,
        trials in 100usize..5000,
        theta in 0.01f64..0.99,
    ) {
        let spec = DistributionSpec::new(Kind::BUILT_IN[kind], dim);
        let mut c = ExperimentConfig::new(ExperimentKind::Tails);
        c.seed = seed;
        c.trials = Some(trials);
        c.spec = Some(spec);
        c.sizes.l = Some(2);
        c.options.statistic = Some(StatisticKind::OrderStat);
        c.constants.insert("theta".into(), theta);
        let c = c.resolve().unwrap();
        let text = c.to_toml_string().unwrap();
        prop_assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), c);
    }
}

#[test]
fn certificate_survives_csv() {
    let dir = tempfile::tempdir().unwrap();
    let a = Matrix::from_rows(&[[0.1, -2.0 / 3.0, 1e-300], [std::f64::consts::PI, 4.0, -7.25]]).unwrap();
    let path = dir.path().join("a.csv");
    a.save(&path).unwrap();
    let b = Matrix::load(&path).unwrap();
    let cert = gamma_km_exact(&b, 1, 2).unwrap();
    assert!(cert.reproduction_error(&a) <= 1e-12);
    let json = serde_json::to_value(&cert).unwrap();
    for key in ["value", "I", "J", "y", "method"] {
        assert!(json.get(key).is_some(), "{key}");
    }
}

#[test]
fn manifest_lists_every_default() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::new(ExperimentKind::Gamma);
    c.spec = Some(DistributionSpec::new(Kind::Gaussian, 10));
    (c.sizes.n, c.sizes.k, c.sizes.m) = (Some(5), Some(1), Some(2));
    c.trials = Some(100);
    c.output.dir = Some(dir.path().to_path_buf());
    c.output.workers = Some(3);
    xp::run(&c).unwrap();
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    let cfg = &m["config"];
    assert_eq!(cfg["options"]["method"], "exact");
    assert_eq!(cfg["options"]["restarts"], 20);
    assert_eq!(cfg["trials"], 100);
    assert_eq!(cfg["grids"]["t"].as_array().unwrap().len(), default_t_grid().len());
    for name in ["C", "theta", "B", "b"] {
        assert!(cfg["constants"][name].is_number(), "{name}");
    }
    // neither the worker count nor the output location may affect results
    assert_eq!(cfg["output"], serde_json::json!({}));
    let parsed: ExperimentConfig = serde_json::from_value(cfg.clone()).unwrap();
    assert_eq!(parsed.resolve().unwrap(), parsed);
}

#[test]
fn partial_failure_keeps_completed_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::new(ExperimentKind::Rip);
    c.spec = Some(DistributionSpec::new(Kind::Gaussian, 200));
    c.trials = Some(2);
    c.grids.n = vec![10];
    // C(200, 5) supports exceed the exact enumeration cap
    c.grids.m = vec![1, 5];
    c.options.method = Some(MethodKind::Exact);
    c.output.dir = Some(dir.path().to_path_buf());
    let err = xp::run(&c).unwrap_err();
    assert!(matches!(err, Error::TooLarge { .. }), "{err:?}");
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(summary.lines().nth(1).unwrap().starts_with("10,200,1,2,"));
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn eq2_premise_defaults_to_e() {
    let mut c = ExperimentConfig::new(ExperimentKind::Bounds);
    c.bound = Some(BoundSection { id: BoundId::Eq2Premise, params: BTreeMap::new() });
    assert_eq!(c.resolve().unwrap().constants["C"], std::f64::consts::E);
    c.bound = Some(BoundSection { id: BoundId::Lemma1, params: BTreeMap::new() });
    assert_eq!(c.resolve().unwrap().constants["C"], 1.0);
}
