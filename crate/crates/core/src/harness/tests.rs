use super::*;

fn dynamics_json(extra: &str) -> String {
    format!(
        r#"{{"schema_version": 1, "kind": "dynamics", "d": 20, "k": 30, "init_correlation": [0.5, 0.6],
            "seeds": {{"count": 4, "base": 3}}, "power": {{"max_iters": 8}}{extra}}}"#
    )
}

#[test]
fn config_rejects_unknown_and_inapplicable_fields() {
    assert!(ExperimentConfig::from_json(&dynamics_json("")).is_ok());
    assert!(ExperimentConfig::from_json(&dynamics_json(r#", "colour": 1"#)).is_err());
    assert!(ExperimentConfig::from_json(&dynamics_json(r#", "thresholds": {"max_weight_error": 1.0}"#)).is_err());
    assert!(ExperimentConfig::from_json(&dynamics_json(r#", "thresholds": {"min_sucess_rate": 1.0}"#)).is_err());
    let v2 = dynamics_json("").replace("\"schema_version\": 1", "\"schema_version\": 2");
    assert!(ExperimentConfig::from_json(&v2).is_err());
    let no_init = dynamics_json("").replace(r#""init_correlation": [0.5, 0.6],"#, "");
    assert!(ExperimentConfig::from_json(&no_init).is_err());
}

#[test]
fn hash_ignores_output_only() {
    let a = ExperimentConfig::from_json(&dynamics_json("")).unwrap();
    let mut b = a.clone();
    b.output = Some("elsewhere".into());
    assert_eq!(a.hash(), b.hash());
    b.seeds.base += 1;
    assert_ne!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
}

#[test]
fn regime_flag() {
    let cfg = ExperimentConfig::from_json(
        r#"{"schema_version": 1, "kind": "recovery", "d": 5, "k": 25, "n": 200, "zeta": 0.1,
            "seeds": {"count": 1}, "power": {"max_iters": 5}}"#,
    )
    .unwrap();
    assert!(cfg.rank_regime_violated());
    let run = run_experiment(&cfg).unwrap();
    assert!(run.report.flags.iter().any(|f| f.starts_with("rank regime")));
    assert_eq!(run.report.per_seed.len(), 1);
}

#[test]
fn aggregates_use_linear_quantiles() {
    let a = Aggregate::of(&[4.0, 1.0, 3.0, 2.0, f64::NAN]).unwrap();
    assert_eq!(a.count, 4);
    assert_eq!(a.median, 2.5);
    assert_eq!(a.q1, 1.75);
    assert_eq!(a.q3, 3.25);
    assert_eq!(a.iqr, 1.5);
    assert!(Aggregate::of(&[f64::INFINITY]).is_none());
}

#[test]
fn run_is_independent_of_thread_count() {
    let cfg = ExperimentConfig::from_json(&dynamics_json(r#", "thresholds": {"min_success_rate": 0.0}"#)).unwrap();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run_experiment(&cfg)).unwrap();
    let three =
        rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| run_experiment(&cfg)).unwrap();
    assert_eq!(one.report.per_seed, three.report.per_seed);
    assert_eq!(one.report.aggregates, three.report.aggregates);
    assert!(one.report.passed);
    assert_eq!(one.report.per_seed.len(), 4);
}

#[test]
fn outputs_carry_hash_and_tampering_is_detected() {
    let cfg = ExperimentConfig::from_json(&dynamics_json("")).unwrap();
    let run = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let written = run.write(dir.path()).unwrap();
    assert!(written.iter().any(|p| p.ends_with("trajectories.csv")));
    let hash = cfg.hash();
    assert_eq!(verify_hashes(dir.path(), &hash).unwrap(), 4);
    let first = std::fs::read_to_string(dir.path().join(PER_SEED_FILE)).unwrap();
    assert!(first.starts_with(&format!("{HASH_PREFIX}{hash}\n")));
    let stored = read_report(dir.path()).unwrap();
    assert_eq!(stored, run.report);

    let other = "0".repeat(64);
    let traj = dir.path().join("trajectories.csv");
    let body = std::fs::read_to_string(&traj).unwrap().replace(&hash, &other);
    std::fs::write(&traj, body).unwrap();
    assert!(verify_hashes(dir.path(), &hash).is_err());
}

#[test]
fn budget_stops_between_batches() {
    let mut cfg = ExperimentConfig::from_json(&dynamics_json("")).unwrap();
    cfg.max_seconds = Some(1e-9);
    let run = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run_experiment(&cfg)).unwrap();
    assert!(run.report.budget_exceeded);
    assert!(!run.report.passed);
    assert!(run.report.per_seed.len() < 4);
}

#[test]
fn probe_experiment_emits_conditioning_report() {
    let cfg = ExperimentConfig::from_json(
        r#"{"schema_version": 1, "kind": "probe", "d": 4, "k": 5,
            "probe": {"check": "conditioning", "trials": 500},
            "seeds": {"count": 1}, "thresholds": {"require_probe_pass": true}}"#,
    )
    .unwrap();
    let run = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run.write(dir.path()).unwrap();
    let probe: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("probe.json")).unwrap()).unwrap();
    let rep = &probe["reports"][0];
    assert_eq!(rep["sample_count"], 500);
    assert_eq!(rep["z_threshold"], 4.0);
    assert_eq!(rep["passed"], run.report.passed);
}
