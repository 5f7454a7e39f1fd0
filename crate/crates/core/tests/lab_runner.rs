use fplab::lab::{self, ExperimentConfig, ExperimentId, LabError};

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text).unwrap()
}

#[test]
fn every_experiment_runs_on_a_small_config() {
    let small = |id: ExperimentId| {
        let extra = match id {
            ExperimentId::Thm35Terms => "n = 200\nouter = 4\ninner = 4\ntail_mc = 200\n",
            ExperimentId::ReductionFactor32 => "n = 2000\nouter = 10\n",
            ExperimentId::FourthMomentIdentity => "outer = 20000\ninner = 4\n",
            ExperimentId::ConcentrationSuite => "outer = 20000\n",
            ExperimentId::HeavyTailedAssouad => "outer = 5000\ninner = 200\n",
            ExperimentId::Lemma33Moments => "inner = 2000\n",
            ExperimentId::Lemma32Equality => "outer = 500\n",
            _ => "outer = 10\ntail_mc = 500\n",
        };
        cfg(&format!("experiment = {id}\nseed = 11\n{extra}"))
    };
    for id in ExperimentId::ALL {
        let out = lab::run(&small(id)).unwrap_or_else(|e| panic!("{id}: {e}"));
        assert!(!out.report.metrics.is_empty(), "{id}");
        assert!(!out.trials.rows.is_empty(), "{id}");
        for m in &out.report.metrics {
            if m.pass.is_some() {
                assert!(!m.reference.is_empty(), "{id}: {} has no reference", m.name);
            }
        }
    }
}

#[test]
fn csv_is_identical_across_worker_counts() {
    let c = cfg("experiment = lemma32_equality\nseed = 5\nfamily = gaussian_mean\nd = 2\nmechanism = plugin\nouter = 3000\n");
    let base = lab::run_with_workers(&c, Some(1)).unwrap().trials.to_csv();
    for w in [2, 3, 8] {
        assert_eq!(lab::run_with_workers(&c, Some(w)).unwrap().trials.to_csv(), base, "workers = {w}");
    }
    let other = lab::run_with_workers(&ExperimentConfig { seed: 6, ..c }, Some(2)).unwrap();
    assert_ne!(other.trials.to_csv(), base);
}

#[test]
fn plugin_mse_decreases_with_n() {
    let c = cfg("experiment = lemma32_equality\nseed = 3\nfamily = gaussian_mean\nd = 2\nmechanism = plugin\nouter = 4000\n");
    let values: Vec<String> = ["100", "1000", "10000"].iter().map(|s| s.to_string()).collect();
    let points = lab::sweep(&c, "n", &values, None).unwrap();
    let mse: Vec<f64> = points.iter().map(|p| p.output.report.metric("mse").unwrap().estimate).collect();
    assert!(mse.windows(2).all(|w| w[1] <= w[0]), "{mse:?}");
    let csv = lab::sweep_csv("n", &points);
    assert!(csv.starts_with("axis,value,metric,estimate,stderr,target,pass\n"));
    assert!(csv.contains("n,10000,mse,"));
}

#[test]
fn constant_mechanism_correlation_is_zero_for_every_epsilon() {
    let c = cfg("experiment = lemma32_equality\nseed = 8\nfamily = bernoulli_product\nd = 3\nouter = 5000\n");
    let values: Vec<String> = ["0.1", "0.5", "1"].iter().map(|s| s.to_string()).collect();
    for p in lab::sweep(&c, "epsilon", &values, Some(2)).unwrap() {
        assert_eq!(p.output.report.metric("ez").unwrap().pass, Some(true), "epsilon = {}", p.value);
    }
}

#[test]
fn sweep_rejects_bad_axes_and_values() {
    let c = cfg("experiment = covsamp_invariants\nseed = 1\n");
    assert!(matches!(lab::sweep(&c, "family", &["x".into()], None), Err(LabError::Config(_))));
    assert!(matches!(lab::sweep(&c, "d", &[], None), Err(LabError::Config(_))));
    assert!(matches!(lab::sweep(&c, "d", &["0".into()], None), Err(LabError::Config(_))));
    assert!(matches!(lab::parse_values(" , "), Err(LabError::Config(_))));
    assert_eq!(lab::parse_values("1, 2,3").unwrap(), vec!["1", "2", "3"]);
}

#[test]
fn non_private_estimator_breaks_the_ceiling() {
    // The plug-in mean is not 0-DP, so its per-sample correlation exceeds
    // the ceiling, which is 0 when ε = δ = 0 and T is past all mass.
    let c = cfg(
        "experiment = thm35_terms\nseed = 2\nfamily = gaussian_mean\nd = 3\nn = 20\nmechanism = plugin\n\
         epsilon = 0\ndelta = 0\nthreshold = 1000\nouter = 20\ninner = 50\ntail_mc = 1000\n",
    );
    let out = lab::run(&c).unwrap();
    assert_eq!(out.report.metric("ez_i").unwrap().pass, Some(false));
    assert_eq!(out.exit_code(), lab::EXIT_CHECK_FAILED);
}

#[test]
fn inaccurate_estimator_is_outside_the_theorem() {
    let c = cfg(
        "experiment = thm35_terms\nseed = 2\nd = 2\nn = 50\nmechanism = constant\n\
         epsilon = 0.5\ndelta = 1e-9\nouter = 10\ninner = 10\ntail_mc = 500\n",
    );
    let out = lab::run(&c).unwrap();
    let m = out.report.metric("n_times_terms").unwrap();
    assert_eq!(m.pass, None);
    assert!(out.report.metric("accuracy_premise").unwrap().estimate > m.target.unwrap());
}

#[test]
fn outputs_are_written_and_parse() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("experiment = appendixC_product\nseed = 4\nouter = 5\ntail_mc = 100\n");
    let out = lab::run(&c).unwrap();
    lab::write_outputs(dir.path(), &out).unwrap();
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["experiment"], "appendixC_product");
    assert_eq!(json["config"]["seed"], 4);
    assert!(json["metrics"][0]["check"]["kind"].is_string());
    let csv = std::fs::read_to_string(dir.path().join("trials.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.starts_with("trial_index,tail,max_w\n"));
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 2, "{names:?}");
}
