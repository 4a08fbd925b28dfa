mod common;

use fedsim_core::experiment::{run_ablation, run_experiment_on, run_regime, run_validation_protocol, Plan, RunRecord};
use fedsim_core::report::{emit_report, report_json};
use fedsim_core::synthetic::synthetic_clients;
use fedsim_core::{ExperimentConfig, Regime, Seeds, ValidationProtocol};

fn small_config(seeds: Vec<u64>) -> ExperimentConfig {
    let mut cfg = common::real_config();
    cfg.seeds = Seeds::List(seeds);
    cfg.fed.rounds = 8;
    cfg
}

#[test]
fn report_is_byte_identical_across_runs_and_workers() {
    let cfg = small_config(vec![1, 2, 3]);
    let data = common::real_data(&cfg);
    let plan = Plan::full(&cfg);
    let a = report_json(&run_experiment_on(&cfg, &plan, &data).unwrap().report).unwrap();
    let b = report_json(&run_experiment_on(&cfg, &plan, &data).unwrap().report).unwrap();
    assert_eq!(a, b);

    let parallel = ExperimentConfig {
        workers: 3,
        ..cfg.clone()
    };
    let mut c = run_experiment_on(&parallel, &plan, &data).unwrap().report;
    c.config.workers = cfg.workers;
    c.environment.workers = 1;
    assert_eq!(report_json(&c).unwrap(), a);
}

#[test]
fn removing_a_seed_leaves_other_runs_unchanged() {
    let full = small_config(vec![5, 6, 7]);
    let reduced = small_config(vec![5, 7]);
    let data = common::real_data(&full);
    for regime in Regime::ALL {
        let a = run_regime(&full, &data.clients, regime, 0.05).unwrap();
        let b = run_regime(&reduced, &data.clients, regime, 0.05).unwrap();
        let strip = |r: &RunRecord| (r.seed, r.metrics.clone(), r.telemetry.clone());
        assert_eq!(strip(&a[0]), strip(&b[0]), "{regime:?}");
        assert_eq!(strip(&a[2]), strip(&b[1]), "{regime:?}");
    }
}

#[test]
fn empty_regimes_report_only_heterogeneity() {
    let mut cfg = small_config(vec![1]);
    cfg.regimes.clear();
    let data = common::real_data(&cfg);
    let outcome = run_experiment_on(&cfg, &Plan::full(&cfg), &data).unwrap();
    let v: serde_json::Value = serde_json::from_str(&report_json(&outcome.report).unwrap()).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["config", "environment", "dataset", "clients", "heterogeneity"]);
    assert!(outcome.runs.is_empty());
}

#[test]
fn ablation_mu_zero_row_equals_fedavg_sweep() {
    let mut cfg = small_config(vec![11, 12]);
    cfg.mu_grid = vec![0.0, 0.05];
    let data = common::real_data(&cfg);
    let ablation = run_ablation(&cfg, &data.clients).unwrap();
    assert_eq!(ablation.rows.len(), 2);
    let fedavg = run_regime(&cfg, &data.clients, Regime::FedAvg, 0.0).unwrap();
    for (prox, avg) in ablation.runs[0].iter().zip(&fedavg) {
        assert_eq!(prox.metrics, avg.metrics);
        assert_eq!(prox.telemetry, avg.telemetry);
    }
}

#[test]
fn single_mu_ablation_has_one_row() {
    let mut cfg = small_config(vec![3]);
    cfg.mu_grid = vec![0.0];
    let data = common::real_data(&cfg);
    let ablation = run_ablation(&cfg, &data.clients).unwrap();
    assert_eq!(ablation.rows.len(), 1);
    assert_eq!(ablation.rows[0].runs, 1);
}

#[test]
fn validation_selection_matches_rescan() {
    let cfg = small_config(vec![1, 2]);
    let data = common::real_data(&cfg);
    let protocol = ValidationProtocol::new(&data.clients, None).unwrap();
    assert_eq!(protocol.holdout_client_id, 1);
    assert_eq!(protocol.train_client_ids, vec![2, 3, 4]);
    let report = run_validation_protocol(&cfg, &data.clients, &protocol).unwrap();
    let best = report
        .rows
        .iter()
        .map(|r| r.holdout_accuracy_mean)
        .fold(f64::NEG_INFINITY, f64::max);
    let expected = report
        .rows
        .iter()
        .filter(|r| r.holdout_accuracy_mean == best)
        .map(|r| r.mu)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(report.selected_mu, expected);

    let mut single = cfg.clone();
    single.mu_grid = vec![0.1];
    assert_eq!(
        run_validation_protocol(&single, &data.clients, &protocol)
            .unwrap()
            .selected_mu,
        0.1
    );
}

#[test]
fn validation_rejects_unknown_holdout() {
    let cfg = small_config(vec![1]);
    let data = common::real_data(&cfg);
    assert!(ValidationProtocol::new(&data.clients, Some(9)).is_err());
    assert!(ValidationProtocol::new(&data.clients[..1], None).is_err());
}

#[test]
fn emitted_files_have_expected_headers() {
    let mut cfg = small_config(vec![1, 2]);
    cfg.mu_grid = vec![0.0, 0.05];
    let data = common::real_data(&cfg);
    let outcome = run_experiment_on(&cfg, &Plan::full(&cfg), &data).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&outcome, dir.path()).unwrap();
    let read = |name: &str| std::fs::read_to_string(dir.path().join(name)).unwrap();
    assert!(read("summary.csv").starts_with("method,accuracy_mean,accuracy_std,auc_mean,f1_mean,comm_mb\n"));
    assert_eq!(read("summary.csv").lines().count(), 5);
    assert_eq!(read("ablation.csv").lines().count(), 3);
    assert!(read("fairness.csv").contains("Client 3 (Small)"));
    let tele = read("telemetry_fedavg_0_1.csv");
    assert!(tele.starts_with(
        "round,global_acc,client1_acc,client2_acc,client3_acc,client4_acc,weight_delta_l2,lr,bytes_up,bytes_down\n"
    ));
    assert_eq!(tele.lines().count(), 9);
    let report: serde_json::Value = serde_json::from_str(&read("report.json")).unwrap();
    assert_eq!(report["communication"]["payload_bytes"], 56);
    let timings: serde_json::Value = serde_json::from_str(&read("timings.json")).unwrap();
    assert!(timings["runs"].as_array().unwrap().len() >= 8);
}

#[test]
fn emit_into_unwritable_path_fails() {
    let cfg = small_config(vec![1]);
    let data = common::real_data(&cfg);
    let plan = Plan {
        regimes: vec![],
        ablation: false,
        validation: false,
    };
    let outcome = run_experiment_on(&cfg, &plan, &data).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let err = emit_report(&outcome, blocker.join("sub")).unwrap_err();
    assert_eq!(err.kind(), "io");
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    let cfg = small_config(vec![4, 9]);
    std::fs::write(&path, cfg.to_json().unwrap()).unwrap();
    let back = ExperimentConfig::load(&path).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.to_json().unwrap(), cfg.to_json().unwrap());
}

#[test]
fn repo_default_config_matches_builtin_defaults() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default.json");
    assert_eq!(ExperimentConfig::load(path).unwrap(), ExperimentConfig::default());
}

#[test]
fn synthetic_federation_trains() {
    let clients = synthetic_clients(400, 3);
    assert_eq!(clients.len(), 4);
    let cfg = ExperimentConfig {
        seeds: Seeds::List(vec![1]),
        ..ExperimentConfig::default()
    };
    let runs = run_regime(&cfg, &clients, Regime::FedProx, 0.05).unwrap();
    assert!(runs[0].metrics.accuracy > 0.6, "{}", runs[0].metrics.accuracy);
}
