//! End-to-end behavior of the experiment loop, its outputs and the CLI.

mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Stdio};

use rand::Rng;

use dynamical::acquisition::{select, Strategy, StrategyKind};
use dynamical::harness::{
    run_active_learning, run_seed, split_dataset, verify_suite, DatasetSpec, ExperimentConfig, Metric, NetworkSpec,
    Scale, RECORDS_HEADER,
};
use dynamical::nnkit::{
    evaluate, gradient_step, train_in_place, LossKind, Network, NetworkConfig, Reduction, TrainSchedule,
};
use dynamical::pool::{Candidate, LabeledPool, UnlabeledPool};
use dynamical::rng::{derive_seed, stream};

fn small_config(kind: StrategyKind) -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSpec::GaussianMixture {
            classes: 3,
            dim: 4,
            per_class: 30,
            sigma: 0.5,
            mean_scale: 1.0,
            seed: 1,
        },
        network: NetworkSpec { hidden_dims: vec![16], ..Default::default() },
        strategy: Strategy::new(kind, 0),
        initial_size: 8,
        query_size: 4,
        rounds: 3,
        reinitialize: false,
        schedule: TrainSchedule { learning_rate: 0.1, max_epochs: 60, ..Default::default() },
        seeds: vec![0, 1, 2],
        test_fraction: 0.2,
        metrics: [Metric::Accuracy].into(),
        loss: LossKind::CrossEntropy,
        ratio_batches: 4,
    }
}

const ALL_STRATEGIES: [StrategyKind; 7] = [
    StrategyKind::Dynamical,
    StrategyKind::Random,
    StrategyKind::Confidence,
    StrategyKind::Margin,
    StrategyKind::Entropy,
    StrategyKind::Coreset,
    StrategyKind::Badge,
];

#[test]
fn run_result_is_a_function_of_the_config() {
    let config = small_config(StrategyKind::Badge);
    assert_eq!(run_active_learning(&config).unwrap(), run_active_learning(&config).unwrap());
}

#[test]
fn budget_accounting_and_disjoint_queries() {
    for kind in ALL_STRATEGIES.into_iter().chain([StrategyKind::GammaVariant(dynamical::dynamics::Gamma::Infinite)]) {
        let config = small_config(kind);
        let data = config.dataset.generate().unwrap();
        let outcome = run_seed(&config, &data, 5);
        assert!(outcome.error.is_none(), "{kind}: {:?}", outcome.error);
        assert_eq!(outcome.records.len(), config.rounds + 1);
        let split = split_dataset(&data, config.test_fraction, config.initial_size, 5).unwrap();
        let mut seen: BTreeSet<usize> = split.initial.iter().copied().collect();
        let test: BTreeSet<usize> = split.test.iter().map(|s| s.index).collect();
        for (r, rec) in outcome.records.iter().enumerate() {
            assert_eq!(rec.labeled_size, config.initial_size + r * config.query_size, "{kind}");
            if r < config.rounds {
                assert_eq!(rec.query.len(), config.query_size);
                for &i in &rec.query {
                    assert!(seen.insert(i), "{kind}: index {i} queried twice or already labeled");
                    assert!(!test.contains(&i), "{kind}: test point {i} queried");
                }
            } else {
                assert!(rec.query.is_empty());
            }
        }
        assert_eq!(
            seen.len(),
            split.pool.len() - (split.pool.len() - config.initial_size - config.rounds * config.query_size)
        );
    }
}

/// Replays the loop with library primitives: warm start reproduces the
/// harness exactly, and so does fresh initialization when requested.
#[test]
fn warm_start_and_reinitialization() {
    for reinitialize in [false, true] {
        let config = ExperimentConfig { reinitialize, ..small_config(StrategyKind::Dynamical) };
        let data = config.dataset.generate().unwrap();
        let run_seed_value = 3;
        let outcome = run_seed(&config, &data, run_seed_value);

        let split = split_dataset(&data, config.test_fraction, config.initial_size, run_seed_value).unwrap();
        let mut labeled = LabeledPool::new(split.initial.iter().map(|&i| data.sample(i)).collect());
        let mut unlabeled = UnlabeledPool::new(
            split
                .pool
                .iter()
                .filter(|s| !split.initial.contains(&s.index))
                .map(|s| Candidate { index: s.index, x: s.x.clone() })
                .collect(),
        );
        let net_config = |round: u64| {
            let counter = if reinitialize { round } else { 0 };
            config.network.build(
                data.dim(),
                data.classes,
                derive_seed(run_seed_value ^ config.network.seed, "network", counter),
            )
        };
        let strategy = Strategy { seed: derive_seed(run_seed_value, "strategy", 0), ..config.strategy };
        let mut net = Network::init(&net_config(0)).unwrap();
        for round in 0..=config.rounds {
            if reinitialize && round > 0 {
                net = Network::init(&net_config(round as u64)).unwrap();
            }
            let before = net.params().to_vec();
            let (epochs, _) = train_in_place(&mut net, &labeled, &config.schedule, config.loss).unwrap();
            assert!(epochs > 0 && net.params() != before.as_slice());
            let acc = evaluate(&net, &split.test, config.loss, Reduction::Mean).unwrap().accuracy;
            let rec = &outcome.records[round];
            assert_eq!(rec.test_accuracy, acc, "reinitialize = {reinitialize}, round {round}");
            assert_eq!(rec.train_epochs, epochs);
            if round < config.rounds {
                let batch =
                    select(&net, &labeled, &unlabeled, config.query_size, &strategy, config.loss, round).unwrap();
                assert_eq!(rec.query, batch.indices);
                let moved = unlabeled.take(&batch.indices);
                labeled.extend(moved.into_iter().map(|c| data.sample(c.index)));
            }
        }
    }
}

#[test]
fn metrics_are_recorded_when_enabled() {
    let config = ExperimentConfig {
        metrics: [Metric::Accuracy, Metric::G, Metric::Alignment, Metric::Bound, Metric::Mmd, Metric::ApproxRatio]
            .into(),
        seeds: vec![0],
        ..small_config(StrategyKind::Dynamical)
    };
    let result = run_active_learning(&config).unwrap();
    let recs = &result.seeds[0].records;
    for r in recs {
        assert!(r.g.unwrap() >= 0.0);
        assert!(r.alignment.unwrap() >= 0.0);
        assert!(r.bound.unwrap() > 0.0);
        assert!(r.mmd.unwrap() >= 0.0);
    }
    assert!(recs[0].approx_ratio.is_some());
    assert!(result.aggregate.unwrap().single_seed);
}

fn write_config(dir: &Path, config: &ExperimentConfig) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string(config).unwrap()).unwrap();
    path
}

fn cli(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_dynamical"))
        .args(args)
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .unwrap()
        .code()
        .unwrap()
}

#[test]
fn outputs_and_aggregate_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let config =
        ExperimentConfig { metrics: [Metric::Accuracy, Metric::G].into(), ..small_config(StrategyKind::Entropy) };
    let path = write_config(dir.path(), &config);
    let out = dir.path().join("out");
    assert_eq!(cli(&["run", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);

    let mut reader = csv::Reader::from_path(out.join("records.csv")).unwrap();
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>().join(","), RECORDS_HEADER);
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), config.seeds.len() * (config.rounds + 1));
    assert!(rows.iter().all(|r| r[6].is_empty() && !r[5].is_empty()));

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["fingerprint"].as_str().unwrap(), config.fingerprint().unwrap());
    for round in 0..=config.rounds {
        let accs: Vec<f64> =
            rows.iter().filter(|r| r[1] == *round.to_string()).map(|r| r[4].parse().unwrap()).collect();
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        let reported = summary["aggregate"]["rounds"][round]["metrics"]["test_accuracy"]["mean"].as_f64().unwrap();
        assert_eq!(mean, reported, "round {round}");
    }
    for seed in &config.seeds {
        let log = std::fs::read_to_string(out.join(format!("queries_seed{seed}.jsonl"))).unwrap();
        let lines: Vec<serde_json::Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), config.rounds);
        assert_eq!(lines[0]["strategy"], "entropy");
        assert_eq!(lines[0]["indices"].as_array().unwrap().len(), config.query_size);
    }
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let missing = dir.path().join("missing.json");
    assert_eq!(cli(&["run", "--config", missing.to_str().unwrap(), "--out", out]), 3);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"dataset": {"kind": "gaussian_mixture"}, "strategy": {"kind": "dynamical"}}"#).unwrap();
    assert_eq!(cli(&["run", "--config", bad.to_str().unwrap(), "--out", out]), 3);

    let over_budget = ExperimentConfig { rounds: 40, ..small_config(StrategyKind::Random) };
    assert_eq!(cli(&["run", "--config", write_config(dir.path(), &over_budget).to_str().unwrap(), "--out", out]), 3);

    let diverging = ExperimentConfig {
        schedule: TrainSchedule { learning_rate: 1e200, max_epochs: 5, ..Default::default() },
        ..small_config(StrategyKind::Random)
    };
    assert_eq!(cli(&["run", "--config", write_config(dir.path(), &diverging).to_str().unwrap(), "--out", out]), 2);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(Path::new(out).join("summary.json")).unwrap()).unwrap();
    assert!(summary["seeds"][0]["error"].as_str().unwrap().contains("diverged"));

    let csv_out = dir.path().join("rings.csv");
    assert_eq!(
        cli(&[
            "dataset",
            "--kind",
            "rings",
            "--radii",
            "1,2,3",
            "--per-class",
            "10",
            "--out",
            csv_out.to_str().unwrap()
        ]),
        0
    );
    let data = dynamical::harness::Dataset::read_csv(&csv_out).unwrap();
    assert_eq!((data.len(), data.classes, data.dim()), (30, 3, 2));
    assert_eq!(cli(&["dataset", "--kind", "gaussian_mixture", "--dim", "2", "--out", csv_out.to_str().unwrap()]), 3);

    assert_eq!(cli(&["verify", "--scale", "quick", "--out", dir.path().join("verify").to_str().unwrap()]), 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify/verify.json")).unwrap()).unwrap();
    assert_eq!(report["theorem1"]["pass"], 100);
    assert_eq!(report["theorem1"]["fail"], 0);
    let bounds = std::fs::read_to_string(dir.path().join("verify/bounds.csv")).unwrap();
    assert_eq!(bounds.lines().count(), 101);
}

#[test]
fn sweep_writes_one_directory_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = serde_json::json!({
        "base": ExperimentConfig { seeds: vec![0], rounds: 2, ..small_config(StrategyKind::Random) },
        "strategies": [{"kind": "random"}, {"kind": "gamma_variant", "seed": 0}],
        "query_sizes": [2, 4],
    });
    let mut sweep = sweep;
    sweep["strategies"][1] = serde_json::json!({"kind": {"gamma_variant": "inf"}});
    let path = dir.path().join("sweep.json");
    std::fs::write(&path, sweep.to_string()).unwrap();
    let out = dir.path().join("grid");
    assert_eq!(cli(&["sweep", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    let mut cells: Vec<String> =
        std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    cells.sort();
    assert_eq!(cells, ["gamma_variant(inf)_b2", "gamma_variant(inf)_b4", "random_b2", "random_b4"]);
}

#[test]
fn verify_quick_passes_and_detects_a_flipped_cross_term() {
    let report = verify_suite(Scale::Quick, 11);
    assert!(report.passed, "{:#?}", report.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
    let broken = dynamical::harness::verify::decomposition_residuals(20, 11, -1.0).unwrap();
    assert!(broken.iter().any(|(r, _)| *r > 1e-8));
}

#[test]
fn small_steps_never_increase_the_loss() {
    let mut rng = stream(21, "descent", 0);
    let config = NetworkConfig { hidden_dims: vec![32], ..NetworkConfig::mlp(4, 3, rng.random()) };
    let mut net = Network::init(&config).unwrap();
    let data = DatasetSpec::GaussianMixture { classes: 3, dim: 4, per_class: 14, sigma: 0.7, mean_scale: 1.0, seed: 2 }
        .generate()
        .unwrap();
    let samples: Vec<_> = (0..40).map(|i| data.sample(i)).collect();
    for kind in [LossKind::CrossEntropy, LossKind::Mse] {
        let mut previous = f64::INFINITY;
        for _ in 0..300 {
            let loss = gradient_step(&mut net, &samples, 1e-3, kind, Reduction::Mean).unwrap();
            assert!(loss <= previous, "{loss} > {previous}");
            previous = loss;
        }
    }
}

#[test]
fn separable_data_is_fit() {
    let data = DatasetSpec::GaussianMixture { classes: 2, dim: 2, per_class: 50, sigma: 0.2, mean_scale: 2.0, seed: 4 }
        .generate()
        .unwrap();
    let pool = LabeledPool::new((0..data.len()).map(|i| data.sample(i)).collect());
    let config = NetworkConfig { hidden_dims: vec![32], ..NetworkConfig::mlp(2, 2, 9) };
    let mut net = Network::init(&config).unwrap();
    let (epochs, eval) = train_in_place(&mut net, &pool, &TrainSchedule::default(), LossKind::CrossEntropy).unwrap();
    assert!(eval.accuracy >= 0.99, "accuracy {} after {epochs} epochs", eval.accuracy);
    assert!(epochs <= 5000);
}
