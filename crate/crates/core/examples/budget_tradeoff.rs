//! Fixed total budget split into more small queries or fewer large ones.

use dynamical::acquisition::{Strategy, StrategyKind};
use dynamical::harness::{run_active_learning, DatasetSpec, ExperimentConfig, Metric, NetworkSpec};
use dynamical::nnkit::{LossKind, TrainSchedule};

fn main() -> dynamical::Result<()> {
    let budget = 60;
    for b in [10, 20, 30, 60] {
        let config = ExperimentConfig {
            dataset: DatasetSpec::GaussianMixture {
                classes: 4,
                dim: 8,
                per_class: 150,
                sigma: 0.6,
                mean_scale: 1.0,
                seed: 0,
            },
            network: NetworkSpec::default(),
            strategy: Strategy::new(StrategyKind::Dynamical, 0),
            initial_size: 20,
            query_size: b,
            rounds: budget / b,
            reinitialize: false,
            schedule: TrainSchedule {
                learning_rate: 0.1,
                max_epochs: 500,
                accuracy_target: 1.01,
                ..Default::default()
            },
            seeds: vec![0, 1, 2],
            test_fraction: 0.2,
            metrics: [Metric::Accuracy].into(),
            loss: LossKind::CrossEntropy,
            ratio_batches: 10,
        };
        let agg = run_active_learning(&config)?.aggregate.expect("all seeds completed");
        let last = agg.rounds.last().expect("at least one round");
        let acc = last.metrics["test_accuracy"];
        println!("b={b:2} R={} final accuracy {:.3} ± {:.3}", config.rounds, acc.mean, acc.std);
    }
    Ok(())
}
