//! Compares every acquisition strategy on the same Gaussian-mixture task.

use dynamical::acquisition::{Strategy, StrategyKind};
use dynamical::dynamics::Gamma;
use dynamical::harness::{run_active_learning, DatasetSpec, ExperimentConfig, Metric, NetworkSpec};
use dynamical::nnkit::{LossKind, TrainSchedule};

fn main() -> dynamical::Result<()> {
    let kinds = [
        StrategyKind::Dynamical,
        StrategyKind::GammaVariant(Gamma::Finite(0.0)),
        StrategyKind::GammaVariant(Gamma::Infinite),
        StrategyKind::Random,
        StrategyKind::Confidence,
        StrategyKind::Margin,
        StrategyKind::Entropy,
        StrategyKind::Coreset,
        StrategyKind::Badge,
    ];
    for kind in kinds {
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
            strategy: Strategy::new(kind, 0),
            initial_size: 20,
            query_size: 10,
            rounds: 5,
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
        let curve: Vec<String> =
            (0..=config.rounds).map(|r| format!("{:.3}", agg.mean(r, Metric::Accuracy).unwrap_or(f64::NAN))).collect();
        println!("{:<20} {}", config.strategy.name(), curve.join(" "));
    }
    Ok(())
}
