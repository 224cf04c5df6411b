//! Runs a small active-learning experiment with the dynamics criterion and
//! prints the mean test accuracy per round.

use dynamical::acquisition::{Strategy, StrategyKind};
use dynamical::harness::{run_active_learning, DatasetSpec, ExperimentConfig, Metric, NetworkSpec};
use dynamical::nnkit::{LossKind, TrainSchedule};

fn main() -> dynamical::Result<()> {
    let config = ExperimentConfig {
        dataset: DatasetSpec::GaussianMixture {
            classes: 4,
            dim: 8,
            per_class: 100,
            sigma: 0.6,
            mean_scale: 1.0,
            seed: 0,
        },
        network: NetworkSpec { hidden_dims: vec![128], ..Default::default() },
        strategy: Strategy::new(StrategyKind::Dynamical, 0),
        initial_size: 20,
        query_size: 10,
        rounds: 4,
        reinitialize: false,
        schedule: TrainSchedule { learning_rate: 0.1, max_epochs: 300, ..Default::default() },
        seeds: vec![0, 1, 2],
        test_fraction: 0.2,
        metrics: [Metric::Accuracy, Metric::G].into(),
        loss: LossKind::CrossEntropy,
        ratio_batches: 10,
    };
    let result = run_active_learning(&config)?;
    let agg = result.aggregate.expect("all seeds completed");
    println!("fingerprint {}", result.fingerprint);
    for r in &agg.rounds {
        let acc = r.metrics["test_accuracy"];
        println!(
            "round {} |S|={:3} accuracy {:.3} ± {:.3}  G {:.3e}",
            r.round, r.labeled_size, acc.mean, acc.std, r.metrics["G"].mean
        );
    }
    Ok(())
}
