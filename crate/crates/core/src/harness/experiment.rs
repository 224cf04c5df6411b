//! The pool-based active-learning loop, repeated over seeds.

use serde::{Deserialize, Serialize};

use crate::acquisition::{pseudo_label, select, QueryRecord, Strategy};
use crate::dynamics::{approximation_ratio, training_dynamics};
use crate::error::{Error, Result};
use crate::kernelspace::empirical_trace_gram;
use crate::linalg::Matrix;
use crate::nnkit::{evaluate, train_in_place, Network, Reduction};
use crate::pool::{Candidate, LabeledPool, Sample, UnlabeledPool};
use crate::rng;
use crate::theoryprobe::{alignment, generalization_bound, mmd_empirical};

use super::aggregate::{aggregate, Aggregate};
use super::config::{ExperimentConfig, Metric};
use super::datasets::Dataset;

/// Metrics are taken after training and before querying, so each record
/// describes the model that chose `query`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub labeled_size: usize,
    pub test_accuracy: f64,
    pub train_epochs: usize,
    pub g: Option<f64>,
    pub alignment: Option<f64>,
    pub bound: Option<f64>,
    pub mmd: Option<f64>,
    pub approx_ratio: Option<f64>,
    pub query: Vec<usize>,
    pub query_scores: Option<Vec<f64>>,
}

impl RoundRecord {
    pub fn metric(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Accuracy => Some(self.test_accuracy),
            Metric::G => self.g,
            Metric::Alignment => self.alignment,
            Metric::Bound => self.bound,
            Metric::Mmd => self.mmd,
            Metric::ApproxRatio => self.approx_ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub records: Vec<RoundRecord>,
    /// Set when the seed stopped early; `records` then holds the rounds that
    /// completed.
    pub error: Option<String>,
    /// Distinct classes present in the initial labeled set.
    pub initial_class_coverage: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub fingerprint: String,
    pub strategy: String,
    pub seeds: Vec<SeedOutcome>,
    /// Over the seeds that completed.
    pub aggregate: Option<Aggregate>,
}

impl RunResult {
    pub fn has_errors(&self) -> bool {
        self.seeds.iter().any(|s| s.error.is_some())
    }
}

/// Test/pool split stratified by class, then `initial_size` pool points drawn
/// uniformly as S0.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub test: Vec<Sample>,
    pub pool: Vec<Sample>,
    pub initial: Vec<usize>,
}

pub fn split_dataset(data: &Dataset, test_fraction: f64, initial_size: usize, seed: u64) -> Result<Split> {
    let mut rng = rng::stream(seed, "split", 0);
    let mut test = Vec::new();
    let mut pool = Vec::new();
    for k in 0..data.classes {
        let mut members: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == k).collect();
        rand::seq::SliceRandom::shuffle(members.as_mut_slice(), &mut rng);
        let n_test = (test_fraction * members.len() as f64).round() as usize;
        for (j, &i) in members.iter().enumerate() {
            if j < n_test {
                test.push(data.sample(i))
            } else {
                pool.push(data.sample(i))
            }
        }
    }
    test.sort_by_key(|s| s.index);
    pool.sort_by_key(|s| s.index);
    if initial_size > pool.len() {
        return Err(Error::Config(format!("initial_size {initial_size} exceeds the pool size {}", pool.len())));
    }
    let mut init_rng = rng::stream(seed, "initial", 0);
    let initial =
        rand::seq::index::sample(&mut init_rng, pool.len(), initial_size).into_iter().map(|p| pool[p].index).collect();
    Ok(Split { test, pool, initial })
}

/// Checks the configuration against the generated data.
pub fn validate_against(config: &ExperimentConfig, data: &Dataset) -> Result<()> {
    if data.classes < 2 {
        return Err(Error::Config("dataset must contain at least 2 classes".into()));
    }
    let n_test: usize = data.class_counts().iter().map(|&c| (config.test_fraction * c as f64).round() as usize).sum();
    let pool = data.len() - n_test;
    if config.initial_size > pool {
        return Err(Error::Config(format!("initial_size {} exceeds the pool size {pool}", config.initial_size)));
    }
    let budget = config.query_size * config.rounds;
    if budget > pool - config.initial_size {
        return Err(Error::Config(format!(
            "budget b·R = {budget} exceeds the {} unlabeled points",
            pool - config.initial_size
        )));
    }
    Ok(())
}

fn network_seed(run_seed: u64, config: &ExperimentConfig, round: usize) -> u64 {
    let counter = if config.reinitialize { round as u64 } else { 0 };
    rng::derive_seed(run_seed ^ config.network.seed, "network", counter)
}

fn metrics_for(
    config: &ExperimentConfig,
    net: &Network,
    labeled: &LabeledPool,
    initial: &[Sample],
    unlabeled: &UnlabeledPool,
    round: usize,
    run_seed: u64,
    record: &mut RoundRecord,
) -> Result<()> {
    let m = &config.metrics;
    if m.contains(&Metric::G) {
        record.g = Some(training_dynamics(net, labeled, config.loss)?.value);
    }
    if m.contains(&Metric::Alignment) || m.contains(&Metric::Bound) {
        let gram = empirical_trace_gram(net, &labeled.features())?;
        let y = Matrix::one_hot(&labeled.labels(), net.num_classes());
        if m.contains(&Metric::Alignment) {
            record.alignment = Some(alignment(&gram, &y)?.value);
        }
        if m.contains(&Metric::Bound) {
            record.bound = Some(generalization_bound(&gram, &y)?.value);
        }
    }
    if m.contains(&Metric::Mmd) && initial.len() >= 2 {
        let joint: Vec<Vec<f64>> = initial.iter().map(|s| s.x.clone()).chain(labeled.features()).collect();
        let gram = empirical_trace_gram(net, &joint)?;
        record.mmd = Some(mmd_empirical(&gram, initial.len(), labeled.len())?.mmd);
    }
    if m.contains(&Metric::ApproxRatio) && !unlabeled.is_empty() {
        let b = config.query_size.max(1).min(unlabeled.len());
        let mut rng = rng::stream(run_seed, "approx-ratio", round as u64);
        let mut total = 0.0;
        let mut count = 0usize;
        for _ in 0..config.ratio_batches {
            let picks = rand::seq::index::sample(&mut rng, unlabeled.len(), b);
            let batch = picks
                .iter()
                .map(|p| {
                    let c = &unlabeled.candidates()[p];
                    Ok(Sample::new(c.x.clone(), pseudo_label(net, &c.x)?, c.index))
                })
                .collect::<Result<Vec<_>>>()?;
            match approximation_ratio(net, labeled, &batch, config.loss) {
                Ok(r) => {
                    total += r;
                    count += 1;
                }
                Err(Error::RatioUndefined) => {}
                Err(e) => return Err(e),
            }
        }
        record.approx_ratio = (count > 0).then(|| total / count as f64);
    }
    Ok(())
}

/// Runs one seed. On failure, returns the records completed so far with the error.
pub fn run_seed(config: &ExperimentConfig, data: &Dataset, seed: u64) -> SeedOutcome {
    let mut records = Vec::new();
    let mut coverage = 0;
    let result = run_seed_inner(config, data, seed, &mut records, &mut coverage);
    SeedOutcome { seed, records, error: result.err().map(|e| e.to_string()), initial_class_coverage: coverage }
}

fn run_seed_inner(
    config: &ExperimentConfig,
    data: &Dataset,
    seed: u64,
    records: &mut Vec<RoundRecord>,
    coverage: &mut usize,
) -> Result<()> {
    let split = split_dataset(data, config.test_fraction, config.initial_size, seed)?;
    let initial: Vec<Sample> = split.initial.iter().map(|&i| data.sample(i)).collect();
    let mut classes: Vec<usize> = initial.iter().map(|s| s.y).collect();
    classes.sort_unstable();
    classes.dedup();
    *coverage = classes.len();

    let mut labeled = LabeledPool::new(initial.clone());
    let mut unlabeled = UnlabeledPool::new(
        split
            .pool
            .iter()
            .filter(|s| !split.initial.contains(&s.index))
            .map(|s| Candidate { index: s.index, x: s.x.clone() })
            .collect(),
    );
    let strategy = Strategy { seed: rng::derive_seed(seed, "strategy", config.strategy.seed), ..config.strategy };
    let net_config = config.network.build(data.dim(), data.classes, network_seed(seed, config, 0));
    let mut net = Network::init(&net_config)?;

    for round in 0..=config.rounds {
        if round > 0 && config.reinitialize {
            net = Network::init(&config.network.build(data.dim(), data.classes, network_seed(seed, config, round)))?;
        }
        let (epochs, _) = train_in_place(&mut net, &labeled, &config.schedule, config.loss)?;
        let test_accuracy = evaluate(&net, &split.test, config.loss, Reduction::Mean)?.accuracy;
        let mut record = RoundRecord {
            round,
            labeled_size: labeled.len(),
            test_accuracy,
            train_epochs: epochs,
            g: None,
            alignment: None,
            bound: None,
            mmd: None,
            approx_ratio: None,
            query: Vec::new(),
            query_scores: None,
        };
        metrics_for(config, &net, &labeled, &initial, &unlabeled, round, seed, &mut record)?;
        if round < config.rounds {
            if unlabeled.len() < config.query_size {
                return Err(Error::Run(format!("pool exhausted at round {round}")));
            }
            let batch = select(&net, &labeled, &unlabeled, config.query_size, &strategy, config.loss, round)?;
            let moved = unlabeled.take(&batch.indices);
            labeled.extend(moved.into_iter().map(|c| data.sample(c.index)));
            record.query = batch.indices;
            record.query_scores = batch.scores;
        }
        records.push(record);
    }
    Ok(())
}

/// Runs every seed (in parallel threads) and aggregates the completed ones.
pub fn run_active_learning(config: &ExperimentConfig) -> Result<RunResult> {
    config.validate()?;
    let data = config.dataset.generate()?;
    validate_against(config, &data)?;
    let mut seeds = config.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    let outcomes: Vec<SeedOutcome> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&s| {
                let data = &data;
                scope.spawn(move || run_seed(config, data, s))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("seed worker panicked")).collect()
    });
    let completed: Vec<(u64, Vec<RoundRecord>)> =
        outcomes.iter().filter(|o| o.error.is_none()).map(|o| (o.seed, o.records.clone())).collect();
    let aggregate = if completed.is_empty() { None } else { Some(aggregate(&completed)?) };
    Ok(RunResult { fingerprint: config.fingerprint()?, strategy: config.strategy.name(), seeds: outcomes, aggregate })
}

/// One `{round, strategy, indices, scores}` record per query made.
pub fn query_records(result: &RunResult, outcome: &SeedOutcome) -> Vec<QueryRecord> {
    outcome
        .records
        .iter()
        .filter(|r| !r.query.is_empty())
        .map(|r| QueryRecord {
            round: r.round,
            strategy: result.strategy.clone(),
            indices: r.query.clone(),
            scores: r.query_scores.clone().unwrap_or_default(),
        })
        .collect()
}
