//! Per-round mean and sample standard deviation across seeds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::Metric;
use super::experiment::RoundRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// `n − 1` denominator; 0 when `n = 1`.
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std, n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundAggregate {
    pub round: usize,
    pub labeled_size: usize,
    pub metrics: BTreeMap<String, Stat>,
    pub epochs: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub seeds: Vec<u64>,
    pub single_seed: bool,
    pub rounds: Vec<RoundAggregate>,
}

impl Aggregate {
    pub fn mean(&self, round: usize, metric: Metric) -> Option<f64> {
        self.rounds.get(round)?.metrics.get(metric_key(metric)).map(|s| s.mean)
    }
}

pub fn metric_key(metric: Metric) -> &'static str {
    match metric {
        Metric::Accuracy => "test_accuracy",
        Metric::G => "G",
        Metric::Alignment => "alignment",
        Metric::Bound => "B",
        Metric::Mmd => "mmd",
        Metric::ApproxRatio => "approx_ratio",
    }
}

const ALL_METRICS: [Metric; 6] =
    [Metric::Accuracy, Metric::G, Metric::Alignment, Metric::Bound, Metric::Mmd, Metric::ApproxRatio];

/// Seeds are processed in ascending order, so the result does not depend on
/// the order of `per_seed`.
pub fn aggregate(per_seed: &[(u64, Vec<RoundRecord>)]) -> Result<Aggregate> {
    if per_seed.is_empty() {
        return Err(Error::Aggregation("no seeds to aggregate".into()));
    }
    let mut sorted: Vec<&(u64, Vec<RoundRecord>)> = per_seed.iter().collect();
    sorted.sort_by_key(|(s, _)| *s);
    let rounds = sorted[0].1.len();
    if let Some((seed, recs)) = sorted.iter().map(|p| (p.0, &p.1)).find(|(_, r)| r.len() != rounds) {
        return Err(Error::Aggregation(format!(
            "seed {seed} has {} rounds, seed {} has {rounds}",
            recs.len(),
            sorted[0].0
        )));
    }
    let mut out = Vec::with_capacity(rounds);
    for r in 0..rounds {
        let recs: Vec<&RoundRecord> = sorted.iter().map(|(_, recs)| &recs[r]).collect();
        let mut metrics = BTreeMap::new();
        for metric in ALL_METRICS {
            let values: Vec<f64> = recs.iter().filter_map(|rec| rec.metric(metric)).collect();
            if let Some(stat) = Stat::of(&values) {
                metrics.insert(metric_key(metric).to_string(), stat);
            }
        }
        let epochs: Vec<f64> = recs.iter().map(|rec| rec.train_epochs as f64).collect();
        out.push(RoundAggregate {
            round: r,
            labeled_size: recs[0].labeled_size,
            metrics,
            epochs: Stat::of(&epochs).expect("at least one seed"),
        });
    }
    Ok(Aggregate { seeds: sorted.iter().map(|p| p.0).collect(), single_seed: sorted.len() == 1, rounds: out })
}
