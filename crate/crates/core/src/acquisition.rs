//! Query strategies: dynamical top-b selection, its γ-weighted variants and
//! the classical baselines.
//!
//! Every strategy sees the unlabeled candidates in ascending identifier order,
//! so a result never depends on how the pool happens to be stored. Score ties
//! go to the lower identifier.

use std::cmp::Ordering;
use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DeltaScorer, Gamma};
use crate::error::{Error, Result};
use crate::nnkit::{argmax, softmax, LossKind, Network};
use crate::pool::{Candidate, LabeledPool, Sample, UnlabeledPool};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Dynamical,
    Random,
    Confidence,
    Margin,
    Entropy,
    Coreset,
    Badge,
    GammaVariant(Gamma),
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            StrategyKind::Dynamical => "dynamical",
            StrategyKind::Random => "random",
            StrategyKind::Confidence => "confidence",
            StrategyKind::Margin => "margin",
            StrategyKind::Entropy => "entropy",
            StrategyKind::Coreset => "coreset",
            StrategyKind::Badge => "badge",
            StrategyKind::GammaVariant(g) => return write!(f, "gamma_variant({g})"),
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub kind: StrategyKind,
    /// Seeds the `random` and `badge` streams.
    #[serde(default)]
    pub seed: u64,
}

impl Strategy {
    pub fn new(kind: StrategyKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    pub fn gamma_variant(gamma: f64, seed: u64) -> Result<Self> {
        Ok(Self { kind: StrategyKind::GammaVariant(Gamma::new(gamma)?), seed })
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            StrategyKind::GammaVariant(g) => g.validate().map_err(|e| Error::Config(e.to_string())),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        self.kind.to_string()
    }
}

/// Selected identifiers, in selection order, with the criterion value of each
/// (absent for the sampling-based `random` and `badge`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryBatch {
    pub indices: Vec<usize>,
    pub scores: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub round: usize,
    pub strategy: String,
    pub indices: Vec<usize>,
    pub scores: Vec<f64>,
}

impl QueryBatch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn record(&self, round: usize, strategy: &Strategy) -> QueryRecord {
        QueryRecord {
            round,
            strategy: strategy.name(),
            indices: self.indices.clone(),
            scores: self.scores.clone().unwrap_or_default(),
        }
    }

    pub fn to_json(&self, round: usize, strategy: &Strategy) -> Result<String> {
        Ok(serde_json::to_string(&self.record(round, strategy))?)
    }
}

/// `argmax_i f^i(x)`, lowest class on ties.
pub fn pseudo_label(net: &Network, x: &[f64]) -> Result<usize> {
    Ok(argmax(&net.forward(x)?))
}

fn sorted_candidates(unlabeled: &UnlabeledPool) -> Vec<&Candidate> {
    let mut cands: Vec<&Candidate> = unlabeled.candidates().iter().collect();
    cands.sort_by_key(|c| c.index);
    cands
}

fn check_request(unlabeled: &UnlabeledPool, b: usize) -> Result<()> {
    if b == 0 {
        return Err(Error::Input("query size must be at least 1".into()));
    }
    if unlabeled.is_empty() {
        return Err(Error::Input("unlabeled pool is empty".into()));
    }
    Ok(())
}

/// Keeps the `b` entries with the largest key; ties go to the lower identifier.
fn top_b(mut scored: Vec<(usize, f64, f64)>, b: usize) -> QueryBatch {
    // (identifier, ranking key, reported score)
    let key = |v: f64| if v.is_nan() { f64::NEG_INFINITY } else { v };
    scored.sort_by(|a, c| key(c.1).partial_cmp(&key(a.1)).unwrap_or(Ordering::Equal).then(a.0.cmp(&c.0)));
    scored.truncate(b);
    QueryBatch { indices: scored.iter().map(|s| s.0).collect(), scores: Some(scored.iter().map(|s| s.2).collect()) }
}

/// Pseudo-labeled change-of-dynamics score for every candidate, in identifier order.
pub fn score_dynamical(
    net: &Network,
    labeled: &LabeledPool,
    unlabeled: &UnlabeledPool,
    kind: LossKind,
) -> Result<Vec<crate::dynamics::DeltaScore>> {
    let scorer = DeltaScorer::new(net, labeled, kind)?;
    sorted_candidates(unlabeled)
        .into_iter()
        .map(|c| scorer.score(&Sample::new(c.x.clone(), pseudo_label(net, &c.x)?, c.index)))
        .collect()
}

/// The `b` candidates with the largest change of training dynamics under
/// their pseudo-labels.
pub fn select_dynamical(
    net: &Network,
    labeled: &LabeledPool,
    unlabeled: &UnlabeledPool,
    b: usize,
    kind: LossKind,
) -> Result<QueryBatch> {
    select_gamma(net, labeled, unlabeled, b, Gamma::Finite(2.0), kind)
}

/// Top-b by `‖∇ℓ‖² + γ · interaction`.
pub fn select_gamma(
    net: &Network,
    labeled: &LabeledPool,
    unlabeled: &UnlabeledPool,
    b: usize,
    gamma: Gamma,
    kind: LossKind,
) -> Result<QueryBatch> {
    check_request(unlabeled, b)?;
    gamma.validate()?;
    let scored = score_dynamical(net, labeled, unlabeled, kind)?
        .into_iter()
        .map(|s| {
            let v = gamma.combine(s.grad_norm_sq, s.interaction);
            (s.candidate_index, v, v)
        })
        .collect();
    Ok(top_b(scored, b))
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

fn top_two(p: &[f64]) -> (f64, f64) {
    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &v in p {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    (first, second)
}

/// Baseline selection. `round` keys the random streams so that each round
/// draws fresh but reproducible randomness.
pub fn select_baseline(
    net: &Network,
    labeled: &LabeledPool,
    unlabeled: &UnlabeledPool,
    b: usize,
    strategy: &Strategy,
    round: usize,
) -> Result<QueryBatch> {
    check_request(unlabeled, b)?;
    let cands = sorted_candidates(unlabeled);
    let b = b.min(cands.len());
    match strategy.kind {
        StrategyKind::Dynamical | StrategyKind::GammaVariant(_) => {
            Err(Error::Config(format!("{} is not a baseline strategy", strategy.name())))
        }
        StrategyKind::Random => {
            let mut rng = rng::stream(strategy.seed, "random", round as u64);
            let picks = rand::seq::index::sample(&mut rng, cands.len(), b);
            Ok(QueryBatch { indices: picks.iter().map(|p| cands[p].index).collect(), scores: None })
        }
        StrategyKind::Confidence | StrategyKind::Margin | StrategyKind::Entropy => {
            let mut scored = Vec::with_capacity(cands.len());
            for c in &cands {
                let p = softmax(&net.forward(&c.x)?);
                let (score, key) = match strategy.kind {
                    StrategyKind::Confidence => {
                        let top = top_two(&p).0;
                        (top, -top)
                    }
                    StrategyKind::Margin => {
                        let (first, second) = top_two(&p);
                        (first - second, second - first)
                    }
                    _ => {
                        let h = entropy(&p);
                        (h, h)
                    }
                };
                scored.push((c.index, key, score));
            }
            Ok(top_b(scored, b))
        }
        StrategyKind::Coreset => {
            let labeled_emb = labeled.samples().iter().map(|s| net.last_hidden(&s.x)).collect::<Result<Vec<_>>>()?;
            let cand_emb = cands.iter().map(|c| net.last_hidden(&c.x)).collect::<Result<Vec<_>>>()?;
            let picks = k_center_greedy(&labeled_emb, &cand_emb, b);
            Ok(QueryBatch {
                indices: picks.iter().map(|&(p, _)| cands[p].index).collect(),
                scores: Some(picks.iter().map(|&(_, d)| d).collect()),
            })
        }
        StrategyKind::Badge => {
            let emb = cands.iter().map(|c| badge_embedding(net, &c.x)).collect::<Result<Vec<_>>>()?;
            let mut rng = rng::stream(strategy.seed, "badge", round as u64);
            let picks = kmeans_pp_seeding(&emb, b, &mut rng);
            Ok(QueryBatch { indices: picks.iter().map(|&p| cands[p].index).collect(), scores: None })
        }
    }
}

/// Dispatches to the dynamical family or the baselines.
pub fn select(
    net: &Network,
    labeled: &LabeledPool,
    unlabeled: &UnlabeledPool,
    b: usize,
    strategy: &Strategy,
    kind: LossKind,
    round: usize,
) -> Result<QueryBatch> {
    match strategy.kind {
        StrategyKind::Dynamical => select_dynamical(net, labeled, unlabeled, b, kind),
        StrategyKind::GammaVariant(g) => select_gamma(net, labeled, unlabeled, b, g, kind),
        _ => select_baseline(net, labeled, unlabeled, b, strategy, round),
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Greedy k-center: repeatedly takes the candidate farthest from its nearest
/// labeled-or-selected embedding. Returns `(candidate position, distance at
/// selection)`; with no labeled embeddings the first pick is position 0.
pub fn k_center_greedy(labeled: &[Vec<f64>], candidates: &[Vec<f64>], b: usize) -> Vec<(usize, f64)> {
    let mut nearest: Vec<f64> =
        candidates.iter().map(|c| labeled.iter().map(|l| sq_dist(c, l)).fold(f64::INFINITY, f64::min)).collect();
    let mut taken = vec![false; candidates.len()];
    let mut picks = Vec::with_capacity(b);
    for _ in 0..b.min(candidates.len()) {
        let mut best: Option<usize> = None;
        for (p, &d) in nearest.iter().enumerate() {
            if !taken[p] && best.is_none_or(|q| d > nearest[q]) {
                best = Some(p);
            }
        }
        let Some(p) = best else { break };
        taken[p] = true;
        picks.push((p, nearest[p].sqrt()));
        for (q, c) in candidates.iter().enumerate() {
            nearest[q] = nearest[q].min(sq_dist(c, &candidates[p]));
        }
    }
    picks
}

/// `(σ(f(x)) − onehot(ŷ)) ⊗ h(x)`: the last-layer weight gradient of the
/// cross-entropy loss at the pseudo-label, flattened class-major.
pub fn badge_embedding(net: &Network, x: &[f64]) -> Result<Vec<f64>> {
    let logits = net.forward(x)?;
    let hidden = net.last_hidden(x)?;
    let mut p = softmax(&logits);
    p[argmax(&logits)] -= 1.0;
    Ok(p.iter().flat_map(|&pi| hidden.iter().map(move |&h| pi * h)).collect())
}

/// k-means++ seeding: the first center is uniform, each later one is drawn
/// with probability proportional to its squared distance from the chosen
/// centers. If every remaining distance is zero the lowest unchosen position
/// is taken.
pub fn kmeans_pp_seeding<R: rand::Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<usize> {
    let n = points.len();
    let k = k.min(n);
    if k == 0 {
        return Vec::new();
    }
    let first = rng.random_range(0..n);
    let mut picks = vec![first];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[first])).collect();
    nearest[first] = 0.0;
    let mut taken = vec![false; n];
    taken[first] = true;
    while picks.len() < k {
        let next = match WeightedIndex::new(&nearest) {
            Ok(dist) => dist.sample(rng),
            Err(_) => taken.iter().position(|t| !t).expect("fewer picks than points"),
        };
        taken[next] = true;
        picks.push(next);
        for (q, p) in points.iter().enumerate() {
            nearest[q] = if taken[q] { 0.0 } else { nearest[q].min(sq_dist(p, &points[next])) };
        }
    }
    picks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnkit::{Activation, InitScheme, NetworkConfig};

    fn linear_net(weights: Vec<f64>, classes: usize) -> Network {
        let dim = (weights.len() - classes) / classes;
        let cfg = NetworkConfig {
            input_dim: dim,
            hidden_dims: vec![],
            num_classes: classes,
            activation: Activation::Identity,
            init_scheme: InitScheme::Standard,
            seed: 0,
        };
        Network::from_params(&cfg, weights).unwrap()
    }

    #[test]
    fn pseudo_label_argmax_and_ties() {
        // Identity weights on 3 inputs, zero biases: logits equal x.
        let mut w = vec![0.0; 12];
        for i in 0..3 {
            w[i * 3 + i] = 1.0;
        }
        let net = linear_net(w, 3);
        assert_eq!(pseudo_label(&net, &[0.0, 0.0, 1.0]).unwrap(), 2);
        assert_eq!(pseudo_label(&net, &[0.5, 0.5, 0.5]).unwrap(), 0);
    }

    #[test]
    fn entropy_prefers_uniform() {
        let mut w = vec![0.0; 4];
        w[0] = 1.0;
        let net = linear_net(w, 2);
        let u = UnlabeledPool::new(vec![Candidate { index: 0, x: vec![20.0] }, Candidate { index: 1, x: vec![0.0] }]);
        let q =
            select_baseline(&net, &LabeledPool::default(), &u, 1, &Strategy::new(StrategyKind::Entropy, 0), 0).unwrap();
        assert_eq!(q.indices, vec![1]);
    }

    #[test]
    fn coreset_hand_run() {
        let labeled = vec![vec![0.0]];
        let cands = vec![vec![0.4], vec![0.9], vec![1.0]];
        let picks: Vec<usize> = k_center_greedy(&labeled, &cands, 2).into_iter().map(|p| p.0).collect();
        assert_eq!(picks, vec![2, 0]);
    }

    #[test]
    fn random_is_seeded() {
        let net = linear_net(vec![1.0, 0.0, 0.0, 0.0], 2);
        let u = UnlabeledPool::new((0..20).map(|i| Candidate { index: i, x: vec![i as f64] }).collect());
        let s = Strategy::new(StrategyKind::Random, 11);
        let a = select_baseline(&net, &LabeledPool::default(), &u, 5, &s, 0).unwrap();
        let b = select_baseline(&net, &LabeledPool::default(), &u, 5, &s, 0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        assert!(a.scores.is_none());
    }

    #[test]
    fn rejects_bad_requests() {
        let net = linear_net(vec![1.0, 0.0, 0.0, 0.0], 2);
        let empty = UnlabeledPool::default();
        assert!(select_dynamical(&net, &LabeledPool::default(), &empty, 1, LossKind::CrossEntropy).is_err());
        let u = UnlabeledPool::new(vec![Candidate { index: 0, x: vec![1.0] }]);
        assert!(select_dynamical(&net, &LabeledPool::default(), &u, 0, LossKind::CrossEntropy).is_err());
        let s = Strategy::new(StrategyKind::Dynamical, 0);
        assert!(matches!(select_baseline(&net, &LabeledPool::default(), &u, 1, &s, 0), Err(Error::Config(_))));
    }

    #[test]
    fn kmeans_pp_spreads_out() {
        let pts = vec![vec![0.0], vec![0.0], vec![0.0], vec![100.0]];
        let mut rng = rng::stream(1, "badge", 0);
        let picks = kmeans_pp_seeding(&pts, 2, &mut rng);
        assert_eq!(picks.len(), 2);
        assert!(picks.contains(&3));
        let dup = vec![vec![1.0]; 3];
        let picks = kmeans_pp_seeding(&dup, 3, &mut rng);
        let mut sorted = picks.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2]);
    }

    #[test]
    fn strategy_serialization() {
        let s: Strategy = serde_json::from_str(r#"{"kind": {"gamma_variant": "inf"}, "seed": 3}"#).unwrap();
        assert_eq!(s.name(), "gamma_variant(inf)");
        let s: Strategy = serde_json::from_str(r#"{"kind": "badge"}"#).unwrap();
        assert_eq!(s.seed, 0);
        let q = QueryBatch { indices: vec![4, 2], scores: Some(vec![1.5, 0.5]) };
        assert_eq!(
            q.to_json(1, &Strategy::new(StrategyKind::Dynamical, 0)).unwrap(),
            r#"{"round":1,"strategy":"dynamical","indices":[4,2],"scores":[1.5,0.5]}"#
        );
    }
}
