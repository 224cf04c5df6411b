//! The training-dynamics functional `G(S)`, its per-set and per-candidate
//! increments, the approximation ratio and the γ-weighted criterion family.
//!
//! `G(S)` is evaluated as `‖Σ_{(x,y)∈S} ∇_θ ℓ(f(x), y)‖²`, which equals the
//! kernel double sum `Σ_{i,j} d^iᵀ K^{ij} d^j`; [`training_dynamics_kernel_form`]
//! computes the latter independently from empirical NTK blocks.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::kernelspace::empirical_ntk;
use crate::nnkit::{residual, GradientVector, LossKind, Network};
use crate::numfmt::fmt_g17;
use crate::pool::{LabeledPool, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsValue {
    pub value: f64,
    pub loss_kind: LossKind,
    pub pool_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaScore {
    pub candidate_index: usize,
    pub pseudo_label: usize,
    pub delta: f64,
    pub grad_norm_sq: f64,
    pub interaction: f64,
}

/// `Σ_{(x,y)∈samples} ∇_θ ℓ(f(x), y)`.
pub fn pool_gradient(net: &Network, samples: &[Sample], kind: LossKind) -> Result<GradientVector> {
    let mut sum = vec![0.0; net.num_params()];
    for s in samples {
        net.accumulate_loss_gradient(s, kind, 1.0, &mut sum)?;
    }
    Ok(GradientVector(sum))
}

fn dynamics_of(net: &Network, samples: &[Sample], kind: LossKind) -> Result<f64> {
    Ok(pool_gradient(net, samples, kind)?.norm_sq())
}

/// `G(S) = ‖Σ ∇ℓ‖²`.
pub fn training_dynamics(net: &Network, pool: &LabeledPool, kind: LossKind) -> Result<DynamicsValue> {
    Ok(DynamicsValue { value: dynamics_of(net, pool.samples(), kind)?, loss_kind: kind, pool_size: pool.len() })
}

/// `Σ_{i,j} Σ_{a,b} d^i_a K^{ij}(x_a, x_b) d^j_b` from the full empirical NTK.
/// Quadratic in the pool size; meant as a cross-check on small pools.
pub fn training_dynamics_kernel_form(net: &Network, samples: &[Sample], kind: LossKind) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let xs: Vec<Vec<f64>> = samples.iter().map(|s| s.x.clone()).collect();
    let ntk = empirical_ntk(net, &xs)?;
    let d = stacked_residuals(net, samples, kind)?;
    let mut total = 0.0;
    for (r, dr) in d.iter().enumerate() {
        if *dr == 0.0 {
            continue;
        }
        total += dr * crate::linalg::dot(ntk.matrix.row(r), &d);
    }
    Ok(total)
}

/// Residuals `d^i(x) = ∂ℓ/∂f^i` flattened sample-major, class-minor.
fn stacked_residuals(net: &Network, samples: &[Sample], kind: LossKind) -> Result<Vec<f64>> {
    let mut d = Vec::with_capacity(samples.len() * net.num_classes());
    for s in samples {
        d.extend(residual(&net.forward(&s.x)?, s.y, kind));
    }
    Ok(d)
}

fn check_disjoint(pool: &LabeledPool, batch: &[Sample]) -> Result<()> {
    let pool_ids: HashSet<usize> = pool.samples().iter().map(|s| s.index).collect();
    let mut seen = HashSet::new();
    for s in batch {
        if pool_ids.contains(&s.index) {
            return Err(Error::Input(format!("batch sample {} is already in the labeled pool", s.index)));
        }
        if !seen.insert(s.index) {
            return Err(Error::Input(format!("batch sample {} appears twice", s.index)));
        }
    }
    Ok(())
}

/// `Δ(Q̂ | S) = G(S ∪ Q̂) − G(S)`, both evaluated at the current parameters.
/// Batch labels are taken as given (pseudo-labels in the acquisition setting).
pub fn delta_set(net: &Network, pool: &LabeledPool, batch: &[Sample], kind: LossKind) -> Result<f64> {
    check_disjoint(pool, batch)?;
    if batch.is_empty() {
        return Ok(0.0);
    }
    let base = pool_gradient(net, pool.samples(), kind)?;
    let mut extended = base.clone();
    extended.axpy(1.0, &pool_gradient(net, batch, kind)?);
    Ok(extended.norm_sq() - base.norm_sq())
}

/// Scores candidates against a fixed pool-gradient sum.
#[derive(Debug, Clone)]
pub struct DeltaScorer<'a> {
    net: &'a Network,
    pool_gradient: GradientVector,
    kind: LossKind,
}

impl<'a> DeltaScorer<'a> {
    pub fn new(net: &'a Network, pool: &LabeledPool, kind: LossKind) -> Result<Self> {
        Ok(Self { net, pool_gradient: pool_gradient(net, pool.samples(), kind)?, kind })
    }

    pub fn with_pool_gradient(net: &'a Network, pool_gradient: GradientVector, kind: LossKind) -> Result<Self> {
        if pool_gradient.len() != net.num_params() {
            return Err(Error::Input("pool gradient length does not match the network".into()));
        }
        Ok(Self { net, pool_gradient, kind })
    }

    pub fn pool_gradient(&self) -> &GradientVector {
        &self.pool_gradient
    }

    /// `‖∇ℓ(x, ŷ)‖² + 2 ∇ℓ(x, ŷ)ᵀ Σ_S ∇ℓ`; `candidate.y` is the pseudo-label.
    pub fn score(&self, candidate: &Sample) -> Result<DeltaScore> {
        let g = self.net.loss_gradient(candidate, self.kind)?;
        let grad_norm_sq = g.norm_sq();
        let interaction = g.dot(&self.pool_gradient);
        Ok(DeltaScore {
            candidate_index: candidate.index,
            pseudo_label: candidate.y,
            delta: grad_norm_sq + 2.0 * interaction,
            grad_norm_sq,
            interaction,
        })
    }

    pub fn gamma_score(&self, candidate: &Sample, gamma: Gamma) -> Result<f64> {
        let s = self.score(candidate)?;
        Ok(gamma.combine(s.grad_norm_sq, s.interaction))
    }
}

/// Per-candidate change of training dynamics (the explicit `Δ({(x, ŷ)} | S)`).
///
/// `cached_pool_gradient`, if given, must equal `Σ_S ∇ℓ`; with `verify_cache`
/// it is recomputed and a mismatch beyond 1e-9 (relative) is an error.
pub fn delta_single(
    net: &Network,
    pool: &LabeledPool,
    candidate: &Sample,
    cached_pool_gradient: Option<&GradientVector>,
    verify_cache: bool,
    kind: LossKind,
) -> Result<DeltaScore> {
    let scorer = match cached_pool_gradient {
        Some(cached) => {
            if verify_cache {
                let fresh = pool_gradient(net, pool.samples(), kind)?;
                if fresh.len() != cached.len() {
                    return Err(Error::StaleCache { deviation: f64::INFINITY });
                }
                let deviation = fresh.0.iter().zip(&cached.0).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                let scale = fresh.0.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                if deviation > 1e-9 * scale {
                    return Err(Error::StaleCache { deviation });
                }
            }
            DeltaScorer::with_pool_gradient(net, cached.clone(), kind)?
        }
        None => DeltaScorer::new(net, pool, kind)?,
    };
    scorer.score(candidate)
}

/// Pairwise interaction `Σ_{u≠u'} Σ_{i,j} d^i(x_u)ᵀ K^{ij}(x_u, x_u') d^j(x_u')`
/// assembled from empirical NTK blocks.
pub fn decomposition_cross_term(net: &Network, batch: &[Sample], kind: LossKind) -> Result<f64> {
    if batch.len() < 2 {
        return Ok(0.0);
    }
    let xs: Vec<Vec<f64>> = batch.iter().map(|s| s.x.clone()).collect();
    let ntk = empirical_ntk(net, &xs)?;
    let d = stacked_residuals(net, batch, kind)?;
    let k = net.num_classes();
    let mut total = 0.0;
    for u in 0..batch.len() {
        for v in 0..batch.len() {
            if u == v {
                continue;
            }
            for i in 0..k {
                for j in 0..k {
                    total += d[u * k + i] * ntk.block(u, i, v, j) * d[v * k + j];
                }
            }
        }
    }
    Ok(total)
}

/// `R(Q̂ | S) = Σ_u Δ({u} | S) / Δ(Q̂ | S)`.
pub fn approximation_ratio(net: &Network, pool: &LabeledPool, batch: &[Sample], kind: LossKind) -> Result<f64> {
    let denominator = delta_set(net, pool, batch, kind)?;
    if denominator == 0.0 || !denominator.is_finite() {
        return Err(Error::RatioUndefined);
    }
    let scorer = DeltaScorer::new(net, pool, kind)?;
    let mut numerator = 0.0;
    for s in batch {
        numerator += scorer.score(s)?.delta;
    }
    Ok(numerator / denominator)
}

/// Weight on the interaction term. `Infinite` ranks by the interaction alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma {
    Finite(f64),
    Infinite,
}

impl Gamma {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value < 0.0 {
            return Err(Error::Domain(format!("gamma must lie in [0, ∞], got {value}")));
        }
        Ok(if value.is_infinite() { Gamma::Infinite } else { Gamma::Finite(value) })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Gamma::Finite(g) => Gamma::new(g).map(|_| ()),
            Gamma::Infinite => Ok(()),
        }
    }

    pub fn combine(&self, grad_norm_sq: f64, interaction: f64) -> f64 {
        match *self {
            Gamma::Finite(g) => grad_norm_sq + g * interaction,
            Gamma::Infinite => interaction,
        }
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gamma::Finite(g) => write!(f, "{g}"),
            Gamma::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Gamma {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Gamma::Finite(g) => serializer.serialize_f64(g),
            Gamma::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Gamma {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        let value = match Raw::deserialize(deserializer)? {
            Raw::Number(v) => v,
            Raw::Text(s) if matches!(s.as_str(), "inf" | "infinity" | "Infinity") => f64::INFINITY,
            Raw::Text(s) => return Err(serde::de::Error::custom(format!("invalid gamma {s:?}"))),
        };
        Gamma::new(value).map_err(serde::de::Error::custom)
    }
}

/// `‖∇ℓ‖² + γ · interaction`; `γ = 2` coincides with [`delta_single`].
pub fn gamma_score(net: &Network, pool: &LabeledPool, candidate: &Sample, gamma: Gamma, kind: LossKind) -> Result<f64> {
    gamma.validate()?;
    DeltaScorer::new(net, pool, kind)?.gamma_score(candidate, gamma)
}

/// Columns: `candidate_index,pseudo_label,grad_norm_sq,interaction,delta`.
pub fn write_scores_csv<W: Write>(scores: &[DeltaScore], mut w: W) -> std::io::Result<()> {
    writeln!(w, "candidate_index,pseudo_label,grad_norm_sq,interaction,delta")?;
    for s in scores {
        writeln!(
            w,
            "{},{},{},{},{}",
            s.candidate_index,
            s.pseudo_label,
            fmt_g17(s.grad_norm_sq),
            fmt_g17(s.interaction),
            fmt_g17(s.delta)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnkit::{Activation, InitScheme, NetworkConfig};

    fn scalar_net(theta: f64) -> (Network, NetworkConfig) {
        // f(x) = θx + b as a one-output... K must be >= 2, so use a 2-class
        // linear layer whose second row and biases are zero.
        let cfg = NetworkConfig {
            input_dim: 1,
            hidden_dims: vec![],
            num_classes: 2,
            activation: Activation::Identity,
            init_scheme: InitScheme::Standard,
            seed: 0,
        };
        (Network::from_params(&cfg, vec![theta, 0.0, 0.0, 0.0]).unwrap(), cfg)
    }

    #[test]
    fn scalar_mse_dynamics() {
        let (net, _) = scalar_net(0.7);
        let x = 1.3;
        let s = Sample::new(vec![x], 0, 0);
        let g = training_dynamics(&net, &LabeledPool::new(vec![s]), LossKind::Mse).unwrap();
        // d = (θx - 1, 0); ∇ wrt θ is (θx-1)x, wrt bias0 is (θx-1); other entries 0.
        let r = 0.7 * x - 1.0;
        let expect = r * r * x * x + r * r;
        assert!((g.value - expect).abs() < 1e-14);
    }

    #[test]
    fn exact_fit_has_zero_mse_dynamics() {
        let cfg = NetworkConfig {
            input_dim: 2,
            hidden_dims: vec![],
            num_classes: 2,
            activation: Activation::Identity,
            init_scheme: InitScheme::Standard,
            seed: 0,
        };
        let net = Network::from_params(&cfg, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let pool = LabeledPool::new(vec![Sample::new(vec![1.0, 0.0], 0, 0), Sample::new(vec![0.0, 1.0], 1, 1)]);
        assert_eq!(training_dynamics(&net, &pool, LossKind::Mse).unwrap().value, 0.0);
    }

    #[test]
    fn empty_batch_and_overlap() {
        let (net, _) = scalar_net(0.2);
        let pool = LabeledPool::new(vec![Sample::new(vec![1.0], 0, 5)]);
        assert_eq!(delta_set(&net, &pool, &[], LossKind::CrossEntropy).unwrap(), 0.0);
        let dup = [Sample::new(vec![2.0], 1, 5)];
        assert!(matches!(delta_set(&net, &pool, &dup, LossKind::CrossEntropy), Err(Error::Input(_))));
    }

    #[test]
    fn empty_pool_delta_is_norm() {
        let (net, _) = scalar_net(0.4);
        let c = Sample::new(vec![1.5], 1, 9);
        let s = delta_single(&net, &LabeledPool::default(), &c, None, false, LossKind::CrossEntropy).unwrap();
        assert_eq!(s.interaction, 0.0);
        assert_eq!(s.delta, s.grad_norm_sq);
    }

    #[test]
    fn stale_cache_detected() {
        let (net, _) = scalar_net(0.4);
        let pool = LabeledPool::new(vec![Sample::new(vec![1.0], 0, 0)]);
        let c = Sample::new(vec![1.5], 1, 9);
        let stale = GradientVector(vec![1.0, 2.0, 3.0, 4.0]);
        let r = delta_single(&net, &pool, &c, Some(&stale), true, LossKind::CrossEntropy);
        assert!(matches!(r, Err(Error::StaleCache { .. })));
        assert!(delta_single(&net, &pool, &c, Some(&stale), false, LossKind::CrossEntropy).is_ok());
    }

    #[test]
    fn gamma_domain_and_parsing() {
        assert!(Gamma::new(-1.0).is_err());
        assert_eq!(Gamma::new(f64::INFINITY).unwrap(), Gamma::Infinite);
        let g: Gamma = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(g, Gamma::Infinite);
        let g: Gamma = serde_json::from_str("2").unwrap();
        assert_eq!(g, Gamma::Finite(2.0));
        assert!(serde_json::from_str::<Gamma>("-3").is_err());
        assert_eq!(serde_json::to_string(&Gamma::Infinite).unwrap(), "\"inf\"");
    }

    #[test]
    fn infinite_gamma_ties_equal_interactions() {
        assert_eq!(Gamma::Infinite.combine(1.0, 0.3), Gamma::Infinite.combine(5.0, 0.3));
        assert_eq!(Gamma::Finite(0.0).combine(1.0, 0.3), 1.0);
    }

    #[test]
    fn scores_csv_header() {
        let s = DeltaScore { candidate_index: 3, pseudo_label: 1, delta: 2.0, grad_norm_sq: 1.0, interaction: 0.5 };
        let mut buf = Vec::new();
        write_scores_csv(&[s], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "candidate_index,pseudo_label,grad_norm_sq,interaction,delta\n3,1,1,0.5,2\n"
        );
    }
}
