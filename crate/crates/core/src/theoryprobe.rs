//! Kernel-theory diagnostics: label alignment, the convergence and
//! generalization inequalities, the unbiased NTK-MMD estimator and Kendall τ.

use serde::{Deserialize, Serialize};

use crate::dynamics::training_dynamics;
use crate::error::{Error, Result};
use crate::kernelspace::{
    check_step_size, eigendecompose, empirical_trace_cross, empirical_trace_gram, invertible_spectrum,
    EigenDecomposition, GramMatrix, JitterPolicy,
};
use crate::linalg::Matrix;
use crate::nnkit::{argmax, LossKind, Network};
use crate::pool::{LabeledPool, Sample};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentValue {
    pub value: f64,
    pub n: usize,
    pub classes: usize,
}

fn check_labels(gram: &GramMatrix, y: &Matrix) -> Result<()> {
    if y.rows() != gram.n() {
        return Err(Error::Input(format!(
            "label matrix has {} rows, Gram matrix is {}x{}",
            y.rows(),
            gram.n(),
            gram.n()
        )));
    }
    Ok(())
}

/// `A = Tr[Yᵀ Θ Y]`.
pub fn alignment(gram: &GramMatrix, y: &Matrix) -> Result<AlignmentValue> {
    check_labels(gram, y)?;
    let ty = gram.matrix.matmul(y)?;
    let value = (0..y.cols()).map(|k| (0..y.rows()).map(|r| y[(r, k)] * ty[(r, k)]).sum::<f64>()).sum();
    Ok(AlignmentValue { value, n: y.rows(), classes: y.cols() })
}

/// Squared label projections `Σ_k (v_iᵀ Y^k)²`, one per eigenpair.
fn label_energy(eig: &EigenDecomposition, y: &Matrix) -> Result<Vec<f64>> {
    let proj = eig.project(y)?;
    Ok((0..proj.rows()).map(|i| proj.row(i).iter().map(|c| c * c).sum()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationBound {
    pub value: f64,
    pub jitter: f64,
}

/// `B = sqrt(2 Tr[Yᵀ Θ⁻¹ Y] / n)`, inverting through the eigenbasis under the
/// jitter policy.
pub fn generalization_bound(gram: &GramMatrix, y: &Matrix) -> Result<GeneralizationBound> {
    check_labels(gram, y)?;
    let eig = eigendecompose(gram)?;
    let spectrum = invertible_spectrum(&eig, JitterPolicy::Allow)?;
    let energy = label_energy(&eig, y)?;
    let quad: f64 = energy.iter().zip(&spectrum.values).map(|(e, l)| e / l).sum();
    Ok(GeneralizationBound { value: (2.0 * quad / gram.n() as f64).sqrt(), jitter: spectrum.jitter })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Check {
    pub lower: f64,
    pub e_t_squared: f64,
    pub upper: f64,
    pub holds: bool,
    pub t: u64,
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Check {
    pub lower: f64,
    pub mid: f64,
    pub upper: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub theorem1: Theorem1Check,
    pub theorem2: Theorem2Check,
    pub jitter_applied: f64,
}

fn ordered(lower: f64, mid: f64, upper: f64) -> bool {
    let tol = 1e-9 * lower.abs().max(mid.abs()).max(upper.abs());
    lower <= mid + tol && mid <= upper + tol
}

/// Evaluates both inequality chains from one eigendecomposition.
///
/// Convergence: `Tr[YᵀY] − 2tηA ≤ E_t² ≤ Tr[YᵀY] − ηA` on the raw spectrum.
/// Generalization: `Tr²[YᵀY]/A ≤ (n/2) B² ≤ (λ_max/λ_min) Tr²[YᵀY]/A`, all on
/// the jittered spectrum when jitter was needed.
pub fn check_bounds(gram: &GramMatrix, y: &Matrix, eta: f64, t: u64) -> Result<BoundReport> {
    check_labels(gram, y)?;
    if t == 0 {
        return Err(Error::Domain("convergence bound needs t ≥ 1".into()));
    }
    let eig = eigendecompose(gram)?;
    check_step_size(&eig, eta)?;
    let spectrum = invertible_spectrum(&eig, JitterPolicy::Allow)
        .map_err(|e| Error::Domain(format!("λ_min must be positive after jitter: {e}")))?;
    let energy = label_energy(&eig, y)?;
    let trace_yy: f64 = energy.iter().sum();

    let a_raw: f64 = energy.iter().zip(&eig.values).map(|(e, l)| e * l).sum();
    let e_t_squared: f64 =
        energy.iter().zip(&eig.values).map(|(e, l)| e * (1.0 - eta * l).powi(2).powf(t as f64)).sum();
    let lower1 = trace_yy - 2.0 * t as f64 * eta * a_raw;
    let upper1 = trace_yy - eta * a_raw;

    let vals = &spectrum.values;
    let a_j: f64 = energy.iter().zip(vals).map(|(e, l)| e * l).sum();
    let mid: f64 = energy.iter().zip(vals).map(|(e, l)| e / l).sum();
    let lower2 = trace_yy * trace_yy / a_j;
    let upper2 = vals[0] / vals[vals.len() - 1] * lower2;

    Ok(BoundReport {
        theorem1: Theorem1Check {
            lower: lower1,
            e_t_squared,
            upper: upper1,
            holds: ordered(lower1, e_t_squared, upper1),
            t,
            eta,
        },
        theorem2: Theorem2Check { lower: lower2, mid, upper: upper2, holds: ordered(lower2, mid, upper2) },
        jitter_applied: spectrum.jitter,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmdReport {
    /// Unbiased estimate of MMD²; can be slightly negative.
    pub mmd_squared_raw: f64,
    /// `sqrt(max(0, mmd_squared_raw))`.
    pub mmd: f64,
    pub m: usize,
    pub n: usize,
    /// The paired diagonal of the cross term runs over the first `paired` indices.
    pub paired: usize,
}

/// Unbiased MMD² between the first `m` points of `gram_joint` (S0) and the
/// following `n` points (S):
/// `a/(m²−m) + b/(n²−n) − 2c/(m(n−1))`, where `a`, `b` are off-diagonal
/// within-set sums and `c` is the cross sum minus its paired diagonal.
pub fn mmd_empirical(gram_joint: &GramMatrix, m: usize, n: usize) -> Result<MmdReport> {
    if m < 2 || n < 2 {
        return Err(Error::Input(format!("MMD needs at least two points per set, got m = {m}, n = {n}")));
    }
    if gram_joint.n() != m + n {
        return Err(Error::Input(format!("joint Gram is {0}x{0}, expected {1}", gram_joint.n(), m + n)));
    }
    let k = &gram_joint.matrix;
    let off_diagonal_sum = |lo: usize, hi: usize| {
        let mut s = 0.0;
        for r in lo..hi {
            for c in lo..hi {
                if r != c {
                    s += k[(r, c)];
                }
            }
        }
        s
    };
    let a = off_diagonal_sum(0, m);
    let b = off_diagonal_sum(m, m + n);
    let paired = m.min(n);
    let mut c = 0.0;
    for r in 0..m {
        for j in 0..n {
            // r == j only happens for r < min(m, n): the paired diagonal.
            if r != j {
                c += k[(r, m + j)];
            }
        }
    }
    let (mf, nf) = (m as f64, n as f64);
    let raw = a / (mf * mf - mf) + b / (nf * nf - nf) - 2.0 * c / (mf * (nf - 1.0));
    Ok(MmdReport { mmd_squared_raw: raw, mmd: raw.max(0.0).sqrt(), m, n, paired })
}

/// Kendall τ-a. Pairs tied in either list count as neither concordant nor
/// discordant.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Input(format!("Kendall τ needs equal lengths, got {} and {}", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Input("Kendall τ needs at least two observations".into()));
    }
    let mut score = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let s = (a[i] - a[j]).signum() * (b[i] - b[j]).signum();
            if a[i] != a[j] && b[i] != b[j] {
                score += s as i64;
            }
        }
    }
    Ok(score as f64 / (n * (n - 1) / 2) as f64)
}

/// Labels assigned to the query set when evaluating `G`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    GroundTruth,
    /// Network argmax.
    Pseudo,
    /// Argmax of `Θ(X_Q, X) Θ(X, X)⁻¹ Y` over the labeled set.
    KernelPseudo,
}

/// Quantity correlated against `G_MSE(S ∪ Q̄)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationTarget {
    Alignment,
    Bound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelationConfig {
    pub query_size: usize,
    pub trials: usize,
    pub label_mode: LabelMode,
    pub target: CorrelationTarget,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub tau: f64,
    /// `(G_MSE(S ∪ Q̄), target)` per trial.
    pub points: Vec<(f64, f64)>,
}

/// τ between the two coordinates; all-equal coordinates make τ undefined.
pub fn tau_of_points(points: &[(f64, f64)]) -> Result<f64> {
    let g: Vec<f64> = points.iter().map(|p| p.0).collect();
    let t: Vec<f64> = points.iter().map(|p| p.1).collect();
    for (name, list) in [("dynamics", &g), ("target", &t)] {
        if list.iter().all(|&v| v == list[0]) {
            return Err(Error::TauUndefined(format!("{name} scores are all equal")));
        }
    }
    kendall_tau(&g, &t)
}

fn kernel_pseudo_labels(net: &Network, labeled: &LabeledPool, queries: &[&Sample]) -> Result<Vec<usize>> {
    let xs = labeled.features();
    let gram = empirical_trace_gram(net, &xs)?;
    let eig = eigendecompose(&gram)?;
    let spectrum = invertible_spectrum(&eig, JitterPolicy::Allow)?;
    let inv: Vec<f64> = spectrum.values.iter().map(|l| 1.0 / l).collect();
    let y = Matrix::one_hot(&labeled.labels(), net.num_classes());
    let coef = eig.spectral_map(&inv)?.matmul(&y)?;
    let xq: Vec<Vec<f64>> = queries.iter().map(|s| s.x.clone()).collect();
    let scores = empirical_trace_cross(net, &xq, &xs)?.matmul(&coef)?;
    Ok((0..scores.rows()).map(|r| argmax(scores.row(r))).collect())
}

/// Draws `trials` random query sets `Q̄` from `candidates` (which carry their
/// ground-truth labels), and correlates `G_MSE(S ∪ Q̄)` under the configured
/// labels with the alignment or the bound of `S ∪ Q̄` under ground-truth
/// labels, both on the trace Gram of `net`.
pub fn correlation_experiment(
    net: &Network,
    labeled: &LabeledPool,
    candidates: &[Sample],
    config: &CorrelationConfig,
) -> Result<CorrelationResult> {
    if config.trials < 10 {
        return Err(Error::Config(format!("correlation needs at least 10 trials, got {}", config.trials)));
    }
    if config.query_size == 0 || config.query_size > candidates.len() {
        return Err(Error::Config(format!("query size {} must lie in 1..={}", config.query_size, candidates.len())));
    }
    let classes = net.num_classes();
    let mut points = Vec::with_capacity(config.trials);
    for trial in 0..config.trials {
        let mut rng = rng::stream(config.seed, "correlation", trial as u64);
        let picks = rand::seq::index::sample(&mut rng, candidates.len(), config.query_size);
        let queries: Vec<&Sample> = picks.iter().map(|p| &candidates[p]).collect();
        let labels: Vec<usize> = match config.label_mode {
            LabelMode::GroundTruth => queries.iter().map(|s| s.y).collect(),
            LabelMode::Pseudo => queries.iter().map(|s| net.predict(&s.x)).collect::<Result<_>>()?,
            LabelMode::KernelPseudo => kernel_pseudo_labels(net, labeled, &queries)?,
        };
        let mut scored = labeled.clone();
        scored.extend(queries.iter().zip(&labels).map(|(s, &y)| Sample::new(s.x.clone(), y, s.index)));
        let g = training_dynamics(net, &scored, LossKind::Mse)?.value;

        let mut truth = labeled.clone();
        truth.extend(queries.iter().map(|s| (*s).clone()));
        let gram = empirical_trace_gram(net, &truth.features())?;
        let y = Matrix::one_hot(&truth.labels(), classes);
        let target = match config.target {
            CorrelationTarget::Alignment => alignment(&gram, &y)?.value,
            CorrelationTarget::Bound => generalization_bound(&gram, &y)?.value,
        };
        points.push((g, target));
    }
    Ok(CorrelationResult { tau: tau_of_points(&points)?, points })
}
