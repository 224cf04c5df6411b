//! The self-verification suite: identity checks, inequality checks and
//! estimator properties over randomized instances, reported with worst-case
//! residuals.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::pseudo_label;
use crate::dynamics::{
    approximation_ratio, decomposition_cross_term, delta_set, delta_single, gamma_score, training_dynamics,
    training_dynamics_kernel_form, DeltaScorer, Gamma,
};
use crate::error::Result;
use crate::kernelspace::{
    analytic_relu_ntk, eigendecompose, empirical_ntk, empirical_trace_cross, empirical_trace_gram,
    kernel_regression_predict, trace_gram, GramMatrix, JitterPolicy,
};
use crate::linalg::Matrix;
use crate::nnkit::{
    gradient_step, train_in_place, Activation, InitScheme, LossKind, Network, NetworkConfig, Reduction, TrainSchedule,
};
use crate::numfmt::fmt_g17;
use crate::pool::{LabeledPool, Sample};
use crate::rng;
use crate::theoryprobe::{
    check_bounds, correlation_experiment, mmd_empirical, BoundReport, CorrelationConfig, CorrelationTarget, LabelMode,
};

use super::datasets::DatasetSpec;
use super::experiment::split_dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Quick,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckGroup {
    Identities,
    Theorem1,
    Theorem2,
    Mmd,
    Kernels,
    Experiments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub group: CheckGroup,
    pub passed: bool,
    pub instances: usize,
    pub failures: usize,
    /// Largest residual seen, in the check's own units.
    pub worst_residual: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub instance: usize,
    pub n: usize,
    pub classes: usize,
    pub report: BoundReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub scale: Scale,
    pub master_seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    #[serde(skip)]
    pub bound_rows: Vec<BoundRow>,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassCount {
    pub pass: usize,
    pub fail: usize,
}

impl VerifyReport {
    fn count(&self, group: CheckGroup) -> PassCount {
        let mut c = PassCount::default();
        for check in self.checks.iter().filter(|c| c.group == group) {
            c.pass += check.instances - check.failures;
            c.fail += check.failures;
        }
        c
    }

    pub fn to_json(&self) -> Result<serde_json::Value> {
        Ok(serde_json::json!({
            "scale": self.scale,
            "master_seed": self.master_seed,
            "passed": self.passed,
            "theorem1": self.count(CheckGroup::Theorem1),
            "theorem2": self.count(CheckGroup::Theorem2),
            "mmd": self.count(CheckGroup::Mmd),
            "identities": self.count(CheckGroup::Identities),
            "kernels": self.count(CheckGroup::Kernels),
            "experiments": self.count(CheckGroup::Experiments),
            "checks": serde_json::to_value(&self.checks)?,
        }))
    }

    /// One row per randomized bound instance.
    pub fn write_bounds_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "instance,n,classes,t,eta,t1_lower,e_t_squared,t1_upper,t1_holds,t2_lower,t2_mid,t2_upper,t2_holds,jitter"
        )?;
        for row in &self.bound_rows {
            let (t1, t2) = (&row.report.theorem1, &row.report.theorem2);
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                row.instance,
                row.n,
                row.classes,
                t1.t,
                fmt_g17(t1.eta),
                fmt_g17(t1.lower),
                fmt_g17(t1.e_t_squared),
                fmt_g17(t1.upper),
                t1.holds,
                fmt_g17(t2.lower),
                fmt_g17(t2.mid),
                fmt_g17(t2.upper),
                t2.holds,
                fmt_g17(row.report.jitter_applied)
            )?;
        }
        Ok(())
    }
}

/// Tracks pass/fail counts and the worst residual for one check.
struct Tally {
    instances: usize,
    failures: usize,
    worst: f64,
}

impl Tally {
    fn new() -> Self {
        Self { instances: 0, failures: 0, worst: 0.0 }
    }

    fn record(&mut self, residual: f64, tolerance: f64) {
        self.instances += 1;
        if !(residual <= tolerance) {
            self.failures += 1;
        }
        if residual.is_nan() || residual > self.worst {
            self.worst = residual;
        }
    }

    fn finish(self, name: &str, group: CheckGroup, detail: String) -> CheckResult {
        CheckResult {
            name: name.into(),
            group,
            passed: self.failures == 0 && self.instances > 0,
            instances: self.instances,
            failures: self.failures,
            worst_residual: self.worst,
            detail,
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// The architectures the identity checks cycle through.
pub fn random_network(rng: &mut ChaCha8Rng, classes: usize) -> Result<Network> {
    let seed = rng.random();
    let config = match rng.random_range(0..3) {
        0 => NetworkConfig {
            input_dim: 3,
            hidden_dims: vec![16],
            num_classes: classes,
            activation: Activation::Relu,
            init_scheme: InitScheme::Standard,
            seed,
        },
        1 => NetworkConfig {
            input_dim: 4,
            hidden_dims: vec![8, 6],
            num_classes: classes,
            activation: Activation::Relu,
            init_scheme: InitScheme::NtkParameterization,
            seed,
        },
        _ => NetworkConfig {
            input_dim: 2,
            hidden_dims: vec![5],
            num_classes: classes,
            activation: Activation::Identity,
            init_scheme: InitScheme::Standard,
            seed,
        },
    };
    let mut net = Network::init(&config)?;
    // Nonzero biases so every parameter block is exercised.
    for layer in net.layout().to_vec() {
        for b in &mut net.params_mut()[layer.bias_offset..layer.bias_offset + layer.fan_out] {
            *b = rng.random_range(-0.3..0.3);
        }
    }
    Ok(net)
}

pub fn random_samples(rng: &mut ChaCha8Rng, net: &Network, n: usize, first_index: usize) -> Vec<Sample> {
    (0..n)
        .map(|i| {
            let x = (0..net.input_dim()).map(|_| rng.random_range(-1.5..1.5)).collect();
            Sample::new(x, rng.random_range(0..net.num_classes()), first_index + i)
        })
        .collect()
}

fn random_kind(rng: &mut ChaCha8Rng) -> LossKind {
    if rng.random_bool(0.5) {
        LossKind::CrossEntropy
    } else {
        LossKind::Mse
    }
}

/// Central differences of the loss and of every logit against the analytic gradients.
pub fn check_gradients(instances: usize, seed: u64) -> Result<CheckResult> {
    let mut tally = Tally::new();
    let h = 1e-5;
    for inst in 0..instances {
        let mut rng = rng::stream(seed, "verify-gradients", inst as u64);
        let classes = rng.random_range(2..=4);
        let mut net = random_network(&mut rng, classes)?;
        let sample = random_samples(&mut rng, &net, 1, 0).remove(0);
        let kind = random_kind(&mut rng);
        let analytic = net.loss_gradient(&sample, kind)?;
        let per_class = net.per_class_gradients(&sample.x)?;
        let p = net.num_params();
        let mut fd_loss = vec![0.0; p];
        let mut fd_class = vec![vec![0.0; p]; classes];
        for j in 0..p {
            let orig = net.params()[j];
            net.params_mut()[j] = orig + h;
            let (lp, fp) = (net.loss(&sample, kind)?, net.forward(&sample.x)?);
            net.params_mut()[j] = orig - h;
            let (lm, fm) = (net.loss(&sample, kind)?, net.forward(&sample.x)?);
            net.params_mut()[j] = orig;
            fd_loss[j] = (lp - lm) / (2.0 * h);
            for i in 0..classes {
                fd_class[i][j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let err = |a: &[f64], b: &[f64]| {
            let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            diff / norm.max(1e-12)
        };
        let mut worst = err(analytic.as_slice(), &fd_loss);
        for i in 0..classes {
            worst = worst.max(err(per_class[i].as_slice(), &fd_class[i]));
        }
        tally.record(worst, 1e-5);
    }
    Ok(tally.finish(
        "gradient_exactness",
        CheckGroup::Identities,
        "relative L2 error vs central differences (h = 1e-5)".into(),
    ))
}

/// `‖Σ∇ℓ‖²` against the NTK double sum.
pub fn check_dual_form(instances: usize, seed: u64) -> Result<CheckResult> {
    let mut tally = Tally::new();
    for inst in 0..instances {
        let mut rng = rng::stream(seed, "verify-dual-form", inst as u64);
        let classes = rng.random_range(2..=4);
        let net = random_network(&mut rng, classes)?;
        let n = rng.random_range(1..=20);
        let pool = LabeledPool::new(random_samples(&mut rng, &net, n, 0));
        let kind = random_kind(&mut rng);
        let g = training_dynamics(&net, &pool, kind)?.value;
        let k = training_dynamics_kernel_form(&net, pool.samples(), kind)?;
        tally.record(rel(g, k), 1e-8);
    }
    Ok(tally.finish(
        "dynamics_dual_form",
        CheckGroup::Identities,
        "relative gap, summed-gradient vs kernel form".into(),
    ))
}

/// Relative residual of `Δ(Q|S) = Σ_u Δ(u|S) + cross_sign · cross`.
/// With `cross_sign = -1` the identity is deliberately broken.
pub fn decomposition_residuals(instances: usize, seed: u64, cross_sign: f64) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(instances);
    for inst in 0..instances {
        let mut rng = rng::stream(seed, "verify-decomposition", inst as u64);
        let classes = rng.random_range(2..=4);
        let net = random_network(&mut rng, classes)?;
        let n = rng.random_range(0..=30);
        let b = rng.random_range(1..=6);
        let pool = LabeledPool::new(random_samples(&mut rng, &net, n, 0));
        let mut batch = random_samples(&mut rng, &net, b, n);
        for s in &mut batch {
            s.y = pseudo_label(&net, &s.x)?;
        }
        let kind = random_kind(&mut rng);
        let set = delta_set(&net, &pool, &batch, kind)?;
        let mut singles = 0.0;
        let mut single_gap = 0.0f64;
        for s in &batch {
            let d = delta_single(&net, &pool, s, None, false, kind)?.delta;
            singles += d;
            single_gap = single_gap.max(rel(d, delta_set(&net, &pool, std::slice::from_ref(s), kind)?));
        }
        let cross = decomposition_cross_term(&net, &batch, kind)?;
        out.push((rel(set, singles + cross_sign * cross), single_gap));
    }
    Ok(out)
}

pub fn check_decomposition(instances: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let residuals = decomposition_residuals(instances, seed, 1.0)?;
    let mut identity = Tally::new();
    let mut singleton = Tally::new();
    for &(r, s) in &residuals {
        identity.record(r, 1e-8);
        singleton.record(s, 1e-10);
    }
    let mut canary = Tally::new();
    let broken = decomposition_residuals(instances, seed, -1.0)?;
    let detected = broken.iter().filter(|(r, _)| *r > 1e-8).count();
    canary.instances = 1;
    canary.worst = detected as f64;
    if detected == 0 {
        canary.failures = 1;
    }
    Ok(vec![
        identity.finish("set_decomposition", CheckGroup::Identities, "relative gap, Δ(Q|S) vs Σ Δ(u|S) + cross".into()),
        singleton.finish("singleton_identity", CheckGroup::Identities, "relative gap, Δ(u|S) vs Δ({u}|S)".into()),
        canary.finish(
            "mutation_canary",
            CheckGroup::Identities,
            format!("flipped cross-term sign detected on {detected}/{instances} instances"),
        ),
    ])
}

/// γ = 2 and the Δ criterion must rank candidates identically.
pub fn check_gamma_ranking(instances: usize, seed: u64) -> Result<CheckResult> {
    let mut tally = Tally::new();
    for inst in 0..instances {
        let mut rng = rng::stream(seed, "verify-gamma", inst as u64);
        let classes = rng.random_range(2..=4);
        let net = random_network(&mut rng, classes)?;
        let n = rng.random_range(1..=20);
        let pool = LabeledPool::new(random_samples(&mut rng, &net, n, 0));
        let cands = random_samples(&mut rng, &net, 12, 100);
        let kind = random_kind(&mut rng);
        let scorer = DeltaScorer::new(&net, &pool, kind)?;
        let mut by_delta: Vec<(usize, f64)> = Vec::new();
        let mut by_gamma: Vec<(usize, f64)> = Vec::new();
        for c in &cands {
            by_delta.push((c.index, scorer.score(c)?.delta));
            by_gamma.push((c.index, gamma_score(&net, &pool, c, Gamma::Finite(2.0), kind)?));
        }
        let order = |v: &mut Vec<(usize, f64)>| {
            v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            v.iter().map(|p| p.0).collect::<Vec<_>>()
        };
        tally.record(if order(&mut by_delta) == order(&mut by_gamma) { 0.0 } else { 1.0 }, 0.0);
    }
    Ok(tally.finish("gamma_two_ranking", CheckGroup::Identities, "rank mismatches between γ = 2 and Δ".into()))
}

/// Random unit vectors in `dim` dimensions.
fn unit_vectors(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect()
}

pub fn check_bound_instances(instances: usize, seed: u64) -> Result<(Vec<CheckResult>, Vec<BoundRow>)> {
    let mut t1 = Tally::new();
    let mut t2 = Tally::new();
    let mut rows = Vec::with_capacity(instances);
    for inst in 0..instances {
        let mut rng = rng::stream(seed, "verify-bounds", inst as u64);
        let n = rng.random_range(2..=20);
        let classes = rng.random_range(2..=4);
        let dim = rng.random_range(2..=6);
        let depth = rng.random_range(2..=4);
        let gram = analytic_relu_ntk(&unit_vectors(&mut rng, n, dim), depth)?;
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let y = Matrix::one_hot(&labels, classes);
        let eta = 0.5 / eigendecompose(&gram)?.max();
        let t = [1u64, 5, 50][inst % 3];
        let report = check_bounds(&gram, &y, eta, t)?;
        let scale1 = report.theorem1.upper.abs().max(report.theorem1.lower.abs()).max(report.theorem1.e_t_squared);
        let gap1 = (report.theorem1.lower - report.theorem1.e_t_squared)
            .max(report.theorem1.e_t_squared - report.theorem1.upper);
        t1.record(if report.theorem1.holds { 0.0f64.max(gap1 / scale1) } else { 1.0 }, 1e-9);
        let scale2 = report.theorem2.upper.abs();
        let gap2 = (report.theorem2.lower - report.theorem2.mid).max(report.theorem2.mid - report.theorem2.upper);
        t2.record(if report.theorem2.holds { 0.0f64.max(gap2 / scale2) } else { 1.0 }, 1e-9);
        rows.push(BoundRow { instance: inst, n, classes, report });
    }
    Ok((
        vec![
            t1.finish(
                "convergence_bounds",
                CheckGroup::Theorem1,
                "worst relative violation of the E_t² sandwich".into(),
            ),
            t2.finish(
                "generalization_bounds",
                CheckGroup::Theorem2,
                "worst relative violation of the B² sandwich".into(),
            ),
        ],
        rows,
    ))
}

fn gaussian_points(rng: &mut ChaCha8Rng, n: usize, center: &[f64], sigma: f64) -> Vec<Vec<f64>> {
    use rand_distr::{Distribution, Normal};
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    (0..n).map(|_| center.iter().map(|c| c + normal.sample(rng)).collect()).collect()
}

/// Identical-set and constant-kernel zeros, plus the separated-cluster test:
/// the MMD between two distant clusters must exceed a same-distribution MMD.
pub fn check_mmd(trials: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut exact = Tally::new();
    for inst in 0..10 {
        let mut rng = rng::stream(seed, "verify-mmd-exact", inst);
        let m = rng.random_range(2..=12);
        let xs = unit_vectors(&mut rng, m, 3);
        let joint: Vec<Vec<f64>> = xs.iter().chain(&xs).cloned().collect();
        exact.record(mmd_empirical(&analytic_relu_ntk(&joint, 2)?, m, m)?.mmd_squared_raw.abs(), 1e-12);
        let n = m + rng.random_range(0..5);
        let c0 = rng.random_range(0.1..3.0);
        let constant = GramMatrix::external(Matrix::from_fn(m + n, m + n, |_, _| c0))?;
        exact.record(mmd_empirical(&constant, m, n)?.mmd_squared_raw.abs(), 1e-12);
    }
    let mut separation = Tally::new();
    let mut wins = 0;
    for trial in 0..trials {
        let mut rng = rng::stream(seed, "verify-mmd-separation", trial as u64);
        let (a, b) = ([1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]);
        let s0 = gaussian_points(&mut rng, 20, &a, 0.2);
        let far = gaussian_points(&mut rng, 20, &b, 0.2);
        let near = gaussian_points(&mut rng, 20, &a, 0.2);
        let mmd_of = |other: &[Vec<f64>]| -> Result<f64> {
            let joint: Vec<Vec<f64>> = s0.iter().chain(other).cloned().collect();
            Ok(mmd_empirical(&analytic_relu_ntk(&joint, 2)?, 20, 20)?.mmd)
        };
        let (d_far, d_near) = (mmd_of(&far)?, mmd_of(&near)?);
        if d_far > 0.0 && d_far > d_near {
            wins += 1;
        }
    }
    separation.instances = 1;
    separation.worst = (trials - wins) as f64;
    if (wins as f64) < 0.95 * trials as f64 {
        separation.failures = 1;
    }
    Ok(vec![
        exact.finish(
            "mmd_exact_zeros",
            CheckGroup::Mmd,
            "largest |MMD²| for identical sets and constant kernels".into(),
        ),
        separation.finish(
            "mmd_separation",
            CheckGroup::Mmd,
            format!("separated clusters ranked above same-distribution samples in {wins}/{trials} trials"),
        ),
    ])
}

/// Initializations averaged per width in the factorization check.
pub const FACTORIZATION_DRAWS: u64 = 5;

/// Analytic ReLU NTK against the trace Gram of a wide network, and the
/// off-class ratio (averaged over independent initializations) shrinking
/// with width.
pub fn check_wide_kernels(widths: &[usize], seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = rng::stream(seed, "verify-wide", 0);
    let xs = unit_vectors(&mut rng, 8, 3);
    let mut ratios = Vec::new();
    let mut fidelity = Tally::new();
    for &w in widths {
        let mut total = 0.0;
        for draw in 0..FACTORIZATION_DRAWS {
            let config = NetworkConfig {
                input_dim: 3,
                hidden_dims: vec![w],
                num_classes: 3,
                activation: Activation::Relu,
                init_scheme: InitScheme::NtkParameterization,
                seed: rng::derive_seed(seed, &format!("verify-wide-net-{w}"), draw),
            };
            let net = Network::init(&config)?;
            let ntk = empirical_ntk(&net, &xs)?;
            total += ntk.off_class_ratio();
            if draw == 0 && w == *widths.last().expect("nonempty widths") {
                let empirical = trace_gram(&ntk).matrix.submatrix(&[0, 1, 2, 3], &[0, 1, 2, 3]);
                let analytic = analytic_relu_ntk(&xs[..4], 2)?.matrix;
                let err = empirical.sub(&analytic)?.frobenius_norm() / analytic.frobenius_norm();
                fidelity.record(err, 0.05);
            }
        }
        ratios.push(total / FACTORIZATION_DRAWS as f64);
    }
    let mut monotone = Tally::new();
    for pair in ratios.windows(2) {
        monotone.record(if pair[1] < pair[0] { 0.0 } else { pair[1] - pair[0] }, 0.0);
    }
    let shown: Vec<String> = widths.iter().zip(&ratios).map(|(w, r)| format!("{w}:{r:.4}")).collect();
    Ok(vec![
        fidelity.finish("analytic_vs_wide_ntk", CheckGroup::Kernels, "relative Frobenius error, 4 unit vectors".into()),
        monotone.finish(
            "class_factorization",
            CheckGroup::Kernels,
            format!("off-class ratio by width {}", shown.join(" ")),
        ),
    ])
}

/// Outcome of the finite-width kernel-regression comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionEquivalence {
    pub max_abs_error: f64,
    pub eta_lambda_max: f64,
    pub steps: u64,
}

/// Trains a wide one-hidden-layer NTK-parameterized network by full-batch GD
/// on the summed squared error and compares its held-out outputs with kernel
/// regression on the initial trace Gram. The network's initial output is
/// treated as an offset: the kernel regresses `Y − f₀(X)` and `f₀` is added
/// back at the test points.
pub fn regression_equivalence(width: usize, eta_lambda: f64, steps: u64, seed: u64) -> Result<RegressionEquivalence> {
    let mut rng = rng::stream(seed, "verify-regression", 0);
    let classes = 3;
    let xs = unit_vectors(&mut rng, 15, 4);
    let (train_x, test_x) = xs.split_at(10);
    let labels: Vec<usize> = (0..10).map(|_| rng.random_range(0..classes)).collect();
    let config = NetworkConfig {
        input_dim: 4,
        hidden_dims: vec![width],
        num_classes: classes,
        activation: Activation::Relu,
        init_scheme: InitScheme::NtkParameterization,
        seed: rng.random(),
    };
    let mut net = Network::init(&config)?;
    let gram = empirical_trace_gram(&net, train_x)?;
    let k_test = empirical_trace_cross(&net, test_x, train_x)?;
    let lambda_max = eigendecompose(&gram)?.max();
    let eta = eta_lambda / lambda_max;

    let f0_train = Matrix::from_rows(&train_x.iter().map(|x| net.forward(x)).collect::<Result<Vec<_>>>()?)?;
    let f0_test = Matrix::from_rows(&test_x.iter().map(|x| net.forward(x)).collect::<Result<Vec<_>>>()?)?;
    let y = Matrix::one_hot(&labels, classes);
    let residual_targets = y.sub(&f0_train)?;
    let pred = kernel_regression_predict(&gram, &k_test, &residual_targets, eta, steps as f64, JitterPolicy::Allow)?;
    let expected = pred.values.sub(&f0_test.scale(-1.0))?;

    let samples: Vec<Sample> =
        train_x.iter().zip(&labels).enumerate().map(|(i, (x, &y))| Sample::new(x.clone(), y, i)).collect();
    for _ in 0..steps {
        gradient_step(&mut net, &samples, eta, LossKind::Mse, Reduction::Sum)?;
    }
    let trained = Matrix::from_rows(&test_x.iter().map(|x| net.forward(x)).collect::<Result<Vec<_>>>()?)?;
    Ok(RegressionEquivalence { max_abs_error: trained.sub(&expected)?.max_abs(), eta_lambda_max: eta_lambda, steps })
}

pub fn check_regression(width: usize, seed: u64) -> Result<CheckResult> {
    let r = regression_equivalence(width, 0.05, 40, seed)?;
    let mut tally = Tally::new();
    tally.record(r.max_abs_error, 0.1);
    Ok(tally.finish(
        "kernel_regression_equivalence",
        CheckGroup::Kernels,
        format!("width {width}, η λ_max = {}, {} steps: max-abs error vs kernel regression", r.eta_lambda_max, r.steps),
    ))
}

/// The synthetic setting used by the correlation and approximation-ratio
/// experiments: 4-class Gaussian mixture in 8 dimensions.
pub fn synthetic_setting(labeled: usize, epochs: usize, seed: u64) -> Result<(Network, LabeledPool, Vec<Sample>)> {
    let data = DatasetSpec::GaussianMixture { classes: 4, dim: 8, per_class: 100, sigma: 0.5, mean_scale: 1.0, seed }
        .generate()?;
    let split = split_dataset(&data, 0.2, labeled, seed)?;
    let pool = LabeledPool::new(split.initial.iter().map(|&i| data.sample(i)).collect());
    let rest: Vec<Sample> = split.pool.iter().filter(|s| !split.initial.contains(&s.index)).cloned().collect();
    let config = NetworkConfig {
        hidden_dims: vec![256],
        ..NetworkConfig::mlp(8, 4, rng::derive_seed(seed, "synthetic-net", 0))
    };
    let mut net = Network::init(&config)?;
    let schedule =
        TrainSchedule { learning_rate: 0.1, max_epochs: epochs, accuracy_target: f64::INFINITY, loss_tolerance: 0.0 };
    train_in_place(&mut net, &pool, &schedule, LossKind::CrossEntropy)?;
    Ok((net, pool, rest))
}

/// Kendall τ of `G_MSE` against alignment (ground-truth labels) and
/// against the bound, over random query sets.
pub fn correlation_taus(trials: usize, seed: u64) -> Result<(f64, f64)> {
    let (net, pool, rest) = synthetic_setting(40, 500, seed)?;
    let base = CorrelationConfig {
        query_size: 20,
        trials,
        label_mode: LabelMode::GroundTruth,
        target: CorrelationTarget::Alignment,
        seed,
    };
    let alignment = correlation_experiment(&net, &pool, &rest, &base)?.tau;
    let bound =
        correlation_experiment(&net, &pool, &rest, &CorrelationConfig { target: CorrelationTarget::Bound, ..base })?
            .tau;
    Ok((alignment, bound))
}

pub fn check_correlation(trials: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let (tau_a, tau_b) = correlation_taus(trials, seed)?;
    let mut a = Tally::new();
    a.record(0.3 - tau_a, 0.0);
    let mut b = Tally::new();
    b.record(tau_b, 0.0);
    Ok(vec![
        a.finish(
            "dynamics_alignment_tau",
            CheckGroup::Experiments,
            format!("τ(G_MSE, A) = {tau_a:.4} over {trials} query sets (needs > 0.3)"),
        ),
        b.finish(
            "dynamics_bound_tau",
            CheckGroup::Experiments,
            format!("τ(G_MSE, B) = {tau_b:.4} over {trials} query sets (needs < 0)"),
        ),
    ])
}

/// Mean approximation ratio over `batches` random pseudo-labeled batches of
/// size `b` after training to convergence.
pub fn mean_approximation_ratio(b: usize, batches: usize, seed: u64) -> Result<f64> {
    let (net, pool, rest) = synthetic_setting(40, 2000, seed)?;
    let mut rng = rng::stream(seed, "verify-ratio", b as u64);
    let mut total = 0.0;
    for _ in 0..batches {
        let picks = rand::seq::index::sample(&mut rng, rest.len(), b);
        let batch = picks
            .iter()
            .map(|p| Ok(Sample::new(rest[p].x.clone(), pseudo_label(&net, &rest[p].x)?, rest[p].index)))
            .collect::<Result<Vec<_>>>()?;
        total += approximation_ratio(&net, &pool, &batch, LossKind::CrossEntropy)?;
    }
    Ok(total / batches as f64)
}

pub fn check_approximation_ratio(seed: u64) -> Result<CheckResult> {
    let mut tally = Tally::new();
    let mut shown = Vec::new();
    for b in [5, 10] {
        let r = mean_approximation_ratio(b, 50, seed)?;
        tally.record((r - 1.0).abs(), 0.2);
        shown.push(format!("b={b}: {r:.4}"));
    }
    Ok(tally.finish(
        "approximation_ratio",
        CheckGroup::Experiments,
        format!("mean ratio after convergence, {}", shown.join(", ")),
    ))
}

/// Runs every check at the requested scale. Failures become report entries.
pub fn verify_suite(scale: Scale, master_seed: u64) -> VerifyReport {
    let quick = scale == Scale::Quick;
    let mut checks = Vec::new();
    let mut bound_rows = Vec::new();
    let mut push = |name: &str, group: CheckGroup, r: Result<Vec<CheckResult>>| match r {
        Ok(v) => checks.extend(v),
        Err(e) => checks.push(CheckResult {
            name: name.into(),
            group,
            passed: false,
            instances: 1,
            failures: 1,
            worst_residual: f64::NAN,
            detail: format!("error: {e}"),
        }),
    };
    push(
        "gradient_exactness",
        CheckGroup::Identities,
        check_gradients(if quick { 6 } else { 24 }, master_seed).map(|c| vec![c]),
    );
    push(
        "dynamics_dual_form",
        CheckGroup::Identities,
        check_dual_form(if quick { 8 } else { 20 }, master_seed).map(|c| vec![c]),
    );
    push("set_decomposition", CheckGroup::Identities, check_decomposition(if quick { 15 } else { 50 }, master_seed));
    push(
        "gamma_two_ranking",
        CheckGroup::Identities,
        check_gamma_ranking(if quick { 5 } else { 20 }, master_seed).map(|c| vec![c]),
    );
    match check_bound_instances(100, master_seed) {
        Ok((v, rows)) => {
            bound_rows = rows;
            push("bounds", CheckGroup::Theorem1, Ok(v));
        }
        Err(e) => push("bounds", CheckGroup::Theorem1, Err(e)),
    }
    push("mmd", CheckGroup::Mmd, check_mmd(if quick { 20 } else { 100 }, master_seed));
    if quick {
        push("wide_kernels", CheckGroup::Kernels, check_wide_kernels(&[64, 256, 1024], master_seed));
    } else {
        push("wide_kernels", CheckGroup::Kernels, check_wide_kernels(&[64, 256, 1024, 4096], master_seed));
        push(
            "kernel_regression_equivalence",
            CheckGroup::Kernels,
            check_regression(4096, master_seed).map(|c| vec![c]),
        );
        push("correlation", CheckGroup::Experiments, check_correlation(100, master_seed));
        push("approximation_ratio", CheckGroup::Experiments, check_approximation_ratio(master_seed).map(|c| vec![c]));
    }
    let passed = checks.iter().all(|c| c.passed);
    VerifyReport { scale, master_seed, passed, checks, bound_rows }
}
