//! Empirical and analytic neural tangent kernels.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nnkit::{GradientVector, Network};

/// Empirical NTK `K[a][i][b][j] = ∇f^i(x_a)ᵀ ∇f^j(x_b)`, flattened
/// sample-major, class-minor: row `a * K + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalNtk {
    pub n: usize,
    pub classes: usize,
    pub matrix: Matrix,
}

impl EmpiricalNtk {
    pub fn flat_index(&self, sample: usize, class: usize) -> usize {
        sample * self.classes + class
    }

    pub fn block(&self, a: usize, i: usize, b: usize, j: usize) -> f64 {
        self.matrix[(self.flat_index(a, i), self.flat_index(b, j))]
    }

    /// Largest off-class entry over the mean on-class magnitude. Goes to zero
    /// as the kernel approaches `Θ ⊗ I_K`.
    pub fn off_class_ratio(&self) -> f64 {
        let mut off = 0.0f64;
        let mut on = 0.0;
        for a in 0..self.n {
            for b in 0..self.n {
                for i in 0..self.classes {
                    for j in 0..self.classes {
                        let v = self.block(a, i, b, j).abs();
                        if i == j {
                            on += v;
                        } else {
                            off = off.max(v);
                        }
                    }
                }
            }
        }
        off / (on / (self.n * self.n * self.classes) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GramSource {
    EmpiricalTrace,
    AnalyticRelu,
    External,
}

/// Symmetric `n x n` scalar kernel matrix `Θ(X, X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub matrix: Matrix,
    pub source: GramSource,
}

impl GramMatrix {
    /// Wraps an externally built matrix after checking it is square and
    /// symmetric to 1e-12 (relative to its largest entry, floored at 1).
    pub fn external(matrix: Matrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Input("Gram matrix must be square".into()));
        }
        let asym = matrix.asymmetry();
        if asym > 1e-12 * matrix.max_abs().max(1.0) {
            return Err(Error::Input(format!("Gram matrix asymmetric by {asym:e}")));
        }
        Ok(Self { matrix, source: GramSource::External })
    }

    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    /// Principal submatrix over `indices`, keeping the provenance tag.
    pub fn restrict(&self, indices: &[usize]) -> GramMatrix {
        GramMatrix { matrix: self.matrix.submatrix(indices, indices), source: self.source }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        self.matrix.write_csv(w)
    }
}

fn class_gradients(net: &Network, xs: &[Vec<f64>]) -> Result<Vec<GradientVector>> {
    let mut all = Vec::with_capacity(xs.len() * net.num_classes());
    for x in xs {
        all.extend(net.per_class_gradients(x)?);
    }
    Ok(all)
}

/// Full `(nK) x (nK)` empirical NTK of `net` on `xs`. The upper triangle is
/// computed and mirrored, so the result is exactly symmetric.
pub fn empirical_ntk(net: &Network, xs: &[Vec<f64>]) -> Result<EmpiricalNtk> {
    if xs.is_empty() {
        return Err(Error::Input("empirical NTK needs at least one point".into()));
    }
    let grads = class_gradients(net, xs)?;
    let dim = grads.len();
    let mut matrix = Matrix::zeros(dim, dim);
    for r in 0..dim {
        for c in r..dim {
            let v = grads[r].dot(&grads[c]);
            matrix[(r, c)] = v;
            matrix[(c, r)] = v;
        }
    }
    Ok(EmpiricalNtk { n: xs.len(), classes: net.num_classes(), matrix })
}

/// Class-averaged cross kernel `(1/K) Σ_i ∇f^i(a)ᵀ ∇f^i(b)` between two point sets.
pub fn empirical_trace_cross(net: &Network, xa: &[Vec<f64>], xb: &[Vec<f64>]) -> Result<Matrix> {
    let k = net.num_classes();
    let ga = class_gradients(net, xa)?;
    let gb = class_gradients(net, xb)?;
    Ok(Matrix::from_fn(xa.len(), xb.len(), |a, b| {
        (0..k).map(|i| ga[a * k + i].dot(&gb[b * k + i])).sum::<f64>() / k as f64
    }))
}

/// `Θ̂(x_a, x_b) = (1/K) Σ_i K[a][i][b][i]`.
pub fn trace_gram(ntk: &EmpiricalNtk) -> GramMatrix {
    let k = ntk.classes as f64;
    let matrix = Matrix::from_fn(ntk.n, ntk.n, |a, b| (0..ntk.classes).map(|i| ntk.block(a, i, b, i)).sum::<f64>() / k);
    GramMatrix { matrix, source: GramSource::EmpiricalTrace }
}

/// The class-averaged Gram `Θ̂` of `net` on `xs` without forming the
/// off-class blocks. Equals `trace_gram(&empirical_ntk(net, xs)?)`.
pub fn empirical_trace_gram(net: &Network, xs: &[Vec<f64>]) -> Result<GramMatrix> {
    if xs.is_empty() {
        return Err(Error::Input("empirical NTK needs at least one point".into()));
    }
    let k = net.num_classes();
    let grads = class_gradients(net, xs)?;
    let n = xs.len();
    let mut matrix = Matrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v = (0..k).map(|i| grads[a * k + i].dot(&grads[b * k + i])).sum::<f64>() / k as f64;
            matrix[(a, b)] = v;
            matrix[(b, a)] = v;
        }
    }
    Ok(GramMatrix { matrix, source: GramSource::EmpiricalTrace })
}

/// Infinite-width NTK of a fully-connected ReLU network with `depth` linear
/// layers under this crate's NTK parameterization (unit-Gaussian weights,
/// `1/sqrt(fan_in)` layer scale, zero-initialized trainable biases).
///
/// With `Σ¹ = xᵀx'/d` and `Θ¹ = Σ¹ + 1`, each further layer applies the
/// arc-cosine maps
/// `Σˡ = √(ab)/(2π) (sin φ + (π − φ) cos φ)`, `Σ̇ˡ = (π − φ)/(2π)` and
/// `Θˡ = Σˡ + 1 + Θˡ⁻¹ Σ̇ˡ`, where `a, b` are the previous diagonal variances
/// and `cos φ = Σˡ⁻¹(x, x') / √(ab)`.
pub fn analytic_relu_ntk(xs: &[Vec<f64>], depth: usize) -> Result<GramMatrix> {
    let matrix = analytic_relu_ntk_cross(xs, xs, depth)?;
    // Mirror so the output is exactly symmetric.
    let n = xs.len();
    let matrix = Matrix::from_fn(n, n, |r, c| if r <= c { matrix[(r, c)] } else { matrix[(c, r)] });
    Ok(GramMatrix { matrix, source: GramSource::AnalyticRelu })
}

/// Cross kernel `Θ(xa_r, xb_c)` for the same architecture as [`analytic_relu_ntk`].
pub fn analytic_relu_ntk_cross(xa: &[Vec<f64>], xb: &[Vec<f64>], depth: usize) -> Result<Matrix> {
    if depth == 0 {
        return Err(Error::Input("depth must be at least 1".into()));
    }
    let dim = xa.first().or(xb.first()).map_or(0, Vec::len);
    for x in xa.iter().chain(xb) {
        if x.len() != dim {
            return Err(Error::Input("feature vectors differ in length".into()));
        }
        if x.iter().all(|&v| v == 0.0) {
            return Err(Error::Input("zero feature vector: arc-cosine angle undefined".into()));
        }
    }
    let d = dim as f64;
    let sq = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>() / d;
    let diag_a: Vec<f64> = xa.iter().map(|x| sq(x)).collect();
    let diag_b: Vec<f64> = xb.iter().map(|x| sq(x)).collect();
    Ok(Matrix::from_fn(xa.len(), xb.len(), |r, c| {
        let cross = xa[r].iter().zip(&xb[c]).map(|(u, v)| u * v).sum::<f64>() / d;
        relu_ntk_pair(diag_a[r], diag_b[c], cross, depth)
    }))
}

fn relu_ntk_pair(mut var_a: f64, mut var_b: f64, mut sigma: f64, depth: usize) -> f64 {
    let mut theta = sigma + 1.0;
    for _ in 1..depth {
        let norm = (var_a * var_b).sqrt();
        let cos = (sigma / norm).clamp(-1.0, 1.0);
        let phi = cos.acos();
        sigma = norm / (2.0 * PI) * (phi.sin() + (PI - phi) * cos);
        let slope = (PI - phi) / (2.0 * PI);
        theta = sigma + 1.0 + theta * slope;
        var_a *= 0.5;
        var_b *= 0.5;
    }
    theta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernelspace::jacobi_eigen;
    use crate::nnkit::{Activation, InitScheme, NetworkConfig};

    fn net(input_dim: usize, hidden: Vec<usize>, classes: usize, init: InitScheme, seed: u64) -> Network {
        Network::init(&NetworkConfig {
            input_dim,
            hidden_dims: hidden,
            num_classes: classes,
            activation: Activation::Relu,
            init_scheme: init,
            seed,
        })
        .unwrap()
    }

    fn points(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        use rand::Rng;
        let mut rng = crate::rng::stream(seed, "test-points", 0);
        (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn linear_model_kernel() {
        // Two-class linear model, standard scale: ∇f^i = (x in row i, 1 at bias i).
        let cfg = NetworkConfig {
            input_dim: 2,
            hidden_dims: vec![],
            num_classes: 2,
            activation: Activation::Identity,
            init_scheme: InitScheme::Standard,
            seed: 0,
        };
        let net = Network::from_params(&cfg, vec![0.3, -0.1, 0.2, 0.5, 0.0, 0.0]).unwrap();
        let xs = vec![vec![1.0, 2.0], vec![-0.5, 3.0]];
        let ntk = empirical_ntk(&net, &xs).unwrap();
        let dot = 1.0 * -0.5 + 2.0 * 3.0;
        assert_eq!(ntk.block(0, 0, 1, 0), dot + 1.0);
        assert_eq!(ntk.block(0, 1, 1, 1), dot + 1.0);
        assert_eq!(ntk.block(0, 0, 1, 1), 0.0);
        assert_eq!(trace_gram(&ntk).matrix[(0, 1)], dot + 1.0);
    }

    #[test]
    fn empirical_ntk_symmetric_psd() {
        let net = net(4, vec![8], 3, InitScheme::Standard, 2);
        let ntk = empirical_ntk(&net, &points(6, 4, 1)).unwrap();
        assert_eq!(ntk.matrix.asymmetry(), 0.0);
        let eig = jacobi_eigen(&ntk.matrix).unwrap();
        assert!(eig.min() >= -1e-10 * eig.max().max(1.0));
        let gram = trace_gram(&ntk);
        assert_eq!(gram.matrix.asymmetry(), 0.0);
        assert!(jacobi_eigen(&gram.matrix).unwrap().min() >= -1e-10);
        let direct = empirical_trace_gram(&net, &points(6, 4, 1)).unwrap();
        assert!(direct.matrix.sub(&gram.matrix).unwrap().max_abs() < 1e-12 * gram.matrix.max_abs());
    }

    #[test]
    fn trace_gram_of_factorized_kernel() {
        let m = Matrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let k = 3;
        let big = Matrix::from_fn(2 * k, 2 * k, |r, c| if r % k == c % k { m[(r / k, c / k)] } else { 0.0 });
        let ntk = EmpiricalNtk { n: 2, classes: k, matrix: big };
        assert_eq!(trace_gram(&ntk).matrix, m);
        assert_eq!(ntk.off_class_ratio(), 0.0);
    }

    #[test]
    fn analytic_depth_one_is_scaled_linear_plus_bias() {
        let xs = vec![vec![1.0, 2.0, -1.0], vec![0.5, 0.0, 2.0]];
        let g = analytic_relu_ntk(&xs, 1).unwrap();
        assert!((g.matrix[(0, 1)] - ((0.5 - 2.0) / 3.0 + 1.0)).abs() < 1e-15);
        assert!((g.matrix[(0, 0)] - (6.0 / 3.0 + 1.0)).abs() < 1e-15);
        let deep = analytic_relu_ntk(&points(5, 3, 4), 3).unwrap();
        for i in 0..5 {
            assert!(deep.matrix[(i, i)] > 0.0);
        }
        assert_eq!(deep.source, GramSource::AnalyticRelu);
    }

    #[test]
    fn analytic_rejects_zero_vector_and_depth_zero() {
        assert!(analytic_relu_ntk(&[vec![0.0, 0.0]], 2).is_err());
        assert!(analytic_relu_ntk(&[vec![1.0, 0.0]], 0).is_err());
    }

    #[test]
    fn analytic_matches_wide_network() {
        let mut xs = points(4, 3, 9);
        for x in &mut xs {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= norm);
        }
        let wide = net(3, vec![4096], 2, InitScheme::NtkParameterization, 5);
        let empirical = trace_gram(&empirical_ntk(&wide, &xs).unwrap());
        let analytic = analytic_relu_ntk(&xs, 2).unwrap();
        let err = empirical.matrix.sub(&analytic.matrix).unwrap().frobenius_norm() / analytic.matrix.frobenius_norm();
        assert!(err < 0.05, "relative Frobenius error {err}");
    }

    #[test]
    fn external_gram_validation() {
        assert!(GramMatrix::external(Matrix::zeros(2, 3)).is_err());
        assert!(GramMatrix::external(Matrix::from_rows(&[vec![1.0, 0.2], vec![0.3, 1.0]]).unwrap()).is_err());
        let g = GramMatrix::external(Matrix::identity(3)).unwrap();
        assert_eq!(g.restrict(&[0, 2]).matrix, Matrix::identity(2));
    }
}
