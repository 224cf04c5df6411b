//! Straightforward reference implementations used as oracles by the
//! integration tests. Dense `Vec<Vec<f64>>` matrices, no shared code with the
//! library's linear algebra.

#![allow(dead_code)]

use dynamical::nnkit::{LossKind, Network};
use dynamical::pool::Sample;

pub type Dense = Vec<Vec<f64>>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for l in 0..k {
            for j in 0..m {
                out[i][j] += a[i][l] * b[l][j];
            }
        }
    }
    out
}

pub fn identity(n: usize) -> Dense {
    (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect()
}

pub fn trace_of_product_t(a: &Dense, b: &Dense) -> f64 {
    // Tr[aᵀ b]
    a.iter().zip(b).map(|(r, s)| dot(r, s)).sum()
}

pub fn one_hot(labels: &[usize], classes: usize) -> Dense {
    labels.iter().map(|&y| (0..classes).map(|k| f64::from(u8::from(k == y))).collect()).collect()
}

/// Lower-triangular `L` with `L Lᵀ = a`, or `None` if `a` is not positive definite.
pub fn cholesky(a: &Dense) -> Option<Dense> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= 0.0 {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// Solves `a x = b` column by column through the Cholesky factor.
pub fn cholesky_solve(l: &Dense, b: &Dense) -> Dense {
    let n = l.len();
    let cols = b[0].len();
    let mut x = vec![vec![0.0; cols]; n];
    for c in 0..cols {
        let mut z = vec![0.0; n];
        for i in 0..n {
            z[i] = (b[i][c] - (0..i).map(|k| l[i][k] * z[k]).sum::<f64>()) / l[i][i];
        }
        for i in (0..n).rev() {
            x[i][c] = (z[i] - (i + 1..n).map(|k| l[k][i] * x[k][c]).sum::<f64>()) / l[i][i];
        }
    }
    x
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
pub fn lambda_max(a: &Dense) -> f64 {
    let n = a.len();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * i as f64).collect();
    let mut lambda = 0.0;
    for _ in 0..5000 {
        let w: Vec<f64> = a.iter().map(|r| dot(r, &v)).collect();
        let norm = dot(&w, &w).sqrt();
        let next = dot(&v, &w) / dot(&v, &v);
        v = w.into_iter().map(|x| x / norm).collect();
        if (next - lambda).abs() <= 1e-14 * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Smallest eigenvalue of a symmetric positive-definite matrix by inverse iteration.
pub fn lambda_min(a: &Dense) -> f64 {
    let l = cholesky(a).expect("positive definite");
    let n = a.len();
    let mut v: Dense = (0..n).map(|i| vec![1.0 + 0.01 * i as f64]).collect();
    let mut mu = 0.0;
    for _ in 0..5000 {
        let w = cholesky_solve(&l, &v);
        let num: f64 = (0..n).map(|i| v[i][0] * w[i][0]).sum();
        let den: f64 = (0..n).map(|i| v[i][0] * v[i][0]).sum();
        let next = num / den;
        let norm = (0..n).map(|i| w[i][0] * w[i][0]).sum::<f64>().sqrt();
        v = w.into_iter().map(|r| vec![r[0] / norm]).collect();
        if (next - mu).abs() <= 1e-14 * next.abs() {
            return 1.0 / next;
        }
        mu = next;
    }
    1.0 / mu
}

/// `exp(a)` by scaling and squaring with a Taylor series.
pub fn expm(a: &Dense) -> Dense {
    let n = a.len();
    let norm: f64 = a.iter().flatten().map(|x| x.abs()).sum();
    let squarings = norm.max(1.0).log2().ceil() as i32 + 4;
    let scale = 2f64.powi(-squarings);
    let scaled: Dense = a.iter().map(|r| r.iter().map(|x| x * scale).collect()).collect();
    let mut result = identity(n);
    let mut term = identity(n);
    for k in 1..30 {
        term = matmul(&term, &scaled).into_iter().map(|r| r.into_iter().map(|x| x / k as f64).collect()).collect();
        for i in 0..n {
            for j in 0..n {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        result = matmul(&result, &result);
    }
    result
}

/// Central-difference gradient of `f` with respect to the network parameters.
pub fn finite_difference(net: &Network, h: f64, mut f: impl FnMut(&Network) -> f64) -> Vec<f64> {
    let mut probe = net.clone();
    (0..net.num_params())
        .map(|j| {
            let orig = probe.params()[j];
            probe.params_mut()[j] = orig + h;
            let plus = f(&probe);
            probe.params_mut()[j] = orig - h;
            let minus = f(&probe);
            probe.params_mut()[j] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// `Σ_s ∇ℓ(s)` from per-sample gradients.
pub fn summed_gradient(net: &Network, samples: &[Sample], kind: LossKind) -> Vec<f64> {
    let mut total = vec![0.0; net.num_params()];
    for s in samples {
        let g = net.loss_gradient(s, kind).unwrap();
        for (t, v) in total.iter_mut().zip(g.as_slice()) {
            *t += v;
        }
    }
    total
}

/// `‖Σ∇ℓ‖²` over `samples`.
pub fn dynamics_oracle(net: &Network, samples: &[Sample], kind: LossKind) -> f64 {
    let g = summed_gradient(net, samples, kind);
    dot(&g, &g)
}

/// Trace Gram `(1/K) Σ_k ⟨∇f_k(x), ∇f_k(x')⟩` from per-class gradients.
pub fn trace_gram_oracle(net: &Network, xa: &[Vec<f64>], xb: &[Vec<f64>]) -> Dense {
    let k = net.num_classes();
    let ga: Vec<_> = xa.iter().map(|x| net.per_class_gradients(x).unwrap()).collect();
    let gb: Vec<_> = xb.iter().map(|x| net.per_class_gradients(x).unwrap()).collect();
    ga.iter()
        .map(|a| {
            gb.iter().map(|b| (0..k).map(|c| dot(a[c].as_slice(), b[c].as_slice())).sum::<f64>() / k as f64).collect()
        })
        .collect()
}

/// Kendall τ-a by direct pair enumeration; ties count as neither.
pub fn kendall_oracle(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += ((a[i] - a[j]) * (b[i] - b[j])).signum() * f64::from(u8::from(a[i] != a[j] && b[i] != b[j]));
        }
    }
    s / (n * (n - 1) / 2) as f64
}

/// Unbiased MMD² with the cross-term diagonal paired over the first `min(m, n)` indices.
pub fn mmd_oracle(k: &Dense, m: usize, n: usize) -> f64 {
    let mut xx = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                xx += k[i][j];
            }
        }
    }
    let mut yy = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                yy += k[m + i][m + j];
            }
        }
    }
    let mut xy = 0.0;
    for i in 0..m {
        for j in 0..n {
            if !(i == j && i < m.min(n)) {
                xy += k[i][m + j];
            }
        }
    }
    xx / (m * (m - 1)) as f64 + yy / (n * (n - 1)) as f64 - 2.0 * xy / (m * (n - 1)) as f64
}
