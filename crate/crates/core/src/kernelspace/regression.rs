//! Kernel-regression prediction and the convergence-error functional.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::eigen::{jacobi_eigen, EigenDecomposition};
use super::ntk::GramMatrix;

/// Ratio `λ_min / λ_max` below which a Gram matrix counts as singular.
pub const SINGULAR_RATIO: f64 = 1e-10;
/// Jitter is `JITTER_SCALE * Tr(Θ) / n`.
pub const JITTER_SCALE: f64 = 1e-8;

const STEP_SIZE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JitterPolicy {
    #[default]
    Allow,
    Forbid,
}

/// Eigenvalues made safe to invert, plus the jitter that was added (0 if none).
#[derive(Debug, Clone, PartialEq)]
pub struct InvertibleSpectrum {
    pub values: Vec<f64>,
    pub jitter: f64,
}

/// Applies the jitter policy: when `λ_min < 1e-10 λ_max`, add
/// `ε = 1e-8 Tr(Θ)/n` to every eigenvalue (if allowed).
pub fn invertible_spectrum(eig: &EigenDecomposition, policy: JitterPolicy) -> Result<InvertibleSpectrum> {
    let n = eig.dim();
    if n == 0 {
        return Err(Error::Input("empty spectrum".into()));
    }
    let (max, min) = (eig.max(), eig.min());
    if max > 0.0 && min >= SINGULAR_RATIO * max {
        return Ok(InvertibleSpectrum { values: eig.values.clone(), jitter: 0.0 });
    }
    if policy == JitterPolicy::Forbid {
        return Err(Error::Numerical(format!("Gram matrix is singular: λ_min = {min:e}, λ_max = {max:e}")));
    }
    let trace: f64 = eig.values.iter().sum();
    let jitter = JITTER_SCALE * trace / n as f64;
    let values: Vec<f64> = eig.values.iter().map(|l| l + jitter).collect();
    let new_min = values[n - 1];
    if !(jitter > 0.0) || new_min <= 0.0 {
        return Err(Error::Numerical(format!(
            "Gram matrix rank-deficient beyond jitter: λ_min = {min:e}, jitter = {jitter:e}"
        )));
    }
    Ok(InvertibleSpectrum { values, jitter })
}

pub fn check_step_size(eig: &EigenDecomposition, eta: f64) -> Result<()> {
    if !(eta > 0.0) {
        return Err(Error::Domain(format!("learning rate must be positive, got {eta}")));
    }
    if eta * eig.max() > 1.0 + STEP_SIZE_SLACK {
        return Err(Error::Domain(format!(
            "step size outside the convergent regime: η λ_max = {} > 1",
            eta * eig.max()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelPrediction {
    /// One row per test point, one column per class.
    pub values: Matrix,
    pub jitter: f64,
}

/// `Θ(x, X) Θ(X, X)⁻¹ (I − e^{−ηΘ(X,X) t}) Y`, evaluated in the eigenbasis of
/// `Θ(X, X)`.
pub fn kernel_regression_predict(
    gram_train: &GramMatrix,
    k_test: &Matrix,
    y: &Matrix,
    eta: f64,
    t: f64,
    policy: JitterPolicy,
) -> Result<KernelPrediction> {
    let n = gram_train.n();
    if k_test.cols() != n || y.rows() != n {
        return Err(Error::Input(format!(
            "shape mismatch: Gram {n}x{n}, test kernel {}x{}, targets {}x{}",
            k_test.rows(),
            k_test.cols(),
            y.rows(),
            y.cols()
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
    }
    let eig = jacobi_eigen(&gram_train.matrix)?;
    check_step_size(&eig, eta)?;
    let spectrum = invertible_spectrum(&eig, policy)?;
    let filter: Vec<f64> = spectrum.values.iter().map(|&l| -(-eta * l * t).exp_m1() / l).collect();
    let coefficients = eig.spectral_map(&filter)?.matmul(y)?;
    Ok(KernelPrediction { values: k_test.matmul(&coefficients)?, jitter: spectrum.jitter })
}

/// `E_t = sqrt(Σ_k Σ_i (1 − η λ_i)^{2t} (v_iᵀ Y^k)²)`.
pub fn convergence_error(eig: &EigenDecomposition, y: &Matrix, eta: f64, t: u64) -> Result<f64> {
    if y.rows() != eig.dim() {
        return Err(Error::Input("label matrix rows must match the kernel size".into()));
    }
    check_step_size(eig, eta)?;
    let proj = eig.project(y)?;
    let mut total = 0.0;
    for (i, &lambda) in eig.values.iter().enumerate() {
        let decay = (1.0 - eta * lambda).powi(2).powf(t as f64);
        let weight: f64 = proj.row(i).iter().map(|c| c * c).sum();
        total += decay * weight;
    }
    Ok(total.sqrt())
}
