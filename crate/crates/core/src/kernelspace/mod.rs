//! Neural tangent kernels, symmetric eigendecomposition and the kernel
//! quantities derived from them.

mod eigen;
mod ntk;
mod regression;

pub use eigen::{jacobi_eigen, EigenDecomposition};
pub use ntk::{
    analytic_relu_ntk, analytic_relu_ntk_cross, empirical_ntk, empirical_trace_cross, empirical_trace_gram, trace_gram,
    EmpiricalNtk, GramMatrix, GramSource,
};
pub use regression::{
    check_step_size, convergence_error, invertible_spectrum, kernel_regression_predict, InvertibleSpectrum,
    JitterPolicy, KernelPrediction, JITTER_SCALE, SINGULAR_RATIO,
};

use crate::error::Result;

/// Eigendecomposition of a Gram matrix (cyclic Jacobi, descending order).
pub fn eigendecompose(gram: &GramMatrix) -> Result<EigenDecomposition> {
    jacobi_eigen(&gram.matrix)
}
