//! Marginal likelihood of the exact GP and its gradient in log-parameter
//! space, shared by fitting and hyperparameter search.

use super::kernel::{kernel_eval_unchecked, kernel_eval_with_grad, param_count, KernelSpec};
use super::prepare_rows;
use crate::error::{Error, Result};
use nalgebra::DVector;
use ndarray::{Array1, Array2, OwnedRepr};
use ndarray_linalg::cholesky::{CholeskyFactorized, FactorizeC, InverseC, SolveC, UPLO};

/// Relative diagonal jitter used for the single factorization retry.
pub(crate) const JITTER_RELATIVE: f64 = 1e-8;

pub(crate) fn build_kernel_matrix(spec: &KernelSpec, rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let n = rows.len();
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = kernel_eval_unchecked(spec, &rows[i], &rows[j]);
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: "kernel matrix".into(),
                });
            }
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    Ok(k)
}

/// Lower bound on the smallest eigenvalue via Gershgorin discs.
fn gershgorin_bound(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    (0..n)
        .map(|i| {
            let radius: f64 = (0..n).filter(|j| *j != i).map(|j| a[[i, j]].abs()).sum();
            a[[i, i]] - radius
        })
        .fold(f64::INFINITY, f64::min)
}

/// Factorizes `k + sigma^2 I`, retrying once with diagonal jitter scaled to
/// the matrix trace.
pub(crate) fn factorize_kernel(
    k: Array2<f64>,
    sigma: f64,
) -> Result<CholeskyFactorized<OwnedRepr<f64>>> {
    let n = k.nrows();
    let mut k_sigma = k;
    for i in 0..n {
        k_sigma[[i, i]] += sigma * sigma;
    }
    if let Ok(factor) = k_sigma.factorizec(UPLO::Lower) {
        return Ok(factor);
    }
    let trace: f64 = (0..n).map(|i| k_sigma[[i, i]]).sum();
    let jitter = JITTER_RELATIVE * trace / n as f64;
    for i in 0..n {
        k_sigma[[i, i]] += jitter;
    }
    match k_sigma.factorizec(UPLO::Lower) {
        Ok(factor) => Ok(factor),
        Err(_) => Err(Error::IllConditionedKernel {
            jitter,
            min_eigen_estimate: gershgorin_bound(&k_sigma),
        }),
    }
}

fn lml_from_parts(
    y: &Array1<f64>,
    alpha: &Array1<f64>,
    factor: &CholeskyFactorized<OwnedRepr<f64>>,
) -> f64 {
    let log_det_half: f64 = factor.factor.diag().iter().map(|d| d.ln()).sum();
    let n = y.len() as f64;
    -0.5 * y.dot(alpha) - log_det_half - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

/// Marginal likelihood plus its gradient w.r.t. the log-space parameter
/// vector [kernel params.., log sigma] on prepared rows.
pub(crate) fn lml_grad_prepared(
    spec: &KernelSpec,
    sigma: f64,
    rows: &[Vec<f64>],
    y: &Array1<f64>,
) -> Result<(f64, Vec<f64>)> {
    let n = rows.len();
    let k = build_kernel_matrix(spec, rows)?;
    let factorization = factorize_kernel(k, sigma)?;
    let alpha = factorization
        .solvec(y)
        .map_err(|e| Error::OptimizationFailed(format!("cholesky solve failed: {e}")))?;
    let value = lml_from_parts(y, &alpha, &factorization);

    // M = alpha alpha' - (K + sigma^2 I)^{-1}; each gradient component is
    // tr(M dK/dtheta) / 2 by the standard identity.
    let mut m = factorization
        .invc()
        .map_err(|e| Error::OptimizationFailed(format!("cholesky inverse failed: {e}")))?;
    m.mapv_inplace(|v| -v);
    for i in 0..n {
        for j in 0..n {
            m[[i, j]] += alpha[i] * alpha[j];
        }
    }

    let n_params = param_count(spec);
    let mut grad = vec![0.0; n_params + 1];
    let mut entry = vec![0.0; n_params];
    for i in 0..n {
        for j in i..n {
            kernel_eval_with_grad(spec, &rows[i], &rows[j], &mut entry);
            let weight = if i == j { 0.5 } else { 1.0 } * m[[i, j]];
            for (g, dk) in grad[..n_params].iter_mut().zip(&entry) {
                *g += weight * dk;
            }
        }
    }
    let trace_m: f64 = (0..n).map(|i| m[[i, i]]).sum();
    grad[n_params] = sigma * sigma * trace_m;
    Ok((value, grad))
}

/// Marginal likelihood of the GP defined by `spec` and noise `sigma` on raw
/// inputs, with the same input preparation as fitting, and its gradient in
/// log-parameter space.
///
/// The gradient layout is the kernel parameters followed by the noise:
/// squared-exponential kernels contribute `[scale, lengthscales..]`,
/// polynomial kernels `[weights.., bias]`, and the structured kernel its
/// acceleration factor, velocity factor and per-joint configuration factors
/// in that order, each as `[weights.., bias]`. All entries are derivatives
/// with respect to the natural logarithm of the parameter.
pub fn log_marginal_likelihood(
    spec: &KernelSpec,
    sigma: f64,
    inputs: &[DVector<f64>],
    targets: &DVector<f64>,
) -> Result<(f64, Vec<f64>)> {
    spec.validate()?;
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            what: "gp training set".into(),
            expected: inputs.len().max(1),
            got: targets.len(),
        });
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid("gp noise", "must be finite and positive"));
    }
    let (rows, _) = prepare_rows(spec, inputs)?;
    let y = Array1::from_vec(targets.as_slice().to_vec());
    lml_grad_prepared(spec, sigma, &rows, &y)
}
