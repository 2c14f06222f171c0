//! Extraction of physical dynamics components from trained torque models by
//! input probing: gravity from the zero-velocity, zero-acceleration response,
//! inertia columns from unit-acceleration increments over that baseline, and
//! everything acceleration-independent as a lumped bias.

use crate::error::{Error, Result};
use crate::gpr::TorqueModel;
use nalgebra::{DMatrix, DVector};

/// Gravity torque estimate: the model's response at zero velocity and zero
/// acceleration.
pub fn estimate_gravity(model: &TorqueModel, q: &DVector<f64>) -> Result<DVector<f64>> {
    let zero = DVector::zeros(model.n_joints());
    model.predict_torque(q, &zero, &zero)
}

/// Acceleration-independent torque estimate (Coriolis, friction and gravity
/// together): the response with the acceleration probe zeroed. At dq = 0 the
/// probe input is identical to the gravity probe, so the results agree
/// bitwise.
pub fn estimate_bias(
    model: &TorqueModel,
    q: &DVector<f64>,
    dq: &DVector<f64>,
) -> Result<DVector<f64>> {
    let zero = DVector::zeros(model.n_joints());
    model.predict_torque(q, dq, &zero)
}

/// Inertia matrix estimate, column by column: column j is the response
/// increment to a unit acceleration on joint j over the gravity baseline.
pub fn estimate_inertia(model: &TorqueModel, q: &DVector<f64>) -> Result<DMatrix<f64>> {
    estimate_inertia_scaled(model, q, 1.0)
}

/// Like `estimate_inertia` but probes with magnitude `probe` and divides the
/// increment by it. Models affine in the acceleration give the same answer
/// for every probe; smooth isotropic models do not, which measures how local
/// their linearization is.
pub fn estimate_inertia_scaled(
    model: &TorqueModel,
    q: &DVector<f64>,
    probe: f64,
) -> Result<DMatrix<f64>> {
    if !(probe.is_finite() && probe > 0.0) {
        return Err(Error::invalid(
            "inertia probe",
            "must be finite and positive",
        ));
    }
    let n = model.n_joints();
    let zero = DVector::zeros(n);
    let baseline = model.predict_torque(q, &zero, &zero)?;
    let mut b = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut ddq = DVector::zeros(n);
        ddq[j] = probe;
        let col = model.predict_torque(q, &zero, &ddq)?;
        for i in 0..n {
            b[(i, j)] = (col[i] - baseline[i]) / probe;
        }
    }
    Ok(b)
}

/// Largest absolute entry of B - B'. The estimator never symmetrizes, so any
/// gap is fitting error and works as a cheap model-quality diagnostic.
pub fn inertia_asymmetry(b: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..b.nrows() {
        for j in (i + 1)..b.ncols() {
            worst = worst.max((b[(i, j)] - b[(j, i)]).abs());
        }
    }
    worst
}
