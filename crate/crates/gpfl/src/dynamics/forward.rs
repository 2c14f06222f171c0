use super::{bias_forces, mass_matrix, RobotModel};
use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector};

/// Diagonal added to a symmetric positive-definite solve when plain Cholesky
/// fails; one retry only.
pub const CHOLESKY_JITTER: f64 = 1e-12;

/// Joint accelerations produced by torque `tau` at state `(q, dq)`.
pub fn forward_dynamics(
    model: &RobotModel,
    q: &DVector<f64>,
    dq: &DVector<f64>,
    tau: &DVector<f64>,
) -> Result<DVector<f64>> {
    model.check_vec(tau, "tau")?;
    let b = mass_matrix(model, q)?;
    let rhs = tau - bias_forces(model, q, dq)?;
    solve_spd(&b, &rhs).ok_or(Error::SingularDynamics)
}

/// Cholesky solve of a symmetric positive-definite system, retrying once with
/// jitter on the diagonal.
pub fn solve_spd(a: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = Cholesky::new(a.clone()) {
        return Some(ch.solve(rhs));
    }
    let mut bumped = a.clone();
    for i in 0..bumped.nrows() {
        bumped[(i, i)] += CHOLESKY_JITTER;
    }
    Cholesky::new(bumped).map(|ch| ch.solve(rhs))
}
