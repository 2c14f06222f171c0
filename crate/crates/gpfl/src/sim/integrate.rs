use crate::dynamics::{forward_dynamics, RobotModel};
use crate::error::Result;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// Velocity update first, then position with the new velocity. First
    /// order, cheap, good energy behavior at the 1 kHz control step.
    SemiImplicitEuler,
    /// Classic fourth-order Runge-Kutta with the torque held over the step.
    Rk4,
}

impl Integrator {
    pub(crate) fn step(
        self,
        model: &RobotModel,
        q: &DVector<f64>,
        dq: &DVector<f64>,
        tau: &DVector<f64>,
        dt: f64,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        match self {
            Integrator::SemiImplicitEuler => {
                let ddq = forward_dynamics(model, q, dq, tau)?;
                let dq1 = dq + ddq * dt;
                let q1 = q + &dq1 * dt;
                Ok((q1, dq1))
            }
            Integrator::Rk4 => {
                let f = |q: &DVector<f64>, dq: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>)> {
                    Ok((dq.clone(), forward_dynamics(model, q, dq, tau)?))
                };
                let (k1q, k1v) = f(q, dq)?;
                let (k2q, k2v) = f(&(q + &k1q * (dt / 2.0)), &(dq + &k1v * (dt / 2.0)))?;
                let (k3q, k3v) = f(&(q + &k2q * (dt / 2.0)), &(dq + &k2v * (dt / 2.0)))?;
                let (k4q, k4v) = f(&(q + &k3q * dt), &(dq + &k3v * dt))?;
                let q1 = q + (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (dt / 6.0);
                let dq1 = dq + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (dt / 6.0);
                Ok((q1, dq1))
            }
        }
    }
}
