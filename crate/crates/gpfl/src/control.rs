//! Control laws: PD for data collection, exact-model feedback linearization,
//! and the GP-driven variants that either evaluate the learned model directly
//! at the commanded acceleration or first extract dynamics components from it.
//!
//! All controllers are stateless pure functions of (time, measurement,
//! reference); the structs only bundle their parameters for the simulator.

use crate::dyncomp::{estimate_bias, estimate_inertia};
use crate::dynamics::{bias_forces, mass_matrix, RobotModel};
use crate::error::{Error, Result};
use crate::gpr::TorqueModel;
use crate::sim::{Controller, RefSample};
use nalgebra::DVector;

/// Diagonal PD gain pair. The (omega, zeta) constructor places both
/// closed-loop error poles of the linearized dynamics at
/// -omega*(zeta +- sqrt(zeta^2 - 1)).
#[derive(Clone, Debug, PartialEq)]
pub struct Gains {
    pub kp: DVector<f64>,
    pub kd: DVector<f64>,
}

impl Gains {
    pub fn new(kp: DVector<f64>, kd: DVector<f64>) -> Result<Self> {
        if kp.len() != kd.len() {
            return Err(Error::DimensionMismatch {
                what: "kd".into(),
                expected: kp.len(),
                got: kd.len(),
            });
        }
        if !kp.iter().chain(kd.iter()).all(|g| g.is_finite() && *g >= 0.0) {
            return Err(Error::invalid("gains", "diagonal entries must be non-negative"));
        }
        Ok(Gains { kp, kd })
    }

    /// Kp = omega^2 I, Kd = 2 zeta omega I.
    pub fn from_natural_frequency(omega: f64, zeta: f64, n: usize) -> Result<Self> {
        Gains::new(
            DVector::from_element(n, omega * omega),
            DVector::from_element(n, 2.0 * zeta * omega),
        )
    }

    pub fn dof(&self) -> usize {
        self.kp.len()
    }

    fn check(&self, q: &DVector<f64>, dq: &DVector<f64>) -> Result<()> {
        for (what, len) in [("q", q.len()), ("dq", dq.len())] {
            if len != self.dof() {
                return Err(Error::DimensionMismatch {
                    what: what.into(),
                    expected: self.dof(),
                    got: len,
                });
            }
        }
        Ok(())
    }
}

/// a = r'' + Kp (r - q) + Kd (r' - dq), the acceleration that drives the
/// tracking error along the chosen second-order dynamics.
pub fn commanded_acceleration(
    reference: RefSample<'_>,
    q: &DVector<f64>,
    dq: &DVector<f64>,
    gains: &Gains,
) -> Result<DVector<f64>> {
    gains.check(q, dq)?;
    let e = reference.r - q;
    let de = reference.dr - dq;
    Ok(reference.ddr + gains.kp.component_mul(&e) + gains.kd.component_mul(&de))
}

/// tau = Kp e + Kd e'.
pub fn pd_torque(
    reference: RefSample<'_>,
    q: &DVector<f64>,
    dq: &DVector<f64>,
    gains: &Gains,
) -> Result<DVector<f64>> {
    gains.check(q, dq)?;
    let e = reference.r - q;
    let de = reference.dr - dq;
    Ok(gains.kp.component_mul(&e) + gains.kd.component_mul(&de))
}

/// tau = B(q) a + n(q, dq) with the true model: cancels the nonlinear
/// dynamics exactly, leaving linear error dynamics.
pub fn exact_fl_torque(
    model: &RobotModel,
    reference: RefSample<'_>,
    q: &DVector<f64>,
    dq: &DVector<f64>,
    gains: &Gains,
) -> Result<DVector<f64>> {
    let a = commanded_acceleration(reference, q, dq, gains)?;
    Ok(mass_matrix(model, q)? * a + bias_forces(model, q, dq)?)
}

/// tau_i = f_i(q, dq, a): each joint's learned model evaluated directly at
/// the commanded acceleration. Cheap (n evaluations per step) but trusts the
/// model far from its training inputs, where smooth isotropic kernels revert
/// to zero torque.
pub fn gp_fl_torque(
    model: &TorqueModel,
    reference: RefSample<'_>,
    q: &DVector<f64>,
    dq: &DVector<f64>,
    gains: &Gains,
) -> Result<DVector<f64>> {
    let a = commanded_acceleration(reference, q, dq, gains)?;
    model.predict_torque(q, dq, &a)
}

/// tau = B_hat(q) a + n_hat(q, dq): feedback linearization on dynamics
/// components extracted from the learned model at the measured state. The
/// commanded acceleration only ever multiplies the extracted inertia, so
/// large accelerations never push the model outside its training inputs.
pub fn gp_fl_dce_torque(
    model: &TorqueModel,
    reference: RefSample<'_>,
    q: &DVector<f64>,
    dq: &DVector<f64>,
    gains: &Gains,
) -> Result<DVector<f64>> {
    let a = commanded_acceleration(reference, q, dq, gains)?;
    let b = estimate_inertia(model, q)?;
    let n = estimate_bias(model, q, dq)?;
    Ok(b * a + n)
}

pub struct PdController {
    pub gains: Gains,
}

impl Controller for PdController {
    fn torque(
        &self,
        _t: f64,
        q: &DVector<f64>,
        dq: &DVector<f64>,
        reference: RefSample<'_>,
    ) -> DVector<f64> {
        pd_torque(reference, q, dq, &self.gains).unwrap_or_else(|_| fault(q.len()))
    }
}

pub struct ExactFlController {
    pub model: RobotModel,
    pub gains: Gains,
}

impl Controller for ExactFlController {
    fn torque(
        &self,
        _t: f64,
        q: &DVector<f64>,
        dq: &DVector<f64>,
        reference: RefSample<'_>,
    ) -> DVector<f64> {
        exact_fl_torque(&self.model, reference, q, dq, &self.gains)
            .unwrap_or_else(|_| fault(q.len()))
    }
}

pub struct GpFlController {
    pub model: TorqueModel,
    pub gains: Gains,
}

impl Controller for GpFlController {
    fn torque(
        &self,
        _t: f64,
        q: &DVector<f64>,
        dq: &DVector<f64>,
        reference: RefSample<'_>,
    ) -> DVector<f64> {
        gp_fl_torque(&self.model, reference, q, dq, &self.gains)
            .unwrap_or_else(|_| fault(q.len()))
    }
}

pub struct GpFlDceController {
    pub model: TorqueModel,
    pub gains: Gains,
}

impl Controller for GpFlDceController {
    fn torque(
        &self,
        _t: f64,
        q: &DVector<f64>,
        dq: &DVector<f64>,
        reference: RefSample<'_>,
    ) -> DVector<f64> {
        gp_fl_dce_torque(&self.model, reference, q, dq, &self.gains)
            .unwrap_or_else(|_| fault(q.len()))
    }
}

/// The simulator treats any non-finite torque as a controller fault; errors
/// inside a controller surface that way.
fn fault(n: usize) -> DVector<f64> {
    DVector::from_element(n, f64::NAN)
}
