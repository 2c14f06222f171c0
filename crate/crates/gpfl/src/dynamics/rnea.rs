//! Recursive Newton-Euler inverse dynamics.
//!
//! Outward pass propagates velocities and accelerations from the base to the
//! tip, with gravity folded in as a fictitious base acceleration; inward pass
//! accumulates the wrench each link exerts on its parent and projects it onto
//! the joint axis. All per-link quantities live in that link's own frame.

use super::{joint_frames, JointType, RobotModel};
use crate::error::Result;
use nalgebra::{DVector, Vector3};

/// Joint torques realizing `ddq` at state `(q, dq)`, including gravity and
/// joint friction.
pub fn inverse_dynamics(
    model: &RobotModel,
    q: &DVector<f64>,
    dq: &DVector<f64>,
    ddq: &DVector<f64>,
) -> Result<DVector<f64>> {
    model.check_vec(q, "q")?;
    model.check_vec(dq, "dq")?;
    model.check_vec(ddq, "ddq")?;
    Ok(rnea(model, q, dq, ddq))
}

/// Torques holding the robot static at `q`.
pub fn gravity_vector(model: &RobotModel, q: &DVector<f64>) -> Result<DVector<f64>> {
    let zero = DVector::zeros(model.dof());
    inverse_dynamics(model, q, &zero, &zero)
}

/// Torques balancing every velocity- and gravity-dependent term at `(q, dq)`:
/// Coriolis/centrifugal forces, gravity, and friction.
pub fn bias_forces(model: &RobotModel, q: &DVector<f64>, dq: &DVector<f64>) -> Result<DVector<f64>> {
    let zero = DVector::zeros(model.dof());
    inverse_dynamics(model, q, dq, &zero)
}

fn rnea(model: &RobotModel, q: &DVector<f64>, dq: &DVector<f64>, ddq: &DVector<f64>) -> DVector<f64> {
    let n = model.dof();
    let frames = joint_frames(model, q);
    let joints = model.joints();

    let mut w = vec![Vector3::zeros(); n];
    let mut dw = vec![Vector3::zeros(); n];
    let mut ac = vec![Vector3::zeros(); n];

    let mut w_parent = Vector3::zeros();
    let mut dw_parent = Vector3::zeros();
    // Gravity enters as an upward base acceleration.
    let mut a_parent = -model.gravity();

    for i in 0..n {
        let f = &frames[i];
        let rt = f.r.transpose();
        let a_origin =
            rt * (a_parent + dw_parent.cross(&f.p) + w_parent.cross(&w_parent.cross(&f.p)));
        let (wi, dwi, ai) = match joints[i].joint_type {
            JointType::Revolute => {
                let w_in = rt * w_parent;
                let w_rel = f.axis * dq[i];
                let wi = w_in + w_rel;
                let dwi = rt * dw_parent + f.axis * ddq[i] + w_in.cross(&w_rel);
                (wi, dwi, a_origin)
            }
            JointType::Prismatic => {
                let wi = rt * w_parent;
                let dwi = rt * dw_parent;
                let ai = a_origin + wi.cross(&(f.axis * dq[i])) * 2.0 + f.axis * ddq[i];
                (wi, dwi, ai)
            }
        };
        let c = joints[i].com;
        w[i] = wi;
        dw[i] = dwi;
        ac[i] = ai + dwi.cross(&c) + wi.cross(&wi.cross(&c));
        w_parent = wi;
        dw_parent = dwi;
        a_parent = ai;
    }

    let mut tau = DVector::zeros(n);
    let mut f_child = Vector3::zeros();
    let mut n_child = Vector3::zeros();
    for i in (0..n).rev() {
        let joint = &joints[i];
        let force = joint.mass * ac[i];
        let moment = joint.inertia * dw[i] + w[i].cross(&(joint.inertia * w[i]));
        let (f_down, n_down) = if i + 1 < n {
            let fc = &frames[i + 1];
            let f_rot = fc.r * f_child;
            (f_rot, fc.r * n_child + fc.p.cross(&f_rot))
        } else {
            (Vector3::zeros(), Vector3::zeros())
        };
        let f_total = force + f_down;
        // Moment about this frame's origin.
        let n_total = moment + joint.com.cross(&force) + n_down;
        tau[i] = match joint.joint_type {
            JointType::Revolute => frames[i].axis.dot(&n_total),
            JointType::Prismatic => frames[i].axis.dot(&f_total),
        } + joint.friction(dq[i]);
        f_child = f_total;
        n_child = n_total;
    }
    tau
}
