//! Composite rigid-body computation of the joint-space mass matrix.
//!
//! Works inward from the tip: each joint accumulates the inertia of the whole
//! subtree it carries (mass, first moment, second moment about its own frame
//! origin), then the wrench produced by a unit joint acceleration is pushed
//! back toward the base and projected onto each ancestor's axis. This shares
//! no code with the Newton-Euler recursion, which serves as its cross-check.

use super::{joint_frames, JointType, RobotModel};
use crate::error::Result;
use nalgebra::{DMatrix, Matrix3, Vector3};

pub fn mass_matrix(model: &RobotModel, q: &nalgebra::DVector<f64>) -> Result<DMatrix<f64>> {
    model.check_vec(q, "q")?;
    let n = model.dof();
    let frames = joint_frames(model, q);
    let joints = model.joints();

    // Subtree composites, each about its root frame's origin.
    let mut mass = vec![0.0; n];
    let mut moment1 = vec![Vector3::zeros(); n];
    let mut moment2 = vec![Matrix3::zeros(); n];
    for i in (0..n).rev() {
        let j = &joints[i];
        let h = j.mass * j.com;
        mass[i] = j.mass;
        moment1[i] = h;
        moment2[i] = j.inertia + j.mass * shift(&j.com);
        if i + 1 < n {
            let f = &frames[i + 1];
            let h_child = f.r * moment1[i + 1];
            let i_child = f.r * moment2[i + 1] * f.r.transpose()
                + mass[i + 1] * shift(&f.p)
                + 2.0 * f.p.dot(&h_child) * Matrix3::identity()
                - (f.p * h_child.transpose() + h_child * f.p.transpose());
            moment2[i] += i_child;
            moment1[i] += h_child + mass[i + 1] * f.p;
            mass[i] += mass[i + 1];
        }
    }

    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        let u = frames[i].axis;
        // Wrench at frame i's origin produced by unit acceleration of joint i
        // with the subtree rigid and at rest.
        let (mut torque, mut force) = match joints[i].joint_type {
            JointType::Revolute => (moment2[i] * u, u.cross(&moment1[i])),
            JointType::Prismatic => (moment1[i].cross(&u), mass[i] * u),
        };
        b[(i, i)] = match joints[i].joint_type {
            JointType::Revolute => u.dot(&torque),
            JointType::Prismatic => u.dot(&force),
        };
        for j in (0..i).rev() {
            let f = &frames[j + 1];
            let force_parent = f.r * force;
            torque = f.r * torque + f.p.cross(&force_parent);
            force = force_parent;
            b[(j, i)] = match joints[j].joint_type {
                JointType::Revolute => frames[j].axis.dot(&torque),
                JointType::Prismatic => frames[j].axis.dot(&force),
            };
            b[(i, j)] = b[(j, i)];
        }
    }
    Ok(b)
}

/// Parallel-axis term: inertia about a point offset by `p` from the center of
/// a unit point mass.
fn shift(p: &Vector3<f64>) -> Matrix3<f64> {
    p.norm_squared() * Matrix3::identity() - p * p.transpose()
}
