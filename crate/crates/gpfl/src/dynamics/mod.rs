//! Rigid-body model of a serial manipulator.
//!
//! A robot is an open chain of single-degree-of-freedom joints, each moving
//! the link attached to it. Frames follow the URDF convention: joint i's
//! frame is reached from its parent by the fixed `origin` transform (xyz
//! translation, then roll-pitch-yaw rotation) followed by the joint motion
//! about or along `axis`. Link mass properties are expressed in the link's
//! own frame, the inertia tensor about the center of mass.

mod crba;
mod forward;
mod rnea;

pub use crba::mass_matrix;
pub use forward::{forward_dynamics, solve_spd, CHOLESKY_JITTER};
pub use rnea::{bias_forces, gravity_vector, inverse_dynamics};

use crate::error::{Error, Result};
use nalgebra::{DVector, Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Width (rad/s) of the tanh smoothing applied to Coulomb friction, so the
/// torque is continuous at zero velocity and inverse/forward dynamics stay
/// consistent with each other.
pub const COULOMB_SMOOTHING: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointType {
    Revolute,
    Prismatic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Joint {
    pub joint_type: JointType,
    /// Unit vector in the joint frame the joint rotates about or slides along.
    pub axis: Vector3<f64>,
    /// Translation from the parent joint frame to this joint's frame.
    pub origin_xyz: Vector3<f64>,
    /// Fixed rotation from the parent joint frame, applied as Rz(yaw) *
    /// Ry(pitch) * Rx(roll).
    pub origin_rpy: Vector3<f64>,
    pub mass: f64,
    /// Center of mass of the link carried by this joint, in the joint frame.
    pub com: Vector3<f64>,
    /// Rotational inertia about the center of mass, in the joint frame.
    pub inertia: Matrix3<f64>,
    /// Viscous friction coefficient (N m s/rad).
    pub viscous: f64,
    /// Coulomb friction magnitude (N m).
    pub coulomb: f64,
}

impl Joint {
    /// Friction torque opposing motion at joint velocity `qd`.
    pub fn friction(&self, qd: f64) -> f64 {
        self.viscous * qd + self.coulomb * (qd / COULOMB_SMOOTHING).tanh()
    }

    fn origin_rotation(&self) -> Rotation3<f64> {
        Rotation3::from_euler_angles(self.origin_rpy.x, self.origin_rpy.y, self.origin_rpy.z)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobotModel {
    joints: Vec<Joint>,
    gravity: Vector3<f64>,
}

impl RobotModel {
    pub fn new(joints: Vec<Joint>, gravity: Vector3<f64>) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::invalid("robot model", "chain has no joints"));
        }
        if !gravity.iter().all(|g| g.is_finite()) {
            return Err(Error::NonFinite {
                what: "gravity".into(),
            });
        }
        let mut joints = joints;
        for (i, j) in joints.iter_mut().enumerate() {
            validate_joint(i, j)?;
        }
        Ok(RobotModel { joints, gravity })
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn gravity(&self) -> Vector3<f64> {
        self.gravity
    }

    pub fn joint_types(&self) -> Vec<JointType> {
        self.joints.iter().map(|j| j.joint_type).collect()
    }

    /// A 3-DoF desk-scale arm: yaw shoulder, pitch shoulder, pitch elbow.
    /// Workspace radius is roughly 0.45 m; gravity torques peak near 5 N m.
    pub fn desk_arm() -> RobotModel {
        let joint = |joint_type,
                     axis: [f64; 3],
                     xyz: [f64; 3],
                     mass: f64,
                     com: [f64; 3],
                     diag: [f64; 3],
                     viscous: f64,
                     coulomb: f64| Joint {
            joint_type,
            axis: Vector3::from(axis),
            origin_xyz: Vector3::from(xyz),
            origin_rpy: Vector3::zeros(),
            mass,
            com: Vector3::from(com),
            inertia: Matrix3::from_diagonal(&Vector3::from(diag)),
            viscous,
            coulomb,
        };
        // Link inertias are sized so the effective inertia seen by every
        // joint stays above 0.025 kg m^2 in all poses; the stock
        // data-collection PD gains are then stable at the 1 kHz step rate.
        let joints = vec![
            joint(
                JointType::Revolute,
                [0.0, 0.0, 1.0],
                [0.0, 0.0, 0.05],
                2.5,
                [0.0, 0.0, 0.03],
                [0.02, 0.02, 0.02],
                0.12,
                0.08,
            ),
            joint(
                JointType::Revolute,
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 0.10],
                3.0,
                [0.12, 0.0, 0.0],
                [0.004, 0.05, 0.05],
                0.10,
                0.06,
            ),
            joint(
                JointType::Revolute,
                [0.0, 1.0, 0.0],
                [0.25, 0.0, 0.0],
                1.2,
                [0.06, 0.0, 0.0],
                [0.01, 0.04, 0.04],
                0.08,
                0.05,
            ),
        ];
        RobotModel::new(joints, Vector3::new(0.0, 0.0, -9.81))
            .expect("desk arm parameters are valid")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let schema: RobotSchema = serde_json::from_str(s)
            .map_err(|e| Error::invalid("robot model", e.to_string()))?;
        schema.into_model()
    }

    pub fn to_json_string(&self) -> String {
        let schema = RobotSchema::from_model(self);
        serde_json::to_string_pretty(&schema).expect("robot schema serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Invalid { detail, .. } => Error::parse(path, detail),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }

    pub(crate) fn check_vec(&self, v: &DVector<f64>, what: &str) -> Result<()> {
        if v.len() != self.dof() {
            return Err(Error::DimensionMismatch {
                what: what.into(),
                expected: self.dof(),
                got: v.len(),
            });
        }
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite { what: what.into() });
        }
        Ok(())
    }
}

fn validate_joint(i: usize, j: &mut Joint) -> Result<()> {
    let what = format!("joint {i}");
    let finite = j.axis.iter().all(|x| x.is_finite())
        && j.origin_xyz.iter().all(|x| x.is_finite())
        && j.origin_rpy.iter().all(|x| x.is_finite())
        && j.com.iter().all(|x| x.is_finite())
        && j.inertia.iter().all(|x| x.is_finite())
        && j.mass.is_finite()
        && j.viscous.is_finite()
        && j.coulomb.is_finite();
    if !finite {
        return Err(Error::NonFinite { what });
    }
    if (j.axis.norm() - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(what, "axis is not a unit vector"));
    }
    j.axis.normalize_mut();
    if j.mass <= 0.0 {
        return Err(Error::invalid(what, "mass must be positive"));
    }
    if j.viscous < 0.0 || j.coulomb < 0.0 {
        return Err(Error::invalid(what, "friction coefficients must be non-negative"));
    }
    if (j.inertia - j.inertia.transpose()).amax() > 1e-12 {
        return Err(Error::invalid(what, "inertia tensor is not symmetric"));
    }
    let mut moments: Vec<f64> = j.inertia.symmetric_eigenvalues().iter().copied().collect();
    moments.sort_by(|a, b| a.total_cmp(b));
    let scale = moments[2].abs().max(1e-12);
    if moments[0] < -1e-9 * scale {
        return Err(Error::invalid(what, "inertia tensor is not positive semidefinite"));
    }
    if moments[2] > moments[0] + moments[1] + 1e-9 * scale {
        return Err(Error::invalid(
            what,
            "principal moments violate the triangle inequality",
        ));
    }
    Ok(())
}

/// Pose of a joint frame relative to its parent at a given joint position.
pub(crate) struct JointFrame {
    /// Rotation taking child-frame vectors into the parent frame.
    pub r: Matrix3<f64>,
    /// Child frame origin expressed in the parent frame.
    pub p: Vector3<f64>,
    /// Joint axis in the child frame.
    pub axis: Vector3<f64>,
}

pub(crate) fn joint_frames(model: &RobotModel, q: &DVector<f64>) -> Vec<JointFrame> {
    model
        .joints
        .iter()
        .zip(q.iter())
        .map(|(j, &qi)| {
            let r0 = j.origin_rotation();
            match j.joint_type {
                JointType::Revolute => JointFrame {
                    r: (r0 * Rotation3::from_axis_angle(&Unit::new_unchecked(j.axis), qi))
                        .into_inner(),
                    p: j.origin_xyz,
                    axis: j.axis,
                },
                JointType::Prismatic => JointFrame {
                    r: r0.into_inner(),
                    p: j.origin_xyz + r0 * (j.axis * qi),
                    axis: j.axis,
                },
            }
        })
        .collect()
}

/// World-frame center-of-mass position of every link.
pub fn com_positions(model: &RobotModel, q: &DVector<f64>) -> Result<Vec<Vector3<f64>>> {
    model.check_vec(q, "q")?;
    let frames = joint_frames(model, q);
    let mut out = Vec::with_capacity(model.dof());
    let mut r_world = Matrix3::identity();
    let mut p_world = Vector3::zeros();
    for (frame, joint) in frames.iter().zip(model.joints.iter()) {
        p_world += r_world * frame.p;
        r_world *= frame.r;
        out.push(p_world + r_world * joint.com);
    }
    Ok(out)
}

/// Kinetic energy at state `(q, dq)`: half the velocity quadratic form of the
/// mass matrix.
pub fn kinetic_energy(model: &RobotModel, q: &DVector<f64>, dq: &DVector<f64>) -> Result<f64> {
    model.check_vec(dq, "dq")?;
    let b = mass_matrix(model, q)?;
    Ok(0.5 * dq.dot(&(&b * dq)))
}

/// Gravitational potential energy, zero when all centers of mass sit at the
/// world origin.
pub fn potential_energy(model: &RobotModel, q: &DVector<f64>) -> Result<f64> {
    let coms = com_positions(model, q)?;
    let g = model.gravity();
    Ok(model
        .joints
        .iter()
        .zip(coms.iter())
        .map(|(j, c)| -j.mass * g.dot(c))
        .sum())
}

pub fn total_energy(model: &RobotModel, q: &DVector<f64>, dq: &DVector<f64>) -> Result<f64> {
    Ok(kinetic_energy(model, q, dq)? + potential_energy(model, q)?)
}

#[derive(Serialize, Deserialize)]
struct RobotSchema {
    gravity: [f64; 3],
    joints: Vec<JointSchema>,
}

#[derive(Serialize, Deserialize)]
struct JointSchema {
    #[serde(rename = "type")]
    joint_type: JointType,
    axis: [f64; 3],
    origin: OriginSchema,
    mass: f64,
    com: [f64; 3],
    /// Upper triangle of the inertia tensor: [ixx, ixy, ixz, iyy, iyz, izz].
    inertia: [f64; 6],
    #[serde(default)]
    viscous: f64,
    #[serde(default)]
    coulomb: f64,
}

#[derive(Serialize, Deserialize)]
struct OriginSchema {
    xyz: [f64; 3],
    rpy: [f64; 3],
}

impl RobotSchema {
    fn into_model(self) -> Result<RobotModel> {
        let joints = self
            .joints
            .into_iter()
            .map(|j| {
                let [ixx, ixy, ixz, iyy, iyz, izz] = j.inertia;
                Joint {
                    joint_type: j.joint_type,
                    axis: Vector3::from(j.axis),
                    origin_xyz: Vector3::from(j.origin.xyz),
                    origin_rpy: Vector3::from(j.origin.rpy),
                    mass: j.mass,
                    com: Vector3::from(j.com),
                    inertia: Matrix3::new(ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz),
                    viscous: j.viscous,
                    coulomb: j.coulomb,
                }
            })
            .collect();
        RobotModel::new(joints, Vector3::from(self.gravity))
    }

    fn from_model(model: &RobotModel) -> RobotSchema {
        RobotSchema {
            gravity: model.gravity.into(),
            joints: model
                .joints
                .iter()
                .map(|j| JointSchema {
                    joint_type: j.joint_type,
                    axis: j.axis.into(),
                    origin: OriginSchema {
                        xyz: j.origin_xyz.into(),
                        rpy: j.origin_rpy.into(),
                    },
                    mass: j.mass,
                    com: j.com.into(),
                    inertia: [
                        j.inertia[(0, 0)],
                        j.inertia[(0, 1)],
                        j.inertia[(0, 2)],
                        j.inertia[(1, 1)],
                        j.inertia[(1, 2)],
                        j.inertia[(2, 2)],
                    ],
                    viscous: j.viscous,
                    coulomb: j.coulomb,
                })
                .collect(),
        }
    }
}

/// Joint-space state snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct JointState {
    pub q: DVector<f64>,
    pub dq: DVector<f64>,
    pub ddq: DVector<f64>,
}

impl JointState {
    pub fn zero(n: usize) -> Self {
        JointState {
            q: DVector::zeros(n),
            dq: DVector::zeros(n),
            ddq: DVector::zeros(n),
        }
    }

    pub fn validate(&self, model: &RobotModel) -> Result<()> {
        model.check_vec(&self.q, "q")?;
        model.check_vec(&self.dq, "dq")?;
        model.check_vec(&self.ddq, "ddq")
    }
}
