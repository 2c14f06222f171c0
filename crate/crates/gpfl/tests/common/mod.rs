//! Closed-form reference dynamics used to pin the recursive implementations,
//! plus small shared helpers. Everything here is derived by hand from
//! textbook mechanics, not from the code under test.

#![allow(dead_code)]

use gpfl::dynamics::{Joint, JointType, RobotModel};
use gpfl::gpr::{log_marginal_likelihood, KernelSpec, PolyKernel};
use gpfl::sim::{Controller, RefSample, Reference};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const G: f64 = 9.81;

pub fn random_rows(
    rng: &mut ChaCha8Rng,
    count: usize,
    dim: usize,
    half_width: f64,
) -> Vec<DVector<f64>> {
    (0..count)
        .map(|_| DVector::from_fn(dim, |_, _| rng.gen_range(-half_width..half_width)))
        .collect()
}

/// Mutable references to a spec's parameters in the order the likelihood
/// gradient reports them; freezing this order here keeps the public gradient
/// layout honest.
pub fn param_slots(spec: &mut KernelSpec) -> Vec<&mut f64> {
    fn poly_slots(p: &mut PolyKernel) -> Vec<&mut f64> {
        let mut v: Vec<&mut f64> = p.weights.iter_mut().collect();
        v.push(&mut p.bias);
        v
    }
    match spec {
        KernelSpec::Se {
            scale,
            lengthscales,
        } => {
            let mut v: Vec<&mut f64> = vec![scale];
            v.extend(lengthscales.iter_mut());
            v
        }
        KernelSpec::Poly { weights, bias, .. } => {
            let mut v: Vec<&mut f64> = weights.iter_mut().collect();
            v.push(bias);
            v
        }
        KernelSpec::Gip {
            accel, vel, config, ..
        } => {
            let mut v = poly_slots(accel);
            v.extend(poly_slots(vel));
            for factor in config.iter_mut() {
                v.extend(poly_slots(factor));
            }
            v
        }
    }
}

/// Compares every analytic log-space gradient component against a central
/// finite difference of the likelihood itself and returns the worst
/// deviation, normalized by the component magnitude with a unit floor.
pub fn gradient_finite_difference_gap(
    spec: &KernelSpec,
    sigma: f64,
    inputs: &[DVector<f64>],
    targets: &DVector<f64>,
) -> f64 {
    let (_, grad) = log_marginal_likelihood(spec, sigma, inputs, targets).unwrap();
    let n_kernel = grad.len() - 1;
    let h: f64 = 1e-4;
    let eval = |s: &KernelSpec, noise: f64| {
        log_marginal_likelihood(s, noise, inputs, targets).unwrap().0
    };
    let mut worst: f64 = 0.0;
    for m in 0..grad.len() {
        let (plus, minus) = if m < n_kernel {
            let mut up = spec.clone();
            *param_slots(&mut up)[m] *= h.exp();
            let mut down = spec.clone();
            *param_slots(&mut down)[m] *= (-h).exp();
            (eval(&up, sigma), eval(&down, sigma))
        } else {
            (eval(spec, sigma * h.exp()), eval(spec, sigma * (-h).exp()))
        };
        let fd = (plus - minus) / (2.0 * h);
        worst = worst.max((fd - grad[m]).abs() / grad[m].abs().max(1.0));
    }
    worst
}

/// Wraps a closure as a controller for test scenarios.
pub struct FnController<F>(pub F);

impl<F> Controller for FnController<F>
where
    F: Fn(f64, &DVector<f64>, &DVector<f64>, RefSample<'_>) -> DVector<f64>,
{
    fn torque(
        &self,
        t: f64,
        q: &DVector<f64>,
        dq: &DVector<f64>,
        reference: RefSample<'_>,
    ) -> DVector<f64> {
        (self.0)(t, q, dq, reference)
    }
}

/// An identically zero reference covering `steps` grid points.
pub fn zero_reference(n: usize, steps: usize) -> Reference {
    Reference {
        r: vec![DVector::zeros(n); steps],
        dr: vec![DVector::zeros(n); steps],
        ddr: vec![DVector::zeros(n); steps],
    }
}

/// Point mass `m` on a massless rod of length `l`, swinging about the +y axis
/// with angle measured from the downward vertical. Gravity acts along -z.
pub fn pendulum(m: f64, l: f64, viscous: f64, coulomb: f64) -> RobotModel {
    let joint = Joint {
        joint_type: JointType::Revolute,
        axis: Vector3::new(0.0, 1.0, 0.0),
        origin_xyz: Vector3::zeros(),
        origin_rpy: Vector3::zeros(),
        mass: m,
        com: Vector3::new(0.0, 0.0, -l),
        inertia: Matrix3::zeros(),
        viscous,
        coulomb,
    };
    RobotModel::new(vec![joint], Vector3::new(0.0, 0.0, -G)).expect("valid pendulum")
}

/// Torque holding the pendulum static at angle `q`.
pub fn pendulum_torque(m: f64, l: f64, q: f64) -> f64 {
    m * G * l * q.sin()
}

pub fn pendulum_inertia(m: f64, l: f64) -> f64 {
    m * l * l
}

/// Total mechanical energy, with potential zero at the pivot height.
pub fn pendulum_energy(m: f64, l: f64, q: f64, dq: f64) -> f64 {
    0.5 * m * l * l * dq * dq - m * G * l * q.cos()
}

/// Two-link arm in the vertical x-y plane: both joints rotate about +z,
/// gravity acts along -y, angles measured from the +x axis. Inertia tensors
/// are spherical so only the zz entry enters planar motion while the
/// principal-moment checks stay satisfied.
pub struct TwoLink {
    pub m1: f64,
    pub m2: f64,
    /// Length of the first link (joint 1 to joint 2).
    pub l1: f64,
    /// Center-of-mass distances along each link.
    pub a1: f64,
    pub a2: f64,
    /// Inertias about each center of mass (zz).
    pub i1: f64,
    pub i2: f64,
}

impl TwoLink {
    pub fn standard() -> Self {
        TwoLink {
            m1: 1.4,
            m2: 0.9,
            l1: 0.5,
            a1: 0.22,
            a2: 0.18,
            i1: 0.025,
            i2: 0.012,
        }
    }

    pub fn model(&self) -> RobotModel {
        let link = |xyz: f64, mass: f64, com: f64, inertia: f64| Joint {
            joint_type: JointType::Revolute,
            axis: Vector3::new(0.0, 0.0, 1.0),
            origin_xyz: Vector3::new(xyz, 0.0, 0.0),
            origin_rpy: Vector3::zeros(),
            mass,
            com: Vector3::new(com, 0.0, 0.0),
            inertia: Matrix3::from_diagonal_element(inertia),
            viscous: 0.0,
            coulomb: 0.0,
        };
        RobotModel::new(
            vec![
                link(0.0, self.m1, self.a1, self.i1),
                link(self.l1, self.m2, self.a2, self.i2),
            ],
            Vector3::new(0.0, -G, 0.0),
        )
        .expect("valid two-link arm")
    }

    pub fn inertia(&self, q2: f64) -> DMatrix<f64> {
        let c2 = q2.cos();
        let b11 = self.i1
            + self.m1 * self.a1 * self.a1
            + self.i2
            + self.m2 * (self.l1 * self.l1 + self.a2 * self.a2 + 2.0 * self.l1 * self.a2 * c2);
        let b12 = self.i2 + self.m2 * (self.a2 * self.a2 + self.l1 * self.a2 * c2);
        let b22 = self.i2 + self.m2 * self.a2 * self.a2;
        DMatrix::from_row_slice(2, 2, &[b11, b12, b12, b22])
    }

    pub fn coriolis(&self, q: &DVector<f64>, dq: &DVector<f64>) -> DVector<f64> {
        let h = self.m2 * self.l1 * self.a2 * q[1].sin();
        DVector::from_vec(vec![
            -h * (2.0 * dq[0] * dq[1] + dq[1] * dq[1]),
            h * dq[0] * dq[0],
        ])
    }

    pub fn gravity(&self, q: &DVector<f64>) -> DVector<f64> {
        let c1 = q[0].cos();
        let c12 = (q[0] + q[1]).cos();
        DVector::from_vec(vec![
            (self.m1 * self.a1 + self.m2 * self.l1) * G * c1 + self.m2 * self.a2 * G * c12,
            self.m2 * self.a2 * G * c12,
        ])
    }

    pub fn torque(&self, q: &DVector<f64>, dq: &DVector<f64>, ddq: &DVector<f64>) -> DVector<f64> {
        self.inertia(q[1]) * ddq + self.coriolis(q, dq) + self.gravity(q)
    }

    pub fn potential(&self, q: &DVector<f64>) -> f64 {
        self.m1 * G * self.a1 * q[0].sin()
            + self.m2 * G * (self.l1 * q[0].sin() + self.a2 * (q[0] + q[1]).sin())
    }
}

/// Polar arm: revolute joint about +z carrying a prismatic joint sliding
/// along +x, all in the horizontal plane (gravity along -z does no work).
pub struct PolarArm {
    pub m1: f64,
    pub m2: f64,
    /// Slider center-of-mass offset along the sliding axis at q2 = 0.
    pub c2: f64,
    pub i1: f64,
    pub i2: f64,
}

impl PolarArm {
    pub fn standard() -> Self {
        PolarArm {
            m1: 0.8,
            m2: 0.5,
            c2: 0.1,
            i1: 0.01,
            i2: 0.004,
        }
    }

    pub fn model(&self) -> RobotModel {
        let base = Joint {
            joint_type: JointType::Revolute,
            axis: Vector3::new(0.0, 0.0, 1.0),
            origin_xyz: Vector3::zeros(),
            origin_rpy: Vector3::zeros(),
            mass: self.m1,
            com: Vector3::zeros(),
            inertia: Matrix3::from_diagonal_element(self.i1),
            viscous: 0.0,
            coulomb: 0.0,
        };
        let slider = Joint {
            joint_type: JointType::Prismatic,
            axis: Vector3::new(1.0, 0.0, 0.0),
            origin_xyz: Vector3::zeros(),
            origin_rpy: Vector3::zeros(),
            mass: self.m2,
            com: Vector3::new(self.c2, 0.0, 0.0),
            inertia: Matrix3::from_diagonal_element(self.i2),
            viscous: 0.0,
            coulomb: 0.0,
        };
        RobotModel::new(vec![base, slider], Vector3::new(0.0, 0.0, -G))
            .expect("valid polar arm")
    }

    /// Radial center-of-mass distance of the slider.
    fn rho(&self, q2: f64) -> f64 {
        q2 + self.c2
    }

    pub fn torque(&self, q: &DVector<f64>, dq: &DVector<f64>, ddq: &DVector<f64>) -> DVector<f64> {
        let rho = self.rho(q[1]);
        let b11 = self.i1 + self.i2 + self.m2 * rho * rho;
        DVector::from_vec(vec![
            b11 * ddq[0] + 2.0 * self.m2 * rho * dq[0] * dq[1],
            self.m2 * ddq[1] - self.m2 * rho * dq[0] * dq[0],
        ])
    }

    pub fn inertia(&self, q2: f64) -> DMatrix<f64> {
        let rho = self.rho(q2);
        DMatrix::from_row_slice(
            2,
            2,
            &[self.i1 + self.i2 + self.m2 * rho * rho, 0.0, 0.0, self.m2],
        )
    }
}

/// Solution of e'' + 2*zeta*omega*e' + omega^2*e = 0 with e(0) = e0 and
/// e'(0) = 0, for the overdamped case zeta > 1.
pub fn overdamped_error(e0: f64, omega: f64, zeta: f64, t: f64) -> f64 {
    let disc = omega * (zeta * zeta - 1.0).sqrt();
    let s1 = -zeta * omega + disc;
    let s2 = -zeta * omega - disc;
    e0 * (s2 * (s1 * t).exp() - s1 * (s2 * t).exp()) / (s2 - s1)
}

pub fn overdamped_error_rate(e0: f64, omega: f64, zeta: f64, t: f64) -> f64 {
    let disc = omega * (zeta * zeta - 1.0).sqrt();
    let s1 = -zeta * omega + disc;
    let s2 = -zeta * omega - disc;
    e0 * s1 * s2 * ((s1 * t).exp() - (s2 * t).exp()) / (s2 - s1)
}

/// Trains one GP per desk-arm joint on exact inverse-dynamics torques at
/// `count` random states, giving component-extraction and control tests a
/// model whose ground truth is known. `structured` selects the torque-shaped
/// kernel; otherwise a squared-exponential on the raw state is used.
pub fn train_desk_arm_models(
    count: usize,
    sigma: f64,
    seed: u64,
    structured: bool,
) -> (RobotModel, gpfl::gpr::TorqueModel) {
    use gpfl::dynamics::inverse_dynamics;
    use gpfl::gpr::{GpModel, KernelSpec, TorqueModel};
    use rand::Rng;
    use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

    let robot = RobotModel::desk_arm();
    let n = robot.dof();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(count);
    let mut torques = Vec::with_capacity(count);
    for _ in 0..count {
        let q = DVector::from_fn(n, |_, _| rng.gen_range(-1.2..1.2));
        let dq = DVector::from_fn(n, |_, _| rng.gen_range(-1.5..1.5));
        let ddq = DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));
        let tau = inverse_dynamics(&robot, &q, &dq, &ddq).unwrap();
        let mut x = DVector::zeros(3 * n);
        x.rows_mut(0, n).copy_from(&q);
        x.rows_mut(n, n).copy_from(&dq);
        x.rows_mut(2 * n, n).copy_from(&ddq);
        inputs.push(x);
        torques.push(tau);
    }
    let spec = if structured {
        KernelSpec::gip(&robot.joint_types())
    } else {
        KernelSpec::se(3 * n)
    };
    let joints = (0..n)
        .map(|j| {
            let y = DVector::from_fn(count, |i, _| torques[i][j]);
            GpModel::fit(&inputs, &y, &spec, sigma).unwrap()
        })
        .collect();
    (robot, TorqueModel { joints })
}

/// Like `train_desk_arm_models` with the structured kernel, but runs the
/// marginal-likelihood search per joint before fitting, as the data pipeline
/// does.
pub fn train_desk_arm_models_optimized(
    count: usize,
    seed: u64,
    iterations: usize,
) -> (RobotModel, gpfl::gpr::TorqueModel) {
    use gpfl::dynamics::inverse_dynamics;
    use gpfl::gpr::{optimize_hyperparameters, GpModel, KernelSpec, OptimizeOptions, TorqueModel};
    use rand::Rng;
    use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

    let robot = RobotModel::desk_arm();
    let n = robot.dof();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(count);
    let mut torques = Vec::with_capacity(count);
    for _ in 0..count {
        let q = DVector::from_fn(n, |_, _| rng.gen_range(-1.2..1.2));
        let dq = DVector::from_fn(n, |_, _| rng.gen_range(-1.5..1.5));
        let ddq = DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));
        let tau = inverse_dynamics(&robot, &q, &dq, &ddq).unwrap();
        let mut x = DVector::zeros(3 * n);
        x.rows_mut(0, n).copy_from(&q);
        x.rows_mut(n, n).copy_from(&dq);
        x.rows_mut(2 * n, n).copy_from(&ddq);
        inputs.push(x);
        torques.push(tau);
    }
    let spec = KernelSpec::gip(&robot.joint_types());
    let options = OptimizeOptions {
        max_iterations: iterations,
        restarts: 1,
        seed,
        perturbation: 0.5,
    };
    let joints = (0..n)
        .map(|j| {
            let y = DVector::from_fn(count, |i, _| torques[i][j]);
            let tuned = optimize_hyperparameters(&spec, 0.1, &inputs, &y, &options).unwrap();
            GpModel::fit(&inputs, &y, &tuned.kernel, tuned.noise).unwrap()
        })
        .collect();
    (robot, TorqueModel { joints })
}
