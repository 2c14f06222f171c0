//! Control-law tests: gain construction, commanded-acceleration and PD hand
//! examples, exact-model linearization identities, and the two GP-driven
//! controllers, including their coincidence under the structured kernel and
//! the smooth kernel's collapse far from training.

mod common;

use approx::assert_relative_eq;
use common::{train_desk_arm_models, zero_reference};
use gpfl::control::{
    commanded_acceleration, exact_fl_torque, gp_fl_dce_torque, gp_fl_torque, pd_torque, Gains,
    PdController,
};
use gpfl::dynamics::{bias_forces, gravity_vector, JointState, RobotModel};
use gpfl::sim::{simulate, RefSample, SimConfig};
use gpfl::Error;
use nalgebra::DVector;
use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

fn sample<'a>(
    r: &'a DVector<f64>,
    dr: &'a DVector<f64>,
    ddr: &'a DVector<f64>,
) -> RefSample<'a> {
    RefSample { r, dr, ddr }
}

/// Kp = omega^2 I and Kd = 2 zeta omega I, exactly.
#[test]
fn gain_constructor_places_poles() {
    let g = Gains::from_natural_frequency(100.0, 2.0, 3).unwrap();
    for j in 0..3 {
        assert_relative_eq!(g.kp[j], 1e4, max_relative = 1e-15);
        assert_relative_eq!(g.kd[j], 400.0, max_relative = 1e-15);
    }
    assert!(Gains::new(DVector::from_vec(vec![1.0]), DVector::from_vec(vec![-0.1])).is_err());
    assert!(Gains::new(DVector::zeros(2), DVector::zeros(3)).is_err());
}

/// a = r'' + Kp e + Kd e' reproduces the hand-computed gain examples.
#[test]
fn commanded_acceleration_hand_examples() {
    let n = 3;
    let gains = Gains::from_natural_frequency(100.0, 2.0, n).unwrap();
    let zero = DVector::zeros(n);

    let a = commanded_acceleration(sample(&zero, &zero, &zero), &zero, &zero, &gains).unwrap();
    assert_eq!(a, zero);

    // Position error of 0.1 rad through Kp = 1e4.
    let q = DVector::from_element(n, -0.1);
    let a = commanded_acceleration(sample(&zero, &zero, &zero), &q, &zero, &gains).unwrap();
    for j in 0..n {
        assert_relative_eq!(a[j], 1000.0, max_relative = 1e-12);
    }

    // Velocity error of 0.1 rad/s through Kd = 400.
    let dq = DVector::from_element(n, -0.1);
    let a = commanded_acceleration(sample(&zero, &zero, &zero), &zero, &dq, &gains).unwrap();
    for j in 0..n {
        assert_relative_eq!(a[j], 40.0, max_relative = 1e-12);
    }

    // Feedforward acceleration passes straight through at zero error.
    let ddr = DVector::from_element(n, 5.0);
    let a = commanded_acceleration(sample(&zero, &zero, &ddr), &zero, &zero, &gains).unwrap();
    for j in 0..n {
        assert_relative_eq!(a[j], 5.0, max_relative = 1e-15);
    }

    let short = DVector::zeros(2);
    assert!(matches!(
        commanded_acceleration(sample(&zero, &zero, &zero), &short, &zero, &gains),
        Err(Error::DimensionMismatch { .. })
    ));
}

/// tau = Kp e + Kd e' with the data-collection gains.
#[test]
fn pd_torque_hand_example() {
    let n = 3;
    let gains = Gains::new(
        DVector::from_element(n, 200.0),
        DVector::from_element(n, 20.0),
    )
    .unwrap();
    let zero = DVector::zeros(n);
    let q = DVector::from_element(n, -0.01);
    let tau = pd_torque(sample(&zero, &zero, &zero), &q, &zero, &gains).unwrap();
    for j in 0..n {
        assert_relative_eq!(tau[j], 2.0, max_relative = 1e-12);
    }
    let at_rest = pd_torque(sample(&zero, &zero, &zero), &zero, &zero, &gains).unwrap();
    assert_eq!(at_rest, zero);
}

/// A PD loop has no integral action, so a gravity-loaded pose settles with a
/// nonzero steady-state error.
#[test]
fn pd_settles_with_steady_state_error_under_gravity() {
    let robot = RobotModel::desk_arm();
    let n = robot.dof();
    let steps = 2000;
    let reference = zero_reference(n, steps + 1);
    let controller = PdController {
        gains: Gains::new(
            DVector::from_element(n, 200.0),
            DVector::from_element(n, 20.0),
        )
        .unwrap(),
    };
    let config = SimConfig::new(1e-3, 2.0);
    let log = simulate(&robot, &controller, &reference, &JointState::zero(n), &config).unwrap();
    let final_error = log.e.last().unwrap().amax();
    assert!(
        final_error > 5e-3 && final_error < 0.5,
        "steady-state error {final_error}"
    );
}

/// At zero tracking error and zero feedforward the exact linearizing torque
/// is pure bias compensation, which at rest is the gravity vector.
#[test]
fn exact_fl_reduces_to_bias_compensation() {
    let robot = RobotModel::desk_arm();
    let n = robot.dof();
    let gains = Gains::from_natural_frequency(100.0, 2.0, n).unwrap();
    let zero = DVector::zeros(n);

    let q = DVector::from_vec(vec![0.4, -0.7, 0.9]);
    let tau = exact_fl_torque(&robot, sample(&q, &zero, &zero), &q, &zero, &gains).unwrap();
    let g = gravity_vector(&robot, &q).unwrap();
    for j in 0..n {
        assert_relative_eq!(tau[j], g[j], max_relative = 1e-12);
    }

    // With zero gains the controller is open-loop bias compensation at any
    // velocity.
    let off = Gains::new(DVector::zeros(n), DVector::zeros(n)).unwrap();
    let dq = DVector::from_vec(vec![0.5, -0.3, 0.2]);
    let tau = exact_fl_torque(&robot, sample(&zero, &zero, &zero), &q, &dq, &off).unwrap();
    let bias = bias_forces(&robot, &q, &dq).unwrap();
    for j in 0..n {
        assert_relative_eq!(tau[j], bias[j], max_relative = 1e-12);
    }
}

/// With the structured kernel, evaluating the model at the commanded
/// acceleration and linearizing on extracted components are the same control
/// law: over 1000 random states and references the torques agree to 1e-9
/// relative.
#[test]
fn gp_controllers_coincide_for_structured_models() {
    let (robot, model) = train_desk_arm_models(200, 1e-2, 19, true);
    let n = robot.dof();
    let gains = Gains::from_natural_frequency(100.0, 2.0, n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let q = DVector::from_fn(n, |_, _| rng.gen_range(-1.2..1.2));
        let dq = DVector::from_fn(n, |_, _| rng.gen_range(-1.5..1.5));
        let r = DVector::from_fn(n, |_, _| rng.gen_range(-1.2..1.2));
        let dr = DVector::from_fn(n, |_, _| rng.gen_range(-1.5..1.5));
        let ddr = DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));

        let direct = gp_fl_torque(&model, sample(&r, &dr, &ddr), &q, &dq, &gains).unwrap();
        let dce = gp_fl_dce_torque(&model, sample(&r, &dr, &ddr), &q, &dq, &gains).unwrap();
        for j in 0..n {
            worst = worst.max((direct[j] - dce[j]).abs() / direct[j].abs().max(1.0));
        }
    }
    assert!(worst < 1e-9, "max relative gap {worst}");
}

/// The smooth isotropic kernel reverts to zero torque when the commanded
/// acceleration leaves the training range; component extraction keeps the
/// torque finite and useful at the same state.
#[test]
fn smooth_models_command_zero_far_from_training() {
    let (robot, model) = train_desk_arm_models(200, 1e-2, 19, false);
    let n = robot.dof();
    let gains = Gains::from_natural_frequency(100.0, 2.0, n).unwrap();
    let zero = DVector::zeros(n);

    // One radian of position error commands a = 1e4 rad/s^2, four orders of
    // magnitude beyond the trained accelerations.
    let q = DVector::from_element(n, -1.0);
    let direct = gp_fl_torque(&model, sample(&zero, &zero, &zero), &q, &zero, &gains).unwrap();
    assert!(
        direct.amax() < 1e-3,
        "expected collapse to zero, got {direct}"
    );

    let dce = gp_fl_dce_torque(&model, sample(&zero, &zero, &zero), &q, &zero, &gains).unwrap();
    assert!(
        dce.amax() > 1.0,
        "component-extracted torque should stay live, got {dce}"
    );
    assert!(dce.iter().all(|t| t.is_finite()));
}

/// Zero-target models command zero torque under both GP control laws.
#[test]
fn zero_target_models_command_zero_torque() {
    use gpfl::gpr::{GpModel, KernelSpec, TorqueModel};
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let inputs: Vec<DVector<f64>> = (0..20)
        .map(|_| DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0)))
        .collect();
    let zeros = DVector::zeros(20);
    let joint = GpModel::fit(&inputs, &zeros, &KernelSpec::se(6), 0.1).unwrap();
    let model = TorqueModel {
        joints: vec![joint.clone(), joint],
    };
    let gains = Gains::from_natural_frequency(10.0, 1.5, 2).unwrap();
    let zero = DVector::zeros(2);
    let q = DVector::from_vec(vec![0.2, -0.3]);
    let direct = gp_fl_torque(&model, sample(&zero, &zero, &zero), &q, &zero, &gains).unwrap();
    let dce = gp_fl_dce_torque(&model, sample(&zero, &zero, &zero), &q, &zero, &gains).unwrap();
    assert_eq!(direct, zero);
    assert_eq!(dce, zero);
}

/// Controllers are pure functions: identical arguments, identical torques.
#[test]
fn controllers_are_deterministic() {
    let (robot, model) = train_desk_arm_models(80, 1e-2, 29, true);
    let n = robot.dof();
    let gains = Gains::from_natural_frequency(50.0, 1.2, n).unwrap();
    let q = DVector::from_vec(vec![0.3, -0.2, 0.6]);
    let dq = DVector::from_vec(vec![-0.4, 0.8, 0.1]);
    let r = DVector::from_vec(vec![0.1, 0.1, 0.5]);
    let dr = DVector::zeros(n);
    let ddr = DVector::from_element(n, 0.7);

    let first = gp_fl_dce_torque(&model, sample(&r, &dr, &ddr), &q, &dq, &gains).unwrap();
    let second = gp_fl_dce_torque(&model, sample(&r, &dr, &ddr), &q, &dq, &gains).unwrap();
    assert_eq!(first, second);

    let fl1 = exact_fl_torque(&robot, sample(&r, &dr, &ddr), &q, &dq, &gains).unwrap();
    let fl2 = exact_fl_torque(&robot, sample(&r, &dr, &ddr), &q, &dq, &gains).unwrap();
    assert_eq!(fl1, fl2);
}
