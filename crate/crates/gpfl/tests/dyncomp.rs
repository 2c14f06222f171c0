//! Component-extraction tests: probe identities that hold for any model,
//! exact reconstruction under the structured kernel, its documented failure
//! under the smooth kernel, and recovery of the arm's true gravity, inertia
//! and bias terms from trained models.

mod common;

use approx::assert_relative_eq;
use common::{train_desk_arm_models, train_desk_arm_models_optimized};
use gpfl::dyncomp::{
    estimate_bias, estimate_gravity, estimate_inertia, estimate_inertia_scaled, inertia_asymmetry,
};
use gpfl::dynamics::{bias_forces, gravity_vector, mass_matrix};
use gpfl::gpr::{GpModel, KernelSpec, TorqueModel};
use gpfl::Error;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

fn random_state(rng: &mut ChaCha8Rng, n: usize, half_width: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-half_width..half_width))
}

/// Models fitted to zero torques estimate zero gravity, inertia and bias.
#[test]
fn zero_target_models_give_zero_components() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let inputs: Vec<DVector<f64>> = (0..15).map(|_| random_state(&mut rng, 6, 1.0)).collect();
    let zeros = DVector::zeros(15);
    let spec = KernelSpec::se(6);
    let joint = GpModel::fit(&inputs, &zeros, &spec, 0.1).unwrap();
    let model = TorqueModel {
        joints: vec![joint.clone(), joint],
    };

    let q = DVector::from_vec(vec![0.3, -0.5]);
    let dq = DVector::from_vec(vec![1.0, -0.2]);
    assert_eq!(estimate_gravity(&model, &q).unwrap(), DVector::zeros(2));
    assert_eq!(estimate_bias(&model, &q, &dq).unwrap(), DVector::zeros(2));
    assert_eq!(estimate_inertia(&model, &q).unwrap(), DMatrix::zeros(2, 2));
}

/// The bias probe at zero velocity is the gravity probe, bit for bit.
#[test]
fn bias_at_rest_is_exactly_gravity() {
    let (robot, model) = train_desk_arm_models(120, 1e-2, 5, true);
    let n = robot.dof();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let q = random_state(&mut rng, n, 1.2);
        let g = estimate_gravity(&model, &q).unwrap();
        let b = estimate_bias(&model, &q, &DVector::zeros(n)).unwrap();
        for j in 0..n {
            assert_eq!(g[j], b[j]);
        }
    }
}

/// Under the structured kernel the posterior is exactly affine in the
/// acceleration, so extracted components rebuild the model's own prediction
/// at any state, including accelerations far outside training.
#[test]
fn structured_models_reconstruct_their_own_predictions() {
    let (robot, model) = train_desk_arm_models(150, 1e-2, 7, true);
    let n = robot.dof();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for round in 0..20 {
        let q = random_state(&mut rng, n, 1.2);
        let dq = random_state(&mut rng, n, 1.5);
        let scale = if round % 3 == 0 { 100.0 } else { 3.0 };
        let ddq = random_state(&mut rng, n, scale);

        let direct = model.predict_torque(&q, &dq, &ddq).unwrap();
        let rebuilt = estimate_inertia(&model, &q).unwrap() * &ddq
            + estimate_bias(&model, &q, &dq).unwrap();
        for j in 0..n {
            assert!(
                (direct[j] - rebuilt[j]).abs() <= 1e-9 * direct[j].abs().max(1.0),
                "joint {j}: direct {} vs rebuilt {}",
                direct[j],
                rebuilt[j]
            );
        }
    }

    // Affine structure also makes the extracted inertia independent of the
    // probe magnitude.
    let q = random_state(&mut rng, n, 1.2);
    let unit = estimate_inertia(&model, &q).unwrap();
    for probe in [0.5, 2.0, 10.0] {
        let scaled = estimate_inertia_scaled(&model, &q, probe).unwrap();
        for i in 0..n {
            for j in 0..n {
                assert_relative_eq!(scaled[(i, j)], unit[(i, j)], max_relative = 1e-9, epsilon = 1e-9);
            }
        }
    }
}

/// The smooth isotropic kernel only linearizes locally: rebuilt torques
/// disagree with the model's own prediction once the acceleration leaves the
/// training range.
#[test]
fn smooth_models_linearize_only_locally() {
    let (robot, model) = train_desk_arm_models(150, 1e-2, 7, false);
    let n = robot.dof();
    let q = DVector::from_vec(vec![0.4, -0.6, 0.8]);
    let dq = DVector::zeros(n);
    // Training accelerations span +-3 rad/s^2; probe at ten times that.
    let ddq = DVector::from_element(n, 30.0);

    let direct = model.predict_torque(&q, &dq, &ddq).unwrap();
    let rebuilt =
        estimate_inertia(&model, &q).unwrap() * &ddq + estimate_bias(&model, &q, &dq).unwrap();
    let worst = (0..n)
        .map(|j| (direct[j] - rebuilt[j]).abs() / direct[j].abs().max(1.0))
        .fold(0.0_f64, f64::max);
    assert!(
        worst > 1e-3,
        "expected the affine rebuild to break far from training, got {worst}"
    );
}

/// Trained structured models recover the arm's true components: gravity
/// within 5%, inertia within 10% Frobenius, bias within 10%.
#[test]
fn trained_models_recover_arm_components() {
    let (robot, model) = train_desk_arm_models_optimized(400, 11, 40);
    let n = robot.dof();
    let mut rng = ChaCha8Rng::seed_from_u64(13);

    let mut gravity_err = 0.0_f64;
    let mut gravity_mag = 0.0_f64;
    let mut inertia_err = 0.0_f64;
    let mut inertia_mag = 0.0_f64;
    let mut bias_err = 0.0_f64;
    let mut bias_mag = 0.0_f64;
    let mut asymmetry = 0.0_f64;

    for _ in 0..20 {
        let q = random_state(&mut rng, n, 1.0);
        let dq = random_state(&mut rng, n, 1.2);

        let g_true = gravity_vector(&robot, &q).unwrap();
        let g_hat = estimate_gravity(&model, &q).unwrap();
        gravity_err = gravity_err.max((&g_hat - &g_true).amax());
        gravity_mag = gravity_mag.max(g_true.amax());

        let b_true = mass_matrix(&robot, &q).unwrap();
        let b_hat = estimate_inertia(&model, &q).unwrap();
        inertia_err = inertia_err.max((&b_hat - &b_true).norm());
        inertia_mag = inertia_mag.max(b_true.norm());
        asymmetry = asymmetry.max(inertia_asymmetry(&b_hat));

        let n_true = bias_forces(&robot, &q, &dq).unwrap();
        let n_hat = estimate_bias(&model, &q, &dq).unwrap();
        bias_err = bias_err.max((&n_hat - &n_true).amax());
        bias_mag = bias_mag.max(n_true.amax());
    }

    assert!(
        gravity_err < 0.05 * gravity_mag,
        "gravity error {gravity_err} vs magnitude {gravity_mag}"
    );
    assert!(
        inertia_err < 0.10 * inertia_mag,
        "inertia error {inertia_err} vs magnitude {inertia_mag}"
    );
    assert!(
        bias_err < 0.10 * bias_mag,
        "bias error {bias_err} vs magnitude {bias_mag}"
    );
    assert!(
        asymmetry < 0.10 * inertia_mag,
        "asymmetry {asymmetry} vs inertia magnitude {inertia_mag}"
    );
}

/// The asymmetry diagnostic is the largest gap between mirrored entries.
#[test]
fn asymmetry_is_the_largest_mirrored_gap() {
    let b = DMatrix::from_row_slice(2, 2, &[0.9, 1.0, 3.0, 0.4]);
    assert_relative_eq!(inertia_asymmetry(&b), 2.0, max_relative = 1e-15);
    let sym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
    assert_eq!(inertia_asymmetry(&sym), 0.0);
}

/// Probe magnitudes must be finite and positive.
#[test]
fn inertia_probe_must_be_positive() {
    let (_, model) = train_desk_arm_models(30, 1e-2, 17, true);
    let q = DVector::zeros(3);
    for bad in [0.0, -1.0, f64::NAN] {
        assert!(matches!(
            estimate_inertia_scaled(&model, &q, bad),
            Err(Error::Invalid { .. })
        ));
    }
}
