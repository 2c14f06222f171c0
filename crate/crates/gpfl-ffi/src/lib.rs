//! C ABI over the core library: opaque handles for robot and torque models,
//! status codes for every call, and a per-thread last-error message.
//!
//! Conventions: every function returns GPFL_STATUS_OK (0) on success or a
//! nonzero status; outputs are caller-allocated arrays whose length is the
//! joint count `n` (matrices are row-major n*n). Handles are freed with the
//! matching `_free` function; passing NULL to `_free` is a no-op. Handles
//! are immutable after creation and safe to share across threads.

use gpfl::control::{exact_fl_torque, gp_fl_dce_torque, gp_fl_torque, Gains};
use gpfl::dynamics::{bias_forces, gravity_vector, inverse_dynamics, mass_matrix, RobotModel};
use gpfl::error::Error;
use gpfl::gpr::TorqueModel;
use gpfl::sim::RefSample;
use nalgebra::DVector;
use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Call succeeded.
pub const GPFL_STATUS_OK: c_int = 0;
/// Rejected input: NULL pointer, bad dimension, unparseable file.
pub const GPFL_STATUS_INVALID: c_int = 2;
/// Numerical failure: ill-conditioned kernel, singular dynamics, non-finite
/// values, or an internal panic.
pub const GPFL_STATUS_NUMERICAL: c_int = 3;
/// Closed-loop failure: divergence, torque collapse, controller fault.
pub const GPFL_STATUS_DEGRADED: c_int = 4;

/// Opaque rigid-body model handle.
pub struct GpflRobot(RobotModel);

/// Opaque per-joint GP torque model handle.
pub struct GpflModel(TorqueModel);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(error: &Error) -> c_int {
    match error {
        Error::Invalid { .. }
        | Error::DimensionMismatch { .. }
        | Error::Parse { .. }
        | Error::Io { .. }
        | Error::UndefinedMetric => GPFL_STATUS_INVALID,
        Error::NonFinite { .. }
        | Error::SingularDynamics
        | Error::IllConditionedKernel { .. }
        | Error::OptimizationFailed(_) => GPFL_STATUS_NUMERICAL,
        Error::Divergence { .. } | Error::Degradation { .. } | Error::ControllerFault { .. } => {
            GPFL_STATUS_DEGRADED
        }
    }
}

/// Pointer to the calling thread's last error message, empty until an error
/// occurs. Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gpfl_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

fn guard(body: impl FnOnce() -> Result<(), (c_int, String)>) -> c_int {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => GPFL_STATUS_OK,
        Ok(Err((status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GPFL_STATUS_NUMERICAL
        }
    }
}

fn invalid(message: impl Into<String>) -> (c_int, String) {
    (GPFL_STATUS_INVALID, message.into())
}

fn from_error(error: Error) -> (c_int, String) {
    (status_of(&error), error.to_string())
}

/// # Safety
/// `ptr` must be non-null and point to `len` readable doubles.
unsafe fn vector_arg(
    ptr: *const c_double,
    len: usize,
    name: &str,
) -> Result<DVector<f64>, (c_int, String)> {
    if ptr.is_null() {
        return Err(invalid(format!("{name} is NULL")));
    }
    Ok(DVector::from_column_slice(std::slice::from_raw_parts(
        ptr, len,
    )))
}

unsafe fn path_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, (c_int, String)> {
    if ptr.is_null() {
        return Err(invalid(format!("{name} is NULL")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| invalid(format!("{name} is not valid UTF-8")))
}

unsafe fn write_vector(out: *mut c_double, v: &DVector<f64>) {
    std::slice::from_raw_parts_mut(out, v.len()).copy_from_slice(v.as_slice());
}

/// Loads a robot description from a JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gpfl_robot_load(
    path: *const c_char,
    out: *mut *mut GpflRobot,
) -> c_int {
    guard(|| {
        if out.is_null() {
            return Err(invalid("out is NULL"));
        }
        let path = path_arg(path, "path")?;
        let robot = RobotModel::load(Path::new(path)).map_err(from_error)?;
        *out = Box::into_raw(Box::new(GpflRobot(robot)));
        Ok(())
    })
}

/// Parses a robot description from a JSON string.
///
/// # Safety
/// `json` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gpfl_robot_from_json(
    json: *const c_char,
    out: *mut *mut GpflRobot,
) -> c_int {
    guard(|| {
        if out.is_null() {
            return Err(invalid("out is NULL"));
        }
        let json = path_arg(json, "json")?;
        let robot = RobotModel::from_json_str(json).map_err(from_error)?;
        *out = Box::into_raw(Box::new(GpflRobot(robot)));
        Ok(())
    })
}

/// Frees a robot handle. NULL is ignored.
///
/// # Safety
/// `robot` must come from a gpfl_robot_* constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn gpfl_robot_free(robot: *mut GpflRobot) {
    if !robot.is_null() {
        drop(Box::from_raw(robot));
    }
}

/// Number of joints, or 0 for a NULL handle.
///
/// # Safety
/// `robot` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn gpfl_robot_dof(robot: *const GpflRobot) -> usize {
    if robot.is_null() {
        0
    } else {
        (*robot).0.dof()
    }
}

unsafe fn robot_arg<'a>(robot: *const GpflRobot) -> Result<&'a RobotModel, (c_int, String)> {
    if robot.is_null() {
        return Err(invalid("robot is NULL"));
    }
    Ok(&(*robot).0)
}

unsafe fn model_arg<'a>(model: *const GpflModel) -> Result<&'a TorqueModel, (c_int, String)> {
    if model.is_null() {
        return Err(invalid("model is NULL"));
    }
    Ok(&(*model).0)
}

fn check_dof(n: usize, expected: usize) -> Result<(), (c_int, String)> {
    if n != expected {
        return Err(invalid(format!(
            "dimension n = {n} does not match the model's {expected} joints"
        )));
    }
    Ok(())
}

/// τ = B(q)q̈ + c(q,q̇) + g(q) + friction, written into `tau` (length n).
///
/// # Safety
/// `robot` must be live; `q`, `dq`, `ddq`, `tau` must point to n doubles.
#[no_mangle]
pub unsafe extern "C" fn gpfl_robot_inverse_dynamics(
    robot: *const GpflRobot,
    q: *const c_double,
    dq: *const c_double,
    ddq: *const c_double,
    n: usize,
    tau: *mut c_double,
) -> c_int {
    guard(|| {
        let robot = robot_arg(robot)?;
        check_dof(n, robot.dof())?;
        if tau.is_null() {
            return Err(invalid("tau is NULL"));
        }
        let q = vector_arg(q, n, "q")?;
        let dq = vector_arg(dq, n, "dq")?;
        let ddq = vector_arg(ddq, n, "ddq")?;
        let result = inverse_dynamics(robot, &q, &dq, &ddq).map_err(from_error)?;
        write_vector(tau, &result);
        Ok(())
    })
}

/// Symmetric positive-definite joint-space inertia matrix, row-major n*n.
///
/// # Safety
/// `robot` must be live; `q` must point to n doubles, `out` to n*n.
#[no_mangle]
pub unsafe extern "C" fn gpfl_robot_mass_matrix(
    robot: *const GpflRobot,
    q: *const c_double,
    n: usize,
    out: *mut c_double,
) -> c_int {
    guard(|| {
        let robot = robot_arg(robot)?;
        check_dof(n, robot.dof())?;
        if out.is_null() {
            return Err(invalid("out is NULL"));
        }
        let q = vector_arg(q, n, "q")?;
        let b = mass_matrix(robot, &q).map_err(from_error)?;
        let rows = std::slice::from_raw_parts_mut(out, n * n);
        for i in 0..n {
            for j in 0..n {
                rows[i * n + j] = b[(i, j)];
            }
        }
        Ok(())
    })
}

/// Gravity torques g(q), written into `out` (length n).
///
/// # Safety
/// `robot` must be live; `q` and `out` must point to n doubles.
#[no_mangle]
pub unsafe extern "C" fn gpfl_robot_gravity(
    robot: *const GpflRobot,
    q: *const c_double,
    n: usize,
    out: *mut c_double,
) -> c_int {
    guard(|| {
        let robot = robot_arg(robot)?;
        check_dof(n, robot.dof())?;
        if out.is_null() {
            return Err(invalid("out is NULL"));
        }
        let q = vector_arg(q, n, "q")?;
        let g = gravity_vector(robot, &q).map_err(from_error)?;
        write_vector(out, &g);
        Ok(())
    })
}

/// Velocity-dependent plus gravity torques c(q,q̇) + g(q) + friction.
///
/// # Safety
/// `robot` must be live; `q`, `dq`, `out` must point to n doubles.
#[no_mangle]
pub unsafe extern "C" fn gpfl_robot_bias(
    robot: *const GpflRobot,
    q: *const c_double,
    dq: *const c_double,
    n: usize,
    out: *mut c_double,
) -> c_int {
    guard(|| {
        let robot = robot_arg(robot)?;
        check_dof(n, robot.dof())?;
        if out.is_null() {
            return Err(invalid("out is NULL"));
        }
        let q = vector_arg(q, n, "q")?;
        let dq = vector_arg(dq, n, "dq")?;
        let b = bias_forces(robot, &q, &dq).map_err(from_error)?;
        write_vector(out, &b);
        Ok(())
    })
}

/// Loads a trained torque model from its JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gpfl_model_load(
    path: *const c_char,
    out: *mut *mut GpflModel,
) -> c_int {
    guard(|| {
        if out.is_null() {
            return Err(invalid("out is NULL"));
        }
        let path = path_arg(path, "path")?;
        let model = TorqueModel::load(Path::new(path)).map_err(from_error)?;
        *out = Box::into_raw(Box::new(GpflModel(model)));
        Ok(())
    })
}

/// Frees a model handle. NULL is ignored.
///
/// # Safety
/// `model` must come from gpfl_model_load and not be used again.
#[no_mangle]
pub unsafe extern "C" fn gpfl_model_free(model: *mut GpflModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of modeled joints, or 0 for a NULL handle.
///
/// # Safety
/// `model` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn gpfl_model_joints(model: *const GpflModel) -> usize {
    if model.is_null() {
        0
    } else {
        (*model).0.n_joints()
    }
}

/// Posterior mean torque at (q, q̇, q̈), one entry per joint.
///
/// # Safety
/// `model` must be live; `q`, `dq`, `ddq`, `tau` must point to n doubles.
#[no_mangle]
pub unsafe extern "C" fn gpfl_model_predict_torque(
    model: *const GpflModel,
    q: *const c_double,
    dq: *const c_double,
    ddq: *const c_double,
    n: usize,
    tau: *mut c_double,
) -> c_int {
    guard(|| {
        let model = model_arg(model)?;
        check_dof(n, model.n_joints())?;
        if tau.is_null() {
            return Err(invalid("tau is NULL"));
        }
        let q = vector_arg(q, n, "q")?;
        let dq = vector_arg(dq, n, "dq")?;
        let ddq = vector_arg(ddq, n, "ddq")?;
        let result = model.predict_torque(&q, &dq, &ddq).map_err(from_error)?;
        write_vector(tau, &result);
        Ok(())
    })
}

/// Model-implied gravity torques, the prediction at zero velocity and zero
/// acceleration.
///
/// # Safety
/// `model` must be live; `q` and `out` must point to n doubles.
#[no_mangle]
pub unsafe extern "C" fn gpfl_model_gravity(
    model: *const GpflModel,
    q: *const c_double,
    n: usize,
    out: *mut c_double,
) -> c_int {
    guard(|| {
        let model = model_arg(model)?;
        check_dof(n, model.n_joints())?;
        if out.is_null() {
            return Err(invalid("out is NULL"));
        }
        let q = vector_arg(q, n, "q")?;
        let g = gpfl::dyncomp::estimate_gravity(model, &q).map_err(from_error)?;
        write_vector(out, &g);
        Ok(())
    })
}

/// Model-implied inertia matrix from unit-acceleration probes, row-major.
///
/// # Safety
/// `model` must be live; `q` must point to n doubles, `out` to n*n.
#[no_mangle]
pub unsafe extern "C" fn gpfl_model_inertia(
    model: *const GpflModel,
    q: *const c_double,
    n: usize,
    out: *mut c_double,
) -> c_int {
    guard(|| {
        let model = model_arg(model)?;
        check_dof(n, model.n_joints())?;
        if out.is_null() {
            return Err(invalid("out is NULL"));
        }
        let q = vector_arg(q, n, "q")?;
        let b = gpfl::dyncomp::estimate_inertia(model, &q).map_err(from_error)?;
        let rows = std::slice::from_raw_parts_mut(out, n * n);
        for i in 0..n {
            for j in 0..n {
                rows[i * n + j] = b[(i, j)];
            }
        }
        Ok(())
    })
}

/// Model-implied torques that do not depend on acceleration.
///
/// # Safety
/// `model` must be live; `q`, `dq`, `out` must point to n doubles.
#[no_mangle]
pub unsafe extern "C" fn gpfl_model_bias(
    model: *const GpflModel,
    q: *const c_double,
    dq: *const c_double,
    n: usize,
    out: *mut c_double,
) -> c_int {
    guard(|| {
        let model = model_arg(model)?;
        check_dof(n, model.n_joints())?;
        if out.is_null() {
            return Err(invalid("out is NULL"));
        }
        let q = vector_arg(q, n, "q")?;
        let dq = vector_arg(dq, n, "dq")?;
        let b = gpfl::dyncomp::estimate_bias(model, &q, &dq).map_err(from_error)?;
        write_vector(out, &b);
        Ok(())
    })
}

unsafe fn controller_args(
    r: *const c_double,
    dr: *const c_double,
    ddr: *const c_double,
    q: *const c_double,
    dq: *const c_double,
    n: usize,
    omega: f64,
    zeta: f64,
) -> Result<
    (
        DVector<f64>,
        DVector<f64>,
        DVector<f64>,
        DVector<f64>,
        DVector<f64>,
        Gains,
    ),
    (c_int, String),
> {
    let gains = Gains::from_natural_frequency(omega, zeta, n).map_err(from_error)?;
    Ok((
        vector_arg(r, n, "r")?,
        vector_arg(dr, n, "dr")?,
        vector_arg(ddr, n, "ddr")?,
        vector_arg(q, n, "q")?,
        vector_arg(dq, n, "dq")?,
        gains,
    ))
}

/// Feedback-linearizing torque through the GP model: the commanded
/// acceleration from the (r, ṙ, r̈) sample and the pole placement (ω, ζ)
/// is pushed through the model's posterior mean.
///
/// # Safety
/// `model` must be live; all arrays must point to n doubles.
#[no_mangle]
pub unsafe extern "C" fn gpfl_gp_fl_torque(
    model: *const GpflModel,
    r: *const c_double,
    dr: *const c_double,
    ddr: *const c_double,
    q: *const c_double,
    dq: *const c_double,
    n: usize,
    omega: c_double,
    zeta: c_double,
    tau: *mut c_double,
) -> c_int {
    guard(|| {
        let model = model_arg(model)?;
        check_dof(n, model.n_joints())?;
        if tau.is_null() {
            return Err(invalid("tau is NULL"));
        }
        let (r, dr, ddr, q, dq, gains) = controller_args(r, dr, ddr, q, dq, n, omega, zeta)?;
        let sample = RefSample {
            r: &r,
            dr: &dr,
            ddr: &ddr,
        };
        let result = gp_fl_torque(model, sample, &q, &dq, &gains).map_err(from_error)?;
        write_vector(tau, &result);
        Ok(())
    })
}

/// Feedback-linearizing torque through the model's extracted components:
/// τ = B̂(q)·a + n̂(q, q̇).
///
/// # Safety
/// `model` must be live; all arrays must point to n doubles.
#[no_mangle]
pub unsafe extern "C" fn gpfl_gp_fl_dce_torque(
    model: *const GpflModel,
    r: *const c_double,
    dr: *const c_double,
    ddr: *const c_double,
    q: *const c_double,
    dq: *const c_double,
    n: usize,
    omega: c_double,
    zeta: c_double,
    tau: *mut c_double,
) -> c_int {
    guard(|| {
        let model = model_arg(model)?;
        check_dof(n, model.n_joints())?;
        if tau.is_null() {
            return Err(invalid("tau is NULL"));
        }
        let (r, dr, ddr, q, dq, gains) = controller_args(r, dr, ddr, q, dq, n, omega, zeta)?;
        let sample = RefSample {
            r: &r,
            dr: &dr,
            ddr: &ddr,
        };
        let result = gp_fl_dce_torque(model, sample, &q, &dq, &gains).map_err(from_error)?;
        write_vector(tau, &result);
        Ok(())
    })
}

/// Feedback-linearizing torque through the true dynamics model.
///
/// # Safety
/// `robot` must be live; all arrays must point to n doubles.
#[no_mangle]
pub unsafe extern "C" fn gpfl_exact_fl_torque(
    robot: *const GpflRobot,
    r: *const c_double,
    dr: *const c_double,
    ddr: *const c_double,
    q: *const c_double,
    dq: *const c_double,
    n: usize,
    omega: c_double,
    zeta: c_double,
    tau: *mut c_double,
) -> c_int {
    guard(|| {
        let robot = robot_arg(robot)?;
        check_dof(n, robot.dof())?;
        if tau.is_null() {
            return Err(invalid("tau is NULL"));
        }
        let (r, dr, ddr, q, dq, gains) = controller_args(r, dr, ddr, q, dq, n, omega, zeta)?;
        let sample = RefSample {
            r: &r,
            dr: &dr,
            ddr: &ddr,
        };
        let result = exact_fl_torque(robot, sample, &q, &dq, &gains).map_err(from_error)?;
        write_vector(tau, &result);
        Ok(())
    })
}
