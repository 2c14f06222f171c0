//! Deterministic fixed-step closed-loop simulation: pluggable controllers,
//! reference generators, trajectory logging, and offline acceleration
//! estimation for dataset assembly.

mod diff;
mod integrate;
mod log;
mod reference;

pub use diff::central_difference;
pub use integrate::Integrator;
pub(crate) use log::parse_row;
pub use log::TrajectoryLog;
pub use reference::{
    filtered_noise_reference, growing_sine_reference, sample_sine_frequencies, RefSample,
    Reference, GROWING_SINE_RATE,
};

use crate::dynamics::{JointState, RobotModel};
use crate::error::{Error, Result};
use nalgebra::DVector;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Any joint position beyond this magnitude aborts the run as divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e3;

/// A control law: maps time, the measured state, and the current reference
/// sample to a torque command.
pub trait Controller {
    fn torque(
        &self,
        t: f64,
        q: &DVector<f64>,
        dq: &DVector<f64>,
        reference: RefSample<'_>,
    ) -> DVector<f64>;
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    pub integrator: Integrator,
    pub seed: u64,
    /// Measurement noise std per joint (rad); `None` reads states exactly.
    pub noise_q: Option<DVector<f64>>,
    /// Measurement noise std per joint (rad/s).
    pub noise_dq: Option<DVector<f64>>,
    /// Symmetric torque saturation per joint (N m).
    pub torque_limit: Option<DVector<f64>>,
}

impl SimConfig {
    pub fn new(dt: f64, duration: f64) -> Self {
        SimConfig {
            dt,
            duration,
            integrator: Integrator::SemiImplicitEuler,
            seed: 0,
            noise_q: None,
            noise_dq: None,
            torque_limit: None,
        }
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("sim config", "dt must be positive"));
        }
        if !(self.duration >= self.dt && self.duration.is_finite()) {
            return Err(Error::invalid("sim config", "duration must be at least dt"));
        }
        for (name, v) in [
            ("noise_q", &self.noise_q),
            ("noise_dq", &self.noise_dq),
            ("torque_limit", &self.torque_limit),
        ] {
            if let Some(v) = v {
                if v.len() != n {
                    return Err(Error::DimensionMismatch {
                        what: name.into(),
                        expected: n,
                        got: v.len(),
                    });
                }
                if !v.iter().all(|x| x.is_finite() && *x >= 0.0) {
                    return Err(Error::invalid("sim config", format!("{name} must be non-negative")));
                }
            }
        }
        Ok(())
    }
}

/// Fixed-step closed-loop run. Each step measures the (optionally noised)
/// state, asks the controller for a torque, clamps it, logs, then advances
/// the plant. Bitwise deterministic for a fixed seed and configuration.
pub fn simulate(
    model: &RobotModel,
    controller: &dyn Controller,
    reference: &Reference,
    init: &JointState,
    config: &SimConfig,
) -> Result<TrajectoryLog> {
    let n = model.dof();
    config.validate(n)?;
    init.validate(model)?;
    let steps = config.steps();
    if reference.len() < steps {
        return Err(Error::invalid(
            "reference",
            format!("{} samples cover fewer than {steps} steps", reference.len()),
        ));
    }
    if reference.dof() != n {
        return Err(Error::DimensionMismatch {
            what: "reference".into(),
            expected: n,
            got: reference.dof(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut log = TrajectoryLog::with_capacity(steps);
    let mut q = init.q.clone();
    let mut dq = init.dq.clone();

    for k in 0..steps {
        let t = k as f64 * config.dt;
        let sample = reference.sample(k);
        let (qm, dqm) = measure(&q, &dq, config, &unit, &mut rng);
        let mut tau = controller.torque(t, &qm, &dqm, sample);
        if tau.len() != n || !tau.iter().all(|x| x.is_finite()) {
            return Err(Error::ControllerFault { step: k });
        }
        if let Some(limit) = &config.torque_limit {
            tau.zip_apply(limit, |x, l| *x = x.clamp(-l, l));
        }
        log.push(t, q.clone(), dq.clone(), tau.clone(), sample.r.clone());
        (q, dq) = config.integrator.step(model, &q, &dq, &tau, config.dt)?;
        if q.amax() > DIVERGENCE_LIMIT {
            return Err(Error::Divergence {
                time: (k + 1) as f64 * config.dt,
                limit: DIVERGENCE_LIMIT,
                log: Box::new(log),
            });
        }
    }
    Ok(log)
}

fn measure(
    q: &DVector<f64>,
    dq: &DVector<f64>,
    config: &SimConfig,
    unit: &Normal<f64>,
    rng: &mut ChaCha8Rng,
) -> (DVector<f64>, DVector<f64>) {
    let noised = |v: &DVector<f64>, std: &Option<DVector<f64>>, rng: &mut ChaCha8Rng| match std {
        Some(std) => v + std.map(|s| s * unit.sample(rng)),
        None => v.clone(),
    };
    let qm = noised(q, &config.noise_q, rng);
    let dqm = noised(dq, &config.noise_dq, rng);
    (qm, dqm)
}
