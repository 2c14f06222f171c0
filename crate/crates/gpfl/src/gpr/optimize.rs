//! Hyperparameter search by marginal-likelihood maximization: BFGS with a
//! backtracking line search in log-parameter space, restarted from perturbed
//! seeds.

use super::kernel::{flatten_log_params, param_count, unflatten_log_params, KernelSpec};
use super::likelihood::lml_grad_prepared;
use super::prepare_rows;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use ndarray::Array1;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

/// Fraction of the target standard deviation used as the noise lower bound.
const NOISE_FLOOR_RELATIVE: f64 = 1e-4;
/// Armijo sufficient-decrease constant.
const ARMIJO_C1: f64 = 1e-4;
/// Log-parameters are clamped to this magnitude to keep exp() finite.
const LOG_PARAM_LIMIT: f64 = 30.0;

#[derive(Clone, Debug)]
pub struct OptimizeOptions {
    /// BFGS iteration budget per start.
    pub max_iterations: usize,
    /// Random restarts beyond the seed parameters.
    pub restarts: usize,
    /// Seed for the restart perturbations.
    pub seed: u64,
    /// Standard deviation of the log-space perturbation applied per restart.
    pub perturbation: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            max_iterations: 60,
            restarts: 4,
            seed: 0,
            perturbation: 0.8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Optimized {
    pub kernel: KernelSpec,
    pub noise: f64,
    pub likelihood: f64,
    /// Best likelihood after each accepted step; non-decreasing.
    pub trace: Vec<f64>,
}

struct Objective<'a> {
    template: &'a KernelSpec,
    rows: &'a [Vec<f64>],
    y: &'a Array1<f64>,
    noise_floor_log: f64,
}

impl Objective<'_> {
    fn n_params(&self) -> usize {
        param_count(self.template) + 1
    }

    fn clamp(&self, theta: &mut DVector<f64>) {
        let last = theta.len() - 1;
        for v in theta.iter_mut() {
            *v = v.clamp(-LOG_PARAM_LIMIT, LOG_PARAM_LIMIT);
        }
        if theta[last] < self.noise_floor_log {
            theta[last] = self.noise_floor_log;
        }
    }

    /// Likelihood and gradient at a clamped parameter vector. Errors mean the
    /// kernel matrix could not be factorized there.
    fn eval(&self, theta: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let kernel_params = theta.len() - 1;
        let spec = unflatten_log_params(self.template, &theta.as_slice()[..kernel_params]);
        let sigma = theta[kernel_params].exp();
        let (value, grad) = lml_grad_prepared(&spec, sigma, self.rows, self.y)?;
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::OptimizationFailed(
                "likelihood is not finite".into(),
            ));
        }
        Ok((value, DVector::from_vec(grad)))
    }
}

/// One BFGS ascent from `start`. Returns the best point found and appends the
/// running best to `trace`.
fn bfgs_ascend(
    objective: &Objective<'_>,
    start: DVector<f64>,
    max_iterations: usize,
    best: &mut Option<(DVector<f64>, f64)>,
    trace: &mut Vec<f64>,
) -> Result<()> {
    let dim = objective.n_params();
    let mut theta = start;
    objective.clamp(&mut theta);
    let (mut value, mut grad) = objective.eval(&theta)?;
    let record = |best: &mut Option<(DVector<f64>, f64)>,
                  trace: &mut Vec<f64>,
                  theta: &DVector<f64>,
                  value: f64| {
        if best.as_ref().is_none_or(|(_, b)| value > *b) {
            *best = Some((theta.clone(), value));
        }
        trace.push(best.as_ref().expect("just set").1);
    };
    record(best, trace, &theta, value);

    let mut h = DMatrix::identity(dim, dim);
    for _ in 0..max_iterations {
        let direction = &h * &grad;
        let slope = grad.dot(&direction);
        let direction = if slope > 0.0 {
            direction
        } else {
            // Non-ascent direction: reset the curvature estimate.
            h = DMatrix::identity(dim, dim);
            grad.clone()
        };
        let slope = grad.dot(&direction);

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let mut candidate = &theta + step * &direction;
            objective.clamp(&mut candidate);
            if let Ok((v, g)) = objective.eval(&candidate) {
                if v >= value + ARMIJO_C1 * step * slope {
                    accepted = Some((candidate, v, g));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((next_theta, next_value, next_grad)) = accepted else {
            break;
        };

        let s = &next_theta - &theta;
        let yv = &next_grad - &grad;
        // BFGS update on the inverse Hessian of the *negated* objective;
        // for ascent the curvature condition becomes s'yv < 0 and the cross
        // terms enter with a positive sign.
        let sy = s.dot(&yv);
        if sy < -1e-12 * s.norm() * yv.norm() {
            let rho = 1.0 / -sy;
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            let cross = &hy * s.transpose() + &s * hy.transpose();
            h += rho * cross + (rho * rho * yhy + rho) * (&s * s.transpose());
        }

        theta = next_theta;
        value = next_value;
        grad = next_grad;
        record(best, trace, &theta, value);

        if grad.amax() < 1e-6 * value.abs().max(1.0) || s.amax() < 1e-10 {
            break;
        }
    }
    Ok(())
}

/// Maximizes the marginal likelihood over kernel hyperparameters and noise
/// jointly. Never returns parameters with a lower likelihood than the seed;
/// the noise is floored at a small fraction of the target deviation.
pub fn optimize_hyperparameters(
    spec: &KernelSpec,
    sigma: f64,
    inputs: &[DVector<f64>],
    targets: &DVector<f64>,
    options: &OptimizeOptions,
) -> Result<Optimized> {
    spec.validate()?;
    if options.max_iterations == 0 {
        return Err(Error::invalid("optimizer budget", "needs at least 1 iteration"));
    }
    if inputs.is_empty() || targets.len() != inputs.len() {
        return Err(Error::DimensionMismatch {
            what: "optimizer training set".into(),
            expected: inputs.len().max(1),
            got: targets.len(),
        });
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid("gp noise seed", "must be finite and positive"));
    }
    for v in flatten_log_params(spec) {
        if !v.is_finite() {
            return Err(Error::invalid(
                "kernel seed",
                "all hyperparameters must be positive to search in log space",
            ));
        }
    }

    let (rows, _) = prepare_rows(spec, inputs)?;
    let y = Array1::from_vec(targets.as_slice().to_vec());
    let n = y.len() as f64;
    let mean = y.sum() / n;
    let std = (y.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n).sqrt();
    let noise_floor = (NOISE_FLOOR_RELATIVE * std).max(1e-12);
    let objective = Objective {
        template: spec,
        rows: &rows,
        y: &y,
        noise_floor_log: noise_floor.ln(),
    };

    let mut seed_theta = DVector::from_vec(flatten_log_params(spec));
    let dim = seed_theta.len() + 1;
    seed_theta = seed_theta.push(sigma.max(noise_floor).ln());
    debug_assert_eq!(dim, objective.n_params());

    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut trace = Vec::new();
    let mut failures = Vec::new();
    if let Err(e) = bfgs_ascend(
        &objective,
        seed_theta.clone(),
        options.max_iterations,
        &mut best,
        &mut trace,
    ) {
        failures.push(format!("seed start: {e}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    for restart in 0..options.restarts {
        let mut start = seed_theta.clone();
        for v in start.iter_mut() {
            *v += options.perturbation * sample_standard_normal(&mut rng);
        }
        if let Err(e) = bfgs_ascend(
            &objective,
            start,
            options.max_iterations,
            &mut best,
            &mut trace,
        ) {
            failures.push(format!("restart {restart}: {e}"));
        }
    }

    let Some((theta, likelihood)) = best else {
        return Err(Error::OptimizationFailed(format!(
            "no start could be evaluated: {}",
            failures.join("; ")
        )));
    };
    let kernel_params = theta.len() - 1;
    Ok(Optimized {
        kernel: unflatten_log_params(spec, &theta.as_slice()[..kernel_params]),
        noise: theta[kernel_params].exp(),
        likelihood,
        trace,
    })
}

fn sample_standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    StandardNormal.sample(rng)
}
