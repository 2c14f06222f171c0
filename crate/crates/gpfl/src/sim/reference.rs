//! Reference trajectory generators.
//!
//! Both generators return position, velocity, and acceleration series on the
//! simulation grid, with the derivatives computed exactly (from the filter
//! state or the analytic formula), never by numerical differencing.

use crate::error::{Error, Result};
use nalgebra::{DVector, Matrix2, Vector2};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Amplitude growth rate (rad/s) of the growing-sine reference
/// r(t) = GROWING_SINE_RATE * t * sin(2*pi*F*t).
pub const GROWING_SINE_RATE: f64 = 0.165;

#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    pub r: Vec<DVector<f64>>,
    pub dr: Vec<DVector<f64>>,
    pub ddr: Vec<DVector<f64>>,
}

/// One grid point of a reference, borrowed from the owning [`Reference`].
#[derive(Clone, Copy)]
pub struct RefSample<'a> {
    pub r: &'a DVector<f64>,
    pub dr: &'a DVector<f64>,
    pub ddr: &'a DVector<f64>,
}

impl Reference {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn dof(&self) -> usize {
        self.r.first().map_or(0, |v| v.len())
    }

    pub fn sample(&self, k: usize) -> RefSample<'_> {
        RefSample {
            r: &self.r[k],
            dr: &self.dr[k],
            ddr: &self.ddr[k],
        }
    }
}

fn grid_steps(duration: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("reference", "dt must be positive"));
    }
    if !(duration >= dt && duration.is_finite()) {
        return Err(Error::invalid("reference", "duration must be at least dt"));
    }
    Ok((duration / dt).round() as usize)
}

/// Hold interval for the i.i.d. Gaussian input of the filtered-noise
/// reference. Holding each sample for 0.1 s keeps the commanded velocity
/// piecewise smooth, so the torques a tracking controller applies stay
/// consistent with finite-difference accelerations; per-step input would
/// leave white noise in the velocity reference that no regression on
/// sampled states can explain.
const NOISE_HOLD_S: f64 = 0.1;

/// I.i.d. Gaussian samples shaped by a second-order Butterworth low-pass,
/// independently per joint. The filter runs as a continuous state-space
/// system discretized exactly under a zero-order hold of the input, so r
/// and its derivatives come from the filter state, consistent by
/// construction.
pub fn filtered_noise_reference(
    seed: u64,
    n_joints: usize,
    duration: f64,
    dt: f64,
    cutoff_hz: f64,
    amplitude: f64,
) -> Result<Reference> {
    if n_joints == 0 {
        return Err(Error::invalid("reference", "need at least one joint"));
    }
    if !(cutoff_hz > 0.0 && cutoff_hz.is_finite()) {
        return Err(Error::invalid("reference", "cutoff must be positive"));
    }
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(Error::invalid("reference", "amplitude must be non-negative"));
    }
    let steps = grid_steps(duration, dt)?;

    let wc = 2.0 * std::f64::consts::PI * cutoff_hz;
    let c = wc * wc;
    let b = std::f64::consts::SQRT_2 * wc;
    // x' = A x + B u with x = (r, r'); Butterworth poles wc*(-1 +- i)/sqrt(2).
    let a = Matrix2::new(0.0, 1.0, -c, -b);
    let (ad, bd) = zoh_discretize(&a, &Vector2::new(0.0, c), dt);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let hold = ((NOISE_HOLD_S / dt).round() as usize).max(1);
    let mut state = vec![Vector2::zeros(); n_joints];
    let mut input = vec![0.0; n_joints];
    let mut r = Vec::with_capacity(steps);
    let mut dr = Vec::with_capacity(steps);
    let mut ddr = Vec::with_capacity(steps);
    for k in 0..steps {
        if k % hold == 0 {
            for u in input.iter_mut() {
                *u = amplitude * noise.sample(&mut rng);
            }
        }
        let mut rk = DVector::zeros(n_joints);
        let mut drk = DVector::zeros(n_joints);
        let mut ddrk = DVector::zeros(n_joints);
        for (j, x) in state.iter_mut().enumerate() {
            let u = input[j];
            rk[j] = x.x;
            drk[j] = x.y;
            // Acceleration over the coming step, evaluated at its start.
            ddrk[j] = -c * x.x - b * x.y + c * u;
            *x = ad * *x + bd * u;
        }
        r.push(rk);
        dr.push(drk);
        ddr.push(ddrk);
    }
    Ok(Reference { r, dr, ddr })
}

/// Exact zero-order-hold discretization of x' = A x + B u for a 2x2 system
/// with a complex eigenvalue pair: Ad = exp(A dt), Bd = A^-1 (Ad - I) B.
fn zoh_discretize(a: &Matrix2<f64>, b: &Vector2<f64>, dt: f64) -> (Matrix2<f64>, Vector2<f64>) {
    let sigma = 0.5 * (a[(0, 0)] + a[(1, 1)]);
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    let wd2 = det - sigma * sigma;
    assert!(wd2 > 0.0, "eigenvalues must be a complex pair");
    let wd = wd2.sqrt();
    let e = (sigma * dt).exp();
    let ad = e * ((wd * dt).cos() * Matrix2::identity()
        + ((wd * dt).sin() / wd) * (a - sigma * Matrix2::identity()));
    let a_inv = Matrix2::new(a[(1, 1)], -a[(0, 1)], -a[(1, 0)], a[(0, 0)]) / det;
    let bd = a_inv * (ad * b - b);
    (ad, bd)
}

/// Sinusoid with linearly growing amplitude per joint:
/// r_j(t) = 0.165 * t * sin(2*pi*F_j*t), derivatives analytic.
pub fn growing_sine_reference(frequencies: &[f64], duration: f64, dt: f64) -> Result<Reference> {
    if frequencies.is_empty() {
        return Err(Error::invalid("reference", "need at least one frequency"));
    }
    if !frequencies.iter().all(|f| f.is_finite() && *f >= 0.0) {
        return Err(Error::invalid("reference", "frequencies must be non-negative"));
    }
    let steps = grid_steps(duration, dt)?;
    let n = frequencies.len();
    let g = GROWING_SINE_RATE;
    let mut r = Vec::with_capacity(steps);
    let mut dr = Vec::with_capacity(steps);
    let mut ddr = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = k as f64 * dt;
        let mut rk = DVector::zeros(n);
        let mut drk = DVector::zeros(n);
        let mut ddrk = DVector::zeros(n);
        for (j, f) in frequencies.iter().enumerate() {
            let w = 2.0 * std::f64::consts::PI * f;
            let (s, c) = (w * t).sin_cos();
            rk[j] = g * t * s;
            drk[j] = g * s + g * t * w * c;
            ddrk[j] = 2.0 * g * w * c - g * t * w * w * s;
        }
        r.push(rk);
        dr.push(drk);
        ddr.push(ddrk);
    }
    Ok(Reference { r, dr, ddr })
}

/// Frequencies for the growing-sine reference: |N(0.5, 1)| per joint (mean
/// 0.5 Hz, standard deviation 1 Hz, negatives folded back positive).
pub fn sample_sine_frequencies(n_joints: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Normal::new(0.5_f64, 1.0).expect("valid normal");
    (0..n_joints)
        .map(|_| dist.sample(&mut rng).abs())
        .collect()
}
