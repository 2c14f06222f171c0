//! Kernel functions for torque regression: squared-exponential, polynomial,
//! and the structured product-of-polynomials kernel that encodes how inertial
//! dynamics enter the torque (linear in acceleration, quadratic in velocity,
//! periodic in revolute configuration).

use crate::dynamics::{JointState, JointType};
use crate::error::{Error, Result};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Inhomogeneous polynomial kernel (bias + x1' diag(weights) x2)^degree with
/// per-dimension weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyKernel {
    pub degree: u8,
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// scale * exp(-sum_k (x1_k - x2_k)^2 / lengthscale_k^2)
    Se { scale: f64, lengthscales: Vec<f64> },
    Poly {
        degree: u8,
        weights: Vec<f64>,
        bias: f64,
    },
    /// Structured torque kernel on the transformed input (ddq, dq, qtilde):
    /// (accel poly on ddq + vel poly on dq) * product of per-joint config
    /// polys on that joint's qtilde slice.
    Gip {
        accel: PolyKernel,
        vel: PolyKernel,
        config: Vec<PolyKernel>,
        joint_types: Vec<JointType>,
    },
}

impl KernelSpec {
    /// Stock squared-exponential spec with unit parameters.
    pub fn se(dim: usize) -> KernelSpec {
        KernelSpec::Se {
            scale: 1.0,
            lengthscales: vec![1.0; dim],
        }
    }

    /// Stock structured kernel for the given joint layout: degree-1 poly over
    /// accelerations, degree-2 over velocities, degree-2 config factors.
    pub fn gip(joint_types: &[JointType]) -> KernelSpec {
        let n = joint_types.len();
        let poly = |degree, dim| PolyKernel {
            degree,
            weights: vec![1.0; dim],
            bias: 1.0,
        };
        KernelSpec::Gip {
            accel: poly(1, n),
            vel: poly(2, n),
            config: joint_types
                .iter()
                .map(|t| poly(2, config_slice_width(*t)))
                .collect(),
            joint_types: joint_types.to_vec(),
        }
    }

    /// Width of the input this spec evaluates on: raw dimension for Se/Poly,
    /// transformed width for Gip.
    pub fn input_width(&self) -> usize {
        match self {
            KernelSpec::Se { lengthscales, .. } => lengthscales.len(),
            KernelSpec::Poly { weights, .. } => weights.len(),
            KernelSpec::Gip { joint_types, .. } => gip_width(joint_types),
        }
    }

    /// Raw state dimension (q, dq, ddq concatenated) this spec models.
    pub fn state_width(&self) -> usize {
        match self {
            KernelSpec::Gip { joint_types, .. } => 3 * joint_types.len(),
            _ => self.input_width(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, values: &[f64]| -> Result<()> {
            if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                return Err(Error::invalid(name, "must be finite and positive"));
            }
            Ok(())
        };
        let poly_ok = |name: &str, p: &PolyKernel, dim: usize, degree: u8| -> Result<()> {
            if p.degree != degree {
                return Err(Error::invalid(name, format!("degree must be {degree}")));
            }
            if p.weights.len() != dim {
                return Err(Error::invalid(name, "weight count mismatch"));
            }
            if p.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(Error::invalid(name, "weights must be non-negative"));
            }
            if !p.bias.is_finite() || p.bias < 0.0 {
                return Err(Error::invalid(name, "bias must be non-negative"));
            }
            Ok(())
        };
        match self {
            KernelSpec::Se {
                scale,
                lengthscales,
            } => {
                positive("se scale", std::slice::from_ref(scale))?;
                if lengthscales.is_empty() {
                    return Err(Error::invalid("se lengthscales", "must be non-empty"));
                }
                positive("se lengthscales", lengthscales)
            }
            KernelSpec::Poly {
                degree,
                weights,
                bias,
            } => {
                if !matches!(degree, 1 | 2) {
                    return Err(Error::invalid("poly degree", "must be 1 or 2"));
                }
                poly_ok(
                    "poly kernel",
                    &PolyKernel {
                        degree: *degree,
                        weights: weights.clone(),
                        bias: *bias,
                    },
                    weights.len(),
                    *degree,
                )
            }
            KernelSpec::Gip {
                accel,
                vel,
                config,
                joint_types,
            } => {
                let n = joint_types.len();
                if n == 0 {
                    return Err(Error::invalid("gip kernel", "needs at least one joint"));
                }
                if config.len() != n {
                    return Err(Error::invalid("gip kernel", "one config factor per joint"));
                }
                poly_ok("gip accel poly", accel, n, 1)?;
                poly_ok("gip vel poly", vel, n, 2)?;
                for (factor, t) in config.iter().zip(joint_types) {
                    poly_ok("gip config poly", factor, config_slice_width(*t), 2)?;
                }
                Ok(())
            }
        }
    }
}

fn config_slice_width(t: JointType) -> usize {
    match t {
        JointType::Revolute => 2,
        JointType::Prismatic => 1,
    }
}

/// Width of the transformed input (ddq, dq, qtilde).
pub fn gip_width(joint_types: &[JointType]) -> usize {
    2 * joint_types.len()
        + joint_types
            .iter()
            .map(|t| config_slice_width(*t))
            .sum::<usize>()
}

/// Maps a raw state row (q, dq, ddq) to the kernel input (ddq, dq, qtilde),
/// where qtilde stacks [sin q, cos q] per revolute joint and [q] per
/// prismatic joint.
pub fn gip_transform_slice(x: &[f64], joint_types: &[JointType]) -> Result<Vec<f64>> {
    let n = joint_types.len();
    if x.len() != 3 * n {
        return Err(Error::DimensionMismatch {
            what: "gip input".into(),
            expected: 3 * n,
            got: x.len(),
        });
    }
    let (q, rest) = x.split_at(n);
    let (dq, ddq) = rest.split_at(n);
    let mut out = Vec::with_capacity(gip_width(joint_types));
    out.extend_from_slice(ddq);
    out.extend_from_slice(dq);
    for (j, t) in joint_types.iter().enumerate() {
        match t {
            JointType::Revolute => {
                out.push(q[j].sin());
                out.push(q[j].cos());
            }
            JointType::Prismatic => out.push(q[j]),
        }
    }
    Ok(out)
}

/// gip_transform_slice on a full joint state.
pub fn gip_transform(state: &JointState, joint_types: &[JointType]) -> Result<DVector<f64>> {
    let n = joint_types.len();
    for (name, v) in [("q", &state.q), ("dq", &state.dq), ("ddq", &state.ddq)] {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                what: name.into(),
                expected: n,
                got: v.len(),
            });
        }
    }
    let mut raw = Vec::with_capacity(3 * n);
    raw.extend_from_slice(state.q.as_slice());
    raw.extend_from_slice(state.dq.as_slice());
    raw.extend_from_slice(state.ddq.as_slice());
    Ok(DVector::from_vec(gip_transform_slice(&raw, joint_types)?))
}

fn poly_eval(p: &PolyKernel, a: &[f64], b: &[f64]) -> f64 {
    let mut base = p.bias;
    for ((w, x1), x2) in p.weights.iter().zip(a).zip(b) {
        base += w * x1 * x2;
    }
    base.powi(p.degree as i32)
}

/// Evaluates the kernel on inputs in its native space (transformed inputs for
/// Gip; see gip_transform).
pub fn kernel_eval(spec: &KernelSpec, x1: &[f64], x2: &[f64]) -> Result<f64> {
    let width = spec.input_width();
    if x1.len() != width || x2.len() != width {
        return Err(Error::DimensionMismatch {
            what: "kernel input".into(),
            expected: width,
            got: if x1.len() != width {
                x1.len()
            } else {
                x2.len()
            },
        });
    }
    Ok(kernel_eval_unchecked(spec, x1, x2))
}

pub(crate) fn kernel_eval_unchecked(spec: &KernelSpec, x1: &[f64], x2: &[f64]) -> f64 {
    match spec {
        KernelSpec::Se {
            scale,
            lengthscales,
        } => {
            let mut s = 0.0;
            for ((l, a), b) in lengthscales.iter().zip(x1).zip(x2) {
                let v = (a - b) / l;
                s += v * v;
            }
            scale * (-s).exp()
        }
        KernelSpec::Poly {
            degree,
            weights,
            bias,
        } => {
            let p = PolyKernel {
                degree: *degree,
                weights: weights.clone(),
                bias: *bias,
            };
            poly_eval(&p, x1, x2)
        }
        KernelSpec::Gip {
            accel,
            vel,
            config,
            joint_types,
        } => {
            let n = joint_types.len();
            let k_lin = poly_eval(accel, &x1[..n], &x2[..n])
                + poly_eval(vel, &x1[n..2 * n], &x2[n..2 * n]);
            let mut k_q = 1.0;
            let mut offset = 2 * n;
            for (factor, t) in config.iter().zip(joint_types) {
                let w = config_slice_width(*t);
                k_q *= poly_eval(factor, &x1[offset..offset + w], &x2[offset..offset + w]);
                offset += w;
            }
            k_lin * k_q
        }
    }
}

/// Number of log-space hyperparameters (excluding the noise).
pub(crate) fn param_count(spec: &KernelSpec) -> usize {
    match spec {
        KernelSpec::Se { lengthscales, .. } => 1 + lengthscales.len(),
        KernelSpec::Poly { weights, .. } => weights.len() + 1,
        KernelSpec::Gip {
            accel,
            vel,
            config,
            ..
        } => {
            accel.weights.len()
                + 1
                + vel.weights.len()
                + 1
                + config.iter().map(|f| f.weights.len() + 1).sum::<usize>()
        }
    }
}

/// Flattens all hyperparameters to log space in a fixed order.
pub(crate) fn flatten_log_params(spec: &KernelSpec) -> Vec<f64> {
    let mut out = Vec::with_capacity(param_count(spec));
    let push_poly = |out: &mut Vec<f64>, p: &PolyKernel| {
        out.extend(p.weights.iter().map(|w| w.ln()));
        out.push(p.bias.ln());
    };
    match spec {
        KernelSpec::Se {
            scale,
            lengthscales,
        } => {
            out.push(scale.ln());
            out.extend(lengthscales.iter().map(|l| l.ln()));
        }
        KernelSpec::Poly {
            degree,
            weights,
            bias,
        } => push_poly(
            &mut out,
            &PolyKernel {
                degree: *degree,
                weights: weights.clone(),
                bias: *bias,
            },
        ),
        KernelSpec::Gip {
            accel,
            vel,
            config,
            ..
        } => {
            push_poly(&mut out, accel);
            push_poly(&mut out, vel);
            for factor in config {
                push_poly(&mut out, factor);
            }
        }
    }
    out
}

/// Rebuilds a spec with the template's structure and the given log-space
/// parameter vector.
pub(crate) fn unflatten_log_params(template: &KernelSpec, params: &[f64]) -> KernelSpec {
    assert_eq!(params.len(), param_count(template));
    let mut cursor = 0usize;
    let mut take = |n: usize| {
        let slice = &params[cursor..cursor + n];
        cursor += n;
        slice.to_vec()
    };
    let mut take_poly = |p: &PolyKernel| {
        let weights: Vec<f64> = take(p.weights.len()).iter().map(|v| v.exp()).collect();
        let bias = take(1)[0].exp();
        PolyKernel {
            degree: p.degree,
            weights,
            bias,
        }
    };
    match template {
        KernelSpec::Se { lengthscales, .. } => {
            let scale = take(1)[0].exp();
            let ls: Vec<f64> = take(lengthscales.len()).iter().map(|v| v.exp()).collect();
            KernelSpec::Se {
                scale,
                lengthscales: ls,
            }
        }
        KernelSpec::Poly {
            degree,
            weights,
            bias,
        } => {
            let p = take_poly(&PolyKernel {
                degree: *degree,
                weights: weights.clone(),
                bias: *bias,
            });
            KernelSpec::Poly {
                degree: p.degree,
                weights: p.weights,
                bias: p.bias,
            }
        }
        KernelSpec::Gip {
            accel,
            vel,
            config,
            joint_types,
        } => KernelSpec::Gip {
            accel: take_poly(accel),
            vel: take_poly(vel),
            config: config.iter().map(&mut take_poly).collect(),
            joint_types: joint_types.clone(),
        },
    }
}

fn poly_eval_grad(p: &PolyKernel, a: &[f64], b: &[f64], grad: &mut [f64]) -> f64 {
    let mut base = p.bias;
    for ((w, x1), x2) in p.weights.iter().zip(a).zip(b) {
        base += w * x1 * x2;
    }
    let chain = p.degree as f64 * base.powi(p.degree as i32 - 1);
    for (g, ((w, x1), x2)) in grad.iter_mut().zip(p.weights.iter().zip(a).zip(b)) {
        *g = chain * w * x1 * x2;
    }
    grad[p.weights.len()] = chain * p.bias;
    base.powi(p.degree as i32)
}

/// Kernel value plus its gradient w.r.t. the log-space parameters, laid out
/// as in flatten_log_params. `grad` must have param_count entries.
pub(crate) fn kernel_eval_with_grad(
    spec: &KernelSpec,
    x1: &[f64],
    x2: &[f64],
    grad: &mut [f64],
) -> f64 {
    debug_assert_eq!(grad.len(), param_count(spec));
    match spec {
        KernelSpec::Se {
            scale,
            lengthscales,
        } => {
            let mut s = 0.0;
            for ((l, a), b) in lengthscales.iter().zip(x1).zip(x2) {
                let v = (a - b) / l;
                s += v * v;
            }
            let k = scale * (-s).exp();
            grad[0] = k;
            for (m, (l, (a, b))) in lengthscales.iter().zip(x1.iter().zip(x2)).enumerate() {
                let v = (a - b) / l;
                grad[1 + m] = k * 2.0 * v * v;
            }
            k
        }
        KernelSpec::Poly {
            degree,
            weights,
            bias,
        } => {
            let p = PolyKernel {
                degree: *degree,
                weights: weights.clone(),
                bias: *bias,
            };
            poly_eval_grad(&p, x1, x2, grad)
        }
        KernelSpec::Gip {
            accel,
            vel,
            config,
            joint_types,
        } => {
            let n = joint_types.len();
            let na = accel.weights.len() + 1;
            let nv = vel.weights.len() + 1;
            let (g_accel, rest) = grad.split_at_mut(na);
            let (g_vel, mut g_config) = rest.split_at_mut(nv);
            let ka = poly_eval_grad(accel, &x1[..n], &x2[..n], g_accel);
            let kv = poly_eval_grad(vel, &x1[n..2 * n], &x2[n..2 * n], g_vel);

            let mut factors = Vec::with_capacity(config.len());
            let mut offset = 2 * n;
            for (factor, t) in config.iter().zip(joint_types) {
                let w = config_slice_width(*t);
                let (g_j, rest) = g_config.split_at_mut(factor.weights.len() + 1);
                let kj = poly_eval_grad(factor, &x1[offset..offset + w], &x2[offset..offset + w], g_j);
                factors.push(kj);
                g_config = rest;
                offset += w;
            }
            let k_q: f64 = factors.iter().product();
            for g in grad[..na + nv].iter_mut() {
                *g *= k_q;
            }
            // Config gradients need the product of the other factors; prefix
            // and suffix products avoid dividing by a possibly zero factor.
            let m = factors.len();
            let mut prefix = vec![1.0; m + 1];
            for j in 0..m {
                prefix[j + 1] = prefix[j] * factors[j];
            }
            let mut suffix = vec![1.0; m + 1];
            for j in (0..m).rev() {
                suffix[j] = suffix[j + 1] * factors[j];
            }
            let mut cursor = na + nv;
            for (j, factor) in config.iter().enumerate() {
                let len = factor.weights.len() + 1;
                let others = prefix[j] * suffix[j + 1];
                for g in grad[cursor..cursor + len].iter_mut() {
                    *g *= (ka + kv) * others;
                }
                cursor += len;
            }
            (ka + kv) * k_q
        }
    }
}
