//! Exact Gaussian-process regression of joint torques: one independent model
//! per joint, posterior mean only. Fitting solves (K + sigma^2 I) alpha = y
//! through a Cholesky factorization; prediction is the cross-kernel row times
//! alpha.

mod dataset;
pub mod kernel;
mod likelihood;
mod optimize;

pub use dataset::Dataset;
pub use kernel::{gip_transform, kernel_eval, KernelSpec, PolyKernel};
pub use likelihood::log_marginal_likelihood;
pub use optimize::{optimize_hyperparameters, Optimized, OptimizeOptions};

use crate::error::{Error, Result};
use kernel::gip_transform_slice;
use nalgebra::DVector;
use ndarray::{Array1, Array2};
use ndarray_linalg::cholesky::SolveC;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Format version of the model file; bumped on any schema change.
pub const MODEL_FILE_VERSION: u32 = 1;

/// Per-dimension affine map fitted on training inputs. Squared-exponential
/// models standardize their inputs with it; polynomial-structured kernels do
/// not (scaling would change the polynomial degrees' relative weighting).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    fn from_rows(inputs: &[DVector<f64>]) -> Standardizer {
        let dim = inputs[0].len();
        let n = inputs.len() as f64;
        let mut mean = vec![0.0; dim];
        for x in inputs {
            for (m, v) in mean.iter_mut().zip(x.iter()) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }
        let mut var = vec![0.0; dim];
        for x in inputs {
            for ((s, v), m) in var.iter_mut().zip(x.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                // Constant dimensions pass through unscaled.
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// Maps raw input rows into the kernel's native space: standardized for Se,
/// unchanged for Poly, transformed for Gip.
pub(crate) fn prepare_rows(
    spec: &KernelSpec,
    inputs: &[DVector<f64>],
) -> Result<(Vec<Vec<f64>>, Option<Standardizer>)> {
    let width = spec.state_width();
    for x in inputs {
        if x.len() != width {
            return Err(Error::DimensionMismatch {
                what: "gp input row".into(),
                expected: width,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "gp input row".into(),
            });
        }
    }
    match spec {
        KernelSpec::Se { .. } => {
            let standardizer = Standardizer::from_rows(inputs);
            let rows = inputs
                .iter()
                .map(|x| standardizer.apply(x.as_slice()))
                .collect();
            Ok((rows, Some(standardizer)))
        }
        KernelSpec::Poly { .. } => Ok((inputs.iter().map(|x| x.as_slice().to_vec()).collect(), None)),
        KernelSpec::Gip { joint_types, .. } => {
            let rows = inputs
                .iter()
                .map(|x| gip_transform_slice(x.as_slice(), joint_types))
                .collect::<Result<Vec<_>>>()?;
            Ok((rows, None))
        }
    }
}

/// A fitted single-output GP.
#[derive(Clone, Debug)]
pub struct GpModel {
    kernel: KernelSpec,
    noise: f64,
    standardizer: Option<Standardizer>,
    /// Raw training inputs as passed to fit; serialized with the model.
    inputs: Vec<DVector<f64>>,
    /// Training inputs in the kernel's native space.
    rows: Vec<Vec<f64>>,
    alpha: DVector<f64>,
    /// Lower Cholesky factor of K + sigma^2 I; populated by fit, not stored
    /// in model files.
    factor: Option<Array2<f64>>,
}

impl GpModel {
    /// Fits the posterior weights for fixed hyperparameters. One jitter
    /// retry is attempted if K + sigma^2 I is numerically indefinite.
    pub fn fit(
        inputs: &[DVector<f64>],
        targets: &DVector<f64>,
        spec: &KernelSpec,
        noise: f64,
    ) -> Result<GpModel> {
        spec.validate()?;
        if inputs.is_empty() {
            return Err(Error::invalid("gp training set", "needs at least one row"));
        }
        if targets.len() != inputs.len() {
            return Err(Error::DimensionMismatch {
                what: "gp targets".into(),
                expected: inputs.len(),
                got: targets.len(),
            });
        }
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "gp targets".into(),
            });
        }
        if !(noise.is_finite() && noise > 0.0) {
            return Err(Error::invalid("gp noise", "must be finite and positive"));
        }
        let (rows, standardizer) = prepare_rows(spec, inputs)?;
        let k = likelihood::build_kernel_matrix(spec, &rows)?;
        let factorization = likelihood::factorize_kernel(k, noise)?;
        let y = Array1::from_vec(targets.as_slice().to_vec());
        let alpha = factorization
            .solvec(&y)
            .map_err(|e| Error::OptimizationFailed(format!("cholesky solve failed: {e}")))?;
        Ok(GpModel {
            kernel: spec.clone(),
            noise,
            standardizer,
            inputs: inputs.to_vec(),
            rows,
            alpha: DVector::from_vec(alpha.to_vec()),
            factor: Some(factorization.into_lower()),
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn standardizer(&self) -> Option<&Standardizer> {
        self.standardizer.as_ref()
    }

    pub fn training_inputs(&self) -> &[DVector<f64>] {
        &self.inputs
    }

    /// Lower Cholesky factor cached by fit; absent on loaded models.
    pub fn cholesky_factor(&self) -> Option<&Array2<f64>> {
        self.factor.as_ref()
    }

    fn native_input(&self, x: &DVector<f64>) -> Result<Vec<f64>> {
        let width = self.kernel.state_width();
        if x.len() != width {
            return Err(Error::DimensionMismatch {
                what: "gp prediction input".into(),
                expected: width,
                got: x.len(),
            });
        }
        Ok(match (&self.kernel, &self.standardizer) {
            (KernelSpec::Gip { joint_types, .. }, _) => {
                gip_transform_slice(x.as_slice(), joint_types)?
            }
            (_, Some(s)) => s.apply(x.as_slice()),
            (_, None) => x.as_slice().to_vec(),
        })
    }

    /// Posterior mean at a raw input row. The weight vector oscillates in
    /// sign, so the dot product is accumulated with compensated summation:
    /// naive accumulation lets the partial sums wander orders of magnitude
    /// above the result and costs ~1e-11 absolute error at 5000 rows.
    pub fn predict_mean(&self, x: &DVector<f64>) -> Result<f64> {
        let xt = self.native_input(x)?;
        let mut acc = 0.0;
        let mut lost = 0.0;
        for (row, a) in self.rows.iter().zip(self.alpha.iter()) {
            let term = a * kernel::kernel_eval_unchecked(&self.kernel, &xt, row) - lost;
            let next = acc + term;
            lost = (next - acc) - term;
            acc = next;
        }
        Ok(acc)
    }
}

/// Per-joint torque models for one robot.
#[derive(Clone, Debug)]
pub struct TorqueModel {
    pub joints: Vec<GpModel>,
}

#[derive(Serialize, Deserialize)]
struct JointModelSchema {
    kernel: KernelSpec,
    noise: f64,
    standardizer: Option<Standardizer>,
    inputs: Vec<Vec<f64>>,
    alpha: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFileSchema {
    version: u32,
    joints: Vec<JointModelSchema>,
}

impl TorqueModel {
    pub fn n_joints(&self) -> usize {
        self.joints.len()
    }

    /// Stacks (q, dq, ddq) and evaluates every joint's posterior mean.
    pub fn predict_torque(
        &self,
        q: &DVector<f64>,
        dq: &DVector<f64>,
        ddq: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let n = self.joints.len();
        if q.len() != n || dq.len() != n || ddq.len() != n {
            return Err(Error::DimensionMismatch {
                what: "predict_torque state".into(),
                expected: n,
                got: q.len(),
            });
        }
        let mut x = DVector::zeros(3 * n);
        x.rows_mut(0, n).copy_from(q);
        x.rows_mut(n, n).copy_from(dq);
        x.rows_mut(2 * n, n).copy_from(ddq);
        let mut tau = DVector::zeros(n);
        for (j, model) in self.joints.iter().enumerate() {
            tau[j] = model.predict_mean(&x)?;
        }
        Ok(tau)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let schema = ModelFileSchema {
            version: MODEL_FILE_VERSION,
            joints: self
                .joints
                .iter()
                .map(|m| JointModelSchema {
                    kernel: m.kernel.clone(),
                    noise: m.noise,
                    standardizer: m.standardizer.clone(),
                    inputs: m.inputs.iter().map(|x| x.as_slice().to_vec()).collect(),
                    alpha: m.alpha.as_slice().to_vec(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&schema)
            .map_err(|e| Error::invalid("model file", e.to_string()))
    }

    pub fn from_json_str(text: &str, origin: &Path) -> Result<TorqueModel> {
        let schema: ModelFileSchema =
            serde_json::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
        if schema.version != MODEL_FILE_VERSION {
            return Err(Error::parse(
                origin,
                format!(
                    "unsupported model file version {} (expected {})",
                    schema.version, MODEL_FILE_VERSION
                ),
            ));
        }
        let mut joints = Vec::with_capacity(schema.joints.len());
        for (j, m) in schema.joints.into_iter().enumerate() {
            m.kernel.validate().map_err(|e| {
                Error::parse(origin, format!("joint {j} kernel invalid: {e}"))
            })?;
            if m.alpha.len() != m.inputs.len() || m.inputs.is_empty() {
                return Err(Error::parse(
                    origin,
                    format!("joint {j}: alpha and inputs must be non-empty and equal length"),
                ));
            }
            if !(m.noise.is_finite() && m.noise > 0.0) {
                return Err(Error::parse(origin, format!("joint {j}: invalid noise")));
            }
            let inputs: Vec<DVector<f64>> =
                m.inputs.into_iter().map(DVector::from_vec).collect();
            let width = m.kernel.state_width();
            // Native rows are rebuilt with the *stored* standardizer so a
            // loaded model predicts bit-identically to the fitted one.
            let mut rows = Vec::with_capacity(inputs.len());
            for x in &inputs {
                if x.len() != width {
                    return Err(Error::parse(
                        origin,
                        format!("joint {j}: input row width {} != {width}", x.len()),
                    ));
                }
                rows.push(match (&m.kernel, &m.standardizer) {
                    (KernelSpec::Gip { joint_types, .. }, _) => {
                        gip_transform_slice(x.as_slice(), joint_types)
                            .map_err(|e| Error::parse(origin, e.to_string()))?
                    }
                    (KernelSpec::Se { .. }, None) => {
                        return Err(Error::parse(
                            origin,
                            format!("joint {j}: se model is missing its standardizer"),
                        ))
                    }
                    (_, Some(s)) => s.apply(x.as_slice()),
                    (_, None) => x.as_slice().to_vec(),
                });
            }
            joints.push(GpModel {
                kernel: m.kernel,
                noise: m.noise,
                standardizer: m.standardizer,
                inputs,
                rows,
                alpha: DVector::from_vec(m.alpha),
                factor: None,
            });
        }
        Ok(TorqueModel { joints })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<TorqueModel> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TorqueModel::from_json_str(&text, path)
    }
}

/// Mean squared error normalized by the population variance of the targets,
/// as a percentage.
pub fn nmse(predictions: &DVector<f64>, targets: &DVector<f64>) -> Result<f64> {
    if predictions.len() != targets.len() || targets.is_empty() {
        return Err(Error::DimensionMismatch {
            what: "nmse inputs".into(),
            expected: targets.len().max(1),
            got: predictions.len(),
        });
    }
    let n = targets.len() as f64;
    let mean = targets.sum() / n;
    let variance = targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
    if variance <= 0.0 {
        return Err(Error::UndefinedMetric);
    }
    let mse = predictions
        .iter()
        .zip(targets.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n;
    Ok(100.0 * mse / variance)
}
