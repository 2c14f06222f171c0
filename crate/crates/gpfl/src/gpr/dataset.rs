//! Training data for the torque models: rows of (q, dq, ddq) with measured
//! joint torques, built offline from trajectory logs.

use crate::error::{Error, Result};
use crate::sim::{central_difference, parse_row, TrajectoryLog};
use nalgebra::DVector;
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub n_joints: usize,
    /// GP input rows, each the concatenation (q, dq, ddq) of length 3n.
    pub inputs: Vec<DVector<f64>>,
    /// Measured torques per row, length n each.
    pub torques: Vec<DVector<f64>>,
    /// Sample period of the rows; zero when unknown (e.g. loaded from CSV).
    pub dt: f64,
    pub provenance: String,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Target vector y for one joint across all rows.
    pub fn joint_targets(&self, joint: usize) -> DVector<f64> {
        DVector::from_iterator(self.torques.len(), self.torques.iter().map(|t| t[joint]))
    }

    /// Builds training rows from a closed-loop log: keep every `downsample`-th
    /// sample, then recover accelerations by central differences over the
    /// downsampled velocities. The two boundary samples have no acceleration
    /// estimate and are dropped.
    pub fn from_log(log: &TrajectoryLog, downsample: usize) -> Result<Dataset> {
        if downsample == 0 {
            return Err(Error::invalid("downsample factor", "must be at least 1"));
        }
        let n = log.dof();
        let keep: Vec<usize> = (0..log.len()).step_by(downsample).collect();
        if keep.len() < 3 {
            return Err(Error::invalid(
                "trajectory log",
                "too short to differentiate after downsampling",
            ));
        }
        let dt_eff = log.time[keep[1]] - log.time[keep[0]];
        let dq_kept: Vec<DVector<f64>> = keep.iter().map(|&k| log.dq[k].clone()).collect();
        let (ddq, interior) = central_difference(&dq_kept, dt_eff)?;

        let mut inputs = Vec::with_capacity(interior.len());
        let mut torques = Vec::with_capacity(interior.len());
        for (acc, &idx) in ddq.iter().zip(&interior) {
            let k = keep[idx];
            let mut x = DVector::zeros(3 * n);
            x.rows_mut(0, n).copy_from(&log.q[k]);
            x.rows_mut(n, n).copy_from(&log.dq[k]);
            x.rows_mut(2 * n, n).copy_from(acc);
            inputs.push(x);
            torques.push(log.tau[k].clone());
        }
        Ok(Dataset {
            n_joints: n,
            inputs,
            torques,
            dt: dt_eff,
            provenance: format!(
                "downsampled by {downsample} from a {}-step log",
                log.len()
            ),
        })
    }

    pub fn to_csv(&self) -> String {
        let n = self.n_joints;
        let mut out = String::new();
        for prefix in ["q", "dq", "ddq", "tau"] {
            for j in 1..=n {
                if !out.is_empty() {
                    out.push(',');
                }
                out.push_str(&format!("{prefix}{j}"));
            }
        }
        out.push('\n');
        for (x, tau) in self.inputs.iter().zip(&self.torques) {
            let mut first = true;
            for v in x.iter().chain(tau.iter()) {
                if !first {
                    out.push(',');
                }
                out.push_str(&format!("{v:.16e}"));
                first = false;
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, origin: &Path) -> Result<Dataset> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(origin, "empty dataset file"))?;
        let columns: Vec<&str> = header.split(',').collect();
        if columns.len() % 4 != 0 || columns.is_empty() {
            return Err(Error::parse(origin, "column count must be a multiple of 4"));
        }
        let n = columns.len() / 4;
        let mut expected = Vec::new();
        for prefix in ["q", "dq", "ddq", "tau"] {
            for j in 1..=n {
                expected.push(format!("{prefix}{j}"));
            }
        }
        if columns != expected.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::parse(origin, format!("unexpected header: {header}")));
        }
        let mut inputs = Vec::new();
        let mut torques = Vec::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let row = parse_row(line, 4 * n).map_err(|detail| Error::parse(origin, detail))?;
            inputs.push(DVector::from_vec(row[..3 * n].to_vec()));
            torques.push(DVector::from_vec(row[3 * n..].to_vec()));
        }
        if inputs.is_empty() {
            return Err(Error::parse(origin, "dataset has no rows"));
        }
        Ok(Dataset {
            n_joints: n,
            inputs,
            torques,
            dt: 0.0,
            provenance: origin.display().to_string(),
        })
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: &Path) -> Result<Dataset> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Dataset::from_csv(&text, path)
    }

    /// Evenly spaced subset of about `target` rows, used to keep the
    /// hyperparameter search affordable before the final full fit.
    pub fn subsample(&self, target: usize) -> Dataset {
        if target == 0 || target >= self.len() {
            return self.clone();
        }
        let stride = self.len().div_ceil(target);
        let keep: Vec<usize> = (0..self.len()).step_by(stride).collect();
        Dataset {
            n_joints: self.n_joints,
            inputs: keep.iter().map(|&k| self.inputs[k].clone()).collect(),
            torques: keep.iter().map(|&k| self.torques[k].clone()).collect(),
            dt: self.dt * stride as f64,
            provenance: format!("{} (subsampled to {})", self.provenance, keep.len()),
        }
    }
}
