use crate::error::{Error, Result};
use nalgebra::DVector;
use std::fmt::Write as _;
use std::path::Path;

/// Per-step record of a closed-loop run: true state, commanded torque,
/// reference position and tracking error, all on the control grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryLog {
    pub time: Vec<f64>,
    pub q: Vec<DVector<f64>>,
    pub dq: Vec<DVector<f64>>,
    pub tau: Vec<DVector<f64>>,
    pub r: Vec<DVector<f64>>,
    pub e: Vec<DVector<f64>>,
}

impl TrajectoryLog {
    pub fn with_capacity(steps: usize) -> Self {
        TrajectoryLog {
            time: Vec::with_capacity(steps),
            q: Vec::with_capacity(steps),
            dq: Vec::with_capacity(steps),
            tau: Vec::with_capacity(steps),
            r: Vec::with_capacity(steps),
            e: Vec::with_capacity(steps),
        }
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn dof(&self) -> usize {
        self.q.first().map_or(0, |v| v.len())
    }

    pub(crate) fn push(
        &mut self,
        t: f64,
        q: DVector<f64>,
        dq: DVector<f64>,
        tau: DVector<f64>,
        r: DVector<f64>,
    ) {
        self.e.push(&r - &q);
        self.time.push(t);
        self.q.push(q);
        self.dq.push(dq);
        self.tau.push(tau);
        self.r.push(r);
    }

    pub fn to_csv(&self) -> String {
        let n = self.dof();
        let mut out = String::new();
        out.push('t');
        for series in ["q", "dq", "tau", "r", "e"] {
            for j in 1..=n {
                let _ = write!(out, ",{series}{j}");
            }
        }
        out.push('\n');
        for k in 0..self.len() {
            let _ = write!(out, "{:.16e}", self.time[k]);
            for series in [&self.q, &self.dq, &self.tau, &self.r, &self.e] {
                for v in series[k].iter() {
                    let _ = write!(out, ",{v:.16e}");
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn from_csv(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(origin, "empty file"))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 6 || (cols.len() - 1) % 5 != 0 {
            return Err(Error::parse(origin, "header is not t,q*,dq*,tau*,r*,e*"));
        }
        let n = (cols.len() - 1) / 5;
        let mut expected = vec!["t".to_string()];
        for series in ["q", "dq", "tau", "r", "e"] {
            for j in 1..=n {
                expected.push(format!("{series}{j}"));
            }
        }
        if cols != expected {
            return Err(Error::parse(origin, "header is not t,q*,dq*,tau*,r*,e*"));
        }
        let mut log = TrajectoryLog::with_capacity(16);
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let row = parse_row(line, 1 + 5 * n)
                .map_err(|detail| Error::parse(origin, format!("line {}: {detail}", lineno + 2)))?;
            let slice = |s: usize| DVector::from_iterator(n, row[1 + s * n..1 + (s + 1) * n].iter().copied());
            log.time.push(row[0]);
            log.q.push(slice(0));
            log.dq.push(slice(1));
            log.tau.push(slice(2));
            log.r.push(slice(3));
            log.e.push(slice(4));
        }
        Ok(log)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, path)
    }
}

pub(crate) fn parse_row(line: &str, expected: usize) -> std::result::Result<Vec<f64>, String> {
    let mut row = Vec::with_capacity(expected);
    for field in line.split(',') {
        let v: f64 = field
            .trim()
            .parse()
            .map_err(|_| format!("bad number {field:?}"))?;
        row.push(v);
    }
    if row.len() != expected {
        return Err(format!("expected {expected} fields, got {}", row.len()));
    }
    Ok(row)
}
