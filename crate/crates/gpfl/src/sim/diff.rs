use crate::error::{Error, Result};
use nalgebra::DVector;

/// Central-difference acceleration estimate over a velocity series:
/// ddq_k = (dq_{k+1} - dq_{k-1}) / (2 dt) at interior points. The two
/// endpoints are dropped; the returned index map gives, for each output
/// sample, the index it had in the input series.
pub fn central_difference(
    dq: &[DVector<f64>],
    dt: f64,
) -> Result<(Vec<DVector<f64>>, Vec<usize>)> {
    if dq.len() < 3 {
        return Err(Error::invalid(
            "velocity series",
            format!("need at least 3 samples for central differences, got {}", dq.len()),
        ));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("velocity series", "dt must be positive"));
    }
    let mut ddq = Vec::with_capacity(dq.len() - 2);
    let mut index = Vec::with_capacity(dq.len() - 2);
    for k in 1..dq.len() - 1 {
        ddq.push((&dq[k + 1] - &dq[k - 1]) / (2.0 * dt));
        index.push(k);
    }
    Ok((ddq, index))
}
