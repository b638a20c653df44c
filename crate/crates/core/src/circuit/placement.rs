use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Placement {
    /// Number of layers between the gadget layer and the measurement.
    pub tail_depth: usize,
    pub predicted_k: f64,
    pub predicted_f: f64,
}

/// Cone size and feedforward count for a `d`-dimensional lattice with operator
/// spreading velocity `v`, a `k`-local observable and a tail of `t` layers.
pub fn placement_for_depth(d: u32, v: f64, k: u32, t: usize) -> Result<Placement> {
    if d < 1 {
        return Err(Error::Invalid("lattice dimension must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Invalid(format!("spreading velocity {v} outside [0, 1]")));
    }
    let (df, kf, tf) = (d as f64, k as f64, t as f64);
    let predicted_k = if v == 0.0 { kf } else { kf * (2.0 * v * tf / df).powi(d as i32) };
    let predicted_f = kf * 2f64.powi(d as i32 - 1) * v.powi(d as i32) / ((df + 1.0) * df.powi(d as i32)) * tf.powi(d as i32 + 1);
    Ok(Placement { tail_depth: t, predicted_k, predicted_f })
}

/// Recommends a tail depth `ceil((log2 n)^(1/(d+1)))` and evaluates the predictions there.
pub fn placement_advisor(d: u32, v: f64, k: u32, n: usize) -> Result<Placement> {
    if n < 1 || k < 1 {
        return Err(Error::Invalid("qubit count and locality must be positive".into()));
    }
    if d < 1 {
        return Err(Error::Invalid("lattice dimension must be at least 1".into()));
    }
    let log_n = (n as f64).log2().max(0.0);
    let t = log_n.powf(1.0 / (d as f64 + 1.0)).ceil().max(1.0) as usize;
    placement_for_depth(d, v, k, t)
}
