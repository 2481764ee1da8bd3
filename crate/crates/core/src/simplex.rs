//! Probability-simplex helpers.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Rescale a non-negative vector so its components sum to one.
pub fn normalize_hlc(v: &[f64]) -> Result<Vec<f64>> {
    for (index, &value) in v.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidComponent { index, value });
        }
    }
    let sum: f64 = v.iter().sum();
    if sum <= 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(v.iter().map(|&x| x / sum).collect())
}

/// Euclidean projection of `v` onto `{w : w >= 0, sum(w) = 1}`.
///
/// Sort-based thresholding: find the largest prefix of the descending order
/// whose shifted values stay positive, then subtract the common threshold.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    project_simplex_in_place(&mut out, &mut Vec::with_capacity(v.len()));
    out
}

/// In-place variant of [`project_simplex`]; `scratch` is reused between calls.
pub fn project_simplex_in_place(v: &mut [f64], scratch: &mut Vec<f64>) {
    debug_assert!(!v.is_empty());
    scratch.clear();
    scratch.extend_from_slice(v);
    scratch.sort_unstable_by(|a, b| b.total_cmp(a));

    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &u) in scratch.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}
