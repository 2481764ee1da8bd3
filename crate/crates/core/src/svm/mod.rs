//! RBF kernel machines trained by SMO: ε-support-vector regression and
//! C-support-vector classification.

mod cache;
pub mod kernel;
mod smo;
mod svc;
mod svr;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use kernel::{rbf_kernel, KernelParams, KernelRows, PairwiseDistances, RbfRows};
pub use smo::SmoOptions;
pub use svc::{solve_svc_dual, svc_diagnostics, train_svc, SvcFit, SvcModel};
pub use svr::{solve_svr_dual, svr_diagnostics, train_svr, SvrFit, SvrModel};

use crate::{Error, Result};

/// Dual objective (maximization form) and largest KKT violation of a model
/// with respect to its training data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualDiagnostics {
    pub dual_objective: f64,
    pub max_kkt_violation: f64,
}

fn check_matrix<R: AsRef<[f64]>>(x: &[R], n_targets: usize) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::Empty("training rows"));
    }
    if x.len() != n_targets {
        return Err(Error::DimensionMismatch {
            context: "training targets",
            expected: x.len(),
            found: n_targets,
        });
    }
    let m = x[0].as_ref().len();
    for row in x {
        let row = row.as_ref();
        if row.len() != m {
            return Err(Error::DimensionMismatch {
                context: "training row",
                expected: m,
                found: row.len(),
            });
        }
        if let Some((index, &value)) = row.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidComponent { index, value });
        }
    }
    Ok(m)
}

/// Resolve the offset from the KKT interval: the free-variable mean when
/// one exists, otherwise `fallback` clamped into `[lower, upper]`.
fn resolve_rho(bounds: smo::RhoBounds, fallback: f64) -> f64 {
    if let Some(mean) = bounds.free_mean {
        return mean;
    }
    let (lo, hi) = (bounds.lower, bounds.upper);
    if lo <= hi {
        fallback.clamp(lo, hi)
    } else {
        // bounds cross by at most the stopping tolerance
        (lo + hi) / 2.0
    }
}

fn midpoint(bounds: smo::RhoBounds) -> f64 {
    match (bounds.lower.is_finite(), bounds.upper.is_finite()) {
        (true, true) => (bounds.lower + bounds.upper) / 2.0,
        (true, false) => bounds.lower,
        (false, true) => bounds.upper,
        (false, false) => 0.0,
    }
}

fn decision<R: AsRef<[f64]>>(svs: &[R], coeffs: &[f64], bias: f64, gamma: f64, x: &[f64]) -> f64 {
    svs.iter()
        .zip(coeffs)
        .map(|(sv, &b)| b * libm::exp(-gamma * kernel::squared_distance(sv.as_ref(), x)))
        .sum::<f64>()
        + bias
}

fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            context: "prediction input",
            expected,
            found: x.len(),
        });
    }
    Ok(())
}

fn nonzero(coef: &[f64]) -> Vec<usize> {
    coef.iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(i, _)| i)
        .collect()
}
