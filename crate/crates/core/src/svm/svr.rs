use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::kernel::{KernelParams, KernelRows, RbfRows};
use super::smo::{max_violating_pair, DualProblem, SmoOptions};
use super::{check_dim, check_matrix, decision, nonzero, resolve_rho, DualDiagnostics};
use crate::dataset::FeatureSubset;
use crate::{Error, Result};

/// A trained ε-SVR: `f(x) = Σ β_i k(sv_i, x) + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename = "svr")]
pub struct SvrModel {
    pub params: KernelParams,
    pub input_dimension: usize,
    pub support_vectors: Vec<Vec<f64>>,
    /// `β_i = α_i − α_i*`, each in `[-C, C]`.
    pub dual_coeffs: Vec<f64>,
    /// Row of each support vector in the training matrix.
    pub support_indices: Vec<usize>,
    pub bias: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_subset: Option<FeatureSubset>,
    pub converged: bool,
    pub iterations: usize,
}

/// Per-row solution of the ε-SVR dual.
#[derive(Debug, Clone)]
pub struct SvrFit {
    pub coef: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub violation: f64,
    pub converged: bool,
}

impl SvrFit {
    /// Prediction at an arbitrary point given its kernel values against the
    /// training rows.
    pub fn predict_with(&self, kernel_values: impl Iterator<Item = f64>) -> f64 {
        self.coef
            .iter()
            .zip(kernel_values)
            .filter(|(c, _)| **c != 0.0)
            .map(|(c, k)| c * k)
            .sum::<f64>()
            + self.bias
    }
}

fn svr_problem<'k, K: KernelRows + ?Sized>(kernel: &'k K, y: &[f64], params: &KernelParams) -> DualProblem<'k, K> {
    let n = y.len();
    let mut signs = vec![1.0; n];
    signs.extend(core::iter::repeat(-1.0).take(n));
    let mut p: Vec<f64> = y.iter().map(|&t| params.epsilon - t).collect();
    p.extend(y.iter().map(|&t| params.epsilon + t));
    DualProblem {
        kernel,
        y: signs,
        base: (0..n).chain(0..n).collect(),
        p,
        upper: vec![params.c; 2 * n],
    }
}

/// Solve the ε-SVR dual over an arbitrary kernel row source.
///
/// When no variable is free the offset falls back to the mean target,
/// clamped into the KKT-feasible interval.
pub fn solve_svr_dual<K: KernelRows + ?Sized>(
    kernel: &K,
    y: &[f64],
    params: &KernelParams,
    opts: &SmoOptions,
) -> Result<SvrFit> {
    params.validate()?;
    if y.is_empty() {
        return Err(Error::Empty("training targets"));
    }
    if kernel.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "kernel rows",
            expected: y.len(),
            found: kernel.len(),
        });
    }
    if let Some((index, &value)) = y.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidComponent { index, value });
    }
    let n = y.len();
    let problem = svr_problem(kernel, y, params);
    let sol = problem.solve(opts);
    let coef: Vec<f64> = (0..n).map(|i| sol.alpha[i] - sol.alpha[i + n]).collect();
    let mean = y.iter().sum::<f64>() / n as f64;
    // f(x) = Σ β k − rho, so a target-scale fallback for the bias is −rho
    let rho = resolve_rho(sol.rho_bounds, -mean);
    Ok(SvrFit {
        coef,
        bias: -rho,
        iterations: sol.iterations,
        violation: sol.violation,
        converged: sol.converged,
    })
}

/// Train an ε-SVR with RBF kernel on rows `x` and targets `y`.
pub fn train_svr<R: AsRef<[f64]> + Sync>(
    x: &[R],
    y: &[f64],
    params: &KernelParams,
    opts: &SmoOptions,
) -> Result<SvrModel> {
    let m = check_matrix(x, y.len())?;
    let kernel = RbfRows { rows: x, gamma: params.gamma };
    let fit = solve_svr_dual(&kernel, y, params, opts)?;
    Ok(SvrModel::from_fit(x, m, *params, fit))
}

impl SvrModel {
    pub fn from_fit<R: AsRef<[f64]>>(x: &[R], input_dimension: usize, params: KernelParams, fit: SvrFit) -> Self {
        let support_indices = nonzero(&fit.coef);
        SvrModel {
            params,
            input_dimension,
            support_vectors: support_indices.iter().map(|&i| x[i].as_ref().to_vec()).collect(),
            dual_coeffs: support_indices.iter().map(|&i| fit.coef[i]).collect(),
            support_indices,
            bias: fit.bias,
            feature_subset: None,
            converged: fit.converged,
            iterations: fit.iterations,
        }
    }

    pub fn with_subset(mut self, subset: FeatureSubset) -> Self {
        self.feature_subset = Some(subset);
        self
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.input_dimension, x)?;
        Ok(decision(&self.support_vectors, &self.dual_coeffs, self.bias, self.params.gamma, x))
    }

    pub fn n_support(&self) -> usize {
        self.support_vectors.len()
    }
}

/// Dual objective `−½βᵀKβ + yᵀβ − ε‖β‖₁` and maximal KKT violation of a
/// trained model against its training data.
pub fn svr_diagnostics<R: AsRef<[f64]> + Sync>(model: &SvrModel, x: &[R], y: &[f64]) -> Result<DualDiagnostics> {
    check_matrix(x, y.len())?;
    let n = y.len();
    let mut alpha = vec![0.0; 2 * n];
    for (&i, &b) in model.support_indices.iter().zip(&model.dual_coeffs) {
        if i >= n {
            return Err(Error::DimensionMismatch {
                context: "support index",
                expected: n,
                found: i,
            });
        }
        if b > 0.0 {
            alpha[i] = b;
        } else {
            alpha[i + n] = -b;
        }
    }
    let kernel = RbfRows { rows: x, gamma: model.params.gamma };
    let problem = svr_problem(&kernel, y, &model.params);
    let grad = problem.gradient(&alpha);
    let (_, _, gap) = max_violating_pair(&problem.y, &alpha, &problem.upper, &grad);
    Ok(DualDiagnostics {
        dual_objective: -problem.objective(&alpha),
        max_kkt_violation: gap.max(0.0),
    })
}
