use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::kernel::{KernelParams, KernelRows, RbfRows};
use super::smo::{max_violating_pair, DualProblem, SmoOptions};
use super::{check_dim, check_matrix, decision, midpoint, nonzero, resolve_rho, DualDiagnostics};
use crate::dataset::FeatureSubset;
use crate::{Error, Result};

/// A trained C-SVC: `f(x) = Σ α_i y_i k(sv_i, x) + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename = "svc")]
pub struct SvcModel {
    pub params: KernelParams,
    pub input_dimension: usize,
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i y_i` with `0 ≤ α_i ≤ C`.
    pub dual_coeffs: Vec<f64>,
    pub support_indices: Vec<usize>,
    pub bias: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_subset: Option<FeatureSubset>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct SvcFit {
    /// `α_i y_i` per training row.
    pub coef: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub violation: f64,
    pub converged: bool,
}

impl SvcFit {
    pub fn decision_with(&self, kernel_values: impl Iterator<Item = f64>) -> f64 {
        self.coef
            .iter()
            .zip(kernel_values)
            .filter(|(c, _)| **c != 0.0)
            .map(|(c, k)| c * k)
            .sum::<f64>()
            + self.bias
    }
}

fn check_labels(y: &[f64]) -> Result<()> {
    if let Some((index, &value)) = y.iter().enumerate().find(|(_, &v)| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidComponent { index, value });
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(Error::SingleClass);
    }
    Ok(())
}

fn svc_problem<'k, K: KernelRows + ?Sized>(kernel: &'k K, y: &[f64], c: f64) -> DualProblem<'k, K> {
    let n = y.len();
    DualProblem {
        kernel,
        y: y.to_vec(),
        base: (0..n).collect(),
        p: vec![-1.0; n],
        upper: vec![c; n],
    }
}

/// Solve the C-SVC dual over an arbitrary kernel row source; labels are ±1.
pub fn solve_svc_dual<K: KernelRows + ?Sized>(
    kernel: &K,
    y: &[f64],
    params: &KernelParams,
    opts: &SmoOptions,
) -> Result<SvcFit> {
    params.validate()?;
    check_labels(y)?;
    if kernel.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "kernel rows",
            expected: y.len(),
            found: kernel.len(),
        });
    }
    let problem = svc_problem(kernel, y, params.c);
    let sol = problem.solve(opts);
    let rho = resolve_rho(sol.rho_bounds, midpoint(sol.rho_bounds));
    Ok(SvcFit {
        coef: sol.alpha.iter().zip(y).map(|(a, t)| a * t).collect(),
        bias: -rho,
        iterations: sol.iterations,
        violation: sol.violation,
        converged: sol.converged,
    })
}

pub fn train_svc<R: AsRef<[f64]> + Sync>(
    x: &[R],
    y: &[f64],
    params: &KernelParams,
    opts: &SmoOptions,
) -> Result<SvcModel> {
    let m = check_matrix(x, y.len())?;
    let kernel = RbfRows { rows: x, gamma: params.gamma };
    let fit = solve_svc_dual(&kernel, y, params, opts)?;
    Ok(SvcModel::from_fit(x, m, *params, fit))
}

impl SvcModel {
    pub fn from_fit<R: AsRef<[f64]>>(x: &[R], input_dimension: usize, params: KernelParams, fit: SvcFit) -> Self {
        let support_indices = nonzero(&fit.coef);
        SvcModel {
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

    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.input_dimension, x)?;
        Ok(decision(&self.support_vectors, &self.dual_coeffs, self.bias, self.params.gamma, x))
    }

    /// `(label, decision value)`; a zero decision value maps to `+1`.
    pub fn predict(&self, x: &[f64]) -> Result<(i8, f64)> {
        let d = self.decision_value(x)?;
        Ok((if d >= 0.0 { 1 } else { -1 }, d))
    }
}

/// Dual objective `Σα − ½ Σ α_i α_j y_i y_j k_ij` and maximal KKT violation.
pub fn svc_diagnostics<R: AsRef<[f64]> + Sync>(model: &SvcModel, x: &[R], y: &[f64]) -> Result<DualDiagnostics> {
    check_matrix(x, y.len())?;
    check_labels(y)?;
    let n = y.len();
    let mut alpha = vec![0.0; n];
    for (&i, &c) in model.support_indices.iter().zip(&model.dual_coeffs) {
        if i >= n {
            return Err(Error::DimensionMismatch {
                context: "support index",
                expected: n,
                found: i,
            });
        }
        alpha[i] = c * y[i];
    }
    let kernel = RbfRows { rows: x, gamma: model.params.gamma };
    let problem = svc_problem(&kernel, y, model.params.c);
    let grad = problem.gradient(&alpha);
    let (_, _, gap) = max_violating_pair(&problem.y, &alpha, &problem.upper, &grad);
    Ok(DualDiagnostics {
        dual_objective: -problem.objective(&alpha),
        max_kkt_violation: gap.max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points_hard_margin() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![-1.0, 1.0];
        let params = KernelParams::new(1000.0, 1.0, 0.0).unwrap();
        let opts = SmoOptions { tolerance: 1e-10, ..SmoOptions::default() };
        let model = train_svc(&x, &y, &params, &opts).unwrap();
        let lo = model.decision_value(&[0.0]).unwrap();
        let hi = model.decision_value(&[1.0]).unwrap();
        assert!((lo + 1.0).abs() < 1e-4, "{lo}");
        assert!((hi - 1.0).abs() < 1e-4, "{hi}");
        // analytic: α = 1 / (1 − e^{-γ}) on both points
        let alpha = 1.0 / (1.0 - libm::exp(-1.0));
        for c in &model.dual_coeffs {
            assert!((c.abs() - alpha).abs() < 1e-6);
        }
    }

    #[test]
    fn equality_constraint_holds() {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![(i % 4) as f64 / 3.0, (i / 4) as f64 / 2.0]).collect();
        let y: Vec<f64> = (0..12).map(|i| if (i * 7) % 5 < 2 { 1.0 } else { -1.0 }).collect();
        let model = train_svc(&x, &y, &KernelParams::new(3.0, 2.0, 0.0).unwrap(), &SmoOptions::default()).unwrap();
        assert!(model.dual_coeffs.iter().sum::<f64>().abs() < 1e-8);
        assert!(model.dual_coeffs.iter().all(|c| c.abs() <= 3.0 + 1e-12));
        assert!(svc_diagnostics(&model, &x, &y).unwrap().max_kkt_violation <= 1e-3);
    }

    #[test]
    fn xor_is_separated() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let y = vec![1.0, 1.0, -1.0, -1.0];
        let model = train_svc(&x, &y, &KernelParams::new(10.0, 1.0, 0.0).unwrap(), &SmoOptions::default()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(f64::from(model.predict(xi).unwrap().0), *yi);
        }
    }

    #[test]
    fn flipped_labels_negate_decisions() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 9.0, ((i * 3) % 10) as f64 / 9.0]).collect();
        let y: Vec<f64> = (0..10).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let flipped: Vec<f64> = y.iter().map(|v| -v).collect();
        let params = KernelParams::new(2.0, 1.5, 0.0).unwrap();
        let opts = SmoOptions { tolerance: 1e-9, ..SmoOptions::default() };
        let a = train_svc(&x, &y, &params, &opts).unwrap();
        let b = train_svc(&x, &flipped, &params, &opts).unwrap();
        for probe in [[0.1, 0.2], [0.5, 0.9], [0.95, 0.05]] {
            let da = a.decision_value(&probe).unwrap();
            let db = b.decision_value(&probe).unwrap();
            assert!((da + db).abs() < 1e-6, "{da} vs {db}");
        }
    }

    #[test]
    fn rejects_single_class_and_bad_labels() {
        let x = vec![vec![0.0], vec![1.0]];
        let p = KernelParams::new(1.0, 1.0, 0.0).unwrap();
        assert_eq!(train_svc(&x, &[1.0, 1.0], &p, &SmoOptions::default()).unwrap_err(), Error::SingleClass);
        assert!(train_svc(&x, &[1.0, 0.0], &p, &SmoOptions::default()).is_err());
    }
}
