//! Sequential minimal optimization for box- and equality-constrained duals.
//!
//! Solves
//!
//! ```text
//! min_α  ½ αᵀQα + pᵀα   s.t.  yᵀα = 0,  0 ≤ α_t ≤ C_t
//! ```
//!
//! with `Q_tu = y_t y_u K(base_t, base_u)`, which covers both C-SVC (one
//! variable per record) and ε-SVR (two variables per record sharing a
//! kernel row). Working pairs are chosen by the maximal-violating-pair rule
//! and updated analytically; no shrinking.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::cache::RowCache;
use super::kernel::KernelRows;

/// Curvature floor for degenerate pairs (identical inputs).
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoOptions {
    /// Stop when the maximal KKT violation `m(α) − M(α)` drops to this.
    pub tolerance: f64,
    /// Cap on pair updates.
    pub max_iter: usize,
    /// Kernel rows held in the LRU cache.
    pub cache_rows: usize,
}

impl Default for SmoOptions {
    fn default() -> Self {
        SmoOptions {
            tolerance: 1e-3,
            max_iter: 10_000_000,
            cache_rows: 4096,
        }
    }
}

/// A dual problem in the form above.
pub(crate) struct DualProblem<'k, K: ?Sized> {
    pub kernel: &'k K,
    /// Label (±1) of every variable.
    pub y: Vec<f64>,
    /// Kernel row backing every variable.
    pub base: Vec<usize>,
    pub p: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct DualSolution {
    pub alpha: Vec<f64>,
    /// Feasible interval for the offset `rho` and the free-variable average.
    pub rho_bounds: RhoBounds,
    pub iterations: usize,
    pub violation: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct RhoBounds {
    pub lower: f64,
    pub upper: f64,
    pub free_mean: Option<f64>,
}

/// Maximal violating pair over `(α, ∇)`, returning `(i, j, m − M)`.
pub(crate) fn max_violating_pair(y: &[f64], alpha: &[f64], upper: &[f64], grad: &[f64]) -> (usize, usize, f64) {
    let mut g_max = f64::NEG_INFINITY;
    let mut g_min = f64::INFINITY;
    let mut i_best = usize::MAX;
    let mut j_best = usize::MAX;
    for t in 0..alpha.len() {
        let v = -y[t] * grad[t];
        let in_up = if y[t] > 0.0 { alpha[t] < upper[t] } else { alpha[t] > 0.0 };
        let in_low = if y[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < upper[t] };
        if in_up && v > g_max {
            g_max = v;
            i_best = t;
        }
        if in_low && v < g_min {
            g_min = v;
            j_best = t;
        }
    }
    if i_best == usize::MAX || j_best == usize::MAX {
        return (i_best, j_best, 0.0);
    }
    (i_best, j_best, g_max - g_min)
}

/// Interval of offsets consistent with the KKT conditions (libsvm's rho).
pub(crate) fn rho_bounds(y: &[f64], alpha: &[f64], upper: &[f64], grad: &[f64]) -> RhoBounds {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= upper[t];
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_count += 1;
            free_sum += yg;
        }
    }
    RhoBounds {
        lower: lb,
        upper: ub,
        free_mean: (free_count > 0).then(|| free_sum / free_count as f64),
    }
}

impl<K: KernelRows + ?Sized> DualProblem<'_, K> {
    pub(crate) fn solve(&self, opts: &SmoOptions) -> DualSolution {
        let l = self.y.len();
        let mut alpha = vec![0.0; l];
        let mut grad = self.p.clone();
        let diag: Vec<f64> = self.base.iter().map(|&b| self.kernel.diag(b)).collect();
        let mut cache = RowCache::new(self.kernel, opts.cache_rows);
        let mut row_i = vec![0.0; self.kernel.len()];

        let mut iterations = 0;
        let mut violation;
        loop {
            let (i, j, gap) = max_violating_pair(&self.y, &alpha, &self.upper, &grad);
            violation = gap;
            if gap <= opts.tolerance || iterations >= opts.max_iter {
                break;
            }
            iterations += 1;

            row_i.copy_from_slice(cache.row(self.base[i]));
            let (yi, yj) = (self.y[i], self.y[j]);
            let (ci, cj) = (self.upper[i], self.upper[j]);
            let qij = yi * yj * row_i[self.base[j]];
            let old_i = alpha[i];
            let old_j = alpha[j];

            if yi != yj {
                let quad = (diag[i] + diag[j] + 2.0 * qij).max(TAU);
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > ci - cj {
                    if alpha[i] > ci {
                        alpha[i] = ci;
                        alpha[j] = ci - diff;
                    }
                } else if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = cj + diff;
                }
            } else {
                let quad = (diag[i] + diag[j] - 2.0 * qij).max(TAU);
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > ci {
                    if alpha[i] > ci {
                        alpha[i] = ci;
                        alpha[j] = sum - ci;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > cj {
                    if alpha[j] > cj {
                        alpha[j] = cj;
                        alpha[i] = sum - cj;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }

            // ∇_t += Q_ti Δα_i + Q_tj Δα_j with Q_tu = y_t y_u K
            let di = (alpha[i] - old_i) * yi;
            let dj = (alpha[j] - old_j) * yj;
            let row_j = cache.row(self.base[j]);
            for t in 0..l {
                let b = self.base[t];
                grad[t] += self.y[t] * (row_i[b] * di + row_j[b] * dj);
            }
        }

        let rho = rho_bounds(&self.y, &alpha, &self.upper, &grad);
        DualSolution {
            converged: violation <= opts.tolerance,
            alpha,
            rho_bounds: rho,
            iterations,
            violation,
        }
    }

    /// `½ αᵀQα + pᵀα` evaluated from scratch.
    pub(crate) fn objective(&self, alpha: &[f64]) -> f64 {
        let n = self.kernel.len();
        let mut row = vec![0.0; n];
        let mut quad = 0.0;
        for (t, &at) in alpha.iter().enumerate() {
            if at == 0.0 {
                continue;
            }
            self.kernel.fill_row(self.base[t], &mut row);
            for (u, &au) in alpha.iter().enumerate() {
                if au != 0.0 {
                    quad += at * au * self.y[t] * self.y[u] * row[self.base[u]];
                }
            }
        }
        0.5 * quad + self.p.iter().zip(alpha).map(|(p, a)| p * a).sum::<f64>()
    }

    /// Gradient `Qα + p` evaluated from scratch.
    pub(crate) fn gradient(&self, alpha: &[f64]) -> Vec<f64> {
        let n = self.kernel.len();
        let mut row = vec![0.0; n];
        let mut grad = self.p.clone();
        for (t, &at) in alpha.iter().enumerate() {
            if at == 0.0 {
                continue;
            }
            self.kernel.fill_row(self.base[t], &mut row);
            for (u, g) in grad.iter_mut().enumerate() {
                *g += self.y[u] * self.y[t] * at * row[self.base[u]];
            }
        }
        grad
    }
}
