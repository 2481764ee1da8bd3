use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Hyperparameters of an RBF kernel machine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// RBF width in `exp(-gamma * ‖x - y‖²)`.
    pub gamma: f64,
    /// Box constraint on the dual coefficients.
    pub c: f64,
    /// Half-width of the insensitive tube (regression only).
    #[serde(default)]
    pub epsilon: f64,
}

impl KernelParams {
    pub fn new(c: f64, gamma: f64, epsilon: f64) -> Result<Self> {
        let p = KernelParams { gamma, c, epsilon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("C must be > 0, got {}", self.c)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

pub fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `exp(-gamma * ‖x - y‖²)`.
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "rbf kernel",
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(libm::exp(-gamma * squared_distance(x, y)))
}

/// Source of kernel matrix rows for the SMO solver.
pub trait KernelRows: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Write `K(i, j)` for every `j` into `out`.
    fn fill_row(&self, i: usize, out: &mut [f64]);

    fn diag(&self, i: usize) -> f64;
}

/// RBF rows computed directly from feature vectors.
pub struct RbfRows<'a, R> {
    pub rows: &'a [R],
    pub gamma: f64,
}

impl<R: AsRef<[f64]> + Sync> KernelRows for RbfRows<'_, R> {
    fn len(&self) -> usize {
        self.rows.len()
    }

    fn fill_row(&self, i: usize, out: &mut [f64]) {
        let xi = self.rows[i].as_ref();
        for (o, xj) in out.iter_mut().zip(self.rows) {
            *o = libm::exp(-self.gamma * squared_distance(xi, xj.as_ref()));
        }
    }

    fn diag(&self, _i: usize) -> f64 {
        1.0
    }
}

/// Dense matrix of pairwise squared distances, shared across `gamma` values
/// and cross-validation folds.
#[derive(Debug, Clone)]
pub struct PairwiseDistances {
    n: usize,
    d2: Vec<f64>,
}

impl PairwiseDistances {
    pub fn new<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let n = rows.len();
        let mut d2 = alloc::vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = squared_distance(rows[i].as_ref(), rows[j].as_ref());
                d2[i * n + j] = v;
                d2[j * n + i] = v;
            }
        }
        PairwiseDistances { n, d2 }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d2[i * self.n + j]
    }

    /// RBF rows over the records `indices` of this matrix.
    pub fn rbf<'a>(&'a self, indices: &'a [usize], gamma: f64) -> SubsetRbf<'a> {
        SubsetRbf {
            dist: self,
            indices,
            gamma,
        }
    }
}

pub struct SubsetRbf<'a> {
    dist: &'a PairwiseDistances,
    indices: &'a [usize],
    gamma: f64,
}

impl KernelRows for SubsetRbf<'_> {
    fn len(&self) -> usize {
        self.indices.len()
    }

    fn fill_row(&self, i: usize, out: &mut [f64]) {
        let base = self.indices[i] * self.dist.n;
        let row = &self.dist.d2[base..base + self.dist.n];
        for (o, &j) in out.iter_mut().zip(self.indices) {
            *o = libm::exp(-self.gamma * row[j]);
        }
    }

    fn diag(&self, _i: usize) -> f64 {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn kernel_examples() {
        assert_eq!(rbf_kernel(&[0.3, 0.1], &[0.3, 0.1], 2.0).unwrap(), 1.0);
        let v = rbf_kernel(&[0.0], &[1.0], 1.0).unwrap();
        assert!((v - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert_eq!(rbf_kernel(&[0.0, 5.0], &[9.0, -1.0], 0.0).unwrap(), 1.0);
        assert!(rbf_kernel(&[0.0], &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn kernel_rows_agree_across_sources() {
        let x = vec![vec![0.0, 1.0], vec![0.5, 0.2], vec![0.9, 0.9], vec![0.1, 0.4]];
        let direct = RbfRows { rows: &x, gamma: 0.7 };
        let dist = PairwiseDistances::new(&x);
        let idx = [3, 1, 2];
        let sub = dist.rbf(&idx, 0.7);
        let mut a = vec![0.0; 4];
        let mut b = vec![0.0; 3];
        for (si, &i) in idx.iter().enumerate() {
            direct.fill_row(i, &mut a);
            sub.fill_row(si, &mut b);
            for (sj, &j) in idx.iter().enumerate() {
                assert!((a[j] - b[sj]).abs() < 1e-15);
            }
        }
        // symmetric with unit diagonal
        for i in 0..4 {
            direct.fill_row(i, &mut a);
            assert_eq!(a[i], 1.0);
            let mut r = vec![0.0; 4];
            for j in 0..4 {
                direct.fill_row(j, &mut r);
                assert_eq!(a[j], r[i]);
            }
        }
    }

    #[test]
    fn params_validation() {
        assert!(KernelParams::new(1.0, 0.5, 0.01).is_ok());
        assert!(KernelParams::new(0.0, 0.5, 0.01).is_err());
        assert!(KernelParams::new(1.0, 0.0, 0.01).is_err());
        assert!(KernelParams::new(1.0, 0.5, -0.1).is_err());
    }
}
