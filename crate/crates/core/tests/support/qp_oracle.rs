//! Reference solver for box-and-hyperplane constrained convex QPs
//!
//!   min ½ zᵀHz + fᵀz   s.t.  0 ≤ z ≤ u,  aᵀz = 0
//!
//! by accelerated projected gradient with adaptive restart. Projection onto
//! the feasible set bisects the multiplier of the hyperplane. Shares no code
//! with the library's SMO solver.

#![allow(dead_code)]

pub struct BoxQp {
    pub h: Vec<Vec<f64>>,
    pub f: Vec<f64>,
    pub a: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxQp {
    pub fn objective(&self, z: &[f64]) -> f64 {
        let n = z.len();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += z[i] * self.h[i][j] * z[j];
            }
        }
        0.5 * quad + self.f.iter().zip(z).map(|(f, z)| f * z).sum::<f64>()
    }

    fn gradient(&self, z: &[f64]) -> Vec<f64> {
        (0..z.len())
            .map(|i| self.h[i].iter().zip(z).map(|(h, z)| h * z).sum::<f64>() + self.f[i])
            .collect()
    }

    /// Euclidean projection onto `{0 ≤ z ≤ u, aᵀz = 0}` with `a_i = ±1`.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let clip = |lam: f64| -> Vec<f64> {
            v.iter()
                .zip(&self.a)
                .zip(&self.upper)
                .map(|((v, a), u)| (v - lam * a).clamp(0.0, *u))
                .collect()
        };
        let resid = |z: &[f64]| z.iter().zip(&self.a).map(|(z, a)| z * a).sum::<f64>();
        // resid(clip(λ)) is non-increasing in λ
        let span = v.iter().map(|x| x.abs()).fold(0.0, f64::max) + self.upper.iter().cloned().fold(0.0, f64::max) + 1.0;
        let (mut lo, mut hi) = (-span, span);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if resid(&clip(mid)) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        clip(0.5 * (lo + hi))
    }

    /// Largest eigenvalue bound from the maximal absolute row sum.
    fn lipschitz(&self) -> f64 {
        self.h
            .iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
            .max(1e-12)
    }

    pub fn solve(&self, iterations: usize) -> (Vec<f64>, f64) {
        let n = self.f.len();
        let step = 1.0 / self.lipschitz();
        let mut x = self.project(&vec![0.0; n]);
        let mut y = x.clone();
        let mut t = 1.0f64;
        let mut fx = self.objective(&x);
        for _ in 0..iterations {
            let g = self.gradient(&y);
            let trial: Vec<f64> = y.iter().zip(&g).map(|(y, g)| y - step * g).collect();
            let next = self.project(&trial);
            let fnext = self.objective(&next);
            if fnext > fx {
                // restart momentum from the last iterate
                y = x.clone();
                t = 1.0;
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            y = next.iter().zip(&x).map(|(n, o)| n + beta * (n - o)).collect();
            x = next;
            fx = fnext;
            t = t_next;
        }
        (x, fx)
    }
}

pub fn rbf_matrix(x: &[Vec<f64>], gamma: f64) -> Vec<Vec<f64>> {
    x.iter()
        .map(|a| {
            x.iter()
                .map(|b| (-gamma * a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>()).exp())
                .collect()
        })
        .collect()
}

/// ε-SVR dual over `z = (α, α*)`; returns the maximization-form optimum.
pub fn svr_dual_optimum(x: &[Vec<f64>], y: &[f64], c: f64, gamma: f64, epsilon: f64, iterations: usize) -> f64 {
    let n = y.len();
    let k = rbf_matrix(x, gamma);
    let mut h = vec![vec![0.0; 2 * n]; 2 * n];
    for i in 0..2 * n {
        for j in 0..2 * n {
            let s = if (i < n) == (j < n) { 1.0 } else { -1.0 };
            h[i][j] = s * k[i % n][j % n];
        }
    }
    let f: Vec<f64> = (0..2 * n)
        .map(|i| if i < n { epsilon - y[i] } else { epsilon + y[i - n] })
        .collect();
    let a: Vec<f64> = (0..2 * n).map(|i| if i < n { 1.0 } else { -1.0 }).collect();
    let qp = BoxQp { h, f, a, upper: vec![c; 2 * n] };
    -qp.solve(iterations).1
}

/// C-SVC dual; returns the maximization-form optimum.
pub fn svc_dual_optimum(x: &[Vec<f64>], y: &[f64], c: f64, gamma: f64, iterations: usize) -> f64 {
    let n = y.len();
    let k = rbf_matrix(x, gamma);
    let h: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| y[i] * y[j] * k[i][j]).collect()).collect();
    let qp = BoxQp {
        h,
        f: vec![-1.0; n],
        a: y.to_vec(),
        upper: vec![c; n],
    };
    -qp.solve(iterations).1
}
