//! Linear admixture model between concept distributions and emotions.
//!
//! Each record's concept distribution `h` is modelled as
//! `h ≈ Σ_j e_j p_j` where `e` is the record's emotion distribution and the
//! `p_j` are per-emotion concept profiles on the simplex. The profiles are
//! recovered by minimizing `Σ_i ‖h_i − Σ_j e_ij p_j‖²` over the product of
//! seven simplices.
//!
//! The stacked design matrix is never formed. Every record contributes
//! `(e eᵀ) ⊗ I_d` to the Hessian, so the whole problem is captured by the
//! 7×7 Gram matrix `G = Σ e eᵀ`, the d×7 cross term `B[:, j] = Σ e_ij h_i`
//! and the scalar `Σ ‖h_i‖²`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{ConceptFilter, Dataset, FamilyTag};
use crate::emotion::NUM_EMOTIONS;
use crate::simplex::project_simplex_in_place;
use crate::{Error, Result};

const K: usize = NUM_EMOTIONS;

/// Records per chunk in the fixed-order reduction of [`AdmixtureProblem::from_rows`].
const ACCUMULATION_CHUNK: usize = 256;

/// One concept distribution per emotion class, stored column-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionProfileMatrix {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concept_names: Option<Vec<String>>,
    /// `columns[j]` is the profile of emotion `j`.
    pub columns: Vec<Vec<f64>>,
}

impl EmotionProfileMatrix {
    pub fn uniform(d: usize) -> Self {
        EmotionProfileMatrix {
            concept_names: None,
            columns: vec![vec![1.0 / d as f64; d]; K],
        }
    }

    /// Validate shape and the per-column simplex constraint (within 1e-8).
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        if columns.len() != K {
            return Err(Error::DimensionMismatch {
                context: "profile matrix columns",
                expected: K,
                found: columns.len(),
            });
        }
        let d = columns[0].len();
        for col in &columns {
            if col.len() != d {
                return Err(Error::DimensionMismatch {
                    context: "profile column",
                    expected: d,
                    found: col.len(),
                });
            }
            if let Some((index, &value)) = col.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
                return Err(Error::InvalidComponent { index, value });
            }
            let sum: f64 = col.iter().sum();
            if (sum - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidParameter(alloc::format!(
                    "profile column sums to {sum}"
                )));
            }
        }
        Ok(EmotionProfileMatrix {
            concept_names: None,
            columns,
        })
    }

    pub fn dimension(&self) -> usize {
        self.columns[0].len()
    }

    pub fn get(&self, concept: usize, emotion: usize) -> f64 {
        self.columns[emotion][concept]
    }

    /// Worst simplex violation over columns: max of `|Σ p − 1|` and of the
    /// most negative entry's magnitude.
    pub fn constraint_violation(&self) -> f64 {
        self.columns
            .iter()
            .map(|c| {
                let sum_err = (c.iter().sum::<f64>() - 1.0).abs();
                let neg = c.iter().fold(0.0f64, |m, &x| m.max(-x));
                sum_err.max(neg)
            })
            .fold(0.0, f64::max)
    }

    /// Per-column L1 distance to another matrix of the same shape.
    pub fn column_l1_errors(&self, other: &EmotionProfileMatrix) -> Vec<f64> {
        self.columns
            .iter()
            .zip(&other.columns)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum())
            .collect()
    }
}

/// Sufficient statistics of the admixture least-squares objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmixtureProblem {
    /// `Σ_i e_i e_iᵀ`.
    pub gram: [[f64; K]; K],
    /// `cross[j][c] = Σ_i e_ij h_ic` (column `j` of B, stored contiguously).
    pub cross: Vec<Vec<f64>>,
    /// `Σ_i ‖h_i‖²`.
    pub const_term: f64,
    pub dimension: usize,
    pub n_records: usize,
}

struct Partial {
    gram: [[f64; K]; K],
    cross: Vec<Vec<f64>>,
    const_term: f64,
}

impl Partial {
    fn new(d: usize) -> Self {
        Partial {
            gram: [[0.0; K]; K],
            cross: vec![vec![0.0; d]; K],
            const_term: 0.0,
        }
    }

    fn add(&mut self, e: &[f64; K], h: &[f64]) {
        for j in 0..K {
            for k in 0..K {
                self.gram[j][k] += e[j] * e[k];
            }
            if e[j] != 0.0 {
                for (b, &x) in self.cross[j].iter_mut().zip(h) {
                    *b += e[j] * x;
                }
            }
        }
        self.const_term += h.iter().map(|x| x * x).sum::<f64>();
    }

    fn merge(&mut self, other: &Partial) {
        for j in 0..K {
            for k in 0..K {
                self.gram[j][k] += other.gram[j][k];
            }
            for (b, &x) in self.cross[j].iter_mut().zip(&other.cross[j]) {
                *b += x;
            }
        }
        self.const_term += other.const_term;
    }
}

impl AdmixtureProblem {
    /// Accumulate statistics from `(emotion weights, concept vector)` pairs.
    ///
    /// Records are summed in fixed-size chunks that are then merged in
    /// order, so the result only depends on the record sequence.
    pub fn from_rows(rows: &[([f64; K], Vec<f64>)]) -> Result<Self> {
        let d = rows.first().ok_or(Error::Empty("admixture records"))?.1.len();
        if d == 0 {
            return Err(Error::Empty("concept dimension"));
        }
        let mut total = Partial::new(d);
        for chunk in rows.chunks(ACCUMULATION_CHUNK) {
            let mut part = Partial::new(d);
            for (e, h) in chunk {
                if h.len() != d {
                    return Err(Error::DimensionMismatch {
                        context: "concept vector",
                        expected: d,
                        found: h.len(),
                    });
                }
                part.add(e, h);
            }
            total.merge(&part);
        }
        Ok(AdmixtureProblem {
            gram: total.gram,
            cross: total.cross,
            const_term: total.const_term,
            dimension: d,
            n_records: rows.len(),
        })
    }

    /// Objective value `Σ_i ‖h_i − Σ_j e_ij p_j‖²` from the statistics.
    pub fn objective(&self, p: &EmotionProfileMatrix) -> f64 {
        self.objective_columns(&p.columns)
    }

    fn objective_columns(&self, cols: &[Vec<f64>]) -> f64 {
        let mut quad = 0.0;
        for j in 0..K {
            for k in j..K {
                let g = self.gram[j][k];
                if g == 0.0 {
                    continue;
                }
                let dot: f64 = cols[j].iter().zip(&cols[k]).map(|(a, b)| a * b).sum();
                quad += if j == k { g * dot } else { 2.0 * g * dot };
            }
        }
        let linear: f64 = (0..K)
            .map(|j| self.cross[j].iter().zip(&cols[j]).map(|(b, p)| b * p).sum::<f64>())
            .sum();
        quad - 2.0 * linear + self.const_term
    }

    /// Gradient of the objective, block `j` = `2 (Σ_k G[j][k] p_k − B[:, j])`.
    pub fn gradient(&self, p: &EmotionProfileMatrix) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.dimension]; K];
        self.gradient_into(&p.columns, &mut out);
        out
    }

    fn gradient_into(&self, cols: &[Vec<f64>], out: &mut [Vec<f64>]) {
        for j in 0..K {
            let g = &mut out[j];
            for (gc, &b) in g.iter_mut().zip(&self.cross[j]) {
                *gc = -b;
            }
            for k in 0..K {
                let w = self.gram[j][k];
                if w != 0.0 {
                    for (gc, &x) in g.iter_mut().zip(&cols[k]) {
                        *gc += w * x;
                    }
                }
            }
            for gc in g.iter_mut() {
                *gc *= 2.0;
            }
        }
    }

    /// Lipschitz constant of the gradient: `2 λ_max(G)`.
    pub fn lipschitz(&self) -> f64 {
        let m = nalgebra::SMatrix::<f64, K, K>::from_fn(|i, j| self.gram[i][j]);
        2.0 * m.symmetric_eigenvalues().max().max(0.0)
    }

    /// Per-block KKT residual of a feasible point.
    ///
    /// On the support of `p_j` the gradient must be constant (`λ_j`), and
    /// off the support it must be at least `λ_j`. Returns the largest
    /// violation over blocks of either condition, in gradient units.
    pub fn kkt_residual(&self, p: &EmotionProfileMatrix) -> f64 {
        let grad = self.gradient(p);
        grad.iter()
            .zip(&p.columns)
            .map(|(g, col)| block_kkt(g, col))
            .fold(0.0, f64::max)
    }
}

fn block_kkt(grad: &[f64], col: &[f64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (&g, &x) in grad.iter().zip(col) {
        if x > 0.0 {
            lo = lo.min(g);
            hi = hi.max(g);
        }
    }
    let spread = hi - lo;
    let off = grad
        .iter()
        .zip(col)
        .filter(|(_, &x)| x <= 0.0)
        .map(|(&g, _)| (hi - g).max(0.0))
        .fold(0.0, f64::max);
    spread.max(off)
}

/// Build the problem from a dataset with distribution labels.
///
/// Concept vectors of `family` are passed through `filter` (select and
/// renormalize) before accumulation.
pub fn build_problem(ds: &Dataset, family: FamilyTag, filter: &ConceptFilter) -> Result<AdmixtureProblem> {
    if ds.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let rows = ds
        .records()
        .iter()
        .map(|r| {
            let e = *r.distribution()?.probs();
            let h = filter.apply(r.family(family)?)?;
            Ok((e, h))
        })
        .collect::<Result<Vec<_>>>()?;
    AdmixtureProblem::from_rows(&rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stationarity tolerance on `‖P − Π(P − ∇f/L)‖_∞`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 50_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub final_objective: f64,
    /// Max over columns of `|Σ p − 1|` and of negative-entry magnitude.
    pub constraint_violation: f64,
    /// Final projected-gradient step length (the stopping quantity).
    pub stationarity: f64,
    pub kkt_residual: f64,
    pub restarts: usize,
    pub converged: bool,
    /// Objective after every accepted iterate, starting with the initial point.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

/// Minimize the admixture objective over seven simplices.
///
/// Accelerated projected gradient with step `1/L`, `L = 2 λ_max(G)` (exact
/// because the Hessian is `2 G ⊗ I`). When an accelerated step would raise
/// the objective the momentum is reset and a plain projected-gradient step
/// from the current iterate is taken instead, so accepted objectives never
/// increase. All columns start uniform; a class with no weight in `G` keeps
/// its uniform column.
pub fn solve_admixture(
    prob: &AdmixtureProblem,
    opts: SolverOptions,
) -> Result<(EmotionProfileMatrix, SolverReport)> {
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidParameter(
            "solver needs tol > 0 and max_iter >= 1".into(),
        ));
    }
    let d = prob.dimension;
    let lipschitz = prob.lipschitz();
    let mut x = EmotionProfileMatrix::uniform(d);

    let mut scratch = Vec::with_capacity(d);
    let mut grad = vec![vec![0.0; d]; K];
    let mut fx = prob.objective(&x);
    let mut trace = vec![fx];

    if lipschitz <= 0.0 {
        let report = finish(prob, &x, 0, 0.0, 0, true, trace);
        return Ok((x, report));
    }
    let step = 1.0 / lipschitz;

    let mut y = x.columns.clone();
    let mut z = x.columns.clone();
    let mut momentum = 1.0f64;
    let mut restarts = 0;
    let mut stationarity = f64::INFINITY;
    let mut iterations = 0;

    // blocks with no weight in G have zero gradient and stay where they start
    let active: [bool; K] = core::array::from_fn(|j| prob.gram[j][j] > 0.0);
    let pg_step = |from: &[Vec<f64>], grad: &mut [Vec<f64>], to: &mut [Vec<f64>], scratch: &mut Vec<f64>| {
        prob.gradient_into(from, grad);
        for j in 0..K {
            if !active[j] {
                to[j].copy_from_slice(&from[j]);
                continue;
            }
            for ((t, &f), &g) in to[j].iter_mut().zip(&from[j]).zip(grad[j].iter()) {
                *t = f - step * g;
            }
            project_simplex_in_place(&mut to[j], scratch);
        }
    };

    while iterations < opts.max_iter {
        iterations += 1;

        pg_step(&y, &mut grad, &mut z, &mut scratch);
        let mut fz = prob.objective_columns(&z);
        if fz > fx {
            restarts += 1;
            momentum = 1.0;
            pg_step(&x.columns, &mut grad, &mut z, &mut scratch);
            fz = prob.objective_columns(&z);
            if fz > fx {
                // rounding-level increase from a stationary point
                stationarity = max_abs_diff(&z, &x.columns);
                if stationarity <= opts.tol {
                    break;
                }
                y.clone_from(&x.columns);
                continue;
            }
        }

        let next_momentum = (1.0 + libm::sqrt(1.0 + 4.0 * momentum * momentum)) / 2.0;
        let beta = (momentum - 1.0) / next_momentum;
        for j in 0..K {
            for ((yc, &zc), &xc) in y[j].iter_mut().zip(&z[j]).zip(&x.columns[j]) {
                *yc = zc + beta * (zc - xc);
            }
        }
        core::mem::swap(&mut x.columns, &mut z);
        momentum = next_momentum;
        fx = fz;
        trace.push(fx);

        // stationarity of the accepted iterate
        pg_step(&x.columns, &mut grad, &mut z, &mut scratch);
        stationarity = max_abs_diff(&z, &x.columns);
        if stationarity <= opts.tol {
            break;
        }
    }

    let converged = stationarity <= opts.tol;
    let report = finish(prob, &x, iterations, stationarity, restarts, converged, trace);
    Ok((x, report))
}

fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(ca, cb)| ca.iter().zip(cb).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

fn finish(
    prob: &AdmixtureProblem,
    x: &EmotionProfileMatrix,
    iterations: usize,
    stationarity: f64,
    restarts: usize,
    converged: bool,
    objective_trace: Vec<f64>,
) -> SolverReport {
    SolverReport {
        iterations,
        final_objective: prob.objective(x),
        constraint_violation: x.constraint_violation(),
        stationarity,
        kkt_residual: prob.kkt_residual(x),
        restarts,
        converged,
        objective_trace,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopConcepts {
    /// Per emotion class: `(concept index, weight)` in decreasing weight.
    pub per_class: Vec<Vec<(usize, f64)>>,
    /// Union of all per-class indices, ascending.
    pub union: Vec<usize>,
}

/// The `k` heaviest concepts of each profile (ties to the lower index) and
/// their union.
pub fn top_concepts(p: &EmotionProfileMatrix, k: usize) -> Result<TopConcepts> {
    let d = p.dimension();
    if k == 0 || k > d {
        return Err(Error::InvalidParameter(alloc::format!(
            "top-k must lie in 1..={d}, got {k}"
        )));
    }
    let mut union = alloc::collections::BTreeSet::new();
    let per_class = p
        .columns
        .iter()
        .map(|col| {
            let mut idx: Vec<usize> = (0..d).collect();
            idx.sort_by(|&a, &b| col[b].total_cmp(&col[a]).then(a.cmp(&b)));
            idx.truncate(k);
            union.extend(idx.iter().copied());
            idx.into_iter().map(|i| (i, col[i])).collect()
        })
        .collect();
    Ok(TopConcepts {
        per_class,
        union: union.into_iter().collect(),
    })
}
