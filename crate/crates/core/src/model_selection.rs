//! k-fold cross-validation, `(C, γ)` grid search and training-set
//! diagnostics.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::runner::Runner;
use crate::seed;
use crate::svm::kernel::SubsetRbf;
use crate::svm::{solve_svc_dual, solve_svr_dual, KernelParams, PairwiseDistances, SmoOptions, SvcModel, SvrModel};
use crate::{Error, Result};

pub const DEFAULT_FOLDS: usize = 5;

/// Candidate values for `C` and `γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct ParamGrid {
    c_values: Vec<f64>,
    gamma_values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    c_values: Vec<f64>,
    gamma_values: Vec<f64>,
}

impl TryFrom<RawGrid> for ParamGrid {
    type Error = Error;
    fn try_from(raw: RawGrid) -> Result<Self> {
        ParamGrid::new(raw.c_values, raw.gamma_values)
    }
}

impl From<ParamGrid> for RawGrid {
    fn from(g: ParamGrid) -> Self {
        RawGrid {
            c_values: g.c_values,
            gamma_values: g.gamma_values,
        }
    }
}

fn check_axis(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidParameter(format!("{name} grid is empty")));
    }
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter(format!("{name} grid values must be positive and finite")));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!("{name} grid must be strictly ascending")));
    }
    Ok(())
}

impl ParamGrid {
    pub fn new(c_values: Vec<f64>, gamma_values: Vec<f64>) -> Result<Self> {
        check_axis("C", &c_values)?;
        check_axis("gamma", &gamma_values)?;
        Ok(ParamGrid { c_values, gamma_values })
    }

    /// Powers of two: `C ∈ {2⁻⁵, 2⁻³, …, 2¹⁵}`, `γ ∈ {2⁻¹⁵, 2⁻¹³, …, 2³}`.
    pub fn powers_of_two(c_exponents: (i32, i32), gamma_exponents: (i32, i32), step: usize) -> Result<Self> {
        let axis = |(lo, hi): (i32, i32)| -> Vec<f64> { (lo..=hi).step_by(step.max(1)).map(|e| libm::exp2(e as f64)).collect() };
        ParamGrid::new(axis(c_exponents), axis(gamma_exponents))
    }

    pub fn c_values(&self) -> &[f64] {
        &self.c_values
    }

    pub fn gamma_values(&self) -> &[f64] {
        &self.gamma_values
    }

    pub fn len(&self) -> usize {
        self.c_values.len() * self.gamma_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cells in `C`-major order.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.c_values
            .iter()
            .flat_map(|&c| self.gamma_values.iter().map(move |&g| (c, g)))
            .collect()
    }
}

impl Default for ParamGrid {
    fn default() -> Self {
        ParamGrid::powers_of_two((-5, 15), (-15, 3), 2).expect("default grid is valid")
    }
}

/// Test-index lists of a k-fold partition; each fold trains on the complement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Folds {
    n: usize,
    test: Vec<Vec<usize>>,
}

impl Folds {
    pub fn from_test_sets(n: usize, test: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        for &i in test.iter().flatten() {
            if i >= n || seen[i] {
                return Err(Error::InvalidParameter(format!("fold index {i} out of range or repeated")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) || test.len() < 2 {
            return Err(Error::InvalidParameter("folds must partition 0..n into at least 2 parts".into()));
        }
        Ok(Folds { n, test })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.test.len()
    }

    pub fn test(&self, fold: usize) -> &[usize] {
        &self.test[fold]
    }

    pub fn train(&self, fold: usize) -> Vec<usize> {
        let mut held = vec![false; self.n];
        for &i in &self.test[fold] {
            held[i] = true;
        }
        (0..self.n).filter(|&i| !held[i]).collect()
    }
}

/// Deterministic k-fold partition of `0..n`.
///
/// Members of each stratum are shuffled, strata are laid end to end in
/// ascending label order, and positions are dealt round-robin. Fold sizes and
/// per-stratum counts therefore differ by at most one across folds.
pub fn kfold_indices(n: usize, k: usize, strata: Option<&[usize]>, seed: u64) -> Result<Folds> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k = {k} must be at least 2")));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds the {n} available rows")));
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    match strata {
        Some(s) => {
            if s.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "fold strata",
                    expected: n,
                    found: s.len(),
                });
            }
            for (i, &label) in s.iter().enumerate() {
                groups.entry(label).or_default().push(i);
            }
        }
        None => {
            groups.insert(0, (0..n).collect());
        }
    }
    let mut rng = seed::substream(seed, seed::FOLD_STREAM);
    let mut test = vec![Vec::new(); k];
    let mut position = 0usize;
    for members in groups.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            test[position % k].push(i);
            position += 1;
        }
    }
    for fold in &mut test {
        fold.sort_unstable();
    }
    Ok(Folds { n, test })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CvObjective {
    /// Minimize mean held-out squared error.
    Mse,
    /// Maximize held-out accuracy.
    Accuracy,
}

impl CvObjective {
    pub fn column(self) -> &'static str {
        match self {
            CvObjective::Mse => "mse",
            CvObjective::Accuracy => "accuracy",
        }
    }

    fn better(self, a: f64, b: f64) -> bool {
        match self {
            CvObjective::Mse => a < b,
            CvObjective::Accuracy => a > b,
        }
    }
}

/// Cross-validation outcome of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub c: f64,
    pub gamma: f64,
    /// Held-out score per fold, in fold order.
    pub fold_scores: Vec<f64>,
    pub mean_score: f64,
    /// Training TPR per fold (classification only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fold_train_tpr: Vec<f64>,
    pub non_converged_folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub objective: CvObjective,
    pub best_params: KernelParams,
    /// Mean held-out score of the selected cell (the CV MSE for regression).
    pub best_score: f64,
    pub cells: Vec<CellResult>,
    /// Per-fold `(positives, negatives)` after balancing (classification only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fold_balance: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl CvResult {
    pub fn best_cell(&self) -> &CellResult {
        self.cells
            .iter()
            .find(|c| c.c == self.best_params.c && c.gamma == self.best_params.gamma)
            .expect("selected cell is in the table")
    }
}

/// Mean of the values summed in ascending order, so the result does not
/// depend on the order the values were produced in.
fn order_free_mean(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().sum::<f64>() / sorted.len() as f64
}

/// Index of the best cell: best score, then smaller `C`, then smaller `γ`.
pub fn select_best(cells: &[CellResult], objective: CvObjective) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, cell) in cells.iter().enumerate() {
        let take = match best {
            None => true,
            Some(b) => {
                let cur = &cells[b];
                if objective.better(cell.mean_score, cur.mean_score) {
                    true
                } else if cell.mean_score == cur.mean_score {
                    (cell.c, cell.gamma) < (cur.c, cur.gamma)
                } else {
                    false
                }
            }
        };
        if take {
            best = Some(i);
        }
    }
    best
}

fn check_rows<R: AsRef<[f64]>>(x: &[R], n: usize, folds: &Folds) -> Result<()> {
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            context: "grid search targets",
            expected: x.len(),
            found: n,
        });
    }
    if folds.n() != n {
        return Err(Error::DimensionMismatch {
            context: "fold partition",
            expected: n,
            found: folds.n(),
        });
    }
    Ok(())
}

fn finish(
    objective: CvObjective,
    epsilon: f64,
    cells: Vec<CellResult>,
    fold_balance: Vec<(usize, usize)>,
) -> Result<CvResult> {
    let best = select_best(&cells, objective).ok_or(Error::Empty("parameter grid"))?;
    let warnings = cells
        .iter()
        .filter(|c| c.non_converged_folds > 0)
        .map(|c| {
            format!(
                "C={} gamma={}: {} fold(s) hit the iteration cap",
                c.c, c.gamma, c.non_converged_folds
            )
        })
        .collect();
    Ok(CvResult {
        objective,
        best_params: KernelParams::new(cells[best].c, cells[best].gamma, epsilon)?,
        best_score: cells[best].mean_score,
        cells,
        fold_balance,
        warnings,
    })
}

/// Grid search for ε-SVR minimizing mean held-out MSE.
pub fn grid_search_svr<R: AsRef<[f64]>, X: Runner>(
    x: &[R],
    y: &[f64],
    grid: &ParamGrid,
    folds: &Folds,
    epsilon: f64,
    opts: &SmoOptions,
    runner: &X,
) -> Result<CvResult> {
    check_rows(x, y.len(), folds)?;
    let dist = PairwiseDistances::new(x);
    grid_search_svr_on(&dist, y, grid, folds, epsilon, opts, runner)
}

/// [`grid_search_svr`] over precomputed squared distances.
pub fn grid_search_svr_on<X: Runner>(
    dist: &PairwiseDistances,
    y: &[f64],
    grid: &ParamGrid,
    folds: &Folds,
    epsilon: f64,
    opts: &SmoOptions,
    runner: &X,
) -> Result<CvResult> {
    if dist.len() != y.len() || folds.n() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "grid search targets",
            expected: dist.len(),
            found: y.len(),
        });
    }
    KernelParams::new(1.0, 1.0, epsilon)?;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..folds.k()).map(|f| (folds.train(f), folds.test(f).to_vec())).collect();
    let jobs: Vec<(f64, f64, usize)> = grid
        .cells()
        .into_iter()
        .flat_map(|(c, g)| (0..folds.k()).map(move |f| (c, g, f)))
        .collect();
    let outcomes = runner.map(&jobs, |&(c, gamma, f)| -> Result<(f64, bool)> {
        let (train, test) = &splits[f];
        let params = KernelParams::new(c, gamma, epsilon)?;
        let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let fit = solve_svr_dual(&dist.rbf(train, gamma), &y_train, &params, opts)?;
        let sse: f64 = test
            .iter()
            .map(|&j| {
                let pred = fit.predict_with(train.iter().map(|&t| libm::exp(-gamma * dist.get(t, j))));
                (pred - y[j]) * (pred - y[j])
            })
            .sum();
        Ok((sse / test.len() as f64, fit.converged))
    });
    let cells = collect_cells(grid, folds.k(), outcomes.into_iter().map(|r| r.map(|(s, ok)| (s, None, ok))))?;
    finish(CvObjective::Mse, epsilon, cells, Vec::new())
}

fn collect_cells(
    grid: &ParamGrid,
    k: usize,
    outcomes: impl Iterator<Item = Result<(f64, Option<f64>, bool)>>,
) -> Result<Vec<CellResult>> {
    let outcomes: Vec<(f64, Option<f64>, bool)> = outcomes.collect::<Result<_>>()?;
    Ok(grid
        .cells()
        .into_iter()
        .zip(outcomes.chunks(k))
        .map(|((c, gamma), chunk)| {
            let fold_scores: Vec<f64> = chunk.iter().map(|o| o.0).collect();
            CellResult {
                c,
                gamma,
                mean_score: order_free_mean(&fold_scores),
                fold_scores,
                fold_train_tpr: chunk.iter().filter_map(|o| o.1).collect(),
                non_converged_folds: chunk.iter().filter(|o| !o.2).count(),
            }
        })
        .collect())
}

/// Indices of `rows` with positives cycled until both classes have equal
/// counts.
///
/// `rows` must be given in the deterministic order replication should follow
/// (ascending id). Originals keep their positions; copies are appended in
/// cycling order `pos[k mod p]`. If positives outnumber negatives the
/// negatives are cycled instead.
pub fn balance_by_replication(rows: &[usize], y: &[f64]) -> Result<Vec<usize>> {
    let pos: Vec<usize> = rows.iter().copied().filter(|&i| y[i] > 0.0).collect();
    let neg: Vec<usize> = rows.iter().copied().filter(|&i| y[i] <= 0.0).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass);
    }
    let (minority, target) = if pos.len() <= neg.len() { (&pos, neg.len()) } else { (&neg, pos.len()) };
    let mut out = rows.to_vec();
    out.extend((minority.len()..target).map(|k| minority[k % minority.len()]));
    Ok(out)
}

fn class_counts(rows: &[usize], y: &[f64]) -> (usize, usize) {
    let p = rows.iter().filter(|&&i| y[i] > 0.0).count();
    (p, rows.len() - p)
}

/// Training TPR of a fit given by per-row coefficients over `train` rows.
fn fold_train_tpr(
    dist: &PairwiseDistances,
    train: &[usize],
    coef: &[f64],
    bias: f64,
    gamma: f64,
    y: &[f64],
) -> f64 {
    let mut pos = 0usize;
    let mut hit = 0usize;
    let mut seen = vec![false; dist.len()];
    for &i in train {
        if y[i] <= 0.0 || seen[i] {
            continue;
        }
        seen[i] = true;
        pos += 1;
        let d: f64 = train
            .iter()
            .zip(coef)
            .filter(|(_, c)| **c != 0.0)
            .map(|(&t, c)| c * libm::exp(-gamma * dist.get(t, i)))
            .sum::<f64>()
            + bias;
        if d >= 0.0 {
            hit += 1;
        }
    }
    if pos == 0 {
        0.0
    } else {
        hit as f64 / pos as f64
    }
}

/// Grid search for C-SVC maximizing held-out accuracy.
///
/// Row indices are taken as the replication order; the minority class of
/// each training fold is cycled to balance before fitting, and held-out rows
/// are never replicated.
pub fn grid_search_svc<R: AsRef<[f64]>, X: Runner>(
    x: &[R],
    y: &[f64],
    grid: &ParamGrid,
    folds: &Folds,
    opts: &SmoOptions,
    runner: &X,
) -> Result<CvResult> {
    check_rows(x, y.len(), folds)?;
    let dist = PairwiseDistances::new(x);
    grid_search_svc_on(&dist, y, grid, folds, opts, runner)
}

pub fn grid_search_svc_on<X: Runner>(
    dist: &PairwiseDistances,
    y: &[f64],
    grid: &ParamGrid,
    folds: &Folds,
    opts: &SmoOptions,
    runner: &X,
) -> Result<CvResult> {
    if dist.len() != y.len() || folds.n() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "grid search targets",
            expected: dist.len(),
            found: y.len(),
        });
    }
    let mut splits = Vec::with_capacity(folds.k());
    for f in 0..folds.k() {
        let train = balance_by_replication(&folds.train(f), y)?;
        splits.push((train, folds.test(f).to_vec()));
    }
    let fold_balance = splits.iter().map(|(t, _)| class_counts(t, y)).collect();
    let jobs: Vec<(f64, f64, usize)> = grid
        .cells()
        .into_iter()
        .flat_map(|(c, g)| (0..folds.k()).map(move |f| (c, g, f)))
        .collect();
    let outcomes = runner.map(&jobs, |&(c, gamma, f)| -> Result<(f64, Option<f64>, bool)> {
        let (train, test) = &splits[f];
        let params = KernelParams::new(c, gamma, 0.0)?;
        let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let kernel: SubsetRbf<'_> = dist.rbf(train, gamma);
        let fit = solve_svc_dual(&kernel, &y_train, &params, opts)?;
        let hits = test
            .iter()
            .filter(|&&j| {
                let d = fit.decision_with(train.iter().map(|&t| libm::exp(-gamma * dist.get(t, j))));
                (d >= 0.0) == (y[j] > 0.0)
            })
            .count();
        let tpr = fold_train_tpr(dist, train, &fit.coef, fit.bias, gamma, y);
        Ok((hits as f64 / test.len() as f64, Some(tpr), fit.converged))
    });
    let cells = collect_cells(grid, folds.k(), outcomes.into_iter())?;
    finish(CvObjective::Accuracy, 0.0, cells, fold_balance)
}

/// Mean squared prediction error of `model` over the given rows.
pub fn training_mse<R: AsRef<[f64]>>(model: &SvrModel, x: &[R], y: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Empty("training rows"));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "training targets",
            expected: x.len(),
            found: y.len(),
        });
    }
    let mut sse = 0.0;
    for (row, &t) in x.iter().zip(y) {
        let e = model.predict(row.as_ref())? - t;
        sse += e * e;
    }
    Ok(sse / x.len() as f64)
}

/// Fraction of the positive rows (`y = +1`) that `model` labels positive.
pub fn training_tpr<R: AsRef<[f64]>>(model: &SvcModel, x: &[R], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "training labels",
            expected: x.len(),
            found: y.len(),
        });
    }
    let mut pos = 0usize;
    let mut hit = 0usize;
    for (row, &t) in x.iter().zip(y) {
        if t > 0.0 {
            pos += 1;
            if model.predict(row.as_ref())?.0 > 0 {
                hit += 1;
            }
        }
    }
    if pos == 0 {
        return Err(Error::InvalidParameter("no positive examples".into()));
    }
    Ok(hit as f64 / pos as f64)
}

/// How the selection score of a 1-vs-all classifier is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TprStrategy {
    /// Mean training TPR over the cross-validation training runs at the
    /// selected parameters.
    #[default]
    FoldAverage,
    /// Training TPR of the model refit on the full training set.
    FullTrain,
}

impl core::str::FromStr for TprStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fold-average" => Ok(TprStrategy::FoldAverage),
            "full-train" => Ok(TprStrategy::FullTrain),
            other => Err(Error::InvalidParameter(format!("unknown TPR strategy {other:?}"))),
        }
    }
}
