//! The hybrid ensemble: one kernel machine per target, each trained on the
//! feature-family subset that fits its training data best.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{
    ConceptFilter, Dataset, FamilyTag, FeatureRecord, FeatureSubset, LabelKind, LlfScaler, DEFAULT_DETECT_THRESHOLD,
    DEFAULT_FREQUENCY_THRESHOLD,
};
use crate::emotion::{dominant_class, Emotion, EmotionDistribution, VaPair, NUM_EMOTIONS};
use crate::model_selection::{
    balance_by_replication, grid_search_svc_on, grid_search_svr_on, kfold_indices, training_mse, training_tpr,
    CvResult, Folds, ParamGrid, TprStrategy, DEFAULT_FOLDS,
};
use crate::runner::Runner;
use crate::svm::{solve_svc_dual, solve_svr_dual, KernelParams, PairwiseDistances, SmoOptions, SvcFit, SvcModel, SvrModel};
use crate::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 0.01;

/// The seven non-empty family subsets: L, I, P, LI, LP, IP, LIP.
///
/// Sorted by size, so "first in this order" also means "fewest families".
pub fn enumerate_subsets() -> [FeatureSubset; 7] {
    use FamilyTag::{ImageNet as I, Llf as L, Places as P};
    let sets: [&[FamilyTag]; 7] = [&[L], &[I], &[P], &[L, I], &[L, P], &[I, P], &[L, I, P]];
    sets.map(|s| FeatureSubset::new(s).expect("non-empty"))
}

/// Everything that controls training, kept with the trained ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub grid: ParamGrid,
    pub epsilon: f64,
    pub folds: usize,
    pub seed: u64,
    pub smo: SmoOptions,
    pub detect_threshold: f64,
    pub frequency_threshold: f64,
    pub tpr_strategy: TprStrategy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            grid: ParamGrid::default(),
            epsilon: DEFAULT_EPSILON,
            folds: DEFAULT_FOLDS,
            seed: 0,
            smo: SmoOptions::default(),
            detect_threshold: DEFAULT_DETECT_THRESHOLD,
            frequency_threshold: DEFAULT_FREQUENCY_THRESHOLD,
            tpr_strategy: TprStrategy::default(),
        }
    }
}

/// Training-set statistics used to transform every family before assembly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llf_scaler: Option<LlfScaler>,
    pub concept_filters: BTreeMap<FamilyTag, ConceptFilter>,
}

impl Preprocessing {
    /// Fit the LLF scaler and one concept filter per concept family present.
    pub fn fit(train: &Dataset, detect_threshold: f64, frequency_threshold: f64) -> Result<Self> {
        let mut llf_scaler = None;
        let mut concept_filters = BTreeMap::new();
        for fam in train.families() {
            let rows = train.family_rows(fam.tag)?;
            if fam.tag.is_concept() {
                concept_filters.insert(fam.tag, ConceptFilter::fit(&rows, detect_threshold, frequency_threshold)?);
            } else {
                llf_scaler = Some(LlfScaler::fit(&rows)?);
            }
        }
        Ok(Preprocessing {
            llf_scaler,
            concept_filters,
        })
    }

    pub fn has(&self, tag: FamilyTag) -> bool {
        match tag {
            FamilyTag::Llf => self.llf_scaler.is_some(),
            _ => self.concept_filters.contains_key(&tag),
        }
    }

    /// Subsets whose families were all fitted, in enumeration order.
    pub fn available_subsets(&self) -> Vec<FeatureSubset> {
        enumerate_subsets()
            .into_iter()
            .filter(|s| s.families().all(|t| self.has(t)))
            .collect()
    }

    pub fn transform(&self, record: &FeatureRecord, tag: FamilyTag) -> Result<Vec<f64>> {
        let raw = record.family(tag)?;
        let missing = || Error::MissingFamily {
            id: record.id.clone(),
            family: tag,
        };
        match tag {
            FamilyTag::Llf => self.llf_scaler.as_ref().ok_or_else(missing)?.apply(raw),
            _ => self.concept_filters.get(&tag).ok_or_else(missing)?.apply(raw),
        }
    }
}

/// Preprocessed families of `subset`, concatenated LLF, ImageNet, Places.
pub fn assemble_features(record: &FeatureRecord, subset: FeatureSubset, prep: &Preprocessing) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for tag in subset.families() {
        out.extend(prep.transform(record, tag)?);
    }
    Ok(out)
}

/// Clip negatives to zero and normalize; an all-nonpositive vector gives the
/// uniform distribution. Positive infinities share the mass equally.
pub fn clip_normalize(raw: &[f64]) -> Result<EmotionDistribution> {
    if raw.len() != NUM_EMOTIONS {
        return Err(Error::DimensionMismatch {
            context: "raw regressor outputs",
            expected: NUM_EMOTIONS,
            found: raw.len(),
        });
    }
    let mut v = [0.0; NUM_EMOTIONS];
    if raw.iter().any(|x| *x == f64::INFINITY) {
        for (o, x) in v.iter_mut().zip(raw) {
            *o = if *x == f64::INFINITY { 1.0 } else { 0.0 };
        }
    } else {
        for (o, x) in v.iter_mut().zip(raw) {
            // NaN compares false and is clipped with the negatives
            *o = if *x > 0.0 { *x } else { 0.0 };
        }
    }
    let top = v.iter().copied().fold(0.0, f64::max);
    if top <= 0.0 {
        return Ok(EmotionDistribution::uniform());
    }
    // scaling by the maximum first keeps the sum finite for huge inputs
    for x in &mut v {
        *x /= top;
    }
    let total: f64 = v.iter().sum();
    for x in &mut v {
        *x /= total;
    }
    EmotionDistribution::new(v)
}

/// Training diagnostics of one (target, subset) job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobReport {
    pub target: String,
    pub subset: FeatureSubset,
    pub cv: CvResult,
    /// Training MSE (regression) or selection TPR score (classification).
    pub training_score: f64,
    pub refit_converged: bool,
    /// `(positives, negatives)` of the full-training refit after balancing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refit_balance: Option<(usize, usize)>,
}

/// Selection scores per target (rows) and subset (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTable {
    /// `training_mse` (lower wins) or `training_tpr` (higher wins).
    pub criterion: String,
    pub targets: Vec<String>,
    pub subsets: Vec<FeatureSubset>,
    pub scores: Vec<Vec<f64>>,
    /// Column index chosen for each row.
    pub selected: Vec<usize>,
}

impl SelectionTable {
    fn build(criterion: &str, targets: Vec<String>, subsets: Vec<FeatureSubset>, scores: Vec<Vec<f64>>) -> Self {
        let lower_wins = criterion == "training_mse";
        let selected = scores
            .iter()
            .map(|row| {
                let mut best = 0;
                for (j, &s) in row.iter().enumerate().skip(1) {
                    let better = if lower_wins { s < row[best] } else { s > row[best] };
                    if better {
                        best = j;
                    }
                }
                best
            })
            .collect();
        SelectionTable {
            criterion: criterion.to_string(),
            targets,
            subsets,
            scores,
            selected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorEntry {
    pub target: String,
    pub subset: FeatureSubset,
    pub params: KernelParams,
    pub training_mse: f64,
    pub model: SvrModel,
}

impl RegressorEntry {
    pub fn predict(&self, record: &FeatureRecord, prep: &Preprocessing) -> Result<f64> {
        self.model.predict(&assemble_features(record, self.subset, prep)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridEnsemble {
    pub config: TrainConfig,
    pub preprocessing: Preprocessing,
    /// One entry per emotion class, in class order.
    pub classes: Vec<RegressorEntry>,
    pub table: SelectionTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaEnsemble {
    pub config: TrainConfig,
    pub preprocessing: Preprocessing,
    pub valence: RegressorEntry,
    pub arousal: RegressorEntry,
    pub table: SelectionTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierEntry {
    pub class: usize,
    pub subset: FeatureSubset,
    pub params: KernelParams,
    /// Training TPR under the configured strategy.
    pub score: f64,
    pub model: SvcModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtphotoEnsemble {
    pub config: TrainConfig,
    pub preprocessing: Preprocessing,
    /// One entry per class present in training, by ascending class index.
    pub classes: Vec<ClassifierEntry>,
    pub table: SelectionTable,
}

/// A trained ensemble plus the per-job reports behind its selection.
#[derive(Debug, Clone)]
pub struct Trained<E> {
    pub ensemble: E,
    pub reports: Vec<JobReport>,
}

/// Assembled rows and squared distances for every available subset.
struct SubsetData {
    subset: FeatureSubset,
    rows: Vec<Vec<f64>>,
    dist: PairwiseDistances,
}

fn subset_data<X: Runner>(records: &[&FeatureRecord], prep: &Preprocessing, runner: &X) -> Result<Vec<SubsetData>> {
    let subsets = prep.available_subsets();
    if subsets.is_empty() {
        return Err(Error::InvalidParameter("dataset declares no feature family".into()));
    }
    runner
        .map(&subsets, |&subset| -> Result<SubsetData> {
            let rows = records
                .iter()
                .map(|r| assemble_features(r, subset, prep))
                .collect::<Result<Vec<_>>>()?;
            let dist = PairwiseDistances::new(&rows);
            Ok(SubsetData { subset, rows, dist })
        })
        .into_iter()
        .collect()
}

fn check_config(config: &TrainConfig) -> Result<()> {
    KernelParams::new(1.0, 1.0, config.epsilon)?;
    if config.folds < 2 {
        return Err(Error::InvalidParameter(format!("folds = {} must be at least 2", config.folds)));
    }
    Ok(())
}

/// Grid search, full-train refit and training MSE for every (target,
/// subset) pair; per target the subset with the lowest training MSE wins,
/// ties going to the earlier (smaller) subset.
fn select_regressors<X: Runner>(
    train: &Dataset,
    prep: &Preprocessing,
    targets: &[(String, Vec<f64>)],
    config: &TrainConfig,
    runner: &X,
) -> Result<(Vec<RegressorEntry>, SelectionTable, Vec<JobReport>)> {
    check_config(config)?;
    let records: Vec<&FeatureRecord> = train.records().iter().collect();
    let data = subset_data(&records, prep, runner)?;
    let folds = kfold_indices(records.len(), config.folds, Some(&train.strata()), config.seed)?;
    let all: Vec<usize> = (0..records.len()).collect();

    let jobs: Vec<(usize, usize)> = (0..targets.len())
        .flat_map(|t| (0..data.len()).map(move |s| (t, s)))
        .collect();
    let fitted = runner.map(&jobs, |&(t, s)| -> Result<(JobReport, RegressorEntry)> {
        let (name, y) = &targets[t];
        let d = &data[s];
        let cv = grid_search_svr_on(&d.dist, y, &config.grid, &folds, config.epsilon, &config.smo, runner)?;
        let params = cv.best_params;
        let fit = solve_svr_dual(&d.dist.rbf(&all, params.gamma), y, &params, &config.smo)?;
        let converged = fit.converged;
        let model = SvrModel::from_fit(&d.rows, d.rows[0].len(), params, fit).with_subset(d.subset);
        let mse = training_mse(&model, &d.rows, y)?;
        Ok((
            JobReport {
                target: name.clone(),
                subset: d.subset,
                cv,
                training_score: mse,
                refit_converged: converged,
                refit_balance: None,
            },
            RegressorEntry {
                target: name.clone(),
                subset: d.subset,
                params,
                training_mse: mse,
                model,
            },
        ))
    });
    let fitted: Vec<(JobReport, RegressorEntry)> = fitted.into_iter().collect::<Result<_>>()?;

    let scores: Vec<Vec<f64>> = fitted.chunks(data.len()).map(|row| row.iter().map(|(r, _)| r.training_score).collect()).collect();
    let table = SelectionTable::build(
        "training_mse",
        targets.iter().map(|(n, _)| n.clone()).collect(),
        data.iter().map(|d| d.subset).collect(),
        scores,
    );
    let mut entries = Vec::with_capacity(targets.len());
    let mut reports = Vec::with_capacity(fitted.len());
    for (t, row) in fitted.chunks(data.len()).enumerate() {
        entries.push(row[table.selected[t]].1.clone());
        reports.extend(row.iter().map(|(r, _)| r.clone()));
    }
    Ok((entries, table, reports))
}

fn fit_preprocessing(train: &Dataset, config: &TrainConfig) -> Result<Preprocessing> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    Preprocessing::fit(train, config.detect_threshold, config.frequency_threshold)
}

/// Per-class ε-SVRs on distribution labels.
pub fn build_hybrid<X: Runner>(train: &Dataset, config: &TrainConfig, runner: &X) -> Result<Trained<HybridEnsemble>> {
    if !train.label_kind().is_some_and(LabelKind::has_distribution) {
        return Err(Error::InvalidParameter("hybrid training needs distribution labels".into()));
    }
    let prep = fit_preprocessing(train, config)?;
    let targets: Vec<(String, Vec<f64>)> = Emotion::ALL
        .iter()
        .map(|e| {
            let y = train
                .records()
                .iter()
                .map(|r| r.distribution().map(|d| d.probs()[e.index()]))
                .collect::<Result<Vec<_>>>()?;
            Ok((e.name().to_string(), y))
        })
        .collect::<Result<_>>()?;
    let (classes, table, reports) = select_regressors(train, &prep, &targets, config, runner)?;
    Ok(Trained {
        ensemble: HybridEnsemble {
            config: config.clone(),
            preprocessing: prep,
            classes,
            table,
        },
        reports,
    })
}

impl HybridEnsemble {
    pub fn raw_outputs(&self, record: &FeatureRecord) -> Result<Vec<f64>> {
        self.classes.iter().map(|e| e.predict(record, &self.preprocessing)).collect()
    }
}

pub fn predict_distribution(ens: &HybridEnsemble, record: &FeatureRecord) -> Result<EmotionDistribution> {
    clip_normalize(&ens.raw_outputs(record)?)
}

/// Independent valence and arousal regressors.
pub fn build_va<X: Runner>(train: &Dataset, config: &TrainConfig, runner: &X) -> Result<Trained<VaEnsemble>> {
    if !train.label_kind().is_some_and(LabelKind::has_va) {
        return Err(Error::InvalidParameter("VA training needs valence/arousal labels".into()));
    }
    let prep = fit_preprocessing(train, config)?;
    let va: Vec<VaPair> = train.records().iter().map(FeatureRecord::va).collect::<Result<_>>()?;
    let targets = vec![
        ("valence".to_string(), va.iter().map(|p| p.valence).collect()),
        ("arousal".to_string(), va.iter().map(|p| p.arousal).collect()),
    ];
    let (mut entries, table, reports) = select_regressors(train, &prep, &targets, config, runner)?;
    let arousal = entries.pop().expect("two targets");
    let valence = entries.pop().expect("two targets");
    Ok(Trained {
        ensemble: VaEnsemble {
            config: config.clone(),
            preprocessing: prep,
            valence,
            arousal,
            table,
        },
        reports,
    })
}

pub fn predict_va(ens: &VaEnsemble, record: &FeatureRecord) -> Result<VaPair> {
    VaPair::new(
        ens.valence.predict(record, &ens.preprocessing)?,
        ens.arousal.predict(record, &ens.preprocessing)?,
    )
}

/// One-vs-all C-SVCs on hard labels with positive replication.
///
/// Records are processed in ascending id order, which fixes the replication
/// cycle. Per class the subset with the highest training TPR wins, ties
/// going to the earlier (smaller) subset.
pub fn build_artphoto<X: Runner>(train: &Dataset, config: &TrainConfig, runner: &X) -> Result<Trained<ArtphotoEnsemble>> {
    if train.label_kind() != Some(LabelKind::Hard) {
        return Err(Error::InvalidParameter("one-vs-all training needs hard class labels".into()));
    }
    check_config(config)?;
    let prep = fit_preprocessing(train, config)?;
    let mut records: Vec<&FeatureRecord> = train.records().iter().collect();
    records.sort_by(|a, b| a.id.cmp(&b.id));
    let labels: Vec<usize> = records.iter().map(|r| r.class()).collect::<Result<_>>()?;
    let classes: Vec<usize> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let data = subset_data(&records, &prep, runner)?;
    let folds: Folds = kfold_indices(records.len(), config.folds, Some(&labels), config.seed)?;
    let all: Vec<usize> = (0..records.len()).collect();

    let jobs: Vec<(usize, usize)> = classes
        .iter()
        .flat_map(|&c| (0..data.len()).map(move |s| (c, s)))
        .collect();
    let fitted = runner.map(&jobs, |&(class, s)| -> Result<(JobReport, ClassifierEntry)> {
        let d = &data[s];
        let y: Vec<f64> = labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
        let cv = grid_search_svc_on(&d.dist, &y, &config.grid, &folds, &config.smo, runner)?;
        let params = cv.best_params;
        let balanced = balance_by_replication(&all, &y)?;
        let y_bal: Vec<f64> = balanced.iter().map(|&i| y[i]).collect();
        let fit = solve_svc_dual(&d.dist.rbf(&balanced, params.gamma), &y_bal, &params, &config.smo)?;
        let n_pos = y_bal.iter().filter(|v| **v > 0.0).count();
        // copies of a row share its kernel column, so their coefficients add
        let mut coef = vec![0.0; records.len()];
        for (&i, c) in balanced.iter().zip(&fit.coef) {
            coef[i] += c;
        }
        let converged = fit.converged;
        let merged = SvcFit { coef, ..fit };
        let model = SvcModel::from_fit(&d.rows, d.rows[0].len(), params, merged).with_subset(d.subset);
        let score = match config.tpr_strategy {
            TprStrategy::FoldAverage => {
                let tprs = &cv.best_cell().fold_train_tpr;
                tprs.iter().sum::<f64>() / tprs.len() as f64
            }
            TprStrategy::FullTrain => training_tpr(&model, &d.rows, &y)?,
        };
        Ok((
            JobReport {
                target: format!("class_{class}"),
                subset: d.subset,
                cv,
                training_score: score,
                refit_converged: converged,
                refit_balance: Some((n_pos, y_bal.len() - n_pos)),
            },
            ClassifierEntry {
                class,
                subset: d.subset,
                params,
                score,
                model,
            },
        ))
    });
    let fitted: Vec<(JobReport, ClassifierEntry)> = fitted.into_iter().collect::<Result<_>>()?;
    let scores: Vec<Vec<f64>> = fitted.chunks(data.len()).map(|row| row.iter().map(|(r, _)| r.training_score).collect()).collect();
    let table = SelectionTable::build(
        "training_tpr",
        classes.iter().map(|c| format!("class_{c}")).collect(),
        data.iter().map(|d| d.subset).collect(),
        scores,
    );
    let mut entries = Vec::with_capacity(classes.len());
    let mut reports = Vec::with_capacity(fitted.len());
    for (t, row) in fitted.chunks(data.len()).enumerate() {
        entries.push(row[table.selected[t]].1.clone());
        reports.extend(row.iter().map(|(r, _)| r.clone()));
    }
    Ok(Trained {
        ensemble: ArtphotoEnsemble {
            config: config.clone(),
            preprocessing: prep,
            classes: entries,
            table,
        },
        reports,
    })
}

impl ArtphotoEnsemble {
    pub fn decision_values(&self, record: &FeatureRecord) -> Result<Vec<f64>> {
        self.classes
            .iter()
            .map(|e| e.model.decision_value(&assemble_features(record, e.subset, &self.preprocessing)?))
            .collect()
    }
}

/// Class with the largest decision value; ties go to the lowest class.
pub fn predict_artphoto(ens: &ArtphotoEnsemble, record: &FeatureRecord) -> Result<usize> {
    let values = ens.decision_values(record)?;
    Ok(ens.classes[dominant_class(&values)].class)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{record, FeatureFamily, Labels};
    use crate::runner::Sequential;
    use crate::synth::{synth_artphoto, synth_hybrid, ArtphotoSynthConfig, HybridSynthConfig};
    use proptest::prelude::*;

    fn small_config() -> TrainConfig {
        TrainConfig {
            grid: ParamGrid::new(vec![1.0, 8.0], vec![0.05, 0.5]).unwrap(),
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn seven_distinct_subsets() {
        let s = enumerate_subsets();
        assert_eq!(s.len(), 7);
        let unique: BTreeSet<String> = s.iter().map(|x| x.to_string()).collect();
        assert_eq!(unique.len(), 7);
        assert!(s.iter().all(|x| !x.is_empty()));
        assert!(s.windows(2).all(|w| w[0].len() <= w[1].len()));
    }

    #[test]
    fn clip_normalize_examples() {
        let d = clip_normalize(&[0.2, -0.1, 0.3, 0.0, 0.0, 0.0, 0.5]).unwrap();
        let expect = [0.2, 0.0, 0.3, 0.0, 0.0, 0.0, 0.5];
        assert!(d.probs().iter().zip(expect).all(|(a, b)| (a - b).abs() < 1e-15));
        assert_eq!(clip_normalize(&[-1.0; 7]).unwrap(), EmotionDistribution::uniform());
        assert_eq!(clip_normalize(&[0.0; 7]).unwrap(), EmotionDistribution::uniform());
        let d = clip_normalize(&[1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(&d.probs()[..2], &[0.5, 0.5]);
        assert!(clip_normalize(&[f64::MAX; 7]).is_ok());
        assert_eq!(clip_normalize(&[f64::INFINITY, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap(), EmotionDistribution::one_hot(0));
    }

    proptest! {
        #[test]
        fn clip_normalize_is_valid_and_scale_free(raw in proptest::array::uniform7(-1e6f64..1e6), scale in 1e-3f64..1e3) {
            let d = clip_normalize(&raw).unwrap();
            prop_assert!(EmotionDistribution::new(*d.probs()).is_ok());
            let scaled: Vec<f64> = raw.iter().map(|x| x * scale).collect();
            prop_assert_eq!(clip_normalize(&scaled).unwrap().dominant_class(), d.dominant_class());
        }
    }

    fn prep_dataset() -> Dataset {
        let recs = (0..4)
            .map(|i| {
                let f = i as f64;
                record(
                    format!("r{i}"),
                    &[
                        (FamilyTag::Llf, vec![f, 10.0 - f]),
                        (FamilyTag::ImageNet, vec![0.5, 0.3, 0.2, 0.0]),
                        (FamilyTag::Places, vec![0.1, 0.9, 0.0]),
                    ],
                    Labels::default(),
                )
            })
            .collect();
        let fams = vec![
            FeatureFamily { tag: FamilyTag::Llf, dimension: 2 },
            FeatureFamily { tag: FamilyTag::ImageNet, dimension: 4 },
            FeatureFamily { tag: FamilyTag::Places, dimension: 3 },
        ];
        Dataset::new("t", fams, None, recs, "test").unwrap()
    }

    #[test]
    fn assembly_order_and_lengths() {
        let ds = prep_dataset();
        let prep = Preprocessing::fit(&ds, 0.01, 0.1).unwrap();
        let r = &ds.records()[1];
        let llf = assemble_features(r, "llf".parse().unwrap(), &prep).unwrap();
        assert_eq!(llf, vec![1.0 / 3.0, 2.0 / 3.0]);
        let ip = assemble_features(r, "imagenet+places".parse().unwrap(), &prep).unwrap();
        assert_eq!(ip.len(), 3 + 2);
        let pi = assemble_features(r, "places+imagenet".parse().unwrap(), &prep).unwrap();
        assert_eq!(ip, pi);
        let all = assemble_features(r, "llf+imagenet+places".parse().unwrap(), &prep).unwrap();
        assert_eq!(&all[..2], &llf[..]);
        assert_eq!(&all[2..], &ip[..]);
    }

    #[test]
    fn constant_class_ties_to_llf() {
        let ds = prep_dataset();
        let recs: Vec<FeatureRecord> = ds
            .records()
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.labels.distribution = Some(EmotionDistribution::uniform());
                r
            })
            .collect();
        let mut more = recs.clone();
        for (k, r) in recs.iter().enumerate() {
            let mut r = r.clone();
            r.id = format!("s{k}");
            more.push(r);
        }
        let ds = Dataset::new("t", ds.families().to_vec(), Some(LabelKind::Distribution), more, "test").unwrap();
        let cfg = TrainConfig { folds: 2, ..small_config() };
        let out = build_hybrid(&ds, &cfg, &Sequential).unwrap();
        for e in &out.ensemble.classes {
            assert_eq!(e.subset.to_string(), "llf");
            assert!(e.training_mse <= 1e-20);
        }
        let p = predict_distribution(&out.ensemble, &ds.records()[0]).unwrap();
        assert!(p.probs().iter().all(|x| (x - 1.0 / 7.0).abs() < 1e-12));
    }

    #[test]
    fn hybrid_selection_matches_table_minimum() {
        let (ds, _) = synth_hybrid(&HybridSynthConfig { n: 60, dimension: 5, noise: 0.05 }, 1).unwrap();
        let out = build_hybrid(&ds, &small_config(), &Sequential).unwrap();
        let t = &out.ensemble.table;
        assert_eq!(out.ensemble.classes.len(), 7);
        assert_eq!(out.reports.len(), 49);
        for (row, e) in t.scores.iter().zip(&out.ensemble.classes) {
            let min = row.iter().copied().fold(f64::INFINITY, f64::min);
            assert_eq!(e.training_mse, min);
            assert_eq!(e.model.feature_subset, Some(e.subset));
        }
        let p = predict_distribution(&out.ensemble, &ds.records()[0]).unwrap();
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn va_constant_valence() {
        let (ds, _) = synth_hybrid(&HybridSynthConfig { n: 30, dimension: 4, noise: 0.0 }, 2).unwrap();
        let recs: Vec<FeatureRecord> = ds
            .records()
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.labels.va = Some(VaPair::new(5.0, r.labels.va.unwrap().arousal).unwrap());
                r
            })
            .collect();
        let ds = Dataset::new("t", ds.families().to_vec(), ds.label_kind(), recs, "test").unwrap();
        let out = build_va(&ds, &small_config(), &Sequential).unwrap();
        assert_eq!(out.ensemble.valence.subset.to_string(), "llf");
        assert_eq!(out.ensemble.valence.training_mse, 0.0);
        assert_eq!(predict_va(&out.ensemble, &ds.records()[3]).unwrap().valence, 5.0);
    }

    #[test]
    fn artphoto_separable_classes() {
        let ds = synth_artphoto(&ArtphotoSynthConfig { n: 60, n_classes: 3, dimension: 4 }, 1).unwrap();
        let out = build_artphoto(&ds, &small_config(), &Sequential).unwrap();
        assert_eq!(out.ensemble.classes.len(), 3);
        for e in &out.ensemble.classes {
            assert_eq!(e.score, 1.0);
            assert_eq!(e.subset.to_string(), "llf");
        }
        for r in &out.reports {
            let (p, n) = r.refit_balance.unwrap();
            assert_eq!(p, n);
            assert!(r.cv.fold_balance.iter().all(|(p, n)| p == n));
        }
        for r in ds.records() {
            assert_eq!(predict_artphoto(&out.ensemble, r).unwrap(), r.class().unwrap());
        }
    }

    #[test]
    fn task_label_mismatch_is_rejected() {
        let ds = synth_artphoto(&ArtphotoSynthConfig { n: 20, n_classes: 2, dimension: 2 }, 1).unwrap();
        assert!(build_hybrid(&ds, &small_config(), &Sequential).is_err());
        assert!(build_va(&ds, &small_config(), &Sequential).is_err());
        let (h, _) = synth_hybrid(&HybridSynthConfig { n: 20, dimension: 3, noise: 0.0 }, 1).unwrap();
        assert!(build_artphoto(&h, &small_config(), &Sequential).is_err());
    }
}
