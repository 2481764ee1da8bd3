//! Records, feature families, preprocessing and stratified splitting.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::emotion::{EmotionDistribution, VaPair};
use crate::seed;
use crate::simplex::normalize_hlc;
use crate::{Error, Result};

/// The three feature families an image can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyTag {
    /// Handcrafted low-level descriptors.
    Llf,
    /// Object-concept probabilities.
    ImageNet,
    /// Scene-concept probabilities.
    Places,
}

impl FamilyTag {
    pub const ALL: [FamilyTag; 3] = [FamilyTag::Llf, FamilyTag::ImageNet, FamilyTag::Places];

    pub fn standard_dimension(self) -> usize {
        match self {
            FamilyTag::Llf => 628,
            FamilyTag::ImageNet => 1000,
            FamilyTag::Places => 205,
        }
    }

    /// High-level concept families hold non-negative probability vectors.
    pub fn is_concept(self) -> bool {
        !matches!(self, FamilyTag::Llf)
    }

    pub fn name(self) -> &'static str {
        match self {
            FamilyTag::Llf => "llf",
            FamilyTag::ImageNet => "imagenet",
            FamilyTag::Places => "places",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for FamilyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "llf" => Ok(FamilyTag::Llf),
            "imagenet" => Ok(FamilyTag::ImageNet),
            "places" | "places205" => Ok(FamilyTag::Places),
            other => Err(Error::InvalidParameter(format!("unknown feature family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureFamily {
    pub tag: FamilyTag,
    pub dimension: usize,
}

impl FeatureFamily {
    pub fn standard(tag: FamilyTag) -> Self {
        FeatureFamily {
            tag,
            dimension: tag.standard_dimension(),
        }
    }
}

/// A non-empty set of feature families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<FamilyTag>", into = "Vec<FamilyTag>")]
pub struct FeatureSubset(u8);

impl FeatureSubset {
    pub fn new(families: &[FamilyTag]) -> Result<Self> {
        let bits = families.iter().fold(0, |acc, f| acc | f.bit());
        if bits == 0 {
            return Err(Error::InvalidParameter("empty feature subset".into()));
        }
        Ok(FeatureSubset(bits))
    }

    pub fn contains(self, tag: FamilyTag) -> bool {
        self.0 & tag.bit() != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Families in canonical order (LLF, ImageNet, Places).
    pub fn families(self) -> impl Iterator<Item = FamilyTag> {
        FamilyTag::ALL.into_iter().filter(move |&f| self.contains(f))
    }
}

impl TryFrom<Vec<FamilyTag>> for FeatureSubset {
    type Error = Error;

    fn try_from(v: Vec<FamilyTag>) -> Result<Self> {
        FeatureSubset::new(&v)
    }
}

impl From<FeatureSubset> for Vec<FamilyTag> {
    fn from(s: FeatureSubset) -> Self {
        s.families().collect()
    }
}

impl fmt::Display for FeatureSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, fam) in self.families().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            f.write_str(fam.name())?;
        }
        Ok(())
    }
}

impl FromStr for FeatureSubset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let families = s
            .split('+')
            .map(|p| p.trim().parse())
            .collect::<Result<Vec<FamilyTag>>>()?;
        FeatureSubset::new(&families)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Distribution,
    Hard,
    Va,
    #[serde(rename = "distribution+va")]
    DistributionVa,
}

impl LabelKind {
    pub fn has_distribution(self) -> bool {
        matches!(self, LabelKind::Distribution | LabelKind::DistributionVa)
    }

    pub fn has_va(self) -> bool {
        matches!(self, LabelKind::Va | LabelKind::DistributionVa)
    }

    pub fn name(self) -> &'static str {
        match self {
            LabelKind::Distribution => "distribution",
            LabelKind::Hard => "hard",
            LabelKind::Va => "va",
            LabelKind::DistributionVa => "distribution+va",
        }
    }
}

impl FromStr for LabelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distribution" => Ok(LabelKind::Distribution),
            "hard" => Ok(LabelKind::Hard),
            "va" => Ok(LabelKind::Va),
            "distribution+va" => Ok(LabelKind::DistributionVa),
            other => Err(Error::InvalidParameter(format!("unknown label kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<EmotionDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub va: Option<VaPair>,
}

impl Labels {
    pub fn is_empty(&self) -> bool {
        self.distribution.is_none() && self.class.is_none() && self.va.is_none()
    }

    /// Hard class, or the dominant class of the distribution label.
    pub fn stratum(&self) -> Option<usize> {
        self.class
            .or_else(|| self.distribution.map(|d| d.dominant_class()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub id: String,
    pub features: BTreeMap<FamilyTag, Vec<f64>>,
    #[serde(default)]
    pub labels: Labels,
}

impl FeatureRecord {
    pub fn family(&self, tag: FamilyTag) -> Result<&[f64]> {
        self.features
            .get(&tag)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingFamily {
                id: self.id.clone(),
                family: tag,
            })
    }

    pub fn distribution(&self) -> Result<&EmotionDistribution> {
        self.labels.distribution.as_ref().ok_or_else(|| Error::MissingLabel {
            id: self.id.clone(),
            kind: "distribution",
        })
    }

    pub fn va(&self) -> Result<VaPair> {
        self.labels.va.ok_or_else(|| Error::MissingLabel {
            id: self.id.clone(),
            kind: "va",
        })
    }

    pub fn class(&self) -> Result<usize> {
        self.labels.class.ok_or_else(|| Error::MissingLabel {
            id: self.id.clone(),
            kind: "hard",
        })
    }
}

/// An immutable, validated collection of records sharing one family set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    name: String,
    families: Vec<FeatureFamily>,
    label_kind: Option<LabelKind>,
    records: Vec<FeatureRecord>,
    provenance: String,
}

impl Dataset {
    /// Validate and assemble a dataset.
    ///
    /// Checks unique ids, per-record family presence and dimension,
    /// non-negativity of concept families, finiteness, and that every record
    /// carries the labels `label_kind` promises.
    pub fn new(
        name: impl Into<String>,
        families: Vec<FeatureFamily>,
        label_kind: Option<LabelKind>,
        records: Vec<FeatureRecord>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let mut seen_tags = BTreeSet::new();
        for fam in &families {
            if fam.dimension == 0 {
                return Err(Error::InvalidParameter(format!("family {} has dimension 0", fam.tag)));
            }
            if !seen_tags.insert(fam.tag) {
                return Err(Error::InvalidParameter(format!("family {} declared twice", fam.tag)));
            }
        }

        let mut ids = BTreeSet::new();
        for rec in &records {
            if !ids.insert(rec.id.as_str()) {
                return Err(Error::DuplicateId(rec.id.clone()));
            }
            if rec.features.len() != families.len() {
                let extra = rec.features.keys().find(|t| !seen_tags.contains(*t));
                if let Some(tag) = extra {
                    return Err(Error::InvalidParameter(format!(
                        "record {} carries undeclared family {tag}",
                        rec.id
                    )));
                }
            }
            for fam in &families {
                let v = rec.family(fam.tag)?;
                if v.len() != fam.dimension {
                    return Err(Error::DimensionMismatch {
                        context: "feature vector",
                        expected: fam.dimension,
                        found: v.len(),
                    });
                }
                for (index, &value) in v.iter().enumerate() {
                    if !value.is_finite() || (fam.tag.is_concept() && value < 0.0) {
                        return Err(Error::InvalidComponent { index, value });
                    }
                }
            }
            if let Some(kind) = label_kind {
                if kind.has_distribution() {
                    rec.distribution()?;
                }
                if kind.has_va() {
                    rec.va()?;
                }
                if kind == LabelKind::Hard {
                    rec.class()?;
                }
            }
        }

        Ok(Dataset {
            name: name.into(),
            families,
            label_kind,
            records,
            provenance: provenance.into(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn families(&self) -> &[FeatureFamily] {
        &self.families
    }

    pub fn family(&self, tag: FamilyTag) -> Option<FeatureFamily> {
        self.families.iter().copied().find(|f| f.tag == tag)
    }

    pub fn has_family(&self, tag: FamilyTag) -> bool {
        self.family(tag).is_some()
    }

    pub fn label_kind(&self) -> Option<LabelKind> {
        self.label_kind
    }

    pub fn records(&self) -> &[FeatureRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Rows of one family, in record order.
    pub fn family_rows(&self, tag: FamilyTag) -> Result<Vec<&[f64]>> {
        self.records.iter().map(|r| r.family(tag)).collect()
    }

    /// Per-record stratum: hard class, else dominant class, else 0.
    pub fn strata(&self) -> Vec<usize> {
        self.records
            .iter()
            .map(|r| r.labels.stratum().unwrap_or(0))
            .collect()
    }

    /// Count of records per stratum (index = class).
    pub fn class_counts(&self) -> Vec<usize> {
        let strata = self.strata();
        let n_classes = strata.iter().max().map_or(0, |m| m + 1);
        let mut counts = alloc::vec![0; n_classes];
        for s in strata {
            counts[s] += 1;
        }
        counts
    }

    /// A new dataset holding the records at `indices`, in that order.
    pub fn select(&self, indices: &[usize], provenance: impl Into<String>) -> Dataset {
        Dataset {
            name: self.name.clone(),
            families: self.families.clone(),
            label_kind: self.label_kind,
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            provenance: provenance.into(),
        }
    }

    /// Records whose ids appear in `ids`, in dataset order.
    pub fn select_ids(&self, ids: &BTreeSet<String>) -> Dataset {
        let indices: Vec<usize> = self
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| ids.contains(&r.id))
            .map(|(i, _)| i)
            .collect();
        self.select(&indices, self.provenance.clone())
    }
}

pub const DEFAULT_DETECT_THRESHOLD: f64 = 0.01;
pub const DEFAULT_FREQUENCY_THRESHOLD: f64 = 0.10;

/// Keeps concept columns that are detected often enough in the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptFilter {
    pub kept_indices: Vec<usize>,
    pub detect_threshold: f64,
    pub frequency_threshold: f64,
    pub input_dimension: usize,
}

impl ConceptFilter {
    /// Keep column `j` when `H[i][j] >= detect_threshold` in at least a
    /// `frequency_threshold` fraction of rows.
    pub fn fit<R: AsRef<[f64]>>(
        rows: &[R],
        detect_threshold: f64,
        frequency_threshold: f64,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("concept matrix"));
        }
        if !(detect_threshold >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "detection threshold {detect_threshold} must be >= 0"
            )));
        }
        if !(frequency_threshold > 0.0 && frequency_threshold <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "frequency threshold {frequency_threshold} must lie in (0, 1]"
            )));
        }
        let d = rows[0].as_ref().len();
        let mut counts = alloc::vec![0usize; d];
        for row in rows {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    context: "concept matrix row",
                    expected: d,
                    found: row.len(),
                });
            }
            for (c, &h) in counts.iter_mut().zip(row) {
                if h >= detect_threshold {
                    *c += 1;
                }
            }
        }
        let n = rows.len();
        // counts are compared as integers against ceil(freq * n) so that
        // exact boundaries such as 1 row in 10 at 10% are kept.
        let needed = required_count(frequency_threshold, n);
        let kept_indices: Vec<usize> = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c >= needed)
            .map(|(j, _)| j)
            .collect();
        if kept_indices.is_empty() {
            let max = counts.iter().copied().max().unwrap_or(0);
            return Err(Error::NoConceptsSurvive {
                max_frequency: max as f64 / n as f64,
            });
        }
        Ok(ConceptFilter {
            kept_indices,
            detect_threshold,
            frequency_threshold,
            input_dimension: d,
        })
    }

    /// Filter that keeps every column of a `d`-dimensional vector.
    pub fn identity(d: usize) -> Self {
        ConceptFilter {
            kept_indices: (0..d).collect(),
            detect_threshold: 0.0,
            frequency_threshold: DEFAULT_FREQUENCY_THRESHOLD,
            input_dimension: d,
        }
    }

    pub fn output_dimension(&self) -> usize {
        self.kept_indices.len()
    }

    /// Select the kept components and renormalize them onto the simplex.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let needed = self.kept_indices.last().map_or(0, |&m| m + 1);
        if v.len() < needed {
            return Err(Error::DimensionMismatch {
                context: "concept filter input",
                expected: needed,
                found: v.len(),
            });
        }
        let selected: Vec<f64> = self.kept_indices.iter().map(|&j| v[j]).collect();
        normalize_hlc(&selected)
    }
}

fn required_count(frequency: f64, n: usize) -> usize {
    let raw = frequency * n as f64;
    let rounded = libm::round(raw);
    // absorb representation error such as 0.1 * 30 = 3.0000000000000004
    if (raw - rounded).abs() <= 1e-9 * n as f64 {
        rounded as usize
    } else {
        libm::ceil(raw) as usize
    }
}

/// Per-feature min-max scaling learned on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlfScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl LlfScaler {
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("low-level feature matrix"))?.as_ref();
        let mut min = first.to_vec();
        let mut max = first.to_vec();
        for row in &rows[1..] {
            let row = row.as_ref();
            if row.len() != min.len() {
                return Err(Error::DimensionMismatch {
                    context: "low-level feature row",
                    expected: min.len(),
                    found: row.len(),
                });
            }
            for ((lo, hi), &x) in min.iter_mut().zip(max.iter_mut()).zip(row) {
                *lo = lo.min(x);
                *hi = hi.max(x);
            }
        }
        Ok(LlfScaler { min, max })
    }

    pub fn dimension(&self) -> usize {
        self.min.len()
    }

    /// `(x - min) / (max - min)` clamped to `[0, 1]`; constant features map to 0.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.min.len() {
            return Err(Error::DimensionMismatch {
                context: "low-level feature vector",
                expected: self.min.len(),
                found: v.len(),
            });
        }
        Ok(v.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&x, (&lo, &hi))| {
                if hi > lo {
                    ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    pub warnings: Vec<String>,
}

/// Stratified train/test split on the per-record stratum.
///
/// Each stratum with at least two members contributes
/// `round(test_fraction * size)` records to the test side (capped so one
/// stays in training); singleton strata go wholly to training with a warning.
/// Both halves keep the input record order.
pub fn stratified_split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test fraction {test_fraction} must lie in (0, 1)"
        )));
    }
    if ds.label_kind().is_none() {
        return Err(Error::InvalidParameter("stratified split needs labels".into()));
    }
    let mut by_stratum: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in ds.strata().into_iter().enumerate() {
        by_stratum.entry(s).or_default().push(i);
    }

    let mut rng = seed::substream(seed, seed::SPLIT_STREAM);
    let mut is_test = alloc::vec![false; ds.len()];
    let mut warnings = Vec::new();
    for (stratum, mut members) in by_stratum {
        if members.len() < 2 {
            warnings.push(format!(
                "class {stratum} has {} member(s); kept entirely in training",
                members.len()
            ));
            continue;
        }
        members.shuffle(&mut rng);
        let n_test = (libm::round(test_fraction * members.len() as f64) as usize)
            .min(members.len() - 1);
        for &i in &members[..n_test] {
            is_test[i] = true;
        }
    }

    let (test_idx, train_idx): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|&i| is_test[i]);
    let tag = |part: &str| format!("{} [{part} split, fraction {test_fraction}, seed {seed}]", ds.provenance());
    Ok(Split {
        train: ds.select(&train_idx, tag("train")),
        test: ds.select(&test_idx, tag("test")),
        warnings,
    })
}

/// Convenience for tests and generators: record with the given families.
pub fn record(id: impl ToString, features: &[(FamilyTag, Vec<f64>)], labels: Labels) -> FeatureRecord {
    FeatureRecord {
        id: id.to_string(),
        features: features.iter().cloned().collect(),
        labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn filter_keeps_boundary_frequency() {
        let mut rows = vec![vec![0.0, 0.0, 0.5]; 10];
        rows[0][0] = 0.2;
        for r in rows.iter_mut().take(5) {
            r[1] = 0.2;
        }
        let f = ConceptFilter::fit(&rows, 0.01, 0.10).unwrap();
        assert_eq!(f.kept_indices, vec![0, 1, 2]);
    }

    #[test]
    fn filter_all_detected_keeps_all() {
        let rows = vec![vec![0.5, 0.5]; 4];
        assert_eq!(ConceptFilter::fit(&rows, 0.01, 0.10).unwrap().kept_indices, vec![0, 1]);
    }

    #[test]
    fn filter_full_frequency_drops_near_misses() {
        let mut rows = vec![vec![0.5, 0.5]; 6];
        rows[3][1] = 0.0;
        assert_eq!(ConceptFilter::fit(&rows, 0.01, 1.0).unwrap().kept_indices, vec![0]);
    }

    #[test]
    fn filter_reports_max_frequency_when_empty() {
        let mut rows = vec![vec![0.0, 0.0]; 10];
        rows[0][1] = 1.0;
        rows[1][1] = 1.0;
        match ConceptFilter::fit(&rows, 0.01, 0.5) {
            Err(Error::NoConceptsSurvive { max_frequency }) => assert_eq!(max_frequency, 0.2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn filter_apply_examples() {
        let f = ConceptFilter {
            kept_indices: vec![0, 2],
            detect_threshold: 0.01,
            frequency_threshold: 0.1,
            input_dimension: 3,
        };
        let out = f.apply(&[0.2, 0.5, 0.3]).unwrap();
        assert!((out[0] - 0.4).abs() < 1e-15 && (out[1] - 0.6).abs() < 1e-15);

        let all = ConceptFilter::identity(3).apply(&[1.0, 1.0, 2.0]).unwrap();
        assert_eq!(all, vec![0.25, 0.25, 0.5]);

        let one = ConceptFilter {
            kept_indices: vec![1],
            ..ConceptFilter::identity(2)
        };
        assert_eq!(one.apply(&[0.5, 0.0]), Err(Error::ZeroVector));
    }

    #[test]
    fn scaler_examples() {
        let s = LlfScaler::fit(&[vec![2.0, 7.0], vec![4.0, 7.0]]).unwrap();
        assert_eq!(s.apply(&[3.0, 7.0]).unwrap(), vec![0.5, 0.0]);
        assert_eq!(s.apply(&[5.0, 9.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(s.apply(&[1.0, 9.0]).unwrap(), vec![0.0, 0.0]);
    }

    fn labelled(n: usize, class_of: impl Fn(usize) -> usize) -> Dataset {
        let records = (0..n)
            .map(|i| {
                record(
                    format!("r{i:03}"),
                    &[(FamilyTag::ImageNet, vec![0.5, 0.5])],
                    Labels {
                        class: Some(class_of(i)),
                        ..Labels::default()
                    },
                )
            })
            .collect();
        Dataset::new(
            "t",
            vec![FeatureFamily { tag: FamilyTag::ImageNet, dimension: 2 }],
            Some(LabelKind::Hard),
            records,
            "test",
        )
        .unwrap()
    }

    #[test]
    fn split_preserves_class_proportions() {
        let ds = labelled(100, |i| i % 2);
        let split = stratified_split(&ds, 0.2, 5).unwrap();
        assert_eq!(split.test.class_counts(), vec![10, 10]);
        assert_eq!(split.train.class_counts(), vec![40, 40]);
    }

    #[test]
    fn split_is_deterministic() {
        let ds = labelled(37, |i| i % 3);
        let a = stratified_split(&ds, 0.3, 11).unwrap();
        let b = stratified_split(&ds, 0.3, 11).unwrap();
        assert_eq!(a.test, b.test);
        assert_eq!(a.train, b.train);
    }

    #[test]
    fn singleton_class_goes_to_training() {
        let ds = labelled(11, |i| if i == 10 { 2 } else { i % 2 });
        let split = stratified_split(&ds, 0.2, 1).unwrap();
        assert!(split.train.records().iter().any(|r| r.id == "r010"));
        assert_eq!(split.warnings.len(), 1);
    }

    #[test]
    fn dataset_rejects_duplicates_and_bad_dims() {
        let fam = vec![FeatureFamily { tag: FamilyTag::ImageNet, dimension: 2 }];
        let r = record("a", &[(FamilyTag::ImageNet, vec![0.5, 0.5])], Labels::default());
        let dup = Dataset::new("t", fam.clone(), None, vec![r.clone(), r.clone()], "x");
        assert_eq!(dup.unwrap_err(), Error::DuplicateId("a".into()));

        let bad = record("b", &[(FamilyTag::ImageNet, vec![0.5])], Labels::default());
        assert!(matches!(
            Dataset::new("t", fam.clone(), None, vec![bad], "x"),
            Err(Error::DimensionMismatch { .. })
        ));

        let neg = record("c", &[(FamilyTag::ImageNet, vec![-0.5, 1.5])], Labels::default());
        assert!(Dataset::new("t", fam.clone(), None, vec![neg], "x").is_err());

        assert!(matches!(
            Dataset::new("t", fam, Some(LabelKind::Distribution), vec![r], "x"),
            Err(Error::MissingLabel { .. })
        ));
    }

    #[test]
    fn subset_parse_and_display() {
        let s: FeatureSubset = "places+llf".parse().unwrap();
        assert_eq!(s.to_string(), "llf+places");
        assert_eq!(s.len(), 2);
        assert!(FeatureSubset::new(&[]).is_err());
    }

    proptest! {
        #[test]
        fn filter_invariant_to_row_order(
            rows in proptest::collection::vec(proptest::collection::vec(0.0f64..0.05, 6), 1..30),
            rot in 0usize..30,
        ) {
            let mut rotated = rows.clone();
            let k = rot % rows.len();
            rotated.rotate_left(k);
            let a = ConceptFilter::fit(&rows, 0.01, 0.1);
            let b = ConceptFilter::fit(&rotated, 0.01, 0.1);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn filter_then_normalize_is_idempotent(v in proptest::collection::vec(0.01f64..1.0, 2..20)) {
            let f = ConceptFilter::identity(v.len());
            let once = f.apply(&v).unwrap();
            let twice = f.apply(&once).unwrap();
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() < 1e-15);
            }
        }

        #[test]
        fn split_is_a_partition(n in 4usize..80, classes in 1usize..5, frac in 0.05f64..0.9, seed in 0u64..1000) {
            let ds = labelled(n, |i| i % classes);
            let split = stratified_split(&ds, frac, seed).unwrap();
            let mut ids: Vec<&str> = split.train.records().iter().chain(split.test.records()).map(|r| r.id.as_str()).collect();
            ids.sort_unstable();
            let mut all: Vec<&str> = ds.records().iter().map(|r| r.id.as_str()).collect();
            all.sort_unstable();
            prop_assert_eq!(ids, all);
        }
    }
}
