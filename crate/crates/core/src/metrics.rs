//! Evaluation metrics for distributions, dominant classes and scalar scores.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::emotion::{EmotionDistribution, NUM_EMOTIONS};
use crate::{Error, Result};

pub const DEFAULT_KLD_SMOOTHING: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Natural,
    Two,
}

impl LogBase {
    fn ln_scale(self) -> f64 {
        match self {
            LogBase::Natural => 1.0,
            LogBase::Two => core::f64::consts::LN_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KldOptions {
    pub smoothing: f64,
    pub base: LogBase,
}

impl Default for KldOptions {
    fn default() -> Self {
        KldOptions {
            smoothing: DEFAULT_KLD_SMOOTHING,
            base: LogBase::Natural,
        }
    }
}

fn check_simplex(v: &[f64]) -> Result<()> {
    if let Some((i, &p)) = v.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidDistribution(format!("component {i} is {p}")));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!("components sum to {sum}")));
    }
    Ok(())
}

/// `D(p ‖ q) = Σ p'_i ln(p'_i / q'_i)` with both arguments smoothed by
/// `(x + s) / (1 + k s)`.
///
/// Works on any equal-length probability vectors; `p` is the reference
/// (ground truth) and `q` the prediction.
pub fn kld_slices(p: &[f64], q: &[f64], opts: KldOptions) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            context: "kld",
            expected: p.len(),
            found: q.len(),
        });
    }
    if !(opts.smoothing > 0.0) {
        return Err(Error::InvalidParameter("kld smoothing must be > 0".into()));
    }
    check_simplex(p)?;
    check_simplex(q)?;
    let norm = 1.0 + p.len() as f64 * opts.smoothing;
    let total: f64 = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| {
            let ps = (a + opts.smoothing) / norm;
            let qs = (b + opts.smoothing) / norm;
            ps * libm::log(ps / qs)
        })
        .sum();
    Ok((total / opts.base.ln_scale()).max(0.0))
}

pub fn kld(p: &EmotionDistribution, q: &EmotionDistribution, opts: KldOptions) -> Result<f64> {
    kld_slices(p.probs(), q.probs(), opts)
}

/// `Σ √(p_i q_i)`.
pub fn bhattacharyya_slices(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            context: "bhattacharyya",
            expected: p.len(),
            found: q.len(),
        });
    }
    check_simplex(p)?;
    check_simplex(q)?;
    let bc: f64 = p.iter().zip(q).map(|(a, b)| libm::sqrt(a * b)).sum();
    Ok(bc.min(1.0))
}

pub fn bhattacharyya(p: &EmotionDistribution, q: &EmotionDistribution) -> f64 {
    // both arguments are validated distributions of equal length
    p.probs()
        .iter()
        .zip(q.probs())
        .map(|(a, b)| libm::sqrt(a * b))
        .sum::<f64>()
        .min(1.0)
}

/// Fraction of positions where the two class lists agree.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            context: "accuracy",
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::Empty("accuracy inputs"));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Average absolute difference.
pub fn aad(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            context: "aad",
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::Empty("aad inputs"));
    }
    Ok(predicted.iter().zip(truth).map(|(a, b)| (a - b).abs()).sum::<f64>() / truth.len() as f64)
}

/// True positive rate per class; `None` for classes absent from `truth`.
pub fn per_class_tpr(predicted: &[usize], truth: &[usize], num_classes: usize) -> Result<Vec<Option<f64>>> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            context: "per-class tpr",
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    let mut total = vec![0usize; num_classes];
    let mut hit = vec![0usize; num_classes];
    for (&p, &t) in predicted.iter().zip(truth) {
        if t >= num_classes || p >= num_classes {
            return Err(Error::InvalidParameter(format!(
                "class index out of range 0..{num_classes}"
            )));
        }
        total[t] += 1;
        if p == t {
            hit[t] += 1;
        }
    }
    Ok(total
        .iter()
        .zip(&hit)
        .map(|(&n, &h)| (n > 0).then(|| h as f64 / n as f64))
        .collect())
}

/// Mean over defined entries.
pub fn mean_defined(values: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordScore {
    pub id: String,
    pub kld: f64,
    pub bc: f64,
    pub predicted: usize,
    pub truth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n_records: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_kld: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_bc: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_record: Vec<RecordScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valence_aad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arousal_aad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_class_tpr: Option<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_tpr: Option<f64>,
    pub kld_options: KldOptions,
}

impl EvaluationReport {
    pub fn empty(n_records: usize, kld_options: KldOptions) -> Self {
        EvaluationReport {
            n_records,
            accuracy: None,
            mean_kld: None,
            mean_bc: None,
            per_record: Vec::new(),
            valence_aad: None,
            arousal_aad: None,
            per_class_tpr: None,
            mean_tpr: None,
            kld_options,
        }
    }
}

/// Accuracy, mean KLD and mean BC over predicted vs ground-truth distributions.
pub fn evaluate_distributions(
    ids: &[String],
    predicted: &[EmotionDistribution],
    truth: &[EmotionDistribution],
    opts: KldOptions,
) -> Result<EvaluationReport> {
    if ids.len() != predicted.len() || predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            context: "evaluation inputs",
            expected: ids.len(),
            found: predicted.len().min(truth.len()),
        });
    }
    if ids.is_empty() {
        return Err(Error::Empty("evaluation inputs"));
    }
    let mut rows = Vec::with_capacity(ids.len());
    for ((id, p), t) in ids.iter().zip(predicted).zip(truth) {
        rows.push(RecordScore {
            id: id.clone(),
            kld: kld(t, p, opts)?,
            bc: bhattacharyya(t, p),
            predicted: p.dominant_class(),
            truth: t.dominant_class(),
        });
    }
    let n = rows.len() as f64;
    let pred_classes: Vec<usize> = rows.iter().map(|r| r.predicted).collect();
    let true_classes: Vec<usize> = rows.iter().map(|r| r.truth).collect();
    let mut report = EvaluationReport::empty(rows.len(), opts);
    report.accuracy = Some(accuracy(&pred_classes, &true_classes)?);
    report.mean_kld = Some(rows.iter().map(|r| r.kld).sum::<f64>() / n);
    report.mean_bc = Some(rows.iter().map(|r| r.bc).sum::<f64>() / n);
    let tpr = per_class_tpr(&pred_classes, &true_classes, NUM_EMOTIONS)?;
    report.mean_tpr = mean_defined(&tpr);
    report.per_class_tpr = Some(tpr);
    report.per_record = rows;
    Ok(report)
}
