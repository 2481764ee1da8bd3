//! Synthetic datasets with known ground truth.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::admixture::EmotionProfileMatrix;
use crate::dataset::{record, Dataset, FamilyTag, FeatureFamily, LabelKind, Labels};
use crate::emotion::{EmotionDistribution, VaPair, NUM_EMOTIONS};
use crate::seed::{self, Rng};
use crate::{Error, Result};

/// Uniform draw from the probability simplex of dimension `d`.
fn flat_dirichlet(rng: &mut Rng, d: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..d).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    draws.iter().map(|x| x / total).collect()
}

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn provenance(kind: &str, seed: u64) -> String {
    format!("synthetic({kind}, seed={seed})")
}

/// Observations `h = max(P e + noise, 0)` renormalized, with `P` and `e`
/// uniform on their simplices. Returns the dataset (ImageNet family of
/// dimension `d`) and the true profile matrix.
pub fn synth_admixture(d: usize, n: usize, noise_std: f64, seed: u64) -> Result<(Dataset, EmotionProfileMatrix)> {
    if d < NUM_EMOTIONS {
        return Err(Error::InvalidParameter(format!("d = {d} must be at least {NUM_EMOTIONS}")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise_std {noise_std} must be >= 0")));
    }
    let mut rng = seed::substream(seed, seed::SYNTH_STREAM);
    let columns: Vec<Vec<f64>> = (0..NUM_EMOTIONS).map(|_| flat_dirichlet(&mut rng, d)).collect();
    let truth = EmotionProfileMatrix::from_columns(columns)?;

    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let mix = flat_dirichlet(&mut rng, NUM_EMOTIONS);
        let mut e = [0.0; NUM_EMOTIONS];
        e.copy_from_slice(&mix);
        let clean: Vec<f64> = (0..d)
            .map(|j| (0..NUM_EMOTIONS).map(|k| truth.columns[k][j] * e[k]).sum())
            .collect();
        let h = if noise_std == 0.0 {
            clean
        } else {
            let noisy: Vec<f64> = clean.iter().map(|&v| (v + noise_std * normal(&mut rng)).max(0.0)).collect();
            let total: f64 = noisy.iter().sum();
            if total > 0.0 {
                noisy.iter().map(|v| v / total).collect()
            } else {
                clean
            }
        };
        let dist = renormalized_distribution(e)?;
        records.push(record(
            format!("a{i:05}"),
            &[(FamilyTag::ImageNet, h)],
            Labels {
                distribution: Some(dist),
                ..Labels::default()
            },
        ));
    }
    let ds = Dataset::new(
        "synth_admixture",
        vec![FeatureFamily {
            tag: FamilyTag::ImageNet,
            dimension: d,
        }],
        Some(LabelKind::Distribution),
        records,
        provenance("admixture", seed),
    )?;
    Ok((ds, truth))
}

fn renormalized_distribution(mut e: [f64; NUM_EMOTIONS]) -> Result<EmotionDistribution> {
    let total: f64 = e.iter().sum();
    for v in &mut e {
        *v /= total;
    }
    EmotionDistribution::new(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridSynthConfig {
    pub n: usize,
    /// Dimension of each of the three families.
    pub dimension: usize,
    /// Standard deviation of the logit noise.
    pub noise: f64,
}

impl Default for HybridSynthConfig {
    fn default() -> Self {
        HybridSynthConfig {
            n: 700,
            dimension: 20,
            noise: 0.05,
        }
    }
}

/// Which family drives each target of a hybrid dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridTruth {
    /// Designated family per emotion class.
    pub class_family: Vec<FamilyTag>,
    pub valence_family: FamilyTag,
    pub arousal_family: FamilyTag,
}

/// Random direction used to score one target from one family.
#[derive(Debug, Clone)]
struct Direction {
    weights: Vec<f64>,
}

impl Direction {
    fn draw(rng: &mut Rng, dim: usize) -> Self {
        let raw: Vec<f64> = (0..dim).map(|_| normal(rng)).collect();
        let norm = libm::sqrt(raw.iter().map(|w| w * w).sum::<f64>());
        Direction {
            weights: raw.iter().map(|w| w / norm).collect(),
        }
    }

    /// Projection of the standardized family vector.
    fn score(&self, tag: FamilyTag, v: &[f64]) -> f64 {
        let (mean, sd) = family_moments(tag, v.len());
        self.weights.iter().zip(v).map(|(w, x)| w * (x - mean) / sd).sum()
    }
}

/// Known per-component mean and standard deviation of the generators'
/// family distributions (uniform on `[0,1]` and flat Dirichlet).
fn family_moments(tag: FamilyTag, dim: usize) -> (f64, f64) {
    if tag.is_concept() {
        let m = dim as f64;
        (1.0 / m, libm::sqrt((m - 1.0) / (m * m * (m + 1.0))))
    } else {
        (0.5, libm::sqrt(1.0 / 12.0))
    }
}

const LOGIT_SCALE: f64 = 1.5;

/// Emotion distribution of one record: each family owns the mass
/// `|group| / 7` and splits it among its classes by a softmax of smooth
/// scores of that family alone.
fn hybrid_distribution(
    truth: &HybridTruth,
    directions: &[Direction],
    features: &[(FamilyTag, Vec<f64>)],
    logit_noise: &[f64],
) -> Result<EmotionDistribution> {
    let family = |tag: FamilyTag| &features.iter().find(|(t, _)| *t == tag).expect("all families generated").1;
    let mut probs = [0.0; NUM_EMOTIONS];
    for tag in FamilyTag::ALL {
        let members: Vec<usize> = (0..NUM_EMOTIONS).filter(|&k| truth.class_family[k] == tag).collect();
        if members.is_empty() {
            continue;
        }
        let logits: Vec<f64> = members
            .iter()
            .map(|&k| LOGIT_SCALE * directions[k].score(tag, family(tag)) + logit_noise[k])
            .collect();
        let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logits.iter().map(|l| libm::exp(l - top)).collect();
        let total: f64 = weights.iter().sum();
        let mass = members.len() as f64 / NUM_EMOTIONS as f64;
        for (&k, w) in members.iter().zip(&weights) {
            probs[k] = mass * w / total;
        }
    }
    renormalized_distribution(probs)
}

/// Records whose per-class targets each depend on one designated family.
///
/// The class-to-family map is a seeded shuffle of three LLF, two ImageNet
/// and two Places slots, so every family drives at least two classes.
/// Valence is driven by Places and arousal by ImageNet.
pub fn synth_hybrid(config: &HybridSynthConfig, seed: u64) -> Result<(Dataset, HybridTruth)> {
    if config.n < 2 || config.dimension < 2 {
        return Err(Error::InvalidParameter("synth_hybrid needs n >= 2 and dimension >= 2".into()));
    }
    if !(config.noise >= 0.0 && config.noise.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise {} must be >= 0", config.noise)));
    }
    let mut rng = seed::substream(seed, seed::SYNTH_STREAM);
    let mut class_family = vec![
        FamilyTag::Llf,
        FamilyTag::ImageNet,
        FamilyTag::Places,
        FamilyTag::Llf,
        FamilyTag::ImageNet,
        FamilyTag::Places,
        FamilyTag::Llf,
    ];
    class_family.shuffle(&mut rng);
    let truth = HybridTruth {
        class_family,
        valence_family: FamilyTag::Places,
        arousal_family: FamilyTag::ImageNet,
    };
    let dim = config.dimension;
    let directions: Vec<Direction> = (0..NUM_EMOTIONS + 2).map(|_| Direction::draw(&mut rng, dim)).collect();

    let mut records = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let features = vec![
            (FamilyTag::Llf, (0..dim).map(|_| rng.random::<f64>()).collect()),
            (FamilyTag::ImageNet, flat_dirichlet(&mut rng, dim)),
            (FamilyTag::Places, flat_dirichlet(&mut rng, dim)),
        ];
        let noise: Vec<f64> = (0..NUM_EMOTIONS + 2).map(|_| config.noise * normal(&mut rng)).collect();
        let dist = hybrid_distribution(&truth, &directions, &features, &noise)?;
        let va = hybrid_va(&truth, &directions, &features, &noise)?;
        records.push(record(
            format!("h{i:05}"),
            &features,
            Labels {
                distribution: Some(dist),
                va: Some(va),
                ..Labels::default()
            },
        ));
    }
    let families = FamilyTag::ALL
        .iter()
        .map(|&tag| FeatureFamily { tag, dimension: dim })
        .collect();
    let ds = Dataset::new(
        "synth_hybrid",
        families,
        Some(LabelKind::DistributionVa),
        records,
        provenance("hybrid", seed),
    )?;
    Ok((ds, truth))
}

fn hybrid_va(
    truth: &HybridTruth,
    directions: &[Direction],
    features: &[(FamilyTag, Vec<f64>)],
    noise: &[f64],
) -> Result<VaPair> {
    let family = |tag: FamilyTag| &features.iter().find(|(t, _)| *t == tag).expect("all families generated").1;
    let v = directions[NUM_EMOTIONS].score(truth.valence_family, family(truth.valence_family));
    let a = directions[NUM_EMOTIONS + 1].score(truth.arousal_family, family(truth.arousal_family));
    VaPair::new(
        5.0 + 2.0 * libm::tanh(0.7 * v) + noise[NUM_EMOTIONS],
        4.0 + 1.5 * libm::tanh(0.7 * a) + noise[NUM_EMOTIONS + 1],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArtphotoSynthConfig {
    pub n: usize,
    pub n_classes: usize,
    /// Dimension of each family; LLF must be at least `n_classes`.
    pub dimension: usize,
}

impl Default for ArtphotoSynthConfig {
    fn default() -> Self {
        ArtphotoSynthConfig {
            n: 200,
            n_classes: 4,
            dimension: 8,
        }
    }
}

/// Hard-labelled records separable through the LLF family: coordinate
/// `class` is high (0.8 to 1.0) and the other leading class coordinates are
/// low (0 to 0.2). Remaining LLF coordinates and both concept families are
/// label-independent noise.
pub fn synth_artphoto(config: &ArtphotoSynthConfig, seed: u64) -> Result<Dataset> {
    if config.n_classes < 2 || config.dimension < config.n_classes || config.n < 2 * config.n_classes {
        return Err(Error::InvalidParameter(
            "synth_artphoto needs >= 2 classes, dimension >= classes and n >= 2 per class".into(),
        ));
    }
    let mut rng = seed::substream(seed, seed::SYNTH_STREAM);
    let dim = config.dimension;
    let mut records = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let class = i % config.n_classes;
        let llf: Vec<f64> = (0..dim)
            .map(|j| {
                if j == class {
                    rng.random_range(0.8..=1.0)
                } else if j < config.n_classes {
                    rng.random_range(0.0..=0.2)
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        let features = [
            (FamilyTag::Llf, llf),
            (FamilyTag::ImageNet, flat_dirichlet(&mut rng, dim)),
            (FamilyTag::Places, flat_dirichlet(&mut rng, dim)),
        ];
        records.push(record(
            format!("p{i:05}"),
            &features,
            Labels {
                class: Some(class),
                ..Labels::default()
            },
        ));
    }
    let families = FamilyTag::ALL
        .iter()
        .map(|&tag| FeatureFamily { tag, dimension: dim })
        .collect();
    Dataset::new("synth_artphoto", families, Some(LabelKind::Hard), records, provenance("artphoto", seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn admixture_noiseless_lies_in_hull() {
        let (ds, p) = synth_admixture(9, 30, 0.0, 5).unwrap();
        for r in ds.records() {
            let e = r.distribution().unwrap().probs();
            let h = r.family(FamilyTag::ImageNet).unwrap();
            for (j, hj) in h.iter().enumerate() {
                let mixed: f64 = (0..NUM_EMOTIONS).map(|k| p.get(j, k) * e[k]).sum();
                assert!((hj - mixed).abs() < 1e-15);
            }
        }
        assert!(p.constraint_violation() < 1e-12);
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(synth_admixture(8, 20, 0.01, 3).unwrap(), synth_admixture(8, 20, 0.01, 3).unwrap());
        assert_ne!(synth_admixture(8, 20, 0.01, 3).unwrap().0, synth_admixture(8, 20, 0.01, 4).unwrap().0);
        let cfg = HybridSynthConfig { n: 20, ..HybridSynthConfig::default() };
        assert_eq!(synth_hybrid(&cfg, 1).unwrap(), synth_hybrid(&cfg, 1).unwrap());
        assert!(synth_admixture(6, 20, 0.0, 0).is_err());
        assert!(synth_admixture(8, 0, 0.0, 0).is_err());
    }

    #[test]
    fn hybrid_labels_are_distributions_and_map_covers_families() {
        let cfg = HybridSynthConfig { n: 50, ..HybridSynthConfig::default() };
        let (ds, truth) = synth_hybrid(&cfg, 7).unwrap();
        for r in ds.records() {
            let sum: f64 = r.distribution().unwrap().probs().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
        for tag in FamilyTag::ALL {
            assert!(truth.class_family.iter().filter(|t| **t == tag).count() >= 2);
        }
    }

    #[test]
    fn class_targets_ignore_other_families() {
        let mut rng = seed::substream(11, "test");
        let truth = HybridTruth {
            class_family: vec![
                FamilyTag::Llf,
                FamilyTag::ImageNet,
                FamilyTag::Places,
                FamilyTag::Llf,
                FamilyTag::ImageNet,
                FamilyTag::Places,
                FamilyTag::Llf,
            ],
            valence_family: FamilyTag::Places,
            arousal_family: FamilyTag::ImageNet,
        };
        let dirs: Vec<Direction> = (0..9).map(|_| Direction::draw(&mut rng, 6)).collect();
        let noise = vec![0.01; 9];
        let mut feats = vec![
            (FamilyTag::Llf, (0..6).map(|_| rng.random::<f64>()).collect::<Vec<f64>>()),
            (FamilyTag::ImageNet, flat_dirichlet(&mut rng, 6)),
            (FamilyTag::Places, flat_dirichlet(&mut rng, 6)),
        ];
        let before = hybrid_distribution(&truth, &dirs, &feats, &noise).unwrap();
        feats[1].1.reverse();
        feats[2].1.rotate_left(2);
        let after = hybrid_distribution(&truth, &dirs, &feats, &noise).unwrap();
        for k in [0, 3, 6] {
            assert_eq!(before.probs()[k], after.probs()[k]);
        }
    }

    #[test]
    fn artphoto_is_separable_on_llf() {
        let ds = synth_artphoto(&ArtphotoSynthConfig::default(), 2).unwrap();
        assert_eq!(ds.class_counts(), vec![50; 4]);
        for r in ds.records() {
            let c = r.class().unwrap();
            let llf = r.family(FamilyTag::Llf).unwrap();
            assert!(llf[c] >= 0.8 && (0..4).filter(|&j| j != c).all(|j| llf[j] <= 0.2));
        }
    }
}
