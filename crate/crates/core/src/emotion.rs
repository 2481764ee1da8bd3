//! Emotion classes and emotion distributions.

use alloc::format;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const NUM_EMOTIONS: usize = 7;

/// Tolerance on the sum of a distribution's components.
pub const DISTRIBUTION_SUM_TOL: f64 = 1e-9;

/// The seven classes of an emotion distribution, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Anger,
    Disgust,
    Fear,
    Joy,
    Sadness,
    Surprise,
    Neutral,
}

impl Emotion {
    pub const ALL: [Emotion; NUM_EMOTIONS] = [
        Emotion::Anger,
        Emotion::Disgust,
        Emotion::Fear,
        Emotion::Joy,
        Emotion::Sadness,
        Emotion::Surprise,
        Emotion::Neutral,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Emotion> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Anger => "anger",
            Emotion::Disgust => "disgust",
            Emotion::Fear => "fear",
            Emotion::Joy => "joy",
            Emotion::Sadness => "sadness",
            Emotion::Surprise => "surprise",
            Emotion::Neutral => "neutral",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A probability vector over the seven [`Emotion`] classes.
///
/// Construction validates that every component is finite and non-negative
/// and that the components sum to one within [`DISTRIBUTION_SUM_TOL`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; NUM_EMOTIONS]", into = "[f64; NUM_EMOTIONS]")]
pub struct EmotionDistribution([f64; NUM_EMOTIONS]);

impl EmotionDistribution {
    pub fn new(probs: [f64; NUM_EMOTIONS]) -> Result<Self> {
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "component {i} is {p}"
                )));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > DISTRIBUTION_SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "components sum to {sum}"
            )));
        }
        Ok(EmotionDistribution(probs))
    }

    pub fn uniform() -> Self {
        EmotionDistribution([1.0 / NUM_EMOTIONS as f64; NUM_EMOTIONS])
    }

    pub fn one_hot(class: usize) -> Self {
        let mut probs = [0.0; NUM_EMOTIONS];
        probs[class] = 1.0;
        EmotionDistribution(probs)
    }

    pub fn probs(&self) -> &[f64; NUM_EMOTIONS] {
        &self.0
    }

    pub fn get(&self, emotion: Emotion) -> f64 {
        self.0[emotion.index()]
    }

    /// Index of the most probable class; ties go to the lowest index.
    pub fn dominant_class(&self) -> usize {
        dominant_class(&self.0)
    }
}

impl TryFrom<[f64; NUM_EMOTIONS]> for EmotionDistribution {
    type Error = Error;

    fn try_from(probs: [f64; NUM_EMOTIONS]) -> Result<Self> {
        EmotionDistribution::new(probs)
    }
}

impl From<EmotionDistribution> for [f64; NUM_EMOTIONS] {
    fn from(d: EmotionDistribution) -> Self {
        d.0
    }
}

/// Argmax with lowest-index tie-breaking.
pub fn dominant_class(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Valence/arousal scores, kept on whatever scale the dataset supplies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaPair {
    pub valence: f64,
    pub arousal: f64,
}

impl VaPair {
    pub fn new(valence: f64, arousal: f64) -> Result<Self> {
        if !valence.is_finite() || !arousal.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "non-finite VA pair ({valence}, {arousal})"
            )));
        }
        Ok(VaPair { valence, arousal })
    }
}
