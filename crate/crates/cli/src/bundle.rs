//! Serialized ensembles.

use std::collections::BTreeSet;

use anyhow::bail;
use emohlc_core::dataset::{Dataset, FamilyTag, FeatureSubset};
use emohlc_core::hybrid::{predict_artphoto, predict_distribution, predict_va, ArtphotoEnsemble, HybridEnsemble, VaEnsemble};
use serde::{Deserialize, Serialize};

use crate::formats::Predictions;

pub const BUNDLE_FORMAT: &str = "emohlc-bundle";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", content = "ensemble", rename_all = "lowercase")]
pub enum Model {
    Distribution(HybridEnsemble),
    Va(VaEnsemble),
    Artphoto(ArtphotoEnsemble),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub format: String,
    pub version: u32,
    #[serde(flatten)]
    pub model: Model,
}

impl Bundle {
    pub fn new(model: Model) -> Self {
        Bundle {
            format: BUNDLE_FORMAT.to_string(),
            version: BUNDLE_VERSION,
            model,
        }
    }

    pub fn check(&self) -> anyhow::Result<()> {
        if self.format != BUNDLE_FORMAT || self.version != BUNDLE_VERSION {
            bail!(
                "unsupported bundle {} v{} (expected {BUNDLE_FORMAT} v{BUNDLE_VERSION})",
                self.format,
                self.version
            );
        }
        Ok(())
    }

    pub fn subsets(&self) -> Vec<FeatureSubset> {
        match &self.model {
            Model::Distribution(e) => e.classes.iter().map(|c| c.subset).collect(),
            Model::Va(e) => vec![e.valence.subset, e.arousal.subset],
            Model::Artphoto(e) => e.classes.iter().map(|c| c.subset).collect(),
        }
    }

    pub fn families_used(&self) -> BTreeSet<FamilyTag> {
        self.subsets().iter().flat_map(|s| s.families()).collect()
    }

    /// Predict every record of `ds`, in dataset order.
    pub fn predict(&self, ds: &Dataset) -> anyhow::Result<Predictions> {
        let missing: Vec<&str> = self
            .families_used()
            .into_iter()
            .filter(|t| !ds.has_family(*t))
            .map(FamilyTag::name)
            .collect();
        if !missing.is_empty() {
            bail!("dataset lacks feature families used by the bundle: {}", missing.join(", "));
        }
        let recs = ds.records();
        Ok(match &self.model {
            Model::Distribution(e) => Predictions::Distribution(
                recs.iter()
                    .map(|r| Ok((r.id.clone(), predict_distribution(e, r)?)))
                    .collect::<anyhow::Result<_>>()?,
            ),
            Model::Va(e) => Predictions::Va(
                recs.iter()
                    .map(|r| Ok((r.id.clone(), predict_va(e, r)?)))
                    .collect::<anyhow::Result<_>>()?,
            ),
            Model::Artphoto(e) => Predictions::Class(
                recs.iter()
                    .map(|r| Ok((r.id.clone(), predict_artphoto(e, r)?)))
                    .collect::<anyhow::Result<_>>()?,
            ),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use emohlc_core::hybrid::{build_artphoto, TrainConfig};
    use emohlc_core::model_selection::ParamGrid;
    use emohlc_core::runner::Sequential;
    use emohlc_core::synth::{synth_artphoto, ArtphotoSynthConfig};

    #[test]
    fn json_round_trip_preserves_predictions() {
        let ds = synth_artphoto(&ArtphotoSynthConfig { n: 40, ..Default::default() }, 1).unwrap();
        let cfg = TrainConfig {
            grid: ParamGrid::new(vec![1.0], vec![0.5]).unwrap(),
            ..TrainConfig::default()
        };
        let trained = build_artphoto(&ds, &cfg, &Sequential).unwrap();
        let bundle = Bundle::new(Model::Artphoto(trained.ensemble));
        let text = serde_json::to_string(&bundle).unwrap();
        let back: Bundle = serde_json::from_str(&text).unwrap();
        back.check().unwrap();
        assert_eq!(back, bundle);
        assert_eq!(back.predict(&ds).unwrap(), bundle.predict(&ds).unwrap());

        let mut stale = back;
        stale.version = 99;
        assert!(stale.check().is_err());
    }
}
