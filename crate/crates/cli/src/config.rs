//! Run configuration: one TOML file, one section per stage.
//!
//! Every key is optional and falls back to the documented default; unknown
//! keys are rejected. `--seed` on the command line replaces `seed`. Stage
//! seeds are derived from it by name, so stages never share a stream.

use std::path::Path;

use objreid_core::curation::{DbscanParams, ObservationParams};
use objreid_core::metric::TrainConfig;
use objreid_core::patchgen::{AugmentConfig, FilterMode, PatchConfig};
use objreid_core::retrieval::{HardRule, SimilarityMode};
use objreid_core::seed;
use objreid_core::synthgen::SynthConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::split::SplitConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurationConfig {
    pub dbscan: DbscanParams,
    pub observation: ObservationParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatchSection {
    pub crop: PatchConfig,
    /// Augmented copies written per observation besides the plain patch.
    pub augment_copies: usize,
    pub augment: AugmentConfig,
    /// Tighten boxes to the segmentation mask when masks are given.
    pub refine_with_mask: bool,
    /// Keep only foreground or background pixels when masks are given.
    pub mask_filter: Option<FilterMode>,
}

impl Default for PatchSection {
    fn default() -> Self {
        Self {
            crop: PatchConfig::default(),
            augment_copies: 0,
            augment: AugmentConfig::default(),
            refine_with_mask: true,
            mask_filter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub similarity: SimilarityMode,
    pub top_k: Vec<usize>,
    pub cmc_max_k: usize,
    pub hard_rule: HardRule,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { similarity: SimilarityMode::Cosine, top_k: vec![1, 5], cmc_max_k: 50, hard_rule: HardRule::Disjunctive }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub curation: CurationConfig,
    pub patch: PatchSection,
    pub train: TrainConfig,
    pub split: Option<SplitConfig>,
    pub eval: EvalSection,
    pub synth: SynthConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    /// Defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
                Self::from_toml(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
            }
        }
    }

    pub fn stage_seed(&self, stage: &str) -> u64 {
        seed::stage(self.seed, stage)
    }

    /// SHA-256 of the canonical JSON form of the effective configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
