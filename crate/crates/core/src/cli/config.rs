use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{LossKind, TrainConfig};
use crate::pipeline::classifier_train_config;
use crate::platform::OracleParams;
use crate::seeds::stream_rng;
use crate::twin::twin_train_config;
use crate::types::PlatformSpec;

const DOMAIN_TWIN_TRAIN: u64 = 101;
const DOMAIN_CLF_TRAIN: u64 = 102;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sizes {
    pub twin_contexts: usize,
    pub classifier_contexts: usize,
    pub eval_contexts: usize,
}

impl Default for Sizes {
    fn default() -> Self {
        Sizes {
            twin_contexts: 2000,
            classifier_contexts: 5000,
            eval_contexts: 500,
        }
    }
}

/// Everything a run depends on. Serialized as one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub platform: PlatformSpec,
    pub oracle: OracleParams,
    pub twin_train: TrainConfig,
    pub clf_train: TrainConfig,
    pub sizes: Sizes,
    /// Decision interval in seconds.
    pub interval_s: f64,
    /// Master seed; every random stream is derived from it.
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            platform: PlatformSpec::default(),
            oracle: OracleParams::default(),
            twin_train: twin_train_config(),
            clf_train: classifier_train_config(),
            sizes: Sizes::default(),
            interval_s: 900.0,
            seed: 2024,
            output_dir: PathBuf::from("runs/default"),
        }
    }
}

impl RunConfig {
    /// Default configuration for the 8-way platform variant.
    pub fn eight_way() -> Self {
        let mut cfg = RunConfig::default();
        cfg.platform.n_llc = 8;
        cfg.output_dir = PathBuf::from("runs/eight-way");
        cfg
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = self.platform.problems();
        out.extend(self.oracle.problems());
        out.extend(self.twin_train.problems("twin_train"));
        out.extend(self.clf_train.problems("clf_train"));
        if self.twin_train.loss != LossKind::Mse {
            out.push("twin_train.loss must be mse".into());
        }
        if self.clf_train.loss != LossKind::CrossEntropy {
            out.push("clf_train.loss must be cross_entropy".into());
        }
        if !(self.interval_s > 0.0 && self.interval_s.is_finite()) {
            out.push("interval_s must be > 0".into());
        }
        for (name, v) in [
            ("sizes.twin_contexts", self.sizes.twin_contexts),
            ("sizes.classifier_contexts", self.sizes.classifier_contexts),
            ("sizes.eval_contexts", self.sizes.eval_contexts),
        ] {
            if v < 1 {
                out.push(format!("{name} must be >= 1"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))?;
        RunConfig::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON, ignoring `output_dir`.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    fn derived_seed(&self, domain: u64, sub: u64) -> u64 {
        stream_rng(self.seed, domain, sub).random()
    }

    /// Twin training settings with the seed derived from the master seed.
    /// The configured `seed` selects a sub-stream.
    pub fn effective_twin_train(&self) -> TrainConfig {
        TrainConfig {
            seed: self.derived_seed(DOMAIN_TWIN_TRAIN, self.twin_train.seed),
            ..self.twin_train.clone()
        }
    }

    pub fn effective_clf_train(&self) -> TrainConfig {
        TrainConfig {
            seed: self.derived_seed(DOMAIN_CLF_TRAIN, self.clf_train.seed),
            ..self.clf_train.clone()
        }
    }
}
