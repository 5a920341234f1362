use std::fs;
use std::path::{Path, PathBuf};

use ahntp_core::train::TrainConfig;
use anyhow::Context;
use serde::{Deserialize, Serialize};

/// Everything a run needs. Serialized as one flat JSON object: the dataset
/// paths and `output_dir` next to the training fields.
///
/// ```json
/// { "trust_path": "trust.tsv", "ratings_path": "ratings.tsv",
///   "output_dir": "out", "epochs": 200, "seed": 0, "ablation": "full",
///   "mpr": { "alpha": 0.8 }, "model": { "attention": true } }
/// ```
///
/// Omitted fields take their defaults. Relative paths are resolved against
/// the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub trust_path: Option<PathBuf>,
    pub ratings_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(flatten)]
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { trust_path: None, ratings_path: None, output_dir: PathBuf::from("out"), train: TrainConfig::default() }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: Self =
            serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.trust_path.as_mut().map(resolve);
        cfg.ratings_path.as_mut().map(resolve);
        resolve(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn trust_path(&self) -> anyhow::Result<&Path> {
        self.trust_path
            .as_deref()
            .context("no trust file given: pass --trust or set trust_path in the config")
    }
}
