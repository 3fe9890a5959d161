//! Declarative run configuration (TOML) plus CLI flag overrides; flags
//! win over the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attack::{AttackKind, ParaphraseProvider, ResourceSet};
use crate::calibration::SearchConfig;
use crate::corpus::CorpusFormat;
use crate::detector::DetectorHandle;
use crate::error::{Error, Result};

/// Fixed default master seed, so independent runs and independent builds
/// agree byte-for-byte unless a seed is chosen explicitly.
pub const DEFAULT_MASTER_SEED: u64 = 271_828_182_845;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subtask {
    A,
    B,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: PathBuf,
    #[serde(default = "default_format")]
    pub format: CorpusFormat,
    #[serde(default = "default_subtask")]
    pub subtask: Subtask,
    /// `field=value` clauses for the custom subtask.
    #[serde(default)]
    pub filter: Vec<String>,
    #[serde(default = "default_master_seed")]
    pub master_seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_report_formats")]
    pub report_formats: Vec<ReportFormat>,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub attacks: AttackConfig,
    #[serde(default)]
    pub resources: ResourcePaths,
    #[serde(default)]
    pub paraphrase: ParaphraseProvider,
    #[serde(default)]
    pub detectors: Vec<DetectorHandle>,
    /// submission id -> team id, for the ranking appendix.
    #[serde(default)]
    pub teams: BTreeMap<String, String>,
}

fn default_format() -> CorpusFormat {
    CorpusFormat::RecordLines
}
fn default_subtask() -> Subtask {
    Subtask::B
}
fn default_master_seed() -> u64 {
    DEFAULT_MASTER_SEED
}
fn default_report_formats() -> Vec<ReportFormat> {
    vec![ReportFormat::Delimited, ReportFormat::Aligned]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Delimited,
    Aligned,
    Markdown,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    /// Attacks to generate; empty means all eleven.
    #[serde(default)]
    pub kinds: Vec<AttackKind>,
    #[serde(default)]
    pub theta_overrides: BTreeMap<AttackKind, f64>,
}

impl AttackConfig {
    pub fn effective_kinds(&self) -> Vec<AttackKind> {
        if self.kinds.is_empty() {
            AttackKind::ALL.to_vec()
        } else {
            self.kinds.clone()
        }
    }

    pub fn theta_for(&self, kind: AttackKind) -> f64 {
        self.theta_overrides
            .get(&kind)
            .copied()
            .unwrap_or_else(|| kind.default_theta())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourcePaths {
    pub confusables: Option<PathBuf>,
    pub misspellings: Option<PathBuf>,
    pub us_uk_spelling: Option<PathBuf>,
    pub synonyms: Option<PathBuf>,
    pub tagger_lexicon: Option<PathBuf>,
}

impl ResourcePaths {
    /// Builtin dictionaries with any configured file overriding its table.
    pub fn load(&self) -> Result<ResourceSet> {
        let mut set = ResourceSet::builtin();
        if let Some(path) = &self.confusables {
            set.load_confusables(path)?;
        }
        if let Some(path) = &self.misspellings {
            set.load_misspellings(path)?;
        }
        if let Some(path) = &self.us_uk_spelling {
            set.load_us_uk(path)?;
        }
        if let Some(path) = &self.synonyms {
            set.load_synonyms(path)?;
        }
        if let Some(path) = &self.tagger_lexicon {
            set.load_tagger(path)?;
        }
        Ok(set)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let raw =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let config: RunConfig =
            toml::from_str(&raw).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.corpus.exists() {
            return Err(Error::Config(format!(
                "corpus path `{}` does not exist",
                self.corpus.display()
            )));
        }
        self.search.validate()?;
        for (kind, theta) in &self.attacks.theta_overrides {
            if !(0.0..=1.0).contains(theta) {
                return Err(Error::Config(format!(
                    "theta override {theta} for {kind} outside [0, 1]"
                )));
            }
        }
        for detector in &self.detectors {
            detector.validate()?;
        }
        Ok(())
    }

    /// Stable digest of the configuration for the run manifest.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
