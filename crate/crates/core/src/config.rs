//! One configuration file for the whole pipeline.
//!
//! Files are TOML; a file ending in `.json`, or TOML text that fails to parse
//! but looks like a JSON object, is read as JSON. Every section is optional
//! and unknown keys are rejected.
//!
//! All randomness flows from the root `seed`. Module seeds are derived with
//! [`sub_seed`] and a fixed label, overwriting whatever the sections hold:
//!
//! | module              | label        |
//! |---------------------|--------------|
//! | `model.seed`        | `"model"`    |
//! | `train.seed`        | `"train"`    |
//! | `task.gen.seed`     | `"gen"`      |
//! | `task.skipgram.seed`| `"skipgram"` |

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{Abbreviations, Corpus, SegmentationConfig};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, TrainConfig};
use crate::rng::sub_seed;
use crate::tokenizer::{train_bpe, train_unigram, train_wordpiece, BoundaryMode, UnigramOptions, Vocabulary};
use crate::train::{check_compatibility, parse_weights, TaskConfig, TrainObjective};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Raw text or JSONL corpus.
    pub corpus: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig { corpus: None, out_dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationSettings {
    pub doc_delimiter: String,
    pub nfc: bool,
    /// Replaces the bundled abbreviation list.
    pub abbreviations: Option<PathBuf>,
}

impl Default for SegmentationSettings {
    fn default() -> Self {
        let d = SegmentationConfig::default();
        SegmentationSettings { doc_delimiter: d.doc_delimiter, nfc: d.nfc, abbreviations: None }
    }
}

impl SegmentationSettings {
    pub fn build(&self) -> Result<SegmentationConfig> {
        let abbreviations = match &self.abbreviations {
            Some(p) => Abbreviations::parse(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?),
            None => Abbreviations::default(),
        };
        Ok(SegmentationConfig { doc_delimiter: self.doc_delimiter.clone(), abbreviations, nfc: self.nfc })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenizerKind {
    Bpe,
    Wordpiece,
    Unigram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnigramSettings {
    pub alpha: f64,
    pub max_piece_chars: usize,
    pub min_seed_count: u64,
    pub em_iterations: usize,
    pub exact: bool,
}

impl Default for UnigramSettings {
    fn default() -> Self {
        let o = UnigramOptions::default();
        UnigramSettings {
            alpha: o.alpha,
            max_piece_chars: o.max_piece_chars,
            min_seed_count: o.min_seed_count,
            em_iterations: o.em_iterations,
            exact: o.exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerSettings {
    pub kind: TokenizerKind,
    /// Learned tokens, not counting the specials.
    pub size: usize,
    pub mode: BoundaryMode,
    pub unigram: UnigramSettings,
}

impl Default for TokenizerSettings {
    fn default() -> Self {
        TokenizerSettings {
            kind: TokenizerKind::Bpe,
            size: 1000,
            mode: BoundaryMode::Word,
            unigram: UnigramSettings::default(),
        }
    }
}

impl TokenizerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::config("tokenizer.size must be positive"));
        }
        let u = &self.unigram;
        if !(u.alpha > 0.0 && u.alpha < 1.0) {
            return Err(Error::config(format!("tokenizer.unigram.alpha must lie in (0, 1), got {}", u.alpha)));
        }
        if u.max_piece_chars == 0 || u.em_iterations == 0 {
            return Err(Error::config("tokenizer.unigram.max_piece_chars and em_iterations must be positive"));
        }
        Ok(())
    }

    pub fn train(&self, corpus: &Corpus) -> Result<Vocabulary> {
        match self.kind {
            TokenizerKind::Bpe => train_bpe(corpus, self.size, self.mode),
            TokenizerKind::Wordpiece => train_wordpiece(corpus, self.size, self.mode),
            TokenizerKind::Unigram => {
                let u = &self.unigram;
                let opts = UnigramOptions {
                    alpha: u.alpha,
                    max_piece_chars: u.max_piece_chars,
                    min_seed_count: u.min_seed_count,
                    em_iterations: u.em_iterations,
                    exact: u.exact,
                };
                train_unigram(corpus, self.size, self.mode, opts)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Worker threads; `None` leaves the choice to the environment.
    pub jobs: Option<usize>,
    pub paths: PathsConfig,
    pub segmentation: SegmentationSettings,
    pub tokenizer: TokenizerSettings,
    pub task: TaskConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Weighted objective list, e.g. `"MLM (1.0) + SSP (0.5)"`.
    pub objectives: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            jobs: None,
            paths: PathsConfig::default(),
            segmentation: SegmentationSettings::default(),
            tokenizer: TokenizerSettings::default(),
            task: TaskConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            objectives: "mlm".to_owned(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigFormat {
    Toml,
    Json,
}

/// Prefixes a configuration message with its section unless it already
/// names a field of that section.
fn within(section: &str, r: Result<()>) -> Result<()> {
    r.map_err(|e| match e {
        Error::Config(m) if !m.starts_with(&format!("{section}.")) => Error::Config(format!("{section}: {m}")),
        e => e,
    })
}

impl PipelineConfig {
    pub fn parse(text: &str, format: ConfigFormat) -> Result<Self> {
        let json = |t: &str| {
            serde_json::from_str(t).map_err(|e| Error::Format { format: "config", message: e.to_string() })
        };
        match format {
            ConfigFormat::Json => json(text),
            ConfigFormat::Toml => match toml::from_str(text) {
                Ok(cfg) => Ok(cfg),
                Err(_) if text.trim_start().starts_with('{') => json(text),
                Err(e) => Err(Error::Format { format: "config", message: e.to_string() }),
            },
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let format = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => ConfigFormat::Json,
            _ => ConfigFormat::Toml,
        };
        Self::parse(&text, format)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format { format: "config", message: e.to_string() })
    }

    pub fn weights(&self) -> Result<Vec<(TrainObjective, f64)>> {
        parse_weights(&self.objectives).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("objectives: {m}")),
            e => e,
        })
    }

    /// Checks every section against its module's preconditions. Checks that
    /// need data, such as the vocabulary size, happen when the data exists.
    pub fn validate(&self) -> Result<()> {
        if self.jobs == Some(0) {
            return Err(Error::config("jobs must be positive"));
        }
        if self.segmentation.doc_delimiter.trim().is_empty() {
            return Err(Error::config("segmentation.doc_delimiter must not be blank"));
        }
        self.tokenizer.validate()?;
        within("task", self.task.validate())?;
        within("model", self.model.validate())?;
        within("train", self.train.validate())?;
        let weights = self.weights()?;
        within("model", check_compatibility(&self.model, &self.task, &weights))
    }

    /// The configuration with every module seed derived from the root seed.
    pub fn seeded(&self) -> Self {
        let mut c = self.clone();
        c.model.seed = sub_seed(self.seed, "model");
        c.train.seed = sub_seed(self.seed, "train");
        c.task.gen.seed = sub_seed(self.seed, "gen");
        c.task.skipgram.seed = sub_seed(self.seed, "skipgram");
        c
    }
}
