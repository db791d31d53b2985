use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TrainObjective;
use crate::cluster::{kmeans, train_skipgram, ClusterMap, SkipGramConfig};
use crate::corpus::{ingest_text, Corpus, SegmentationConfig};
use crate::corruption::{CrtsConfig, MlmConfig, TokenSpace, DEFAULT_RATE};
use crate::error::{Error, Result};
use crate::generators::{gen_mspp, gen_pairs, gen_sds, GenConfig, Objective};
use crate::rng::sub_seed;
use crate::tokenizer::Vocabulary;

const TOY_CORPUS: &[u8] = include_bytes!("../../data/toy_corpus.txt");

/// Small templated corpus of two-letter pseudo-words used by the training
/// smoke runs. Every sentence reads `subject verb object place.`; a
/// paragraph keeps one subject, a document keeps one verb pair and one place.
pub fn bundled_toy_corpus() -> Result<Corpus> {
    ingest_text(TOY_CORPUS, &SegmentationConfig::default())
}

/// Objective settings that do not belong to the model or the optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    pub mlm: MlmConfig,
    /// Selection rate of RTS and SLM.
    pub rate: f64,
    pub crts: CrtsConfig,
    /// Number of token clusters for C-RTS.
    pub n_clusters: usize,
    pub kmeans_restarts: usize,
    pub skipgram: SkipGramConfig,
    pub gen: GenConfig,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            mlm: MlmConfig::default(),
            rate: DEFAULT_RATE,
            crts: CrtsConfig::default(),
            n_clusters: 8,
            kmeans_restarts: 4,
            skipgram: SkipGramConfig::default(),
            gen: GenConfig::default(),
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(Error::config(format!("task.rate must lie in [0, 1], got {}", self.rate)));
        }
        self.mlm.validate()?;
        self.crts.validate()?;
        self.skipgram.validate()?;
        self.gen.validate()?;
        if self.n_clusters == 0 || self.kmeans_restarts == 0 {
            return Err(Error::config("task.n_clusters and task.kmeans_restarts must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairItem {
    pub l: Vec<u32>,
    pub r: Vec<u32>,
    pub y: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointItem {
    pub pivot: Vec<u32>,
    pub cands: Vec<Vec<u32>>,
    pub ys: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryItem {
    pub src: Vec<u32>,
    pub tgt: Vec<u32>,
}

/// Tokenized example pools, one per requested objective.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub vocab: Vocabulary,
    pub space: TokenSpace,
    /// Paragraphs, for the token-level objectives.
    pub sequences: Vec<Vec<u32>>,
    pub pairs: BTreeMap<TrainObjective, Vec<PairItem>>,
    pub joint: Vec<JointItem>,
    pub summaries: Vec<SummaryItem>,
    pub clusters: Option<ClusterMap>,
}

impl TrainData {
    pub fn prepare(corpus: &Corpus, vocab: Vocabulary, objectives: &[TrainObjective], cfg: &TaskConfig) -> Result<Self> {
        cfg.validate()?;
        let enc = |text: &str| vocab.encode(text).ids;
        let mut data = TrainData {
            space: TokenSpace::from(&vocab),
            sequences: Vec::new(),
            pairs: BTreeMap::new(),
            joint: Vec::new(),
            summaries: Vec::new(),
            clusters: None,
            vocab: vocab.clone(),
        };
        if objectives.iter().any(|o| o.is_token_level()) {
            data.sequences = corpus
                .documents()
                .iter()
                .flat_map(|d| d.paragraphs.iter().map(|p| enc(&p.text())))
                .filter(|ids| !ids.is_empty())
                .collect();
        }
        for &obj in objectives {
            match obj {
                TrainObjective::Ssp | TrainObjective::Sp | TrainObjective::Psd => {
                    let kind = match obj {
                        TrainObjective::Ssp => Objective::Ssp,
                        TrainObjective::Sp => Objective::Sp,
                        _ => Objective::Psd,
                    };
                    let items = gen_pairs(corpus, kind, cfg.gen.clone())?
                        .into_iter()
                        .map(|e| PairItem { l: enc(&e.l), r: enc(&e.r), y: e.y.is_positive() })
                        .collect();
                    data.pairs.insert(obj, items);
                }
                TrainObjective::Mspp => {
                    data.joint = gen_mspp(corpus, cfg.gen.clone())?
                        .into_iter()
                        .map(|e| JointItem {
                            pivot: enc(&e.pivot),
                            cands: e.cands.iter().map(|c| enc(c)).collect(),
                            ys: e.ys,
                        })
                        .collect();
                }
                TrainObjective::SdsProxy => {
                    data.summaries = gen_sds(corpus, cfg.gen.clone())?
                        .into_iter()
                        .map(|e| SummaryItem { src: enc(&e.src), tgt: enc(&e.tgt) })
                        .collect();
                }
                TrainObjective::Crts => {
                    data.clusters = Some(if cfg.n_clusters == 1 {
                        ClusterMap::single(vocab.len())?
                    } else {
                        let sg = SkipGramConfig { seed: sub_seed(cfg.skipgram.seed, "train/skipgram"), ..cfg.skipgram.clone() };
                        let table = train_skipgram(corpus, &vocab, &sg)?;
                        kmeans(&table, cfg.n_clusters, cfg.kmeans_restarts, sub_seed(cfg.skipgram.seed, "train/kmeans"))?
                    });
                }
                _ => {}
            }
        }
        for &obj in objectives {
            if data.pool_size(obj) == 0 {
                return Err(Error::insufficient(format!("corpus yields no {obj} training examples")));
            }
        }
        Ok(data)
    }

    /// Number of examples a batch of `obj` is drawn from.
    pub fn pool_size(&self, obj: TrainObjective) -> usize {
        match obj {
            o if o.is_token_level() => self.sequences.len(),
            TrainObjective::Mspp => self.joint.len(),
            TrainObjective::SdsProxy => self.summaries.len(),
            o => self.pairs.get(&o).map_or(0, Vec::len),
        }
    }
}
