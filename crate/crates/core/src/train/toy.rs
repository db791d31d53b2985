use super::{bundled_toy_corpus, TaskConfig, TrainData, TrainObjective, Trainer};
use crate::corpus::Corpus;
use crate::error::Result;
use crate::model::{HeadKind, Layout, ModelConfig, TrainConfig};
use crate::tokenizer::{train_bpe, BoundaryMode, Vocabulary};

/// Learned tokens on top of the specials; the bundled corpus saturates at
/// exactly this many, so every word is a single token.
const TOY_MERGE_TARGET: usize = 59;

/// The bundled corpus with a 64-token BPE vocabulary and a model able to
/// train every objective, including MSPP with five candidates.
#[derive(Debug, Clone)]
pub struct ToySetup {
    pub corpus: Corpus,
    pub vocab: Vocabulary,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub task: TaskConfig,
}

impl ToySetup {
    pub fn new(seed: u64) -> Result<Self> {
        let corpus = bundled_toy_corpus()?;
        let vocab = train_bpe(&corpus, TOY_MERGE_TARGET, BoundaryMode::Word)?;
        let task = TaskConfig::default();
        let k = task.gen.mspp_quota.k();
        let model = ModelConfig {
            vocab_size: vocab.len(),
            n_heads: 4,
            layout: Layout::Fixed { k, slot_len: 10 },
            head: HeadKind::Aek,
            n_seq_ids: k + 1,
            seed,
            ..ModelConfig::default()
        };
        let train = TrainConfig { batch_size: 32, seed, ..TrainConfig::default() };
        Ok(ToySetup { corpus, vocab, model, train, task })
    }

    pub fn trainer(&self, objectives: Vec<(TrainObjective, f64)>) -> Result<Trainer> {
        let names: Vec<TrainObjective> = objectives.iter().map(|(o, _)| *o).collect();
        let data = TrainData::prepare(&self.corpus, self.vocab.clone(), &names, &self.task)?;
        Trainer::new(self.model.clone(), self.train.clone(), self.task.clone(), objectives, data)
    }
}
