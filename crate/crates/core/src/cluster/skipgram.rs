use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EmbeddingTable;
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::tokenizer::Vocabulary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkipGramConfig {
    pub dim: usize,
    /// Context tokens on each side of the center.
    pub window: usize,
    pub epochs: usize,
    pub negatives: usize,
    /// Initial learning rate, decayed linearly towards zero.
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 32,
            window: 2,
            epochs: 5,
            negatives: 5,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

impl SkipGramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.window == 0 || self.negatives == 0 {
            return Err(Error::config("skipgram.dim, skipgram.window and skipgram.negatives must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!("skipgram.learning_rate must be positive, got {}", self.learning_rate)));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Encodes every sentence of `corpus` and trains on the result.
pub fn train_skipgram(corpus: &Corpus, vocab: &Vocabulary, cfg: &SkipGramConfig) -> Result<EmbeddingTable> {
    let sequences: Vec<Vec<u32>> = corpus.sentences().map(|s| vocab.encode(s.text()).ids).collect();
    let skip: Vec<u32> = vocab.specials().all().to_vec();
    train_skipgram_ids(&sequences, vocab.len(), &skip, cfg)
}

/// Skip-gram with negative sampling over id sequences. Ids listed in `skip`
/// never act as center, context or noise token; they keep their initial
/// vectors. Noise tokens follow the unigram distribution raised to 0.75.
/// The returned embedding of a token is the sum of its input and output
/// vectors, which places tokens that appear next to each other close
/// together as well as tokens that share contexts. Runs single-threaded, so
/// the result depends only on `cfg.seed`.
pub fn train_skipgram_ids(
    sequences: &[Vec<u32>],
    vocab_size: usize,
    skip: &[u32],
    cfg: &SkipGramConfig,
) -> Result<EmbeddingTable> {
    cfg.validate()?;
    let mut rng = seeded(cfg.seed);
    let dim = cfg.dim;
    let mut input: Vec<f64> = (0..vocab_size * dim)
        .map(|_| (rng.random::<f64>() - 0.5) / dim as f64)
        .collect();
    let mut output = vec![0.0; vocab_size * dim];

    let mut counts = vec![0u64; vocab_size];
    let mut total = 0u64;
    for seq in sequences {
        for &id in seq {
            let slot = counts.get_mut(id as usize).ok_or(Error::Range {
                what: "token id",
                index: id as usize,
                size: vocab_size,
            })?;
            if !skip.contains(&id) {
                *slot += 1;
                total += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::EmptyCorpus);
    }
    let noise = WeightedIndex::new(counts.iter().map(|&c| (c as f64).powf(0.75)))
        .map_err(|e| Error::Numeric(format!("noise distribution: {e}")))?;

    let steps = (total * cfg.epochs as u64).max(1) as f64;
    let mut done = 0u64;
    let mut grad = vec![0.0; dim];
    for _ in 0..cfg.epochs {
        for seq in sequences {
            let kept: Vec<u32> = seq.iter().copied().filter(|id| !skip.contains(id)).collect();
            for (pos, &center) in kept.iter().enumerate() {
                let lr = cfg.learning_rate * (1.0 - done as f64 / steps).max(1e-4);
                done += 1;
                let lo = pos.saturating_sub(cfg.window);
                let hi = (pos + cfg.window + 1).min(kept.len());
                for ctx_pos in lo..hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let context = kept[ctx_pos] as usize;
                    let v = context * dim;
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for n in 0..=cfg.negatives {
                        let (target, label) = if n == 0 {
                            (center as usize, 1.0)
                        } else {
                            let t = noise.sample(&mut rng);
                            if t == center as usize {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let u = target * dim;
                        let dot: f64 = (0..dim).map(|j| input[v + j] * output[u + j]).sum();
                        let g = (label - sigmoid(dot)) * lr;
                        for j in 0..dim {
                            grad[j] += g * output[u + j];
                            output[u + j] += g * input[v + j];
                        }
                    }
                    for j in 0..dim {
                        input[v + j] += grad[j];
                    }
                }
            }
        }
    }
    let summed = input.iter().zip(&output).map(|(a, b)| a + b).collect();
    EmbeddingTable::new(dim, summed)
}
