use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use super::vocab::{BoundaryMode, Vocabulary};
use super::{alphabet, training_units};
use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// How the next pair to merge is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeRule {
    /// Highest pair count.
    Frequency,
    /// Highest `count(l, r) / (count(l) count(r))`, i.e. the likelihood
    /// ratio with all normalizers cancelled.
    LikelihoodRatio,
}

/// Step-by-step merge trainer shared by BPE and WordPiece.
///
/// The training units (words, or whole sentences in whitespace mode) are
/// kept with their counts and re-segmented after every merge. Only pairs
/// occurring at least twice are merge candidates; ties go to the
/// lexicographically smallest `(left, right)`.
#[derive(Debug, Clone)]
pub struct MergeTrainer {
    rule: MergeRule,
    mode: BoundaryMode,
    symbols: Vec<String>,
    interned: HashMap<String, u32>,
    words: Vec<(Vec<u32>, u64)>,
    alphabet_len: usize,
    vocab_len: usize,
    merges: Vec<(String, String)>,
}

impl MergeTrainer {
    pub fn new(corpus: &Corpus, rule: MergeRule, mode: BoundaryMode) -> Self {
        Self::from_units(training_units(corpus, mode), rule, mode)
    }

    /// Trainer over explicit units; each occurrence counts once.
    pub fn from_units(units: Vec<String>, rule: MergeRule, mode: BoundaryMode) -> Self {
        let alpha = alphabet(units.iter());
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for u in units {
            if !u.is_empty() {
                *counts.entry(u).or_default() += 1;
            }
        }
        let interned: HashMap<String, u32> = alpha
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        let words = counts
            .into_iter()
            .map(|(w, c)| {
                let ids = w.chars().map(|ch| interned[ch.to_string().as_str()]).collect();
                (ids, c)
            })
            .collect();
        MergeTrainer {
            rule,
            mode,
            alphabet_len: alpha.len(),
            vocab_len: alpha.len(),
            symbols: alpha,
            interned,
            words,
            merges: Vec::new(),
        }
    }

    pub fn alphabet_len(&self) -> usize {
        self.alphabet_len
    }

    /// Number of distinct learned tokens so far.
    pub fn vocab_len(&self) -> usize {
        self.vocab_len
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    /// Current segmentation of every distinct unit, with its count.
    pub fn segmentation(&self) -> Vec<(Vec<&str>, u64)> {
        self.words
            .iter()
            .map(|(ids, c)| (ids.iter().map(|&i| self.symbols[i as usize].as_str()).collect(), *c))
            .collect()
    }

    fn best_pair(&self) -> Option<(u32, u32)> {
        let mut pairs: HashMap<(u32, u32), u64> = HashMap::new();
        let mut singles = vec![0u64; self.symbols.len()];
        for (ids, c) in &self.words {
            for &id in ids {
                singles[id as usize] += c;
            }
            for w in ids.windows(2) {
                *pairs.entry((w[0], w[1])).or_default() += c;
            }
        }
        let name = |p: &(u32, u32)| (&self.symbols[p.0 as usize], &self.symbols[p.1 as usize]);
        let mut best: Option<((u32, u32), u64)> = None;
        for (pair, count) in pairs {
            if count < 2 {
                continue;
            }
            let better = match &best {
                None => true,
                Some((bp, bc)) => {
                    let score = match self.rule {
                        MergeRule::Frequency => count.cmp(bc),
                        MergeRule::LikelihoodRatio => {
                            let denom = |p: &(u32, u32)| {
                                singles[p.0 as usize] as u128 * singles[p.1 as usize] as u128
                            };
                            (count as u128 * denom(bp)).cmp(&(*bc as u128 * denom(&pair)))
                        }
                    };
                    score == Ordering::Greater
                        || (score == Ordering::Equal && name(&pair) < name(bp))
                }
            };
            if better {
                best = Some((pair, count));
            }
        }
        best.map(|(p, _)| p)
    }

    /// Performs one merge and returns it, or `None` when no pair repeats.
    pub fn step(&mut self) -> Option<(String, String)> {
        let (l, r) = self.best_pair()?;
        let merged = format!("{}{}", self.symbols[l as usize], self.symbols[r as usize]);
        let id = match self.interned.get(&merged) {
            Some(&id) => id,
            None => {
                let id = self.symbols.len() as u32;
                self.symbols.push(merged.clone());
                self.interned.insert(merged, id);
                self.vocab_len += 1;
                id
            }
        };
        for (ids, _) in &mut self.words {
            if ids.len() < 2 {
                continue;
            }
            let mut out = Vec::with_capacity(ids.len());
            let mut i = 0;
            while i < ids.len() {
                if i + 1 < ids.len() && ids[i] == l && ids[i + 1] == r {
                    out.push(id);
                    i += 2;
                } else {
                    out.push(ids[i]);
                    i += 1;
                }
            }
            *ids = out;
        }
        let pair = (self.symbols[l as usize].clone(), self.symbols[r as usize].clone());
        self.merges.push(pair.clone());
        Some(pair)
    }

    /// Merges until `k` learned tokens exist or no pair repeats.
    pub fn train(mut self, k: usize) -> Result<Vocabulary> {
        if k < self.alphabet_len {
            return Err(Error::config(format!(
                "target vocabulary size {k} is below the alphabet size {}",
                self.alphabet_len
            )));
        }
        while self.vocab_len < k && self.step().is_some() {}
        let mode = self.mode;
        Vocabulary::from_learned(self.symbols, self.merges, None, mode)
    }
}

/// BPE: merge the most frequent adjacent pair until `k` learned tokens exist.
pub fn train_bpe(corpus: &Corpus, k: usize, mode: BoundaryMode) -> Result<Vocabulary> {
    MergeTrainer::new(corpus, MergeRule::Frequency, mode).train(k)
}

/// WordPiece: merge the pair with the highest likelihood ratio.
pub fn train_wordpiece(corpus: &Corpus, k: usize, mode: BoundaryMode) -> Result<Vocabulary> {
    MergeTrainer::new(corpus, MergeRule::LikelihoodRatio, mode).train(k)
}
