//! Subword vocabularies and their encoders.
//!
//! Three trainers share one [`Vocabulary`] type:
//!
//! * [`train_bpe`]: bottom-up merges of the most frequent adjacent pair.
//! * [`train_wordpiece`]: the same loop, merging the pair with the highest
//!   `P(l, r) / (P(l) P(r))` ratio.
//! * [`train_unigram`]: top-down pruning of a seed vocabulary under a unigram
//!   language model.
//!
//! Encoding is greedy longest-match for merge-based vocabularies and Viterbi
//! (most likely segmentation) for unigram vocabularies. In
//! [`BoundaryMode::Word`] text is split on whitespace first and the first
//! piece of each word carries a word-start flag; in
//! [`BoundaryMode::Whitespace`] spaces become the ordinary symbol `▁` and
//! pieces may span several words.

mod merge;
mod unigram;
mod vocab;

pub use merge::{train_bpe, train_wordpiece, MergeRule, MergeTrainer};
pub use unigram::{train_unigram, UnigramOptions, UnigramTrainer};
pub use vocab::{
    BoundaryMode, SpecialIds, TokenSequence, Vocabulary, BOS_TOKEN, EOS_TOKEN, MASK_TOKEN,
    PAD_TOKEN, SPACE_SYMBOL, UNK_TOKEN, WORD_START_MARK,
};

use crate::corpus::Corpus;

/// Normalizes whitespace and, in whitespace mode, maps spaces to `▁`.
pub(crate) fn training_units(corpus: &Corpus, mode: BoundaryMode) -> Vec<String> {
    let mut units = Vec::new();
    for sentence in corpus.sentences() {
        match mode {
            BoundaryMode::Word => {
                units.extend(sentence.text().split_whitespace().map(str::to_owned));
            }
            BoundaryMode::Whitespace => {
                units.push(vocab::to_symbol_stream(sentence.text()));
            }
        }
    }
    units
}

/// Sorted alphabet of `units`.
pub(crate) fn alphabet<'a>(units: impl Iterator<Item = &'a String>) -> Vec<String> {
    let mut chars: Vec<char> = units.flat_map(|u| u.chars()).collect();
    chars.sort_unstable();
    chars.dedup();
    chars.into_iter().map(String::from).collect()
}
