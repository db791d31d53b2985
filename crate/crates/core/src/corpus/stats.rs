use serde::{Deserialize, Serialize};

use super::Corpus;

/// Size statistics of a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_docs: usize,
    pub n_paragraphs: usize,
    pub n_sentences: usize,
    pub n_words: usize,
    pub words_per_doc: f64,
    pub paras_per_doc: f64,
    pub sents_per_para: f64,
}

/// Exact counts and arithmetic means over the corpus. A [`Corpus`] is never
/// empty, so the means are always defined.
pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let n_docs = corpus.len();
    let n_paragraphs: usize = corpus.documents().iter().map(|d| d.paragraphs.len()).sum();
    let n_sentences = corpus.sentences().count();
    let n_words = corpus.sentences().map(|s| s.word_count()).sum();
    CorpusStats {
        n_docs,
        n_paragraphs,
        n_sentences,
        n_words,
        words_per_doc: n_words as f64 / n_docs as f64,
        paras_per_doc: n_paragraphs as f64 / n_docs as f64,
        sents_per_para: n_sentences as f64 / n_paragraphs as f64,
    }
}
