//! Shared fixtures and independent oracles for the integration tests and the
//! acceptance harness.
#![allow(dead_code)]

pub mod checks;
pub mod nets;
pub mod rank;
pub mod stats;
pub mod tok;

use objforge::corpus::{Corpus, Document, Paragraph, Sentence};

/// Outcome of one acceptance check: a short detail line either way.
pub type Check = Result<String, String>;

/// Fails the check with a formatted message unless `cond` holds.
#[macro_export]
macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// Corpus shaped per document as a list of paragraph sizes; every sentence
/// text is unique.
pub fn shaped(shape: &[Vec<usize>]) -> Corpus {
    let documents = shape
        .iter()
        .enumerate()
        .map(|(d, paras)| Document {
            id: format!("doc{d}"),
            paragraphs: paras
                .iter()
                .enumerate()
                .map(|(p, &n)| {
                    Paragraph::new((0..n).map(|s| sentence(&format!("Doc {d} para {p} line {s} says hello."))).collect())
                })
                .collect(),
        })
        .collect();
    Corpus::new(documents).unwrap()
}

pub fn grid(docs: usize, paras: usize, sents: usize) -> Corpus {
    shaped(&vec![vec![sents; paras]; docs])
}

pub fn sentence(text: &str) -> Sentence {
    Sentence::new(text).unwrap()
}

/// One document per line group: paragraphs of whitespace-separated words,
/// one sentence each.
pub fn word_corpus(paragraphs: &[&str]) -> Corpus {
    let doc = Document {
        id: "words".into(),
        paragraphs: paragraphs.iter().map(|t| Paragraph::new(vec![sentence(t)])).collect(),
    };
    Corpus::new(vec![doc]).unwrap()
}

/// Runs `f`, turning a panic into a failed check.
pub fn guarded(f: impl FnOnce() -> Check + std::panic::UnwindSafe) -> Check {
    match std::panic::catch_unwind(f) {
        Ok(r) => r,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        }
    }
}
