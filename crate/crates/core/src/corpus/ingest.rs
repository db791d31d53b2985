use rayon::prelude::*;
use unicode_normalization::UnicodeNormalization;

use super::{split_sentences, Abbreviations, Corpus, Document, Paragraph};
use crate::error::{Error, Result};

pub const DEFAULT_DOC_DELIMITER: &str = "---DOC---";

#[derive(Debug, Clone)]
pub struct SegmentationConfig {
    /// A line equal to this (after trimming) starts a new document.
    pub doc_delimiter: String,
    pub abbreviations: Abbreviations,
    /// Apply NFC normalization before segmenting.
    pub nfc: bool,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            doc_delimiter: DEFAULT_DOC_DELIMITER.to_owned(),
            abbreviations: Abbreviations::default(),
            nfc: true,
        }
    }
}

fn decode(bytes: &[u8], origin: &str) -> Result<String> {
    std::str::from_utf8(bytes)
        .map(str::to_owned)
        .map_err(|e| Error::Decode(format!("{origin}: {e}")))
}

/// Splits a text into raw document bodies on delimiter lines.
fn split_documents<'a>(text: &'a str, delimiter: &str) -> Vec<Vec<&'a str>> {
    let mut docs = vec![Vec::new()];
    for line in text.lines() {
        if line.trim() == delimiter {
            docs.push(Vec::new());
        } else {
            docs.last_mut().expect("non-empty").push(line);
        }
    }
    docs
}

fn segment_document(lines: &[&str], cfg: &SegmentationConfig) -> Vec<Paragraph> {
    let mut paragraphs = Vec::new();
    let mut block: Vec<&str> = Vec::new();
    let mut flush = |block: &mut Vec<&str>| {
        if !block.is_empty() {
            let sentences = split_sentences(&block.join(" "), &cfg.abbreviations);
            if !sentences.is_empty() {
                paragraphs.push(Paragraph::new(sentences));
            }
            block.clear();
        }
    };
    for line in lines {
        if line.trim().is_empty() {
            flush(&mut block);
        } else {
            block.push(line);
        }
    }
    flush(&mut block);
    paragraphs
}

/// Segments one text stream. Documents are separated by delimiter lines and
/// get ids `doc0`, `doc1`, ...
pub fn ingest_text(bytes: &[u8], cfg: &SegmentationConfig) -> Result<Corpus> {
    let text = normalize(decode(bytes, "<stream>")?, cfg);
    let bodies = split_documents(&text, &cfg.doc_delimiter);
    let documents = build_documents(&bodies, cfg, |i, _| format!("doc{i}"));
    Corpus::new(documents)
}

/// Segments several named sources (usually files). Each source is one
/// document unless it contains delimiter lines, in which case its documents
/// are named `name#0`, `name#1`, ...
pub fn ingest_sources(sources: &[(String, Vec<u8>)], cfg: &SegmentationConfig) -> Result<Corpus> {
    let mut documents = Vec::new();
    for (name, bytes) in sources {
        let text = normalize(decode(bytes, name)?, cfg);
        let bodies = split_documents(&text, &cfg.doc_delimiter);
        let non_empty = bodies
            .iter()
            .filter(|b| b.iter().any(|l| !l.trim().is_empty()))
            .count();
        documents.extend(build_documents(&bodies, cfg, |i, _| {
            if non_empty == 1 {
                name.clone()
            } else {
                format!("{name}#{i}")
            }
        }));
    }
    Corpus::new(documents)
}

fn normalize(text: String, cfg: &SegmentationConfig) -> String {
    if cfg.nfc {
        text.nfc().collect()
    } else {
        text
    }
}

fn build_documents(
    bodies: &[Vec<&str>],
    cfg: &SegmentationConfig,
    name: impl Fn(usize, &[Paragraph]) -> String,
) -> Vec<Document> {
    let segmented: Vec<Vec<Paragraph>> = bodies
        .par_iter()
        .map(|lines| segment_document(lines, cfg))
        .collect();
    segmented
        .into_iter()
        .filter(|p| !p.is_empty())
        .enumerate()
        .map(|(i, paragraphs)| Document {
            id: name(i, &paragraphs),
            paragraphs,
        })
        .collect()
}
