//! Document / paragraph / sentence hierarchy.
//!
//! Every structural generator reads from a [`Corpus`]. The hierarchy is kept
//! exactly as it appears in the source: documents are ordered, paragraphs keep
//! their order inside a document and sentences keep their order inside a
//! paragraph.

mod ingest;
mod segment;
mod span;
mod stats;

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ingest::{ingest_sources, ingest_text, SegmentationConfig, DEFAULT_DOC_DELIMITER};
pub use segment::{split_sentences, Abbreviations};
pub use span::{sample_span, sample_span_capped, LengthDistribution, Span};
pub use stats::{corpus_stats, CorpusStats};

/// One sentence. Never empty, never contains a paragraph break.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Sentence(String);

impl Sentence {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text: String = text.into();
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(Error::Format {
                format: "sentence",
                message: "empty sentence".into(),
            });
        }
        if trimmed.contains("\n\n") {
            return Err(Error::Format {
                format: "sentence",
                message: "sentence contains a paragraph break".into(),
            });
        }
        Ok(Sentence(trimmed.to_owned()))
    }

    pub(crate) fn new_unchecked(text: String) -> Self {
        Sentence(text)
    }

    pub fn text(&self) -> &str {
        &self.0
    }

    pub fn word_count(&self) -> usize {
        self.0.split_whitespace().count()
    }
}

impl AsRef<str> for Sentence {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Paragraph {
    pub sentences: Vec<Sentence>,
}

impl Paragraph {
    pub fn new(sentences: Vec<Sentence>) -> Self {
        Paragraph { sentences }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Sentences joined by single spaces.
    pub fn text(&self) -> String {
        join_sentences(self.sentences.iter())
    }

    /// Text of the sentences at `indices`, in the order given.
    pub fn select(&self, indices: &[usize]) -> String {
        join_sentences(indices.iter().map(|&i| &self.sentences[i]))
    }
}

pub(crate) fn join_sentences<'a>(sentences: impl Iterator<Item = &'a Sentence>) -> String {
    let mut out = String::new();
    for s in sentences {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(s.text());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub paragraphs: Vec<Paragraph>,
}

impl Document {
    pub fn sentence_count(&self) -> usize {
        self.paragraphs.iter().map(Paragraph::len).sum()
    }

    /// All sentences joined by single spaces, paragraph breaks included.
    pub fn text(&self) -> String {
        join_sentences(self.paragraphs.iter().flat_map(|p| p.sentences.iter()))
    }
}

/// An immutable, validated collection of documents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Corpus {
    documents: Vec<Document>,
}

impl Corpus {
    /// Validates the hierarchy: at least one document, unique ids, no empty
    /// document or paragraph.
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut seen = HashSet::new();
        for doc in &documents {
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::Format {
                    format: "corpus",
                    message: format!("duplicate document id {:?}", doc.id),
                });
            }
            if doc.paragraphs.is_empty() {
                return Err(Error::Format {
                    format: "corpus",
                    message: format!("document {:?} has no paragraphs", doc.id),
                });
            }
            if let Some(p) = doc.paragraphs.iter().position(Paragraph::is_empty) {
                return Err(Error::Format {
                    format: "corpus",
                    message: format!("document {:?} paragraph {p} has no sentences", doc.id),
                });
            }
        }
        Ok(Corpus { documents })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn document(&self, index: usize) -> &Document {
        &self.documents[index]
    }

    pub fn paragraph(&self, doc: usize, para: usize) -> &Paragraph {
        &self.documents[doc].paragraphs[para]
    }

    /// Every sentence in corpus order.
    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.documents
            .iter()
            .flat_map(|d| d.paragraphs.iter())
            .flat_map(|p| p.sentences.iter())
    }

    /// `(doc, para)` for every paragraph in corpus order.
    pub fn paragraph_refs(&self) -> Vec<(usize, usize)> {
        self.documents
            .iter()
            .enumerate()
            .flat_map(|(d, doc)| (0..doc.paragraphs.len()).map(move |p| (d, p)))
            .collect()
    }

    /// Reads canonical JSONL: one `{"id", "paragraphs": [[sentence, ...], ...]}` per line.
    pub fn read_jsonl(reader: impl BufRead) -> Result<Self> {
        let mut documents = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Format {
                format: "corpus jsonl",
                message: format!("line {}: {e}", lineno + 1),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawDocument = serde_json::from_str(&line).map_err(|e| Error::Format {
                format: "corpus jsonl",
                message: format!("line {}: {e}", lineno + 1),
            })?;
            documents.push(raw.into_document()?);
        }
        Corpus::new(documents)
    }

    pub fn write_jsonl(&self, mut writer: impl Write) -> Result<()> {
        for doc in &self.documents {
            serde_json::to_writer(&mut writer, doc)?;
            writer
                .write_all(b"\n")
                .map_err(|e| Error::io("<corpus output>", e))?;
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct RawDocument {
    id: String,
    paragraphs: Vec<Vec<String>>,
}

impl RawDocument {
    fn into_document(self) -> Result<Document> {
        let paragraphs = self
            .paragraphs
            .into_iter()
            .map(|p| {
                p.into_iter()
                    .map(Sentence::new)
                    .collect::<Result<Vec<_>>>()
                    .map(Paragraph::new)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Document {
            id: self.id,
            paragraphs,
        })
    }
}
