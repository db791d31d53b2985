use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const MASK_TOKEN: &str = "<mask>";
pub const BOS_TOKEN: &str = "<s>";
pub const EOS_TOKEN: &str = "</s>";

/// Stand-in for a space in whitespace mode.
pub const SPACE_SYMBOL: char = '\u{2581}';
/// Prefix marking a word-start piece in serialized token strings.
pub const WORD_START_MARK: char = '\u{120}';

/// Log-probability assigned to an out-of-alphabet character during Viterbi
/// decoding; low enough that it is only chosen when nothing else matches.
const UNK_LOG_PROB: f64 = -1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Split on whitespace; pieces never cross word boundaries.
    Word,
    /// Treat spaces as the symbol `▁` and segment the raw stream.
    Whitespace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialIds {
    pub pad: u32,
    pub unk: u32,
    pub mask: u32,
    pub bos: u32,
    pub eos: u32,
}

impl SpecialIds {
    pub fn all(&self) -> [u32; 5] {
        [self.pad, self.unk, self.mask, self.bos, self.eos]
    }

    pub fn contains(&self, id: u32) -> bool {
        self.all().contains(&id)
    }
}

/// Token ids plus a word-start flag per id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub word_starts: Vec<bool>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn push(&mut self, id: u32, word_start: bool) {
        self.ids.push(id);
        self.word_starts.push(word_start);
    }
}

/// A trained subword vocabulary. Ids are dense and follow token order; the
/// five special tokens are part of the id space but are never produced by
/// matching text.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    lookup: HashMap<String, u32>,
    merges: Vec<(String, String)>,
    unigram_probs: Option<BTreeMap<String, f64>>,
    log_probs: Option<Vec<f64>>,
    specials: SpecialIds,
    mode: BoundaryMode,
    max_piece_chars: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    tokens: Vec<String>,
    merges: Vec<(String, String)>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    unigram_probs: Option<BTreeMap<String, f64>>,
    specials: SpecialIds,
    mode: BoundaryMode,
}

impl Vocabulary {
    /// Builds a vocabulary with the specials at ids `0..5` followed by
    /// `learned` in the given order.
    pub fn from_learned(
        learned: Vec<String>,
        merges: Vec<(String, String)>,
        unigram_probs: Option<BTreeMap<String, f64>>,
        mode: BoundaryMode,
    ) -> Result<Self> {
        let mut tokens: Vec<String> = [PAD_TOKEN, UNK_TOKEN, MASK_TOKEN, BOS_TOKEN, EOS_TOKEN]
            .into_iter()
            .map(str::to_owned)
            .collect();
        tokens.extend(learned);
        let specials = SpecialIds {
            pad: 0,
            unk: 1,
            mask: 2,
            bos: 3,
            eos: 4,
        };
        Self::assemble(tokens, merges, unigram_probs, specials, mode)
    }

    fn assemble(
        tokens: Vec<String>,
        merges: Vec<(String, String)>,
        unigram_probs: Option<BTreeMap<String, f64>>,
        specials: SpecialIds,
        mode: BoundaryMode,
    ) -> Result<Self> {
        for id in specials.all() {
            if id as usize >= tokens.len() {
                return Err(Error::Range {
                    what: "special token id",
                    index: id as usize,
                    size: tokens.len(),
                });
            }
        }
        let mut lookup = HashMap::with_capacity(tokens.len());
        for (id, token) in tokens.iter().enumerate() {
            if token.is_empty() {
                return Err(Error::config(format!("token {id} is empty")));
            }
            if specials.contains(id as u32) {
                continue;
            }
            if lookup.insert(token.clone(), id as u32).is_some() {
                return Err(Error::config(format!("duplicate token {token:?}")));
            }
        }
        for id in specials.all() {
            if lookup.contains_key(&tokens[id as usize]) {
                return Err(Error::config(format!(
                    "special token {:?} collides with a learned token",
                    tokens[id as usize]
                )));
            }
        }
        let log_probs = unigram_probs.as_ref().map(|probs| {
            tokens
                .iter()
                .enumerate()
                .map(|(id, t)| match probs.get(t) {
                    Some(&p) if !specials.contains(id as u32) && p > 0.0 => p.ln(),
                    _ => f64::NEG_INFINITY,
                })
                .collect()
        });
        let max_piece_chars = lookup.keys().map(|t| t.chars().count()).max().unwrap_or(1);
        Ok(Vocabulary {
            tokens,
            lookup,
            merges,
            unigram_probs,
            log_probs,
            specials,
            mode,
            max_piece_chars,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Id of a learned token; specials are not reachable by text.
    pub fn id(&self, token: &str) -> Option<u32> {
        self.lookup.get(token).copied()
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn unigram_probs(&self) -> Option<&BTreeMap<String, f64>> {
        self.unigram_probs.as_ref()
    }

    pub fn specials(&self) -> SpecialIds {
        self.specials
    }

    pub fn mode(&self) -> BoundaryMode {
        self.mode
    }

    /// Ids of every non-special token, ascending.
    pub fn regular_ids(&self) -> Vec<u32> {
        (0..self.tokens.len() as u32)
            .filter(|&id| !self.specials.contains(id))
            .collect()
    }

    pub fn encode(&self, text: &str) -> TokenSequence {
        let mut out = TokenSequence::default();
        match self.mode {
            BoundaryMode::Word => {
                for word in text.split_whitespace() {
                    let chars: Vec<char> = word.chars().collect();
                    for (i, id) in self.segment(&chars).into_iter().enumerate() {
                        out.push(id, i == 0);
                    }
                }
            }
            BoundaryMode::Whitespace => {
                let chars: Vec<char> = to_symbol_stream(text).chars().collect();
                let mut pos = 0;
                for id in self.segment(&chars) {
                    let start = pos == 0 || chars[pos] == SPACE_SYMBOL;
                    pos += if id == self.specials.unk {
                        1
                    } else {
                        self.tokens[id as usize].chars().count()
                    };
                    out.push(id, start);
                }
            }
        }
        out
    }

    fn segment(&self, chars: &[char]) -> Vec<u32> {
        match &self.log_probs {
            Some(lp) => self.segment_viterbi(chars, lp),
            None => self.segment_greedy(chars),
        }
    }

    fn segment_greedy(&self, chars: &[char]) -> Vec<u32> {
        let mut ids = Vec::new();
        let mut pos = 0;
        let mut piece = String::new();
        while pos < chars.len() {
            let longest = self.max_piece_chars.min(chars.len() - pos);
            let mut matched = None;
            for len in (1..=longest).rev() {
                piece.clear();
                piece.extend(&chars[pos..pos + len]);
                if let Some(&id) = self.lookup.get(&piece) {
                    matched = Some((id, len));
                    break;
                }
            }
            let (id, len) = matched.unwrap_or((self.specials.unk, 1));
            ids.push(id);
            pos += len;
        }
        ids
    }

    fn segment_viterbi(&self, chars: &[char], log_probs: &[f64]) -> Vec<u32> {
        let n = chars.len();
        let mut best = vec![f64::NEG_INFINITY; n + 1];
        let mut back: Vec<(usize, u32)> = vec![(0, self.specials.unk); n + 1];
        best[0] = 0.0;
        let mut piece = String::new();
        for end in 1..=n {
            let lo = end.saturating_sub(self.max_piece_chars);
            for start in lo..end {
                if best[start] == f64::NEG_INFINITY {
                    continue;
                }
                piece.clear();
                piece.extend(&chars[start..end]);
                let score = match self.lookup.get(&piece) {
                    Some(&id) => Some((log_probs[id as usize], id)),
                    None if end - start == 1 => Some((UNK_LOG_PROB, self.specials.unk)),
                    None => None,
                };
                if let Some((lp, id)) = score {
                    let total = best[start] + lp;
                    if total > best[end] {
                        best[end] = total;
                        back[end] = (start, id);
                    }
                }
            }
        }
        let mut ids = Vec::new();
        let mut end = n;
        while end > 0 {
            let (start, id) = back[end];
            ids.push(id);
            end = start;
        }
        ids.reverse();
        ids
    }

    /// Concatenates pieces, restoring single spaces at word starts.
    pub fn decode(&self, seq: &TokenSequence) -> Result<String> {
        let mut out = String::new();
        for (i, &id) in seq.ids.iter().enumerate() {
            let token = self.token(id).ok_or(Error::Range {
                what: "token id",
                index: id as usize,
                size: self.tokens.len(),
            })?;
            match self.mode {
                BoundaryMode::Word => {
                    if i > 0 && seq.word_starts.get(i).copied().unwrap_or(false) {
                        out.push(' ');
                    }
                    out.push_str(token);
                }
                BoundaryMode::Whitespace => out.push_str(token),
            }
        }
        if self.mode == BoundaryMode::Whitespace {
            out = out.replace(SPACE_SYMBOL, " ");
        }
        Ok(out)
    }

    /// Token strings with `Ġ` prepended to word-start pieces.
    pub fn pieces(&self, seq: &TokenSequence) -> Result<Vec<String>> {
        seq.ids
            .iter()
            .zip(&seq.word_starts)
            .map(|(&id, &start)| {
                let token = self.token(id).ok_or(Error::Range {
                    what: "token id",
                    index: id as usize,
                    size: self.tokens.len(),
                })?;
                Ok(if start && self.mode == BoundaryMode::Word {
                    format!("{WORD_START_MARK}{token}")
                } else {
                    token.to_owned()
                })
            })
            .collect()
    }

    pub fn write_json(&self, writer: impl Write) -> Result<()> {
        let file = VocabularyFile {
            tokens: self.tokens.clone(),
            merges: self.merges.clone(),
            unigram_probs: self.unigram_probs.clone(),
            specials: self.specials,
            mode: self.mode,
        };
        serde_json::to_writer_pretty(writer, &file)?;
        Ok(())
    }

    pub fn read_json(reader: impl Read) -> Result<Self> {
        let file: VocabularyFile = serde_json::from_reader(reader)?;
        Self::assemble(
            file.tokens,
            file.merges,
            file.unigram_probs,
            file.specials,
            file.mode,
        )
    }
}

pub(crate) fn to_symbol_stream(text: &str) -> String {
    let mut out = String::new();
    for (i, word) in text.split_whitespace().enumerate() {
        if i > 0 {
            out.push(SPACE_SYMBOL);
        }
        out.push_str(word);
    }
    out
}
