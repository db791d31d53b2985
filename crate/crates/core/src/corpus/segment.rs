use std::collections::HashSet;
use std::sync::OnceLock;

use super::Sentence;

const BUNDLED_ABBREVIATIONS: &str = include_str!("../../data/abbreviations.txt");

/// Abbreviation guard list used by [`split_sentences`].
#[derive(Debug, Clone)]
pub struct Abbreviations {
    words: HashSet<String>,
}

impl Abbreviations {
    /// Parses one abbreviation per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_owned)
            .collect();
        Abbreviations { words }
    }

    /// The list shipped with the crate.
    pub fn bundled() -> &'static Abbreviations {
        static LIST: OnceLock<Abbreviations> = OnceLock::new();
        LIST.get_or_init(|| Abbreviations::parse(BUNDLED_ABBREVIATIONS))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl Default for Abbreviations {
    fn default() -> Self {
        Abbreviations::bundled().clone()
    }
}

const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201d}', '\u{2019}'];
const OPENERS: &[char] = &['"', '\'', '(', '[', '\u{201c}', '\u{2018}'];

fn ends_sentence(word: &str) -> bool {
    let core = word.trim_end_matches(CLOSERS);
    matches!(core.chars().last(), Some('.' | '!' | '?'))
}

fn starts_upper(word: &str) -> bool {
    word.trim_start_matches(OPENERS)
        .chars()
        .next()
        .is_some_and(char::is_uppercase)
}

/// A lone capital followed by a period, as in "J. Smith".
fn is_initial(word: &str) -> bool {
    let mut chars = word.chars();
    matches!(
        (chars.next(), chars.next(), chars.next()),
        (Some(c), Some('.'), None) if c.is_uppercase()
    )
}

/// Splits a paragraph into sentences.
///
/// The paragraph is whitespace-normalized first. A boundary is placed after a
/// word ending in `.`, `!` or `?` (optionally followed by closing quotes or
/// brackets) when the next word starts with an uppercase letter, unless the
/// word is a listed abbreviation or a single-letter initial.
pub fn split_sentences(text: &str, abbreviations: &Abbreviations) -> Vec<Sentence> {
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut sentences = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for (i, word) in words.iter().enumerate() {
        current.push(word);
        let Some(next) = words.get(i + 1) else {
            break;
        };
        if ends_sentence(word)
            && starts_upper(next)
            && !abbreviations.contains(word)
            && !is_initial(word)
        {
            sentences.push(Sentence::new_unchecked(current.join(" ")));
            current.clear();
        }
    }
    if !current.is_empty() {
        sentences.push(Sentence::new_unchecked(current.join(" ")));
    }
    sentences
}
