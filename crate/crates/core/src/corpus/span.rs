use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Paragraph;
use crate::error::{Error, Result};

/// A contiguous run of sentences `start..=end` inside one paragraph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub doc: usize,
    pub para: usize,
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, sentence: usize) -> bool {
        (self.start..=self.end).contains(&sentence)
    }

    pub fn indices(&self) -> Vec<usize> {
        (self.start..=self.end).collect()
    }
}

/// Discrete distribution over span lengths `1..=max`.
#[derive(Debug, Clone)]
pub struct LengthDistribution {
    probs: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl LengthDistribution {
    /// `probs[i]` is the probability of length `i + 1`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let index = WeightedIndex::new(&probs)
            .map_err(|e| Error::config(format!("length distribution {probs:?}: {e}")))?;
        Ok(LengthDistribution { probs, index })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn max_len(&self) -> usize {
        self.probs.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index.sample(rng) + 1
    }
}

/// Draws a span from `paragraph` that avoids every index in `exclude`.
///
/// The length comes from `dist` and is truncated to the longest contiguous run
/// of usable sentences; the start is uniform over all placements of that
/// length.
pub fn sample_span<R: Rng + ?Sized>(
    paragraph: &Paragraph,
    at: (usize, usize),
    dist: &LengthDistribution,
    rng: &mut R,
    exclude: &[usize],
) -> Result<Span> {
    sample_span_capped(paragraph, at, dist, rng, exclude, usize::MAX)
}

/// [`sample_span`] with an extra upper bound on the span length.
pub fn sample_span_capped<R: Rng + ?Sized>(
    paragraph: &Paragraph,
    at: (usize, usize),
    dist: &LengthDistribution,
    rng: &mut R,
    exclude: &[usize],
    cap: usize,
) -> Result<Span> {
    let n = paragraph.len();
    let free: Vec<bool> = (0..n).map(|i| !exclude.contains(&i)).collect();
    let mut room = 0;
    let mut run = 0;
    for &f in &free {
        run = if f { run + 1 } else { 0 };
        room = room.max(run);
    }
    let room = room.min(cap);
    if room == 0 {
        return Err(Error::insufficient(format!(
            "paragraph {}:{} has no usable sentence",
            at.0, at.1
        )));
    }
    let len = dist.sample(rng).min(room);
    let starts: Vec<usize> = (0..=n - len)
        .filter(|&s| free[s..s + len].iter().all(|&f| f))
        .collect();
    let start = starts[rng.random_range(0..starts.len())];
    Ok(Span {
        doc: at.0,
        para: at.1,
        start,
        end: start + len - 1,
    })
}
