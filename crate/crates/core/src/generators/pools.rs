use rand::seq::index;
use rand::Rng;

use crate::corpus::Corpus;

/// Items grouped by document, so that uniform draws from "every document
/// except `d`" take constant time.
#[derive(Debug, Clone)]
pub(super) struct DocPool<T> {
    items: Vec<T>,
    starts: Vec<usize>,
}

impl<T: Copy> DocPool<T> {
    fn build(docs: usize, mut per_doc: impl FnMut(usize) -> Vec<T>) -> Self {
        let mut items = Vec::new();
        let mut starts = Vec::with_capacity(docs + 1);
        for d in 0..docs {
            starts.push(items.len());
            items.extend(per_doc(d));
        }
        starts.push(items.len());
        DocPool { items, starts }
    }

    pub fn within(&self, doc: usize) -> &[T] {
        &self.items[self.starts[doc]..self.starts[doc + 1]]
    }

    fn map_outside(&self, doc: usize, r: usize) -> T {
        let (lo, hi) = (self.starts[doc], self.starts[doc + 1]);
        self.items[if r >= lo { r + hi - lo } else { r }]
    }

    /// `amount` items from documents other than `doc`: distinct when there
    /// are enough of them, drawn with replacement otherwise. `None` only
    /// when every item belongs to `doc`.
    pub fn sample_outside<R: Rng + ?Sized>(&self, doc: usize, amount: usize, rng: &mut R) -> Option<Vec<T>> {
        let outside = self.items.len() - self.within(doc).len();
        if amount == 0 {
            return Some(Vec::new());
        }
        if outside == 0 {
            return None;
        }
        if outside < amount {
            return Some(
                (0..amount)
                    .map(|_| self.map_outside(doc, rng.random_range(0..outside)))
                    .collect(),
            );
        }
        Some(
            index::sample(rng, outside, amount)
                .into_iter()
                .map(|r| self.map_outside(doc, r))
                .collect(),
        )
    }
}

/// `amount` distinct items of `items`, or `None` if there are fewer.
pub(super) fn sample_from<T: Copy, R: Rng + ?Sized>(items: &[T], amount: usize, rng: &mut R) -> Option<Vec<T>> {
    if items.len() < amount {
        return None;
    }
    Some(index::sample(rng, items.len(), amount).into_iter().map(|i| items[i]).collect())
}

#[derive(Debug, Clone)]
pub(super) struct Pools {
    /// Every paragraph.
    pub paragraphs: DocPool<(usize, usize)>,
    /// Paragraphs with at least two sentences.
    pub multi: DocPool<(usize, usize)>,
    /// Paragraphs other than the first of their document.
    pub later: DocPool<(usize, usize)>,
    /// Every sentence as `(doc, para, sentence)`.
    pub sentences: DocPool<(usize, usize, usize)>,
}

impl Pools {
    pub fn new(corpus: &Corpus) -> Self {
        let paras = |d: usize| -> Vec<(usize, usize)> {
            (0..corpus.document(d).paragraphs.len()).map(|p| (d, p)).collect()
        };
        Pools {
            paragraphs: DocPool::build(corpus.len(), paras),
            multi: DocPool::build(corpus.len(), |d| {
                paras(d)
                    .into_iter()
                    .filter(|&(d, p)| corpus.paragraph(d, p).len() >= 2)
                    .collect()
            }),
            later: DocPool::build(corpus.len(), |d| paras(d).into_iter().skip(1).collect()),
            sentences: DocPool::build(corpus.len(), |d| {
                paras(d)
                    .into_iter()
                    .flat_map(|(d, p)| (0..corpus.paragraph(d, p).len()).map(move |s| (d, p, s)))
                    .collect()
            }),
        }
    }
}
