use std::collections::{BTreeMap, HashMap};

use super::vocab::{BoundaryMode, Vocabulary, SPACE_SYMBOL};
use super::training_units;
use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Expected count given to a character that no segmentation uses, so the
/// character fallback stays reachable at encode time.
const MIN_CHAR_COUNT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct UnigramOptions {
    /// Fraction of removable tokens dropped per round.
    pub alpha: f64,
    /// Longest seed substring, in characters. Whole words are seeded
    /// regardless of length.
    pub max_piece_chars: usize,
    /// Minimum occurrence count of a seed substring.
    pub min_seed_count: u64,
    /// EM iterations per model fit.
    pub em_iterations: usize,
    /// Refit the model for every candidate removal instead of renormalizing.
    /// Quadratic in the vocabulary size; meant for tiny corpora.
    pub exact: bool,
}

impl Default for UnigramOptions {
    fn default() -> Self {
        UnigramOptions {
            alpha: 0.1,
            max_piece_chars: 8,
            min_seed_count: 2,
            em_iterations: 3,
            exact: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    start: u32,
    end: u32,
    piece: u32,
}

/// One distinct training unit as a lattice of every vocabulary piece that
/// matches somewhere inside it. Edges are sorted by `(end, start)`.
#[derive(Debug, Clone)]
struct Lattice {
    len: usize,
    count: f64,
    edges: Vec<Edge>,
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

impl Lattice {
    fn forward(&self, weight: impl Fn(u32) -> f64) -> Vec<f64> {
        let mut alpha = vec![f64::NEG_INFINITY; self.len + 1];
        alpha[0] = 0.0;
        for e in &self.edges {
            let w = weight(e.piece);
            if w == f64::NEG_INFINITY {
                continue;
            }
            let v = alpha[e.start as usize] + w;
            alpha[e.end as usize] = log_add(alpha[e.end as usize], v);
        }
        alpha
    }

    fn backward(&self, weight: impl Fn(u32) -> f64) -> Vec<f64> {
        let mut beta = vec![f64::NEG_INFINITY; self.len + 1];
        beta[self.len] = 0.0;
        for e in self.edges.iter().rev() {
            let w = weight(e.piece);
            if w == f64::NEG_INFINITY {
                continue;
            }
            let v = beta[e.end as usize] + w;
            beta[e.start as usize] = log_add(beta[e.start as usize], v);
        }
        beta
    }
}

/// State of the top-down unigram vocabulary search.
///
/// Seeds are every character, every whole word and every substring of at
/// most `max_piece_chars` characters occurring at least `min_seed_count`
/// times. Each round fits the model by EM (marginalizing over all
/// segmentations), scores each removable token by the loss increase its
/// removal causes and drops the `alpha` fraction with the smallest increase.
/// Single characters are never removed.
#[derive(Debug, Clone)]
pub struct UnigramTrainer {
    opts: UnigramOptions,
    mode: BoundaryMode,
    pieces: Vec<String>,
    protected: Vec<bool>,
    alive: Vec<bool>,
    probs: Vec<f64>,
    lattices: Vec<Lattice>,
    containing: Vec<Vec<u32>>,
    loss: f64,
    expected_len: Vec<f64>,
}

impl UnigramTrainer {
    pub fn new(corpus: &Corpus, mode: BoundaryMode, opts: UnigramOptions) -> Result<Self> {
        Self::from_units(training_units(corpus, mode), mode, opts)
    }

    pub fn from_units(units: Vec<String>, mode: BoundaryMode, opts: UnigramOptions) -> Result<Self> {
        if !(opts.alpha > 0.0 && opts.alpha <= 1.0) {
            return Err(Error::config(format!("prune fraction {} outside (0, 1]", opts.alpha)));
        }
        if opts.max_piece_chars == 0 {
            return Err(Error::config("max_piece_chars must be positive"));
        }
        let mut unit_counts: BTreeMap<Vec<char>, u64> = BTreeMap::new();
        for u in units {
            if !u.is_empty() {
                *unit_counts.entry(u.chars().collect()).or_default() += 1;
            }
        }
        if unit_counts.is_empty() {
            return Err(Error::EmptyCorpus);
        }

        let mut substrings: HashMap<String, u64> = HashMap::new();
        let mut words: BTreeMap<String, u64> = BTreeMap::new();
        for (chars, &c) in &unit_counts {
            for start in 0..chars.len() {
                let longest = opts.max_piece_chars.min(chars.len() - start);
                for len in 1..=longest {
                    let s: String = chars[start..start + len].iter().collect();
                    *substrings.entry(s).or_default() += c;
                }
            }
            let text: String = chars.iter().collect();
            let split: Vec<&str> = match mode {
                BoundaryMode::Word => vec![text.as_str()],
                BoundaryMode::Whitespace => text.split(SPACE_SYMBOL).collect(),
            };
            for w in split.into_iter().filter(|w| !w.is_empty()) {
                *words.entry(w.to_owned()).or_default() += c;
            }
        }

        let mut seeds: BTreeMap<String, (u64, bool)> = BTreeMap::new();
        for (s, &c) in &substrings {
            let single = s.chars().count() == 1;
            if single || c >= opts.min_seed_count {
                seeds.insert(s.clone(), (c, single));
            }
        }
        for (w, c) in words {
            seeds.entry(w).or_insert((c, false));
        }

        let mut pieces = Vec::with_capacity(seeds.len());
        let mut protected = Vec::with_capacity(seeds.len());
        let mut freq = Vec::with_capacity(seeds.len());
        for (s, (c, single)) in seeds {
            pieces.push(s);
            protected.push(single);
            freq.push(c as f64);
        }
        let total: f64 = freq.iter().sum();
        let probs: Vec<f64> = freq.iter().map(|f| f / total).collect();

        let index: HashMap<&str, u32> = pieces
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i as u32))
            .collect();
        let longest_piece = pieces.iter().map(|p| p.chars().count()).max().unwrap_or(1);
        let mut containing = vec![Vec::new(); pieces.len()];
        let mut lattices = Vec::with_capacity(unit_counts.len());
        let mut buf = String::new();
        for (u, (chars, &c)) in unit_counts.iter().enumerate() {
            let mut edges = Vec::new();
            for end in 1..=chars.len() {
                for start in end.saturating_sub(longest_piece)..end {
                    buf.clear();
                    buf.extend(&chars[start..end]);
                    if let Some(&piece) = index.get(buf.as_str()) {
                        edges.push(Edge {
                            start: start as u32,
                            end: end as u32,
                            piece,
                        });
                        let list: &mut Vec<u32> = &mut containing[piece as usize];
                        if list.last() != Some(&(u as u32)) {
                            list.push(u as u32);
                        }
                    }
                }
            }
            lattices.push(Lattice {
                len: chars.len(),
                count: c as f64,
                edges,
            });
        }

        let n = pieces.len();
        Ok(UnigramTrainer {
            opts,
            mode,
            pieces,
            protected,
            alive: vec![true; n],
            probs,
            lattices,
            containing,
            loss: f64::NAN,
            expected_len: Vec::new(),
        })
    }

    /// Every seed piece, alive or not, in seed order.
    pub fn pieces(&self) -> &[String] {
        &self.pieces
    }

    /// Current probability of each seed piece (zero once removed).
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn is_alive(&self, piece: usize) -> bool {
        self.alive[piece]
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    /// Negative log-likelihood of the training units after the last fit.
    pub fn loss(&self) -> f64 {
        self.loss
    }

    fn log_probs(&self) -> Vec<f64> {
        self.probs
            .iter()
            .zip(&self.alive)
            .map(|(&p, &a)| if a && p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
            .collect()
    }

    /// Expected piece counts, loss and expected segment length per unit.
    fn expectation(&self, lp: &[f64]) -> (Vec<f64>, f64, Vec<f64>) {
        let mut counts = vec![0.0; self.pieces.len()];
        let mut loss = 0.0;
        let mut lens = Vec::with_capacity(self.lattices.len());
        for lat in &self.lattices {
            let w = |p: u32| lp[p as usize];
            let alpha = lat.forward(w);
            let beta = lat.backward(w);
            let z = alpha[lat.len];
            loss -= lat.count * z;
            let mut len = 0.0;
            for e in &lat.edges {
                let lw = lp[e.piece as usize];
                if lw == f64::NEG_INFINITY {
                    continue;
                }
                let post = (alpha[e.start as usize] + lw + beta[e.end as usize] - z).exp();
                counts[e.piece as usize] += lat.count * post;
                len += post;
            }
            lens.push(len);
        }
        (counts, loss, lens)
    }

    /// Runs the configured number of EM iterations from the current
    /// probabilities, then records the loss under the fitted model.
    pub fn fit(&mut self) {
        for _ in 0..self.opts.em_iterations {
            let (mut counts, _, _) = self.expectation(&self.log_probs());
            for (i, c) in counts.iter_mut().enumerate() {
                if !self.alive[i] {
                    *c = 0.0;
                } else if self.protected[i] && *c < MIN_CHAR_COUNT {
                    *c = MIN_CHAR_COUNT;
                }
            }
            let total: f64 = counts.iter().sum();
            self.probs = counts.iter().map(|c| c / total).collect();
        }
        let (_, loss, lens) = self.expectation(&self.log_probs());
        self.loss = loss;
        self.expected_len = lens;
    }

    fn renormalize(&mut self) {
        for (p, &a) in self.probs.iter_mut().zip(&self.alive) {
            if !a {
                *p = 0.0;
            }
        }
        let total: f64 = self.probs.iter().sum();
        if total > 0.0 {
            for p in &mut self.probs {
                *p /= total;
            }
        }
    }

    /// Loss increase caused by removing each piece; `None` for characters
    /// and removed pieces. Requires a prior [`fit`](Self::fit).
    pub fn deltas(&self) -> Vec<Option<f64>> {
        let removable = |t: usize| self.alive[t] && !self.protected[t];
        if self.opts.exact {
            return (0..self.pieces.len())
                .map(|t| {
                    removable(t).then(|| {
                        let mut other = self.clone();
                        other.alive[t] = false;
                        other.renormalize();
                        other.fit();
                        other.loss - self.loss
                    })
                })
                .collect();
        }
        let lp = self.log_probs();
        let total_len: f64 = self
            .lattices
            .iter()
            .zip(&self.expected_len)
            .map(|(l, e)| l.count * e)
            .sum();
        (0..self.pieces.len())
            .map(|t| {
                removable(t).then(|| {
                    let p = self.probs[t];
                    if p <= 0.0 {
                        return 0.0;
                    }
                    let keep = (1.0 - p).ln();
                    let mut delta = 0.0;
                    let mut covered = 0.0;
                    for &u in &self.containing[t] {
                        let lat = &self.lattices[u as usize];
                        let before = self.forward_z(lat, &lp, None);
                        let after = self.forward_z(lat, &lp, Some((t as u32, keep)));
                        delta += lat.count * (before - after);
                        covered += lat.count * self.expected_len[u as usize];
                    }
                    // units without the piece only see the renormalization,
                    // roughly one factor 1 / (1 - p) per expected segment
                    delta + (total_len - covered) * keep
                })
            })
            .collect()
    }

    fn forward_z(&self, lat: &Lattice, lp: &[f64], drop: Option<(u32, f64)>) -> f64 {
        let alpha = lat.forward(|p| match drop {
            Some((t, _)) if p == t => f64::NEG_INFINITY,
            Some((_, keep)) => lp[p as usize] - keep,
            None => lp[p as usize],
        });
        alpha[lat.len]
    }

    /// Drops the smallest-delta pieces without going below `k`; returns how
    /// many were removed.
    pub fn prune_step(&mut self, k: usize) -> Result<usize> {
        let deltas = self.deltas();
        let mut ranked: Vec<(f64, usize)> = deltas
            .iter()
            .enumerate()
            .filter_map(|(i, d)| d.map(|d| (d, i)))
            .collect();
        if ranked.is_empty() {
            return Err(Error::config(format!(
                "cannot reach {k} tokens without removing single characters"
            )));
        }
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| self.pieces[a.1].cmp(&self.pieces[b.1])));
        let wanted = ((self.opts.alpha * ranked.len() as f64).floor() as usize).max(1);
        let n = wanted.min(self.alive_count().saturating_sub(k));
        for &(_, i) in &ranked[..n] {
            self.alive[i] = false;
        }
        self.renormalize();
        Ok(n)
    }

    /// Prunes until exactly `k` pieces remain.
    pub fn train(mut self, k: usize) -> Result<Vocabulary> {
        let chars = self.protected.iter().filter(|&&p| p).count();
        if k < chars {
            return Err(Error::config(format!(
                "target vocabulary size {k} is below the alphabet size {chars}"
            )));
        }
        if self.alive_count() < k {
            return Err(Error::config(format!(
                "seed vocabulary has {} pieces, fewer than the target {k}",
                self.alive_count()
            )));
        }
        self.fit();
        while self.alive_count() > k {
            self.prune_step(k)?;
            self.fit();
        }
        self.into_vocabulary()
    }

    /// Vocabulary of the alive pieces: characters first, then the rest by
    /// descending probability.
    pub fn into_vocabulary(self) -> Result<Vocabulary> {
        let mut order: Vec<usize> = (0..self.pieces.len()).filter(|&i| self.alive[i]).collect();
        order.sort_by(|&a, &b| {
            self.protected[b]
                .cmp(&self.protected[a])
                .then_with(|| self.probs[b].total_cmp(&self.probs[a]))
                .then_with(|| self.pieces[a].cmp(&self.pieces[b]))
        });
        let probs: BTreeMap<String, f64> = order
            .iter()
            .map(|&i| (self.pieces[i].clone(), self.probs[i]))
            .collect();
        let learned = order.iter().map(|&i| self.pieces[i].clone()).collect();
        Vocabulary::from_learned(learned, Vec::new(), Some(probs), self.mode)
    }
}

/// UnigramLM: top-down pruning to `k` learned tokens.
pub fn train_unigram(
    corpus: &Corpus,
    k: usize,
    mode: BoundaryMode,
    opts: UnigramOptions,
) -> Result<Vocabulary> {
    UnigramTrainer::new(corpus, mode, opts)?.train(k)
}
