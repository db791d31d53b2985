//! Answer-selection ranking metrics and classification-head cost accounting.
//!
//! Candidates are ranked by descending score; equal scores keep candidate
//! index order. Groups without a relevant candidate are excluded from every
//! collection metric, with a warning, and counted in [`EvalReport::excluded`].

use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Candidate scores and binary relevance of one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGroup")]
pub struct RankedGroup {
    scores: Vec<f64>,
    relevance: Vec<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGroup {
    scores: Vec<f64>,
    relevance: Vec<Relevance>,
}

/// Accepts `true`/`false` as well as `0`/`1`.
#[derive(Deserialize)]
#[serde(untagged)]
enum Relevance {
    Flag(bool),
    Int(u8),
}

impl TryFrom<RawGroup> for RankedGroup {
    type Error = Error;

    fn try_from(raw: RawGroup) -> Result<Self> {
        let relevance = raw
            .relevance
            .into_iter()
            .map(|r| match r {
                Relevance::Flag(b) => Ok(b),
                Relevance::Int(0) => Ok(false),
                Relevance::Int(1) => Ok(true),
                Relevance::Int(x) => Err(Error::config(format!("relevance must be 0 or 1, got {x}"))),
            })
            .collect::<Result<_>>()?;
        RankedGroup::new(raw.scores, relevance)
    }
}

impl RankedGroup {
    pub fn new(scores: Vec<f64>, relevance: Vec<bool>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::config("a ranked group needs at least one candidate"));
        }
        if scores.len() != relevance.len() {
            return Err(Error::config(format!(
                "{} scores but {} relevance labels",
                scores.len(),
                relevance.len()
            )));
        }
        if let Some(i) = scores.iter().position(|s| s.is_nan()) {
            return Err(Error::config(format!("score of candidate {i} is NaN")));
        }
        Ok(RankedGroup { scores, relevance })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn relevance(&self) -> &[bool] {
        &self.relevance
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn has_positive(&self) -> bool {
        self.relevance.contains(&true)
    }

    /// Candidate indices from best to worst.
    pub fn ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        // stable sort keeps index order among equal scores
        order.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]));
        order
    }

    /// The candidate the selection rule picks: highest score, lowest index on ties.
    pub fn selected(&self) -> usize {
        self.ranking()[0]
    }

    fn ranked_relevance(&self) -> Vec<bool> {
        self.ranking().into_iter().map(|i| self.relevance[i]).collect()
    }
}

/// Mean over relevant ranks r of (relevant in top r) / r.
/// `None` without a relevant candidate.
pub fn average_precision(g: &RankedGroup) -> Option<f64> {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, rel) in g.ranked_relevance().into_iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    (hits > 0).then(|| sum / hits as f64)
}

/// One over the rank of the first relevant candidate.
pub fn reciprocal_rank(g: &RankedGroup) -> Option<f64> {
    g.ranked_relevance().into_iter().position(|r| r).map(|p| 1.0 / (p + 1) as f64)
}

/// Relevant candidates among the top `k`, divided by `k` (also when the
/// group is shorter than `k`).
pub fn precision_at_k(g: &RankedGroup, k: usize) -> Option<f64> {
    if !g.has_positive() || k == 0 {
        return None;
    }
    let hits = g.ranked_relevance().into_iter().take(k).filter(|&r| r).count();
    Some(hits as f64 / k as f64)
}

/// 1 if a relevant candidate is among the top `k`.
pub fn hit_at_k(g: &RankedGroup, k: usize) -> Option<f64> {
    if !g.has_positive() || k == 0 {
        return None;
    }
    Some(if g.ranked_relevance().into_iter().take(k).any(|r| r) { 1.0 } else { 0.0 })
}

fn mean_over(groups: &[RankedGroup], what: &str, f: impl Fn(&RankedGroup) -> Option<f64>) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for g in groups {
        match f(g) {
            Some(v) => {
                sum += v;
                n += 1;
            }
            None => log::warn!("{what}: excluding a group without a relevant candidate"),
        }
    }
    if n == 0 {
        return Err(Error::insufficient(format!("{what}: no group has a relevant candidate")));
    }
    Ok(sum / n as f64)
}

pub fn map(groups: &[RankedGroup]) -> Result<f64> {
    mean_over(groups, "MAP", average_precision)
}

pub fn mrr(groups: &[RankedGroup]) -> Result<f64> {
    mean_over(groups, "MRR", reciprocal_rank)
}

pub fn p_at_k(groups: &[RankedGroup], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::config("k must be at least 1"));
    }
    mean_over(groups, "P@k", |g| precision_at_k(g, k))
}

pub fn hit_rate_at_k(groups: &[RankedGroup], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::config("k must be at least 1"));
    }
    mean_over(groups, "HR@k", |g| hit_at_k(g, k))
}

/// Summary written by the `eval rank` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub map: f64,
    pub mrr: f64,
    #[serde(rename = "p@1")]
    pub p_at_1: f64,
    /// Groups that entered the averages.
    pub n_groups: usize,
    /// Groups dropped for lacking a relevant candidate.
    pub excluded: usize,
}

pub fn evaluate(groups: &[RankedGroup]) -> Result<EvalReport> {
    let excluded = groups.iter().filter(|g| !g.has_positive()).count();
    Ok(EvalReport {
        map: map(groups)?,
        mrr: mrr(groups)?,
        p_at_1: p_at_k(groups, 1)?,
        n_groups: groups.len() - excluded,
        excluded,
    })
}

/// One group per non-blank line: `{"scores": [...], "relevance": [...]}`.
pub fn read_groups(reader: impl BufRead) -> Result<Vec<RankedGroup>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Format { format: "ranked groups", message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let g = serde_json::from_str(&line).map_err(|e| Error::Format {
            format: "ranked groups",
            message: format!("line {}: {e}", n + 1),
        })?;
        out.push(g);
    }
    Ok(out)
}

/// Pre-training objectives whose output head is costed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadObjective {
    Mlm,
    Slm,
    Rts,
    Crts,
    /// Generator LM head plus the token-detection head.
    Electra,
}

impl HeadObjective {
    pub const ALL: [HeadObjective; 5] =
        [HeadObjective::Mlm, HeadObjective::Slm, HeadObjective::Rts, HeadObjective::Crts, HeadObjective::Electra];

    pub fn name(self) -> &'static str {
        match self {
            HeadObjective::Mlm => "MLM",
            HeadObjective::Slm => "SLM",
            HeadObjective::Rts => "RTS",
            HeadObjective::Crts => "C-RTS",
            HeadObjective::Electra => "ELECTRA",
        }
    }
}

impl fmt::Display for HeadObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeadObjective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase().replace('_', "-");
        HeadObjective::ALL
            .into_iter()
            .find(|o| o.name() == key || (key == "CRTS" && *o == HeadObjective::Crts))
            .ok_or_else(|| Error::config(format!("unknown head objective {s:?}")))
    }
}

/// Size and per-token cost of one output head. The encoder body is shared
/// by every objective and not counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadCost {
    pub objective: HeadObjective,
    pub d: u64,
    pub vocab_size: u64,
    pub params: u64,
    /// Two operations per multiply-add of the head product.
    pub flops_per_token: u64,
}

/// LM heads map `d` to the vocabulary; detection heads map `d` to two classes.
pub fn head_cost(objective: HeadObjective, d: u64, vocab_size: u64) -> HeadCost {
    let lm = vocab_size * d;
    let binary = 2 * d;
    let params = match objective {
        HeadObjective::Mlm | HeadObjective::Slm => lm,
        HeadObjective::Rts | HeadObjective::Crts => binary,
        HeadObjective::Electra => lm + binary,
    };
    HeadCost { objective, d, vocab_size, params, flops_per_token: 2 * params }
}

/// Inference-time ratio of `k` pairwise passes to one jointwise pass over
/// `k + 1` sentences: `(k + 1)^2 / (4k)`.
pub fn jointwise_latency_ratio(k: u64) -> Result<f64> {
    if k < 1 {
        return Err(Error::config("latency ratio needs k >= 1"));
    }
    let k = k as f64;
    Ok((k + 1.0) * (k + 1.0) / (4.0 * k))
}
