//! Structural self-supervised examples built from the document hierarchy.
//!
//! Examples come in groups: one positive and its negatives (pairwise and
//! contextual objectives), one pivot with its candidates (MSPP) or one
//! summary pair (SDS). Groups are enumerated over the paragraphs of the
//! corpus (over documents for SDS) and group `g` draws from its own random
//! stream keyed by `(seed, objective, g)`. A group whose source lacks the
//! material its objective needs is skipped, so generating any range of
//! groups gives the same examples no matter how the range is split.

mod context;
mod joint;
mod pairs;
mod pools;
mod shard;
mod summary;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LengthDistribution};
use crate::error::{Error, Result};
use crate::rng::{keyed, sub_seed, Rng};

use pools::Pools;

pub use shard::{shard_count, shard_file_name, write_shards};
pub use summary::{sds_accepts, PARAGRAPH_SEPARATOR};

/// Probability of left-span lengths 1, 2, 3.
pub const LEFT_LENGTH_PROBS: [f64; 3] = [0.7, 0.2, 0.1];
/// Probability of right-span lengths 1 to 5.
pub const RIGHT_LENGTH_PROBS: [f64; 5] = [0.14, 0.24, 0.24, 0.24, 0.14];

/// Sentence-level objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Ssp,
    Sp,
    Psd,
    Mspp,
    Sdc,
    Dpc,
    Dslc,
    Sds,
}

impl Objective {
    pub const ALL: [Objective; 8] = [
        Objective::Ssp,
        Objective::Sp,
        Objective::Psd,
        Objective::Mspp,
        Objective::Sdc,
        Objective::Dpc,
        Objective::Dslc,
        Objective::Sds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Objective::Ssp => "ssp",
            Objective::Sp => "sp",
            Objective::Psd => "psd",
            Objective::Mspp => "mspp",
            Objective::Sdc => "sdc",
            Objective::Dpc => "dpc",
            Objective::Dslc => "dslc",
            Objective::Sds => "sds",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Objective::ALL
            .into_iter()
            .find(|o| o.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown objective {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Positive,
    HardNegative,
    EasyNegative,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

/// Sentences `sents` (in that order) of paragraph `para` of document `doc`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TextRef {
    pub doc: usize,
    pub para: usize,
    pub sents: Vec<usize>,
}

impl TextRef {
    pub fn new(doc: usize, para: usize, sents: Vec<usize>) -> Self {
        TextRef { doc, para, sents }
    }

    pub fn whole(corpus: &Corpus, doc: usize, para: usize) -> Self {
        let n = corpus.paragraph(doc, para).len();
        TextRef::new(doc, para, (0..n).collect())
    }

    /// The paragraph minus the sentences in `removed`.
    pub fn remainder(corpus: &Corpus, doc: usize, para: usize, removed: &[usize]) -> Self {
        let n = corpus.paragraph(doc, para).len();
        TextRef::new(doc, para, (0..n).filter(|i| !removed.contains(i)).collect())
    }

    pub fn text(&self, corpus: &Corpus) -> String {
        corpus.paragraph(self.doc, self.para).select(&self.sents)
    }

    pub fn same_paragraph(&self, other: &TextRef) -> bool {
        self.doc == other.doc && self.para == other.para
    }
}

impl From<crate::corpus::Span> for TextRef {
    fn from(s: crate::corpus::Span) -> Self {
        TextRef::new(s.doc, s.para, s.indices())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairProvenance {
    pub group: u64,
    pub l: TextRef,
    pub r: TextRef,
}

/// Left text mimics the question, right text the answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairExample {
    pub l: String,
    pub r: String,
    pub y: Label,
    pub obj: Objective,
    pub prov: PairProvenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointProvenance {
    pub group: u64,
    pub pivot: TextRef,
    pub cands: Vec<TextRef>,
    pub kinds: Vec<Label>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointExample {
    pub pivot: String,
    pub cands: Vec<String>,
    pub ys: Vec<u8>,
    pub prov: JointProvenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextKind {
    Sdc,
    Dpc,
    Dslc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextProvenance {
    pub group: u64,
    pub a: TextRef,
    pub b: TextRef,
    pub c: TextRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextExample {
    pub a: String,
    pub b: String,
    pub c: String,
    pub y: Label,
    pub kind: ContextKind,
    pub prov: ContextProvenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryProvenance {
    pub group: u64,
    pub doc: usize,
}

/// Target is the first paragraph, source the remaining ones.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryExample {
    pub src: String,
    pub tgt: String,
    pub prov: SummaryProvenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Example {
    Pair(PairExample),
    Joint(JointExample),
    Context(ContextExample),
    Summary(SummaryExample),
}

/// Hard and easy negatives per pairwise or contextual group. Missing hard
/// negatives are replaced by easy ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairQuota {
    pub hard: usize,
    pub easy: usize,
}

impl Default for PairQuota {
    fn default() -> Self {
        PairQuota { hard: 2, easy: 2 }
    }
}

impl PairQuota {
    pub fn negatives(&self) -> usize {
        self.hard + self.easy
    }
}

/// MSPP candidates: `k1` from the pivot's paragraph, `k2` from other
/// paragraphs of its document, `k3` from other documents. Shortfalls in the
/// first two are filled from the third.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsppQuota {
    pub k1: usize,
    pub k2: usize,
    pub k3: usize,
}

impl Default for MsppQuota {
    fn default() -> Self {
        MsppQuota { k1: 1, k2: 2, k3: 2 }
    }
}

impl MsppQuota {
    pub fn k(&self) -> usize {
        self.k1 + self.k2 + self.k3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub seed: u64,
    pub pair_quota: PairQuota,
    pub mspp_quota: MsppQuota,
    pub left_lengths: Vec<f64>,
    pub right_lengths: Vec<f64>,
    pub sds_min_sentences: usize,
    pub sds_min_chars: usize,
    /// Tries per group before a group whose draws keep failing is skipped.
    pub attempts: usize,
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, probs) in [("left_lengths", &self.left_lengths), ("right_lengths", &self.right_lengths)] {
            LengthDistribution::new(probs.clone())
                .map_err(|e| Error::config(format!("gen.{name}: {e}")))?;
        }
        if self.attempts == 0 {
            return Err(Error::config("gen.attempts must be positive"));
        }
        if self.pair_quota.negatives() == 0 {
            return Err(Error::config("gen.pair_quota needs at least one negative"));
        }
        Ok(())
    }
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            pair_quota: PairQuota::default(),
            mspp_quota: MsppQuota::default(),
            left_lengths: LEFT_LENGTH_PROBS.to_vec(),
            right_lengths: RIGHT_LENGTH_PROBS.to_vec(),
            sds_min_sentences: 2,
            sds_min_chars: 50,
            attempts: 4,
        }
    }
}

/// Draws a left-span length in `1..=3`.
pub fn sample_left_length<R: rand::Rng + ?Sized>(rng: &mut R) -> usize {
    LengthDistribution::new(LEFT_LENGTH_PROBS.to_vec())
        .expect("valid constant")
        .sample(rng)
}

/// Draws a right-span length in `1..=5`.
pub fn sample_right_length<R: rand::Rng + ?Sized>(rng: &mut R) -> usize {
    LengthDistribution::new(RIGHT_LENGTH_PROBS.to_vec())
        .expect("valid constant")
        .sample(rng)
}

/// Example source for one objective over one corpus.
pub struct Generator<'c> {
    corpus: &'c Corpus,
    objective: Objective,
    cfg: GenConfig,
    left: LengthDistribution,
    right: LengthDistribution,
    groups: Vec<(usize, usize)>,
    pools: Pools,
    stream_seed: u64,
}

impl<'c> Generator<'c> {
    pub fn new(corpus: &'c Corpus, objective: Objective, cfg: GenConfig) -> Result<Self> {
        cfg.validate()?;
        let left = LengthDistribution::new(cfg.left_lengths.clone())?;
        let right = LengthDistribution::new(cfg.right_lengths.clone())?;
        if objective == Objective::Mspp && cfg.mspp_quota.k() == 0 {
            return Err(Error::config("MSPP needs at least one candidate"));
        }
        if objective != Objective::Sds && corpus.len() < 2 {
            return Err(Error::insufficient(format!(
                "{objective} needs at least two documents for its negatives"
            )));
        }
        if objective == Objective::Psd
            && corpus.documents().iter().all(|d| d.paragraphs.len() < 2)
        {
            return Err(Error::insufficient(
                "psd needs a document with at least two paragraphs",
            ));
        }
        let groups = match objective {
            Objective::Sds => (0..corpus.len()).map(|d| (d, 0)).collect(),
            _ => corpus.paragraph_refs(),
        };
        Ok(Generator {
            corpus,
            objective,
            stream_seed: sub_seed(cfg.seed, &format!("gen/{objective}")),
            left,
            right,
            groups,
            pools: Pools::new(corpus),
            cfg,
        })
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    /// Examples of group `index`; empty when the group is skipped.
    pub fn group(&self, index: usize) -> Vec<Example> {
        let Some(&(doc, para)) = self.groups.get(index) else {
            return Vec::new();
        };
        let mut rng = keyed(self.stream_seed, index as u64);
        let ctx = GroupCtx {
            gen: self,
            group: index as u64,
            doc,
            para,
        };
        for _ in 0..self.cfg.attempts {
            if let Some(examples) = ctx.build(&mut rng) {
                return examples;
            }
        }
        Vec::new()
    }

    /// Examples of every group in `range`, in group order.
    pub fn generate(&self, range: Range<usize>) -> Vec<Example> {
        let end = range.end.min(self.groups.len());
        let start = range.start.min(end);
        (start..end)
            .into_par_iter()
            .map(|g| self.group(g))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    }

    pub fn generate_all(&self) -> Vec<Example> {
        self.generate(0..self.groups.len())
    }
}

/// One group attempt. Each builder returns `None` when its draw failed and
/// another attempt may succeed; structural ineligibility also returns
/// `None`, which simply exhausts the attempts.
struct GroupCtx<'g, 'c> {
    gen: &'g Generator<'c>,
    group: u64,
    doc: usize,
    para: usize,
}

impl GroupCtx<'_, '_> {
    fn corpus(&self) -> &Corpus {
        self.gen.corpus
    }

    fn build(&self, rng: &mut Rng) -> Option<Vec<Example>> {
        match self.gen.objective {
            Objective::Ssp => pairs::ssp(self, rng),
            Objective::Sp => pairs::sp(self, rng),
            Objective::Psd => pairs::psd(self, rng),
            Objective::Mspp => joint::mspp(self, rng).map(|e| vec![Example::Joint(e)]),
            Objective::Sdc => context::sdc(self, rng),
            Objective::Dpc => context::dpc(self, rng),
            Objective::Dslc => context::dslc(self, rng),
            Objective::Sds => summary::sds(self).map(|e| vec![Example::Summary(e)]),
        }
    }

    fn pair(&self, l: &TextRef, r: TextRef, y: Label) -> Example {
        Example::Pair(PairExample {
            l: l.text(self.corpus()),
            r: r.text(self.corpus()),
            y,
            obj: self.gen.objective,
            prov: PairProvenance {
                group: self.group,
                l: l.clone(),
                r,
            },
        })
    }

    /// Number of hard negatives to draw given how many sources exist.
    fn hard_count(&self, available: usize) -> usize {
        self.gen.cfg.pair_quota.hard.min(available)
    }

    fn easy_count(&self, hard: usize) -> usize {
        self.gen.cfg.pair_quota.negatives() - hard
    }
}

/// Convenience wrappers returning typed examples for every group.
pub fn gen_pairs(corpus: &Corpus, objective: Objective, cfg: GenConfig) -> Result<Vec<PairExample>> {
    if !matches!(objective, Objective::Ssp | Objective::Sp | Objective::Psd) {
        return Err(Error::config(format!("{objective} does not produce pairs")));
    }
    Ok(Generator::new(corpus, objective, cfg)?
        .generate_all()
        .into_iter()
        .filter_map(|e| match e {
            Example::Pair(p) => Some(p),
            _ => None,
        })
        .collect())
}

pub fn gen_ssp(corpus: &Corpus, cfg: GenConfig) -> Result<Vec<PairExample>> {
    gen_pairs(corpus, Objective::Ssp, cfg)
}

pub fn gen_sp(corpus: &Corpus, cfg: GenConfig) -> Result<Vec<PairExample>> {
    gen_pairs(corpus, Objective::Sp, cfg)
}

pub fn gen_psd(corpus: &Corpus, cfg: GenConfig) -> Result<Vec<PairExample>> {
    gen_pairs(corpus, Objective::Psd, cfg)
}

pub fn gen_mspp(corpus: &Corpus, cfg: GenConfig) -> Result<Vec<JointExample>> {
    Ok(Generator::new(corpus, Objective::Mspp, cfg)?
        .generate_all()
        .into_iter()
        .filter_map(|e| match e {
            Example::Joint(j) => Some(j),
            _ => None,
        })
        .collect())
}

pub fn gen_context(corpus: &Corpus, kind: ContextKind, cfg: GenConfig) -> Result<Vec<ContextExample>> {
    let objective = match kind {
        ContextKind::Sdc => Objective::Sdc,
        ContextKind::Dpc => Objective::Dpc,
        ContextKind::Dslc => Objective::Dslc,
    };
    Ok(Generator::new(corpus, objective, cfg)?
        .generate_all()
        .into_iter()
        .filter_map(|e| match e {
            Example::Context(c) => Some(c),
            _ => None,
        })
        .collect())
}

pub fn gen_sds(corpus: &Corpus, cfg: GenConfig) -> Result<Vec<SummaryExample>> {
    Ok(Generator::new(corpus, Objective::Sds, cfg)?
        .generate_all()
        .into_iter()
        .filter_map(|e| match e {
            Example::Summary(s) => Some(s),
            _ => None,
        })
        .collect())
}
