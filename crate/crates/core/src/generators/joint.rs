use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::rng::Rng;

use super::pools::sample_from;
use super::{GroupCtx, JointExample, JointProvenance, Label, TextRef};

/// Pivot sentence plus `k` candidates: `k1` from the pivot's paragraph
/// (label 1), `k2` from the rest of its document and `k3` from other
/// documents (label 0). Missing same-paragraph or same-document candidates
/// are replaced by other-document ones. Candidates are shuffled.
pub(super) fn mspp(ctx: &GroupCtx, rng: &mut Rng) -> Option<JointExample> {
    let corpus = ctx.corpus();
    let (d, p) = (ctx.doc, ctx.para);
    let n = corpus.paragraph(d, p).len();
    if n < 2 {
        return None;
    }
    let q = ctx.gen.cfg.mspp_quota;
    let pivot = rng.random_range(0..n);

    let same: Vec<usize> = (0..n).filter(|&s| s != pivot).collect();
    let k1 = q.k1.min(same.len());
    let mut cands: Vec<(TextRef, Label)> = sample_from(&same, k1, rng)?
        .into_iter()
        .map(|s| (TextRef::new(d, p, vec![s]), Label::Positive))
        .collect();

    let doc_sents: Vec<(usize, usize, usize)> = ctx
        .gen
        .pools
        .sentences
        .within(d)
        .iter()
        .copied()
        .filter(|&(_, pp, _)| pp != p)
        .collect();
    let k2 = q.k2.min(doc_sents.len());
    cands.extend(
        sample_from(&doc_sents, k2, rng)?
            .into_iter()
            .map(|(d, p, s)| (TextRef::new(d, p, vec![s]), Label::HardNegative)),
    );

    let k3 = q.k() - k1 - k2;
    cands.extend(
        ctx.gen
            .pools
            .sentences
            .sample_outside(d, k3, rng)?
            .into_iter()
            .map(|(d, p, s)| (TextRef::new(d, p, vec![s]), Label::EasyNegative)),
    );
    cands.shuffle(rng);

    Some(JointExample {
        pivot: corpus.paragraph(d, p).select(&[pivot]),
        cands: cands.iter().map(|(r, _)| r.text(corpus)).collect(),
        ys: cands.iter().map(|(_, y)| y.is_positive() as u8).collect(),
        prov: JointProvenance {
            group: ctx.group,
            pivot: TextRef::new(d, p, vec![pivot]),
            kinds: cands.iter().map(|(_, y)| *y).collect(),
            cands: cands.into_iter().map(|(r, _)| r).collect(),
        },
    })
}
