use crate::corpus::{sample_span, sample_span_capped};
use crate::rng::Rng;

use super::pools::sample_from;
use super::{Example, GroupCtx, Label, TextRef};

/// Other paragraphs of `doc` accepted by `keep`.
pub(super) fn siblings(
    ctx: &GroupCtx,
    keep: impl Fn(usize) -> bool,
) -> Vec<(usize, usize)> {
    (0..ctx.corpus().document(ctx.doc).paragraphs.len())
        .filter(|&p| p != ctx.para && keep(p))
        .map(|p| (ctx.doc, p))
        .collect()
}

/// Two disjoint spans of one paragraph: left first, capped so that the
/// right span always has room.
pub(super) fn disjoint_spans(ctx: &GroupCtx, rng: &mut Rng, keep_free: usize) -> Option<(TextRef, TextRef)> {
    let (d, p) = (ctx.doc, ctx.para);
    let para = ctx.corpus().paragraph(d, p);
    let n = para.len();
    if n < 2 + keep_free {
        return None;
    }
    let left = sample_span_capped(para, (d, p), &ctx.gen.left, rng, &[], n - 1 - keep_free).ok()?;
    let right = sample_span_capped(
        para,
        (d, p),
        &ctx.gen.right,
        rng,
        &left.indices(),
        n - left.len() - keep_free,
    )
    .ok()?;
    Some((left.into(), right.into()))
}

/// Right span of a whole paragraph.
fn right_span(ctx: &GroupCtx, (d, p): (usize, usize), rng: &mut Rng) -> Option<TextRef> {
    sample_span(ctx.corpus().paragraph(d, p), (d, p), &ctx.gen.right, rng, &[])
        .ok()
        .map(Into::into)
}

/// Paragraph minus a left-length span; needs at least two sentences.
fn reduced(ctx: &GroupCtx, (d, p): (usize, usize), rng: &mut Rng) -> Option<TextRef> {
    let para = ctx.corpus().paragraph(d, p);
    let span = sample_span_capped(para, (d, p), &ctx.gen.left, rng, &[], para.len().checked_sub(1)?).ok()?;
    Some(TextRef::remainder(ctx.corpus(), d, p, &span.indices()))
}

/// Hard sources from `hard_pool`, then easy sources from `easy` until the
/// group holds the full number of negatives.
pub(super) fn negative_sources(
    ctx: &GroupCtx,
    rng: &mut Rng,
    hard_pool: &[(usize, usize)],
    easy: &super::pools::DocPool<(usize, usize)>,
) -> Option<Vec<((usize, usize), Label)>> {
    let k1 = ctx.hard_count(hard_pool.len());
    let mut out: Vec<_> = sample_from(hard_pool, k1, rng)?
        .into_iter()
        .map(|s| (s, Label::HardNegative))
        .collect();
    let k2 = ctx.easy_count(k1);
    out.extend(
        easy.sample_outside(ctx.doc, k2, rng)?
            .into_iter()
            .map(|s| (s, Label::EasyNegative)),
    );
    Some(out)
}

pub(super) fn ssp(ctx: &GroupCtx, rng: &mut Rng) -> Option<Vec<Example>> {
    let (left, right) = disjoint_spans(ctx, rng, 0)?;
    let hard = siblings(ctx, |_| true);
    let sources = negative_sources(ctx, rng, &hard, &ctx.gen.pools.paragraphs)?;
    let mut out = vec![ctx.pair(&left, right, Label::Positive)];
    for (src, y) in sources {
        out.push(ctx.pair(&left, right_span(ctx, src, rng)?, y));
    }
    Some(out)
}

pub(super) fn sp(ctx: &GroupCtx, rng: &mut Rng) -> Option<Vec<Example>> {
    let (d, p) = (ctx.doc, ctx.para);
    let left: TextRef = {
        let para = ctx.corpus().paragraph(d, p);
        let cap = para.len().checked_sub(1).filter(|&c| c > 0)?;
        sample_span_capped(para, (d, p), &ctx.gen.left, rng, &[], cap).ok()?.into()
    };
    let positive = TextRef::remainder(ctx.corpus(), d, p, &left.sents);
    let hard = siblings(ctx, |q| ctx.corpus().paragraph(d, q).len() >= 2);
    let sources = negative_sources(ctx, rng, &hard, &ctx.gen.pools.multi)?;
    let mut out = vec![ctx.pair(&left, positive, Label::Positive)];
    for (src, y) in sources {
        out.push(ctx.pair(&left, reduced(ctx, src, rng)?, y));
    }
    Some(out)
}

pub(super) fn psd(ctx: &GroupCtx, rng: &mut Rng) -> Option<Vec<Example>> {
    let (d, p) = (ctx.doc, ctx.para);
    let left = TextRef::whole(ctx.corpus(), d, p);
    let same = siblings(ctx, |_| true);
    let (_, q) = *sample_from(&same, 1, rng)?.first()?;
    let mut out = vec![ctx.pair(&left, TextRef::whole(ctx.corpus(), d, q), Label::Positive)];
    let negatives = ctx.gen.cfg.pair_quota.negatives();
    for (d2, q2) in ctx.gen.pools.paragraphs.sample_outside(d, negatives, rng)? {
        out.push(ctx.pair(&left, TextRef::whole(ctx.corpus(), d2, q2), Label::EasyNegative));
    }
    Some(out)
}
