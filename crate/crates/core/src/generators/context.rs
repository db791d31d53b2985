use crate::corpus::sample_span_capped;
use crate::rng::Rng;

use super::pairs::{disjoint_spans, negative_sources, siblings};
use super::{ContextExample, ContextKind, ContextProvenance, Example, GroupCtx, Label, TextRef};

fn example(ctx: &GroupCtx, kind: ContextKind, a: &TextRef, b: TextRef, c: TextRef, y: Label) -> Example {
    let corpus = ctx.corpus();
    Example::Context(ContextExample {
        a: a.text(corpus),
        b: b.text(corpus),
        c: c.text(corpus),
        y,
        kind,
        prov: ContextProvenance {
            group: ctx.group,
            a: a.clone(),
            b,
            c,
        },
    })
}

/// Right-length span of `(d, p)` leaving at least one sentence free.
fn partial_span(ctx: &GroupCtx, (d, p): (usize, usize), rng: &mut Rng) -> Option<TextRef> {
    let para = ctx.corpus().paragraph(d, p);
    let cap = para.len().checked_sub(1).filter(|&c| c > 0)?;
    sample_span_capped(para, (d, p), &ctx.gen.right, rng, &[], cap)
        .ok()
        .map(Into::into)
}

/// Sentences right before and right after `b`, minus those in `exclude`.
pub(super) fn neighbors(ctx: &GroupCtx, b: &TextRef, exclude: &[usize]) -> TextRef {
    let n = ctx.corpus().paragraph(b.doc, b.para).len();
    let first = *b.sents.first().expect("non-empty span");
    let last = *b.sents.last().expect("non-empty span");
    let mut sents = Vec::new();
    if first > 0 {
        sents.push(first - 1);
    }
    if last + 1 < n {
        sents.push(last + 1);
    }
    sents.retain(|s| !exclude.contains(s));
    TextRef::new(b.doc, b.para, sents)
}

/// Context is always the first paragraph of `b`'s document; `a` and `b`
/// never come from a first paragraph.
pub(super) fn sdc(ctx: &GroupCtx, rng: &mut Rng) -> Option<Vec<Example>> {
    if ctx.para == 0 {
        return None;
    }
    let corpus = ctx.corpus();
    let (a, b) = disjoint_spans(ctx, rng, 0)?;
    let first = |d: usize| TextRef::whole(corpus, d, 0);
    let hard = siblings(ctx, |q| q > 0);
    let sources = negative_sources(ctx, rng, &hard, &ctx.gen.pools.later)?;
    let mut out = vec![example(ctx, ContextKind::Sdc, &a, b, first(ctx.doc), Label::Positive)];
    for ((d, p), y) in sources {
        let para = corpus.paragraph(d, p);
        let span = crate::corpus::sample_span(para, (d, p), &ctx.gen.right, rng, &[]).ok()?;
        out.push(example(ctx, ContextKind::Sdc, &a, span.into(), first(d), y));
    }
    Some(out)
}

/// Context is what remains of `b`'s paragraph once `b` (and, for the
/// positive, `a`) is removed; it is never empty.
pub(super) fn dpc(ctx: &GroupCtx, rng: &mut Rng) -> Option<Vec<Example>> {
    let corpus = ctx.corpus();
    let (a, b) = disjoint_spans(ctx, rng, 1)?;
    let mut removed = a.sents.clone();
    removed.extend(&b.sents);
    let c = TextRef::remainder(corpus, ctx.doc, ctx.para, &removed);
    let mut out = vec![example(ctx, ContextKind::Dpc, &a, b, c, Label::Positive)];
    let hard = siblings(ctx, |q| corpus.paragraph(ctx.doc, q).len() >= 2);
    for (src, y) in negative_sources(ctx, rng, &hard, &ctx.gen.pools.multi)? {
        let b = partial_span(ctx, src, rng)?;
        let c = TextRef::remainder(corpus, src.0, src.1, &b.sents);
        out.push(example(ctx, ContextKind::Dpc, &a, b, c, y));
    }
    Some(out)
}

/// Context is the sentence before and the sentence after `b`, without any
/// sentence of `a`; a draw leaving it empty is retried.
pub(super) fn dslc(ctx: &GroupCtx, rng: &mut Rng) -> Option<Vec<Example>> {
    let corpus = ctx.corpus();
    let (a, b) = disjoint_spans(ctx, rng, 0)?;
    let c = neighbors(ctx, &b, &a.sents);
    if c.sents.is_empty() {
        return None;
    }
    let mut out = vec![example(ctx, ContextKind::Dslc, &a, b, c, Label::Positive)];
    let hard = siblings(ctx, |q| corpus.paragraph(ctx.doc, q).len() >= 2);
    for (src, y) in negative_sources(ctx, rng, &hard, &ctx.gen.pools.multi)? {
        let b = partial_span(ctx, src, rng)?;
        let c = neighbors(ctx, &b, &[]);
        out.push(example(ctx, ContextKind::Dslc, &a, b, c, y));
    }
    Some(out)
}
