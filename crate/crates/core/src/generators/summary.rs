use crate::corpus::Document;

use super::{GroupCtx, SummaryExample, SummaryProvenance};

/// Separator between source paragraphs.
pub const PARAGRAPH_SEPARATOR: &str = "\n\n";

/// A document qualifies when it has a second paragraph and its first
/// paragraph has at least `min_sentences` sentences and `min_chars`
/// characters.
pub fn sds_accepts(doc: &Document, min_sentences: usize, min_chars: usize) -> bool {
    let Some(first) = doc.paragraphs.first() else {
        return false;
    };
    doc.paragraphs.len() >= 2
        && first.len() >= min_sentences
        && first.text().chars().count() >= min_chars
}

pub(super) fn sds(ctx: &GroupCtx) -> Option<SummaryExample> {
    let cfg = &ctx.gen.cfg;
    let doc = ctx.corpus().document(ctx.doc);
    if !sds_accepts(doc, cfg.sds_min_sentences, cfg.sds_min_chars) {
        return None;
    }
    let src: Vec<String> = doc.paragraphs[1..].iter().map(|p| p.text()).collect();
    Some(SummaryExample {
        src: src.join(PARAGRAPH_SEPARATOR),
        tgt: doc.paragraphs[0].text(),
        prov: SummaryProvenance {
            group: ctx.group,
            doc: ctx.doc,
        },
    })
}
