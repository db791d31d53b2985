use ndarray::ArrayView1;

use super::layers::{
    feed_forward, feed_forward_backward, layer_norm, layer_norm_backward, multi_head_attention,
    multi_head_attention_backward, AttentionCache, FfnCache, NormCache,
};
use super::params::{Mat, ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::tokenizer::SpecialIds;

/// One packed encoder input. `mask[j]` false hides position `j` from every
/// attention query; `slots` lists the rows pooled as `o_0 ... o_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderInput {
    pub ids: Vec<u32>,
    pub positions: Vec<usize>,
    pub seq_ids: Vec<usize>,
    pub mask: Vec<bool>,
    pub slots: Vec<usize>,
}

/// Shortens the longest entry by one until the lengths fit `budget`; ties
/// shorten the earliest entry.
pub fn truncate_longest(lens: &mut [usize], budget: usize) {
    let mut total: usize = lens.iter().sum();
    while total > budget {
        let (i, _) = lens
            .iter()
            .enumerate()
            .fold((0, 0), |best, (i, &l)| if l > best.1 { (i, l) } else { best });
        lens[i] -= 1;
        total -= 1;
    }
}

impl EncoderInput {
    /// A single sequence taken as-is, pooled at row 0.
    pub fn plain(ids: Vec<u32>) -> Self {
        let n = ids.len();
        EncoderInput {
            ids,
            positions: (0..n).collect(),
            seq_ids: vec![0; n],
            mask: vec![true; n],
            slots: vec![0],
        }
    }

    /// `<s> a </s> b </s>`, trimming the longer side first to fit `max_len`.
    pub fn pairwise(a: &[u32], b: &[u32], sp: SpecialIds, max_len: usize) -> Result<Self> {
        if max_len < 5 {
            return Err(Error::config("pairwise input needs max_len >= 5"));
        }
        let mut lens = [a.len(), b.len()];
        truncate_longest(&mut lens, max_len - 3);
        let mut ids = vec![sp.bos];
        ids.extend_from_slice(&a[..lens[0]]);
        ids.push(sp.eos);
        let first = ids.len();
        ids.extend_from_slice(&b[..lens[1]]);
        ids.push(sp.eos);
        let n = ids.len();
        Ok(EncoderInput {
            ids,
            positions: (0..n).collect(),
            seq_ids: (0..n).map(|i| usize::from(i >= first)).collect(),
            mask: vec![true; n],
            slots: vec![0],
        })
    }

    /// `k + 1` slots of `slot_len` tokens each: `<s>` then the span, cropped
    /// or padded on the right. Slots beyond `spans.len()` are padding only.
    pub fn fixed(spans: &[&[u32]], k: usize, slot_len: usize, sp: SpecialIds) -> Result<Self> {
        if spans.is_empty() || spans.len() > k + 1 || slot_len < 2 {
            return Err(Error::config(format!(
                "fixed layout takes 1..={} spans and slot_len >= 2",
                k + 1
            )));
        }
        let n = (k + 1) * slot_len;
        let mut ids = vec![sp.pad; n];
        let mut mask = vec![false; n];
        for (i, span) in spans.iter().enumerate() {
            let start = i * slot_len;
            ids[start] = sp.bos;
            mask[start] = true;
            for (j, &t) in span.iter().take(slot_len - 1).enumerate() {
                ids[start + 1 + j] = t;
                mask[start + 1 + j] = true;
            }
        }
        Ok(EncoderInput {
            ids,
            positions: (0..n).collect(),
            seq_ids: (0..n).map(|i| i / slot_len).collect(),
            mask,
            slots: (0..=k).map(|i| i * slot_len).collect(),
        })
    }

    /// Spans of any length, each behind an `<s>`, within `total` positions.
    /// The pivot gets sequence id 0, every candidate 1.
    pub fn flexible(spans: &[&[u32]], total: usize, sp: SpecialIds) -> Result<Self> {
        if spans.is_empty() || total < spans.len() {
            return Err(Error::config("flexible layout needs one position per span"));
        }
        let mut lens: Vec<usize> = spans.iter().map(|s| s.len()).collect();
        truncate_longest(&mut lens, total - spans.len());
        let mut out = EncoderInput {
            ids: Vec::new(),
            positions: Vec::new(),
            seq_ids: Vec::new(),
            mask: Vec::new(),
            slots: Vec::new(),
        };
        for (i, (span, &len)) in spans.iter().zip(&lens).enumerate() {
            out.slots.push(out.ids.len());
            out.ids.push(sp.bos);
            out.ids.extend_from_slice(&span[..len]);
            out.seq_ids.resize(out.ids.len(), usize::from(i > 0));
        }
        let n = out.ids.len();
        out.positions = (0..n).collect();
        out.mask = vec![true; n];
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn check(&self, cfg: &ModelConfig) -> Result<()> {
        let n = self.ids.len();
        if n == 0 || self.positions.len() != n || self.seq_ids.len() != n || self.mask.len() != n {
            return Err(Error::shape("encoder input fields differ in length"));
        }
        let range = |what, index: usize, size| Err(Error::Range { what, index, size });
        if let Some(&id) = self.ids.iter().find(|&&id| id as usize >= cfg.vocab_size) {
            return range("token", id as usize, cfg.vocab_size);
        }
        if let Some(&p) = self.positions.iter().find(|&&p| p >= cfg.max_len) {
            return range("position", p, cfg.max_len);
        }
        if let Some(&s) = self.seq_ids.iter().find(|&&s| s >= cfg.n_seq_ids) {
            return range("sequence id", s, cfg.n_seq_ids);
        }
        if let Some(&r) = self.slots.iter().find(|&&r| r >= n) {
            return range("slot row", r, n);
        }
        Ok(())
    }
}

/// Row `i` is `E[id_i] + P[pos_i] + S[seq_i]`.
pub fn embed_sequence(input: &EncoderInput, cfg: &ModelConfig, params: &ModelParams) -> Result<Mat> {
    input.check(cfg)?;
    let mut h = Mat::zeros((input.len(), cfg.d));
    for (i, mut row) in h.rows_mut().into_iter().enumerate() {
        row += &params.embed.row(input.ids[i] as usize);
        row += &params.pos.row(input.positions[i]);
        row += &params.seq.row(input.seq_ids[i]);
    }
    Ok(h)
}

struct LayerCache {
    input: Mat,
    attn: AttentionCache,
    ln1: NormCache,
    mid: Mat,
    ffn: FfnCache,
    ln2: NormCache,
}

/// Final hidden states plus everything the backward pass needs.
pub struct Encoded {
    pub hidden: Mat,
    layers: Vec<LayerCache>,
}

impl Encoded {
    /// Pooled outputs `o_0 ... o_k` as rows.
    pub fn slot_outputs(&self, input: &EncoderInput) -> Mat {
        gather_rows(&self.hidden, &input.slots)
    }

    /// Attention weights of layer `l`, one matrix per head.
    pub fn attention(&self, l: usize) -> &[Mat] {
        self.layers[l].attn.probs()
    }
}

pub(crate) fn gather_rows(h: &Mat, rows: &[usize]) -> Mat {
    let mut out = Mat::zeros((rows.len(), h.ncols()));
    for (mut dst, &r) in out.rows_mut().into_iter().zip(rows) {
        dst.assign(&h.row(r));
    }
    out
}

pub(crate) fn scatter_rows(dh: &mut Mat, rows: &[usize], d_rows: &Mat) {
    for (&r, src) in rows.iter().zip(d_rows.rows()) {
        let mut dst = dh.row_mut(r);
        dst += &src;
    }
}

/// Post-LN stack: `LN(x + MHA(x))` then `LN(x + FFN(x))` per layer.
pub fn encoder_forward(input: &EncoderInput, cfg: &ModelConfig, params: &ModelParams) -> Result<Encoded> {
    let mut x = embed_sequence(input, cfg, params)?;
    let mut layers = Vec::with_capacity(params.layers.len());
    for p in &params.layers {
        let (a, attn) = multi_head_attention(&x, p, cfg.n_heads, &input.mask)?;
        let (mid, ln1) = layer_norm(&(&x + &a), &p.ln1_g, &p.ln1_b, cfg.ln_eps);
        let (f, ffn) = feed_forward(&mid, p, cfg.activation)?;
        let (out, ln2) = layer_norm(&(&mid + &f), &p.ln2_g, &p.ln2_b, cfg.ln_eps);
        layers.push(LayerCache { input: x, attn, ln1, mid: mid.clone(), ffn, ln2 });
        x = out;
    }
    Ok(Encoded { hidden: x, layers })
}

/// Accumulates into `grads` the gradient of a loss whose derivative with
/// respect to the final hidden states is `d_hidden`.
pub fn encoder_backward(
    input: &EncoderInput,
    cfg: &ModelConfig,
    params: &ModelParams,
    enc: &Encoded,
    d_hidden: Mat,
    grads: &mut ModelParams,
) -> Result<()> {
    if d_hidden.dim() != enc.hidden.dim() {
        return Err(Error::shape(format!(
            "hidden gradient {:?} for hidden states {:?}",
            d_hidden.dim(),
            enc.hidden.dim()
        )));
    }
    let mut dx = d_hidden;
    for ((p, c), g) in params.layers.iter().zip(&enc.layers).zip(&mut grads.layers).rev() {
        let d_sum2 = layer_norm_backward(&c.ln2, &p.ln2_g, &dx, &mut g.ln2_g, &mut g.ln2_b);
        let d_mid = feed_forward_backward(&c.mid, p, cfg.activation, &c.ffn, &d_sum2, g) + &d_sum2;
        let d_sum1 = layer_norm_backward(&c.ln1, &p.ln1_g, &d_mid, &mut g.ln1_g, &mut g.ln1_b);
        dx = multi_head_attention_backward(&c.input, p, &c.attn, &d_sum1, g) + &d_sum1;
    }
    for (i, row) in dx.rows().into_iter().enumerate() {
        add_row(&mut grads.embed, input.ids[i] as usize, row);
        add_row(&mut grads.pos, input.positions[i], row);
        add_row(&mut grads.seq, input.seq_ids[i], row);
    }
    Ok(())
}

fn add_row(m: &mut Mat, r: usize, v: ArrayView1<f64>) {
    let mut dst = m.row_mut(r);
    dst += &v;
}
