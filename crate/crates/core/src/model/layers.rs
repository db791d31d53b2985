//! Forward passes with explicit caches, and the matching backward passes.
//!
//! Activations are row-major: one row per position. Linear maps are applied
//! on the right (`X W`), heads as `X Wᵀ` so that head matrices keep the
//! `classes × d` orientation.

use ndarray::{s, Axis};

use super::params::{Activation, LayerParams, Mat};
use crate::error::{Error, Result};

const NEG_INF: f64 = f64::NEG_INFINITY;

pub(crate) fn check_cols(x: &Mat, cols: usize, what: &str) -> Result<()> {
    if x.ncols() != cols {
        return Err(Error::shape(format!("{what}: expected {cols} columns, got {}", x.ncols())));
    }
    Ok(())
}

/// Row-wise softmax; masked entries (`-inf`) get exactly zero weight. A row
/// with no finite entry yields zeros.
pub(crate) fn softmax_rows(scores: &mut Mat) {
    for mut row in scores.rows_mut() {
        let max = row.iter().copied().fold(NEG_INF, f64::max);
        if max == NEG_INF {
            row.fill(0.0);
            continue;
        }
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        row /= total;
    }
}

pub struct AttentionCache {
    q: Mat,
    k: Mat,
    v: Mat,
    /// Per-head attention weights.
    probs: Vec<Mat>,
    concat: Mat,
}

impl AttentionCache {
    pub fn probs(&self) -> &[Mat] {
        &self.probs
    }
}

/// `softmax(Q Kᵀ / sqrt(d_k)) V` where `d_k` is the width of `Q`. `mask[j]`
/// false disables key `j`.
pub fn scaled_dot_attention(q: &Mat, k: &Mat, v: &Mat, mask: &[bool]) -> Result<(Mat, Mat)> {
    if q.ncols() != k.ncols() || k.nrows() != v.nrows() || mask.len() != k.nrows() {
        return Err(Error::shape(format!(
            "attention Q {:?}, K {:?}, V {:?}, mask {}",
            q.dim(),
            k.dim(),
            v.dim(),
            mask.len()
        )));
    }
    let scale = 1.0 / (q.ncols() as f64).sqrt();
    let mut scores = q.dot(&k.t()) * scale;
    for mut row in scores.rows_mut() {
        for (x, &keep) in row.iter_mut().zip(mask) {
            if !keep {
                *x = NEG_INF;
            }
        }
    }
    softmax_rows(&mut scores);
    let out = scores.dot(v);
    Ok((out, scores))
}

/// Multi-head self-attention: per-head projections to `d / n_heads`, concat,
/// then `W_0`.
pub fn multi_head_attention(
    h: &Mat,
    p: &LayerParams,
    n_heads: usize,
    mask: &[bool],
) -> Result<(Mat, AttentionCache)> {
    let d = p.wq.nrows();
    check_cols(h, d, "attention input")?;
    if n_heads == 0 || !d.is_multiple_of(n_heads) {
        return Err(Error::config(format!("d = {d} is not divisible by n_heads = {n_heads}")));
    }
    let dh = d / n_heads;
    let q = h.dot(&p.wq);
    let k = h.dot(&p.wk);
    let v = h.dot(&p.wv);
    let mut concat = Mat::zeros((h.nrows(), d));
    let mut probs = Vec::with_capacity(n_heads);
    for head in 0..n_heads {
        let cols = s![.., head * dh..(head + 1) * dh];
        let (out, pr) = scaled_dot_attention(
            &q.slice(cols).to_owned(),
            &k.slice(cols).to_owned(),
            &v.slice(cols).to_owned(),
            mask,
        )?;
        concat.slice_mut(cols).assign(&out);
        probs.push(pr);
    }
    let out = concat.dot(&p.wo);
    Ok((out, AttentionCache { q, k, v, probs, concat }))
}

/// Returns `dH` and accumulates projection gradients into `g`.
pub(crate) fn multi_head_attention_backward(
    h: &Mat,
    p: &LayerParams,
    cache: &AttentionCache,
    d_out: &Mat,
    g: &mut LayerParams,
) -> Mat {
    let d = p.wq.nrows();
    let n_heads = cache.probs.len();
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    g.wo += &cache.concat.t().dot(d_out);
    let d_concat = d_out.dot(&p.wo.t());
    let mut dq = Mat::zeros(cache.q.dim());
    let mut dk = Mat::zeros(cache.k.dim());
    let mut dv = Mat::zeros(cache.v.dim());
    for (head, probs) in cache.probs.iter().enumerate() {
        let cols = s![.., head * dh..(head + 1) * dh];
        let d_o = d_concat.slice(cols);
        let vh = cache.v.slice(cols);
        dv.slice_mut(cols).assign(&probs.t().dot(&d_o));
        let mut d_scores = d_o.dot(&vh.t());
        // softmax backward: P * (dP - rowsum(dP * P))
        for (mut ds, pr) in d_scores.rows_mut().into_iter().zip(probs.rows()) {
            let dot: f64 = ds.iter().zip(pr).map(|(a, b)| a * b).sum();
            for (x, &pv) in ds.iter_mut().zip(pr) {
                *x = pv * (*x - dot) * scale;
            }
        }
        dq.slice_mut(cols).assign(&d_scores.dot(&cache.k.slice(cols)));
        dk.slice_mut(cols).assign(&d_scores.t().dot(&cache.q.slice(cols)));
    }
    g.wq += &h.t().dot(&dq);
    g.wk += &h.t().dot(&dk);
    g.wv += &h.t().dot(&dv);
    dq.dot(&p.wq.t()) + dk.dot(&p.wk.t()) + dv.dot(&p.wv.t())
}

pub struct NormCache {
    xhat: Mat,
    rstd: Vec<f64>,
}

/// Per-row layer normalization with scale `g` and shift `b` (both `1 × d`).
pub(crate) fn layer_norm(x: &Mat, g: &Mat, b: &Mat, eps: f64) -> (Mat, NormCache) {
    let d = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut rstd = Vec::with_capacity(x.nrows());
    for mut row in xhat.rows_mut() {
        let mean = row.sum() / d;
        row -= mean;
        let var = row.iter().map(|v| v * v).sum::<f64>() / d;
        let r = 1.0 / (var + eps).sqrt();
        row *= r;
        rstd.push(r);
    }
    let y = &xhat * &g.row(0) + b.row(0);
    (y, NormCache { xhat, rstd })
}

pub(crate) fn layer_norm_backward(
    cache: &NormCache,
    g: &Mat,
    dy: &Mat,
    dg: &mut Mat,
    db: &mut Mat,
) -> Mat {
    *dg += &(dy * &cache.xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
    *db += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    let d = dy.ncols() as f64;
    let mut dx = dy * &g.row(0);
    for ((mut row, xh), &r) in dx.rows_mut().into_iter().zip(cache.xhat.rows()).zip(&cache.rstd) {
        let mean = row.sum() / d;
        let proj = row.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d;
        for (v, &x) in row.iter_mut().zip(xh) {
            *v = r * (*v - mean - x * proj);
        }
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

fn activate(act: Activation, x: f64) -> f64 {
    match act {
        Activation::Relu => x.max(0.0),
        Activation::Gelu => 0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x.powi(3))).tanh()),
    }
}

fn activate_grad(act: Activation, x: f64) -> f64 {
    match act {
        Activation::Relu => {
            if x > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Activation::Gelu => {
            let u = GELU_C * (x + 0.044715 * x.powi(3));
            let t = u.tanh();
            0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
        }
    }
}

pub struct FfnCache {
    pre: Mat,
    hidden: Mat,
}

/// `act(H W_1 + b_1) W_2 + b_2`, position by position.
pub fn feed_forward(h: &Mat, p: &LayerParams, act: Activation) -> Result<(Mat, FfnCache)> {
    check_cols(h, p.w1.nrows(), "feed-forward input")?;
    let pre = h.dot(&p.w1) + p.b1.row(0);
    let hidden = pre.mapv(|x| activate(act, x));
    let out = hidden.dot(&p.w2) + p.b2.row(0);
    Ok((out, FfnCache { pre, hidden }))
}

pub(crate) fn feed_forward_backward(
    h: &Mat,
    p: &LayerParams,
    act: Activation,
    cache: &FfnCache,
    d_out: &Mat,
    g: &mut LayerParams,
) -> Mat {
    g.w2 += &cache.hidden.t().dot(d_out);
    g.b2 += &d_out.sum_axis(Axis(0)).insert_axis(Axis(0));
    let mut d_pre = d_out.dot(&p.w2.t());
    ndarray::Zip::from(&mut d_pre)
        .and(&cache.pre)
        .for_each(|dv, &x| *dv *= activate_grad(act, x));
    g.w1 += &h.t().dot(&d_pre);
    g.b1 += &d_pre.sum_axis(Axis(0)).insert_axis(Axis(0));
    d_pre.dot(&p.w1.t())
}

/// `X Wᵀ` for a `classes × d` head matrix.
pub(crate) fn linear(x: &Mat, w: &Mat) -> Mat {
    x.dot(&w.t())
}

/// Returns `dX`; accumulates `dW`.
pub(crate) fn linear_backward(x: &Mat, w: &Mat, dy: &Mat, dw: &mut Mat) -> Mat {
    *dw += &dy.t().dot(x);
    dy.dot(w)
}
