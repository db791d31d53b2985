//! Loop-level reference implementations of the encoder, and a finite
//! difference gradient check.

use objforge::model::{
    cross_entropy_sum, encoder_backward, encoder_forward, head_binary, head_binary_backward, head_joint,
    head_joint_backward, head_lm, head_lm_backward, head_pair, head_pair_backward, Activation, EncoderInput,
    HeadKind, LayerParams, Layout, Mat, ModelConfig, ModelParams,
};
use objforge::tokenizer::SpecialIds;

pub type Rows = Vec<Vec<f64>>;

pub fn specials() -> SpecialIds {
    SpecialIds { pad: 0, unk: 1, mask: 2, bos: 3, eos: 4 }
}

pub fn rows(m: &Mat) -> Rows {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn matmul(x: &Rows, w: &Mat) -> Rows {
    x.iter()
        .map(|r| (0..w.ncols()).map(|c| (0..w.nrows()).map(|j| r[j] * w[[j, c]]).sum()).collect())
        .collect()
}

/// `softmax(q kᵀ / sqrt(width)) v` over unmasked keys.
pub fn attention(q: &Rows, k: &Rows, v: &Rows, mask: &[bool]) -> (Rows, Rows) {
    let width = q[0].len() as f64;
    let mut out = Vec::new();
    let mut probs = Vec::new();
    for qi in q {
        let scores: Vec<Option<f64>> = k
            .iter()
            .zip(mask)
            .map(|(kj, &m)| m.then(|| qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() / width.sqrt()))
            .collect();
        let max = scores.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = scores.iter().map(|s| s.map_or(0.0, |s| (s - max).exp())).collect();
        let z: f64 = e.iter().sum();
        let p: Vec<f64> = e.iter().map(|x| x / z).collect();
        out.push((0..v[0].len()).map(|c| p.iter().zip(v).map(|(pj, vj)| pj * vj[c]).sum()).collect());
        probs.push(p);
    }
    (out, probs)
}

fn columns(x: &Rows, from: usize, to: usize) -> Rows {
    x.iter().map(|r| r[from..to].to_vec()).collect()
}

pub fn multi_head(h: &Rows, p: &LayerParams, heads: usize, mask: &[bool]) -> Rows {
    let d = h[0].len();
    let w = d / heads;
    let (q, k, v) = (matmul(h, &p.wq), matmul(h, &p.wk), matmul(h, &p.wv));
    let mut concat = vec![Vec::with_capacity(d); h.len()];
    for i in 0..heads {
        let (o, _) = attention(&columns(&q, i * w, (i + 1) * w), &columns(&k, i * w, (i + 1) * w), &columns(&v, i * w, (i + 1) * w), mask);
        for (c, r) in concat.iter_mut().zip(o) {
            c.extend(r);
        }
    }
    matmul(&concat, &p.wo)
}

pub fn activation(act: Activation, x: f64) -> f64 {
    match act {
        Activation::Relu => x.max(0.0),
        Activation::Gelu => {
            0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x * x * x)).tanh())
        }
    }
}

pub fn feed_forward(h: &Rows, p: &LayerParams, act: Activation) -> Rows {
    let mid: Rows = matmul(h, &p.w1)
        .into_iter()
        .map(|r| r.iter().enumerate().map(|(j, x)| activation(act, x + p.b1[[0, j]])).collect())
        .collect();
    matmul(&mid, &p.w2)
        .into_iter()
        .map(|r| r.iter().enumerate().map(|(j, x)| x + p.b2[[0, j]]).collect())
        .collect()
}

fn layer_norm(x: &Rows, g: &Mat, b: &Mat, eps: f64) -> Rows {
    x.iter()
        .map(|r| {
            let n = r.len() as f64;
            let mean = r.iter().sum::<f64>() / n;
            let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            r.iter().enumerate().map(|(j, v)| (v - mean) / (var + eps).sqrt() * g[[0, j]] + b[[0, j]]).collect()
        })
        .collect()
}

fn add(a: &Rows, b: &Rows) -> Rows {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(u, v)| u + v).collect()).collect()
}

/// Whole post-LN encoder, one loop at a time.
pub fn encoder(input: &EncoderInput, cfg: &ModelConfig, p: &ModelParams) -> Rows {
    let mut x: Rows = (0..input.ids.len())
        .map(|i| {
            (0..cfg.d)
                .map(|j| p.embed[[input.ids[i] as usize, j]] + p.pos[[input.positions[i], j]] + p.seq[[input.seq_ids[i], j]])
                .collect()
        })
        .collect();
    for l in &p.layers {
        let a = multi_head(&x, l, cfg.n_heads, &input.mask);
        let mid = layer_norm(&add(&x, &a), &l.ln1_g, &l.ln1_b, cfg.ln_eps);
        let f = feed_forward(&mid, l, cfg.activation);
        x = layer_norm(&add(&mid, &f), &l.ln2_g, &l.ln2_b, cfg.ln_eps);
    }
    x
}

/// `W [o_0; o_i]` for every candidate `i`.
pub fn aek_logits(slots: &Rows, w: &Mat) -> Rows {
    slots[1..]
        .iter()
        .map(|oi| {
            let x: Vec<f64> = slots[0].iter().chain(oi).copied().collect();
            (0..w.nrows()).map(|c| x.iter().enumerate().map(|(j, v)| v * w[[c, j]]).sum()).collect()
        })
        .collect()
}

pub fn max_abs_diff(a: &Rows, b: &Rows) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs())).fold(0.0, f64::max)
}

/// The d = 8, two-layer model used for numerics checks: every parameter
/// random, smooth activation, untied LM head, AE_k jointwise head.
pub fn check_model(tie_lm: bool) -> (ModelConfig, ModelParams) {
    let cfg = ModelConfig {
        d: 8,
        n_layers: 2,
        n_heads: 2,
        f: 16,
        max_len: 12,
        vocab_size: 12,
        n_seq_ids: 3,
        layout: Layout::Fixed { k: 2, slot_len: 4 },
        head: HeadKind::Aek,
        activation: Activation::Gelu,
        tie_lm,
        init_std: 0.4,
        zero_init_heads: false,
        seed: 17,
        ..ModelConfig::default()
    };
    let mut p = ModelParams::init(&cfg).unwrap();
    // move layer-norm parameters and biases away from their defaults
    let mut s = 0.37f64;
    for l in &mut p.layers {
        for m in [&mut l.b1, &mut l.b2, &mut l.ln1_g, &mut l.ln1_b, &mut l.ln2_g, &mut l.ln2_b] {
            m.mapv_inplace(|v| {
                s = (s * 7.13 + 0.29).fract();
                v + s - 0.5
            });
        }
    }
    (cfg, p)
}

pub fn check_input() -> EncoderInput {
    EncoderInput::fixed(&[&[5, 6, 7], &[8, 9], &[10, 11, 5]], 2, 4, specials()).unwrap()
}

/// Sum of the LM, binary, pair and jointwise cross-entropies on one input,
/// so every parameter tensor receives gradient.
pub fn combined_loss(input: &EncoderInput, cfg: &ModelConfig, p: &ModelParams) -> (f64, ModelParams) {
    let enc = encoder_forward(input, cfg, p).unwrap();
    let h = &enc.hidden;
    let n = h.nrows();
    let lm_labels: Vec<Option<usize>> = (0..n).map(|i| input.mask[i].then_some((i * 5 + 1) % cfg.vocab_size)).collect();
    let bin_labels: Vec<Option<usize>> = (0..n).map(|i| input.mask[i].then_some(i % 2)).collect();
    let mut grads = p.zeros_like();

    let lm = head_lm(h, p).unwrap();
    let (l1, d1, _) = cross_entropy_sum(&lm, &lm_labels).unwrap();
    let mut dh = head_lm_backward(h, p, &d1, &mut grads);

    let bin = head_binary(h, p).unwrap();
    let (l2, d2, _) = cross_entropy_sum(&bin, &bin_labels).unwrap();
    dh += &head_binary_backward(h, p, &d2, &mut grads);

    let slots = enc.slot_outputs(input);
    let o0 = Mat::from_shape_vec((1, cfg.d), slots.row(0).to_vec()).unwrap();
    let pair = head_pair(&o0, p).unwrap();
    let (l3, d3, _) = cross_entropy_sum(&pair, &[Some(1)]).unwrap();
    let d_o0 = head_pair_backward(&o0, p, &d3, &mut grads);

    let k = cfg.layout.k();
    let joint = head_joint(cfg.head, &slots, k, p).unwrap();
    let labels: Vec<Option<usize>> = (0..joint.nrows()).map(|i| Some(usize::from(i == 0))).collect();
    let (l4, d4, _) = cross_entropy_sum(&joint, &labels).unwrap();
    let d_slots = head_joint_backward(cfg.head, &slots, k, p, &d4, &mut grads).unwrap();

    for (j, &r) in input.slots.iter().enumerate() {
        for c in 0..cfg.d {
            dh[[r, c]] += d_slots[[j, c]];
            if j == 0 {
                dh[[r, c]] += d_o0[[0, c]];
            }
        }
    }
    encoder_backward(input, cfg, p, &enc, dh, &mut grads).unwrap();
    (l1 + l2 + l3 + l4, grads)
}

/// Per tensor, `‖g - g_fd‖ / sqrt(‖g‖² + ‖g_fd‖²)` with central differences
/// of step `h`.
pub fn gradient_check(cfg: &ModelConfig, p: &ModelParams, input: &EncoderInput, h: f64) -> Vec<(String, f64)> {
    let (_, analytic) = combined_loss(input, cfg, p);
    let names: Vec<String> = p.tensors().iter().map(|t| t.name.clone()).collect();
    let grads: Vec<Mat> = analytic.tensors().iter().map(|t| t.value.clone()).collect();
    let mut out = Vec::new();
    for (t, name) in names.into_iter().enumerate() {
        let len = grads[t].len();
        let mut diff = 0.0;
        let mut norm = 0.0;
        for e in 0..len {
            let shifted = |delta: f64| {
                let mut q = p.clone();
                let m = q.tensors_mut().swap_remove(t);
                *m.iter_mut().nth(e).unwrap() += delta;
                combined_loss(input, cfg, &q).0
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            let a = *grads[t].iter().nth(e).unwrap();
            diff += (a - fd).powi(2);
            norm += a.abs().powi(2) + fd.abs().powi(2);
        }
        out.push((name, diff.sqrt() / norm.sqrt().max(1e-12)));
    }
    out
}
