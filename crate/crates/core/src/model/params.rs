use ndarray::Array2;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{seeded, sub_seed};

/// Dense row-major matrix used for every parameter and activation.
pub type Mat = Array2<f64>;

/// How several text spans are packed into one encoder input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Layout {
    /// `<s> a </s> b </s>` with sequence ids 0 and 1.
    Pairwise,
    /// `k + 1` slots of exactly `slot_len` tokens, cropped or padded on the
    /// right. Slot `i` is pooled at row `i * slot_len`.
    Fixed { k: usize, slot_len: usize },
    /// `k + 1` variable-length spans under a total budget, pooled at row 0.
    Flexible { k: usize, total: usize },
}

impl Layout {
    pub fn k(&self) -> usize {
        match *self {
            Layout::Pairwise => 1,
            Layout::Fixed { k, .. } | Layout::Flexible { k, .. } => k,
        }
    }

    /// Longest packed input the layout can produce.
    pub fn length(&self, max_len: usize) -> usize {
        match *self {
            Layout::Pairwise => max_len,
            Layout::Fixed { k, slot_len } => (k + 1) * slot_len,
            Layout::Flexible { total, .. } => total,
        }
    }

    /// Distinct sequence ids the layout assigns.
    pub fn seq_ids(&self) -> usize {
        match *self {
            Layout::Fixed { k, .. } => k + 1,
            Layout::Pairwise | Layout::Flexible { .. } => 2,
        }
    }
}

/// Classification head over the pooled slot outputs `o_0 ... o_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// `W o_0`.
    Ie1,
    /// `W mean(o_1 ... o_k)`.
    Ae1,
    /// Shared `W o_i` for every candidate.
    Iek,
    /// Shared `W [o_0; o_i]` for every candidate.
    Aek,
    /// `k` separate `W_i o_0`.
    Rek,
}

impl HeadKind {
    pub fn compatible(self, layout: &Layout) -> bool {
        match self {
            HeadKind::Ie1 => true,
            HeadKind::Ae1 | HeadKind::Iek | HeadKind::Aek => matches!(layout, Layout::Fixed { .. }),
            HeadKind::Rek => matches!(layout, Layout::Flexible { .. }),
        }
    }

    /// Number of predictions per input.
    pub fn outputs(self, k: usize) -> usize {
        match self {
            HeadKind::Ie1 | HeadKind::Ae1 => 1,
            HeadKind::Iek | HeadKind::Aek | HeadKind::Rek => k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    /// Tanh approximation.
    Gelu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub d: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    /// FFN intermediate size.
    pub f: usize,
    /// Number of learned positions.
    pub max_len: usize,
    pub vocab_size: usize,
    pub n_seq_ids: usize,
    pub layout: Layout,
    pub head: HeadKind,
    pub activation: Activation,
    /// LM head shares the word embedding matrix.
    pub tie_lm: bool,
    pub ln_eps: f64,
    pub init_std: f64,
    /// Start the classification heads (binary, pair, jointwise) at zero so
    /// every example begins at the uniform prediction.
    pub zero_init_heads: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d: 32,
            n_layers: 2,
            n_heads: 2,
            f: 64,
            max_len: 64,
            vocab_size: 64,
            n_seq_ids: 2,
            layout: Layout::Pairwise,
            head: HeadKind::Ie1,
            activation: Activation::Relu,
            tie_lm: true,
            ln_eps: 1e-5,
            init_std: 0.1,
            zero_init_heads: true,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d", self.d),
            ("n_layers", self.n_layers),
            ("n_heads", self.n_heads),
            ("f", self.f),
            ("max_len", self.max_len),
            ("vocab_size", self.vocab_size),
            ("n_seq_ids", self.n_seq_ids),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::config(format!("model.{name} must be positive")));
        }
        if !self.d.is_multiple_of(self.n_heads) {
            return Err(Error::config(format!(
                "model.d = {} is not divisible by model.n_heads = {}",
                self.d, self.n_heads
            )));
        }
        if self.layout.k() == 0 {
            return Err(Error::config("model.layout.k must be at least 1"));
        }
        let len = self.layout.length(self.max_len);
        if len > self.max_len || len == 0 {
            return Err(Error::config(format!(
                "model.layout needs {len} positions, model.max_len is {}",
                self.max_len
            )));
        }
        if self.layout.seq_ids() > self.n_seq_ids {
            return Err(Error::config(format!(
                "model.layout needs {} sequence ids, model.n_seq_ids is {}",
                self.layout.seq_ids(),
                self.n_seq_ids
            )));
        }
        if !self.head.compatible(&self.layout) {
            return Err(Error::config(format!(
                "model.head {:?} cannot be used with the {:?} layout",
                self.head, self.layout
            )));
        }
        if !(self.ln_eps > 0.0) || !(self.init_std >= 0.0) {
            return Err(Error::config("model.ln_eps must be positive and model.init_std non-negative"));
        }
        Ok(())
    }

    /// Shapes of the jointwise head matrices.
    fn joint_shapes(&self) -> Vec<(usize, usize)> {
        match self.head {
            HeadKind::Ie1 | HeadKind::Ae1 | HeadKind::Iek => vec![(2, self.d)],
            HeadKind::Aek => vec![(2, 2 * self.d)],
            HeadKind::Rek => vec![(2, self.d); self.layout.k()],
        }
    }
}

/// One post-LN encoder block.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub wq: Mat,
    pub wk: Mat,
    pub wv: Mat,
    pub wo: Mat,
    pub w1: Mat,
    pub b1: Mat,
    pub w2: Mat,
    pub b2: Mat,
    pub ln1_g: Mat,
    pub ln1_b: Mat,
    pub ln2_g: Mat,
    pub ln2_b: Mat,
}

impl LayerParams {
    pub(crate) fn zeros(d: usize, f: usize) -> Self {
        let z = Mat::zeros;
        LayerParams {
            wq: z((d, d)),
            wk: z((d, d)),
            wv: z((d, d)),
            wo: z((d, d)),
            w1: z((d, f)),
            b1: z((1, f)),
            w2: z((f, d)),
            b2: z((1, d)),
            ln1_g: z((1, d)),
            ln1_b: z((1, d)),
            ln2_g: z((1, d)),
            ln2_b: z((1, d)),
        }
    }
}

/// Named view of one parameter tensor.
pub struct Tensor<'a> {
    pub name: String,
    /// Whether weight decay applies (not to biases and layer norms).
    pub decay: bool,
    pub value: &'a Mat,
}

/// Every trainable tensor of the encoder and its heads. The same type holds
/// gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub embed: Mat,
    pub pos: Mat,
    pub seq: Mat,
    pub layers: Vec<LayerParams>,
    /// Untied LM head; `None` means logits use `embed`.
    pub lm: Option<Mat>,
    /// Token-level original/replaced head.
    pub binary: Mat,
    /// Sentence-pair head on `o_0` of a pairwise input.
    pub pair: Mat,
    /// Jointwise head matrices, shaped by [`HeadKind`].
    pub joint: Vec<Mat>,
}

impl ModelParams {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let d = cfg.d;
        ModelParams {
            embed: Mat::zeros((cfg.vocab_size, d)),
            pos: Mat::zeros((cfg.max_len, d)),
            seq: Mat::zeros((cfg.n_seq_ids, d)),
            layers: (0..cfg.n_layers).map(|_| LayerParams::zeros(d, cfg.f)).collect(),
            lm: (!cfg.tie_lm).then(|| Mat::zeros((cfg.vocab_size, d))),
            binary: Mat::zeros((2, d)),
            pair: Mat::zeros((2, d)),
            joint: cfg.joint_shapes().into_iter().map(Mat::zeros).collect(),
        }
    }

    /// Gaussian weights, unit layer-norm scales, zero biases.
    pub fn init(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut p = ModelParams::zeros(cfg);
        let mut rng = seeded(sub_seed(cfg.seed, "model/init"));
        let normal = Normal::new(0.0, cfg.init_std).map_err(|e| Error::config(e.to_string()))?;
        let mut fill = |m: &mut Mat| m.mapv_inplace(|_| normal.sample(&mut rng));
        fill(&mut p.embed);
        fill(&mut p.pos);
        fill(&mut p.seq);
        for l in &mut p.layers {
            for m in [&mut l.wq, &mut l.wk, &mut l.wv, &mut l.wo, &mut l.w1, &mut l.w2] {
                fill(m);
            }
            l.ln1_g.fill(1.0);
            l.ln2_g.fill(1.0);
        }
        if let Some(lm) = &mut p.lm {
            fill(lm);
        }
        if !cfg.zero_init_heads {
            fill(&mut p.binary);
            fill(&mut p.pair);
            for w in &mut p.joint {
                fill(w);
            }
        }
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for m in z.tensors_mut() {
            m.fill(0.0);
        }
        z
    }

    /// Tensors in a fixed order shared with [`ModelParams::tensors_mut`].
    pub fn tensors(&self) -> Vec<Tensor<'_>> {
        fn t(name: String, decay: bool, value: &Mat) -> Tensor<'_> {
            Tensor { name, decay, value }
        }
        let mut out = vec![
            t("embed".into(), true, &self.embed),
            t("pos".into(), true, &self.pos),
            t("seq".into(), true, &self.seq),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            let named = [
                ("wq", true, &l.wq),
                ("wk", true, &l.wk),
                ("wv", true, &l.wv),
                ("wo", true, &l.wo),
                ("w1", true, &l.w1),
                ("b1", false, &l.b1),
                ("w2", true, &l.w2),
                ("b2", false, &l.b2),
                ("ln1_g", false, &l.ln1_g),
                ("ln1_b", false, &l.ln1_b),
                ("ln2_g", false, &l.ln2_g),
                ("ln2_b", false, &l.ln2_b),
            ];
            out.extend(named.into_iter().map(|(n, dec, v)| t(format!("layer{i}.{n}"), dec, v)));
        }
        if let Some(lm) = &self.lm {
            out.push(t("lm".into(), true, lm));
        }
        out.push(t("binary".into(), true, &self.binary));
        out.push(t("pair".into(), true, &self.pair));
        for (i, w) in self.joint.iter().enumerate() {
            out.push(t(format!("joint{i}"), true, w));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        let mut out = vec![&mut self.embed, &mut self.pos, &mut self.seq];
        for l in &mut self.layers {
            out.extend([
                &mut l.wq,
                &mut l.wk,
                &mut l.wv,
                &mut l.wo,
                &mut l.w1,
                &mut l.b1,
                &mut l.w2,
                &mut l.b2,
                &mut l.ln1_g,
                &mut l.ln1_b,
                &mut l.ln2_g,
                &mut l.ln2_b,
            ]);
        }
        if let Some(lm) = &mut self.lm {
            out.push(lm);
        }
        out.push(&mut self.binary);
        out.push(&mut self.pair);
        out.extend(self.joint.iter_mut());
        out
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.value.len()).sum()
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) -> Result<()> {
        let theirs: Vec<&Mat> = other.tensors().into_iter().map(|t| t.value).collect();
        let mine = self.tensors_mut();
        if mine.len() != theirs.len() {
            return Err(Error::shape("parameter sets differ in tensor count"));
        }
        for (a, b) in mine.into_iter().zip(theirs) {
            if a.dim() != b.dim() {
                return Err(Error::shape(format!("{:?} vs {:?}", a.dim(), b.dim())));
            }
            a.scaled_add(scale, b);
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.value.iter().all(|v| v.is_finite()))
    }

    /// Weight matrix of the LM head (`embed` when tied).
    pub fn lm_weight(&self) -> &Mat {
        self.lm.as_ref().unwrap_or(&self.embed)
    }

    pub(crate) fn lm_weight_mut(&mut self) -> &mut Mat {
        match &mut self.lm {
            Some(lm) => lm,
            None => &mut self.embed,
        }
    }
}
