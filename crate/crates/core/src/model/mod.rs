//! A small post-LN transformer encoder with hand-written backward passes.
//!
//! Everything runs in `f64` on one thread per example. Inputs are packed by
//! [`EncoderInput`] in one of three layouts, the encoder produces one hidden
//! row per position, and heads turn either every row (LM, binary) or the
//! pooled slot rows (jointwise) into logits.

mod checkpoint;
mod encoder;
mod heads;
mod layers;
mod loss;
mod optim;
mod params;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use encoder::{embed_sequence, encoder_backward, encoder_forward, truncate_longest, Encoded, EncoderInput};
pub use heads::{
    head_binary, head_binary_backward, head_joint, head_joint_backward, head_lm, head_lm_backward, head_pair,
    head_pair_backward,
};
pub use layers::{feed_forward, multi_head_attention, scaled_dot_attention};
pub use loss::{cross_entropy, cross_entropy_sum, soft_cross_entropy_sum, softmax};
pub use optim::{triangular_lr, Optimizer, OptimizerKind, TrainConfig};
pub use params::{Activation, HeadKind, LayerParams, Layout, Mat, ModelConfig, ModelParams, Tensor};

pub(crate) use encoder::{gather_rows, scatter_rows};

use crate::error::{Error, Result};

/// `[0, ..., 1, ..., 0]` with the one at `i`.
pub fn one_hot(i: usize, size: usize) -> Result<Vec<u8>> {
    if i >= size {
        return Err(Error::Range { what: "one-hot index", index: i, size });
    }
    let mut v = vec![0; size];
    v[i] = 1;
    Ok(v)
}

/// Fixed positional value for position `i`, dimension `j` of `d`:
/// `sin(i / 10000^(2j/d))` for even `j`, `cos` of the same for odd `j`.
pub fn sinusoid_position(i: usize, j: usize, d: usize) -> f64 {
    let angle = i as f64 / 10000f64.powf(2.0 * j as f64 / d as f64);
    if j.is_multiple_of(2) {
        angle.sin()
    } else {
        angle.cos()
    }
}

/// Configuration and parameters travelling together.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub cfg: ModelConfig,
    pub params: ModelParams,
}

impl Model {
    pub fn new(cfg: ModelConfig) -> Result<Self> {
        let params = ModelParams::init(&cfg)?;
        Ok(Model { cfg, params })
    }

    pub fn forward(&self, input: &EncoderInput) -> Result<Encoded> {
        encoder_forward(input, &self.cfg, &self.params)
    }

    pub fn backward(&self, input: &EncoderInput, enc: &Encoded, d_hidden: Mat, grads: &mut ModelParams) -> Result<()> {
        encoder_backward(input, &self.cfg, &self.params, enc, d_hidden, grads)
    }
}
