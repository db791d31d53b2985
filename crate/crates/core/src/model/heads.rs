//! Prediction heads. Token heads read every row of the final hidden states;
//! jointwise heads read the pooled slot outputs `o_0 ... o_k` (one per row).

use ndarray::{concatenate, s, Axis};

use super::layers::{check_cols, linear, linear_backward};
use super::params::{HeadKind, Mat, ModelParams};
use crate::error::{Error, Result};

/// Vocabulary logits `H W_LMᵀ` (tied: `W_LM = E`).
pub fn head_lm(h: &Mat, params: &ModelParams) -> Result<Mat> {
    check_cols(h, params.embed.ncols(), "LM head input")?;
    Ok(linear(h, params.lm_weight()))
}

pub fn head_lm_backward(h: &Mat, params: &ModelParams, d_logits: &Mat, grads: &mut ModelParams) -> Mat {
    linear_backward(h, params.lm_weight(), d_logits, grads.lm_weight_mut())
}

/// Two logits per row: original vs replaced.
pub fn head_binary(h: &Mat, params: &ModelParams) -> Result<Mat> {
    check_cols(h, params.binary.ncols(), "binary head input")?;
    Ok(linear(h, &params.binary))
}

pub fn head_binary_backward(h: &Mat, params: &ModelParams, d_logits: &Mat, grads: &mut ModelParams) -> Mat {
    linear_backward(h, &params.binary, d_logits, &mut grads.binary)
}

/// Two logits from `o_0` of a pairwise input (IE₁ on its own matrix).
pub fn head_pair(o: &Mat, params: &ModelParams) -> Result<Mat> {
    check_cols(o, params.pair.ncols(), "pair head input")?;
    Ok(linear(o, &params.pair))
}

pub fn head_pair_backward(o: &Mat, params: &ModelParams, d_logits: &Mat, grads: &mut ModelParams) -> Mat {
    linear_backward(o, &params.pair, d_logits, &mut grads.pair)
}

fn candidates(slots: &Mat, k: usize) -> Result<Mat> {
    if slots.nrows() < k + 1 {
        return Err(Error::shape(format!("{} slot outputs for k = {k}", slots.nrows())));
    }
    Ok(slots.slice(s![1..=k, ..]).to_owned())
}

/// Input rows fed to the shared head matrix.
fn joint_input(kind: HeadKind, slots: &Mat, k: usize) -> Result<Mat> {
    let o0 = slots.slice(s![0..1, ..]).to_owned();
    Ok(match kind {
        HeadKind::Ie1 | HeadKind::Rek => o0,
        HeadKind::Ae1 => candidates(slots, k)?.mean_axis(Axis(0)).expect("k >= 1").insert_axis(Axis(0)),
        HeadKind::Iek => candidates(slots, k)?,
        HeadKind::Aek => {
            let c = candidates(slots, k)?;
            let pivot = o0.broadcast((k, o0.ncols())).expect("row broadcast").to_owned();
            concatenate(Axis(1), &[pivot.view(), c.view()]).expect("same row count")
        }
    })
}

/// Jointwise predictions, one row of two logits each: a single row for
/// IE₁/AE₁ and `k` rows for IE_k/AE_k/RE_k.
pub fn head_joint(kind: HeadKind, slots: &Mat, k: usize, params: &ModelParams) -> Result<Mat> {
    let expected = match kind {
        HeadKind::Rek => k,
        _ => 1,
    };
    if params.joint.len() != expected || k == 0 {
        return Err(Error::config(format!(
            "{kind:?} head with k = {k} needs {expected} matrices, model has {}",
            params.joint.len()
        )));
    }
    let x = joint_input(kind, slots, k)?;
    check_cols(&x, params.joint[0].ncols(), "jointwise head input")?;
    Ok(match kind {
        HeadKind::Rek => {
            let rows: Vec<Mat> = params.joint.iter().map(|w| linear(&x, w)).collect();
            let views: Vec<_> = rows.iter().map(|r| r.view()).collect();
            concatenate(Axis(0), &views).expect("equal widths")
        }
        _ => linear(&x, &params.joint[0]),
    })
}

/// Gradient with respect to the slot outputs (same shape as `slots`).
pub fn head_joint_backward(
    kind: HeadKind,
    slots: &Mat,
    k: usize,
    params: &ModelParams,
    d_logits: &Mat,
    grads: &mut ModelParams,
) -> Result<Mat> {
    let x = joint_input(kind, slots, k)?;
    let mut d_slots = Mat::zeros(slots.dim());
    let d = slots.ncols();
    match kind {
        HeadKind::Rek => {
            let mut dx = Mat::zeros(x.dim());
            for (i, (w, g)) in params.joint.iter().zip(&mut grads.joint).enumerate() {
                let dy = d_logits.slice(s![i..=i, ..]).to_owned();
                dx += &linear_backward(&x, w, &dy, g);
            }
            d_slots.slice_mut(s![0..1, ..]).assign(&dx);
        }
        _ => {
            let dx = linear_backward(&x, &params.joint[0], d_logits, &mut grads.joint[0]);
            match kind {
                HeadKind::Ie1 => d_slots.slice_mut(s![0..1, ..]).assign(&dx),
                HeadKind::Ae1 => {
                    let share = &dx.row(0) / k as f64;
                    for mut row in d_slots.slice_mut(s![1..=k, ..]).rows_mut() {
                        row.assign(&share);
                    }
                }
                HeadKind::Iek => d_slots.slice_mut(s![1..=k, ..]).assign(&dx),
                HeadKind::Aek => {
                    let pivot = dx.slice(s![.., ..d]).sum_axis(Axis(0));
                    d_slots.row_mut(0).assign(&pivot);
                    d_slots.slice_mut(s![1..=k, ..]).assign(&dx.slice(s![.., d..]));
                }
                HeadKind::Rek => unreachable!(),
            }
        }
    }
    Ok(d_slots)
}
