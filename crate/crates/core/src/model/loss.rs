use super::layers::softmax_rows;
use super::params::Mat;
use crate::error::{Error, Result};

/// Row-wise softmax of a logit matrix.
pub fn softmax(logits: &Mat) -> Mat {
    let mut p = logits.clone();
    softmax_rows(&mut p);
    p
}

fn log_sum_exp(row: ndarray::ArrayView1<f64>) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Summed `-log softmax(logits)[label]` over rows with a label, its gradient
/// with respect to the logits, and the number of labelled rows.
pub fn cross_entropy_sum(logits: &Mat, labels: &[Option<usize>]) -> Result<(f64, Mat, usize)> {
    if labels.len() != logits.nrows() {
        return Err(Error::shape(format!("{} labels for {} rows", labels.len(), logits.nrows())));
    }
    let classes = logits.ncols();
    let mut grad = Mat::zeros(logits.dim());
    let mut total = 0.0;
    let mut count = 0;
    for (i, label) in labels.iter().enumerate() {
        let Some(y) = *label else { continue };
        if y >= classes {
            return Err(Error::Range { what: "class", index: y, size: classes });
        }
        let row = logits.row(i);
        let lse = log_sum_exp(row);
        total += lse - row[y];
        for (g, &z) in grad.row_mut(i).iter_mut().zip(row) {
            *g = (z - lse).exp();
        }
        grad[[i, y]] -= 1.0;
        count += 1;
    }
    if !total.is_finite() {
        return Err(Error::Numeric(format!("cross-entropy is {total}")));
    }
    Ok((total, grad, count))
}

/// Mean cross-entropy over labelled rows; zero when no row is labelled.
pub fn cross_entropy(logits: &Mat, labels: &[Option<usize>]) -> Result<(f64, Mat)> {
    let (total, mut grad, count) = cross_entropy_sum(logits, labels)?;
    if count == 0 {
        return Ok((0.0, grad));
    }
    grad /= count as f64;
    Ok((total / count as f64, grad))
}

/// Summed cross-entropy against per-row target distributions.
pub fn soft_cross_entropy_sum(logits: &Mat, targets: &Mat) -> Result<(f64, Mat)> {
    if logits.dim() != targets.dim() {
        return Err(Error::shape(format!("targets {:?} for logits {:?}", targets.dim(), logits.dim())));
    }
    let mut grad = Mat::zeros(logits.dim());
    let mut total = 0.0;
    for ((row, q), mut g) in logits.rows().into_iter().zip(targets.rows()).zip(grad.rows_mut()) {
        let lse = log_sum_exp(row);
        let mass: f64 = q.sum();
        for ((gv, &z), &qv) in g.iter_mut().zip(row).zip(q) {
            total -= qv * (z - lse);
            *gv = mass * (z - lse).exp() - qv;
        }
    }
    if !total.is_finite() {
        return Err(Error::Numeric(format!("cross-entropy is {total}")));
    }
    Ok((total, grad))
}
