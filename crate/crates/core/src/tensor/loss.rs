use super::Tensor;
use crate::error::{Error, Result};

/// A loss evaluation.
///
/// `value` is the reported quantity (mean cosine similarity for the cosine
/// loss, mean cross-entropy otherwise). `objective` is what the optimizer
/// minimizes and `grad` is its gradient with respect to the predictions.
#[derive(Debug, Clone)]
pub struct LossValue {
    pub value: f64,
    pub objective: f64,
    pub grad: Tensor,
}

/// Mean cosine similarity between rows of `pred` and `target`, both `[b, d]`.
/// The objective is `1 − mean cos`.
pub fn cosine_loss(pred: &Tensor, target: &Tensor) -> Result<LossValue> {
    pred.expect_rank("cosine_loss pred", 2)?;
    target.expect_shape("cosine_loss target", pred.shape())?;
    let b = pred.rows();
    if b == 0 {
        return Err(Error::Empty);
    }
    let mut grad = Tensor::zeros(pred.shape());
    let d = pred.row_len();
    let mut total = 0.0;
    for n in 0..b {
        let p = pred.row(n);
        let t = target.row(n);
        let pn = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        let tn = t.iter().map(|v| v * v).sum::<f64>().sqrt();
        if pn == 0.0 || tn == 0.0 || !pn.is_finite() || !tn.is_finite() {
            return Err(Error::ZeroVectorRow(n));
        }
        let dot: f64 = p.iter().zip(t).map(|(a, b)| a * b).sum();
        let cos = (dot / (pn * tn)).clamp(-1.0, 1.0);
        total += cos;
        let g = &mut grad.data_mut()[n * d..(n + 1) * d];
        for k in 0..d {
            g[k] = -(t[k] / (pn * tn) - cos * p[k] / (pn * pn)) / b as f64;
        }
    }
    let value = total / b as f64;
    Ok(LossValue {
        value,
        objective: 1.0 - value,
        grad,
    })
}

/// Row-wise softmax of `[b, k]` logits.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    logits.expect_rank("softmax logits", 2)?;
    let mut out = logits.clone();
    let k = logits.row_len();
    for row in out.data_mut().chunks_mut(k.max(1)) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        row.iter_mut().for_each(|v| *v /= s);
    }
    Ok(out)
}

/// Mean softmax cross-entropy of `[b, k]` logits against class indices.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<LossValue> {
    logits.expect_rank("softmax_cross_entropy logits", 2)?;
    let b = logits.rows();
    let k = logits.row_len();
    if labels.len() != b {
        return Err(Error::LengthMismatch(b, labels.len()));
    }
    if b == 0 {
        return Err(Error::Empty);
    }
    if k < 2 {
        return Err(Error::ShapeMismatch(format!(
            "softmax_cross_entropy needs at least 2 classes, got {k}"
        )));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::LabelOutOfRange { label, classes: k });
    }
    let mut grad = softmax(logits)?;
    let mut total = 0.0;
    for (n, &label) in labels.iter().enumerate() {
        let row = logits.row(n);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse - row[label];
        let g = &mut grad.data_mut()[n * k..(n + 1) * k];
        g[label] -= 1.0;
        g.iter_mut().for_each(|v| *v /= b as f64);
    }
    let value = total / b as f64;
    Ok(LossValue {
        value,
        objective: value,
        grad,
    })
}
