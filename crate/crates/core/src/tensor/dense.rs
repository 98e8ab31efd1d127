use serde::{Deserialize, Serialize};

use super::conv::accumulate;
use super::Tensor;
use crate::error::{Error, Result};

fn dims(input: &Tensor, weights: &Tensor) -> Result<(usize, usize, usize)> {
    input.expect_rank("dense input", 2)?;
    weights.expect_rank("dense weights", 2)?;
    let [b, n_in] = input.shape()[..] else {
        unreachable!()
    };
    let [w_in, n_out] = weights.shape()[..] else {
        unreachable!()
    };
    if w_in != n_in {
        return Err(Error::ShapeMismatch(format!(
            "dense: input width {n_in}, weights expect {w_in}"
        )));
    }
    Ok((b, n_in, n_out))
}

/// `y = x·W + b` with `x [b, in]`, `W [in, out]`, `b [out]`.
pub fn dense_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (b, n_in, n_out) = dims(input, weights)?;
    bias.expect_shape("dense bias", &[n_out])?;
    let w = weights.data();
    let mut out = Tensor::zeros(&[b, n_out]);
    for n in 0..b {
        let x = input.row(n);
        let y = &mut out.data_mut()[n * n_out..(n + 1) * n_out];
        y.copy_from_slice(bias.data());
        for (i, &xi) in x.iter().enumerate().take(n_in) {
            if xi == 0.0 {
                continue;
            }
            for (yv, wv) in y.iter_mut().zip(&w[i * n_out..(i + 1) * n_out]) {
                *yv += xi * wv;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

pub fn dense_backward(input: &Tensor, weights: &Tensor, grad_out: &Tensor) -> Result<DenseGrads> {
    let (b, n_in, n_out) = dims(input, weights)?;
    grad_out.expect_shape("dense grad_out", &[b, n_out])?;
    let w = weights.data();
    let mut g_in = Tensor::zeros(&[b, n_in]);
    let mut g_w = Tensor::zeros(weights.shape());
    let mut g_b = Tensor::zeros(&[n_out]);
    for n in 0..b {
        let x = input.row(n);
        let g = grad_out.row(n);
        accumulate(g_b.data_mut(), g);
        for i in 0..n_in {
            let wrow = &w[i * n_out..(i + 1) * n_out];
            g_in.data_mut()[n * n_in + i] = wrow.iter().zip(g).map(|(a, b)| a * b).sum();
            let xi = x[i];
            if xi != 0.0 {
                for (gw, gv) in g_w.data_mut()[i * n_out..(i + 1) * n_out].iter_mut().zip(g) {
                    *gw += xi * gv;
                }
            }
        }
    }
    Ok(DenseGrads {
        input: g_in,
        weights: g_w,
        bias: g_b,
    })
}

/// Fully connected layer owning its weights `[in, out]` and bias `[out]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Tensor,
    pub bias: Tensor,
}

impl Dense {
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        dense_forward(input, &self.weights, &self.bias)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        let g = dense_backward(input, &self.weights, grad_out)?;
        accumulate(self.weights.grad_mut(), g.weights.data());
        accumulate(self.bias.grad_mut(), g.bias.data());
        Ok(g.input)
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}
