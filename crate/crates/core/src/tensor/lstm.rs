use serde::{Deserialize, Serialize};

use super::conv::accumulate;
use super::{sigmoid, Tensor};
use crate::error::{Error, Result};

/// Single LSTM layer with gate order (input, forget, cell, output).
///
/// `w_input [features, 4h]`, `w_hidden [h, 4h]`, `bias [4h]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub w_input: Tensor,
    pub w_hidden: Tensor,
    pub bias: Tensor,
}

/// Per-step activations kept for backpropagation through time.
#[derive(Debug, Clone)]
pub struct LstmCache {
    batch: usize,
    steps: usize,
    features: usize,
    input: Vec<f64>,
    /// Hidden and cell states, `steps + 1` slices of `[b, h]` starting at zero.
    h: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    /// Post-activation gates per step, `[b, 4h]`.
    gates: Vec<Vec<f64>>,
}

impl Lstm {
    pub fn hidden(&self) -> usize {
        self.w_hidden.shape()[0]
    }

    pub fn features(&self) -> usize {
        self.w_input.shape()[0]
    }

    pub fn parameter_count(&self) -> usize {
        self.w_input.len() + self.w_hidden.len() + self.bias.len()
    }

    fn check(&self) -> Result<()> {
        let h = self.hidden();
        self.w_hidden.expect_shape("lstm w_hidden", &[h, 4 * h])?;
        self.w_input
            .expect_shape("lstm w_input", &[self.features(), 4 * h])?;
        self.bias.expect_shape("lstm bias", &[4 * h])
    }

    /// Runs the sequence `[b, f, features]` and returns every hidden state
    /// as `[b, f, h]`. The last step is the layer's final hidden state.
    pub fn forward(&self, sequence: &Tensor) -> Result<(Tensor, LstmCache)> {
        self.check()?;
        sequence.expect_rank("lstm input", 3)?;
        let [b, f, nf] = sequence.shape()[..] else {
            unreachable!()
        };
        if nf != self.features() {
            return Err(Error::ShapeMismatch(format!(
                "lstm: {nf} input features, layer expects {}",
                self.features()
            )));
        }
        if f == 0 {
            return Err(Error::ShapeMismatch("lstm: empty sequence".into()));
        }
        let h = self.hidden();
        let g4 = 4 * h;
        let wi = self.w_input.data();
        let wh = self.w_hidden.data();
        let mut cache = LstmCache {
            batch: b,
            steps: f,
            features: nf,
            input: sequence.data().to_vec(),
            h: vec![vec![0.0; b * h]],
            c: vec![vec![0.0; b * h]],
            gates: Vec::with_capacity(f),
        };
        let mut out = Tensor::zeros(&[b, f, h]);
        for t in 0..f {
            let mut z = vec![0.0; b * g4];
            for n in 0..b {
                let zr = &mut z[n * g4..(n + 1) * g4];
                zr.copy_from_slice(self.bias.data());
                let x = &sequence.data()[(n * f + t) * nf..(n * f + t + 1) * nf];
                for (i, &xv) in x.iter().enumerate() {
                    for (zv, wv) in zr.iter_mut().zip(&wi[i * g4..(i + 1) * g4]) {
                        *zv += xv * wv;
                    }
                }
                let hp = &cache.h[t][n * h..(n + 1) * h];
                for (j, &hv) in hp.iter().enumerate() {
                    for (zv, wv) in zr.iter_mut().zip(&wh[j * g4..(j + 1) * g4]) {
                        *zv += hv * wv;
                    }
                }
            }
            let mut h_new = vec![0.0; b * h];
            let mut c_new = vec![0.0; b * h];
            for n in 0..b {
                let zr = &mut z[n * g4..(n + 1) * g4];
                for k in 0..h {
                    let i = sigmoid(zr[k]);
                    let fg = sigmoid(zr[h + k]);
                    let g = zr[2 * h + k].tanh();
                    let o = sigmoid(zr[3 * h + k]);
                    zr[k] = i;
                    zr[h + k] = fg;
                    zr[2 * h + k] = g;
                    zr[3 * h + k] = o;
                    let c = fg * cache.c[t][n * h + k] + i * g;
                    c_new[n * h + k] = c;
                    h_new[n * h + k] = o * c.tanh();
                    out.data_mut()[(n * f + t) * h + k] = h_new[n * h + k];
                }
            }
            cache.gates.push(z);
            cache.h.push(h_new);
            cache.c.push(c_new);
        }
        Ok((out, cache))
    }

    /// Backpropagation through time. `grad_out` is the gradient with respect
    /// to every hidden state `[b, f, h]`; pass zeros for unused steps.
    /// Parameter gradients are accumulated and the input gradient returned.
    pub fn backward(&mut self, cache: &LstmCache, grad_out: &Tensor) -> Result<Tensor> {
        let h = self.hidden();
        let g4 = 4 * h;
        let (b, f, nf) = (cache.batch, cache.steps, cache.features);
        grad_out.expect_shape("lstm grad_out", &[b, f, h])?;
        let mut g_wi = vec![0.0; nf * g4];
        let mut g_wh = vec![0.0; h * g4];
        let mut g_b = vec![0.0; g4];
        let mut g_x = Tensor::zeros(&[b, f, nf]);
        let mut dh_next = vec![0.0; b * h];
        let mut dc_next = vec![0.0; b * h];
        let mut dz = vec![0.0; g4];
        let wi = self.w_input.data();
        let wh = self.w_hidden.data();
        for t in (0..f).rev() {
            let gates = &cache.gates[t];
            for n in 0..b {
                let gr = &gates[n * g4..(n + 1) * g4];
                for k in 0..h {
                    let idx = n * h + k;
                    let (i, fg, g, o) = (gr[k], gr[h + k], gr[2 * h + k], gr[3 * h + k]);
                    let c = cache.c[t + 1][idx];
                    let tc = c.tanh();
                    let dh = grad_out.data()[(n * f + t) * h + k] + dh_next[idx];
                    let dc = dh * o * (1.0 - tc * tc) + dc_next[idx];
                    dz[k] = dc * g * i * (1.0 - i);
                    dz[h + k] = dc * cache.c[t][idx] * fg * (1.0 - fg);
                    dz[2 * h + k] = dc * i * (1.0 - g * g);
                    dz[3 * h + k] = dh * tc * o * (1.0 - o);
                    dc_next[idx] = dc * fg;
                }
                accumulate(&mut g_b, &dz);
                let xoff = (n * f + t) * nf;
                let x = &cache.input[xoff..xoff + nf];
                for (ii, &xv) in x.iter().enumerate() {
                    let wrow = &wi[ii * g4..(ii + 1) * g4];
                    g_x.data_mut()[xoff + ii] = wrow.iter().zip(&dz).map(|(a, b)| a * b).sum();
                    for (gw, d) in g_wi[ii * g4..(ii + 1) * g4].iter_mut().zip(&dz) {
                        *gw += xv * d;
                    }
                }
                let hp = &cache.h[t][n * h..(n + 1) * h];
                for j in 0..h {
                    let wrow = &wh[j * g4..(j + 1) * g4];
                    dh_next[n * h + j] = wrow.iter().zip(&dz).map(|(a, b)| a * b).sum();
                    let hv = hp[j];
                    if hv != 0.0 {
                        for (gw, d) in g_wh[j * g4..(j + 1) * g4].iter_mut().zip(&dz) {
                            *gw += hv * d;
                        }
                    }
                }
            }
        }
        accumulate(self.w_input.grad_mut(), &g_wi);
        accumulate(self.w_hidden.grad_mut(), &g_wh);
        accumulate(self.bias.grad_mut(), &g_b);
        Ok(g_x)
    }
}
