use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

/// Geometry of one convolution, derived from input and kernel shapes.
#[derive(Debug, Clone, Copy)]
struct ConvDims {
    batch: usize,
    in_c: usize,
    h: usize,
    w: usize,
    out_c: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    padding: usize,
}

impl ConvDims {
    fn new(input: &Tensor, kernels: &Tensor, stride: usize, padding: usize) -> Result<Self> {
        input.expect_rank("conv2d input", 4)?;
        kernels.expect_rank("conv2d kernels", 4)?;
        let [batch, in_c, h, w] = input.shape()[..] else {
            unreachable!()
        };
        let [out_c, kc, kh, kw] = kernels.shape()[..] else {
            unreachable!()
        };
        if kc != in_c {
            return Err(Error::ShapeMismatch(format!(
                "conv2d: input has {in_c} channels, kernels expect {kc}"
            )));
        }
        if stride == 0 {
            return Err(Error::ShapeMismatch(
                "conv2d: stride must be positive".into(),
            ));
        }
        let (ph, pw) = (h + 2 * padding, w + 2 * padding);
        if kh == 0 || kw == 0 || kh > ph || kw > pw {
            return Err(Error::ShapeMismatch(format!(
                "conv2d: kernel {kh}x{kw} does not fit padded input {ph}x{pw}"
            )));
        }
        Ok(ConvDims {
            batch,
            in_c,
            h,
            w,
            out_c,
            kh,
            kw,
            oh: (ph - kh) / stride + 1,
            ow: (pw - kw) / stride + 1,
            stride,
            padding,
        })
    }

    fn patch(&self) -> usize {
        self.in_c * self.kh * self.kw
    }

    fn positions(&self) -> usize {
        self.oh * self.ow
    }

    /// Input coordinate read by output position (oy, ox) at kernel tap (ky, kx).
    fn source(&self, oy: usize, ox: usize, ky: usize, kx: usize) -> Option<(usize, usize)> {
        let y = (oy * self.stride + ky).checked_sub(self.padding)?;
        let x = (ox * self.stride + kx).checked_sub(self.padding)?;
        (y < self.h && x < self.w).then_some((y, x))
    }

    /// Unfolds one sample into a `[patch, positions]` matrix.
    fn im2col(&self, sample: &[f64], cols: &mut [f64]) {
        let np = self.positions();
        for c in 0..self.in_c {
            let plane = &sample[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let row = ((c * self.kh + ky) * self.kw + kx) * np;
                    for oy in 0..self.oh {
                        for ox in 0..self.ow {
                            cols[row + oy * self.ow + ox] = match self.source(oy, ox, ky, kx) {
                                Some((y, x)) => plane[y * self.w + x],
                                None => 0.0,
                            };
                        }
                    }
                }
            }
        }
    }

    /// Scatters a `[patch, positions]` gradient back onto one input sample.
    fn col2im(&self, cols: &[f64], sample: &mut [f64]) {
        let np = self.positions();
        for c in 0..self.in_c {
            let base = c * self.h * self.w;
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let row = ((c * self.kh + ky) * self.kw + kx) * np;
                    for oy in 0..self.oh {
                        for ox in 0..self.ow {
                            if let Some((y, x)) = self.source(oy, ox, ky, kx) {
                                sample[base + y * self.w + x] += cols[row + oy * self.ow + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Cross-correlation of `input [b, c, h, w]` with `kernels [o, c, kh, kw]`.
pub fn conv2d_forward(
    input: &Tensor,
    kernels: &Tensor,
    bias: Option<&Tensor>,
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let d = ConvDims::new(input, kernels, stride, padding)?;
    if let Some(b) = bias {
        b.expect_shape("conv2d bias", &[d.out_c])?;
    }
    let (np, patch) = (d.positions(), d.patch());
    let mut out = Tensor::zeros(&[d.batch, d.out_c, d.oh, d.ow]);
    let mut cols = vec![0.0; patch * np];
    let in_len = d.in_c * d.h * d.w;
    let k = kernels.data();
    for n in 0..d.batch {
        d.im2col(&input.data()[n * in_len..(n + 1) * in_len], &mut cols);
        let o = &mut out.data_mut()[n * d.out_c * np..(n + 1) * d.out_c * np];
        for oc in 0..d.out_c {
            let orow = &mut o[oc * np..(oc + 1) * np];
            if let Some(b) = bias {
                orow.iter_mut().for_each(|v| *v = b.data()[oc]);
            }
            for p in 0..patch {
                let wv = k[oc * patch + p];
                let crow = &cols[p * np..(p + 1) * np];
                for (ov, cv) in orow.iter_mut().zip(crow) {
                    *ov += wv * cv;
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Conv2dGrads {
    pub input: Tensor,
    pub kernels: Tensor,
    pub bias: Tensor,
}

/// Gradients of a convolution with respect to its input, kernels and bias.
pub fn conv2d_backward(
    input: &Tensor,
    kernels: &Tensor,
    stride: usize,
    padding: usize,
    grad_out: &Tensor,
) -> Result<Conv2dGrads> {
    let d = ConvDims::new(input, kernels, stride, padding)?;
    grad_out.expect_shape("conv2d grad_out", &[d.batch, d.out_c, d.oh, d.ow])?;
    let (np, patch) = (d.positions(), d.patch());
    let in_len = d.in_c * d.h * d.w;
    let k = kernels.data();
    let mut g_in = Tensor::zeros(input.shape());
    let mut g_k = Tensor::zeros(kernels.shape());
    let mut g_b = Tensor::zeros(&[d.out_c]);
    let mut cols = vec![0.0; patch * np];
    let mut g_cols = vec![0.0; patch * np];
    for n in 0..d.batch {
        d.im2col(&input.data()[n * in_len..(n + 1) * in_len], &mut cols);
        g_cols.iter_mut().for_each(|v| *v = 0.0);
        let go = &grad_out.data()[n * d.out_c * np..(n + 1) * d.out_c * np];
        for oc in 0..d.out_c {
            let grow = &go[oc * np..(oc + 1) * np];
            g_b.data_mut()[oc] += grow.iter().sum::<f64>();
            for p in 0..patch {
                let crow = &cols[p * np..(p + 1) * np];
                g_k.data_mut()[oc * patch + p] +=
                    crow.iter().zip(grow).map(|(a, b)| a * b).sum::<f64>();
                let wv = k[oc * patch + p];
                for (gc, gv) in g_cols[p * np..(p + 1) * np].iter_mut().zip(grow) {
                    *gc += wv * gv;
                }
            }
        }
        d.col2im(&g_cols, &mut g_in.data_mut()[n * in_len..(n + 1) * in_len]);
    }
    Ok(Conv2dGrads {
        input: g_in,
        kernels: g_k,
        bias: g_b,
    })
}

/// Convolution layer owning its kernels and bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    pub kernels: Tensor,
    pub bias: Tensor,
    pub stride: usize,
    pub padding: usize,
}

impl Conv2d {
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        conv2d_forward(
            input,
            &self.kernels,
            Some(&self.bias),
            self.stride,
            self.padding,
        )
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        let g = conv2d_backward(input, &self.kernels, self.stride, self.padding, grad_out)?;
        accumulate(self.kernels.grad_mut(), g.kernels.data());
        accumulate(self.bias.grad_mut(), g.bias.data());
        Ok(g.input)
    }

    pub fn parameter_count(&self) -> usize {
        self.kernels.len() + self.bias.len()
    }
}

pub(crate) fn accumulate(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::gradcheck::{projection_loss, random_tensor, relative_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_kernel_is_identity() {
        let x = Tensor::from_vec(&[1, 1, 2, 3], vec![1.0, -2.0, 3.0, 4.5, 0.0, 6.0]).unwrap();
        let k = Tensor::filled(&[1, 1, 1, 1], 1.0);
        let y = conv2d_forward(&x, &k, None, 1, 0).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn ones_kernel_counts() {
        let x = Tensor::filled(&[1, 1, 3, 3], 1.0);
        let k = Tensor::filled(&[1, 1, 2, 2], 1.0);
        let y = conv2d_forward(&x, &k, None, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.data(), &[4.0; 4]);
    }

    #[test]
    fn same_padding_border_counts() {
        let x = Tensor::filled(&[1, 1, 3, 3], 1.0);
        let k = Tensor::filled(&[1, 1, 3, 3], 1.0);
        let y = conv2d_forward(&x, &k, None, 1, 1).unwrap();
        assert_eq!(y.data(), &[4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]);
    }

    #[test]
    fn stride_two() {
        let x = Tensor::from_vec(&[1, 1, 4, 4], (0..16).map(f64::from).collect()).unwrap();
        let k = Tensor::filled(&[1, 1, 1, 1], 1.0);
        let y = conv2d_forward(&x, &k, None, 2, 0).unwrap();
        assert_eq!(y.data(), &[0.0, 2.0, 8.0, 10.0]);
    }

    #[test]
    fn channel_mismatch_rejected() {
        let x = Tensor::zeros(&[1, 2, 3, 3]);
        let k = Tensor::zeros(&[1, 3, 1, 1]);
        assert!(matches!(
            conv2d_forward(&x, &k, None, 1, 0),
            Err(Error::ShapeMismatch(_))
        ));
        let k = Tensor::zeros(&[1, 2, 4, 4]);
        assert!(conv2d_forward(&x, &k, None, 1, 0).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_tensor(&[2, 3, 4, 6], &mut rng);
            let k = random_tensor(&[4, 3, 3, 3], &mut rng);
            let b = random_tensor(&[4], &mut rng);
            let y = conv2d_forward(&x, &k, Some(&b), 1, 1).unwrap();
            let r = random_tensor(y.shape(), &mut rng);
            let g = conv2d_backward(&x, &k, 1, 1, &r).unwrap();

            let f_x = |v: &[f64]| {
                let xi = Tensor::from_vec(x.shape(), v.to_vec()).unwrap();
                projection_loss(&conv2d_forward(&xi, &k, Some(&b), 1, 1).unwrap(), &r)
            };
            assert!(relative_error(x.data(), g.input.data(), f_x) < 1e-4);
            let f_k = |v: &[f64]| {
                let ki = Tensor::from_vec(k.shape(), v.to_vec()).unwrap();
                projection_loss(&conv2d_forward(&x, &ki, Some(&b), 1, 1).unwrap(), &r)
            };
            assert!(relative_error(k.data(), g.kernels.data(), f_k) < 1e-4);
            let f_b = |v: &[f64]| {
                let bi = Tensor::from_vec(b.shape(), v.to_vec()).unwrap();
                projection_loss(&conv2d_forward(&x, &k, Some(&bi), 1, 1).unwrap(), &r)
            };
            assert!(relative_error(b.data(), g.bias.data(), f_b) < 1e-4);
        }
    }

    #[test]
    fn strided_unpadded_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_tensor(&[1, 2, 5, 5], &mut rng);
        let k = random_tensor(&[3, 2, 2, 2], &mut rng);
        let y = conv2d_forward(&x, &k, None, 2, 0).unwrap();
        let r = random_tensor(y.shape(), &mut rng);
        let g = conv2d_backward(&x, &k, 2, 0, &r).unwrap();
        let f_x = |v: &[f64]| {
            let xi = Tensor::from_vec(x.shape(), v.to_vec()).unwrap();
            projection_loss(&conv2d_forward(&xi, &k, None, 2, 0).unwrap(), &r)
        };
        assert!(relative_error(x.data(), g.input.data(), f_x) < 1e-4);
    }
}
