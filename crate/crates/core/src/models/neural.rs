//! The three neural families on top of the tensor layers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::input::{ATTRIBUTES, DIMS, FRAME_FEATURES, SAMPLE_FEATURES};
use super::spec::{CnnLayout, Hyperparameters};
use crate::dataset::WINDOW_FRAMES;
use crate::error::Result;
use crate::tensor::init::{he_uniform, xavier_uniform};
use crate::tensor::{relu_backward, relu_forward, Conv2d, Dense, Lstm, LstmCache, Tensor};

/// A network mapping `[b, 8, 6, 3]` inputs to `[b, out]`.
pub(crate) trait Network: Clone {
    type Cache;
    fn forward(&self, x: &Tensor) -> Result<(Tensor, Self::Cache)>;
    /// Accumulates parameter gradients for the output gradient `grad`.
    fn backward(&mut self, cache: &Self::Cache, grad: &Tensor) -> Result<()>;
    /// Named parameters in a fixed order.
    fn params(&self) -> Vec<(String, &Tensor)>;
    fn params_mut(&mut self) -> Vec<&mut Tensor>;

    fn infer(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward(x)?.0)
    }
}

fn dense_he<R: Rng>(n_in: usize, n_out: usize, rng: &mut R) -> Dense {
    Dense {
        weights: he_uniform(&[n_in, n_out], n_in, rng),
        bias: Tensor::zeros(&[n_out]),
    }
}

fn dense_xavier<R: Rng>(n_in: usize, n_out: usize, rng: &mut R) -> Dense {
    Dense {
        weights: xavier_uniform(&[n_in, n_out], n_in, n_out, rng),
        bias: Tensor::zeros(&[n_out]),
    }
}

fn flatten(t: Tensor) -> Tensor {
    let b = t.rows();
    let n = t.row_len();
    t.reshape(&[b, n]).expect("same element count")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cnn {
    pub layout: CnnLayout,
    pub convs: Vec<Conv2d>,
    pub head: Dense,
}

pub(crate) struct CnnCache {
    input: Tensor,
    /// ReLU outputs of each convolution.
    acts: Vec<Tensor>,
}

impl Cnn {
    pub fn new<R: Rng>(h: &Hyperparameters, outputs: usize, rng: &mut R) -> Self {
        let (mut channels, height, width) = match h.cnn_layout {
            CnnLayout::FramesByAttributes => (DIMS, WINDOW_FRAMES, ATTRIBUTES),
            CnnLayout::FramesByFeatures => (1, WINDOW_FRAMES, FRAME_FEATURES),
        };
        let k = h.kernel_size;
        let mut convs = Vec::new();
        for &c in &h.conv_channels {
            let fan_in = channels * k * k;
            convs.push(Conv2d {
                kernels: he_uniform(&[c, channels, k, k], fan_in, rng),
                bias: Tensor::zeros(&[c]),
                stride: 1,
                padding: k / 2,
            });
            channels = c;
        }
        let flat = channels * height * width;
        Cnn {
            layout: h.cnn_layout,
            convs,
            head: dense_xavier(flat, outputs, rng),
        }
    }

    /// Rearranges `[b, 8, 6, 3]` into the convolution's `[b, c, h, w]`.
    fn arrange(&self, x: &Tensor) -> Tensor {
        let b = x.rows();
        match self.layout {
            CnnLayout::FramesByFeatures => x
                .clone()
                .reshape(&[b, 1, WINDOW_FRAMES, FRAME_FEATURES])
                .expect("same element count"),
            CnnLayout::FramesByAttributes => {
                let mut out = Tensor::zeros(&[b, DIMS, WINDOW_FRAMES, ATTRIBUTES]);
                let src = x.data();
                let dst = out.data_mut();
                let plane = WINDOW_FRAMES * ATTRIBUTES;
                for n in 0..b {
                    for fa in 0..plane {
                        for d in 0..DIMS {
                            dst[(n * DIMS + d) * plane + fa] = src[(n * plane + fa) * DIMS + d];
                        }
                    }
                }
                out
            }
        }
    }
}

impl Network for Cnn {
    type Cache = CnnCache;

    fn forward(&self, x: &Tensor) -> Result<(Tensor, CnnCache)> {
        let input = self.arrange(x);
        let mut acts: Vec<Tensor> = Vec::with_capacity(self.convs.len());
        for conv in &self.convs {
            let prev = acts.last().unwrap_or(&input);
            acts.push(relu_forward(&conv.forward(prev)?));
        }
        let last = acts.last().expect("at least one convolution");
        let out = self.head.forward(&flatten(last.clone()))?;
        Ok((out, CnnCache { input, acts }))
    }

    fn backward(&mut self, cache: &CnnCache, grad: &Tensor) -> Result<()> {
        let last = cache.acts.last().expect("at least one convolution");
        let mut g = self
            .head
            .backward(&flatten(last.clone()), grad)?
            .reshape(last.shape())?;
        for i in (0..self.convs.len()).rev() {
            g = relu_backward(&cache.acts[i], &g);
            let inp = if i == 0 {
                &cache.input
            } else {
                &cache.acts[i - 1]
            };
            g = self.convs[i].backward(inp, &g)?;
        }
        Ok(())
    }

    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut v = Vec::new();
        for (i, c) in self.convs.iter().enumerate() {
            v.push((format!("conv{i}.kernels"), &c.kernels));
            v.push((format!("conv{i}.bias"), &c.bias));
        }
        v.push(("head.weights".into(), &self.head.weights));
        v.push(("head.bias".into(), &self.head.bias));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = Vec::new();
        for c in &mut self.convs {
            v.push(&mut c.kernels);
            v.push(&mut c.bias);
        }
        v.push(&mut self.head.weights);
        v.push(&mut self.head.bias);
        v
    }
}

/// Fully connected network over the flattened 144 inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fcnn {
    pub layers: Vec<Dense>,
}

pub(crate) struct FcnnCache {
    /// Input to each layer.
    inputs: Vec<Tensor>,
}

impl Fcnn {
    pub fn new<R: Rng>(h: &Hyperparameters, outputs: usize, rng: &mut R) -> Self {
        let mut layers = Vec::new();
        let mut width = SAMPLE_FEATURES;
        for &n in &h.fc_hidden {
            layers.push(dense_he(width, n, rng));
            width = n;
        }
        layers.push(dense_xavier(width, outputs, rng));
        Fcnn { layers }
    }
}

impl Network for Fcnn {
    type Cache = FcnnCache;

    fn forward(&self, x: &Tensor) -> Result<(Tensor, FcnnCache)> {
        let mut h = flatten(x.clone());
        let mut inputs = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let y = layer.forward(&h)?;
            inputs.push(h);
            h = if i < last { relu_forward(&y) } else { y };
        }
        Ok((h, FcnnCache { inputs }))
    }

    fn backward(&mut self, cache: &FcnnCache, grad: &Tensor) -> Result<()> {
        let mut g = grad.clone();
        for i in (0..self.layers.len()).rev() {
            g = self.layers[i].backward(&cache.inputs[i], &g)?;
            if i > 0 {
                g = relu_backward(&cache.inputs[i], &g);
            }
        }
        Ok(())
    }

    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut v = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            v.push((format!("dense{i}.weights"), &l.weights));
            v.push((format!("dense{i}.bias"), &l.bias));
        }
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = Vec::new();
        for l in &mut self.layers {
            v.push(&mut l.weights);
            v.push(&mut l.bias);
        }
        v
    }
}

/// Stacked LSTMs over the per-frame 18-feature sequence, read out from the
/// last hidden state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rnn {
    pub lstms: Vec<Lstm>,
    pub head: Dense,
}

pub(crate) struct RnnCache {
    caches: Vec<LstmCache>,
    last: Tensor,
}

impl Rnn {
    pub fn new<R: Rng>(h: &Hyperparameters, outputs: usize, rng: &mut R) -> Self {
        let hidden = h.lstm_hidden;
        let mut lstms = Vec::new();
        let mut width = FRAME_FEATURES;
        for _ in 0..h.lstm_layers {
            let mut bias = Tensor::zeros(&[4 * hidden]);
            bias.data_mut()[hidden..2 * hidden].fill(1.0);
            lstms.push(Lstm {
                w_input: xavier_uniform(&[width, 4 * hidden], width, hidden, rng),
                w_hidden: xavier_uniform(&[hidden, 4 * hidden], hidden, hidden, rng),
                bias,
            });
            width = hidden;
        }
        Rnn {
            lstms,
            head: dense_xavier(hidden, outputs, rng),
        }
    }
}

impl Network for Rnn {
    type Cache = RnnCache;

    fn forward(&self, x: &Tensor) -> Result<(Tensor, RnnCache)> {
        let b = x.rows();
        let mut seq = x.clone().reshape(&[b, WINDOW_FRAMES, FRAME_FEATURES])?;
        let mut caches = Vec::with_capacity(self.lstms.len());
        for l in &self.lstms {
            let (out, cache) = l.forward(&seq)?;
            caches.push(cache);
            seq = out;
        }
        let h = seq.shape()[2];
        let f = WINDOW_FRAMES;
        let mut last = Tensor::zeros(&[b, h]);
        for n in 0..b {
            last.data_mut()[n * h..(n + 1) * h]
                .copy_from_slice(&seq.data()[(n * f + f - 1) * h..(n * f + f) * h]);
        }
        let out = self.head.forward(&last)?;
        Ok((out, RnnCache { caches, last }))
    }

    fn backward(&mut self, cache: &RnnCache, grad: &Tensor) -> Result<()> {
        let g_last = self.head.backward(&cache.last, grad)?;
        let (b, h) = (g_last.rows(), g_last.row_len());
        let f = WINDOW_FRAMES;
        let mut g = Tensor::zeros(&[b, f, h]);
        for n in 0..b {
            g.data_mut()[(n * f + f - 1) * h..(n * f + f) * h].copy_from_slice(g_last.row(n));
        }
        for i in (0..self.lstms.len()).rev() {
            g = self.lstms[i].backward(&cache.caches[i], &g)?;
        }
        Ok(())
    }

    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut v = Vec::new();
        for (i, l) in self.lstms.iter().enumerate() {
            v.push((format!("lstm{i}.w_input"), &l.w_input));
            v.push((format!("lstm{i}.w_hidden"), &l.w_hidden));
            v.push((format!("lstm{i}.bias"), &l.bias));
        }
        v.push(("head.weights".into(), &self.head.weights));
        v.push(("head.bias".into(), &self.head.bias));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = Vec::new();
        for l in &mut self.lstms {
            v.push(&mut l.w_input);
            v.push(&mut l.w_hidden);
            v.push(&mut l.bias);
        }
        v.push(&mut self.head.weights);
        v.push(&mut self.head.bias);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::gradcheck::{projection_loss, random_tensor, relative_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn count<N: Network>(n: &N) -> usize {
        n.params().iter().map(|(_, t)| t.len()).sum()
    }

    #[test]
    fn parameter_counts() {
        let h = Hyperparameters::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // 16·3·3·3+16, 32·16·3·3+32, 32·8·6·3+3
        assert_eq!(count(&Cnn::new(&h, 3, &mut rng)), 448 + 4640 + 4611);
        assert_eq!(
            count(&Cnn::new(&h, 12, &mut rng)),
            448 + 4640 + 1536 * 12 + 12
        );
        // 144·128+128, 128·64+64, 64·3+3
        assert_eq!(count(&Fcnn::new(&h, 3, &mut rng)), 18560 + 8256 + 195);
        // 4·64·(18+64+1), 4·64·(64+64+1), 64·3+3
        assert_eq!(count(&Rnn::new(&h, 3, &mut rng)), 21248 + 33024 + 195);
        let alt = Hyperparameters {
            cnn_layout: CnnLayout::FramesByFeatures,
            ..h
        };
        assert_eq!(
            count(&Cnn::new(&alt, 3, &mut rng)),
            160 + 4640 + 4608 * 3 + 3
        );
    }

    #[test]
    fn arrange_puts_coordinates_in_channels() {
        let h = Hyperparameters::default();
        let cnn = Cnn::new(&h, 3, &mut ChaCha8Rng::seed_from_u64(0));
        let x = Tensor::from_vec(&[1, 8, 6, 3], (0..144).map(f64::from).collect()).unwrap();
        let a = cnn.arrange(&x);
        // frame 2, attribute 4, coordinate 1
        let src = (2 * 6 + 4) * 3 + 1;
        assert_eq!(a.data()[(1 * 8 + 2) * 6 + 4], src as f64);
    }

    fn check_network<N: Network>(mut net: N, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_tensor(&[2, 8, 6, 3], &mut rng);
        let (y, cache) = net.forward(&x).unwrap();
        let r = random_tensor(y.shape(), &mut rng);
        net.backward(&cache, &r).unwrap();
        let base = net.clone();
        let n_params = base.params().len();
        for k in 0..n_params {
            let (name, t) = &base.params()[k];
            let analytic = t.grad().unwrap().to_vec();
            let f = |v: &[f64]| {
                let mut m = base.clone();
                m.params_mut()[k].data_mut().copy_from_slice(v);
                projection_loss(&m.infer(&x).unwrap(), &r)
            };
            let e = relative_error(t.data(), &analytic, f);
            assert!(e < 1e-4, "{name}: {e}");
        }
    }

    fn small_hyper() -> Hyperparameters {
        Hyperparameters {
            conv_channels: vec![3, 4],
            fc_hidden: vec![10, 6],
            lstm_hidden: 5,
            ..Hyperparameters::default()
        }
    }

    #[test]
    fn cnn_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        check_network(Cnn::new(&small_hyper(), 3, &mut rng), 2);
    }

    #[test]
    fn fcnn_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        check_network(Fcnn::new(&small_hyper(), 4, &mut rng), 4);
    }

    #[test]
    fn rnn_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        check_network(Rnn::new(&small_hyper(), 3, &mut rng), 6);
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let rnn = Rnn::new(&small_hyper(), 3, &mut ChaCha8Rng::seed_from_u64(0));
        let b = rnn.lstms[0].bias.data();
        assert_eq!(&b[5..10], &[1.0; 5]);
        assert!(b[..5].iter().chain(&b[10..]).all(|&v| v == 0.0));
    }
}
