//! The five model families behind one [`Predictor`] type.
//!
//! Every family comes in a regression flavour, which outputs a unit
//! direction trained with the cosine objective, and a classification flavour,
//! which outputs a probability per AOI.

mod forest;
mod input;
mod neural;
mod persist;
mod spec;
mod svm;
mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AoiSet, Vec3};
use crate::matching::match_aoi;
use crate::tensor::{softmax, Tensor};

pub use forest::{Forest, Node, Tree, TreeOptions};
pub use input::{
    modality_mask, Examples, FusionInput, ATTRIBUTES, DIMS, FRAME_FEATURES, SAMPLE_FEATURES,
};
pub use neural::{Cnn, Fcnn, Rnn};
pub use persist::{load_model, read_model, save_model, write_model, MODEL_SCHEMA_VERSION};
pub use spec::{CnnLayout, Family, Head, Hyperparameters, ModelSpec};
pub use svm::{fit_svc, fit_svr, KernelMachine, PolyKernel, SolverOptions};
pub use train::{score, train, EpochRecord, History, Scores, TrainConfig};

use neural::Network;

/// Batch size used for inference; bounds peak memory only.
const PREDICT_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    /// Unit direction from the seat origin.
    Direction(Vec3),
    /// One probability per class, in the predictor's class order.
    Probabilities(Vec<f64>),
}

impl Prediction {
    /// The chosen AOI and the direction that stands for it. A class
    /// prediction stands for its AOI's ground truth. Ties in probability go
    /// to the earlier class.
    pub fn resolve(&self, class_ids: &[u32], aois: &AoiSet) -> Result<(u32, Vec3)> {
        match self {
            Prediction::Direction(d) => Ok((match_aoi(*d, aois)?.aoi_id, *d)),
            Prediction::Probabilities(p) => {
                let mut best = 0;
                for (i, &v) in p.iter().enumerate() {
                    if v > p[best] {
                        best = i;
                    }
                }
                let id = *class_ids.get(best).ok_or(Error::LabelOutOfRange {
                    label: best,
                    classes: class_ids.len(),
                })?;
                Ok((id, aois.ground_truth(id)?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Cnn(Cnn),
    Rnn(Rnn),
    Fcnn(Fcnn),
    /// One machine per output coordinate (regression) or per class.
    Svr(Vec<KernelMachine>),
    Rf(Forest),
}

/// A model together with the spec it was built from and its class order.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    pub spec: ModelSpec,
    /// AOI ids in class-index order.
    pub class_ids: Vec<u32>,
    pub model: Model,
}

/// Builds an untrained model. Neural families get seeded initial weights;
/// SVR and RF start empty and are filled by [`train`].
pub fn build_model(spec: &ModelSpec, class_ids: &[u32]) -> Result<Predictor> {
    spec.validate()?;
    let outputs = output_width(spec.head, class_ids)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let h = &spec.hyper;
    let model = match spec.family {
        Family::Cnn => Model::Cnn(Cnn::new(h, outputs, &mut rng)),
        Family::Rnn => Model::Rnn(Rnn::new(h, outputs, &mut rng)),
        Family::Fcnn => Model::Fcnn(Fcnn::new(h, outputs, &mut rng)),
        Family::Svr => Model::Svr(Vec::new()),
        Family::Rf => Model::Rf(Forest {
            trees: Vec::new(),
            outputs,
        }),
    };
    Ok(Predictor {
        spec: spec.clone(),
        class_ids: class_ids.to_vec(),
        model,
    })
}

fn output_width(head: Head, class_ids: &[u32]) -> Result<usize> {
    match head {
        Head::Regression => Ok(3),
        Head::Classification if class_ids.len() >= 2 => Ok(class_ids.len()),
        Head::Classification => Err(Error::InvalidSpec(format!(
            "classification needs at least 2 classes, got {}",
            class_ids.len()
        ))),
    }
}

/// Turns raw network outputs `[b, out]` into predictions.
pub(crate) fn to_predictions(head: Head, raw: &Tensor) -> Result<Vec<Prediction>> {
    match head {
        Head::Regression => (0..raw.rows())
            .map(|i| {
                let r = raw.row(i);
                let v = Vec3::new(r[0], r[1], r[2]);
                crate::geometry::normalize(v)
                    .map(Prediction::Direction)
                    .map_err(|_| Error::ZeroVectorRow(i))
            })
            .collect(),
        Head::Classification => {
            let p = softmax(raw)?;
            Ok((0..p.rows())
                .map(|i| Prediction::Probabilities(p.row(i).to_vec()))
                .collect())
        }
    }
}

fn network_outputs<N: Network>(net: &N, input: &FusionInput) -> Result<Tensor> {
    let n = input.len();
    let mut out: Vec<f64> = Vec::new();
    let mut width = 0;
    let all: Vec<usize> = (0..n).collect();
    for chunk in all.chunks(PREDICT_CHUNK) {
        let part = input.select(chunk);
        let y = net.infer(part.tensor())?;
        width = y.row_len();
        out.extend_from_slice(y.data());
    }
    Tensor::from_vec(&[n, width], out)
}

impl Predictor {
    pub fn family(&self) -> Family {
        self.spec.family
    }

    pub fn head(&self) -> Head {
        self.spec.head
    }

    pub fn is_fitted(&self) -> bool {
        match &self.model {
            Model::Svr(m) => !m.is_empty(),
            Model::Rf(f) => !f.trees.is_empty(),
            _ => true,
        }
    }

    /// Learned scalar count for neural families, stored coefficients and
    /// support values for SVR, and node count for forests.
    pub fn parameter_count(&self) -> usize {
        fn count<N: Network>(n: &N) -> usize {
            n.params().iter().map(|(_, t)| t.len()).sum()
        }
        match &self.model {
            Model::Cnn(n) => count(n),
            Model::Rnn(n) => count(n),
            Model::Fcnn(n) => count(n),
            Model::Svr(ms) => ms
                .iter()
                .map(|m| m.coef.len() * (1 + m.support.first().map_or(0, Vec::len)) + 1)
                .sum(),
            Model::Rf(f) => f.trees.iter().map(|t| t.nodes.len()).sum(),
        }
    }

    /// Raw outputs `[b, out]`: regression coordinates before normalization,
    /// or class scores before softmax.
    pub fn raw_outputs(&self, input: &FusionInput) -> Result<Tensor> {
        if !self.is_fitted() {
            return Err(Error::InvalidSpec("model has not been fitted".into()));
        }
        match &self.model {
            Model::Cnn(n) => network_outputs(n, input),
            Model::Rnn(n) => network_outputs(n, input),
            Model::Fcnn(n) => network_outputs(n, input),
            Model::Svr(ms) => {
                let mut out = Vec::with_capacity(input.len() * ms.len());
                for i in 0..input.len() {
                    let x = input.features(i);
                    out.extend(ms.iter().map(|m| m.decision(x)));
                }
                Tensor::from_vec(&[input.len(), ms.len()], out)
            }
            Model::Rf(f) => {
                let mut out = Vec::with_capacity(input.len() * f.outputs);
                for i in 0..input.len() {
                    out.extend(f.predict(input.features(i)));
                }
                Tensor::from_vec(&[input.len(), f.outputs], out)
            }
        }
    }

    /// One prediction per sample. Deterministic for a given model.
    pub fn predict(&self, input: &FusionInput) -> Result<Vec<Prediction>> {
        let raw = self.raw_outputs(input)?;
        match (&self.model, self.spec.head) {
            // Forest leaves already hold class frequencies.
            (Model::Rf(_), Head::Classification) => Ok((0..raw.rows())
                .map(|i| {
                    let r = raw.row(i);
                    let s: f64 = r.iter().sum();
                    Prediction::Probabilities(r.iter().map(|v| v / s).collect())
                })
                .collect()),
            (_, head) => to_predictions(head, &raw),
        }
    }
}
