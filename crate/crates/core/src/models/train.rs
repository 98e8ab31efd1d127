use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forest::TreeOptions;
use super::neural::Network;
use super::svm::{fit_svc, fit_svr, PolyKernel, SolverOptions};
use super::{build_model, to_predictions, Examples, Forest, Head, Model, Prediction, Predictor};
use crate::error::{Error, Result};
use crate::evaluation::{accuracy, mad};
use crate::geometry::Vec3;
use crate::tensor::{cosine_loss, softmax_cross_entropy, AdamState, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 8,
            learning_rate: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 0 is the untrained model.
    pub epoch: usize,
    /// Mean training objective over the epoch's batches.
    pub train_objective: Option<f64>,
    pub val_objective: f64,
    pub val_accuracy: f64,
    pub val_mad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub records: Vec<EpochRecord>,
    /// Epoch whose weights were returned.
    pub best_epoch: usize,
}

impl History {
    pub fn best(&self) -> &EpochRecord {
        &self.records[self
            .records
            .iter()
            .position(|r| r.epoch == self.best_epoch)
            .unwrap_or(0)]
    }
}

/// Metrics of a predictor on a labelled set.
#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    pub accuracy: f64,
    pub mad: f64,
    /// Training objective on this set: `1 − mean cos` or mean cross-entropy.
    pub objective: f64,
    pub predicted: Vec<u32>,
    pub directions: Vec<Vec3>,
}

fn objective(head: Head, raw: &Tensor, ex: &Examples, class_ids: &[u32]) -> Result<f64> {
    Ok(match head {
        Head::Regression => cosine_loss(raw, &ex.targets())?.objective,
        Head::Classification => softmax_cross_entropy(raw, &ex.labels(class_ids)?)?.objective,
    })
}

fn score_predictions(
    preds: &[Prediction],
    objective: f64,
    class_ids: &[u32],
    ex: &Examples,
) -> Result<Scores> {
    let mut predicted = Vec::with_capacity(preds.len());
    let mut directions = Vec::with_capacity(preds.len());
    for p in preds {
        let (id, d) = p.resolve(class_ids, &ex.aois)?;
        predicted.push(id);
        directions.push(d);
    }
    let truth: Vec<Vec3> = ex
        .aoi_ids
        .iter()
        .map(|&id| ex.aois.ground_truth(id))
        .collect::<Result<_>>()?;
    Ok(Scores {
        accuracy: accuracy(&predicted, &ex.aoi_ids)?,
        mad: mad(&directions, &truth)?,
        objective,
        predicted,
        directions,
    })
}

/// Scores `predictor` on `ex`, matching against `ex.aois`.
pub fn score(predictor: &Predictor, ex: &Examples) -> Result<Scores> {
    if ex.is_empty() {
        return Err(Error::Empty);
    }
    let raw = predictor.raw_outputs(&ex.input)?;
    let obj = match (&predictor.model, predictor.spec.head) {
        // Forest class frequencies are probabilities, not logits.
        (Model::Rf(_), Head::Classification) => {
            let labels = ex.labels(&predictor.class_ids)?;
            labels
                .iter()
                .enumerate()
                .map(|(i, &l)| -raw.row(i)[l].max(1e-15).ln())
                .sum::<f64>()
                / labels.len() as f64
        }
        (_, head) => objective(head, &raw, ex, &predictor.class_ids)?,
    };
    let preds = predictor.predict(&ex.input)?;
    score_predictions(&preds, obj, &predictor.class_ids, ex)
}

fn is_better(a: &EpochRecord, b: &EpochRecord) -> bool {
    a.val_accuracy > b.val_accuracy || (a.val_accuracy == b.val_accuracy && a.val_mad < b.val_mad)
}

/// Fits a model to `train`, choosing among epochs by `val`.
///
/// Neural families run `cfg.epochs` passes of shuffled mini-batches with
/// Adam and return the weights with the highest validation accuracy, lower
/// validation MAD breaking ties. SVR and RF fit once; `val` only feeds the
/// history.
pub fn train(
    spec: &super::ModelSpec,
    train: &Examples,
    val: &Examples,
    cfg: &TrainConfig,
) -> Result<(Predictor, History)> {
    if train.is_empty() {
        return Err(Error::EmptySplit("training"));
    }
    if val.is_empty() {
        return Err(Error::EmptySplit("validation"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let mut predictor = build_model(spec, &train.aois.ids())?;
    // Separate stream from initialization so changing the epoch count does
    // not change initial weights.
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let class_ids = predictor.class_ids.clone();
    let head = spec.head;
    let history = match &mut predictor.model {
        Model::Cnn(n) => Some(fit_network(n, head, &class_ids, train, val, cfg, &mut rng)?),
        Model::Rnn(n) => Some(fit_network(n, head, &class_ids, train, val, cfg, &mut rng)?),
        Model::Fcnn(n) => Some(fit_network(n, head, &class_ids, train, val, cfg, &mut rng)?),
        Model::Svr(machines) => {
            *machines = fit_kernel_machines(spec, &class_ids, train)?;
            None
        }
        Model::Rf(forest) => {
            *forest = fit_forest(spec, &class_ids, train, &mut rng)?;
            None
        }
    };
    let history = match history {
        Some(h) => h,
        None => {
            let s = score(&predictor, val)?;
            History {
                records: vec![EpochRecord {
                    epoch: 1,
                    train_objective: None,
                    val_objective: s.objective,
                    val_accuracy: s.accuracy,
                    val_mad: s.mad,
                }],
                best_epoch: 1,
            }
        }
    };
    Ok((predictor, history))
}

fn evaluate_network<N: Network>(
    net: &N,
    head: Head,
    class_ids: &[u32],
    ex: &Examples,
) -> Result<Scores> {
    let raw = super::network_outputs(net, &ex.input)?;
    let obj = objective(head, &raw, ex, class_ids)?;
    let preds = to_predictions(head, &raw)?;
    score_predictions(&preds, obj, class_ids, ex)
}

fn fit_network<N: Network>(
    net: &mut N,
    head: Head,
    class_ids: &[u32],
    train: &Examples,
    val: &Examples,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<History> {
    let record = |net: &N, epoch: usize, train_objective: Option<f64>| -> Result<EpochRecord> {
        let s = evaluate_network(net, head, class_ids, val)?;
        Ok(EpochRecord {
            epoch,
            train_objective,
            val_objective: s.objective,
            val_accuracy: s.accuracy,
            val_mad: s.mad,
        })
    };
    let mut records = vec![record(net, 0, None)?];
    if cfg.epochs == 0 {
        log::warn!("training with 0 epochs; returning the initial weights");
        return Ok(History {
            records,
            best_epoch: 0,
        });
    }
    let targets = train.targets();
    let labels = match head {
        Head::Classification => train.labels(class_ids)?,
        Head::Regression => Vec::new(),
    };
    let mut adam = AdamState::new(cfg.learning_rate);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = (0, net.clone());
    for epoch in 1..=cfg.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let x = train.input.select(batch);
            let (out, cache) = net.forward(x.tensor())?;
            let loss = match head {
                Head::Regression => {
                    let mut t = Vec::with_capacity(batch.len() * 3);
                    for &i in batch {
                        t.extend_from_slice(targets.row(i));
                    }
                    cosine_loss(&out, &Tensor::from_vec(&[batch.len(), 3], t)?)?
                }
                Head::Classification => {
                    let l: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
                    softmax_cross_entropy(&out, &l)?
                }
            };
            total += loss.objective * batch.len() as f64;
            for p in net.params_mut() {
                p.zero_grad();
            }
            net.backward(&cache, &loss.grad)?;
            adam.step(&mut net.params_mut())?;
        }
        let rec = record(net, epoch, Some(total / train.len() as f64))?;
        log::debug!(
            "epoch {epoch}: train {:.5} val {:.5} acc {:.2}% mad {:.2}",
            total / train.len() as f64,
            rec.val_objective,
            rec.val_accuracy,
            rec.val_mad
        );
        if is_better(&rec, &records[best.0]) {
            best = (epoch, net.clone());
        }
        records.push(rec);
    }
    *net = best.1;
    Ok(History {
        records,
        best_epoch: best.0,
    })
}

fn feature_rows(ex: &Examples) -> Vec<&[f64]> {
    (0..ex.len()).map(|i| ex.input.features(i)).collect()
}

fn fit_kernel_machines(
    spec: &super::ModelSpec,
    class_ids: &[u32],
    train: &Examples,
) -> Result<Vec<super::KernelMachine>> {
    let h = &spec.hyper;
    let kernel = PolyKernel {
        degree: h.svr_degree,
    };
    let opt = SolverOptions {
        c: h.svr_c,
        tolerance: h.svr_tolerance,
        max_iterations: h.svr_max_iterations,
    };
    let rows = feature_rows(train);
    let gram = kernel.gram(&rows);
    match spec.head {
        Head::Regression => {
            let t = train.targets();
            (0..3)
                .map(|d| {
                    let z: Vec<f64> = (0..train.len()).map(|i| t.row(i)[d]).collect();
                    fit_svr(&rows, &gram, &z, kernel, h.svr_epsilon, opt)
                })
                .collect()
        }
        Head::Classification => {
            let labels = train.labels(class_ids)?;
            (0..class_ids.len())
                .map(|c| {
                    let y: Vec<bool> = labels.iter().map(|&l| l == c).collect();
                    fit_svc(&rows, &gram, &y, kernel, opt)
                })
                .collect()
        }
    }
}

fn fit_forest(
    spec: &super::ModelSpec,
    class_ids: &[u32],
    train: &Examples,
    rng: &mut ChaCha8Rng,
) -> Result<Forest> {
    let h = &spec.hyper;
    let rows = feature_rows(train);
    let p = rows[0].len();
    let targets: Vec<Vec<f64>> = match spec.head {
        Head::Regression => {
            let t = train.targets();
            (0..train.len()).map(|i| t.row(i).to_vec()).collect()
        }
        Head::Classification => train
            .labels(class_ids)?
            .into_iter()
            .map(|l| {
                let mut v = vec![0.0; class_ids.len()];
                v[l] = 1.0;
                v
            })
            .collect(),
    };
    let y: Vec<&[f64]> = targets.iter().map(Vec::as_slice).collect();
    let opt = TreeOptions {
        max_depth: h.rf_max_depth,
        min_samples_leaf: h.rf_min_samples_leaf,
        max_features: h
            .rf_max_features
            .unwrap_or_else(|| ((p as f64).sqrt().round() as usize).max(1)),
    };
    Forest::fit(&rows, &y, h.rf_trees, h.rf_bootstrap, opt, rng)
}
