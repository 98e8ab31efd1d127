use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::confusion_matrix;
use super::speed::Timing;
use crate::dataset::{Dataset, Modality};
use crate::error::{Error, Result};
use crate::models::{score, train, Examples, ModelSpec, TrainConfig};

/// Validation drivers per fold unless configured otherwise.
pub const DEFAULT_VALIDATION_DRIVERS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub test: String,
    pub validation: Vec<String>,
    pub train: Vec<String>,
}

/// Leave-one-driver-out folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub folds: Vec<Fold>,
}

/// One fold per driver, in sorted driver order. Each fold draws
/// `validation_drivers` of the remaining drivers at random (seeded), capped
/// so at least one training driver is left.
pub fn make_cv_plan(ds: &Dataset, validation_drivers: usize, seed: u64) -> Result<CvPlan> {
    let drivers = ds.drivers();
    if drivers.len() < 3 {
        return Err(Error::TooFewDrivers(drivers.len()));
    }
    let n_val = validation_drivers.clamp(1, drivers.len() - 2);
    let folds = drivers
        .iter()
        .enumerate()
        .map(|(k, test)| {
            let mut rest: Vec<String> = drivers.iter().filter(|d| *d != test).cloned().collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            rest.shuffle(&mut rng);
            let mut validation = rest.split_off(rest.len() - n_val);
            validation.sort();
            rest.sort();
            Fold {
                test: test.clone(),
                validation,
                train: rest,
            }
        })
        .collect();
    Ok(CvPlan { folds })
}

/// Splits all drivers into training and validation drivers for a final
/// model, drawing validation drivers the same way a plan does.
pub fn holdout_split(
    ds: &Dataset,
    validation_drivers: usize,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>)> {
    let mut drivers = ds.drivers();
    if drivers.len() < 2 {
        return Err(Error::TooFewDrivers(drivers.len()));
    }
    let n_val = validation_drivers.clamp(1, drivers.len() - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    drivers.shuffle(&mut rng);
    let mut validation = drivers.split_off(drivers.len() - n_val);
    validation.sort();
    drivers.sort();
    Ok((drivers, validation))
}

impl CvPlan {
    /// Checks that every fold partitions the dataset's drivers into three
    /// disjoint non-empty roles and that each driver is tested exactly once.
    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        let drivers = ds.drivers();
        let all: BTreeSet<&str> = drivers.iter().map(String::as_str).collect();
        let bad = |m: String| Err(Error::InvalidPlan(m));
        let mut tested = BTreeSet::new();
        for (i, f) in self.folds.iter().enumerate() {
            if f.validation.is_empty() || f.train.is_empty() {
                return bad(format!("fold {i} has an empty validation or training role"));
            }
            let mut seen = BTreeSet::new();
            for d in std::iter::once(&f.test)
                .chain(&f.validation)
                .chain(&f.train)
            {
                if !seen.insert(d.as_str()) {
                    return bad(format!("driver {d} appears twice in fold {i}"));
                }
                if !all.contains(d.as_str()) {
                    return bad(format!("fold {i} names unknown driver {d}"));
                }
            }
            if seen != all {
                return bad(format!("fold {i} does not cover every driver"));
            }
            if !tested.insert(f.test.as_str()) {
                return bad(format!("driver {} is tested in more than one fold", f.test));
            }
        }
        if tested != all {
            return bad("not every driver is tested".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvOptions {
    pub train: TrainConfig,
    pub modalities: Vec<Modality>,
    /// Folds trained concurrently.
    pub jobs: usize,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            train: TrainConfig::default(),
            modalities: Modality::ALL.to_vec(),
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub test_driver: String,
    pub validation: Vec<String>,
    pub accuracy: f64,
    pub mad: f64,
    pub best_epoch: usize,
    pub truth: Vec<u32>,
    pub predicted: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverScore {
    pub driver: String,
    pub accuracy: f64,
    pub mad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelSpec,
    pub modalities: Vec<Modality>,
    pub classes: Vec<u32>,
    /// Mean of the fold accuracies.
    pub accuracy: f64,
    /// Mean of the fold MADs.
    pub mad: f64,
    pub folds: Vec<FoldReport>,
    /// Rows are true classes and columns predictions, in `classes` order.
    pub confusion: Vec<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl EvalReport {
    pub fn per_driver(&self) -> Vec<DriverScore> {
        self.folds
            .iter()
            .map(|f| DriverScore {
                driver: f.test_driver.clone(),
                accuracy: f.accuracy,
                mad: f.mad,
            })
            .collect()
    }

    pub fn total_samples(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }
}

fn run_fold(
    ds: &Dataset,
    spec: &ModelSpec,
    fold: &Fold,
    index: usize,
    opts: &CvOptions,
) -> Result<FoldReport> {
    let examples = |drivers: &[String]| -> Result<Examples> {
        Examples::from_samples(&ds.samples_for(drivers), &ds.aois)?.masked(&opts.modalities)
    };
    let train_set = examples(&fold.train)?;
    let val_set = examples(&fold.validation)?;
    let fold_spec = spec.clone().with_seed(spec.seed.wrapping_add(index as u64));
    let (model, history) = train(&fold_spec, &train_set, &val_set, &opts.train)?;
    // The test driver's samples are only built after training is done.
    let test_set = examples(std::slice::from_ref(&fold.test))?;
    let s = score(&model, &test_set)?;
    log::info!(
        "fold {} ({}): accuracy {:.1}% MAD {:.2}°",
        index + 1,
        fold.test,
        s.accuracy,
        s.mad
    );
    Ok(FoldReport {
        test_driver: fold.test.clone(),
        validation: fold.validation.clone(),
        accuracy: s.accuracy,
        mad: s.mad,
        best_epoch: history.best_epoch,
        truth: test_set.aoi_ids,
        predicted: s.predicted,
    })
}

/// Trains and tests one model per fold and averages the fold metrics.
/// The dataset is preprocessed first if it is not already.
pub fn run_cv(
    ds: &Dataset,
    spec: &ModelSpec,
    plan: &CvPlan,
    opts: &CvOptions,
) -> Result<EvalReport> {
    plan.validate(ds)?;
    if opts.modalities.is_empty() {
        return Err(Error::EmptyMask);
    }
    let pre = ds.preprocessed()?;
    let folds: Vec<FoldReport> = if opts.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {} jobs: {e}", opts.jobs)))?;
        pool.install(|| {
            plan.folds
                .par_iter()
                .enumerate()
                .map(|(i, f)| run_fold(&pre, spec, f, i, opts))
                .collect::<Result<_>>()
        })?
    } else {
        plan.folds
            .iter()
            .enumerate()
            .map(|(i, f)| run_fold(&pre, spec, f, i, opts))
            .collect::<Result<_>>()?
    };
    let classes = pre.aois.ids();
    let truth: Vec<u32> = folds.iter().flat_map(|f| f.truth.iter().copied()).collect();
    let predicted: Vec<u32> = folds
        .iter()
        .flat_map(|f| f.predicted.iter().copied())
        .collect();
    let n = folds.len() as f64;
    let mut modalities = opts.modalities.clone();
    modalities.sort();
    modalities.dedup();
    Ok(EvalReport {
        model: spec.clone(),
        modalities,
        accuracy: folds.iter().map(|f| f.accuracy).sum::<f64>() / n,
        mad: folds.iter().map(|f| f.mad).sum::<f64>() / n,
        confusion: confusion_matrix(&predicted, &truth, &classes)?,
        classes,
        folds,
        timing: None,
    })
}
