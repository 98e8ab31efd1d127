use serde::{Deserialize, Serialize};

use super::cv::{make_cv_plan, run_cv, CvOptions, EvalReport};
use crate::dataset::{Dataset, Modality};
use crate::error::{Error, Result};
use crate::models::ModelSpec;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSubset {
    pub name: String,
    pub ids: Vec<u32>,
}

/// All twelve AOIs, without the three low-gaze AOIs, and additionally
/// without AOIs 10 and 11.
pub fn standard_class_subsets() -> Vec<ClassSubset> {
    vec![
        ClassSubset {
            name: "aois 1-12".into(),
            ids: (1..=12).collect(),
        },
        ClassSubset {
            name: "aois 4-12".into(),
            ids: (4..=12).collect(),
        },
        ClassSubset {
            name: "aois 4-9,12".into(),
            ids: vec![4, 5, 6, 7, 8, 9, 12],
        },
    ]
}

/// Single modalities, pairs, then all three.
pub fn standard_modality_subsets() -> Vec<Vec<Modality>> {
    use Modality::*;
    vec![
        vec![Head],
        vec![Eye],
        vec![Finger],
        vec![Eye, Head],
        vec![Finger, Head],
        vec![Finger, Eye],
        vec![Finger, Eye, Head],
    ]
}

/// Display name of a modality subset, e.g. "finger + gaze".
pub fn modality_name(mods: &[Modality]) -> String {
    mods.iter()
        .map(|m| m.label())
        .collect::<Vec<_>>()
        .join(" + ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub modalities: Vec<Modality>,
    pub accuracy: f64,
    pub mad: f64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub subset: ClassSubset,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, mods: &[Modality]) -> Option<&AblationRow> {
        let mut want = mods.to_vec();
        want.sort();
        self.rows.iter().find(|r| {
            let mut have = r.modalities.clone();
            have.sort();
            have == want
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationOptions {
    pub cv: CvOptions,
    pub validation_drivers: usize,
    pub plan_seed: u64,
    pub modality_subsets: Vec<Vec<Modality>>,
    pub class_subsets: Vec<ClassSubset>,
}

impl Default for AblationOptions {
    fn default() -> Self {
        AblationOptions {
            cv: CvOptions::default(),
            validation_drivers: super::cv::DEFAULT_VALIDATION_DRIVERS,
            plan_seed: 0,
            modality_subsets: standard_modality_subsets(),
            class_subsets: standard_class_subsets(),
        }
    }
}

/// Runs a full cross-validation for every (class subset, modality subset)
/// pair. Restricting classes also restricts the AOIs predictions are
/// matched against.
pub fn ablation_suite(
    ds: &Dataset,
    spec: &ModelSpec,
    opts: &AblationOptions,
) -> Result<Vec<AblationTable>> {
    if opts.modality_subsets.iter().any(Vec::is_empty) {
        return Err(Error::EmptyMask);
    }
    let pre = ds.preprocessed()?;
    opts.class_subsets
        .iter()
        .map(|subset| {
            let sub = pre.with_classes(&subset.ids)?;
            if sub.is_empty() {
                return Err(Error::EmptyDataset);
            }
            let plan = make_cv_plan(&sub, opts.validation_drivers, opts.plan_seed)?;
            let rows = opts
                .modality_subsets
                .iter()
                .map(|mods| {
                    let cv = CvOptions {
                        modalities: mods.clone(),
                        ..opts.cv.clone()
                    };
                    let report = run_cv(&sub, spec, &plan, &cv)?;
                    log::info!(
                        "{} / {}: {:.1}% {:.2}°",
                        subset.name,
                        modality_name(mods),
                        report.accuracy,
                        report.mad
                    );
                    Ok(AblationRow {
                        modalities: mods.clone(),
                        accuracy: report.accuracy,
                        mad: report.mad,
                        report,
                    })
                })
                .collect::<Result<_>>()?;
            Ok(AblationTable {
                subset: subset.clone(),
                rows,
            })
        })
        .collect()
}
