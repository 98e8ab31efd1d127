use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Cnn,
    Rnn,
    Fcnn,
    Svr,
    Rf,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Cnn,
        Family::Rnn,
        Family::Fcnn,
        Family::Svr,
        Family::Rf,
    ];

    pub fn is_neural(self) -> bool {
        matches!(self, Family::Cnn | Family::Rnn | Family::Fcnn)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Cnn => "cnn",
            Family::Rnn => "rnn",
            Family::Fcnn => "fcnn",
            Family::Svr => "svr",
            Family::Rf => "rf",
        })
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cnn" => Ok(Family::Cnn),
            "rnn" | "lstm" => Ok(Family::Rnn),
            "fcnn" | "fc-nn" | "mlp" => Ok(Family::Fcnn),
            "svr" | "svm" => Ok(Family::Svr),
            "rf" | "forest" => Ok(Family::Rf),
            other => Err(Error::Config(format!("unknown model family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    /// Unit 3-vector output trained with the cosine objective.
    Regression,
    /// Softmax over the AOI classes.
    Classification,
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Head::Regression => "regression",
            Head::Classification => "classification",
        })
    }
}

impl FromStr for Head {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "regression" | "reg" | "cosine" => Ok(Head::Regression),
            "classification" | "cls" | "softmax" => Ok(Head::Classification),
            other => Err(Error::Config(format!("unknown head `{other}`"))),
        }
    }
}

/// How the CNN arranges the 8×6×3 input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CnnLayout {
    /// Convolve over frames × attributes with the 3 coordinates as channels.
    #[default]
    FramesByAttributes,
    /// Convolve over frames × 18 features with a single channel.
    FramesByFeatures,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    pub cnn_layout: CnnLayout,
    pub conv_channels: Vec<usize>,
    pub kernel_size: usize,
    pub fc_hidden: Vec<usize>,
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    pub svr_c: f64,
    pub svr_epsilon: f64,
    pub svr_degree: u32,
    /// Stopping tolerance on the maximal KKT violation.
    pub svr_tolerance: f64,
    pub svr_max_iterations: usize,
    pub rf_trees: usize,
    pub rf_max_depth: Option<usize>,
    pub rf_min_samples_leaf: usize,
    /// Features tried per split; `None` means √p.
    pub rf_max_features: Option<usize>,
    pub rf_bootstrap: bool,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            cnn_layout: CnnLayout::default(),
            conv_channels: vec![16, 32],
            kernel_size: 3,
            fc_hidden: vec![128, 64],
            lstm_hidden: 64,
            lstm_layers: 2,
            svr_c: 1.0,
            svr_epsilon: 0.1,
            svr_degree: 2,
            svr_tolerance: 1e-3,
            svr_max_iterations: 10_000_000,
            rf_trees: 100,
            rf_max_depth: None,
            rf_min_samples_leaf: 1,
            rf_max_features: None,
            rf_bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Family,
    pub head: Head,
    #[serde(default)]
    pub hyper: Hyperparameters,
    #[serde(default)]
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(family: Family, head: Head) -> Self {
        ModelSpec {
            family,
            head,
            hyper: Hyperparameters::default(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.hyper;
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        match self.family {
            Family::Cnn => {
                if h.conv_channels.is_empty() || h.conv_channels.contains(&0) {
                    return bad("conv_channels must be non-empty and positive");
                }
                if h.kernel_size == 0 || h.kernel_size % 2 == 0 || h.kernel_size > 5 {
                    return bad("kernel_size must be odd, between 1 and 5");
                }
            }
            Family::Fcnn => {
                if h.fc_hidden.contains(&0) {
                    return bad("fc_hidden sizes must be positive");
                }
            }
            Family::Rnn => {
                if h.lstm_hidden == 0 || h.lstm_layers == 0 {
                    return bad("lstm_hidden and lstm_layers must be positive");
                }
            }
            Family::Svr => {
                if !(h.svr_c > 0.0) || !(h.svr_epsilon >= 0.0) || !(h.svr_tolerance > 0.0) {
                    return bad(
                        "svr_c and svr_tolerance must be positive, svr_epsilon non-negative",
                    );
                }
                if h.svr_degree == 0 {
                    return bad("svr_degree must be at least 1");
                }
            }
            Family::Rf => {
                if h.rf_trees == 0 || h.rf_min_samples_leaf == 0 {
                    return bad("rf_trees and rf_min_samples_leaf must be positive");
                }
                if h.rf_max_features == Some(0) || h.rf_max_depth == Some(0) {
                    return bad("rf_max_features and rf_max_depth must be positive");
                }
            }
        }
        Ok(())
    }
}
