use serde::{Deserialize, Serialize};

use super::cv::{DriverScore, EvalReport};

/// Drivers below this accuracy (%) and above [`OUTLIER_MAD`] are flagged.
pub const OUTLIER_ACCURACY: f64 = 50.0;
/// MAD threshold in degrees.
pub const OUTLIER_MAD: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverRow {
    #[serde(flatten)]
    pub score: DriverScore,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverReport {
    pub rows: Vec<DriverRow>,
}

impl DriverReport {
    pub fn flagged(&self) -> Vec<String> {
        self.rows
            .iter()
            .filter(|r| r.flagged)
            .map(|r| r.score.driver.clone())
            .collect()
    }
}

/// Per-driver test scores. A driver is flagged when accuracy is below 50%
/// and MAD is above 8°.
pub fn per_driver_report(report: &EvalReport) -> DriverReport {
    DriverReport {
        rows: report
            .per_driver()
            .into_iter()
            .map(|score| DriverRow {
                flagged: score.accuracy < OUTLIER_ACCURACY && score.mad > OUTLIER_MAD,
                score,
            })
            .collect(),
    }
}
