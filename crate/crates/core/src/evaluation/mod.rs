//! Leave-one-driver-out evaluation, ablations and reports.

mod ablation;
mod cv;
mod drivers;
mod metrics;
mod report;
mod speed;

pub use ablation::{
    ablation_suite, modality_name, standard_class_subsets, standard_modality_subsets,
    AblationOptions, AblationRow, AblationTable, ClassSubset,
};
pub use cv::{
    holdout_split, make_cv_plan, run_cv, CvOptions, CvPlan, DriverScore, EvalReport, Fold,
    FoldReport, DEFAULT_VALIDATION_DRIVERS,
};
pub use drivers::{per_driver_report, DriverReport, DriverRow, OUTLIER_ACCURACY, OUTLIER_MAD};
pub use metrics::{accuracy, confusion_matrix, mad};
pub use report::{
    ablation_cells, ablation_csv, confusion_svg, driver_scatter_svg, read_ablation, read_report,
    report_csv, write_ablation, write_report, AblationCell, REPORT_SCHEMA_VERSION,
};
pub use speed::{speed_bench, Timing};
