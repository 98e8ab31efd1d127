use pointfuse::dataset::{Dataset, Modality};
use pointfuse::evaluation::*;
use pointfuse::models::{Family, Head, ModelSpec, Prediction, TrainConfig};
use pointfuse::synthgen::{generate_dataset, GeneratorConfig, SkillOverride};
use pointfuse::Error;
use proptest::prelude::*;

fn small(n_drivers: usize, samples_per_aoi: usize) -> GeneratorConfig {
    GeneratorConfig {
        n_drivers,
        samples_per_aoi,
        ..GeneratorConfig::default()
    }
}

fn dataset(cfg: &GeneratorConfig) -> Dataset {
    generate_dataset(cfg).unwrap()
}

fn cv_opts(epochs: usize, modalities: &[Modality]) -> CvOptions {
    CvOptions {
        train: TrainConfig {
            epochs,
            ..TrainConfig::default()
        },
        modalities: modalities.to_vec(),
        jobs: 1,
    }
}

fn rf() -> ModelSpec {
    let mut spec = ModelSpec::new(Family::Rf, Head::Regression);
    spec.hyper.rf_trees = 20;
    spec
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn plans_partition_drivers(n in 3usize..=30, val in 1usize..5, seed in any::<u64>()) {
        let ds = dataset(&small(n, 1));
        let plan = make_cv_plan(&ds, val, seed).unwrap();
        prop_assert_eq!(plan.folds.len(), n);
        plan.validate(&ds).unwrap();
        for f in &plan.folds {
            prop_assert_eq!(1 + f.validation.len() + f.train.len(), n);
            prop_assert!(!f.train.is_empty());
        }
    }
}

#[test]
fn twenty_two_drivers_give_twenty_two_folds() {
    let ds = dataset(&small(22, 1));
    let plan = make_cv_plan(&ds, DEFAULT_VALIDATION_DRIVERS, 0).unwrap();
    let mut tested: Vec<&str> = plan.folds.iter().map(|f| f.test.as_str()).collect();
    tested.sort();
    assert_eq!(tested.len(), 22);
    assert_eq!(
        tested,
        ds.drivers().iter().map(String::as_str).collect::<Vec<_>>()
    );
    assert!(plan.folds.iter().all(|f| f.validation.len() == 2));
}

#[test]
fn three_drivers_give_minimal_folds() {
    let ds = dataset(&small(3, 1));
    let plan = make_cv_plan(&ds, DEFAULT_VALIDATION_DRIVERS, 0).unwrap();
    assert_eq!(plan.folds.len(), 3);
    for f in &plan.folds {
        assert_eq!((f.validation.len(), f.train.len()), (1, 1));
    }
}

#[test]
fn two_drivers_are_too_few() {
    let ds = dataset(&small(2, 1));
    assert!(matches!(
        make_cv_plan(&ds, 1, 0),
        Err(Error::TooFewDrivers(2))
    ));
}

#[test]
fn plan_is_seeded() {
    let ds = dataset(&small(10, 1));
    assert_eq!(
        make_cv_plan(&ds, 2, 5).unwrap(),
        make_cv_plan(&ds, 2, 5).unwrap()
    );
    assert_ne!(
        make_cv_plan(&ds, 2, 5).unwrap(),
        make_cv_plan(&ds, 2, 6).unwrap()
    );
}

#[test]
fn leaked_driver_is_rejected_before_training() {
    let ds = dataset(&small(5, 1));
    let mut plan = make_cv_plan(&ds, 1, 0).unwrap();
    let test = plan.folds[0].test.clone();
    plan.folds[0].train.push(test);
    // an epoch count this large would take minutes if training started
    let err = run_cv(
        &ds,
        &ModelSpec::new(Family::Cnn, Head::Regression),
        &plan,
        &cv_opts(10_000, &Modality::ALL),
    );
    assert!(matches!(err, Err(Error::InvalidPlan(_))), "{err:?}");
}

#[test]
fn plan_missing_a_driver_is_rejected() {
    let ds = dataset(&small(5, 1));
    let mut plan = make_cv_plan(&ds, 1, 0).unwrap();
    plan.folds.pop();
    assert!(matches!(plan.validate(&ds), Err(Error::InvalidPlan(_))));
}

#[test]
fn ground_truth_predictor_is_perfect_through_the_pipeline() {
    let ds = dataset(&small(4, 2)).preprocessed().unwrap();
    let classes = ds.aois.ids();
    let mut preds = Vec::new();
    let mut dirs = Vec::new();
    let mut truth = Vec::new();
    let mut truth_dirs = Vec::new();
    for s in &ds.samples {
        let gt = ds.aois.ground_truth(s.aoi_id).unwrap();
        let (id, dir) = Prediction::Direction(gt)
            .resolve(&classes, &ds.aois)
            .unwrap();
        preds.push(id);
        dirs.push(dir);
        truth.push(s.aoi_id);
        truth_dirs.push(gt);
    }
    assert_eq!(accuracy(&preds, &truth).unwrap(), 100.0);
    assert!(mad(&dirs, &truth_dirs).unwrap().abs() < 1e-9);
}

#[test]
fn report_invariants_hold() {
    let ds = dataset(&small(4, 2));
    let plan = make_cv_plan(&ds, 1, 0).unwrap();
    let r = run_cv(&ds, &rf(), &plan, &cv_opts(0, &Modality::ALL)).unwrap();
    let total = r.total_samples();
    assert_eq!(total as usize, ds.len());
    let trace: u64 = (0..r.classes.len()).map(|i| r.confusion[i][i]).sum();
    let pooled = 100.0 * trace as f64 / total as f64;
    let correct: usize = r
        .folds
        .iter()
        .map(|f| {
            f.truth
                .iter()
                .zip(&f.predicted)
                .filter(|(a, b)| a == b)
                .count()
        })
        .sum();
    assert!((pooled - 100.0 * correct as f64 / total as f64).abs() < 1e-12);
    for (row, id) in r.confusion.iter().zip(&r.classes) {
        let n = ds.samples.iter().filter(|s| s.aoi_id == *id).count() as u64;
        assert_eq!(row.iter().sum::<u64>(), n);
    }
    let mean = r.folds.iter().map(|f| f.accuracy).sum::<f64>() / r.folds.len() as f64;
    assert_eq!(r.accuracy, mean);
    let mean_mad = r.folds.iter().map(|f| f.mad).sum::<f64>() / r.folds.len() as f64;
    assert_eq!(r.mad, mean_mad);
}

#[test]
fn cv_is_reproducible_and_parallel_folds_agree() {
    let ds = dataset(&small(4, 1));
    let plan = make_cv_plan(&ds, 1, 0).unwrap();
    let spec = ModelSpec::new(Family::Cnn, Head::Regression);
    let a = run_cv(&ds, &spec, &plan, &cv_opts(2, &Modality::ALL)).unwrap();
    let b = run_cv(&ds, &spec, &plan, &cv_opts(2, &Modality::ALL)).unwrap();
    let c = run_cv(
        &ds,
        &spec,
        &plan,
        &CvOptions {
            jobs: 3,
            ..cv_opts(2, &Modality::ALL)
        },
    )
    .unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn empty_modality_selection_is_rejected() {
    let ds = dataset(&small(3, 1));
    let plan = make_cv_plan(&ds, 1, 0).unwrap();
    assert!(matches!(
        run_cv(&ds, &rf(), &plan, &cv_opts(0, &[])),
        Err(Error::EmptyMask)
    ));
}

#[test]
fn report_round_trips_through_records() {
    let ds = dataset(&small(3, 1));
    let plan = make_cv_plan(&ds, 1, 0).unwrap();
    let mut r = run_cv(&ds, &rf(), &plan, &cv_opts(0, &[Modality::Finger])).unwrap();
    r.timing = Some(Timing::from_ms(1.25));
    let mut buf = Vec::new();
    write_report(&r, &mut buf).unwrap();
    assert_eq!(read_report(buf.as_slice()).unwrap(), r);

    let text =
        String::from_utf8(buf)
            .unwrap()
            .replacen("\"schema_version\":1", "\"schema_version\":7", 1);
    assert!(matches!(
        read_report(text.as_bytes()),
        Err(Error::SchemaVersionMismatch {
            found: 7,
            expected: 1
        })
    ));
}

#[test]
fn csv_has_one_row_per_fold_and_a_mean() {
    let ds = dataset(&small(3, 1));
    let plan = make_cv_plan(&ds, 1, 0).unwrap();
    let r = run_cv(&ds, &rf(), &plan, &cv_opts(0, &Modality::ALL)).unwrap();
    let csv = report_csv(&r);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 3 + 1);
    assert!(lines[4].starts_with("mean,36,"));
}

#[test]
fn confusion_svg_draws_a_full_grid() {
    let ds = dataset(&small(3, 1));
    let plan = make_cv_plan(&ds, 1, 0).unwrap();
    let r = run_cv(&ds, &rf(), &plan, &cv_opts(0, &Modality::ALL)).unwrap();
    let svg = confusion_svg(&r);
    assert!(svg.starts_with("<svg"));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("class=\"cell\"").count(), 144);
    let scatter = driver_scatter_svg(&r);
    assert_eq!(scatter.matches("class=\"driver\"").count(), 3);
}

fn fake_report(scores: &[(f64, f64)]) -> EvalReport {
    let folds = scores
        .iter()
        .enumerate()
        .map(|(i, &(accuracy, mad))| FoldReport {
            test_driver: format!("d{:02}", i + 1),
            validation: vec![],
            accuracy,
            mad,
            best_epoch: 0,
            truth: vec![],
            predicted: vec![],
        })
        .collect();
    EvalReport {
        model: ModelSpec::new(Family::Cnn, Head::Regression),
        modalities: Modality::ALL.to_vec(),
        classes: vec![],
        accuracy: 0.0,
        mad: 0.0,
        folds,
        confusion: vec![],
        timing: None,
    }
}

#[test]
fn uniform_drivers_are_not_flagged() {
    let r = fake_report(&[(72.0, 5.0), (75.0, 4.8), (70.5, 5.5), (74.0, 5.1)]);
    assert!(per_driver_report(&r).flagged().is_empty());
}

#[test]
fn outlier_needs_both_low_accuracy_and_high_mad() {
    let r = fake_report(&[(40.0, 9.0), (45.0, 6.0), (80.0, 12.0), (50.0, 9.0)]);
    assert_eq!(per_driver_report(&r).flagged(), vec!["d01".to_string()]);
}

#[test]
fn planted_poor_driver_is_flagged_and_dropping_it_helps() {
    let mut cfg = small(8, 5);
    cfg.drivers.skill_overrides = vec![SkillOverride {
        driver: 2,
        skill: 4.0,
    }];
    let ds = dataset(&cfg);
    let plan = make_cv_plan(&ds, 1, 0).unwrap();
    let spec = rf();
    let opts = cv_opts(0, &Modality::ALL);
    let r = run_cv(&ds, &spec, &plan, &opts).unwrap();
    let flagged = per_driver_report(&r).flagged();
    assert_eq!(flagged, vec!["d03".to_string()]);

    let kept = ds.without_drivers(&flagged);
    let plan = make_cv_plan(&kept, 1, 0).unwrap();
    let again = run_cv(&kept, &spec, &plan, &opts).unwrap();
    assert!(
        again.accuracy > r.accuracy,
        "{} <= {}",
        again.accuracy,
        r.accuracy
    );
}

#[test]
fn ablation_covers_every_cell() {
    let ds = dataset(&small(3, 1));
    let opts = AblationOptions {
        cv: cv_opts(0, &Modality::ALL),
        validation_drivers: 1,
        ..AblationOptions::default()
    };
    let tables = ablation_suite(&ds, &rf(), &opts).unwrap();
    assert_eq!(tables.len(), 3);
    let sizes: Vec<usize> = tables
        .iter()
        .map(|t| t.rows[0].report.classes.len())
        .collect();
    assert_eq!(sizes, vec![12, 9, 7]);
    for t in &tables {
        assert_eq!(t.rows.len(), 7);
        assert!(t.row(&[Modality::Head, Modality::Eye]).is_some());
    }
    let cells = ablation_cells(&tables);
    assert_eq!(cells.len(), 21);
    let mut buf = Vec::new();
    write_ablation(&rf(), &cells, &mut buf).unwrap();
    let (spec, back) = read_ablation(buf.as_slice()).unwrap();
    assert_eq!((spec, back.clone()), (rf(), cells));
    let csv = ablation_csv(&back);
    assert_eq!(csv.lines().count(), 8);
    assert!(csv.lines().nth(1).unwrap().starts_with("head,"));
}

#[test]
fn fps_matches_time_per_sample() {
    let t = Timing::from_ms(2.0);
    assert!((t.fps * t.ms_per_sample - 8000.0).abs() < 1e-9);
}
