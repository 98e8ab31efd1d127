use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pointfuse::dataset::{load_dataset, read_aois, write_dataset, Dataset};
use pointfuse::evaluation::{
    ablation_cells, ablation_csv, ablation_suite, confusion_svg, driver_scatter_svg, holdout_split,
    make_cv_plan, per_driver_report, read_ablation, read_report, report_csv, run_cv, speed_bench,
    write_ablation, write_report, AblationOptions, CvOptions, EvalReport,
    DEFAULT_VALIDATION_DRIVERS,
};
use pointfuse::matching::match_aoi;
use pointfuse::models::{load_model, score, train, write_model, Examples, FusionInput};
use pointfuse::synthgen::generate_dataset;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::Staged;

/// An input path that must exist before anything runs.
fn input(path: &Option<PathBuf>, flag: &str) -> CliResult<PathBuf> {
    let p = path
        .clone()
        .ok_or_else(|| CliError::config(format!("--{flag} is required")))?;
    if !p.is_file() {
        return Err(CliError::config(format!(
            "--{flag}: {} does not exist",
            p.display()
        )));
    }
    Ok(p)
}

fn dataset(cfg: &RunConfig) -> CliResult<(PathBuf, Dataset)> {
    let path = input(&cfg.dataset, "dataset")?;
    let mut ds = load_dataset(&path)?;
    if let Some(ids) = cfg.classes()? {
        ds = ds.with_classes(&ids)?;
    }
    if ds.is_empty() {
        return Err(pointfuse::Error::EmptyDataset.into());
    }
    Ok((path, ds))
}

fn jsonl<T: Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| serde_json::to_string(x).expect("record serializes") + "\n")
        .collect()
}

fn buffer(f: impl FnOnce(&mut Vec<u8>) -> pointfuse::Result<()>) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

pub fn generate(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let gen = cfg.generator();
    let ds = generate_dataset(&gen)?;
    println!(
        "generated {} samples from {} drivers (config {})",
        ds.len(),
        ds.drivers().len(),
        &gen.hash()[..12]
    );
    let mut out = Staged::default();
    out.add("dataset.jsonl", buffer(|b| write_dataset(&ds, b))?);
    out.commit("generate", cfg, &[])
}

pub fn preprocess(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let (path, ds) = dataset(cfg)?;
    let pre = ds.preprocessed()?;
    println!("preprocessed {} samples", pre.len());
    let mut out = Staged::default();
    out.add("preprocessed.jsonl", buffer(|b| write_dataset(&pre, b))?);
    out.commit("preprocess", cfg, &[path])
}

pub fn train_cmd(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let (path, ds) = dataset(cfg)?;
    let spec = cfg.model_spec()?;
    let tc = cfg.train_config()?;
    let mods = cfg.modalities()?;
    let pre = ds.preprocessed()?;
    let (train_drivers, val_drivers) = holdout_split(
        &pre,
        cfg.val_drivers.unwrap_or(DEFAULT_VALIDATION_DRIVERS),
        cfg.seed(),
    )?;
    let examples = |d: &[String]| -> CliResult<Examples> {
        Ok(Examples::from_samples(&pre.samples_for(d), &pre.aois)?.masked(&mods)?)
    };
    let (model, history) = train(
        &spec,
        &examples(&train_drivers)?,
        &examples(&val_drivers)?,
        &tc,
    )?;
    let best = history.best();
    println!(
        "{} {}: best epoch {} validation accuracy {:.2}% MAD {:.2}°",
        spec.family, spec.head, history.best_epoch, best.val_accuracy, best.val_mad
    );
    let mut out = Staged::default();
    out.add("model.jsonl", buffer(|b| write_model(&model, b))?);
    out.add("history.jsonl", jsonl(&history.records));
    out.commit("train", cfg, &[path])
}

pub fn predict(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let (path, ds) = dataset(cfg)?;
    let model_path = input(&cfg.model.first().cloned(), "model")?;
    let model = load_model(&model_path)?;
    let pre = ds.preprocessed()?;
    let samples: Vec<_> = pre.samples.iter().collect();
    let ex = Examples::from_samples(&samples, &pre.aois)?.masked(&cfg.modalities()?)?;
    let s = score(&model, &ex)?;
    let mut csv = String::from("driver,aoi_id,predicted,x,y,z\n");
    for ((smp, p), d) in pre.samples.iter().zip(&s.predicted).zip(&s.directions) {
        let _ = writeln!(
            csv,
            "{},{},{},{:.6},{:.6},{:.6}",
            smp.driver_id, smp.aoi_id, p, d.x, d.y, d.z
        );
    }
    println!(
        "accuracy {:.2}% MAD {:.2}° over {} samples",
        s.accuracy,
        s.mad,
        ex.len()
    );
    let mut out = Staged::default();
    out.add("predictions.csv", csv);
    out.commit("predict", cfg, &[path, model_path])
}

fn drivers_csv(r: &EvalReport) -> String {
    let mut csv = String::from("driver,accuracy,mad,flagged\n");
    for row in per_driver_report(r).rows {
        let _ = writeln!(
            csv,
            "{},{:.4},{:.4},{}",
            row.score.driver, row.score.accuracy, row.score.mad, row.flagged
        );
    }
    csv
}

pub fn eval(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let (path, ds) = dataset(cfg)?;
    let spec = cfg.model_spec()?;
    let opts = CvOptions {
        train: cfg.train_config()?,
        modalities: cfg.modalities()?,
        jobs: cfg.jobs()?,
    };
    let plan = make_cv_plan(
        &ds,
        cfg.val_drivers.unwrap_or(DEFAULT_VALIDATION_DRIVERS),
        cfg.seed(),
    )?;
    let report = run_cv(&ds, &spec, &plan, &opts)?;
    println!(
        "{} {} on {} folds: accuracy {:.2}% MAD {:.2}°",
        spec.family,
        spec.head,
        report.folds.len(),
        report.accuracy,
        report.mad
    );
    let mut out = Staged::default();
    out.add("report.jsonl", buffer(|b| write_report(&report, b))?);
    out.add("report.csv", report_csv(&report));
    out.add("drivers.csv", drivers_csv(&report));
    out.commit("eval", cfg, &[path])
}

pub fn ablate(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let (path, ds) = dataset(cfg)?;
    let spec = cfg.model_spec()?;
    let opts = AblationOptions {
        cv: CvOptions {
            train: cfg.train_config()?,
            jobs: cfg.jobs()?,
            ..CvOptions::default()
        },
        validation_drivers: cfg.val_drivers.unwrap_or(DEFAULT_VALIDATION_DRIVERS),
        plan_seed: cfg.seed(),
        ..AblationOptions::default()
    };
    let tables = ablation_suite(&ds, &spec, &opts)?;
    let cells = ablation_cells(&tables);
    let csv = ablation_csv(&cells);
    print!("{csv}");
    let mut out = Staged::default();
    out.add(
        "ablation.jsonl",
        buffer(|b| write_ablation(&spec, &cells, b))?,
    );
    out.add("ablation.csv", csv);
    out.commit("ablate", cfg, &[path])
}

#[derive(Serialize)]
struct BenchRow {
    model: PathBuf,
    family: String,
    ms_per_sample: f64,
    fps: f64,
}

pub fn bench(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    if cfg.model.is_empty() {
        return Err(CliError::config("--model is required"));
    }
    let models = cfg
        .model
        .iter()
        .map(|m| input(&Some(m.clone()), "model"))
        .collect::<CliResult<Vec<_>>>()?;
    let (path, ds) = dataset(cfg)?;
    let pre = ds.preprocessed()?;
    let samples: Vec<_> = pre.samples.iter().collect();
    let x = FusionInput::from_samples(&samples)?;
    let n = cfg.samples.unwrap_or(200);
    let mut rows = Vec::new();
    for m in &models {
        let p = load_model(m)?;
        let t = speed_bench(&p, &x, n)?;
        println!(
            "{:<6} {:>9.4} ms/sample {:>12.1} fps  {}",
            p.family(),
            t.ms_per_sample,
            t.fps,
            m.display()
        );
        rows.push(BenchRow {
            model: m.clone(),
            family: p.family().to_string(),
            ms_per_sample: t.ms_per_sample,
            fps: t.fps,
        });
    }
    let mut out = Staged::default();
    out.add(
        "bench.json",
        serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n",
    );
    let mut inputs = models;
    inputs.push(path);
    out.commit("bench", cfg, &inputs)
}

/// Prints the AOIs ranked by cosine similarity; writes nothing.
pub fn match_cmd(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let path = input(&cfg.aois, "aois")?;
    let v = cfg.vector()?;
    let file = std::fs::File::open(&path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let aois = read_aois(file)?;
    let m = match_aoi(v, &aois)?;
    println!("rank  aoi  cosine     deviation");
    for (rank, (id, cos)) in m.ranked.iter().enumerate() {
        let dev = cos.clamp(-1.0, 1.0).acos().to_degrees();
        println!("{:>4}  {:>3}  {:>9.6}  {:>8.3}°", rank + 1, id, cos, dev);
    }
    Ok(Vec::new())
}

pub fn report(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    if cfg.report.is_none() && cfg.ablation.is_none() {
        return Err(CliError::config("report needs --report and/or --ablation"));
    }
    let open = |p: &Path| {
        std::fs::File::open(p).map_err(|e| CliError::config(format!("{}: {e}", p.display())))
    };
    let mut out = Staged::default();
    let mut inputs = Vec::new();
    if cfg.report.is_some() {
        let path = input(&cfg.report, "report")?;
        let r = read_report(open(&path)?)?;
        out.add("confusion.svg", confusion_svg(&r));
        out.add("drivers.svg", driver_scatter_svg(&r));
        out.add("report.csv", report_csv(&r));
        out.add("drivers.csv", drivers_csv(&r));
        let flagged = per_driver_report(&r).flagged();
        println!(
            "{} classes, {} folds: accuracy {:.2}% MAD {:.2}°; flagged drivers: {}",
            r.classes.len(),
            r.folds.len(),
            r.accuracy,
            r.mad,
            if flagged.is_empty() {
                "none".to_string()
            } else {
                flagged.join(" ")
            }
        );
        inputs.push(path);
    }
    if cfg.ablation.is_some() {
        let path = input(&cfg.ablation, "ablation")?;
        let (_, cells) = read_ablation(open(&path)?)?;
        out.add("ablation.csv", ablation_csv(&cells));
        inputs.push(path);
    }
    out.commit("report", cfg, &inputs)
}
