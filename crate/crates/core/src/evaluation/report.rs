//! Report files: line records, CSV tables and SVG plots.
//!
//! An eval report file starts with a header line holding the schema version
//! and the aggregate results, followed by one `{"fold": ...}` line per fold.
//! An ablation file has a header and one `{"cell": ...}` line per
//! (class subset, modality subset) pair.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ablation::{modality_name, AblationTable, ClassSubset};
use super::cv::{EvalReport, FoldReport};
use super::drivers::{per_driver_report, OUTLIER_ACCURACY, OUTLIER_MAD};
use super::speed::Timing;
use crate::dataset::{write_line, Modality};
use crate::error::{Error, Result};
use crate::models::ModelSpec;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportHeader {
    schema_version: u32,
    kind: String,
    model: ModelSpec,
    modalities: Vec<Modality>,
    classes: Vec<u32>,
    accuracy: f64,
    mad: f64,
    confusion: Vec<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timing: Option<Timing>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
enum ReportRecord {
    Fold(FoldReport),
}

/// One cell of an ablation table, without the per-fold detail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationCell {
    pub subset: ClassSubset,
    pub modalities: Vec<Modality>,
    pub accuracy: f64,
    pub mad: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AblationHeader {
    schema_version: u32,
    kind: String,
    model: ModelSpec,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
enum AblationRecord {
    Cell(AblationCell),
}

pub fn write_report<W: Write>(r: &EvalReport, mut w: W) -> Result<()> {
    write_line(
        &mut w,
        &ReportHeader {
            schema_version: REPORT_SCHEMA_VERSION,
            kind: "eval".into(),
            model: r.model.clone(),
            modalities: r.modalities.clone(),
            classes: r.classes.clone(),
            accuracy: r.accuracy,
            mad: r.mad,
            confusion: r.confusion.clone(),
            timing: r.timing,
        },
    )?;
    for f in &r.folds {
        write_line(&mut w, &ReportRecord::Fold(f.clone()))?;
    }
    Ok(())
}

/// Splits a record file into its header value and the remaining lines.
fn read_records<R: Read>(r: R, kind: &str) -> Result<(Value, Vec<(usize, Value)>)> {
    let mut header = None;
    let mut rest = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(&line).map_err(|e| Error::parse(lineno, e.to_string()))?;
        if header.is_some() {
            rest.push((lineno, value));
            continue;
        }
        let version = value
            .get("schema_version")
            .and_then(Value::as_u64)
            .ok_or_else(|| {
                Error::parse(lineno, "first line must be a header with schema_version")
            })?;
        if version != u64::from(REPORT_SCHEMA_VERSION) {
            return Err(Error::SchemaVersionMismatch {
                found: version as u32,
                expected: REPORT_SCHEMA_VERSION,
            });
        }
        if value.get("kind").and_then(Value::as_str) != Some(kind) {
            return Err(Error::parse(lineno, format!("not a {kind} file")));
        }
        header = Some(value);
    }
    let header = header.ok_or_else(|| Error::parse(1, "missing header line"))?;
    Ok((header, rest))
}

pub fn read_report<R: Read>(r: R) -> Result<EvalReport> {
    let (header, rest) = read_records(r, "eval")?;
    let h: ReportHeader =
        serde_json::from_value(header).map_err(|e| Error::parse(1, e.to_string()))?;
    let folds = rest
        .into_iter()
        .map(|(lineno, v)| match serde_json::from_value(v) {
            Ok(ReportRecord::Fold(f)) => Ok(f),
            Err(e) => Err(Error::parse(lineno, e.to_string())),
        })
        .collect::<Result<_>>()?;
    Ok(EvalReport {
        model: h.model,
        modalities: h.modalities,
        classes: h.classes,
        accuracy: h.accuracy,
        mad: h.mad,
        folds,
        confusion: h.confusion,
        timing: h.timing,
    })
}

pub fn ablation_cells(tables: &[AblationTable]) -> Vec<AblationCell> {
    tables
        .iter()
        .flat_map(|t| {
            t.rows.iter().map(|r| AblationCell {
                subset: t.subset.clone(),
                modalities: r.modalities.clone(),
                accuracy: r.accuracy,
                mad: r.mad,
            })
        })
        .collect()
}

pub fn write_ablation<W: Write>(model: &ModelSpec, cells: &[AblationCell], mut w: W) -> Result<()> {
    write_line(
        &mut w,
        &AblationHeader {
            schema_version: REPORT_SCHEMA_VERSION,
            kind: "ablation".into(),
            model: model.clone(),
        },
    )?;
    for c in cells {
        write_line(&mut w, &AblationRecord::Cell(c.clone()))?;
    }
    Ok(())
}

pub fn read_ablation<R: Read>(r: R) -> Result<(ModelSpec, Vec<AblationCell>)> {
    let (header, rest) = read_records(r, "ablation")?;
    let h: AblationHeader =
        serde_json::from_value(header).map_err(|e| Error::parse(1, e.to_string()))?;
    let cells = rest
        .into_iter()
        .map(|(lineno, v)| match serde_json::from_value(v) {
            Ok(AblationRecord::Cell(c)) => Ok(c),
            Err(e) => Err(Error::parse(lineno, e.to_string())),
        })
        .collect::<Result<_>>()?;
    Ok((h.model, cells))
}

/// Per-fold rows followed by a `mean` row.
pub fn report_csv(r: &EvalReport) -> String {
    let mut out = String::from("driver,samples,accuracy,mad,best_epoch\n");
    for f in &r.folds {
        let _ = writeln!(
            out,
            "{},{},{:.4},{:.4},{}",
            f.test_driver,
            f.truth.len(),
            f.accuracy,
            f.mad,
            f.best_epoch
        );
    }
    let _ = writeln!(
        out,
        "mean,{},{:.4},{:.4},",
        r.total_samples(),
        r.accuracy,
        r.mad
    );
    out
}

/// One row per modality subset and one accuracy/MAD column pair per class
/// subset, in first-seen order.
pub fn ablation_csv(cells: &[AblationCell]) -> String {
    let mut subsets: Vec<&ClassSubset> = Vec::new();
    let mut mods: Vec<Vec<Modality>> = Vec::new();
    for c in cells {
        if !subsets.contains(&&c.subset) {
            subsets.push(&c.subset);
        }
        if !mods.contains(&c.modalities) {
            mods.push(c.modalities.clone());
        }
    }
    let mut out = String::from("modalities");
    for s in &subsets {
        let _ = write!(out, ",{} accuracy,{} mad", s.name, s.name);
    }
    out.push('\n');
    for m in &mods {
        out.push_str(&modality_name(m));
        for s in &subsets {
            match cells.iter().find(|c| &c.subset == *s && &c.modalities == m) {
                Some(c) => {
                    let _ = write!(out, ",{:.2},{:.2}", c.accuracy, c.mad);
                }
                None => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Confusion matrix as a k×k grid of cells shaded by the row-normalized
/// rate, with counts printed inside.
pub fn confusion_svg(r: &EvalReport) -> String {
    let k = r.classes.len();
    let cell = 40.0;
    let margin = 70.0;
    let size = margin + cell * k as f64 + 20.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="14" text-anchor="middle">predicted AOI</text>"#,
        margin + cell * k as f64 / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{y}" text-anchor="middle" transform="rotate(-90 14 {y})">true AOI</text>"#,
        y = margin + cell * k as f64 / 2.0
    );
    for (j, id) in r.classes.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{id}</text>"#,
            margin + cell * (j as f64 + 0.5),
            margin - 8.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{id}</text>"#,
            margin - 8.0,
            margin + cell * (j as f64 + 0.5) + 4.0
        );
    }
    for (i, row) in r.confusion.iter().enumerate() {
        let total: u64 = row.iter().sum();
        for (j, &n) in row.iter().enumerate() {
            let rate = if total == 0 {
                0.0
            } else {
                n as f64 / total as f64
            };
            let shade = (255.0 * (1.0 - rate)).round() as u8;
            let (x, y) = (margin + cell * j as f64, margin + cell * i as f64);
            let _ = writeln!(
                s,
                r##"<rect class="cell" x="{x}" y="{y}" width="{cell}" height="{cell}" fill="rgb({shade},{shade},255)" stroke="#888"/>"##
            );
            let color = if rate > 0.5 { "white" } else { "black" };
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle" fill="{color}">{n}</text>"#,
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Test accuracy against MAD, one point per driver. Flagged drivers are
/// drawn in red and the outlier thresholds as dashed lines.
pub fn driver_scatter_svg(r: &EvalReport) -> String {
    let drivers = per_driver_report(r);
    let (w, h, m) = (480.0, 360.0, 50.0);
    let max_mad = drivers
        .rows
        .iter()
        .map(|d| d.score.mad)
        .fold(OUTLIER_MAD * 1.5, f64::max)
        .ceil();
    let px = |acc: f64| m + (w - 2.0 * m) * acc / 100.0;
    let py = |mad: f64| h - m - (h - 2.0 * m) * mad / max_mad;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r##"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="#333"/>"##,
        w - 2.0 * m,
        h - 2.0 * m
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">accuracy (%)</text>"#,
        w / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{y}" text-anchor="middle" transform="rotate(-90 14 {y})">MAD (°)</text>"#,
        y = h / 2.0
    );
    for t in (0..=100).step_by(20) {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{t}</text>"#,
            px(t as f64),
            h - m + 14.0
        );
    }
    let step = (max_mad / 5.0).ceil().max(1.0);
    let mut t = 0.0;
    while t <= max_mad {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{t}</text>"#,
            m - 6.0,
            py(t) + 4.0
        );
        t += step;
    }
    let _ = writeln!(
        s,
        r##"<line x1="{x}" y1="{m}" x2="{x}" y2="{}" stroke="#999" stroke-dasharray="4 3"/>"##,
        h - m,
        x = px(OUTLIER_ACCURACY)
    );
    let _ = writeln!(
        s,
        r##"<line x1="{m}" y1="{y}" x2="{}" y2="{y}" stroke="#999" stroke-dasharray="4 3"/>"##,
        w - m,
        y = py(OUTLIER_MAD)
    );
    for d in &drivers.rows {
        let (x, y) = (px(d.score.accuracy), py(d.score.mad));
        let fill = if d.flagged { "#c0392b" } else { "#2c6fbb" };
        let _ = writeln!(
            s,
            r#"<circle class="driver" cx="{x:.2}" cy="{y:.2}" r="4" fill="{fill}"><title>{}: {:.1}%, {:.2}°</title></circle>"#,
            escape(&d.score.driver),
            d.score.accuracy,
            d.score.mad
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="9">{}</text>"#,
            x + 5.0,
            y - 5.0,
            escape(&d.score.driver)
        );
    }
    s.push_str("</svg>\n");
    s
}
