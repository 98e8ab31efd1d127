//! Line-record model files.
//!
//! The first line is a header holding the schema version, the model spec and
//! the class order. Neural parameters follow as one named tensor per line;
//! SVR models store one kernel machine per line and forests one tree per
//! line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::forest::Tree;
use super::neural::Network;
use super::svm::KernelMachine;
use super::{build_model, Model, ModelSpec, Predictor};
use crate::dataset::write_line;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    schema_version: u32,
    spec: ModelSpec,
    class_ids: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorRecord {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
enum Record {
    Tensor(TensorRecord),
    Machine(KernelMachine),
    Tree(Tree),
}

fn tensor_records<N: Network>(net: &N) -> Vec<Record> {
    net.params()
        .into_iter()
        .map(|(name, t)| {
            Record::Tensor(TensorRecord {
                name,
                shape: t.shape().to_vec(),
                values: t.data().to_vec(),
            })
        })
        .collect()
}

pub fn write_model<W: Write>(p: &Predictor, mut w: W) -> Result<()> {
    write_line(
        &mut w,
        &Header {
            schema_version: MODEL_SCHEMA_VERSION,
            spec: p.spec.clone(),
            class_ids: p.class_ids.clone(),
        },
    )?;
    let records = match &p.model {
        Model::Cnn(n) => tensor_records(n),
        Model::Rnn(n) => tensor_records(n),
        Model::Fcnn(n) => tensor_records(n),
        Model::Svr(ms) => ms.iter().cloned().map(Record::Machine).collect(),
        Model::Rf(f) => f.trees.iter().cloned().map(Record::Tree).collect(),
    };
    for r in &records {
        write_line(&mut w, r)?;
    }
    Ok(())
}

fn fill_tensors<N: Network>(net: &mut N, tensors: Vec<(usize, TensorRecord)>) -> Result<()> {
    let names: Vec<String> = net.params().into_iter().map(|(n, _)| n).collect();
    if tensors.len() != names.len() {
        return Err(Error::parse(
            tensors.last().map_or(1, |t| t.0),
            format!("expected {} tensors, found {}", names.len(), tensors.len()),
        ));
    }
    let mut params = net.params_mut();
    for ((lineno, rec), (name, slot)) in
        tensors.into_iter().zip(names.iter().zip(params.iter_mut()))
    {
        if &rec.name != name {
            return Err(Error::parse(
                lineno,
                format!("expected tensor `{name}`, found `{}`", rec.name),
            ));
        }
        if rec.shape != slot.shape() {
            return Err(Error::parse(
                lineno,
                format!(
                    "tensor `{name}` has shape {:?}, expected {:?}",
                    rec.shape,
                    slot.shape()
                ),
            ));
        }
        **slot = Tensor::from_vec(&rec.shape, rec.values)
            .map_err(|e| Error::parse(lineno, e.to_string()))?;
    }
    Ok(())
}

pub fn read_model<R: Read>(r: R) -> Result<Predictor> {
    let mut header: Option<Header> = None;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(&line).map_err(|e| Error::parse(lineno, e.to_string()))?;
        if header.is_none() {
            let version = value
                .get("schema_version")
                .and_then(Value::as_u64)
                .ok_or_else(|| {
                    Error::parse(lineno, "first line must be a header with schema_version")
                })?;
            if version != u64::from(MODEL_SCHEMA_VERSION) {
                return Err(Error::SchemaVersionMismatch {
                    found: version as u32,
                    expected: MODEL_SCHEMA_VERSION,
                });
            }
            header = Some(
                serde_json::from_value(value).map_err(|e| Error::parse(lineno, e.to_string()))?,
            );
            continue;
        }
        let rec: Record =
            serde_json::from_value(value).map_err(|e| Error::parse(lineno, e.to_string()))?;
        records.push((lineno, rec));
    }
    let header = header.ok_or_else(|| Error::parse(1, "missing header line"))?;
    let mut p = build_model(&header.spec, &header.class_ids)?;
    let mut tensors = Vec::new();
    let mut machines = Vec::new();
    let mut trees = Vec::new();
    for (lineno, rec) in records {
        match rec {
            Record::Tensor(t) => tensors.push((lineno, t)),
            Record::Machine(m) => machines.push(m),
            Record::Tree(t) => trees.push(t),
        }
    }
    let wrong = |what: &str| {
        Err(Error::parse(
            1,
            format!("{} model file contains {what} records", header.spec.family),
        ))
    };
    match &mut p.model {
        Model::Cnn(_) | Model::Rnn(_) | Model::Fcnn(_)
            if !machines.is_empty() || !trees.is_empty() =>
        {
            return wrong("classical");
        }
        Model::Cnn(n) => fill_tensors(n, tensors)?,
        Model::Rnn(n) => fill_tensors(n, tensors)?,
        Model::Fcnn(n) => fill_tensors(n, tensors)?,
        Model::Svr(_) if !tensors.is_empty() || !trees.is_empty() => return wrong("non-SVR"),
        Model::Svr(ms) => *ms = machines,
        Model::Rf(_) if !tensors.is_empty() || !machines.is_empty() => return wrong("non-forest"),
        Model::Rf(f) => f.trees = trees,
    }
    Ok(p)
}

pub fn save_model(p: &Predictor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_model(p, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Predictor> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(f)
}
