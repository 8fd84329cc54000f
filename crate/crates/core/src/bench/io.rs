//! JSON persistence for matrices, plants, experiment records and results.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::descriptor::DescriptorData;
use crate::error::{Error, Result};
use crate::experiments::{Experiment1Aggregate, Experiment2Aggregate, ExperimentConfig, ExperimentRecord};
use crate::linalg::{self, Mat};
use crate::plant::{PlantModel, Trajectory};

/// Named matrices, kept in key order.
pub type MatrixDocument = BTreeMap<String, Mat>;

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// Writes `{"name": [[row], ...], ...}` with every entry printed to 17
/// significant digits, which reads back bit-identically.
pub fn save_matrix_file(path: impl AsRef<Path>, doc: &MatrixDocument) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("{\n");
    for (idx, (name, m)) in doc.iter().enumerate() {
        if let Some((i, j)) = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .find(|&(i, j)| !m[(i, j)].is_finite())
        {
            return Err(Error::InvalidInput(format!("{name}[{i}][{j}] is not finite")));
        }
        let _ = write!(out, "  {}: [", serde_json::to_string(name).expect("string key"));
        for i in 0..m.nrows() {
            out.push_str(if i == 0 { "\n    [" } else { ",\n    [" });
            for j in 0..m.ncols() {
                if j > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{:.16e}", m[(i, j)]);
            }
            out.push(']');
        }
        out.push_str(if m.nrows() == 0 { "]" } else { "\n  ]" });
        out.push_str(if idx + 1 < doc.len() { ",\n" } else { "\n" });
    }
    out.push_str("}\n");
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Quotes bare `NaN` / `Infinity` tokens so the parser accepts them and the
/// validator can report where they sit.
fn quote_non_finite(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            rest = &rest[c.len_utf8()..];
            continue;
        }
        if c == '"' {
            in_string = true;
        }
        if let Some(tok) = ["-Infinity", "Infinity", "NaN"].into_iter().find(|t| rest.starts_with(t)) {
            let _ = write!(out, "\"{tok}\"");
            rest = &rest[tok.len()..];
            continue;
        }
        out.push(c);
        rest = &rest[c.len_utf8()..];
    }
    out
}

fn matrix_from_value(path: &Path, field: &str, v: &Value) -> Result<Mat> {
    let rows = v
        .as_array()
        .ok_or_else(|| parse_err(path, format!("{field}: expected an array of rows")))?;
    let mut data: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| parse_err(path, format!("{field}[{i}]: expected an array of numbers")))?;
        let mut vals = Vec::with_capacity(row.len());
        for (j, x) in row.iter().enumerate() {
            match x.as_f64() {
                Some(f) if f.is_finite() => vals.push(f),
                _ => return Err(parse_err(path, format!("{field}[{i}][{j}]: expected a finite number, found {x}"))),
            }
        }
        if let Some(first) = data.first() {
            if first.len() != vals.len() {
                return Err(parse_err(
                    path,
                    format!("{field}[{i}]: row has {} entries, expected {}", vals.len(), first.len()),
                ));
            }
        }
        data.push(vals);
    }
    linalg::from_rows(&data).ok_or_else(|| parse_err(path, format!("{field}: ragged rows")))
}

/// Reads a document written by [`save_matrix_file`] (or any JSON object of
/// row-major matrices). Errors name the offending field.
pub fn load_matrix_file(path: impl AsRef<Path>) -> Result<MatrixDocument> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: Value = serde_json::from_str(&quote_non_finite(&text)).map_err(|e| parse_err(path, e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| parse_err(path, "top level must be an object of named matrices"))?;
    obj.iter()
        .map(|(k, v)| Ok((k.clone(), matrix_from_value(path, k, v)?)))
        .collect()
}

fn take(doc: &mut MatrixDocument, path: &Path, key: &str) -> Result<Mat> {
    doc.remove(key)
        .ok_or_else(|| parse_err(path, format!("missing matrix {key}")))
}

pub fn load_plant(path: impl AsRef<Path>) -> Result<PlantModel> {
    let path = path.as_ref();
    let mut doc = load_matrix_file(path)?;
    let (a, b, bw, c, d) = (
        take(&mut doc, path, "A")?,
        take(&mut doc, path, "B")?,
        take(&mut doc, path, "Bw")?,
        take(&mut doc, path, "C")?,
        take(&mut doc, path, "D")?,
    );
    PlantModel::new(a, b, bw, c, d)
}

pub fn plant_document(plant: &PlantModel) -> MatrixDocument {
    [
        ("A", plant.a()),
        ("B", plant.b()),
        ("Bw", plant.bw()),
        ("C", plant.c()),
        ("D", plant.d()),
    ]
    .into_iter()
    .map(|(k, m)| (k.to_string(), m.clone()))
    .collect()
}

pub fn save_plant(path: impl AsRef<Path>, plant: &PlantModel) -> Result<()> {
    save_matrix_file(path, &plant_document(plant))
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.to_string()))
}

fn rows_of(vs: &[DVector<f64>]) -> Vec<Vec<f64>> {
    vs.iter().map(|v| v.iter().copied().collect()).collect()
}

fn vectors_of(rows: &[Vec<f64>]) -> Vec<DVector<f64>> {
    rows.iter().map(|r| DVector::from_column_slice(r)).collect()
}

/// One sub-experiment. Noises are the simulator's record and only present
/// in oracle exports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDoc {
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noises: Option<Vec<Vec<f64>>>,
}

impl TrajectoryDoc {
    pub fn new(t: &Trajectory, with_oracle: bool) -> Self {
        Self {
            states: rows_of(&t.states),
            inputs: rows_of(&t.inputs),
            outputs: rows_of(&t.outputs),
            noises: with_oracle.then(|| rows_of(&t.noises)),
        }
    }

    /// Trajectory with zero noise entries when the record carries none.
    pub fn to_trajectory(&self, q: usize) -> Trajectory {
        Trajectory {
            states: vectors_of(&self.states),
            inputs: vectors_of(&self.inputs),
            outputs: vectors_of(&self.outputs),
            noises: match &self.noises {
                Some(n) => vectors_of(n),
                None => vec![DVector::zeros(q); self.inputs.len()],
            },
        }
    }
}

/// `exp1.json` / `exp2.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentFile {
    pub experiment: u8,
    pub config: ExperimentConfig,
    pub attempt: u32,
    pub trajectories: Vec<TrajectoryDoc>,
    #[serde(with = "matrix_map")]
    pub aggregate: MatrixDocument,
}

mod matrix_map {
    use super::{linalg, MatrixDocument};
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(doc: &MatrixDocument, s: S) -> Result<S::Ok, S::Error> {
        doc.iter()
            .map(|(k, m)| (k.clone(), linalg::to_rows(m)))
            .collect::<BTreeMap<_, _>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<MatrixDocument, D::Error> {
        BTreeMap::<String, Vec<Vec<f64>>>::deserialize(d)?
            .into_iter()
            .map(|(k, rows)| {
                linalg::from_rows(&rows)
                    .map(|m| (k.clone(), m))
                    .ok_or_else(|| D::Error::custom(format!("{k} has ragged rows")))
            })
            .collect()
    }
}

fn doc(pairs: &[(&str, &Mat)]) -> MatrixDocument {
    pairs.iter().map(|(k, m)| (k.to_string(), (*m).clone())).collect()
}

pub fn experiment1_file(
    config: &ExperimentConfig,
    record: &ExperimentRecord,
    agg: &Experiment1Aggregate,
    with_oracle: bool,
) -> ExperimentFile {
    let mut aggregate = doc(&[
        ("N", &agg.n_mat),
        ("M", &agg.m_mat),
        ("V", &agg.v),
        ("T", &agg.t),
        ("X", &agg.x),
        ("Y", &agg.y),
    ]);
    if with_oracle {
        aggregate.insert("oracle_W".into(), agg.oracle_w.clone());
    }
    ExperimentFile {
        experiment: 1,
        config: config.clone(),
        attempt: record.attempt,
        trajectories: record.trajectories.iter().map(|t| TrajectoryDoc::new(t, with_oracle)).collect(),
        aggregate,
    }
}

pub fn experiment2_file(
    config: &ExperimentConfig,
    record: &ExperimentRecord,
    agg: &Experiment2Aggregate,
    with_oracle: bool,
) -> ExperimentFile {
    let mut aggregate = doc(&[("R0", &agg.r0), ("R1", &agg.r1), ("Xp", &agg.xp), ("Yp", &agg.yp)]);
    if with_oracle {
        aggregate.insert("oracle_W0".into(), agg.oracle_w0.clone());
    }
    ExperimentFile {
        experiment: 2,
        config: config.clone(),
        attempt: record.attempt,
        trajectories: record.trajectories.iter().map(|t| TrajectoryDoc::new(t, with_oracle)).collect(),
        aggregate,
    }
}

fn field(file: &ExperimentFile, path: &Path, key: &str) -> Result<Mat> {
    file.aggregate
        .get(key)
        .cloned()
        .ok_or_else(|| parse_err(path, format!("aggregate.{key} missing")))
}

/// Aggregates stored in an `exp1.json`; the oracle block is empty when absent.
pub fn experiment1_aggregate(file: &ExperimentFile, path: &Path) -> Result<Experiment1Aggregate> {
    if file.experiment != 1 {
        return Err(parse_err(path, "not an experiment 1 record"));
    }
    let n = file.config.n;
    Ok(Experiment1Aggregate {
        n_mat: field(file, path, "N")?,
        m_mat: field(file, path, "M")?,
        v: field(file, path, "V")?,
        t: field(file, path, "T")?,
        x: field(file, path, "X")?,
        y: field(file, path, "Y")?,
        oracle_w: file.aggregate.get("oracle_W").cloned().unwrap_or_else(|| Mat::zeros(0, n)),
    })
}

pub fn experiment2_aggregate(file: &ExperimentFile, path: &Path) -> Result<Experiment2Aggregate> {
    if file.experiment != 2 {
        return Err(parse_err(path, "not an experiment 2 record"));
    }
    let m = file.config.m;
    Ok(Experiment2Aggregate {
        r0: field(file, path, "R0")?,
        r1: field(file, path, "R1")?,
        xp: field(file, path, "Xp")?,
        yp: field(file, path, "Yp")?,
        oracle_w0: file.aggregate.get("oracle_W0").cloned().unwrap_or_else(|| Mat::zeros(0, m)),
    })
}

/// SHA-256 of the descriptor's canonical JSON, identifying the dataset a
/// controller was synthesized from.
pub fn descriptor_hash(d: &DescriptorData) -> String {
    let text = serde_json::to_string(d).expect("descriptor serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// SHA-256 over the bit patterns of a sequence of vectors.
pub fn vectors_hash(vs: &[DVector<f64>]) -> String {
    let mut h = Sha256::new();
    for v in vs {
        for x in v.iter() {
            h.update(x.to_bits().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}
