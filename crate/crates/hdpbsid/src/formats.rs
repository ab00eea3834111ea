//! On-disk formats: signal CSV, model JSON and the shared float encoding.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use hdpbsid_core::hermite::SampledSignal;
use hdpbsid_core::lti::StateSpaceModel;
use hdpbsid_core::Error as CoreError;
use nalgebra::DMatrix;
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

impl FormatError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn parse(path: &Path, line: u64, message: impl Into<String>) -> Self {
        FormatError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(path: &Path, message: impl Into<String>) -> Self {
        FormatError::Invalid {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// JSON number with 17 significant digits; non-finite values become `null`.
#[derive(Debug, Clone, Copy)]
pub struct Sig17(pub f64);

impl Serialize for Sig17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(fmt_f64(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

/// Row-major nested-array view of a matrix.
pub struct Rows<'a>(pub &'a DMatrix<f64>);

impl Serialize for Rows<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let m = self.0;
        let mut seq = s.serialize_seq(Some(m.nrows()))?;
        for i in 0..m.nrows() {
            let row: Vec<Sig17> = m.row(i).iter().map(|&x| Sig17(x)).collect();
            seq.serialize_element(&row)?;
        }
        seq.end()
    }
}

// ---- signals ---------------------------------------------------------------

pub fn parse_signal_csv<R: Read>(reader: R, path: &Path) -> Result<SampledSignal, FormatError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| csv_error(path, &e))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(FormatError::parse(path, 1, "empty CSV, expected header `t,ch0,...`"));
    }
    if &headers[0] != "t" {
        return Err(FormatError::parse(
            path,
            1,
            format!("first column must be `t`, found `{}`", &headers[0]),
        ));
    }
    if headers.len() < 2 {
        return Err(FormatError::parse(path, 1, "no signal channels"));
    }
    let n_ch = headers.len() - 1;

    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut lines = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, &e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != n_ch + 1 {
            return Err(FormatError::parse(
                path,
                line,
                format!("expected {} fields, found {}", n_ch + 1, rec.len()),
            ));
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                FormatError::parse(path, line, format!("column {}: `{field}` is not a number", j + 1))
            })?;
            if j == 0 {
                times.push(v);
            } else {
                values.push(v);
            }
        }
        lines.push(line);
    }
    if times.is_empty() {
        return Err(FormatError::parse(path, 2, "no samples"));
    }
    let n = times.len();
    let values = DMatrix::from_column_slice(n_ch, n, &values);
    SampledSignal::new(times, values).map_err(|e| match e {
        CoreError::BadTimeGrid { index } => FormatError::parse(
            path,
            lines[index.min(n - 1)],
            "time stamps must be finite and strictly increasing",
        ),
        other => FormatError::invalid(path, other.to_string()),
    })
}

fn csv_error(path: &Path, e: &csv::Error) -> FormatError {
    let line = e.position().map_or(1, |p| p.line());
    FormatError::parse(path, line, e.to_string())
}

pub fn read_signal_csv(path: &Path) -> Result<SampledSignal, FormatError> {
    let file = File::open(path).map_err(|e| FormatError::io(path, e))?;
    parse_signal_csv(file, path)
}

pub fn write_signal<W: Write>(out: W, signal: &SampledSignal) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((0..signal.n_channels()).map(|j| format!("ch{j}")));
    w.write_record(&header)?;
    let v = signal.values();
    for (k, &t) in signal.times().iter().enumerate() {
        let mut row = vec![fmt_f64(t)];
        row.extend(v.column(k).iter().map(|&x| fmt_f64(x)));
        w.write_record(&row)?;
    }
    w.flush()
}

pub fn write_signal_csv(path: &Path, signal: &SampledSignal) -> Result<(), FormatError> {
    let file = File::create(path).map_err(|e| FormatError::io(path, e))?;
    write_signal(file, signal).map_err(|e| FormatError::io(path, e))
}

// ---- models ----------------------------------------------------------------

/// JSON model layout; `K` may be omitted.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
    #[serde(rename = "K", default)]
    pub k: Option<Vec<Vec<f64>>>,
}

fn matrix_from_rows(name: &str, rows: &[Vec<f64>], cols_if_empty: usize) -> Result<DMatrix<f64>, String> {
    let n_cols = rows.first().map_or(cols_if_empty, Vec::len);
    if let Some(i) = rows.iter().position(|r| r.len() != n_cols) {
        return Err(format!("{name}: row {i} has {} entries, expected {n_cols}", rows[i].len()));
    }
    Ok(DMatrix::from_fn(rows.len(), n_cols, |i, j| rows[i][j]))
}

impl ModelFile {
    pub fn into_model(self) -> Result<StateSpaceModel, String> {
        let a = matrix_from_rows("A", &self.a, 0)?;
        let n_x = a.nrows();
        let b = matrix_from_rows("B", &self.b, 0)?;
        let c = matrix_from_rows("C", &self.c, n_x)?;
        // an empty D means zero feedthrough
        let d = if self.d.is_empty() {
            DMatrix::zeros(c.nrows(), b.ncols())
        } else {
            matrix_from_rows("D", &self.d, 0)?
        };
        let k = match &self.k {
            Some(rows) => Some(matrix_from_rows("K", rows, c.nrows())?),
            None => None,
        };
        StateSpaceModel::new(a, b, c, d, k).map_err(|e| e.to_string())
    }
}

#[derive(Serialize)]
struct ModelOut<'a> {
    #[serde(rename = "A")]
    a: Rows<'a>,
    #[serde(rename = "B")]
    b: Rows<'a>,
    #[serde(rename = "C")]
    c: Rows<'a>,
    #[serde(rename = "D")]
    d: Rows<'a>,
    #[serde(rename = "K")]
    k: Rows<'a>,
}

pub fn model_to_json(model: &StateSpaceModel) -> String {
    let out = ModelOut {
        a: Rows(&model.a),
        b: Rows(&model.b),
        c: Rows(&model.c),
        d: Rows(&model.d),
        k: Rows(&model.k),
    };
    serde_json::to_string_pretty(&out).expect("model serialization")
}

pub fn parse_model_json(text: &str, path: &Path) -> Result<StateSpaceModel, FormatError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| json_error(path, &e))?;
    file.into_model().map_err(|m| FormatError::invalid(path, m))
}

pub fn read_model_json(path: &Path) -> Result<StateSpaceModel, FormatError> {
    let text = read_text(path)?;
    parse_model_json(&text, path)
}

pub fn write_model_json(path: &Path, model: &StateSpaceModel) -> Result<(), FormatError> {
    write_text(path, &(model_to_json(model) + "\n"))
}

// ---- helpers ---------------------------------------------------------------

pub(crate) fn json_error(path: &Path, e: &serde_json::Error) -> FormatError {
    FormatError::parse(path, e.line() as u64, format!("{e}"))
}

pub(crate) fn read_text(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), FormatError> {
    std::fs::write(path, text).map_err(|e| FormatError::io(path, e))
}

pub(crate) fn create_dir(path: &Path) -> Result<(), FormatError> {
    std::fs::create_dir_all(path).map_err(|e| FormatError::io(path, e))
}

/// Writes rows of already-formatted fields as CSV.
pub(crate) fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), FormatError> {
    let io = |e: std::io::Error| FormatError::io(path, e);
    let file = File::create(path).map_err(io)?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(header).map_err(|e| io(e.into()))?;
    for r in rows {
        w.write_record(r).map_err(|e| io(e.into()))?;
    }
    w.flush().map_err(io)
}
