//! Result rows and their CSV/JSON files.
//!
//! Floats are rounded to 9 significant digits when a row is built, so a
//! written file parses back to exactly the rows that produced it. Undefined
//! statistics (NaN) are written as an empty CSV field or JSON `null`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// One (scheme, axis value) cell of a sweep. Column order is the file schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRow {
    pub scheme: String,
    pub axis: String,
    #[serde(with = "nan_as_null")]
    pub axis_value: f64,
    pub metric: String,
    #[serde(with = "nan_as_null")]
    pub mean: f64,
    #[serde(with = "nan_as_null")]
    pub stderr: f64,
    #[serde(with = "nan_as_null")]
    pub feasibility_rate: f64,
    #[serde(with = "nan_as_null")]
    pub mean_iterations: f64,
    pub realizations: usize,
    pub seed: u64,
}

/// Header of every CSV result file.
pub const CSV_COLUMNS: [&str; 10] = [
    "scheme",
    "axis",
    "axis_value",
    "metric",
    "mean",
    "stderr",
    "feasibility_rate",
    "mean_iterations",
    "realizations",
    "seed",
];

impl ResultRow {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        scheme: &str,
        axis: &str,
        axis_value: f64,
        metric: &str,
        mean: f64,
        stderr: f64,
        feasibility_rate: f64,
        mean_iterations: f64,
        realizations: usize,
        seed: u64,
    ) -> Self {
        Self {
            scheme: scheme.into(),
            axis: axis.into(),
            axis_value: round_sig(axis_value),
            metric: metric.into(),
            mean: round_sig(mean),
            stderr: round_sig(stderr),
            feasibility_rate: round_sig(feasibility_rate),
            mean_iterations: round_sig(mean_iterations),
            realizations,
            seed,
        }
    }

    /// Field-wise equality with NaN equal to NaN.
    pub fn same_as(&self, other: &Self) -> bool {
        let f = |a: f64, b: f64| a == b || (a.is_nan() && b.is_nan());
        self.scheme == other.scheme
            && self.axis == other.axis
            && f(self.axis_value, other.axis_value)
            && self.metric == other.metric
            && f(self.mean, other.mean)
            && f(self.stderr, other.stderr)
            && f(self.feasibility_rate, other.feasibility_rate)
            && f(self.mean_iterations, other.mean_iterations)
            && self.realizations == other.realizations
            && self.seed == other.seed
    }
}

/// Round to 9 significant digits; non-finite values pass through.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

mod nan_as_null {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if x.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_some(x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Parse(format!("unknown format `{s}` (expected csv or json)"))),
        }
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_COLUMNS).map_err(csv_error)?;
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers().map_err(csv_error)?.iter().map(String::from).collect();
    if header != CSV_COLUMNS {
        return Err(Error::Parse(format!("unexpected CSV header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

pub fn write_json<W: Write>(rows: &[ResultRow], mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, rows).map_err(|e| Error::Parse(e.to_string()))?;
    writeln!(out).map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_json<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    serde_json::from_reader(input).map_err(|e| Error::Parse(e.to_string()))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Write `rows` to `path`.
pub fn emit_results(rows: &[ResultRow], format: Format, path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Config("no result rows to write".into()));
    }
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    match format {
        Format::Csv => write_csv(rows, &mut out)?,
        Format::Json => write_json(rows, &mut out)?,
    }
    out.flush().map_err(io)
}
