//! Matrix interchange, metadata, time-series resampling and result exports.
//!
//! CSV dialect: comma separator, `.` decimal point, LF line endings and a
//! single header row. Values are written with 17 significant digits so that
//! every finite `f64` survives a store/load round trip unchanged. Non-finite
//! cells are rejected on load.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensmap::SensitivityMap;

pub const FORMAT_VERSION: u32 = 1;

/// Formats a value with 17 significant digits.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes `m` with a header row. Without explicit names, columns are `c1..cp`.
pub fn store_matrix(path: &Path, m: &DMatrix<f64>, header: Option<&[String]>) -> Result<()> {
    let names: Vec<String> = match header {
        Some(h) => {
            if h.len() != m.ncols() {
                return Err(Error::shape("csv header", m.ncols(), h.len()));
            }
            h.to_vec()
        }
        None => (1..=m.ncols()).map(|j| format!("c{j}")).collect(),
    };
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", names.join(",")).map_err(io)?;
    let mut line = String::new();
    for i in 0..m.nrows() {
        line.clear();
        for j in 0..m.ncols() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format_value(m[(i, j)]));
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a numeric CSV with one header row.
pub fn load_matrix(path: &Path) -> Result<DMatrix<f64>> {
    load_matrix_with_header(path).map(|(m, _)| m)
}

/// Like [`load_matrix`], also returning the header names.
pub fn load_matrix_with_header(path: &Path) -> Result<(DMatrix<f64>, Vec<String>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let display = path.display().to_string();
    let parse_err = |line: u64, column: usize, message: String| Error::Parse {
        path: display.clone(),
        line,
        column,
        message,
    };
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(1, 0, e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let width = header.len();
    let mut values = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, 0, e.to_string())
        })?;
        let line = record.position().map_or(rows as u64 + 2, |p| p.line());
        if record.len() != width {
            return Err(parse_err(
                line,
                record.len().min(width) + 1,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| parse_err(line, j + 1, format!("not a number: '{cell}'")))?;
            if !v.is_finite() {
                return Err(parse_err(line, j + 1, format!("non-finite value '{cell}'")));
            }
            values.push(v);
        }
        rows += 1;
    }
    Ok((DMatrix::from_row_slice(rows, width, &values), header))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetaKind {
    Snapshot,
    Basis,
    Coeffs,
}

/// Contents of a `meta.json` sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub version: u32,
    pub kind: MetaKind,
    pub n: usize,
    /// Output dimension `L` for snapshots and bases, `m` for coefficients.
    pub l_or_m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

/// A stack of functional outputs, one row per model run.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    pub data: DMatrix<f64>,
    pub dim_labels: Option<Vec<f64>>,
    pub input_doe: Option<DMatrix<f64>>,
}

impl SnapshotSet {
    pub fn new(data: DMatrix<f64>) -> Self {
        Self {
            data,
            dim_labels: None,
            input_doe: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != self.data.ncols() {
            return Err(Error::shape("snapshot labels", self.data.ncols(), labels.len()));
        }
        self.dim_labels = Some(labels);
        Ok(self)
    }

    pub fn with_doe(mut self, doe: DMatrix<f64>) -> Result<Self> {
        if doe.nrows() != self.data.nrows() {
            return Err(Error::shape("snapshot DoE rows", self.data.nrows(), doe.nrows()));
        }
        self.input_doe = Some(doe);
        Ok(self)
    }

    /// Writes `snapshots.csv`, optional `doe.csv` and `meta.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let header = self
            .dim_labels
            .as_ref()
            .map(|l| l.iter().map(|t| format_value(*t)).collect::<Vec<_>>());
        store_matrix(&dir.join("snapshots.csv"), &self.data, header.as_deref())?;
        if let Some(doe) = &self.input_doe {
            let names: Vec<String> = (1..=doe.ncols()).map(|j| format!("x{j}")).collect();
            store_matrix(&dir.join("doe.csv"), doe, Some(&names))?;
        }
        write_json(
            &dir.join("meta.json"),
            &Meta {
                version: FORMAT_VERSION,
                kind: MetaKind::Snapshot,
                n: self.data.nrows(),
                l_or_m: self.data.ncols(),
                labels: self.dim_labels.clone(),
                l: None,
                m: None,
                eigenvalues: None,
            },
        )
    }
}

/// Realizations sampled at irregular, strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct IrregularSeries {
    series: Vec<Vec<(f64, f64)>>,
}

impl IrregularSeries {
    pub fn new(series: Vec<Vec<(f64, f64)>>) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::Config("no series given".into()));
        }
        for (r, s) in series.iter().enumerate() {
            if s.len() < 2 {
                return Err(Error::Config(format!("series {} has fewer than two points", r + 1)));
            }
            if s.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
                return Err(Error::Config(format!("series {} has non-finite values", r + 1)));
            }
            if s.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(Error::Config(format!(
                    "series {} times are not strictly increasing",
                    r + 1
                )));
            }
        }
        Ok(Self { series })
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Reads long-format CSV with columns `series,t,value`; rows of one
    /// series must be contiguous, and series are kept in order of appearance.
    pub fn load(path: &Path) -> Result<Self> {
        let (m, _) = load_matrix_with_header(path)?;
        if m.ncols() != 3 {
            return Err(Error::shape("irregular series columns (series,t,value)", 3, m.ncols()));
        }
        let mut series: Vec<Vec<(f64, f64)>> = Vec::new();
        let mut current: Option<f64> = None;
        for i in 0..m.nrows() {
            let id = m[(i, 0)];
            if current != Some(id) {
                series.push(Vec::new());
                current = Some(id);
            }
            series.last_mut().unwrap().push((m[(i, 1)], m[(i, 2)]));
        }
        Self::new(series)
    }
}

/// Linear interpolation of every realization onto `l` uniformly spaced points
/// of the common support `[max first t, min last t]`.
pub fn resample_linear(series: &IrregularSeries, l: usize) -> Result<SnapshotSet> {
    if l < 2 {
        return Err(Error::Config("resampling needs at least two grid points".into()));
    }
    let lo = series
        .series
        .iter()
        .map(|s| s[0].0)
        .fold(f64::NEG_INFINITY, f64::max);
    let hi = series
        .series
        .iter()
        .map(|s| s[s.len() - 1].0)
        .fold(f64::INFINITY, f64::min);
    if !(lo < hi) {
        return Err(Error::EmptySupport);
    }
    let step = (hi - lo) / (l - 1) as f64;
    let grid: Vec<f64> = (0..l)
        .map(|k| if k == l - 1 { hi } else { lo + step * k as f64 })
        .collect();
    let mut data = DMatrix::zeros(series.len(), l);
    for (r, s) in series.series.iter().enumerate() {
        for (k, &t) in grid.iter().enumerate() {
            data[(r, k)] = interpolate(s, t);
        }
    }
    SnapshotSet::new(data).with_labels(grid)
}

fn interpolate(s: &[(f64, f64)], t: f64) -> f64 {
    // First knot strictly greater than t.
    let idx = s.partition_point(|&(tk, _)| tk <= t);
    if idx == 0 {
        return s[0].1;
    }
    let (t0, v0) = s[idx - 1];
    if t0 == t || idx == s.len() {
        return v0;
    }
    let (t1, v1) = s[idx];
    v0 + (v1 - v0) * ((t - t0) / (t1 - t0))
}

/// Writes a sensitivity map as `ell,estimate,flag` (1-based `ell`), adding
/// `boot_center,boot_q1,boot_q3,boot_std` when bands are attached.
pub fn write_map_csv(path: &Path, map: &SensitivityMap) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    let bands = map.bands();
    if bands.is_some() {
        writeln!(w, "ell,estimate,flag,boot_center,boot_q1,boot_q3,boot_std").map_err(io)?;
    } else {
        writeln!(w, "ell,estimate,flag").map_err(io)?;
    }
    for (l, (&v, &flag)) in map.values().iter().zip(map.flags()).enumerate() {
        write!(w, "{},{},{}", l + 1, format_value(v), u8::from(flag)).map_err(io)?;
        if let Some(b) = bands {
            write!(
                w,
                ",{},{},{},{}",
                format_value(b.center[l]),
                format_value(b.q1[l]),
                format_value(b.q3[l]),
                format_value(b.std[l])
            )
            .map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}
