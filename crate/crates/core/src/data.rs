//! Datasets, index sets and plain-text matrix I/O.
//!
//! Matrices are stored with one matrix row per CSV line. Lines starting with
//! `#` are comments. A dataset file holds the `Y` block first and the `X`
//! block second, separated by one or more blank lines; alternatively a JSON
//! descriptor `{"y": "Y.csv", "x": "X.csv"}` points to two matrix files
//! (paths relative to the descriptor).
//!
//! Column indices are 0-based in memory and 1-based whenever they are
//! printed or serialized.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Observed outputs `Y` (m x N) and regressors `X` (n x N).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: DMatrix<f64>,
    x: DMatrix<f64>,
    pub name: Option<String>,
}

impl Dataset {
    pub fn new(y: DMatrix<f64>, x: DMatrix<f64>) -> Result<Self> {
        if y.ncols() != x.ncols() {
            return Err(Error::Shape(format!(
                "column mismatch: Y has {} columns, X has {}",
                y.ncols(),
                x.ncols()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::Shape("dataset needs at least one column".into()));
        }
        if y.nrows() == 0 || x.nrows() == 0 {
            return Err(Error::Shape("Y and X need at least one row".into()));
        }
        ensure_finite(&y, "Y")?;
        ensure_finite(&x, "X")?;
        Ok(Dataset { y, x, name: None })
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Output dimension m.
    pub fn m(&self) -> usize {
        self.y.nrows()
    }

    /// Regressor dimension n.
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Number of samples N.
    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.y, self.x)
    }
}

pub(crate) fn ensure_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if let Some((idx, v)) = m.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        let (r, c) = (idx % m.nrows(), idx / m.nrows());
        return Err(Error::InvalidArgument(format!(
            "{what} has non-finite entry {v} at row {}, column {}",
            r + 1,
            c + 1
        )));
    }
    Ok(())
}

/// Ground-truth components of `Y = A0 X + E + F`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub a0: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub f: DMatrix<f64>,
}

impl GroundTruth {
    /// Largest absolute entry of `Y - (A0 X + E + F)`.
    pub fn model_residual(&self, d: &Dataset) -> f64 {
        let model = &self.a0 * d.x() + &self.e + &self.f;
        (d.y() - model).amax()
    }
}

/// Sorted set of distinct column indices (0-based internally).
#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct IndexSet {
    indices: Vec<usize>,
}

impl IndexSet {
    pub fn empty() -> Self {
        IndexSet::default()
    }

    /// Full set {0, ..., n-1}.
    pub fn full(n: usize) -> Self {
        IndexSet {
            indices: (0..n).collect(),
        }
    }

    /// Builds a set from arbitrary 0-based indices; duplicates are merged.
    pub fn from_indices(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        IndexSet { indices }
    }

    /// Builds a set from 1-based indices, checking them against `n`.
    pub fn from_one_based(one_based: &[usize], n: usize) -> Result<Self> {
        let mut out = Vec::with_capacity(one_based.len());
        for &i in one_based {
            if i == 0 || i > n {
                return Err(Error::InvalidArgument(format!(
                    "index {i} outside 1..={n}"
                )));
            }
            out.push(i - 1);
        }
        Ok(Self::from_indices(out))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i + 1).collect()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.indices.last().copied()
    }

    /// Indices of {0, ..., n-1} not in this set.
    pub fn complement(&self, n: usize) -> IndexSet {
        IndexSet {
            indices: (0..n).filter(|i| !self.contains(*i)).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.indices.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

impl Serialize for IndexSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_one_based().serialize(s)
    }
}

impl<'de> Deserialize<'de> for IndexSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v: Vec<usize> = Vec::deserialize(d)?;
        if v.contains(&0) {
            return Err(serde::de::Error::custom("index sets are 1-based"));
        }
        Ok(IndexSet::from_indices(v.into_iter().map(|i| i - 1).collect()))
    }
}

/// Splits columns into clean ones (`S0`) and gross-error ones (`Sc`, 2-norm > `tol`).
pub fn partition_outliers(f: &DMatrix<f64>, tol: f64) -> (IndexSet, IndexSet) {
    let (mut clean, mut gross) = (Vec::new(), Vec::new());
    for (t, col) in f.column_iter().enumerate() {
        if col.norm() > tol {
            gross.push(t);
        } else {
            clean.push(t);
        }
    }
    (IndexSet { indices: clean }, IndexSet { indices: gross })
}

/// Rescales every pair `(y_k, x_k)` by `1 / ||x_k||_2`.
pub fn normalize_columns(d: &Dataset) -> Result<Dataset> {
    let mut y = d.y.clone();
    let mut x = d.x.clone();
    for k in 0..x.ncols() {
        let norm = x.column(k).norm();
        if norm == 0.0 {
            return Err(Error::InvalidArgument(format!(
                "regressor column {} is zero and cannot be normalized",
                k + 1
            )));
        }
        x.column_mut(k).unscale_mut(norm);
        y.column_mut(k).unscale_mut(norm);
    }
    Ok(Dataset {
        y,
        x,
        name: d.name.clone(),
    })
}

/// Column-normalizes a bare regressor matrix.
pub fn normalize_regressors(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let y = DMatrix::zeros(1, x.ncols());
    Ok(normalize_columns(&Dataset::new(y, x.clone())?)?.x)
}

/// FIR regressors built from lagged inputs.
///
/// With `N = y.len()`, `u` must hold at least `N + order - 1` samples, the
/// first `order - 1` of them being pre-sample history. Row `i` of `X` holds
/// the input delayed by `i` steps, so `X[i][t] = u[t + order - 1 - i]`.
pub fn hankel_regressors(u: &[f64], y: &[f64], order: usize) -> Result<Dataset> {
    if order == 0 {
        return Err(Error::InvalidArgument("model order must be at least 1".into()));
    }
    let n_samples = y.len();
    if n_samples == 0 {
        return Err(Error::InvalidArgument("no output samples".into()));
    }
    let needed = n_samples + order - 1;
    if u.len() < needed {
        return Err(Error::InvalidArgument(format!(
            "insufficient input samples: order {order} with N = {n_samples} needs {needed}, got {}",
            u.len()
        )));
    }
    let x = DMatrix::from_fn(order, n_samples, |i, t| u[t + order - 1 - i]);
    let y = DMatrix::from_row_slice(1, n_samples, y);
    Dataset::new(y, x)
}

/// Parses a CSV matrix (one row per line, `#` comments, blank lines ignored).
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let blocks = parse_blocks(text)?;
    match blocks.len() {
        0 => Err(Error::Parse {
            line: 0,
            msg: "empty input".into(),
        }),
        1 => Ok(blocks.into_iter().next().unwrap()),
        _ => {
            // Blank lines inside a single matrix are tolerated.
            let rows: Vec<DVector<f64>> = blocks
                .iter()
                .flat_map(|b| b.row_iter().map(|r| r.transpose()).collect::<Vec<_>>())
                .collect();
            rows_to_matrix(rows, 0)
        }
    }
}

/// Splits `text` into matrices separated by blank lines.
fn parse_blocks(text: &str) -> Result<Vec<DMatrix<f64>>> {
    let mut blocks = Vec::new();
    let mut current: Vec<DVector<f64>> = Vec::new();
    let mut block_start = 0;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            if !current.is_empty() {
                blocks.push(rows_to_matrix(std::mem::take(&mut current), block_start)?);
            }
            continue;
        }
        if current.is_empty() {
            block_start = lineno + 1;
        }
        let row = line
            .split(',')
            .map(|cell| {
                let cell = cell.trim();
                cell.parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    msg: format!("non-numeric cell {cell:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("non-finite value {v}"),
            });
        }
        current.push(DVector::from_vec(row));
    }
    if !current.is_empty() {
        blocks.push(rows_to_matrix(current, block_start)?);
    }
    Ok(blocks)
}

fn rows_to_matrix(rows: Vec<DVector<f64>>, first_line: usize) -> Result<DMatrix<f64>> {
    let ncols = rows[0].len();
    if let Some(k) = rows.iter().position(|r| r.len() != ncols) {
        return Err(Error::Parse {
            line: first_line + k,
            msg: format!("ragged row: expected {ncols} cells, got {}", rows[k].len()),
        });
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Formats a matrix as CSV with round-trip exact floats.
pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    parse_matrix(&text)
}

pub fn write_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    fs::write(path.as_ref(), format_matrix(m)).map_err(|e| Error::io(path.as_ref(), e))
}

/// On-disk layout of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    /// One CSV file: the `Y` block, a blank line, then the `X` block.
    Combined,
    /// JSON descriptor `{"y": path, "x": path}`.
    Descriptor,
}

impl DatasetFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => DatasetFormat::Descriptor,
            _ => DatasetFormat::Combined,
        }
    }
}

/// JSON pointer to a `Y` file and an `X` file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetDescriptor {
    pub y: PathBuf,
    pub x: PathBuf,
}

pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut ds = match format {
        DatasetFormat::Combined => {
            let blocks = parse_blocks(&text)?;
            match blocks.len() {
                0 => {
                    return Err(Error::Parse {
                        line: 0,
                        msg: "empty file".into(),
                    })
                }
                2 => {
                    let mut it = blocks.into_iter();
                    Dataset::new(it.next().unwrap(), it.next().unwrap())?
                }
                k => {
                    return Err(Error::Parse {
                        line: 0,
                        msg: format!("expected a Y block and an X block, found {k} block(s)"),
                    })
                }
            }
        }
        DatasetFormat::Descriptor => {
            let desc: DatasetDescriptor = serde_json::from_str(&text)?;
            let base = path.parent().unwrap_or_else(|| Path::new("."));
            let y = read_matrix(base.join(&desc.y))?;
            let x = read_matrix(base.join(&desc.x))?;
            Dataset::new(y, x)?
        }
    };
    ds.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    Ok(ds)
}

/// Writes `Y.csv`, `X.csv` and a `dataset.json` descriptor into `dir`.
pub fn save_dataset(dir: impl AsRef<Path>, d: &Dataset) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_matrix(dir.join("Y.csv"), d.y())?;
    write_matrix(dir.join("X.csv"), d.x())?;
    let desc = DatasetDescriptor {
        y: "Y.csv".into(),
        x: "X.csv".into(),
    };
    let path = dir.join("dataset.json");
    fs::write(&path, serde_json::to_string_pretty(&desc)?).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
