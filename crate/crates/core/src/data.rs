//! Labeled datasets, file formats, splitting and scaling.
//!
//! Labels are stored as `+1` / `-1`; class `k = 0` is the `+1` class and
//! `k = 1` the `-1` class throughout the crate. Random splits use
//! `ChaCha8Rng` seeded with the 64-bit split seed.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LABELS: [i8; 2] = [1, -1];

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    /// One row per point.
    pub features: DMatrix<f64>,
    pub labels: Vec<i8>,
    /// Rows skipped at load time (missing values or labels outside the
    /// selected pair).
    pub dropped_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub n: usize,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl Dataset {
    pub fn new(name: impl Into<String>, features: DMatrix<f64>, labels: Vec<i8>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::Shape(format!("{} feature rows but {} labels", features.nrows(), labels.len())));
        }
        if let Some(l) = labels.iter().find(|l| **l != 1 && **l != -1) {
            return Err(Error::Label(l.to_string()));
        }
        Ok(Dataset { name: name.into(), features, labels, dropped_rows: 0 })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_pos(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn n_neg(&self) -> usize {
        self.len() - self.n_pos()
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.features.row(i).transpose()
    }

    /// Row indices of class `k` (0 for `+1`, 1 for `-1`).
    pub fn class_index(&self, k: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == LABELS[k]).collect()
    }

    pub fn class_points(&self, k: usize) -> Vec<DVector<f64>> {
        self.class_index(k).into_iter().map(|i| self.row(i)).collect()
    }

    pub fn points(&self) -> Vec<DVector<f64>> {
        (0..self.len()).map(|i| self.row(i)).collect()
    }

    pub fn subset(&self, rows: &[usize], name: impl Into<String>) -> Dataset {
        let features = self.features.select_rows(rows);
        let labels = rows.iter().map(|&i| self.labels[i]).collect();
        Dataset { name: name.into(), features, labels, dropped_rows: 0 }
    }

    pub fn summary(&self) -> DatasetSummary {
        DatasetSummary { name: self.name.clone(), n: self.n(), n_pos: self.n_pos(), n_neg: self.n_neg() }
    }

    pub fn require_both_classes(&self) -> Result<()> {
        if self.n_pos() == 0 || self.n_neg() == 0 {
            return Err(Error::DegenerateDataset(format!(
                "{} has {} positive and {} negative points",
                self.name,
                self.n_pos(),
                self.n_neg()
            )));
        }
        Ok(())
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvOptions {
    /// Header name, or a 0-based column index.
    pub label_column: String,
    pub positive_label: String,
    /// When set, only rows with this label (mapped to -1) or the positive
    /// label are kept; otherwise every other label maps to -1.
    pub negative_label: Option<String>,
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "?" | "NA" | "na" | "NaN" | "nan")
}

pub fn parse_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    read_csv(open(path)?, &stem(path), opts)
}

pub fn read_csv<R: Read>(reader: R, name: &str, opts: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Parse { row: 0, col: 0, msg: e.to_string() })?.clone();
    let label_col = header
        .iter()
        .position(|h| h == opts.label_column)
        .or_else(|| opts.label_column.parse::<usize>().ok().filter(|&i| i < header.len()))
        .ok_or_else(|| Error::config("label_column", format!("no column {:?} in header", opts.label_column)))?;
    let width = header.len() - 1;

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut dropped = 0;
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(|e| Error::Parse { row, col: 0, msg: e.to_string() })?;
        if rec.len() != header.len() {
            return Err(Error::Parse {
                row,
                col: rec.len(),
                msg: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        if rec.iter().any(is_missing) {
            dropped += 1;
            continue;
        }
        let raw = &rec[label_col];
        let label = if raw == opts.positive_label {
            1
        } else {
            match &opts.negative_label {
                Some(neg) if raw != neg => {
                    dropped += 1;
                    continue;
                }
                _ => -1,
            }
        };
        for (c, cell) in rec.iter().enumerate().filter(|(c, _)| *c != label_col) {
            let v: f64 =
                cell.parse().map_err(|_| Error::Parse { row, col: c + 1, msg: format!("not a number: {cell:?}") })?;
            values.push(v);
        }
        labels.push(label);
    }
    let features = DMatrix::from_row_slice(labels.len(), width, &values);
    let mut ds = Dataset::new(name, features, labels)?;
    ds.dropped_rows = dropped;
    ds.require_both_classes()?;
    Ok(ds)
}

/// Unlabeled numeric CSV with a header row; every column is a feature.
pub fn parse_feature_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    read_feature_csv(open(path.as_ref())?)
}

pub fn read_feature_csv<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let width = rdr.headers().map_err(|e| Error::Parse { row: 0, col: 0, msg: e.to_string() })?.len();
    let mut values = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(|e| Error::Parse { row, col: 0, msg: e.to_string() })?;
        if rec.len() != width {
            return Err(Error::Parse {
                row,
                col: rec.len(),
                msg: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 =
                cell.parse().map_err(|_| Error::Parse { row, col: c + 1, msg: format!("not a number: {cell:?}") })?;
            values.push(v);
        }
    }
    Ok(DMatrix::from_row_slice(values.len() / width.max(1), width, &values))
}

/// svmlight / libsvm text format. Labels `+1`/`1` and `-1` are recognized;
/// with `positive_label` set, that label maps to `+1` and any other to `-1`.
pub fn parse_svmlight(path: impl AsRef<Path>, positive_label: Option<&str>) -> Result<Dataset> {
    let path = path.as_ref();
    read_svmlight(open(path)?, &stem(path), positive_label)
}

pub fn read_svmlight<R: Read>(reader: R, name: &str, positive_label: Option<&str>) -> Result<Dataset> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut width = 0;
    for (r, line) in BufReader::new(reader).lines().enumerate() {
        let row = r + 1;
        let line = line.map_err(|e| Error::Parse { row, col: 0, msg: e.to_string() })?;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let raw = tokens.next().unwrap_or_default();
        let label = match positive_label {
            Some(p) => {
                if raw == p {
                    1
                } else {
                    -1
                }
            }
            None => match raw {
                "+1" | "1" => 1,
                "-1" => -1,
                _ => return Err(Error::Label(raw.to_string())),
            },
        };
        let mut entries = Vec::new();
        let mut last = 0;
        for (c, tok) in tokens.enumerate() {
            let col = c + 1;
            if tok.starts_with("qid:") {
                continue;
            }
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                row,
                col,
                msg: format!("expected idx:val, got {tok:?}"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse { row, col, msg: format!("bad index {idx:?}") })?;
            if idx <= last {
                return Err(Error::Parse { row, col, msg: format!("index {idx} not ascending") });
            }
            let val: f64 = val.parse().map_err(|_| Error::Parse { row, col, msg: format!("bad value {val:?}") })?;
            last = idx;
            entries.push((idx - 1, val));
        }
        width = width.max(last);
        rows.push(entries);
        labels.push(label);
    }
    let mut features = DMatrix::zeros(rows.len(), width);
    for (i, entries) in rows.iter().enumerate() {
        for &(j, v) in entries {
            features[(i, j)] = v;
        }
    }
    Dataset::new(name, features, labels)
}

/// Writes nonzero entries only; values use Rust's shortest round-trip
/// formatting so re-parsing is exact.
pub fn write_svmlight<W: Write>(ds: &Dataset, mut out: W) -> std::io::Result<()> {
    for i in 0..ds.len() {
        write!(out, "{}", if ds.labels[i] == 1 { "+1" } else { "-1" })?;
        for j in 0..ds.n() {
            let v = ds.features[(i, j)];
            if v != 0.0 {
                write!(out, " {}:{}", j + 1, v)?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

fn take_count(n: usize, frac: f64) -> usize {
    ((n as f64) * frac).round() as usize
}

/// Random train/test partition. Index sets are returned in ascending row
/// order so the result depends only on the seed.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::config("train_fraction", format!("must lie in (0, 1), got {}", spec.train_fraction)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let groups: Vec<Vec<usize>> =
        if spec.stratified { vec![ds.class_index(0), ds.class_index(1)] } else { vec![(0..ds.len()).collect()] };
    for mut g in groups {
        g.shuffle(&mut rng);
        let m = take_count(g.len(), spec.train_fraction);
        train.extend_from_slice(&g[..m]);
        test.extend_from_slice(&g[m..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    let tr = ds.subset(&train, format!("{}/train", ds.name));
    let te = ds.subset(&test, format!("{}/test", ds.name));
    if tr.n_pos() < 2 || tr.n_neg() < 2 {
        return Err(Error::DegenerateSplit(format!(
            "training set has {} positive and {} negative points (need 2 each)",
            tr.n_pos(),
            tr.n_neg()
        )));
    }
    if te.is_empty() {
        return Err(Error::DegenerateSplit("test set is empty".into()));
    }
    Ok((tr, te))
}

/// Per-feature affine map onto `[0, 1]` fitted on one dataset. Constant
/// features map to 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(ds: &Dataset) -> Self {
        let (min, max) = (0..ds.n())
            .map(|j| {
                let col = ds.features.column(j);
                (col.min(), col.max())
            })
            .unzip();
        MinMaxScaler { min, max }
    }

    pub fn transform(&self, ds: &Dataset) -> Dataset {
        let mut out = ds.clone();
        for j in 0..ds.n() {
            let span = self.max[j] - self.min[j];
            for v in out.features.column_mut(j).iter_mut() {
                *v = if span > 0.0 { (*v - self.min[j]) / span } else { 0.0 };
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(pos: &str) -> CsvOptions {
        CsvOptions { label_column: "y".into(), positive_label: pos.into(), negative_label: None }
    }

    #[test]
    fn csv_label_mapping() {
        let ds = read_csv("a,b,y\n1,2,2\n3,4,4\n5,6,4\n".as_bytes(), "t", &opts("2")).unwrap();
        assert_eq!(ds.labels, vec![1, -1, -1]);
        assert_eq!(ds.features, DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
    }

    #[test]
    fn csv_bad_cell_reports_row() {
        let err = read_csv("a,b,y\na,b,1\n".as_bytes(), "t", &opts("1")).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, col: 1, .. }), "{err}");
    }

    #[test]
    fn csv_missing_rows_dropped_and_counted() {
        let ds = read_csv("a,y\n1,p\n?,n\n,p\n2,n\n".as_bytes(), "t", &opts("p")).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dropped_rows, 2);
    }

    #[test]
    fn csv_negative_label_filters() {
        let o = CsvOptions { label_column: "1".into(), positive_label: "L".into(), negative_label: Some("R".into()) };
        let ds = read_csv("a,y\n1,L\n2,B\n3,R\n".as_bytes(), "t", &o).unwrap();
        assert_eq!(ds.labels, vec![1, -1]);
        assert_eq!(ds.dropped_rows, 1);
    }

    #[test]
    fn csv_single_class_is_degenerate() {
        let err = read_csv("a,y\n1,p\n2,p\n".as_bytes(), "t", &opts("p")).unwrap_err();
        assert!(matches!(err, Error::DegenerateDataset(_)));
    }

    #[test]
    fn svmlight_line() {
        let ds = read_svmlight("+1 1:0.5 3:2\n-1 2:1\n".as_bytes(), "t", None).unwrap();
        assert_eq!(ds.row(0).as_slice(), &[0.5, 0.0, 2.0]);
        assert_eq!(ds.labels, vec![1, -1]);
    }

    #[test]
    fn svmlight_errors() {
        assert!(matches!(read_svmlight("+1 3:1 2:1\n".as_bytes(), "t", None), Err(Error::Parse { row: 1, .. })));
        assert!(matches!(read_svmlight("2 1:1\n".as_bytes(), "t", None), Err(Error::Label(_))));
        let ds = read_svmlight("2 1:1\n1 1:2\n".as_bytes(), "t", Some("1")).unwrap();
        assert_eq!(ds.labels, vec![-1, 1]);
    }
}
