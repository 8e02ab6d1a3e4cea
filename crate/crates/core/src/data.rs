//! Datasets, splits, and the linearly-scaled error measures used as fitness.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error("row {row}, column {column}: cannot parse {value:?} as a number")]
    NotNumeric { row: usize, column: usize, value: String },
    #[error("row {row}, column {column}: value is not finite")]
    NonFinite { row: usize, column: usize },
    #[error("dataset is empty")]
    Empty,
    #[error("need at least one feature column and a target column")]
    TooFewColumns,
    #[error("need at least 4 rows to split, got {0}")]
    TooFewRows(usize),
    #[error("columns have different lengths")]
    Ragged,
    #[error("target has zero variance")]
    ConstantTarget,
}

/// Column-major matrix of feature values.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    n_rows: usize,
    columns: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self, DataError> {
        let n_rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n_rows) {
            return Err(DataError::Ragged);
        }
        Ok(FeatureMatrix { n_rows, columns })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DataError> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(DataError::Ragged);
        }
        let columns = (0..n_cols).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Ok(FeatureMatrix {
            n_rows: rows.len(),
            columns,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            n_rows: rows.len(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
        }
    }

    /// Smallest and largest entry over the whole matrix.
    pub fn value_range(&self) -> Option<(f64, f64)> {
        self.columns.iter().flatten().fold(None, |acc, &v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }
}

/// Features and target of a regression problem.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub features: FeatureMatrix,
    pub target: Vec<f64>,
}

/// Rows selected from a dataset, e.g. its training part.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub features: FeatureMatrix,
    pub target: Vec<f64>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, features: FeatureMatrix, target: Vec<f64>) -> Result<Self, DataError> {
        if target.is_empty() {
            return Err(DataError::Empty);
        }
        if features.n_rows() != target.len() {
            return Err(DataError::Ragged);
        }
        for (j, column) in features.columns.iter().enumerate() {
            if let Some(i) = column.iter().position(|v| !v.is_finite()) {
                return Err(DataError::NonFinite { row: i, column: j });
            }
        }
        if let Some(i) = target.iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFinite {
                row: i,
                column: features.n_cols(),
            });
        }
        Ok(Dataset {
            name: name.into(),
            features,
            target,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    pub fn select(&self, rows: &[usize]) -> Sample {
        Sample {
            features: self.features.select_rows(rows),
            target: rows.iter().map(|&i| self.target[i]).collect(),
        }
    }
}

/// Reads a comma-separated file: last column is the target, the rest are features.
///
/// A file without any comma is read as whitespace-separated columns. A first
/// row containing any non-numeric cell is treated as a header. Row numbers in
/// errors are 1-based file lines.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let io_err = |source| DataError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut text = std::fs::read_to_string(path).map_err(io_err)?;
    if !text.contains(',') {
        text = text
            .lines()
            .map(|l| l.split_whitespace().collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
            .join("\n");
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (index, record) in reader.records().enumerate() {
        let line = index + 1;
        let record = record.map_err(|e| DataError::Malformed {
            row: line,
            message: e.to_string(),
        })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if index == 0 && record.iter().any(|cell| cell.parse::<f64>().is_err()) {
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(DataError::Malformed {
                row: line,
                message: format!("expected {expected} fields, found {}", record.len()),
            });
        }
        let mut values = Vec::with_capacity(record.len());
        for (column, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| DataError::NotNumeric {
                row: line,
                column: column + 1,
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(DataError::NonFinite {
                    row: line,
                    column: column + 1,
                });
            }
            values.push(value);
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    if width.unwrap_or(0) < 2 {
        return Err(DataError::TooFewColumns);
    }
    let target = rows.iter_mut().map(|r| r.pop().unwrap()).collect();
    let features = FeatureMatrix::from_rows(&rows)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(name, features, target)
}

/// Disjoint train/validation/test row indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Random 50/25/25 partition: `floor(n/2)` train, `floor(n/4)` validation, rest test.
pub fn split<R: Rng + ?Sized>(n_rows: usize, rng: &mut R) -> Result<SplitIndices, DataError> {
    if n_rows < 4 {
        return Err(DataError::TooFewRows(n_rows));
    }
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(rng);
    let n_train = n_rows / 2;
    let n_val = n_rows / 4;
    let test = order.split_off(n_train + n_val);
    let validation = order.split_off(n_train);
    Ok(SplitIndices {
        train: order,
        validation,
        test,
    })
}

/// Intercept and slope of the least-squares fit of targets on predictions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scale {
    pub intercept: f64,
    pub slope: f64,
}

impl Scale {
    pub const IDENTITY: Scale = Scale {
        intercept: 0.0,
        slope: 1.0,
    };

    pub fn apply(&self, p: f64) -> f64 {
        self.intercept + self.slope * p
    }
}

/// Result of one linearly-scaled fitness evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledFitness {
    pub scale: Scale,
    /// Mean squared error after scaling; `+inf` when predictions are not finite.
    pub mse: f64,
}

impl ScaledFitness {
    /// Error as a percentage of the target variance.
    pub fn nmse(&self, target_variance: f64) -> f64 {
        100.0 * self.mse / target_variance
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population variance (divide by `n`).
pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

pub fn mse(y: &[f64], p: &[f64]) -> f64 {
    assert_eq!(y.len(), p.len());
    y.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
}

/// Least-squares `y ≈ a + b·p`. Degenerate predictions fall back to `(mean(y), 0)`.
pub fn linear_scale(y: &[f64], p: &[f64]) -> Scale {
    assert_eq!(y.len(), p.len());
    assert!(!y.is_empty());
    let my = mean(y);
    let fallback = Scale {
        intercept: my,
        slope: 0.0,
    };
    if p.iter().any(|v| !v.is_finite()) {
        return fallback;
    }
    let mp = mean(p);
    let (mut cov, mut var) = (0.0, 0.0);
    for (yi, pi) in y.iter().zip(p) {
        let dp = pi - mp;
        cov += (yi - my) * dp;
        var += dp * dp;
    }
    if var == 0.0 || !var.is_finite() || !cov.is_finite() {
        return fallback;
    }
    let slope = cov / var;
    Scale {
        intercept: my - slope * mp,
        slope,
    }
}

/// Linear scaling followed by the mean squared error.
pub fn scaled_fitness(y: &[f64], p: &[f64]) -> ScaledFitness {
    if p.iter().any(|v| !v.is_finite()) {
        return ScaledFitness {
            scale: linear_scale(y, p),
            mse: f64::INFINITY,
        };
    }
    let scale = linear_scale(y, p);
    let error = y
        .iter()
        .zip(p)
        .map(|(yi, pi)| {
            let r = yi - scale.apply(*pi);
            r * r
        })
        .sum::<f64>()
        / y.len() as f64;
    ScaledFitness {
        scale,
        mse: if error.is_finite() { error } else { f64::INFINITY },
    }
}

pub fn scaled_mse(y: &[f64], p: &[f64]) -> f64 {
    scaled_fitness(y, p).mse
}

/// `100 · scaled_mse(y, p) / var(y)`.
pub fn nmse(y: &[f64], p: &[f64]) -> Result<f64, DataError> {
    let var = variance(y);
    if var == 0.0 || !var.is_finite() {
        return Err(DataError::ConstantTarget);
    }
    Ok(100.0 * scaled_mse(y, p) / var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_plain_csv() {
        let f = write_tmp("1,2,3\n4,5,6\n7,8,9\n1,1,1\n2,2,2\n");
        let d = load_csv(f.path()).unwrap();
        assert_eq!((d.n_rows(), d.n_features()), (5, 2));
        assert_eq!(d.target, vec![3.0, 6.0, 9.0, 1.0, 2.0]);
        assert_eq!(d.features.row(1), vec![4.0, 5.0]);
    }

    #[test]
    fn loads_whitespace_separated() {
        let f = write_tmp(" -2.3 0.568  4.78\t0.00\n-2.3 0.568 4.78 0.11\n\n1 2 3 4\n");
        let d = load_csv(f.path()).unwrap();
        assert_eq!((d.n_rows(), d.n_features()), (3, 3));
        assert_eq!(d.target, vec![0.0, 0.11, 4.0]);
        assert_eq!(d.features.row(0), vec![-2.3, 0.568, 4.78]);
    }

    #[test]
    fn skips_header() {
        let f = write_tmp("f1,f2,y\n1,2,3\n4,5,6\n");
        let d = load_csv(f.path()).unwrap();
        assert_eq!((d.n_rows(), d.n_features()), (2, 2));
    }

    #[test]
    fn reports_bad_cells() {
        let f = write_tmp("1,2,3\n4,oops,6\n");
        match load_csv(f.path()).unwrap_err() {
            DataError::NotNumeric { row, column, .. } => assert_eq!((row, column), (2, 2)),
            e => panic!("unexpected {e}"),
        }
        let f = write_tmp("1,2,3\n4,5\n");
        assert!(matches!(
            load_csv(f.path()).unwrap_err(),
            DataError::Malformed { row: 2, .. }
        ));
        let f = write_tmp("");
        assert!(matches!(load_csv(f.path()).unwrap_err(), DataError::Empty));
        let f = write_tmp("a,b\n");
        assert!(matches!(load_csv(f.path()).unwrap_err(), DataError::Empty));
        assert!(matches!(
            load_csv("/definitely/not/here.csv").unwrap_err(),
            DataError::Io { .. }
        ));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = split(308, &mut rng).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (154, 77, 77));
        let s = split(4, &mut rng).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (2, 1, 1));
        let a = split(100, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = split(100, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = a.train.iter().chain(&a.validation).chain(&a.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert!(matches!(split(3, &mut rng), Err(DataError::TooFewRows(3))));
    }

    #[test]
    fn linear_scaling_examples() {
        let y = [1.0, 2.0, 3.0];
        assert_eq!(
            linear_scale(&y, &[2.0, 4.0, 6.0]),
            Scale {
                intercept: 0.0,
                slope: 0.5
            }
        );
        assert_eq!(
            linear_scale(&y, &[5.0; 3]),
            Scale {
                intercept: 2.0,
                slope: 0.0
            }
        );
        assert_eq!(
            linear_scale(&y, &y),
            Scale {
                intercept: 0.0,
                slope: 1.0
            }
        );
        assert_eq!(scaled_mse(&y, &[2.0, 4.0, 6.0]), 0.0);
        assert!((scaled_mse(&y, &[5.0; 3]) - variance(&y)).abs() < 1e-15);
        assert_eq!(scaled_mse(&y, &[1.0, f64::NAN, 2.0]), f64::INFINITY);
        assert_eq!(scaled_mse(&y, &[1.0, f64::INFINITY, 2.0]), f64::INFINITY);
    }

    #[test]
    fn nmse_examples() {
        let y = [1.0, 4.0, 2.0, 8.0];
        assert!((nmse(&y, &[0.3; 4]).unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(nmse(&y, &y).unwrap(), 0.0);
        assert!(matches!(nmse(&[2.0; 4], &y), Err(DataError::ConstantTarget)));
    }
}
