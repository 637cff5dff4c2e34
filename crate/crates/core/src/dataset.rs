//! Tabular regression data: CSV loading, seeded train/test splits and
//! per-feature standardization.
//!
//! Feature matrices are stored column-major (`DMatrix<f64>`, one column per
//! feature) so that per-feature operations such as basis construction and
//! scaling touch contiguous memory.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default name of the target column in California Housing exports.
pub const DEFAULT_TARGET: &str = "MedHouseVal";

/// Feature order of the California Housing dataset.
pub const CALIFORNIA_FEATURES: [&str; 8] = [
    "MedInc",
    "HouseAge",
    "AveRooms",
    "AveBedrms",
    "Population",
    "AveOccup",
    "Latitude",
    "Longitude",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    target: DVector<f64>,
    feature_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, checking shapes and finiteness.
    pub fn new(
        features: DMatrix<f64>,
        target: DVector<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if features.nrows() != target.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                found: target.len(),
            });
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::DimensionMismatch {
                expected: features.ncols(),
                found: feature_names.len(),
            });
        }
        if features.nrows() < 2 {
            return Err(Error::TooFewRows {
                rows: features.nrows(),
                required: 2,
            });
        }
        for (c, col) in features.column_iter().enumerate() {
            if let Some(r) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    row: r + 1,
                    column: feature_names[c].clone(),
                });
            }
        }
        if let Some(r) = target.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: r + 1,
                column: "<target>".into(),
            });
        }
        Ok(Self {
            features,
            target,
            feature_names,
        })
    }

    /// Convenience constructor with generated `x0, x1, ...` names.
    pub fn from_columns(features: DMatrix<f64>, target: DVector<f64>) -> Result<Self> {
        let names = (0..features.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(features, target, names)
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn target(&self) -> &DVector<f64> {
        &self.target
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Rows `indices` in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            target: self.target.select_rows(indices),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Splits into the train+val and test partitions described by `split`.
    pub fn partition(&self, split: &Split) -> Result<(TrainingData, TestData)> {
        let max = split
            .train_val_indices
            .iter()
            .chain(&split.test_indices)
            .copied()
            .max()
            .unwrap_or(0);
        if max >= self.n_rows() {
            return Err(Error::InvalidSplit(format!(
                "index {max} out of range for {} rows",
                self.n_rows()
            )));
        }
        Ok((
            TrainingData {
                data: self.subset(&split.train_val_indices),
                rows: split.train_val_indices.clone(),
            },
            TestData {
                data: self.subset(&split.test_indices),
                rows: split.test_indices.clone(),
            },
        ))
    }
}

/// The train+validation partition. Model search only ever sees this type.
#[derive(Debug, Clone)]
pub struct TrainingData {
    data: Dataset,
    rows: Vec<usize>,
}

impl TrainingData {
    /// Wraps a whole dataset as training data (no held-out rows).
    pub fn whole(data: Dataset) -> Self {
        let rows = (0..data.n_rows()).collect();
        Self { data, rows }
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// Row indices into the original dataset.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }
}

/// The held-out test partition, used only for final scoring.
#[derive(Debug, Clone)]
pub struct TestData {
    data: Dataset,
    rows: Vec<usize>,
}

impl TestData {
    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub(crate) fn overlaps(&self, training: &TrainingData) -> bool {
        let train: HashSet<usize> = training.rows.iter().copied().collect();
        self.rows.iter().any(|r| train.contains(r))
    }
}

/// Loads a headered, comma-separated numeric file. Every column except
/// `target_column` becomes a feature, in header order.
///
/// Row numbers in errors are 1-based data rows (the header is not counted).
pub fn load_csv(path: impl AsRef<Path>, target_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, target_column)
}

/// Like [`load_csv`], reading from any byte source.
pub fn read_csv(reader: impl std::io::Read, target_column: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let target_idx = header
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::MissingTargetColumn(target_column.to_owned()))?;
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let n_features = feature_names.len();
    let mut values: Vec<f64> = Vec::new();
    let mut target = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: header[c].clone(),
                value: cell.to_owned(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row,
                    column: header[c].clone(),
                });
            }
            if c == target_idx {
                target.push(v);
            } else {
                values.push(v);
            }
        }
    }
    let n_rows = target.len();
    let features = DMatrix::from_row_slice(n_rows, n_features, &values);
    Dataset::new(features, DVector::from_vec(target), feature_names)
}

/// Train+val / test row partition, reproducible from its seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train_val_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
}

/// Shuffles `0..n_rows` with a ChaCha8 stream seeded by `seed` and takes the
/// first `round(test_fraction * n_rows)` rows as the test set. Both index
/// lists are returned sorted.
pub fn make_split(n_rows: usize, test_fraction: f64, seed: u64) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidSplit(format!(
            "test fraction {test_fraction} not in (0, 1)"
        )));
    }
    let n_test = (test_fraction * n_rows as f64).round() as usize;
    if n_test == 0 || n_test >= n_rows {
        return Err(Error::InvalidSplit(format!(
            "{n_rows} rows at fraction {test_fraction} leave an empty partition"
        )));
    }
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test_indices = order[..n_test].to_vec();
    let mut train_val_indices = order[n_test..].to_vec();
    test_indices.sort_unstable();
    train_val_indices.sort_unstable();
    Ok(Split {
        train_val_indices,
        test_indices,
        seed,
    })
}

/// Standardization parameters for one feature column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub column: usize,
    pub mean: f64,
    /// Population standard deviation (divides by n).
    pub std_dev: f64,
}

impl ColumnScale {
    /// Population mean and standard deviation of `values`.
    pub fn fit(column: usize, values: impl ExactSizeIterator<Item = f64> + Clone) -> Result<Self> {
        let n = values.len() as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std_dev = var.sqrt();
        // Constant columns leave rounding residue in the variance.
        if std_dev.is_nan() || std_dev <= 1e-12 * mean.abs().max(1.0) {
            return Err(Error::ZeroVariance { column });
        }
        Ok(Self {
            column,
            mean,
            std_dev,
        })
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.std_dev
    }

    #[inline]
    pub fn invert(&self, z: f64) -> f64 {
        z * self.std_dev + self.mean
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalerState {
    pub columns: Vec<ColumnScale>,
}

impl ScalerState {
    pub fn get(&self, column: usize) -> Option<&ColumnScale> {
        self.columns.iter().find(|c| c.column == column)
    }
}

/// Fits z-score parameters for `columns` using every row of `features`.
/// Pass only training rows.
pub fn fit_scaler(features: &DMatrix<f64>, columns: &[usize]) -> Result<ScalerState> {
    let mut out = Vec::with_capacity(columns.len());
    for &c in columns {
        if c >= features.ncols() {
            return Err(Error::DimensionMismatch {
                expected: features.ncols(),
                found: c + 1,
            });
        }
        out.push(ColumnScale::fit(c, features.column(c).iter().copied())?);
    }
    Ok(ScalerState { columns: out })
}

/// Standardizes the scaled columns; other columns are copied unchanged.
pub fn apply_scaler(state: &ScalerState, features: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = features.clone();
    for s in &state.columns {
        out.column_mut(s.column).apply(|v| *v = s.apply(*v));
    }
    out
}

/// Inverse of [`apply_scaler`].
pub fn invert_scaler(state: &ScalerState, features: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = features.clone();
    for s in &state.columns {
        out.column_mut(s.column).apply(|v| *v = s.invert(*v));
    }
    out
}
