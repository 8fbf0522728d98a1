//! Shared dataset and selection-result records. A dataset splits its columns
//! into the target `y`, the active set `x` (candidates for selection), and
//! conditioning variables `z` that every selector partials out first.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::linalg;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("column '{name}' not found in header")]
    MissingColumn { name: String },
    #[error("column '{name}' listed more than once across target/conditioning roles")]
    ColumnRoleConflict { name: String },
    #[error("non-numeric cell at data row {row}, column '{column}': '{value}'")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("non-finite value at data row {row}, column '{column}'")]
    NonFinite { row: usize, column: String },
    #[error("need at least {} rows to condition on {m} columns, got {t}", m + 2)]
    Dimension { t: usize, m: usize },
    #[error("conditioning columns {columns:?} are linearly dependent on earlier ones")]
    RankDeficientConditioning { columns: Vec<usize> },
    #[error("row lengths differ: data row {row} has {got} fields, header has {want}")]
    RaggedRow { row: usize, got: usize, want: usize },
    #[error("dimension mismatch: y has {t} rows, {what} has {got}")]
    ShapeMismatch {
        t: usize,
        what: &'static str,
        got: usize,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Observations for one selection problem: target, candidate covariates, and
/// conditioning variables, all over the same `T` time points.
#[derive(Debug, Clone)]
pub struct TimeSeriesDataset {
    pub y: Array1<f64>,
    /// T×N active set; column order fixed at construction.
    pub x: Array2<f64>,
    /// T×m conditioning set; first column is the constant when `intercept`.
    pub z: Array2<f64>,
    pub y_name: String,
    pub x_names: Vec<String>,
    pub z_names: Vec<String>,
    /// Whether z's leading unit column was synthesized rather than loaded.
    pub intercept: bool,
    /// Raw active-set columns with zero sample variance (constant columns).
    pub zero_variance: Vec<bool>,
    /// Optional integer time labels; never serialized.
    pub timestamps: Option<Vec<i64>>,
}

impl TimeSeriesDataset {
    /// Validating constructor used by the data generator and tests.
    pub fn new(
        y: Array1<f64>,
        x: Array2<f64>,
        z: Array2<f64>,
        y_name: impl Into<String>,
        x_names: Vec<String>,
        z_names: Vec<String>,
        intercept: bool,
    ) -> Result<Self, DataError> {
        let t = y.len();
        if x.nrows() != t {
            return Err(DataError::ShapeMismatch {
                t,
                what: "x",
                got: x.nrows(),
            });
        }
        if z.nrows() != t {
            return Err(DataError::ShapeMismatch {
                t,
                what: "z",
                got: z.nrows(),
            });
        }
        if t < z.ncols() + 2 {
            return Err(DataError::Dimension { t, m: z.ncols() });
        }
        for (row, &v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(DataError::NonFinite {
                    row: row + 1,
                    column: y_name.into(),
                });
            }
        }
        for ((row, col), &v) in x.indexed_iter() {
            if !v.is_finite() {
                return Err(DataError::NonFinite {
                    row: row + 1,
                    column: x_names[col].clone(),
                });
            }
        }
        for ((row, col), &v) in z.indexed_iter() {
            if !v.is_finite() {
                return Err(DataError::NonFinite {
                    row: row + 1,
                    column: z_names[col].clone(),
                });
            }
        }
        let zero_variance = (0..x.ncols())
            .map(|j| {
                let col = x.column(j);
                col.iter().all(|&v| v == col[0])
            })
            .collect();
        Ok(Self {
            y,
            x,
            z,
            y_name: y_name.into(),
            x_names,
            z_names,
            intercept,
            zero_variance,
            timestamps: None,
        })
    }

    /// Dataset whose only conditioning variable is a constant.
    pub fn with_intercept_only(
        y: Array1<f64>,
        x: Array2<f64>,
        y_name: impl Into<String>,
        x_names: Vec<String>,
    ) -> Result<Self, DataError> {
        let t = y.len();
        let z = Array2::ones((t, 1));
        Self::new(y, x, z, y_name, x_names, vec!["const".into()], true)
    }

    pub fn t_len(&self) -> usize {
        self.y.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.x.ncols()
    }

    pub fn m_conditioning(&self) -> usize {
        self.z.ncols()
    }
}

/// Which selection procedure produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectorTag {
    Ocmt,
    Lasso,
    ALasso,
    Boosting,
}

impl std::fmt::Display for SelectorTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SelectorTag::Ocmt => "ocmt",
            SelectorTag::Lasso => "lasso",
            SelectorTag::ALasso => "alasso",
            SelectorTag::Boosting => "boosting",
        })
    }
}

/// Outcome of one selector run over a dataset's active set.
#[derive(Debug, Clone)]
pub struct SelectionResult {
    /// Per-covariate inclusion indicator, length N.
    pub included: Vec<bool>,
    /// Per-covariate t-ratios where the selector computes them.
    pub t_stats: Option<Array1<f64>>,
    /// Threshold the t-ratios were compared against.
    pub critical_value: Option<f64>,
    /// Selector-native coefficients, zero for excluded covariates.
    pub coefficients: Option<Array1<f64>>,
    pub selector_tag: SelectorTag,
    /// Numeric side-channel: chosen penalty, stopping iteration, skipped
    /// degenerate columns, and similar.
    pub diagnostics: BTreeMap<String, f64>,
}

impl SelectionResult {
    pub fn included_indices(&self) -> Vec<usize> {
        self.included
            .iter()
            .enumerate()
            .filter_map(|(i, &inc)| inc.then_some(i))
            .collect()
    }

    /// Number of selected covariates.
    pub fn count(&self) -> usize {
        self.included.iter().filter(|&&b| b).count()
    }

    /// Internal consistency: excluded covariates carry zero coefficients and,
    /// for threshold selectors, inclusion matches the |t| > c rule exactly.
    pub fn check_consistency(&self) -> bool {
        if let Some(coefs) = &self.coefficients {
            for (i, &inc) in self.included.iter().enumerate() {
                if !inc && coefs[i] != 0.0 {
                    return false;
                }
            }
        }
        if let (Some(ts), Some(cv)) = (&self.t_stats, self.critical_value) {
            if self.selector_tag == SelectorTag::Ocmt {
                for (i, &inc) in self.included.iter().enumerate() {
                    let skipped = self
                        .diagnostics
                        .get(&format!("skipped_degenerate_{i}"))
                        .is_some();
                    if !skipped && inc != (ts[i].abs() > cv) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Filtered variables after partialling out the conditioning set, plus an
/// orthonormal basis of the conditioning span.
#[derive(Debug, Clone)]
pub struct ProjectedData {
    pub y_tilde: Array1<f64>,
    pub x_tilde: Array2<f64>,
    /// T×m orthonormal basis of span(z); empty when m = 0.
    pub basis: Array2<f64>,
    /// Active-set columns numerically zero after projection; selectors must
    /// skip these.
    pub degenerate_columns: Vec<usize>,
}

/// Partial out the conditioning set: returns residuals of y and every active
/// column after regression on z.
pub fn partial_out(data: &TimeSeriesDataset) -> Result<ProjectedData, DataError> {
    let t = data.t_len();
    let m = data.m_conditioning();
    if m == 0 {
        let degenerate = norm_degenerate(&data.x, None);
        return Ok(ProjectedData {
            y_tilde: data.y.clone(),
            x_tilde: data.x.clone(),
            basis: Array2::zeros((t, 0)),
            degenerate_columns: degenerate,
        });
    }
    let basis = linalg::orthonormal_basis(&data.z)
        .map_err(|k| DataError::RankDeficientConditioning { columns: vec![k] })?;
    let y_tilde = &data.y - &basis.dot(&basis.t().dot(&data.y));
    let x_tilde = &data.x - &basis.dot(&basis.t().dot(&data.x));
    let degenerate = norm_degenerate(&x_tilde, Some(&data.x));
    Ok(ProjectedData {
        y_tilde,
        x_tilde,
        basis,
        degenerate_columns: degenerate,
    })
}

/// Columns whose norm collapsed relative to the raw column (or is exactly
/// zero when no raw reference applies).
fn norm_degenerate(x: &Array2<f64>, raw: Option<&Array2<f64>>) -> Vec<usize> {
    let mut out = Vec::new();
    for j in 0..x.ncols() {
        let n: f64 = x.column(j).iter().map(|v| v * v).sum::<f64>().sqrt();
        let collapsed = match raw {
            Some(r) => {
                let orig: f64 = r.column(j).iter().map(|v| v * v).sum::<f64>().sqrt();
                n <= linalg::RANK_TOL * orig.max(f64::MIN_POSITIVE)
            }
            None => n == 0.0,
        };
        if collapsed {
            out.push(j);
        }
    }
    out
}

/// Load a headered CSV: `target_col` becomes y, `conditioning_cols` become z
/// (prefixed by a unit column iff `intercept`), every remaining column joins
/// the active set in file order.
pub fn load_csv(
    path: impl AsRef<Path>,
    target_col: &str,
    conditioning_cols: &[String],
    intercept: bool,
) -> Result<TimeSeriesDataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|s| s.to_string())
        .collect();

    let find = |name: &str| -> Result<usize, DataError> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn { name: name.into() })
    };
    let target_idx = find(target_col)?;
    let mut cond_idx = Vec::with_capacity(conditioning_cols.len());
    for name in conditioning_cols {
        let idx = find(name)?;
        if idx == target_idx || cond_idx.contains(&idx) {
            return Err(DataError::ColumnRoleConflict { name: name.clone() });
        }
        cond_idx.push(idx);
    }
    let x_idx: Vec<usize> = (0..header.len())
        .filter(|i| *i != target_idx && !cond_idx.contains(i))
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(DataError::RaggedRow {
                row: row_no + 1,
                got: record.len(),
                want: header.len(),
            });
        }
        let mut row = Vec::with_capacity(header.len());
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| DataError::NonNumericCell {
                row: row_no + 1,
                column: header[col].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DataError::NonFinite {
                    row: row_no + 1,
                    column: header[col].clone(),
                });
            }
            row.push(v);
        }
        rows.push(row);
    }
    let t = rows.len();
    let m = cond_idx.len() + usize::from(intercept);
    if t < m + 2 {
        return Err(DataError::Dimension { t, m });
    }

    let y = Array1::from_iter(rows.iter().map(|r| r[target_idx]));
    let mut x = Array2::zeros((t, x_idx.len()));
    for (j, &src) in x_idx.iter().enumerate() {
        for (i, row) in rows.iter().enumerate() {
            x[[i, j]] = row[src];
        }
    }
    let mut z = Array2::zeros((t, m));
    let mut z_names = Vec::with_capacity(m);
    let mut offset = 0;
    if intercept {
        for i in 0..t {
            z[[i, 0]] = 1.0;
        }
        z_names.push("const".to_string());
        offset = 1;
    }
    for (j, &src) in cond_idx.iter().enumerate() {
        for (i, row) in rows.iter().enumerate() {
            z[[i, j + offset]] = row[src];
        }
        z_names.push(header[src].clone());
    }
    let x_names = x_idx.iter().map(|&i| header[i].clone()).collect();
    TimeSeriesDataset::new(y, x, z, header[target_idx].clone(), x_names, z_names, intercept)
}

/// Write a dataset back to CSV. Column order: target, loaded conditioning
/// columns (the synthesized constant is skipped), then the active set. Floats
/// print in shortest round-trip form, so save → load reproduces every bit.
pub fn save_csv(data: &TimeSeriesDataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let z_start = usize::from(data.intercept);
    let mut header = vec![data.y_name.clone()];
    header.extend(data.z_names[z_start..].iter().cloned());
    header.extend(data.x_names.iter().cloned());
    writer.write_record(&header)?;
    let mut buf = String::new();
    for i in 0..data.t_len() {
        let mut record = Vec::with_capacity(header.len());
        let push = |v: f64, buf: &mut String, record: &mut Vec<String>| {
            buf.clear();
            let _ = write!(buf, "{v}");
            record.push(buf.clone());
        };
        push(data.y[i], &mut buf, &mut record);
        for j in z_start..data.m_conditioning() {
            push(data.z[[i, j]], &mut buf, &mut record);
        }
        for j in 0..data.n_covariates() {
            push(data.x[[i, j]], &mut buf, &mut record);
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}
