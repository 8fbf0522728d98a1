//! One-covariate-at-a-time selection: a t-ratio per active column against a
//! multiple-testing critical value that grows with the number of candidates.
//! Single stage; covariates enter one at a time, never jointly.

use ndarray::ArrayView1;
use thiserror::Error;

use crate::data::{partial_out, DataError, SelectionResult, SelectorTag, TimeSeriesDataset};
use crate::normal::{inverse_cdf, InvalidProbability};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum TRatioError {
    #[error("covariate has zero sum of squares")]
    ZeroSumSquares,
    #[error("one-variable regression fits perfectly; residual variance is zero")]
    PerfectFit,
}

#[derive(Debug, Error)]
pub enum OcmtError {
    #[error("nominal size must lie in (0, 1], got {p}")]
    InvalidSize { p: f64 },
    #[error("exponent delta must be positive and finite, got {delta}")]
    InvalidDelta { delta: f64 },
    #[error("need at least one candidate covariate")]
    EmptyActiveSet,
    #[error("tail probability p/(2 N^delta) = {arg} exceeds 0.5")]
    QuantileOutOfRange { arg: f64 },
    #[error("covariate {index}: {source}")]
    Column { index: usize, source: TRatioError },
    #[error("every covariate is degenerate after projection")]
    NoUsableCovariates,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Quantile(#[from] InvalidProbability),
}

/// Tuning constants for the selection rule. `newey_west` switches the
/// t-ratio denominator to a HAC variance; the plain variance is the default
/// everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcmtConfig {
    pub p: f64,
    pub delta: f64,
    pub newey_west: bool,
}

impl Default for OcmtConfig {
    fn default() -> Self {
        Self {
            p: 0.05,
            delta: 1.0,
            newey_west: false,
        }
    }
}

impl OcmtConfig {
    /// Strict config invariants for selection use: 0 < p < 1, delta > 0.
    pub fn validate(&self) -> Result<(), OcmtError> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(OcmtError::InvalidSize { p: self.p });
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(OcmtError::InvalidDelta { delta: self.delta });
        }
        Ok(())
    }
}

/// t-ratio of the one-variable regression slope of `y_f` on `x_f`, both
/// already projected on the conditioning set. Residual variance uses the
/// plain 1/T normalization with no degrees-of-freedom correction.
pub fn t_ratio(y_f: ArrayView1<f64>, x_f: ArrayView1<f64>) -> Result<f64, TRatioError> {
    let t_len = y_f.len();
    debug_assert_eq!(t_len, x_f.len());
    let sxx: f64 = x_f.iter().map(|v| v * v).sum();
    if sxx <= 0.0 {
        return Err(TRatioError::ZeroSumSquares);
    }
    let sxy: f64 = x_f.iter().zip(y_f.iter()).map(|(x, y)| x * y).sum();
    let phi = sxy / sxx;
    let sigma2: f64 = y_f
        .iter()
        .zip(x_f.iter())
        .map(|(y, x)| {
            let e = y - phi * x;
            e * e
        })
        .sum::<f64>()
        / t_len as f64;
    if sigma2 <= 0.0 {
        return Err(TRatioError::PerfectFit);
    }
    Ok(sxy / (sigma2.sqrt() * sxx.sqrt()))
}

/// HAC bandwidth used by the robust t-ratio variant.
pub fn newey_west_bandwidth(t_len: usize) -> usize {
    (4.0 * (t_len as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

/// t-ratio with a Newey-West (Bartlett kernel) long-run variance for the
/// slope score, truncated at `newey_west_bandwidth`.
pub fn t_ratio_newey_west(
    y_f: ArrayView1<f64>,
    x_f: ArrayView1<f64>,
) -> Result<f64, TRatioError> {
    let t_len = y_f.len();
    debug_assert_eq!(t_len, x_f.len());
    let sxx: f64 = x_f.iter().map(|v| v * v).sum();
    if sxx <= 0.0 {
        return Err(TRatioError::ZeroSumSquares);
    }
    let sxy: f64 = x_f.iter().zip(y_f.iter()).map(|(x, y)| x * y).sum();
    let phi = sxy / sxx;
    let score: Vec<f64> = y_f
        .iter()
        .zip(x_f.iter())
        .map(|(y, x)| x * (y - phi * x))
        .collect();
    let bandwidth = newey_west_bandwidth(t_len);
    let mut s = score.iter().map(|g| g * g).sum::<f64>();
    for k in 1..=bandwidth.min(t_len.saturating_sub(1)) {
        let w = 1.0 - k as f64 / (bandwidth as f64 + 1.0);
        let gamma: f64 = (k..t_len).map(|t| score[t] * score[t - k]).sum();
        s += 2.0 * w * gamma;
    }
    if s <= 0.0 {
        return Err(TRatioError::PerfectFit);
    }
    Ok(sxy / s.sqrt())
}

/// Multiple-testing critical value: the (1 − p/(2 N^delta)) standard normal
/// quantile.
pub fn critical_value(p: f64, n: usize, delta: f64) -> Result<f64, OcmtError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(OcmtError::InvalidSize { p });
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(OcmtError::InvalidDelta { delta });
    }
    if n == 0 {
        return Err(OcmtError::EmptyActiveSet);
    }
    let tail = p / (2.0 * (n as f64).powf(delta));
    if tail > 0.5 {
        return Err(OcmtError::QuantileOutOfRange { arg: tail });
    }
    // evaluate at the lower tail and negate: forming 1 - tail directly would
    // round away ~1e-9 of accuracy for large N
    Ok(-inverse_cdf(tail)?)
}

/// Run the full selection rule over a dataset's active set: project out the
/// conditioning variables, compute each covariate's one-at-a-time t-ratio,
/// and include it when |t| strictly exceeds the critical value. Coefficients
/// are left unset; estimation is a separate stage.
pub fn ocmt_select(
    data: &TimeSeriesDataset,
    cfg: &OcmtConfig,
) -> Result<SelectionResult, OcmtError> {
    cfg.validate()?;
    let n = data.n_covariates();
    if n == 0 {
        return Err(OcmtError::EmptyActiveSet);
    }
    let proj = partial_out(data)?;
    if proj.degenerate_columns.len() == n {
        return Err(OcmtError::NoUsableCovariates);
    }
    let cv = critical_value(cfg.p, n, cfg.delta)?;
    let mut t_stats = ndarray::Array1::zeros(n);
    let mut included = vec![false; n];
    let mut diagnostics = std::collections::BTreeMap::new();
    for i in 0..n {
        if proj.degenerate_columns.contains(&i) {
            diagnostics.insert(format!("skipped_degenerate_{i}"), 1.0);
            continue;
        }
        let t = if cfg.newey_west {
            t_ratio_newey_west(proj.y_tilde.view(), proj.x_tilde.column(i))
        } else {
            t_ratio(proj.y_tilde.view(), proj.x_tilde.column(i))
        }
        .map_err(|source| OcmtError::Column { index: i, source })?;
        t_stats[i] = t;
        included[i] = t.abs() > cv;
    }
    let k_hat = included.iter().filter(|&&b| b).count();
    diagnostics.insert("k_hat".into(), k_hat as f64);
    diagnostics.insert("n_degenerate".into(), proj.degenerate_columns.len() as f64);
    let result = SelectionResult {
        included,
        t_stats: Some(t_stats),
        critical_value: Some(cv),
        coefficients: None,
        selector_tag: SelectorTag::Ocmt,
        diagnostics,
    };
    debug_assert!(result.check_consistency());
    Ok(result)
}
