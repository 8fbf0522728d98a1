//! Post-selection least-squares estimation and one-step-ahead forecasting.
//! Selection and estimation can each run on raw or exponentially
//! down-weighted observations; a weighting grid produces one forecast per λ
//! and the reported forecast is their simple average. The forecast-period
//! regressors always enter unweighted (the newest observation has weight 1).

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::boosting::{boost_select, BoostConfig, BoostError};
use crate::data::{DataError, SelectionResult, SelectorTag, TimeSeriesDataset};
use crate::downweight::{apply_weights, GridLabel, WeightError, WeightScheme};
use crate::lasso::{adaptive_lasso_select, lasso_select, LassoError};
use crate::linalg;
use crate::ocmt::{ocmt_select, OcmtConfig, OcmtError};

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("post-selection design is rank deficient; collinear columns: {columns:?}")]
    RankDeficient { columns: Vec<String> },
    #[error("dimension mismatch: expected {want} values, got {got}")]
    DimensionMismatch { want: usize, got: usize },
    #[error("forecast is not finite")]
    NonFinite,
    #[error("fixed selection mask has {got} entries for {want} covariates")]
    BadFixedMask { want: usize, got: usize },
    #[error("weighting leg lambda = {lambda} failed: {source}")]
    Leg {
        lambda: f64,
        #[source]
        source: Box<ForecastError>,
    },
    #[error(transparent)]
    Ocmt(#[from] OcmtError),
    #[error(transparent)]
    Lasso(#[from] LassoError),
    #[error(transparent)]
    Boost(#[from] BoostError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Where down-weighting enters the select-then-estimate pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Raw observations at both stages; the grid is ignored.
    NoWeighting,
    /// Selection on raw observations once, estimation per grid λ.
    SelectUnweightedEstimateWeighted,
    /// Both stages rerun per grid λ.
    SelectAndEstimateWeighted,
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Protocol::NoWeighting => "none",
            Protocol::SelectUnweightedEstimateWeighted => "est-weighted",
            Protocol::SelectAndEstimateWeighted => "both-weighted",
        })
    }
}

/// Which selector the pipeline runs. `Fixed` pins the selection to a known
/// mask (the infeasible benchmark that knows the signals).
#[derive(Debug, Clone)]
pub enum SelectorSpec {
    Ocmt(OcmtConfig),
    Lasso { folds: usize, seed: u64 },
    ALasso { folds: usize, seed: u64 },
    Boosting(BoostConfig),
    Fixed(Vec<bool>),
}

impl SelectorSpec {
    pub fn run(&self, data: &TimeSeriesDataset) -> Result<SelectionResult, ForecastError> {
        match self {
            SelectorSpec::Ocmt(cfg) => Ok(ocmt_select(data, cfg)?),
            SelectorSpec::Lasso { folds, seed } => Ok(lasso_select(data, *folds, *seed)?),
            SelectorSpec::ALasso { folds, seed } => {
                Ok(adaptive_lasso_select(data, *folds, *seed)?)
            }
            SelectorSpec::Boosting(cfg) => Ok(boost_select(data, cfg)?),
            SelectorSpec::Fixed(mask) => {
                if mask.len() != data.n_covariates() {
                    return Err(ForecastError::BadFixedMask {
                        want: data.n_covariates(),
                        got: mask.len(),
                    });
                }
                Ok(SelectionResult {
                    included: mask.clone(),
                    t_stats: None,
                    critical_value: None,
                    coefficients: None,
                    selector_tag: SelectorTag::Ocmt,
                    diagnostics: std::collections::BTreeMap::new(),
                })
            }
        }
    }

    pub fn tag(&self) -> SelectorTag {
        match self {
            SelectorSpec::Ocmt(_) | SelectorSpec::Fixed(_) => SelectorTag::Ocmt,
            SelectorSpec::Lasso { .. } => SelectorTag::Lasso,
            SelectorSpec::ALasso { .. } => SelectorTag::ALasso,
            SelectorSpec::Boosting(_) => SelectorTag::Boosting,
        }
    }
}

/// Least squares of y on [Z, selected X columns] over the supplied (possibly
/// already weighted) observations. Coefficients come back in that column
/// order: conditioning variables first.
pub fn ls_estimate(
    data: &TimeSeriesDataset,
    selection: &SelectionResult,
) -> Result<Array1<f64>, ForecastError> {
    let t = data.t_len();
    let m = data.m_conditioning();
    let sel = selection.included_indices();
    let mut w = Array2::zeros((t, m + sel.len()));
    for j in 0..m {
        for i in 0..t {
            w[[i, j]] = data.z[[i, j]];
        }
    }
    for (jj, &j) in sel.iter().enumerate() {
        for i in 0..t {
            w[[i, m + jj]] = data.x[[i, j]];
        }
    }
    linalg::least_squares(&w, &data.y).map_err(|dep| {
        let columns = dep
            .into_iter()
            .map(|c| {
                if c < m {
                    data.z_names[c].clone()
                } else {
                    data.x_names[sel[c - m]].clone()
                }
            })
            .collect();
        ForecastError::RankDeficient { columns }
    })
}

/// Inner product of the estimated coefficients with the forecast-period
/// regressors, conditioning values first.
pub fn forecast_one_step(
    coefficients: &Array1<f64>,
    z_next: &Array1<f64>,
    x_next_selected: &Array1<f64>,
) -> Result<f64, ForecastError> {
    let want = z_next.len() + x_next_selected.len();
    if coefficients.len() != want {
        return Err(ForecastError::DimensionMismatch {
            want,
            got: coefficients.len(),
        });
    }
    let mut f = 0.0;
    for (j, v) in z_next.iter().enumerate() {
        f += coefficients[j] * v;
    }
    for (j, v) in x_next_selected.iter().enumerate() {
        f += coefficients[z_next.len() + j] * v;
    }
    if !f.is_finite() {
        return Err(ForecastError::NonFinite);
    }
    Ok(f)
}

/// One λ leg of a grid forecast.
#[derive(Debug, Clone)]
pub struct LambdaLeg {
    pub lambda: f64,
    pub point_forecast: f64,
    pub included: Vec<bool>,
    /// Estimation coefficients over [Z, selected X], conditioning first.
    pub coefficients: Vec<f64>,
}

/// A (possibly grid-averaged) one-step forecast with its per-λ legs.
#[derive(Debug, Clone)]
pub struct ForecastRecord {
    pub point_forecast: f64,
    pub realized: Option<f64>,
    pub scheme_label: GridLabel,
    pub protocol: Protocol,
    pub selector_tag: SelectorTag,
    pub legs: Vec<LambdaLeg>,
    /// Set when the grid collapses to a single λ; empty otherwise (per-λ
    /// coefficients live in the legs).
    pub estimation_coefficients: Vec<f64>,
}

impl ForecastRecord {
    pub fn squared_error(&self) -> Option<f64> {
        self.realized.map(|r| {
            let e = r - self.point_forecast;
            e * e
        })
    }
}

fn leg_error(lambda: f64, source: ForecastError) -> ForecastError {
    ForecastError::Leg {
        lambda,
        source: Box::new(source),
    }
}

/// Run the full select-estimate-forecast pipeline for every λ in the scheme
/// and average the forecasts. `x_next` carries all N forecast-period
/// covariates; each leg picks out its own selected entries.
#[allow(clippy::too_many_arguments)]
pub fn grid_forecast(
    data: &TimeSeriesDataset,
    protocol: Protocol,
    selector: &SelectorSpec,
    scheme: &WeightScheme,
    z_next: &Array1<f64>,
    x_next: &Array1<f64>,
    realized: Option<f64>,
) -> Result<ForecastRecord, ForecastError> {
    if x_next.len() != data.n_covariates() {
        return Err(ForecastError::DimensionMismatch {
            want: data.n_covariates(),
            got: x_next.len(),
        });
    }
    if z_next.len() != data.m_conditioning() {
        return Err(ForecastError::DimensionMismatch {
            want: data.m_conditioning(),
            got: z_next.len(),
        });
    }
    let (grid, label): (&[f64], GridLabel) = match protocol {
        Protocol::NoWeighting => (&[1.0], GridLabel::None),
        _ => (&scheme.grid, scheme.label),
    };
    // selection shared across legs when it runs on raw observations
    let shared_selection = match protocol {
        Protocol::SelectAndEstimateWeighted => None,
        _ => Some(selector.run(data)?),
    };
    let mut legs = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let weighted = if lambda == 1.0 {
            None
        } else {
            Some(apply_weights(data, lambda).map_err(|e| leg_error(lambda, e.into()))?)
        };
        let est_data = match &weighted {
            Some(w) => w.as_dataset(),
            None => data.clone(),
        };
        let selection = match &shared_selection {
            Some(s) => s.clone(),
            None => selector
                .run(&est_data)
                .map_err(|e| leg_error(lambda, e))?,
        };
        let coefs = ls_estimate(&est_data, &selection).map_err(|e| leg_error(lambda, e))?;
        let sel_idx = selection.included_indices();
        let x_sel = Array1::from_iter(sel_idx.iter().map(|&j| x_next[j]));
        let f = forecast_one_step(&coefs, z_next, &x_sel).map_err(|e| leg_error(lambda, e))?;
        legs.push(LambdaLeg {
            lambda,
            point_forecast: f,
            included: selection.included.clone(),
            coefficients: coefs.to_vec(),
        });
    }
    let point_forecast = legs.iter().map(|l| l.point_forecast).sum::<f64>() / legs.len() as f64;
    if !point_forecast.is_finite() {
        return Err(ForecastError::NonFinite);
    }
    let estimation_coefficients = if legs.len() == 1 {
        legs[0].coefficients.clone()
    } else {
        Vec::new()
    };
    Ok(ForecastRecord {
        point_forecast,
        realized,
        scheme_label: label,
        protocol,
        selector_tag: selector.tag(),
        legs,
        estimation_coefficients,
    })
}
