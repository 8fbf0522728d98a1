//! Lasso and adaptive Lasso selectors. The pipeline is: partial out the
//! conditioning set, normalize each filtered column to unit length, descend a
//! 100-point log-spaced penalty path with warm starts, pick the penalty by
//! K-fold cross-validation, refit on the full sample, and unscale.
//!
//! The penalized objective is ‖ỹ − X̃*γ‖₂² + φ‖γ‖₁ exactly as written, so the
//! coordinate-descent soft threshold is φ/2 and penalties twice the path head
//! kill every coefficient; the path head itself is max_i |x̃*_i′ỹ|.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::{partial_out, DataError, SelectionResult, SelectorTag, TimeSeriesDataset};
use crate::linalg;

/// Path length, penalty floor ratio, coordinate-descent tolerances, and the
/// coefficient magnitude that counts as inclusion.
pub const PATH_LEN: usize = 100;
pub const PATH_FLOOR: f64 = 0.001;
pub const CD_TOL: f64 = 1e-7;
pub const CD_MAX_SWEEPS: usize = 100_000;
pub const INCLUSION_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum LassoError {
    #[error("column {index} has zero norm and cannot be normalized")]
    ZeroNormColumn { index: usize },
    #[error("coordinate descent did not converge within {sweeps} sweeps")]
    NonConvergence {
        sweeps: usize,
        last_iterate: Box<Array1<f64>>,
    },
    #[error("penalty must be non-negative and finite, got {phi}")]
    InvalidPenalty { phi: f64 },
    #[error("path head must be positive and finite, got {phi_max}")]
    ZeroPathHead { phi_max: f64 },
    #[error("fold count {k} invalid for {t} observations (need 2 <= K <= T)")]
    InvalidFolds { k: usize, t: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Soft-thresholding operator: shrink toward zero by `tau`, clamping at zero.
pub fn soft_threshold(z: f64, tau: f64) -> f64 {
    if z > tau {
        z - tau
    } else if z < -tau {
        z + tau
    } else {
        0.0
    }
}

/// 100 log-spaced penalties descending from `phi_max` to `0.001 * phi_max`.
#[derive(Debug, Clone)]
pub struct PenaltyPath {
    pub values: Vec<f64>,
    pub phi_max: f64,
    pub phi_min: f64,
}

impl PenaltyPath {
    pub fn new(phi_max: f64) -> Result<Self, LassoError> {
        if !(phi_max > 0.0 && phi_max.is_finite()) {
            return Err(LassoError::ZeroPathHead { phi_max });
        }
        let phi_min = PATH_FLOOR * phi_max;
        let values = (0..PATH_LEN)
            .map(|i| phi_max * PATH_FLOOR.powf(i as f64 / (PATH_LEN - 1) as f64))
            .collect();
        Ok(Self {
            values,
            phi_max,
            phi_min,
        })
    }

    /// Path head from the normalized design: max_i |x_i′y|.
    pub fn from_correlations(y: &Array1<f64>, x: &Array2<f64>) -> Result<Self, LassoError> {
        let phi_max = (0..x.ncols())
            .map(|j| x.column(j).dot(y).abs())
            .fold(0.0, f64::max);
        Self::new(phi_max)
    }
}

/// Fold labels 1..=K assigned cyclically then shuffled (Fisher-Yates).
#[derive(Debug, Clone)]
pub struct CvPlan {
    pub k: usize,
    pub fold_assignment: Vec<usize>,
}

impl CvPlan {
    pub fn new(t: usize, k: usize, rng: &mut impl Rng) -> Result<Self, LassoError> {
        if k < 2 || k > t {
            return Err(LassoError::InvalidFolds { k, t });
        }
        let mut fold_assignment: Vec<usize> = (0..t).map(|i| (i % k) + 1).collect();
        fold_assignment.shuffle(rng);
        Ok(Self { k, fold_assignment })
    }

    pub fn fold_rows(&self, fold: usize) -> Vec<usize> {
        self.fold_assignment
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| (f == fold).then_some(i))
            .collect()
    }
}

/// Divide each column by its Euclidean norm; returns the normalized matrix
/// and the norms for later unscaling.
pub fn normalize_columns(x: &Array2<f64>) -> Result<(Array2<f64>, Array1<f64>), LassoError> {
    let n = x.ncols();
    let mut out = x.clone();
    let mut norms = Array1::zeros(n);
    for j in 0..n {
        let norm: f64 = x.column(j).iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 0.0 {
            return Err(LassoError::ZeroNormColumn { index: j });
        }
        norms[j] = norm;
        for i in 0..x.nrows() {
            out[[i, j]] /= norm;
        }
    }
    Ok((out, norms))
}

/// The penalized objective evaluated directly from residuals; used for
/// monotonicity checks.
pub fn penalized_objective(y: &Array1<f64>, x: &Array2<f64>, gamma: &Array1<f64>, phi: f64) -> f64 {
    let resid = y - &x.dot(gamma);
    resid.iter().map(|e| e * e).sum::<f64>() + phi * gamma.iter().map(|g| g.abs()).sum::<f64>()
}

/// Precomputed sufficient statistics for cyclic coordinate descent: Gram
/// matrix, initial correlations, and the target's squared norm.
struct CdProblem {
    g: Array2<f64>,
    c0: Array1<f64>,
    yty: f64,
}

impl CdProblem {
    fn new(y: &Array1<f64>, x: &Array2<f64>) -> Self {
        Self {
            g: x.t().dot(x),
            c0: x.t().dot(y),
            yty: y.dot(y),
        }
    }

    /// Copy with the given rows removed from the sufficient statistics
    /// (training complement of one CV fold).
    fn without_rows(&self, y: &Array1<f64>, x: &Array2<f64>, rows: &[usize]) -> Self {
        let n = x.ncols();
        let mut g = self.g.clone();
        let mut c0 = self.c0.clone();
        let mut yty = self.yty;
        for &t in rows {
            yty -= y[t] * y[t];
            for j in 0..n {
                c0[j] -= x[[t, j]] * y[t];
                for k in 0..n {
                    g[[j, k]] -= x[[t, j]] * x[[t, k]];
                }
            }
        }
        Self { g, c0, yty }
    }

    fn objective(&self, gamma: &Array1<f64>, phi: f64) -> f64 {
        let quad = gamma.dot(&self.g.dot(gamma));
        self.yty - 2.0 * gamma.dot(&self.c0) + quad
            + phi * gamma.iter().map(|g| g.abs()).sum::<f64>()
    }

    /// Cyclic coordinate descent from `gamma` (warm start) at penalty `phi`.
    /// Maintains c_j = x_j′(y − Xγ) under rank-one updates.
    fn solve(&self, phi: f64, gamma: Array1<f64>) -> Result<Array1<f64>, LassoError> {
        self.solve_traced(phi, gamma, None)
    }

    fn solve_traced(
        &self,
        phi: f64,
        mut gamma: Array1<f64>,
        mut sweeps_out: Option<&mut Vec<Array1<f64>>>,
    ) -> Result<Array1<f64>, LassoError> {
        let n = gamma.len();
        let mut c = self.c0.clone();
        for j in 0..n {
            if gamma[j] != 0.0 {
                let gj = gamma[j];
                for k in 0..n {
                    c[k] -= self.g[[k, j]] * gj;
                }
            }
        }
        let tau = phi / 2.0;
        let mut prev_obj = f64::INFINITY;
        for sweep in 0..CD_MAX_SWEEPS {
            let mut max_change = 0.0_f64;
            for j in 0..n {
                let gjj = self.g[[j, j]];
                if gjj <= 1e-12 {
                    continue; // column vanished on these rows; leave at zero
                }
                let zj = c[j] + gjj * gamma[j];
                let new = soft_threshold(zj, tau) / gjj;
                let delta = new - gamma[j];
                if delta != 0.0 {
                    gamma[j] = new;
                    for k in 0..n {
                        c[k] -= self.g[[k, j]] * delta;
                    }
                    max_change = max_change.max(delta.abs());
                }
            }
            if cfg!(debug_assertions) {
                let obj = self.objective(&gamma, phi);
                debug_assert!(
                    obj <= prev_obj + 1e-9 * (1.0 + prev_obj.abs()),
                    "objective rose from {prev_obj} to {obj} in sweep {sweep}"
                );
                prev_obj = obj;
            }
            if let Some(trace) = sweeps_out.as_deref_mut() {
                trace.push(gamma.clone());
            }
            if max_change < CD_TOL {
                return Ok(gamma);
            }
        }
        Err(LassoError::NonConvergence {
            sweeps: CD_MAX_SWEEPS,
            last_iterate: Box::new(gamma),
        })
    }
}

/// Penalized fit from a cold start; inputs are already filtered and
/// normalized.
pub fn lasso_fit(y: &Array1<f64>, x: &Array2<f64>, phi: f64) -> Result<Array1<f64>, LassoError> {
    if !(phi >= 0.0 && phi.is_finite()) {
        return Err(LassoError::InvalidPenalty { phi });
    }
    CdProblem::new(y, x).solve(phi, Array1::zeros(x.ncols()))
}

/// Like `lasso_fit`, but also returns the iterate after every coordinate
/// sweep so callers can watch the descent.
pub fn lasso_fit_sweeps(
    y: &Array1<f64>,
    x: &Array2<f64>,
    phi: f64,
) -> Result<(Array1<f64>, Vec<Array1<f64>>), LassoError> {
    if !(phi >= 0.0 && phi.is_finite()) {
        return Err(LassoError::InvalidPenalty { phi });
    }
    let mut sweeps = Vec::new();
    let fit = CdProblem::new(y, x).solve_traced(phi, Array1::zeros(x.ncols()), Some(&mut sweeps))?;
    Ok((fit, sweeps))
}

/// Warm-start fits at every path value, head to tail. Returns one coefficient
/// vector per penalty.
fn path_fits(problem: &CdProblem, path: &PenaltyPath, n: usize) -> Result<Vec<Array1<f64>>, LassoError> {
    let mut fits = Vec::with_capacity(path.values.len());
    let mut warm = Array1::zeros(n);
    for &phi in &path.values {
        warm = problem.solve(phi, warm)?;
        fits.push(warm.clone());
    }
    Ok(fits)
}

/// K-fold cross-validation over a penalty path. Returns the chosen penalty
/// and the mean squared hold-out error at every path point; ties in the
/// minimum go to the larger penalty (the path scan keeps the first strict
/// improvement).
pub fn kfold_cv(
    y: &Array1<f64>,
    x: &Array2<f64>,
    path: &PenaltyPath,
    k: usize,
    seed: u64,
) -> Result<(f64, Vec<f64>), LassoError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    kfold_cv_with_rng(y, x, path, k, &mut rng)
}

fn kfold_cv_with_rng(
    y: &Array1<f64>,
    x: &Array2<f64>,
    path: &PenaltyPath,
    k: usize,
    rng: &mut impl Rng,
) -> Result<(f64, Vec<f64>), LassoError> {
    let t = y.len();
    let n = x.ncols();
    let plan = CvPlan::new(t, k, rng)?;
    let full = CdProblem::new(y, x);
    let mut total_se = vec![0.0_f64; path.values.len()];
    for fold in 1..=k {
        let rows = plan.fold_rows(fold);
        let train = full.without_rows(y, x, &rows);
        let fits = path_fits(&train, path, n)?;
        for (j, gamma) in fits.iter().enumerate() {
            for &tr in &rows {
                let pred: f64 = (0..n).map(|c| x[[tr, c]] * gamma[c]).sum();
                let e = y[tr] - pred;
                total_se[j] += e * e;
            }
        }
    }
    let cv_mse: Vec<f64> = total_se.iter().map(|s| s / t as f64).collect();
    let mut best = 0;
    for j in 1..cv_mse.len() {
        if cv_mse[j] < cv_mse[best] {
            best = j;
        }
    }
    Ok((path.values[best], cv_mse))
}

/// Shared first stage: project, drop degenerate columns, normalize, pick the
/// penalty by CV, refit, unscale. Returns everything the callers need.
struct FirstStage {
    /// Unscaled coefficients on the full active set (zeros for excluded).
    coefficients: Array1<f64>,
    /// Filtered target and filtered (unnormalized) active columns.
    y_tilde: Array1<f64>,
    x_tilde: Array2<f64>,
    diagnostics: BTreeMap<String, f64>,
    /// Set when the path head was zero and no fit was attempted.
    degenerate_path: bool,
}

fn first_stage(
    data: &TimeSeriesDataset,
    k: usize,
    rng: &mut impl Rng,
) -> Result<FirstStage, LassoError> {
    let n = data.n_covariates();
    let proj = partial_out(data)?;
    let usable: Vec<usize> = (0..n)
        .filter(|i| !proj.degenerate_columns.contains(i))
        .collect();
    let mut diagnostics = BTreeMap::new();
    for &i in &proj.degenerate_columns {
        diagnostics.insert(format!("skipped_degenerate_{i}"), 1.0);
    }
    diagnostics.insert("n_degenerate".into(), proj.degenerate_columns.len() as f64);

    let mut x_use = Array2::zeros((data.t_len(), usable.len()));
    for (jj, &j) in usable.iter().enumerate() {
        for i in 0..data.t_len() {
            x_use[[i, jj]] = proj.x_tilde[[i, j]];
        }
    }
    let mut coefficients = Array1::zeros(n);
    if usable.is_empty() {
        diagnostics.insert("zero_phi_max".into(), 1.0);
        return Ok(FirstStage {
            coefficients,
            y_tilde: proj.y_tilde,
            x_tilde: proj.x_tilde,
            diagnostics,
            degenerate_path: true,
        });
    }
    let (x_norm, norms) = normalize_columns(&x_use)?;
    // a target that projects to rounding noise, or a path head that is
    // rounding noise relative to the target, carries no signal to fit
    let y_norm: f64 = proj.y_tilde.iter().map(|v| v * v).sum::<f64>().sqrt();
    let raw_norm: f64 = data.y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let degenerate_target = y_norm <= 1e-12 * raw_norm.max(f64::MIN_POSITIVE);
    let path = match PenaltyPath::from_correlations(&proj.y_tilde, &x_norm) {
        Ok(p) if !degenerate_target && p.phi_max > 1e-12 * y_norm => p,
        Ok(_) | Err(LassoError::ZeroPathHead { .. }) => {
            diagnostics.insert("zero_phi_max".into(), 1.0);
            return Ok(FirstStage {
                coefficients,
                y_tilde: proj.y_tilde,
                x_tilde: proj.x_tilde,
                diagnostics,
                degenerate_path: true,
            });
        }
        Err(e) => return Err(e),
    };
    let (phi_opt, cv_mse) = kfold_cv_with_rng(&proj.y_tilde, &x_norm, &path, k, rng)?;
    let full = CdProblem::new(&proj.y_tilde, &x_norm);
    let gamma_norm = full.solve(phi_opt, Array1::zeros(usable.len()))?;
    for (jj, &j) in usable.iter().enumerate() {
        coefficients[j] = gamma_norm[jj] / norms[jj];
    }
    let opt_idx = path
        .values
        .iter()
        .position(|&v| v == phi_opt)
        .unwrap_or(0);
    diagnostics.insert("phi_max".into(), path.phi_max);
    diagnostics.insert("phi_opt".into(), phi_opt);
    diagnostics.insert("cv_mse_opt".into(), cv_mse[opt_idx]);
    Ok(FirstStage {
        coefficients,
        y_tilde: proj.y_tilde,
        x_tilde: proj.x_tilde,
        diagnostics,
        degenerate_path: false,
    })
}

/// Conditioning coefficients recovered by regressing the unexplained part of
/// the raw target on Z; stored in the diagnostics map.
fn record_conditioning_coefs(
    data: &TimeSeriesDataset,
    coefficients: &Array1<f64>,
    diagnostics: &mut BTreeMap<String, f64>,
) {
    if data.m_conditioning() == 0 {
        return;
    }
    let resid = &data.y - &data.x.dot(coefficients);
    if let Ok(gz) = linalg::least_squares(&data.z, &resid) {
        for (j, v) in gz.iter().enumerate() {
            diagnostics.insert(format!("gamma_z_{j}"), *v);
        }
    }
}

fn build_result(
    tag: SelectorTag,
    coefficients: Array1<f64>,
    diagnostics: BTreeMap<String, f64>,
) -> SelectionResult {
    let included: Vec<bool> = coefficients.iter().map(|c| c.abs() > INCLUSION_TOL).collect();
    let mut coefs = coefficients;
    for (i, &inc) in included.iter().enumerate() {
        if !inc {
            coefs[i] = 0.0; // clamp sub-threshold dust so included/coefficients agree
        }
    }
    let mut diagnostics = diagnostics;
    diagnostics.insert(
        "k_hat".into(),
        included.iter().filter(|&&b| b).count() as f64,
    );
    let result = SelectionResult {
        included,
        t_stats: None,
        critical_value: None,
        coefficients: Some(coefs),
        selector_tag: tag,
        diagnostics,
    };
    debug_assert!(result.check_consistency());
    result
}

/// Full Lasso pipeline over a dataset.
pub fn lasso_select(
    data: &TimeSeriesDataset,
    k: usize,
    seed: u64,
) -> Result<SelectionResult, LassoError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stage = first_stage(data, k, &mut rng)?;
    let mut diagnostics = stage.diagnostics;
    record_conditioning_coefs(data, &stage.coefficients, &mut diagnostics);
    Ok(build_result(SelectorTag::Lasso, stage.coefficients, diagnostics))
}

/// Adaptive second stage: rerun the penalized fit on the first-stage support
/// with columns rescaled by their first-stage coefficients (no fresh
/// normalization), then map back by the same scaling. Draws its fold
/// permutation from the rng state left after the first stage, so the two
/// stages share one seed.
pub fn adaptive_lasso_select(
    data: &TimeSeriesDataset,
    k: usize,
    seed: u64,
) -> Result<SelectionResult, LassoError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stage = first_stage(data, k, &mut rng)?;
    let mut diagnostics = stage.diagnostics.clone();
    let support: Vec<usize> = stage
        .coefficients
        .iter()
        .enumerate()
        .filter_map(|(i, &c)| (c.abs() > INCLUSION_TOL).then_some(i))
        .collect();
    let n = data.n_covariates();
    if stage.degenerate_path || support.is_empty() {
        diagnostics.insert("empty_first_stage".into(), 1.0);
        return Ok(build_result(
            SelectorTag::ALasso,
            Array1::zeros(n),
            diagnostics,
        ));
    }
    let t = data.t_len();
    let mut a = Array2::zeros((t, support.len()));
    for (jj, &j) in support.iter().enumerate() {
        let scale = stage.coefficients[j];
        for i in 0..t {
            a[[i, jj]] = stage.x_tilde[[i, j]] * scale;
        }
    }
    let path = match PenaltyPath::from_correlations(&stage.y_tilde, &a) {
        Ok(p) => p,
        Err(LassoError::ZeroPathHead { .. }) => {
            diagnostics.insert("zero_psi_max".into(), 1.0);
            return Ok(build_result(
                SelectorTag::ALasso,
                Array1::zeros(n),
                diagnostics,
            ));
        }
        Err(e) => return Err(e),
    };
    let (psi_opt, cv_mse) = kfold_cv_with_rng(&stage.y_tilde, &a, &path, k, &mut rng)?;
    let full = CdProblem::new(&stage.y_tilde, &a);
    let delta_star = full.solve(psi_opt, Array1::zeros(support.len()))?;
    let mut coefficients = Array1::zeros(n);
    for (jj, &j) in support.iter().enumerate() {
        coefficients[j] = stage.coefficients[j] * delta_star[jj];
    }
    let opt_idx = path.values.iter().position(|&v| v == psi_opt).unwrap_or(0);
    diagnostics.insert("psi_max".into(), path.phi_max);
    diagnostics.insert("psi_opt".into(), psi_opt);
    diagnostics.insert("cv_mse_opt_stage2".into(), cv_mse[opt_idx]);
    record_conditioning_coefs(data, &coefficients, &mut diagnostics);
    Ok(build_result(SelectorTag::ALasso, coefficients, diagnostics))
}
