//! L2-boosting with a componentwise least-squares base learner and BIC
//! stopping. Each iteration fits one normalized column to the current
//! residual and moves a fraction ν of the way; the effective model dimension
//! tr(B_m) is tracked implicitly through the product of per-step smoothers,
//! so no T×T matrix is ever formed.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::data::{partial_out, DataError, SelectionResult, SelectorTag, TimeSeriesDataset};
use crate::lasso::normalize_columns;

#[derive(Debug, Error)]
pub enum BoostError {
    #[error("step size must lie in (0, 1], got {nu}")]
    InvalidStepSize { nu: f64 },
    #[error("iteration cap must be at least 1")]
    InvalidIterationCap,
    #[error("column {index} has zero norm after projection")]
    DegenerateColumn { index: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Step size and iteration cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostConfig {
    pub nu: f64,
    pub m_max: usize,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self { nu: 0.5, m_max: 500 }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<(), BoostError> {
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(BoostError::InvalidStepSize { nu: self.nu });
        }
        if self.m_max == 0 {
            return Err(BoostError::InvalidIterationCap);
        }
        Ok(())
    }
}

/// Everything one boosting run produces, indexed by iteration (entry m-1 is
/// iteration m).
#[derive(Debug, Clone)]
pub struct BoostTrace {
    /// Column chosen at each iteration.
    pub selected: Vec<usize>,
    /// Unshrunken one-variable coefficient δ̂ at each iteration.
    pub steps: Vec<f64>,
    /// Fitted values after each iteration.
    pub fitted: Vec<Array1<f64>>,
    /// Information criterion at each iteration.
    pub bic: Vec<f64>,
    /// Training residual sum of squares after each iteration.
    pub rss: Vec<f64>,
    /// Effective dimension tr(B_m) after each iteration.
    pub trace_b: Vec<f64>,
    /// Iteration with the smallest criterion (1-based); ties go to the
    /// earliest iteration.
    pub m_stop: usize,
}

/// One step of the componentwise base learner: the column whose one-variable
/// fit leaves the smallest residual sum of squares, with its coefficient.
/// Ties go to the lowest index.
pub fn base_learner(e: &Array1<f64>, x: &Array2<f64>) -> (usize, f64) {
    let n = x.ncols();
    debug_assert!(n > 0, "base learner needs at least one column");
    let mut best = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    let mut best_delta = 0.0;
    for j in 0..n {
        let col = x.column(j);
        let xx: f64 = col.dot(&col);
        if xx <= 0.0 {
            continue;
        }
        let xe: f64 = col.dot(e);
        // minimizing RSS over one-variable fits = maximizing (e'x)^2 / x'x
        let score = xe * xe / xx;
        if score > best_score {
            best_score = score;
            best = j;
            best_delta = xe / xx;
        }
    }
    (best, best_delta)
}

/// Run boosting on filtered, normalized inputs and keep the whole trace.
pub fn boost_with_trace(
    y: &Array1<f64>,
    x: &Array2<f64>,
    cfg: &BoostConfig,
) -> Result<BoostTrace, BoostError> {
    cfg.validate()?;
    let t = y.len();
    let n = x.ncols();
    let nu = cfg.nu;
    let mut e = y.clone();
    // a = Π_m X where Π_m is the product of the per-step smoothers; Π_0 = I
    let mut a = x.clone();
    let mut trace_pi = t as f64;
    let mut selected = Vec::with_capacity(cfg.m_max);
    let mut steps = Vec::with_capacity(cfg.m_max);
    let mut fitted = Vec::with_capacity(cfg.m_max);
    let mut bic = Vec::with_capacity(cfg.m_max);
    let mut rss = Vec::with_capacity(cfg.m_max);
    let mut trace_b = Vec::with_capacity(cfg.m_max);
    let log_t = (t as f64).ln();
    for _m in 1..=cfg.m_max {
        let (s, delta) = base_learner(&e, x);
        let col = x.column(s);
        let xx: f64 = col.dot(&col);
        // residual and fit move by ν·δ̂ along the chosen column
        for i in 0..t {
            e[i] -= nu * delta * col[i];
        }
        // smoother update: Π ← (I − νH)Π with H = x_s x_s′/(x_s′x_s);
        // tr(HΠ) = x_s′Πx_s / x_s′x_s and Πx_s is column s of a
        let row: Array1<f64> = col.dot(&a).to_owned();
        trace_pi -= nu * row[s] / xx;
        for j in 0..n {
            let scale = nu * row[j] / xx;
            if scale != 0.0 {
                for i in 0..t {
                    a[[i, j]] -= scale * col[i];
                }
            }
        }
        let sse: f64 = e.iter().map(|v| v * v).sum();
        let sigma2 = sse / t as f64;
        let dim = t as f64 - trace_pi;
        bic.push(sigma2.ln() + 1.0 + dim * log_t / t as f64);
        rss.push(sse);
        trace_b.push(dim);
        selected.push(s);
        steps.push(delta);
        fitted.push(y - &e);
    }
    let mut m_stop = 1;
    for m in 2..=cfg.m_max {
        if bic[m - 1] < bic[m_stop - 1] {
            m_stop = m;
        }
    }
    Ok(BoostTrace {
        selected,
        steps,
        fitted,
        bic,
        rss,
        trace_b,
        m_stop,
    })
}

/// Full pipeline: project out the conditioning set, drop degenerate columns,
/// normalize, boost to the iteration cap, stop where the criterion is
/// smallest. A covariate is included when it received at least one nonzero
/// step by the stopping iteration; coefficients are the accumulated shrunken
/// steps mapped back to the filtered (unnormalized) scale.
pub fn boost_select(
    data: &TimeSeriesDataset,
    cfg: &BoostConfig,
) -> Result<SelectionResult, BoostError> {
    cfg.validate()?;
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
    if usable.is_empty() {
        diagnostics.insert("k_hat".into(), 0.0);
        diagnostics.insert("m_stop".into(), 0.0);
        return Ok(SelectionResult {
            included: vec![false; n],
            t_stats: None,
            critical_value: None,
            coefficients: Some(Array1::zeros(n)),
            selector_tag: SelectorTag::Boosting,
            diagnostics,
        });
    }
    let t = data.t_len();
    let mut x_use = Array2::zeros((t, usable.len()));
    for (jj, &j) in usable.iter().enumerate() {
        for i in 0..t {
            x_use[[i, jj]] = proj.x_tilde[[i, j]];
        }
    }
    let (x_norm, norms) = normalize_columns(&x_use)
        .map_err(|_| BoostError::DegenerateColumn { index: usable[0] })?;
    let trace = boost_with_trace(&proj.y_tilde, &x_norm, cfg)?;
    let mut coef_norm = vec![0.0_f64; usable.len()];
    let mut touched = vec![false; usable.len()];
    for m in 0..trace.m_stop {
        let s = trace.selected[m];
        let d = trace.steps[m];
        if d != 0.0 {
            coef_norm[s] += cfg.nu * d;
            touched[s] = true;
        }
    }
    let mut included = vec![false; n];
    let mut coefficients = Array1::zeros(n);
    for (jj, &j) in usable.iter().enumerate() {
        included[j] = touched[jj];
        coefficients[j] = coef_norm[jj] / norms[jj];
    }
    diagnostics.insert(
        "k_hat".into(),
        included.iter().filter(|&&b| b).count() as f64,
    );
    diagnostics.insert("m_stop".into(), trace.m_stop as f64);
    diagnostics.insert("bic_min".into(), trace.bic[trace.m_stop - 1]);
    let result = SelectionResult {
        included,
        t_stats: None,
        critical_value: None,
        coefficients: Some(coefficients),
        selector_tag: SelectorTag::Boosting,
        diagnostics,
    };
    debug_assert!(result.check_consistency());
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn unit_cols(t: usize, n: usize, f: impl Fn(usize, usize) -> f64) -> Array2<f64> {
        let raw = Array2::from_shape_fn((t, n), |(i, j)| f(i, j));
        normalize_columns(&raw).unwrap().0
    }

    #[test]
    fn base_learner_finds_perfect_column() {
        let x = unit_cols(6, 4, |i, j| ((i * (j + 2)) as f64 * 0.7).sin() + (j as f64) * 0.1);
        let e = x.column(2).to_owned() * 3.0;
        let (s, delta) = base_learner(&e, &x);
        assert_eq!(s, 2);
        assert!((delta - 3.0).abs() < 1e-12);
    }

    #[test]
    fn base_learner_equals_max_abs_correlation_under_unit_norms() {
        let x = unit_cols(20, 5, |i, j| ((i + 1) as f64 * (j as f64 + 0.3)).cos());
        let e = Array1::from_iter((0..20).map(|i| ((i as f64) * 0.37).sin()));
        let (s, delta) = base_learner(&e, &x);
        let best_by_corr = (0..5)
            .max_by(|&a, &b| {
                let ca = x.column(a).dot(&e).abs();
                let cb = x.column(b).dot(&e).abs();
                ca.partial_cmp(&cb).unwrap()
            })
            .unwrap();
        assert_eq!(s, best_by_corr);
        assert!((delta - x.column(s).dot(&e)).abs() < 1e-12);
    }

    #[test]
    fn base_learner_ties_go_to_lowest_index() {
        // two identical columns
        let x = array![[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]];
        let e = array![2.0, 0.5, -0.5];
        let (s, _) = base_learner(&e, &x);
        assert_eq!(s, 0);
    }

    #[test]
    fn one_full_step_on_orthonormal_design_is_least_squares() {
        let x = unit_cols(12, 3, |i, j| {
            // build near-orthogonal columns, then orthonormalize properly
            ((i as f64 + 1.0) * (j as f64 + 1.0) * 0.61).sin()
        });
        let q = crate::linalg::orthonormal_basis(&x).unwrap();
        let y = q.column(1).to_owned() * 2.5;
        let cfg = BoostConfig { nu: 1.0, m_max: 1 };
        let trace = boost_with_trace(&y, &q, &cfg).unwrap();
        assert_eq!(trace.selected[0], 1);
        assert!((trace.steps[0] - 2.5).abs() < 1e-12);
        assert!(trace.rss[0] < 1e-20);
    }

    #[test]
    fn rss_and_trace_are_monotone() {
        // correlated design: RSS is monotone at every iteration; the smoother
        // trace is monotone through the stopping iteration (past convergence
        // the non-commuting per-step factors can make it oscillate slightly)
        let x = unit_cols(40, 6, |i, j| {
            ((0.23 * (j + 1) as f64) * i as f64).sin() + 0.2 * ((j * j) as f64)
        });
        let y = Array1::from_iter((0..40).map(|i| {
            let s = i as f64;
            2.0 * x[[i, 0]] - 1.0 * x[[i, 4]] + 0.3 * (0.9 * s).sin()
        }));
        let trace = boost_with_trace(&y, &x, &BoostConfig::default()).unwrap();
        for m in 1..trace.rss.len() {
            assert!(trace.rss[m] <= trace.rss[m - 1] + 1e-10);
            assert!(trace.trace_b[m] <= 40.0 + 1e-8);
        }
        for m in 1..trace.m_stop {
            assert!(trace.trace_b[m] >= trace.trace_b[m - 1] - 1e-10);
        }
        assert!(trace.m_stop >= 1 && trace.m_stop <= 500);
        let min_bic = trace
            .bic
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert_eq!(trace.bic[trace.m_stop - 1], min_bic);
    }

    #[test]
    fn trace_is_fully_monotone_on_orthogonal_designs() {
        // commuting per-step smoothers: monotonicity holds at every iteration
        let raw = Array2::from_shape_fn((24, 5), |(i, j)| {
            ((i as f64 + 1.0) * (j as f64 + 0.7) * 0.53).sin()
        });
        let q = crate::linalg::orthonormal_basis(&raw).unwrap();
        let y = Array1::from_iter((0..24).map(|i| {
            1.5 * q[[i, 0]] - 0.8 * q[[i, 3]] + 0.2 * ((i as f64) * 0.71).cos()
        }));
        let trace = boost_with_trace(&y, &q, &BoostConfig::default()).unwrap();
        for m in 1..trace.trace_b.len() {
            assert!(trace.trace_b[m] >= trace.trace_b[m - 1] - 1e-10);
            assert!(trace.trace_b[m] <= 24.0 + 1e-8);
        }
    }

    #[test]
    fn orthogonal_target_selects_nothing() {
        // y orthogonal to both columns
        let x = array![
            [1.0, 0.0],
            [-1.0, 0.0],
            [0.0, 1.0],
            [0.0, -1.0]
        ];
        let y = array![1.0, 1.0, 1.0, 1.0];
        let ds = TimeSeriesDataset::new(
            y,
            x,
            Array2::zeros((4, 0)),
            "y",
            vec!["a".into(), "b".into()],
            vec![],
            false,
        )
        .unwrap();
        let res = boost_select(&ds, &BoostConfig::default()).unwrap();
        assert_eq!(res.count(), 0);
        assert_eq!(res.diagnostics["m_stop"], 1.0);
    }

    #[test]
    fn selects_signals_and_unscales_coefficients() {
        let t = 60;
        let raw = Array2::from_shape_fn((t, 7), |(i, j)| {
            ((0.19 * (j + 1) as f64) * i as f64 + 0.5 * j as f64).sin()
        });
        let y = Array1::from_iter(
            (0..t).map(|i| 4.0 + 2.5 * raw[[i, 2]] - 1.8 * raw[[i, 5]] + 0.1 * (0.83 * i as f64).cos()),
        );
        let names = (1..=7).map(|j| format!("x{j}")).collect();
        let ds = TimeSeriesDataset::with_intercept_only(y, raw, "y", names).unwrap();
        let res = boost_select(&ds, &BoostConfig::default()).unwrap();
        assert!(res.included[2]);
        assert!(res.included[5]);
        let coefs = res.coefficients.as_ref().unwrap();
        assert!((coefs[2] - 2.5).abs() < 0.4, "got {}", coefs[2]);
        assert!((coefs[5] + 1.8).abs() < 0.4, "got {}", coefs[5]);
        assert!(res.check_consistency());
    }

    #[test]
    fn identical_inputs_give_identical_traces() {
        let x = unit_cols(30, 4, |i, j| ((i + j * 3) as f64 * 0.41).sin());
        let y = Array1::from_iter((0..30).map(|i| (0.29 * i as f64).cos()));
        let a = boost_with_trace(&y, &x, &BoostConfig::default()).unwrap();
        let b = boost_with_trace(&y, &x, &BoostConfig::default()).unwrap();
        assert_eq!(a.selected, b.selected);
        assert_eq!(a.m_stop, b.m_stop);
        for (p, q) in a.bic.iter().zip(b.bic.iter()) {
            assert_eq!(p.to_bits(), q.to_bits());
        }
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        assert!(BoostConfig { nu: 0.0, m_max: 10 }.validate().is_err());
        assert!(BoostConfig { nu: 1.5, m_max: 10 }.validate().is_err());
        assert!(BoostConfig { nu: 0.5, m_max: 0 }.validate().is_err());
    }
}
