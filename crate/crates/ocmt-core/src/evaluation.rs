//! Forecast-accuracy and selection-accuracy metrics: MSFE, true/false
//! positive rates, a pooled Diebold-Mariano test over panels of loss
//! differentials, the Pesaran-Timmermann direction test, mean directional
//! forecast accuracy, and the irrepresentable-condition check for Lasso
//! sign consistency.

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::linalg;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty panel")]
    EmptyPanel,
    #[error("length mismatch: got {got}, want {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error("rates undefined: truth vector must contain at least one true and one false entry")]
    UndefinedRate,
    #[error("series {series} has {len} observations; need at least 2")]
    SeriesTooShort { series: usize, len: usize },
    #[error("non-finite value in panel (series {series}, period {period})")]
    NonFinite { series: usize, period: usize },
    #[error("loss-differential variance is not positive")]
    DegenerateVariance,
    #[error("realized or forecast signs never change; direction test undefined")]
    DegenerateDirections,
    #[error("signal correlation block is singular at column {column}")]
    SingularSignalBlock { column: usize },
    #[error("covariate column {column} has zero variance; correlations undefined")]
    ZeroVarianceColumn { column: usize },
    #[error("signal index {index} out of range for {n} covariates")]
    SignalOutOfRange { index: usize, n: usize },
    #[error("horizon must be at least 1")]
    BadHorizon,
}

/// Arithmetic mean of a panel of squared forecast errors.
pub fn msfe(squared_errors: &[f64]) -> Result<f64, EvalError> {
    if squared_errors.is_empty() {
        return Err(EvalError::EmptyPanel);
    }
    Ok(squared_errors.iter().sum::<f64>() / squared_errors.len() as f64)
}

/// True and false positive rates of a selection against the truth mask.
/// The truth must contain both classes or the rates are undefined.
pub fn tpr_fpr(included: &[bool], truth: &[bool]) -> Result<(f64, f64), EvalError> {
    if included.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            got: included.len(),
            want: truth.len(),
        });
    }
    let n_true = truth.iter().filter(|&&b| b).count();
    let n_false = truth.len() - n_true;
    if n_true == 0 || n_false == 0 {
        return Err(EvalError::UndefinedRate);
    }
    let mut hits = 0usize;
    let mut false_alarms = 0usize;
    for (sel, tr) in included.iter().zip(truth) {
        match (sel, tr) {
            (true, true) => hits += 1,
            (true, false) => false_alarms += 1,
            _ => {}
        }
    }
    Ok((hits as f64 / n_true as f64, false_alarms as f64 / n_false as f64))
}

/// Panel of per-series squared-error differentials q_lt = e²_ltA − e²_ltB.
#[derive(Debug, Clone)]
pub struct LossPanel {
    pub series: Vec<Vec<f64>>,
    pub horizon: usize,
}

impl LossPanel {
    pub fn new(series: Vec<Vec<f64>>, horizon: usize) -> Result<Self, EvalError> {
        if horizon == 0 {
            return Err(EvalError::BadHorizon);
        }
        if series.is_empty() {
            return Err(EvalError::EmptyPanel);
        }
        for (l, s) in series.iter().enumerate() {
            if s.len() < 2 {
                return Err(EvalError::SeriesTooShort {
                    series: l,
                    len: s.len(),
                });
            }
            for (t, v) in s.iter().enumerate() {
                if !v.is_finite() {
                    return Err(EvalError::NonFinite {
                        series: l,
                        period: t,
                    });
                }
            }
        }
        Ok(LossPanel { series, horizon })
    }

    /// Differentials from two aligned squared-error panels (one-step losses).
    pub fn from_squared_errors(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Self, EvalError> {
        if a.len() != b.len() {
            return Err(EvalError::LengthMismatch {
                got: b.len(),
                want: a.len(),
            });
        }
        let mut series = Vec::with_capacity(a.len());
        for (sa, sb) in a.iter().zip(b) {
            if sa.len() != sb.len() {
                return Err(EvalError::LengthMismatch {
                    got: sb.len(),
                    want: sa.len(),
                });
            }
            series.push(sa.iter().zip(sb).map(|(x, y)| x - y).collect());
        }
        LossPanel::new(series, 1)
    }

    pub fn total_len(&self) -> usize {
        self.series.iter().map(|s| s.len()).sum()
    }
}

/// Within-series long-run variance of q about its own mean. Horizon 1 is
/// the plain variance; longer horizons add Bartlett-weighted autocovariances
/// up to lag h−1 to absorb the overlap-induced serial correlation.
fn series_variance(q: &[f64], horizon: usize) -> f64 {
    let t = q.len();
    let mean = q.iter().sum::<f64>() / t as f64;
    let centered: Vec<f64> = q.iter().map(|v| v - mean).collect();
    let gamma = |lag: usize| -> f64 {
        let mut acc = 0.0;
        for i in lag..t {
            acc += centered[i] * centered[i - lag];
        }
        acc / t as f64
    };
    let mut var = gamma(0);
    let bandwidth = horizon - 1;
    for lag in 1..=bandwidth.min(t - 1) {
        let w = 1.0 - lag as f64 / (bandwidth + 1) as f64;
        var += 2.0 * w * gamma(lag);
    }
    var
}

/// Pooled Diebold-Mariano statistic: the grand mean of the differentials
/// over its panel standard error. Positive values favour method B.
pub fn panel_dm(panel: &LossPanel) -> Result<f64, EvalError> {
    let t_total = panel.total_len();
    let q_bar = panel
        .series
        .iter()
        .flat_map(|s| s.iter())
        .sum::<f64>()
        / t_total as f64;
    let mut v = 0.0;
    for s in &panel.series {
        v += s.len() as f64 * series_variance(s, panel.horizon);
    }
    v /= (t_total as f64) * (t_total as f64);
    if !(v > 0.0) {
        return Err(EvalError::DegenerateVariance);
    }
    Ok(q_bar / v.sqrt())
}

/// Realized and forecast signs per series and period; zero values keep
/// sign 0 and never count as a correct call.
#[derive(Debug, Clone)]
pub struct DirectionPanel {
    realized_sign: Vec<Vec<i8>>,
    forecast_sign: Vec<Vec<i8>>,
}

fn sign_of(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

impl DirectionPanel {
    pub fn new(realized: &[Vec<f64>], forecast: &[Vec<f64>]) -> Result<Self, EvalError> {
        if realized.is_empty() {
            return Err(EvalError::EmptyPanel);
        }
        if realized.len() != forecast.len() {
            return Err(EvalError::LengthMismatch {
                got: forecast.len(),
                want: realized.len(),
            });
        }
        let mut realized_sign = Vec::with_capacity(realized.len());
        let mut forecast_sign = Vec::with_capacity(forecast.len());
        for (l, (r, f)) in realized.iter().zip(forecast).enumerate() {
            if r.len() != f.len() {
                return Err(EvalError::LengthMismatch {
                    got: f.len(),
                    want: r.len(),
                });
            }
            if r.is_empty() {
                return Err(EvalError::SeriesTooShort { series: l, len: 0 });
            }
            for (t, v) in r.iter().chain(f.iter()).enumerate() {
                if v.is_nan() {
                    return Err(EvalError::NonFinite {
                        series: l,
                        period: t % r.len(),
                    });
                }
            }
            realized_sign.push(r.iter().map(|&v| sign_of(v)).collect());
            forecast_sign.push(f.iter().map(|&v| sign_of(v)).collect());
        }
        Ok(DirectionPanel {
            realized_sign,
            forecast_sign,
        })
    }

    fn total_len(&self) -> usize {
        self.realized_sign.iter().map(|s| s.len()).sum()
    }

    /// (fraction correct sign, fraction realized > 0, fraction forecast > 0)
    fn pooled_fractions(&self) -> (f64, f64, f64) {
        let t = self.total_len() as f64;
        let mut correct = 0usize;
        let mut pos_y = 0usize;
        let mut pos_f = 0usize;
        for (r, f) in self.realized_sign.iter().zip(&self.forecast_sign) {
            for (a, b) in r.iter().zip(f) {
                if a * b > 0 {
                    correct += 1;
                }
                if *a > 0 {
                    pos_y += 1;
                }
                if *b > 0 {
                    pos_f += 1;
                }
            }
        }
        (correct as f64 / t, pos_y as f64 / t, pos_f as f64 / t)
    }
}

/// Mean directional forecast accuracy: percentage of strictly positive
/// products of realized and forecast values.
pub fn mdfa(panel: &DirectionPanel) -> f64 {
    let (p_hat, _, _) = panel.pooled_fractions();
    100.0 * p_hat
}

/// Pooled Pesaran-Timmermann direction test. The success probability under
/// independence is estimated from the pooled sign frequencies; the variance
/// of that estimate enters the denominator with its smallest O(T^-2) term
/// kept unless `drop_final_term` is set.
pub fn pt_test(panel: &DirectionPanel, drop_final_term: bool) -> Result<f64, EvalError> {
    let t = panel.total_len() as f64;
    let (p_hat, d_y, d_f) = panel.pooled_fractions();
    if d_y == 0.0 || d_y == 1.0 || d_f == 0.0 || d_f == 1.0 {
        return Err(EvalError::DegenerateDirections);
    }
    let p_star = d_y * d_f + (1.0 - d_y) * (1.0 - d_f);
    let v_p = p_star * (1.0 - p_star) / t;
    let mut v_p_star = (2.0 * d_y - 1.0).powi(2) * d_f * (1.0 - d_f) / t
        + (2.0 * d_f - 1.0).powi(2) * d_y * (1.0 - d_y) / t;
    if !drop_final_term {
        v_p_star += 4.0 / (t * t) * d_y * d_f * (1.0 - d_y) * (1.0 - d_f);
    }
    let denom = v_p - v_p_star;
    if !(denom > 0.0) {
        return Err(EvalError::DegenerateVariance);
    }
    Ok((p_hat - p_star) / denom.sqrt())
}

/// Sample correlation matrix of the columns of x.
fn correlation_matrix(x: &Array2<f64>) -> Result<Array2<f64>, EvalError> {
    let (t, n) = x.dim();
    let mut centered = x.clone();
    let mut sds = vec![0.0; n];
    for j in 0..n {
        let mean = x.column(j).sum() / t as f64;
        let mut ss = 0.0;
        for i in 0..t {
            centered[[i, j]] -= mean;
            ss += centered[[i, j]] * centered[[i, j]];
        }
        if ss <= 0.0 {
            return Err(EvalError::ZeroVarianceColumn { column: j });
        }
        sds[j] = ss.sqrt();
    }
    let mut corr = Array2::zeros((n, n));
    for a in 0..n {
        for b in a..n {
            let mut acc = 0.0;
            for i in 0..t {
                acc += centered[[i, a]] * centered[[i, b]];
            }
            let c = acc / (sds[a] * sds[b]);
            corr[[a, b]] = c;
            corr[[b, a]] = c;
        }
    }
    Ok(corr)
}

/// Irrepresentable-condition check from the sample correlations: the
/// infinity norm of R21 R11^{-1} sign(beta) over the non-signal rows must
/// not exceed 1 for Lasso sign consistency.
pub fn irc_check(
    x_sample: &Array2<f64>,
    signal_idx: &[usize],
    beta_signs: &[f64],
) -> Result<(bool, f64), EvalError> {
    let n = x_sample.ncols();
    if beta_signs.len() != signal_idx.len() {
        return Err(EvalError::LengthMismatch {
            got: beta_signs.len(),
            want: signal_idx.len(),
        });
    }
    for &i in signal_idx {
        if i >= n {
            return Err(EvalError::SignalOutOfRange { index: i, n });
        }
    }
    let corr = correlation_matrix(x_sample)?;
    let k = signal_idx.len();
    let mut r11 = Array2::zeros((k, k));
    for (a, &ia) in signal_idx.iter().enumerate() {
        for (b, &ib) in signal_idx.iter().enumerate() {
            r11[[a, b]] = corr[[ia, ib]];
        }
    }
    let signs = Array1::from_iter(beta_signs.iter().map(|&b| {
        if b > 0.0 {
            1.0
        } else if b < 0.0 {
            -1.0
        } else {
            0.0
        }
    }));
    let factor = linalg::spd_factor(&r11)
        .map_err(|col| EvalError::SingularSignalBlock { column: col })?;
    let w = factor.solve(&signs);
    let others: Vec<usize> = (0..n).filter(|i| !signal_idx.contains(i)).collect();
    let mut lhs: f64 = 0.0;
    for &i in &others {
        let mut acc = 0.0;
        for (b, &ib) in signal_idx.iter().enumerate() {
            acc += corr[[i, ib]] * w[b];
        }
        lhs = lhs.max(acc.abs());
    }
    Ok((lhs <= 1.0, lhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn msfe_is_the_mean() {
        assert_eq!(msfe(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(msfe(&[1.0, 3.0]).unwrap(), 2.0);
        assert!(matches!(msfe(&[]), Err(EvalError::EmptyPanel)));
    }

    #[test]
    fn rates_from_hand_counts() {
        let truth = [true, true, false, false, false];
        assert_eq!(
            tpr_fpr(&[true, true, false, false, false], &truth).unwrap(),
            (1.0, 0.0)
        );
        assert_eq!(
            tpr_fpr(&[false, false, false, false, false], &truth).unwrap(),
            (0.0, 0.0)
        );
        let (tpr, fpr) = tpr_fpr(&[true, false, true, true, false], &truth).unwrap();
        assert!((tpr - 0.5).abs() < 1e-15);
        assert!((fpr - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            tpr_fpr(&[true, true], &[true, true]),
            Err(EvalError::UndefinedRate)
        ));
        assert!(matches!(
            tpr_fpr(&[true], &[true, false]),
            Err(EvalError::LengthMismatch { got: 1, want: 2 })
        ));
    }

    #[test]
    fn dm_sign_follows_the_mean() {
        let noise = [0.3, -0.2, 0.1, -0.4, 0.2, 0.05, -0.15, 0.1];
        let up: Vec<f64> = noise.iter().map(|v| 1.0 + v).collect();
        let down: Vec<f64> = noise.iter().map(|v| -1.0 + v).collect();
        let dm_up = panel_dm(&LossPanel::new(vec![up], 1).unwrap()).unwrap();
        let dm_down = panel_dm(&LossPanel::new(vec![down], 1).unwrap()).unwrap();
        assert!(dm_up > 0.0);
        assert!(dm_down < 0.0);
    }

    #[test]
    fn single_series_matches_classic_statistic() {
        let q = vec![0.4, -0.1, 0.3, 0.8, -0.6, 0.2, 0.1, -0.3, 0.5, 0.0];
        let t = q.len() as f64;
        let mean = q.iter().sum::<f64>() / t;
        let var = q.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / t;
        let want = mean / (var / t).sqrt();
        let got = panel_dm(&LossPanel::new(vec![q], 1).unwrap()).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn dm_is_antisymmetric() {
        let series = vec![
            vec![0.4, -0.1, 0.3, 0.8, -0.6],
            vec![0.2, 0.1, -0.3, 0.5, 0.0, 0.7, -0.2],
        ];
        let flipped: Vec<Vec<f64>> = series
            .iter()
            .map(|s| s.iter().map(|v| -v).collect())
            .collect();
        let a = panel_dm(&LossPanel::new(series, 1).unwrap()).unwrap();
        let b = panel_dm(&LossPanel::new(flipped, 1).unwrap()).unwrap();
        assert_eq!(a.to_bits(), (-b).to_bits());
    }

    #[test]
    fn longer_horizons_add_bartlett_terms() {
        let q = vec![1.0, 2.0, 0.5, 1.5, 0.8, 2.2, 0.3, 1.1];
        let t = q.len() as f64;
        let mean = q.iter().sum::<f64>() / t;
        let c: Vec<f64> = q.iter().map(|v| v - mean).collect();
        let gamma0 = c.iter().map(|v| v * v).sum::<f64>() / t;
        let gamma1 = (1..q.len()).map(|i| c[i] * c[i - 1]).sum::<f64>() / t;
        // bandwidth h-1 = 1: variance gamma0 + 2*(1/2)*gamma1
        let want_var = gamma0 + gamma1;
        let got = panel_dm(&LossPanel::new(vec![q], 2).unwrap()).unwrap();
        let want = mean / (want_var / t).sqrt();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn constant_differentials_have_no_variance() {
        let panel = LossPanel::new(vec![vec![0.5; 6]], 1).unwrap();
        assert!(matches!(
            panel_dm(&panel),
            Err(EvalError::DegenerateVariance)
        ));
    }

    #[test]
    fn mdfa_counts_strict_sign_agreement() {
        let realized = vec![vec![1.0, -2.0, 3.0, -1.0]];
        let perfect = vec![vec![0.5, -0.1, 2.0, -3.0]];
        let wrong = vec![vec![-0.5, 0.1, -2.0, 3.0]];
        let zeroed = vec![vec![0.0, -0.1, 2.0, -3.0]];
        assert_eq!(mdfa(&DirectionPanel::new(&realized, &perfect).unwrap()), 100.0);
        assert_eq!(mdfa(&DirectionPanel::new(&realized, &wrong).unwrap()), 0.0);
        // a zero forecast is never a correct directional call
        assert_eq!(mdfa(&DirectionPanel::new(&realized, &zeroed).unwrap()), 75.0);
    }

    #[test]
    fn pt_matches_hand_computation() {
        // 10 pooled observations, 7 correct signs, 6 positive realized,
        // 5 positive forecasts
        let realized = vec![vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0]];
        let forecast = vec![vec![1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0, -1.0, 1.0]];
        let panel = DirectionPanel::new(&realized, &forecast).unwrap();
        let t = 10.0;
        let p_hat = 0.7;
        let (d_y, d_f) = (0.6, 0.5);
        let p_star = d_y * d_f + (1.0 - d_y) * (1.0 - d_f);
        let v_p = p_star * (1.0 - p_star) / t;
        let v_star_core = (2.0 * d_y - 1.0f64).powi(2) * d_f * (1.0 - d_f) / t
            + (2.0 * d_f - 1.0f64).powi(2) * d_y * (1.0 - d_y) / t;
        let last = 4.0 / (t * t) * d_y * d_f * (1.0 - d_y) * (1.0 - d_f);
        let want_full = (p_hat - p_star) / (v_p - v_star_core - last).sqrt();
        let want_drop = (p_hat - p_star) / (v_p - v_star_core).sqrt();
        assert!((pt_test(&panel, false).unwrap() - want_full).abs() < 1e-12);
        assert!((pt_test(&panel, true).unwrap() - want_drop).abs() < 1e-12);
        // keeping the final term shrinks the denominator
        assert!(pt_test(&panel, false).unwrap() > pt_test(&panel, true).unwrap());
    }

    #[test]
    fn pt_rejects_one_sided_signs() {
        let realized = vec![vec![1.0, 2.0, 3.0, 4.0]];
        let forecast = vec![vec![1.0, -1.0, 1.0, -1.0]];
        assert!(matches!(
            pt_test(&DirectionPanel::new(&realized, &forecast).unwrap(), false),
            Err(EvalError::DegenerateDirections)
        ));
    }

    fn deterministic_matrix(t: usize, n: usize) -> Array2<f64> {
        Array2::from_shape_fn((t, n), |(i, j)| {
            ((0.7 + 0.31 * j as f64) * i as f64).sin() + 0.1 * (j as f64 * i as f64 * 0.05).cos()
        })
    }

    #[test]
    fn orthogonal_design_satisfies_irc_with_zero_lhs() {
        // block-diagonal signs: signals vary only in even periods, the rest
        // only in odd periods, so sample correlations across blocks vanish
        let t = 40;
        let mut x = Array2::zeros((t, 4));
        for i in 0..t {
            let v = (i as f64 * 0.9).sin();
            if i % 2 == 0 {
                x[[i, 0]] = v;
                x[[i, 1]] = (i as f64 * 0.4).cos();
            } else {
                x[[i, 2]] = v;
                x[[i, 3]] = (i as f64 * 0.6).cos();
            }
        }
        // center the blocks so cross-block covariance is exactly zero
        for j in 0..4 {
            let parity = if j < 2 { 0 } else { 1 };
            let cnt = (t / 2) as f64;
            let mean: f64 = (0..t)
                .filter(|i| i % 2 == parity)
                .map(|i| x[[i, j]])
                .sum::<f64>()
                / cnt;
            for i in 0..t {
                if i % 2 == parity {
                    x[[i, j]] -= mean;
                }
            }
        }
        let (ok, lhs) = irc_check(&x, &[0, 1], &[1.0, 1.0]).unwrap();
        assert!(ok);
        assert!(lhs.abs() < 1e-12);
    }

    #[test]
    fn two_signal_case_matches_example_reduction() {
        let x = deterministic_matrix(60, 5);
        let corr = correlation_matrix(&x).unwrap();
        let rho = corr[[0, 1]];
        // same-sign coefficients
        let (_, lhs) = irc_check(&x, &[0, 1], &[2.0, 0.5]).unwrap();
        let mut want: f64 = 0.0;
        for i in 2..5 {
            let v = (corr[[i, 0]] - rho * corr[[i, 1]]) + (corr[[i, 1]] - rho * corr[[i, 0]]);
            want = want.max((v / (1.0 - rho * rho)).abs());
        }
        assert!((lhs - want).abs() < 1e-12);
        // opposite signs flip one term
        let (_, lhs2) = irc_check(&x, &[0, 1], &[2.0, -0.5]).unwrap();
        let mut want2: f64 = 0.0;
        for i in 2..5 {
            let v = (corr[[i, 0]] - rho * corr[[i, 1]]) - (corr[[i, 1]] - rho * corr[[i, 0]]);
            want2 = want2.max((v / (1.0 - rho * rho)).abs());
        }
        assert!((lhs2 - want2).abs() < 1e-12);
    }

    #[test]
    fn three_signal_case_matches_dense_inverse() {
        let x = deterministic_matrix(80, 6);
        let corr = correlation_matrix(&x).unwrap();
        let idx = [0usize, 2, 4];
        let signs = [1.0, -1.0, 1.0];
        let (_, lhs) = irc_check(&x, &idx, &signs).unwrap();
        // invert the 3x3 signal block by cofactors
        let mut a = [[0.0; 3]; 3];
        for p in 0..3 {
            for q in 0..3 {
                a[p][q] = corr[[idx[p], idx[q]]];
            }
        }
        let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
        let mut inv = [[0.0; 3]; 3];
        for p in 0..3 {
            for q in 0..3 {
                let (r1, r2) = match p {
                    0 => (1, 2),
                    1 => (0, 2),
                    _ => (0, 1),
                };
                let (c1, c2) = match q {
                    0 => (1, 2),
                    1 => (0, 2),
                    _ => (0, 1),
                };
                let minor = a[r1][c1] * a[r2][c2] - a[r1][c2] * a[r2][c1];
                let sign = if (p + q) % 2 == 0 { 1.0 } else { -1.0 };
                inv[q][p] = sign * minor / det;
            }
        }
        let w: Vec<f64> = (0..3)
            .map(|p| (0..3).map(|q| inv[p][q] * signs[q]).sum())
            .collect();
        let mut want: f64 = 0.0;
        for i in [1usize, 3, 5] {
            let v: f64 = (0..3).map(|q| corr[[i, idx[q]]] * w[q]).sum();
            want = want.max(v.abs());
        }
        assert!((lhs - want).abs() < 1e-12);
    }

    #[test]
    fn irc_is_scale_free() {
        let x = deterministic_matrix(50, 4);
        let mut scaled = x.clone();
        for i in 0..50 {
            scaled[[i, 1]] *= 37.5;
            scaled[[i, 3]] *= 0.004;
        }
        let (_, a) = irc_check(&x, &[0, 1], &[1.0, 1.0]).unwrap();
        let (_, b) = irc_check(&scaled, &[0, 1], &[1.0, 1.0]).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn constant_column_is_rejected() {
        let mut x = deterministic_matrix(30, 3);
        for i in 0..30 {
            x[[i, 2]] = 5.0;
        }
        assert!(matches!(
            irc_check(&x, &[0], &[1.0]),
            Err(EvalError::ZeroVarianceColumn { column: 2 })
        ));
    }
}
