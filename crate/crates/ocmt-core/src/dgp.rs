//! Synthetic-data engine for the selection experiments: AR(1) covariates
//! with GARCH(1,1) innovations mixed through a time-varying correlation
//! matrix, structural-break coefficient paths, simulation-calibrated noise
//! scale, and a seeded replication harness that scores every requested
//! selector/weighting pipeline on one-step-ahead forecasts.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::data::TimeSeriesDataset;
use crate::downweight::{GridLabel, WeightScheme};
use crate::forecast::{grid_forecast, Protocol, SelectorSpec};
use crate::linalg;

/// The first four covariates carry the signal.
pub const N_SIGNALS: usize = 4;

// noise GARCH(1,1)
const ALPHA1_U: f64 = 0.2;
const ALPHA2_U: f64 = 0.75;
// coefficient-shock process
const RHO_ETA: f64 = 0.5;
const ALPHA1_ETA: f64 = 0.2;
const ALPHA2_ETA: f64 = 0.75;
/// Deterministic share of the slope second moment under instability.
const DETERMINISTIC_SHARE: f64 = 0.95;
const ETA_MOMENT_PATHS: usize = 10_000;
const CAL_BATCH: usize = 10_000;
const CAL_TOL: f64 = 0.001;
const CAL_MAX_ITERS: usize = 60;
/// Covariate count used inside noise calibration. The signal block of the
/// covariate covariance is the same Toeplitz matrix for every N, so the
/// calibrated scale is shared across N cells of the same (dynamic, fit, T).
const CAL_N: usize = 20;
/// Fixed calibration seed so the noise scale depends only on
/// (dynamic, fit, T), never on the experiment's master seed.
pub const CAL_SEED: u64 = 929_180_471;

#[derive(Debug, Error)]
pub enum DgpError {
    #[error("need at least {N_SIGNALS} covariates, got {n}")]
    TooFewCovariates { n: usize },
    #[error("need a sample of at least 20 periods, got {t}")]
    SampleTooShort { t: usize },
    #[error("replication count must be positive")]
    NoReplications,
    #[error("simulated coefficient-shock moment is not finite or not positive")]
    NonFiniteMoment,
    #[error(
        "noise calibration failed to bracket the target fit: R² = {r2_lo:.4} at τ = {lo:.6}, R² = {r2_hi:.4} at τ = {hi:.6}"
    )]
    BracketFailure {
        lo: f64,
        hi: f64,
        r2_lo: f64,
        r2_hi: f64,
    },
    #[error("calibration regression failed: {message}")]
    CalibrationRegression { message: String },
    #[error("replication {rep} failed: {message}")]
    Replication { rep: usize, message: String },
}

/// Target in-sample fit of the infeasible signal regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitTarget {
    Low,
    High,
}

impl FitTarget {
    pub fn r_squared(self) -> f64 {
        match self {
            FitTarget::Low => 0.30,
            FitTarget::High => 0.50,
        }
    }
}

impl std::fmt::Display for FitTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FitTarget::Low => "low",
            FitTarget::High => "high",
        })
    }
}

#[derive(Debug, Clone)]
pub struct DgpConfig {
    pub n: usize,
    pub t: usize,
    pub dynamic: bool,
    pub instability: bool,
    pub fit_target: FitTarget,
    pub replications: usize,
    pub master_seed: u64,
}

impl DgpConfig {
    pub fn validate(&self) -> Result<(), DgpError> {
        if self.n < N_SIGNALS {
            return Err(DgpError::TooFewCovariates { n: self.n });
        }
        if self.t < 20 {
            return Err(DgpError::SampleTooShort { t: self.t });
        }
        if self.replications == 0 {
            return Err(DgpError::NoReplications);
        }
        Ok(())
    }
}

/// Nearest integer, rounding halves away from zero.
fn nearest(v: f64) -> usize {
    v.round() as usize
}

/// Piecewise-constant parameter paths over periods 1..=T+1; the extra row
/// extends the final regime so it can serve the forecast period.
#[derive(Debug, Clone)]
pub struct BreakSchedule {
    /// Deterministic slope means, one row per period, four signal columns.
    pub b_path: Array2<f64>,
    /// Signal means entering the intercept, same layout.
    pub mu_path: Array2<f64>,
    pub rho_y_path: Array1<f64>,
    /// Correlation parameter of the covariate mixing matrix.
    pub r_path: Array1<f64>,
}

impl BreakSchedule {
    pub fn for_config(cfg: &DgpConfig) -> BreakSchedule {
        let t = cfg.t;
        let rows = t + 1;
        let third = nearest(t as f64 / 3.0);
        let two_thirds = nearest(2.0 * t as f64 / 3.0);
        let half = nearest(t as f64 / 2.0);
        let mut b_path = Array2::ones((rows, N_SIGNALS));
        let mut mu_path = Array2::ones((rows, N_SIGNALS));
        let mut rho_y_path = Array1::zeros(rows);
        let mut r_path = Array1::zeros(rows);
        for i in 0..rows {
            let period = i + 1;
            r_path[i] = if period <= half { 0.9 } else { 0.4 };
            if cfg.instability {
                let (b12, mu12) = if period <= third {
                    (2.0, 0.6)
                } else if period <= two_thirds {
                    (0.0, 1.5)
                } else {
                    (1.0, 0.9)
                };
                let (b34, mu34) = if period <= half { (0.5, 0.9) } else { (1.5, 1.1) };
                b_path[[i, 0]] = b12;
                b_path[[i, 1]] = b12;
                b_path[[i, 2]] = b34;
                b_path[[i, 3]] = b34;
                mu_path[[i, 0]] = mu12;
                mu_path[[i, 1]] = mu12;
                mu_path[[i, 2]] = mu34;
                mu_path[[i, 3]] = mu34;
            }
            if cfg.dynamic {
                rho_y_path[i] = if cfg.instability {
                    if period <= half {
                        0.2
                    } else {
                        0.4
                    }
                } else {
                    0.3
                };
            }
        }
        BreakSchedule {
            b_path,
            mu_path,
            rho_y_path,
            r_path,
        }
    }
}

/// Per-covariate AR and GARCH parameters, redrawn each replication.
#[derive(Debug, Clone)]
pub struct GarchParams {
    pub rho_eps: Vec<f64>,
    pub alpha1_eps: Vec<f64>,
    pub alpha2_eps: Vec<f64>,
}

impl GarchParams {
    pub fn draw(n: usize, rng: &mut ChaCha8Rng) -> GarchParams {
        let mut rho_eps = Vec::with_capacity(n);
        let mut alpha1_eps = Vec::with_capacity(n);
        let mut alpha2_eps = Vec::with_capacity(n);
        for _ in 0..n {
            rho_eps.push(rng.random_range(0.0..0.95));
            alpha1_eps.push(rng.random_range(0.0..0.2));
            alpha2_eps.push(rng.random_range(0.6..0.75));
        }
        GarchParams {
            rho_eps,
            alpha1_eps,
            alpha2_eps,
        }
    }
}

/// AR(1) state series with GARCH(1,1) innovations. The t = 0 state is a
/// standard normal draw that doubles as the innovation feeding the first
/// variance update; the conditional variance starts at its unit
/// unconditional value (omega = 1 - a1 - a2 makes both equal).
fn ar_garch_series(len: usize, rho: f64, a1: f64, a2: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let omega = 1.0 - a1 - a2;
    let scale = (1.0 - rho * rho).sqrt();
    let mut state: f64 = rng.sample(StandardNormal);
    let mut e_prev = state;
    let mut sig2 = 1.0;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        sig2 = omega + a1 * e_prev * e_prev + a2 * sig2;
        let e: f64 = rng.sample::<f64, _>(StandardNormal) * sig2.sqrt();
        state = rho * state + scale * e;
        out.push(state);
        e_prev = e;
    }
    out
}

/// Serially uncorrelated GARCH(1,1) noise (the regression error process).
fn garch_noise_series(len: usize, a1: f64, a2: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let omega = 1.0 - a1 - a2;
    let mut prev: f64 = rng.sample(StandardNormal);
    let mut sig2 = 1.0;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        sig2 = omega + a1 * prev * prev + a2 * sig2;
        let u: f64 = rng.sample::<f64, _>(StandardNormal) * sig2.sqrt();
        out.push(u);
        prev = u;
    }
    out
}

/// Symmetric square roots of the Toeplitz correlation matrices appearing in
/// a schedule. The matrices depend only on (r, N), so one cache is shared
/// by every replication of an experiment.
pub struct CorrelationRoots {
    entries: Vec<(f64, Array2<f64>)>,
}

impl CorrelationRoots {
    pub fn build(schedule: &BreakSchedule, n: usize) -> CorrelationRoots {
        let mut entries: Vec<(f64, Array2<f64>)> = Vec::new();
        for &r in schedule.r_path.iter() {
            if entries.iter().any(|(v, _)| *v == r) {
                continue;
            }
            let m = Array2::from_shape_fn((n, n), |(i, j)| {
                r.powi((i as i32 - j as i32).abs())
            });
            entries.push((r, linalg::sym_sqrt(&m)));
        }
        CorrelationRoots { entries }
    }

    fn get(&self, r: f64) -> &Array2<f64> {
        &self
            .entries
            .iter()
            .find(|(v, _)| *v == r)
            .expect("correlation root built from the same schedule")
            .1
    }
}

/// Covariate panel over periods 1..=T+1: independent AR-GARCH innovation
/// series mixed through the period's correlation square root. The extra
/// row supplies the forecast-period regressors.
pub fn gen_covariates(
    cfg: &DgpConfig,
    schedule: &BreakSchedule,
    params: &GarchParams,
    roots: &CorrelationRoots,
    rng: &mut ChaCha8Rng,
) -> Array2<f64> {
    let rows = cfg.t + 1;
    let n = cfg.n;
    let eps: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            ar_garch_series(
                rows,
                params.rho_eps[i],
                params.alpha1_eps[i],
                params.alpha2_eps[i],
                rng,
            )
        })
        .collect();
    let mut x = Array2::zeros((rows, n));
    for ti in 0..rows {
        let root = roots.get(schedule.r_path[ti]);
        for i in 0..n {
            let mut acc = 0.0;
            for (j, e) in eps.iter().enumerate() {
                acc += root[[i, j]] * e[ti];
            }
            x[[ti, i]] = acc;
        }
    }
    x
}

/// Slope paths over periods 1..=T+1. Stable configurations return the
/// deterministic means untouched (all ones) and draw nothing.
pub fn gen_coefficients(
    cfg: &DgpConfig,
    schedule: &BreakSchedule,
    tau_eta: &[f64; N_SIGNALS],
    rng: &mut ChaCha8Rng,
) -> Array2<f64> {
    let mut beta = schedule.b_path.clone();
    if cfg.instability {
        let rows = cfg.t + 1;
        for j in 0..N_SIGNALS {
            let eta = ar_garch_series(rows, RHO_ETA, ALPHA1_ETA, ALPHA2_ETA, rng);
            for i in 0..rows {
                beta[[i, j]] += tau_eta[j] * eta[i];
            }
        }
    }
    beta
}

/// Average second moment of the coefficient-shock process over a sample of
/// length t, estimated from simulated paths.
fn eta_second_moment(t: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX); // keep clear of replication streams
    let mut acc = 0.0;
    for _ in 0..ETA_MOMENT_PATHS {
        let path = ar_garch_series(t, RHO_ETA, ALPHA1_ETA, ALPHA2_ETA, &mut rng);
        acc += path.iter().map(|v| v * v).sum::<f64>();
    }
    acc / (ETA_MOMENT_PATHS * t) as f64
}

/// Coefficient-shock scales chosen so the deterministic slope component
/// carries a 0.95 share of the average squared slope:
/// (T^-1 Σ b²) / (T^-1 Σ E[β²]) = 0.95, solved for τ given the simulated
/// shock moment. Stable configurations get zeros.
pub fn tau_eta_values(
    cfg: &DgpConfig,
    schedule: &BreakSchedule,
    seed: u64,
) -> Result<[f64; N_SIGNALS], DgpError> {
    if !cfg.instability {
        return Ok([0.0; N_SIGNALS]);
    }
    let h = eta_second_moment(cfg.t, seed);
    if !h.is_finite() || h <= 0.0 {
        return Err(DgpError::NonFiniteMoment);
    }
    let mut tau = [0.0; N_SIGNALS];
    for (j, tj) in tau.iter_mut().enumerate() {
        // mean over in-sample periods 1..=T only
        let b2: f64 = (0..cfg.t)
            .map(|i| schedule.b_path[[i, j]] * schedule.b_path[[i, j]])
            .sum::<f64>()
            / cfg.t as f64;
        *tj = (b2 * (1.0 - DETERMINISTIC_SHARE) / DETERMINISTIC_SHARE / h).sqrt();
    }
    Ok(tau)
}

/// Target recursion over periods 1..=T+1. Returns (y_0, y) with y[i] the
/// value at period i + 1. The intercept uses the realized slopes:
/// d_t = Σ_j β_jt μ_jt, and y_0 = d_1 / (1 - ρ_{y,1}).
pub fn gen_target(
    cfg: &DgpConfig,
    schedule: &BreakSchedule,
    x: &Array2<f64>,
    beta: &Array2<f64>,
    tau_u: f64,
    u: &[f64],
) -> (f64, Array1<f64>) {
    let rows = cfg.t + 1;
    let d = |i: usize| -> f64 {
        (0..N_SIGNALS)
            .map(|j| beta[[i, j]] * schedule.mu_path[[i, j]])
            .sum()
    };
    let y0 = d(0) / (1.0 - schedule.rho_y_path[0]);
    let mut y = Array1::zeros(rows);
    let mut prev = y0;
    for i in 0..rows {
        let mut v = d(i) + schedule.rho_y_path[i] * prev + tau_u * u[i];
        for j in 0..N_SIGNALS {
            v += beta[[i, j]] * x[[i, j]];
        }
        y[i] = v;
        prev = v;
    }
    (y0, y)
}

fn rep_rng(master_seed: u64, rep: u64, component: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(rep * 4 + component);
    rng
}

/// One calibration replication's τ-independent ingredients: the target
/// recursion is rebuilt per candidate noise scale from these.
struct CalRep {
    signals: Array2<f64>,
    beta: Array2<f64>,
    d: Vec<f64>,
    u: Vec<f64>,
}

struct CalibrationBatch {
    reps: Vec<CalRep>,
    rho_y: Array1<f64>,
    t: usize,
    dynamic: bool,
}

impl CalibrationBatch {
    fn generate(
        cfg: &DgpConfig,
        schedule: &BreakSchedule,
        roots: &CorrelationRoots,
        tau_eta: &[f64; N_SIGNALS],
        seed: u64,
    ) -> CalibrationBatch {
        let reps = (0..CAL_BATCH)
            .map(|r| {
                let mut rng_x = rep_rng(seed, r as u64, 0);
                let mut rng_b = rep_rng(seed, r as u64, 1);
                let mut rng_u = rep_rng(seed, r as u64, 2);
                let params = GarchParams::draw(cfg.n, &mut rng_x);
                let x = gen_covariates(cfg, schedule, &params, roots, &mut rng_x);
                let beta = gen_coefficients(cfg, schedule, tau_eta, &mut rng_b);
                let u = garch_noise_series(cfg.t + 1, ALPHA1_U, ALPHA2_U, &mut rng_u);
                let rows = cfg.t + 1;
                let mut signals = Array2::zeros((rows, N_SIGNALS));
                for i in 0..rows {
                    for j in 0..N_SIGNALS {
                        signals[[i, j]] = x[[i, j]];
                    }
                }
                let d = (0..rows)
                    .map(|i| {
                        (0..N_SIGNALS)
                            .map(|j| beta[[i, j]] * schedule.mu_path[[i, j]])
                            .sum()
                    })
                    .collect();
                CalRep {
                    signals,
                    beta,
                    d,
                    u,
                }
            })
            .collect();
        CalibrationBatch {
            reps,
            rho_y: schedule.rho_y_path.clone(),
            t: cfg.t,
            dynamic: cfg.dynamic,
        }
    }

    /// Regressor rows and targets of the infeasible regression (constant,
    /// four signals, lagged target when dynamic) at the candidate noise
    /// scale.
    fn rep_design(&self, rep: &CalRep, tau: f64) -> (Array2<f64>, Array1<f64>) {
        let t = self.t;
        let mut y = vec![0.0; t + 1];
        let mut prev = rep.d[0] / (1.0 - self.rho_y[0]);
        for i in 0..t {
            let mut v = rep.d[i] + self.rho_y[i] * prev + tau * rep.u[i];
            for j in 0..N_SIGNALS {
                v += rep.beta[[i, j]] * rep.signals[[i, j]];
            }
            y[i + 1] = v;
            y[0] = if i == 0 { prev } else { y[0] };
            prev = v;
        }
        let m = 1 + N_SIGNALS + usize::from(self.dynamic);
        let mut w = Array2::zeros((t, m));
        let yy = Array1::from_iter(y[1..=t].iter().copied());
        for i in 0..t {
            w[[i, 0]] = 1.0;
            for j in 0..N_SIGNALS {
                w[[i, 1 + j]] = rep.signals[[i, j]];
            }
            if self.dynamic {
                w[[i, 1 + N_SIGNALS]] = y[i];
            }
        }
        (w, yy)
    }

    /// Mean over the batch of the per-replication in-sample R². The sample
    /// fit at the experiment's own T is what gets matched, so the
    /// calibrated scale carries the finite-sample overfit of a T-row
    /// regression and shrinks as T grows.
    fn mean_r2(&self, tau: f64) -> Result<f64, DgpError> {
        let m = 1 + N_SIGNALS + usize::from(self.dynamic);
        let mut acc = 0.0;
        for rep in &self.reps {
            let (w, yy) = self.rep_design(rep, tau);
            let mut wtw = Array2::zeros((m, m));
            let mut wty = Array1::zeros(m);
            let mut sum_y = 0.0;
            let mut sum_y2 = 0.0;
            for i in 0..self.t {
                for a in 0..m {
                    wty[a] += w[[i, a]] * yy[i];
                    for b in a..m {
                        wtw[[a, b]] += w[[i, a]] * w[[i, b]];
                    }
                }
                sum_y += yy[i];
                sum_y2 += yy[i] * yy[i];
            }
            for a in 0..m {
                for b in 0..a {
                    wtw[[a, b]] = wtw[[b, a]];
                }
            }
            let factor =
                linalg::spd_factor(&wtw).map_err(|col| DgpError::CalibrationRegression {
                    message: format!("normal equations break down at column {col}"),
                })?;
            let coefs = factor.solve(&wty);
            let ssr = sum_y2 - coefs.dot(&wty);
            let sst = sum_y2 - sum_y * sum_y / self.t as f64;
            if sst <= 0.0 {
                return Err(DgpError::CalibrationRegression {
                    message: "target has zero variance".into(),
                });
            }
            acc += 1.0 - ssr / sst;
        }
        Ok(acc / self.reps.len() as f64)
    }
}

#[doc(hidden)]
pub fn run_experiment_at(
    cfg: &DgpConfig,
    methods: &[MethodSpec],
    tau_u: f64,
) -> Result<ExperimentSummary, DgpError> {
    cfg.validate()?;
    let schedule = BreakSchedule::for_config(cfg);
    let roots = CorrelationRoots::build(&schedule, cfg.n);
    let tau_eta = tau_eta_values(cfg, &schedule, CAL_SEED)?;
    let per_rep: Vec<Result<Vec<ReplicationScore>, String>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| replicate(cfg, &schedule, &roots, &tau_eta, tau_u, methods, rep))
        .collect();
    let mut failures = Vec::new();
    let mut acc: Vec<(f64, f64, f64, f64, usize)> = vec![(0.0, 0.0, 0.0, 0.0, 0); methods.len()];
    for (rep, res) in per_rep.into_iter().enumerate() {
        match res {
            Ok(scores) => {
                for (a, s) in acc.iter_mut().zip(scores) {
                    a.0 += s.k_hat;
                    a.1 += s.tpr;
                    a.2 += s.fpr;
                    a.3 += s.squared_error;
                    a.4 += 1;
                }
            }
            Err(message) => failures.push((rep, message)),
        }
    }
    let cells = methods
        .iter()
        .zip(&acc)
        .map(|(m, a)| {
            let n = a.4 as f64;
            SummaryCell {
                label: m.label.clone(),
                protocol: m.protocol,
                weights: if m.protocol == Protocol::NoWeighting {
                    GridLabel::None
                } else {
                    m.scheme.label
                },
                mean_k_hat: a.0 / n,
                mean_tpr: a.1 / n,
                mean_fpr: a.2 / n,
                msfe: a.3 / n,
                successes: a.4,
            }
        })
        .collect();
    Ok(ExperimentSummary {
        cells,
        replications: cfg.replications,
        failures,
        tau_u,
    })
}

#[doc(hidden)]
pub fn ocmt_freq_probe(cfg: &DgpConfig, tau_u: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    use crate::ocmt::{ocmt_select, OcmtConfig};
    let schedule = BreakSchedule::for_config(cfg);
    let roots = CorrelationRoots::build(&schedule, cfg.n);
    let tau_eta = tau_eta_values(cfg, &schedule, CAL_SEED).unwrap();
    let per_rep: Vec<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng_x = rep_rng(cfg.master_seed, rep as u64, 0);
            let mut rng_b = rep_rng(cfg.master_seed, rep as u64, 1);
            let mut rng_u = rep_rng(cfg.master_seed, rep as u64, 2);
            let params = GarchParams::draw(cfg.n, &mut rng_x);
            let x = gen_covariates(cfg, &schedule, &params, &roots, &mut rng_x);
            let beta = gen_coefficients(cfg, &schedule, &tau_eta, &mut rng_b);
            let u = garch_noise_series(cfg.t + 1, ALPHA1_U, ALPHA2_U, &mut rng_u);
            let (y0, y) = gen_target(cfg, &schedule, &x, &beta, tau_u, &u);
            let t = cfg.t;
            let mut x_in = Array2::zeros((t, cfg.n));
            for i in 0..t {
                for j in 0..cfg.n {
                    x_in[[i, j]] = x[[i, j]];
                }
            }
            let y_in = Array1::from_iter(y.iter().take(t).copied());
            let x_names: Vec<String> = (1..=cfg.n).map(|j| format!("x{j}")).collect();
            let ds = if cfg.dynamic {
                let mut z = Array2::zeros((t, 2));
                for i in 0..t {
                    z[[i, 0]] = 1.0;
                    z[[i, 1]] = if i == 0 { y0 } else { y[i - 1] };
                }
                TimeSeriesDataset::new(
                    y_in,
                    x_in,
                    z,
                    "y",
                    x_names,
                    vec!["const".into(), "y_lag".into()],
                    true,
                )
                .unwrap()
            } else {
                TimeSeriesDataset::with_intercept_only(y_in, x_in, "y", x_names).unwrap()
            };
            let sel = ocmt_select(&ds, &OcmtConfig::default()).unwrap();
            let ts = sel.t_stats.unwrap();
            let inc: Vec<f64> = sel
                .included
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect();
            let tv: Vec<f64> = ts.iter().copied().collect();
            let t2: Vec<f64> = ts.iter().map(|v| v * v).collect();
            // same replication scored with no conditioning at all
            let raw = TimeSeriesDataset::new(
                ds.y.clone(),
                ds.x.clone(),
                Array2::zeros((t, 0)),
                "y",
                (1..=cfg.n).map(|j| format!("x{j}")).collect(),
                vec![],
                false,
            )
            .unwrap();
            let sel0 = ocmt_select(&raw, &OcmtConfig::default()).unwrap();
            let inc0: Vec<f64> = sel0
                .included
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect();
            (inc, tv, t2, inc0)
        })
        .collect();
    let n = cfg.n;
    let r = cfg.replications as f64;
    let mut freq = vec![0.0; n];
    let mut tmean = vec![0.0; n];
    let mut t2mean = vec![0.0; n];
    let mut freq0 = vec![0.0; n];
    for (inc, tv, t2, inc0) in per_rep {
        for j in 0..n {
            freq[j] += inc[j] / r;
            tmean[j] += tv[j] / r;
            t2mean[j] += t2[j] / r;
            freq0[j] += inc0[j] / r;
        }
    }
    (freq, tmean, t2mean, freq0)
}

#[doc(hidden)]
pub fn r2_probe(cfg: &DgpConfig, seed: u64, tau: f64) -> (f64, f64) {
    let cal_cfg = calibration_config(cfg);
    let schedule = BreakSchedule::for_config(&cal_cfg);
    let roots = CorrelationRoots::build(&schedule, cal_cfg.n);
    let tau_eta = tau_eta_values(&cal_cfg, &schedule, seed).unwrap();
    let batch = CalibrationBatch::generate(&cal_cfg, &schedule, &roots, &tau_eta, seed);
    let mean = batch.mean_r2(tau).unwrap();
    // pooled: single regression over the stacked batch
    let m = 1 + N_SIGNALS + usize::from(batch.dynamic);
    let mut wtw = Array2::zeros((m, m));
    let mut wty = Array1::zeros(m);
    let mut sum_y = 0.0;
    let mut sum_y2 = 0.0;
    let mut rows = 0usize;
    for rep in &batch.reps {
        let (w, yy) = batch.rep_design(rep, tau);
        for i in 0..batch.t {
            for a in 0..m {
                wty[a] += w[[i, a]] * yy[i];
                for b in a..m {
                    wtw[[a, b]] += w[[i, a]] * w[[i, b]];
                }
            }
            sum_y += yy[i];
            sum_y2 += yy[i] * yy[i];
        }
        rows += batch.t;
    }
    for a in 0..m {
        for b in 0..a {
            wtw[[a, b]] = wtw[[b, a]];
        }
    }
    let factor = linalg::spd_factor(&wtw).unwrap();
    let coefs = factor.solve(&wty);
    let ssr = sum_y2 - coefs.dot(&wty);
    let sst = sum_y2 - sum_y * sum_y / rows as f64;
    (mean, 1.0 - ssr / sst)
}

fn calibration_config(cfg: &DgpConfig) -> DgpConfig {
    let mut cal = cfg.clone();
    cal.instability = true;
    cal.n = CAL_N;
    cal
}

/// Noise scale matching the target fit, found by bisection on the batch
/// R² with common random numbers across candidate values. Calibration
/// always runs on the unstable-parameter variant of the design; the
/// matching stable-parameter experiments reuse the value.
pub fn calibrate_tau_u(cfg: &DgpConfig, seed: u64) -> Result<f64, DgpError> {
    let cal_cfg = calibration_config(cfg);
    let schedule = BreakSchedule::for_config(&cal_cfg);
    let roots = CorrelationRoots::build(&schedule, cal_cfg.n);
    let tau_eta = tau_eta_values(&cal_cfg, &schedule, seed)?;
    let batch = CalibrationBatch::generate(&cal_cfg, &schedule, &roots, &tau_eta, seed);
    let target = cfg.fit_target.r_squared();
    // R² falls as the noise scale grows; slide the bracket until it
    // straddles the target
    let mut lo = 0.5;
    let mut hi = 2.0;
    let mut r2_lo = batch.mean_r2(lo)?;
    let mut r2_hi = batch.mean_r2(hi)?;
    let mut expansions = 0;
    while r2_lo < target {
        hi = lo;
        r2_hi = r2_lo;
        lo *= 0.5;
        r2_lo = batch.mean_r2(lo)?;
        expansions += 1;
        if expansions > 40 {
            return Err(DgpError::BracketFailure { lo, hi, r2_lo, r2_hi });
        }
    }
    while r2_hi > target {
        lo = hi;
        r2_lo = r2_hi;
        hi *= 2.0;
        r2_hi = batch.mean_r2(hi)?;
        expansions += 1;
        if expansions > 40 {
            return Err(DgpError::BracketFailure { lo, hi, r2_lo, r2_hi });
        }
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..CAL_MAX_ITERS {
        mid = 0.5 * (lo + hi);
        let r2 = batch.mean_r2(mid)?;
        if (r2 - target).abs() <= CAL_TOL {
            return Ok(mid);
        }
        if r2 > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// One selector/protocol/grid pipeline to score inside an experiment.
#[derive(Debug, Clone)]
pub struct MethodSpec {
    pub label: String,
    pub selector: SelectorSpec,
    pub protocol: Protocol,
    pub scheme: WeightScheme,
}

/// Per-method averages over the successful replications.
#[derive(Debug, Clone)]
pub struct SummaryCell {
    pub label: String,
    pub protocol: Protocol,
    pub weights: GridLabel,
    pub mean_k_hat: f64,
    pub mean_tpr: f64,
    pub mean_fpr: f64,
    pub msfe: f64,
    pub successes: usize,
}

#[derive(Debug)]
pub struct ExperimentSummary {
    pub cells: Vec<SummaryCell>,
    pub replications: usize,
    pub failures: Vec<(usize, String)>,
    pub tau_u: f64,
}

/// Scores of one method on one replication. Legs of a weighting grid are
/// averaged: the selection counts are grid means and the squared error is
/// that of the grid-averaged forecast.
#[derive(Debug, Clone)]
pub struct ReplicationScore {
    pub k_hat: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub squared_error: f64,
}

fn replicate(
    cfg: &DgpConfig,
    schedule: &BreakSchedule,
    roots: &CorrelationRoots,
    tau_eta: &[f64; N_SIGNALS],
    tau_u: f64,
    methods: &[MethodSpec],
    rep: usize,
) -> Result<Vec<ReplicationScore>, String> {
    let mut rng_x = rep_rng(cfg.master_seed, rep as u64, 0);
    let mut rng_b = rep_rng(cfg.master_seed, rep as u64, 1);
    let mut rng_u = rep_rng(cfg.master_seed, rep as u64, 2);
    let mut rng_cv = rep_rng(cfg.master_seed, rep as u64, 3);
    let params = GarchParams::draw(cfg.n, &mut rng_x);
    let x = gen_covariates(cfg, schedule, &params, roots, &mut rng_x);
    let beta = gen_coefficients(cfg, schedule, tau_eta, &mut rng_b);
    let u = garch_noise_series(cfg.t + 1, ALPHA1_U, ALPHA2_U, &mut rng_u);
    let cv_seed: u64 = rng_cv.random();
    let (y0, y) = gen_target(cfg, schedule, &x, &beta, tau_u, &u);

    let t = cfg.t;
    let mut x_in = Array2::zeros((t, cfg.n));
    for i in 0..t {
        for j in 0..cfg.n {
            x_in[[i, j]] = x[[i, j]];
        }
    }
    let y_in = Array1::from_iter(y.iter().take(t).copied());
    let x_names: Vec<String> = (1..=cfg.n).map(|j| format!("x{j}")).collect();
    let ds = if cfg.dynamic {
        let mut z = Array2::zeros((t, 2));
        for i in 0..t {
            z[[i, 0]] = 1.0;
            z[[i, 1]] = if i == 0 { y0 } else { y[i - 1] };
        }
        TimeSeriesDataset::new(
            y_in,
            x_in,
            z,
            "y",
            x_names,
            vec!["const".into(), "y_lag".into()],
            true,
        )
    } else {
        TimeSeriesDataset::with_intercept_only(y_in, x_in, "y", x_names)
    }
    .map_err(|e| e.to_string())?;

    let z_next = if cfg.dynamic {
        Array1::from(vec![1.0, y[t - 1]])
    } else {
        Array1::from(vec![1.0])
    };
    let x_next = Array1::from_iter((0..cfg.n).map(|j| x[[t, j]]));
    let realized = y[t];

    let mut scores = Vec::with_capacity(methods.len());
    for m in methods {
        let selector = match &m.selector {
            // per-replication cross-validation seed
            SelectorSpec::Lasso { folds, .. } => SelectorSpec::Lasso {
                folds: *folds,
                seed: cv_seed,
            },
            SelectorSpec::ALasso { folds, .. } => SelectorSpec::ALasso {
                folds: *folds,
                seed: cv_seed,
            },
            other => other.clone(),
        };
        let record = grid_forecast(
            &ds,
            m.protocol,
            &selector,
            &m.scheme,
            &z_next,
            &x_next,
            Some(realized),
        )
        .map_err(|e| format!("method {}: {e}", m.label))?;
        let mut k_acc = 0.0;
        let mut tpr_acc = 0.0;
        let mut fpr_acc = 0.0;
        for leg in &record.legs {
            let hits = leg.included[..N_SIGNALS].iter().filter(|&&b| b).count();
            let false_alarms = leg.included[N_SIGNALS..].iter().filter(|&&b| b).count();
            k_acc += (hits + false_alarms) as f64;
            tpr_acc += hits as f64 / N_SIGNALS as f64;
            // false-alarm count over the full covariate count, so that
            // k_hat = signals * tpr + n * fpr holds in the averages
            fpr_acc += false_alarms as f64 / cfg.n as f64;
        }
        let legs = record.legs.len() as f64;
        scores.push(ReplicationScore {
            k_hat: k_acc / legs,
            tpr: tpr_acc / legs,
            fpr: fpr_acc / legs,
            squared_error: record
                .squared_error()
                .expect("realized value was supplied"),
        });
    }
    Ok(scores)
}

/// Score a single replication end to end. Replication scores are a pure
/// function of the configuration (minus the replication count) and the
/// replication index, which is what keeps grown campaigns' early
/// replications unchanged.
pub fn run_replication(
    cfg: &DgpConfig,
    methods: &[MethodSpec],
    rep: usize,
) -> Result<Vec<ReplicationScore>, DgpError> {
    cfg.validate()?;
    let schedule = BreakSchedule::for_config(cfg);
    let roots = CorrelationRoots::build(&schedule, cfg.n);
    let tau_eta = tau_eta_values(cfg, &schedule, CAL_SEED)?;
    let tau_u = calibrate_tau_u(cfg, CAL_SEED)?;
    replicate(cfg, &schedule, &roots, &tau_eta, tau_u, methods, rep)
        .map_err(|message| DgpError::Replication { rep, message })
}

/// Run every replication of an experiment and average the per-method scores.
/// Replication failures are recorded and excluded from the averages, and
/// results do not depend on the number of worker threads.
pub fn run_experiment(
    cfg: &DgpConfig,
    methods: &[MethodSpec],
) -> Result<ExperimentSummary, DgpError> {
    cfg.validate()?;
    let schedule = BreakSchedule::for_config(cfg);
    let roots = CorrelationRoots::build(&schedule, cfg.n);
    let tau_eta = tau_eta_values(cfg, &schedule, CAL_SEED)?;
    let tau_u = calibrate_tau_u(cfg, CAL_SEED)?;
    let per_rep: Vec<Result<Vec<ReplicationScore>, String>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| replicate(cfg, &schedule, &roots, &tau_eta, tau_u, methods, rep))
        .collect();

    #[derive(Default, Clone)]
    struct Accum {
        k: f64,
        tpr: f64,
        fpr: f64,
        se: f64,
        n: usize,
    }
    let mut acc = vec![Accum::default(); methods.len()];
    let mut failures = Vec::new();
    for (rep, res) in per_rep.into_iter().enumerate() {
        match res {
            Ok(scores) => {
                for (a, s) in acc.iter_mut().zip(scores) {
                    a.k += s.k_hat;
                    a.tpr += s.tpr;
                    a.fpr += s.fpr;
                    a.se += s.squared_error;
                    a.n += 1;
                }
            }
            Err(message) => failures.push((rep, message)),
        }
    }
    let cells = methods
        .iter()
        .zip(&acc)
        .map(|(m, a)| {
            let n = a.n as f64;
            SummaryCell {
                label: m.label.clone(),
                protocol: m.protocol,
                weights: if m.protocol == Protocol::NoWeighting {
                    GridLabel::None
                } else {
                    m.scheme.label
                },
                mean_k_hat: a.k / n,
                mean_tpr: a.tpr / n,
                mean_fpr: a.fpr / n,
                msfe: a.se / n,
                successes: a.n,
            }
        })
        .collect();
    Ok(ExperimentSummary {
        cells,
        replications: cfg.replications,
        failures,
        tau_u,
    })
}
