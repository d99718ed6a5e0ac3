//! Excitation, tracking and stability measurements.
//!
//! * [`excitation_report`] estimates the cooperative excitation sequence
//!   `λ_t` over windows of length `h`, its single-sensor analogues `λ′_t`, and
//!   applies the sufficient condition `inf_t λ_t ≥ λ_0 > 0`.
//! * [`tracking_report`] estimates `‖Θ̃_t‖_{L_p}` by Monte Carlo.
//! * [`decay_fit`] fits an exponential rate to `‖Ψ(t, 0)‖`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::engine::{run, EngineError, RunOptions, TrajectoryRecord};
use crate::linalg::{kron_identity, lambda_min, lambda_min_with_vector, spectral_norm, Matrix, Vector};
use crate::oracle::{brute_force_lambda, sensor_window_matrix, window_matrix, OracleError};
use crate::scenario::{replay_replication, Scenario, ScenarioError, TopologyModel};
use crate::topology::{diameter, matrix_power_min_entry};

/// Excitation levels at or below this are treated as zero.
pub const EXCITATION_FLOOR: f64 = 1e-10;

/// Label attached to every excitation verdict.
pub const VERDICT_CRITERION: &str = "sufficient condition inf_t lambda_t >= lambda_0 > 0";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("window length {h} leaves no complete window in horizon {horizon}")]
    WindowExceedsHorizon { h: usize, horizon: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// How `λ̂_t` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcitationEstimator {
    /// Average over independent replications; the regressors are open loop,
    /// so conditioning on the past is vacuous.
    MonteCarlo,
    /// Closed-loop regressors: only realized sample-path values are reported.
    SamplePathOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowExcitation {
    pub index: usize,
    /// Steps `first..=last` of the regressor sequence.
    pub first: usize,
    pub last: usize,
    pub lambda_hat: Option<f64>,
    pub std_error: Option<f64>,
    /// From the first replication.
    pub lambda_realized: f64,
    pub sensor_lambda_hat: Vec<Option<f64>>,
    pub sensor_std_error: Vec<Option<f64>>,
    pub sensor_lambda_realized: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExcitationVerdict {
    pub lambda_0: f64,
    pub pass: bool,
}

impl ExcitationVerdict {
    fn from_lower_bound(lambda_0: f64) -> Self {
        Self { lambda_0, pass: lambda_0 > EXCITATION_FLOOR }
    }
}

/// Numbers the stability results are stated in terms of. Diagnostic only.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ExcitationDiagnostics {
    pub diameter: Option<usize>,
    pub a_min: Option<f64>,
    /// `1 − λ_0`, the surrogate rate of `{1 − λ_t}`.
    pub lambda_rate: Option<f64>,
    /// `λ^{a_min²/(32pmh(4h+D_G−1))}`, fixed topologies only.
    pub alpha_lower_bound: Option<f64>,
    /// Smallest `l` with `P^l > 0`, switching topologies only.
    pub q0: Option<usize>,
    /// `n·s·q0`, the switching counterpart of the diameter.
    pub switching_diameter: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcitationReport {
    pub h: usize,
    pub replications: usize,
    pub estimator: ExcitationEstimator,
    pub criterion: &'static str,
    pub windows: Vec<WindowExcitation>,
    pub min_lambda_hat: Option<f64>,
    pub min_lambda_realized: f64,
    pub network: ExcitationVerdict,
    pub sensors: Vec<ExcitationVerdict>,
    pub diagnostics: ExcitationDiagnostics,
}

/// Per-replication window matrices: network first, then one per sensor.
fn replication_windows(scenario: &Scenario, replication: u32, h: usize, windows: usize) -> Result<Vec<Vec<Matrix>>, OracleError> {
    let trace = replay_replication(scenario, replication);
    (0..windows)
        .map(|t| {
            let rows: Vec<Vec<Vector>> = (t * h + 1..=(t + 1) * h).map(|k| trace.steps[k].regressors.clone()).collect();
            let mut out = vec![window_matrix(&rows, scenario.n, h)?];
            for i in 0..scenario.n {
                out.push(sensor_window_matrix(&rows, i, scenario.n, h)?);
            }
            Ok(out)
        })
        .collect()
}

/// Mean, its smallest eigenvalue and a delta-method standard error.
fn average_lambda(samples: &[&Matrix]) -> (f64, f64) {
    let r = samples.len();
    let mean = samples.iter().fold(Matrix::zeros(samples[0].nrows(), samples[0].ncols()), |acc, s| acc + *s) / r as f64;
    let (lambda, v) = lambda_min_with_vector(&mean);
    if r < 2 {
        return (lambda, 0.0);
    }
    let quad: Vec<f64> = samples.iter().map(|s| v.dot(&(*s * &v))).collect();
    let mu = quad.iter().sum::<f64>() / r as f64;
    let var = quad.iter().map(|q| (q - mu).powi(2)).sum::<f64>() / (r - 1) as f64;
    (lambda, (var / r as f64).sqrt())
}

/// Estimates `λ_t` for every complete window and applies the excitation verdict.
///
/// Window `t` covers regressor steps `th+1 ..= (t+1)h`. `p` only enters the
/// α lower-bound diagnostic.
pub fn excitation_report(scenario: &Scenario, h: usize, replications: usize, p: f64) -> Result<ExcitationReport, MetricsError> {
    scenario.validate()?;
    if h == 0 {
        return Err(MetricsError::InvalidArgument("window length h must be at least 1".into()));
    }
    if replications == 0 {
        return Err(MetricsError::InvalidArgument("at least one replication is required".into()));
    }
    let horizon = scenario.horizon;
    let windows = if horizon == 0 { 0 } else { (horizon - 1) / h };
    if windows == 0 {
        return Err(MetricsError::WindowExceedsHorizon { h, horizon });
    }
    let n = scenario.n;
    let open_loop = scenario.regressors.iter().all(|r| r.is_open_loop());
    let estimator = if open_loop { ExcitationEstimator::MonteCarlo } else { ExcitationEstimator::SamplePathOnly };
    let used = if open_loop { replications } else { 1 };

    let per_rep: Vec<Vec<Vec<Matrix>>> = (0..used as u32)
        .into_par_iter()
        .map(|r| replication_windows(scenario, r, h, windows))
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::with_capacity(windows);
    for t in 0..windows {
        let first_rep = &per_rep[0][t];
        let lambda_realized = lambda_min(&first_rep[0]);
        let sensor_lambda_realized: Vec<f64> = first_rep[1..].iter().map(lambda_min).collect();
        let (lambda_hat, std_error, sensor_lambda_hat, sensor_std_error) = if open_loop {
            let stats: Vec<(f64, f64)> = (0..=n)
                .map(|slot| average_lambda(&per_rep.iter().map(|rep| &rep[t][slot]).collect::<Vec<_>>()))
                .collect();
            (
                Some(stats[0].0),
                Some(stats[0].1),
                stats[1..].iter().map(|s| Some(s.0)).collect(),
                stats[1..].iter().map(|s| Some(s.1)).collect(),
            )
        } else {
            (None, None, vec![None; n], vec![None; n])
        };
        rows.push(WindowExcitation {
            index: t,
            first: t * h + 1,
            last: (t + 1) * h,
            lambda_hat,
            std_error,
            lambda_realized,
            sensor_lambda_hat,
            sensor_std_error,
            sensor_lambda_realized,
        });
    }

    let lower = |hat: Option<f64>, se: Option<f64>, realized: f64| match (hat, se) {
        (Some(l), Some(s)) => l - 2.0 * s,
        _ => realized,
    };
    let network_bound = rows
        .iter()
        .map(|w| lower(w.lambda_hat, w.std_error, w.lambda_realized))
        .fold(f64::INFINITY, f64::min);
    let sensors = (0..n)
        .map(|i| {
            let bound = rows
                .iter()
                .map(|w| lower(w.sensor_lambda_hat[i], w.sensor_std_error[i], w.sensor_lambda_realized[i]))
                .fold(f64::INFINITY, f64::min);
            ExcitationVerdict::from_lower_bound(bound)
        })
        .collect();
    let min_lambda_hat = open_loop.then(|| rows.iter().filter_map(|w| w.lambda_hat).fold(f64::INFINITY, f64::min));
    let min_lambda_realized = rows.iter().map(|w| w.lambda_realized).fold(f64::INFINITY, f64::min);
    let network = ExcitationVerdict::from_lower_bound(network_bound);

    Ok(ExcitationReport {
        h,
        replications: used,
        estimator,
        criterion: VERDICT_CRITERION,
        windows: rows,
        min_lambda_hat,
        min_lambda_realized,
        network,
        sensors,
        diagnostics: diagnostics(scenario, h, p, network),
    })
}

fn diagnostics(scenario: &Scenario, h: usize, p: f64, verdict: ExcitationVerdict) -> ExcitationDiagnostics {
    let lambda_rate = (verdict.pass && verdict.lambda_0 < 1.0).then_some(1.0 - verdict.lambda_0);
    match &scenario.topology {
        TopologyModel::Fixed(g) => {
            let Ok(d) = diameter(g) else {
                return ExcitationDiagnostics { lambda_rate, ..Default::default() };
            };
            let a_min = matrix_power_min_entry(g, d);
            let alpha_lower_bound = lambda_rate.map(|rate| {
                let exponent = a_min * a_min / (32.0 * p * scenario.m as f64 * h as f64 * (4.0 * h as f64 + d as f64 - 1.0));
                rate.powf(exponent)
            });
            ExcitationDiagnostics {
                diameter: Some(d),
                a_min: Some(a_min),
                lambda_rate,
                alpha_lower_bound,
                ..Default::default()
            }
        }
        TopologyModel::Markov(chain) => {
            let q0 = chain.primitivity_index();
            ExcitationDiagnostics {
                lambda_rate,
                q0,
                switching_diameter: q0.map(|q| scenario.n * chain.states() * q),
                ..Default::default()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackingReport {
    pub p: f64,
    pub replications: usize,
    /// `‖Θ̃_t‖_{L_p}` for `t ∈ 0..=T`.
    pub lp_norms: Vec<f64>,
    /// Replication mean of the per-row network MSE.
    pub mean_mse: Vec<f64>,
    /// First time of the tail window, which runs to `T`.
    pub tail_start: usize,
    pub tail_mean_lp: f64,
    pub tail_mean_mse: f64,
    pub max_lp: f64,
    /// `sup_t (‖W_{t+1}‖_{L_3p} + ‖ΔΘ_t‖_{L_3p})`.
    pub sigma_3p: f64,
}

fn lp_mean(values: impl Iterator<Item = f64>, p: f64) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v.powf(p), c + 1));
    (sum / count as f64).powf(1.0 / p)
}

/// Combines replications of the same scenario into a [`TrackingReport`].
pub fn aggregate_tracking(records: &[TrajectoryRecord], p: f64) -> Result<TrackingReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::InvalidArgument("no records to aggregate".into()));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(MetricsError::InvalidArgument(format!("p must be a finite value ≥ 1, got {p}")));
    }
    let len = records[0].rows.len();
    if records.iter().any(|r| r.rows.len() != len) {
        return Err(MetricsError::InvalidArgument("records have different horizons".into()));
    }
    let r = records.len() as f64;
    let lp_norms: Vec<f64> = (0..len)
        .map(|t| lp_mean(records.iter().map(|rec| rec.rows[t].stacked_error().norm()), p))
        .collect();
    let mean_mse: Vec<f64> = (0..len).map(|t| records.iter().map(|rec| rec.rows[t].mse).sum::<f64>() / r).collect();
    let horizon = len - 1;
    let tail_start = horizon - horizon / 4;
    let tail = |series: &[f64]| series[tail_start..].iter().sum::<f64>() / (len - tail_start) as f64;
    let q = 3.0 * p;
    let sigma_3p = (0..horizon)
        .map(|t| {
            lp_mean(records.iter().map(|rec| rec.step_stats[t].noise_norm), q)
                + lp_mean(records.iter().map(|rec| rec.step_stats[t].drift_norm), q)
        })
        .fold(0.0, f64::max);
    Ok(TrackingReport {
        p,
        replications: records.len(),
        tail_mean_lp: tail(&lp_norms),
        tail_mean_mse: tail(&mean_mse),
        max_lp: lp_norms.iter().copied().fold(0.0, f64::max),
        lp_norms,
        mean_mse,
        tail_start,
        sigma_3p,
    })
}

/// Runs `replications` independent replications and aggregates them.
pub fn tracking_report(scenario: &Scenario, p: f64, replications: usize) -> Result<TrackingReport, MetricsError> {
    if replications < 2 {
        return Err(MetricsError::InvalidArgument("tracking needs at least two replications".into()));
    }
    let records = run_replications(scenario, replications)?;
    aggregate_tracking(&records, p)
}

/// Independent replications `0..replications`, run in parallel.
pub fn run_replications(scenario: &Scenario, replications: usize) -> Result<Vec<TrajectoryRecord>, EngineError> {
    (0..replications as u32)
        .into_par_iter()
        .map(|r| run(scenario, RunOptions { snapshots: false, replication: r }))
        .collect()
}

/// Least-squares line `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LineFit { slope, intercept, r_squared })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    /// Fit of `log ‖Ψ(t,0)‖₂`; the slope estimates `log λ`.
    pub spectral: LineFit,
    /// Same fit with the Frobenius norm.
    pub frobenius: LineFit,
    pub first: usize,
    pub last: usize,
    /// Smallest realized window excitation over the record.
    pub min_realized_lambda: f64,
    pub theorem_applicable: bool,
    pub note: Option<String>,
}

/// Fits `log ‖Ψ(t, 0)‖` against `t` over `t ∈ [T/2, T]`, with
/// `Ψ(t, 0) = α^t P_t (C_{t−1} ⋯ C_0 ⊗ I) P_0⁻¹`.
///
/// `h` is the window length used to decide whether the excitation condition
/// holds on the recorded regressors.
pub fn decay_fit(record: &TrajectoryRecord, h: usize) -> Result<DecayFit, MetricsError> {
    let snap = record.snapshots()?;
    let horizon = record.horizon();
    if horizon < 4 {
        return Err(MetricsError::InvalidArgument(format!("horizon {horizon} is too short for a decay fit")));
    }
    if h == 0 {
        return Err(MetricsError::InvalidArgument("window length h must be at least 1".into()));
    }
    let first = horizon / 2;
    let n = record.n;
    let m = record.m;
    let p0_inv = snap
        .block_p_inv(0)
        .ok_or_else(|| MetricsError::InvalidArgument("initial covariance is not positive definite".into()))?;

    let mut product = Matrix::identity(n, n);
    let (mut ts, mut spec, mut frob) = (Vec::new(), Vec::new(), Vec::new());
    for t in 0..=horizon {
        if t >= first {
            let psi = snap.block_p(t) * kron_identity(&product, m) * &p0_inv * record.alpha.powi(t as i32);
            let (s, f) = (spectral_norm(&psi), psi.norm());
            if s > 0.0 && f > 0.0 {
                ts.push(t as f64);
                spec.push(s.ln());
                frob.push(f.ln());
            }
        }
        if t < horizon {
            product = &snap.steps[t].combination * product;
        }
    }
    let fit = |ys: &[f64]| {
        fit_line(&ts, ys).ok_or_else(|| MetricsError::InvalidArgument("not enough finite points for a decay fit".into()))
    };
    let spectral = fit(&spec)?;
    let frobenius = fit(&frob)?;

    let windows = (horizon - 1) / h;
    let mut min_realized_lambda = f64::INFINITY;
    for t in 0..windows {
        let rows: Vec<Vec<Vector>> = (t * h + 1..=(t + 1) * h).map(|k| snap.steps[k].regressors.clone()).collect();
        min_realized_lambda = min_realized_lambda.min(brute_force_lambda(&rows, n, h)?);
    }
    if windows == 0 {
        min_realized_lambda = 0.0;
    }
    let theorem_applicable = min_realized_lambda > EXCITATION_FLOOR;
    let note = (!theorem_applicable).then(|| "excitation condition not satisfied; theorem not applicable".to_string());
    Ok(DecayFit { spectral, frobenius, first, last: horizon, min_realized_lambda, theorem_applicable, note })
}
