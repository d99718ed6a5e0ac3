//! The network loop.
//!
//! One step at time `t`: generate the observations, let every sensor adapt on
//! its own data, then let every sensor combine the intermediates of its
//! neighbours. The exchange is synchronous and lossless, so a step is a
//! barrier across the whole network.
//!
//! With snapshots enabled the record also keeps every `P_t` block and the
//! per-step quantities of the error recursion, which is what
//! [`transition_product`] and [`consistency_check`] work from.

use thiserror::Error;

use crate::ffls::{adapt, combine, error_update, ErrorStepContext, FflsError, IntermediateState, SensorState};
use crate::linalg::{block_diag, kron_identity, relative_difference, spd_inverse, stack, Matrix, Vector};
use crate::scenario::{
    replay_replication, stream, DataTrace, Orientation, Scenario, ScenarioError, StepData, StreamRole, TopologyModel,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("step {t}, sensor {sensor}: {source}")]
    Step {
        t: usize,
        sensor: usize,
        #[source]
        source: FflsError,
    },
    #[error("scenario topology is not a Markov switching model")]
    NotSwitching,
    #[error("P snapshots were not recorded; rerun with snapshots enabled")]
    SnapshotsMissing,
    #[error("window [{k}, {t}] is outside the recorded horizon {horizon}")]
    WindowOutOfRange { k: usize, t: usize, horizon: usize },
    #[error("error recursion at step {t}: {source}")]
    Diagnostic {
        t: usize,
        #[source]
        source: FflsError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Record `P_t` and the error-recursion inputs at every step.
    pub snapshots: bool,
    pub replication: u32,
}

impl RunOptions {
    pub fn with_snapshots() -> Self {
        Self { snapshots: true, replication: 0 }
    }
}

/// All sensor states at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub t: usize,
    pub sensors: Vec<SensorState>,
    /// Index of the topology used by the next combination step.
    pub topology_index: usize,
}

impl NetworkState {
    pub fn initial(scenario: &Scenario) -> Self {
        let sensor = SensorState::new(scenario.theta_hat0.clone(), scenario.initial_p());
        Self { t: 0, sensors: vec![sensor; scenario.n], topology_index: 0 }
    }

    /// Stacked estimates `col(θ̂_{t,1}, …, θ̂_{t,n})`.
    pub fn stacked_estimates(&self) -> Vector {
        stack(&self.sensors.iter().map(|s| s.theta_hat.clone()).collect::<Vec<_>>())
    }
}

/// Adapt every sensor on its own observation, then combine with weights from
/// `combination` (`C_ij` is the weight sensor `i` gives sensor `j`).
///
/// Returns the intermediates in sensor order; `state` moves to `t + 1`.
pub fn diffusion_step(
    state: &mut NetworkState,
    combination: &Matrix,
    regressors: &[Vector],
    outputs: &[f64],
    alpha: f64,
) -> Result<Vec<IntermediateState>, EngineError> {
    let t = state.t;
    let intermediates = state
        .sensors
        .iter()
        .enumerate()
        .map(|(i, s)| adapt(s, &regressors[i], outputs[i], alpha).map_err(|source| EngineError::Step { t, sensor: i, source }))
        .collect::<Result<Vec<_>, _>>()?;
    let n = state.sensors.len();
    for i in 0..n {
        let neighbors: Vec<(&IntermediateState, f64)> = (0..n)
            .filter(|&j| combination[(i, j)] > 0.0)
            .map(|j| (&intermediates[j], combination[(i, j)]))
            .collect();
        state.sensors[i] = combine(&neighbors).map_err(|source| EngineError::Step { t, sensor: i, source })?;
    }
    state.t += 1;
    Ok(intermediates)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: usize,
    /// `r(t)`, 0-based; always 0 for a fixed topology.
    pub topology_index: usize,
    pub theta: Vector,
    pub estimates: Vec<Vector>,
    /// `‖θ_t − θ̂_{t,i}‖²`.
    pub err_sq: Vec<f64>,
    /// Mean of `err_sq` over sensors.
    pub mse: f64,
}

impl TrajectoryRow {
    /// Stacked tracking error `Θ̃_t`.
    pub fn stacked_error(&self) -> Vector {
        stack(&self.estimates.iter().map(|e| &self.theta - e).collect::<Vec<_>>())
    }
}

/// Norms of the step's forcing terms, `‖W_{t+1}‖` and `‖ΔΘ_t‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub noise_norm: f64,
    pub drift_norm: f64,
}

/// Inputs of the error recursion at step `t → t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSnapshot {
    pub combination: Matrix,
    pub p_bar: Vec<Matrix>,
    pub gains: Vec<Vector>,
    pub regressors: Vec<Vector>,
    pub noise: Vec<f64>,
    pub theta_delta: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshots {
    /// `P_{t,i}` for `t ∈ 0..=T`.
    pub p: Vec<Vec<Matrix>>,
    /// One entry per step, `t ∈ 0..T`.
    pub steps: Vec<StepSnapshot>,
}

impl Snapshots {
    pub fn block_p(&self, t: usize) -> Matrix {
        block_diag(&self.p[t])
    }

    pub fn block_p_inv(&self, t: usize) -> Option<Matrix> {
        let inverses = self.p[t].iter().map(spd_inverse).collect::<Option<Vec<_>>>()?;
        Some(block_diag(&inverses))
    }

    /// `C_{t−1} ⋯ C_k` (identity for `t = k`).
    pub fn combination_product(&self, k: usize, t: usize) -> Matrix {
        let n = self.p[0].len();
        let mut out = Matrix::identity(n, n);
        for j in k..t {
            out = &self.steps[j].combination * out;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
    pub orientation: Orientation,
    pub switching: bool,
    /// Rows for `t ∈ 0..=T`.
    pub rows: Vec<TrajectoryRow>,
    pub step_stats: Vec<StepStats>,
    pub snapshots: Option<Snapshots>,
}

impl TrajectoryRecord {
    pub fn horizon(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn snapshots(&self) -> Result<&Snapshots, EngineError> {
        self.snapshots.as_ref().ok_or(EngineError::SnapshotsMissing)
    }

    pub fn final_row(&self) -> &TrajectoryRow {
        self.rows.last().expect("record always holds the initial row")
    }
}

fn make_row(t: usize, topology_index: usize, theta: &Vector, state: &NetworkState) -> TrajectoryRow {
    let estimates: Vec<Vector> = state.sensors.iter().map(|s| s.theta_hat.clone()).collect();
    let err_sq: Vec<f64> = estimates.iter().map(|e| (theta - e).norm_squared()).collect();
    let mse = err_sq.iter().sum::<f64>() / err_sq.len() as f64;
    TrajectoryRow { t, topology_index, theta: theta.clone(), estimates, err_sq, mse }
}

/// Topology indices `r(0), …, r(T)` for one replication.
pub fn topology_path(scenario: &Scenario, replication: u32) -> Vec<usize> {
    match &scenario.topology {
        TopologyModel::Fixed(_) => vec![0; scenario.horizon + 1],
        TopologyModel::Markov(chain) => {
            let mut rng = stream(scenario.seed, replication, StreamRole::Topology, 0);
            chain.sample_path_with(scenario.horizon + 1, &mut rng)
        }
    }
}

/// Combination matrices for every topology state, in the scenario's orientation.
pub fn combination_matrices(scenario: &Scenario) -> Vec<Matrix> {
    let orientation = scenario.orientation();
    match &scenario.topology {
        TopologyModel::Fixed(g) => vec![orientation.combination_matrix(g)],
        TopologyModel::Markov(chain) => chain.graphs().iter().map(|g| orientation.combination_matrix(g)).collect(),
    }
}

/// Runs one replication: fixed topologies combine with `A` (or `Aᵀ`), switching
/// topologies sample `r(t)` first and combine with `A_{r(t)}ᵀ` (or `A_{r(t)}`).
pub fn run(scenario: &Scenario, options: RunOptions) -> Result<TrajectoryRecord, EngineError> {
    scenario.validate()?;
    let trace = replay_replication(scenario, options.replication);
    let path = topology_path(scenario, options.replication);
    run_on_trace(scenario, &trace, &path, options)
}

/// [`run`] restricted to Markov switching topologies.
pub fn run_switching(scenario: &Scenario, options: RunOptions) -> Result<TrajectoryRecord, EngineError> {
    if !scenario.topology.is_switching() {
        return Err(EngineError::NotSwitching);
    }
    run(scenario, options)
}

/// The loop itself, on pre-generated data and a given topology path.
pub fn run_on_trace(
    scenario: &Scenario,
    trace: &DataTrace,
    path: &[usize],
    options: RunOptions,
) -> Result<TrajectoryRecord, EngineError> {
    let horizon = trace.horizon();
    assert!(path.len() > horizon, "topology path shorter than the horizon");
    let combinations = combination_matrices(scenario);
    let mut state = NetworkState::initial(scenario);
    let mut rows = Vec::with_capacity(horizon + 1);
    let mut step_stats = Vec::with_capacity(horizon);
    let mut snapshots = options.snapshots.then(|| Snapshots {
        p: vec![state.sensors.iter().map(|s| s.p.clone()).collect()],
        steps: Vec::with_capacity(horizon),
    });
    let sqrt_n = (scenario.n as f64).sqrt();

    for (t, step) in trace.steps.iter().enumerate() {
        let r = path[t];
        state.topology_index = r;
        rows.push(make_row(t, r, &step.theta, &state));
        let combination = &combinations[r];
        let StepData { regressors, outputs, noise, theta_delta, .. } = step;
        let intermediates = diffusion_step(&mut state, combination, regressors, outputs, scenario.alpha)?;
        step_stats.push(StepStats {
            noise_norm: noise.iter().map(|w| w * w).sum::<f64>().sqrt(),
            drift_norm: sqrt_n * theta_delta.norm(),
        });
        if let Some(snap) = snapshots.as_mut() {
            snap.p.push(state.sensors.iter().map(|s| s.p.clone()).collect());
            snap.steps.push(StepSnapshot {
                combination: combination.clone(),
                p_bar: intermediates.iter().map(|s| s.p_bar.clone()).collect(),
                gains: intermediates.into_iter().map(|s| s.gain).collect(),
                regressors: regressors.clone(),
                noise: noise.clone(),
                theta_delta: theta_delta.clone(),
            });
        }
    }
    state.topology_index = path[horizon];
    rows.push(make_row(horizon, path[horizon], &trace.final_theta, &state));

    Ok(TrajectoryRecord {
        n: scenario.n,
        m: scenario.m,
        alpha: scenario.alpha,
        orientation: scenario.orientation(),
        switching: scenario.topology.is_switching(),
        rows,
        step_stats,
        snapshots,
    })
}

/// Two evaluations of the state transition matrix `Ψ(t, k)` of the
/// homogeneous error dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionProduct {
    pub k: usize,
    pub t: usize,
    /// `Π_{j=k}^{t−1} α P_{j+1} 𝒜_j P_j⁻¹`, multiplied on the left.
    pub iterated: Matrix,
    /// `α^{t−k} P_t (C_{t−1} ⋯ C_k ⊗ I) P_k⁻¹`.
    pub closed_form: Matrix,
}

impl TransitionProduct {
    pub fn deviation(&self) -> f64 {
        relative_difference(&self.iterated, &self.closed_form)
    }
}

pub fn transition_product(record: &TrajectoryRecord, k: usize, t: usize) -> Result<TransitionProduct, EngineError> {
    let snap = record.snapshots()?;
    let horizon = record.horizon();
    if k > t || t > horizon {
        return Err(EngineError::WindowOutOfRange { k, t, horizon });
    }
    let m = record.m;
    let size = record.n * m;
    let singular = |j: usize| EngineError::Diagnostic { t: j, source: FflsError::LostDefiniteness { condition: f64::INFINITY } };

    let mut iterated = Matrix::identity(size, size);
    for j in k..t {
        let p_inv = snap.block_p_inv(j).ok_or_else(|| singular(j))?;
        let big_a = kron_identity(&snap.steps[j].combination, m);
        iterated = snap.block_p(j + 1) * big_a * p_inv * iterated * record.alpha;
    }

    let product = kron_identity(&snap.combination_product(k, t), m);
    let p_k_inv = snap.block_p_inv(k).ok_or_else(|| singular(k))?;
    let closed_form = snap.block_p(t) * product * p_k_inv * record.alpha.powi((t - k) as i32);
    Ok(TransitionProduct { k, t, iterated, closed_form })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyReport {
    pub steps: usize,
    /// `max_t ‖Θ̃_{t+1}^{rec} − Θ̃_{t+1}^{direct}‖`.
    pub max_abs: f64,
    /// `max_t ‖Θ̃_{t+1}^{rec} − Θ̃_{t+1}^{direct}‖ / (1 + ‖Θ̃_{t+1}^{direct}‖)`.
    pub max_relative: f64,
}

/// Compares the stacked error recursion, seeded at each step with the recorded
/// error, against the directly recorded errors `θ_{t+1} − θ̂_{t+1,i}`.
pub fn consistency_check(record: &TrajectoryRecord) -> Result<ConsistencyReport, EngineError> {
    let snap = record.snapshots()?;
    let mut report = ConsistencyReport { steps: 0, max_abs: 0.0, max_relative: 0.0 };
    for (t, step) in snap.steps.iter().enumerate() {
        let prev = record.rows[t].stacked_error();
        let direct = record.rows[t + 1].stacked_error();
        let ctx = ErrorStepContext {
            alpha: record.alpha,
            combination: &step.combination,
            p: &snap.p[t],
            p_next: &snap.p[t + 1],
            p_bar: &step.p_bar,
            gains: &step.gains,
            noise: &step.noise,
            theta_delta: &step.theta_delta,
        };
        let recursed = error_update(&prev, &ctx).map_err(|source| EngineError::Diagnostic { t, source })?;
        let abs = (&recursed - &direct).norm();
        report.max_abs = report.max_abs.max(abs);
        report.max_relative = report.max_relative.max(abs / (1.0 + direct.norm()));
        report.steps += 1;
    }
    Ok(report)
}
