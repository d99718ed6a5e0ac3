//! Synthetic data for the observation model `y_{t+1,i} = φ_{t,i}ᵀ θ_t + w_{t+1,i}`.
//!
//! A [`Scenario`] is the complete generative description of one experiment.
//! All randomness is derived from `Scenario::seed` through [`stream`], which
//! gives every (replication, role, sensor) triple its own ChaCha8 stream, so
//! replications are independent and any single stream can be regenerated in
//! isolation. The topology stream is separate from the data streams: changing
//! the graph never changes the data.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use thiserror::Error;

use crate::linalg::{Matrix, Vector};
use crate::topology::{is_balanced, MarkovTopology, WeightedDigraph};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { field: field.into(), message: message.into() }
}

/// Role of a random stream; the discriminant is part of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    Parameter = 1,
    Regressor = 2,
    Noise = 3,
    Input = 4,
    Topology = 5,
}

/// Stream `(replication << 32) | (role << 24) | sensor` of the ChaCha8 generator
/// seeded with `seed`.
pub fn stream(seed: u64, replication: u32, role: StreamRole, sensor: u32) -> ChaCha8Rng {
    assert!(sensor < (1 << 24), "sensor index exceeds the stream id layout");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((u64::from(replication) << 32) | ((role as u64) << 24) | u64::from(sensor));
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParameterKind {
    Constant,
    /// `Δθ_t ~ N(0, σ² I)`.
    RandomWalk { sigma: f64 },
    /// `θ_t[c] = θ_0[c] + amplitude · sin(2π t / period + 2π c / m)`.
    Sinusoid { amplitude: f64, period: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterProcess {
    pub theta0: Vector,
    pub kind: ParameterKind,
}

impl ParameterProcess {
    pub fn constant(theta0: Vector) -> Self {
        Self { theta0, kind: ParameterKind::Constant }
    }

    pub fn random_walk(theta0: Vector, sigma: f64) -> Self {
        Self { theta0, kind: ParameterKind::RandomWalk { sigma } }
    }

    fn sinusoid_at(&self, t: usize, amplitude: f64, period: f64) -> Vector {
        let m = self.theta0.len();
        Vector::from_fn(m, |c, _| {
            let phase = std::f64::consts::TAU * (t as f64 / period + c as f64 / m as f64);
            self.theta0[c] + amplitude * phase.sin()
        })
    }
}

/// How one sensor produces its regressors.
#[derive(Debug, Clone, PartialEq)]
pub enum RegressorSpec {
    /// `φ ~ N(0, covariance)`, iid over time.
    GaussianIid { covariance: Matrix },
    /// `φ[c] ~ N(0, scale²)` for `c ∈ coords`, exactly zero elsewhere, iid over time.
    MaskedSubspace { coords: Vec<usize>, scale: f64 },
    /// `φ_t = [y_t, …, y_{t−p}, u_t, …, u_{t−q}]` with `u ~ U[−1, 1]` iid and the
    /// sensor's own past outputs (zero before time 0).
    ArxFeedback { p: usize, q: usize },
    /// The same vector at every step.
    Constant { value: Vector },
}

impl RegressorSpec {
    /// Whether regressors are independent of the past, so that conditional
    /// expectations given the past reduce to plain expectations.
    pub fn is_open_loop(&self) -> bool {
        !matches!(self, RegressorSpec::ArxFeedback { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseProcess {
    /// Standard deviation of iid Gaussian noise.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologyModel {
    Fixed(WeightedDigraph),
    Markov(MarkovTopology),
}

impl TopologyModel {
    pub fn n(&self) -> usize {
        match self {
            TopologyModel::Fixed(g) => g.n(),
            TopologyModel::Markov(m) => m.n(),
        }
    }

    pub fn is_switching(&self) -> bool {
        matches!(self, TopologyModel::Markov(_))
    }
}

/// Which index of `a` weighs neighbour `j` in sensor `i`'s combination step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Weight `a_ij`: the combination matrix is `A`.
    Row,
    /// Weight `a_ji`: the combination matrix is `Aᵀ`.
    Column,
}

impl Orientation {
    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::Row => "row",
            Orientation::Column => "column",
        }
    }

    /// Combination matrix `C` with `C_ij` the weight sensor `i` gives sensor `j`.
    pub fn combination_matrix(self, g: &WeightedDigraph) -> Matrix {
        match self {
            Orientation::Row => g.weights().clone(),
            Orientation::Column => g.weights().transpose(),
        }
    }
}

impl std::str::FromStr for Orientation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "row" => Ok(Orientation::Row),
            "column" => Ok(Orientation::Column),
            other => Err(format!("unknown orientation `{other}`, expected `row` or `column`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub n: usize,
    pub m: usize,
    /// Forgetting factor.
    pub alpha: f64,
    /// Permits `alpha = 1` (plain distributed least squares).
    pub unit_alpha: bool,
    pub horizon: usize,
    pub topology: TopologyModel,
    /// `None` selects `Row` for fixed and `Column` for switching topologies.
    pub orientation: Option<Orientation>,
    pub parameter: ParameterProcess,
    pub regressors: Vec<RegressorSpec>,
    pub noise: NoiseProcess,
    /// `P_{0,i} = p0_scale · I`.
    pub p0_scale: f64,
    pub theta_hat0: Vector,
    pub seed: u64,
}

pub const DEFAULT_P0_SCALE: f64 = 100.0;

impl Scenario {
    /// Scenario with zero initial estimates and `P0 = 100 I`.
    pub fn new(
        topology: TopologyModel,
        parameter: ParameterProcess,
        regressors: Vec<RegressorSpec>,
        noise: NoiseProcess,
        alpha: f64,
        horizon: usize,
        seed: u64,
    ) -> Self {
        let m = parameter.theta0.len();
        Self {
            n: topology.n(),
            m,
            alpha,
            unit_alpha: false,
            horizon,
            topology,
            orientation: None,
            parameter,
            regressors,
            noise,
            p0_scale: DEFAULT_P0_SCALE,
            theta_hat0: Vector::zeros(m),
            seed,
        }
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation.unwrap_or(match self.topology {
            TopologyModel::Fixed(_) => Orientation::Row,
            TopologyModel::Markov(_) => Orientation::Column,
        })
    }

    pub fn with_topology(&self, topology: TopologyModel) -> Self {
        Self { topology, ..self.clone() }
    }

    pub fn initial_p(&self) -> Matrix {
        Matrix::identity(self.m, self.m) * self.p0_scale
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.n == 0 {
            return Err(invalid("scenario.n", "must be positive"));
        }
        if self.m == 0 {
            return Err(invalid("scenario.m", "must be positive"));
        }
        let alpha_ok = self.alpha > 0.0 && (self.alpha < 1.0 || (self.unit_alpha && self.alpha == 1.0));
        if !alpha_ok {
            return Err(invalid(
                "scenario.alpha",
                format!("forgetting factor {} must lie in (0, 1); 1 is allowed only in distributed least-squares mode", self.alpha),
            ));
        }
        if !(self.p0_scale.is_finite() && self.p0_scale > 0.0) {
            return Err(invalid("scenario.p0_scale", "must be positive and finite"));
        }
        if self.topology.n() != self.n {
            return Err(invalid("topology", format!("has {} nodes, scenario has {} sensors", self.topology.n(), self.n)));
        }
        if self.orientation() == Orientation::Column {
            let graphs = match &self.topology {
                TopologyModel::Fixed(g) => std::slice::from_ref(g),
                TopologyModel::Markov(chain) => chain.graphs(),
            };
            if let Some(k) = graphs.iter().position(|g| !is_balanced(g)) {
                return Err(invalid(
                    "topology.orientation",
                    format!("column orientation needs column-stochastic graphs, graph {k} is not; use orientation `row`"),
                ));
            }
        }
        if self.parameter.theta0.len() != self.m {
            return Err(invalid("scenario.parameter.theta0", format!("expected length {}", self.m)));
        }
        if self.theta_hat0.len() != self.m {
            return Err(invalid("scenario.theta_hat0", format!("expected length {}", self.m)));
        }
        if !self.parameter.theta0.iter().chain(self.theta_hat0.iter()).all(|v| v.is_finite()) {
            return Err(invalid("scenario.parameter.theta0", "must be finite"));
        }
        match self.parameter.kind {
            ParameterKind::Constant => {}
            ParameterKind::RandomWalk { sigma } => {
                if !(sigma.is_finite() && sigma >= 0.0) {
                    return Err(invalid("scenario.parameter.sigma", "must be finite and non-negative"));
                }
            }
            ParameterKind::Sinusoid { amplitude, period } => {
                if !amplitude.is_finite() {
                    return Err(invalid("scenario.parameter.amplitude", "must be finite"));
                }
                if !(period.is_finite() && period > 0.0) {
                    return Err(invalid("scenario.parameter.period", "must be positive"));
                }
            }
        }
        if !(self.noise.sigma.is_finite() && self.noise.sigma >= 0.0) {
            return Err(invalid("scenario.noise.sigma", "must be finite and non-negative"));
        }
        if self.regressors.len() != self.n {
            return Err(invalid(
                "scenario.regressors",
                format!("expected {} entries (one per sensor), got {}", self.n, self.regressors.len()),
            ));
        }
        for (i, spec) in self.regressors.iter().enumerate() {
            let field = |f: &str| format!("scenario.regressors[{i}].{f}");
            match spec {
                RegressorSpec::GaussianIid { covariance } => {
                    if covariance.shape() != (self.m, self.m) {
                        return Err(invalid(field("covariance"), format!("expected {0}x{0}", self.m)));
                    }
                    if covariance.clone().cholesky().is_none() {
                        return Err(invalid(field("covariance"), "must be symmetric positive definite"));
                    }
                }
                RegressorSpec::MaskedSubspace { coords, scale } => {
                    if let Some(c) = coords.iter().find(|&&c| c >= self.m) {
                        return Err(invalid(field("coords"), format!("coordinate {c} out of range for m = {}", self.m)));
                    }
                    if !(scale.is_finite() && *scale >= 0.0) {
                        return Err(invalid(field("scale"), "must be finite and non-negative"));
                    }
                }
                RegressorSpec::ArxFeedback { p, q } => {
                    if p + q + 2 != self.m {
                        return Err(invalid(field("p"), format!("ARX orders need p + q + 2 = m, got {p} + {q} + 2 != {}", self.m)));
                    }
                }
                RegressorSpec::Constant { value } => {
                    if value.len() != self.m || !value.iter().all(|v| v.is_finite()) {
                        return Err(invalid(field("value"), format!("expected {} finite entries", self.m)));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Everything generated at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepData {
    pub t: usize,
    /// `θ_t`.
    pub theta: Vector,
    /// `Δθ_t = θ_{t+1} − θ_t`.
    pub theta_delta: Vector,
    /// `φ_{t,i}` for each sensor.
    pub regressors: Vec<Vector>,
    /// `w_{t+1,i}`.
    pub noise: Vec<f64>,
    /// `y_{t+1,i}`.
    pub outputs: Vec<f64>,
}

struct SensorStreams {
    regressor: ChaCha8Rng,
    noise: ChaCha8Rng,
    input: ChaCha8Rng,
    /// ARX histories, most recent first.
    past_outputs: Vec<f64>,
    past_inputs: Vec<f64>,
}

/// Stateful generator for one replication of a scenario.
pub struct DataGenerator<'a> {
    scenario: &'a Scenario,
    t: usize,
    theta: Vector,
    parameter_rng: ChaCha8Rng,
    sensors: Vec<SensorStreams>,
    regressor_factors: Vec<Option<Matrix>>,
}

impl<'a> DataGenerator<'a> {
    pub fn new(scenario: &'a Scenario, replication: u32) -> Self {
        let seed = scenario.seed;
        let sensors = scenario
            .regressors
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let i = i as u32;
                let (p, q) = match spec {
                    RegressorSpec::ArxFeedback { p, q } => (p + 1, q + 1),
                    _ => (0, 0),
                };
                SensorStreams {
                    regressor: stream(seed, replication, StreamRole::Regressor, i),
                    noise: stream(seed, replication, StreamRole::Noise, i),
                    input: stream(seed, replication, StreamRole::Input, i),
                    past_outputs: vec![0.0; p],
                    past_inputs: vec![0.0; q],
                }
            })
            .collect();
        let regressor_factors = scenario
            .regressors
            .iter()
            .map(|spec| match spec {
                RegressorSpec::GaussianIid { covariance } => {
                    Some(covariance.clone().cholesky().expect("validated covariance").l())
                }
                _ => None,
            })
            .collect();
        Self {
            scenario,
            t: 0,
            theta: scenario.parameter.theta0.clone(),
            parameter_rng: stream(seed, replication, StreamRole::Parameter, 0),
            sensors,
            regressor_factors,
        }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// `θ_t` for the current time.
    pub fn theta(&self) -> &Vector {
        &self.theta
    }

    /// Generates `θ_t, φ_{t,·}, w_{t+1,·}, y_{t+1,·}` and advances to `t + 1`.
    pub fn next_step(&mut self) -> StepData {
        let sc = self.scenario;
        let m = sc.m;
        let standard = StandardNormal;
        let mut regressors = Vec::with_capacity(sc.n);
        let mut noise = Vec::with_capacity(sc.n);
        let mut outputs = Vec::with_capacity(sc.n);

        for (i, spec) in sc.regressors.iter().enumerate() {
            let streams = &mut self.sensors[i];
            let phi = match spec {
                RegressorSpec::GaussianIid { .. } => {
                    let z = Vector::from_fn(m, |_, _| standard.sample(&mut streams.regressor));
                    self.regressor_factors[i].as_ref().unwrap() * z
                }
                RegressorSpec::MaskedSubspace { coords, scale } => {
                    let mut phi = Vector::zeros(m);
                    for &c in coords {
                        let z: f64 = standard.sample(&mut streams.regressor);
                        phi[c] = scale * z;
                    }
                    phi
                }
                RegressorSpec::ArxFeedback { .. } => {
                    let u = Uniform::new_inclusive(-1.0, 1.0).unwrap().sample(&mut streams.input);
                    streams.past_inputs.rotate_right(1);
                    streams.past_inputs[0] = u;
                    Vector::from_iterator(
                        m,
                        streams.past_outputs.iter().chain(streams.past_inputs.iter()).copied(),
                    )
                }
                RegressorSpec::Constant { value } => value.clone(),
            };
            let z: f64 = standard.sample(&mut streams.noise);
            let w = sc.noise.sigma * z;
            let y = phi.dot(&self.theta) + w;
            if let RegressorSpec::ArxFeedback { .. } = spec {
                streams.past_outputs.rotate_right(1);
                streams.past_outputs[0] = y;
            }
            regressors.push(phi);
            noise.push(w);
            outputs.push(y);
        }

        let next_theta = match sc.parameter.kind {
            ParameterKind::Constant => self.theta.clone(),
            ParameterKind::RandomWalk { sigma } => {
                let step = Vector::from_fn(m, |_, _| {
                    let z: f64 = standard.sample(&mut self.parameter_rng);
                    sigma * z
                });
                &self.theta + step
            }
            ParameterKind::Sinusoid { amplitude, period } => {
                sc.parameter.sinusoid_at(self.t + 1, amplitude, period)
            }
        };
        let theta_delta = &next_theta - &self.theta;
        let theta = std::mem::replace(&mut self.theta, next_theta);
        let data = StepData { t: self.t, theta, theta_delta, regressors, noise, outputs };
        self.t += 1;
        data
    }
}

/// All generated quantities of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTrace {
    pub steps: Vec<StepData>,
    /// `θ_T`.
    pub final_theta: Vector,
}

impl DataTrace {
    /// `θ_t` for `t ∈ 0..=T`.
    pub fn theta(&self, t: usize) -> &Vector {
        if t == self.steps.len() {
            &self.final_theta
        } else {
            &self.steps[t].theta
        }
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }
}

/// Regenerates replication 0 of `scenario`.
pub fn replay(scenario: &Scenario) -> DataTrace {
    replay_replication(scenario, 0)
}

pub fn replay_replication(scenario: &Scenario, replication: u32) -> DataTrace {
    let mut generator = DataGenerator::new(scenario, replication);
    let steps = (0..scenario.horizon).map(|_| generator.next_step()).collect();
    DataTrace { steps, final_theta: generator.theta().clone() }
}
