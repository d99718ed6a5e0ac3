//! Run configuration files.
//!
//! A configuration is one TOML document with four sections:
//!
//! ```toml
//! [scenario]
//! alpha = 0.98
//! horizon = 200
//! seed = 7
//! parameter = { kind = "random_walk", theta0 = [1.0, -0.5], sigma = 0.01 }
//! noise = { sigma = 0.1 }
//! regressors = [{ kind = "gaussian" }]
//!
//! [topology]
//! kind = "fixed"
//! adjacency = [[0.5, 0.5], [0.5, 0.5]]
//!
//! [metrics]
//! h = 10
//!
//! [output]
//! dir = "out"
//! ```
//!
//! A single regressor entry applies to every sensor. Errors name the offending
//! field, e.g. `scenario.alpha` or `topology.graphs[1]`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{Matrix, Vector};
use crate::scenario::{
    NoiseProcess, Orientation, ParameterKind, ParameterProcess, RegressorSpec, Scenario, ScenarioError, TopologyModel,
    DEFAULT_P0_SCALE,
};
use crate::topology::{is_balanced, is_strongly_connected, MarkovTopology, TopologyError, WeightedDigraph};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), message: message.into() }
}

fn topology_error(field: impl Into<String>, err: TopologyError) -> ConfigError {
    invalid(field, err.to_string())
}

impl From<ScenarioError> for ConfigError {
    fn from(err: ScenarioError) -> Self {
        match err {
            ScenarioError::Invalid { field, message } => ConfigError::Invalid { field, message },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioSection,
    pub topology: TopologySection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    /// Checked against the topology when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Checked against `parameter.theta0` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub alpha: f64,
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_p0_scale")]
    pub p0_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_hat0: Option<Vec<f64>>,
    /// Allows `alpha = 1`.
    #[serde(default)]
    pub distributed_ls: bool,
    pub parameter: ParameterSection,
    pub noise: NoiseSection,
    pub regressors: Vec<RegressorSection>,
}

fn default_p0_scale() -> f64 {
    DEFAULT_P0_SCALE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParameterSection {
    Constant { theta0: Vec<f64> },
    RandomWalk { theta0: Vec<f64>, sigma: f64 },
    Sinusoid { theta0: Vec<f64>, amplitude: f64, period: f64 },
}

impl ParameterSection {
    fn theta0(&self) -> &[f64] {
        match self {
            ParameterSection::Constant { theta0 }
            | ParameterSection::RandomWalk { theta0, .. }
            | ParameterSection::Sinusoid { theta0, .. } => theta0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegressorSection {
    /// Identity covariance when omitted.
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        covariance: Option<Vec<Vec<f64>>>,
    },
    Masked {
        coords: Vec<usize>,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
    Arx { p: usize, q: usize },
    Constant { value: Vec<f64> },
}

fn unit_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Fixed,
    Markov,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub kind: TopologyKind,
    /// Fixed topologies: row-stochastic weights with positive self-loops.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjacency: Option<Vec<Vec<f64>>>,
    /// Markov topologies: one weight matrix per chain state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graphs: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<Vec<Vec<f64>>>,
    /// Uniform when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    /// `row` or `column`; defaults to `row` for fixed and `column` for Markov.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    #[serde(default = "default_h")]
    pub h: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub snapshots: bool,
}

fn default_h() -> usize {
    10
}

fn default_p() -> f64 {
    2.0
}

fn default_replications() -> usize {
    64
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self { h: default_h(), p: default_p(), replications: default_replications(), snapshots: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

fn default_dir() -> String {
    "out".into()
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv, OutputFormat::Json]
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_dir(), formats: default_formats() }
    }
}

impl OutputSection {
    pub fn wants(&self, format: OutputFormat) -> bool {
        self.formats.contains(&format)
    }
}

fn matrix_from_rows(field: &str, rows: &[Vec<f64>]) -> Result<Matrix, ConfigError> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err(invalid(field, "matrix is empty"));
    }
    if let Some(r) = rows.iter().position(|row| row.len() != cols) {
        return Err(invalid(format!("{field}[{r}]"), format!("expected {cols} entries")));
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn digraph(field: &str, rows: &[Vec<f64>]) -> Result<WeightedDigraph, ConfigError> {
    let weights = matrix_from_rows(field, rows)?;
    WeightedDigraph::new(weights).map_err(|e| topology_error(field, e))
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate_sections()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    fn validate_sections(&self) -> Result<(), ConfigError> {
        if self.metrics.h == 0 {
            return Err(invalid("metrics.h", "window length must be at least 1"));
        }
        if !(self.metrics.p.is_finite() && self.metrics.p >= 1.0) {
            return Err(invalid("metrics.p", "must be a finite value ≥ 1"));
        }
        if self.metrics.replications == 0 {
            return Err(invalid("metrics.replications", "must be at least 1"));
        }
        if let Some(o) = &self.topology.orientation {
            o.parse::<Orientation>().map_err(|e| invalid("topology.orientation", e))?;
        }
        Ok(())
    }

    pub fn orientation(&self) -> Result<Option<Orientation>, ConfigError> {
        self.topology
            .orientation
            .as_deref()
            .map(|o| o.parse::<Orientation>().map_err(|e| invalid("topology.orientation", e)))
            .transpose()
    }

    /// Builds and validates the topology model.
    ///
    /// Switching topologies must consist of balanced graphs with a strongly
    /// connected union, switched by an irreducible aperiodic chain, unless
    /// `allow_unverified` is set.
    pub fn topology_model(&self, allow_unverified: bool) -> Result<TopologyModel, ConfigError> {
        let t = &self.topology;
        match t.kind {
            TopologyKind::Fixed => {
                if t.graphs.is_some() || t.transition.is_some() || t.initial.is_some() {
                    return Err(invalid("topology", "fixed topologies take `adjacency` only"));
                }
                let rows = t.adjacency.as_ref().ok_or_else(|| invalid("topology.adjacency", "required for kind = \"fixed\""))?;
                Ok(TopologyModel::Fixed(digraph("topology.adjacency", rows)?))
            }
            TopologyKind::Markov => {
                if t.adjacency.is_some() {
                    return Err(invalid("topology.adjacency", "not used for kind = \"markov\"; list the graphs instead"));
                }
                let list = t.graphs.as_ref().ok_or_else(|| invalid("topology.graphs", "required for kind = \"markov\""))?;
                if list.is_empty() {
                    return Err(invalid("topology.graphs", "at least one graph is required"));
                }
                let graphs = list
                    .iter()
                    .enumerate()
                    .map(|(k, rows)| digraph(&format!("topology.graphs[{k}]"), rows))
                    .collect::<Result<Vec<_>, _>>()?;
                let rows = t.transition.as_ref().ok_or_else(|| invalid("topology.transition", "required for kind = \"markov\""))?;
                let transition = matrix_from_rows("topology.transition", rows)?;
                let initial = t.initial.clone().unwrap_or_else(|| vec![1.0 / graphs.len() as f64; graphs.len()]);
                let chain = MarkovTopology::new(graphs, transition, initial).map_err(|e| {
                    let field = match e {
                        TopologyError::InvalidInitial(_) => "topology.initial",
                        TopologyError::DimensionMismatch { .. } => "topology.graphs",
                        _ => "topology.transition",
                    };
                    topology_error(field, e)
                })?;
                if !allow_unverified {
                    check_switching_assumptions(&chain)?;
                }
                Ok(TopologyModel::Markov(chain))
            }
        }
    }

    /// Resolves the configuration into a validated [`Scenario`].
    pub fn scenario(&self, allow_unverified: bool) -> Result<Scenario, ConfigError> {
        self.validate_sections()?;
        let s = &self.scenario;
        let topology = self.topology_model(allow_unverified)?;
        let n = topology.n();
        if let Some(declared) = s.n {
            if declared != n {
                return Err(invalid("scenario.n", format!("declares {declared} sensors, topology has {n} nodes")));
            }
        }
        let theta0 = s.parameter.theta0();
        let m = theta0.len();
        if m == 0 {
            return Err(invalid("scenario.parameter.theta0", "must not be empty"));
        }
        if let Some(declared) = s.m {
            if declared != m {
                return Err(invalid("scenario.m", format!("declares dimension {declared}, theta0 has {m} entries")));
            }
        }
        let theta0 = Vector::from_column_slice(theta0);
        let kind = match &s.parameter {
            ParameterSection::Constant { .. } => ParameterKind::Constant,
            ParameterSection::RandomWalk { sigma, .. } => ParameterKind::RandomWalk { sigma: *sigma },
            ParameterSection::Sinusoid { amplitude, period, .. } => {
                ParameterKind::Sinusoid { amplitude: *amplitude, period: *period }
            }
        };
        let specs = s
            .regressors
            .iter()
            .enumerate()
            .map(|(i, r)| regressor_spec(i, r, m))
            .collect::<Result<Vec<_>, _>>()?;
        let regressors = match specs.len() {
            1 => vec![specs[0].clone(); n],
            len if len == n => specs,
            len => {
                return Err(invalid("scenario.regressors", format!("expected 1 or {n} entries, got {len}")));
            }
        };
        let mut scenario = Scenario::new(
            topology,
            ParameterProcess { theta0, kind },
            regressors,
            NoiseProcess { sigma: s.noise.sigma },
            s.alpha,
            s.horizon,
            s.seed,
        );
        scenario.unit_alpha = s.distributed_ls;
        scenario.p0_scale = s.p0_scale;
        scenario.orientation = self.orientation()?;
        if let Some(th) = &s.theta_hat0 {
            scenario.theta_hat0 = Vector::from_column_slice(th);
        }
        scenario.validate()?;
        Ok(scenario)
    }
}

fn regressor_spec(i: usize, section: &RegressorSection, m: usize) -> Result<RegressorSpec, ConfigError> {
    Ok(match section {
        RegressorSection::Gaussian { covariance } => RegressorSpec::GaussianIid {
            covariance: match covariance {
                Some(rows) => matrix_from_rows(&format!("scenario.regressors[{i}].covariance"), rows)?,
                None => Matrix::identity(m, m),
            },
        },
        RegressorSection::Masked { coords, scale } => RegressorSpec::MaskedSubspace { coords: coords.clone(), scale: *scale },
        RegressorSection::Arx { p, q } => RegressorSpec::ArxFeedback { p: *p, q: *q },
        RegressorSection::Constant { value } => RegressorSpec::Constant { value: Vector::from_column_slice(value) },
    })
}

fn check_switching_assumptions(chain: &MarkovTopology) -> Result<(), ConfigError> {
    const HINT: &str = "pass --allow-unverified-assumptions to run anyway";
    for (k, g) in chain.graphs().iter().enumerate() {
        if !is_balanced(g) {
            return Err(invalid(
                format!("topology.graphs[{k}]"),
                format!("graph is not balanced (in-weights differ from out-weights); switching mode requires every graph to be balanced; {HINT}"),
            ));
        }
    }
    if !is_strongly_connected(&chain.union_graph()) {
        return Err(invalid("topology.graphs", format!("the union of the graphs is not strongly connected; {HINT}")));
    }
    let (irreducible, aperiodic) = chain.irreducible_aperiodic();
    if !irreducible {
        return Err(invalid("topology.transition", format!("the switching chain is not irreducible; {HINT}")));
    }
    if !aperiodic {
        return Err(invalid("topology.transition", format!("the switching chain is not aperiodic; {HINT}")));
    }
    Ok(())
}
