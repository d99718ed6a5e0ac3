//! The `ffls` command line: `simulate`, `verify` and `excitation`.
//!
//! Every command reads a TOML run configuration (or the configuration stored
//! in a previous run's manifest), applies flag overrides, and writes its files
//! into the output directory. Exit codes: 0 success, 2 invalid configuration,
//! 3 runtime failure, 4 failed verification.
//!
//! The trajectory CSV has the columns
//! `t, r, theta_0..theta_{m−1}, est_{i}_{c} (per sensor i, coordinate c), err_sq_{i}, mse`,
//! `2 + m + n·m + n + 1` in total, with floats written to 17 significant digits.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, OutputFormat, RunConfig};
use crate::engine::{consistency_check, run, transition_product, EngineError, RunOptions, TrajectoryRecord};
use crate::linalg::{relative_difference, relative_difference_vec, spd_inverse};
use crate::metrics::{aggregate_tracking, decay_fit, excitation_report, run_replications, ExcitationReport, MetricsError, TrackingReport};
use crate::oracle::{batch_solve, CombinationSchedule};
use crate::scenario::{replay, Orientation, Scenario, TopologyModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;

/// Horizon cap for `verify`; the batch oracle is quadratic in `T`.
pub const VERIFY_MAX_HORIZON: usize = 50;
pub const BATCH_TOL: f64 = 1e-9;
pub const CONSISTENCY_TOL: f64 = 1e-6;
pub const RANK_ONE_TOL: f64 = 1e-8;
pub const TELESCOPING_TOL: f64 = 1e-8;
/// Window length of the telescoping check.
pub const TELESCOPING_WINDOW: usize = 10;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "ffls", version, about = "Diffusion forgetting-factor least squares over sensor networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one trajectory (plus Monte Carlo tracking statistics) and write CSV and manifest.
    Simulate(RunArgs),
    /// Check the recursion against the batch oracle and its own identities.
    Verify(RunArgs),
    /// Estimate the cooperative excitation condition.
    Excitation(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long, required_unless_present = "from_manifest", conflicts_with = "from_manifest")]
    pub config: Option<PathBuf>,
    /// Re-run the configuration recorded in a manifest.
    #[arg(long)]
    pub from_manifest: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Record covariance snapshots (enables the decay fit).
    #[arg(long)]
    pub snapshots: bool,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub orientation: Option<Orientation>,
    /// Run switching topologies whose graphs or chain fail the stability assumptions.
    #[arg(long)]
    pub allow_unverified_assumptions: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("runtime failure: {0}")]
    Runtime(String),
    #[error("verification failed")]
    Verification,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
            CliError::Verification => EXIT_VERIFICATION,
        }
    }
}

impl From<EngineError> for CliError {
    fn from(err: EngineError) -> Self {
        CliError::Runtime(err.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(err: io::Error) -> Self {
        CliError::Runtime(err.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(err: MetricsError) -> Self {
        match err {
            MetricsError::WindowExceedsHorizon { .. } => {
                CliError::Config(ConfigError::Invalid { field: "metrics.h".into(), message: err.to_string() })
            }
            MetricsError::Scenario(e) => CliError::Config(e.into()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub software: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub orientation: String,
    pub allow_unverified_assumptions: bool,
    /// Fully resolved configuration, overrides applied.
    pub config: RunConfig,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        serde_json::from_str(&text).map_err(|e| ConfigError::Parse(format!("manifest {}: {e}", path.display())))
    }
}

/// Configuration with overrides applied, plus the scenario it resolves to.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub scenario: Scenario,
    pub allow_unverified: bool,
    pub out: PathBuf,
}

pub fn resolve(args: &RunArgs) -> Result<Resolved, ConfigError> {
    let (mut config, mut allow) = match (&args.config, &args.from_manifest) {
        (_, Some(path)) => {
            let manifest = Manifest::load(path)?;
            (manifest.config, manifest.allow_unverified_assumptions)
        }
        (Some(path), None) => (RunConfig::load(path)?, false),
        (None, None) => return Err(ConfigError::Invalid { field: "--config".into(), message: "a configuration file is required".into() }),
    };
    allow |= args.allow_unverified_assumptions;
    if let Some(seed) = args.seed {
        config.scenario.seed = seed;
    }
    if let Some(r) = args.replications {
        config.metrics.replications = r;
    }
    if args.snapshots {
        config.metrics.snapshots = true;
    }
    if let Some(o) = args.orientation {
        config.topology.orientation = Some(o.as_str().into());
    }
    if let Some(out) = &args.out {
        config.output.dir = out.display().to_string();
    }
    let scenario = config.scenario(allow)?;
    config.topology.orientation = Some(scenario.orientation().as_str().into());
    let out = PathBuf::from(&config.output.dir);
    Ok(Resolved { config, scenario, allow_unverified: allow, out })
}

/// Column names of the trajectory CSV.
pub fn trajectory_header(n: usize, m: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string(), "r".to_string()];
    cols.extend((0..m).map(|c| format!("theta_{c}")));
    for i in 0..n {
        cols.extend((0..m).map(|c| format!("est_{i}_{c}")));
    }
    cols.extend((0..n).map(|i| format!("err_sq_{i}")));
    cols.push("mse".into());
    cols
}

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_error(err: csv::Error) -> io::Error {
    io::Error::other(err)
}

pub fn write_trajectory_csv<W: Write>(record: &TrajectoryRecord, w: W) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(trajectory_header(record.n, record.m)).map_err(csv_error)?;
    for row in &record.rows {
        let mut fields = vec![row.t.to_string(), row.topology_index.to_string()];
        fields.extend(row.theta.iter().map(|&x| float(x)));
        for est in &row.estimates {
            fields.extend(est.iter().map(|&x| float(x)));
        }
        fields.extend(row.err_sq.iter().map(|&x| float(x)));
        fields.push(float(row.mse));
        out.write_record(&fields).map_err(csv_error)?;
    }
    out.flush()
}

pub fn write_tracking_csv<W: Write>(report: &TrackingReport, w: W) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "lp_norm", "mean_mse"]).map_err(csv_error)?;
    for (t, (lp, mse)) in report.lp_norms.iter().zip(&report.mean_mse).enumerate() {
        out.write_record([t.to_string(), float(*lp), float(*mse)]).map_err(csv_error)?;
    }
    out.flush()
}

pub fn write_excitation_csv<W: Write>(report: &ExcitationReport, w: W) -> io::Result<()> {
    let n = report.sensors.len();
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = ["window", "first", "last", "lambda_hat", "std_error", "lambda_realized"]
        .into_iter()
        .map(String::from)
        .collect();
    header.extend((0..n).map(|i| format!("sensor_lambda_hat_{i}")));
    header.extend((0..n).map(|i| format!("sensor_lambda_realized_{i}")));
    out.write_record(&header).map_err(csv_error)?;
    let opt = |x: Option<f64>| x.map(float).unwrap_or_default();
    for win in &report.windows {
        let mut fields = vec![
            win.index.to_string(),
            win.first.to_string(),
            win.last.to_string(),
            opt(win.lambda_hat),
            opt(win.std_error),
            float(win.lambda_realized),
        ];
        fields.extend(win.sensor_lambda_hat.iter().map(|&x| opt(x)));
        fields.extend(win.sensor_lambda_realized.iter().map(|&x| float(x)));
        out.write_record(&fields).map_err(csv_error)?;
    }
    out.flush()
}

fn create_file(dir: &Path, name: &str) -> io::Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(dir.join(name), text + "\n")?;
    Ok(())
}

fn write_manifest(resolved: &Resolved, command: &str, files: &[String]) -> Result<(), CliError> {
    let manifest = Manifest {
        software: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        seed: resolved.scenario.seed,
        orientation: resolved.scenario.orientation().as_str().into(),
        allow_unverified_assumptions: resolved.allow_unverified,
        config: resolved.config.clone(),
        files: files.to_vec(),
    };
    write_json(&resolved.out, MANIFEST_FILE, &manifest)
}

pub fn cmd_simulate<W: Write>(args: &RunArgs, stdout: &mut W) -> Result<(), CliError> {
    let resolved = resolve(args)?;
    let sc = &resolved.scenario;
    let metrics = &resolved.config.metrics;
    let output = &resolved.config.output;
    fs::create_dir_all(&resolved.out)?;
    let mut files = Vec::new();

    let record = run(sc, RunOptions { snapshots: metrics.snapshots, replication: 0 })?;
    if output.wants(OutputFormat::Csv) {
        write_trajectory_csv(&record, create_file(&resolved.out, TRAJECTORY_FILE)?)?;
        files.push(TRAJECTORY_FILE.to_string());
    }
    writeln!(stdout, "simulated {} steps on {} sensors (orientation {})", sc.horizon, sc.n, sc.orientation().as_str())?;
    writeln!(stdout, "final mse: {:.6e}", record.final_row().mse)?;

    if metrics.replications >= 2 {
        let records = run_replications(sc, metrics.replications)?;
        let report = aggregate_tracking(&records, metrics.p)?;
        writeln!(
            stdout,
            "tracking over {} replications: tail mean mse {:.6e}, tail mean L{} norm {:.6e}",
            report.replications, report.tail_mean_mse, report.p, report.tail_mean_lp
        )?;
        if output.wants(OutputFormat::Json) {
            write_json(&resolved.out, "tracking.json", &report)?;
            files.push("tracking.json".into());
        }
        if output.wants(OutputFormat::Csv) {
            write_tracking_csv(&report, create_file(&resolved.out, "tracking.csv")?)?;
            files.push("tracking.csv".into());
        }
    }

    if metrics.snapshots {
        match decay_fit(&record, metrics.h) {
            Ok(fit) => {
                writeln!(stdout, "decay fit: slope {:.6e}, r^2 {:.4}", fit.spectral.slope, fit.spectral.r_squared)?;
                if let Some(note) = &fit.note {
                    writeln!(stdout, "note: {note}")?;
                }
                if output.wants(OutputFormat::Json) {
                    write_json(&resolved.out, "decay.json", &fit)?;
                    files.push("decay.json".into());
                }
            }
            Err(e) => writeln!(stdout, "decay fit skipped: {e}")?,
        }
    }

    write_manifest(&resolved, "simulate", &files)?;
    writeln!(stdout, "wrote {}", resolved.out.display())?;
    Ok(())
}

/// Largest deviations found by [`verify_scenario`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyReport {
    pub batch: f64,
    pub consistency: f64,
    pub rank_one: f64,
    pub telescoping: f64,
}

impl VerifyReport {
    pub fn checks(&self) -> [(&'static str, f64, f64); 4] {
        [
            ("batch oracle vs recursion", self.batch, BATCH_TOL),
            ("error recursion consistency", self.consistency, CONSISTENCY_TOL),
            ("rank-one update identity", self.rank_one, RANK_ONE_TOL),
            ("telescoping transition product", self.telescoping, TELESCOPING_TOL),
        ]
    }

    pub fn passed(&self) -> bool {
        self.checks().iter().all(|(_, dev, tol)| dev <= tol)
    }
}

/// Runs the scenario with snapshots and measures the four verification deviations.
pub fn verify_scenario(sc: &Scenario) -> Result<VerifyReport, CliError> {
    let TopologyModel::Fixed(g) = &sc.topology else {
        return Err(ConfigError::Invalid { field: "topology.kind".into(), message: "verify supports fixed topologies only".into() }.into());
    };
    let record = run(sc, RunOptions::with_snapshots())?;
    let snap = record.snapshots()?;
    let trace = replay(sc);
    let schedule = CombinationSchedule::Fixed(sc.orientation().combination_matrix(g));
    let p0 = vec![sc.initial_p(); sc.n];
    let th0 = vec![sc.theta_hat0.clone(); sc.n];

    let mut batch: f64 = 0.0;
    for t in 1..=sc.horizon {
        let sol = batch_solve(&trace.steps[..t], &schedule, sc.alpha, &p0, &th0).map_err(|e| CliError::Runtime(e.to_string()))?;
        for i in 0..sc.n {
            batch = batch.max(relative_difference_vec(&record.rows[t].estimates[i], &sol.theta_hat[i]));
            batch = batch.max(relative_difference(&snap.p[t][i], &sol.p[i]));
        }
    }

    let consistency = consistency_check(&record)?.max_relative;

    let mut rank_one: f64 = 0.0;
    for (t, step) in snap.steps.iter().enumerate() {
        for i in 0..sc.n {
            let p_inv = spd_inverse(&snap.p[t][i]).ok_or_else(|| CliError::Runtime(format!("P[{t}][{i}] is singular")))?;
            let phi = &step.regressors[i];
            let info = p_inv * sc.alpha + phi * phi.transpose();
            let direct = spd_inverse(&info).ok_or_else(|| CliError::Runtime(format!("information matrix at step {t} is singular")))?;
            rank_one = rank_one.max(relative_difference(&step.p_bar[i], &direct));
        }
    }

    let mut telescoping: f64 = 0.0;
    let window = TELESCOPING_WINDOW.min(sc.horizon);
    for k in 0..=(sc.horizon - window) {
        telescoping = telescoping.max(transition_product(&record, k, k + window)?.deviation());
    }
    Ok(VerifyReport { batch, consistency, rank_one, telescoping })
}

pub fn cmd_verify<W: Write>(args: &RunArgs, stdout: &mut W) -> Result<(), CliError> {
    let resolved = resolve(args)?;
    let sc = &resolved.scenario;
    if sc.horizon > VERIFY_MAX_HORIZON {
        return Err(ConfigError::Invalid {
            field: "scenario.horizon".into(),
            message: format!(
                "verify is limited to horizon ≤ {VERIFY_MAX_HORIZON} because the batch oracle cost grows quadratically, got {}",
                sc.horizon
            ),
        }
        .into());
    }
    let report = verify_scenario(sc)?;
    for (name, dev, tol) in report.checks() {
        let status = if dev <= tol { "ok" } else { "FAIL" };
        writeln!(stdout, "{name:<32} max relative deviation {dev:.3e} (tolerance {tol:.0e}) {status}")?;
    }
    fs::create_dir_all(&resolved.out)?;
    let mut files = Vec::new();
    if resolved.config.output.wants(OutputFormat::Json) {
        write_json(&resolved.out, "verify.json", &report)?;
        files.push("verify.json".into());
    }
    write_manifest(&resolved, "verify", &files)?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Verification)
    }
}

pub fn cmd_excitation<W: Write>(args: &RunArgs, stdout: &mut W) -> Result<(), CliError> {
    let resolved = resolve(args)?;
    let sc = &resolved.scenario;
    let metrics = &resolved.config.metrics;
    let report = excitation_report(sc, metrics.h, metrics.replications, metrics.p)?;
    let verdict = |pass: bool| if pass { "pass" } else { "fail" };
    writeln!(stdout, "{} windows of length {}, {} replications", report.windows.len(), report.h, report.replications)?;
    writeln!(stdout, "network: lambda_0 = {:.6e} {}", report.network.lambda_0, verdict(report.network.pass))?;
    for (i, s) in report.sensors.iter().enumerate() {
        writeln!(stdout, "sensor {i}: lambda_0 = {:.6e} {}", s.lambda_0, verdict(s.pass))?;
    }
    fs::create_dir_all(&resolved.out)?;
    let mut files = Vec::new();
    if resolved.config.output.wants(OutputFormat::Json) {
        write_json(&resolved.out, "excitation.json", &report)?;
        files.push("excitation.json".into());
    }
    if resolved.config.output.wants(OutputFormat::Csv) {
        write_excitation_csv(&report, create_file(&resolved.out, "excitation_windows.csv")?)?;
        files.push("excitation_windows.csv".into());
    }
    write_manifest(&resolved, "excitation", &files)?;
    Ok(())
}

pub fn execute<W: Write, E: Write>(cli: &Cli, stdout: &mut W, stderr: &mut E) -> i32 {
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, stdout),
        Command::Verify(a) => cmd_verify(a, stdout),
        Command::Excitation(a) => cmd_excitation(a, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    execute(&cli, &mut io::stdout().lock(), &mut io::stderr().lock())
}
