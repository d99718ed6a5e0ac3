//! Monte Carlo tracking error for three drift speeds.
//!
//! ```bash
//! cargo run --release --example tracking_monte_carlo
//! ```

use diffusion_ffls::linalg::{Matrix, Vector};
use diffusion_ffls::metrics::tracking_report;
use diffusion_ffls::scenario::{NoiseProcess, ParameterProcess, RegressorSpec, Scenario, TopologyModel};
use diffusion_ffls::topology::WeightedDigraph;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for sigma in [0.001, 0.01, 0.05] {
        let scenario = Scenario::new(
            TopologyModel::Fixed(WeightedDigraph::cycle(4)),
            ParameterProcess::random_walk(Vector::from_vec(vec![1.0, -1.0]), sigma),
            vec![RegressorSpec::GaussianIid { covariance: Matrix::identity(2, 2) }; 4],
            NoiseProcess { sigma: 0.1 },
            0.95,
            800,
            12,
        );
        let report = tracking_report(&scenario, 2.0, 32)?;
        println!(
            "sigma_delta = {sigma:<6} tail L2 = {:.4e}  tail mse = {:.4e}  sigma_6 = {:.4e}",
            report.tail_mean_lp, report.tail_mean_mse, report.sigma_3p
        );
    }
    Ok(())
}
