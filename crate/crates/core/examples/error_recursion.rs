//! The stacked tracking-error recursion and its state transition matrix.
//!
//! Replays the recorded errors through the error recursion and compares the
//! iterated transition product with its closed form.
//!
//! ```bash
//! cargo run --example error_recursion
//! ```

use diffusion_ffls::engine::{consistency_check, run, transition_product, RunOptions};
use diffusion_ffls::linalg::{spectral_norm, Matrix, Vector};
use diffusion_ffls::scenario::{NoiseProcess, ParameterProcess, RegressorSpec, Scenario, TopologyModel};
use diffusion_ffls::topology::WeightedDigraph;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::new(
        TopologyModel::Fixed(WeightedDigraph::path(3)),
        ParameterProcess::random_walk(Vector::from_vec(vec![1.0, 0.0]), 0.05),
        vec![RegressorSpec::GaussianIid { covariance: Matrix::identity(2, 2) }; 3],
        NoiseProcess { sigma: 0.5 },
        0.95,
        100,
        3,
    );
    let record = run(&scenario, RunOptions::with_snapshots())?;
    let report = consistency_check(&record)?;
    println!("{} steps, max relative mismatch {:.3e}", report.steps, report.max_relative);

    for k in [0, 30, 60, 90] {
        let psi = transition_product(&record, k, k + 10)?;
        println!(
            "Psi({:>3}, {:>2}): norm {:.4e}, iterated vs closed form {:.2e}",
            k + 10,
            k,
            spectral_norm(&psi.closed_form),
            psi.deviation()
        );
    }
    Ok(())
}
