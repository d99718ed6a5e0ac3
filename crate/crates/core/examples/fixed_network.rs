//! A five-sensor ring tracking a slowly drifting parameter.
//!
//! ```bash
//! cargo run --example fixed_network
//! ```

use diffusion_ffls::engine::{run, RunOptions};
use diffusion_ffls::linalg::{Matrix, Vector};
use diffusion_ffls::scenario::{NoiseProcess, ParameterProcess, RegressorSpec, Scenario, TopologyModel};
use diffusion_ffls::topology::WeightedDigraph;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = 2;
    let scenario = Scenario::new(
        TopologyModel::Fixed(WeightedDigraph::cycle(5)),
        ParameterProcess::random_walk(Vector::from_vec(vec![0.8, -0.3]), 0.005),
        vec![RegressorSpec::GaussianIid { covariance: Matrix::identity(m, m) }; 5],
        NoiseProcess { sigma: 0.2 },
        0.97,
        300,
        1,
    );
    let record = run(&scenario, RunOptions::default())?;
    for row in record.rows.iter().step_by(50) {
        println!("t = {:>3}  mse = {:.4e}  sensor 0 estimate = {:?}", row.t, row.mse, row.estimates[0].as_slice());
    }
    let last = record.final_row();
    println!("final theta = {:?}", last.theta.as_slice());
    println!("final mse   = {:.4e}", last.mse);
    Ok(())
}
