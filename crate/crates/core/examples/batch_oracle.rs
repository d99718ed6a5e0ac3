//! Checks the recursive network estimates against the closed-form batch
//! solution at every time step.
//!
//! ```bash
//! cargo run --example batch_oracle
//! ```

use diffusion_ffls::engine::{run, RunOptions};
use diffusion_ffls::linalg::{relative_difference, relative_difference_vec, Matrix, Vector};
use diffusion_ffls::oracle::{batch_solve, CombinationSchedule};
use diffusion_ffls::scenario::{replay, NoiseProcess, ParameterProcess, RegressorSpec, Scenario, TopologyModel};
use diffusion_ffls::topology::WeightedDigraph;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let graph = WeightedDigraph::path(4);
    let m = 3;
    let scenario = Scenario::new(
        TopologyModel::Fixed(graph.clone()),
        ParameterProcess::random_walk(Vector::from_vec(vec![0.5, 1.0, -2.0]), 0.02),
        vec![RegressorSpec::GaussianIid { covariance: Matrix::identity(m, m) }; 4],
        NoiseProcess { sigma: 0.3 },
        0.9,
        30,
        17,
    );
    let record = run(&scenario, RunOptions::with_snapshots())?;
    let snapshots = record.snapshots()?;
    let trace = replay(&scenario);
    let schedule = CombinationSchedule::Fixed(scenario.orientation().combination_matrix(&graph));
    let p0 = vec![scenario.initial_p(); scenario.n];
    let theta0 = vec![scenario.theta_hat0.clone(); scenario.n];

    let mut worst: f64 = 0.0;
    for t in 1..=scenario.horizon {
        let batch = batch_solve(&trace.steps[..t], &schedule, scenario.alpha, &p0, &theta0)?;
        for i in 0..scenario.n {
            worst = worst.max(relative_difference_vec(&record.rows[t].estimates[i], &batch.theta_hat[i]));
            worst = worst.max(relative_difference(&snapshots.p[t][i], &batch.p[i]));
        }
        if t % 10 == 0 {
            println!("t = {t:>2}  sensor 0 batch = {:?}", batch.theta_hat[0].as_slice());
        }
    }
    println!("largest relative deviation = {worst:.3e}");
    Ok(())
}
