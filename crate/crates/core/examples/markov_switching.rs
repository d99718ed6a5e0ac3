//! Links that switch at random between two graphs, neither connected alone.
//!
//! Compares steady-state tracking under switching with the fixed graph that
//! averages the two, on identical data.
//!
//! ```bash
//! cargo run --release --example markov_switching
//! ```

use diffusion_ffls::engine::{run_switching, RunOptions};
use diffusion_ffls::linalg::{Matrix, Vector};
use diffusion_ffls::metrics::tracking_report;
use diffusion_ffls::scenario::{NoiseProcess, ParameterProcess, RegressorSpec, Scenario, TopologyModel};
use diffusion_ffls::topology::{is_balanced, is_strongly_connected, MarkovTopology, WeightedDigraph};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g1 = WeightedDigraph::from_rows(&[vec![0.5, 0.5, 0.0], vec![0.5, 0.5, 0.0], vec![0.0, 0.0, 1.0]])?;
    let g2 = WeightedDigraph::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 0.5, 0.5], vec![0.0, 0.5, 0.5]])?;
    let chain = MarkovTopology::new(vec![g1.clone(), g2.clone()], Matrix::from_element(2, 2, 0.5), vec![0.5, 0.5])?;
    for (k, g) in chain.graphs().iter().enumerate() {
        println!("graph {k}: balanced = {}, strongly connected = {}", is_balanced(g), is_strongly_connected(g));
    }
    println!("union strongly connected = {}", is_strongly_connected(&chain.union_graph()));
    println!("irreducible, aperiodic   = {:?}", chain.irreducible_aperiodic());

    let regressors = (0..3).map(|i| RegressorSpec::MaskedSubspace { coords: vec![i], scale: 1.0 }).collect();
    let switching = Scenario::new(
        TopologyModel::Markov(chain),
        ParameterProcess::random_walk(Vector::from_vec(vec![1.0, -1.0, 0.5]), 0.01),
        regressors,
        NoiseProcess { sigma: 0.1 },
        0.98,
        2000,
        6,
    );
    let path: Vec<usize> = run_switching(&switching, RunOptions::default())?.rows.iter().take(20).map(|r| r.topology_index).collect();
    println!("first topology states    = {path:?}");

    let average = WeightedDigraph::new((g1.weights() + g2.weights()) * 0.5)?;
    let fixed = switching.with_topology(TopologyModel::Fixed(average));
    let a = tracking_report(&switching, 2.0, 64)?;
    let b = tracking_report(&fixed, 2.0, 64)?;
    println!("tail mean mse, switching = {:.6e}", a.tail_mean_mse);
    println!("tail mean mse, fixed     = {:.6e}", b.tail_mean_mse);
    println!("ratio                    = {:.4}", a.tail_mean_mse / b.tail_mean_mse);
    Ok(())
}
