//! Exponential decay of the homogeneous error dynamics.
//!
//! Fits `log ‖Ψ(t, 0)‖` against `t` for an excited network and for one that
//! receives no information at all.
//!
//! ```bash
//! cargo run --release --example stability_decay
//! ```

use diffusion_ffls::engine::{run, RunOptions};
use diffusion_ffls::linalg::Vector;
use diffusion_ffls::metrics::decay_fit;
use diffusion_ffls::scenario::{NoiseProcess, ParameterProcess, RegressorSpec, Scenario, TopologyModel};
use diffusion_ffls::topology::WeightedDigraph;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let regressors = (0..3).map(|i| RegressorSpec::MaskedSubspace { coords: vec![i], scale: 1.0 }).collect();
    let excited = Scenario::new(
        TopologyModel::Fixed(WeightedDigraph::path(3)),
        ParameterProcess::random_walk(Vector::from_vec(vec![1.0, -1.0, 0.5]), 0.01),
        regressors,
        NoiseProcess { sigma: 0.1 },
        0.98,
        1000,
        6,
    );
    let mut silent = excited.clone();
    silent.regressors = vec![RegressorSpec::Constant { value: Vector::zeros(3) }; 3];

    for (name, scenario) in [("excited", &excited), ("silent", &silent)] {
        let record = run(scenario, RunOptions::with_snapshots())?;
        let fit = decay_fit(&record, 10)?;
        println!(
            "{name:>8}: slope {:+.4e} (rate {:.6}), r^2 {:.4}, frobenius slope {:+.4e}",
            fit.spectral.slope,
            fit.spectral.slope.exp(),
            fit.spectral.r_squared,
            fit.frobenius.slope
        );
        if let Some(note) = fit.note {
            println!("          {note}");
        }
    }
    Ok(())
}
