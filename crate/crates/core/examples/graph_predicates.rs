//! Graph and Markov-chain utilities on a few small examples.
//!
//! ```bash
//! cargo run --example graph_predicates
//! ```

use diffusion_ffls::linalg::Matrix;
use diffusion_ffls::topology::{
    diameter, is_balanced, is_connected_undirected, is_strongly_connected, matrix_power_min_entry,
    product_positivity_check, MarkovTopology, WeightedDigraph,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = WeightedDigraph::path(4);
    let d = diameter(&path)?;
    println!("path(4): connected = {}, diameter = {d}", is_connected_undirected(&path)?);
    println!("path(4): min entry of A^{d} = {:.4}, of A^{} = {:.4}", matrix_power_min_entry(&path, d), d - 1, matrix_power_min_entry(&path, d - 1));

    let ring = WeightedDigraph::directed_cycle(3, 0.5)?;
    println!("directed 3-cycle: balanced = {}, strongly connected = {}", is_balanced(&ring), is_strongly_connected(&ring));
    println!("directed 3-cycle: min entry of A^2 = {}", matrix_power_min_entry(&ring, 2));

    let skewed = WeightedDigraph::from_rows(&[vec![0.5, 0.5], vec![0.1, 0.9]])?;
    println!("skewed pair: balanced = {}", is_balanced(&skewed));

    let g1 = WeightedDigraph::from_rows(&[vec![0.5, 0.5, 0.0], vec![0.5, 0.5, 0.0], vec![0.0, 0.0, 1.0]])?;
    let g2 = WeightedDigraph::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 0.5, 0.5], vec![0.0, 0.5, 0.5]])?;
    let sequence = [ring.clone(), WeightedDigraph::cycle(3), WeightedDigraph::directed_cycle(3, 0.8)?];
    println!("product of three strongly connected graphs: min entry = {:.4}", product_positivity_check(&sequence)?);

    for (name, transition) in [
        ("mixing", Matrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5])),
        ("periodic", Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])),
        ("absorbing", Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 0.5])),
    ] {
        let chain = MarkovTopology::new(vec![g1.clone(), g2.clone()], transition, vec![0.5, 0.5])?;
        let (irreducible, aperiodic) = chain.irreducible_aperiodic();
        println!("{name:>9} chain: irreducible = {irreducible}, aperiodic = {aperiodic}, q0 = {:?}", chain.primitivity_index());
    }
    Ok(())
}
