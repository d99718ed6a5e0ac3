//! Drives the command-line layer from code: loads a TOML configuration,
//! runs `simulate` into a temporary directory and re-runs it from the
//! manifest.
//!
//! ```bash
//! cargo run --example config_run -- configs/verify.toml
//! ```

use std::path::PathBuf;

use diffusion_ffls::cli::{main_with_args, MANIFEST_FILE, TRAJECTORY_FILE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/verify.toml"));
    let out = std::env::temp_dir().join("ffls-config-run");
    let first = out.join("first");
    let second = out.join("second");

    let code = main_with_args(["ffls", "simulate", "--config", config.to_str().unwrap(), "--out", first.to_str().unwrap()]);
    println!("simulate exited with {code}");
    let manifest = first.join(MANIFEST_FILE);
    let code = main_with_args(["ffls", "simulate", "--from-manifest", manifest.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    println!("re-run exited with {code}");

    let a = std::fs::read(first.join(TRAJECTORY_FILE))?;
    let b = std::fs::read(second.join(TRAJECTORY_FILE))?;
    println!("trajectories identical: {}", a == b);
    Ok(())
}
