//! Diffusion forgetting-factor least squares (FFLS) over sensor networks.
//!
//! Each sensor of a network observes `y_{t+1,i} = φ_{t,i}ᵀ θ_t + w_{t+1,i}` for
//! a slowly drifting parameter `θ_t`. Sensors run a local FFLS update and then
//! fuse their neighbours' intermediate estimates in information form, over a
//! fixed graph or over topologies switched by a Markov chain.
//!
//! Module map:
//!
//! - [`topology`]: weighted digraphs, graph predicates, the switching chain
//! - [`scenario`]: parameter, regressor and noise generators
//! - [`ffls`]: the per-sensor adapt and combine steps
//! - [`engine`]: the network loop, trajectory records, transition matrices
//! - [`oracle`]: closed-form batch solutions used as ground truth
//! - [`metrics`]: excitation, tracking and exponential-decay reports
//! - [`config`] and [`cli`]: the configuration file and the `ffls` binary

pub mod linalg;
pub mod topology;
pub mod scenario;
pub mod ffls;
pub mod engine;
pub mod oracle;
pub mod metrics;
pub mod config;
pub mod cli;
