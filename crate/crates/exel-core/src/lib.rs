//! Core library for eXEL: subgraph and node importance estimation for
//! pretrained graph neural networks.
//!
//! The central idea: given a trained GNN, explain a prediction on a graph by
//! regressing the pooled graph embedding onto the final-layer node embeddings
//! with a group-sparsity penalty. Groups of nodes whose coefficients survive
//! the penalty are the influential substructures.
//!
//! Modules:
//! - [`rng`]: deterministic, dependency-free PRNG (splitmix64 + xoshiro256**)
//! - [`linalg`]: the few dense routines the solvers need
//! - [`graph`]: graphs, partitions, datasets
//! - [`io`]: JSON serialization and the TU dataset format
//! - [`gnn`]: a small GCN/GIN/GraphSAGE engine with manual backprop
//! - [`partition`]: node partitioners (singleton, bridge-components)
//! - [`solver`]: Group Lasso solvers (block coordinate descent, FISTA) and
//!   a brute-force support oracle
//! - [`explain`]: the importance estimator built on top of the solver
//! - [`eval`]: fidelity and ground-truth evaluation
//! - [`synth`]: synthetic motif benchmark generator

pub mod error;
pub mod eval;
pub mod explain;
pub mod gnn;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod partition;
pub mod rng;
pub mod solver;
pub mod synth;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
