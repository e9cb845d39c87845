//! Quantum graphs, universal-cover Green functions, non-backtracking calculus
//! and quantum-ergodicity experiments on random N-lifts.

pub mod error;
pub mod quad;
pub mod graph;
pub mod edge;
pub mod qgraph;
pub mod spectrum;
pub mod cover;
pub mod nb;
pub mod lab;
pub mod config;

pub use error::{Error, Result};
pub use num_complex::Complex64;
