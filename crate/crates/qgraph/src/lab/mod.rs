//! Experiment layer: observables, limiting averages, discrete reductions,
//! lift-sequence experiments and the identity suite.

pub mod observable;
pub mod bracket;
pub mod discrete;
pub mod reduction;
pub mod report;
pub mod experiment;
pub mod builtin;
pub mod verify;
