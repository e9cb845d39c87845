//! Named example graphs, addressed as `builtin:<name>` from the CLI.

use crate::edge::PotentialSpec;
use crate::error::{Error, Result};
use crate::graph::{build_graph, complete_graph, petersen};
use crate::qgraph::QGraph;

pub const NAMES: [&str; 4] = ["k4", "k4-mixed", "petersen", "petersen-cos"];

/// Edge lengths of the mixed K4.
pub const K4_MIXED_LENGTHS: [f64; 6] = [1.0, 1.1, 1.2, 1.3, 0.9, 1.05];

/// Cosine coefficients of the Petersen potential W(x) = 0.5 cos(2πx/L).
pub const PETERSEN_POTENTIAL: [f64; 2] = [0.0, 0.5];

pub fn builtin(name: &str) -> Result<QGraph> {
    match name {
        "k4" => QGraph::equilateral(build_graph(&complete_graph(4))?, 1.0),
        "k4-mixed" => QGraph::new(
            build_graph(&complete_graph(4))?,
            K4_MIXED_LENGTHS.to_vec(),
            vec![PotentialSpec::zero(); 6],
            vec![0.0; 4],
        ),
        "petersen" => QGraph::equilateral(build_graph(&petersen())?, 1.0),
        "petersen-cos" => QGraph::new(
            build_graph(&petersen())?,
            vec![1.0; 15],
            vec![PotentialSpec::cosine(PETERSEN_POTENTIAL.to_vec()); 15],
            vec![0.0; 10],
        ),
        _ => Err(Error::Config(format!(
            "unknown builtin graph {name:?} (known: {})",
            NAMES.join(", ")
        ))),
    }
}

/// The three graphs of the identity suite.
pub fn verify_trio() -> Vec<(String, QGraph)> {
    ["k4", "k4-mixed", "petersen-cos"]
        .iter()
        .map(|n| (n.to_string(), builtin(n).expect("builtin graph")))
        .collect()
}
