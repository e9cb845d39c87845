//! Run settings from a TOML file and command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::edge::PotentialSpec;
use crate::error::{Error, Result};
use crate::graph::{build_graph, parse_edge_list};
use crate::lab::builtin::builtin;
use crate::lab::observable::ObservableSpec;
use crate::qgraph::QGraph;

/// Every key is optional; the same struct carries file values and flag
/// overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Edge-list file or `builtin:<name>`.
    pub graph: Option<String>,
    pub interval: Option<[f64; 2]>,
    pub eta0: Option<Vec<f64>>,
    pub folds: Option<Vec<usize>>,
    pub seed: Option<Vec<u64>>,
    pub observable: Option<Vec<String>>,
    pub out: Option<PathBuf>,
    pub mesh: Option<usize>,
    pub tol: Option<f64>,
    pub threads: Option<usize>,
    pub plot: Option<bool>,
    pub spectrum: Option<bool>,
    /// Cosine coefficients applied to every edge of a file graph.
    pub potential: Option<Vec<f64>>,
    /// One coupling for all vertices, or one per vertex.
    pub alpha: Option<Vec<f64>>,
    /// Real part of γ for `green` and `cover`.
    pub energy: Option<f64>,
    /// Path length for `nbvar`.
    pub k: Option<usize>,
    pub n_observables: Option<usize>,
    pub bst_radius: Option<usize>,
    pub quantum: Option<f64>,
}

macro_rules! overlay {
    ($base:expr, $over:expr, $($f:ident),*) => {
        Settings { $($f: $over.$f.or($base.$f)),* }
    };
}

impl Settings {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Values in `over` win.
    pub fn overlay(self, over: Settings) -> Settings {
        overlay!(
            self, over, graph, interval, eta0, folds, seed, observable, out, mesh, tol, threads, plot,
            spectrum, potential, alpha, energy, k, n_observables, bst_radius, quantum
        )
    }

    pub fn resolve(self) -> Result<Resolved> {
        let interval = self.interval.unwrap_or([2.5, 5.5]);
        if !(interval[0] < interval[1]) {
            return Err(Error::Config(format!("empty interval {interval:?}")));
        }
        let eta0 = self.eta0.unwrap_or_else(|| vec![0.05]);
        if eta0.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Config("eta0 values must be positive".into()));
        }
        let folds = self.folds.unwrap_or_else(|| vec![1]);
        if folds.contains(&0) {
            return Err(Error::Config("folds must be positive".into()));
        }
        let observables = self
            .observable
            .unwrap_or_else(|| vec!["half".into()])
            .iter()
            .map(|s| ObservableSpec::parse(s))
            .collect::<Result<Vec<_>>>()?;
        let mesh = self.mesh.unwrap_or(512);
        if mesh < 16 || mesh % 4 != 0 {
            return Err(Error::Config(format!("mesh {mesh} must be a multiple of 4 and at least 16")));
        }
        let graph = self.graph.unwrap_or_else(|| "builtin:k4".into());
        Ok(Resolved {
            graph_name: graph_name(&graph),
            graph,
            interval: (interval[0], interval[1]),
            eta0,
            folds,
            seeds: self.seed.unwrap_or_else(|| vec![0]),
            observables,
            out: self.out.unwrap_or_else(|| PathBuf::from("out")),
            mesh,
            tol: self.tol.unwrap_or(1e-10),
            threads: self.threads,
            plot: self.plot.unwrap_or(false),
            spectrum: self.spectrum.unwrap_or(false),
            potential: self.potential,
            alpha: self.alpha,
            energy: self.energy,
            k: self.k.unwrap_or(1),
            n_observables: self.n_observables.unwrap_or(3),
            bst_radius: self.bst_radius.unwrap_or(2),
            quantum: self.quantum.unwrap_or(1e-9),
        })
    }
}

/// Settings with defaults applied.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub graph: String,
    pub graph_name: String,
    pub interval: (f64, f64),
    pub eta0: Vec<f64>,
    pub folds: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(skip)]
    pub observables: Vec<ObservableSpec>,
    pub out: PathBuf,
    pub mesh: usize,
    pub tol: f64,
    pub threads: Option<usize>,
    pub plot: bool,
    pub spectrum: bool,
    pub potential: Option<Vec<f64>>,
    pub alpha: Option<Vec<f64>>,
    pub energy: Option<f64>,
    pub k: usize,
    pub n_observables: usize,
    pub bst_radius: usize,
    pub quantum: f64,
}

impl Resolved {
    pub fn load_graph(&self) -> Result<QGraph> {
        load_graph(&self.graph, self.potential.as_deref(), self.alpha.as_deref())
    }
}

fn graph_name(spec: &str) -> String {
    match spec.strip_prefix("builtin:") {
        Some(n) => n.to_string(),
        None => Path::new(spec)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| spec.to_string()),
    }
}

/// Builtin or edge-list graph; `potential` and `alpha` replace the data.
pub fn load_graph(spec: &str, potential: Option<&[f64]>, alpha: Option<&[f64]>) -> Result<QGraph> {
    let base = match spec.strip_prefix("builtin:") {
        Some(name) => builtin(name)?,
        None => {
            let text = std::fs::read_to_string(spec).map_err(|e| Error::Io(format!("{spec}: {e}")))?;
            let (edges, lengths) = parse_edge_list(&text)?;
            let g = build_graph(&edges)?;
            let (ne, nv) = (g.num_edges(), g.num_vertices());
            QGraph::new(
                g,
                lengths.unwrap_or_else(|| vec![1.0; ne]),
                vec![PotentialSpec::zero(); ne],
                vec![0.0; nv],
            )?
        }
    };
    if potential.is_none() && alpha.is_none() {
        return Ok(base);
    }
    let (ne, nv) = (base.num_edges(), base.num_vertices());
    let pots = match potential {
        Some(c) => vec![PotentialSpec::cosine(c.to_vec()); ne],
        None => (0..ne).map(|e| base.potential(2 * e).clone()).collect(),
    };
    let alphas = match alpha {
        Some([a]) => vec![*a; nv],
        Some(a) if a.len() == nv => a.to_vec(),
        Some(a) => {
            return Err(Error::Config(format!("alpha has {} values for {nv} vertices", a.len())));
        }
        None => base.alphas().to_vec(),
    };
    QGraph::new(base.graph.clone(), base.lengths().to_vec(), pots, alphas)
}
