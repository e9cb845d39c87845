//! Lift-sequence experiments: quantum variance of edge observables and
//! non-backtracking variance of path observables.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cover::{pull_back, solve_cover, CoverGreen, CoverOptions};
use crate::error::{Error, Result};
use crate::graph::{bst_census, random_n_lift, spectral_gap, Lift};
use crate::nb::{build_nb_field, pairing, NbField, PathSpace};
use crate::qgraph::QGraph;
use crate::spectrum::{eigenvalues_in, weyl_count, EigenPair, SpectrumOptions, SpectrumSet};

use super::bracket::{matrix_element_f, GreenDensity};
use super::observable::{EdgeFunction, ObservableSpec};
use super::report::{Row, RowKind, SCHEMA_VERSION};

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub graph_name: String,
    pub base: QGraph,
    pub interval: (f64, f64),
    pub eta0: Vec<f64>,
    pub folds: Vec<usize>,
    pub seeds: Vec<u64>,
    pub observables: Vec<ObservableSpec>,
    pub mesh: usize,
    /// Eigenvalue bisection tolerance.
    pub tol: f64,
    /// Rounding quantum for the cover cache.
    pub quantum: f64,
    pub bst_radius: usize,
}

impl ExperimentConfig {
    pub fn spectrum_options(&self) -> SpectrumOptions {
        SpectrumOptions {
            tol: self.tol,
            mesh: self.mesh,
            ..Default::default()
        }
    }
    pub fn cover_options(&self) -> CoverOptions {
        CoverOptions {
            mesh: self.mesh,
            ..Default::default()
        }
    }
}

/// A lifted graph with its spectrum in the window.
#[derive(Debug, Clone)]
pub struct LiftCell {
    pub fold: usize,
    pub seed: u64,
    pub lift: Lift,
    pub q: QGraph,
    pub beta: f64,
    pub bst: f64,
    pub spectrum: SpectrumSet,
    pub runtime_s: f64,
}

pub fn build_cell(cfg: &ExperimentConfig, fold: usize, seed: u64) -> Result<LiftCell> {
    let t0 = Instant::now();
    let lift = random_n_lift(&cfg.base.graph, fold, seed)?;
    let q = cfg.base.lifted(&lift)?;
    let beta = spectral_gap(&q.graph);
    let bst = bst_census(&q.graph, cfg.bst_radius);
    let spectrum = eigenvalues_in(&q, cfg.interval.0, cfg.interval.1, &cfg.spectrum_options())?;
    Ok(LiftCell {
        fold,
        seed,
        lift,
        q,
        beta,
        bst,
        spectrum,
        runtime_s: t0.elapsed().as_secs_f64(),
    })
}

fn cache_key(lambda: f64, quantum: f64) -> i64 {
    (lambda / quantum).round() as i64
}

/// Cover data at λ_j + iη₀ solved on the base graph (the universal cover is
/// shared by all lifts) and pulled back, one solve per rounded λ_j.
pub fn lifted_covers(
    base: &QGraph,
    cell: &LiftCell,
    eta0: f64,
    quantum: f64,
    opts: &CoverOptions,
) -> Result<Vec<Arc<CoverGreen>>> {
    let pairs = &cell.spectrum.pairs;
    let keys: Vec<i64> = pairs.iter().map(|p| cache_key(p.lambda, quantum)).collect();
    let mut uniq: Vec<(i64, f64)> = Vec::new();
    for (k, p) in keys.iter().zip(pairs) {
        if uniq.last().map(|u| u.0) != Some(*k) {
            uniq.push((*k, p.lambda));
        }
    }
    let solved: Vec<(i64, Arc<CoverGreen>)> = uniq
        .par_iter()
        .map(|&(k, lam)| {
            let cg = solve_cover(base, C64::new(lam, eta0), opts)?;
            Ok((k, Arc::new(pull_back(&cg, &cell.q, &cell.lift))))
        })
        .collect::<Result<_>>()?;
    let map: HashMap<i64, Arc<CoverGreen>> = solved.into_iter().collect();
    Ok(keys.iter().map(|k| map[k].clone()).collect())
}

pub fn lifted_fields(
    base: &QGraph,
    cell: &LiftCell,
    eta0: f64,
    quantum: f64,
    opts: &CoverOptions,
) -> Result<Vec<NbField>> {
    let covers = lifted_covers(base, cell, eta0, quantum, opts)?;
    cell.spectrum
        .pairs
        .par_iter()
        .zip(covers)
        .enumerate()
        .map(|(j, (p, cg))| build_nb_field(&cell.q, p, j, cg, opts))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceReport {
    pub graph: String,
    pub fold: usize,
    pub seed: u64,
    pub eta0: f64,
    pub observable: String,
    pub interval: (f64, f64),
    pub n_window: usize,
    pub lambdas: Vec<f64>,
    pub matrix_elements: Vec<f64>,
    pub brackets: Vec<f64>,
    pub terms: Vec<f64>,
    pub mean: f64,
    pub beta: f64,
    pub bst_census: f64,
    pub runtime_s: f64,
}

impl VarianceReport {
    /// The stored mean equals the mean recomputed from the stored terms.
    pub fn consistent(&self) -> bool {
        self.n_window == self.terms.len()
            && cesaro(&self.terms).map(|m| m.to_bits()) == Some(self.mean.to_bits())
    }
}

/// Plain mean, summed in index order.
pub fn cesaro(terms: &[f64]) -> Option<f64> {
    if terms.is_empty() {
        None
    } else {
        Some(terms.iter().sum::<f64>() / terms.len() as f64)
    }
}

/// Lower median.
pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if s.len() % 2 == 1 {
        s[s.len() / 2]
    } else {
        0.5 * (s[s.len() / 2 - 1] + s[s.len() / 2])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub fold: usize,
    pub seed: u64,
    pub beta: f64,
    pub bst_census: f64,
    pub n_window: usize,
    pub dirichlet_excluded: usize,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanEntry {
    pub fold: usize,
    pub seed: u64,
    pub eta0: f64,
    pub observable: String,
    pub n_window: usize,
    pub mean: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MedianEntry {
    pub fold: usize,
    pub eta0: f64,
    pub observable: String,
    pub median: f64,
    pub n_seeds: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CountEntry {
    pub fold: usize,
    pub mean_n_window: f64,
    /// mean N_N(I) / (fold · mean N_1(I)); 1 means linear scaling.
    pub relative_to_linear: Option<f64>,
    /// mean N_N(I) / (fold · ℒ(√b − √a)/π), the Weyl-law prediction.
    pub relative_to_weyl: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub experiment: String,
    pub graph: String,
    pub interval: (f64, f64),
    pub eta0: Vec<f64>,
    pub folds: Vec<usize>,
    pub seeds: Vec<u64>,
    pub observables: Vec<String>,
    pub cells: Vec<CellSummary>,
    pub means: Vec<MeanEntry>,
    pub medians: Vec<MedianEntry>,
    pub counts: Vec<CountEntry>,
    pub errors: Vec<String>,
    pub total_runtime_s: f64,
}

impl Summary {
    /// Medians for one (η₀, observable) in fold order.
    pub fn median_series(&self, eta0: f64, observable: &str) -> Vec<(usize, f64)> {
        self.medians
            .iter()
            .filter(|m| m.eta0 == eta0 && m.observable == observable)
            .map(|m| (m.fold, m.median))
            .collect()
    }

    /// gnuplot-ready columns: one block per (observable, η₀), separated by
    /// two blank lines so `index` selects them.
    pub fn plot_columns(&self) -> String {
        let mut out = String::from("# fold median eta0 observable\n");
        let mut blocks: BTreeMap<(String, u64), Vec<&MedianEntry>> = BTreeMap::new();
        for m in &self.medians {
            blocks
                .entry((m.observable.clone(), m.eta0.to_bits()))
                .or_default()
                .push(m);
        }
        for (i, ((obs, _), ms)) in blocks.iter().enumerate() {
            if i > 0 {
                out.push_str("\n\n");
            }
            out.push_str(&format!("# observable {obs} eta0 {:.16e}\n", ms[0].eta0));
            for m in ms {
                out.push_str(&format!("{} {:.16e} {:.16e} {}\n", m.fold, m.median, m.eta0, obs));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub reports: Vec<VarianceReport>,
    pub rows: Vec<Row>,
    pub summary: Summary,
}

/// A per-eigenvalue term source: given the cell and η₀, returns for each
/// observable label the per-j (matrix element, bracket) pairs.
type CellTerms = Vec<(String, Vec<(f64, Option<f64>)>)>;

fn variance_terms(cfg: &ExperimentConfig, cell: &LiftCell, eta0: f64, obs: &[(String, EdgeFunction)]) -> Result<CellTerms> {
    let opts = cfg.cover_options();
    let covers = lifted_covers(&cfg.base, cell, eta0, cfg.quantum, &opts)?;
    let so = cfg.spectrum_options();
    let per_j: Vec<Vec<(f64, Option<f64>)>> = cell
        .spectrum
        .pairs
        .par_iter()
        .zip(&covers)
        .map(|(p, cg)| {
            let dens = GreenDensity::new(&cell.q, cg)?;
            let real = cell.q.bases(C64::new(p.lambda, 0.0), cfg.mesh, &so.basis)?;
            Ok(obs
                .iter()
                .map(|(_, f)| (matrix_element_f(&cell.q, p, f, &real), Some(dens.bracket(&cell.q, f))))
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(obs
        .iter()
        .enumerate()
        .map(|(i, (label, _))| (label.clone(), per_j.iter().map(|v| v[i]).collect()))
        .collect())
}

/// Random observable on base B_k with values in [0, 2] rescaled to mean 1.
pub fn unit_mean_path_observable(space: &PathSpace, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..space.len()).map(|_| rng.random_range(0.0..2.0)).collect();
    let m = raw.iter().sum::<f64>() / raw.len() as f64;
    raw.iter().map(|x| C64::new(x / m, 0.0)).collect()
}

/// Pulls a base path observable back along the bond projection.
pub fn lift_path_observable(lift: &Lift, base_space: &PathSpace, lifted_space: &PathSpace, kv: &[C64]) -> Vec<C64> {
    lifted_space
        .paths
        .iter()
        .map(|p| {
            let proj: Vec<usize> = p.iter().map(|&b| lift.bond_proj(b)).collect();
            kv[base_space.index_of(&proj).expect("projected path is non-backtracking")]
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct NbConfig {
    pub k: usize,
    pub n_observables: usize,
    pub observable_seed: u64,
}

fn nb_terms(cfg: &ExperimentConfig, nbc: &NbConfig, cell: &LiftCell, eta0: f64) -> Result<CellTerms> {
    let fields = lifted_fields(&cfg.base, cell, eta0, cfg.quantum, &cfg.cover_options())?;
    let base_space = PathSpace::new(&cfg.base.graph, nbc.k)?;
    let space = PathSpace::new(&cell.q.graph, nbc.k)?;
    Ok((0..nbc.n_observables)
        .map(|i| {
            let seed = nbc.observable_seed + i as u64;
            let kb = unit_mean_path_observable(&base_space, seed);
            let kl = lift_path_observable(&cell.lift, &base_space, &space, &kb);
            let terms = fields
                .par_iter()
                .map(|fl| (pairing(&space, &fl.f_star, &kl, &fl.f).norm(), None))
                .collect();
            (nb_label(nbc.k, seed), terms)
        })
        .collect())
}

pub fn nb_label(k: usize, seed: u64) -> String {
    format!("nb-random:{seed}:k{k}")
}

fn run_grid<F>(cfg: &ExperimentConfig, experiment: &str, labels: Vec<String>, terms: F) -> ExperimentOutput
where
    F: Fn(&LiftCell, f64) -> Result<CellTerms> + Sync,
{
    let t0 = Instant::now();
    let grid: Vec<(usize, u64)> = cfg
        .folds
        .iter()
        .flat_map(|&f| cfg.seeds.iter().map(move |&s| (f, s)))
        .collect();
    struct CellOut {
        cell: std::result::Result<LiftCell, Error>,
        per_eta: Vec<(f64, std::result::Result<CellTerms, Error>, f64)>,
    }
    let outs: Vec<CellOut> = grid
        .par_iter()
        .map(|&(fold, seed)| {
            let cell = build_cell(cfg, fold, seed);
            let per_eta = match &cell {
                Ok(c) => cfg
                    .eta0
                    .iter()
                    .map(|&eta| {
                        let t = Instant::now();
                        let r = terms(c, eta);
                        (eta, r, t.elapsed().as_secs_f64())
                    })
                    .collect(),
                Err(_) => Vec::new(),
            };
            CellOut { cell, per_eta }
        })
        .collect();

    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut cells = Vec::new();
    let mut means = Vec::new();
    let mut errors = Vec::new();
    for (&(fold, seed), out) in grid.iter().zip(&outs) {
        let cell = match &out.cell {
            Ok(c) => c,
            Err(e) => {
                let mut r = Row::new(RowKind::Error, &cfg.graph_name);
                r.fold = Some(fold);
                r.seed = Some(seed);
                r.message = e.to_string();
                errors.push(format!("fold {fold} seed {seed}: {e}"));
                rows.push(r);
                continue;
            }
        };
        let lambdas = cell.spectrum.eigenvalues();
        cells.push(CellSummary {
            fold,
            seed,
            beta: cell.beta,
            bst_census: cell.bst,
            n_window: lambdas.len(),
            dirichlet_excluded: cell.spectrum.excluded_dirichlet,
            runtime_s: cell.runtime_s,
        });
        for (eta, res, secs) in &out.per_eta {
            let per_obs = match res {
                Ok(t) => t,
                Err(e) => {
                    let mut r = Row::new(RowKind::Error, &cfg.graph_name);
                    r.fold = Some(fold);
                    r.seed = Some(seed);
                    r.eta0 = Some(*eta);
                    r.message = e.to_string();
                    errors.push(format!("fold {fold} seed {seed} eta0 {eta}: {e}"));
                    rows.push(r);
                    continue;
                }
            };
            for (label, vals) in per_obs {
                let terms: Vec<f64> = vals
                    .iter()
                    .map(|(m, b)| match b {
                        Some(b) => (m - b).abs(),
                        None => *m,
                    })
                    .collect();
                let base_row = |kind| {
                    let mut r = Row::new(kind, &cfg.graph_name);
                    r.fold = Some(fold);
                    r.seed = Some(seed);
                    r.eta0 = Some(*eta);
                    r.observable = label.clone();
                    r
                };
                for (j, ((m, b), t)) in vals.iter().zip(&terms).enumerate() {
                    let mut r = base_row(RowKind::Term);
                    r.j = Some(j);
                    r.lambda = Some(lambdas[j]);
                    r.matrix_element = Some(*m);
                    r.bracket = *b;
                    r.term = Some(*t);
                    rows.push(r);
                }
                let mean = match cesaro(&terms) {
                    Some(m) => m,
                    None => {
                        let mut r = base_row(RowKind::Error);
                        r.message = Error::EmptyWindow.to_string();
                        errors.push(format!("fold {fold} seed {seed} eta0 {eta} {label}: empty window"));
                        rows.push(r);
                        continue;
                    }
                };
                let mut r = base_row(RowKind::Summary);
                r.n_window = Some(terms.len());
                r.mean = Some(mean);
                rows.push(r);
                means.push(MeanEntry {
                    fold,
                    seed,
                    eta0: *eta,
                    observable: label.clone(),
                    n_window: terms.len(),
                    mean,
                    runtime_s: *secs,
                });
                reports.push(VarianceReport {
                    graph: cfg.graph_name.clone(),
                    fold,
                    seed,
                    eta0: *eta,
                    observable: label.clone(),
                    interval: cfg.interval,
                    n_window: terms.len(),
                    lambdas: lambdas.clone(),
                    matrix_elements: vals.iter().map(|v| v.0).collect(),
                    brackets: vals.iter().map(|v| v.1.unwrap_or(f64::NAN)).collect(),
                    mean,
                    terms,
                    beta: cell.beta,
                    bst_census: cell.bst,
                    runtime_s: *secs,
                });
            }
        }
    }
    let mut medians = Vec::new();
    for &fold in &cfg.folds {
        for &eta in &cfg.eta0 {
            for label in &labels {
                let v: Vec<f64> = means
                    .iter()
                    .filter(|m| m.fold == fold && m.eta0 == eta && &m.observable == label)
                    .map(|m| m.mean)
                    .collect();
                if !v.is_empty() {
                    medians.push(MedianEntry {
                        fold,
                        eta0: eta,
                        observable: label.clone(),
                        median: median(&v),
                        n_seeds: v.len(),
                    });
                }
            }
        }
    }
    let mean_count = |fold: usize| -> Option<f64> {
        let v: Vec<f64> = cells.iter().filter(|c| c.fold == fold).map(|c| c.n_window as f64).collect();
        cesaro(&v)
    };
    let unit = mean_count(1);
    let counts = cfg
        .folds
        .iter()
        .filter_map(|&f| {
            let weyl_unit = weyl_count(&cfg.base, cfg.interval.1) - weyl_count(&cfg.base, cfg.interval.0);
            mean_count(f).map(|m| CountEntry {
                fold: f,
                mean_n_window: m,
                relative_to_linear: unit.filter(|u| *u > 0.0).map(|u| m / (f as f64 * u)),
                relative_to_weyl: m / (f as f64 * weyl_unit),
            })
        })
        .collect();
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        experiment: experiment.to_string(),
        graph: cfg.graph_name.clone(),
        interval: cfg.interval,
        eta0: cfg.eta0.clone(),
        folds: cfg.folds.clone(),
        seeds: cfg.seeds.clone(),
        observables: labels,
        cells,
        means,
        medians,
        counts,
        errors,
        total_runtime_s: t0.elapsed().as_secs_f64(),
    };
    ExperimentOutput {
        reports,
        rows,
        summary,
    }
}

/// Quantum variance (1/N(I)) Σ_j |⟨ψ_j, fψ_j⟩ − ⟨f⟩_{γ_j}| over the grid
/// fold × seed × η₀ × observable.
pub fn variance_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let base_obs: Vec<(String, EdgeFunction)> = cfg
        .observables
        .iter()
        .map(|o| o.realize(&cfg.base).map(|f| (o.label(), f)))
        .collect::<Result<_>>()?;
    let labels = base_obs.iter().map(|o| o.0.clone()).collect();
    Ok(run_grid(cfg, "variance", labels, |cell, eta| {
        let lifted: Vec<(String, EdgeFunction)> = base_obs
            .iter()
            .map(|(l, f)| (l.clone(), f.lift(&cell.lift)))
            .collect();
        variance_terms(cfg, cell, eta, &lifted)
    }))
}

/// Non-backtracking variance (1/N(I)) Σ_j |⟨f_j*, K_B f_j⟩| for random
/// unit-mean base observables on B_k, lifted along the bond projection.
pub fn nbvar_experiment(cfg: &ExperimentConfig, nbc: &NbConfig) -> Result<ExperimentOutput> {
    PathSpace::new(&cfg.base.graph, nbc.k)?;
    let labels = (0..nbc.n_observables)
        .map(|i| nb_label(nbc.k, nbc.observable_seed + i as u64))
        .collect();
    Ok(run_grid(cfg, "nbvar", labels, |cell, eta| nb_terms(cfg, nbc, cell, eta)))
}

/// Spectrum table rows: j, λ_j, at_dirichlet.
pub fn spectrum_table(set: &SpectrumSet) -> Vec<Vec<String>> {
    set.pairs
        .iter()
        .enumerate()
        .map(|(j, p): (usize, &EigenPair)| {
            vec![j.to_string(), format!("{:.16e}", p.lambda), p.at_dirichlet.to_string()]
        })
        .collect()
}
