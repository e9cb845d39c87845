//! The exact-identity suite: every Green, non-backtracking, discretization
//! and reduction identity checked on a set of graphs, one residual per check.

use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cover::{cover_identities, solve_cover, CoverGreen, CoverOptions};
use crate::error::Result;
use crate::nb::{
    apply_s_gamma, apply_s_gamma_star, apply_s_u, apply_transfer, build_fields, eigen_relation_residual,
    invariance_check, lp_norm, marginal_defects, mu_k, omega, omega_star, project_f, NbMeasure, PathSpace,
};
use crate::qgraph::QGraph;
use crate::spectrum::{eigenvalues_in, finite_green, SpectrumOptions};

use super::discrete::{
    almost_same_average, average_identity, discretization_residual, n_gamma, tk_identity, uo_identity, PathObs,
};
use super::observable::EdgeFunction;
use super::reduction::{l_identity, telescoping_residual};
use super::report::{Row, RowKind};

/// Pinned tolerances.
pub mod tol {
    pub const ZETA_RECURSION: f64 = 1e-10;
    pub const COVER: f64 = 1e-7;
    pub const FINITE_GREEN: f64 = 1e-10;
    pub const EDGE: f64 = 1e-8;
    pub const NB: f64 = 1e-8;
    pub const OMEGA: f64 = 1e-7;
    /// Slack for inequalities that hold with equality in exact arithmetic.
    pub const INEQUALITY: f64 = 1e-12;
    pub const MEASURE_FORMS: f64 = 1e-9;
    pub const DISCRETE: f64 = 1e-8;
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub gammas: Vec<C64>,
    pub eta0: f64,
    pub interval: (f64, f64),
    pub mesh: usize,
    /// Eigenvalue bisection tolerance.
    pub tol: f64,
    /// Random vectors per operator-contraction check.
    pub n_random: usize,
    /// Random edge observables for the discretization check.
    pub n_observables: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            gammas: vec![C64::new(3.0, 0.2), C64::new(4.0, 0.05)],
            eta0: 0.05,
            interval: (2.5, 5.5),
            mesh: 512,
            tol: 1e-10,
            n_random: 100,
            n_observables: 10,
            seed: 0,
        }
    }
}

impl VerifyConfig {
    fn spectrum_options(&self) -> SpectrumOptions {
        SpectrumOptions {
            tol: self.tol,
            mesh: self.mesh,
            ..Default::default()
        }
    }
    fn cover_options(&self) -> CoverOptions {
        CoverOptions {
            mesh: self.mesh,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub graph: String,
    pub group: String,
    pub name: String,
    /// Energy of the check, if it is taken at a single γ.
    pub gamma: Option<(f64, f64)>,
    pub residual: f64,
    pub tol: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphRun {
    pub graph: String,
    pub n_window: usize,
    pub runtime_s: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOutput {
    pub checks: Vec<Check>,
    pub graphs: Vec<GraphRun>,
    pub total_runtime_s: f64,
}

impl VerifyOutput {
    pub fn all_passed(&self) -> bool {
        self.graphs.iter().all(|g| g.error.is_none()) && self.checks.iter().all(|c| c.passed)
    }
    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
    /// Worst residual of a group/name pair over graphs and energies.
    pub fn worst(&self, group: &str, name: &str) -> Option<&Check> {
        self.checks
            .iter()
            .filter(|c| c.group == group && c.name == name)
            .max_by(|a, b| a.residual.total_cmp(&b.residual))
    }
    pub fn rows(&self) -> Vec<Row> {
        let mut rows: Vec<Row> = self
            .checks
            .iter()
            .map(|c| {
                let mut r = Row::new(RowKind::Check, &c.graph);
                r.observable = format!("{}/{}", c.group, c.name);
                if let Some((re, im)) = c.gamma {
                    r.lambda = Some(re);
                    r.eta0 = Some(im);
                }
                r.term = Some(c.residual);
                r.mean = Some(c.tol);
                r.message = if c.passed { "pass" } else { "fail" }.into();
                r
            })
            .collect();
        for g in &self.graphs {
            if let Some(e) = &g.error {
                let mut r = Row::new(RowKind::Error, &g.graph);
                r.message = e.clone();
                rows.push(r);
            }
        }
        rows
    }
}

struct Sink<'a> {
    graph: &'a str,
    gamma: Option<C64>,
    out: Vec<Check>,
}

impl Sink<'_> {
    fn push(&mut self, group: &str, name: &str, residual: f64, tol: f64) {
        self.out.push(Check {
            graph: self.graph.to_string(),
            group: group.to_string(),
            name: name.to_string(),
            gamma: self.gamma.map(|g| (g.re, g.im)),
            residual,
            tol,
            // NaN fails
            passed: residual <= tol,
        });
    }
}

fn rand_c(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn positive_part(x: f64) -> f64 {
    if x.is_nan() {
        f64::NAN
    } else {
        x.max(0.0)
    }
}

fn edge_checks(s: &mut Sink, cg: &CoverGreen) {
    let w = cg.bases.iter().map(|b| b.wronskian_defect).fold(0.0, f64::max);
    let (t1, t2) = cg
        .bases
        .iter()
        .map(crate::edge::trig_residuals)
        .fold((0.0f64, 0.0f64), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    s.push("edge", "wronskian", w, tol::EDGE);
    s.push("edge", "reflection_s", t1, tol::EDGE);
    s.push("edge", "reflection_c", t2, tol::EDGE);
}

fn cover_checks(s: &mut Sink, q: &QGraph, cg: &CoverGreen) {
    let r = cover_identities(q, cg);
    s.push("cover", "zeta_recursion", r.zeta_recursion, tol::ZETA_RECURSION);
    for (name, v) in [
        ("vertex_diagonal", r.vertex_diagonal),
        ("weyl_titchmarsh", r.weyl_titchmarsh),
        ("zeta_inverse", r.zeta_inverse),
        ("zeta_ratio", r.zeta_ratio),
        ("mid_green", r.mid_green),
        ("green_multiplicative", r.green_multiplicative),
        ("psi_single_bond", r.psi_single_bond),
        ("psi_path", r.psi_path),
        ("psi_quadratic", r.psi_quadratic),
        ("current_forward", r.current_forward),
        ("current_backward", r.current_backward),
    ] {
        s.push("cover", name, v, tol::COVER);
    }
    s.push("cover", "psi_quadratic_gap", r.psi_quadratic_gap, tol::INEQUALITY);
    s.push("cover", "herglotz", positive_part(-r.herglotz_min), 0.0);
}

/// Symmetry of the vertex Green matrix and positivity of Im G, taken on the
/// raw solves (a sign flip in `finite_green` counts as a violation).
fn finite_green_checks(s: &mut Sink, q: &QGraph, gamma: C64, so: &SpectrumOptions) -> Result<()> {
    let nv = q.num_vertices();
    let mut gm = DMatrix::<C64>::zeros(nv, nv);
    for w in 0..nv {
        let col = finite_green(q, gamma, w, so)?;
        let sign = if col.negated { -1.0 } else { 1.0 };
        for v in 0..nv {
            gm[(v, w)] = col.values[v] * sign;
        }
    }
    let sym = (0..nv)
        .flat_map(|v| (0..nv).map(move |w| (v, w)))
        .map(|(v, w)| (gm[(v, w)] - gm[(w, v)]).norm())
        .fold(0.0, f64::max);
    let im = DMatrix::<f64>::from_fn(nv, nv, |v, w| 0.5 * (gm[(v, w)].im + gm[(w, v)].im));
    let lmin = SymmetricEigen::new(im).eigenvalues.min();
    s.push("finite_green", "symmetry", sym, tol::FINITE_GREEN);
    s.push("finite_green", "herglotz", positive_part(-lmin), tol::FINITE_GREEN);
    Ok(())
}

fn contraction_checks(s: &mut Sink, q: &QGraph, cg: &CoverGreen, n_random: usize, rng: &mut ChaCha8Rng) -> Result<()> {
    let g = &q.graph;
    let nb = q.num_bonds();
    let one = vec![C64::new(1.0, 0.0); nb];
    let sup_re = |v: Vec<C64>| v.iter().map(|x| x.re).fold(f64::NEG_INFINITY, f64::max);
    s.push("operators", "s_gamma_one", positive_part(sup_re(apply_s_gamma(g, cg, &one)) - 1.0), tol::INEQUALITY);
    s.push(
        "operators",
        "s_gamma_star_one",
        positive_part(sup_re(apply_s_gamma_star(g, cg, &one)) - 1.0),
        tol::INEQUALITY,
    );
    for (tag, (def, cur)) in [("omega", omega(g, cg)), ("omega_star", omega_star(g, cg))] {
        let top = def.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        s.push("operators", &format!("{tag}_sign"), positive_part(top), tol::INEQUALITY);
        let gap = def.iter().zip(&cur).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        s.push("operators", &format!("{tag}_current"), gap, tol::OMEGA);
    }

    let l2 = |x: &[C64]| x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..n_random {
        let v = rand_c(rng, nb);
        let p = project_f(g, &v);
        let w: Vec<C64> = v.iter().zip(&p).map(|(a, b)| a - b).collect();
        worst = worst.max(l2(&apply_transfer(g, &w)) / l2(&w) - 0.5);
    }
    s.push("operators", "transfer_half", positive_part(worst), tol::INEQUALITY);

    let spaces: Vec<PathSpace> = (1..=3).map(|k| PathSpace::new(g, k)).collect::<Result<_>>()?;
    let mus: Vec<NbMeasure> = spaces.iter().map(|sp| mu_k(sp, cg)).collect();
    let forms = mus.iter().map(|m| m.form_gap()).fold(0.0, f64::max);
    s.push("operators", "mu_forms", forms, tol::MEASURE_FORMS);
    let nonpos = mus.iter().flat_map(|m| m.weights.iter()).any(|&w| !(w > 0.0));
    s.push("operators", "mu_positive", if nonpos { 1.0 } else { 0.0 }, 0.0);
    let mut marg = f64::NEG_INFINITY;
    for k in 1..3 {
        let (a, b) = marginal_defects(&spaces[k - 1], &mus[k - 1], &spaces[k], &mus[k]);
        marg = marg.max(a).max(b);
    }
    s.push("operators", "mu_marginals", positive_part(marg), tol::INEQUALITY);

    let nu = mus[0].nu();
    let mut lp = f64::NEG_INFINITY;
    for _ in 0..n_random {
        let kv = rand_c(rng, nb);
        let su = apply_s_u(&spaces[0], g, cg, &kv);
        for p in [1.0, 2.0, 4.0, f64::INFINITY] {
            lp = lp.max(lp_norm(&nu, &su, p) / lp_norm(&nu, &kv, p) - 1.0);
        }
    }
    s.push("operators", "s_u_lp", positive_part(lp), tol::INEQUALITY);
    Ok(())
}

/// Checks at the eigenvalues in the window: eigen relation, path invariance,
/// discretization, pairing and reduction identities. Returns #I.
fn spectral_checks(s: &mut Sink, q: &QGraph, cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> Result<usize> {
    let g = &q.graph;
    let so = cfg.spectrum_options();
    let co = cfg.cover_options();
    let set = eigenvalues_in(q, cfg.interval.0, cfg.interval.1, &so)?;
    let pairs: Vec<_> = set.pairs.iter().filter(|p| !p.at_dirichlet).cloned().collect();
    let fields = build_fields(q, &pairs, cfg.eta0, 1e-6, &co)?;
    let spaces: Vec<PathSpace> = (1..=3).map(|k| PathSpace::new(g, k)).collect::<Result<_>>()?;
    let mut m = [0.0f64; 12];
    let kv1 = PathObs {
        k: 1,
        values: rand_c(rng, spaces[0].len()),
    };
    let kvs: Vec<PathObs> = (2..=3)
        .map(|k| PathObs {
            k,
            values: rand_c(rng, spaces[k - 1].len()),
        })
        .collect();
    let jv = rand_c(rng, q.num_vertices());
    let observables: Vec<EdgeFunction> = (0..cfg.n_observables)
        .map(|_| EdgeFunction::random(q.num_edges(), rng.random()))
        .collect();
    for (fl, pair) in fields.iter().zip(&pairs) {
        let (r1, r2) = eigen_relation_residual(g, fl);
        m[0] = m[0].max(r1).max(r2);
        for r in 0..=2 {
            let c = invariance_check(g, &spaces, &kv1.values, fl, 2, r);
            m[1] = m[1].max(c.single_step);
            m[2] = m[2].max(c.forward);
            m[3] = m[3].max(c.backward);
        }
        let bases = q.bases(C64::new(pair.lambda, 0.0), cfg.mesh, &so.basis)?;
        for f in &observables {
            m[4] = m[4].max(discretization_residual(q, pair, f, &bases)?);
        }
        m[5] = m[5].max(uo_identity(g, &spaces[0], fl, &kv1));
        for (i, kv) in kvs.iter().enumerate() {
            let k = i + 2;
            let l2 = if k == 2 { &spaces[0] } else { &spaces[k - 3] };
            let sp3 = [l2, &spaces[k - 2], &spaces[k - 1]];
            m[6] = m[6].max(tk_identity(g, sp3, fl, kv));
            m[7] = m[7].max(average_identity(g, sp3, fl, kv));
        }
        let (meas, closed) = almost_same_average(g, &spaces[0], fl, &kv1);
        m[8] = m[8].max((meas - closed).norm());
        let n = n_gamma(&fl.cover);
        for t in [1, 3, 8] {
            m[9] = m[9].max(telescoping_residual(g, &n, &jv, t));
        }
        m[10] = m[10].max(l_identity(g, &spaces[0], fl, &jv));
    }
    m[11] = (set.pairs.len() - pairs.len()) as f64;
    s.push("nb", "eigen_relation", m[0], tol::NB);
    s.push("nb", "peel_single_step", m[1], tol::NB);
    s.push("nb", "telescope_forward", m[2], tol::NB);
    s.push("nb", "telescope_backward", m[3], tol::NB);
    s.push("discrete", "discretization", m[4], tol::DISCRETE);
    s.push("discrete", "u_o_pairing", m[5], tol::DISCRETE);
    s.push("discrete", "t_k_pairing", m[6], tol::DISCRETE);
    s.push("discrete", "average_vanishes", m[7], tol::DISCRETE);
    s.push("discrete", "almost_same_average", m[8], tol::DISCRETE);
    s.push("reduction", "telescoping", m[9], tol::DISCRETE);
    s.push("reduction", "l_identity", m[10], tol::DISCRETE);
    // Dirichlet eigenvalues carry no ψ̊ and are skipped; the window must
    // still contain something to check
    s.push("nb", "window_nonempty", if pairs.is_empty() { 1.0 } else { 0.0 }, 0.0);
    Ok(pairs.len())
}

/// All checks for one graph; any hard error is returned instead.
pub fn verify_graph(name: &str, q: &QGraph, cfg: &VerifyConfig, seed: u64) -> Result<(Vec<Check>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let so = cfg.spectrum_options();
    let co = cfg.cover_options();
    let mut checks = Vec::new();
    for &gamma in &cfg.gammas {
        let mut s = Sink {
            graph: name,
            gamma: Some(gamma),
            out: Vec::new(),
        };
        let cg = solve_cover(q, gamma, &co)?;
        edge_checks(&mut s, &cg);
        cover_checks(&mut s, q, &cg);
        finite_green_checks(&mut s, q, gamma, &so)?;
        contraction_checks(&mut s, q, &cg, cfg.n_random, &mut rng)?;
        checks.extend(s.out);
    }
    let mut s = Sink {
        graph: name,
        gamma: None,
        out: Vec::new(),
    };
    let n = spectral_checks(&mut s, q, cfg, &mut rng)?;
    checks.extend(s.out);
    Ok((checks, n))
}

pub fn verify(graphs: &[(String, QGraph)], cfg: &VerifyConfig) -> VerifyOutput {
    let t0 = Instant::now();
    let runs: Vec<(Vec<Check>, GraphRun)> = graphs
        .par_iter()
        .enumerate()
        .map(|(i, (name, q))| {
            let t = Instant::now();
            let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
            match verify_graph(name, q, cfg, seed) {
                Ok((checks, n)) => (
                    checks,
                    GraphRun {
                        graph: name.clone(),
                        n_window: n,
                        runtime_s: t.elapsed().as_secs_f64(),
                        error: None,
                    },
                ),
                Err(e) => (
                    Vec::new(),
                    GraphRun {
                        graph: name.clone(),
                        n_window: 0,
                        runtime_s: t.elapsed().as_secs_f64(),
                        error: Some(e.to_string()),
                    },
                ),
            }
        })
        .collect();
    let (checks, graphs): (Vec<Vec<Check>>, Vec<GraphRun>) = runs.into_iter().unzip();
    VerifyOutput {
        checks: checks.into_iter().flatten().collect(),
        graphs,
        total_runtime_s: t0.elapsed().as_secs_f64(),
    }
}
