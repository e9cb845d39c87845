//! Observables: edge-wise profiles and separable path kernels.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Lift;
use crate::nb::PathSpace;
use crate::qgraph::QGraph;

/// Textual observable description, realized on a base graph and lifted.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservableSpec {
    /// `const` or `const:c`.
    Const(f64),
    /// `half`: indicator of base edges e < |E|/2.
    Half,
    /// `indicator:e1,e2,...` on base edges.
    Indicator(Vec<usize>),
    /// `cosine:a0,a1,...`, the same profile on every edge.
    Cosine(Vec<f64>),
    /// `random:seed`, three random cosine modes per edge.
    Random(u64),
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|_| Error::Config(format!("bad {what} entry '{t}'")))
        })
        .collect()
}

impl ObservableSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h.trim(), Some(t.trim())),
            None => (s.trim(), None),
        };
        match (head, tail) {
            ("const", None) => Ok(ObservableSpec::Const(1.0)),
            ("const", Some(t)) => t
                .parse()
                .map(ObservableSpec::Const)
                .map_err(|_| Error::Config(format!("bad constant '{t}'"))),
            ("half", None) => Ok(ObservableSpec::Half),
            ("indicator", Some(t)) => Ok(ObservableSpec::Indicator(parse_list(t, "edge")?)),
            ("cosine", Some(t)) => Ok(ObservableSpec::Cosine(parse_list(t, "coefficient")?)),
            ("random", Some(t)) => t
                .parse()
                .map(ObservableSpec::Random)
                .map_err(|_| Error::Config(format!("bad seed '{t}'"))),
            _ => Err(Error::Config(format!("unknown observable '{s}'"))),
        }
    }

    /// Canonical spelling, parseable by [`ObservableSpec::parse`].
    pub fn label(&self) -> String {
        let join = |v: &[String]| v.join(",");
        match self {
            ObservableSpec::Const(c) => format!("const:{c}"),
            ObservableSpec::Half => "half".into(),
            ObservableSpec::Indicator(es) => {
                format!("indicator:{}", join(&es.iter().map(|e| e.to_string()).collect::<Vec<_>>()))
            }
            ObservableSpec::Cosine(a) => {
                format!("cosine:{}", join(&a.iter().map(|x| x.to_string()).collect::<Vec<_>>()))
            }
            ObservableSpec::Random(s) => format!("random:{s}"),
        }
    }

    pub fn realize(&self, q: &QGraph) -> Result<EdgeFunction> {
        let ne = q.num_edges();
        let coeffs = match self {
            ObservableSpec::Const(c) => vec![vec![*c]; ne],
            ObservableSpec::Half => (0..ne)
                .map(|e| vec![if e < ne / 2 { 1.0 } else { 0.0 }])
                .collect(),
            ObservableSpec::Indicator(es) => {
                if let Some(e) = es.iter().find(|&&e| e >= ne) {
                    return Err(Error::Config(format!("indicator edge {e} out of range")));
                }
                (0..ne)
                    .map(|e| vec![if es.contains(&e) { 1.0 } else { 0.0 }])
                    .collect()
            }
            ObservableSpec::Cosine(a) => vec![a.clone(); ne],
            ObservableSpec::Random(seed) => return Ok(EdgeFunction::random(ne, *seed)),
        };
        let f = EdgeFunction { coeffs };
        if f.sup_bound() > 1.0 + 1e-12 {
            return Err(Error::Config(format!(
                "observable '{}' has sup-norm bound {} > 1",
                self.label(),
                f.sup_bound()
            )));
        }
        Ok(f)
    }
}

/// f_e(x) = Σ_k a_k cos(πkx/L_e), x measured from the origin of bond 2e.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFunction {
    pub coeffs: Vec<Vec<f64>>,
}

impl EdgeFunction {
    pub fn constant(num_edges: usize, c: f64) -> Self {
        EdgeFunction {
            coeffs: vec![vec![c]; num_edges],
        }
    }

    /// Three random modes per edge with Σ|a_k| ≤ 1.
    pub fn random(num_edges: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..num_edges)
            .map(|_| {
                let a: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let s: f64 = a.iter().map(|x: &f64| x.abs()).sum();
                a.iter().map(|x| x / s.max(1.0)).collect()
            })
            .collect();
        EdgeFunction { coeffs }
    }

    pub fn num_edges(&self) -> usize {
        self.coeffs.len()
    }

    pub fn eval(&self, e: usize, x: f64, len: f64) -> f64 {
        cosine_eval(&self.coeffs[e], x, len)
    }

    /// Samples on the uniform mesh of bond b, in bond coordinates
    /// (bond 2e+1 sees f_e(L − x)).
    pub fn bond_samples(&self, q: &QGraph, b: usize, mesh: usize) -> Vec<f64> {
        let len = q.length(b);
        let e = b / 2;
        (0..=mesh)
            .map(|i| {
                let x = len * i as f64 / mesh as f64;
                let xe = if b % 2 == 0 { x } else { len - x };
                self.eval(e, xe, len)
            })
            .collect()
    }

    /// Σ_k |a_k| per edge, maximized: a bound on sup |f|.
    pub fn sup_bound(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|a| a.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Pulls a base-graph observable back to a lift.
    pub fn lift(&self, lift: &Lift) -> EdgeFunction {
        EdgeFunction {
            coeffs: lift.edge_proj.iter().map(|&e| self.coeffs[e].clone()).collect(),
        }
    }
}

/// Coefficients of x ↦ f(L − x).
pub fn mirror(a: &[f64]) -> Vec<f64> {
    a.iter()
        .enumerate()
        .map(|(k, c)| if k % 2 == 1 { -c } else { *c })
        .collect()
}

pub fn cosine_eval(a: &[f64], x: f64, len: f64) -> f64 {
    a.iter()
        .enumerate()
        .map(|(k, c)| c * (std::f64::consts::PI * k as f64 * x / len).cos())
        .sum()
}

/// A kernel in 𝒦_k: c(p) u(x) w(y) for x on the first bond of the path p and
/// y on its last bond, in bond coordinates. For k = 0 the kernel is the
/// multiplication operator by an edge function.
#[derive(Debug, Clone)]
pub enum Kernel {
    Diagonal(EdgeFunction),
    Paths(PathKernel),
}

#[derive(Debug, Clone)]
pub struct PathKernel {
    pub k: usize,
    /// Per-path constants indexed like `PathSpace::new(g, k)`.
    pub consts: Vec<C64>,
    /// Cosine coefficients of u and w.
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl PathKernel {
    /// Random constants in the unit square and random profiles with
    /// Σ|a_k| ≤ 1, so |𝒦| ≤ √2.
    pub fn random(space: &PathSpace, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let consts = (0..space.len())
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let mut profile = || {
            let a: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let s: f64 = a.iter().map(|x: &f64| x.abs()).sum();
            a.iter().map(|x| x / s.max(1.0)).collect::<Vec<f64>>()
        };
        let left = profile();
        let right = profile();
        PathKernel {
            k: space.k,
            consts,
            left,
            right,
        }
    }

    /// The adjoint kernel: c'(p) = conj c(p̄) with u, w swapped and mirrored,
    /// since bond coordinates flip under reversal (p̄ is the reversed path).
    pub fn adjoint(&self, space: &PathSpace) -> Self {
        let consts = space
            .paths
            .iter()
            .map(|p| {
                let r: Vec<usize> = p.iter().rev().map(|&b| crate::graph::rev(b)).collect();
                self.consts[space.index_of(&r).expect("reversed path")].conj()
            })
            .collect();
        PathKernel {
            k: self.k,
            consts,
            left: mirror(&self.right),
            right: mirror(&self.left),
        }
    }

    /// Bond profile samples in bond coordinates.
    pub fn samples(a: &[f64], len: f64, mesh: usize) -> Vec<f64> {
        (0..=mesh)
            .map(|i| cosine_eval(a, len * i as f64 / mesh as f64, len))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, complete_graph, random_n_lift};

    #[test]
    fn parse_roundtrip() {
        for s in ["const", "const:0.5", "half", "indicator:0,2", "cosine:0.5,0.25", "random:7"] {
            let o = ObservableSpec::parse(s).unwrap();
            assert_eq!(ObservableSpec::parse(&o.label()).unwrap(), o);
        }
        assert!(ObservableSpec::parse("bogus").is_err());
        assert!(ObservableSpec::parse("indicator:x").is_err());
    }

    #[test]
    fn realize_and_lift() {
        let g = build_graph(&complete_graph(4)).unwrap();
        let q = QGraph::equilateral(g.clone(), 1.0).unwrap();
        let f = ObservableSpec::Half.realize(&q).unwrap();
        assert_eq!(f.coeffs.iter().filter(|a| a[0] == 1.0).count(), 3);
        let lift = random_n_lift(&g, 4, 3).unwrap();
        let fl = f.lift(&lift);
        assert_eq!(fl.num_edges(), 24);
        assert_eq!(fl.coeffs.iter().filter(|a| a[0] == 1.0).count(), 12);
        let r = EdgeFunction::random(6, 1);
        assert!(r.sup_bound() <= 1.0 + 1e-12);
        assert!(ObservableSpec::Cosine(vec![0.8, 0.8]).realize(&q).is_err());
    }

    #[test]
    fn bond_orientation() {
        let g = build_graph(&complete_graph(4)).unwrap();
        let q = QGraph::equilateral(g, 1.0).unwrap();
        let f = EdgeFunction {
            coeffs: vec![vec![0.0, 1.0]; 6],
        };
        let a = f.bond_samples(&q, 0, 8);
        let b = f.bond_samples(&q, 1, 8);
        for i in 0..=8 {
            assert!((a[i] - b[8 - i]).abs() < 1e-15);
        }
    }
}
