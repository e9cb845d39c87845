//! Quantum graph data (V, E, L, W, α) and per-energy edge tables.

use std::collections::HashMap;

use num_complex::Complex64 as C64;

use crate::edge::{boundary_values, solve_basis, BasisOptions, Cauchy, EdgeBasis, PotentialSpec};
use crate::error::{Error, Result};
use crate::graph::{CombGraph, Lift};

#[derive(Debug, Clone)]
pub struct QGraph {
    pub graph: CombGraph,
    lengths: Vec<f64>,
    potentials: Vec<PotentialSpec>,
    alpha: Vec<f64>,
    /// Edge -> class of identical (L, W) data.
    class_of: Vec<usize>,
    /// Class -> representative edge.
    reps: Vec<usize>,
}

/// (Data) bounds: degrees in [3, d_max], lengths in [m, M], |α|, sup|W|, Lip W ≤ M.
#[derive(Debug, Clone, Copy)]
pub struct DataBounds {
    pub d_max: usize,
    pub m: f64,
    pub big_m: f64,
}

impl Default for DataBounds {
    fn default() -> Self {
        DataBounds {
            d_max: 16,
            m: 0.1,
            big_m: 10.0,
        }
    }
}

impl QGraph {
    pub fn new(
        graph: CombGraph,
        lengths: Vec<f64>,
        potentials: Vec<PotentialSpec>,
        alpha: Vec<f64>,
    ) -> Result<Self> {
        let ne = graph.num_edges();
        if lengths.len() != ne || potentials.len() != ne {
            return Err(Error::Data(format!(
                "expected {ne} lengths and potentials, got {} and {}",
                lengths.len(),
                potentials.len()
            )));
        }
        if alpha.len() != graph.num_vertices() {
            return Err(Error::Data(format!(
                "expected {} couplings, got {}",
                graph.num_vertices(),
                alpha.len()
            )));
        }
        if let Some(l) = lengths.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::Data(format!("edge length {l} not positive")));
        }
        let mut key_to_class: HashMap<(u64, Vec<u64>), usize> = HashMap::new();
        let mut class_of = Vec::with_capacity(ne);
        let mut reps = Vec::new();
        for e in 0..ne {
            let key = (
                lengths[e].to_bits(),
                potentials[e].coeffs.iter().map(|a| a.to_bits()).collect(),
            );
            let next = reps.len();
            let c = *key_to_class.entry(key).or_insert(next);
            if c == next {
                reps.push(e);
            }
            class_of.push(c);
        }
        Ok(QGraph {
            graph,
            lengths,
            potentials,
            alpha,
            class_of,
            reps,
        })
    }

    /// Equal lengths, zero potential, zero couplings.
    pub fn equilateral(graph: CombGraph, len: f64) -> Result<Self> {
        let ne = graph.num_edges();
        let nv = graph.num_vertices();
        QGraph::new(
            graph,
            vec![len; ne],
            vec![PotentialSpec::zero(); ne],
            vec![0.0; nv],
        )
    }

    /// Pulls the data of `self` (the base) back to a lift.
    pub fn lifted(&self, lift: &Lift) -> Result<QGraph> {
        let lengths = lift.edge_proj.iter().map(|&e| self.lengths[e]).collect();
        let pots = lift
            .edge_proj
            .iter()
            .map(|&e| self.potentials[e].clone())
            .collect();
        let alpha = lift.vertex_proj.iter().map(|&v| self.alpha[v]).collect();
        QGraph::new(lift.graph.clone(), lengths, pots, alpha)
    }

    pub fn check_data(&self, bounds: &DataBounds) -> Result<()> {
        self.graph.check_degrees(crate::graph::DegreeCheck {
            min: 3,
            max: bounds.d_max,
        })?;
        for e in 0..self.graph.num_edges() {
            let l = self.lengths[e];
            if l < bounds.m || l > bounds.big_m {
                return Err(Error::Data(format!("length {l} outside [m, M]")));
            }
            let p = &self.potentials[e];
            if p.sup_bound() > bounds.big_m || p.lipschitz_bound(l) > bounds.big_m {
                return Err(Error::Data(format!("potential on edge {e} exceeds M")));
            }
        }
        if let Some(a) = self.alpha.iter().find(|a| a.abs() > bounds.big_m) {
            return Err(Error::Data(format!("coupling {a} exceeds M")));
        }
        Ok(())
    }

    pub fn num_vertices(&self) -> usize {
        self.graph.num_vertices()
    }
    pub fn num_edges(&self) -> usize {
        self.graph.num_edges()
    }
    pub fn num_bonds(&self) -> usize {
        self.graph.num_bonds()
    }
    pub fn length(&self, b: usize) -> f64 {
        self.lengths[b / 2]
    }
    pub fn edge_length(&self, e: usize) -> f64 {
        self.lengths[e]
    }
    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }
    pub fn potential(&self, b: usize) -> &PotentialSpec {
        &self.potentials[b / 2]
    }
    pub fn alpha(&self, v: usize) -> f64 {
        self.alpha[v]
    }
    pub fn alphas(&self) -> &[f64] {
        &self.alpha
    }
    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum()
    }
    pub fn num_classes(&self) -> usize {
        self.reps.len()
    }
    /// Class of the edge carrying bond `b`.
    pub fn class(&self, b: usize) -> usize {
        self.class_of[b / 2]
    }
    pub fn class_of_edge(&self, e: usize) -> usize {
        self.class_of[e]
    }
    pub fn class_rep(&self, c: usize) -> usize {
        self.reps[c]
    }
    pub fn is_free(&self) -> bool {
        self.potentials.iter().all(|p| p.coeffs.iter().all(|&a| a == 0.0))
            && self.alpha.iter().all(|&a| a == 0.0)
    }

    /// Boundary values at L per class.
    pub fn boundaries(&self, gamma: C64, opts: &BasisOptions) -> Result<Vec<Cauchy>> {
        self.reps
            .iter()
            .map(|&e| boundary_values(self.lengths[e], &self.potentials[e], gamma, opts))
            .collect()
    }

    /// Full bases with mesh grids per class.
    pub fn bases(&self, gamma: C64, mesh: usize, opts: &BasisOptions) -> Result<Vec<EdgeBasis>> {
        self.reps
            .iter()
            .map(|&e| solve_basis(self.lengths[e], &self.potentials[e], gamma, mesh, opts))
            .collect()
    }
}

/// Minimum over edges and λ ∈ [a, b] of |S_λ(L_b)|: grid scan followed by
/// golden-section refinement around the smallest grid values.
pub fn dirichlet_distance(q: &QGraph, a: f64, b: f64, grid: usize, opts: &BasisOptions) -> Result<f64> {
    let grid = grid.max(2);
    let mut best = f64::INFINITY;
    for c in 0..q.num_classes() {
        let e = q.class_rep(c);
        let (len, pot) = (q.lengths[e], &q.potentials[e]);
        let s = |lam: f64| -> Result<f64> {
            Ok(boundary_values(len, pot, C64::new(lam, 0.0), opts)?.s.re)
        };
        let xs: Vec<f64> = (0..=grid)
            .map(|i| a + (b - a) * i as f64 / grid as f64)
            .collect();
        let vals = xs.iter().map(|&x| s(x)).collect::<Result<Vec<_>>>()?;
        for i in 0..=grid {
            best = best.min(vals[i].abs());
            if i < grid && vals[i].signum() != vals[i + 1].signum() {
                return Ok(0.0);
            }
        }
        // local minima of |S| on the grid
        for i in 1..grid {
            let (l, m, r) = (vals[i - 1].abs(), vals[i].abs(), vals[i + 1].abs());
            if m <= l && m <= r {
                let (mut lo, mut hi) = (xs[i - 1], xs[i + 1]);
                let phi = (5f64.sqrt() - 1.0) / 2.0;
                for _ in 0..60 {
                    let x1 = hi - phi * (hi - lo);
                    let x2 = lo + phi * (hi - lo);
                    if s(x1)?.abs() < s(x2)?.abs() {
                        hi = x2;
                    } else {
                        lo = x1;
                    }
                }
                best = best.min(s(0.5 * (lo + hi))?.abs());
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, complete_graph};

    #[test]
    fn classes_and_lift() {
        let g = build_graph(&complete_graph(4)).unwrap();
        let q = QGraph::new(
            g.clone(),
            vec![1.0, 1.0, 1.2, 1.0, 1.2, 1.0],
            vec![PotentialSpec::zero(); 6],
            vec![0.0; 4],
        )
        .unwrap();
        assert_eq!(q.num_classes(), 2);
        let lift = crate::graph::random_n_lift(&g, 3, 1).unwrap();
        let ql = q.lifted(&lift).unwrap();
        assert_eq!(ql.num_classes(), 2);
        for b in 0..ql.num_bonds() {
            assert_eq!(ql.length(b), q.length(lift.bond_proj(b)));
        }
    }

    #[test]
    fn dirichlet_examples() {
        let g = build_graph(&complete_graph(4)).unwrap();
        let o = BasisOptions::default();
        let q = QGraph::equilateral(g.clone(), 1.0).unwrap();
        assert!((dirichlet_distance(&q, 8.0, 9.0, 64, &o).unwrap() - 3f64.sin() / 3.0).abs() < 1e-9);
        assert!(dirichlet_distance(&q, 9.0, 11.0, 64, &o).unwrap() < 1e-12);
        let mixed = QGraph::new(
            g,
            vec![1.0, 1.2, 1.0, 1.2, 1.0, 1.2],
            vec![PotentialSpec::zero(); 6],
            vec![0.0; 4],
        )
        .unwrap();
        let d = dirichlet_distance(&mixed, 8.0, 9.0, 64, &o).unwrap();
        // (π/1.2)² ≈ 6.85 < 8: the 1.2 edge contributes its value at the window ends
        let s12 = |l: f64| (l.sqrt() * 1.2).sin().abs() / l.sqrt();
        let s1 = |l: f64| l.sqrt().sin().abs() / l.sqrt();
        let oracle = (0..=4000)
            .map(|i| 8.0 + i as f64 / 4000.0)
            .map(|l| s12(l).min(s1(l)))
            .fold(f64::INFINITY, f64::min);
        assert!(d > 0.0 && (d - oracle).abs() < 1e-6);
    }
}
