//! Combinatorial graphs, directed bonds and non-backtracking paths.
//!
//! Edge `e = {u, w}` yields bonds `2e` (u -> w) and `2e + 1` (w -> u), so the
//! reversal of `b` is `b ^ 1`.

use std::collections::{HashSet, VecDeque};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const LIFT_RETRIES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub origin: usize,
    pub terminus: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombGraph {
    n: usize,
    bonds: Vec<Bond>,
    out: Vec<Vec<usize>>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
}

/// Optional (Data) degree bounds `min <= d(v) <= max`.
#[derive(Debug, Clone, Copy)]
pub struct DegreeCheck {
    pub min: usize,
    pub max: usize,
}

impl Default for DegreeCheck {
    fn default() -> Self {
        DegreeCheck { min: 3, max: 64 }
    }
}

#[inline]
pub fn rev(b: usize) -> usize {
    b ^ 1
}

/// Builds a connected simple graph from an edge list.
pub fn build_graph(edges: &[(usize, usize)]) -> Result<CombGraph> {
    CombGraph::new(edges, None)
}

pub fn build_graph_checked(edges: &[(usize, usize)], check: DegreeCheck) -> Result<CombGraph> {
    CombGraph::new(edges, Some(check))
}

impl CombGraph {
    pub fn new(edges: &[(usize, usize)], check: Option<DegreeCheck>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::Empty);
        }
        let n = edges.iter().map(|&(u, w)| u.max(w)).max().unwrap() + 1;
        let mut seen = HashSet::new();
        let mut bonds = Vec::with_capacity(2 * edges.len());
        for &(u, w) in edges {
            if u == w {
                return Err(Error::SelfLoop(u));
            }
            if !seen.insert((u.min(w), u.max(w))) {
                return Err(Error::DuplicateEdge(u.min(w), u.max(w)));
            }
            bonds.push(Bond {
                origin: u,
                terminus: w,
            });
            bonds.push(Bond {
                origin: w,
                terminus: u,
            });
        }
        let mut out = vec![Vec::new(); n];
        for (b, bond) in bonds.iter().enumerate() {
            out[bond.origin].push(b);
        }
        let succ = (0..bonds.len())
            .map(|b| {
                out[bonds[b].terminus]
                    .iter()
                    .copied()
                    .filter(|&c| c != rev(b))
                    .collect()
            })
            .collect();
        let pred = (0..bonds.len())
            .map(|b| {
                out[bonds[b].origin]
                    .iter()
                    .copied()
                    .filter(|&c| c != b)
                    .map(rev)
                    .collect()
            })
            .collect();
        let g = CombGraph {
            n,
            bonds,
            out,
            succ,
            pred,
        };
        let comps = g.components();
        if comps != 1 {
            return Err(Error::Disconnected(comps));
        }
        if let Some(c) = check {
            g.check_degrees(c)?;
        }
        Ok(g)
    }

    pub fn check_degrees(&self, c: DegreeCheck) -> Result<()> {
        for v in 0..self.n {
            let d = self.degree(v);
            if d < c.min || d > c.max {
                return Err(Error::Degree {
                    vertex: v,
                    degree: d,
                    min: c.min,
                    max: c.max,
                });
            }
        }
        Ok(())
    }

    fn components(&self) -> usize {
        let mut comp = vec![usize::MAX; self.n];
        let mut count = 0;
        for s in 0..self.n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = count;
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                for &b in &self.out[v] {
                    let w = self.bonds[b].terminus;
                    if comp[w] == usize::MAX {
                        comp[w] = count;
                        stack.push(w);
                    }
                }
            }
            count += 1;
        }
        count
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }
    pub fn num_edges(&self) -> usize {
        self.bonds.len() / 2
    }
    pub fn num_bonds(&self) -> usize {
        self.bonds.len()
    }
    pub fn bond(&self, b: usize) -> Bond {
        self.bonds[b]
    }
    pub fn origin(&self, b: usize) -> usize {
        self.bonds[b].origin
    }
    pub fn terminus(&self, b: usize) -> usize {
        self.bonds[b].terminus
    }
    /// Bonds with origin `v`.
    pub fn out_bonds(&self, v: usize) -> &[usize] {
        &self.out[v]
    }
    pub fn degree(&self, v: usize) -> usize {
        self.out[v].len()
    }
    /// Non-backtracking successors `N_b^+`.
    pub fn successors(&self, b: usize) -> &[usize] {
        &self.succ[b]
    }
    /// Non-backtracking predecessors `N_b^-`.
    pub fn predecessors(&self, b: usize) -> &[usize] {
        &self.pred[b]
    }
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.num_edges())
            .map(|e| (self.bonds[2 * e].origin, self.bonds[2 * e].terminus))
            .collect()
    }
    /// The bond going from `v` to `w`, if adjacent.
    pub fn bond_between(&self, v: usize, w: usize) -> Option<usize> {
        self.out[v].iter().copied().find(|&b| self.bonds[b].terminus == w)
    }

    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for b in &self.bonds {
            a[(b.origin, b.terminus)] = 1.0;
        }
        a
    }

    pub fn distances_from(&self, s: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n];
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &b in &self.out[v] {
                let w = self.bonds[b].terminus;
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn diameter(&self) -> usize {
        (0..self.n)
            .map(|v| *self.distances_from(v).iter().max().unwrap())
            .max()
            .unwrap_or(0)
    }

    pub fn is_regular(&self) -> Option<usize> {
        let d = self.degree(0);
        (0..self.n).all(|v| self.degree(v) == d).then_some(d)
    }
}

/// All non-backtracking paths of `k` bonds, in lexicographic order.
pub fn nb_paths(g: &CombGraph, k: usize) -> Vec<Vec<usize>> {
    assert!(k >= 1, "path length must be at least 1");
    let mut paths: Vec<Vec<usize>> = (0..g.num_bonds()).map(|b| vec![b]).collect();
    for _ in 1..k {
        let mut next = Vec::with_capacity(paths.len() * 2);
        for p in &paths {
            let last = *p.last().unwrap();
            for &c in g.successors(last) {
                let mut q = p.clone();
                q.push(c);
                next.push(q);
            }
        }
        paths = next;
    }
    paths
}

pub fn is_non_backtracking(g: &CombGraph, path: &[usize]) -> bool {
    path.windows(2)
        .all(|w| g.terminus(w[0]) == g.origin(w[1]) && w[1] != rev(w[0]))
}

/// An n-fold covering together with its projection to the base.
#[derive(Debug, Clone)]
pub struct Lift {
    pub graph: CombGraph,
    pub fold: usize,
    pub seed: u64,
    pub attempts: usize,
    /// Lifted vertex -> base vertex.
    pub vertex_proj: Vec<usize>,
    /// Lifted edge -> base edge (orientation preserved).
    pub edge_proj: Vec<usize>,
}

impl Lift {
    pub fn bond_proj(&self, b: usize) -> usize {
        2 * self.edge_proj[b / 2] + (b & 1)
    }
}

/// Random n-lift: one uniform permutation per base edge. Lifted vertex
/// `(v, i)` gets index `v * n + i`; copy `i` of base edge `e` gets index
/// `e * n + i`.
pub fn random_n_lift(base: &CombGraph, n: usize, seed: u64) -> Result<Lift> {
    assert!(n >= 1, "fold must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base_edges = base.edges();
    for attempt in 1..=LIFT_RETRIES {
        let mut edges = Vec::with_capacity(base_edges.len() * n);
        let mut edge_proj = Vec::with_capacity(base_edges.len() * n);
        for (e, &(u, w)) in base_edges.iter().enumerate() {
            let mut perm: Vec<usize> = (0..n).collect();
            if n > 1 {
                perm.shuffle(&mut rng);
            }
            for (i, &j) in perm.iter().enumerate() {
                edges.push((u * n + i, w * n + j));
                edge_proj.push(e);
            }
        }
        match CombGraph::new(&edges, None) {
            Ok(graph) => {
                let vertex_proj = (0..graph.num_vertices()).map(|v| v / n).collect();
                return Ok(Lift {
                    graph,
                    fold: n,
                    seed,
                    attempts: attempt,
                    vertex_proj,
                    edge_proj,
                });
            }
            Err(Error::Disconnected(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::LiftRetries(LIFT_RETRIES))
}

/// Largest ρ such that the ball of radius ρ around `v` (vertices at distance
/// ≤ ρ with all edges among them) is a tree, capped at the diameter.
pub fn injectivity_radius(g: &CombGraph, v: usize) -> usize {
    injectivity_radius_capped(g, v, g.diameter())
}

fn injectivity_radius_capped(g: &CombGraph, v: usize, cap: usize) -> usize {
    let dist = g.distances_from(v);
    let mut parent_bond = vec![usize::MAX; g.num_vertices()];
    // BFS tree: the first bond reaching each vertex in out-list order
    let mut order: Vec<usize> = (0..g.num_vertices()).collect();
    order.sort_by_key(|&x| dist[x]);
    for &x in &order {
        for &b in g.out_bonds(x) {
            let y = g.terminus(b);
            if dist[y] == dist[x] + 1 && parent_bond[y] == usize::MAX {
                parent_bond[y] = b;
            }
        }
    }
    let mut rho = cap;
    for e in 0..g.num_edges() {
        let (x, y) = (g.origin(2 * e), g.terminus(2 * e));
        let tree_edge = parent_bond[y] == 2 * e || parent_bond[x] == 2 * e + 1;
        if !tree_edge {
            let closes_at = dist[x].max(dist[y]);
            rho = rho.min(closes_at.saturating_sub(1));
        }
    }
    rho
}

/// Fraction of vertices with injectivity radius at least `r`.
pub fn bst_census(g: &CombGraph, r: usize) -> f64 {
    let cap = g.diameter();
    let good = (0..g.num_vertices())
        .filter(|&v| injectivity_radius_capped(g, v, cap) >= r)
        .count();
    good as f64 / g.num_vertices() as f64
}

/// Gap β of P = D⁻¹A: σ(P) \ {1} ⊂ [−1+β, 1−β].
pub fn spectral_gap(g: &CombGraph) -> f64 {
    let n = g.num_vertices();
    let mut m = DMatrix::zeros(n, n);
    for b in 0..g.num_bonds() {
        let (x, y) = (g.origin(b), g.terminus(b));
        m[(x, y)] = 1.0 / ((g.degree(x) * g.degree(y)) as f64).sqrt();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if n < 2 {
        return 0.0;
    }
    let beta = (1.0 - ev[n - 2]).min(1.0 + ev[0]);
    if beta < 1e-12 {
        0.0
    } else {
        beta
    }
}

/// Parses an edge list: one `u w` pair per line, `#` starts a comment.
/// An optional third column gives the edge length.
pub fn parse_edge_list(text: &str) -> Result<(Vec<(usize, usize)>, Option<Vec<f64>>)> {
    let mut edges = Vec::new();
    let mut lengths = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let perr = |msg: &str| Error::Parse {
            line: i + 1,
            msg: msg.to_string(),
        };
        if parts.len() < 2 || parts.len() > 3 {
            return Err(perr("expected `u w [length]`"));
        }
        let u = parts[0].parse().map_err(|_| perr("bad vertex index"))?;
        let w = parts[1].parse().map_err(|_| perr("bad vertex index"))?;
        edges.push((u, w));
        if parts.len() == 3 {
            lengths.push(parts[2].parse::<f64>().map_err(|_| perr("bad length"))?);
        }
    }
    if !lengths.is_empty() && lengths.len() != edges.len() {
        return Err(Error::Parse {
            line: 0,
            msg: "lengths given on some lines only".into(),
        });
    }
    let lengths = (!lengths.is_empty()).then_some(lengths);
    Ok((edges, lengths))
}

pub fn complete_graph(n: usize) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            e.push((i, j));
        }
    }
    e
}

pub fn petersen() -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for i in 0..5 {
        e.push((i, (i + 1) % 5));
        e.push((i, i + 5));
        e.push((5 + i, 5 + (i + 2) % 5));
    }
    e
}

pub fn cycle(n: usize) -> Vec<(usize, usize)> {
    (0..n).map(|i| (i, (i + 1) % n)).collect()
}
