//! Eigenpairs of H on a finite quantum graph via the vertex secular matrix,
//! and the finite-graph Green function.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::edge::{eval_at, overlaps, BasisOptions, Cauchy, EdgeBasis};
use crate::error::{Error, Result};
use crate::qgraph::QGraph;

#[derive(Debug, Clone, Copy)]
pub struct SpectrumOptions {
    /// Bisection tolerance in λ.
    pub tol: f64,
    /// Scan step is π / (scan_factor · ℒ) in √λ.
    pub scan_factor: f64,
    /// Cell subdivisions allowed when a cell looks non-monotone.
    pub max_refinements: usize,
    pub mesh: usize,
    pub basis: BasisOptions,
    /// Relative distance below which branch roots are merged.
    pub cluster_tol: f64,
    /// Relative offset from Dirichlet points where branch tracking stops.
    pub dirichlet_offset: f64,
    /// Relative singular-value threshold for kernels at Dirichlet points.
    pub nullity_tol: f64,
    /// Minimal |S_γ(L_b)| for the secular matrix.
    pub margin: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            tol: 1e-10,
            scan_factor: 8.0,
            max_refinements: 8,
            mesh: 512,
            basis: BasisOptions::default(),
            cluster_tol: 1e-8,
            dirichlet_offset: 1e-7,
            nullity_tol: 1e-8,
            margin: 1e-13,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: f64,
    /// ψ(v), L²-normalized.
    pub vertex: Vec<f64>,
    /// Outgoing derivative ψ_b′(0) for every bond.
    pub slopes: Vec<f64>,
    /// Norm of the vertex-reduced vector before scaling (diagnostic).
    pub norm: f64,
    /// λ is itself a Dirichlet value of some edge.
    pub at_dirichlet: bool,
}

#[derive(Debug, Clone)]
pub struct SpectrumSet {
    pub interval: (f64, f64),
    pub pairs: Vec<EigenPair>,
    /// Dirichlet values met inside the window.
    pub dirichlet_points: Vec<f64>,
    /// Eigenfunctions vanishing at all vertices found at those points
    /// (excluded from `pairs`).
    pub excluded_dirichlet: usize,
    /// Smallest |S_λ(L_b)| seen on the scan grid.
    pub margin: f64,
}

impl SpectrumSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.lambda).collect()
    }
}

fn check_margin(q: &QGraph, bv: &[Cauchy], margin: f64) -> Result<()> {
    for e in 0..q.num_edges() {
        let s = bv[q.class_of_edge(e)].s.norm();
        if s <= margin {
            return Err(Error::DirichletMargin { edge: e, value: s });
        }
    }
    Ok(())
}

fn assemble(q: &QGraph, bv: &[Cauchy]) -> DMatrix<C64> {
    let n = q.num_vertices();
    let mut a = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for v in 0..n {
        a[(v, v)] = C64::new(q.alpha(v), 0.0);
    }
    for b in 0..q.num_bonds() {
        let cv = bv[q.class(b)];
        let (o, t) = (q.graph.origin(b), q.graph.terminus(b));
        a[(o, o)] += cv.c / cv.s;
        a[(o, t)] = -1.0 / cv.s;
    }
    a
}

/// A(γ)_vv = α_v + Σ_{o_b=v} C(L_b)/S(L_b), A(γ)_vw = −1/S(L_b).
pub fn secular_matrix(q: &QGraph, gamma: C64, opts: &SpectrumOptions) -> Result<DMatrix<C64>> {
    let bv = q.boundaries(gamma, &opts.basis)?;
    check_margin(q, &bv, opts.margin)?;
    Ok(assemble(q, &bv))
}

/// The real symmetric secular matrix at a real energy.
pub fn secular_matrix_real(q: &QGraph, lambda: f64, opts: &SpectrumOptions) -> Result<DMatrix<f64>> {
    let a = secular_matrix(q, C64::new(lambda, 0.0), opts)?;
    let n = a.nrows();
    let mut r = DMatrix::from_fn(n, n, |i, j| a[(i, j)].re);
    r = (&r + r.transpose()) * 0.5;
    Ok(r)
}

fn branch_values(q: &QGraph, lambda: f64, opts: &SpectrumOptions) -> Result<Vec<f64>> {
    let a = secular_matrix_real(q, lambda, opts)?;
    let mut ev: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(ev)
}

fn min_abs_s(q: &QGraph, lambda: f64, opts: &SpectrumOptions) -> Result<f64> {
    let bv = q.boundaries(C64::new(lambda, 0.0), &opts.basis)?;
    Ok(bv.iter().map(|c| c.s.norm()).fold(f64::INFINITY, f64::min))
}

// monotone map λ ↦ signed √|λ|
fn to_t(l: f64) -> f64 {
    l.signum() * l.abs().sqrt()
}
fn from_t(t: f64) -> f64 {
    t.signum() * t * t
}

fn grid(l: f64, r: f64, step: f64) -> Vec<f64> {
    let (tl, tr) = (to_t(l), to_t(r));
    let cells = (((tr - tl) / step).ceil() as usize).max(1);
    (0..=cells)
        .map(|i| {
            if i == cells {
                r
            } else if i == 0 {
                l
            } else {
                from_t(tl + (tr - tl) * i as f64 / cells as f64)
            }
        })
        .collect()
}

/// Dirichlet values of each edge class inside (a, b).
fn dirichlet_points(q: &QGraph, a: f64, b: f64, opts: &SpectrumOptions) -> Result<Vec<f64>> {
    let mut pts = Vec::new();
    for c in 0..q.num_classes() {
        let e = q.class_rep(c);
        let len = q.edge_length(e);
        let pot = q.potential(2 * e).clone();
        let s = |lam: f64| -> Result<f64> {
            Ok(eval_at(len, &pot, C64::new(lam, 0.0), len, &opts.basis)?.s.re)
        };
        let g = grid(a, b, std::f64::consts::PI / (16.0 * len));
        let vals = g.iter().map(|&x| s(x)).collect::<Result<Vec<_>>>()?;
        for i in 0..g.len() - 1 {
            if vals[i] == 0.0 {
                if i > 0 {
                    pts.push(g[i]);
                }
                continue;
            }
            if vals[i].signum() != vals[i + 1].signum() && vals[i + 1] != 0.0 {
                let (mut lo, mut hi, fl) = (g[i], g[i + 1], vals[i]);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if s(mid)?.signum() == fl.signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                pts.push(0.5 * (lo + hi));
            }
        }
    }
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (1.0 + y.abs()));
    Ok(pts.into_iter().filter(|&p| p > a && p < b).collect())
}

struct Task {
    lo: f64,
    hi: f64,
    k: usize,
}

/// Locates the eigenvalues in one Dirichlet-free interval [l, r].
fn track_branches(q: &QGraph, l: f64, r: f64, opts: &SpectrumOptions) -> Result<(Vec<f64>, f64)> {
    let step = std::f64::consts::PI / (opts.scan_factor * q.total_length());
    let pts = grid(l, r, step);
    let vals: Vec<Vec<f64>> = pts
        .par_iter()
        .map(|&x| branch_values(q, x, opts))
        .collect::<Result<_>>()?;
    let margin = pts
        .iter()
        .map(|&x| min_abs_s(q, x, opts))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let mut tasks = Vec::new();
    for i in 0..pts.len() - 1 {
        collect_tasks(q, pts[i], pts[i + 1], &vals[i], &vals[i + 1], opts, 0, &mut tasks)?;
    }
    let roots: Vec<f64> = tasks
        .par_iter()
        .map(|t| bisect_branch(q, t, opts))
        .collect::<Result<_>>()?;
    Ok((roots, margin))
}

#[allow(clippy::too_many_arguments)]
fn collect_tasks(
    q: &QGraph,
    x0: f64,
    x1: f64,
    v0: &[f64],
    v1: &[f64],
    opts: &SpectrumOptions,
    depth: usize,
    tasks: &mut Vec<Task>,
) -> Result<()> {
    let n = v0.len();
    let p0 = v0.iter().filter(|&&x| x > 0.0).count();
    let p1 = v1.iter().filter(|&&x| x > 0.0).count();
    let monotone = (0..n).all(|k| !(v0[k] <= 0.0 && v1[k] > 0.0));
    if !monotone || p1 > p0 {
        if depth >= opts.max_refinements {
            return Err(Error::Scan(format!(
                "non-monotone branches on [{x0}, {x1}] after refinement"
            )));
        }
        let mid = 0.5 * (x0 + x1);
        let vm = branch_values(q, mid, opts)?;
        collect_tasks(q, x0, mid, v0, &vm, opts, depth + 1, tasks)?;
        return collect_tasks(q, mid, x1, &vm, v1, opts, depth + 1, tasks);
    }
    for k in (n - p0)..(n - p1) {
        tasks.push(Task { lo: x0, hi: x1, k });
    }
    Ok(())
}

fn bisect_branch(q: &QGraph, t: &Task, opts: &SpectrumOptions) -> Result<f64> {
    let (mut lo, mut hi) = (t.lo, t.hi);
    while hi - lo > opts.tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if branch_values(q, mid, opts)?[t.k] > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// L² Gram matrix of vertex vectors at a non-Dirichlet energy (Σ-formula).
fn vertex_gram(q: &QGraph, vecs: &[Vec<f64>], bases: &[EdgeBasis]) -> DMatrix<f64> {
    let m = vecs.len();
    let ov: Vec<(f64, f64, f64)> = bases
        .iter()
        .map(|b| {
            let (s1, s2) = overlaps(b);
            (s1.re, s2.re, b.end.s.re)
        })
        .collect();
    DMatrix::from_fn(m, m, |i, j| {
        let mut acc = 0.0;
        for e in 0..q.num_edges() {
            let (s1, s2, s) = ov[q.class_of_edge(e)];
            let (o, t) = (q.graph.origin(2 * e), q.graph.terminus(2 * e));
            let (a, b) = (&vecs[i], &vecs[j]);
            acc += ((a[o] * b[o] + a[t] * b[t]) * s1 + (a[o] * b[t] + a[t] * b[o]) * s2) / (s * s);
        }
        acc
    })
}

fn slopes_from_vertex(q: &QGraph, psi: &[f64], bv: &[Cauchy]) -> Vec<f64> {
    (0..q.num_bonds())
        .map(|b| {
            let c = bv[q.class(b)];
            let (o, t) = (q.graph.origin(b), q.graph.terminus(b));
            (psi[t] - c.c.re * psi[o]) / c.s.re
        })
        .collect()
}

fn canonical_sign(v: &mut [f64], w: &mut [f64]) {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(x) = v.iter().find(|x| x.abs() > 1e-8 * scale.max(1e-300)) {
        if *x < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
            w.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > 1e-9 {
            return x.partial_cmp(y).unwrap();
        }
    }
    std::cmp::Ordering::Equal
}

/// Orthonormalizes coefficient columns `cs` (m × r) with respect to Gram `g`.
fn g_orthonormal(g: &DMatrix<f64>, cs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gc = cs.transpose() * g * cs;
    let gc = (&gc + gc.transpose()) * 0.5;
    let chol = gc.cholesky().ok_or(Error::ZeroNorm)?;
    let linv_t = chol.l().try_inverse().ok_or(Error::ZeroNorm)?.transpose();
    Ok(cs * linv_t)
}

fn cluster_pairs(q: &QGraph, lambdas: &[f64], opts: &SpectrumOptions) -> Result<Vec<EigenPair>> {
    let m = lambdas.len();
    let lam = lambdas.iter().sum::<f64>() / m as f64;
    let a = secular_matrix_real(q, lam, opts)?;
    let n = a.nrows();
    let eig = SymmetricEigen::new(a);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .abs()
            .partial_cmp(&eig.eigenvalues[j].abs())
            .unwrap()
    });
    let vecs: Vec<Vec<f64>> = idx[..m]
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    let gamma = C64::new(lam, 0.0);
    let bases = q.bases(gamma, opts.mesh, &opts.basis)?;
    let bv: Vec<Cauchy> = bases.iter().map(|b| b.end).collect();
    let g = vertex_gram(q, &vecs, &bases);
    let coef = g_orthonormal(&g, &DMatrix::identity(m, m))?;
    let mut out = Vec::with_capacity(m);
    for c in 0..m {
        let mut psi = vec![0.0; n];
        for (i, v) in vecs.iter().enumerate() {
            for (p, x) in psi.iter_mut().zip(v) {
                *p += coef[(i, c)] * x;
            }
        }
        let norm = psi.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut slopes = slopes_from_vertex(q, &psi, &bv);
        canonical_sign(&mut psi, &mut slopes);
        out.push(EigenPair {
            lambda: lam,
            vertex: psi,
            slopes,
            norm,
            at_dirichlet: false,
        });
    }
    out.sort_by(|x, y| lex_cmp(&y.vertex, &x.vertex));
    Ok(out)
}

/// Eigenvectors of the PSD matrix `m` with eigenvalue below `rel` times
/// max(1, largest eigenvalue).
fn null_directions(m: &DMatrix<f64>, rel: f64) -> Vec<DVector<f64>> {
    let m = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let top = eig.eigenvalues.iter().fold(1.0f64, |a, &x| a.max(x));
    (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] < rel * top)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect()
}

/// Eigenpairs sitting exactly at a Dirichlet value, found from the kernel of
/// the pole-free system in the unknowns (ψ(v), ψ_e′(0)). Returns the pairs
/// with nonzero vertex values and the number of excluded vertex-zero ones.
fn dirichlet_pairs(q: &QGraph, lam: f64, opts: &SpectrumOptions) -> Result<(Vec<EigenPair>, usize)> {
    let (nv, ne) = (q.num_vertices(), q.num_edges());
    let gamma = C64::new(lam, 0.0);
    let bases = q.bases(gamma, opts.mesh, &opts.basis)?;
    let bv: Vec<Cauchy> = bases.iter().map(|b| b.end).collect();
    let dim = nv + ne;
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for e in 0..ne {
        let c = bv[q.class_of_edge(e)];
        let (o, t) = (q.graph.origin(2 * e), q.graph.terminus(2 * e));
        // continuity at t
        m[(e, o)] += c.c.re;
        m[(e, nv + e)] += c.s.re;
        m[(e, t)] -= 1.0;
        // Kirchhoff contributions
        m[(ne + o, nv + e)] += 1.0;
        m[(ne + t, o)] -= c.cp.re;
        m[(ne + t, nv + e)] -= c.sp.re;
    }
    for v in 0..nv {
        m[(ne + v, v)] -= q.alpha(v);
    }
    for i in 0..dim {
        let s = m.row(i).iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if s > 0.0 {
            m.row_mut(i).scale_mut(1.0 / s);
        }
    }
    let svd = SVD::new(m, false, true);
    let vt = svd.v_t.unwrap();
    let smax = svd.singular_values.max();
    let kernel: Vec<usize> = (0..dim)
        .filter(|&i| svd.singular_values[i] < opts.nullity_tol * smax)
        .collect();
    let km = kernel.len();
    if km == 0 {
        return Ok((Vec::new(), 0));
    }
    let kb = DMatrix::from_fn(dim, km, |r, c| vt[(kernel[c], r)]);
    let x = kb.rows(0, nv).into_owned();
    let zero_dirs = null_directions(&(x.transpose() * &x), 1e-12);
    let rank = km - zero_dirs.len();
    if rank == 0 {
        return Ok((Vec::new(), km));
    }
    // Gram of kernel functions ψ = ψ(o)C + pS
    let ints: Vec<(f64, f64, f64)> = bases
        .iter()
        .map(|b| {
            let h = b.h();
            let f = |g: &dyn Fn(usize) -> f64| {
                crate::quad::simpson(&(0..=b.mesh).map(g).collect::<Vec<_>>(), h)
            };
            (
                f(&|i| b.c[i].re * b.c[i].re),
                f(&|i| b.c[i].re * b.s[i].re),
                f(&|i| b.s[i].re * b.s[i].re),
            )
        })
        .collect();
    let gram = DMatrix::from_fn(km, km, |i, j| {
        let mut acc = 0.0;
        for e in 0..ne {
            let (cc, cs, ss) = ints[q.class_of_edge(e)];
            let o = q.graph.origin(2 * e);
            let (ai, pi) = (kb[(o, i)], kb[(nv + e, i)]);
            let (aj, pj) = (kb[(o, j)], kb[(nv + e, j)]);
            acc += ai * aj * cc + (ai * pj + pi * aj) * cs + pi * pj * ss;
        }
        acc
    });
    // complement of the vertex-zero subspace, L²-orthogonal to it
    let comp = if zero_dirs.is_empty() {
        DMatrix::identity(km, km)
    } else {
        let w = &gram * DMatrix::from_columns(&zero_dirs);
        DMatrix::from_columns(&null_directions(&(&w * w.transpose()), 1e-12))
    };
    if comp.ncols() != rank {
        return Err(Error::Scan(format!(
            "inconsistent kernel split at Dirichlet point {lam}"
        )));
    }
    let coef = g_orthonormal(&gram, &comp)?;
    let mut pairs = Vec::new();
    for c in 0..rank {
        let full = &kb * coef.column(c);
        let mut psi: Vec<f64> = (0..nv).map(|v| full[v]).collect();
        let mut slopes = vec![0.0; q.num_bonds()];
        for e in 0..ne {
            let cv = bv[q.class_of_edge(e)];
            let o = q.graph.origin(2 * e);
            let p = full[nv + e];
            slopes[2 * e] = p;
            slopes[2 * e + 1] = -(cv.cp.re * psi[o] + cv.sp.re * p);
        }
        let norm = psi.iter().map(|x| x * x).sum::<f64>().sqrt();
        canonical_sign(&mut psi, &mut slopes);
        pairs.push(EigenPair {
            lambda: lam,
            vertex: psi,
            slopes,
            norm,
            at_dirichlet: true,
        });
    }
    pairs.sort_by(|x, y| lex_cmp(&y.vertex, &x.vertex));
    Ok((pairs, km - rank))
}

/// Eigenvalues in (a, b] with vertex-nonvanishing eigenfunctions.
pub fn eigenvalues_in(q: &QGraph, a: f64, b: f64, opts: &SpectrumOptions) -> Result<SpectrumSet> {
    if !(b > a) {
        return Err(Error::Scan(format!("empty interval ({a}, {b}]")));
    }
    let dpts = dirichlet_points(q, a, b, opts)?;
    let mut cuts = vec![(a, false)];
    cuts.extend(dpts.iter().map(|&d| (d, true)));
    cuts.push((b, false));
    let mut roots = Vec::new();
    let mut margin = f64::INFINITY;
    for w in cuts.windows(2) {
        let (l, ld) = w[0];
        let (r, rd) = w[1];
        let lo = if ld { l + opts.dirichlet_offset * (1.0 + l.abs()) } else { l };
        let hi = if rd { r - opts.dirichlet_offset * (1.0 + r.abs()) } else { r };
        if hi <= lo {
            continue;
        }
        let (rs, m) = track_branches(q, lo, hi, opts)?;
        margin = margin.min(m);
        roots.extend(rs);
    }
    let guard = |x: f64| {
        dpts.iter()
            .all(|&d| (x - d).abs() > 2.0 * opts.dirichlet_offset * (1.0 + d.abs()))
    };
    roots.retain(|&x| x > a + 10.0 * opts.tol && x <= b && guard(x));
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for x in roots {
        match clusters.last_mut() {
            Some(c) if (x - c[c.len() - 1]).abs() <= opts.cluster_tol * (1.0 + x.abs()) => c.push(x),
            _ => clusters.push(vec![x]),
        }
    }
    let mut pairs: Vec<EigenPair> = clusters
        .par_iter()
        .map(|c| cluster_pairs(q, c, opts))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut excluded = 0;
    for &d in &dpts {
        let (ps, ex) = dirichlet_pairs(q, d, opts)?;
        excluded += ex;
        pairs.extend(ps);
    }
    if !dpts.is_empty() {
        margin = 0.0;
    }
    pairs.sort_by(|x, y| x.lambda.partial_cmp(&y.lambda).unwrap());
    Ok(SpectrumSet {
        interval: (a, b),
        pairs,
        dirichlet_points: dpts,
        excluded_dirichlet: excluded,
        margin,
    })
}

/// ψ on the mesh of edge `e` (oriented as bond 2e) given the basis at λ.
pub fn edge_samples(q: &QGraph, pair: &EigenPair, e: usize, basis: &EdgeBasis) -> Vec<f64> {
    let (o, t) = (q.graph.origin(2 * e), q.graph.terminus(2 * e));
    let n = basis.mesh;
    let (po, pt) = (pair.vertex[o], pair.vertex[t]);
    if pair.at_dirichlet {
        let p = pair.slopes[2 * e];
        (0..=n).map(|i| po * basis.c[i].re + p * basis.s[i].re).collect()
    } else {
        let s = basis.end.s.re;
        (0..=n)
            .map(|i| (basis.s[n - i].re * po + basis.s[i].re * pt) / s)
            .collect()
    }
}

/// ∫_𝒢 |ψ|² from vertex values (Σ-formula) or, at Dirichlet points, by
/// quadrature of ψ(o)C + pS.
pub fn l2_norm_sq(q: &QGraph, pair: &EigenPair, bases: &[EdgeBasis]) -> f64 {
    if pair.at_dirichlet {
        (0..q.num_edges())
            .map(|e| {
                let b = &bases[q.class_of_edge(e)];
                let v: Vec<f64> = edge_samples(q, pair, e, b).iter().map(|x| x * x).collect();
                crate::quad::simpson(&v, b.h())
            })
            .sum()
    } else {
        vertex_gram(q, std::slice::from_ref(&pair.vertex), bases)[(0, 0)]
    }
}

/// Rescales every eigenpair to unit L² norm.
pub fn normalize(q: &QGraph, set: &SpectrumSet, opts: &SpectrumOptions) -> Result<SpectrumSet> {
    let mut out = set.clone();
    for p in &mut out.pairs {
        let bases = q.bases(C64::new(p.lambda, 0.0), opts.mesh, &opts.basis)?;
        let n2 = l2_norm_sq(q, p, &bases);
        if !(n2 > 1e-300) {
            return Err(Error::ZeroNorm);
        }
        let s = 1.0 / n2.sqrt();
        p.vertex.iter_mut().for_each(|x| *x *= s);
        p.slopes.iter_mut().for_each(|x| *x *= s);
    }
    Ok(out)
}

/// ψ_j at the point x of bond b.
pub fn eigenfunction_eval(
    q: &QGraph,
    set: &SpectrumSet,
    j: usize,
    b: usize,
    x: f64,
    opts: &BasisOptions,
) -> Result<f64> {
    let p = &set.pairs[j];
    let len = q.length(b);
    let pot = q.potential(b);
    let gamma = C64::new(p.lambda, 0.0);
    let (o, t) = (q.graph.origin(b), q.graph.terminus(b));
    if p.at_dirichlet {
        let c = eval_at(len, pot, gamma, x, opts)?;
        return Ok(p.vertex[o] * c.c.re + p.slopes[b] * c.s.re);
    }
    let sx = eval_at(len, pot, gamma, x, opts)?.s.re;
    let slx = eval_at(len, pot, gamma, len - x, opts)?.s.re;
    let sl = eval_at(len, pot, gamma, len, opts)?.s.re;
    Ok((slx * p.vertex[o] + sx * p.vertex[t]) / sl)
}

/// δ-condition residuals Σ_{o_b=v} ψ_b′(0) − α_v ψ(v) per vertex, with the
/// derivatives taken from the edge expansion.
pub fn vertex_residuals(q: &QGraph, pair: &EigenPair, opts: &BasisOptions) -> Result<Vec<f64>> {
    let bv = q.boundaries(C64::new(pair.lambda, 0.0), opts)?;
    let mut r: Vec<f64> = (0..q.num_vertices())
        .map(|v| -q.alpha(v) * pair.vertex[v])
        .collect();
    for b in 0..q.num_bonds() {
        let c = bv[q.class(b)];
        let (o, t) = (q.graph.origin(b), q.graph.terminus(b));
        let d = if pair.at_dirichlet {
            pair.slopes[b]
        } else {
            (pair.vertex[t] - c.sp.re * pair.vertex[o]) / c.s.re
        };
        r[o] += d;
    }
    Ok(r)
}

/// Smallest singular value of A(λ_j) relative to its norm.
pub fn relative_singularity(q: &QGraph, lambda: f64, opts: &SpectrumOptions) -> Result<f64> {
    let a = secular_matrix_real(q, lambda, opts)?;
    let sv = a.singular_values();
    Ok(sv.min() / sv.max())
}

#[derive(Debug, Clone)]
pub struct GreenColumn {
    pub gamma: C64,
    pub source: usize,
    pub values: Vec<C64>,
    pub residual: f64,
    /// The raw solve had Im g(w,w) < 0 and was negated.
    pub negated: bool,
}

/// g^γ(·, w) from A(γ) g = e_w.
pub fn finite_green(q: &QGraph, gamma: C64, w: usize, opts: &SpectrumOptions) -> Result<GreenColumn> {
    if gamma.im <= 0.0 {
        return Err(Error::EtaFloor(gamma.im, 0.0));
    }
    let a = secular_matrix(q, gamma, opts)?;
    let n = a.nrows();
    let mut rhs = DVector::from_element(n, C64::new(0.0, 0.0));
    rhs[w] = C64::new(1.0, 0.0);
    let lu = a.clone().lu();
    let mut g = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("secular matrix at complex energy".into()))?;
    let residual = (&a * &g - &rhs).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !(residual < 1e-6) {
        return Err(Error::Singular(format!("residual {residual:e}")));
    }
    let negated = g[w].im < 0.0;
    if negated {
        g = -g;
    }
    Ok(GreenColumn {
        gamma,
        source: w,
        values: g.iter().copied().collect(),
        residual,
        negated,
    })
}

/// ℒ√Λ/π.
pub fn weyl_count(q: &QGraph, lambda_max: f64) -> f64 {
    q.total_length() * lambda_max.max(0.0).sqrt() / std::f64::consts::PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, complete_graph};
    use std::f64::consts::PI;

    fn k4() -> QGraph {
        QGraph::equilateral(build_graph(&complete_graph(4)).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn k4_low_eigenvalue() {
        let s = eigenvalues_in(&k4(), 0.0, 9.0, &SpectrumOptions::default()).unwrap();
        let want = (-1.0f64 / 3.0).acos().powi(2);
        assert_eq!(s.len(), 3);
        for p in &s.pairs {
            assert!((p.lambda - want).abs() < 1e-9);
        }
    }

    #[test]
    fn k4_dirichlet_constant() {
        let s = eigenvalues_in(&k4(), 30.0, 40.0, &SpectrumOptions::default()).unwrap();
        let top: Vec<_> = s.pairs.iter().filter(|p| (p.lambda - 4.0 * PI * PI).abs() < 1e-7).collect();
        assert_eq!(top.len(), 1);
        let v = &top[0].vertex;
        assert!(v.iter().all(|x| (x - v[0]).abs() < 1e-9));
        // cycle space of K4 gives three vertex-zero modes at 4π²
        assert_eq!(s.excluded_dirichlet, 3);
        // ψ = c·cos(2πx) on 6 unit edges: c² · 3 = 1
        assert!((v[0] - (1.0f64 / 3.0).sqrt()).abs() < 1e-8);
    }

    #[test]
    fn empty_below_ground_state() {
        let s = eigenvalues_in(&k4(), -5.0, -1.0, &SpectrumOptions::default()).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn symmetric_and_green() {
        let q = k4();
        let o = SpectrumOptions::default();
        let a = secular_matrix(&q, C64::new(5.0, 0.1), &o).unwrap();
        assert_eq!(a, a.transpose());
        let g0 = finite_green(&q, C64::new(5.0, 0.1), 0, &o).unwrap();
        let g1 = finite_green(&q, C64::new(5.0, 0.1), 1, &o).unwrap();
        assert!((g0.values[1] - g1.values[0]).norm() < 1e-10);
        assert!(g0.values[0].im > 0.0);
        assert!(g0.residual < 1e-10);
        assert!(!g0.negated);
    }

    #[test]
    fn eval_endpoints_and_orientation() {
        let q = k4();
        let s = eigenvalues_in(&q, 0.0, 9.0, &SpectrumOptions::default()).unwrap();
        let o = BasisOptions::default();
        for b in 0..q.num_bonds() {
            let v0 = eigenfunction_eval(&q, &s, 0, b, 0.0, &o).unwrap();
            assert!((v0 - s.pairs[0].vertex[q.graph.origin(b)]).abs() < 1e-12);
            let x = 0.3;
            let f = eigenfunction_eval(&q, &s, 0, b, x, &o).unwrap();
            let r = eigenfunction_eval(&q, &s, 0, b ^ 1, 1.0 - x, &o).unwrap();
            assert!((f - r).abs() < 1e-12);
        }
    }
}
