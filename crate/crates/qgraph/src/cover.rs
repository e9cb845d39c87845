//! Universal-cover Green data: the ζ fixed point, Weyl–Titchmarsh functions,
//! vertex diagonals, path values and edge densities.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::edge::{BasisOptions, Cauchy, EdgeBasis};
use crate::error::{Error, Result};
use crate::graph::{rev, CombGraph};
use crate::qgraph::QGraph;
use crate::quad::{simpson, simpson_c};

#[derive(Debug, Clone, Copy)]
pub struct CoverOptions {
    pub theta: f64,
    /// Sup-norm fixed-point residual at convergence.
    pub tol: f64,
    pub max_iter: usize,
    pub eta_min: f64,
    pub mesh: usize,
    pub basis: BasisOptions,
    pub margin: f64,
}

impl Default for CoverOptions {
    fn default() -> Self {
        CoverOptions {
            theta: 0.5,
            tol: 1e-12,
            max_iter: 500_000,
            eta_min: 1e-3,
            mesh: 512,
            basis: BasisOptions::default(),
            margin: 1e-13,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoverGreen {
    pub gamma: C64,
    /// ζ(b) per bond.
    pub zeta: Vec<C64>,
    /// R⁺(o_b) per bond.
    pub r_plus: Vec<C64>,
    /// R⁻(t_b) per bond.
    pub r_minus: Vec<C64>,
    /// g̃(v, v) per vertex.
    pub g_diag: Vec<C64>,
    pub residual: f64,
    pub iterations: usize,
    /// Last residuals of the iteration.
    pub history: Vec<f64>,
    pub theta_final: f64,
    /// Edge bases at γ per class.
    pub bases: Vec<EdgeBasis>,
    class: Vec<usize>,
    ends: Vec<(usize, usize)>,
}

impl CoverGreen {
    pub fn num_bonds(&self) -> usize {
        self.zeta.len()
    }
    pub fn basis(&self, b: usize) -> &EdgeBasis {
        &self.bases[self.class[b]]
    }
    pub fn end(&self, b: usize) -> Cauchy {
        self.bases[self.class[b]].end
    }
    pub fn s(&self, b: usize) -> C64 {
        self.end(b).s
    }
    pub fn origin(&self, b: usize) -> usize {
        self.ends[b].0
    }
    pub fn terminus(&self, b: usize) -> usize {
        self.ends[b].1
    }
    /// R⁺(t_b) from ζ(b).
    pub fn r_plus_at_t(&self, b: usize) -> C64 {
        let e = self.end(b);
        e.sp / e.s - 1.0 / (e.s * self.zeta[b])
    }
    /// R⁻(o_b) from ζ(b̂).
    pub fn r_minus_at_o(&self, b: usize) -> C64 {
        let e = self.end(b);
        e.c / e.s - 1.0 / (e.s * self.zeta[rev(b)])
    }
    pub fn g_vertex(&self, v: usize) -> C64 {
        self.g_diag[v]
    }
    /// g̃(o_b, t_b).
    pub fn g_bond(&self, b: usize) -> C64 {
        self.g_diag[self.origin(b)] * self.zeta[b]
    }
    /// ∫|ξ₊|² with ξ₊ = C + R⁺(o_b) S.
    pub fn xi_plus_norm(&self, b: usize) -> f64 {
        let bs = self.basis(b);
        let r = self.r_plus[b];
        let v: Vec<f64> = (0..=bs.mesh).map(|i| (bs.c[i] + r * bs.s[i]).norm_sqr()).collect();
        simpson(&v, bs.h())
    }
    /// ∫|ξ₋|² with ξ₋(x) = C(L−x) + R⁻(t_b) S(L−x).
    pub fn xi_minus_norm(&self, b: usize) -> f64 {
        let bs = self.basis(b);
        let r = self.r_minus[b];
        let n = bs.mesh;
        let v: Vec<f64> = (0..=n).map(|i| (bs.c[n - i] + r * bs.s[n - i]).norm_sqr()).collect();
        simpson(&v, bs.h())
    }
}

struct Coeffs {
    s: Vec<C64>,
    inv_s: Vec<C64>,
    konst: Vec<C64>,
}

fn coeffs(q: &QGraph, bases: &[EdgeBasis]) -> Coeffs {
    let nb = q.num_bonds();
    let end = |b: usize| bases[q.class(b)].end;
    let s: Vec<C64> = (0..nb).map(|b| end(b).s).collect();
    let inv_s: Vec<C64> = s.iter().map(|x| 1.0 / x).collect();
    let konst = (0..nb)
        .map(|b| {
            let e = end(b);
            let mut k = e.sp / e.s + q.alpha(q.graph.terminus(b));
            for &c in q.graph.successors(b) {
                k += end(c).c * inv_s[c];
            }
            k
        })
        .collect();
    Coeffs { s, inv_s, konst }
}

fn sweep(g: &CombGraph, cf: &Coeffs, zeta: &[C64]) -> Vec<C64> {
    let f = |b: usize| {
        let mut acc = cf.konst[b];
        for &c in g.successors(b) {
            acc -= zeta[c] * cf.inv_s[c];
        }
        1.0 / (cf.s[b] * acc)
    };
    if zeta.len() >= 1024 {
        (0..zeta.len()).into_par_iter().map(f).collect()
    } else {
        (0..zeta.len()).map(f).collect()
    }
}

fn sup_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Runs the damped Jacobi iteration from R⁺ ≡ i.
fn iterate(
    q: &QGraph,
    cf: &Coeffs,
    bases: &[EdgeBasis],
    theta0: f64,
    opts: &CoverOptions,
) -> Result<(Vec<C64>, f64, usize, Vec<f64>, f64)> {
    let nb = q.num_bonds();
    let i = C64::new(0.0, 1.0);
    let mut zeta: Vec<C64> = (0..nb)
        .map(|b| {
            let e = bases[q.class(b)].end;
            e.c + i * e.s
        })
        .collect();
    let mut theta = theta0;
    let mut prev = f64::INFINITY;
    let mut tail = std::collections::VecDeque::with_capacity(32);
    for it in 1..=opts.max_iter {
        let new = sweep(&q.graph, cf, &zeta);
        let res = sup_diff(&new, &zeta);
        if tail.len() == 32 {
            tail.pop_front();
        }
        tail.push_back(res);
        if !res.is_finite() {
            break;
        }
        if res < opts.tol {
            return Ok((new, res, it, tail.into_iter().collect(), theta));
        }
        if res > prev {
            theta = (theta * 0.5).max(1e-3);
        }
        prev = res;
        for (z, n) in zeta.iter_mut().zip(&new) {
            *z = *z * (1.0 - theta) + *n * theta;
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: *tail.back().unwrap_or(&f64::INFINITY),
    })
}

fn assemble(q: &QGraph, bases: Vec<EdgeBasis>, zeta: Vec<C64>) -> CoverGreen {
    let nb = q.num_bonds();
    let end = |b: usize| bases[q.class(b)].end;
    let r_plus = (0..nb)
        .map(|b| (zeta[b] - end(b).c) / end(b).s)
        .collect();
    let r_minus = (0..nb)
        .map(|b| (zeta[rev(b)] - end(b).sp) / end(b).s)
        .collect();
    let g_diag = (0..q.num_vertices())
        .map(|v| {
            let mut acc = C64::new(q.alpha(v), 0.0);
            for &b in q.graph.out_bonds(v) {
                acc += (end(b).c - zeta[b]) / end(b).s;
            }
            1.0 / acc
        })
        .collect();
    let class = (0..nb).map(|b| q.class(b)).collect();
    let ends = (0..nb)
        .map(|b| (q.graph.origin(b), q.graph.terminus(b)))
        .collect();
    CoverGreen {
        gamma: C64::new(0.0, 0.0),
        zeta,
        r_plus,
        r_minus,
        g_diag,
        residual: 0.0,
        iterations: 0,
        history: Vec::new(),
        theta_final: 0.0,
        bases,
        class,
        ends,
    }
}

fn herglotz_violation(cg: &CoverGreen) -> Option<String> {
    if let Some(b) = (0..cg.num_bonds()).find(|&b| !(cg.r_plus[b].im > 0.0)) {
        return Some(format!("Im R+(o_b) <= 0 at bond {b}"));
    }
    if let Some(b) = (0..cg.num_bonds()).find(|&b| !(cg.r_minus[b].im > 0.0)) {
        return Some(format!("Im R-(t_b) <= 0 at bond {b}"));
    }
    if let Some(v) = (0..cg.g_diag.len()).find(|&v| !(cg.g_diag[v].im > 0.0)) {
        return Some(format!("Im g(v,v) <= 0 at vertex {v}"));
    }
    None
}

/// Solves the cover recursion at γ with Im γ ≥ η_min.
pub fn solve_cover(q: &QGraph, gamma: C64, opts: &CoverOptions) -> Result<CoverGreen> {
    if gamma.im < opts.eta_min {
        return Err(Error::EtaFloor(gamma.im, opts.eta_min));
    }
    let bases = q.bases(gamma, opts.mesh, &opts.basis)?;
    for e in 0..q.num_edges() {
        let s = bases[q.class_of_edge(e)].end.s.norm();
        if s <= opts.margin {
            return Err(Error::DirichletMargin { edge: e, value: s });
        }
    }
    let cf = coeffs(q, &bases);
    let mut last_err = None;
    for theta in [opts.theta, opts.theta / 4.0] {
        let (zeta, res, it, hist, th) = match iterate(q, &cf, &bases, theta, opts) {
            Ok(x) => x,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let mut cg = assemble(q, bases.clone(), zeta);
        cg.gamma = gamma;
        cg.residual = res;
        cg.iterations = it;
        cg.history = hist;
        cg.theta_final = th;
        match herglotz_violation(&cg) {
            None => return Ok(cg),
            Some(msg) => last_err = Some(Error::Herglotz(msg)),
        }
    }
    Err(last_err.unwrap())
}

/// Pulls cover data on a base graph back to the lifted bonds.
pub fn pull_back(base: &CoverGreen, lifted: &QGraph, lift: &crate::graph::Lift) -> CoverGreen {
    let zeta = (0..lifted.num_bonds())
        .map(|b| base.zeta[lift.bond_proj(b)])
        .collect();
    let mut cg = assemble(lifted, base.bases.clone(), zeta);
    cg.gamma = base.gamma;
    cg.residual = base.residual;
    cg.iterations = base.iterations;
    cg.theta_final = base.theta_final;
    cg
}

/// g̃(o_{b₁}, t_{b_k}) via the origin-side product.
pub fn path_green(cg: &CoverGreen, path: &[usize]) -> C64 {
    let mut g = cg.g_diag[cg.origin(path[0])];
    for &b in path {
        g *= cg.zeta[b];
    }
    g
}

/// The same value via the terminus-side product of reversed ζ's.
pub fn path_green_reversed(cg: &CoverGreen, path: &[usize]) -> C64 {
    let mut g = cg.g_diag[cg.terminus(*path.last().unwrap())];
    for &b in path {
        g *= cg.zeta[rev(b)];
    }
    g
}

/// g̃ between the endpoints of a possibly empty subpath: for `path = []`
/// returns g̃(v, v) at `v`.
pub fn green_between(cg: &CoverGreen, v: usize, path: &[usize]) -> C64 {
    if path.is_empty() {
        cg.g_diag[v]
    } else {
        path_green(cg, path)
    }
}

#[derive(Debug, Clone)]
pub struct EdgeDensity {
    /// g̃(x, x) on the mesh of bond b.
    pub values: Vec<C64>,
    pub integral: f64,
    pub recip_integral: f64,
    pub positive: bool,
    pub h: f64,
}

impl EdgeDensity {
    pub fn im(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.im).collect()
    }
}

/// g̃(x, x) along bond b from the endpoint values.
pub fn im_g_on_edge(cg: &CoverGreen, b: usize) -> EdgeDensity {
    let bs = cg.basis(b);
    let n = bs.mesh;
    let (goo, got, gtt) = (
        cg.g_diag[cg.origin(b)],
        cg.g_bond(b),
        cg.g_diag[cg.terminus(b)],
    );
    let s = bs.end.s;
    let values: Vec<C64> = (0..=n)
        .map(|i| {
            let (sl, sx) = (bs.s[n - i], bs.s[i]);
            (sl * sl * goo + 2.0 * sl * sx * got + sx * sx * gtt) / (s * s) + sx * sl / s
        })
        .collect();
    let im: Vec<f64> = values.iter().map(|z| z.im).collect();
    let positive = im.iter().all(|&x| x > 0.0);
    let recip: Vec<f64> = im.iter().map(|&x| 1.0 / x).collect();
    EdgeDensity {
        integral: simpson(&im, bs.h()),
        recip_integral: if positive { simpson(&recip, bs.h()) } else { f64::INFINITY },
        values,
        positive,
        h: bs.h(),
    }
}

/// Π_γ ψ at points x of the mesh: ∫ |ξ|² helpers for complex samples.
pub fn integral_c(values: &[C64], h: f64) -> C64 {
    simpson_c(values, h)
}

/// Residuals of the two current relations for bond b.
pub fn current_check(cg: &CoverGreen, g: &CombGraph, b: usize) -> (f64, f64) {
    let eta = cg.gamma.im;
    let z = cg.zeta[b].norm_sqr();
    let lhs1: f64 = g.successors(b).iter().map(|&c| cg.r_plus[c].im).sum();
    let r1 = lhs1 - cg.r_plus[b].im / z + eta / z * cg.xi_plus_norm(b);
    let zh = cg.zeta[rev(b)].norm_sqr();
    let lhs2: f64 = g.predecessors(b).iter().map(|&c| cg.r_minus[c].im).sum();
    let r2 = lhs2 - cg.r_minus[b].im / zh + eta / zh * cg.xi_minus_norm(b);
    (r1, r2)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct GreenMoments {
    pub s: f64,
    /// Mean over bonds of |Im R⁺(o_b)|^{−s}.
    pub im_r_plus_neg: f64,
    pub zeta_pos: f64,
    pub zeta_neg: f64,
    pub g_pos: f64,
    pub g_neg: f64,
    /// Largest |S_γ(L_b)|^{-1} (blowup diagnostic near Dirichlet values).
    pub inv_s_max: f64,
}

pub fn green_hypothesis_stats(cg: &CoverGreen, exponents: &[f64]) -> Vec<GreenMoments> {
    let nb = cg.num_bonds() as f64;
    let nv = cg.g_diag.len() as f64;
    let inv_s_max = (0..cg.num_bonds())
        .map(|b| 1.0 / cg.s(b).norm())
        .fold(0.0, f64::max);
    exponents
        .iter()
        .map(|&s| GreenMoments {
            s,
            im_r_plus_neg: cg.r_plus.iter().map(|r| r.im.abs().powf(-s)).sum::<f64>() / nb,
            zeta_pos: cg.zeta.iter().map(|z| z.norm().powf(s)).sum::<f64>() / nb,
            zeta_neg: cg.zeta.iter().map(|z| z.norm().powf(-s)).sum::<f64>() / nb,
            g_pos: cg.g_diag.iter().map(|z| z.norm().powf(s)).sum::<f64>() / nv,
            g_neg: cg.g_diag.iter().map(|z| z.norm().powf(-s)).sum::<f64>() / nv,
            inv_s_max,
        })
        .collect()
}

/// Maximal residuals of the cover-Green identities over all bonds (and all
/// paths of length 2 and 3 for the path identity).
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct CoverIdentities {
    pub zeta_recursion: f64,
    pub vertex_diagonal: f64,
    pub weyl_titchmarsh: f64,
    pub zeta_inverse: f64,
    pub zeta_ratio: f64,
    pub mid_green: f64,
    pub green_multiplicative: f64,
    pub psi_single_bond: f64,
    pub psi_path: f64,
    pub psi_quadratic: f64,
    pub psi_quadratic_gap: f64,
    pub current_forward: f64,
    pub current_backward: f64,
    pub herglotz_min: f64,
}

fn psi_combo(cg: &CoverGreen, path: &[usize]) -> C64 {
    // Ψ_{o1}(t_k) − conj ζ(b̂1) Ψ_{t1}(t_k) − ζ(b_k) Ψ_{o1}(o_k) + conj ζ(b̂1) ζ(b_k) Ψ_{t1}(o_k)
    let k = path.len();
    let (b1, bk) = (path[0], path[k - 1]);
    let o1 = cg.origin(b1);
    let t1 = cg.terminus(b1);
    let im = |v: usize, p: &[usize]| green_between(cg, v, p).im;
    let zh1 = cg.zeta[rev(b1)].conj();
    let zk = cg.zeta[bk];
    let inner = if k >= 2 { &path[1..k - 1] } else { &path[0..0] };
    let (to1_tk, tt1_tk, to1_ok, tt1_ok) = if k == 1 {
        // single bond: Ψ_t(o) = Ψ_o(t) by symmetry, computed from the t side
        (
            cg.g_bond(b1).im,
            cg.g_diag[t1].im,
            cg.g_diag[o1].im,
            (cg.g_diag[t1] * cg.zeta[rev(b1)]).im,
        )
    } else {
        (
            im(o1, path),
            im(t1, &path[1..]),
            im(o1, &path[..k - 1]),
            im(t1, inner),
        )
    };
    to1_tk - zh1 * tt1_tk - zk * to1_ok + zh1 * zk * tt1_ok
}

pub fn cover_identities(q: &QGraph, cg: &CoverGreen) -> CoverIdentities {
    let g = &q.graph;
    let mut r = CoverIdentities {
        herglotz_min: f64::INFINITY,
        ..Default::default()
    };
    let mx = |a: &mut f64, x: f64| *a = a.max(x);
    for b in 0..q.num_bonds() {
        let e = cg.end(b);
        let (s, c, sp) = (e.s, e.c, e.sp);
        let (o, t) = (g.origin(b), g.terminus(b));
        let z = cg.zeta[b];
        let zh = cg.zeta[rev(b)];
        let (goo, gtt) = (cg.g_diag[o], cg.g_diag[t]);
        // ζ recursion
        let mut lhs = 1.0 / (z * s);
        let mut rhs = sp / s + q.alpha(t);
        for &c2 in g.successors(b) {
            let e2 = cg.end(c2);
            lhs += cg.zeta[c2] / e2.s;
            rhs += e2.c / e2.s;
        }
        mx(&mut r.zeta_recursion, (lhs - rhs).norm());
        // vertex diagonal from all bonds out of t_b
        let mut rhs2 = 1.0 / gtt;
        for &c2 in g.out_bonds(t) {
            rhs2 += cg.zeta[c2] / cg.s(c2);
        }
        mx(&mut r.vertex_diagonal, (rhs - rhs2).norm());
        // ζ against R± and the δ-relations of R±
        let rpt: C64 = g.successors(b).iter().map(|&c2| cg.r_plus[c2]).sum::<C64>() - q.alpha(t);
        let rmo: C64 = g.predecessors(b).iter().map(|&c2| cg.r_minus[c2]).sum::<C64>() - q.alpha(o);
        mx(&mut r.weyl_titchmarsh, (cg.r_plus_at_t(b) - rpt).norm());
        mx(&mut r.weyl_titchmarsh, (cg.r_minus_at_o(b) - rmo).norm());
        mx(&mut r.weyl_titchmarsh, (c + cg.r_plus[b] * s - z).norm());
        mx(&mut r.weyl_titchmarsh, (sp + cg.r_minus[b] * s - zh).norm());
        // inverse ζ relations
        mx(&mut r.zeta_inverse, (1.0 / z - zh - s / gtt).norm());
        mx(&mut r.zeta_ratio, (zh / z - goo / gtt).norm());
        // diagonal from R⁺ and R⁻ at o_b
        mx(&mut r.mid_green, (-1.0 / goo - cg.r_plus[b] - cg.r_minus_at_o(b)).norm());
        // single-bond multiplicativity
        mx(&mut r.green_multiplicative, (goo * z - gtt * zh).norm());
        // single-bond Ψ combination
        let lhs3 = psi_combo(cg, &[b]);
        let rhs3 = -(zh.conj() * z) * s.im;
        mx(&mut r.psi_single_bond, (lhs3 - rhs3).norm());
        // quadratic Ψ identity
        let got = goo * z;
        let zs = z / s;
        let p1 = (gtt / (s * s)).im - zs * (got / s).im - zs.conj() * (got / s).im
            + zs.norm_sqr() * goo.im;
        mx(&mut r.psi_quadratic, (p1 - zs.im).norm());
        mx(&mut r.psi_quadratic_gap, (zs.im - cg.r_plus[b].im).max(0.0));
        // currents
        let (c1, c2) = current_check(cg, g, b);
        mx(&mut r.current_forward, c1.abs());
        mx(&mut r.current_backward, c2.abs());
        r.herglotz_min = r
            .herglotz_min
            .min(cg.r_plus[b].im)
            .min(cg.r_minus[b].im);
    }
    for v in 0..q.num_vertices() {
        r.herglotz_min = r.herglotz_min.min(cg.g_diag[v].im);
    }
    for k in 2..=3 {
        for p in crate::graph::nb_paths(g, k) {
            mx(&mut r.green_multiplicative, (path_green(cg, &p) - path_green_reversed(cg, &p)).norm());
            mx(&mut r.psi_path, psi_combo(cg, &p).norm());
        }
    }
    r
}
