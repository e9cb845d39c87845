//! Non-backtracking calculus: the fields f_j, f_j*, the operator B, the
//! averaging operators R_{n,r}, the weighted transfer operators and the
//! measures μ_k.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::cover::{solve_cover, CoverGreen, CoverOptions};
use crate::edge::Cauchy;
use crate::error::{Error, Result};
use crate::graph::{nb_paths, rev, CombGraph};
use crate::qgraph::QGraph;
use crate::spectrum::EigenPair;

/// Default cap on the number of enumerated paths.
pub const PATH_CAP: usize = 4_000_000;

/// Non-backtracking paths with k bonds, in lexicographic order.
#[derive(Debug, Clone)]
pub struct PathSpace {
    pub k: usize,
    pub paths: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
}

impl PathSpace {
    pub fn new(g: &CombGraph, k: usize) -> Result<Self> {
        Self::with_cap(g, k, PATH_CAP)
    }

    pub fn with_cap(g: &CombGraph, k: usize, cap: usize) -> Result<Self> {
        // size estimate: |B| Π (deg − 1) bounded by |B| q_max^{k−1}
        let qmax = (0..g.num_vertices()).map(|v| g.degree(v)).max().unwrap_or(1) - 1;
        let est = (g.num_bonds() as f64) * (qmax.max(1) as f64).powi(k as i32 - 1);
        if est > cap as f64 {
            return Err(Error::PathCap(est as usize, cap));
        }
        let paths = nb_paths(g, k);
        let index = paths.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
        Ok(PathSpace { k, paths, index })
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }
    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
    pub fn index_of(&self, p: &[usize]) -> Option<usize> {
        self.index.get(p).copied()
    }
}

/// Non-backtracking fields attached to an eigenpair.
#[derive(Debug, Clone)]
pub struct NbField {
    pub j: usize,
    pub lambda: f64,
    pub gamma: C64,
    pub f: Vec<C64>,
    pub f_star: Vec<C64>,
    /// O_{γ_j}(b).
    pub o: Vec<C64>,
    /// ψ_j at vertices.
    pub psi: Vec<f64>,
    /// Boundary values at the real energy λ_j per bond.
    pub real_ends: Vec<Cauchy>,
    pub cover: Arc<CoverGreen>,
}

impl NbField {
    pub fn zeta(&self, b: usize) -> C64 {
        self.cover.zeta[b]
    }
    /// O_{ψ_j,η₀}(b) = ψ_j(t_b) O_{γ_j}(b).
    pub fn o_psi(&self, g: &CombGraph) -> Vec<C64> {
        (0..self.o.len())
            .map(|b| self.psi[g.terminus(b)] * self.o[b])
            .collect()
    }
    /// ι O_{ψ_j,η₀}(b) = ψ_j(o_b) O_{γ_j}(b̂).
    pub fn iota_o_psi(&self, g: &CombGraph) -> Vec<C64> {
        (0..self.o.len())
            .map(|b| self.psi[g.origin(b)] * self.o[rev(b)])
            .collect()
    }
    /// ψ_j(o_b), ψ_j(t_b) recovered from (f_j, f_j*).
    pub fn recover(&self, b: usize) -> (C64, C64) {
        let s = self.real_ends[b].s;
        let (z, zh) = (self.zeta(b), self.zeta(rev(b)));
        let d = s / (1.0 - z * zh);
        (
            d * (self.f_star[b] + zh * self.f[b]),
            d * (self.f[b] + z * self.f_star[b]),
        )
    }
}

/// Builds f_j, f_j* and O_{γ_j} from an eigenpair and cover data at
/// γ_j = λ_j + iη₀.
pub fn build_nb_field(
    q: &QGraph,
    pair: &EigenPair,
    j: usize,
    cover: Arc<CoverGreen>,
    opts: &CoverOptions,
) -> Result<NbField> {
    let g = &q.graph;
    let nb = q.num_bonds();
    let lam = pair.lambda;
    let real = q.boundaries(C64::new(lam, 0.0), &opts.basis)?;
    let real_ends: Vec<Cauchy> = (0..nb).map(|b| real[q.class(b)]).collect();
    for b in (0..nb).step_by(2) {
        if real_ends[b].s.norm() <= opts.margin {
            return Err(Error::DirichletMargin {
                edge: b / 2,
                value: real_ends[b].s.norm(),
            });
        }
    }
    let psi = &pair.vertex;
    let mut f = vec![C64::new(0.0, 0.0); nb];
    let mut f_star = vec![C64::new(0.0, 0.0); nb];
    for b in 0..nb {
        let (o, t) = (g.origin(b), g.terminus(b));
        let s = real_ends[b].s;
        let (z, zh) = (cover.zeta[b], cover.zeta[rev(b)]);
        if (1.0 - z * zh).norm() <= opts.margin {
            return Err(Error::Singular(format!("1 - ζζ̂ vanishes on bond {b}")));
        }
        f[b] = (psi[t] - z * psi[o]) / s;
        f_star[b] = (psi[o] - zh * psi[t]) / s;
    }
    let o = (0..nb)
        .map(|b| {
            let (el, eg) = (real_ends[b], cover.end(b));
            let z = cover.zeta[b];
            let mut acc = el.sp / el.s - eg.sp / eg.s + 1.0 / (z * eg.s) - 1.0 / (z * el.s);
            for &c in g.successors(b) {
                let (cl, cg) = (real_ends[c], cover.end(c));
                let zc = cover.zeta[c];
                acc += (cl.c - zc) / cl.s - (cg.c - zc) / cg.s;
            }
            acc
        })
        .collect();
    Ok(NbField {
        j,
        lambda: lam,
        gamma: cover.gamma,
        f,
        f_star,
        o,
        psi: psi.clone(),
        real_ends,
        cover,
    })
}

/// Solves the cover problem at every γ_j = λ_j + iη₀ (cached by λ_j rounded
/// to `quantum`) and builds the fields, in eigenvalue order.
pub fn build_fields(
    q: &QGraph,
    pairs: &[EigenPair],
    eta0: f64,
    quantum: f64,
    opts: &CoverOptions,
) -> Result<Vec<NbField>> {
    let keys: Vec<i64> = pairs
        .iter()
        .map(|p| (p.lambda / quantum).round() as i64)
        .collect();
    let mut uniq: Vec<i64> = keys.clone();
    uniq.dedup();
    let covers: Vec<(i64, Arc<CoverGreen>)> = uniq
        .par_iter()
        .map(|&k| {
            let lam = pairs[keys.iter().position(|&x| x == k).unwrap()].lambda;
            solve_cover(q, C64::new(lam, eta0), opts).map(|c| (k, Arc::new(c)))
        })
        .collect::<Result<_>>()?;
    let cache: HashMap<i64, Arc<CoverGreen>> = covers.into_iter().collect();
    pairs
        .par_iter()
        .enumerate()
        .map(|(j, p)| build_nb_field(q, p, j, cache[&keys[j]].clone(), opts))
        .collect()
}

/// (Bf)(b) = Σ_{b⁺ ∈ N_b⁺} f(b⁺).
pub fn apply_b(g: &CombGraph, f: &[C64]) -> Vec<C64> {
    (0..f.len())
        .map(|b| g.successors(b).iter().map(|&c| f[c]).sum())
        .collect()
}

/// Transpose of B: (B*f)(b) = Σ_{b⁻ ∈ N_b⁻} f(b⁻).
pub fn apply_b_star(g: &CombGraph, f: &[C64]) -> Vec<C64> {
    (0..f.len())
        .map(|b| g.predecessors(b).iter().map(|&c| f[c]).sum())
        .collect()
}

/// Edge reversal ι.
pub fn iota(f: &[C64]) -> Vec<C64> {
    (0..f.len()).map(|b| f[rev(b)]).collect()
}

/// ⟨a, K_B c⟩ = Σ_{paths} conj(a(b₁)) K(b₁;b_k) c(b_k).
pub fn pairing(space: &PathSpace, a: &[C64], k: &[C64], c: &[C64]) -> C64 {
    space
        .paths
        .iter()
        .zip(k)
        .map(|(p, kv)| a[p[0]].conj() * kv * c[*p.last().unwrap()])
        .sum()
}

/// (R_{n,r}K) on B_{n+k}: conjugated reversed-ζ prefix over b₂..b_{n−r+1},
/// K on (b_{n−r+1};b_{n−r+k}), forward-ζ suffix over b_{n−r+k}..b_{n+k−1}.
pub fn apply_r_nr(
    space_k: &PathSpace,
    kv: &[C64],
    zeta: &[C64],
    n: usize,
    r: usize,
    out: &PathSpace,
) -> Vec<C64> {
    assert!(r <= n && out.k == space_k.k + n);
    let k = space_k.k;
    out.paths
        .iter()
        .map(|p| {
            let mut w = C64::new(1.0, 0.0);
            for &b in &p[1..=n - r] {
                w *= zeta[rev(b)].conj();
            }
            let inner = space_k.index_of(&p[n - r..n - r + k]).expect("subpath of a path");
            w *= kv[inner];
            for &b in &p[n - r + k - 1..n + k - 1] {
                w *= zeta[b];
            }
            w
        })
        .collect()
}

/// Residuals of the peel identities for one field: the single step
/// (R_{n,r} → R_{n−1,r−1}), the telescoped forward sum and the telescoped
/// backward sum. Requires spaces for all lengths k..=n+k.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct InvarianceCheck {
    pub single_step: f64,
    pub forward: f64,
    pub backward: f64,
    /// |⟨f*, R_{n,r}K f⟩ − ⟨f*, K f⟩|, the total error size.
    pub total_error: f64,
}

pub fn invariance_check(
    g: &CombGraph,
    spaces: &[PathSpace],
    kv: &[C64],
    field: &NbField,
    n: usize,
    r: usize,
) -> InvarianceCheck {
    let sp = |m: usize| &spaces[m];
    let zeta = &field.cover.zeta;
    let rk = |nn: usize, rr: usize| apply_r_nr(sp(0), kv, zeta, nn, rr, sp(nn));
    let f = &field.f;
    let fs = &field.f_star;
    let zo: Vec<C64> = field
        .o_psi(g)
        .iter()
        .enumerate()
        .map(|(b, x)| zeta[b] * x)
        .collect();
    let izo: Vec<C64> = field
        .iota_o_psi(g)
        .iter()
        .enumerate()
        .map(|(b, x)| zeta[rev(b)] * x)
        .collect();
    let lhs = pairing(sp(n), fs, &rk(n, r), f);
    let mut single = 0.0;
    if r >= 1 {
        let fz: Vec<C64> = f.iter().zip(&zo).map(|(a, b)| a + b).collect();
        single = (lhs - pairing(sp(n - 1), fs, &rk(n - 1, r - 1), &fz)).norm();
    }
    let mut fwd = pairing(sp(n - r), fs, &rk(n - r, 0), f);
    for l in 1..=r {
        fwd += pairing(sp(n - l), fs, &rk(n - l, r - l), &zo);
    }
    let base = pairing(sp(0), fs, kv, f);
    let mut bwd = base;
    for l in 1..=n - r {
        bwd += pairing(sp(n - r - l), &izo, &rk(n - r - l, 0), f);
    }
    let scale = lhs.norm().max(1.0);
    InvarianceCheck {
        single_step: single / scale,
        forward: (lhs - fwd).norm() / scale,
        backward: (pairing(sp(n - r), fs, &rk(n - r, 0), f) - bwd).norm() / scale,
        total_error: (lhs - base).norm(),
    }
}

/// Residual sup_b |(Bf)(b) − f(b)/ζ(b) − ψ(t_b)O(b)| and the mirrored one for f*.
pub fn eigen_relation_residual(g: &CombGraph, field: &NbField) -> (f64, f64) {
    let bf = apply_b(g, &field.f);
    let op = field.o_psi(g);
    let r1 = (0..bf.len())
        .map(|b| (bf[b] - field.f[b] / field.zeta(b) - op[b]).norm())
        .fold(0.0, f64::max);
    let bs = apply_b_star(g, &field.f_star);
    let iop = field.iota_o_psi(g);
    let r2 = (0..bs.len())
        .map(|b| (bs[b] - field.f_star[b] / field.zeta(rev(b)) - iop[b]).norm())
        .fold(0.0, f64::max);
    (r1, r2)
}

/// (S_γK)(b) = |ζ(b)|²/Im R⁺(o_b) Σ_{b⁺} Im R⁺(o_{b⁺}) K(b⁺) on B₁.
pub fn apply_s_gamma(g: &CombGraph, cg: &CoverGreen, kv: &[C64]) -> Vec<C64> {
    (0..kv.len())
        .map(|b| {
            let s: C64 = g
                .successors(b)
                .iter()
                .map(|&c| cg.r_plus[c].im * kv[c])
                .sum();
            s * cg.zeta[b].norm_sqr() / cg.r_plus[b].im
        })
        .collect()
}

/// (S*_γK)(b) = |ζ(b̂)|²/Im R⁻(t_b) Σ_{b⁻} Im R⁻(t_{b⁻}) K(b⁻).
pub fn apply_s_gamma_star(g: &CombGraph, cg: &CoverGreen, kv: &[C64]) -> Vec<C64> {
    (0..kv.len())
        .map(|b| {
            let s: C64 = g
                .predecessors(b)
                .iter()
                .map(|&c| cg.r_minus[c].im * kv[c])
                .sum();
            s * cg.zeta[rev(b)].norm_sqr() / cg.r_minus[b].im
        })
        .collect()
}

/// u^γ(b) = conj ζ(b)/ζ(b).
pub fn u_phase(cg: &CoverGreen) -> Vec<C64> {
    cg.zeta.iter().map(|z| z.conj() / z).collect()
}

/// S_{u^γ} on B_k: shift to (b₂;b_{k+1}) weighted at b_k.
pub fn apply_s_u(space: &PathSpace, g: &CombGraph, cg: &CoverGreen, kv: &[C64]) -> Vec<C64> {
    let k = space.k;
    space
        .paths
        .iter()
        .map(|p| {
            let bk = p[k - 1];
            let mut acc = C64::new(0.0, 0.0);
            let mut key: Vec<usize> = p[1..].to_vec();
            key.push(0);
            for &c in g.successors(bk) {
                key[k - 1] = c;
                acc += cg.r_plus[c].im * kv[space.index_of(&key).unwrap()];
            }
            let z = cg.zeta[bk];
            acc * (z.norm_sqr() / cg.r_plus[bk].im) * (z.conj() / z)
        })
        .collect()
}

/// A_γ on B_k.
pub fn apply_a(space: &PathSpace, g: &CombGraph, cg: &CoverGreen, kv: &[C64]) -> Vec<C64> {
    let k = space.k;
    space
        .paths
        .iter()
        .map(|p| {
            let bk = p[k - 1];
            let mut acc = C64::new(0.0, 0.0);
            let mut key: Vec<usize> = p[1..].to_vec();
            key.push(0);
            for &c in g.successors(bk) {
                key[k - 1] = c;
                let b2 = key[0];
                acc += (cg.zeta[rev(b2)] * cg.zeta[bk]).conj() * cg.r_plus[c].im
                    * kv[space.index_of(&key).unwrap()];
            }
            acc / cg.r_plus[bk].im
        })
        .collect()
}

/// Multiplier of Z_γ on B_k.
pub fn z_weights(space: &PathSpace, cg: &CoverGreen) -> Vec<C64> {
    space
        .paths
        .iter()
        .map(|p| {
            let (b1, bk) = (p[0], *p.last().unwrap());
            let prod: C64 = p.iter().map(|&b| cg.zeta[rev(b)]).product();
            (prod / (cg.zeta[rev(b1)] * cg.zeta[rev(bk)])).conj()
                * cg.g_diag[cg.origin(bk)].conj()
        })
        .collect()
}

/// Classical transfer operator (𝒮K)(b) = q(t_b)^{-1} Σ_{b⁺} K(b⁺).
pub fn apply_transfer(g: &CombGraph, kv: &[C64]) -> Vec<C64> {
    (0..kv.len())
        .map(|b| {
            let qd = (g.degree(g.terminus(b)) - 1) as f64;
            g.successors(b).iter().map(|&c| kv[c]).sum::<C64>() / qd
        })
        .collect()
}

/// Orthogonal projection onto functions depending only on the origin.
pub fn project_f(g: &CombGraph, kv: &[C64]) -> Vec<C64> {
    let mean: Vec<C64> = (0..g.num_vertices())
        .map(|v| {
            let out = g.out_bonds(v);
            out.iter().map(|&b| kv[b]).sum::<C64>() / out.len() as f64
        })
        .collect();
    (0..kv.len()).map(|b| mean[g.origin(b)]).collect()
}

/// ω^γ(b) by its definition and by the current formula.
pub fn omega(g: &CombGraph, cg: &CoverGreen) -> (Vec<f64>, Vec<f64>) {
    let one = vec![C64::new(1.0, 0.0); cg.num_bonds()];
    let s1 = apply_s_gamma(g, cg, &one);
    let def = s1.iter().map(|x| x.re - 1.0).collect();
    let cur = (0..cg.num_bonds())
        .map(|b| -cg.gamma.im / cg.r_plus[b].im * cg.xi_plus_norm(b))
        .collect();
    (def, cur)
}

/// ω̃^γ(b) = (S*_γ1)(b) − 1 by its definition and by the current formula.
pub fn omega_star(g: &CombGraph, cg: &CoverGreen) -> (Vec<f64>, Vec<f64>) {
    let one = vec![C64::new(1.0, 0.0); cg.num_bonds()];
    let s1 = apply_s_gamma_star(g, cg, &one);
    let def = s1.iter().map(|x| x.re - 1.0).collect();
    let cur = (0..cg.num_bonds())
        .map(|b| -cg.gamma.im / cg.r_minus[b].im * cg.xi_minus_norm(b))
        .collect();
    (def, cur)
}

/// μ_k^γ on B_k.
#[derive(Debug, Clone)]
pub struct NbMeasure {
    pub k: usize,
    pub weights: Vec<f64>,
    /// Same weights via the forward-ζ product form.
    pub weights_alt: Vec<f64>,
    pub total: f64,
}

impl NbMeasure {
    pub fn nu(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w / self.total).collect()
    }
    pub fn form_gap(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.weights_alt)
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()))
            .fold(0.0, f64::max)
    }
}

pub fn mu_k(space: &PathSpace, cg: &CoverGreen) -> NbMeasure {
    let weights: Vec<f64> = space
        .paths
        .iter()
        .map(|p| {
            let (b1, bk) = (p[0], *p.last().unwrap());
            let prod: f64 = p.iter().map(|&b| cg.zeta[rev(b)].norm_sqr()).product();
            cg.r_minus[b1].im / cg.zeta[rev(b1)].norm_sqr()
                * prod
                * cg.g_diag[cg.origin(bk)].norm_sqr()
                * cg.r_plus[bk].im
                / cg.zeta[rev(bk)].norm_sqr()
        })
        .collect();
    let weights_alt = space
        .paths
        .iter()
        .map(|p| {
            let (b1, bk) = (p[0], *p.last().unwrap());
            let prod: f64 = p.iter().map(|&b| cg.zeta[b].norm_sqr()).product();
            cg.r_minus[b1].im / cg.zeta[b1].norm_sqr()
                * cg.g_diag[cg.terminus(b1)].norm_sqr()
                * prod
                * cg.r_plus[bk].im
                / cg.zeta[bk].norm_sqr()
        })
        .collect();
    let total = weights.iter().sum();
    NbMeasure {
        k: space.k,
        weights,
        weights_alt,
        total,
    }
}

/// Largest violations (positive part) of the forward and backward marginal
/// inequalities μ_k → μ_{k−1}.
pub fn marginal_defects(lower: &PathSpace, mu_lower: &NbMeasure, upper: &PathSpace, mu_upper: &NbMeasure) -> (f64, f64) {
    let mut fwd = vec![0.0; lower.len()];
    let mut bwd = vec![0.0; lower.len()];
    let k = upper.k;
    for (p, w) in upper.paths.iter().zip(&mu_upper.weights) {
        fwd[lower.index_of(&p[..k - 1]).unwrap()] += w;
        bwd[lower.index_of(&p[1..]).unwrap()] += w;
    }
    let viol = |s: &[f64]| {
        s.iter()
            .zip(&mu_lower.weights)
            .map(|(a, b)| (a - b) / b)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    (viol(&fwd), viol(&bwd))
}

/// ‖K‖_{ℓᵖ(ν)} with p = ∞ allowed.
pub fn lp_norm(nu: &[f64], kv: &[C64], p: f64) -> f64 {
    if p.is_infinite() {
        kv.iter()
            .zip(nu)
            .filter(|(_, w)| **w > 0.0)
            .map(|(x, _)| x.norm())
            .fold(0.0, f64::max)
    } else {
        kv.iter()
            .zip(nu)
            .map(|(x, w)| w * x.norm().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }
}

/// Measured contraction of 𝒮² on 1⊥: returns c with ‖𝒮²f‖ ≤ (1−c)‖f‖.
pub fn transfer_gap_witness(g: &CombGraph) -> f64 {
    let nb = g.num_bonds();
    let mut m = DMatrix::<f64>::zeros(nb, nb);
    for b in 0..nb {
        let qd = (g.degree(g.terminus(b)) - 1) as f64;
        for &c in g.successors(b) {
            m[(b, c)] += 1.0 / qd;
        }
    }
    let s2 = &m * &m;
    let p = DMatrix::<f64>::identity(nb, nb) - DMatrix::<f64>::from_element(nb, nb, 1.0 / nb as f64);
    let op = s2 * &p;
    let top = if nb <= 1500 {
        op.singular_values().iter().cloned().fold(0.0, f64::max)
    } else {
        let gram = op.transpose() * &op;
        let mut v = nalgebra::DVector::<f64>::from_fn(nb, |i, _| ((i * 7919) % 104729) as f64 / 104729.0 - 0.5);
        let mut est = 0.0;
        for _ in 0..1000 {
            let w = &gram * &v;
            est = w.norm();
            v = w / est;
        }
        est.sqrt()
    };
    1.0 - top
}

/// Cesàro mean (1/#I) Σ_j |⟨f_j*, K_B f_j⟩|, with a per-field observable.
pub fn nb_variance(space: &PathSpace, fields: &[NbField], obs: &[Vec<C64>]) -> Result<f64> {
    if fields.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let terms: Vec<f64> = fields
        .par_iter()
        .zip(obs)
        .map(|(fl, kv)| pairing(space, &fl.f_star, kv, &fl.f).norm())
        .collect();
    Ok(terms.iter().sum::<f64>() / fields.len() as f64)
}
