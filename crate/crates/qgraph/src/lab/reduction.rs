//! Vertex reduction operators: P_γ = (d/N_γ) P (N_γ/d), the Cesàro sums
//! S_{T,γ}, S̃_{T,γ}, the bond lift 𝓛^γ and the error operator 𝓔_γ.

use num_complex::Complex64 as C64;

use crate::cover::CoverGreen;
use crate::graph::{rev, CombGraph};
use crate::nb::{pairing, NbField, PathSpace};

use super::discrete::n_gamma;

/// (P_γ J)(v) = (1/N(v)) Σ_{w∼v} N(w) J(w) / d(w).
pub fn p_gamma(g: &CombGraph, n: &[f64], j: &[C64]) -> Vec<C64> {
    (0..g.num_vertices())
        .map(|v| {
            let s: C64 = g
                .out_bonds(v)
                .iter()
                .map(|&b| {
                    let w = g.terminus(b);
                    j[w] * n[w] / g.degree(w) as f64
                })
                .sum();
            s / n[v]
        })
        .collect()
}

/// S_{T,γ} J = (1/T) Σ_{s=0}^{T−1} (T − s) P_γ^s J.
pub fn s_t(g: &CombGraph, n: &[f64], j: &[C64], t: usize) -> Vec<C64> {
    assert!(t >= 1);
    let mut acc = vec![C64::new(0.0, 0.0); j.len()];
    let mut cur = j.to_vec();
    for s in 0..t {
        let w = (t - s) as f64 / t as f64;
        acc.iter_mut().zip(&cur).for_each(|(a, c)| *a += w * c);
        cur = p_gamma(g, n, &cur);
    }
    acc
}

/// S̃_{T,γ} J = (1/T) Σ_{s=1}^{T} P_γ^s J.
pub fn s_t_tilde(g: &CombGraph, n: &[f64], j: &[C64], t: usize) -> Vec<C64> {
    assert!(t >= 1);
    let mut acc = vec![C64::new(0.0, 0.0); j.len()];
    let mut cur = j.to_vec();
    for _ in 0..t {
        cur = p_gamma(g, n, &cur);
        acc.iter_mut().zip(&cur).for_each(|(a, c)| *a += c / t as f64);
    }
    acc
}

/// max_v |J − (I − P_γ) S_T J − S̃_T J|.
pub fn telescoping_residual(g: &CombGraph, n: &[f64], j: &[C64], t: usize) -> f64 {
    let s = s_t(g, n, j, t);
    let ps = p_gamma(g, n, &s);
    let st = s_t_tilde(g, n, j, t);
    (0..j.len())
        .map(|v| (j[v] - (s[v] - ps[v]) - st[v]).norm())
        .fold(0.0, f64::max)
}

/// (𝓛^γ J)(b) = S_λ² |g̃(t,t)|² (1 + conj ζ(b) ζ(b̂)) / (Re S_γ |ζ(b)|²)
/// · (J(t)/N(o) − J(o)/N(t)), with S_λ at λ = Re γ.
pub fn op_l(g: &CombGraph, field: &NbField, j: &[C64]) -> Vec<C64> {
    let cg = &field.cover;
    let n = n_gamma(cg);
    (0..g.num_bonds())
        .map(|b| {
            let (o, t) = (g.origin(b), g.terminus(b));
            let sl = field.real_ends[b].s.re;
            let z = cg.zeta[b];
            let pref = sl * sl * cg.g_diag[t].norm_sqr() * (1.0 + z.conj() * cg.zeta[rev(b)])
                / (cg.s(b).re * z.norm_sqr());
            pref * (j[t] / n[o] - j[o] / n[t])
        })
        .collect()
}

/// (𝓔_γ J)(v) = Σ_{o_b=v} Im S_γ Re g̃(t,t) / Re S_γ · (J(t)/N(v) − J(v)/N(t)).
pub fn op_e(g: &CombGraph, cg: &CoverGreen, j: &[C64]) -> Vec<C64> {
    let n = n_gamma(cg);
    let mut out = vec![C64::new(0.0, 0.0); g.num_vertices()];
    for b in 0..g.num_bonds() {
        let (o, t) = (g.origin(b), g.terminus(b));
        let s = cg.s(b);
        out[o] += s.im * cg.g_diag[t].re / s.re * (j[t] / n[o] - j[o] / n[t]);
    }
    out
}

/// |⟨f*, (𝓛J)_B f⟩ − 2i{⟨ψ̊, [(I − P_γ)(dJ)] ψ̊⟩ + ⟨ψ̊, (𝓔J) ψ̊⟩}|.
pub fn l_identity(g: &CombGraph, b1: &PathSpace, field: &NbField, j: &[C64]) -> f64 {
    let cg = &field.cover;
    let n = n_gamma(cg);
    let lhs = pairing(b1, &field.f_star, &op_l(g, field, j), &field.f);
    let dj: Vec<C64> = (0..j.len()).map(|v| j[v] * g.degree(v) as f64).collect();
    let pdj = p_gamma(g, &n, &dj);
    let e = op_e(g, cg, j);
    let psi = &field.psi;
    let form: C64 = (0..j.len())
        .map(|v| psi[v] * psi[v] * (dj[v] - pdj[v] + e[v]))
        .sum();
    (lhs - 2.0 * C64::new(0.0, 1.0) * form).norm()
}

/// Per-step contraction factors of the part of P_γ^s J orthogonal to the
/// fixed vector d/N_γ, in the norm ‖J‖² = Σ N² |J|² / d where P_γ is
/// self-adjoint; each factor is at most 1 − β.
pub fn mixing_profile(g: &CombGraph, n: &[f64], j: &[C64], steps: usize) -> Vec<f64> {
    let d: Vec<f64> = (0..g.num_vertices()).map(|v| g.degree(v) as f64).collect();
    let dsum: f64 = d.iter().sum();
    let norm = |x: &[C64]| -> f64 {
        x.iter()
            .enumerate()
            .map(|(v, z)| n[v] * n[v] * z.norm_sqr() / d[v])
            .sum::<f64>()
            .sqrt()
    };
    let center = |x: &[C64]| -> Vec<C64> {
        let c: C64 = x.iter().zip(n).map(|(z, w)| z * w).sum::<C64>() / dsum;
        x.iter()
            .enumerate()
            .map(|(v, z)| z - c * d[v] / n[v])
            .collect()
    };
    let mut cur = center(j);
    let mut prev = norm(&cur);
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        cur = center(&p_gamma(g, n, &cur));
        let now = norm(&cur);
        if prev == 0.0 {
            break;
        }
        out.push(now / prev);
        prev = now;
    }
    out
}
