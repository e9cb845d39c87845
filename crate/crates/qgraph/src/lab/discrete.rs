//! Discretization of edge observables into vertex/bond observables, the
//! discrete average ⟨K⟩^γ, and the operators 𝒰, 𝒪, 𝒯, O_k, P_k, T_k with
//! their exact pairing identities.

use num_complex::Complex64 as C64;

use crate::cover::{path_green, CoverGreen};
use crate::edge::EdgeBasis;
use crate::error::{Error, Result};
use crate::graph::{rev, CombGraph};
use crate::nb::{pairing, NbField, PathSpace};
use crate::qgraph::QGraph;
use crate::quad::simpson;
use crate::spectrum::EigenPair;

use super::bracket::matrix_element_f;
use super::observable::EdgeFunction;

/// Observable on B_k (k ≥ 1, indexed by a `PathSpace`) or on vertices (k = 0).
#[derive(Debug, Clone)]
pub struct PathObs {
    pub k: usize,
    pub values: Vec<C64>,
}

impl PathObs {
    pub fn vertex(values: Vec<C64>) -> Self {
        PathObs { k: 0, values }
    }
    pub fn zeros(k: usize, len: usize) -> Self {
        PathObs {
            k,
            values: vec![C64::new(0.0, 0.0); len],
        }
    }
}

/// The four quadrature observables of an edge function at λ_j.
#[derive(Debug, Clone)]
pub struct DiscreteObservables {
    /// K_f(v) = Σ_{o_b = v} ∫ f_b S²(L−x) / S².
    pub k: Vec<f64>,
    /// J_f(v) = Σ_{t_b = v} ∫ f_b S²(x) / S².
    pub j: Vec<f64>,
    /// M⁽¹⁾(b) = ∫ f_b S(L−x) S(x) / S².
    pub m1: Vec<f64>,
    /// M⁽²⁾(b) = M⁽¹⁾(b̂).
    pub m2: Vec<f64>,
}

/// Needs real-energy bases at λ_j on the mesh of f.
pub fn discrete_observables(q: &QGraph, f: &EdgeFunction, bases_real: &[EdgeBasis]) -> DiscreteObservables {
    let g = &q.graph;
    let (nv, nb) = (q.num_vertices(), q.num_bonds());
    let mut out = DiscreteObservables {
        k: vec![0.0; nv],
        j: vec![0.0; nv],
        m1: vec![0.0; nb],
        m2: vec![0.0; nb],
    };
    for b in 0..nb {
        let bs = &bases_real[q.class(b)];
        let n = bs.mesh;
        let fs = f.bond_samples(q, b, n);
        let s2 = bs.end.s.re * bs.end.s.re;
        let quad = |w: &dyn Fn(usize) -> f64| -> f64 {
            let v: Vec<f64> = (0..=n).map(|i| fs[i] * w(i)).collect();
            simpson(&v, bs.h()) / s2
        };
        let (sl, sx) = (|i: usize| bs.s[n - i].re, |i: usize| bs.s[i].re);
        out.k[g.origin(b)] += quad(&|i| sl(i) * sl(i));
        out.j[g.terminus(b)] += quad(&|i| sx(i) * sx(i));
        out.m1[b] = quad(&|i| sl(i) * sx(i));
    }
    for b in 0..nb {
        out.m2[b] = out.m1[rev(b)];
    }
    out
}

/// |2⟨ψ, fψ⟩ − ⟨ψ̊, (K+J+M⁽¹⁾+M⁽²⁾)_G ψ̊⟩| for a non-Dirichlet eigenpair.
pub fn discretization_residual(q: &QGraph, pair: &EigenPair, f: &EdgeFunction, bases_real: &[EdgeBasis]) -> Result<f64> {
    if pair.at_dirichlet {
        return Err(Error::DirichletMargin { edge: 0, value: 0.0 });
    }
    let d = discrete_observables(q, f, bases_real);
    let g = &q.graph;
    let psi = &pair.vertex;
    let mut rhs: f64 = (0..q.num_vertices()).map(|v| (d.k[v] + d.j[v]) * psi[v] * psi[v]).sum();
    for b in 0..q.num_bonds() {
        rhs += psi[g.origin(b)] * (d.m1[b] + d.m2[b]) * psi[g.terminus(b)];
    }
    Ok((2.0 * matrix_element_f(q, pair, f, bases_real) - rhs).abs())
}

/// ⟨ψ̊, H_G ψ̊⟩: Σ_v ψ(v)² H(v) for k = 0, Σ_p ψ(o_{b₁}) H(p) ψ(t_{b_k}) else.
pub fn vertex_form(g: &CombGraph, space: Option<&PathSpace>, psi: &[f64], h: &PathObs) -> C64 {
    match (h.k, space) {
        (0, _) => h.values.iter().zip(psi).map(|(x, p)| x * p * p).sum(),
        (_, Some(sp)) => sp
            .paths
            .iter()
            .zip(&h.values)
            .map(|(p, x)| x * psi[g.origin(p[0])] * psi[g.terminus(*p.last().unwrap())])
            .sum(),
        _ => panic!("path observable without its path space"),
    }
}

/// ψ̊ variance (1/N_I) Σ_j |⟨ψ̊_j, F_j ψ̊_j⟩| for per-eigenvalue vertex
/// observables.
pub fn discrete_variance(fields: &[NbField], g: &CombGraph, obs: &[PathObs], space: Option<&PathSpace>) -> Result<f64> {
    if fields.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let s: f64 = fields
        .iter()
        .zip(obs)
        .map(|(fl, h)| vertex_form(g, space, &fl.psi, h).norm())
        .sum();
    Ok(s / fields.len() as f64)
}

/// N_γ(v) = Im g̃(v, v).
pub fn n_gamma(cg: &CoverGreen) -> Vec<f64> {
    cg.g_diag.iter().map(|z| z.im).collect()
}

/// ⟨K⟩^γ: Σ_v K Im g̃(v,v) / Σ Im g̃ for k = 0, else
/// Σ_p K(p) Im g̃(o_{b₁}, t_{b_k}) / Σ_v Im g̃(v,v).
pub fn bracket_discrete(cg: &CoverGreen, space: Option<&PathSpace>, kv: &PathObs) -> C64 {
    let n = n_gamma(cg);
    let den: f64 = n.iter().sum();
    let num: C64 = match (kv.k, space) {
        (0, _) => kv.values.iter().zip(&n).map(|(x, w)| x * w).sum(),
        (_, Some(sp)) => sp
            .paths
            .iter()
            .zip(&kv.values)
            .map(|(p, x)| x * path_green(cg, p).im)
            .sum(),
        _ => panic!("path observable without its path space"),
    };
    num / den
}

fn s_real(field: &NbField, b: usize) -> f64 {
    field.real_ends[b].s.re
}

/// 𝒰K(b) = (1 + conj ζ(b̂) ζ(b)) K(b) / S_λ².
pub fn op_u(field: &NbField, kv: &PathObs) -> PathObs {
    let values = (0..kv.values.len())
        .map(|b| {
            let s = s_real(field, b);
            (1.0 + field.zeta(rev(b)).conj() * field.zeta(b)) * kv.values[b] / (s * s)
        })
        .collect();
    PathObs { k: 1, values }
}

/// 𝒯 = 𝒰⁻¹ on B_1.
pub fn op_t(field: &NbField, kv: &PathObs) -> PathObs {
    let values = (0..kv.values.len())
        .map(|b| {
            let s = s_real(field, b);
            s * s * kv.values[b] / (1.0 + field.zeta(rev(b)).conj() * field.zeta(b))
        })
        .collect();
    PathObs { k: 1, values }
}

/// 𝒪K(v) = −Σ_{t_b=v} conj ζ(b̂) K(b)/S_λ² − Σ_{o_b=v} ζ(b) K(b)/S_λ².
pub fn op_o(g: &CombGraph, field: &NbField, kv: &PathObs) -> PathObs {
    let mut out = vec![C64::new(0.0, 0.0); g.num_vertices()];
    for b in 0..kv.values.len() {
        let s2 = s_real(field, b).powi(2);
        out[g.terminus(b)] -= field.zeta(rev(b)).conj() * kv.values[b] / s2;
        out[g.origin(b)] -= field.zeta(b) * kv.values[b] / s2;
    }
    PathObs::vertex(out)
}

/// T_k K(p) = S_λ(L_{b₁}) S_λ(L_{b_k}) K(p), k ≥ 2.
pub fn op_tk(space: &PathSpace, field: &NbField, kv: &PathObs) -> PathObs {
    let values = space
        .paths
        .iter()
        .zip(&kv.values)
        .map(|(p, x)| x * s_real(field, p[0]) * s_real(field, *p.last().unwrap()))
        .collect();
    PathObs { k: space.k, values }
}

/// O_k K on B_{k−1}: −Σ_{b₀} conj ζ(b̂₀) K(b₀, …) − Σ_{b_k} K(…, b_k) ζ(b_k).
pub fn op_ok(space: &PathSpace, lower: &PathSpace, field: &NbField, kv: &PathObs) -> PathObs {
    let k = space.k;
    let mut out = PathObs::zeros(k - 1, lower.len());
    for (p, x) in space.paths.iter().zip(&kv.values) {
        let head = lower.index_of(&p[1..]).expect("suffix path");
        let tail = lower.index_of(&p[..k - 1]).expect("prefix path");
        out.values[head] -= field.zeta(rev(p[0])).conj() * x;
        out.values[tail] -= x * field.zeta(p[k - 1]);
    }
    out
}

/// P_k K on B_{k−2} (on vertices t_{b₁} for k = 2):
/// Σ conj ζ(b̂₁) K(b₁, …, b_k) ζ(b_k).
pub fn op_pk(g: &CombGraph, space: &PathSpace, lower2: Option<&PathSpace>, field: &NbField, kv: &PathObs) -> PathObs {
    let k = space.k;
    let mut out = match lower2 {
        Some(l) if k >= 3 => PathObs::zeros(k - 2, l.len()),
        _ => PathObs::zeros(0, g.num_vertices()),
    };
    for (p, x) in space.paths.iter().zip(&kv.values) {
        let w = field.zeta(rev(p[0])).conj() * x * field.zeta(p[k - 1]);
        let i = if k == 2 {
            g.terminus(p[0])
        } else {
            lower2.unwrap().index_of(&p[1..k - 1]).expect("inner path")
        };
        out.values[i] += w;
    }
    out
}

fn add_forms(parts: &[C64]) -> C64 {
    parts.iter().sum()
}

/// |⟨f*, K_B f⟩ − ⟨ψ̊, (𝒰K + 𝒪K)_G ψ̊⟩| for K on B_1.
pub fn uo_identity(g: &CombGraph, b1: &PathSpace, field: &NbField, kv: &PathObs) -> f64 {
    let lhs = pairing(b1, &field.f_star, &kv.values, &field.f);
    let rhs = add_forms(&[
        vertex_form(g, Some(b1), &field.psi, &op_u(field, kv)),
        vertex_form(g, None, &field.psi, &op_o(g, field, kv)),
    ]);
    (lhs - rhs).norm()
}

/// |⟨f*, (T_k K)_B f⟩ − ⟨ψ̊, (K + O_k K + P_k K)_G ψ̊⟩| for k ≥ 2; `spaces`
/// holds B_{k−2} (ignored for k = 2), B_{k−1}, B_k.
pub fn tk_identity(g: &CombGraph, spaces: [&PathSpace; 3], field: &NbField, kv: &PathObs) -> f64 {
    let [l2, l1, sp] = spaces;
    let lhs = pairing(sp, &field.f_star, &op_tk(sp, field, kv).values, &field.f);
    let ok = op_ok(sp, l1, field, kv);
    let pk = op_pk(g, sp, Some(l2), field, kv);
    let pk_space = if sp.k == 2 { None } else { Some(l2) };
    let rhs = add_forms(&[
        vertex_form(g, Some(sp), &field.psi, kv),
        vertex_form(g, Some(l1), &field.psi, &ok),
        vertex_form(g, pk_space, &field.psi, &pk),
    ]);
    (lhs - rhs).norm()
}

/// |⟨K⟩^γ + ⟨O_k K⟩^γ + ⟨P_k K⟩^γ| for k ≥ 2.
pub fn average_identity(g: &CombGraph, spaces: [&PathSpace; 3], field: &NbField, kv: &PathObs) -> f64 {
    let [l2, l1, sp] = spaces;
    let cg = &field.cover;
    let pk_space = if sp.k == 2 { None } else { Some(l2) };
    (bracket_discrete(cg, Some(sp), kv)
        + bracket_discrete(cg, Some(l1), &op_ok(sp, l1, field, kv))
        + bracket_discrete(cg, pk_space, &op_pk(g, sp, Some(l2), field, kv)))
    .norm()
}

/// ⟨𝒰K⟩^γ + ⟨𝒪K⟩^γ for K on B_1, and its closed form
/// −Σ_b conj ζ(b̂) ζ(b) Im S_γ(L_b) K(b)/S_λ² / Σ_v Im g̃(v,v).
pub fn almost_same_average(g: &CombGraph, b1: &PathSpace, field: &NbField, kv: &PathObs) -> (C64, C64) {
    let cg = &field.cover;
    let measured = bracket_discrete(cg, Some(b1), &op_u(field, kv)) + bracket_discrete(cg, None, &op_o(g, field, kv));
    let den: f64 = n_gamma(cg).iter().sum();
    let closed: C64 = (0..kv.values.len())
        .map(|b| {
            let s2 = s_real(field, b).powi(2);
            -field.zeta(rev(b)).conj() * field.zeta(b) * cg.s(b).im * kv.values[b] / s2
        })
        .sum::<C64>()
        / den;
    (measured, closed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::CoverOptions;
    use crate::edge::PotentialSpec;
    use crate::graph::{build_graph, complete_graph};
    use crate::nb::build_fields;
    use crate::spectrum::{eigenvalues_in, SpectrumOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_obs(k: usize, n: usize, seed: u64) -> PathObs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PathObs {
            k,
            values: (0..n)
                .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect(),
        }
    }

    fn k4_mixed() -> QGraph {
        QGraph::new(
            build_graph(&complete_graph(4)).unwrap(),
            vec![1.0, 1.1, 1.2, 1.3, 0.9, 1.05],
            vec![PotentialSpec::cosine(vec![0.0, 0.3]); 6],
            vec![0.1, -0.2, 0.0, 0.3],
        )
        .unwrap()
    }

    fn setup(q: &QGraph, eta: f64) -> Vec<NbField> {
        let so = SpectrumOptions::default();
        let set = eigenvalues_in(q, 2.5, 12.0, &so).unwrap();
        assert!(!set.is_empty());
        build_fields(q, &set.pairs, eta, 1e-6, &CoverOptions::default()).unwrap()
    }

    #[test]
    fn discretization_identity_and_closed_form() {
        let q = k4_mixed();
        let so = SpectrumOptions::default();
        let set = eigenvalues_in(&q, 2.5, 12.0, &so).unwrap();
        for p in &set.pairs {
            let bases = q.bases(C64::new(p.lambda, 0.0), 512, &so.basis).unwrap();
            for seed in 0..3 {
                let f = EdgeFunction::random(6, seed);
                assert!(discretization_residual(&q, p, &f, &bases).unwrap() < 1e-10);
                let d = discrete_observables(&q, &f, &bases);
                for b in 0..12 {
                    assert_eq!(d.m1[b], d.m2[rev(b)]);
                }
            }
        }
        // f ≡ 1 on the free equilateral graph
        let qe = QGraph::equilateral(build_graph(&complete_graph(4)).unwrap(), 1.0).unwrap();
        let lam: f64 = 3.7;
        let bases = qe.bases(C64::new(lam, 0.0), 512, &so.basis).unwrap();
        let d = discrete_observables(&qe, &EdgeFunction::constant(6, 1.0), &bases);
        let k = lam.sqrt();
        let int = 0.5 - (2.0 * k).sin() / (4.0 * k);
        let want = 3.0 * int / k.sin().powi(2);
        for v in 0..4 {
            assert!((d.k[v] - want).abs() < 1e-10, "{} vs {want}", d.k[v]);
        }
    }

    #[test]
    fn pairing_identities() {
        let q = k4_mixed();
        let g = &q.graph;
        let fields = setup(&q, 0.05);
        let sp: Vec<PathSpace> = (1..=3).map(|k| PathSpace::new(g, k).unwrap()).collect();
        for (i, fl) in fields.iter().enumerate() {
            let k1 = rand_obs(1, sp[0].len(), i as u64);
            assert!(uo_identity(g, &sp[0], fl, &k1) < 1e-10);
            // 𝒯 followed by 𝒰 is the identity
            let back = op_u(fl, &op_t(fl, &k1));
            for (a, b) in back.values.iter().zip(&k1.values) {
                assert!((a - b).norm() < 1e-12);
            }
            for k in 2..=3 {
                let kv = rand_obs(k, sp[k - 1].len(), 100 + i as u64);
                let l2 = if k == 2 { &sp[0] } else { &sp[k - 3] };
                let spaces = [l2, &sp[k - 2], &sp[k - 1]];
                assert!(tk_identity(g, spaces, fl, &kv) < 1e-10, "k={k}");
                assert!(average_identity(g, spaces, fl, &kv) < 1e-10, "k={k}");
            }
        }
    }

    #[test]
    fn almost_same_average_closed_form_and_scaling() {
        let q = k4_mixed();
        let g = &q.graph;
        let b1 = PathSpace::new(g, 1).unwrap();
        let kv = PathObs {
            k: 1,
            values: vec![C64::new(1.0, 0.0); 12],
        };
        let mut defects = Vec::new();
        for eta in [0.04, 0.02] {
            let fields = setup(&q, eta);
            let fl = &fields[0];
            let (m, c) = almost_same_average(g, &b1, fl, &kv);
            assert!((m - c).norm() < 1e-10 * (1.0 + m.norm()));
            defects.push(m.norm());
        }
        let ratio = defects[0] / defects[1];
        assert!((ratio - 2.0).abs() < 0.5, "ratio {ratio}");
    }

    #[test]
    fn discrete_bracket_of_constant() {
        let q = k4_mixed();
        let fields = setup(&q, 0.1);
        let one = PathObs::vertex(vec![C64::new(1.0, 0.0); 4]);
        assert!((bracket_discrete(&fields[0].cover, None, &one) - 1.0).norm() < 1e-14);
    }
}
