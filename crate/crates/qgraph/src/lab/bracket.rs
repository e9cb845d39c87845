//! Limiting averages ⟨f⟩_γ and ⟨𝒦⟩_γ built from the cover two-point
//! function, and the matching eigenfunction matrix elements.

use num_complex::Complex64 as C64;

use crate::cover::{green_between, im_g_on_edge, path_green, CoverGreen};
use crate::edge::EdgeBasis;
use crate::error::{Error, Result};
use crate::nb::PathSpace;
use crate::qgraph::QGraph;
use crate::quad::{simpson, simpson_c};
use crate::spectrum::{edge_samples, EigenPair};

use super::observable::{EdgeFunction, Kernel, PathKernel};

/// Im g̃(x, x) sampled on every edge (bond 2e coordinates).
#[derive(Debug, Clone)]
pub struct GreenDensity {
    pub im: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    /// ∫_𝒢 Im g̃(x, x) dx, each edge counted once.
    pub total: f64,
    /// ∫_𝒢 1/Im g̃(x, x) dx.
    pub recip_total: f64,
}

impl GreenDensity {
    pub fn new(q: &QGraph, cg: &CoverGreen) -> Result<Self> {
        let mut im = Vec::with_capacity(q.num_edges());
        let mut h = Vec::with_capacity(q.num_edges());
        let (mut total, mut recip_total) = (0.0, 0.0);
        for e in 0..q.num_edges() {
            let d = im_g_on_edge(cg, 2 * e);
            total += d.integral;
            recip_total += d.recip_integral;
            im.push(d.im());
            h.push(d.h);
        }
        if !(total > 0.0) {
            return Err(Error::Herglotz(format!("edge density integral {total:e} not positive")));
        }
        Ok(GreenDensity {
            im,
            h,
            total,
            recip_total,
        })
    }

    /// ⟨f⟩_γ = ∫ f Im g̃(x,x) / ∫ Im g̃(x,x).
    pub fn bracket(&self, q: &QGraph, f: &EdgeFunction) -> f64 {
        let num: f64 = (0..q.num_edges())
            .map(|e| {
                let fs = f.bond_samples(q, 2 * e, self.im[e].len() - 1);
                let v: Vec<f64> = fs.iter().zip(&self.im[e]).map(|(a, b)| a * b).collect();
                simpson(&v, self.h[e])
            })
            .sum();
        num / self.total
    }

    /// (⟨f⟩_γ, α²/C²) for f ≥ 0, with α = ∫√f/ℒ and
    /// C² = ∫ Im g̃ · ∫ 1/Im g̃ / ℒ² (Cauchy–Schwarz lower bound).
    pub fn delocalization(&self, q: &QGraph, f: &EdgeFunction) -> (f64, f64) {
        let ell = q.total_length();
        let root: f64 = (0..q.num_edges())
            .map(|e| {
                let fs = f.bond_samples(q, 2 * e, self.im[e].len() - 1);
                let v: Vec<f64> = fs.iter().map(|x| x.max(0.0).sqrt()).collect();
                simpson(&v, self.h[e])
            })
            .sum();
        let alpha = root / ell;
        let c2 = self.total * self.recip_total / (ell * ell);
        (self.bracket(q, f), alpha * alpha / c2)
    }
}

pub fn bracket_f(q: &QGraph, cg: &CoverGreen, f: &EdgeFunction) -> Result<f64> {
    Ok(GreenDensity::new(q, cg)?.bracket(q, f))
}

/// ψ_j on bond b in bond coordinates, from the real-energy bases.
pub fn bond_psi(q: &QGraph, pair: &EigenPair, b: usize, bases_real: &[EdgeBasis]) -> Vec<f64> {
    let mut v = edge_samples(q, pair, b / 2, &bases_real[q.class(b)]);
    if b % 2 == 1 {
        v.reverse();
    }
    v
}

/// ⟨ψ_j, f ψ_j⟩ by quadrature on the basis mesh.
pub fn matrix_element_f(q: &QGraph, pair: &EigenPair, f: &EdgeFunction, bases_real: &[EdgeBasis]) -> f64 {
    (0..q.num_edges())
        .map(|e| {
            let bs = &bases_real[q.class_of_edge(e)];
            let psi = edge_samples(q, pair, e, bs);
            let fs = f.bond_samples(q, 2 * e, bs.mesh);
            let v: Vec<f64> = psi.iter().zip(&fs).map(|(p, f)| f * p * p).collect();
            simpson(&v, bs.h())
        })
        .sum()
}

/// (∫u S(L−x)/S(L), ∫u S(x)/S(L)) on bond b at the cover energy.
fn end_projections(cg: &CoverGreen, b: usize, u: &[f64]) -> (C64, C64) {
    let bs = cg.basis(b);
    let n = bs.mesh;
    let s = bs.end.s;
    let vo: Vec<C64> = (0..=n).map(|i| bs.s[n - i] * u[i] / s).collect();
    let vt: Vec<C64> = (0..=n).map(|i| bs.s[i] * u[i] / s).collect();
    (simpson_c(&vo, bs.h()), simpson_c(&vt, bs.h()))
}

/// ∫∫ u(x) w(y) S(min(x,y)) S(L − max(x,y)) dx dy / S(L) on bond b: the
/// inner integrals are cumulated at even nodes and the outer integral uses
/// Simpson on the even sub-mesh, so the mesh must be a multiple of 4.
fn kink_integral(cg: &CoverGreen, b: usize, u: &[f64], w: &[f64]) -> Result<C64> {
    let bs = cg.basis(b);
    let n = bs.mesh;
    if n % 4 != 0 {
        return Err(Error::Config(format!("kernel quadrature needs mesh divisible by 4, got {n}")));
    }
    let h = bs.h();
    let fa: Vec<C64> = (0..=n).map(|i| u[i] * bs.s[i]).collect();
    let fb: Vec<C64> = (0..=n).map(|i| u[i] * bs.s[n - i]).collect();
    let m = n / 2;
    let mut a = vec![C64::new(0.0, 0.0); m + 1];
    let mut cb = vec![C64::new(0.0, 0.0); m + 1];
    for k in 1..=m {
        let i = 2 * k;
        a[k] = a[k - 1] + (fa[i - 2] + 4.0 * fa[i - 1] + fa[i]) * (h / 3.0);
        cb[k] = cb[k - 1] + (fb[i - 2] + 4.0 * fb[i - 1] + fb[i]) * (h / 3.0);
    }
    let btot = cb[m];
    let outer: Vec<C64> = (0..=m)
        .map(|k| {
            let i = 2 * k;
            w[i] * (bs.s[n - i] * a[k] + bs.s[i] * (btot - cb[k]))
        })
        .collect();
    Ok(simpson_c(&outer, 2.0 * h) / bs.end.s)
}

/// g̃ values between the four endpoint pairs of a path:
/// ((o₁,o_k), (o₁,t_k), (t₁,o_k), (t₁,t_k)).
fn endpoint_greens(cg: &CoverGreen, p: &[usize]) -> [C64; 4] {
    let k = p.len();
    let (o1, t1) = (cg.origin(p[0]), cg.terminus(p[0]));
    if k == 1 {
        let got = cg.g_bond(p[0]);
        return [cg.g_diag[o1], got, got, cg.g_diag[t1]];
    }
    [
        path_green(cg, &p[..k - 1]),
        path_green(cg, p),
        green_between(cg, t1, &p[1..k - 1]),
        path_green(cg, &p[1..]),
    ]
}

/// ∫∫ u(x) w(y) g̃(x_{b₁}, y_{b_k}) dx dy for one path.
fn path_integral(cg: &CoverGreen, p: &[usize], proj_u: (C64, C64), proj_w: (C64, C64), kink: C64) -> C64 {
    let [goo, got, gto, gtt] = endpoint_greens(cg, p);
    let (uo, ut) = proj_u;
    let (wo, wt) = proj_w;
    let base = uo * wo * goo + uo * wt * got + ut * wo * gto + ut * wt * gtt;
    if p.len() == 1 {
        base + kink
    } else {
        base
    }
}

/// ⟨𝒦⟩_γ = ½ Σ_{B_k} ∫∫ 𝒦 Im g̃ / ∫ Im g̃(x,x).
pub fn bracket_kernel(q: &QGraph, cg: &CoverGreen, space: &PathSpace, kernel: &Kernel) -> Result<C64> {
    let dens = GreenDensity::new(q, cg)?;
    match kernel {
        Kernel::Diagonal(f) => Ok(C64::new(dens.bracket(q, f), 0.0)),
        Kernel::Paths(pk) => {
            let num = path_kernel_numerator(q, cg, space, pk)?;
            Ok(num / dens.total)
        }
    }
}

/// Per-bond projections of the kernel profiles at the cover energy.
struct KernelProjections {
    u: Vec<(C64, C64)>,
    w: Vec<(C64, C64)>,
    kink: Vec<C64>,
}

fn kernel_projections(q: &QGraph, cg: &CoverGreen, pk: &PathKernel) -> Result<KernelProjections> {
    let nb = q.num_bonds();
    let mut out = KernelProjections {
        u: Vec::with_capacity(nb),
        w: Vec::with_capacity(nb),
        kink: Vec::with_capacity(nb),
    };
    for b in 0..nb {
        let mesh = cg.basis(b).mesh;
        let u = PathKernel::samples(&pk.left, q.length(b), mesh);
        let w = PathKernel::samples(&pk.right, q.length(b), mesh);
        out.u.push(end_projections(cg, b, &u));
        out.w.push(end_projections(cg, b, &w));
        out.kink.push(if pk.k == 1 {
            kink_integral(cg, b, &u, &w)?
        } else {
            C64::new(0.0, 0.0)
        });
    }
    Ok(out)
}

fn check_kernel(space: &PathSpace, pk: &PathKernel) -> Result<()> {
    if pk.k == 0 || space.k != pk.k || space.len() != pk.consts.len() {
        return Err(Error::Config("kernel does not match its path space".into()));
    }
    Ok(())
}

/// ½ Σ_p c(p) ∫∫ u w Im g̃.
fn path_kernel_numerator(q: &QGraph, cg: &CoverGreen, space: &PathSpace, pk: &PathKernel) -> Result<C64> {
    check_kernel(space, pk)?;
    let pr = kernel_projections(q, cg, pk)?;
    Ok(space
        .paths
        .iter()
        .zip(&pk.consts)
        .map(|(p, c)| {
            let (b1, bk) = (p[0], *p.last().unwrap());
            0.5 * c * path_integral(cg, p, pr.u[b1], pr.w[bk], pr.kink[b1]).im
        })
        .sum())
}

/// ⟨ψ_j, 𝒦 ψ_j⟩ = ½ Σ_p c(p) ∫u ψ_{b₁} ∫w ψ_{b_k}.
pub fn matrix_element_kernel(
    q: &QGraph,
    pair: &EigenPair,
    space: &PathSpace,
    kernel: &Kernel,
    bases_real: &[EdgeBasis],
) -> Result<C64> {
    let pk = match kernel {
        Kernel::Diagonal(f) => return Ok(C64::new(matrix_element_f(q, pair, f, bases_real), 0.0)),
        Kernel::Paths(pk) => pk,
    };
    check_kernel(space, pk)?;
    let proj = |a: &[f64]| -> Vec<f64> {
        (0..q.num_bonds())
            .map(|b| {
                let bs = &bases_real[q.class(b)];
                let psi = bond_psi(q, pair, b, bases_real);
                let u = PathKernel::samples(a, q.length(b), bs.mesh);
                let v: Vec<f64> = psi.iter().zip(&u).map(|(p, u)| p * u).collect();
                simpson(&v, bs.h())
            })
            .collect()
    };
    let (pu, pw) = (proj(&pk.left), proj(&pk.right));
    Ok(space
        .paths
        .iter()
        .zip(&pk.consts)
        .map(|(p, c)| 0.5 * c * pu[p[0]] * pw[*p.last().unwrap()])
        .sum())
}

/// g̃(x_{b₁}, y_{b_k}) at mesh nodes i on b₁ and j on b_k.
pub fn two_point(cg: &CoverGreen, p: &[usize], i: usize, j: usize) -> C64 {
    let (b1, bk) = (p[0], *p.last().unwrap());
    let (s1, sk) = (cg.basis(b1), cg.basis(bk));
    let (n1, nk) = (s1.mesh, sk.mesh);
    let (po, pt) = (s1.s[n1 - i] / s1.end.s, s1.s[i] / s1.end.s);
    let (qo, qt) = (sk.s[nk - j] / sk.end.s, sk.s[j] / sk.end.s);
    let [goo, got, gto, gtt] = endpoint_greens(cg, p);
    let base = po * qo * goo + po * qt * got + pt * qo * gto + pt * qt * gtt;
    if p.len() == 1 {
        let (lo, hi) = (i.min(j), i.max(j));
        base + s1.s[lo] * s1.s[n1 - hi] / s1.end.s
    } else {
        base
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::{solve_cover, CoverOptions};
    use crate::edge::PotentialSpec;
    use crate::graph::{build_graph, complete_graph, random_n_lift};
    use crate::lab::observable::ObservableSpec;

    fn k4_mixed() -> QGraph {
        QGraph::new(
            build_graph(&complete_graph(4)).unwrap(),
            vec![1.0, 1.1, 1.2, 1.3, 0.9, 1.05],
            vec![PotentialSpec::cosine(vec![0.0, 0.3]); 6],
            vec![0.1, -0.2, 0.0, 0.3],
        )
        .unwrap()
    }

    fn opts(mesh: usize) -> CoverOptions {
        CoverOptions {
            mesh,
            ..Default::default()
        }
    }

    #[test]
    fn constant_and_half() {
        let g = build_graph(&complete_graph(4)).unwrap();
        let q = QGraph::equilateral(g.clone(), 1.0).unwrap();
        let cg = solve_cover(&q, C64::new(3.5, 0.1), &opts(256)).unwrap();
        let one = ObservableSpec::Const(1.0).realize(&q).unwrap();
        assert!((bracket_f(&q, &cg, &one).unwrap() - 1.0).abs() < 1e-14);
        // a 3-lift of K4 with lifted equilateral data is edge-transitive-like
        // for the cover: the density is the same on every edge
        let lift = random_n_lift(&g, 3, 5).unwrap();
        let ql = q.lifted(&lift).unwrap();
        let cl = crate::cover::pull_back(&cg, &ql, &lift);
        let half = ObservableSpec::Half.realize(&q).unwrap().lift(&lift);
        assert!((bracket_f(&ql, &cl, &half).unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn bracket_in_range_and_delocalization() {
        let q = k4_mixed();
        let cg = solve_cover(&q, C64::new(4.0, 0.05), &opts(256)).unwrap();
        let dens = GreenDensity::new(&q, &cg).unwrap();
        for seed in 0..5 {
            let f = EdgeFunction::random(6, seed);
            let b = dens.bracket(&q, &f);
            let samples: Vec<f64> = (0..6)
                .flat_map(|e| f.bond_samples(&q, 2 * e, 256))
                .collect();
            let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(b >= lo - 1e-12 && b <= hi + 1e-12);
            let pos = EdgeFunction {
                coeffs: f.coeffs.iter().map(|a| vec![0.5, 0.5 * a[1]]).collect(),
            };
            let (br, lb) = dens.delocalization(&q, &pos);
            assert!(br >= lb && lb > 0.0);
        }
    }

    fn grid_integral(cg: &CoverGreen, p: &[usize], u: &[f64], w: &[f64]) -> f64 {
        let (s1, sk) = (cg.basis(p[0]), cg.basis(*p.last().unwrap()));
        let ws1 = crate::quad::simpson_weights(s1.mesh, s1.h());
        let wsk = crate::quad::simpson_weights(sk.mesh, sk.h());
        let mut acc = 0.0;
        for i in 0..=s1.mesh {
            for j in 0..=sk.mesh {
                acc += ws1[i] * wsk[j] * u[i] * w[j] * two_point(cg, p, i, j).im;
            }
        }
        acc
    }

    #[test]
    fn single_path_matches_grid_quadrature() {
        let q = k4_mixed();
        let cg = solve_cover(&q, C64::new(3.0, 0.2), &opts(256)).unwrap();
        let g = &q.graph;
        for k in 1..=3 {
            let space = PathSpace::new(g, k).unwrap();
            let idx = 5 % space.len();
            let mut consts = vec![C64::new(0.0, 0.0); space.len()];
            consts[idx] = C64::new(1.0, 0.0);
            let pk = PathKernel {
                k,
                consts,
                left: vec![0.3, 0.5],
                right: vec![-0.2, 0.1, 0.6],
            };
            let p = &space.paths[idx];
            let pr = kernel_projections(&q, &cg, &pk).unwrap();
            let fast = path_integral(&cg, p, pr.u[p[0]], pr.w[*p.last().unwrap()], pr.kink[p[0]]).im;
            let u = PathKernel::samples(&pk.left, q.length(p[0]), 256);
            let w = PathKernel::samples(&pk.right, q.length(*p.last().unwrap()), 256);
            let slow = grid_integral(&cg, p, &u, &w);
            // the diagonal kink limits the tensor grid to second order
            let tol = if k == 1 { 1e-5 } else { 1e-10 };
            assert!((fast - slow).abs() < tol, "k={k}: {fast} vs {slow}");
            let full = bracket_kernel(&q, &cg, &space, &Kernel::Paths(pk)).unwrap();
            let dens = GreenDensity::new(&q, &cg).unwrap();
            assert!((full.re - 0.5 * fast / dens.total).abs() < 1e-12);
        }
    }

    #[test]
    fn conjugate_symmetric_kernels_are_real() {
        let q = k4_mixed();
        let cg = solve_cover(&q, C64::new(3.0, 0.2), &opts(128)).unwrap();
        for k in 1..=2 {
            let space = PathSpace::new(&q.graph, k).unwrap();
            let a = PathKernel::random(&space, 11 + k as u64);
            let b = a.adjoint(&space);
            // the kernel plus its adjoint
            let va = bracket_kernel(&q, &cg, &space, &Kernel::Paths(a)).unwrap();
            let vb = bracket_kernel(&q, &cg, &space, &Kernel::Paths(b)).unwrap();
            assert!((va + vb).im.abs() < 1e-10, "k={k}: {}", (va + vb).im);
        }
    }

    #[test]
    fn diagonal_kernel_reduces_to_bracket_f() {
        let q = k4_mixed();
        let cg = solve_cover(&q, C64::new(3.0, 0.2), &opts(128)).unwrap();
        let f = EdgeFunction::random(6, 9);
        let space = PathSpace::new(&q.graph, 1).unwrap();
        let a = bracket_kernel(&q, &cg, &space, &Kernel::Diagonal(f.clone())).unwrap();
        assert!((a.re - bracket_f(&q, &cg, &f).unwrap()).abs() < 1e-14 && a.im == 0.0);
        assert!(bracket_kernel(&q, &cg, &space, &Kernel::Paths(PathKernel::random(&PathSpace::new(&q.graph, 2).unwrap(), 1))).is_err());
    }
}
