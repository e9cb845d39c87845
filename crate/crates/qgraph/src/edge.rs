//! Cauchy solutions C_γ, S_γ of −ψ″ + Wψ = γψ on a single edge.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::quad::simpson_c;

/// Symmetric potential W(x) = Σ a_k cos(2πk x / L).
#[derive(Debug, Clone, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct PotentialSpec {
    pub coeffs: Vec<f64>,
}

impl PotentialSpec {
    pub fn zero() -> Self {
        PotentialSpec { coeffs: Vec::new() }
    }
    pub fn cosine(coeffs: Vec<f64>) -> Self {
        PotentialSpec { coeffs }
    }
    /// Nonzero coefficients beyond a_0?
    pub fn is_constant(&self) -> bool {
        self.coeffs.iter().skip(1).all(|&a| a == 0.0)
    }
    pub fn constant(&self) -> f64 {
        self.coeffs.first().copied().unwrap_or(0.0)
    }
    pub fn eval(&self, x: f64, len: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * x / len;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| a * (k as f64 * w).cos())
            .sum()
    }
    pub fn sup_bound(&self) -> f64 {
        self.coeffs.iter().map(|a| a.abs()).sum()
    }
    pub fn lipschitz_bound(&self, len: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI / len;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| a.abs() * k as f64 * w)
            .sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BasisOptions {
    /// Wronskian defect tolerance.
    pub wronskian_tol: f64,
    /// Minimal number of integrator steps per edge.
    pub base_steps: usize,
    pub max_refinements: usize,
}

impl Default for BasisOptions {
    fn default() -> Self {
        BasisOptions {
            wronskian_tol: 1e-10,
            base_steps: 512,
            max_refinements: 4,
        }
    }
}

/// Values (C, C′, S, S′) at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cauchy {
    pub c: C64,
    pub cp: C64,
    pub s: C64,
    pub sp: C64,
}

impl Cauchy {
    pub fn wronskian(&self) -> C64 {
        self.c * self.sp - self.cp * self.s
    }
    pub fn conj(&self) -> Cauchy {
        Cauchy {
            c: self.c.conj(),
            cp: self.cp.conj(),
            s: self.s.conj(),
            sp: self.sp.conj(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EdgeBasis {
    pub gamma: C64,
    pub length: f64,
    /// Values at x = L.
    pub end: Cauchy,
    /// Number of mesh intervals (even); samples at x_i = i L / mesh.
    pub mesh: usize,
    pub c: Vec<C64>,
    pub cp: Vec<C64>,
    pub s: Vec<C64>,
    pub sp: Vec<C64>,
    pub wronskian_defect: f64,
}

impl EdgeBasis {
    pub fn h(&self) -> f64 {
        self.length / self.mesh as f64
    }
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }
    pub fn at(&self, i: usize) -> Cauchy {
        Cauchy {
            c: self.c[i],
            cp: self.cp[i],
            s: self.s[i],
            sp: self.sp[i],
        }
    }
}

const SERIES_THRESHOLD: f64 = 0.25;

/// Closed form for a constant potential, κ = γ − a₀.
fn closed_form(kappa: C64, x: f64) -> Cauchy {
    let z = kappa * x * x;
    if z.norm() < SERIES_THRESHOLD {
        // 8-term Taylor series in z = κx²
        let mut even = C64::new(0.0, 0.0);
        let mut odd = C64::new(0.0, 0.0);
        let mut term = C64::new(1.0, 0.0);
        for n in 0..8 {
            let fe = (2 * n + 1) as f64;
            even += term;
            odd += term / fe;
            term *= -z / (fe * (fe + 1.0));
        }
        let c = even;
        let s = odd * x;
        return Cauchy {
            c,
            cp: -kappa * s,
            s,
            sp: c,
        };
    }
    let k = kappa.sqrt();
    let (sn, cs) = ((k * x).sin(), (k * x).cos());
    Cauchy {
        c: cs,
        cp: -k * sn,
        s: sn / k,
        sp: cs,
    }
}

/// One RK4 step for both C and S; state = [u_C, u_C', u_S, u_S'].
#[inline]
fn rk4_step(y: &mut [C64; 4], w0: f64, wm: f64, w1: f64, gamma: C64, h: f64) {
    let f = |y: &[C64; 4], w: f64| -> [C64; 4] {
        let m = C64::new(w, 0.0) - gamma;
        [y[1], m * y[0], y[3], m * y[2]]
    };
    let add = |y: &[C64; 4], k: &[C64; 4], s: f64| -> [C64; 4] {
        [y[0] + k[0] * s, y[1] + k[1] * s, y[2] + k[2] * s, y[3] + k[3] * s]
    };
    let k1 = f(y, w0);
    let k2 = f(&add(y, &k1, h / 2.0), wm);
    let k3 = f(&add(y, &k2, h / 2.0), wm);
    let k4 = f(&add(y, &k3, h), w1);
    for i in 0..4 {
        y[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
    }
}

/// Integrates on [0, x_end] with `intervals` output intervals of `sub` steps.
fn integrate(
    pot: &PotentialSpec,
    len: f64,
    gamma: C64,
    x_end: f64,
    intervals: usize,
    sub: usize,
) -> Vec<Cauchy> {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let mut y = [one, zero, zero, one];
    let h = x_end / (intervals * sub) as f64;
    let mut out = Vec::with_capacity(intervals + 1);
    out.push(Cauchy {
        c: y[0],
        cp: y[1],
        s: y[2],
        sp: y[3],
    });
    let mut step = 0usize;
    for _ in 0..intervals {
        for _ in 0..sub {
            let x0 = step as f64 * h;
            let (w0, wm, w1) = (
                pot.eval(x0, len),
                pot.eval(x0 + h / 2.0, len),
                pot.eval(x0 + h, len),
            );
            rk4_step(&mut y, w0, wm, w1, gamma, h);
            step += 1;
        }
        out.push(Cauchy {
            c: y[0],
            cp: y[1],
            s: y[2],
            sp: y[3],
        });
    }
    out
}

fn max_defect(vals: &[Cauchy]) -> f64 {
    vals.iter()
        .map(|v| (v.wronskian() - 1.0).norm())
        .fold(0.0, f64::max)
}

/// Samples of (C, C′, S, S′) at `intervals + 1` uniform points of [0, x_end].
fn sample(
    pot: &PotentialSpec,
    len: f64,
    gamma: C64,
    x_end: f64,
    intervals: usize,
    opts: &BasisOptions,
) -> Result<(Vec<Cauchy>, f64)> {
    if pot.is_constant() {
        let kappa = gamma - pot.constant();
        let vals: Vec<Cauchy> = (0..=intervals)
            .map(|i| closed_form(kappa, x_end * i as f64 / intervals as f64))
            .collect();
        let d = max_defect(&vals);
        return Ok((vals, d));
    }
    let min_steps = ((opts.base_steps as f64 * x_end / len).ceil() as usize).max(1);
    let mut sub = min_steps.div_ceil(intervals).max(1);
    let mut last = f64::INFINITY;
    for _ in 0..=opts.max_refinements {
        let vals = integrate(pot, len, gamma, x_end, intervals, sub);
        let d = max_defect(&vals);
        if d < opts.wronskian_tol {
            return Ok((vals, d));
        }
        last = d;
        sub *= 2;
    }
    Err(Error::Integration { defect: last })
}

/// Full basis with grids on `mesh` intervals (rounded up to even, at least 16).
pub fn solve_basis(
    len: f64,
    pot: &PotentialSpec,
    gamma: C64,
    mesh: usize,
    opts: &BasisOptions,
) -> Result<EdgeBasis> {
    if !(len > 0.0 && len.is_finite()) {
        return Err(Error::Data(format!("edge length {len} not positive")));
    }
    let mesh = mesh.max(16).next_multiple_of(2);
    let (vals, defect) = sample(pot, len, gamma, len, mesh, opts)?;
    let end = vals[mesh];
    Ok(EdgeBasis {
        gamma,
        length: len,
        end,
        mesh,
        c: vals.iter().map(|v| v.c).collect(),
        cp: vals.iter().map(|v| v.cp).collect(),
        s: vals.iter().map(|v| v.s).collect(),
        sp: vals.iter().map(|v| v.sp).collect(),
        wronskian_defect: defect,
    })
}

/// Boundary values at x = L only.
pub fn boundary_values(
    len: f64,
    pot: &PotentialSpec,
    gamma: C64,
    opts: &BasisOptions,
) -> Result<Cauchy> {
    eval_at(len, pot, gamma, len, opts)
}

/// Values at an arbitrary point x ∈ [0, L].
pub fn eval_at(
    len: f64,
    pot: &PotentialSpec,
    gamma: C64,
    x: f64,
    opts: &BasisOptions,
) -> Result<Cauchy> {
    if x == 0.0 {
        let (one, zero) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        return Ok(Cauchy {
            c: one,
            cp: zero,
            s: zero,
            sp: one,
        });
    }
    if pot.is_constant() {
        return Ok(closed_form(gamma - pot.constant(), x));
    }
    let (vals, _) = sample(pot, len, gamma, x, 1, opts)?;
    Ok(vals[1])
}

/// (Σ₁, Σ₂) = (∫|S|², ∫S(L−x)·conj S(x)).
pub fn overlaps(basis: &EdgeBasis) -> (C64, C64) {
    let n = basis.mesh;
    let h = basis.h();
    let s1: Vec<C64> = basis.s.iter().map(|s| C64::new(s.norm_sqr(), 0.0)).collect();
    let s2: Vec<C64> = (0..=n).map(|i| basis.s[n - i] * basis.s[i].conj()).collect();
    (simpson_c(&s1, h), simpson_c(&s2, h))
}

/// Max residuals over the mesh of the two symmetric-potential relations
/// S(L)C(x) − C(L)S(x) = S(L−x) and S′(L)C(x) − C′(L)S(x) = C(L−x).
pub fn trig_residuals(basis: &EdgeBasis) -> (f64, f64) {
    let n = basis.mesh;
    let e = basis.end;
    let mut r = (0.0f64, 0.0f64);
    for i in 0..=n {
        let a = (e.s * basis.c[i] - e.c * basis.s[i] - basis.s[n - i]).norm();
        let b = (e.sp * basis.c[i] - e.cp * basis.s[i] - basis.c[n - i]).norm();
        r = (r.0.max(a), r.1.max(b));
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn opts() -> BasisOptions {
        BasisOptions::default()
    }

    #[test]
    fn free_closed_form() {
        let b = solve_basis(PI, &PotentialSpec::zero(), C64::new(4.0, 0.0), 64, &opts()).unwrap();
        assert!(b.end.s.norm() < 1e-14);
        assert!((b.end.c - 1.0).norm() < 1e-14);
        assert!(b.wronskian_defect < 1e-12);
    }

    #[test]
    fn series_matches_closed_form_near_threshold() {
        for &g in &[C64::new(0.2, 0.0), C64::new(-0.24, 0.01), C64::new(0.1, 0.15)] {
            let series = closed_form(g, 1.0);
            let k = g.sqrt();
            assert!((series.c - k.cos()).norm() < 1e-14);
            assert!((series.s - k.sin() / k).norm() < 1e-14);
            assert!((series.cp + k * k.sin()).norm() < 1e-14);
        }
        let zero = closed_form(C64::new(0.0, 0.0), 2.0);
        assert_eq!(zero.s, C64::new(2.0, 0.0));
    }

    #[test]
    fn cosine_potential_trig_relation() {
        let w = PotentialSpec::cosine(vec![0.0, 0.5]);
        let b = solve_basis(1.0, &w, C64::new(2.0, 0.1), 64, &opts()).unwrap();
        let m = b.mesh / 2;
        let lhs = b.end.s * b.c[m] - b.end.c * b.s[m];
        assert!((lhs - b.s[m]).norm() < 1e-8);
        assert!(b.wronskian_defect < 1e-10);
        assert!((b.end.sp - b.end.c).norm() < 1e-8);
        let (r1, r2) = trig_residuals(&b);
        assert!(r1 < 1e-8 && r2 < 1e-8);
    }

    #[test]
    fn constant_potential_shifts_energy() {
        let w = PotentialSpec::cosine(vec![1.5]);
        let a = boundary_values(1.3, &w, C64::new(4.0, 0.2), &opts()).unwrap();
        let b = boundary_values(1.3, &PotentialSpec::zero(), C64::new(2.5, 0.2), &opts()).unwrap();
        assert!((a.s - b.s).norm() < 1e-15);
    }

    #[test]
    fn conjugation_symmetry() {
        let w = PotentialSpec::cosine(vec![0.3, -0.4, 0.2]);
        let g = C64::new(5.0, 0.7);
        let a = boundary_values(1.1, &w, g, &opts()).unwrap();
        let b = boundary_values(1.1, &w, g.conj(), &opts()).unwrap();
        assert!((a.s.conj() - b.s).norm() < 1e-12);
        assert!((a.c.conj() - b.c).norm() < 1e-12);
    }

    #[test]
    fn overlaps_free() {
        let b = solve_basis(PI, &PotentialSpec::zero(), C64::new(1.0, 0.0), 512, &opts()).unwrap();
        let (s1, s2) = overlaps(&b);
        assert!((s1.re - PI / 2.0).abs() < 1e-9);
        // ∫ sin(π − x) sin x = ∫ sin² x on [0, π]
        assert!((s2.re - PI / 2.0).abs() < 1e-9);
        assert!(s1.re * s1.re - s2.norm_sqr() >= 0.0);
    }

    #[test]
    fn eval_at_matches_grid() {
        let w = PotentialSpec::cosine(vec![0.0, 0.5]);
        let g = C64::new(3.0, 0.0);
        let b = solve_basis(1.0, &w, g, 32, &opts()).unwrap();
        let p = eval_at(1.0, &w, g, b.x(8), &opts()).unwrap();
        assert!((p.s - b.s[8]).norm() < 1e-9);
    }
}
