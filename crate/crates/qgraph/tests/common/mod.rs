//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use qgraph::qgraph::QGraph;
use qgraph::Complex64 as C64;

/// Finite-difference (lumped P1) discretization of H with `n` intervals per
/// edge: stiffness K and diagonal mass M, eigenvalues counted by Sylvester
/// inertia of K − μM. Each edge interior is a tridiagonal chain eliminated
/// onto the vertex block.
pub struct FdOracle<'a> {
    q: &'a QGraph,
    n: usize,
}

impl<'a> FdOracle<'a> {
    pub fn new(q: &'a QGraph, n: usize) -> Self {
        assert!(n >= 2);
        FdOracle { q, n }
    }

    /// Number of eigenvalues strictly below μ.
    pub fn count_below(&self, mu: f64) -> usize {
        let q = self.q;
        let g = &q.graph;
        let nv = q.num_vertices();
        let mut schur = DMatrix::<f64>::zeros(nv, nv);
        let mut negative = 0;
        for v in 0..nv {
            schur[(v, v)] += q.alpha(v);
        }
        for e in 0..q.num_edges() {
            let b = 2 * e;
            let (o, t) = (g.origin(b), g.terminus(b));
            let len = q.edge_length(e);
            let h = len / self.n as f64;
            let w = |x: f64| q.potential(b).eval(x, len);
            schur[(o, o)] += 1.0 / h + 0.5 * h * (w(0.0) - mu);
            schur[(t, t)] += 1.0 / h + 0.5 * h * (w(len) - mu);
            let m = self.n - 1;
            let diag: Vec<f64> = (1..=m).map(|i| 2.0 / h + h * (w(i as f64 * h) - mu)).collect();
            let off = -1.0 / h;
            // LDLᵀ of the chain; both ends solved to get the needed inverse entries
            let mut d = vec![0.0; m];
            d[0] = diag[0];
            for i in 1..m {
                d[i] = diag[i] - off * off / d[i - 1];
            }
            negative += d.iter().filter(|&&x| x < 0.0).count();
            let solve = |rhs_at: usize| -> Vec<f64> {
                let mut y = vec![0.0; m];
                y[rhs_at] = 1.0;
                for i in 1..m {
                    y[i] -= off / d[i - 1] * y[i - 1];
                }
                let mut x = vec![0.0; m];
                x[m - 1] = y[m - 1] / d[m - 1];
                for i in (0..m - 1).rev() {
                    x[i] = (y[i] - off * x[i + 1]) / d[i];
                }
                x
            };
            let x1 = solve(0);
            let xm = solve(m - 1);
            let c2 = off * off;
            schur[(o, o)] -= c2 * x1[0];
            schur[(t, t)] -= c2 * xm[m - 1];
            schur[(o, t)] -= c2 * x1[m - 1];
            schur[(t, o)] -= c2 * x1[m - 1];
        }
        negative + SymmetricEigen::new(schur).eigenvalues.iter().filter(|&&x| x < 0.0).count()
    }

    /// All eigenvalues in (a, b] by bisection on the count.
    pub fn eigenvalues(&self, a: f64, b: f64, tol: f64) -> Vec<f64> {
        let (lo, hi) = (self.count_below(a + tol), self.count_below(b + tol));
        (lo..hi)
            .map(|j| {
                let (mut l, mut r) = (a, b + tol);
                while r - l > tol {
                    let mid = 0.5 * (l + r);
                    if self.count_below(mid) > j {
                        r = mid;
                    } else {
                        l = mid;
                    }
                }
                0.5 * (l + r)
            })
            .collect()
    }
}

/// Classical RK4 for −u″ + W u = γ u on [0, L]: returns (C, C′, S, S′) at L.
pub fn rk4_cauchy(len: f64, w: &dyn Fn(f64) -> f64, gamma: C64, steps: usize) -> [C64; 4] {
    let h = len / steps as f64;
    let f = |x: f64, y: [C64; 2]| [y[1], (w(x) - gamma) * y[0]];
    let run = |mut y: [C64; 2]| {
        for i in 0..steps {
            let x = i as f64 * h;
            let add = |a: [C64; 2], k: [C64; 2], s: f64| [a[0] + k[0] * s, a[1] + k[1] * s];
            let k1 = f(x, y);
            let k2 = f(x + 0.5 * h, add(y, k1, 0.5 * h));
            let k3 = f(x + 0.5 * h, add(y, k2, 0.5 * h));
            let k4 = f(x + h, add(y, k3, h));
            for c in 0..2 {
                y[c] += (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]) * (h / 6.0);
            }
        }
        y
    };
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let c = run([one, zero]);
    let s = run([zero, one]);
    [c[0], c[1], s[0], s[1]]
}

/// Root of 2ζ² − 3Cζ + 1 = 0 with positive imaginary part, the ζ of the
/// 3-regular equilateral free tree (C = cos √γ, unit lengths).
pub fn tree_zeta_im_positive(gamma: C64) -> Option<C64> {
    let c = gamma.sqrt().cos();
    let disc = (9.0 * c * c - 8.0).sqrt();
    let roots = [(3.0 * c + disc) / 4.0, (3.0 * c - disc) / 4.0];
    let pos: Vec<C64> = roots.into_iter().filter(|z| z.im > 0.0).collect();
    (pos.len() == 1).then(|| pos[0])
}

/// Writes one line to the real stdout, bypassing test output capture.
pub fn report_line(line: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}
