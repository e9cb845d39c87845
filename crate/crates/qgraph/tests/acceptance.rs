//! Acceptance criteria 1–10. Each test prints one PASS/FAIL line with the
//! measured value and its pinned tolerance, then asserts.

mod common;

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::{report_line, rk4_cauchy, tree_zeta_im_positive, FdOracle};
use qgraph::cover::{solve_cover, CoverOptions};
use qgraph::edge::{solve_basis, trig_residuals, BasisOptions, PotentialSpec};
use qgraph::lab::builtin::{builtin, verify_trio};
use qgraph::lab::discrete::{almost_same_average, PathObs};
use qgraph::lab::experiment::{variance_experiment, ExperimentConfig, ExperimentOutput};
use qgraph::lab::observable::ObservableSpec;
use qgraph::lab::reduction::op_e;
use qgraph::lab::report::write_rows;
use qgraph::lab::verify::{verify, VerifyConfig, VerifyOutput};
use qgraph::nb::{build_fields, PathSpace};
use qgraph::spectrum::{eigenvalues_in, SpectrumOptions};
use qgraph::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod tol {
    pub const EDGE: f64 = 1e-8;
    pub const EDGE_RK4: f64 = 1e-7;
    pub const EDGE_TIME_S: f64 = 5.0;
    pub const SPECTRUM_CLOSED: f64 = 1e-7;
    pub const SPECTRUM_FD_REL: f64 = 1e-3;
    pub const SPECTRUM_TIME_S: f64 = 10.0;
    pub const ZETA_RECURSION: f64 = 1e-10;
    pub const GREEN: f64 = 1e-7;
    pub const FINITE_GREEN: f64 = 1e-10;
    pub const GREEN_TIME_S: f64 = 30.0;
    pub const TREE: f64 = 1e-9;
    pub const TREE_TIME_S: f64 = 2.0;
    pub const NB: f64 = 1e-8;
    pub const OMEGA: f64 = 1e-7;
    pub const INEQUALITY: f64 = 1e-12;
    pub const DISCRETE: f64 = 1e-8;
    pub const TREND_RATIO: f64 = 0.5;
    pub const TREND_TIME_S: f64 = 600.0;
    /// Halving ratio must lie in [2(1 − x), 2(1 + x)].
    pub const HALVING: f64 = 0.25;
}

fn line(n: usize, pass: bool, detail: &str) {
    report_line(&format!("criterion {n:>2}: {}  {detail}", if pass { "PASS" } else { "FAIL" }));
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn verify_run() -> &'static VerifyOutput {
    static OUT: OnceLock<VerifyOutput> = OnceLock::new();
    OUT.get_or_init(|| verify(&verify_trio(), &VerifyConfig::default()))
}

/// Worst residual and number of matching checks over the given group/name
/// pairs.
fn worst(out: &VerifyOutput, keys: &[(&str, &str)]) -> (f64, usize) {
    let mut w = 0.0f64;
    let mut n = 0;
    for c in &out.checks {
        if keys.iter().any(|(g, k)| c.group == *g && c.name == *k) {
            w = if c.residual.is_nan() { f64::NAN } else { w.max(c.residual) };
            n += 1;
        }
    }
    (w, n)
}

fn graph_errors(out: &VerifyOutput) -> Vec<String> {
    out.graphs
        .iter()
        .filter_map(|g| g.error.as_ref().map(|e| format!("{}: {e}", g.graph)))
        .collect()
}

fn trend_config() -> ExperimentConfig {
    ExperimentConfig {
        graph_name: "k4".into(),
        base: builtin("k4").unwrap(),
        interval: (2.5, 5.5),
        eta0: vec![0.05],
        folds: vec![1, 2, 4, 8, 16],
        seeds: vec![0, 1, 2, 3, 4],
        observables: vec![ObservableSpec::Half],
        mesh: 512,
        tol: 1e-10,
        quantum: 1e-9,
        bst_radius: 2,
    }
}

fn trend_run() -> &'static (ExperimentOutput, f64) {
    static OUT: OnceLock<(ExperimentOutput, f64)> = OnceLock::new();
    OUT.get_or_init(|| {
        let t = Instant::now();
        let out = variance_experiment(&trend_config()).expect("trend experiment");
        (out, secs(t.elapsed()))
    })
}

#[test]
fn criterion_01_edge_identities() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let opts = BasisOptions::default();
    let (mut worst_id, mut worst_rk4) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let len = rng.random_range(0.3..2.0);
        let nterms = rng.random_range(0..4);
        let coeffs: Vec<f64> = (0..nterms).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pot = PotentialSpec::cosine(coeffs);
        let gamma = C64::new(rng.random_range(-2.0..30.0), rng.random_range(0.0..2.0));
        let b = solve_basis(len, &pot, gamma, 256, &opts).unwrap();
        let (r1, r2) = trig_residuals(&b);
        worst_id = worst_id.max(b.wronskian_defect).max(r1).max(r2);
        let o = rk4_cauchy(len, &|x| pot.eval(x, len), gamma, 20_000);
        let e = b.end;
        let rel = [(e.c, o[0]), (e.cp, o[1]), (e.s, o[2]), (e.sp, o[3])]
            .iter()
            .map(|(a, b)| (a - b).norm() / b.norm().max(1.0))
            .fold(0.0, f64::max);
        worst_rk4 = worst_rk4.max(rel);
    }
    let rt = secs(t.elapsed());
    let pass = worst_id < tol::EDGE && worst_rk4 < tol::EDGE_RK4 && rt < tol::EDGE_TIME_S;
    line(
        1,
        pass,
        &format!(
            "50 samples: identity residual {worst_id:.2e} < {:.0e}; RK4 oracle {worst_rk4:.2e} < {:.0e}; {rt:.2} s < {} s",
            tol::EDGE,
            tol::EDGE_RK4,
            tol::EDGE_TIME_S
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_02_k4_spectrum() {
    let t = Instant::now();
    let q = builtin("k4").unwrap();
    let set = eigenvalues_in(&q, 1e-9, 40.0, &SpectrumOptions::default()).unwrap();
    let got = set.eigenvalues();
    let a = (-1.0f64 / 3.0).acos();
    let tau = 2.0 * std::f64::consts::PI;
    // non-Dirichlet eigenvalues of the equilateral K4 in (0, 40]
    let mut want = vec![a * a; 3];
    want.extend(vec![(tau - a) * (tau - a); 3]);
    want.push(tau * tau);
    let closed = if got.len() == want.len() {
        got.iter().zip(&want).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let rt = secs(t.elapsed());
    let fd = FdOracle::new(&q, 2000).eigenvalues(1e-6, 40.0, 1e-9);
    let fd_rel = got
        .iter()
        .map(|x| fd.iter().map(|y| (x - y).abs() / y).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    // the oracle also sees the vertex-vanishing modes the solver excludes
    let counts_ok = fd.len() == got.len() + set.excluded_dirichlet;
    let pass = closed < tol::SPECTRUM_CLOSED && fd_rel < tol::SPECTRUM_FD_REL && counts_ok && rt < tol::SPECTRUM_TIME_S;
    line(
        2,
        pass,
        &format!(
            "{} eigenvalues: closed-form error {closed:.2e} < {:.0e}; FD oracle rel {fd_rel:.2e} < {:.0e}; FD count {} = {} + {} excluded; solver {rt:.2} s < {} s",
            got.len(),
            tol::SPECTRUM_CLOSED,
            tol::SPECTRUM_FD_REL,
            fd.len(),
            got.len(),
            set.excluded_dirichlet,
            tol::SPECTRUM_TIME_S
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_03_green_identities() {
    let out = verify_run();
    let errs = graph_errors(out);
    let (zr, n1) = worst(out, &[("cover", "zeta_recursion")]);
    let (other, n2) = worst(
        out,
        &[
            ("cover", "zeta_inverse"),
            ("cover", "zeta_ratio"),
            ("cover", "mid_green"),
            ("cover", "green_multiplicative"),
            ("cover", "psi_single_bond"),
            ("cover", "psi_path"),
            ("cover", "psi_quadratic"),
            ("cover", "current_forward"),
            ("cover", "current_backward"),
        ],
    );
    let (fg, n3) = worst(out, &[("finite_green", "symmetry"), ("finite_green", "herglotz")]);
    let (herg, _) = worst(out, &[("cover", "herglotz")]);
    let rt = out.total_runtime_s;
    // 3 graphs × 2 energies
    let pass = errs.is_empty()
        && n1 == 6
        && n2 == 54
        && n3 == 12
        && zr < tol::ZETA_RECURSION
        && other < tol::GREEN
        && fg < tol::FINITE_GREEN
        && herg == 0.0
        && rt < tol::GREEN_TIME_S;
    line(
        3,
        pass,
        &format!(
            "zeta recursion {zr:.2e} < {:.0e}; other identities {other:.2e} < {:.0e}; finite g {fg:.2e} < {:.0e}; cover Herglotz violation {herg:.1e}; {rt:.2} s < {} s {errs:?}",
            tol::ZETA_RECURSION,
            tol::GREEN,
            tol::FINITE_GREEN,
            tol::GREEN_TIME_S
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_04_regular_tree_root() {
    let t = Instant::now();
    let q = builtin("k4").unwrap();
    let opts = CoverOptions::default();
    // band of the 3-regular free tree: |cos √λ| < 2√2/3
    let c0 = (2.0 * 2.0f64.sqrt() / 3.0).acos();
    let (lo, hi) = (c0 * c0, (std::f64::consts::PI - c0).powi(2));
    let mut worst_zeta = 0.0f64;
    let mut worst_g = 0.0f64;
    let mut roots_ok = true;
    for i in 0..20 {
        let lam = lo + (hi - lo) * (i as f64 + 0.5) / 20.0;
        let gamma = C64::new(lam, 0.05);
        let cg = solve_cover(&q, gamma, &opts).unwrap();
        let Some(want) = tree_zeta_im_positive(gamma) else {
            roots_ok = false;
            continue;
        };
        // the Im-positive root is also the decaying one
        roots_ok &= want.norm_sqr() < 0.5;
        let (c, s) = (gamma.sqrt().cos(), gamma.sqrt().sin() / gamma.sqrt());
        let g_want = s / (3.0 * (c - want));
        for z in &cg.zeta {
            worst_zeta = worst_zeta.max((z - want).norm());
        }
        for g in &cg.g_diag {
            worst_g = worst_g.max((g - g_want).norm());
        }
    }
    let rt = secs(t.elapsed());
    let pass = roots_ok && worst_zeta < tol::TREE && worst_g < tol::TREE && rt < tol::TREE_TIME_S;
    line(
        4,
        pass,
        &format!(
            "20 energies in ({lo:.3}, {hi:.3}): |zeta - root| {worst_zeta:.2e}, |g - closed form| {worst_g:.2e} < {:.0e}; {rt:.2} s < {} s",
            tol::TREE,
            tol::TREE_TIME_S
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_05_non_backtracking_relation() {
    let out = verify_run();
    let errs = graph_errors(out);
    let (er, n1) = worst(out, &[("nb", "eigen_relation")]);
    let (tel, n2) = worst(
        out,
        &[("nb", "peel_single_step"), ("nb", "telescope_forward"), ("nb", "telescope_backward")],
    );
    let (empty, _) = worst(out, &[("nb", "window_nonempty")]);
    let n_eig: usize = out.graphs.iter().map(|g| g.n_window).sum();
    let pass = errs.is_empty() && n1 == 3 && n2 == 9 && empty == 0.0 && er < tol::NB && tel < tol::NB;
    line(
        5,
        pass,
        &format!(
            "{n_eig} eigenvalues on 3 graphs: eigen relation {er:.2e}, telescopes (n=2, k=1) {tel:.2e} < {:.0e} {errs:?}",
            tol::NB
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_operator_contracts() {
    let out = verify_run();
    let errs = graph_errors(out);
    let (ineq, n1) = worst(
        out,
        &[
            ("operators", "s_gamma_one"),
            ("operators", "s_gamma_star_one"),
            ("operators", "omega_sign"),
            ("operators", "omega_star_sign"),
            ("operators", "transfer_half"),
            ("operators", "mu_marginals"),
            ("operators", "s_u_lp"),
        ],
    );
    let (om, n2) = worst(out, &[("operators", "omega_current"), ("operators", "omega_star_current")]);
    let (pos, _) = worst(out, &[("operators", "mu_positive")]);
    let pass = errs.is_empty() && n1 == 42 && n2 == 12 && pos == 0.0 && ineq <= tol::INEQUALITY && om < tol::OMEGA;
    line(
        6,
        pass,
        &format!(
            "inequalities (S1, S*1, half-contraction on 100 f, mu marginals k<=3, l^p on 100 K) worst excess {ineq:.2e} <= {:.0e}; omega quadratures {om:.2e} < {:.0e} {errs:?}",
            tol::INEQUALITY,
            tol::OMEGA
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_discretization_identity() {
    let out = verify_run();
    let errs = graph_errors(out);
    let (d, n) = worst(out, &[("discrete", "discretization")]);
    let pass = errs.is_empty() && n == 3 && d < tol::DISCRETE;
    line(
        7,
        pass,
        &format!("10 random observables on each of 3 graphs: residual {d:.2e} < {:.0e} {errs:?}", tol::DISCRETE),
    );
    assert!(pass);
}

#[test]
fn criterion_08_ergodicity_trend() {
    let (out, rt) = trend_run();
    let series = out.summary.median_series(0.05, "half");
    let meds: Vec<f64> = series.iter().map(|s| s.1).collect();
    let nonincreasing = meds.windows(2).all(|w| w[1] <= w[0]);
    let ratio = meds.last().unwrap() / meds[0];
    let pass = out.summary.errors.is_empty()
        && series.len() == 5
        && nonincreasing
        && ratio <= tol::TREND_RATIO
        && *rt < tol::TREND_TIME_S;
    line(
        8,
        pass,
        &format!(
            "medians by fold {series:?}; nonincreasing {nonincreasing}; fold-16/fold-1 {ratio:.3} <= {}; {rt:.1} s < {} s",
            tol::TREND_RATIO,
            tol::TREND_TIME_S
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_eta_consistency() {
    let q = builtin("k4-mixed").unwrap();
    let g = &q.graph;
    let so = SpectrumOptions::default();
    let set = eigenvalues_in(&q, 2.5, 5.5, &so).unwrap();
    let b1 = PathSpace::new(g, 1).unwrap();
    let one = PathObs {
        k: 1,
        values: vec![C64::new(1.0, 0.0); g.num_bonds()],
    };
    let jv: Vec<C64> = (0..g.num_vertices()).map(|v| C64::new(1.0 + v as f64, 0.0)).collect();
    let ladder = [0.08, 0.04, 0.02];
    let mut q_o = Vec::new();
    let mut q_e = Vec::new();
    let mut q_a = Vec::new();
    for &eta in &ladder {
        let fields = build_fields(&q, &set.pairs, eta, 1e-9, &CoverOptions::default()).unwrap();
        let n = fields.len() as f64;
        q_o.push(fields.iter().map(|f| f.o.iter().map(|z| z.norm()).sum::<f64>() / f.o.len() as f64).sum::<f64>() / n);
        q_e.push(
            fields
                .iter()
                .map(|f| op_e(g, &f.cover, &jv).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
                .sum::<f64>()
                / n,
        );
        q_a.push(fields.iter().map(|f| almost_same_average(g, &b1, f, &one).0.norm()).sum::<f64>() / n);
    }
    let ratios = |v: &[f64]| -> Vec<f64> { v.windows(2).map(|w| w[0] / w[1]).collect() };
    let all: Vec<(&str, Vec<f64>)> = vec![("mean |O|", ratios(&q_o)), ("E norm", ratios(&q_e)), ("almost-same defect", ratios(&q_a))];
    let (lo, hi) = (2.0 * (1.0 - tol::HALVING), 2.0 * (1.0 + tol::HALVING));
    let pass = !set.is_empty() && all.iter().all(|(_, r)| r.iter().all(|&x| x >= lo && x <= hi));
    let detail: Vec<String> = all
        .iter()
        .map(|(k, r)| format!("{k} {}", r.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join("/")))
        .collect();
    line(
        9,
        pass,
        &format!("halving ratios on eta0 {ladder:?}: {} in [{lo}, {hi}]", detail.join(", ")),
    );
    assert!(pass);
}

#[test]
fn criterion_10_determinism() {
    let csv = |rows: &[qgraph::lab::report::Row]| {
        let mut b = Vec::new();
        write_rows(&mut b, rows).unwrap();
        b
    };
    let v1 = csv(&verify_run().rows());
    let v2 = csv(&verify(&verify_trio(), &VerifyConfig::default()).rows());
    let t1 = csv(&trend_run().0.rows);
    let t2 = csv(&variance_experiment(&trend_config()).unwrap().rows);
    let pass = v1 == v2 && t1 == t2 && !v1.is_empty() && !t1.is_empty();
    line(
        10,
        pass,
        &format!(
            "verify CSV {} bytes identical {}; trend CSV {} bytes identical {}",
            v1.len(),
            v1 == v2,
            t1.len(),
            t1 == t2
        ),
    );
    assert!(pass);
}
