use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde_json::json;

use qgraph::config::{Resolved, Settings};
use qgraph::cover::{cover_identities, solve_cover, CoverOptions};
use qgraph::graph::{bst_census, random_n_lift, spectral_gap};
use qgraph::lab::builtin::verify_trio;
use qgraph::lab::experiment::{
    nbvar_experiment, spectrum_table, variance_experiment, ExperimentConfig, ExperimentOutput, NbConfig,
};
use qgraph::lab::report::{fmt_f, write_csv, write_json, write_table, SCHEMA_VERSION};
use qgraph::lab::verify::{verify, VerifyConfig};
use qgraph::qgraph::dirichlet_distance;
use qgraph::spectrum::{eigenvalues_in, finite_green, weyl_count, SpectrumOptions};
use qgraph::{Complex64 as C64, Error, Result};

#[derive(Parser)]
#[command(name = "qgraph", version, about = "Quantum graphs, cover Green functions and ergodicity experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Cmd {
    /// Eigenvalues of the graph in the interval.
    Spectrum,
    /// Finite-graph vertex Green matrix at energy + i·eta0.
    Green,
    /// Universal-cover Green data at energy + i·eta0.
    Cover,
    /// Non-backtracking variance of random path observables over lifts.
    Nbvar,
    /// Quantum variance of edge observables over lifts.
    Variance,
    /// Random lifts with spectral gap and BST census.
    Lift,
    /// Exact-identity suite.
    Verify,
}

#[derive(Args, Default)]
struct Flags {
    /// TOML file with the same keys as the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Edge-list file or builtin:<name>.
    #[arg(long, global = true)]
    graph: Option<String>,
    #[arg(long, global = true, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    interval: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    eta0: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    folds: Option<Vec<usize>>,
    #[arg(long, global = true, value_delimiter = ',')]
    seed: Option<Vec<u64>>,
    /// Repeatable; `;` also separates specs.
    #[arg(long, global = true, action = ArgAction::Append)]
    observable: Vec<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    mesh: Option<usize>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write plot.dat (gnuplot columns).
    #[arg(long, global = true)]
    plot: bool,
    /// Also write spectrum.csv for experiments.
    #[arg(long, global = true)]
    spectrum: bool,
    /// Cosine coefficients of the potential on every edge.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    potential: Option<Vec<f64>>,
    /// One δ-coupling, or one per vertex.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    alpha: Option<Vec<f64>>,
    /// Re γ for green and cover (default: interval midpoint).
    #[arg(long, global = true, allow_negative_numbers = true)]
    energy: Option<f64>,
    /// Path length for nbvar.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Random observables for nbvar.
    #[arg(long, global = true)]
    n_observables: Option<usize>,
    #[arg(long, global = true)]
    bst_radius: Option<usize>,
}

impl Flags {
    fn settings(&self) -> Settings {
        let obs: Vec<String> = self
            .observable
            .iter()
            .flat_map(|s| s.split(';'))
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        Settings {
            graph: self.graph.clone(),
            interval: self.interval.as_ref().map(|v| [v[0], v[1]]),
            eta0: self.eta0.clone(),
            folds: self.folds.clone(),
            seed: self.seed.clone(),
            observable: (!obs.is_empty()).then_some(obs),
            out: self.out.clone(),
            mesh: self.mesh,
            tol: self.tol,
            threads: self.threads,
            plot: self.plot.then_some(true),
            spectrum: self.spectrum.then_some(true),
            potential: self.potential.clone(),
            alpha: self.alpha.clone(),
            energy: self.energy,
            k: self.k,
            n_observables: self.n_observables,
            bst_radius: self.bst_radius,
            quantum: None,
        }
    }
}

fn spectrum_options(r: &Resolved) -> SpectrumOptions {
    SpectrumOptions {
        tol: r.tol,
        mesh: r.mesh,
        ..Default::default()
    }
}

fn cover_options(r: &Resolved) -> CoverOptions {
    CoverOptions {
        mesh: r.mesh,
        ..Default::default()
    }
}

fn energy(r: &Resolved) -> f64 {
    r.energy.unwrap_or(0.5 * (r.interval.0 + r.interval.1))
}

fn cplx(z: C64) -> [String; 2] {
    [fmt_f(Some(z.re)), fmt_f(Some(z.im))]
}

fn run_spectrum(r: &Resolved, out: &Path) -> Result<()> {
    let t0 = Instant::now();
    let q = r.load_graph()?;
    let so = spectrum_options(r);
    let set = eigenvalues_in(&q, r.interval.0, r.interval.1, &so)?;
    write_table(&out.join("spectrum.csv"), &["j", "lambda", "at_dirichlet"], &spectrum_table(&set))?;
    let dd = dirichlet_distance(&q, r.interval.0, r.interval.1, 200, &so.basis)?;
    write_json(
        &out.join("summary.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "graph": r.graph_name,
            "interval": r.interval,
            "count": set.len(),
            "eigenvalues": set.eigenvalues(),
            "dirichlet_points": set.dirichlet_points,
            "weyl_count_difference": weyl_count(&q, r.interval.1) - weyl_count(&q, r.interval.0),
            "dirichlet_distance": dd,
            "runtime_s": t0.elapsed().as_secs_f64(),
        }),
    )?;
    println!("{} eigenvalues in [{}, {}]", set.len(), r.interval.0, r.interval.1);
    for l in set.eigenvalues() {
        println!("{l:.12}");
    }
    Ok(())
}

fn run_green(r: &Resolved, out: &Path) -> Result<()> {
    let t0 = Instant::now();
    let q = r.load_graph()?;
    let so = spectrum_options(r);
    let e = energy(r);
    let mut rows = Vec::new();
    let mut meta = Vec::new();
    for &eta in &r.eta0 {
        let gamma = C64::new(e, eta);
        for w in 0..q.num_vertices() {
            let col = finite_green(&q, gamma, w, &so)?;
            for (v, z) in col.values.iter().enumerate() {
                let [re, im] = cplx(*z);
                rows.push(vec![fmt_f(Some(e)), fmt_f(Some(eta)), w.to_string(), v.to_string(), re, im]);
            }
            meta.push(json!({"eta0": eta, "source": w, "residual": col.residual, "negated": col.negated}));
        }
    }
    write_table(&out.join("green.csv"), &["energy", "eta0", "source", "target", "re", "im"], &rows)?;
    write_json(
        &out.join("summary.json"),
        &json!({"schema_version": SCHEMA_VERSION, "graph": r.graph_name, "energy": e,
                "columns": meta, "runtime_s": t0.elapsed().as_secs_f64()}),
    )?;
    println!("green: {} columns written", meta.len());
    Ok(())
}

fn run_cover(r: &Resolved, out: &Path) -> Result<()> {
    let t0 = Instant::now();
    let q = r.load_graph()?;
    let co = cover_options(r);
    let e = energy(r);
    let (mut bonds, mut verts, mut meta) = (Vec::new(), Vec::new(), Vec::new());
    for &eta in &r.eta0 {
        let cg = solve_cover(&q, C64::new(e, eta), &co)?;
        for b in 0..q.num_bonds() {
            let mut row = vec![fmt_f(Some(eta)), b.to_string(), cg.origin(b).to_string(), cg.terminus(b).to_string()];
            for z in [cg.zeta[b], cg.r_plus[b], cg.r_minus[b]] {
                row.extend(cplx(z));
            }
            bonds.push(row);
        }
        for v in 0..q.num_vertices() {
            let mut row = vec![fmt_f(Some(eta)), v.to_string()];
            row.extend(cplx(cg.g_diag[v]));
            verts.push(row);
        }
        meta.push(json!({"eta0": eta, "iterations": cg.iterations, "residual": cg.residual,
                         "theta_final": cg.theta_final, "identities": cover_identities(&q, &cg)}));
    }
    write_table(
        &out.join("cover.csv"),
        &["eta0", "bond", "origin", "terminus", "zeta_re", "zeta_im", "r_plus_re", "r_plus_im", "r_minus_re", "r_minus_im"],
        &bonds,
    )?;
    write_table(&out.join("cover_vertices.csv"), &["eta0", "vertex", "g_re", "g_im"], &verts)?;
    write_json(
        &out.join("summary.json"),
        &json!({"schema_version": SCHEMA_VERSION, "graph": r.graph_name, "energy": e,
                "solves": meta, "runtime_s": t0.elapsed().as_secs_f64()}),
    )?;
    println!("cover: {} solves written", meta.len());
    Ok(())
}

fn run_lift(r: &Resolved, out: &Path) -> Result<()> {
    let t0 = Instant::now();
    let q = r.load_graph()?;
    let mut rows = Vec::new();
    for &fold in &r.folds {
        for &seed in &r.seeds {
            let lift = random_n_lift(&q.graph, fold, seed)?;
            let ql = q.lifted(&lift)?;
            let g = &ql.graph;
            let beta = spectral_gap(g);
            let bst = bst_census(g, r.bst_radius);
            let text: String = (0..g.num_edges())
                .map(|e| format!("{} {} {}\n", g.origin(2 * e), g.terminus(2 * e), ql.edge_length(e)))
                .collect();
            std::fs::write(out.join(format!("lift_f{fold}_s{seed}.txt")), text)?;
            rows.push(vec![
                fold.to_string(),
                seed.to_string(),
                g.num_vertices().to_string(),
                g.num_edges().to_string(),
                lift.attempts.to_string(),
                fmt_f(Some(beta)),
                fmt_f(Some(bst)),
            ]);
        }
    }
    write_table(&out.join("lift.csv"), &["fold", "seed", "vertices", "edges", "attempts", "beta", "bst_census"], &rows)?;
    write_json(
        &out.join("summary.json"),
        &json!({"schema_version": SCHEMA_VERSION, "graph": r.graph_name, "bst_radius": r.bst_radius,
                "lifts": rows.len(), "runtime_s": t0.elapsed().as_secs_f64()}),
    )?;
    println!("lift: {} lifts written", rows.len());
    Ok(())
}

fn experiment_config(r: &Resolved) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig {
        graph_name: r.graph_name.clone(),
        base: r.load_graph()?,
        interval: r.interval,
        eta0: r.eta0.clone(),
        folds: r.folds.clone(),
        seeds: r.seeds.clone(),
        observables: r.observables.clone(),
        mesh: r.mesh,
        tol: r.tol,
        quantum: r.quantum,
        bst_radius: r.bst_radius,
    })
}

fn write_experiment(r: &Resolved, out: &Path, res: &ExperimentOutput) -> Result<()> {
    write_csv(&out.join("report.csv"), &res.rows)?;
    write_json(&out.join("summary.json"), &res.summary)?;
    if r.spectrum {
        let mut rows = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for rep in &res.reports {
            if seen.insert((rep.fold, rep.seed)) {
                for (j, l) in rep.lambdas.iter().enumerate() {
                    rows.push(vec![rep.fold.to_string(), rep.seed.to_string(), j.to_string(), fmt_f(Some(*l))]);
                }
            }
        }
        write_table(&out.join("spectrum.csv"), &["fold", "seed", "j", "lambda"], &rows)?;
    }
    if r.plot {
        std::fs::write(out.join("plot.dat"), res.summary.plot_columns())?;
    }
    for m in &res.summary.medians {
        println!("fold {:>3}  eta0 {:<8}  {:<16} median {:.6e}", m.fold, m.eta0, m.observable, m.median);
    }
    for e in &res.summary.errors {
        eprintln!("error: {e}");
    }
    Ok(())
}

fn run_verify(r: &Resolved, explicit_graph: bool, out: &Path) -> Result<bool> {
    let graphs = if explicit_graph {
        vec![(r.graph_name.clone(), r.load_graph()?)]
    } else {
        verify_trio()
    };
    let cfg = VerifyConfig {
        eta0: r.eta0[0],
        interval: r.interval,
        mesh: r.mesh,
        tol: r.tol,
        seed: r.seeds[0],
        ..Default::default()
    };
    let res = verify(&graphs, &cfg);
    write_csv(&out.join("report.csv"), &res.rows())?;
    write_json(&out.join("summary.json"), &json!({"schema_version": SCHEMA_VERSION, "verify": res}))?;
    for g in &res.graphs {
        match &g.error {
            Some(e) => println!("{:<14} ERROR {e}", g.graph),
            None => println!("{:<14} #I = {}  {:.2} s", g.graph, g.n_window, g.runtime_s),
        }
    }
    for c in res.failures() {
        println!("FAIL {}/{}/{} residual {:e} > {:e}", c.graph, c.group, c.name, c.residual, c.tol);
    }
    let ok = res.all_passed();
    println!("verify: {} checks, {}", res.checks.len(), if ok { "all pass" } else { "FAILURES" });
    Ok(ok)
}

fn run(cli: &Cli) -> Result<bool> {
    let file = match &cli.flags.config {
        Some(p) => Settings::from_file(p)?,
        None => Settings::default(),
    };
    let flags = cli.flags.settings();
    let explicit_graph = flags.graph.is_some() || file.graph.is_some();
    let r = file.overlay(flags).resolve()?;
    if let Some(n) = r.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let out = r.out.clone();
    std::fs::create_dir_all(&out)?;
    match cli.cmd {
        Cmd::Spectrum => run_spectrum(&r, &out)?,
        Cmd::Green => run_green(&r, &out)?,
        Cmd::Cover => run_cover(&r, &out)?,
        Cmd::Lift => run_lift(&r, &out)?,
        Cmd::Variance => write_experiment(&r, &out, &variance_experiment(&experiment_config(&r)?)?)?,
        Cmd::Nbvar => {
            let nbc = NbConfig {
                k: r.k,
                n_observables: r.n_observables,
                observable_seed: r.seeds[0],
            };
            write_experiment(&r, &out, &nbvar_experiment(&experiment_config(&r)?, &nbc)?)?
        }
        Cmd::Verify => return run_verify(&r, explicit_graph, &out),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
