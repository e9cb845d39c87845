//! Property tests over random graphs, lifts, edge data and energies.

mod common;

use proptest::prelude::*;
use qgraph::cover::{solve_cover, CoverOptions};
use qgraph::edge::{solve_basis, trig_residuals, BasisOptions, PotentialSpec};
use qgraph::graph::{build_graph, complete_graph, nb_paths, petersen, random_n_lift, rev, spectral_gap};
use qgraph::lab::bracket::GreenDensity;
use qgraph::lab::observable::EdgeFunction;
use qgraph::lab::report::fmt_f;
use qgraph::qgraph::QGraph;
use qgraph::Complex64 as C64;

fn base(which: bool) -> qgraph::graph::CombGraph {
    if which {
        build_graph(&petersen()).unwrap()
    } else {
        build_graph(&complete_graph(4)).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lift_structure(which in any::<bool>(), fold in 1usize..7, seed in any::<u64>()) {
        let g = base(which);
        let lift = random_n_lift(&g, fold, seed).unwrap();
        let h = &lift.graph;
        prop_assert_eq!(h.num_vertices(), fold * g.num_vertices());
        for b in 0..h.num_bonds() {
            prop_assert_eq!(rev(rev(b)), b);
            prop_assert_eq!(h.origin(rev(b)), h.terminus(b));
            prop_assert_eq!(h.successors(b).len(), h.degree(h.terminus(b)) - 1);
            let pb = lift.bond_proj(b);
            prop_assert_eq!(lift.vertex_proj[h.origin(b)], g.origin(pb));
            prop_assert_eq!(lift.vertex_proj[h.terminus(b)], g.terminus(pb));
        }
        for v in 0..h.num_vertices() {
            prop_assert_eq!(h.degree(v), g.degree(lift.vertex_proj[v]));
        }
        let beta = spectral_gap(h);
        prop_assert!((0.0..=1.0).contains(&beta));
    }

    #[test]
    fn nb_paths_closed_under_subpaths(k in 2usize..4) {
        let g = base(false);
        let longer = nb_paths(&g, k);
        let shorter = nb_paths(&g, k - 1);
        for p in &longer {
            prop_assert!(shorter.contains(&p[1..].to_vec()));
            prop_assert!(shorter.contains(&p[..k - 1].to_vec()));
        }
    }

    #[test]
    fn wronskian_and_reflection(
        len in 0.3f64..2.0,
        a1 in -1.0f64..1.0,
        a2 in -1.0f64..1.0,
        re in -2.0f64..25.0,
        im in 0.0f64..2.0,
    ) {
        let pot = PotentialSpec::cosine(vec![0.0, a1, a2]);
        let b = solve_basis(len, &pot, C64::new(re, im), 128, &BasisOptions::default()).unwrap();
        let (r1, r2) = trig_residuals(&b);
        prop_assert!(b.wronskian_defect < 1e-8 && r1 < 1e-8 && r2 < 1e-8);
    }

    #[test]
    fn herglotz_positivity(re in 0.5f64..12.0, im in 0.05f64..2.0, a1 in -0.5f64..0.5) {
        let g = base(false);
        let q = QGraph::new(
            g,
            vec![1.0, 1.1, 1.2, 1.3, 0.9, 1.05],
            vec![PotentialSpec::cosine(vec![0.0, a1]); 6],
            vec![0.0; 4],
        ).unwrap();
        let cg = solve_cover(&q, C64::new(re, im), &CoverOptions::default()).unwrap();
        prop_assert!(cg.g_diag.iter().all(|z| z.im > 0.0));
        prop_assert!(cg.r_plus.iter().chain(&cg.r_minus).all(|z| z.im > 0.0));
        // ⟨f⟩ is a positive average: it lies in the range of f
        let f = EdgeFunction::random(6, (re * 1e3) as u64);
        let d = GreenDensity::new(&q, &cg).unwrap();
        let br = d.bracket(&q, &f);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for e in 0..6 {
            for i in 0..=64 {
                let x = q.edge_length(e) * i as f64 / 64.0;
                let v = f.eval(e, x, q.edge_length(e));
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        prop_assert!(br >= lo - 1e-3 && br <= hi + 1e-3, "{br} not in [{lo}, {hi}]");
    }

    #[test]
    fn csv_floats_roundtrip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let s = fmt_f(Some(x));
        prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}

#[test]
fn fd_oracle_matches_free_interval_count() {
    // K4 equilateral below 1: only λ = 0
    let q = QGraph::equilateral(base(false), 1.0).unwrap();
    let o = common::FdOracle::new(&q, 200);
    assert_eq!(o.count_below(-1e-6), 0);
    assert_eq!(o.count_below(1.0), 1);
}
