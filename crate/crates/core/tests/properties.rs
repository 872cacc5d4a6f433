use mlz_core::catalog::*;
use mlz_core::fock::{do_amplitudes_chronological, enumerate_basis, fermion_transition_det, site_occupation};
use mlz_core::graph::{Cycle, CycleEdge};
use mlz_core::*;
use proptest::prelude::*;

/// A Demkov-Osherov model: one sloped level through a flat band.
fn do_model() -> impl Strategy<Value = (f64, Vec<f64>, Vec<f64>)> {
    (2usize..6)
        .prop_flat_map(|nb| {
            (
                prop_oneof![0.4f64..2.0, -2.0f64..-0.4],
                prop::collection::vec(-3.0f64..3.0, nb),
                prop::collection::vec(prop_oneof![0.05f64..0.7, -0.7f64..-0.05], nb),
            )
        })
        .prop_filter("distinct band", |(_, e, _)| {
            let mut s = e.clone();
            s.sort_by(f64::total_cmp);
            s.windows(2).all(|w| w[1] - w[0] > 0.05)
        })
}

fn random_model() -> impl Strategy<Value = DiabaticModel> {
    (3usize..6).prop_flat_map(|n| {
        (
            prop::collection::vec(-2.0f64..2.0, n),
            prop::collection::vec(-2.0f64..2.0, n),
            prop::collection::vec(prop_oneof![Just(0.0), -0.8f64..0.8], n * (n - 1) / 2),
        )
            .prop_map(move |(slopes, offsets, gs)| {
                let mut pairs = Vec::new();
                let mut k = 0;
                for i in 0..n {
                    for j in i + 1..n {
                        if slopes[i] != slopes[j] {
                            pairs.push((i, j, gs[k]));
                        }
                        k += 1;
                    }
                }
                DiabaticModel::new(slopes, offsets, pairs).unwrap()
            })
    })
}

fn four_state_params() -> impl Strategy<Value = Params> {
    (-1.3f64..1.3, prop_oneof![0.2f64..2.0, -2.0f64..-0.2], 0.05f64..0.5, 0.05f64..0.5, any::<bool>(), -0.5f64..0.5)
        .prop_filter("away from b2", |(b, ..)| (b - 0.4).abs() > 0.02)
        .prop_map(|(b, e, g, gamma, interference, e2)| {
            Params::new()
                .with("b", b)
                .with("e", e)
                .with("e2", e2)
                .with("g", g)
                .with("gamma", gamma)
                .with_label("phase", if interference { "interference" } else { "plain" })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hamiltonian_is_hermitian(model in random_model(), t in -10.0f64..10.0) {
        let h = model.hamiltonian_at(t);
        let m = h.as_matrix();
        prop_assert_eq!(m.clone(), m.adjoint());
    }

    #[test]
    fn crossing_times_are_roots(model in random_model()) {
        for ev in find_crossings(&model) {
            let scale = 1.0f64.max(ev.time.abs()).max(ev.energy.abs());
            for &l in &ev.levels {
                prop_assert!((model.energy(l, ev.time) - ev.energy).abs() < 1e-10 * scale);
            }
        }
    }

    #[test]
    fn loop_area_reversal_negates(model in random_model()) {
        let graph = build_level_graph(&model);
        for c in &graph.cycles {
            let a = loop_area(&model, c).unwrap();
            prop_assert_eq!(loop_area(&model, &c.reversed()).unwrap(), -a);
        }
    }

    #[test]
    fn loop_area_is_additive(model in random_model()) {
        let graph = build_level_graph(&model);
        let cycles = &graph.cycles;
        for i in 0..cycles.len() {
            for j in i + 1..cycles.len() {
                let (ci, cj) = (&cycles[i], &cycles[j]);
                let (u, v) = (ci.edges[0].from, cj.edges[0].from);
                let Some(link) = graph.tree_path(u, v) else { continue };
                let back: Vec<CycleEdge> = link.iter().rev().map(|e| e.reversed()).collect();
                // ci, walk to v, cj, walk back
                let mut edges = ci.edges.clone();
                edges.extend(link.iter().copied());
                edges.extend(cj.edges.iter().copied());
                edges.extend(back);
                let joined = Cycle { edges };
                let sum = loop_area(&model, ci).unwrap() + loop_area(&model, cj).unwrap();
                let scale = 1.0 + loop_area(&model, ci).unwrap().abs() + loop_area(&model, cj).unwrap().abs();
                prop_assert!((loop_area(&model, &joined).unwrap() - sum).abs() < 1e-9 * scale);
            }
        }
    }

    #[test]
    fn ic1_verdicts_agree(model in random_model()) {
        let r = check_ic1(&model);
        let small = r.areas.iter().all(|a| a.abs() < r.tolerance);
        prop_assert_eq!(r.holds, small);
        prop_assert_eq!(r.holds, r.action_consistent);
    }

    #[test]
    fn areas_invariant_under_gauge(model in random_model(), tau in -2.0f64..2.0, c in -1.0f64..1.0) {
        let base = check_ic1(&model);
        for gauge in [GaugeSpec::TimeShift(tau), GaugeSpec::CommonSlope(c), GaugeSpec::CommonOffset(c)] {
            let other = check_ic1(&model.apply_gauge(&gauge).unwrap());
            prop_assert_eq!(other.areas.len(), base.areas.len());
            let mut a: Vec<f64> = base.areas.iter().map(|x| x.abs()).collect();
            let mut b: Vec<f64> = other.areas.iter().map(|x| x.abs()).collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-8 * (1.0 + x.abs()), "{gauge:?}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn projected_connectivity_symmetric(model in random_model()) {
        for ev in find_crossings(&model).iter().filter(|e| e.levels.len() >= 2) {
            for a in 0..ev.levels.len() {
                for b in a + 1..ev.levels.len() {
                    let (i, j) = (ev.levels[a], ev.levels[b]);
                    prop_assert_eq!(projected_connectivity(&model, ev, (i, j)), projected_connectivity(&model, ev, (j, i)));
                }
            }
        }
    }

    #[test]
    fn projected_connectivity_monotone(model in random_model(), extra in 0.1f64..0.5) {
        let full: Vec<(usize, usize, f64)> = (0..model.n_levels())
            .flat_map(|i| (i + 1..model.n_levels()).map(move |j| (i, j)))
            .filter(|&(i, j)| model.slopes()[i] != model.slopes()[j])
            .map(|(i, j)| {
                let g = model.coupling(i, j);
                (i, j, if g == 0.0 { extra } else { g })
            })
            .collect();
        let denser = DiabaticModel::new(model.slopes().to_vec(), model.offsets().to_vec(), full).unwrap();
        for ev in find_crossings(&model) {
            for a in 0..ev.levels.len() {
                for b in a + 1..ev.levels.len() {
                    let pair = (ev.levels[a], ev.levels[b]);
                    if projected_connectivity(&model, &ev, pair) {
                        prop_assert!(projected_connectivity(&denser, &ev, pair));
                    }
                }
            }
        }
    }

    #[test]
    fn ansatz_rows_and_columns_sum_to_one((beta, e, g) in do_model()) {
        let model = make_do(beta, &e, &g);
        let p = ansatz_probabilities(&model).unwrap();
        prop_assert!(p.stochasticity_defect() < 1e-12);
        let s = ansatz_scattering(&model).unwrap();
        prop_assert!(s.unitarity_defect() < 1e-12);
        // no interference in a single-band model: both modes agree
        prop_assert!(!has_interference(&model));
        prop_assert!(s.probabilities().max_abs_diff(&p) < 1e-12);
    }

    #[test]
    fn path_sum_equals_matrix_product((beta, e, g) in do_model()) {
        let model = make_do(beta, &e, &g);
        let s = ansatz_scattering(&model).unwrap();
        let n = model.n_levels();
        for a in 0..n {
            for b in 0..n {
                let sum: num_complex::Complex64 = enumerate_paths(&model, a, b).unwrap().iter().map(|p| p.amplitude()).sum();
                prop_assert!((sum - s.get(b, a)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn do_engine_matches_closed_form((beta, e, g) in do_model()) {
        let model = make_do(beta, &e, &g);
        let closed = do_amplitudes_chronological(beta, &e, &g).unwrap();
        let engine = ansatz_scattering(&model).unwrap();
        prop_assert!(closed.max_abs_diff(&engine) < 1e-12);
    }

    #[test]
    fn permutation_gauge_permutes_probabilities((beta, e, g) in do_model(), seed in any::<u64>()) {
        let model = make_do(beta, &e, &g);
        let n = model.n_levels();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let relabeled = model.apply_gauge(&GaugeSpec::Relabel(perm.clone())).unwrap();
        let p = ansatz_probabilities(&model).unwrap().permuted(&perm);
        prop_assert!(ansatz_probabilities(&relabeled).unwrap().max_abs_diff(&p) < 1e-12);
    }

    #[test]
    fn determinant_probabilities_conserve((beta, e, g) in do_model(), m in 1usize..3) {
        let spec = SecondQuantizedSpec::fermion(beta, e.clone(), g.clone(), 0.0);
        let n = e.len() + 1;
        prop_assume!(m < n);
        let sector = enumerate_basis(&spec, m).unwrap();
        let s = do_amplitudes_chronological(beta, &e, &g).unwrap();
        for init in &sector.basis {
            let total: f64 = sector.basis.iter().map(|f| fermion_transition_det(&s, init, f).unwrap()).sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
            for site in 0..n {
                let occ: f64 = sector.basis.iter().filter(|f| f.contains(&site)).map(|f| fermion_transition_det(&s, init, f).unwrap()).sum();
                prop_assert!((occ - site_occupation(&s, init, site)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn bowtie_blocks_unitary(g1 in -1.0f64..1.0, g2 in -1.0f64..1.0, far in 0.2f64..3.0, near in 0.2f64..3.0) {
        prop_assume!(g1.abs() > 1e-3 && g2.abs() > 1e-3 && (far - near).abs() > 1e-3);
        let (f, nr) = if far > near { (far, near) } else { (near, far) };
        let b = block_bowtie3(g1, g2, BowtiePattern::OneSided { far: f, near: nr }).unwrap();
        let s = AmplitudeMatrix(b.s.clone().unwrap());
        prop_assert!(s.unitarity_defect() < 1e-12);
        let pm = ProbabilityMatrix(b.p.clone());
        prop_assert!(pm.stochasticity_defect() < 1e-12);
        let st = block_bowtie3(g1, g2, BowtiePattern::Straddle { low: far, high: near }).unwrap();
        prop_assert!(ProbabilityMatrix(st.p).stochasticity_defect() < 1e-12);
    }

    #[test]
    fn analytic_matrices_stochastic(p in four_state_params()) {
        if let Ok(m) = analytic_probabilities("four-state", &p) {
            prop_assert!(m.stochasticity_defect() < 1e-12);
        }
    }

    #[test]
    fn six_state_matrices_stochastic(p1 in 0.0f64..1.0, p2 in 0.0f64..1.0, p3 in 0.0f64..1.0) {
        prop_assert!(six_state_below([p1, p2, p3]).stochasticity_defect() < 1e-12);
        prop_assert!(six_state_above([p1, p2, p3]).stochasticity_defect() < 1e-12);
        prop_assert!(distorted_bosonic6_matrix(p1, p2).stochasticity_defect() < 1e-12);
        prop_assert!(interference6_matrix(p1, p2).stochasticity_defect() < 1e-12);
        prop_assert!(four_state_plain(p1, p2).stochasticity_defect() < 1e-12);
        prop_assert!(four_state_interference_low_b(p1, p2).stochasticity_defect() < 1e-12);
        prop_assert!(four_state_interference_high_b(p1, p2).stochasticity_defect() < 1e-12);
    }

    #[test]
    fn four_state_constraints_hold(p in four_state_params()) {
        let model = make_model("four-state", &p).unwrap();
        prop_assert!(check_ic1(&model).holds);
        let a = analytic_probabilities("four-state", &p).unwrap();
        prop_assert!(a.max_abs_diff(&ansatz_probabilities(&model).unwrap()) < 1e-12);
    }

    #[test]
    fn params_display_round_trips(vals in prop::collection::btree_map("[a-z][a-z0-9]{0,4}", -1e3f64..1e3, 0..6)) {
        let mut p = Params::new();
        for (k, v) in &vals {
            p.set(k, *v);
        }
        let text = p.to_string();
        let back = Params::parse(&[text.as_str()]).unwrap();
        prop_assert_eq!(back, p);
    }
}

fn make_do(beta: f64, e: &[f64], g: &[f64]) -> DiabaticModel {
    let spec = SecondQuantizedSpec::fermion(beta, e.to_vec(), g.to_vec(), 0.0);
    build_sector_model(&spec, 1).unwrap()
}
