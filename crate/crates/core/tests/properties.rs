use proptest::prelude::*;

use limid_rjt::generators::random_strategy;
use limid_rjt::inference::{joint_marginal, oracle_score};
use limid_rjt::io::{diagram_from_json, diagram_to_json};
use limid_rjt::mip::Family;
use limid_rjt::prelude::*;
use limid_rjt::solve::{lp_names, propagate};

fn diagram(seed: u64) -> InfluenceDiagram {
    random_diagram(seed, &RandomDiagramSpec::default())
}

fn tree(d: &InfluenceDiagram) -> RootedJunctionTree {
    build_rjt(d, &d.topological_order().unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn built_trees_are_valid(seed in any::<u64>()) {
        let d = diagram(seed);
        let t = tree(&d);
        prop_assert!(validate_rjt(&t, &d).is_empty());
        prop_assert_eq!(t.len(), d.len());
    }

    #[test]
    fn modified_trees_are_valid_and_gather_targets(seed in any::<u64>(), picks in prop::collection::vec(any::<prop::sample::Index>(), 1..5)) {
        let d = diagram(seed);
        let t = tree(&d);
        let mut targets: Vec<NodeId> = picks.iter().map(|i| NodeId::from_index(i.index(d.len()))).collect();
        targets.sort();
        targets.dedup();
        let out = modify_rjt(&t, &d, &targets).unwrap();
        prop_assert!(validate_rjt(&out, &d).is_empty());
        let m = *targets.iter().max_by_key(|&&j| t.rank(j)).unwrap();
        for &j in &targets {
            prop_assert!(out.cluster(m).contains(j));
        }
        // Only membership and arcs change; every cluster keeps its old members.
        for c in t.clusters() {
            for &x in &c.members {
                prop_assert!(out.cluster(c.root).contains(x));
            }
        }
    }

    #[test]
    fn merging_keeps_the_distribution(seed in any::<u64>(), s_seed in any::<u64>()) {
        let d = diagram(seed);
        let s = random_strategy(&d, s_seed);
        let (m, _) = merge_value_nodes(&d).unwrap();
        let a = evaluate_strategy(&d, &s).unwrap();
        let b = evaluate_strategy(&m, &s.for_diagram(&m).unwrap()).unwrap();
        prop_assert_eq!(a.atoms().len(), b.atoms().len());
        for (x, y) in a.atoms().iter().zip(b.atoms()) {
            prop_assert!((x.0 - y.0).abs() <= 1e-12 && (x.1 - y.1).abs() <= 1e-12, "{:?} vs {:?}", x, y);
        }
    }

    #[test]
    fn propagated_mu_equals_marginals(seed in any::<u64>(), s_seed in any::<u64>()) {
        let d = diagram(seed);
        let t = tree(&d);
        let model = build_base_model(&d, &t).unwrap();
        let s = random_strategy(&d, s_seed);
        let values = propagate(&model, &d, &t, &s).unwrap();
        for c in t.clusters() {
            let want = joint_marginal(&d, &s, &c.members).unwrap();
            let block = model.catalog().mu(c.root);
            for (cfg, w) in want.iter().enumerate() {
                prop_assert!((values[block.var(cfg).index()] - w).abs() <= 1e-9);
            }
        }
        prop_assert!(model.violations(&values, 1e-9).is_empty());
        let eu = expected_utility(&d, &s).unwrap();
        prop_assert!((model.objective_value(&values) - eu).abs() <= 1e-9 * eu.abs().max(1.0));
    }

    #[test]
    fn reference_matches_oracle(seed in 0u64..5000) {
        let d = random_diagram(seed, &RandomDiagramSpec { max_nodes: 7, ..Default::default() });
        prop_assume!(d.strategy_count() <= 1 << 12);
        let t = tree(&d);
        let model = build_base_model(&d, &t).unwrap();
        let sol = solve_reference(&model, &d, &t).unwrap();
        let o = oracle_optimize(&d, &Objective::Meu, &[]).unwrap();
        let o = o.optimal().unwrap();
        prop_assert!((sol.objective.unwrap() - o.objective).abs() <= 1e-9 * o.objective.abs().max(1.0));
        prop_assert_eq!(&sol.optimal_set, &o.optimal_set);
        let (score, feasible) = oracle_score(&d, &decode(&sol, &model, &d).unwrap().strategy, &Objective::Meu, &[]).unwrap();
        prop_assert!(feasible && (score - o.objective).abs() <= 1e-9 * o.objective.abs().max(1.0));
    }

    #[test]
    fn lp_export_is_complete(seed in any::<u64>()) {
        let d = diagram(seed);
        let model = build_base_model(&d, &tree(&d)).unwrap();
        let lp = export_lp(&model);
        prop_assert_eq!(lp.matches("\n r").count(), model.constraints().len());
        prop_assert!(lp.lines().all(|l| l.len() <= 100));
        let names = lp_names(&model);
        prop_assert!(names.iter().all(|n| n.len() <= 255 && !n.starts_with(|c: char| c.is_ascii_digit())));
        let rows: usize = model.constraints().iter().filter(|c| c.family == Family::Normalization).count();
        prop_assert_eq!(rows, d.len());
    }

    #[test]
    fn json_round_trip(seed in any::<u64>()) {
        let d = diagram(seed);
        prop_assert_eq!(diagram_from_json(&diagram_to_json(&d)).unwrap(), d);
    }

    #[test]
    fn seeded_generators_are_reproducible(seed in any::<u64>(), n in 1usize..4) {
        prop_assert_eq!(pig_farm(&PigFarmSpec::with_periods(n).seeded(seed)), pig_farm(&PigFarmSpec::with_periods(n).seeded(seed)));
        prop_assert_eq!(n_monitoring(&NMonitoringSpec::new(n, seed)), n_monitoring(&NMonitoringSpec::new(n, seed)));
        prop_assert!(pig_farm(&PigFarmSpec::with_periods(n).seeded(seed)).validate().is_empty());
        prop_assert!(n_monitoring(&NMonitoringSpec::new(n, seed)).validate().is_empty());
    }

    #[test]
    fn cvar_is_monotone_in_alpha(seed in any::<u64>(), s_seed in any::<u64>(), a in 0.01f64..1.0, b in 0.01f64..1.0) {
        let d = diagram(seed);
        let dist = evaluate_strategy(&d, &random_strategy(&d, s_seed)).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let c_lo = cvar_of_distribution(&dist, lo).unwrap().1;
        let c_hi = cvar_of_distribution(&dist, hi).unwrap().1;
        prop_assert!(c_lo <= c_hi + 1e-9);
        prop_assert!(c_hi <= dist.expected() + 1e-9);
        prop_assert!((cvar_of_distribution(&dist, 1.0).unwrap().1 - dist.expected()).abs() <= 1e-9);
    }
}
