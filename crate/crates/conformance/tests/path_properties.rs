use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rppm_conformance::generate;
use rppm_conformance::oracle::Oracle;
use rppm_core::matcher::{EvalMetrics, PathAutomaton};
use rppm_core::path::simplify;
use rppm_core::{PathCondition, PathLabel, SystemGraph};

fn instance(seed: u64, nodes: usize, depth: usize) -> (SystemGraph, PathCondition) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = generate::graph(&mut rng, nodes, true);
    let pc = generate::path(&mut rng, depth, &generate::path_labels(true));
    (g, pc)
}

fn names(g: &SystemGraph) -> Vec<String> {
    g.nodes().map(|(n, _)| n.to_owned()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn targets_agree_with_satisfies(seed in any::<u64>()) {
        let (g, pc) = instance(seed, 8, 4);
        let a = PathAutomaton::compile(&simplify(&pc));
        for u in names(&g) {
            let uid = g.node_id(&u).unwrap();
            let targets = a.targets(&g, uid, &mut EvalMetrics::default());
            let mut sorted = targets.clone();
            sorted.sort();
            sorted.dedup();
            prop_assert_eq!(&sorted, &targets);
            for v in names(&g) {
                let vid = g.node_id(&v).unwrap();
                let sat = a.satisfies(&g, uid, vid, &mut EvalMetrics::default());
                prop_assert_eq!(sat, targets.contains(&vid), "{} ({}, {})", pc, u, v);
            }
        }
    }

    #[test]
    fn reversal_swaps_endpoints(seed in any::<u64>()) {
        let (g, pc) = instance(seed, 6, 4);
        let forward = PathAutomaton::compile(&simplify(&pc));
        let backward = PathAutomaton::compile(&simplify(&PathCondition::reverse(pc.clone())));
        for u in names(&g) {
            for v in names(&g) {
                let (uid, vid) = (g.node_id(&u).unwrap(), g.node_id(&v).unwrap());
                prop_assert_eq!(
                    forward.satisfies(&g, uid, vid, &mut EvalMetrics::default()),
                    backward.satisfies(&g, vid, uid, &mut EvalMetrics::default()),
                    "{} ({}, {})", pc, u, v
                );
            }
        }
    }

    #[test]
    fn double_reversal_is_identity(seed in any::<u64>()) {
        let (_, pc) = instance(seed, 1, 5);
        let twice = PathCondition::reverse(PathCondition::reverse(pc.clone()));
        prop_assert_eq!(simplify(&twice), simplify(&pc));
    }

    #[test]
    fn symmetric_labels_read_both_ways(seed in any::<u64>()) {
        let (g, _) = instance(seed, 6, 1);
        let c = PathCondition::Edge(PathLabel::rel("c"));
        let oracle = Oracle::new(&g);
        let a = PathAutomaton::compile(&simplify(&c));
        for u in names(&g) {
            for v in names(&g) {
                let (uid, vid) = (g.node_id(&u).unwrap(), g.node_id(&v).unwrap());
                let there = a.satisfies(&g, uid, vid, &mut EvalMetrics::default());
                let back = a.satisfies(&g, vid, uid, &mut EvalMetrics::default());
                prop_assert_eq!(there, back);
                prop_assert_eq!(there, oracle.satisfies(&u, &v, &c));
            }
        }
    }

    #[test]
    fn simplified_conditions_are_simple(seed in any::<u64>()) {
        let (_, pc) = instance(seed, 1, 6);
        let s = simplify(&pc);
        prop_assert!(s.as_condition().is_simple(), "{} -> {}", pc, s);
        prop_assert!(s.as_condition().edge_count() <= pc.edge_count());
    }

    #[test]
    fn diamond_is_a_unit(seed in any::<u64>()) {
        let (g, pc) = instance(seed, 6, 3);
        let padded = PathCondition::concat(
            PathCondition::Diamond,
            PathCondition::concat(pc.clone(), PathCondition::Diamond),
        );
        let oracle = Oracle::new(&g);
        prop_assert_eq!(oracle.relation(&pc), oracle.relation(simplify(&padded).as_condition()));
    }
}

#[test]
fn caching_edges_are_invisible_to_matching() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let mut g = generate::graph(&mut rng, 5, false);
        let pc = generate::path(&mut rng, 4, &generate::path_labels(false));
        let a = PathAutomaton::compile(&simplify(&pc));
        let before: Vec<_> = names(&g)
            .iter()
            .map(|u| a.targets(&g, g.node_id(u).unwrap(), &mut EvalMetrics::default()))
            .collect();
        for u in names(&g) {
            for v in names(&g) {
                g.add_edge_unchecked(&u, &v, rppm_core::EdgeLabel::Principals(vec!["p".into()]))
                    .ok();
            }
        }
        let after: Vec<_> = names(&g)
            .iter()
            .map(|u| a.targets(&g, g.node_id(u).unwrap(), &mut EvalMetrics::default()))
            .collect();
        assert_eq!(before, after, "{pc}");
    }
}
