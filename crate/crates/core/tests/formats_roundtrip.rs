use proptest::prelude::*;
use rppm_core::audit::ChineseWallConfig;
use rppm_core::cache::{CacheConfig, Invalidation};
use rppm_core::formats::{
    parse_config, parse_graph, parse_model, parse_policy, serialize_config, serialize_graph,
    serialize_model, serialize_policy,
};
use rppm_core::path::simplify;
use rppm_core::policy::{
    AuthorizationRule, ConflictResolution, MatchStrategy, PolicySet, PrincipalMatchingRule, Target,
};
use rppm_core::{
    Decision, EdgeLabel, EngineConfig, PathCondition, PathLabel, SystemGraph, SystemModel,
};

const TYPES: [&str; 3] = ["t0", "t1", "t2"];
const LABELS: [&str; 3] = ["l0", "l1", "l2"];

fn arb_model() -> impl Strategy<Value = SystemModel> {
    (
        prop::collection::vec(any::<bool>(), 3),
        prop::collection::vec((0..3usize, 0..3usize, 0..3usize), 0..8),
    )
        .prop_map(|(symmetric, perms)| {
            let mut m = SystemModel::new();
            for t in TYPES {
                m.add_type(t);
            }
            for (l, sym) in LABELS.iter().zip(symmetric) {
                m.add_label(*l, sym);
            }
            for (s, l, d) in perms {
                m.add_permissible(TYPES[s], LABELS[l], TYPES[d]).unwrap();
            }
            m
        })
}

#[derive(Debug, Clone)]
enum Overlay {
    Cached(Vec<usize>),
    Decision(bool, usize),
    Interest(bool),
}

fn arb_graph() -> impl Strategy<Value = SystemGraph> {
    (
        arb_model(),
        prop::collection::vec(0..3usize, 1..6),
        prop::collection::vec((0..6usize, 0..6usize, 0..3usize), 0..12),
        prop::collection::vec(
            (
                0..6usize,
                0..6usize,
                prop_oneof![
                    prop::collection::vec(0..4usize, 0..3).prop_map(Overlay::Cached),
                    (any::<bool>(), 0..3usize).prop_map(|(a, i)| Overlay::Decision(a, i)),
                    any::<bool>().prop_map(Overlay::Interest),
                ],
            ),
            0..10,
        ),
    )
        .prop_map(|(model, node_types, edges, overlay)| {
            let mut g = SystemGraph::new(model);
            let n = node_types.len();
            for (i, t) in node_types.iter().enumerate() {
                g.add_node(&format!("n{i}"), TYPES[*t]).unwrap();
            }
            for (s, d, l) in edges {
                let _ = g.add_edge(
                    &format!("n{}", s % n),
                    &format!("n{}", d % n),
                    EdgeLabel::rel(LABELS[l]),
                );
            }
            for (s, d, o) in overlay {
                let label = match o {
                    Overlay::Cached(ps) => {
                        EdgeLabel::Principals(ps.iter().map(|p| format!("p{p}")).collect())
                    }
                    Overlay::Decision(true, a) => EdgeLabel::AllowAudit(format!("a{a}")),
                    Overlay::Decision(false, a) => EdgeLabel::DenyAudit(format!("a{a}")),
                    Overlay::Interest(true) => EdgeLabel::ActiveInterest,
                    Overlay::Interest(false) => EdgeLabel::BlockedInterest,
                };
                g.add_edge_unchecked(&format!("n{}", s % n), &format!("n{}", d % n), label)
                    .unwrap();
            }
            g
        })
}

fn arb_path() -> impl Strategy<Value = PathCondition> {
    let label = prop_oneof![
        4 => prop::sample::select(LABELS.to_vec()).prop_map(PathLabel::rel),
        1 => prop::sample::select(vec!["a0", "read"]).prop_map(|a| PathLabel::Allow(a.into())),
        1 => prop::sample::select(vec!["a0", "read"]).prop_map(|a| PathLabel::Deny(a.into())),
        1 => Just(PathLabel::Active),
        1 => Just(PathLabel::Blocked),
    ];
    let leaf = prop_oneof![
        1 => Just(PathCondition::Diamond),
        3 => label.clone().prop_map(PathCondition::Edge),
        2 => label.prop_map(PathCondition::ReversedEdge),
    ];
    leaf.prop_recursive(4, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| PathCondition::concat(a, b)),
            inner.clone().prop_map(PathCondition::plus),
            inner.prop_map(PathCondition::reverse),
        ]
    })
}

fn arb_target(names: &'static [&'static str]) -> impl Strategy<Value = Target> {
    prop_oneof![
        Just(Target::Any),
        prop::sample::select(names.to_vec()).prop_map(Target::exact)
    ]
}

fn arb_policy() -> impl Strategy<Value = PolicySet> {
    (
        prop::collection::vec((arb_path(), 0..4usize), 0..5),
        prop::option::of(0..4usize),
        prop::collection::vec(
            (
                0..4usize,
                arb_target(&["o", "n1"]),
                arb_target(&["read", "a0"]),
                any::<bool>(),
            ),
            0..5,
        ),
    )
        .prop_map(|(pm, default, auth)| {
            let mut rules: Vec<PrincipalMatchingRule> = pm
                .into_iter()
                .map(|(pc, p)| PrincipalMatchingRule::new(pc, format!("p{p}")))
                .collect();
            if let Some(p) = default {
                rules.push(PrincipalMatchingRule::default_rule(format!("p{p}")));
            }
            let auth = auth
                .into_iter()
                .map(|(p, o, a, allow)| {
                    let d = if allow {
                        Decision::Allow
                    } else {
                        Decision::Deny
                    };
                    AuthorizationRule::new(format!("p{p}"), o, a, d)
                })
                .collect();
            PolicySet::new(rules, auth)
        })
}

fn arb_config() -> impl Strategy<Value = EngineConfig> {
    (
        (any::<bool>(), 0..3usize, any::<bool>()),
        (any::<bool>(), any::<bool>(), any::<bool>()),
        (
            prop::option::of(1..50usize),
            prop::option::of(1..5usize),
            prop::option::of(1..100u64),
            0..10usize,
        ),
        (
            any::<bool>(),
            prop::collection::vec(arb_path(), 0..3),
            prop::sample::select(LABELS.to_vec()),
        ),
    )
        .prop_map(|(strategies, flags, limits, cw)| {
            let (first, crs, allow) = strategies;
            let (enabled, write_on_eval, scoped) = flags;
            let (max_total, max_out_degree, retirement_age, recent_subjects) = limits;
            let (cw_enabled, paths, label) = cw;
            EngineConfig {
                pms: if first {
                    MatchStrategy::FirstMatch
                } else {
                    MatchStrategy::AllMatch
                },
                crs: [
                    ConflictResolution::DenyOverride,
                    ConflictResolution::AllowOverride,
                    ConflictResolution::FirstMatch,
                ][crs],
                default_decision: if allow {
                    Decision::Allow
                } else {
                    Decision::Deny
                },
                cache: CacheConfig {
                    enabled,
                    write_on_eval,
                    invalidation: if scoped {
                        Invalidation::ScopedBySubject
                    } else {
                        Invalidation::FlushAll
                    },
                    max_total,
                    max_out_degree,
                    retirement_age,
                    recent_subjects,
                },
                cw: ChineseWallConfig {
                    enabled: cw_enabled,
                    paths: paths.iter().map(simplify).collect(),
                    membership_label: label.to_owned(),
                },
            }
        })
}

proptest! {
    #[test]
    fn model_round_trip(model in arb_model()) {
        let text = serialize_model(&model);
        let parsed = parse_model(&text).unwrap();
        prop_assert_eq!(&parsed, &model);
        prop_assert_eq!(serialize_model(&parsed), text);
    }

    #[test]
    fn graph_round_trip(graph in arb_graph()) {
        let text = serialize_graph(&graph, true);
        let parsed = parse_graph(&text, graph.model().clone()).unwrap();
        prop_assert_eq!(parsed.edges(), graph.edges());
        prop_assert_eq!(&parsed, &graph);
        prop_assert_eq!(serialize_graph(&parsed, true), text);
    }

    #[test]
    fn graph_without_overlay_keeps_relationships(graph in arb_graph()) {
        let parsed = parse_graph(&serialize_graph(&graph, false), graph.model().clone()).unwrap();
        prop_assert_eq!(
            parsed.edges_of_kind(rppm_core::EdgeKind::Relationship),
            graph.edges_of_kind(rppm_core::EdgeKind::Relationship)
        );
        prop_assert_eq!(parsed.edges().len(), parsed.edges_of_kind(rppm_core::EdgeKind::Relationship).len());
    }

    #[test]
    fn policy_round_trip(policy in arb_policy()) {
        let text = serialize_policy(&policy);
        let parsed = parse_policy(&text).unwrap();
        prop_assert_eq!(&parsed, &policy);
        prop_assert_eq!(serialize_policy(&parsed), text);
    }

    #[test]
    fn config_round_trip(config in arb_config()) {
        let text = serialize_config(&config);
        let parsed = parse_config(&text).unwrap();
        prop_assert_eq!(&parsed, &config);
        prop_assert_eq!(serialize_config(&parsed), text);
    }
}
