use proptest::prelude::*;
use rppm_core::graph::validate_graph;
use rppm_core::{EdgeKind, EdgeLabel, SystemGraph, SystemModel};

fn model() -> SystemModel {
    let mut m = SystemModel::new();
    m.add_type("a");
    m.add_type("b");
    m.add_label("r", false);
    m.add_label("f", true);
    m.add_permissible("a", "r", "b").unwrap();
    m.add_permissible("a", "f", "a").unwrap();
    m
}

fn base(n: usize) -> SystemGraph {
    let mut g = SystemGraph::new(model());
    for i in 0..n {
        g.add_node(&format!("v{i}"), if i % 2 == 0 { "a" } else { "b" })
            .unwrap();
    }
    g
}

fn label(i: usize) -> EdgeLabel {
    match i % 7 {
        0 => EdgeLabel::rel("r"),
        1 => EdgeLabel::rel("f"),
        2 => EdgeLabel::rel("zz"),
        3 => EdgeLabel::Principals(vec!["p".into()]),
        4 => EdgeLabel::AllowAudit("x".into()),
        5 => EdgeLabel::DenyAudit("x".into()),
        _ => EdgeLabel::BlockedInterest,
    }
}

#[derive(Debug, Clone)]
enum Op {
    Add(usize, usize, usize),
    Remove(usize, usize, usize),
}

fn ops() -> impl Strategy<Value = Vec<Op>> {
    prop::collection::vec(
        prop_oneof![
            3 => (0..6usize, 0..6usize, 0..7usize).prop_map(|(s, d, l)| Op::Add(s, d, l)),
            1 => (0..6usize, 0..6usize, 0..7usize).prop_map(|(s, d, l)| Op::Remove(s, d, l)),
        ],
        0..40,
    )
}

proptest! {
    #[test]
    fn revision_moves_exactly_on_change(ops in ops()) {
        let mut g = base(6);
        for op in ops {
            let before = g.revision();
            let changed = match op {
                Op::Add(s, d, l) => g.add_edge(&format!("v{s}"), &format!("v{d}"), label(l)).unwrap_or(false),
                Op::Remove(s, d, l) => g.remove_edge(&format!("v{s}"), &format!("v{d}"), &label(l)).unwrap(),
            };
            if changed {
                prop_assert!(g.revision() > before);
            } else {
                prop_assert_eq!(g.revision(), before);
            }
        }
    }

    #[test]
    fn accepted_graphs_only_hold_permissible_edges(ops in ops()) {
        let mut g = base(6);
        for op in ops {
            if let Op::Add(s, d, l) = op {
                let _ = g.add_edge(&format!("v{s}"), &format!("v{d}"), label(l));
            }
        }
        prop_assert!(validate_graph(g.model(), &g).is_empty());
        for e in g.edges_of_kind(EdgeKind::Relationship) {
            let EdgeLabel::Rel(r) = &e.label else { unreachable!() };
            let (ts, td) = (g.node_type(&e.src).unwrap(), g.node_type(&e.dst).unwrap());
            let listed = g.model().permissible().any(|(a, l, b)| {
                l == r && ((a, b) == (ts, td) || (g.model().is_symmetric(r) && (a, b) == (td, ts)))
            });
            prop_assert!(listed, "{e} is not permissible");
        }
    }

    #[test]
    fn adding_twice_equals_adding_once(ops in ops(), extra in (0..6usize, 0..6usize, 0..7usize)) {
        let mut g = base(6);
        for op in ops {
            if let Op::Add(s, d, l) = op {
                let _ = g.add_edge_unchecked(&format!("v{s}"), &format!("v{d}"), label(l));
            }
        }
        let (s, d, l) = extra;
        let (s, d) = (format!("v{s}"), format!("v{d}"));
        g.add_edge_unchecked(&s, &d, label(l)).unwrap();
        let once = g.edges();
        prop_assert!(!g.add_edge_unchecked(&s, &d, label(l)).unwrap());
        prop_assert_eq!(g.edges(), once);
    }

    #[test]
    fn kind_filters_never_leak(ops in ops()) {
        let mut g = base(6);
        for op in ops {
            if let Op::Add(s, d, l) = op {
                let _ = g.add_edge_unchecked(&format!("v{s}"), &format!("v{d}"), label(l));
            }
        }
        for kind in EdgeKind::ALL {
            prop_assert!(g.edges_of_kind(kind).iter().all(|e| e.kind() == kind));
            for i in 0..6 {
                let v = format!("v{i}");
                prop_assert!(g.edges_from(&v, Some(kind)).unwrap().iter().all(|e| e.kind() == kind));
                for j in 0..6 {
                    let w = format!("v{j}");
                    prop_assert!(g.edges_between(&v, &w, Some(kind)).unwrap().iter().all(|e| e.kind() == kind));
                }
            }
        }
    }

    #[test]
    fn symmetric_edges_are_seen_from_both_ends(s in 0..3usize, d in 0..3usize) {
        let mut g = base(6);
        let (s, d) = (format!("v{}", 2 * s), format!("v{}", 2 * d));
        g.add_edge(&s, &d, EdgeLabel::rel("f")).unwrap();
        for (u, w) in [(&s, &d), (&d, &s)] {
            let found = g.edges_from(u, Some(EdgeKind::Relationship)).unwrap();
            prop_assert!(found.iter().any(|e| e.dst == *w && e.label == EdgeLabel::rel("f")));
        }
    }
}
