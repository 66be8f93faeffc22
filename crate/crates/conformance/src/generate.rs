//! Random graphs and path conditions.

use rand::seq::SliceRandom;
use rand::Rng;
use rppm_core::{EdgeLabel, PathCondition, PathLabel, SystemGraph, SystemModel};

/// Relationship labels of generated graphs; `c` is symmetric.
pub const LABELS: [&str; 3] = ["a", "b", "c"];
/// Action used by generated audit edges and audit edge conditions.
pub const ACTION: &str = "x";

pub fn model() -> SystemModel {
    let mut m = SystemModel::new();
    m.add_type("t");
    for l in LABELS {
        m.add_label(l, l == "c");
        m.add_permissible("t", l, "t").unwrap();
    }
    m
}

pub fn node(i: usize) -> String {
    format!("n{i}")
}

/// A graph with `1..=max_nodes` nodes over [`LABELS`]. With `overlay`, audit,
/// interest and caching edges are sprinkled in as well.
pub fn graph<R: Rng>(rng: &mut R, max_nodes: usize, overlay: bool) -> SystemGraph {
    let mut g = SystemGraph::new(model());
    let n = rng.gen_range(1..=max_nodes);
    for i in 0..n {
        g.add_node(&node(i), "t").unwrap();
    }
    let density = rng.gen_range(0.05..0.35);
    for s in 0..n {
        for d in 0..n {
            for l in LABELS {
                if rng.gen_bool(density) {
                    g.add_edge(&node(s), &node(d), EdgeLabel::rel(l)).unwrap();
                }
            }
        }
    }
    if overlay {
        for _ in 0..rng.gen_range(0..=n) {
            let (s, d) = (node(rng.gen_range(0..n)), node(rng.gen_range(0..n)));
            let label = match rng.gen_range(0..5) {
                0 => EdgeLabel::AllowAudit(ACTION.into()),
                1 => EdgeLabel::DenyAudit(ACTION.into()),
                2 => EdgeLabel::ActiveInterest,
                3 => EdgeLabel::BlockedInterest,
                _ => EdgeLabel::Principals(vec!["p".into()]),
            };
            g.add_edge_unchecked(&s, &d, label).unwrap();
        }
    }
    g
}

pub fn path_labels(overlay: bool) -> Vec<PathLabel> {
    let mut labels: Vec<PathLabel> = LABELS.iter().map(|l| PathLabel::rel(*l)).collect();
    if overlay {
        labels.extend([
            PathLabel::Allow(ACTION.into()),
            PathLabel::Deny(ACTION.into()),
            PathLabel::Active,
            PathLabel::Blocked,
        ]);
    }
    labels
}

/// A path condition whose syntax tree is at most `depth` levels deep.
pub fn path<R: Rng>(rng: &mut R, depth: usize, labels: &[PathLabel]) -> PathCondition {
    if depth <= 1 || rng.gen_bool(0.3) {
        let label = labels.choose(rng).unwrap().clone();
        return match rng.gen_range(0..10) {
            0 => PathCondition::Diamond,
            1..=5 => PathCondition::Edge(label),
            _ => PathCondition::ReversedEdge(label),
        };
    }
    match rng.gen_range(0..5) {
        0 | 1 => PathCondition::concat(path(rng, depth - 1, labels), path(rng, depth - 1, labels)),
        2 | 3 => PathCondition::plus(path(rng, depth - 1, labels)),
        _ => PathCondition::reverse(path(rng, depth - 1, labels)),
    }
}
