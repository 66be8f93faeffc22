//! Brute-force path satisfaction.
//!
//! Every path condition denotes a binary relation over the nodes of a graph.
//! This module builds that relation directly as a boolean matrix: edge
//! conditions read the edge list, concatenation is relational composition,
//! reversal is transposition and `+` is the transitive closure. It shares no
//! code with the engine's automaton matcher.

use std::collections::HashMap;

use rppm_core::{EdgeKind, EdgeLabel, PathCondition, PathLabel, SystemGraph};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    n: usize,
    bits: Vec<bool>,
}

impl Relation {
    fn empty(n: usize) -> Self {
        Self {
            n,
            bits: vec![false; n * n],
        }
    }

    fn identity(n: usize) -> Self {
        let mut r = Self::empty(n);
        for i in 0..n {
            r.set(i, i);
        }
        r
    }

    fn set(&mut self, i: usize, j: usize) {
        self.bits[i * self.n + j] = true;
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    fn transpose(&self) -> Self {
        let mut r = Self::empty(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                if self.get(i, j) {
                    r.set(j, i);
                }
            }
        }
        r
    }

    fn compose(&self, other: &Self) -> Self {
        let mut r = Self::empty(self.n);
        for i in 0..self.n {
            for k in 0..self.n {
                if !self.get(i, k) {
                    continue;
                }
                for j in 0..self.n {
                    if other.get(k, j) {
                        r.set(i, j);
                    }
                }
            }
        }
        r
    }

    /// Warshall's algorithm.
    fn closure(&self) -> Self {
        let mut r = self.clone();
        for k in 0..self.n {
            for i in 0..self.n {
                if !r.get(i, k) {
                    continue;
                }
                for j in 0..self.n {
                    if r.get(k, j) {
                        r.set(i, j);
                    }
                }
            }
        }
        r
    }
}

fn label_matches(cond: &PathLabel, label: &EdgeLabel) -> bool {
    match (cond, label) {
        (PathLabel::Rel(a), EdgeLabel::Rel(b)) => a == b,
        (PathLabel::Allow(a), EdgeLabel::AllowAudit(b)) => a == b,
        (PathLabel::Deny(a), EdgeLabel::DenyAudit(b)) => a == b,
        (PathLabel::Active, EdgeLabel::ActiveInterest) => true,
        (PathLabel::Blocked, EdgeLabel::BlockedInterest) => true,
        _ => false,
    }
}

/// The node relations of one graph.
pub struct Oracle<'g> {
    graph: &'g SystemGraph,
    index: HashMap<String, usize>,
}

impl<'g> Oracle<'g> {
    pub fn new(graph: &'g SystemGraph) -> Self {
        let index = graph
            .nodes()
            .enumerate()
            .map(|(i, (name, _))| (name.to_owned(), i))
            .collect();
        Self { graph, index }
    }

    pub fn index(&self, node: &str) -> usize {
        self.index[node]
    }

    fn edge_relation(&self, cond: &PathLabel) -> Relation {
        let mut r = Relation::empty(self.index.len());
        for e in self.graph.edges() {
            if e.kind() == EdgeKind::Caching || !label_matches(cond, &e.label) {
                continue;
            }
            let (s, d) = (self.index[&e.src], self.index[&e.dst]);
            r.set(s, d);
            if let EdgeLabel::Rel(name) = &e.label {
                if self.graph.model().is_symmetric(name) {
                    r.set(d, s);
                }
            }
        }
        r
    }

    pub fn relation(&self, pc: &PathCondition) -> Relation {
        let n = self.index.len();
        match pc {
            PathCondition::Diamond => Relation::identity(n),
            PathCondition::Edge(l) => self.edge_relation(l),
            PathCondition::ReversedEdge(l) => self.edge_relation(l).transpose(),
            PathCondition::Concat(a, b) => self.relation(a).compose(&self.relation(b)),
            PathCondition::Plus(a) => self.relation(a).closure(),
            PathCondition::Reverse(a) => self.relation(a).transpose(),
        }
    }

    pub fn satisfies(&self, u: &str, v: &str, pc: &PathCondition) -> bool {
        self.relation(pc).get(self.index[u], self.index[v])
    }
}

pub fn satisfies(graph: &SystemGraph, u: &str, v: &str, pc: &PathCondition) -> bool {
    Oracle::new(graph).satisfies(u, v, pc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rppm_core::SystemModel;

    #[test]
    fn chain_and_closure() {
        let mut m = SystemModel::new();
        m.add_type("t");
        m.add_label("r", false);
        m.add_permissible("t", "r", "t").unwrap();
        let mut g = SystemGraph::new(m);
        for v in ["a", "b", "c"] {
            g.add_node(v, "t").unwrap();
        }
        g.add_edge("a", "b", EdgeLabel::rel("r")).unwrap();
        g.add_edge("b", "c", EdgeLabel::rel("r")).unwrap();
        g.add_edge_unchecked("a", "c", EdgeLabel::Principals(vec![]))
            .unwrap();
        let o = Oracle::new(&g);
        assert!(o.satisfies("a", "c", &"r . r".parse().unwrap()));
        assert!(!o.satisfies("a", "c", &"r".parse().unwrap()));
        assert!(o.satisfies("a", "c", &"r+".parse().unwrap()));
        assert!(o.satisfies("c", "a", &"~(r+)".parse().unwrap()));
        assert!(o.satisfies("b", "b", &"<>".parse().unwrap()));
        assert!(!o.satisfies("a", "a", &"r+".parse().unwrap()));
    }
}
