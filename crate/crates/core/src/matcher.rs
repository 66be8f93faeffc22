//! Path-condition satisfaction over the system graph.
//!
//! A simple path condition is a regular expression over edge conditions
//! built from concatenation and one-or-more closure. It is compiled to a
//! position automaton (one state per edge-condition leaf plus an initial
//! state, no epsilon moves) and `G, u, v |= pc` is decided by breadth-first
//! search over the product of graph nodes and automaton states. The visited
//! set on product states bounds the search by `|V| * states` and guarantees
//! termination on cyclic graphs.

use std::collections::{HashSet, VecDeque};
use std::ops::AddAssign;

use crate::error::Result;
use crate::graph::{EdgeKind, NodeId, SystemGraph};
use crate::path::{PathCondition, PathLabel, SimplePath};

/// Traversal counters: product states dequeued (`n`) and adjacency entries
/// inspected, matching or not (`e`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalMetrics {
    pub nodes_visited: u64,
    pub edges_considered: u64,
}

impl AddAssign for EvalMetrics {
    fn add_assign(&mut self, rhs: Self) {
        self.nodes_visited += rhs.nodes_visited;
        self.edges_considered += rhs.edges_considered;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Step {
    label: PathLabel,
    backward: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathAutomaton {
    /// `steps[p - 1]` is the edge condition read on entering position `p`.
    steps: Vec<Step>,
    /// Successor positions of each state; state 0 is initial.
    succ: Vec<Vec<usize>>,
    accepting: Vec<bool>,
}

impl PathAutomaton {
    pub fn compile(pc: &SimplePath) -> Self {
        let mut automaton = PathAutomaton {
            steps: Vec::new(),
            succ: vec![Vec::new()],
            accepting: vec![false],
        };
        match pc.as_condition() {
            PathCondition::Diamond => automaton.accepting[0] = true,
            other => {
                let (first, last) = automaton.build(other);
                automaton.succ[0] = first;
                for p in last {
                    automaton.accepting[p] = true;
                }
            }
        }
        for s in &mut automaton.succ {
            s.sort_unstable();
            s.dedup();
        }
        automaton
    }

    /// Returns the `(first, last)` position sets of `pc`. Simple conditions
    /// never accept the empty path below the root, so neither set needs a
    /// nullability correction.
    fn build(&mut self, pc: &PathCondition) -> (Vec<usize>, Vec<usize>) {
        match pc {
            PathCondition::Edge(label) | PathCondition::ReversedEdge(label) => {
                self.steps.push(Step {
                    label: label.clone(),
                    backward: matches!(pc, PathCondition::ReversedEdge(_)),
                });
                self.succ.push(Vec::new());
                self.accepting.push(false);
                let p = self.steps.len();
                (vec![p], vec![p])
            }
            PathCondition::Concat(a, b) => {
                let (first_a, last_a) = self.build(a);
                let (first_b, last_b) = self.build(b);
                for &p in &last_a {
                    self.succ[p].extend_from_slice(&first_b);
                }
                (first_a, last_b)
            }
            PathCondition::Plus(a) => {
                let (first, last) = self.build(a);
                for &p in &last {
                    self.succ[p].extend_from_slice(&first);
                }
                (first, last)
            }
            PathCondition::Diamond | PathCondition::Reverse(_) => {
                unreachable!("not a simple path condition: {pc}")
            }
        }
    }

    /// Number of automaton states, including the initial one.
    pub fn state_count(&self) -> usize {
        self.steps.len() + 1
    }

    pub fn satisfies(
        &self,
        graph: &SystemGraph,
        u: NodeId,
        v: NodeId,
        metrics: &mut EvalMetrics,
    ) -> bool {
        if self.accepting[0] && u == v {
            return true;
        }
        let mut found = false;
        self.search(graph, u, metrics, |node| {
            found = node == v;
            found
        });
        found
    }

    /// Every node `x` with `G, u, x |= pc`, sorted by id.
    pub fn targets(
        &self,
        graph: &SystemGraph,
        u: NodeId,
        metrics: &mut EvalMetrics,
    ) -> Vec<NodeId> {
        let mut hits = Vec::new();
        if self.accepting[0] {
            hits.push(u);
        }
        self.search(graph, u, metrics, |node| {
            hits.push(node);
            false
        });
        hits.sort_unstable();
        hits.dedup();
        hits
    }

    /// Breadth-first product search from `(u, initial)`. `on_accept` is called
    /// for each accepting product state as it is discovered and may stop the
    /// search by returning `true`.
    fn search(
        &self,
        graph: &SystemGraph,
        u: NodeId,
        metrics: &mut EvalMetrics,
        mut on_accept: impl FnMut(NodeId) -> bool,
    ) {
        if self.steps.is_empty() {
            return;
        }
        let model = graph.model();
        let symmetric: Vec<bool> = self
            .steps
            .iter()
            .map(|s| matches!(&s.label, PathLabel::Rel(r) if model.is_symmetric(r)))
            .collect();

        let mut visited: HashSet<(NodeId, usize)> = HashSet::new();
        let mut queue = VecDeque::new();
        visited.insert((u, 0));
        queue.push_back((u, 0usize));

        while let Some((node, state)) = queue.pop_front() {
            metrics.nodes_visited += 1;
            let succ = &self.succ[state];
            if succ.is_empty() {
                continue;
            }
            let forward = |p: usize| !self.steps[p - 1].backward || symmetric[p - 1];
            let backward = |p: usize| self.steps[p - 1].backward || symmetric[p - 1];
            let need_out = succ.iter().any(|&p| forward(p));
            let need_in = succ.iter().any(|&p| backward(p));

            for kind in EdgeKind::TRAVERSABLE {
                let lists = [
                    (need_out, graph.out_adjacent(node, kind), true),
                    (need_in, graph.in_adjacent(node, kind), false),
                ];
                for (needed, adjacent, outgoing) in lists {
                    if !needed {
                        continue;
                    }
                    for adj in adjacent {
                        metrics.edges_considered += 1;
                        for &p in succ {
                            let direction_ok = if outgoing { forward(p) } else { backward(p) };
                            if !direction_ok || !self.steps[p - 1].label.matches(&adj.label) {
                                continue;
                            }
                            if self.accepting[p] && on_accept(adj.node) {
                                return;
                            }
                            if visited.insert((adj.node, p)) {
                                queue.push_back((adj.node, p));
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Decides `G, u, v |= pc`, adding traversal counts to `metrics`.
pub fn satisfies(
    graph: &SystemGraph,
    u: &str,
    v: &str,
    pc: &SimplePath,
    metrics: &mut EvalMetrics,
) -> Result<bool> {
    let u = graph.require(u)?;
    let v = graph.require(v)?;
    Ok(PathAutomaton::compile(pc).satisfies(graph, u, v, metrics))
}
