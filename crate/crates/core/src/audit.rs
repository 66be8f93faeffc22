//! Decision and interest audit edges.
//!
//! Every evaluation leaves a decision audit edge `(s, o, allow!a)` or
//! `(s, o, deny!a)`. When the Chinese Wall hook is enabled, an allowed request
//! also declares the subject's interest in the companies owning the object and
//! blocks the competitors of those companies:
//!
//! ```text
//! s --@active--> c        for each c with  o |= pi2 c
//! s --@blocked--> c'      for each c' != c sharing a conflict class with c
//! ```
//!
//! A blocked edge is never written where an active edge already exists.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::graph::{Edge, EdgeKind, EdgeLabel, NodeId, SystemGraph, SystemModel};
use crate::matcher::{EvalMetrics, PathAutomaton};
use crate::path::SimplePath;
use crate::policy::{Decision, Request};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChineseWallConfig {
    pub enabled: bool,
    /// Path conditions from a data object to the company owning it.
    pub paths: Vec<SimplePath>,
    /// Label of the edges from companies to their conflict-of-interest class.
    pub membership_label: String,
}

impl Default for ChineseWallConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            paths: Vec::new(),
            membership_label: "m".to_owned(),
        }
    }
}

impl ChineseWallConfig {
    pub fn validate(&self, model: &SystemModel) -> Result<()> {
        if !self.enabled {
            return Ok(());
        }
        if self.paths.is_empty() {
            return Err(Error::Config(
                "cw.paths must not be empty when cw.enabled".into(),
            ));
        }
        if !model.has_label(&self.membership_label) {
            return Err(Error::Config(format!(
                "cw.member_label `{}` is not a relationship label",
                self.membership_label
            )));
        }
        Ok(())
    }
}

pub fn decision_label(decision: Decision, action: &str) -> EdgeLabel {
    match decision {
        Decision::Allow => EdgeLabel::AllowAudit(action.to_owned()),
        Decision::Deny => EdgeLabel::DenyAudit(action.to_owned()),
    }
}

/// Records the outcome of `request`. Returns the edge if it was new.
pub fn write_decision_audit(
    graph: &mut SystemGraph,
    request: &Request,
    decision: Decision,
) -> Result<Vec<Edge>> {
    let label = decision_label(decision, &request.action);
    let changed = graph.add_edge_unchecked(&request.subject, &request.object, label.clone())?;
    Ok(if changed {
        vec![Edge::new(&request.subject, &request.object, label)]
    } else {
        Vec::new()
    })
}

/// The Chinese Wall hook with its company paths compiled once.
#[derive(Debug, Clone)]
pub struct InterestWriter {
    automata: Vec<PathAutomaton>,
    membership_label: String,
}

impl InterestWriter {
    pub fn new(config: &ChineseWallConfig) -> Self {
        Self {
            automata: config.paths.iter().map(PathAutomaton::compile).collect(),
            membership_label: config.membership_label.clone(),
        }
    }

    pub fn membership_label(&self) -> &str {
        &self.membership_label
    }

    /// Companies reachable from `object` along any configured path.
    pub fn companies(&self, graph: &SystemGraph, object: NodeId) -> Vec<NodeId> {
        let mut metrics = EvalMetrics::default();
        let mut found: Vec<NodeId> = self
            .automata
            .iter()
            .flat_map(|a| a.targets(graph, object, &mut metrics))
            .collect();
        found.sort_by(|a, b| graph.node_name(*a).cmp(graph.node_name(*b)));
        found.dedup();
        found
    }

    fn members(&self, graph: &SystemGraph, node: NodeId, outgoing: bool) -> Vec<NodeId> {
        let adjacent = if outgoing {
            graph.out_adjacent(node, EdgeKind::Relationship)
        } else {
            graph.in_adjacent(node, EdgeKind::Relationship)
        };
        adjacent
            .iter()
            .filter(|a| matches!(&a.label, EdgeLabel::Rel(r) if *r == self.membership_label))
            .map(|a| a.node)
            .collect()
    }

    /// Writes the interest edges implied by an allowed `request`; nothing is
    /// written for a denied one.
    pub fn write(
        &self,
        graph: &mut SystemGraph,
        request: &Request,
        decision: Decision,
    ) -> Result<Vec<Edge>> {
        if !decision.is_allow() {
            return Ok(Vec::new());
        }
        graph.require(&request.subject)?;
        let object = graph.require(&request.object)?;
        let companies = self.companies(graph, object);

        let mut blocked = BTreeSet::new();
        for &c in &companies {
            for class in self.members(graph, c, true) {
                for rival in self.members(graph, class, false) {
                    if rival != c {
                        blocked.insert(graph.node_name(rival).to_owned());
                    }
                }
            }
        }
        let companies: Vec<String> = companies
            .iter()
            .map(|&c| graph.node_name(c).to_owned())
            .collect();

        let mut written = Vec::new();
        for c in &companies {
            if graph.add_edge_unchecked(&request.subject, c, EdgeLabel::ActiveInterest)? {
                written.push(Edge::new(&request.subject, c, EdgeLabel::ActiveInterest));
            }
        }
        for c in &blocked {
            if graph.contains_edge(&request.subject, c, &EdgeLabel::ActiveInterest) {
                continue;
            }
            if graph.add_edge_unchecked(&request.subject, c, EdgeLabel::BlockedInterest)? {
                written.push(Edge::new(&request.subject, c, EdgeLabel::BlockedInterest));
            }
        }
        Ok(written)
    }
}

/// Writes the interest edges for `request` under `config`.
pub fn write_interest_edges(
    graph: &mut SystemGraph,
    request: &Request,
    decision: Decision,
    config: &ChineseWallConfig,
) -> Result<Vec<Edge>> {
    if !config.enabled {
        return Ok(Vec::new());
    }
    InterestWriter::new(config).write(graph, request, decision)
}

/// One line of the exported audit log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditRecord {
    /// 1-based position in decision-audit insertion order.
    pub seq: usize,
    pub subject: String,
    pub object: String,
    pub action: String,
    pub decision: Decision,
}

impl fmt::Display for AuditRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {}",
            self.seq, self.subject, self.object, self.action, self.decision
        )
    }
}

pub fn audit_log(graph: &SystemGraph) -> Vec<AuditRecord> {
    graph
        .edges_in_insertion_order(EdgeKind::DecisionAudit)
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            let (action, decision) = match e.label {
                EdgeLabel::AllowAudit(a) => (a, Decision::Allow),
                EdgeLabel::DenyAudit(a) => (a, Decision::Deny),
                _ => unreachable!("decision audit edges carry audit labels"),
            };
            AuditRecord {
                seq: i + 1,
                subject: e.src,
                object: e.dst,
                action,
                decision,
            }
        })
        .collect()
}
