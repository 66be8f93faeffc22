//! System model and system graph.
//!
//! The graph stores four kinds of edges side by side: ordinary relationship
//! edges, caching edges labelled with a principal list, decision audit edges
//! and interest audit edges. Only relationship edges are checked against the
//! permissible relationship graph of the model; the overlay kinds are valid
//! between entities of any type.
//!
//! Adjacency is kept per node and per kind in both directions, so traversal
//! can walk forwards and backwards without scanning unrelated overlay edges.
//! Edges labelled with a symmetric relationship are stored once, in insertion
//! direction, and reported in both directions by queries.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::path::is_identifier;

/// Types, relationship labels and the permissible relationship graph.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SystemModel {
    types: BTreeSet<String>,
    labels: BTreeSet<String>,
    symmetric: BTreeSet<String>,
    /// `(source type, destination type, label)`
    permissible: BTreeSet<(String, String, String)>,
}

impl SystemModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_type(&mut self, name: impl Into<String>) -> bool {
        self.types.insert(name.into())
    }

    pub fn add_label(&mut self, name: impl Into<String>, symmetric: bool) -> bool {
        let name = name.into();
        let mut changed = false;
        if symmetric {
            changed |= self.symmetric.insert(name.clone());
        }
        changed | self.labels.insert(name)
    }

    pub fn add_permissible(&mut self, src_type: &str, label: &str, dst_type: &str) -> Result<bool> {
        for ty in [src_type, dst_type] {
            if !self.types.contains(ty) {
                return Err(Error::InvalidModel(format!("unknown type `{ty}`")));
            }
        }
        if !self.labels.contains(label) {
            return Err(Error::InvalidModel(format!("unknown label `{label}`")));
        }
        Ok(self
            .permissible
            .insert((src_type.to_owned(), dst_type.to_owned(), label.to_owned())))
    }

    pub fn types(&self) -> impl Iterator<Item = &str> {
        self.types.iter().map(String::as_str)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(String::as_str)
    }

    /// Permissible triples as `(source type, label, destination type)`.
    pub fn permissible(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.permissible
            .iter()
            .map(|(s, d, l)| (s.as_str(), l.as_str(), d.as_str()))
    }

    pub fn has_type(&self, ty: &str) -> bool {
        self.types.contains(ty)
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.labels.contains(label)
    }

    pub fn is_symmetric(&self, label: &str) -> bool {
        self.symmetric.contains(label)
    }

    /// Whether an edge labelled `label` may join entities of the given types.
    /// Symmetric labels are accepted in either orientation.
    pub fn permits(&self, src_type: &str, dst_type: &str, label: &str) -> bool {
        let lookup = |s: &str, d: &str| {
            self.permissible
                .contains(&(s.to_owned(), d.to_owned(), label.to_owned()))
        };
        lookup(src_type, dst_type) || (self.is_symmetric(label) && lookup(dst_type, src_type))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    Relationship,
    Caching,
    DecisionAudit,
    InterestAudit,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 4] = [
        EdgeKind::Relationship,
        EdgeKind::Caching,
        EdgeKind::DecisionAudit,
        EdgeKind::InterestAudit,
    ];

    /// Kinds visible to path matching. Caching edges are labelled with
    /// principal lists and never satisfy an edge condition.
    pub const TRAVERSABLE: [EdgeKind; 3] = [
        EdgeKind::Relationship,
        EdgeKind::DecisionAudit,
        EdgeKind::InterestAudit,
    ];

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::Relationship => "relationship",
            EdgeKind::Caching => "caching",
            EdgeKind::DecisionAudit => "decision-audit",
            EdgeKind::InterestAudit => "interest-audit",
        })
    }
}

/// Label carried by a stored edge. The variant fixes the edge kind.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeLabel {
    Rel(String),
    Principals(Vec<String>),
    AllowAudit(String),
    DenyAudit(String),
    ActiveInterest,
    BlockedInterest,
}

impl EdgeLabel {
    pub fn kind(&self) -> EdgeKind {
        match self {
            EdgeLabel::Rel(_) => EdgeKind::Relationship,
            EdgeLabel::Principals(_) => EdgeKind::Caching,
            EdgeLabel::AllowAudit(_) | EdgeLabel::DenyAudit(_) => EdgeKind::DecisionAudit,
            EdgeLabel::ActiveInterest | EdgeLabel::BlockedInterest => EdgeKind::InterestAudit,
        }
    }

    pub fn rel(name: impl Into<String>) -> Self {
        EdgeLabel::Rel(name.into())
    }
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeLabel::Rel(r) => f.write_str(r),
            EdgeLabel::Principals(mp) => write!(f, "[{}]", mp.join(",")),
            EdgeLabel::AllowAudit(a) => write!(f, "allow!{a}"),
            EdgeLabel::DenyAudit(a) => write!(f, "deny!{a}"),
            EdgeLabel::ActiveInterest => f.write_str("@active"),
            EdgeLabel::BlockedInterest => f.write_str("@blocked"),
        }
    }
}

impl FromStr for EdgeLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let ident = |name: &str| {
            if is_identifier(name) {
                Ok(name.to_owned())
            } else {
                Err(format!("invalid identifier `{name}`"))
            }
        };
        if let Some(inner) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            if inner.trim().is_empty() {
                return Ok(EdgeLabel::Principals(Vec::new()));
            }
            return inner
                .split(',')
                .map(|p| ident(p.trim()))
                .collect::<Result<_, _>>()
                .map(EdgeLabel::Principals);
        }
        if let Some(action) = s.strip_prefix("allow!") {
            return ident(action).map(EdgeLabel::AllowAudit);
        }
        if let Some(action) = s.strip_prefix("deny!") {
            return ident(action).map(EdgeLabel::DenyAudit);
        }
        match s {
            "@active" => Ok(EdgeLabel::ActiveInterest),
            "@blocked" => Ok(EdgeLabel::BlockedInterest),
            _ => ident(s).map(EdgeLabel::Rel),
        }
    }
}

/// An edge as seen through the public API, with entity names resolved.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub src: String,
    pub dst: String,
    pub label: EdgeLabel,
}

impl Edge {
    pub fn new(src: impl Into<String>, dst: impl Into<String>, label: EdgeLabel) -> Self {
        Self {
            src: src.into(),
            dst: dst.into(),
            label,
        }
    }

    pub fn kind(&self) -> EdgeKind {
        self.label.kind()
    }

    /// Ordering key used for deterministic listings: `(src, dst, kind, label)`.
    pub fn sort_key(&self) -> (&str, &str, EdgeKind, &EdgeLabel) {
        (&self.src, &self.dst, self.kind(), &self.label)
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.src, self.dst, self.label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UnknownType {
        node: String,
        ty: String,
    },
    UnknownLabel {
        edge: Edge,
    },
    NotPermissible {
        edge: Edge,
        src_type: String,
        dst_type: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownType { node, ty } => {
                write!(f, "node `{node}` has unknown type `{ty}`")
            }
            Violation::UnknownLabel { edge } => {
                write!(f, "edge {edge} uses unknown relationship label")
            }
            Violation::NotPermissible {
                edge,
                src_type,
                dst_type,
            } => write!(
                f,
                "edge {edge} not permitted between types `{src_type}` and `{dst_type}`"
            ),
        }
    }
}

/// Checks every node type and every relationship edge of `graph` against
/// `model`. Overlay edges are not checked.
pub fn validate_graph(model: &SystemModel, graph: &SystemGraph) -> Vec<Violation> {
    let mut violations = Vec::new();
    for (name, ty) in graph.nodes() {
        if !model.has_type(ty) {
            violations.push(Violation::UnknownType {
                node: name.to_owned(),
                ty: ty.to_owned(),
            });
        }
    }
    for edge in graph.edges_of_kind(EdgeKind::Relationship) {
        if let Some(v) = relationship_violation(model, graph, &edge) {
            violations.push(v);
        }
    }
    violations
}

fn relationship_violation(
    model: &SystemModel,
    graph: &SystemGraph,
    edge: &Edge,
) -> Option<Violation> {
    let EdgeLabel::Rel(label) = &edge.label else {
        return None;
    };
    if !model.has_label(label) {
        return Some(Violation::UnknownLabel { edge: edge.clone() });
    }
    let src_type = graph.node_type(&edge.src)?;
    let dst_type = graph.node_type(&edge.dst)?;
    if model.permits(src_type, dst_type, label) {
        None
    } else {
        Some(Violation::NotPermissible {
            edge: edge.clone(),
            src_type: src_type.to_owned(),
            dst_type: dst_type.to_owned(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One adjacency entry: the node at the other end and the edge label.
#[derive(Debug, Clone)]
pub struct Adjacent {
    pub node: NodeId,
    pub label: EdgeLabel,
    /// Insertion sequence number, unique across the graph.
    pub stamp: u64,
}

#[derive(Debug, Clone)]
struct NodeRecord {
    name: String,
    ty: String,
    out: [Vec<Adjacent>; 4],
    inc: [Vec<Adjacent>; 4],
}

/// Typed entities plus a set of edges partitioned by [`EdgeKind`].
///
/// Mutations must be externally serialized; any number of readers may share
/// the graph between mutations.
#[derive(Debug, Clone)]
pub struct SystemGraph {
    model: SystemModel,
    nodes: Vec<NodeRecord>,
    index: HashMap<String, NodeId>,
    /// Every non-caching edge in stored orientation.
    edge_set: HashSet<(NodeId, NodeId, EdgeLabel)>,
    /// At most one caching edge per ordered pair.
    caching: HashMap<(NodeId, NodeId), Vec<String>>,
    counts: [usize; 4],
    revision: u64,
    next_stamp: u64,
}

impl SystemGraph {
    pub fn new(model: SystemModel) -> Self {
        Self {
            model,
            nodes: Vec::new(),
            index: HashMap::new(),
            edge_set: HashSet::new(),
            caching: HashMap::new(),
            counts: [0; 4],
            revision: 0,
            next_stamp: 0,
        }
    }

    pub fn model(&self) -> &SystemModel {
        &self.model
    }

    /// Monotone counter bumped by every mutation that changed the graph.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn add_node(&mut self, name: &str, ty: &str) -> Result<bool> {
        if !self.model.has_type(ty) {
            return Err(Error::well_formedness(Violation::UnknownType {
                node: name.to_owned(),
                ty: ty.to_owned(),
            }));
        }
        self.add_node_unchecked(name, ty)
    }

    /// Adds a node without checking its type against the model.
    pub fn add_node_unchecked(&mut self, name: &str, ty: &str) -> Result<bool> {
        if let Some(&id) = self.index.get(name) {
            let existing = &self.nodes[id.index()].ty;
            if existing == ty {
                return Ok(false);
            }
            return Err(Error::InvalidModel(format!(
                "node `{name}` already declared with type `{existing}`"
            )));
        }
        let id = NodeId(u32::try_from(self.nodes.len()).expect("node count exceeds u32"));
        self.nodes.push(NodeRecord {
            name: name.to_owned(),
            ty: ty.to_owned(),
            out: Default::default(),
            inc: Default::default(),
        });
        self.index.insert(name.to_owned(), id);
        self.revision += 1;
        Ok(true)
    }

    pub fn contains_node(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn node_type(&self, name: &str) -> Option<&str> {
        self.index
            .get(name)
            .map(|id| self.nodes[id.index()].ty.as_str())
    }

    /// `(name, type)` pairs in insertion order.
    pub fn nodes(&self) -> impl Iterator<Item = (&str, &str)> {
        self.nodes.iter().map(|n| (n.name.as_str(), n.ty.as_str()))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.nodes[id.index()].name
    }

    pub fn require(&self, name: &str) -> Result<NodeId> {
        self.node_id(name)
            .ok_or_else(|| Error::UnknownNode(name.to_owned()))
    }

    /// Adds an edge, returning `false` when an identical edge already exists.
    /// Relationship edges must satisfy the permissible relationship graph.
    pub fn add_edge(&mut self, src: &str, dst: &str, label: EdgeLabel) -> Result<bool> {
        let s = self.require(src)?;
        let d = self.require(dst)?;
        let edge = Edge::new(src, dst, label);
        if let Some(v) = relationship_violation(&self.model, self, &edge) {
            return Err(Error::well_formedness(v));
        }
        Ok(self.insert(s, d, edge.label))
    }

    /// Adds an edge without the well-formedness check. Both nodes must exist.
    pub fn add_edge_unchecked(&mut self, src: &str, dst: &str, label: EdgeLabel) -> Result<bool> {
        let s = self.require(src)?;
        let d = self.require(dst)?;
        Ok(self.insert(s, d, label))
    }

    fn insert(&mut self, s: NodeId, d: NodeId, label: EdgeLabel) -> bool {
        let kind = label.kind();
        if let EdgeLabel::Principals(mp) = &label {
            match self.caching.get(&(s, d)) {
                Some(existing) if existing == mp => return false,
                Some(existing) => {
                    let old = EdgeLabel::Principals(existing.clone());
                    self.unlink(s, d, &old);
                    self.counts[kind.slot()] -= 1;
                }
                None => {}
            }
            self.caching.insert((s, d), mp.clone());
        } else {
            if self.stored_orientation(s, d, &label).is_some() {
                return false;
            }
            self.edge_set.insert((s, d, label.clone()));
        }
        let stamp = self.next_stamp;
        self.next_stamp += 1;
        self.nodes[s.index()].out[kind.slot()].push(Adjacent {
            node: d,
            label: label.clone(),
            stamp,
        });
        self.nodes[d.index()].inc[kind.slot()].push(Adjacent {
            node: s,
            label,
            stamp,
        });
        self.counts[kind.slot()] += 1;
        self.revision += 1;
        true
    }

    /// Returns the stored `(src, dst)` of an edge equal to `(s, d, label)`,
    /// accounting for symmetric relationship labels.
    fn stored_orientation(
        &self,
        s: NodeId,
        d: NodeId,
        label: &EdgeLabel,
    ) -> Option<(NodeId, NodeId)> {
        if let EdgeLabel::Principals(mp) = label {
            return (self.caching.get(&(s, d)) == Some(mp)).then_some((s, d));
        }
        if self.edge_set.contains(&(s, d, label.clone())) {
            return Some((s, d));
        }
        match label {
            EdgeLabel::Rel(r) if self.model.is_symmetric(r) => self
                .edge_set
                .contains(&(d, s, label.clone()))
                .then_some((d, s)),
            _ => None,
        }
    }

    pub fn remove_edge(&mut self, src: &str, dst: &str, label: &EdgeLabel) -> Result<bool> {
        let s = self.require(src)?;
        let d = self.require(dst)?;
        Ok(self.remove_ids(s, d, label))
    }

    pub(crate) fn remove_ids(&mut self, s: NodeId, d: NodeId, label: &EdgeLabel) -> bool {
        let Some((s, d)) = self.stored_orientation(s, d, label) else {
            return false;
        };
        if matches!(label, EdgeLabel::Principals(_)) {
            self.caching.remove(&(s, d));
        } else {
            self.edge_set.remove(&(s, d, label.clone()));
        }
        self.unlink(s, d, label);
        self.counts[label.kind().slot()] -= 1;
        self.revision += 1;
        true
    }

    fn unlink(&mut self, s: NodeId, d: NodeId, label: &EdgeLabel) {
        let slot = label.kind().slot();
        let out = &mut self.nodes[s.index()].out[slot];
        if let Some(i) = out.iter().position(|a| a.node == d && &a.label == label) {
            out.remove(i);
        }
        let inc = &mut self.nodes[d.index()].inc[slot];
        if let Some(i) = inc.iter().position(|a| a.node == s && &a.label == label) {
            inc.remove(i);
        }
    }

    pub fn contains_edge(&self, src: &str, dst: &str, label: &EdgeLabel) -> bool {
        match (self.node_id(src), self.node_id(dst)) {
            (Some(s), Some(d)) => self.stored_orientation(s, d, label).is_some(),
            _ => false,
        }
    }

    /// Edges leaving `node`, optionally restricted to one kind. A symmetric
    /// relationship edge stored as `(other, node)` is reported as
    /// `(node, other)`.
    pub fn edges_from(&self, node: &str, kind: Option<EdgeKind>) -> Result<Vec<Edge>> {
        let id = self.require(node)?;
        let record = &self.nodes[id.index()];
        let mut result = Vec::new();
        for k in EdgeKind::ALL {
            if kind.is_some_and(|want| want != k) {
                continue;
            }
            for adj in &record.out[k.slot()] {
                result.push(Edge::new(node, self.node_name(adj.node), adj.label.clone()));
            }
            if k == EdgeKind::Relationship {
                for adj in &record.inc[k.slot()] {
                    let EdgeLabel::Rel(r) = &adj.label else {
                        continue;
                    };
                    if adj.node != id && self.model.is_symmetric(r) {
                        result.push(Edge::new(node, self.node_name(adj.node), adj.label.clone()));
                    }
                }
            }
        }
        Ok(result)
    }

    pub fn edges_between(&self, u: &str, v: &str, kind: Option<EdgeKind>) -> Result<Vec<Edge>> {
        self.require(v)?;
        let mut edges = self.edges_from(u, kind)?;
        edges.retain(|e| e.dst == v);
        Ok(edges)
    }

    /// Every stored edge in stored orientation, sorted by `(src, dst, kind, label)`.
    pub fn edges(&self) -> Vec<Edge> {
        let mut edges: Vec<Edge> = EdgeKind::ALL
            .into_iter()
            .flat_map(|k| self.stored_edges(k))
            .collect();
        edges.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        edges
    }

    pub fn edges_of_kind(&self, kind: EdgeKind) -> Vec<Edge> {
        let mut edges: Vec<Edge> = self.stored_edges(kind).collect();
        edges.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        edges
    }

    /// Edges of one kind in the order they were inserted.
    pub fn edges_in_insertion_order(&self, kind: EdgeKind) -> Vec<Edge> {
        let mut stamped: Vec<(u64, Edge)> = self
            .nodes
            .iter()
            .flat_map(|n| {
                n.out[kind.slot()].iter().map(move |a| {
                    (
                        a.stamp,
                        Edge::new(&n.name, self.node_name(a.node), a.label.clone()),
                    )
                })
            })
            .collect();
        stamped.sort_by_key(|(stamp, _)| *stamp);
        stamped.into_iter().map(|(_, e)| e).collect()
    }

    fn stored_edges(&self, kind: EdgeKind) -> impl Iterator<Item = Edge> + '_ {
        self.nodes.iter().flat_map(move |n| {
            n.out[kind.slot()]
                .iter()
                .map(move |a| Edge::new(&n.name, self.node_name(a.node), a.label.clone()))
        })
    }

    pub fn edge_count(&self, kind: EdgeKind) -> usize {
        self.counts[kind.slot()]
    }

    pub fn cached_principals(&self, src: &str, dst: &str) -> Option<&[String]> {
        let key = (self.node_id(src)?, self.node_id(dst)?);
        self.caching.get(&key).map(Vec::as_slice)
    }

    pub(crate) fn caching_entry(&self, s: NodeId, d: NodeId) -> Option<&[String]> {
        self.caching.get(&(s, d)).map(Vec::as_slice)
    }

    pub(crate) fn caching_pairs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.caching.keys().copied()
    }

    pub fn caching_out_degree(&self, node: NodeId) -> usize {
        self.nodes[node.index()].out[EdgeKind::Caching.slot()].len()
    }

    pub fn out_adjacent(&self, node: NodeId, kind: EdgeKind) -> &[Adjacent] {
        &self.nodes[node.index()].out[kind.slot()]
    }

    pub fn in_adjacent(&self, node: NodeId, kind: EdgeKind) -> &[Adjacent] {
        &self.nodes[node.index()].inc[kind.slot()]
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_graph(&self.model, self)
    }
}

/// Graphs compare equal when they share the model, the typed node set and
/// the edge set. Revision counters and insertion order are ignored.
impl PartialEq for SystemGraph {
    fn eq(&self, other: &Self) -> bool {
        let typed_nodes = |g: &SystemGraph| {
            g.nodes()
                .map(|(n, t)| (n.to_owned(), t.to_owned()))
                .collect::<BTreeSet<_>>()
        };
        self.model == other.model
            && typed_nodes(self) == typed_nodes(other)
            && self.edges() == other.edges()
    }
}

impl Eq for SystemGraph {}
