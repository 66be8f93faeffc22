//! Caching edges.
//!
//! A caching edge `(s, o, MP)` records the matched principals of a
//! subject/object pair so that later requests on the pair skip principal
//! matching. Caching edges live in the system graph under
//! [`EdgeKind::Caching`]; this module owns their bookkeeping: recency for
//! eviction and retirement, size thresholds, and invalidation when the graph
//! or the principal-matching policy changes.
//!
//! [`Invalidation::FlushAll`] is the only mode that keeps cached decisions
//! identical to uncached ones. [`Invalidation::ScopedBySubject`] only drops
//! the caching edges leaving the source of a mutated edge; it is a heuristic
//! and can serve stale principal lists when a change affects paths of other
//! subjects.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::graph::{Edge, EdgeKind, EdgeLabel, NodeId, SystemGraph};
use crate::policy::match_principals;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Invalidation {
    #[default]
    FlushAll,
    ScopedBySubject,
}

impl fmt::Display for Invalidation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Invalidation::FlushAll => "flush-all",
            Invalidation::ScopedBySubject => "scoped-by-subject",
        })
    }
}

impl FromStr for Invalidation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "flush-all" | "flushall" => Ok(Invalidation::FlushAll),
            "scoped-by-subject" | "scopedbysubject" => Ok(Invalidation::ScopedBySubject),
            _ => Err(format!("unknown invalidation mode `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheConfig {
    pub enabled: bool,
    /// Insert a caching edge after each evaluation that missed the cache.
    pub write_on_eval: bool,
    pub invalidation: Invalidation,
    pub max_total: Option<usize>,
    pub max_out_degree: Option<usize>,
    /// Purge entries not hit for more than this many evaluations.
    pub retirement_age: Option<u64>,
    /// Capacity of the recent-subject ring used by subject-focused precaching.
    pub recent_subjects: usize,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            write_on_eval: true,
            invalidation: Invalidation::FlushAll,
            max_total: None,
            max_out_degree: None,
            retirement_age: None,
            recent_subjects: 8,
        }
    }
}

impl CacheConfig {
    pub fn validate(&self) -> Result<()> {
        let thresholds = [
            ("cache.max_total", self.max_total.map(|v| v as u64)),
            (
                "cache.max_out_degree",
                self.max_out_degree.map(|v| v as u64),
            ),
            ("cache.retirement_age", self.retirement_age),
        ];
        for (key, value) in thresholds {
            if value == Some(0) {
                return Err(Error::Config(format!("{key} must be at least 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheEntryMeta {
    /// Graph revision right after the edge was written.
    pub created_rev: u64,
    /// Evaluation sequence number at creation.
    pub created_seq: u64,
    /// Evaluation sequence number of the most recent hit (or creation).
    pub last_hit: u64,
}

/// A change that may alter matched principals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChangeEvent {
    EdgeAdded(Edge),
    EdgeRemoved(Edge),
    PolicyChanged,
    StrategyChanged,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub size: usize,
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
    pub purged: u64,
}

#[derive(Debug, Clone)]
pub struct Cache {
    config: CacheConfig,
    meta: HashMap<(NodeId, NodeId), CacheEntryMeta>,
    hits: u64,
    misses: u64,
    evictions: u64,
    purged: u64,
    last_invalidation_rev: u64,
}

impl Cache {
    pub fn new(config: CacheConfig) -> Self {
        Self {
            config,
            meta: HashMap::new(),
            hits: 0,
            misses: 0,
            evictions: 0,
            purged: 0,
            last_invalidation_rev: 0,
        }
    }

    pub fn config(&self) -> &CacheConfig {
        &self.config
    }

    pub fn meta(&self, s: NodeId, o: NodeId) -> Option<&CacheEntryMeta> {
        self.meta.get(&(s, o))
    }

    /// Graph revision recorded by the most recent invalidating event.
    pub fn last_invalidation_rev(&self) -> u64 {
        self.last_invalidation_rev
    }

    pub fn stats(&self, graph: &SystemGraph) -> CacheStats {
        CacheStats {
            size: graph.edge_count(EdgeKind::Caching),
            hits: self.hits,
            misses: self.misses,
            evictions: self.evictions,
            purged: self.purged,
        }
    }

    /// Registers caching edges already present in `graph`, e.g. loaded from
    /// a snapshot.
    pub fn adopt(&mut self, graph: &SystemGraph, seq: u64) {
        for key in graph.caching_pairs() {
            self.meta.entry(key).or_insert(CacheEntryMeta {
                created_rev: graph.revision(),
                created_seq: seq,
                last_hit: seq,
            });
        }
    }

    /// Returns the principal list cached for `(s, o)`, recording a hit.
    pub fn lookup(
        &mut self,
        graph: &SystemGraph,
        s: NodeId,
        o: NodeId,
        seq: u64,
    ) -> Option<Vec<String>> {
        match graph.caching_entry(s, o) {
            Some(mp) => {
                self.hits += 1;
                let meta = self.meta.entry((s, o)).or_insert(CacheEntryMeta {
                    created_rev: graph.revision(),
                    created_seq: seq,
                    last_hit: seq,
                });
                meta.last_hit = seq;
                Some(mp.to_vec())
            }
            None => {
                self.misses += 1;
                None
            }
        }
    }

    /// Writes the caching edge `(s, o, mp)`, evicting least recently hit
    /// entries first when a threshold would be exceeded. Returns whether the
    /// graph changed.
    pub fn insert(
        &mut self,
        graph: &mut SystemGraph,
        s: NodeId,
        o: NodeId,
        mp: Vec<String>,
        seq: u64,
    ) -> bool {
        match graph.caching_entry(s, o) {
            Some(existing) if existing == mp.as_slice() => return false,
            Some(_) => {}
            None => {
                if let Some(limit) = self.config.max_out_degree {
                    while graph.caching_out_degree(s) >= limit {
                        if !self.evict_lru(graph, |(src, _)| src == s) {
                            break;
                        }
                    }
                }
                if let Some(limit) = self.config.max_total {
                    while graph.edge_count(EdgeKind::Caching) >= limit {
                        if !self.evict_lru(graph, |_| true) {
                            break;
                        }
                    }
                }
            }
        }
        graph.remove_caching(s, o);
        let changed = graph.insert_caching(s, o, mp);
        self.meta.insert(
            (s, o),
            CacheEntryMeta {
                created_rev: graph.revision(),
                created_seq: seq,
                last_hit: seq,
            },
        );
        changed
    }

    fn evict_lru(
        &mut self,
        graph: &mut SystemGraph,
        filter: impl Fn((NodeId, NodeId)) -> bool,
    ) -> bool {
        let victim = graph
            .caching_pairs()
            .filter(|&k| filter(k))
            .min_by_key(|&k| {
                let m = self.meta.get(&k);
                (
                    m.map_or(0, |m| m.last_hit),
                    m.map_or(0, |m| m.created_rev),
                    k,
                )
            });
        match victim {
            Some((s, o)) => {
                self.remove(graph, s, o);
                self.evictions += 1;
                true
            }
            None => false,
        }
    }

    fn remove(&mut self, graph: &mut SystemGraph, s: NodeId, o: NodeId) -> bool {
        self.meta.remove(&(s, o));
        graph.remove_caching(s, o)
    }

    /// Applies the configured invalidation policy to `event` and returns the
    /// number of caching edges removed. Changes to caching edges themselves
    /// never invalidate.
    pub fn invalidate(&mut self, graph: &mut SystemGraph, event: &ChangeEvent) -> usize {
        let edge = match event {
            ChangeEvent::EdgeAdded(e) | ChangeEvent::EdgeRemoved(e) => Some(e),
            ChangeEvent::PolicyChanged | ChangeEvent::StrategyChanged => None,
        };
        if edge.is_some_and(|e| e.kind() == EdgeKind::Caching) {
            return 0;
        }
        self.last_invalidation_rev = graph.revision();
        let purged = match (self.config.invalidation, edge) {
            (Invalidation::ScopedBySubject, Some(e)) => match graph.node_id(&e.src) {
                Some(src) => self.purge_where(graph, |(s, _)| s == src),
                None => 0,
            },
            _ => self.purge_where(graph, |_| true),
        };
        self.purged += purged as u64;
        purged
    }

    /// Removes every caching edge.
    pub fn flush(&mut self, graph: &mut SystemGraph) -> usize {
        let purged = self.purge_where(graph, |_| true);
        self.purged += purged as u64;
        purged
    }

    /// Removes the caching edges leaving `subject`.
    pub fn purge_subject(&mut self, graph: &mut SystemGraph, subject: NodeId) -> usize {
        let purged = self.purge_where(graph, |(s, _)| s == subject);
        self.purged += purged as u64;
        purged
    }

    /// Removes entries not hit during the last `retirement_age` evaluations.
    pub fn retire(&mut self, graph: &mut SystemGraph, seq: u64) -> usize {
        let Some(age) = self.config.retirement_age else {
            return 0;
        };
        let meta = &self.meta;
        let purged = {
            let stale: Vec<_> = graph
                .caching_pairs()
                .filter(|k| {
                    meta.get(k)
                        .is_some_and(|m| seq.saturating_sub(m.last_hit) > age)
                })
                .collect();
            for &(s, o) in &stale {
                self.remove(graph, s, o);
            }
            stale.len()
        };
        self.purged += purged as u64;
        purged
    }

    fn purge_where(
        &mut self,
        graph: &mut SystemGraph,
        filter: impl Fn((NodeId, NodeId)) -> bool,
    ) -> usize {
        let mut victims: Vec<_> = graph.caching_pairs().filter(|&k| filter(k)).collect();
        victims.sort_unstable();
        for &(s, o) in &victims {
            self.remove(graph, s, o);
        }
        victims.len()
    }
}

impl SystemGraph {
    fn insert_caching(&mut self, s: NodeId, o: NodeId, mp: Vec<String>) -> bool {
        let (src, dst) = (self.node_name(s).to_owned(), self.node_name(o).to_owned());
        self.add_edge_unchecked(&src, &dst, EdgeLabel::Principals(mp))
            .expect("caching edge endpoints exist")
    }

    fn remove_caching(&mut self, s: NodeId, o: NodeId) -> bool {
        match self.caching_entry(s, o) {
            Some(mp) => {
                let label = EdgeLabel::Principals(mp.to_vec());
                self.remove_ids(s, o, &label)
            }
            None => false,
        }
    }
}

/// Which subject/object pairs to precompute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PrecacheStrategy {
    /// The `recent_k` most recently active subjects against fixed targets.
    SubjectFocused {
        recent_k: usize,
        targets: Vec<String>,
    },
    /// Fixed objects against a list of subjects.
    ObjectFocused {
        objects: Vec<String>,
        subjects: Vec<String>,
    },
}

/// Computes matched principals for up to `budget` pairs without a caching
/// edge and caches them. No authorization is performed and no audit edges
/// are written. Unknown entity names are skipped.
pub fn precache(engine: &mut Engine, strategy: &PrecacheStrategy, budget: usize) -> Result<usize> {
    if !engine.cache.config().enabled || budget == 0 {
        return Ok(0);
    }
    let pairs: Vec<(String, String)> = match strategy {
        PrecacheStrategy::SubjectFocused { recent_k, targets } => engine
            .recent_subjects()
            .take(*recent_k)
            .flat_map(|s| targets.iter().map(move |t| (s.to_owned(), t.clone())))
            .collect(),
        PrecacheStrategy::ObjectFocused { objects, subjects } => objects
            .iter()
            .flat_map(|o| subjects.iter().map(move |s| (s.clone(), o.clone())))
            .collect(),
    };
    let mut inserted = 0;
    for (s, o) in pairs {
        if inserted == budget {
            break;
        }
        let (Some(sid), Some(oid)) = (engine.graph.node_id(&s), engine.graph.node_id(&o)) else {
            continue;
        };
        if engine.graph.caching_entry(sid, oid).is_some() {
            continue;
        }
        let matched = match_principals(&engine.graph, &s, &o, &engine.pm)?;
        let seq = engine.seq;
        if engine
            .cache
            .insert(&mut engine.graph, sid, oid, matched.principals, seq)
        {
            inserted += 1;
        }
    }
    Ok(inserted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SystemModel;

    fn graph(n: usize) -> SystemGraph {
        let mut m = SystemModel::new();
        m.add_type("t");
        m.add_label("r", false);
        m.add_permissible("t", "r", "t").unwrap();
        let mut g = SystemGraph::new(m);
        for i in 0..n {
            g.add_node(&format!("v{i}"), "t").unwrap();
        }
        g
    }

    fn id(g: &SystemGraph, name: &str) -> NodeId {
        g.require(name).unwrap()
    }

    #[test]
    fn insert_then_lookup() {
        let mut g = graph(3);
        let mut c = Cache::new(CacheConfig::default());
        let (a, b) = (id(&g, "v0"), id(&g, "v1"));
        assert_eq!(c.lookup(&g, a, b, 1), None);
        assert!(c.insert(&mut g, a, b, vec!["p5".into()], 1));
        assert!(!c.insert(&mut g, a, b, vec!["p5".into()], 1));
        assert_eq!(c.lookup(&g, a, b, 2), Some(vec!["p5".to_owned()]));
        assert_eq!(
            c.stats(&g),
            CacheStats {
                size: 1,
                hits: 1,
                misses: 1,
                evictions: 0,
                purged: 0
            }
        );
    }

    #[test]
    fn out_degree_threshold_evicts_oldest() {
        let mut g = graph(3);
        let mut c = Cache::new(CacheConfig {
            max_out_degree: Some(1),
            ..CacheConfig::default()
        });
        let (v0, v1, v2) = (id(&g, "v0"), id(&g, "v1"), id(&g, "v2"));
        c.insert(&mut g, v0, v1, vec!["p5".into()], 1);
        c.insert(&mut g, v0, v2, vec!["p1".into()], 2);
        assert_eq!(g.caching_out_degree(v0), 1);
        assert_eq!(
            g.cached_principals("v0", "v2"),
            Some(&["p1".to_owned()][..])
        );
        assert_eq!(g.cached_principals("v0", "v1"), None);
    }

    #[test]
    fn total_threshold_prefers_least_recently_hit() {
        let mut g = graph(4);
        let mut c = Cache::new(CacheConfig {
            max_total: Some(2),
            ..CacheConfig::default()
        });
        let v: Vec<_> = (0..4).map(|i| id(&g, &format!("v{i}"))).collect();
        c.insert(&mut g, v[0], v[1], vec![], 1);
        c.insert(&mut g, v[1], v[2], vec![], 2);
        c.lookup(&g, v[0], v[1], 3);
        c.insert(&mut g, v[2], v[3], vec![], 4);
        assert_eq!(g.edge_count(EdgeKind::Caching), 2);
        assert!(g.cached_principals("v0", "v1").is_some());
        assert!(g.cached_principals("v1", "v2").is_none());
    }

    #[test]
    fn caching_edge_events_do_not_invalidate() {
        let mut g = graph(2);
        let mut c = Cache::new(CacheConfig::default());
        let (a, b) = (id(&g, "v0"), id(&g, "v1"));
        c.insert(&mut g, a, b, vec!["p".into()], 1);
        let event = ChangeEvent::EdgeAdded(Edge::new(
            "v0",
            "v1",
            EdgeLabel::Principals(vec!["p".into()]),
        ));
        assert_eq!(c.invalidate(&mut g, &event), 0);
        assert_eq!(g.edge_count(EdgeKind::Caching), 1);
    }

    #[test]
    fn flush_all_on_policy_and_audit_changes() {
        let mut g = graph(3);
        let mut c = Cache::new(CacheConfig::default());
        let v: Vec<_> = (0..3).map(|i| id(&g, &format!("v{i}"))).collect();
        c.insert(&mut g, v[0], v[1], vec![], 1);
        c.insert(&mut g, v[1], v[2], vec![], 1);
        assert_eq!(c.invalidate(&mut g, &ChangeEvent::PolicyChanged), 2);
        c.insert(&mut g, v[0], v[1], vec![], 2);
        let audit = Edge::new("v2", "v1", EdgeLabel::AllowAudit("a".into()));
        assert_eq!(c.invalidate(&mut g, &ChangeEvent::EdgeAdded(audit)), 1);
        assert_eq!(g.edge_count(EdgeKind::Caching), 0);
    }

    #[test]
    fn scoped_invalidation_keeps_other_subjects() {
        let mut g = graph(3);
        let mut c = Cache::new(CacheConfig {
            invalidation: Invalidation::ScopedBySubject,
            ..CacheConfig::default()
        });
        let v: Vec<_> = (0..3).map(|i| id(&g, &format!("v{i}"))).collect();
        c.insert(&mut g, v[0], v[1], vec![], 1);
        c.insert(&mut g, v[1], v[2], vec![], 1);
        let event = ChangeEvent::EdgeAdded(Edge::new("v0", "v2", EdgeLabel::rel("r")));
        assert_eq!(c.invalidate(&mut g, &event), 1);
        assert!(g.cached_principals("v1", "v2").is_some());
    }

    #[test]
    fn retirement_purges_idle_entries() {
        let mut g = graph(3);
        let mut c = Cache::new(CacheConfig {
            retirement_age: Some(2),
            ..CacheConfig::default()
        });
        let v: Vec<_> = (0..3).map(|i| id(&g, &format!("v{i}"))).collect();
        c.insert(&mut g, v[0], v[1], vec![], 1);
        c.insert(&mut g, v[1], v[2], vec![], 1);
        c.lookup(&g, v[0], v[1], 3);
        assert_eq!(c.retire(&mut g, 3), 0);
        assert_eq!(c.retire(&mut g, 4), 1);
        assert!(g.cached_principals("v0", "v1").is_some());
    }

    #[test]
    fn zero_thresholds_are_rejected() {
        let config = CacheConfig {
            max_total: Some(0),
            ..CacheConfig::default()
        };
        assert!(config.validate().is_err());
        assert!(CacheConfig::default().validate().is_ok());
    }
}
