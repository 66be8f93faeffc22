//! The request pipeline.
//!
//! `evaluate` runs cache lookup, principal matching on a miss, authorization,
//! and then the writers in a fixed order: caching edge, decision audit edge,
//! interest edges. Every edge it adds is reported in
//! [`EvalOutcome::written_edges`] in that order.

use std::collections::VecDeque;

use crate::audit::{self, AuditRecord, ChineseWallConfig, InterestWriter};
use crate::cache::{self, Cache, CacheConfig, CacheStats, ChangeEvent, PrecacheStrategy};
use crate::error::{Error, Result};
use crate::graph::{Edge, EdgeKind, EdgeLabel, SystemGraph};
use crate::matcher::EvalMetrics;
use crate::path::PathLabel;
use crate::policy::{
    authorize, match_principals, AuthorizationPolicy, ConflictResolution, Decision, DecisionSet,
    MatchStrategy, PolicySet, PrincipalMatchingPolicy, Request, RuleCondition,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    pub pms: MatchStrategy,
    pub crs: ConflictResolution,
    pub default_decision: Decision,
    pub cache: CacheConfig,
    pub cw: ChineseWallConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            pms: MatchStrategy::AllMatch,
            crs: ConflictResolution::DenyOverride,
            default_decision: Decision::Deny,
            cache: CacheConfig::default(),
            cw: ChineseWallConfig::default(),
        }
    }
}

impl EngineConfig {
    pub fn without_cache(mut self) -> Self {
        self.cache.enabled = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalOutcome {
    pub decision: Decision,
    pub matched_principals: Vec<String>,
    pub decision_set: DecisionSet,
    /// Principal-matching cost; zero on a cache hit.
    pub metrics: EvalMetrics,
    pub cache_hit: bool,
    pub written_edges: Vec<Edge>,
    /// Indices of the satisfied principal-matching rules. Empty on a cache hit.
    pub matched_rules: Vec<usize>,
    /// Indices of the applicable authorization rules.
    pub applicable_rules: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Engine {
    pub(crate) graph: SystemGraph,
    pub(crate) pm: PrincipalMatchingPolicy,
    auth: AuthorizationPolicy,
    config: EngineConfig,
    pub(crate) cache: Cache,
    interests: Option<InterestWriter>,
    pub(crate) seq: u64,
    recent: VecDeque<String>,
}

impl Engine {
    pub fn new(graph: SystemGraph, policy: PolicySet, config: EngineConfig) -> Result<Self> {
        config.cache.validate()?;
        config.cw.validate(graph.model())?;
        let (pm, auth) = build_policies(&graph, policy, &config)?;
        let mut cache = Cache::new(config.cache.clone());
        cache.adopt(&graph, 0);
        let interests = config.cw.enabled.then(|| InterestWriter::new(&config.cw));
        let mut engine = Self {
            graph,
            pm,
            auth,
            config,
            cache,
            interests,
            seq: 0,
            recent: VecDeque::new(),
        };
        for e in engine
            .graph
            .edges_in_insertion_order(EdgeKind::DecisionAudit)
        {
            engine.touch_recent(&e.src);
        }
        Ok(engine)
    }

    pub fn graph(&self) -> &SystemGraph {
        &self.graph
    }

    pub fn into_graph(self) -> SystemGraph {
        self.graph
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn principal_matching(&self) -> &PrincipalMatchingPolicy {
        &self.pm
    }

    pub fn authorization(&self) -> &AuthorizationPolicy {
        &self.auth
    }

    pub fn cache(&self) -> &Cache {
        &self.cache
    }

    pub fn cache_stats(&self) -> CacheStats {
        self.cache.stats(&self.graph)
    }

    /// Number of evaluations so far.
    pub fn sequence(&self) -> u64 {
        self.seq
    }

    /// Distinct request subjects, most recent first.
    pub fn recent_subjects(&self) -> impl Iterator<Item = &str> {
        self.recent.iter().map(String::as_str)
    }

    fn touch_recent(&mut self, subject: &str) {
        let capacity = self.config.cache.recent_subjects;
        if capacity == 0 {
            return;
        }
        if let Some(i) = self.recent.iter().position(|s| s == subject) {
            self.recent.remove(i);
        }
        self.recent.push_front(subject.to_owned());
        self.recent.truncate(capacity);
    }

    pub fn evaluate(&mut self, request: &Request) -> Result<EvalOutcome> {
        let s = self.graph.require(&request.subject)?;
        let o = self.graph.require(&request.object)?;
        self.seq += 1;
        let seq = self.seq;
        self.touch_recent(&request.subject);

        let caching = self.config.cache.enabled;
        if caching {
            self.cache.retire(&mut self.graph, seq);
        }
        let cached = if caching {
            self.cache.lookup(&self.graph, s, o, seq)
        } else {
            None
        };
        let cache_hit = cached.is_some();
        let (principals, metrics, matched_rules) = match cached {
            Some(mp) => (mp, EvalMetrics::default(), Vec::new()),
            None => {
                let m = match_principals(&self.graph, &request.subject, &request.object, &self.pm)?;
                (m.principals, m.metrics, m.matched_rules)
            }
        };
        let authorization = authorize(&principals, request, &self.auth);
        let decision = authorization.decision;

        let mut written = Vec::new();
        if caching
            && self.config.cache.write_on_eval
            && !cache_hit
            && self
                .cache
                .insert(&mut self.graph, s, o, principals.clone(), seq)
        {
            written.push(Edge::new(
                &request.subject,
                &request.object,
                EdgeLabel::Principals(principals.clone()),
            ));
        }
        for edge in audit::write_decision_audit(&mut self.graph, request, decision)? {
            self.after_internal_write(&edge);
            written.push(edge);
        }
        if let Some(writer) = &self.interests {
            for edge in writer.write(&mut self.graph, request, decision)? {
                self.after_internal_write(&edge);
                written.push(edge);
            }
        }

        Ok(EvalOutcome {
            decision,
            matched_principals: principals,
            decision_set: authorization.decision_set,
            metrics,
            cache_hit,
            written_edges: written,
            matched_rules,
            applicable_rules: authorization.applicable,
        })
    }

    /// Audit and interest edges only invalidate when some principal-matching
    /// condition mentions their label; otherwise no matching result can
    /// change.
    fn after_internal_write(&mut self, edge: &Edge) {
        if self.pm.references(&edge.label) {
            self.cache
                .invalidate(&mut self.graph, &ChangeEvent::EdgeAdded(edge.clone()));
        }
    }

    fn check_mutation(&self, label: &str) -> Result<()> {
        if self.config.cw.enabled && label == self.config.cw.membership_label {
            return Err(Error::Config(format!(
                "membership edges `{label}` are fixed while the Chinese Wall hook is enabled"
            )));
        }
        Ok(())
    }

    /// Adds a relationship edge, checked against the model. Returns the number
    /// of caching edges purged.
    pub fn add_relationship(&mut self, src: &str, label: &str, dst: &str) -> Result<Option<usize>> {
        self.check_mutation(label)?;
        if !self.graph.add_edge(src, dst, EdgeLabel::rel(label))? {
            return Ok(None);
        }
        let event = ChangeEvent::EdgeAdded(Edge::new(src, dst, EdgeLabel::rel(label)));
        Ok(Some(self.cache.invalidate(&mut self.graph, &event)))
    }

    /// Removes a relationship edge. Returns `None` when it did not exist,
    /// else the number of caching edges purged.
    pub fn remove_relationship(
        &mut self,
        src: &str,
        label: &str,
        dst: &str,
    ) -> Result<Option<usize>> {
        self.check_mutation(label)?;
        let edge_label = EdgeLabel::rel(label);
        if !self.graph.remove_edge(src, dst, &edge_label)? {
            return Ok(None);
        }
        let event = ChangeEvent::EdgeRemoved(Edge::new(src, dst, edge_label));
        Ok(Some(self.cache.invalidate(&mut self.graph, &event)))
    }

    /// Replaces both rule lists and flushes the cache.
    pub fn reload_policy(&mut self, policy: PolicySet) -> Result<usize> {
        let (pm, auth) = build_policies(&self.graph, policy, &self.config)?;
        self.pm = pm;
        self.auth = auth;
        Ok(self
            .cache
            .invalidate(&mut self.graph, &ChangeEvent::PolicyChanged))
    }

    pub fn set_match_strategy(&mut self, strategy: MatchStrategy) -> usize {
        self.config.pms = strategy;
        self.pm = self.pm.clone().with_strategy(strategy);
        self.cache
            .invalidate(&mut self.graph, &ChangeEvent::StrategyChanged)
    }

    pub fn precache(&mut self, strategy: &PrecacheStrategy, budget: usize) -> Result<usize> {
        cache::precache(self, strategy, budget)
    }

    /// Removes all caching edges, or only those leaving `subject`.
    pub fn purge_cache(&mut self, subject: Option<&str>) -> Result<usize> {
        match subject {
            Some(s) => {
                let id = self.graph.require(s)?;
                Ok(self.cache.purge_subject(&mut self.graph, id))
            }
            None => Ok(self.cache.flush(&mut self.graph)),
        }
    }

    pub fn audit_log(&self) -> Vec<AuditRecord> {
        audit::audit_log(&self.graph)
    }
}

fn build_policies(
    graph: &SystemGraph,
    policy: PolicySet,
    config: &EngineConfig,
) -> Result<(PrincipalMatchingPolicy, AuthorizationPolicy)> {
    for rule in &policy.pm {
        if let RuleCondition::Path(pc) = &rule.condition {
            for label in pc.labels() {
                if let PathLabel::Rel(r) = label {
                    if !graph.model().has_label(r) {
                        return Err(Error::UnresolvedReference(format!(
                            "label `{r}` in principal-matching rule for `{}`",
                            rule.principal
                        )));
                    }
                }
            }
        }
    }
    let pm = PrincipalMatchingPolicy::new(policy.pm, config.pms)?;
    let mut auth = AuthorizationPolicy::new(policy.auth, config.crs);
    auth.default_decision = config.default_decision;
    Ok((pm, auth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SystemModel;
    use crate::policy::{AuthorizationRule, PrincipalMatchingRule, Target};

    fn g1() -> SystemGraph {
        let mut m = SystemModel::new();
        m.add_type("t");
        for l in ["r1", "r2", "r3"] {
            m.add_label(l, false);
            m.add_permissible("t", l, "t").unwrap();
        }
        let mut g = SystemGraph::new(m);
        for v in ["v1", "v2", "v3", "v4", "v5"] {
            g.add_node(v, "t").unwrap();
        }
        g.add_edge("v1", "v3", EdgeLabel::rel("r1")).unwrap();
        g.add_edge("v2", "v3", EdgeLabel::rel("r2")).unwrap();
        g.add_edge("v3", "v4", EdgeLabel::rel("r3")).unwrap();
        g
    }

    fn rho() -> PolicySet {
        let pm = [
            ("r1", "p1"),
            ("r2", "p2"),
            ("r3", "p3"),
            ("r1 . r3", "p4"),
            ("r2 . r3", "p5"),
        ]
        .into_iter()
        .map(|(pc, p)| PrincipalMatchingRule::new(pc.parse().unwrap(), p))
        .collect();
        let auth = vec![
            AuthorizationRule::new("p5", Target::Any, Target::exact("a1"), Decision::Allow),
            AuthorizationRule::new("p5", Target::Any, Target::exact("a2"), Decision::Deny),
        ];
        PolicySet::new(pm, auth)
    }

    #[test]
    fn cached_flow() {
        let mut e = Engine::new(g1(), rho(), EngineConfig::default()).unwrap();
        let first = e.evaluate(&Request::new("v2", "v4", "a1")).unwrap();
        assert_eq!(first.decision, Decision::Allow);
        assert_eq!(first.matched_principals, ["p5"]);
        assert!(!first.cache_hit);
        assert_eq!(
            first.written_edges,
            vec![
                Edge::new("v2", "v4", EdgeLabel::Principals(vec!["p5".into()])),
                Edge::new("v2", "v4", EdgeLabel::AllowAudit("a1".into())),
            ]
        );
        let second = e.evaluate(&Request::new("v2", "v4", "a2")).unwrap();
        assert_eq!(second.decision, Decision::Deny);
        assert!(second.cache_hit);
        assert_eq!(second.metrics, EvalMetrics::default());
        assert_eq!(second.decision_set.to_string(), "{0}");
    }

    #[test]
    fn relationship_change_flushes() {
        let mut e = Engine::new(g1(), rho(), EngineConfig::default()).unwrap();
        e.evaluate(&Request::new("v2", "v4", "a1")).unwrap();
        assert_eq!(e.add_relationship("v1", "r2", "v3").unwrap(), Some(1));
        let again = e.evaluate(&Request::new("v2", "v4", "a1")).unwrap();
        assert!(!again.cache_hit);
        assert_eq!(e.add_relationship("v1", "r2", "v3").unwrap(), None);
    }

    #[test]
    fn diamond_self_request() {
        let mut m = SystemModel::new();
        m.add_type("t");
        let mut g = SystemGraph::new(m);
        g.add_node("u", "t").unwrap();
        let policy = PolicySet::new(
            vec![PrincipalMatchingRule::new("<>".parse().unwrap(), "p")],
            vec![AuthorizationRule::new(
                "p",
                Target::Any,
                Target::Any,
                Decision::Allow,
            )],
        );
        let mut e = Engine::new(g, policy, EngineConfig::default()).unwrap();
        assert_eq!(
            e.evaluate(&Request::new("u", "u", "x")).unwrap().decision,
            Decision::Allow
        );
    }

    #[test]
    fn unknown_node_is_an_error() {
        let mut e = Engine::new(g1(), rho(), EngineConfig::default()).unwrap();
        assert!(matches!(
            e.evaluate(&Request::new("zz", "v4", "a1")),
            Err(Error::UnknownNode(_))
        ));
        assert_eq!(e.sequence(), 0);
    }

    #[test]
    fn unresolved_label_is_rejected() {
        let policy = PolicySet::new(
            vec![PrincipalMatchingRule::new("r9".parse().unwrap(), "p")],
            vec![],
        );
        assert!(matches!(
            Engine::new(g1(), policy, EngineConfig::default()),
            Err(Error::UnresolvedReference(_))
        ));
    }

    #[test]
    fn recent_subjects_are_distinct_and_bounded() {
        let config = EngineConfig {
            cache: CacheConfig {
                recent_subjects: 2,
                ..CacheConfig::default()
            },
            ..EngineConfig::default()
        };
        let mut e = Engine::new(g1(), rho(), config).unwrap();
        for s in ["v1", "v2", "v1", "v3"] {
            e.evaluate(&Request::new(s, "v4", "a1")).unwrap();
        }
        assert_eq!(e.recent_subjects().collect::<Vec<_>>(), ["v3", "v1"]);
    }

    #[test]
    fn precache_then_hit() {
        let mut e = Engine::new(g1(), rho(), EngineConfig::default()).unwrap();
        let strategy = PrecacheStrategy::ObjectFocused {
            objects: vec!["v4".into()],
            subjects: vec!["v2".into(), "nobody".into()],
        };
        assert_eq!(e.precache(&strategy, 0).unwrap(), 0);
        assert_eq!(e.precache(&strategy, 5).unwrap(), 1);
        assert_eq!(e.graph().edge_count(EdgeKind::DecisionAudit), 0);
        let out = e.evaluate(&Request::new("v2", "v4", "a1")).unwrap();
        assert!(out.cache_hit);
        assert_eq!(out.metrics.edges_considered, 0);
    }

    #[test]
    fn precache_is_a_no_op_without_cache() {
        let mut e = Engine::new(g1(), rho(), EngineConfig::default().without_cache()).unwrap();
        let strategy = PrecacheStrategy::SubjectFocused {
            recent_k: 1,
            targets: vec!["v4".into()],
        };
        e.evaluate(&Request::new("v2", "v4", "a1")).unwrap();
        assert_eq!(e.precache(&strategy, 5).unwrap(), 0);
    }

    #[test]
    fn reload_flushes_everything() {
        let mut e = Engine::new(g1(), rho(), EngineConfig::default()).unwrap();
        e.evaluate(&Request::new("v2", "v4", "a1")).unwrap();
        e.evaluate(&Request::new("v1", "v4", "a1")).unwrap();
        assert_eq!(e.reload_policy(rho()).unwrap(), 2);
        assert_eq!(e.cache_stats().size, 0);
    }
}
