//! Randomized conformance suites shared by the property tests and the
//! acceptance run. Each suite is deterministic in its seed.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rppm_core::cache::{CacheConfig, PrecacheStrategy};
use rppm_core::matcher::{EvalMetrics, PathAutomaton};
use rppm_core::path::simplify;
use rppm_core::policy::{
    AuthorizationRule, ConflictResolution, PolicySet, PrincipalMatchingRule, Target,
};
use rppm_core::{
    Decision, EdgeKind, EdgeLabel, Engine, EngineConfig, PathCondition, PathLabel, Request,
    SystemGraph,
};

use crate::generate::{self, node, LABELS};
use crate::oracle::Oracle;

const MAX_REPORTED: usize = 10;

#[derive(Debug, Clone, Default)]
pub struct Report {
    /// Randomized instances run.
    pub instances: usize,
    /// Individual comparisons or invariant checks performed.
    pub checks: usize,
    pub failure_count: usize,
    /// The first few failures.
    pub failures: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.failure_count == 0
    }

    fn fail(&mut self, message: impl Into<String>) {
        self.failure_count += 1;
        if self.failures.len() < MAX_REPORTED {
            self.failures.push(message.into());
        }
    }

    fn check(&mut self, ok: bool, message: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.fail(message());
        }
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} instances, {} checks, {} failures",
            self.instances, self.checks, self.failure_count
        )?;
        for m in &self.failures {
            write!(f, "\n    {m}")?;
        }
        Ok(())
    }
}

/// Automaton matcher against the relation oracle on random graphs with up to
/// eight nodes and conditions up to depth four, for every node pair. Also
/// checks the product-state bound `n <= |V| * states` per call.
pub fn matcher_equivalence(seed: u64, instances: usize) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = generate::path_labels(true);
    let mut report = Report::default();
    for _ in 0..instances {
        report.instances += 1;
        let g = generate::graph(&mut rng, 8, true);
        let pc = generate::path(&mut rng, 4, &labels);
        let simple = simplify(&pc);
        let automaton = PathAutomaton::compile(&simple);
        let oracle = Oracle::new(&g);
        let relation = oracle.relation(simple.as_condition());
        let bound = (g.node_count() * automaton.state_count()) as u64;
        for (u, _) in g.nodes() {
            for (v, _) in g.nodes() {
                let mut metrics = EvalMetrics::default();
                let uid = g.node_id(u).unwrap();
                let got = automaton.satisfies(&g, uid, g.node_id(v).unwrap(), &mut metrics);
                let want = relation.get(oracle.index(u), oracle.index(v));
                report.check(got == want, || {
                    format!("{simple} on ({u},{v}): matcher {got}, oracle {want}")
                });
                report.check(metrics.nodes_visited <= bound, || {
                    format!(
                        "{simple} on ({u},{v}): {} states visited, bound {bound}",
                        metrics.nodes_visited
                    )
                });
            }
        }
    }
    report
}

fn structurally_simple(pc: &PathCondition) -> bool {
    match pc {
        PathCondition::Diamond | PathCondition::Edge(_) | PathCondition::ReversedEdge(_) => true,
        PathCondition::Reverse(_) => false,
        PathCondition::Concat(a, b) => {
            !matches!(**a, PathCondition::Diamond)
                && !matches!(**b, PathCondition::Diamond)
                && structurally_simple(a)
                && structurally_simple(b)
        }
        PathCondition::Plus(a) => !matches!(**a, PathCondition::Diamond) && structurally_simple(a),
    }
}

/// Original against simplified condition under the oracle, on random graphs
/// with up to six nodes and conditions up to depth five.
pub fn simplifier_soundness(seed: u64, instances: usize) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = generate::path_labels(true);
    let mut report = Report::default();
    for _ in 0..instances {
        report.instances += 1;
        let pc = generate::path(&mut rng, 5, &labels);
        let simple = simplify(&pc);
        let sc = simple.as_condition();
        report.check(structurally_simple(sc), || {
            format!("{pc} simplified to non-simple {sc}")
        });
        report.check(sc.edge_count() <= pc.edge_count(), || {
            format!("{pc} gained leaves: {sc}")
        });
        report.check(simplify(sc) == simple, || {
            format!("{pc}: simplify not idempotent")
        });
        for _ in 0..2 {
            let g = generate::graph(&mut rng, 6, true);
            let oracle = Oracle::new(&g);
            let before = oracle.relation(&pc);
            let after = oracle.relation(sc);
            report.check(before == after, || {
                format!("{pc} and {sc} differ on a {}-node graph", g.node_count())
            });
        }
    }
    report
}

/// Extra label forming a ring through every node, so that every matching
/// search has at least one adjacency entry to inspect.
const RING: &str = "a";

fn ring_graph<R: Rng>(rng: &mut R, max_nodes: usize) -> SystemGraph {
    let mut g = generate::graph(rng, max_nodes, false);
    let n = g.node_count();
    for i in 0..n {
        g.add_edge(&node(i), &node((i + 1) % n), EdgeLabel::rel(RING))
            .unwrap();
    }
    g
}

fn is_ring_edge(n: usize, s: usize, l: &str, d: usize) -> bool {
    l == RING && d == (s + 1) % n
}

fn random_policy<R: Rng>(rng: &mut R, n: usize) -> PolicySet {
    let mut labels = generate::path_labels(false);
    labels.push(PathLabel::Allow("x".into()));
    labels.push(PathLabel::Deny("y".into()));
    let mut pm = Vec::new();
    for i in 0..rng.gen_range(1..=4) {
        let pc = loop {
            let pc = generate::path(rng, 3, &labels);
            if i > 0 || *simplify(&pc).as_condition() != PathCondition::Diamond {
                break pc;
            }
        };
        pm.push(PrincipalMatchingRule::new(
            pc,
            format!("p{}", rng.gen_range(0..3)),
        ));
    }
    if rng.gen_bool(0.2) {
        pm.push(PrincipalMatchingRule::default_rule("pd"));
    }
    let principals = ["p0", "p1", "p2", "pd"];
    let auth = (0..rng.gen_range(1..=5))
        .map(|_| {
            let object = if rng.gen_bool(0.7) {
                Target::Any
            } else {
                Target::exact(node(rng.gen_range(0..n)))
            };
            let action = match rng.gen_range(0..3) {
                0 => Target::Any,
                1 => Target::exact("x"),
                _ => Target::exact("y"),
            };
            let decision = if rng.gen_bool(0.6) {
                Decision::Allow
            } else {
                Decision::Deny
            };
            AuthorizationRule::new(*principals.choose(rng).unwrap(), object, action, decision)
        })
        .collect();
    PolicySet::new(pm, auth)
}

#[derive(Debug, Clone)]
enum Op {
    Eval(Request),
    Add(String, &'static str, String),
    Del(String, &'static str, String),
    Reload(PolicySet),
    Precache(PrecacheStrategy),
    Purge,
}

fn random_op<R: Rng>(rng: &mut R, g: &SystemGraph) -> Op {
    let n = g.node_count();
    let pick = |rng: &mut R| node(rng.gen_range(0..n));
    match rng.gen_range(0..100) {
        0..=59 => Op::Eval(Request::new(
            pick(rng),
            pick(rng),
            if rng.gen_bool(0.5) { "x" } else { "y" },
        )),
        60..=74 => Op::Add(pick(rng), LABELS.choose(rng).unwrap(), pick(rng)),
        75..=86 => {
            let candidates: Vec<_> = g
                .edges_of_kind(EdgeKind::Relationship)
                .into_iter()
                .filter(|e| {
                    let (s, d) = (e.src[1..].parse().unwrap(), e.dst[1..].parse().unwrap());
                    !is_ring_edge(n, s, &e.label.to_string(), d)
                })
                .collect();
            match candidates.choose(rng) {
                Some(e) => {
                    let label = LABELS
                        .iter()
                        .find(|l| e.label == EdgeLabel::rel(**l))
                        .unwrap();
                    Op::Del(e.src.clone(), label, e.dst.clone())
                }
                None => Op::Purge,
            }
        }
        87..=91 => Op::Reload(random_policy(rng, n)),
        92..=96 => {
            let targets = (0..rng.gen_range(1..=3)).map(|_| pick(rng)).collect();
            if rng.gen_bool(0.5) {
                Op::Precache(PrecacheStrategy::SubjectFocused {
                    recent_k: rng.gen_range(1..=3),
                    targets,
                })
            } else {
                let subjects = (0..rng.gen_range(1..=3)).map(|_| pick(rng)).collect();
                Op::Precache(PrecacheStrategy::ObjectFocused {
                    objects: targets,
                    subjects,
                })
            }
        }
        _ => Op::Purge,
    }
}

fn apply(engine: &mut Engine, op: &Op) -> rppm_core::Result<Option<rppm_core::EvalOutcome>> {
    match op {
        Op::Eval(q) => return engine.evaluate(q).map(Some),
        Op::Add(s, l, d) => {
            engine.add_relationship(s, l, d)?;
        }
        Op::Del(s, l, d) => {
            engine.remove_relationship(s, l, d)?;
        }
        Op::Reload(p) => {
            engine.reload_policy(p.clone())?;
        }
        Op::Precache(strategy) => {
            engine.precache(strategy, 4)?;
        }
        Op::Purge => {
            engine.purge_cache(None)?;
        }
    }
    Ok(None)
}

fn random_cache_config<R: Rng>(rng: &mut R) -> CacheConfig {
    CacheConfig {
        max_total: rng.gen_bool(0.3).then(|| rng.gen_range(1..=6)),
        max_out_degree: rng.gen_bool(0.3).then(|| rng.gen_range(1..=3)),
        retirement_age: rng.gen_bool(0.3).then(|| rng.gen_range(1..=8)),
        ..CacheConfig::default()
    }
}

/// Counts of the transparency run beyond pass/fail.
#[derive(Debug, Clone, Default)]
pub struct TransparencyStats {
    pub evaluations: usize,
    pub cache_hits: usize,
}

/// Random interleavings of evaluations, relationship edge changes, policy
/// reloads, precaching and purges, run on a caching engine (flush-all
/// invalidation) and on a non-caching one. Decisions must agree; every hit
/// must cost nothing while the same cold evaluation inspects at least one
/// edge; surviving caching edges must postdate the last invalidation.
pub fn cache_transparency(seed: u64, runs: usize) -> (Report, TransparencyStats) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Report::default();
    let mut stats = TransparencyStats::default();
    for run in 0..runs {
        report.instances += 1;
        let g = ring_graph(&mut rng, 7);
        let policy = random_policy(&mut rng, g.node_count());
        let crs = *[
            ConflictResolution::DenyOverride,
            ConflictResolution::AllowOverride,
            ConflictResolution::FirstMatch,
        ]
        .choose(&mut rng)
        .unwrap();
        let config = EngineConfig {
            crs,
            cache: random_cache_config(&mut rng),
            ..EngineConfig::default()
        };
        let mut cached = Engine::new(g.clone(), policy.clone(), config.clone()).unwrap();
        let mut cold = Engine::new(g, policy, config.without_cache()).unwrap();
        for step in 0..rng.gen_range(10..=40) {
            let op = random_op(&mut rng, cached.graph());
            let hot = apply(&mut cached, &op);
            let reference = apply(&mut cold, &op);
            let (hot, reference) = match (hot, reference) {
                (Ok(h), Ok(r)) => (h, r),
                (h, r) => {
                    report.check(h.is_err() == r.is_err(), || {
                        format!("run {run} step {step}: {op:?} {h:?} vs {r:?}")
                    });
                    continue;
                }
            };
            if let (Some(h), Some(r)) = (hot, reference) {
                stats.evaluations += 1;
                report.check(h.decision == r.decision, || {
                    format!(
                        "run {run} step {step}: {op:?} cached {} uncached {}",
                        h.decision, r.decision
                    )
                });
                if h.cache_hit {
                    stats.cache_hits += 1;
                    report.check(h.metrics == EvalMetrics::default(), || {
                        format!("run {run} step {step}: hit cost {:?}", h.metrics)
                    });
                    report.check(r.metrics.edges_considered >= 1, || {
                        format!("run {run} step {step}: cold evaluation inspected no edge")
                    });
                }
            }
            check_staleness(&cached, &mut report, run, step);
        }
    }
    (report, stats)
}

fn check_staleness(engine: &Engine, report: &mut Report, run: usize, step: usize) {
    let g = engine.graph();
    let floor = engine.cache().last_invalidation_rev();
    for e in g.edges_of_kind(EdgeKind::Caching) {
        let (s, o) = (g.node_id(&e.src).unwrap(), g.node_id(&e.dst).unwrap());
        let created = engine.cache().meta(s, o).map(|m| m.created_rev);
        report.check(created.is_some_and(|c| c >= floor), || {
            format!("run {run} step {step}: caching edge {e} created at {created:?}, last invalidation {floor}")
        });
    }
}

/// Random operations under `max_total = 16` and `max_out_degree = 2`; after
/// every operation the caching edge count and every node's caching
/// out-degree must respect the thresholds.
pub fn threshold_enforcement(seed: u64, runs: usize) -> Report {
    const MAX_TOTAL: usize = 16;
    const MAX_OUT: usize = 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Report::default();
    let mut evictions = 0;
    for run in 0..runs {
        report.instances += 1;
        let g = ring_graph(&mut rng, 12);
        let policy = random_policy(&mut rng, g.node_count());
        let config = EngineConfig {
            cache: CacheConfig {
                max_total: Some(MAX_TOTAL),
                max_out_degree: Some(MAX_OUT),
                ..CacheConfig::default()
            },
            ..EngineConfig::default()
        };
        let mut engine = Engine::new(g, policy, config).unwrap();
        for step in 0..rng.gen_range(20..=80) {
            let op = match rng.gen_range(0..4) {
                0 => {
                    let n = engine.graph().node_count();
                    let all: Vec<String> = (0..n).map(node).collect();
                    Op::Precache(PrecacheStrategy::ObjectFocused {
                        objects: all.clone(),
                        subjects: all,
                    })
                }
                _ => random_op(&mut rng, engine.graph()),
            };
            let _ = apply(&mut engine, &op);
            let g = engine.graph();
            let total = g.edge_count(EdgeKind::Caching);
            report.check(total <= MAX_TOTAL, || {
                format!("run {run} step {step}: {total} caching edges")
            });
            for (name, _) in g.nodes() {
                let out = g.caching_out_degree(g.node_id(name).unwrap());
                report.check(out <= MAX_OUT, || {
                    format!("run {run} step {step}: {name} has {out} caching edges")
                });
            }
        }
        evictions += engine.cache_stats().evictions;
    }
    report.check(runs == 0 || evictions > 0, || {
        "limits never forced an eviction".into()
    });
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_briefly() {
        assert!(matcher_equivalence(1, 30).passed());
        assert!(simplifier_soundness(2, 30).passed());
        assert!(cache_transparency(3, 10).0.passed());
        assert!(threshold_enforcement(4, 5).passed());
    }
}
