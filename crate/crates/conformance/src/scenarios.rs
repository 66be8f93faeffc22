//! Random request traces for the separation-of-duty and Chinese Wall
//! constructions, checked against the history oracles.
//!
//! Base decisions handed to the oracles are computed from the generated
//! layout itself, never by the engine.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rppm_core::audit::ChineseWallConfig;
use rppm_core::constraints::{
    cw_oracle, generate_chinese_wall, generate_sod, sod_oracle, CwLayout, SodSpec,
};
use rppm_core::policy::{AuthorizationRule, PolicySet, PrincipalMatchingRule, Target};
use rppm_core::{
    Decision, EdgeKind, EdgeLabel, Engine, EngineConfig, Request, SystemGraph, SystemModel,
};

/// One request of a trace where engine and oracle disagreed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub step: usize,
    pub request: Request,
    pub engine: Decision,
    pub oracle: Decision,
}

#[derive(Debug, Clone)]
pub struct SodScenario {
    pub graph: SystemGraph,
    pub spec: SodSpec,
    pub base: PolicySet,
    /// Subject/object pairs joined by an `r` edge; exactly these are allowed
    /// by the base policy.
    pub related: BTreeSet<(String, String)>,
    pub requests: Vec<Request>,
}

/// Constrained object `o`; a second object `o2` unless `single_object`.
/// Actions are `a1..an` plus the unconstrained `z`.
pub fn sod_scenario<R: Rng>(rng: &mut R, basic: bool, single_object: bool) -> SodScenario {
    let mut m = SystemModel::new();
    m.add_type("user");
    m.add_type("object");
    m.add_label("r", false);
    m.add_permissible("user", "r", "object").unwrap();
    let mut graph = SystemGraph::new(m);

    let users: Vec<String> = (1..=rng.gen_range(1..=5))
        .map(|i| format!("u{i}"))
        .collect();
    let objects: Vec<&str> = if single_object {
        vec!["o"]
    } else {
        vec!["o", "o2"]
    };
    for u in &users {
        graph.add_node(u, "user").unwrap();
    }
    for o in &objects {
        graph.add_node(o, "object").unwrap();
    }
    let mut related = BTreeSet::new();
    for u in &users {
        for o in &objects {
            if rng.gen_bool(0.8) {
                graph.add_edge(u, o, EdgeLabel::rel("r")).unwrap();
                related.insert((u.clone(), (*o).to_owned()));
            }
        }
    }

    let n = rng.gen_range(2..=4);
    let actions: Vec<String> = (1..=n).map(|i| format!("a{i}")).collect();
    let action_refs: Vec<&str> = actions.iter().map(String::as_str).collect();
    let spec = if basic {
        SodSpec::basic("o", &action_refs, "p_seen")
    } else {
        SodSpec::general("o", &action_refs)
    };
    let mut all_actions = actions.clone();
    all_actions.push("z".into());

    let requests = (0..rng.gen_range(1..=30))
        .map(|_| {
            Request::new(
                users.choose(rng).unwrap(),
                *objects.choose(rng).unwrap(),
                all_actions.choose(rng).unwrap(),
            )
        })
        .collect();
    let base = PolicySet::new(
        vec![PrincipalMatchingRule::new("r".parse().unwrap(), "p")],
        vec![AuthorizationRule::new(
            "p",
            Target::Any,
            Target::Any,
            Decision::Allow,
        )],
    );
    SodScenario {
        graph,
        spec,
        base,
        related,
        requests,
    }
}

/// Runs the trace through an engine built with `config` and through the
/// oracle, returning every disagreement.
pub fn run_sod(scenario: &SodScenario, config: EngineConfig) -> rppm_core::Result<Vec<Mismatch>> {
    let policy = generate_sod(&scenario.base, &scenario.spec)?;
    let mut engine = Engine::new(scenario.graph.clone(), policy, config)?;
    let mut history = Vec::new();
    let mut mismatches = Vec::new();
    for (step, q) in scenario.requests.iter().enumerate() {
        let base = if scenario
            .related
            .contains(&(q.subject.clone(), q.object.clone()))
        {
            Decision::Allow
        } else {
            Decision::Deny
        };
        let expected = sod_oracle(&scenario.spec, &history, q, base);
        let got = engine.evaluate(q)?.decision;
        if got != expected {
            mismatches.push(Mismatch {
                step,
                request: q.clone(),
                engine: got,
                oracle: expected,
            });
        }
        history.push((q.clone(), expected));
    }
    Ok(mismatches)
}

#[derive(Debug, Clone)]
pub struct CwScenario {
    pub graph: SystemGraph,
    pub cw: ChineseWallConfig,
    pub base: PolicySet,
    pub layout: CwLayout,
    /// Companies each user's employer supplies, directly or through a partner.
    pub supplied: BTreeMap<String, BTreeSet<String>>,
    pub objects: Vec<String>,
    pub requests: Vec<Request>,
}

/// Up to three conflict classes of up to four clients, plus an occasional
/// client in no class, each owning up to three files. With `multi`, files may
/// sit in folders (`file -f-> folder -d-> client`) and employers may reach
/// clients through a partner employer, as in the two-path construction.
pub fn cw_scenario<R: Rng>(rng: &mut R, multi: bool) -> CwScenario {
    let mut m = SystemModel::new();
    for t in ["user", "employer", "client", "file", "folder", "coiclass"] {
        m.add_type(t);
    }
    for l in ["w", "s", "p", "d", "f", "m"] {
        m.add_label(l, false);
    }
    for (s, l, d) in [
        ("user", "w", "employer"),
        ("employer", "s", "client"),
        ("employer", "p", "employer"),
        ("file", "d", "client"),
        ("folder", "d", "client"),
        ("file", "f", "folder"),
        ("client", "m", "coiclass"),
    ] {
        m.add_permissible(s, l, d).unwrap();
    }
    let mut g = SystemGraph::new(m);
    let mut layout = CwLayout::new();
    let mut clients = Vec::new();
    let mut objects = Vec::new();

    let classes = rng.gen_range(1..=3);
    for i in 0..classes {
        let class = format!("i{i}");
        g.add_node(&class, "coiclass").unwrap();
        for _ in 0..rng.gen_range(1..=4) {
            let c = format!("c{}", clients.len());
            g.add_node(&c, "client").unwrap();
            g.add_edge(&c, &class, EdgeLabel::rel("m")).unwrap();
            layout.company(&c, &class);
            clients.push(c);
        }
    }
    if rng.gen_bool(0.3) {
        let c = format!("c{}", clients.len());
        g.add_node(&c, "client").unwrap();
        clients.push(c);
    }
    for c in &clients {
        for k in 0..rng.gen_range(1..=3) {
            let file = format!("{c}f{k}");
            g.add_node(&file, "file").unwrap();
            if multi && rng.gen_bool(0.5) {
                let folder = format!("{c}d{k}");
                g.add_node(&folder, "folder").unwrap();
                g.add_edge(&folder, c, EdgeLabel::rel("d")).unwrap();
                g.add_edge(&file, &folder, EdgeLabel::rel("f")).unwrap();
                layout.object(&folder, c);
                objects.push(folder);
            } else {
                g.add_edge(&file, c, EdgeLabel::rel("d")).unwrap();
            }
            layout.object(&file, c);
            objects.push(file);
        }
    }

    let employers: Vec<String> = (0..rng.gen_range(1..=2)).map(|i| format!("e{i}")).collect();
    let mut direct: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for e in &employers {
        g.add_node(e, "employer").unwrap();
        let supplies = direct.entry(e).or_default();
        for c in &clients {
            if rng.gen_bool(0.7) {
                g.add_edge(e, c, EdgeLabel::rel("s")).unwrap();
                supplies.insert(c.clone());
            }
        }
    }
    let mut partners: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    if multi && employers.len() > 1 && rng.gen_bool(0.5) {
        g.add_edge(&employers[0], &employers[1], EdgeLabel::rel("p"))
            .unwrap();
        partners
            .entry(&employers[0])
            .or_default()
            .push(&employers[1]);
    }

    let mut supplied = BTreeMap::new();
    let users: Vec<String> = (0..rng.gen_range(1..=4)).map(|i| format!("u{i}")).collect();
    for u in &users {
        g.add_node(u, "user").unwrap();
        let mut reach = BTreeSet::new();
        if rng.gen_bool(0.9) {
            let e = employers.choose(rng).unwrap();
            g.add_edge(u, e, EdgeLabel::rel("w")).unwrap();
            reach.extend(direct[e.as_str()].iter().cloned());
            for partner in partners.get(e.as_str()).into_iter().flatten() {
                reach.extend(direct[partner].iter().cloned());
            }
        }
        supplied.insert(u.clone(), reach);
    }

    let paths = if multi { vec!["d", "f . d"] } else { vec!["d"] };
    let cw = ChineseWallConfig {
        enabled: true,
        paths: paths.iter().map(|p| p.parse().unwrap()).collect(),
        membership_label: "m".into(),
    };
    let reach = if multi {
        vec![
            "w . s . ~d",
            "w . s . ~d . ~f",
            "w . p . s . ~d",
            "w . p . s . ~d . ~f",
        ]
    } else {
        vec!["w . s . ~d"]
    };
    let base = PolicySet::new(
        reach
            .iter()
            .map(|pc| PrincipalMatchingRule::new(pc.parse().unwrap(), "p"))
            .collect(),
        vec![AuthorizationRule::new(
            "p",
            Target::Any,
            Target::exact("read"),
            Decision::Allow,
        )],
    );
    let requests = (0..rng.gen_range(1..=30))
        .map(|_| {
            let action = if rng.gen_bool(0.85) { "read" } else { "write" };
            Request::new(
                users.choose(rng).unwrap(),
                objects.choose(rng).unwrap(),
                action,
            )
        })
        .collect();
    CwScenario {
        graph: g,
        cw,
        base,
        layout,
        supplied,
        objects,
        requests,
    }
}

/// Outcome of one Chinese Wall trace.
#[derive(Debug, Clone, Default)]
pub struct CwRun {
    pub mismatches: Vec<Mismatch>,
    /// Breaches of the writer invariants (exclusivity, justification, no
    /// interest after a denial).
    pub violations: Vec<String>,
}

pub fn run_cw(scenario: &CwScenario, config: EngineConfig) -> rppm_core::Result<CwRun> {
    let policy = generate_chinese_wall(&scenario.base, &scenario.cw, "p_cw")?;
    let config = EngineConfig {
        cw: scenario.cw.clone(),
        ..config
    };
    let mut engine = Engine::new(scenario.graph.clone(), policy, config)?;
    let mut history = Vec::new();
    let mut run = CwRun::default();
    for (step, q) in scenario.requests.iter().enumerate() {
        let company = &scenario.layout.company_of[&q.object];
        let base = if q.action == "read" && scenario.supplied[&q.subject].contains(company) {
            Decision::Allow
        } else {
            Decision::Deny
        };
        let expected = cw_oracle(&history, q, base, &scenario.layout)?;
        let out = engine.evaluate(q)?;
        if out.decision != expected {
            run.mismatches.push(Mismatch {
                step,
                request: q.clone(),
                engine: out.decision,
                oracle: expected,
            });
        }
        if !out.decision.is_allow()
            && out
                .written_edges
                .iter()
                .any(|e| e.kind() == EdgeKind::InterestAudit)
        {
            run.violations
                .push(format!("step {step}: interest edge written after a denial"));
        }
        history.push((q.clone(), expected));
        check_interest_invariants(engine.graph(), scenario, &mut run.violations, step);
    }
    Ok(run)
}

fn check_interest_invariants(
    graph: &SystemGraph,
    scenario: &CwScenario,
    out: &mut Vec<String>,
    step: usize,
) {
    let allowed: Vec<_> = graph
        .edges_of_kind(EdgeKind::DecisionAudit)
        .into_iter()
        .filter(|e| matches!(e.label, EdgeLabel::AllowAudit(_)))
        .collect();
    for e in graph.edges_of_kind(EdgeKind::InterestAudit) {
        if e.label != EdgeLabel::ActiveInterest {
            continue;
        }
        if graph.contains_edge(&e.src, &e.dst, &EdgeLabel::BlockedInterest) {
            out.push(format!(
                "step {step}: {} both active and blocked on {}",
                e.src, e.dst
            ));
        }
        let justified = allowed
            .iter()
            .any(|a| a.src == e.src && scenario.layout.company_of.get(&a.dst) == Some(&e.dst));
        if !justified {
            out.push(format!(
                "step {step}: unjustified active interest {} -> {}",
                e.src, e.dst
            ));
        }
    }
}
