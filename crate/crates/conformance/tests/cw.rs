use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rppm_conformance::fixtures::{self, G4_BASE, G4_CW};
use rppm_conformance::scenarios::{cw_scenario, run_cw};
use rppm_core::constraints::generate_chinese_wall;
use rppm_core::formats::serialize_graph;
use rppm_core::policy::{ConflictResolution, MatchStrategy};
use rppm_core::{Decision, EdgeKind, EngineConfig};

#[test]
fn generated_policy_matches_fixture() {
    let docs = G4_BASE.documents();
    let generated = generate_chinese_wall(&docs.policy, &docs.config.cw, "p_cw").unwrap();
    assert_eq!(generated, G4_CW.documents().policy);
}

#[test]
fn golden_trace_overlay() {
    for cache in [false, true] {
        let mut engine = G4_CW.engine(|c| c.cache.enabled = cache);
        let got: Vec<Decision> = fixtures::requests(fixtures::G4_REQUESTS)
            .iter()
            .map(|q| engine.evaluate(q).unwrap().decision)
            .collect();
        use Decision::{Allow, Deny};
        assert_eq!(got, [Allow, Allow, Deny, Allow]);
        let mut g = engine.into_graph();
        for e in g.edges_of_kind(EdgeKind::Caching) {
            g.remove_edge(&e.src, &e.dst, &e.label).unwrap();
        }
        let text = serialize_graph(&g, true);
        let overlay = &text[text.find("# DECISIONS").unwrap()..];
        assert_eq!(
            overlay,
            "# DECISIONS\n\
             decision u1 f1 allow read\n\
             decision u1 f4 allow read\n\
             decision u1 f2 deny read\n\
             decision u1 f3 allow read\n\
             # INTERESTS\n\
             interest u1 active c1\n\
             interest u1 blocked c2\n\
             interest u1 active c3\n"
        );
    }
}

fn assert_traces(seed: u64, traces: usize, config: EngineConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..traces {
        let s = cw_scenario(&mut rng, i % 2 == 1);
        let run = run_cw(&s, config.clone()).unwrap();
        assert!(run.mismatches.is_empty(), "trace {i}: {:?}", run.mismatches);
        assert!(run.violations.is_empty(), "trace {i}: {:?}", run.violations);
    }
}

#[test]
fn traces_match_history_oracle() {
    assert_traces(31, 300, EngineConfig::default());
    assert_traces(32, 300, EngineConfig::default().without_cache());
}

#[test]
fn robust_under_first_match_strategies() {
    for crs in [
        ConflictResolution::DenyOverride,
        ConflictResolution::AllowOverride,
        ConflictResolution::FirstMatch,
    ] {
        let config = EngineConfig {
            pms: MatchStrategy::FirstMatch,
            crs,
            ..EngineConfig::default()
        };
        assert_traces(33, 150, config);
    }
}

#[test]
fn denied_requests_leave_interests_alone() {
    let mut engine = G4_CW.engine(|_| {});
    for q in fixtures::requests(fixtures::G4_REQUESTS).iter().take(3) {
        engine.evaluate(q).unwrap();
    }
    let interests = engine.graph().edges_of_kind(EdgeKind::InterestAudit);
    assert_eq!(interests.len(), 2);
    assert!(interests
        .iter()
        .all(|e| e.dst != "c2" || e.label == rppm_core::EdgeLabel::BlockedInterest));
}
