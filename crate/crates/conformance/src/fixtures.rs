//! The worked examples, as document text.

use std::path::PathBuf;

use rppm_core::formats::{parse_config, DocumentSet};
use rppm_core::{Engine, EngineConfig, Request};

#[derive(Debug, Clone, Copy)]
pub struct Fixture {
    pub model: &'static str,
    pub graph: &'static str,
    pub policy: &'static str,
    pub config: Option<&'static str>,
}

/// Caching example: three-node chain `v1 -r1-> v3`, `v2 -r2-> v3`, `v3 -r3-> v4`.
pub const G1: Fixture = Fixture {
    model: include_str!("../../../fixtures/g1.model"),
    graph: include_str!("../../../fixtures/g1.graph"),
    policy: include_str!("../../../fixtures/g1.policy"),
    config: None,
};

/// Separation of duty on one object shared by three users.
pub const G2_SOD: Fixture = Fixture {
    model: include_str!("../../../fixtures/g2.model"),
    graph: include_str!("../../../fixtures/g2.graph"),
    policy: include_str!("../../../fixtures/g2-sod.policy"),
    config: None,
};

pub const G2_BASE: Fixture = Fixture {
    policy: include_str!("../../../fixtures/g2-base.policy"),
    ..G2_SOD
};

/// Chinese Wall over three clients in two conflict classes.
pub const G4_CW: Fixture = Fixture {
    model: include_str!("../../../fixtures/g4.model"),
    graph: include_str!("../../../fixtures/g4.graph"),
    policy: include_str!("../../../fixtures/g4-cw.policy"),
    config: Some(include_str!("../../../fixtures/g4.conf")),
};

pub const G4_BASE: Fixture = Fixture {
    policy: include_str!("../../../fixtures/g4-base.policy"),
    ..G4_CW
};

pub const G2_REQUESTS: &str = include_str!("../../../fixtures/g2-sod.requests");
pub const G4_REQUESTS: &str = include_str!("../../../fixtures/g4.requests");

impl Fixture {
    pub fn documents(&self) -> DocumentSet {
        DocumentSet::parse(self.model, self.graph, self.policy, self.config)
            .expect("fixture parses")
    }

    pub fn config(&self) -> EngineConfig {
        self.config
            .map(|c| parse_config(c).expect("fixture config parses"))
            .unwrap_or_default()
    }

    /// An engine over the fixture with its configuration adjusted by `tweak`.
    pub fn engine(&self, tweak: impl FnOnce(&mut EngineConfig)) -> Engine {
        let mut docs = self.documents();
        tweak(&mut docs.config);
        docs.into_engine().expect("fixture engine builds")
    }
}

/// Parses `subject object action` lines.
pub fn requests(text: &str) -> Vec<Request> {
    text.lines()
        .filter_map(|l| {
            let t: Vec<&str> = l.split_whitespace().collect();
            (t.len() == 3).then(|| Request::new(t[0], t[1], t[2]))
        })
        .collect()
}

/// Directory holding the fixture files.
pub fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}
