//! Principal matching, authorization rules and conflict resolution.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{EdgeLabel, SystemGraph};
use crate::matcher::{EvalMetrics, PathAutomaton};
use crate::path::{simplify, PathCondition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Decision {
    Deny,
    Allow,
}

impl Decision {
    pub fn is_allow(self) -> bool {
        self == Decision::Allow
    }

    pub fn bit(self) -> u8 {
        match self {
            Decision::Deny => 0,
            Decision::Allow => 1,
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Allow => "allow",
            Decision::Deny => "deny",
        })
    }
}

impl FromStr for Decision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "allow" | "1" => Ok(Decision::Allow),
            "deny" | "0" => Ok(Decision::Deny),
            _ => Err(format!("expected `allow` or `deny`, found `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Request {
    pub subject: String,
    pub object: String,
    pub action: String,
}

impl Request {
    pub fn new(
        subject: impl Into<String>,
        object: impl Into<String>,
        action: impl Into<String>,
    ) -> Self {
        Self {
            subject: subject.into(),
            object: object.into(),
            action: action.into(),
        }
    }
}

impl fmt::Display for Request {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.subject, self.object, self.action)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RuleCondition {
    Path(PathCondition),
    /// Always satisfied; only allowed on the last rule.
    Top,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PrincipalMatchingRule {
    pub condition: RuleCondition,
    pub principal: String,
}

impl PrincipalMatchingRule {
    pub fn new(condition: PathCondition, principal: impl Into<String>) -> Self {
        Self {
            condition: RuleCondition::Path(condition),
            principal: principal.into(),
        }
    }

    pub fn default_rule(principal: impl Into<String>) -> Self {
        Self {
            condition: RuleCondition::Top,
            principal: principal.into(),
        }
    }
}

impl fmt::Display for PrincipalMatchingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.condition {
            RuleCondition::Path(pc) => write!(f, "pm {pc} -> {}", self.principal),
            RuleCondition::Top => write!(f, "pm default -> {}", self.principal),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchStrategy {
    #[default]
    AllMatch,
    FirstMatch,
}

impl fmt::Display for MatchStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchStrategy::AllMatch => "AllMatch",
            MatchStrategy::FirstMatch => "FirstMatch",
        })
    }
}

impl FromStr for MatchStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "allmatch" | "all" => Ok(MatchStrategy::AllMatch),
            "firstmatch" | "first" => Ok(MatchStrategy::FirstMatch),
            _ => Err(format!("unknown principal-matching strategy `{s}`")),
        }
    }
}

/// An ordered list of principal-matching rules with their compiled
/// automata and the strategy that combines them.
#[derive(Debug, Clone)]
pub struct PrincipalMatchingPolicy {
    rules: Vec<PrincipalMatchingRule>,
    compiled: Vec<Option<PathAutomaton>>,
    strategy: MatchStrategy,
}

impl PrincipalMatchingPolicy {
    pub fn new(rules: Vec<PrincipalMatchingRule>, strategy: MatchStrategy) -> Result<Self> {
        if let Some(i) = rules.iter().position(|r| r.condition == RuleCondition::Top) {
            if i + 1 != rules.len() {
                return Err(Error::InvalidPolicy(format!(
                    "default rule for `{}` must be the last principal-matching rule",
                    rules[i].principal
                )));
            }
        }
        let compiled = rules
            .iter()
            .map(|r| match &r.condition {
                RuleCondition::Path(pc) => Some(PathAutomaton::compile(&simplify(pc))),
                RuleCondition::Top => None,
            })
            .collect();
        Ok(Self {
            rules,
            compiled,
            strategy,
        })
    }

    pub fn rules(&self) -> &[PrincipalMatchingRule] {
        &self.rules
    }

    pub fn strategy(&self) -> MatchStrategy {
        self.strategy
    }

    pub fn with_strategy(mut self, strategy: MatchStrategy) -> Self {
        self.strategy = strategy;
        self
    }

    /// Whether any rule condition names `label`, i.e. whether adding or
    /// removing an edge with this label can change a matching result.
    pub fn references(&self, label: &EdgeLabel) -> bool {
        self.rules.iter().any(|r| match &r.condition {
            RuleCondition::Path(pc) => pc.labels().iter().any(|l| l.matches(label)),
            RuleCondition::Top => false,
        })
    }
}

impl PartialEq for PrincipalMatchingPolicy {
    fn eq(&self, other: &Self) -> bool {
        self.rules == other.rules && self.strategy == other.strategy
    }
}

/// Result of the principal-matching stage.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrincipalMatch {
    pub principals: Vec<String>,
    /// Indices of the satisfied rules, in policy order.
    pub matched_rules: Vec<usize>,
    pub metrics: EvalMetrics,
}

/// Computes the matched principals of `(s, o)`. The requested action plays
/// no part. Principals matched by several rules appear once, at their first
/// position.
pub fn match_principals(
    graph: &SystemGraph,
    s: &str,
    o: &str,
    policy: &PrincipalMatchingPolicy,
) -> Result<PrincipalMatch> {
    let s = graph.require(s)?;
    let o = graph.require(o)?;
    let mut result = PrincipalMatch::default();
    let mut seen = HashSet::new();
    for (i, (rule, automaton)) in policy.rules.iter().zip(&policy.compiled).enumerate() {
        let satisfied = match automaton {
            Some(a) => a.satisfies(graph, s, o, &mut result.metrics),
            None => true,
        };
        if !satisfied {
            continue;
        }
        result.matched_rules.push(i);
        if seen.insert(rule.principal.as_str()) {
            result.principals.push(rule.principal.clone());
        }
        if policy.strategy == MatchStrategy::FirstMatch {
            break;
        }
    }
    Ok(result)
}

/// The two rule lists of a policy document. Strategies are configured on
/// the engine.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PolicySet {
    pub pm: Vec<PrincipalMatchingRule>,
    pub auth: Vec<AuthorizationRule>,
}

impl PolicySet {
    pub fn new(pm: Vec<PrincipalMatchingRule>, auth: Vec<AuthorizationRule>) -> Self {
        Self { pm, auth }
    }

    /// Every principal named by either list.
    pub fn principals(&self) -> HashSet<&str> {
        self.pm
            .iter()
            .map(|r| r.principal.as_str())
            .chain(self.auth.iter().map(|r| r.principal.as_str()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Target {
    Any,
    Exact(String),
}

impl Target {
    pub fn exact(name: impl Into<String>) -> Self {
        Target::Exact(name.into())
    }

    pub fn covers(&self, name: &str) -> bool {
        match self {
            Target::Any => true,
            Target::Exact(n) => n == name,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Any => f.write_str("*"),
            Target::Exact(n) => f.write_str(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AuthorizationRule {
    pub principal: String,
    pub object: Target,
    pub action: Target,
    pub decision: Decision,
}

impl AuthorizationRule {
    pub fn new(
        principal: impl Into<String>,
        object: Target,
        action: Target,
        decision: Decision,
    ) -> Self {
        Self {
            principal: principal.into(),
            object,
            action,
            decision,
        }
    }
}

impl fmt::Display for AuthorizationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "auth {} {} {} {}",
            self.principal, self.object, self.action, self.decision
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConflictResolution {
    #[default]
    DenyOverride,
    AllowOverride,
    FirstMatch,
}

impl fmt::Display for ConflictResolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConflictResolution::DenyOverride => "DenyOverride",
            ConflictResolution::AllowOverride => "AllowOverride",
            ConflictResolution::FirstMatch => "FirstMatch",
        })
    }
}

impl FromStr for ConflictResolution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "denyoverride" => Ok(ConflictResolution::DenyOverride),
            "allowoverride" => Ok(ConflictResolution::AllowOverride),
            "firstmatch" | "first" => Ok(ConflictResolution::FirstMatch),
            _ => Err(format!("unknown conflict-resolution strategy `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthorizationPolicy {
    pub rules: Vec<AuthorizationRule>,
    pub crs: ConflictResolution,
    /// Used when no rule applies.
    pub default_decision: Decision,
}

impl AuthorizationPolicy {
    pub fn new(rules: Vec<AuthorizationRule>, crs: ConflictResolution) -> Self {
        Self {
            rules,
            crs,
            default_decision: Decision::Deny,
        }
    }
}

/// The subset of `{0, 1}` produced by the applicable authorization rules.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct DecisionSet {
    pub deny: bool,
    pub allow: bool,
}

impl DecisionSet {
    pub fn insert(&mut self, d: Decision) {
        match d {
            Decision::Allow => self.allow = true,
            Decision::Deny => self.deny = true,
        }
    }

    pub fn contains(&self, d: Decision) -> bool {
        match d {
            Decision::Allow => self.allow,
            Decision::Deny => self.deny,
        }
    }

    pub fn is_empty(&self) -> bool {
        !self.allow && !self.deny
    }
}

impl fmt::Display for DecisionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bits: Vec<&str> = [(self.deny, "0"), (self.allow, "1")]
            .into_iter()
            .filter_map(|(present, bit)| present.then_some(bit))
            .collect();
        write!(f, "{{{}}}", bits.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Authorization {
    pub decision: Decision,
    pub decision_set: DecisionSet,
    /// Indices of the applicable authorization rules, in policy order.
    pub applicable: Vec<usize>,
}

/// Selects the rules applicable to `request` for the principals in `mp` and
/// reduces their decisions with the policy's conflict-resolution strategy.
pub fn authorize(mp: &[String], request: &Request, policy: &AuthorizationPolicy) -> Authorization {
    let mut decision_set = DecisionSet::default();
    let mut applicable = Vec::new();
    for (i, rule) in policy.rules.iter().enumerate() {
        if mp.contains(&rule.principal)
            && rule.object.covers(&request.object)
            && rule.action.covers(&request.action)
        {
            decision_set.insert(rule.decision);
            applicable.push(i);
        }
    }
    let decision = match policy.crs {
        ConflictResolution::DenyOverride if decision_set.deny => Decision::Deny,
        ConflictResolution::DenyOverride if decision_set.allow => Decision::Allow,
        ConflictResolution::AllowOverride if decision_set.allow => Decision::Allow,
        ConflictResolution::AllowOverride if decision_set.deny => Decision::Deny,
        ConflictResolution::FirstMatch if !applicable.is_empty() => {
            policy.rules[applicable[0]].decision
        }
        _ => policy.default_decision,
    };
    Authorization {
        decision,
        decision_set,
        applicable,
    }
}
