//! Policy generators for separation of duty and Chinese Wall, and the
//! history-based reference decisions they are meant to enforce.
//!
//! The generators prepend constraint rules to a base policy so that they take
//! effect under `FirstMatch` as well as `AllMatch`. The oracles work from
//! request histories alone and share no code with the engine.

use std::collections::{BTreeSet, HashMap};

use crate::audit::ChineseWallConfig;
use crate::error::{Error, Result};
use crate::path::{simplify, PathCondition, PathLabel};
use crate::policy::{
    AuthorizationRule, Decision, PolicySet, PrincipalMatchingRule, Request, Target,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SodMode {
    /// One principal per constrained action.
    General { principals: Vec<String> },
    /// A single principal that denies every action once any constrained
    /// action was performed.
    Basic { seen: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SodSpec {
    pub object: String,
    pub actions: Vec<String>,
    pub mode: SodMode,
}

impl SodSpec {
    /// General mode with principals `p1..pn`.
    pub fn general(object: impl Into<String>, actions: &[&str]) -> Self {
        Self {
            object: object.into(),
            actions: actions.iter().map(|a| (*a).to_owned()).collect(),
            mode: SodMode::General {
                principals: (1..=actions.len()).map(|i| format!("p{i}")).collect(),
            },
        }
    }

    pub fn basic(object: impl Into<String>, actions: &[&str], seen: impl Into<String>) -> Self {
        Self {
            object: object.into(),
            actions: actions.iter().map(|a| (*a).to_owned()).collect(),
            mode: SodMode::Basic { seen: seen.into() },
        }
    }

    fn validate(&self) -> Result<()> {
        if self.actions.len() < 2 {
            return Err(Error::InvalidPolicy(
                "separation of duty needs at least two actions".into(),
            ));
        }
        let distinct: BTreeSet<_> = self.actions.iter().collect();
        if distinct.len() != self.actions.len() {
            return Err(Error::InvalidPolicy(
                "constrained actions must be distinct".into(),
            ));
        }
        if let SodMode::General { principals } = &self.mode {
            if principals.len() != self.actions.len() {
                return Err(Error::InvalidPolicy(format!(
                    "{} actions but {} principals",
                    self.actions.len(),
                    principals.len()
                )));
            }
            let distinct: BTreeSet<_> = principals.iter().collect();
            if distinct.len() != principals.len() {
                return Err(Error::InvalidPolicy(
                    "constraint principals must be distinct".into(),
                ));
            }
        }
        Ok(())
    }
}

fn check_unused(base: &PolicySet, names: &[&str]) -> Result<()> {
    let used = base.principals();
    match names.iter().find(|n| used.contains(**n)) {
        Some(n) => Err(Error::NameCollision((*n).to_owned())),
        None => Ok(()),
    }
}

fn audit_rule(action: &str, principal: &str) -> PrincipalMatchingRule {
    PrincipalMatchingRule::new(
        PathCondition::edge(PathLabel::Allow(action.to_owned())),
        principal,
    )
}

fn prepend(
    base: &PolicySet,
    pm: Vec<PrincipalMatchingRule>,
    auth: Vec<AuthorizationRule>,
) -> PolicySet {
    PolicySet {
        pm: pm.into_iter().chain(base.pm.iter().cloned()).collect(),
        auth: auth.into_iter().chain(base.auth.iter().cloned()).collect(),
    }
}

pub fn generate_sod(base: &PolicySet, spec: &SodSpec) -> Result<PolicySet> {
    spec.validate()?;
    let object = Target::exact(&spec.object);
    match &spec.mode {
        SodMode::General { principals } => {
            let names: Vec<&str> = principals.iter().map(String::as_str).collect();
            check_unused(base, &names)?;
            let pm = spec
                .actions
                .iter()
                .zip(principals)
                .map(|(a, p)| audit_rule(a, p))
                .collect();
            let mut auth = Vec::new();
            for (i, p) in principals.iter().enumerate() {
                for (j, a) in spec.actions.iter().enumerate() {
                    if i != j {
                        auth.push(AuthorizationRule::new(
                            p,
                            object.clone(),
                            Target::exact(a),
                            Decision::Deny,
                        ));
                    }
                }
            }
            Ok(prepend(base, pm, auth))
        }
        SodMode::Basic { seen } => {
            check_unused(base, &[seen])?;
            let pm = spec.actions.iter().map(|a| audit_rule(a, seen)).collect();
            let auth = vec![AuthorizationRule::new(
                seen,
                object,
                Target::Any,
                Decision::Deny,
            )];
            Ok(prepend(base, pm, auth))
        }
    }
}

/// Prepends `(@blocked . ~pi2, principal)` for every configured company path
/// and `(principal, *, *, deny)`.
pub fn generate_chinese_wall(
    base: &PolicySet,
    cw: &ChineseWallConfig,
    principal: &str,
) -> Result<PolicySet> {
    if cw.paths.is_empty() {
        return Err(Error::Config(
            "at least one company path is required".into(),
        ));
    }
    check_unused(base, &[principal])?;
    let pm = cw
        .paths
        .iter()
        .map(|pi2| {
            let blocked = PathCondition::edge(PathLabel::Blocked);
            let back =
                simplify(&PathCondition::reverse(pi2.as_condition().clone())).into_condition();
            PrincipalMatchingRule::new(PathCondition::concat(blocked, back), principal)
        })
        .collect();
    let auth = vec![AuthorizationRule::new(
        principal,
        Target::Any,
        Target::Any,
        Decision::Deny,
    )];
    Ok(prepend(base, pm, auth))
}

/// Reference decision for a request under a generated separation-of-duty
/// policy. `history` holds earlier requests with the decisions they got.
///
/// General mode: denied iff the subject was previously allowed a different
/// constrained action on the object. Basic mode: denied iff the subject was
/// previously allowed any constrained action on the object, whatever is
/// requested now.
pub fn sod_oracle(
    spec: &SodSpec,
    history: &[(Request, Decision)],
    request: &Request,
    base: Decision,
) -> Decision {
    if base == Decision::Deny || request.object != spec.object {
        return base;
    }
    let constrained = |a: &str| spec.actions.iter().any(|x| x == a);
    let performed: BTreeSet<&str> = history
        .iter()
        .filter(|(q, d)| d.is_allow() && q.subject == request.subject && q.object == spec.object)
        .map(|(q, _)| q.action.as_str())
        .filter(|a| constrained(a))
        .collect();
    let blocked = match spec.mode {
        SodMode::Basic { .. } => !performed.is_empty(),
        SodMode::General { .. } => {
            constrained(&request.action) && performed.iter().any(|a| *a != request.action)
        }
    };
    if blocked {
        Decision::Deny
    } else {
        Decision::Allow
    }
}

/// Ownership of objects by companies and membership of companies in
/// conflict-of-interest classes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CwLayout {
    pub company_of: HashMap<String, String>,
    pub class_of: HashMap<String, String>,
}

impl CwLayout {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn object(&mut self, object: impl Into<String>, company: impl Into<String>) -> &mut Self {
        self.company_of.insert(object.into(), company.into());
        self
    }

    pub fn company(&mut self, company: impl Into<String>, class: impl Into<String>) -> &mut Self {
        self.class_of.insert(company.into(), class.into());
        self
    }
}

/// Reference decision for a request under a Chinese Wall policy: denied iff
/// the base policy denies, or the subject already holds an active interest
/// (an earlier allowed request) in another company of the same conflict
/// class as the company owning the object.
pub fn cw_oracle(
    history: &[(Request, Decision)],
    request: &Request,
    base: Decision,
    layout: &CwLayout,
) -> Result<Decision> {
    let company = layout
        .company_of
        .get(&request.object)
        .ok_or_else(|| Error::UnknownNode(request.object.clone()))?;
    if base == Decision::Deny {
        return Ok(Decision::Deny);
    }
    let Some(class) = layout.class_of.get(company) else {
        return Ok(Decision::Allow);
    };
    let conflict = history
        .iter()
        .filter(|(q, d)| d.is_allow() && q.subject == request.subject)
        .filter_map(|(q, _)| layout.company_of.get(&q.object))
        .any(|c| c != company && layout.class_of.get(c) == Some(class));
    Ok(if conflict {
        Decision::Deny
    } else {
        Decision::Allow
    })
}
