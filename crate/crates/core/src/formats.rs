//! Line-oriented text formats for models, graphs, policies and engine
//! configuration.
//!
//! Every format ignores blank lines and everything after `#`.
//!
//! ```text
//! # model                        # graph
//! type user                      node u1 : user
//! label friend symmetric         edge u1 w e1
//! perm user w employer           cached u1 f1 [p,p_cw]
//!                                decision u1 f1 allow read
//! # policy                       interest u1 active c1
//! pm w . s . ~d -> p
//! pm default -> guest            # config
//! auth p * read allow            pms = AllMatch
//!                                cache.max_total = 16
//! ```
//!
//! Serialization is deterministic: sorted nodes and edges, except for
//! decision audit lines, which keep insertion order so that the audit log
//! survives a save and reload.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::audit::ChineseWallConfig;
use crate::cache::CacheConfig;
use crate::engine::{Engine, EngineConfig};
use crate::error::{Error, Result};
use crate::graph::{EdgeKind, EdgeLabel, SystemGraph, SystemModel};
use crate::path::{is_identifier, parse_path};
use crate::policy::{AuthorizationRule, Decision, PolicySet, PrincipalMatchingRule, Target};

/// A syntax error with a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            column,
            message: message.into(),
        }
    }

    /// Locates byte offset `pos` of `text`.
    pub fn at_offset(text: &str, pos: usize, message: impl Into<String>) -> Self {
        let before = &text[..pos.min(text.len())];
        let line = before.matches('\n').count() + 1;
        let line_start = before.rfind('\n').map_or(0, |i| i + 1);
        let column = before[line_start..].chars().count() + 1;
        Self::new(line, column, message)
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}, column {}: {}",
            self.line, self.column, self.message
        )
    }
}

impl std::error::Error for ParseError {}

/// A whitespace-separated token with its 1-based column.
#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    column: usize,
}

struct Line<'a> {
    number: usize,
    /// Content with any comment removed.
    content: &'a str,
    tokens: Vec<Token<'a>>,
}

impl<'a> Line<'a> {
    fn error(&self, column: usize, message: impl Into<String>) -> Error {
        Error::Parse(ParseError::new(self.number, column, message))
    }

    fn end_column(&self) -> usize {
        self.content.trim_end().chars().count() + 1
    }

    fn token(&self, i: usize, what: &str) -> Result<Token<'a>> {
        self.tokens
            .get(i)
            .copied()
            .ok_or_else(|| self.error(self.end_column(), format!("expected {what}")))
    }

    fn ident(&self, i: usize, what: &str) -> Result<&'a str> {
        let t = self.token(i, what)?;
        if is_identifier(t.text) {
            Ok(t.text)
        } else {
            Err(self.error(t.column, format!("invalid {what} `{}`", t.text)))
        }
    }

    fn expect_len(&self, n: usize) -> Result<()> {
        match self.tokens.get(n) {
            Some(t) => Err(self.error(t.column, format!("unexpected `{}`", t.text))),
            None => Ok(()),
        }
    }

    fn unresolved(&self, what: &str, name: &str) -> Error {
        Error::UnresolvedReference(format!("line {}: unknown {what} `{name}`", self.number))
    }
}

fn lines(text: &str) -> impl Iterator<Item = Line<'_>> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let content = raw.find('#').map_or(raw, |c| &raw[..c]);
        let mut tokens = Vec::new();
        let mut start = None;
        for (pos, ch) in content
            .char_indices()
            .chain(std::iter::once((content.len(), ' ')))
        {
            match (ch.is_whitespace(), start) {
                (true, Some(s)) => {
                    tokens.push(Token {
                        text: &content[s..pos],
                        column: content[..s].chars().count() + 1,
                    });
                    start = None;
                }
                (false, None) => start = Some(pos),
                _ => {}
            }
        }
        (!tokens.is_empty()).then_some(Line {
            number: i + 1,
            content,
            tokens,
        })
    })
}

pub fn parse_model(text: &str) -> Result<SystemModel> {
    let mut model = SystemModel::new();
    let mut perms = Vec::new();
    for line in lines(text) {
        match line.tokens[0].text {
            "type" => {
                model.add_type(line.ident(1, "type name")?);
                line.expect_len(2)?;
            }
            "label" => {
                let name = line.ident(1, "label name")?;
                let symmetric = match line.tokens.get(2) {
                    None => false,
                    Some(t) if t.text == "symmetric" => true,
                    Some(t) => {
                        return Err(line.error(
                            t.column,
                            format!("expected `symmetric`, found `{}`", t.text),
                        ))
                    }
                };
                line.expect_len(if symmetric { 3 } else { 2 })?;
                model.add_label(name, symmetric);
            }
            "perm" => {
                let triple = (
                    line.ident(1, "type")?,
                    line.ident(2, "label")?,
                    line.ident(3, "type")?,
                );
                line.expect_len(4)?;
                perms.push((line.number, triple));
            }
            other => return Err(line.error(1, format!("unknown model directive `{other}`"))),
        }
    }
    for (number, (src, label, dst)) in perms {
        for (what, name, known) in [
            ("type", src, model.has_type(src)),
            ("label", label, model.has_label(label)),
            ("type", dst, model.has_type(dst)),
        ] {
            if !known {
                return Err(Error::UnresolvedReference(format!(
                    "line {number}: unknown {what} `{name}`"
                )));
            }
        }
        model.add_permissible(src, label, dst)?;
    }
    Ok(model)
}

pub fn serialize_model(model: &SystemModel) -> String {
    let mut out = String::new();
    let mut types: Vec<&str> = model.types().collect();
    types.sort_unstable();
    for t in types {
        out.push_str(&format!("type {t}\n"));
    }
    let mut labels: Vec<&str> = model.labels().collect();
    labels.sort_unstable();
    for l in labels {
        if model.is_symmetric(l) {
            out.push_str(&format!("label {l} symmetric\n"));
        } else {
            out.push_str(&format!("label {l}\n"));
        }
    }
    let mut perms: Vec<_> = model.permissible().collect();
    perms.sort_unstable();
    for (s, l, d) in perms {
        out.push_str(&format!("perm {s} {l} {d}\n"));
    }
    out
}

/// Parses a graph over `model`. Node types and relationship labels outside
/// the model, and relationship edges outside the permissible relationships,
/// are reported together as a well-formedness error.
pub fn parse_graph(text: &str, model: SystemModel) -> Result<SystemGraph> {
    let mut graph = SystemGraph::new(model);
    let parsed: Vec<Line> = lines(text).collect();
    for line in parsed.iter().filter(|l| l.tokens[0].text == "node") {
        let id = line.ident(1, "node id")?;
        let colon = line.token(2, "`:`")?;
        if colon.text != ":" {
            return Err(line.error(
                colon.column,
                format!("expected `:`, found `{}`", colon.text),
            ));
        }
        let ty = line.ident(3, "type")?;
        line.expect_len(4)?;
        match graph.node_type(id) {
            Some(existing) if existing != ty => {
                return Err(line.error(
                    line.tokens[1].column,
                    format!("node `{id}` redeclared with type `{ty}`"),
                ))
            }
            Some(_) => {}
            None => {
                graph.add_node_unchecked(id, ty)?;
            }
        }
    }
    for line in &parsed {
        let keyword = line.tokens[0].text;
        let (src, dst, label) = match keyword {
            "node" => continue,
            "edge" => {
                let (src, label, dst) = (
                    line.ident(1, "source")?,
                    line.ident(2, "label")?,
                    line.ident(3, "target")?,
                );
                line.expect_len(4)?;
                (src, dst, EdgeLabel::Rel(label.to_owned()))
            }
            "cached" => {
                let (src, dst) = (line.ident(1, "subject")?, line.ident(2, "object")?);
                let first = line.token(3, "principal list")?;
                let list: Vec<&str> = line.tokens[3..].iter().map(|t| t.text).collect();
                let label = list
                    .concat()
                    .parse::<EdgeLabel>()
                    .ok()
                    .filter(|l| l.kind() == EdgeKind::Caching)
                    .ok_or_else(|| {
                        line.error(first.column, "expected a principal list `[p1,p2,...]`")
                    })?;
                (src, dst, label)
            }
            "decision" => {
                let (src, dst) = (line.ident(1, "subject")?, line.ident(2, "object")?);
                let verdict = line.token(3, "`allow` or `deny`")?;
                let decision: Decision = verdict.text.parse().map_err(|_| {
                    line.error(
                        verdict.column,
                        format!("expected `allow` or `deny`, found `{}`", verdict.text),
                    )
                })?;
                let action = line.ident(4, "action")?;
                line.expect_len(5)?;
                (src, dst, crate::audit::decision_label(decision, action))
            }
            "interest" => {
                let src = line.ident(1, "subject")?;
                let kind = line.token(2, "`active` or `blocked`")?;
                let label = match kind.text {
                    "active" => EdgeLabel::ActiveInterest,
                    "blocked" => EdgeLabel::BlockedInterest,
                    other => {
                        return Err(line.error(
                            kind.column,
                            format!("expected `active` or `blocked`, found `{other}`"),
                        ))
                    }
                };
                let dst = line.ident(3, "company")?;
                line.expect_len(4)?;
                (src, dst, label)
            }
            other => return Err(line.error(1, format!("unknown graph directive `{other}`"))),
        };
        for name in [src, dst] {
            if !graph.contains_node(name) {
                return Err(line.unresolved("node", name));
            }
        }
        if let EdgeLabel::Principals(_) = label {
            let (s, d) = (graph.require(src)?, graph.require(dst)?);
            if graph.caching_entry(s, d).is_some() {
                return Err(line.error(1, format!("second caching edge for `{src}` -> `{dst}`")));
            }
        }
        graph.add_edge_unchecked(src, dst, label)?;
    }
    let violations = graph.validate();
    if violations.is_empty() {
        Ok(graph)
    } else {
        Err(Error::WellFormedness(violations))
    }
}

pub fn serialize_graph(graph: &SystemGraph, include_overlay: bool) -> String {
    let mut out = String::from("# NODES\n");
    let mut nodes: Vec<_> = graph.nodes().collect();
    nodes.sort_unstable();
    for (id, ty) in nodes {
        out.push_str(&format!("node {id} : {ty}\n"));
    }
    out.push_str("# EDGES\n");
    for e in graph.edges_of_kind(EdgeKind::Relationship) {
        out.push_str(&format!("edge {} {} {}\n", e.src, e.label, e.dst));
    }
    if !include_overlay {
        return out;
    }
    let cached = graph.edges_of_kind(EdgeKind::Caching);
    if !cached.is_empty() {
        out.push_str("# CACHED\n");
        for e in cached {
            out.push_str(&format!("cached {} {} {}\n", e.src, e.dst, e.label));
        }
    }
    let decisions = graph.edges_in_insertion_order(EdgeKind::DecisionAudit);
    if !decisions.is_empty() {
        out.push_str("# DECISIONS\n");
        for e in decisions {
            let (verdict, action) = match &e.label {
                EdgeLabel::AllowAudit(a) => ("allow", a),
                EdgeLabel::DenyAudit(a) => ("deny", a),
                _ => unreachable!("decision audit edges carry audit labels"),
            };
            out.push_str(&format!(
                "decision {} {} {verdict} {action}\n",
                e.src, e.dst
            ));
        }
    }
    let interests = graph.edges_of_kind(EdgeKind::InterestAudit);
    if !interests.is_empty() {
        out.push_str("# INTERESTS\n");
        for e in interests {
            let kind = if e.label == EdgeLabel::ActiveInterest {
                "active"
            } else {
                "blocked"
            };
            out.push_str(&format!("interest {} {kind} {}\n", e.src, e.dst));
        }
    }
    out
}

fn target(line: &Line, i: usize, what: &str) -> Result<Target> {
    let t = line.token(i, what)?;
    if t.text == "*" {
        Ok(Target::Any)
    } else {
        line.ident(i, what).map(Target::exact)
    }
}

pub fn parse_policy(text: &str) -> Result<PolicySet> {
    let mut policy = PolicySet::default();
    for line in lines(text) {
        match line.tokens[0].text {
            "pm" => {
                let arrow = line
                    .content
                    .rfind("->")
                    .ok_or_else(|| line.error(line.end_column(), "expected `-> <principal>`"))?;
                let body_start = line.content.find("pm").unwrap() + 2;
                let body = &line.content[body_start..arrow];
                let principal_text = line.content[arrow + 2..].trim();
                let principal_column = line.content[..arrow + 2].chars().count()
                    + (line.content[arrow + 2..].len()
                        - line.content[arrow + 2..].trim_start().len())
                    + 1;
                if !is_identifier(principal_text) {
                    return Err(line.error(
                        principal_column,
                        format!("invalid principal `{principal_text}`"),
                    ));
                }
                let rule = if body.trim() == "default" {
                    PrincipalMatchingRule::default_rule(principal_text)
                } else {
                    let pc = parse_path(body).map_err(|e| {
                        let offset = line.content[..body_start].chars().count();
                        line.error(offset + e.column, e.message)
                    })?;
                    PrincipalMatchingRule::new(pc, principal_text)
                };
                policy.pm.push(rule);
            }
            "auth" => {
                let principal = line.ident(1, "principal")?;
                let object = target(&line, 2, "object")?;
                let action = target(&line, 3, "action")?;
                let verdict = line.token(4, "`allow` or `deny`")?;
                let decision: Decision = verdict.text.parse().map_err(|_| {
                    line.error(
                        verdict.column,
                        format!("expected `allow` or `deny`, found `{}`", verdict.text),
                    )
                })?;
                line.expect_len(5)?;
                policy
                    .auth
                    .push(AuthorizationRule::new(principal, object, action, decision));
            }
            other => return Err(line.error(1, format!("unknown policy directive `{other}`"))),
        }
    }
    Ok(policy)
}

pub fn serialize_policy(policy: &PolicySet) -> String {
    let mut out = String::new();
    for rule in &policy.pm {
        out.push_str(&format!("{rule}\n"));
    }
    for rule in &policy.auth {
        out.push_str(&format!("{rule}\n"));
    }
    out
}

pub fn parse_config(text: &str) -> Result<EngineConfig> {
    let mut config = EngineConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let content = raw.find('#').map_or(raw, |c| &raw[..c]);
        if content.trim().is_empty() {
            continue;
        }
        let number = i + 1;
        let column_of = |s: &str| {
            content[..s.as_ptr() as usize - content.as_ptr() as usize]
                .chars()
                .count()
                + 1
        };
        let Some(eq) = content.find('=') else {
            let col = content.chars().count() - content.trim_start().chars().count() + 1;
            return Err(ParseError::new(number, col, "expected `key = value`").into());
        };
        let key = content[..eq].trim();
        let value = content[eq + 1..].trim();
        let value_error = |message: String| -> Error {
            ParseError::new(number, column_of(value).max(eq + 2), message).into()
        };
        let flag = |v: &str| match v {
            "true" | "yes" | "on" => Ok(true),
            "false" | "no" | "off" => Ok(false),
            _ => Err(value_error(format!(
                "expected a boolean for `{key}`, found `{v}`"
            ))),
        };
        let count = |v: &str| -> Result<Option<u64>> {
            if v == "none" {
                return Ok(None);
            }
            v.parse::<u64>().map(Some).map_err(|_| {
                value_error(format!(
                    "expected a count or `none` for `{key}`, found `{v}`"
                ))
            })
        };
        match key {
            "pms" => config.pms = value.parse().map_err(value_error)?,
            "crs" => config.crs = value.parse().map_err(value_error)?,
            "default_decision" => {
                config.default_decision = value.parse().map_err(|_| {
                    value_error(format!("expected `allow` or `deny`, found `{value}`"))
                })?
            }
            "cache.enabled" => config.cache.enabled = flag(value)?,
            "cache.write_on_eval" => config.cache.write_on_eval = flag(value)?,
            "cache.invalidation" => {
                config.cache.invalidation = value.parse().map_err(value_error)?
            }
            "cache.max_total" => config.cache.max_total = count(value)?.map(|v| v as usize),
            "cache.max_out_degree" => {
                config.cache.max_out_degree = count(value)?.map(|v| v as usize)
            }
            "cache.retirement_age" => config.cache.retirement_age = count(value)?,
            "cache.recent_subjects" => {
                config.cache.recent_subjects = count(value)?.unwrap_or(0) as usize
            }
            "cw.enabled" => config.cw.enabled = flag(value)?,
            "cw.paths" => {
                config.cw.paths = Vec::new();
                let base = eq + 1;
                let mut offset = base;
                for part in content[base..].split(',') {
                    if !part.trim().is_empty() {
                        let pc = parse_path(part).map_err(|e| {
                            let col = content[..offset].chars().count() + e.column;
                            Error::from(ParseError::new(number, col, e.message))
                        })?;
                        config.cw.paths.push(crate::path::simplify(&pc));
                    }
                    offset += part.len() + 1;
                }
            }
            "cw.member_label" => {
                if !is_identifier(value) {
                    return Err(value_error(format!("invalid label `{value}`")));
                }
                config.cw.membership_label = value.to_owned();
            }
            _ => {
                let col = column_of(key);
                return Err(ParseError::new(
                    number,
                    col,
                    format!("unknown configuration key `{key}`"),
                )
                .into());
            }
        }
    }
    config.cache.validate()?;
    Ok(config)
}

pub fn serialize_config(config: &EngineConfig) -> String {
    let EngineConfig {
        pms,
        crs,
        default_decision,
        cache,
        cw,
    } = config;
    let CacheConfig {
        enabled,
        write_on_eval,
        invalidation,
        max_total,
        max_out_degree,
        retirement_age,
        recent_subjects,
    } = cache;
    let ChineseWallConfig {
        enabled: cw_enabled,
        paths,
        membership_label,
    } = cw;
    let mut out = format!(
        "pms = {pms}\ncrs = {crs}\ndefault_decision = {default_decision}\n\
         cache.enabled = {enabled}\ncache.write_on_eval = {write_on_eval}\ncache.invalidation = {invalidation}\n"
    );
    let optional = [
        ("cache.max_total", max_total.map(|v| v as u64)),
        ("cache.max_out_degree", max_out_degree.map(|v| v as u64)),
        ("cache.retirement_age", *retirement_age),
    ];
    for (key, value) in optional {
        if let Some(v) = value {
            out.push_str(&format!("{key} = {v}\n"));
        }
    }
    out.push_str(&format!(
        "cache.recent_subjects = {recent_subjects}\ncw.enabled = {cw_enabled}\n"
    ));
    if !paths.is_empty() {
        let rendered: Vec<String> = paths.iter().map(ToString::to_string).collect();
        out.push_str(&format!("cw.paths = {}\n", rendered.join(", ")));
    }
    out.push_str(&format!("cw.member_label = {membership_label}\n"));
    out
}

/// Locations of the documents describing one engine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentPaths {
    pub model: PathBuf,
    pub graph: PathBuf,
    pub policy: PathBuf,
    pub config: Option<PathBuf>,
}

/// A loaded, cross-checked set of documents.
#[derive(Debug, Clone)]
pub struct DocumentSet {
    pub graph: SystemGraph,
    pub policy: PolicySet,
    pub config: EngineConfig,
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn in_file<T>(path: &Path, result: Result<T>) -> Result<T> {
    result.map_err(|e| match e {
        Error::Io { .. } => e,
        other => Error::InFile {
            path: path.display().to_string(),
            source: Box::new(other),
        },
    })
}

impl DocumentSet {
    pub fn parse(model: &str, graph: &str, policy: &str, config: Option<&str>) -> Result<Self> {
        let model = parse_model(model)?;
        let graph = parse_graph(graph, model)?;
        let policy = parse_policy(policy)?;
        let config = config.map(parse_config).transpose()?.unwrap_or_default();
        Ok(Self {
            graph,
            policy,
            config,
        })
    }

    /// Reads and parses every document. Errors name the offending file.
    pub fn load(paths: &DocumentPaths) -> Result<Self> {
        let model = in_file(
            &paths.model,
            read_text(&paths.model).and_then(|t| parse_model(&t)),
        )?;
        let graph = in_file(
            &paths.graph,
            read_text(&paths.graph).and_then(|t| parse_graph(&t, model)),
        )?;
        let policy = in_file(
            &paths.policy,
            read_text(&paths.policy).and_then(|t| parse_policy(&t)),
        )?;
        let config = match &paths.config {
            Some(p) => in_file(p, read_text(p).and_then(|t| parse_config(&t)))?,
            None => EngineConfig::default(),
        };
        Ok(Self {
            graph,
            policy,
            config,
        })
    }

    pub fn into_engine(self) -> Result<Engine> {
        Engine::new(self.graph, self.policy, self.config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;
    use crate::policy::MatchStrategy;

    const G4_MODEL: &str = "\
type user
type employer
type client
type file
type coiclass
label w
label s
label d
label m
perm user w employer
perm employer s client
perm file d client
perm client m coiclass
";

    const G4_GRAPH: &str = "\
node u1 : user
node e1 : employer
node c1 : client
node c2 : client
node c3 : client
node f1 : file
node f2 : file
node f3 : file
node f4 : file
node i1 : coiclass
node i2 : coiclass
edge u1 w e1
edge e1 s c1
edge e1 s c2
edge e1 s c3
edge f1 d c1
edge f2 d c2
edge f3 d c3
edge f4 d c1
edge c1 m i1
edge c2 m i1
edge c3 m i2
";

    #[test]
    fn chinese_wall_model_and_graph() {
        let model = parse_model(G4_MODEL).unwrap();
        assert_eq!(model.types().count(), 5);
        assert_eq!(model.permissible().count(), 4);
        let graph = parse_graph(G4_GRAPH, model).unwrap();
        assert_eq!(graph.node_count(), 11);
        assert_eq!(graph.edge_count(EdgeKind::Relationship), 11);
    }

    #[test]
    fn empty_documents() {
        let model = parse_model("# nothing\n\n").unwrap();
        assert_eq!(model, SystemModel::new());
        assert_eq!(parse_graph("", model).unwrap().node_count(), 0);
        assert_eq!(parse_policy("").unwrap(), PolicySet::default());
        assert_eq!(parse_config("").unwrap(), EngineConfig::default());
    }

    #[test]
    fn model_round_trip_and_errors() {
        let text = "type a\ntype b\nlabel f symmetric\nlabel r\nperm a r b\nperm a f a\n";
        let model = parse_model(text).unwrap();
        assert!(model.is_symmetric("f"));
        assert_eq!(parse_model(&serialize_model(&model)).unwrap(), model);
        assert!(matches!(
            parse_model("perm a r b\n"),
            Err(Error::UnresolvedReference(_))
        ));
        let Err(Error::Parse(e)) = parse_model("type a\nlabel r sym\n") else {
            panic!()
        };
        assert_eq!((e.line, e.column), (2, 9));
    }

    #[test]
    fn graph_violations_are_collected() {
        let model = parse_model(G4_MODEL).unwrap();
        let text = format!("{G4_GRAPH}edge u1 d c1\nedge f1 zz c1\n");
        let Err(Error::WellFormedness(v)) = parse_graph(&text, model) else {
            panic!()
        };
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn graph_unknown_node() {
        let model = parse_model(G4_MODEL).unwrap();
        let err = parse_graph("node u1 : user\nedge u1 w e9\n", model).unwrap_err();
        assert!(matches!(err, Error::UnresolvedReference(m) if m.contains("line 2")));
    }

    #[test]
    fn overlay_sections() {
        let model = parse_model(G4_MODEL).unwrap();
        let text = format!(
            "{G4_GRAPH}cached u1 f1 [p, p_cw]\ndecision u1 f2 deny read\ndecision u1 f1 allow read\n\
             interest u1 active c1\ninterest u1 blocked c2\n"
        );
        let graph = parse_graph(&text, model).unwrap();
        assert_eq!(graph.cached_principals("u1", "f1").unwrap(), ["p", "p_cw"]);
        let out = serialize_graph(&graph, true);
        assert!(out.contains("# CACHED\ncached u1 f1 [p,p_cw]\n"));
        assert!(out.contains("# DECISIONS\ndecision u1 f2 deny read\ndecision u1 f1 allow read\n"));
        assert!(out.contains("# INTERESTS\ninterest u1 active c1\ninterest u1 blocked c2\n"));
        let reparsed = parse_graph(&out, graph.model().clone()).unwrap();
        assert_eq!(reparsed, graph);
        assert_eq!(serialize_graph(&reparsed, true), out);
        assert!(!serialize_graph(&graph, false).contains("decision"));
    }

    #[test]
    fn overlay_free_graph_serializes_identically() {
        let graph = parse_graph(G4_GRAPH, parse_model(G4_MODEL).unwrap()).unwrap();
        assert_eq!(
            serialize_graph(&graph, true),
            serialize_graph(&graph, false)
        );
    }

    #[test]
    fn policy_round_trip() {
        let text = "pm @blocked . ~d -> p_cw\npm w . s . ~d -> p\npm default -> guest\n\
                    auth p_cw * * deny\nauth p * read allow\n";
        let policy = parse_policy(text).unwrap();
        assert_eq!(policy.pm.len(), 3);
        assert_eq!(serialize_policy(&policy), text);
    }

    #[test]
    fn policy_errors_point_into_the_line() {
        let Err(Error::Parse(e)) = parse_policy("auth p * read allow\npm w . -> p\n") else {
            panic!()
        };
        assert_eq!((e.line, e.column), (2, 8));
        let Err(Error::Parse(e)) = parse_policy("auth p * read maybe\n") else {
            panic!()
        };
        assert_eq!((e.line, e.column), (1, 15));
        assert!(parse_policy("pm w\n").is_err());
    }

    #[test]
    fn config_round_trip() {
        let text = "pms = FirstMatch\ncrs = AllowOverride\ndefault_decision = allow\n\
                    cache.enabled = false\ncache.max_total = 16\ncache.max_out_degree = 2\n\
                    cw.enabled = true\ncw.paths = d, f . d\ncw.member_label = m\n";
        let config = parse_config(text).unwrap();
        assert_eq!(config.pms, MatchStrategy::FirstMatch);
        assert_eq!(config.cache.max_total, Some(16));
        assert_eq!(config.cw.paths.len(), 2);
        assert_eq!(parse_config(&serialize_config(&config)).unwrap(), config);
    }

    #[test]
    fn config_errors() {
        assert!(matches!(
            parse_config("cache.max_total = 0\n"),
            Err(Error::Config(_))
        ));
        let Err(Error::Parse(e)) = parse_config("pms = AllMatch\nbogus = 1\n") else {
            panic!()
        };
        assert_eq!((e.line, e.column), (2, 1));
        let Err(Error::Parse(e)) = parse_config("cw.paths = d, f . \n") else {
            panic!()
        };
        assert_eq!(e.line, 1);
        assert!(parse_config("cache.enabled = maybe\n").is_err());
    }

    #[test]
    fn parse_error_offsets() {
        let e = ParseError::at_offset("ab\ncd", 4, "x");
        assert_eq!((e.line, e.column), (2, 2));
    }

    #[test]
    fn edge_sections_are_sorted() {
        let model = parse_model("type t\nlabel r\nperm t r t\n").unwrap();
        let graph = parse_graph("node b : t\nnode a : t\nedge b r a\nedge a r b\n", model).unwrap();
        assert_eq!(
            serialize_graph(&graph, true),
            "# NODES\nnode a : t\nnode b : t\n# EDGES\nedge a r b\nedge b r a\n"
        );
        assert_eq!(graph.edges()[0], Edge::new("a", "b", EdgeLabel::rel("r")));
    }
}
