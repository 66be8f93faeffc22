//! Path conditions: syntax tree, textual syntax and simplification.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr    := postfix ('.' postfix)*
//! postfix := prefix '+'*
//! prefix  := '~' prefix | primary
//! primary := '<>' | label | '(' expr ')'
//! label   := ident | 'allow!' ident | 'deny!' ident | '@active' | '@blocked'
//! ```
//!
//! `~` applied directly to a label yields a reversed edge condition; applied
//! to anything else it yields a [`PathCondition::Reverse`] node. Chains of
//! `.` nest to the right.

use std::fmt;
use std::str::FromStr;

use crate::formats::ParseError;
use crate::graph::EdgeLabel;

pub fn is_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == ':')
}

/// A label an edge condition may name: a relationship label or one of the
/// audit labels added by the overlay.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PathLabel {
    Rel(String),
    Allow(String),
    Deny(String),
    Active,
    Blocked,
}

impl PathLabel {
    pub fn rel(name: impl Into<String>) -> Self {
        PathLabel::Rel(name.into())
    }

    pub fn matches(&self, label: &EdgeLabel) -> bool {
        match (self, label) {
            (PathLabel::Rel(a), EdgeLabel::Rel(b)) => a == b,
            (PathLabel::Allow(a), EdgeLabel::AllowAudit(b)) => a == b,
            (PathLabel::Deny(a), EdgeLabel::DenyAudit(b)) => a == b,
            (PathLabel::Active, EdgeLabel::ActiveInterest) => true,
            (PathLabel::Blocked, EdgeLabel::BlockedInterest) => true,
            _ => false,
        }
    }

    /// The edge label an edge condition on this label would traverse.
    pub fn to_edge_label(&self) -> EdgeLabel {
        match self {
            PathLabel::Rel(r) => EdgeLabel::Rel(r.clone()),
            PathLabel::Allow(a) => EdgeLabel::AllowAudit(a.clone()),
            PathLabel::Deny(a) => EdgeLabel::DenyAudit(a.clone()),
            PathLabel::Active => EdgeLabel::ActiveInterest,
            PathLabel::Blocked => EdgeLabel::BlockedInterest,
        }
    }
}

impl fmt::Display for PathLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathLabel::Rel(r) => f.write_str(r),
            PathLabel::Allow(a) => write!(f, "allow!{a}"),
            PathLabel::Deny(a) => write!(f, "deny!{a}"),
            PathLabel::Active => f.write_str("@active"),
            PathLabel::Blocked => f.write_str("@blocked"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PathCondition {
    Diamond,
    Edge(PathLabel),
    ReversedEdge(PathLabel),
    Concat(Box<PathCondition>, Box<PathCondition>),
    Plus(Box<PathCondition>),
    Reverse(Box<PathCondition>),
}

impl PathCondition {
    pub fn edge(label: PathLabel) -> Self {
        PathCondition::Edge(label)
    }

    pub fn concat(left: PathCondition, right: PathCondition) -> Self {
        PathCondition::Concat(Box::new(left), Box::new(right))
    }

    pub fn plus(inner: PathCondition) -> Self {
        PathCondition::Plus(Box::new(inner))
    }

    pub fn reverse(inner: PathCondition) -> Self {
        PathCondition::Reverse(Box::new(inner))
    }

    /// Right-nested concatenation of `parts`; `<>` when empty.
    pub fn sequence(parts: impl IntoIterator<Item = PathCondition>) -> Self {
        let mut parts: Vec<_> = parts.into_iter().collect();
        let Some(mut acc) = parts.pop() else {
            return PathCondition::Diamond;
        };
        while let Some(prev) = parts.pop() {
            acc = PathCondition::concat(prev, acc);
        }
        acc
    }

    /// Number of edge-condition leaves.
    pub fn edge_count(&self) -> usize {
        match self {
            PathCondition::Diamond => 0,
            PathCondition::Edge(_) | PathCondition::ReversedEdge(_) => 1,
            PathCondition::Concat(a, b) => a.edge_count() + b.edge_count(),
            PathCondition::Plus(a) | PathCondition::Reverse(a) => a.edge_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            PathCondition::Diamond | PathCondition::Edge(_) | PathCondition::ReversedEdge(_) => 1,
            PathCondition::Concat(a, b) => 1 + a.depth().max(b.depth()),
            PathCondition::Plus(a) | PathCondition::Reverse(a) => 1 + a.depth(),
        }
    }

    /// Labels mentioned anywhere in the condition.
    pub fn labels(&self) -> Vec<&PathLabel> {
        let mut out = Vec::new();
        self.collect_labels(&mut out);
        out
    }

    fn collect_labels<'a>(&'a self, out: &mut Vec<&'a PathLabel>) {
        match self {
            PathCondition::Diamond => {}
            PathCondition::Edge(l) | PathCondition::ReversedEdge(l) => out.push(l),
            PathCondition::Concat(a, b) => {
                a.collect_labels(out);
                b.collect_labels(out);
            }
            PathCondition::Plus(a) | PathCondition::Reverse(a) => a.collect_labels(out),
        }
    }

    /// Whether the condition satisfies the structural rules of a simple
    /// path condition.
    pub fn is_simple(&self) -> bool {
        match self {
            PathCondition::Diamond | PathCondition::Edge(_) | PathCondition::ReversedEdge(_) => {
                true
            }
            PathCondition::Reverse(_) => false,
            PathCondition::Concat(a, b) => {
                **a != PathCondition::Diamond
                    && **b != PathCondition::Diamond
                    && a.is_simple()
                    && b.is_simple()
            }
            PathCondition::Plus(a) => **a != PathCondition::Diamond && a.is_simple(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            PathCondition::Concat(..) => 0,
            PathCondition::Plus(_) => 1,
            PathCondition::Reverse(_) | PathCondition::ReversedEdge(_) => 2,
            PathCondition::Diamond | PathCondition::Edge(_) => 3,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            f.write_str("(")?;
            self.fmt_at(f, 0)?;
            return f.write_str(")");
        }
        match self {
            PathCondition::Diamond => f.write_str("<>"),
            PathCondition::Edge(l) => write!(f, "{l}"),
            PathCondition::ReversedEdge(l) => write!(f, "~{l}"),
            PathCondition::Concat(a, b) => {
                a.fmt_at(f, 1)?;
                f.write_str(" . ")?;
                b.fmt_at(f, 0)
            }
            PathCondition::Plus(a) => {
                a.fmt_at(f, 1)?;
                f.write_str("+")
            }
            PathCondition::Reverse(a) => {
                f.write_str("~")?;
                match **a {
                    // `~label` would read back as a reversed edge condition.
                    PathCondition::Edge(ref l) => write!(f, "({l})"),
                    _ => a.fmt_at(f, 2),
                }
            }
        }
    }
}

impl fmt::Display for PathCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

impl FromStr for PathCondition {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_path(s)
    }
}

/// A path condition with reversal pushed onto edge conditions and `<>`
/// eliminated from compound conditions. Built only by [`simplify`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SimplePath(PathCondition);

impl SimplePath {
    pub fn as_condition(&self) -> &PathCondition {
        &self.0
    }

    pub fn into_condition(self) -> PathCondition {
        self.0
    }
}

impl fmt::Display for SimplePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl FromStr for SimplePath {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_path(s).map(|pc| simplify(&pc))
    }
}

/// Rewrites `pc` into an equivalent simple path condition.
///
/// Reversal is pushed to the leaves (`~(a.b) = ~b.~a`, `~(a+) = (~a)+`,
/// `~~a = a`, `~<> = <>`) and `<>` is dropped from concatenations and closures
/// (`<>.a = a`, `a.<> = a`, `<>+ = <>`).
pub fn simplify(pc: &PathCondition) -> SimplePath {
    SimplePath(rewrite(pc, false))
}

fn rewrite(pc: &PathCondition, reversed: bool) -> PathCondition {
    match pc {
        PathCondition::Diamond => PathCondition::Diamond,
        PathCondition::Edge(l) if reversed => PathCondition::ReversedEdge(l.clone()),
        PathCondition::ReversedEdge(l) if reversed => PathCondition::Edge(l.clone()),
        PathCondition::Edge(_) | PathCondition::ReversedEdge(_) => pc.clone(),
        PathCondition::Reverse(inner) => rewrite(inner, !reversed),
        PathCondition::Concat(a, b) => {
            let (first, second) = if reversed {
                (rewrite(b, true), rewrite(a, true))
            } else {
                (rewrite(a, false), rewrite(b, false))
            };
            match (first, second) {
                (PathCondition::Diamond, x) | (x, PathCondition::Diamond) => x,
                (x, y) => PathCondition::concat(x, y),
            }
        }
        PathCondition::Plus(inner) => match rewrite(inner, reversed) {
            PathCondition::Diamond => PathCondition::Diamond,
            x => PathCondition::plus(x),
        },
    }
}

pub fn parse_path(text: &str) -> Result<PathCondition, ParseError> {
    let mut parser = Parser { text, pos: 0 };
    let pc = parser.expr()?;
    parser.skip_ws();
    if parser.pos < text.len() {
        return Err(parser.error("unexpected trailing input"));
    }
    Ok(pc)
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::at_offset(self.text, self.pos, message)
    }

    fn skip_ws(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.text[self.pos..].chars().next()
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.text[self.pos..].starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<PathCondition, ParseError> {
        let mut parts = vec![self.postfix()?];
        while self.eat(".") {
            parts.push(self.postfix()?);
        }
        Ok(PathCondition::sequence(parts))
    }

    fn postfix(&mut self) -> Result<PathCondition, ParseError> {
        let mut pc = self.prefix()?;
        while self.eat("+") {
            pc = PathCondition::plus(pc);
        }
        Ok(pc)
    }

    fn prefix(&mut self) -> Result<PathCondition, ParseError> {
        if !self.eat("~") {
            return self.primary();
        }
        match self.peek() {
            Some(c) if c == '@' || is_ident_char(c) => {
                Ok(PathCondition::ReversedEdge(self.label()?))
            }
            _ => Ok(PathCondition::reverse(self.prefix()?)),
        }
    }

    fn primary(&mut self) -> Result<PathCondition, ParseError> {
        if self.eat("<>") {
            return Ok(PathCondition::Diamond);
        }
        if self.eat("(") {
            let inner = self.expr()?;
            if !self.eat(")") {
                return Err(self.error("expected `)`"));
            }
            return Ok(inner);
        }
        match self.peek() {
            Some(c) if c == '@' || is_ident_char(c) => Ok(PathCondition::Edge(self.label()?)),
            Some(c) => Err(self.error(format!("unexpected `{c}`"))),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn ident(&mut self) -> Result<&str, ParseError> {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let len = rest
            .char_indices()
            .find(|&(_, c)| !is_ident_char(c))
            .map_or(rest.len(), |(i, _)| i);
        if len == 0 {
            return Err(self.error("expected identifier"));
        }
        self.pos += len;
        Ok(&rest[..len])
    }

    fn label(&mut self) -> Result<PathLabel, ParseError> {
        self.skip_ws();
        if self.eat("@") {
            let start = self.pos;
            return match self.ident()? {
                "active" => Ok(PathLabel::Active),
                "blocked" => Ok(PathLabel::Blocked),
                other => {
                    let message = format!("unknown interest label `@{other}`");
                    self.pos = start;
                    Err(self.error(message))
                }
            };
        }
        let name = self.ident()?.to_owned();
        if self.text[self.pos..].starts_with('!') {
            self.pos += 1;
            let action = self.ident()?.to_owned();
            return match name.as_str() {
                "allow" => Ok(PathLabel::Allow(action)),
                "deny" => Ok(PathLabel::Deny(action)),
                _ => Err(self.error(format!("unknown audit label prefix `{name}!`"))),
            };
        }
        Ok(PathLabel::Rel(name))
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == ':'
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(l: &str) -> PathCondition {
        PathCondition::Edge(PathLabel::rel(l))
    }

    fn re(l: &str) -> PathCondition {
        PathCondition::ReversedEdge(PathLabel::rel(l))
    }

    #[test]
    fn parses_chinese_wall_base_condition() {
        let pc = parse_path("w . s . ~d").unwrap();
        assert_eq!(
            pc,
            PathCondition::concat(e("w"), PathCondition::concat(e("s"), re("d")))
        );
        assert_eq!(pc.to_string(), "w . s . ~d");
    }

    #[test]
    fn parses_diamond_and_overlay_labels() {
        assert_eq!(parse_path("<>").unwrap(), PathCondition::Diamond);
        assert_eq!(
            parse_path("@blocked . ~d").unwrap(),
            PathCondition::concat(PathCondition::Edge(PathLabel::Blocked), re("d"))
        );
        assert_eq!(
            parse_path("allow!a1").unwrap(),
            PathCondition::Edge(PathLabel::Allow("a1".into()))
        );
        assert_eq!(
            parse_path("~deny!a2").unwrap(),
            PathCondition::ReversedEdge(PathLabel::Deny("a2".into()))
        );
    }

    #[test]
    fn reverse_binds_tighter_than_plus() {
        let pc = parse_path("~( r1 . r2 )+").unwrap();
        assert_eq!(
            pc,
            PathCondition::plus(PathCondition::reverse(PathCondition::concat(
                e("r1"),
                e("r2")
            )))
        );
        assert_eq!(parse_path(&pc.to_string()).unwrap(), pc);
    }

    #[test]
    fn reverse_of_plain_edge_prints_with_parens() {
        let pc = PathCondition::reverse(e("r"));
        assert_eq!(pc.to_string(), "~(r)");
        assert_eq!(parse_path("~(r)").unwrap(), pc);
        assert_eq!(parse_path("~~r").unwrap(), PathCondition::reverse(re("r")));
    }

    #[test]
    fn parse_errors_carry_offsets() {
        let err = parse_path("a . ").unwrap_err();
        assert_eq!(err.column, 5);
        let err = parse_path("(a . b").unwrap_err();
        assert_eq!(err.column, 7);
        assert!(parse_path("a b").is_err());
        assert!(parse_path("@other").is_err());
        assert!(parse_path("grant!x").is_err());
    }

    #[test]
    fn simplify_distributes_reversal() {
        let pc = PathCondition::reverse(PathCondition::concat(e("r1"), e("r2")));
        assert_eq!(
            simplify(&pc).into_condition(),
            PathCondition::concat(re("r2"), re("r1"))
        );
        let pc = PathCondition::reverse(PathCondition::reverse(e("r")));
        assert_eq!(simplify(&pc).into_condition(), e("r"));
    }

    #[test]
    fn simplify_eliminates_diamond() {
        let pc = PathCondition::concat(PathCondition::Diamond, PathCondition::plus(e("r")));
        assert_eq!(simplify(&pc).into_condition(), PathCondition::plus(e("r")));
        let pc = PathCondition::plus(PathCondition::Diamond);
        assert_eq!(simplify(&pc).into_condition(), PathCondition::Diamond);
        let pc = PathCondition::reverse(PathCondition::Diamond);
        assert_eq!(simplify(&pc).into_condition(), PathCondition::Diamond);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn label() -> impl Strategy<Value = PathLabel> {
            prop_oneof![
                4 => prop::sample::select(vec!["a", "b", "r1"]).prop_map(PathLabel::rel),
                1 => Just(PathLabel::Allow("x".into())),
                1 => Just(PathLabel::Deny("x".into())),
                1 => Just(PathLabel::Active),
                1 => Just(PathLabel::Blocked),
            ]
        }

        fn condition() -> impl Strategy<Value = PathCondition> {
            let leaf = prop_oneof![
                1 => Just(PathCondition::Diamond),
                3 => label().prop_map(PathCondition::Edge),
                2 => label().prop_map(PathCondition::ReversedEdge),
            ];
            leaf.prop_recursive(5, 32, 2, |inner| {
                prop_oneof![
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| PathCondition::concat(a, b)),
                    inner.clone().prop_map(PathCondition::plus),
                    inner.prop_map(PathCondition::reverse),
                ]
            })
        }

        proptest! {
            #[test]
            fn print_parse_round_trip(pc in condition()) {
                prop_assert_eq!(parse_path(&pc.to_string()).unwrap(), pc);
            }

            #[test]
            fn simplify_is_idempotent_and_simple(pc in condition()) {
                let once = simplify(&pc);
                prop_assert!(once.as_condition().is_simple());
                prop_assert_eq!(simplify(once.as_condition()), once.clone());
                prop_assert!(once.as_condition().edge_count() <= pc.edge_count());
            }
        }
    }
}
