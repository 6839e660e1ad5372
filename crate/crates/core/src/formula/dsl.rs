//! Roster DSL.
//!
//! ```text
//! # comments run to end of line
//! DB     := const D
//! DUPOC  := modal( [](opp@self = C) )
//! PB     := modal( [](opp@self = C) & [1](P[opp@DB = D] >= 1/2) )
//! eGFB   := grounded(1/4)
//! ```
//!
//! Precedence, tightest first: `~`, `[]`/`[1]`, `&`, `|`, `->` (right-assoc).

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use thiserror::Error;

use super::{Action, AgentRef, AgentSpec, Formula, Rational, Relation};
use crate::agents::Roster;

const RESERVED: [&str; 4] = ["top", "bot", "self", "opp"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RosterError {
    #[error("syntax error at {0}")]
    Syntax(#[from] ParseError),
    #[error("line {line}: agent `{name}` defined twice")]
    Duplicate { name: String, line: usize },
    #[error("agent `{agent}` refers to unknown agent `{missing}`")]
    Unresolved { agent: String, missing: String },
    #[error("agent `{agent}`: condition is not fully modalized (every self/opp atom must sit under a box)")]
    NotModalized { agent: String },
    #[error("agent `{agent}`: epsilon {value} outside [0,1]")]
    EpsilonOutOfRange { agent: String, value: String },
    #[error("cyclic references among modal agents: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    Slash,
    Assign,
    LParen,
    RParen,
    Tilde,
    Amp,
    Pipe,
    Arrow,
    BoxPa,
    BoxPa1,
    ProbOpen,
    RBracket,
    At,
    Eq,
    Ge,
    Gt,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Slash => "`/`".into(),
            Tok::Assign => "`:=`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Tilde => "`~`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::BoxPa => "`[]`".into(),
            Tok::BoxPa1 => "`[1]`".into(),
            Tok::ProbOpen => "`P[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::At => "`@`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::Gt => "`>`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    column: usize,
}

fn lex(src: &str, line: usize) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let err = |column: usize, message: String| ParseError {
        line,
        column,
        message,
    };
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let rest = |k: usize| chars.get(i + k).copied();
        let (tok, len) = match c {
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            '~' => (Tok::Tilde, 1),
            '&' => (Tok::Amp, 1),
            '|' => (Tok::Pipe, 1),
            '@' => (Tok::At, 1),
            '=' => (Tok::Eq, 1),
            '/' => (Tok::Slash, 1),
            ']' => (Tok::RBracket, 1),
            ':' if rest(1) == Some('=') => (Tok::Assign, 2),
            '-' if rest(1) == Some('>') => (Tok::Arrow, 2),
            '>' if rest(1) == Some('=') => (Tok::Ge, 2),
            '>' => (Tok::Gt, 1),
            '[' if rest(1) == Some(']') => (Tok::BoxPa, 2),
            '[' if rest(1) == Some('1') && rest(2) == Some(']') => (Tok::BoxPa1, 3),
            'P' if rest(1) == Some('[') => (Tok::ProbOpen, 2),
            c if c.is_ascii_digit() => {
                let mut j = i;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                if j < chars.len() && chars[j] == '.' {
                    return Err(err(
                        column,
                        "decimal literals are not supported; write a rational as a/b".into(),
                    ));
                }
                let digits: String = chars[i..j].iter().collect();
                let n: BigInt = digits.parse().expect("digit run");
                (Tok::Int(n), j - i)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                (Tok::Ident(chars[i..j].iter().collect()), j - i)
            }
            other => return Err(err(column, format!("unexpected character `{other}`"))),
        };
        out.push(Spanned { tok, column });
        i += len;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    line: usize,
    eol_column: usize,
}

impl Parser {
    fn new(src: &str, line: usize) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: lex(src, line)?,
            pos: 0,
            line,
            eol_column: src.chars().count() + 1,
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|s| &s.tok)
    }

    fn column(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|s| s.column)
            .unwrap_or(self.eol_column)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            line: self.line,
            column: self.column(),
            message: message.into(),
        })
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T, ParseError> {
        match self.peek() {
            Some(t) => self.error(format!("expected {wanted}, found {}", t.describe())),
            None => self.error(format!("expected {wanted}, found end of line")),
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if self.eat(&tok) {
            Ok(())
        } else {
            self.unexpected(&tok.describe())
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.unexpected("an identifier"),
        }
    }

    fn finish(&self) -> Result<(), ParseError> {
        if self.pos < self.toks.len() {
            self.unexpected("end of line")
        } else {
            Ok(())
        }
    }

    fn action(&mut self) -> Result<Action, ParseError> {
        if let Some(Tok::Ident(s)) = self.peek() {
            let a = match s.as_str() {
                "C" => Some(Action::Cooperate),
                "D" => Some(Action::Defect),
                _ => None,
            };
            if let Some(a) = a {
                self.pos += 1;
                return Ok(a);
            }
        }
        self.unexpected("an action `C` or `D`")
    }

    fn rational(&mut self) -> Result<Rational, ParseError> {
        let column = self.column();
        let numer = match self.peek() {
            Some(Tok::Int(n)) => n.clone(),
            _ => return self.unexpected("a rational `a/b` or integer"),
        };
        self.pos += 1;
        let denom = if self.eat(&Tok::Slash) {
            match self.peek() {
                Some(Tok::Int(n)) => {
                    let n = n.clone();
                    self.pos += 1;
                    n
                }
                _ => return self.unexpected("a denominator"),
            }
        } else {
            BigInt::from(1)
        };
        if denom == BigInt::from(0) {
            return Err(ParseError {
                line: self.line,
                column,
                message: "zero denominator".into(),
            });
        }
        Ok(Rational::new(numer, denom))
    }

    fn agent_ref(&mut self) -> Result<AgentRef, ParseError> {
        let name = self.ident()?;
        Ok(match name.as_str() {
            "self" => AgentRef::This,
            "opp" => AgentRef::Opponent,
            _ => AgentRef::Named(name),
        })
    }

    fn agent(&mut self) -> Result<AgentSpec, ParseError> {
        let kw = match self.peek() {
            Some(Tok::Ident(s)) => s.clone(),
            _ => return self.unexpected("`const`, `clique`, `grounded` or `modal`"),
        };
        let spec = match kw.as_str() {
            "const" => {
                self.pos += 1;
                AgentSpec::Constant(self.action()?)
            }
            "clique" => {
                self.pos += 1;
                AgentSpec::CliqueBot
            }
            "grounded" => {
                self.pos += 1;
                self.expect(Tok::LParen)?;
                let eps = self.rational()?;
                self.expect(Tok::RParen)?;
                AgentSpec::Grounded(eps)
            }
            "modal" => {
                self.pos += 1;
                self.expect(Tok::LParen)?;
                let f = self.formula()?;
                self.expect(Tok::RParen)?;
                AgentSpec::Modal(f)
            }
            _ => return self.unexpected("`const`, `clique`, `grounded` or `modal`"),
        };
        Ok(spec)
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.disjunction()?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.formula()?;
            Ok(Formula::implies(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn disjunction(&mut self) -> Result<Formula, ParseError> {
        let mut f = self.conjunction()?;
        while self.eat(&Tok::Pipe) {
            f = Formula::or(f, self.conjunction()?);
        }
        Ok(f)
    }

    fn conjunction(&mut self) -> Result<Formula, ParseError> {
        let mut f = self.unary()?;
        while self.eat(&Tok::Amp) {
            f = Formula::and(f, self.unary()?);
        }
        Ok(f)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        if self.eat(&Tok::Tilde) {
            return Ok(Formula::not(self.unary()?));
        }
        if self.eat(&Tok::BoxPa) {
            return Ok(Formula::pa(self.unary()?));
        }
        if self.eat(&Tok::BoxPa1) {
            return Ok(Formula::pa1(self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let f = self.formula()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Some(Tok::Ident(s)) if s == "top" && self.peek_at(1) != Some(&Tok::At) => {
                self.pos += 1;
                Ok(Formula::Top)
            }
            Some(Tok::Ident(s)) if s == "bot" && self.peek_at(1) != Some(&Tok::At) => {
                self.pos += 1;
                Ok(Formula::Bottom)
            }
            Some(Tok::ProbOpen) => {
                self.pos += 1;
                let subject = self.agent_ref()?;
                self.expect(Tok::At)?;
                let adversary = self.agent_ref()?;
                self.expect(Tok::Eq)?;
                let action = self.action()?;
                self.expect(Tok::RBracket)?;
                let relation = if self.eat(&Tok::Ge) {
                    Relation::AtLeast
                } else if self.eat(&Tok::Gt) {
                    Relation::Greater
                } else {
                    return self.unexpected("`>=` or `>`");
                };
                let threshold = self.rational()?;
                Ok(Formula::prob(
                    subject, adversary, action, relation, threshold,
                ))
            }
            Some(Tok::Ident(_)) => {
                let subject = self.agent_ref()?;
                self.expect(Tok::At)?;
                let adversary = self.agent_ref()?;
                self.expect(Tok::Eq)?;
                let action = self.action()?;
                Ok(Formula::act(subject, adversary, action))
            }
            _ => self.unexpected("a formula"),
        }
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Parses a single formula in DSL syntax.
pub fn parse_formula(src: &str) -> Result<Formula, ParseError> {
    let mut p = Parser::new(src, 1)?;
    let f = p.formula()?;
    p.finish()?;
    Ok(f)
}

/// Parses the right-hand side of a definition (`const D`, `modal(...)`, ...).
/// No roster-level checks are applied.
pub fn parse_agent(src: &str) -> Result<AgentSpec, ParseError> {
    let mut p = Parser::new(src, 1)?;
    let a = p.agent()?;
    p.finish()?;
    Ok(a)
}

/// Parses a non-negative rational written `a/b` or `a`.
pub fn parse_rational(src: &str) -> Result<Rational, ParseError> {
    let mut p = Parser::new(src.trim(), 1)?;
    let q = p.rational()?;
    p.finish()?;
    Ok(q)
}

/// Parses and validates a whole roster file.
pub fn parse_roster(text: &str) -> Result<Roster, RosterError> {
    let roster = parse_entries(text)?;
    validate_roster(&roster)?;
    Ok(roster)
}

/// Like [`parse_roster`], but references may also resolve into `base`.
/// Validation runs on `base` overlaid with the file; only the file's own
/// entries are returned.
pub fn parse_roster_over(text: &str, base: &Roster) -> Result<Roster, RosterError> {
    let entries = parse_entries(text)?;
    let mut combined = base.clone();
    combined.overlay(&entries);
    validate_roster(&combined)?;
    Ok(entries)
}

fn parse_entries(text: &str) -> Result<Roster, RosterError> {
    let mut roster = Roster::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = strip_comment(raw);
        if body.trim().is_empty() {
            continue;
        }
        let mut p = Parser::new(body, line)?;
        let name_col = p.column();
        let name = p.ident()?;
        if RESERVED.contains(&name.as_str()) {
            return Err(ParseError {
                line,
                column: name_col,
                message: format!("`{name}` is reserved and cannot name an agent"),
            }
            .into());
        }
        p.expect(Tok::Assign)?;
        let spec = p.agent()?;
        p.finish()?;
        if roster.contains(&name) {
            return Err(RosterError::Duplicate { name, line });
        }
        roster.insert(name, spec);
    }
    Ok(roster)
}

/// Roster-level checks: ranges, modalization, reference resolution, and
/// acyclicity of named references between modal agents.
pub(crate) fn validate_roster(roster: &Roster) -> Result<(), RosterError> {
    for (name, spec) in roster.iter() {
        match spec {
            AgentSpec::Grounded(eps) => {
                if spec.validate().is_err() {
                    return Err(RosterError::EpsilonOutOfRange {
                        agent: name.to_string(),
                        value: eps.to_string(),
                    });
                }
            }
            AgentSpec::Modal(cond) => {
                if !cond.fully_modalized() {
                    return Err(RosterError::NotModalized {
                        agent: name.to_string(),
                    });
                }
                if let Some(missing) = cond.named_refs().into_iter().find(|n| !roster.contains(n)) {
                    return Err(RosterError::Unresolved {
                        agent: name.to_string(),
                        missing,
                    });
                }
            }
            _ => {}
        }
    }
    if let Some(cycle) = modal_reference_cycle(roster) {
        return Err(RosterError::Cycle(cycle));
    }
    Ok(())
}

fn modal_reference_cycle(roster: &Roster) -> Option<Vec<String>> {
    let edges: BTreeMap<&str, BTreeSet<String>> = roster
        .iter()
        .filter_map(|(n, s)| match s {
            AgentSpec::Modal(c) => Some((n, c.named_refs())),
            _ => None,
        })
        .collect();

    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Fresh,
        Active,
        Done,
    }
    fn dfs<'a>(
        node: &'a str,
        edges: &'a BTreeMap<&'a str, BTreeSet<String>>,
        marks: &mut BTreeMap<&'a str, Mark>,
        stack: &mut Vec<&'a str>,
    ) -> Option<Vec<String>> {
        marks.insert(node, Mark::Active);
        stack.push(node);
        for next in edges.get(node).into_iter().flatten() {
            let Some((&key, _)) = edges.get_key_value(next.as_str()) else {
                continue;
            };
            match marks.get(key).copied().unwrap_or(Mark::Fresh) {
                Mark::Active => {
                    let start = stack.iter().position(|n| *n == key).unwrap();
                    let mut cycle: Vec<String> =
                        stack[start..].iter().map(|s| s.to_string()).collect();
                    cycle.push(key.to_string());
                    return Some(cycle);
                }
                Mark::Fresh => {
                    if let Some(c) = dfs(key, edges, marks, stack) {
                        return Some(c);
                    }
                }
                Mark::Done => {}
            }
        }
        stack.pop();
        marks.insert(node, Mark::Done);
        None
    }

    let mut marks = BTreeMap::new();
    for &node in edges.keys() {
        if marks.get(node).copied().unwrap_or(Mark::Fresh) == Mark::Fresh {
            if let Some(c) = dfs(node, &edges, &mut marks, &mut Vec::new()) {
                return Some(c);
            }
        }
    }
    None
}
