//! Modal formulas over agent actions, agent specifications, and the roster DSL.
//!
//! A formula talks about what agents do against each other (`opp@self = C`),
//! about the probability of such an event (`P[opp@DB = D] >= 1/4`), and about
//! provability of either, at two strengths: plain `[]` for PA and `[1]` for
//! PA plus the consistency of PA.

mod dsl;
mod serialize;

use std::collections::BTreeSet;
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

pub use dsl::{
    parse_agent, parse_formula, parse_rational, parse_roster, parse_roster_over, ParseError,
    RosterError,
};
pub use serialize::canonical_serialize;

/// Arbitrary-precision rational, always held in lowest terms.
pub type Rational = num_rational::BigRational;

/// A move in the base Prisoner's Dilemma.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    #[serde(rename = "C")]
    Cooperate,
    #[serde(rename = "D")]
    Defect,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Cooperate, Action::Defect];

    pub fn symbol(self) -> char {
        match self {
            Action::Cooperate => 'C',
            Action::Defect => 'D',
        }
    }

    pub fn from_symbol(c: char) -> Option<Action> {
        match c {
            'C' => Some(Action::Cooperate),
            'D' => Some(Action::Defect),
            _ => None,
        }
    }

    pub fn from_cooperates(cooperates: bool) -> Action {
        if cooperates {
            Action::Cooperate
        } else {
            Action::Defect
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// Who an atom talks about: the program evaluating the formula, its
/// opponent, or a fixed program from the roster.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AgentRef {
    This,
    Opponent,
    Named(String),
}

impl AgentRef {
    pub fn named(name: impl Into<String>) -> Self {
        AgentRef::Named(name.into())
    }

    /// True for the placeholders bound per match (`self`, `opp`).
    pub fn is_contextual(&self) -> bool {
        !matches!(self, AgentRef::Named(_))
    }
}

impl fmt::Display for AgentRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentRef::This => f.write_str("self"),
            AgentRef::Opponent => f.write_str("opp"),
            AgentRef::Named(n) => f.write_str(n),
        }
    }
}

/// Which theory a box refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoxLevel {
    /// Provable in PA.
    Pa,
    /// Provable in PA + Con(PA).
    PaPlus1,
}

impl BoxLevel {
    pub fn token(self) -> &'static str {
        match self {
            BoxLevel::Pa => "[]",
            BoxLevel::PaPlus1 => "[1]",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    AtLeast,
    Greater,
}

impl Relation {
    pub fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            Relation::AtLeast => lhs >= rhs,
            Relation::Greater => lhs > rhs,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Relation::AtLeast => ">=",
            Relation::Greater => ">",
        }
    }
}

/// `P[subject@adversary = action] rel threshold`
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProbAtom {
    pub subject: AgentRef,
    pub adversary: AgentRef,
    pub action: Action,
    pub relation: Relation,
    pub threshold: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    Top,
    Bottom,
    /// `subject@adversary = action`: the subject's move when run against the adversary.
    Act {
        subject: AgentRef,
        adversary: AgentRef,
        action: Action,
    },
    Prob(ProbAtom),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Boxed(BoxLevel, Box<Formula>),
}

impl Formula {
    pub fn act(subject: AgentRef, adversary: AgentRef, action: Action) -> Formula {
        Formula::Act {
            subject,
            adversary,
            action,
        }
    }

    pub fn prob(
        subject: AgentRef,
        adversary: AgentRef,
        action: Action,
        relation: Relation,
        threshold: Rational,
    ) -> Formula {
        Formula::Prob(ProbAtom {
            subject,
            adversary,
            action,
            relation,
            threshold,
        })
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn boxed(level: BoxLevel, f: Formula) -> Formula {
        Formula::Boxed(level, Box::new(f))
    }

    pub fn pa(f: Formula) -> Formula {
        Formula::boxed(BoxLevel::Pa, f)
    }

    pub fn pa1(f: Formula) -> Formula {
        Formula::boxed(BoxLevel::PaPlus1, f)
    }

    /// Immediate subformulas.
    pub fn children(&self) -> Vec<&Formula> {
        match self {
            Formula::Top | Formula::Bottom | Formula::Act { .. } | Formula::Prob(_) => Vec::new(),
            Formula::Not(a) | Formula::Boxed(_, a) => vec![a],
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => vec![a, b],
        }
    }

    /// Maximum nesting of boxes.
    pub fn modal_depth(&self) -> usize {
        match self {
            Formula::Boxed(_, a) => 1 + a.modal_depth(),
            other => other
                .children()
                .into_iter()
                .map(Formula::modal_depth)
                .max()
                .unwrap_or(0),
        }
    }

    /// Every atom mentioning `self` or `opp` lies beneath at least one box.
    pub fn fully_modalized(&self) -> bool {
        fn go(f: &Formula, guarded: bool) -> bool {
            match f {
                Formula::Top | Formula::Bottom => true,
                Formula::Act {
                    subject, adversary, ..
                } => guarded || !(subject.is_contextual() || adversary.is_contextual()),
                Formula::Prob(p) => {
                    guarded || !(p.subject.is_contextual() || p.adversary.is_contextual())
                }
                Formula::Boxed(_, a) => go(a, true),
                other => other.children().into_iter().all(|c| go(c, guarded)),
            }
        }
        go(self, false)
    }

    /// Roster identifiers this formula mentions.
    pub fn named_refs(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| {
            let refs: [&AgentRef; 2] = match f {
                Formula::Act {
                    subject, adversary, ..
                } => [subject, adversary],
                Formula::Prob(p) => [&p.subject, &p.adversary],
                _ => return,
            };
            for r in refs {
                if let AgentRef::Named(n) = r {
                    out.insert(n.clone());
                }
            }
        });
        out
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Formula)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    /// Rebuilds the tree bottom-up, replacing atoms through `leaf`.
    pub fn map_atoms<E>(
        &self,
        leaf: &mut impl FnMut(&Formula) -> Result<Formula, E>,
    ) -> Result<Formula, E> {
        Ok(match self {
            Formula::Top | Formula::Bottom | Formula::Act { .. } | Formula::Prob(_) => leaf(self)?,
            Formula::Not(a) => Formula::not(a.map_atoms(leaf)?),
            Formula::And(a, b) => Formula::and(a.map_atoms(leaf)?, b.map_atoms(leaf)?),
            Formula::Or(a, b) => Formula::or(a.map_atoms(leaf)?, b.map_atoms(leaf)?),
            Formula::Implies(a, b) => Formula::implies(a.map_atoms(leaf)?, b.map_atoms(leaf)?),
            Formula::Boxed(l, a) => Formula::boxed(*l, a.map_atoms(leaf)?),
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Implies(..) => 1,
            Formula::Or(..) => 2,
            Formula::And(..) => 3,
            Formula::Not(_) | Formula::Boxed(..) => 4,
            _ => 5,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.precedence() < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Formula::Top => f.write_str("top")?,
            Formula::Bottom => f.write_str("bot")?,
            Formula::Act {
                subject,
                adversary,
                action,
            } => write!(f, "{subject}@{adversary} = {action}")?,
            Formula::Prob(p) => write!(
                f,
                "P[{}@{} = {}] {} {}",
                p.subject,
                p.adversary,
                p.action,
                p.relation.token(),
                p.threshold
            )?,
            Formula::Not(a) => {
                f.write_str("~")?;
                a.write_at(f, 4)?;
            }
            Formula::Boxed(l, a) => {
                f.write_str(l.token())?;
                a.write_at(f, 4)?;
            }
            Formula::And(a, b) => {
                a.write_at(f, 3)?;
                f.write_str(" & ")?;
                b.write_at(f, 4)?;
            }
            Formula::Or(a, b) => {
                a.write_at(f, 2)?;
                f.write_str(" | ")?;
                b.write_at(f, 3)?;
            }
            Formula::Implies(a, b) => {
                a.write_at(f, 2)?;
                f.write_str(" -> ")?;
                b.write_at(f, 1)?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Renders in the roster DSL; parses back to the same tree.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

/// A submitted program.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AgentSpec {
    /// Plays the same action against everyone.
    Constant(Action),
    /// Cooperates exactly with syntactic copies of itself.
    CliqueBot,
    /// Cooperates iff the condition holds (conditions speak through boxes).
    Modal(Formula),
    /// Cooperates with probability epsilon, otherwise mirrors the opponent's play against it.
    Grounded(Rational),
}

impl AgentSpec {
    pub fn is_grounded(&self) -> bool {
        matches!(self, AgentSpec::Grounded(_))
    }

    /// Checks the structural invariants: epsilon within [0,1], modal conditions fully modalized.
    pub fn validate(&self) -> Result<(), String> {
        match self {
            AgentSpec::Grounded(eps) if eps < &Rational::zero() || eps > &Rational::one() => {
                Err(format!("epsilon {eps} outside [0,1]"))
            }
            AgentSpec::Modal(cond) if !cond.fully_modalized() => {
                Err(format!("condition `{cond}` is not fully modalized"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentSpec::Constant(a) => write!(f, "const {a}"),
            AgentSpec::CliqueBot => f.write_str("clique"),
            AgentSpec::Modal(c) => write!(f, "modal({c})"),
            AgentSpec::Grounded(e) => write!(f, "grounded({e})"),
        }
    }
}

/// Convenience for tests and constructors: `ratio(1, 4)`.
pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(numer.into(), denom.into())
}

/// Always `a/b`, including integers (`1/1`).
pub fn fraction_string(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opp_self(a: Action) -> Formula {
        Formula::act(AgentRef::Opponent, AgentRef::This, a)
    }

    #[test]
    fn guarded_atom_is_modalized() {
        assert!(Formula::pa(opp_self(Action::Cooperate)).fully_modalized());
    }

    #[test]
    fn bare_atom_is_not_modalized() {
        assert!(!opp_self(Action::Cooperate).fully_modalized());
    }

    #[test]
    fn cimcic_condition_is_modalized() {
        let f = Formula::pa(Formula::implies(
            Formula::act(AgentRef::This, AgentRef::Opponent, Action::Cooperate),
            opp_self(Action::Cooperate),
        ));
        assert!(f.fully_modalized());
    }

    #[test]
    fn named_only_atoms_need_no_box() {
        let f = Formula::act(AgentRef::named("DB"), AgentRef::named("CB"), Action::Defect);
        assert!(f.fully_modalized());
        let g = Formula::act(AgentRef::named("DB"), AgentRef::Opponent, Action::Defect);
        assert!(!g.fully_modalized());
        assert!(!Formula::and(Formula::pa(g.clone()), g).fully_modalized());
    }

    #[test]
    fn display_uses_minimal_parens() {
        let a = opp_self(Action::Cooperate);
        let f = Formula::implies(
            Formula::implies(a.clone(), a.clone()),
            Formula::and(a.clone(), Formula::or(a.clone(), Formula::Top)),
        );
        assert_eq!(
            f.to_string(),
            "(opp@self = C -> opp@self = C) -> opp@self = C & (opp@self = C | top)"
        );
        assert_eq!(
            Formula::pa(Formula::not(Formula::Bottom)).to_string(),
            "[]~bot"
        );
        assert_eq!(
            Formula::pa1(Formula::and(Formula::Top, Formula::Bottom)).to_string(),
            "[1](top & bot)"
        );
    }

    #[test]
    fn modal_depth_counts_nesting() {
        let f = Formula::pa(Formula::and(Formula::pa1(Formula::Top), Formula::Bottom));
        assert_eq!(f.modal_depth(), 2);
        assert_eq!(Formula::Top.modal_depth(), 0);
    }

    #[test]
    fn validate_epsilon_range() {
        assert!(AgentSpec::Grounded(ratio(0, 1)).validate().is_ok());
        assert!(AgentSpec::Grounded(ratio(1, 1)).validate().is_ok());
        assert!(AgentSpec::Grounded(ratio(5, 4)).validate().is_err());
    }
}
