//! The built-in agent families and rosters of named agents.

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::formula::{
    canonical_serialize, parse_rational, ratio, Action, AgentRef, AgentSpec, Formula, Rational,
    Relation,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("epsilon {0} outside [0,1]")]
    Epsilon(Rational),
    #[error("threshold {0} is negative")]
    Threshold(Rational),
    #[error("unknown agent `{0}`")]
    Unknown(String),
    #[error("invalid parameter in `{0}`: {1}")]
    Parameter(String, String),
}

/// The named programs shipped with the library.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Builtin {
    /// DefectBot.
    Db,
    /// CooperateBot.
    Cb,
    /// Cooperate with copies.
    Cwc,
    /// Defect unless proof of opponent cooperation.
    Dupoc,
    /// Cooperate if my cooperation implies cooperation from the opponent.
    Cimcic,
    /// PrudentBot with threshold theta.
    Pb(Rational),
    /// Epsilon-grounded FairBot.
    Egfb(Rational),
}

impl Builtin {
    pub fn label(&self) -> String {
        match self {
            Builtin::Db => "DB".into(),
            Builtin::Cb => "CB".into(),
            Builtin::Cwc => "CwC".into(),
            Builtin::Dupoc => "DUPOC".into(),
            Builtin::Cimcic => "CIMCIC".into(),
            Builtin::Pb(t) => format!("PB:{t}"),
            Builtin::Egfb(e) => format!("eGFB:{e}"),
        }
    }

    /// Name without parameter.
    pub fn family(&self) -> &'static str {
        match self {
            Builtin::Db => "DB",
            Builtin::Cb => "CB",
            Builtin::Cwc => "CwC",
            Builtin::Dupoc => "DUPOC",
            Builtin::Cimcic => "CIMCIC",
            Builtin::Pb(_) => "PB",
            Builtin::Egfb(_) => "eGFB",
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Parses `DB`, `CwC`, `PB:9/10`, `eGFB:1/4`. Parameterless `PB`/`eGFB`
/// are not accepted here; see [`Builtin::parse_with_defaults`].
impl FromStr for Builtin {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Builtin::parse_with_defaults(s, None)
    }
}

impl Builtin {
    /// Like `from_str`, but a bare `PB` / `eGFB` takes its parameter from `defaults`.
    pub fn parse_with_defaults(
        s: &str,
        defaults: Option<&RosterParams>,
    ) -> Result<Self, AgentError> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        let param = param
            .map(|p| parse_rational(p).map_err(|e| AgentError::Parameter(s.into(), e.message)))
            .transpose()?;
        let b = match (name, param) {
            ("DB", None) => Builtin::Db,
            ("CB", None) => Builtin::Cb,
            ("CwC", None) => Builtin::Cwc,
            ("DUPOC", None) => Builtin::Dupoc,
            ("CIMCIC", None) => Builtin::Cimcic,
            ("PB", Some(t)) => Builtin::Pb(t),
            ("eGFB", Some(e)) => Builtin::Egfb(e),
            ("PB", None) => match defaults {
                Some(d) => Builtin::Pb(d.theta.clone()),
                None => return Err(AgentError::Parameter(s.into(), "missing threshold".into())),
            },
            ("eGFB", None) => match defaults {
                Some(d) => Builtin::Egfb(d.epsilon.clone()),
                None => return Err(AgentError::Parameter(s.into(), "missing epsilon".into())),
            },
            (n, Some(_)) if ["DB", "CB", "CwC", "DUPOC", "CIMCIC"].contains(&n) => {
                return Err(AgentError::Parameter(s.into(), "takes no parameter".into()))
            }
            _ => return Err(AgentError::Unknown(s.into())),
        };
        builtin(&b)?;
        Ok(b)
    }
}

fn opp_vs_self(action: Action) -> Formula {
    Formula::act(AgentRef::Opponent, AgentRef::This, action)
}

/// PrudentBot's condition for threshold `theta`.
pub fn prudent_condition(theta: Rational) -> Formula {
    Formula::and(
        Formula::pa(opp_vs_self(Action::Cooperate)),
        Formula::pa1(Formula::prob(
            AgentRef::Opponent,
            AgentRef::named("DB"),
            Action::Defect,
            Relation::AtLeast,
            theta,
        )),
    )
}

/// Builds the spec for a built-in agent.
pub fn builtin(b: &Builtin) -> Result<AgentSpec, AgentError> {
    Ok(match b {
        Builtin::Db => AgentSpec::Constant(Action::Defect),
        Builtin::Cb => AgentSpec::Constant(Action::Cooperate),
        Builtin::Cwc => AgentSpec::CliqueBot,
        Builtin::Dupoc => AgentSpec::Modal(Formula::pa(opp_vs_self(Action::Cooperate))),
        Builtin::Cimcic => AgentSpec::Modal(Formula::pa(Formula::implies(
            Formula::act(AgentRef::This, AgentRef::Opponent, Action::Cooperate),
            opp_vs_self(Action::Cooperate),
        ))),
        Builtin::Pb(theta) => {
            // theta > 1 is allowed: the atom is simply unsatisfiable.
            if theta < &Rational::zero() {
                return Err(AgentError::Threshold(theta.clone()));
            }
            AgentSpec::Modal(prudent_condition(theta.clone()))
        }
        Builtin::Egfb(eps) => {
            if eps < &Rational::zero() || eps > &Rational::one() {
                return Err(AgentError::Epsilon(eps.clone()));
            }
            AgentSpec::Grounded(eps.clone())
        }
    })
}

/// Identifies a spec as one of the built-in families, if it is one.
pub fn recognize(spec: &AgentSpec) -> Option<Builtin> {
    match spec {
        AgentSpec::Constant(Action::Defect) => Some(Builtin::Db),
        AgentSpec::Constant(Action::Cooperate) => Some(Builtin::Cb),
        AgentSpec::CliqueBot => Some(Builtin::Cwc),
        AgentSpec::Grounded(e) => Some(Builtin::Egfb(e.clone())),
        AgentSpec::Modal(cond) => {
            for b in [Builtin::Dupoc, Builtin::Cimcic] {
                if builtin(&b).ok().as_ref() == Some(spec) {
                    return Some(b);
                }
            }
            if let Formula::And(_, rhs) = cond {
                if let Formula::Boxed(_, inner) = rhs.as_ref() {
                    if let Formula::Prob(p) = inner.as_ref() {
                        if &prudent_condition(p.threshold.clone()) == cond {
                            return Some(Builtin::Pb(p.threshold.clone()));
                        }
                    }
                }
            }
            None
        }
    }
}

/// Syntactic program equality, as used by CliqueBot.
pub fn clique_equal(a: &AgentSpec, b: &AgentSpec) -> bool {
    canonical_serialize(a) == canonical_serialize(b)
}

/// Parameters of the default roster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RosterParams {
    pub theta: Rational,
    pub epsilon: Rational,
}

impl Default for RosterParams {
    fn default() -> Self {
        RosterParams {
            theta: ratio(1, 2),
            epsilon: ratio(1, 4),
        }
    }
}

/// An ordered set of named agents.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Roster {
    entries: IndexMap<String, AgentSpec>,
}

impl Roster {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, spec: AgentSpec) -> Option<AgentSpec> {
        self.entries.insert(name.into(), spec)
    }

    pub fn get(&self, name: &str) -> Option<&AgentSpec> {
        self.entries.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &AgentSpec)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// First name bound to a spec syntactically equal to `spec`.
    pub fn name_of(&self, spec: &AgentSpec) -> Option<&str> {
        let key = canonical_serialize(spec);
        self.iter()
            .find(|(_, s)| canonical_serialize(s) == key)
            .map(|(n, _)| n)
    }

    /// Entries of `other` are added, replacing same-named entries here.
    pub fn overlay(&mut self, other: &Roster) {
        for (n, s) in other.iter() {
            self.insert(n, s.clone());
        }
    }

    /// Renders the roster in DSL syntax.
    pub fn to_dsl(&self) -> String {
        self.iter().map(|(n, s)| format!("{n} := {s}\n")).collect()
    }
}

impl FromIterator<(String, AgentSpec)> for Roster {
    fn from_iter<I: IntoIterator<Item = (String, AgentSpec)>>(iter: I) -> Self {
        Roster {
            entries: iter.into_iter().collect(),
        }
    }
}

/// DB, CB, CwC, DUPOC, CIMCIC, PB, eGFB with the given theta and epsilon.
pub fn roster_with(params: &RosterParams) -> Result<Roster, AgentError> {
    let entries = [
        ("DB", Builtin::Db),
        ("CB", Builtin::Cb),
        ("CwC", Builtin::Cwc),
        ("DUPOC", Builtin::Dupoc),
        ("CIMCIC", Builtin::Cimcic),
        ("PB", Builtin::Pb(params.theta.clone())),
        ("eGFB", Builtin::Egfb(params.epsilon.clone())),
    ];
    entries
        .into_iter()
        .map(|(n, b)| Ok((n.to_string(), builtin(&b)?)))
        .collect()
}

/// The seven built-ins with theta = 1/2, epsilon = 1/4.
pub fn default_roster() -> Roster {
    roster_with(&RosterParams::default()).expect("default parameters are in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_roster;

    #[test]
    fn dupoc_shape() {
        assert_eq!(
            builtin(&Builtin::Dupoc).unwrap(),
            AgentSpec::Modal(Formula::pa(Formula::act(
                AgentRef::Opponent,
                AgentRef::This,
                Action::Cooperate
            )))
        );
    }

    #[test]
    fn grounded_zero_is_legal() {
        assert_eq!(
            builtin(&Builtin::Egfb(ratio(0, 1))).unwrap(),
            AgentSpec::Grounded(ratio(0, 1))
        );
    }

    #[test]
    fn prudent_threshold_is_embedded() {
        let spec = builtin(&Builtin::Pb(ratio(1, 4))).unwrap();
        assert_eq!(recognize(&spec), Some(Builtin::Pb(ratio(1, 4))));
        let AgentSpec::Modal(f) = spec else { panic!() };
        assert!(f.to_string().contains(">= 1/4"));
    }

    #[test]
    fn threshold_above_one_allowed_negative_rejected() {
        assert!(builtin(&Builtin::Pb(ratio(3, 2))).is_ok());
        assert!(builtin(&Builtin::Pb(ratio(-1, 2))).is_err());
        assert!(builtin(&Builtin::Egfb(ratio(3, 2))).is_err());
    }

    #[test]
    fn clique_equality() {
        let cwc = builtin(&Builtin::Cwc).unwrap();
        assert!(clique_equal(&cwc, &AgentSpec::CliqueBot));
        assert!(!clique_equal(&cwc, &builtin(&Builtin::Dupoc).unwrap()));
        assert!(clique_equal(
            &AgentSpec::Grounded(ratio(1, 4)),
            &AgentSpec::Grounded(ratio(2, 8))
        ));
    }

    #[test]
    fn default_roster_contents() {
        let r = default_roster();
        assert_eq!(r.len(), 7);
        assert_eq!(
            r.get("PB"),
            Some(&builtin(&Builtin::Pb(ratio(1, 2))).unwrap())
        );
        assert_eq!(r.get("eGFB"), Some(&AgentSpec::Grounded(ratio(1, 4))));
        // theta <= 1 - epsilon
        assert!(ratio(1, 2) <= Rational::one() - ratio(1, 4));
    }

    #[test]
    fn default_roster_round_trips_through_dsl() {
        let r = default_roster();
        assert_eq!(parse_roster(&r.to_dsl()).unwrap(), r);
    }

    #[test]
    fn builtins_are_modalized() {
        for (_, s) in default_roster().iter() {
            assert!(s.validate().is_ok());
        }
    }

    #[test]
    fn parse_builtin_names() {
        assert_eq!(
            "PB:9/10".parse::<Builtin>().unwrap(),
            Builtin::Pb(ratio(9, 10))
        );
        assert_eq!(
            "eGFB:2/8".parse::<Builtin>().unwrap(),
            Builtin::Egfb(ratio(1, 4))
        );
        assert_eq!("CwC".parse::<Builtin>().unwrap(), Builtin::Cwc);
        assert!("PB".parse::<Builtin>().is_err());
        assert!("eGFB:3/2".parse::<Builtin>().is_err());
        assert!("DB:1".parse::<Builtin>().is_err());
        assert!(matches!(
            "Nope".parse::<Builtin>(),
            Err(AgentError::Unknown(_))
        ));
        let d = RosterParams::default();
        assert_eq!(
            Builtin::parse_with_defaults("PB", Some(&d)).unwrap(),
            Builtin::Pb(ratio(1, 2))
        );
    }

    #[test]
    fn recognize_round_trip() {
        for b in [
            Builtin::Db,
            Builtin::Cb,
            Builtin::Cwc,
            Builtin::Dupoc,
            Builtin::Cimcic,
            Builtin::Pb(ratio(9, 10)),
            Builtin::Egfb(ratio(1, 3)),
        ] {
            assert_eq!(recognize(&builtin(&b).unwrap()), Some(b.clone()));
            assert_eq!(b.label().parse::<Builtin>().unwrap(), b);
        }
    }
}
