//! Turning a submitted pair of programs into an exact outcome distribution.
//!
//! Deterministic programs (constants, CliqueBot, modal agents) are compiled
//! into a [`MatchSystem`] and decided by the provability engine. A grounded
//! agent enters a system as the equation "I cooperate iff my opponent
//! cooperates against me": its random branch only ever returns C, so it
//! cooperates on every bitstring exactly when the mirrored run does.
//! Two grounded agents facing each other never touch the engine; see
//! [`grounded_solve`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::RwLock;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::agents::{builtin, clique_equal, recognize, AgentError, Builtin, Roster};
use crate::formula::{
    canonical_serialize, fraction_string, Action, AgentRef, AgentSpec, Formula, ProbAtom, Rational,
    Relation,
};
use crate::provability::{
    actual_value, check_guardedness, evaluate, EngineError, KripkeTable, MatchSystem, MatchVariable,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("invalid agent: {0}")]
    InvalidSpec(String),
    #[error("unknown agent `{0}` referenced in a condition")]
    UnknownReference(String),
    #[error("probability atom `{atom}` depends on its own match ({})", .chain.join(" -> "))]
    Nesting { atom: String, chain: Vec<String> },
    #[error("probabilities {0:?} do not form a distribution")]
    NotADistribution(Vec<String>),
}

/// Exact probabilities of the four joint profiles, player 1 first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutcomeDistribution {
    probs: [Rational; 4],
}

fn slot(a1: Action, a2: Action) -> usize {
    match (a1, a2) {
        (Action::Cooperate, Action::Cooperate) => 0,
        (Action::Cooperate, Action::Defect) => 1,
        (Action::Defect, Action::Cooperate) => 2,
        (Action::Defect, Action::Defect) => 3,
    }
}

const PROFILES: [(Action, Action); 4] = [
    (Action::Cooperate, Action::Cooperate),
    (Action::Cooperate, Action::Defect),
    (Action::Defect, Action::Cooperate),
    (Action::Defect, Action::Defect),
];

impl OutcomeDistribution {
    /// Builds a distribution; entries must be non-negative and sum to exactly 1.
    pub fn new(
        entries: impl IntoIterator<Item = ((Action, Action), Rational)>,
    ) -> Result<Self, MatchError> {
        let mut probs: [Rational; 4] = Default::default();
        for ((a1, a2), p) in entries {
            probs[slot(a1, a2)] += p;
        }
        let sum: Rational = probs.iter().sum();
        if probs.iter().any(|p| p < &Rational::zero()) || !sum.is_one() {
            return Err(MatchError::NotADistribution(
                probs.iter().map(fraction_string).collect(),
            ));
        }
        Ok(OutcomeDistribution { probs })
    }

    pub fn point(a1: Action, a2: Action) -> Self {
        let mut probs: [Rational; 4] = Default::default();
        probs[slot(a1, a2)] = Rational::one();
        OutcomeDistribution { probs }
    }

    pub fn get(&self, a1: Action, a2: Action) -> &Rational {
        &self.probs[slot(a1, a2)]
    }

    /// All four profiles in the order CC, CD, DC, DD.
    pub fn iter(&self) -> impl Iterator<Item = ((Action, Action), &Rational)> {
        PROFILES.iter().copied().zip(self.probs.iter())
    }

    /// Same distribution seen from the other seat.
    pub fn swapped(&self) -> Self {
        let mut probs: [Rational; 4] = Default::default();
        for ((a1, a2), p) in self.iter() {
            probs[slot(a2, a1)] = p.clone();
        }
        OutcomeDistribution { probs }
    }

    /// The single profile carrying all the mass, if there is one.
    pub fn as_point(&self) -> Option<(Action, Action)> {
        self.iter().find(|(_, p)| p.is_one()).map(|(o, _)| o)
    }

    pub fn is_mutual_cooperation(&self) -> bool {
        self.as_point() == Some((Action::Cooperate, Action::Cooperate))
    }

    /// Probability that player 1 (`first = true`) or player 2 plays `action`.
    pub fn marginal(&self, first: bool, action: Action) -> Rational {
        self.iter()
            .filter(|((a1, a2), _)| if first { *a1 == action } else { *a2 == action })
            .map(|(_, p)| p.clone())
            .sum()
    }

    /// Profile key as used in reports: `CC`, `CD`, `DC`, `DD`.
    pub fn key(profile: (Action, Action)) -> String {
        format!("{}{}", profile.0, profile.1)
    }
}

impl fmt::Display for OutcomeDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .iter()
            .filter(|(_, p)| !p.is_zero())
            .map(|((a1, a2), p)| format!("({a1},{a2}): {p}"))
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Outcome of two grounded FairBots.
///
/// Each cooperates with probability `p`, `q` solving
/// `p = e1 + (1-e1) q`, `q = e2 + (1-e2) p`. When either epsilon is positive
/// the unique solution is `p = q = 1`; with both zero the mutual simulation
/// never halts and both sides are scored as defecting.
pub fn grounded_solve(eps1: &Rational, eps2: &Rational) -> Result<OutcomeDistribution, MatchError> {
    for e in [eps1, eps2] {
        if e < &Rational::zero() || e > &Rational::one() {
            return Err(AgentError::Epsilon(e.clone()).into());
        }
    }
    let one = Rational::one();
    let det = &one - (&one - eps1) * (&one - eps2);
    if det.is_zero() {
        return Ok(OutcomeDistribution::point(Action::Defect, Action::Defect));
    }
    let p = (eps1 + (&one - eps1) * eps2) / &det;
    let q = (eps2 + (&one - eps2) * eps1) / &det;
    assert!(
        p.is_one() && q.is_one(),
        "grounded recursion must settle on C"
    );
    Ok(OutcomeDistribution::point(
        Action::Cooperate,
        Action::Cooperate,
    ))
}

/// Everything computed for one match.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub distribution: OutcomeDistribution,
    /// Resolved system and its world table; absent for grounded-vs-grounded pairs.
    pub system: Option<MatchSystem>,
    pub table: Option<KripkeTable>,
}

type PairKey = (Vec<u8>, Vec<u8>);

/// Match evaluator bound to a roster, memoizing outcomes by the canonical
/// serialization of the ordered pair. Safe to share between threads.
pub struct Arena<'r> {
    roster: &'r Roster,
    memo: RwLock<HashMap<PairKey, OutcomeDistribution>>,
}

/// Assigns stable identifiers to the concrete programs in one system.
struct Naming<'a> {
    roster: &'a Roster,
    by_key: HashMap<Vec<u8>, String>,
    specs: BTreeMap<String, AgentSpec>,
}

impl Naming<'_> {
    fn id_for(&mut self, spec: &AgentSpec, hint: Option<&str>) -> String {
        let key = canonical_serialize(spec);
        if let Some(id) = self.by_key.get(&key) {
            return id.clone();
        }
        let base = hint
            .map(str::to_string)
            .or_else(|| self.roster.name_of(spec).map(str::to_string))
            .or_else(|| recognize(spec).map(|b| b.label()))
            .unwrap_or_else(|| "agent".to_string());
        let mut id = base.clone();
        let mut n = 2;
        while self.specs.contains_key(&id) {
            id = format!("{base}#{n}");
            n += 1;
        }
        self.by_key.insert(key, id.clone());
        self.specs.insert(id.clone(), spec.clone());
        id
    }
}

impl<'r> Arena<'r> {
    pub fn new(roster: &'r Roster) -> Self {
        Arena {
            roster,
            memo: RwLock::new(HashMap::new()),
        }
    }

    pub fn roster(&self) -> &Roster {
        self.roster
    }

    /// Looks a name up in the roster, falling back to parameterless built-ins.
    pub fn resolve_name(&self, name: &str) -> Result<AgentSpec, MatchError> {
        if let Some(s) = self.roster.get(name) {
            return Ok(s.clone());
        }
        let b = match name {
            "DB" => Builtin::Db,
            "CB" => Builtin::Cb,
            "CwC" => Builtin::Cwc,
            "DUPOC" => Builtin::Dupoc,
            "CIMCIC" => Builtin::Cimcic,
            _ => return Err(MatchError::UnknownReference(name.to_string())),
        };
        Ok(builtin(&b)?)
    }

    /// Builds the system of cooperation variables reachable from `(p1, p2)`.
    /// Probability atoms are left in place, with concrete agent names.
    pub fn compile(&self, p1: &AgentSpec, p2: &AgentSpec) -> Result<MatchSystem, MatchError> {
        let mut naming = Naming {
            roster: self.roster,
            by_key: HashMap::new(),
            specs: BTreeMap::new(),
        };
        let id1 = naming.id_for(p1, None);
        let id2 = naming.id_for(p2, None);
        let mut system = MatchSystem::new((id1.clone(), id2.clone()));
        let mut pending = vec![
            MatchVariable::new(id2.clone(), id1.clone()),
            MatchVariable::new(id1, id2),
        ];
        while let Some(var) = pending.pop() {
            if system.definitions.contains_key(&var) {
                continue;
            }
            let subject = naming.specs[&var.subject].clone();
            let adversary = naming.specs[&var.adversary].clone();
            let def = match &subject {
                AgentSpec::Constant(a) => truth(*a == Action::Cooperate),
                AgentSpec::CliqueBot => truth(clique_equal(&subject, &adversary)),
                AgentSpec::Grounded(e1) => match &adversary {
                    AgentSpec::Grounded(e2) => {
                        truth(grounded_solve(e1, e2)?.is_mutual_cooperation())
                    }
                    _ => {
                        let mirror = var.reversed();
                        pending.push(mirror.clone());
                        mirror.atom()
                    }
                },
                AgentSpec::Modal(cond) => {
                    let mut bind = |r: &AgentRef| -> Result<String, MatchError> {
                        Ok(match r {
                            AgentRef::This => var.subject.clone(),
                            AgentRef::Opponent => var.adversary.clone(),
                            AgentRef::Named(n) => {
                                let spec = self.resolve_name(n)?;
                                naming.id_for(&spec, Some(n))
                            }
                        })
                    };
                    cond.map_atoms(&mut |atom| {
                        Ok::<_, MatchError>(match atom {
                            Formula::Act {
                                subject,
                                adversary,
                                action,
                            } => {
                                let v = MatchVariable::new(bind(subject)?, bind(adversary)?);
                                pending.push(v.clone());
                                match action {
                                    Action::Cooperate => v.atom(),
                                    Action::Defect => Formula::not(v.atom()),
                                }
                            }
                            Formula::Prob(p) => {
                                let v = MatchVariable::new(bind(&p.subject)?, bind(&p.adversary)?);
                                pending.push(v.clone());
                                Formula::Prob(ProbAtom {
                                    subject: AgentRef::Named(v.subject),
                                    adversary: AgentRef::Named(v.adversary),
                                    ..p.clone()
                                })
                            }
                            other => other.clone(),
                        })
                    })?
                }
            };
            system.define(var, def);
        }
        system.agents = naming.specs;
        check_guardedness(&system).map_err(EngineError::Unguarded)?;
        Ok(system)
    }

    /// Replaces every probability atom with a sentence the engine can decide.
    pub fn resolve_prob_atoms(&self, system: MatchSystem) -> Result<MatchSystem, MatchError> {
        self.resolve_with(system, &mut Vec::new())
    }

    fn resolve_with(
        &self,
        mut system: MatchSystem,
        stack: &mut Vec<(PairKey, String)>,
    ) -> Result<MatchSystem, MatchError> {
        let agents = system.agents.clone();
        for var in system.variables.clone() {
            let def = &system.definitions[&var];
            let resolved = def.map_atoms(&mut |atom| match atom {
                Formula::Prob(p) => self.resolve_atom(p, &agents, stack),
                other => Ok(other.clone()),
            })?;
            system.definitions.insert(var, resolved);
        }
        Ok(system)
    }

    fn resolve_atom(
        &self,
        p: &ProbAtom,
        agents: &BTreeMap<String, AgentSpec>,
        stack: &mut Vec<(PairKey, String)>,
    ) -> Result<Formula, MatchError> {
        let name = |r: &AgentRef| match r {
            AgentRef::Named(n) => Ok(n.clone()),
            other => Err(MatchError::InvalidSpec(format!(
                "probability atom on unbound `{other}`"
            ))),
        };
        let (s, a) = (name(&p.subject)?, name(&p.adversary)?);
        let lookup = |n: &str| {
            agents
                .get(n)
                .cloned()
                .ok_or_else(|| MatchError::UnknownReference(n.to_string()))
        };
        let (subject, adversary) = (lookup(&s)?, lookup(&a)?);
        if subject.is_grounded() {
            let dist = self
                .outcome_with(&subject, &adversary, stack)
                .map_err(|e| match e {
                    MatchError::Nesting { chain, .. } => MatchError::Nesting {
                        atom: Formula::Prob(p.clone()).to_string(),
                        chain,
                    },
                    other => other,
                })?;
            let q = dist.marginal(true, p.action);
            return Ok(truth(p.relation.holds(&q, &p.threshold)));
        }
        // A deterministic subject plays `action` with probability 0 or 1.
        let zero = Rational::zero();
        let one = Rational::one();
        let (always, never) = match p.relation {
            Relation::AtLeast => (p.threshold <= zero, p.threshold > one),
            Relation::Greater => (p.threshold < zero, p.threshold >= one),
        };
        Ok(if always {
            Formula::Top
        } else if never {
            Formula::Bottom
        } else {
            let v = MatchVariable::new(s, a);
            match p.action {
                Action::Cooperate => v.atom(),
                Action::Defect => Formula::not(v.atom()),
            }
        })
    }

    /// Exact joint outcome of `p1` (row player) against `p2`.
    pub fn outcome_distribution(
        &self,
        p1: &AgentSpec,
        p2: &AgentSpec,
    ) -> Result<OutcomeDistribution, MatchError> {
        self.outcome_with(p1, p2, &mut Vec::new())
    }

    fn outcome_with(
        &self,
        p1: &AgentSpec,
        p2: &AgentSpec,
        stack: &mut Vec<(PairKey, String)>,
    ) -> Result<OutcomeDistribution, MatchError> {
        let key = (canonical_serialize(p1), canonical_serialize(p2));
        if let Some(d) = self.memo.read().unwrap().get(&key) {
            return Ok(d.clone());
        }
        let label = format!("{p1} vs {p2}");
        if stack.iter().any(|(k, _)| k == &key) {
            let mut chain: Vec<String> = stack.iter().map(|(_, l)| l.clone()).collect();
            chain.push(label);
            return Err(MatchError::Nesting {
                atom: String::new(),
                chain,
            });
        }
        stack.push((key.clone(), label));
        let result = self.analyze_with(p1, p2, stack).map(|a| a.distribution);
        stack.pop();
        let dist = result?;
        self.memo.write().unwrap().insert(key, dist.clone());
        Ok(dist)
    }

    /// Compiles, resolves, and evaluates a match, keeping the intermediate system and table.
    pub fn analyze(&self, p1: &AgentSpec, p2: &AgentSpec) -> Result<Analysis, MatchError> {
        let key = (canonical_serialize(p1), canonical_serialize(p2));
        let label = format!("{p1} vs {p2}");
        self.analyze_with(p1, p2, &mut vec![(key, label)])
    }

    fn analyze_with(
        &self,
        p1: &AgentSpec,
        p2: &AgentSpec,
        stack: &mut Vec<(PairKey, String)>,
    ) -> Result<Analysis, MatchError> {
        for p in [p1, p2] {
            p.validate().map_err(MatchError::InvalidSpec)?;
        }
        if let (AgentSpec::Grounded(e1), AgentSpec::Grounded(e2)) = (p1, p2) {
            return Ok(Analysis {
                distribution: grounded_solve(e1, e2)?,
                system: None,
                table: None,
            });
        }
        let system = self.compile(p1, p2)?;
        let system = self.resolve_with(system, stack)?;
        let table = evaluate(&system)?;
        let (v12, v21) = system.root_variables();
        let act = |v: &MatchVariable| -> Result<Action, MatchError> {
            Ok(Action::from_cooperates(actual_value(&table, v)?))
        };
        let distribution = match (p1, p2) {
            (AgentSpec::Grounded(eps), _) => grounded_against(eps, act(&v21)?),
            (_, AgentSpec::Grounded(eps)) => grounded_against(eps, act(&v12)?).swapped(),
            _ => OutcomeDistribution::point(act(&v12)?, act(&v21)?),
        };
        Ok(Analysis {
            distribution,
            system: Some(system),
            table: Some(table),
        })
    }
}

/// Grounded agent in seat 1 against a deterministic opponent playing `opponent`.
fn grounded_against(eps: &Rational, opponent: Action) -> OutcomeDistribution {
    match opponent {
        Action::Cooperate => OutcomeDistribution::point(Action::Cooperate, Action::Cooperate),
        Action::Defect => OutcomeDistribution {
            probs: [
                Rational::zero(),
                eps.clone(),
                Rational::zero(),
                Rational::one() - eps,
            ],
        },
    }
}

fn truth(b: bool) -> Formula {
    if b {
        Formula::Top
    } else {
        Formula::Bottom
    }
}

pub fn compile(p1: &AgentSpec, p2: &AgentSpec, roster: &Roster) -> Result<MatchSystem, MatchError> {
    Arena::new(roster).compile(p1, p2)
}

pub fn resolve_prob_atoms(system: MatchSystem, roster: &Roster) -> Result<MatchSystem, MatchError> {
    Arena::new(roster).resolve_prob_atoms(system)
}

pub fn outcome_distribution(
    p1: &AgentSpec,
    p2: &AgentSpec,
    roster: &Roster,
) -> Result<OutcomeDistribution, MatchError> {
    Arena::new(roster).outcome_distribution(p1, p2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::default_roster;
    use crate::formula::{parse_roster, ratio};

    fn b(x: Builtin) -> AgentSpec {
        builtin(&x).unwrap()
    }

    fn cc() -> OutcomeDistribution {
        OutcomeDistribution::point(Action::Cooperate, Action::Cooperate)
    }
    fn dd() -> OutcomeDistribution {
        OutcomeDistribution::point(Action::Defect, Action::Defect)
    }

    #[test]
    fn distribution_must_sum_to_one() {
        let half = ratio(1, 2);
        assert!(OutcomeDistribution::new([
            ((Action::Cooperate, Action::Cooperate), half.clone()),
            ((Action::Defect, Action::Defect), half.clone()),
        ])
        .is_ok());
        assert!(
            OutcomeDistribution::new([((Action::Cooperate, Action::Cooperate), half)]).is_err()
        );
        assert!(OutcomeDistribution::new([
            ((Action::Cooperate, Action::Cooperate), ratio(3, 2)),
            ((Action::Defect, Action::Defect), ratio(-1, 2)),
        ])
        .is_err());
    }

    #[test]
    fn grounded_pairs() {
        assert_eq!(grounded_solve(&ratio(1, 4), &ratio(1, 4)).unwrap(), cc());
        assert_eq!(grounded_solve(&ratio(0, 1), &ratio(1, 2)).unwrap(), cc());
        assert_eq!(grounded_solve(&ratio(0, 1), &ratio(0, 1)).unwrap(), dd());
        assert!(grounded_solve(&ratio(0, 1), &ratio(2, 1)).is_err());
    }

    #[test]
    fn dupoc_vs_grounded_system_shape() {
        let roster = default_roster();
        let sys = compile(&b(Builtin::Dupoc), &b(Builtin::Egfb(ratio(1, 4))), &roster).unwrap();
        let d = MatchVariable::new("DUPOC", "eGFB");
        let g = MatchVariable::new("eGFB", "DUPOC");
        assert_eq!(sys.variables.len(), 2);
        assert_eq!(sys.definitions[&d], Formula::pa(g.atom()));
        assert_eq!(sys.definitions[&g], d.atom());
    }

    #[test]
    fn prudent_vs_cimcic_has_auxiliary_pair() {
        let roster = default_roster();
        let sys = compile(&b(Builtin::Pb(ratio(1, 2))), &b(Builtin::Cimcic), &roster).unwrap();
        assert!(sys
            .definitions
            .contains_key(&MatchVariable::new("CIMCIC", "DB")));
        let resolved = resolve_prob_atoms(sys, &roster).unwrap();
        let pb = MatchVariable::new("PB", "CIMCIC");
        assert_eq!(
            resolved.definitions[&pb],
            Formula::and(
                Formula::pa(MatchVariable::new("CIMCIC", "PB").atom()),
                Formula::pa1(Formula::not(MatchVariable::new("CIMCIC", "DB").atom()))
            )
        );
    }

    #[test]
    fn constants_compile_to_truth_values() {
        let roster = default_roster();
        let sys = compile(&b(Builtin::Cb), &b(Builtin::Db), &roster).unwrap();
        assert_eq!(
            sys.definitions[&MatchVariable::new("CB", "DB")],
            Formula::Top
        );
        assert_eq!(
            sys.definitions[&MatchVariable::new("DB", "CB")],
            Formula::Bottom
        );
    }

    #[test]
    fn grounded_probability_atoms_resolve_to_constants() {
        let roster = default_roster();
        let arena = Arena::new(&roster);
        let sys = arena
            .compile(&b(Builtin::Pb(ratio(1, 2))), &b(Builtin::Egfb(ratio(1, 4))))
            .unwrap();
        let sys = arena.resolve_prob_atoms(sys).unwrap();
        let pb = MatchVariable::new("PB", "eGFB");
        assert_eq!(
            sys.definitions[&pb],
            Formula::and(
                Formula::pa(MatchVariable::new("eGFB", "PB").atom()),
                Formula::pa1(Formula::Top)
            )
        );
        let sys = arena
            .compile(
                &b(Builtin::Pb(ratio(9, 10))),
                &b(Builtin::Egfb(ratio(1, 4))),
            )
            .unwrap();
        let sys = arena.resolve_prob_atoms(sys).unwrap();
        let pb = MatchVariable::new("PB:9/10", "eGFB");
        assert!(sys.definitions[&pb].to_string().ends_with("[1]bot"));
    }

    #[test]
    fn deterministic_subject_thresholds() {
        let roster = default_roster();
        let arena = Arena::new(&roster);
        let mut agents = BTreeMap::new();
        agents.insert("DUPOC".to_string(), b(Builtin::Dupoc));
        agents.insert("DB".to_string(), b(Builtin::Db));
        let atom = |rel, t| ProbAtom {
            subject: AgentRef::named("DUPOC"),
            adversary: AgentRef::named("DB"),
            action: Action::Defect,
            relation: rel,
            threshold: t,
        };
        let v = MatchVariable::new("DUPOC", "DB");
        let r = |p: ProbAtom| arena.resolve_atom(&p, &agents, &mut Vec::new()).unwrap();
        assert_eq!(
            r(atom(Relation::AtLeast, ratio(1, 2))),
            Formula::not(v.atom())
        );
        assert_eq!(
            r(atom(Relation::AtLeast, ratio(1, 1))),
            Formula::not(v.atom())
        );
        assert_eq!(r(atom(Relation::AtLeast, ratio(0, 1))), Formula::Top);
        assert_eq!(r(atom(Relation::AtLeast, ratio(3, 2))), Formula::Bottom);
        assert_eq!(
            r(atom(Relation::Greater, ratio(0, 1))),
            Formula::not(v.atom())
        );
        assert_eq!(r(atom(Relation::Greater, ratio(1, 1))), Formula::Bottom);
    }

    #[test]
    fn headline_outcomes() {
        let roster = default_roster();
        let arena = Arena::new(&roster);
        let o = |x, y| arena.outcome_distribution(&b(x), &b(y)).unwrap();
        assert_eq!(o(Builtin::Dupoc, Builtin::Egfb(ratio(1, 4))), cc());
        assert_eq!(o(Builtin::Cwc, Builtin::Dupoc), dd());
        assert_eq!(o(Builtin::Cimcic, Builtin::Db), dd());
        let mixed = o(Builtin::Pb(ratio(9, 10)), Builtin::Egfb(ratio(1, 4)));
        assert_eq!(mixed.get(Action::Defect, Action::Cooperate), &ratio(1, 4));
        assert_eq!(mixed.get(Action::Defect, Action::Defect), &ratio(3, 4));
        assert_eq!(
            o(Builtin::Egfb(ratio(1, 4)), Builtin::Pb(ratio(9, 10))),
            mixed.swapped()
        );
    }

    #[test]
    fn boundary_threshold_cooperates() {
        let roster = default_roster();
        let d = outcome_distribution(
            &b(Builtin::Pb(ratio(3, 4))),
            &b(Builtin::Egfb(ratio(1, 4))),
            &roster,
        )
        .unwrap();
        assert_eq!(d, cc());
    }

    #[test]
    fn grounded_vs_itself_inside_a_system() {
        // A modal agent asking about a grounded agent's self-play.
        let roster =
            parse_roster("G := grounded(1/3)\nW := modal( [](opp@self = C) & G@G = C )\n").unwrap();
        let d = outcome_distribution(roster.get("W").unwrap(), roster.get("G").unwrap(), &roster)
            .unwrap();
        assert_eq!(d, cc());
    }

    #[test]
    fn self_referential_probability_is_rejected() {
        // X asks how a grounded opponent plays against X itself.
        let roster =
            parse_roster("X := modal( [](P[opp@self = C] >= 1/2) )\nG := grounded(1/2)").unwrap();
        let err = outcome_distribution(roster.get("X").unwrap(), roster.get("G").unwrap(), &roster)
            .unwrap_err();
        assert!(matches!(err, MatchError::Nesting { .. }), "{err}");
    }

    #[test]
    fn unknown_reference_in_spec() {
        let roster = Roster::new();
        let spec = AgentSpec::Modal(Formula::pa(Formula::act(
            AgentRef::Opponent,
            AgentRef::named("Nobody"),
            Action::Cooperate,
        )));
        let err = outcome_distribution(&spec, &b(Builtin::Db), &roster).unwrap_err();
        assert_eq!(err, MatchError::UnknownReference("Nobody".into()));
    }

    #[test]
    fn invalid_specs_rejected() {
        let roster = Roster::new();
        let bad = AgentSpec::Modal(Formula::act(
            AgentRef::Opponent,
            AgentRef::This,
            Action::Cooperate,
        ));
        assert!(matches!(
            outcome_distribution(&bad, &b(Builtin::Db), &roster),
            Err(MatchError::InvalidSpec(_))
        ));
    }

    #[test]
    fn distinct_specs_with_same_label_get_distinct_ids() {
        let roster = default_roster();
        let sys = compile(
            &b(Builtin::Pb(ratio(1, 4))),
            &b(Builtin::Pb(ratio(1, 3))),
            &roster,
        )
        .unwrap();
        assert_eq!(sys.root.0, "PB:1/4");
        assert_eq!(sys.root.1, "PB:1/3");
    }
}
