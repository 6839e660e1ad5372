//! Payoffs, pool-based Nash checks, the compatibility matrix, and the
//! machine-checked list of cooperation claims.
//!
//! Equilibrium checks are relative to a finite challenger pool: a pass means
//! no pool member is a profitable deviation, not that none exists among all
//! programs.

use std::fmt;

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::agents::{builtin, recognize, roster_with, AgentError, Builtin, Roster, RosterParams};
use crate::formula::{ratio, Action, AgentSpec, BoxLevel, Formula, Rational};
use crate::matchup::{Arena, MatchError, OutcomeDistribution};
use crate::provability::{provable, MatchVariable};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EquilibriumError {
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("payoffs must satisfy T > R > P > S (got {0})")]
    Ordering(String),
    #[error("challenger pool is empty")]
    EmptyPool,
}

/// Prisoner's Dilemma payoffs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PayoffMatrix {
    pub reward: Rational,
    pub temptation: Rational,
    pub punishment: Rational,
    pub sucker: Rational,
}

impl Default for PayoffMatrix {
    fn default() -> Self {
        PayoffMatrix {
            reward: ratio(3, 1),
            temptation: ratio(4, 1),
            punishment: ratio(1, 1),
            sucker: ratio(0, 1),
        }
    }
}

impl PayoffMatrix {
    pub fn new(
        reward: Rational,
        temptation: Rational,
        punishment: Rational,
        sucker: Rational,
    ) -> Result<Self, EquilibriumError> {
        if !(temptation > reward && reward > punishment && punishment > sucker) {
            return Err(EquilibriumError::Ordering(format!(
                "T={temptation}, R={reward}, P={punishment}, S={sucker}"
            )));
        }
        Ok(PayoffMatrix {
            reward,
            temptation,
            punishment,
            sucker,
        })
    }

    /// Row player's payoff for a pure profile.
    pub fn payoff(&self, mine: Action, theirs: Action) -> &Rational {
        match (mine, theirs) {
            (Action::Cooperate, Action::Cooperate) => &self.reward,
            (Action::Cooperate, Action::Defect) => &self.sucker,
            (Action::Defect, Action::Cooperate) => &self.temptation,
            (Action::Defect, Action::Defect) => &self.punishment,
        }
    }
}

pub fn expected_utilities(dist: &OutcomeDistribution, m: &PayoffMatrix) -> (Rational, Rational) {
    let mut u1 = Rational::zero();
    let mut u2 = Rational::zero();
    for ((a1, a2), p) in dist.iter() {
        u1 += p * m.payoff(a1, a2);
        u2 += p * m.payoff(a2, a1);
    }
    (u1, u2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Seat {
    #[serde(rename = "player1")]
    First,
    #[serde(rename = "player2")]
    Second,
}

impl fmt::Display for Seat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Seat::First => "player 1",
            Seat::Second => "player 2",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub challenger: String,
    pub seat: Seat,
    pub payoff: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquilibriumReport {
    pub pair: (String, String),
    pub payoffs: (Rational, Rational),
    pub pool: Vec<String>,
    pub violations: Vec<Violation>,
}

impl EquilibriumReport {
    pub fn is_equilibrium(&self) -> bool {
        self.violations.is_empty()
    }

    pub const SCOPE_NOTE: &'static str =
        "checked against the challenger pool only, not against all programs";
}

/// A named program, as used in pools and reports.
pub type Entry = (String, AgentSpec);

/// Every roster agent, in roster order.
pub fn standard_pool(roster: &Roster) -> Vec<Entry> {
    roster
        .iter()
        .map(|(n, s)| (n.to_string(), s.clone()))
        .collect()
}

/// Tries every challenger in either seat against the incumbent pair.
pub fn check_equilibrium(
    arena: &Arena<'_>,
    p1: &Entry,
    p2: &Entry,
    pool: &[Entry],
    m: &PayoffMatrix,
) -> Result<EquilibriumReport, EquilibriumError> {
    if pool.is_empty() {
        return Err(EquilibriumError::EmptyPool);
    }
    let payoffs = expected_utilities(&arena.outcome_distribution(&p1.1, &p2.1)?, m);
    let mut violations = Vec::new();
    for (name, z) in pool {
        let (dev1, _) = expected_utilities(&arena.outcome_distribution(z, &p2.1)?, m);
        if dev1 > payoffs.0 {
            violations.push(Violation {
                challenger: name.clone(),
                seat: Seat::First,
                payoff: dev1,
            });
        }
        let (_, dev2) = expected_utilities(&arena.outcome_distribution(&p1.1, z)?, m);
        if dev2 > payoffs.1 {
            violations.push(Violation {
                challenger: name.clone(),
                seat: Seat::Second,
                payoff: dev2,
            });
        }
    }
    Ok(EquilibriumReport {
        pair: (p1.0.clone(), p2.0.clone()),
        payoffs,
        pool: pool.iter().map(|(n, _)| n.clone()).collect(),
        violations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CellFlag {
    #[serde(rename = "MUTUAL_C")]
    MutualC,
    #[serde(rename = "MUTUAL_D")]
    MutualD,
    #[serde(rename = "MIXED")]
    Mixed,
    #[serde(rename = "ASYMMETRIC")]
    Asymmetric,
}

impl CellFlag {
    pub fn of(dist: &OutcomeDistribution) -> CellFlag {
        match dist.as_point() {
            Some((Action::Cooperate, Action::Cooperate)) => CellFlag::MutualC,
            Some((Action::Defect, Action::Defect)) => CellFlag::MutualD,
            Some(_) => CellFlag::Asymmetric,
            None => CellFlag::Mixed,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CellFlag::MutualC => "MUTUAL_C",
            CellFlag::MutualD => "MUTUAL_D",
            CellFlag::Mixed => "MIXED",
            CellFlag::Asymmetric => "ASYMMETRIC",
        }
    }
}

impl fmt::Display for CellFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    pub distribution: OutcomeDistribution,
    pub payoffs: (Rational, Rational),
    pub flag: CellFlag,
}

/// The DUPOC / CIMCIC / PB / eGFB sub-block and whether the mutual-cooperation
/// claim applies to it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockCheck {
    pub members: Vec<String>,
    pub theta: Rational,
    pub epsilon: Rational,
    /// `0 < epsilon <= 2/3` and `theta <= 1 - epsilon`.
    pub hypothesis_holds: bool,
    pub all_mutual_c: bool,
}

impl BlockCheck {
    /// Fails only when the hypothesis holds and some cell is not mutual cooperation.
    pub fn passes(&self) -> bool {
        !self.hypothesis_holds || self.all_mutual_c
    }
}

pub fn theorem_hypothesis(theta: &Rational, epsilon: &Rational) -> bool {
    epsilon > &Rational::zero() && epsilon <= &ratio(2, 3) && theta <= &(Rational::one() - epsilon)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompatibilityMatrix {
    pub names: Vec<String>,
    /// `cells[i][j]`: row agent `i` as player 1 against column agent `j`.
    pub cells: Vec<Vec<Cell>>,
    pub block: Option<BlockCheck>,
}

impl CompatibilityMatrix {
    pub fn cell(&self, row: &str, col: &str) -> Option<&Cell> {
        let i = self.names.iter().position(|n| n == row)?;
        let j = self.names.iter().position(|n| n == col)?;
        Some(&self.cells[i][j])
    }
}

/// Ordered-pair outcomes for every roster agent.
pub fn compatibility_matrix(
    arena: &Arena<'_>,
    m: &PayoffMatrix,
) -> Result<CompatibilityMatrix, EquilibriumError> {
    let entries = standard_pool(arena.roster());
    let n = entries.len();
    let cells: Vec<Cell> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (a, b) = (&entries[k / n].1, &entries[k % n].1);
            let distribution = arena.outcome_distribution(a, b)?;
            Ok(Cell {
                payoffs: expected_utilities(&distribution, m),
                flag: CellFlag::of(&distribution),
                distribution,
            })
        })
        .collect::<Result<_, EquilibriumError>>()?;
    let mut rows = Vec::with_capacity(n);
    let mut it = cells.into_iter();
    for _ in 0..n {
        rows.push(it.by_ref().take(n).collect::<Vec<_>>());
    }
    let names: Vec<String> = entries.iter().map(|(n, _)| n.clone()).collect();

    let find = |pred: &dyn Fn(&Builtin) -> bool| {
        entries
            .iter()
            .position(|(_, s)| recognize(s).is_some_and(|b| pred(&b)))
    };
    let block = match (
        find(&|b| *b == Builtin::Dupoc),
        find(&|b| *b == Builtin::Cimcic),
        find(&|b| matches!(b, Builtin::Pb(_))),
        find(&|b| matches!(b, Builtin::Egfb(_))),
    ) {
        (Some(d), Some(c), Some(p), Some(g)) => {
            let idx = [d, c, p, g];
            let Some(Builtin::Pb(theta)) = recognize(&entries[p].1) else {
                unreachable!()
            };
            let Some(Builtin::Egfb(epsilon)) = recognize(&entries[g].1) else {
                unreachable!()
            };
            let all_mutual_c = idx
                .iter()
                .all(|&i| idx.iter().all(|&j| rows[i][j].flag == CellFlag::MutualC));
            Some(BlockCheck {
                members: idx.iter().map(|&i| names[i].clone()).collect(),
                hypothesis_holds: theorem_hypothesis(&theta, &epsilon),
                theta,
                epsilon,
                all_mutual_c,
            })
        }
        _ => None,
    };
    Ok(CompatibilityMatrix {
        names,
        cells: rows,
        block,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Status {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "fail")]
    Fail,
    /// The claim's precondition does not hold for these parameters.
    #[serde(rename = "not-applicable")]
    NotApplicable,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::NotApplicable => "N/A",
        })
    }
}

/// One machine-checked claim.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub name: String,
    pub claim: String,
    pub status: Status,
    /// Computed distributions and side checks.
    pub evidence: Vec<String>,
    pub note: Option<String>,
}

impl Verdict {
    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }
}

struct Suite<'a> {
    arena: Arena<'a>,
    payoffs: PayoffMatrix,
    pool: Vec<Entry>,
    verdicts: Vec<Verdict>,
}

impl Suite<'_> {
    fn spec(b: &Builtin) -> Result<Entry, EquilibriumError> {
        Ok((b.label(), builtin(b)?))
    }

    fn outcome(&self, a: &Entry, b: &Entry) -> Result<OutcomeDistribution, EquilibriumError> {
        Ok(self.arena.outcome_distribution(&a.1, &b.1)?)
    }

    /// Checks `expected` for every listed pair, plus the pool check when `nash` is set.
    fn pairs(
        &mut self,
        name: &str,
        claim: &str,
        pairs: &[(Builtin, Builtin, OutcomeDistribution)],
        nash: bool,
        note: Option<String>,
    ) -> Result<(), EquilibriumError> {
        let mut ok = true;
        let mut evidence = Vec::new();
        for (x, y, expected) in pairs {
            let (a, b) = (Self::spec(x)?, Self::spec(y)?);
            let got = self.outcome(&a, &b)?;
            ok &= &got == expected;
            evidence.push(format!("{} vs {}: {got}", a.0, b.0));
            if nash {
                let report = check_equilibrium(&self.arena, &a, &b, &self.pool, &self.payoffs)?;
                ok &= report.is_equilibrium();
                for v in &report.violations {
                    evidence.push(format!(
                        "  {} deviating as {} earns {}",
                        v.challenger, v.seat, v.payoff
                    ));
                }
            }
        }
        self.verdicts.push(Verdict {
            name: name.into(),
            claim: claim.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            evidence,
            note,
        });
        Ok(())
    }
}

/// Machine-checks the cooperation and equilibrium claims for the given
/// PrudentBot threshold and grounding probability.
pub fn theorem_suite(
    theta: &Rational,
    epsilon: &Rational,
) -> Result<Vec<Verdict>, EquilibriumError> {
    let params = RosterParams {
        theta: theta.clone(),
        epsilon: epsilon.clone(),
    };
    let roster = roster_with(&params)?;
    let mut s = Suite {
        arena: Arena::new(&roster),
        payoffs: PayoffMatrix::default(),
        pool: standard_pool(&roster),
        verdicts: Vec::new(),
    };
    let cc = OutcomeDistribution::point(Action::Cooperate, Action::Cooperate);
    let dd = OutcomeDistribution::point(Action::Defect, Action::Defect);
    let pb = Builtin::Pb(theta.clone());
    let gfb = Builtin::Egfb(epsilon.clone());
    let zero = Rational::zero();
    let one = Rational::one();

    s.pairs(
        "CwC/CwC",
        "CliqueBot against itself is an equilibrium with mutual cooperation",
        &[(Builtin::Cwc, Builtin::Cwc, cc.clone())],
        true,
        None,
    )?;

    // CliqueBot defects on everyone else; the others answer with defection,
    // except that the grounded bot still cooperates with probability epsilon.
    {
        let cwc = Suite::spec(&Builtin::Cwc)?;
        let mut ok = true;
        let mut evidence = Vec::new();
        for other in [Builtin::Dupoc, Builtin::Cimcic, pb.clone(), gfb.clone()] {
            let o = Suite::spec(&other)?;
            let d = s.outcome(&cwc, &o)?;
            ok &= d.marginal(true, Action::Defect).is_one();
            let expected_coop = match &other {
                Builtin::Egfb(e) => e.clone(),
                _ => zero.clone(),
            };
            ok &= d.marginal(false, Action::Cooperate) == expected_coop;
            ok &= s.outcome(&o, &cwc)? == d.swapped();
            evidence.push(format!("CwC vs {}: {d}", o.0));
        }
        s.verdicts.push(Verdict {
            name: "CwC isolation".into(),
            claim: "CliqueBot defects against the other bots, and they defect against it \
                    (the grounded bot only through its non-grounded branch)"
                .into(),
            status: if ok { Status::Pass } else { Status::Fail },
            evidence,
            note: None,
        });
    }

    s.pairs(
        "DUPOC/DUPOC",
        "DUPOC against itself is an equilibrium with mutual cooperation",
        &[(Builtin::Dupoc, Builtin::Dupoc, cc.clone())],
        true,
        None,
    )?;
    s.pairs(
        "CIMCIC/CIMCIC",
        "CIMCIC against itself is an equilibrium with mutual cooperation",
        &[(Builtin::Cimcic, Builtin::Cimcic, cc.clone())],
        true,
        None,
    )?;

    let mut thetas = vec![zero.clone(), ratio(1, 4), ratio(1, 2), one.clone()];
    if theta <= &one && !thetas.contains(theta) {
        thetas.push(theta.clone());
    }
    let pb_pairs: Vec<_> = thetas
        .iter()
        .flat_map(|t1| {
            thetas
                .iter()
                .map(|t2| (Builtin::Pb(t1.clone()), Builtin::Pb(t2.clone()), cc.clone()))
        })
        .collect();
    s.pairs(
        "PB/PB",
        "PrudentBots with any thresholds in [0,1] form an equilibrium with mutual cooperation",
        &pb_pairs,
        false,
        Some(format!(
            "thresholds sampled: {}",
            thetas
                .iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        )),
    )?;

    let grounded_pairs: Vec<_> = [
        (epsilon.clone(), epsilon.clone()),
        (zero.clone(), epsilon.clone()),
        (epsilon.clone(), zero.clone()),
        (zero.clone(), zero.clone()),
    ]
    .into_iter()
    .map(|(e1, e2)| {
        let expected = if e1.is_zero() && e2.is_zero() {
            dd.clone()
        } else {
            cc.clone()
        };
        (Builtin::Egfb(e1), Builtin::Egfb(e2), expected)
    })
    .collect();
    let grounded_note = if epsilon > &ratio(2, 3) {
        Some("epsilon above 2/3: mutual cooperation still results, but DefectBot profits, so no equilibrium claim is checked".to_string())
    } else {
        Some("both epsilons zero never halt and score as mutual defection".to_string())
    };
    s.pairs(
        "eGFB/eGFB",
        "grounded FairBots cooperate with each other whenever at least one epsilon is positive",
        &grounded_pairs,
        false,
        grounded_note,
    )?;
    if epsilon > &zero && epsilon <= &ratio(2, 3) {
        s.pairs(
            "eGFB/eGFB equilibrium",
            "two grounded FairBots with epsilon in (0, 2/3] form an equilibrium",
            &[(gfb.clone(), gfb.clone(), cc.clone())],
            true,
            None,
        )?;
    }

    // PB against CIMCIC, with the provability side conditions.
    {
        let mut ok = true;
        let mut evidence = Vec::new();
        let cimcic = Suite::spec(&Builtin::Cimcic)?;
        let p = Suite::spec(&pb)?;
        let d = s.outcome(&p, &cimcic)?;
        ok &= d == cc;
        evidence.push(format!("{} vs CIMCIC: {d}", p.0));
        let db = Suite::spec(&Builtin::Db)?;
        let analysis = s.arena.analyze(&cimcic.1, &db.1)?;
        let table = analysis.table.expect("deterministic pair has a table");
        let not_coop = Formula::not(MatchVariable::new("CIMCIC", "DB").atom());
        let in_pa1 = provable(&table, &not_coop, BoxLevel::PaPlus1).map_err(MatchError::from)?;
        let in_pa = provable(&table, &not_coop, BoxLevel::Pa).map_err(MatchError::from)?;
        ok &= in_pa1 && !in_pa;
        evidence.push(format!(
            "CIMCIC defects against DB: provable in PA+1 = {in_pa1}, in PA = {in_pa}"
        ));
        s.verdicts.push(Verdict {
            name: "PB/CIMCIC".into(),
            claim: "PrudentBot and CIMCIC cooperate; CIMCIC's defection against DefectBot is provable only with Con(PA)".into(),
            status: if ok { Status::Pass } else { Status::Fail },
            evidence,
            note: None,
        });
    }

    s.pairs(
        "DUPOC/eGFB",
        "DUPOC and the grounded FairBot cooperate",
        &[
            (Builtin::Dupoc, gfb.clone(), cc.clone()),
            (gfb.clone(), Builtin::Dupoc, cc.clone()),
        ],
        false,
        None,
    )?;
    s.pairs(
        "CIMCIC/eGFB",
        "CIMCIC and the grounded FairBot cooperate",
        &[
            (Builtin::Cimcic, gfb.clone(), cc.clone()),
            (gfb.clone(), Builtin::Cimcic, cc.clone()),
        ],
        false,
        None,
    )?;

    let threshold = &one - epsilon;
    let (expected, regime) = if theta <= &threshold {
        (cc.clone(), "cooperation regime (theta <= 1 - epsilon)")
    } else {
        (
            OutcomeDistribution::new([
                ((Action::Defect, Action::Cooperate), epsilon.clone()),
                ((Action::Defect, Action::Defect), &one - epsilon),
            ])?,
            "defection regime (theta > 1 - epsilon): PB defects, eGFB cooperates with probability epsilon",
        )
    };
    let mut note = regime.to_string();
    if theta == &threshold {
        note.push_str(
            "; boundary theta = 1 - epsilon: P(eGFB defects vs DB) = 1 - epsilon >= theta is provable, so PB cooperates",
        );
    }
    s.pairs(
        "PB/eGFB",
        "PrudentBot against the grounded FairBot follows the threshold split",
        &[(pb.clone(), gfb.clone(), expected)],
        false,
        Some(note),
    )?;

    // The full block.
    let members = [Builtin::Dupoc, Builtin::Cimcic, pb.clone(), gfb.clone()];
    if theorem_hypothesis(theta, epsilon) {
        let block: Vec<_> = members
            .iter()
            .flat_map(|x| members.iter().map(|y| (x.clone(), y.clone(), cc.clone())))
            .collect();
        s.pairs(
            "Theorem block",
            "every ordered pair over DUPOC, CIMCIC, PB, eGFB is an equilibrium with mutual cooperation",
            &block,
            true,
            Some(EquilibriumReport::SCOPE_NOTE.to_string()),
        )?;
    } else {
        let mut note =
            String::from("precondition 0 < epsilon <= 2/3 and theta <= 1 - epsilon does not hold");
        if theta > &threshold {
            note.push_str("; PB vs eGFB is in the expected defection regime");
        }
        s.verdicts.push(Verdict {
            name: "Theorem block".into(),
            claim: "every ordered pair over DUPOC, CIMCIC, PB, eGFB is an equilibrium with mutual cooperation".into(),
            status: Status::NotApplicable,
            evidence: Vec::new(),
            note: Some(note),
        });
    }

    Ok(s.verdicts)
}
