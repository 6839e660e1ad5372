//! Fixed-point evaluation of self-referential match sentences.
//!
//! A [`MatchSystem`] defines, for every ordered pair of agents reachable in
//! a match, a formula that holds iff the first agent cooperates against the
//! second. Boxes are read on the descending chain of worlds `0, 1, 2, ...`:
//!
//! * `[]ψ` holds at world `k` iff `ψ` holds at every world `j < k`;
//! * `[1]ψ` holds at world `k` iff `ψ` holds at every world `1 <= j < k`.
//!
//! World 0 is the only world where `[]⊥` holds, so skipping it adds exactly
//! the consistency of PA; `[1]ψ` behaves like `[](~[]bot -> ψ)`.
//!
//! Because every dependency cycle passes through a box, the row at world `k`
//! is a function of rows `< k`. Boxed columns only ever switch from true to
//! false, so rows repeat after at most `#boxes + 1` worlds and stay fixed from
//! then on. A formula is provable iff it holds at every world, and the
//! repeated row gives its truth in the standard model.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::formula::{Action, AgentRef, AgentSpec, BoxLevel, Formula};

/// "subject cooperates against adversary"
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MatchVariable {
    pub subject: String,
    pub adversary: String,
}

impl MatchVariable {
    pub fn new(subject: impl Into<String>, adversary: impl Into<String>) -> Self {
        MatchVariable {
            subject: subject.into(),
            adversary: adversary.into(),
        }
    }

    pub fn reversed(&self) -> Self {
        MatchVariable::new(self.adversary.clone(), self.subject.clone())
    }

    /// The atom `subject@adversary = C`.
    pub fn atom(&self) -> Formula {
        self.action_atom(Action::Cooperate)
    }

    pub fn action_atom(&self, action: Action) -> Formula {
        Formula::act(
            AgentRef::Named(self.subject.clone()),
            AgentRef::Named(self.adversary.clone()),
            action,
        )
    }

    /// Inverse of [`MatchVariable::action_atom`].
    pub fn from_atom(f: &Formula) -> Option<(MatchVariable, Action)> {
        match f {
            Formula::Act {
                subject: AgentRef::Named(s),
                adversary: AgentRef::Named(a),
                action,
            } => Some((MatchVariable::new(s.clone(), a.clone()), *action)),
            _ => None,
        }
    }
}

impl fmt::Display for MatchVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "X({},{})", self.subject, self.adversary)
    }
}

/// A closed set of cooperation variables with their defining formulas.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MatchSystem {
    pub variables: Vec<MatchVariable>,
    pub definitions: BTreeMap<MatchVariable, Formula>,
    /// The submitted pair, player 1 first.
    pub root: (String, String),
    /// Specs behind the identifiers used in variables.
    pub agents: BTreeMap<String, AgentSpec>,
}

impl MatchSystem {
    pub fn new(root: (String, String)) -> Self {
        MatchSystem {
            root,
            ..Default::default()
        }
    }

    pub fn define(&mut self, var: MatchVariable, definition: Formula) {
        if !self.definitions.contains_key(&var) {
            self.variables.push(var.clone());
        }
        self.definitions.insert(var, definition);
    }

    pub fn definition(&self, var: &MatchVariable) -> Option<&Formula> {
        self.definitions.get(var)
    }

    /// The root variables `(p1 vs p2, p2 vs p1)`.
    pub fn root_variables(&self) -> (MatchVariable, MatchVariable) {
        let (a, b) = &self.root;
        (MatchVariable::new(a, b), MatchVariable::new(b, a))
    }
}

impl fmt::Display for MatchSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.variables {
            writeln!(f, "{v} <-> {}", self.definitions[v])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("unguarded dependency cycle: {}", display_cycle(.0))]
    Unguarded(Vec<MatchVariable>),
    #[error("variable {0} is used but never defined")]
    Undefined(MatchVariable),
    #[error("unresolved probability atom `{atom}` in the definition of {var}")]
    UnresolvedProb { var: MatchVariable, atom: String },
    #[error("atom `{0}` does not name a pair of concrete agents")]
    NotAVariable(String),
    #[error("formula `{0}` is not built from tracked variables")]
    Untracked(String),
    #[error("no stable world within the rank bound {0}")]
    RankBound(usize),
}

fn display_cycle(c: &[MatchVariable]) -> String {
    c.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" -> ")
}

/// Variables occurring in `f` outside of any box.
fn unguarded_vars(f: &Formula, out: &mut BTreeSet<MatchVariable>) {
    match f {
        Formula::Boxed(..) => {}
        Formula::Act { .. } => {
            if let Some((v, _)) = MatchVariable::from_atom(f) {
                out.insert(v);
            }
        }
        other => {
            for c in other.children() {
                unguarded_vars(c, out);
            }
        }
    }
}

/// Finds a shortest dependency cycle that never passes under a box.
pub fn check_guardedness(system: &MatchSystem) -> Result<(), Vec<MatchVariable>> {
    let edges: BTreeMap<&MatchVariable, BTreeSet<MatchVariable>> = system
        .definitions
        .iter()
        .map(|(v, f)| {
            let mut out = BTreeSet::new();
            unguarded_vars(f, &mut out);
            (v, out)
        })
        .collect();

    let mut best: Option<Vec<MatchVariable>> = None;
    for &start in edges.keys() {
        // BFS from start's successors back to start.
        let mut parent: HashMap<&MatchVariable, &MatchVariable> = HashMap::new();
        let mut queue = VecDeque::new();
        let mut found = None;
        for next in &edges[start] {
            if next == start {
                found = Some(start);
                break;
            }
            if !parent.contains_key(next) {
                parent.insert(next, start);
                queue.push_back(next);
            }
        }
        while found.is_none() {
            let Some(cur) = queue.pop_front() else { break };
            for next in edges.get(cur).into_iter().flatten() {
                if next == start {
                    found = Some(cur);
                    break;
                }
                if !parent.contains_key(next) {
                    parent.insert(next, cur);
                    queue.push_back(next);
                }
            }
        }
        let Some(last) = found else { continue };
        let mut cycle = vec![last.clone()];
        let mut cur = last;
        while cur != start {
            cur = parent[cur];
            cycle.push(cur.clone());
        }
        cycle.reverse();
        if best.as_ref().is_none_or(|b| cycle.len() < b.len()) {
            best = Some(cycle);
        }
    }
    match best {
        Some(c) => Err(c),
        None => Ok(()),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Node {
    Top,
    Bottom,
    Var(usize, Action),
    Not(usize),
    And(usize, usize),
    Or(usize, usize),
    Implies(usize, usize),
    Boxed(BoxLevel, usize),
}

/// Truth values of every tracked subformula at worlds `0..=stabilization_world`.
#[derive(Clone, Debug)]
pub struct KripkeTable {
    formulas: Vec<Formula>,
    nodes: Vec<Node>,
    index: HashMap<Formula, usize>,
    variables: Vec<MatchVariable>,
    var_index: HashMap<MatchVariable, usize>,
    var_atom: Vec<usize>,
    rows: Vec<Vec<bool>>,
    stabilization_world: usize,
}

struct Interner {
    formulas: Vec<Formula>,
    nodes: Vec<Node>,
    index: HashMap<Formula, usize>,
    var_index: HashMap<MatchVariable, usize>,
}

impl Interner {
    fn intern(&mut self, owner: &MatchVariable, f: &Formula) -> Result<usize, EngineError> {
        if let Some(&i) = self.index.get(f) {
            return Ok(i);
        }
        let node = match f {
            Formula::Top => Node::Top,
            Formula::Bottom => Node::Bottom,
            Formula::Act { .. } => {
                let (v, a) = MatchVariable::from_atom(f)
                    .ok_or_else(|| EngineError::NotAVariable(f.to_string()))?;
                let vi = *self
                    .var_index
                    .get(&v)
                    .ok_or_else(|| EngineError::Undefined(v.clone()))?;
                Node::Var(vi, a)
            }
            Formula::Prob(_) => {
                return Err(EngineError::UnresolvedProb {
                    var: owner.clone(),
                    atom: f.to_string(),
                })
            }
            Formula::Not(a) => Node::Not(self.intern(owner, a)?),
            Formula::And(a, b) => Node::And(self.intern(owner, a)?, self.intern(owner, b)?),
            Formula::Or(a, b) => Node::Or(self.intern(owner, a)?, self.intern(owner, b)?),
            Formula::Implies(a, b) => Node::Implies(self.intern(owner, a)?, self.intern(owner, b)?),
            Formula::Boxed(l, a) => Node::Boxed(*l, self.intern(owner, a)?),
        };
        let i = self.nodes.len();
        self.nodes.push(node);
        self.formulas.push(f.clone());
        self.index.insert(f.clone(), i);
        Ok(i)
    }
}

struct WorldEval<'a> {
    nodes: &'a [Node],
    var_def: &'a [usize],
    box_acc: &'a [bool],
    values: Vec<Option<bool>>,
    var_values: Vec<Option<bool>>,
}

impl WorldEval<'_> {
    fn node(&mut self, n: usize) -> bool {
        if let Some(v) = self.values[n] {
            return v;
        }
        let v = match self.nodes[n] {
            Node::Top => true,
            Node::Bottom => false,
            Node::Var(vi, a) => {
                let coop = self.var(vi);
                (a == Action::Cooperate) == coop
            }
            Node::Not(a) => !self.node(a),
            Node::And(a, b) => self.node(a) & self.node(b),
            Node::Or(a, b) => self.node(a) | self.node(b),
            Node::Implies(a, b) => !self.node(a) | self.node(b),
            Node::Boxed(..) => self.box_acc[n],
        };
        self.values[n] = Some(v);
        v
    }

    fn var(&mut self, vi: usize) -> bool {
        if let Some(v) = self.var_values[vi] {
            return v;
        }
        // guardedness was checked, so this recursion is well-founded
        let v = self.node(self.var_def[vi]);
        self.var_values[vi] = Some(v);
        v
    }
}

/// Evaluates the system world by world until a row repeats.
pub fn evaluate(system: &MatchSystem) -> Result<KripkeTable, EngineError> {
    for f in system.definitions.values() {
        let mut used = BTreeSet::new();
        f.visit(&mut |g| {
            if let Some((v, _)) = MatchVariable::from_atom(g) {
                used.insert(v);
            }
        });
        if let Some(v) = used
            .into_iter()
            .find(|v| !system.definitions.contains_key(v))
        {
            return Err(EngineError::Undefined(v));
        }
    }
    check_guardedness(system).map_err(EngineError::Unguarded)?;

    let mut variables = system.variables.clone();
    for v in system.definitions.keys() {
        if !variables.contains(v) {
            variables.push(v.clone());
        }
    }
    let var_index: HashMap<MatchVariable, usize> = variables
        .iter()
        .enumerate()
        .map(|(i, v)| (v.clone(), i))
        .collect();

    let mut interner = Interner {
        formulas: Vec::new(),
        nodes: Vec::new(),
        index: HashMap::new(),
        var_index,
    };
    let mut var_def = Vec::with_capacity(variables.len());
    let mut var_atom = Vec::with_capacity(variables.len());
    for v in &variables {
        var_def.push(interner.intern(v, &system.definitions[v])?);
        var_atom.push(interner.intern(v, &v.atom())?);
    }
    let Interner {
        formulas,
        nodes,
        index,
        var_index,
        ..
    } = interner;

    let boxes: Vec<(usize, BoxLevel, usize)> = nodes
        .iter()
        .enumerate()
        .filter_map(|(i, n)| match n {
            Node::Boxed(l, b) => Some((i, *l, *b)),
            _ => None,
        })
        .collect();
    let ceiling = boxes.len() + 2;
    // `[1]` boxes ignore world 0, so worlds 0 and 1 agree on them trivially
    // and a repeat there says nothing about world 2.
    let first_repeat = if boxes.iter().any(|b| b.1 == BoxLevel::PaPlus1) {
        2
    } else {
        1
    };

    let mut box_acc = vec![true; nodes.len()];
    let mut rows: Vec<Vec<bool>> = Vec::new();
    let mut stabilization_world = None;
    for world in 0..=ceiling {
        let mut ev = WorldEval {
            nodes: &nodes,
            var_def: &var_def,
            box_acc: &box_acc,
            values: vec![None; nodes.len()],
            var_values: vec![None; variables.len()],
        };
        let row: Vec<bool> = (0..nodes.len()).map(|n| ev.node(n)).collect();
        if let Some(prev) = rows.last() {
            for &(i, _, _) in &boxes {
                debug_assert!(prev[i] || !row[i], "boxed column rose at world {world}");
            }
        }
        for &(i, level, body) in &boxes {
            if level == BoxLevel::Pa || world >= 1 {
                box_acc[i] &= row[body];
            }
        }
        let repeated = world >= first_repeat && rows.last() == Some(&row);
        rows.push(row);
        if repeated {
            stabilization_world = Some(world);
            break;
        }
    }
    let stabilization_world = stabilization_world.ok_or(EngineError::RankBound(ceiling))?;

    Ok(KripkeTable {
        formulas,
        nodes,
        index,
        variables,
        var_index,
        var_atom,
        rows,
        stabilization_world,
    })
}

impl KripkeTable {
    pub fn stabilization_world(&self) -> usize {
        self.stabilization_world
    }

    /// Tracked subformulas in evaluation order (children before parents).
    pub fn tracked(&self) -> &[Formula] {
        &self.formulas
    }

    pub fn variables(&self) -> &[MatchVariable] {
        &self.variables
    }

    /// Number of distinct boxed subformulas; the stabilization world never exceeds this plus 2.
    pub fn boxed_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Boxed(..)))
            .count()
    }

    /// Value of a tracked subformula at a world in `0..=stabilization_world`.
    pub fn value(&self, world: usize, f: &Formula) -> Option<bool> {
        let i = *self.index.get(f)?;
        self.rows.get(world).map(|r| r[i])
    }

    /// Column of a tracked subformula over `0..=stabilization_world`.
    pub fn column(&self, f: &Formula) -> Option<Vec<bool>> {
        let i = *self.index.get(f)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Whether every boxed column is non-increasing.
    pub fn boxes_monotone(&self) -> bool {
        self.nodes.iter().enumerate().all(|(i, n)| {
            !matches!(n, Node::Boxed(..)) || self.rows.windows(2).all(|w| w[0][i] || !w[1][i])
        })
    }

    /// Truth of `f` at worlds `0..=horizon`; tracked columns are extended by
    /// their stable value.
    fn column_to(&self, f: &Formula, horizon: usize) -> Result<Vec<bool>, EngineError> {
        if let Some(&i) = self.index.get(f) {
            let stable = self.rows[self.stabilization_world][i];
            return Ok((0..=horizon)
                .map(|w| self.rows.get(w).map_or(stable, |r| r[i]))
                .collect());
        }
        let n = horizon + 1;
        Ok(match f {
            Formula::Top => vec![true; n],
            Formula::Bottom => vec![false; n],
            Formula::Act { .. } => {
                let (v, a) = MatchVariable::from_atom(f)
                    .filter(|(v, _)| self.var_index.contains_key(v))
                    .ok_or_else(|| EngineError::Untracked(f.to_string()))?;
                let col = self.column_to(&v.atom(), horizon)?;
                if a == Action::Cooperate {
                    col
                } else {
                    col.into_iter().map(|b| !b).collect()
                }
            }
            Formula::Prob(_) => return Err(EngineError::Untracked(f.to_string())),
            Formula::Not(a) => self
                .column_to(a, horizon)?
                .into_iter()
                .map(|b| !b)
                .collect(),
            Formula::And(a, b) => zip_with(
                self.column_to(a, horizon)?,
                self.column_to(b, horizon)?,
                |x, y| x & y,
            ),
            Formula::Or(a, b) => zip_with(
                self.column_to(a, horizon)?,
                self.column_to(b, horizon)?,
                |x, y| x | y,
            ),
            Formula::Implies(a, b) => zip_with(
                self.column_to(a, horizon)?,
                self.column_to(b, horizon)?,
                |x, y| !x | y,
            ),
            Formula::Boxed(level, a) => {
                let body = self.column_to(a, horizon)?;
                let start = match level {
                    BoxLevel::Pa => 0,
                    BoxLevel::PaPlus1 => 1,
                };
                let mut acc = true;
                let mut out = Vec::with_capacity(n);
                for (w, b) in body.into_iter().enumerate() {
                    out.push(acc);
                    if w >= start {
                        acc &= b;
                    }
                }
                out
            }
        })
    }

    fn horizon(&self, f: &Formula) -> usize {
        if self.index.contains_key(f) {
            self.stabilization_world
        } else {
            self.stabilization_world + f.modal_depth() + 1
        }
    }

    /// Truth of `f` at every world `0..` of the table. Untracked formulas are
    /// accepted as long as their atoms are tracked variables.
    pub fn holds_everywhere(&self, f: &Formula) -> Result<Vec<bool>, EngineError> {
        self.column_to(f, self.horizon(f))
    }
}

fn zip_with(a: Vec<bool>, b: Vec<bool>, op: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.into_iter().zip(b).map(|(x, y)| op(x, y)).collect()
}

/// PA proves `f` iff it holds at every world; PA+1 proves it iff it holds
/// at every world from 1 on.
pub fn provable(table: &KripkeTable, f: &Formula, level: BoxLevel) -> Result<bool, EngineError> {
    let col = table.holds_everywhere(f)?;
    let start = match level {
        BoxLevel::Pa => 0,
        BoxLevel::PaPlus1 => 1,
    };
    Ok(col.into_iter().skip(start).all(|b| b))
}

/// The variable's value in the stable row: what the agent actually does,
/// reading provability as sound.
pub fn actual_value(table: &KripkeTable, v: &MatchVariable) -> Result<bool, EngineError> {
    let vi = *table
        .var_index
        .get(v)
        .ok_or_else(|| EngineError::Untracked(v.to_string()))?;
    Ok(table.rows[table.stabilization_world][table.var_atom[vi]])
}

/// Truth of an arbitrary formula over tracked variables in the stable row.
pub fn actual_truth(table: &KripkeTable, f: &Formula) -> Result<bool, EngineError> {
    let col = table.holds_everywhere(f)?;
    Ok(*col.last().expect("non-empty column"))
}

impl fmt::Display for KripkeTable {
    /// One line per tracked subformula, one T/F character per world.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let worlds: String = (0..self.rows.len())
            .map(|w| char::from_digit((w % 10) as u32, 10).unwrap())
            .collect();
        writeln!(
            f,
            "{worlds}  (world; stable at {})",
            self.stabilization_world
        )?;
        for (i, formula) in self.formulas.iter().enumerate() {
            let mut line = String::new();
            for r in &self.rows {
                line.push(if r[i] { 'T' } else { 'F' });
            }
            let _ = write!(line, "  {formula}");
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}
