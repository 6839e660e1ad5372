//! Random guarded systems and an independent brute-force evaluator.

#![allow(dead_code)]

use std::collections::HashMap;

use lobmatch::formula::{BoxLevel, Formula};
use lobmatch::provability::{
    actual_truth, evaluate, provable, KripkeTable, MatchSystem, MatchVariable,
};
use proptest::prelude::*;

pub fn var(i: usize) -> MatchVariable {
    MatchVariable::new(format!("a{i}"), format!("b{i}"))
}

fn boxed(level: bool, f: Formula) -> Formula {
    if level {
        Formula::pa1(f)
    } else {
        Formula::pa(f)
    }
}

fn combine(inner: BoxedStrategy<Formula>, with_boxes: bool) -> BoxedStrategy<Formula> {
    let mut options = vec![
        inner.clone().prop_map(Formula::not).boxed(),
        (inner.clone(), inner.clone())
            .prop_map(|(a, b)| Formula::and(a, b))
            .boxed(),
        (inner.clone(), inner.clone())
            .prop_map(|(a, b)| Formula::or(a, b))
            .boxed(),
        (inner.clone(), inner.clone())
            .prop_map(|(a, b)| Formula::implies(a, b))
            .boxed(),
    ];
    if with_boxes {
        options.push(
            (any::<bool>(), inner)
                .prop_map(|(l, a)| boxed(l, a))
                .boxed(),
        );
    }
    proptest::strategy::Union::new(options).boxed()
}

/// Any formula over variables `0..n`.
pub fn formula_over(n: usize) -> BoxedStrategy<Formula> {
    let leaf = prop_oneof![
        Just(Formula::Top),
        Just(Formula::Bottom),
        (0..n).prop_map(|j| var(j).atom()),
        (0..n).prop_map(|j| Formula::not(var(j).atom())),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| combine(inner.boxed(), true))
        .boxed()
}

/// Definition for variable `i`: unboxed atoms only name variables below `i`,
/// so every dependency cycle passes through a box.
fn definition(i: usize, n: usize) -> BoxedStrategy<Formula> {
    let mut leaves = vec![
        Just(Formula::Top).boxed(),
        Just(Formula::Bottom).boxed(),
        (any::<bool>(), formula_over(n))
            .prop_map(|(l, f)| boxed(l, f))
            .boxed(),
    ];
    if i > 0 {
        leaves.push((0..i).prop_map(|j| var(j).atom()).boxed());
    }
    proptest::strategy::Union::new(leaves)
        .prop_recursive(3, 12, 2, |inner| combine(inner.boxed(), false))
        .boxed()
}

/// A guarded system with 1..=6 variables plus probe formulas over them.
pub fn system_and_probes() -> impl Strategy<Value = (MatchSystem, Vec<Formula>)> {
    (1usize..=6)
        .prop_flat_map(|n| {
            let defs: Vec<_> = (0..n).map(|i| definition(i, n)).collect();
            (defs, proptest::collection::vec(formula_over(n), 3))
        })
        .prop_map(|(defs, probes)| {
            let mut sys = MatchSystem::new(("a0".into(), "b0".into()));
            for (i, d) in defs.into_iter().enumerate() {
                sys.define(var(i), d);
            }
            (sys, probes)
        })
}

/// Naive evaluation straight from the semantics, memoized per world.
pub struct Naive<'a> {
    sys: &'a MatchSystem,
    memo: HashMap<(usize, MatchVariable), bool>,
}

impl<'a> Naive<'a> {
    pub fn new(sys: &'a MatchSystem) -> Self {
        Naive {
            sys,
            memo: HashMap::new(),
        }
    }

    pub fn var(&mut self, v: &MatchVariable, w: usize) -> bool {
        if let Some(&b) = self.memo.get(&(w, v.clone())) {
            return b;
        }
        let def = self.sys.definition(v).expect("defined").clone();
        let b = self.eval(&def, w);
        self.memo.insert((w, v.clone()), b);
        b
    }

    pub fn eval(&mut self, f: &Formula, w: usize) -> bool {
        match f {
            Formula::Top => true,
            Formula::Bottom => false,
            Formula::Act { .. } => {
                let (v, a) = MatchVariable::from_atom(f).expect("variable atom");
                self.var(&v, w) == (a == lobmatch::Action::Cooperate)
            }
            Formula::Prob(_) => panic!("probability atoms are not generated"),
            Formula::Not(a) => !self.eval(a, w),
            Formula::And(a, b) => self.eval(a, w) & self.eval(b, w),
            Formula::Or(a, b) => self.eval(a, w) | self.eval(b, w),
            Formula::Implies(a, b) => !self.eval(a, w) | self.eval(b, w),
            Formula::Boxed(level, a) => {
                let start = if *level == BoxLevel::PaPlus1 { 1 } else { 0 };
                (start..w).all(|j| self.eval(a, j))
            }
        }
    }
}

fn iff(a: Formula, b: Formula) -> Formula {
    Formula::and(
        Formula::implies(a.clone(), b.clone()),
        Formula::implies(b, a),
    )
}

fn pa(t: &KripkeTable, f: &Formula) -> bool {
    provable(t, f, BoxLevel::Pa).expect("probe over tracked variables")
}

/// Checks every engine law on one system; returns the first violation.
pub fn check_laws(sys: &MatchSystem, probes: &[Formula]) -> Result<(), String> {
    let t = evaluate(sys).map_err(|e| format!("evaluation failed: {e}"))?;
    let stab = t.stabilization_world();
    if stab > t.boxed_count() + 2 {
        return Err(format!(
            "rank bound: stable at {stab} with {} boxes",
            t.boxed_count()
        ));
    }
    if !t.boxes_monotone() {
        return Err("a boxed column rises".into());
    }

    // the table agrees with brute force, and nothing moves after `stab`
    let mut naive = Naive::new(sys);
    let far = t.boxed_count() + 6;
    for v in &sys.variables {
        let col = t.holds_everywhere(&v.atom()).map_err(|e| e.to_string())?;
        for w in 0..=far {
            let expect = naive.var(v, w);
            let got = col.get(w).copied().unwrap_or(*col.last().unwrap());
            if expect != got {
                return Err(format!(
                    "{v} at world {w}: table {got}, brute force {expect}"
                ));
            }
        }
        if !pa(&t, &iff(v.atom(), sys.definition(v).unwrap().clone())) {
            return Err(format!("{v} does not satisfy its definition everywhere"));
        }
    }

    if pa(&t, &Formula::Bottom) {
        return Err("consistency: bottom provable".into());
    }
    if actual_truth(&t, &Formula::pa(Formula::Bottom)).unwrap() {
        return Err("soundness: provability of bottom true in the stable row".into());
    }
    for (i, p) in probes.iter().enumerate() {
        let pv = pa(&t, p);
        let loeb = Formula::implies(Formula::pa(p.clone()), p.clone());
        if pa(&t, &loeb) && !pv {
            return Err(format!("Loeb fails for {p}"));
        }
        if pv && !pa(&t, &Formula::pa(p.clone())) {
            return Err(format!("necessitation fails for {p}"));
        }
        if pv && !provable(&t, p, BoxLevel::PaPlus1).unwrap() {
            return Err(format!("PA proves {p} but PA+1 does not"));
        }
        if pv && !actual_truth(&t, p).unwrap() {
            return Err(format!("PA proves {p} but it is false in the stable row"));
        }
        // naive check of the extended column too
        let col = t.holds_everywhere(p).unwrap();
        for (w, &b) in col.iter().enumerate() {
            if naive.eval(p, w) != b {
                return Err(format!("probe {p} at world {w} disagrees with brute force"));
            }
        }
        let q = &probes[(i + 1) % probes.len()];
        let dist = Formula::implies(
            Formula::pa(Formula::implies(p.clone(), q.clone())),
            Formula::implies(Formula::pa(p.clone()), Formula::pa(q.clone())),
        );
        if !pa(&t, &dist) {
            return Err(format!("distribution fails for {p}, {q}"));
        }
    }
    Ok(())
}
