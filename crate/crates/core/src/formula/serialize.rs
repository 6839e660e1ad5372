//! Canonical byte encoding of agent specs.
//!
//! Prefix-free: every node starts with a one-byte tag, strings and integers
//! are length-prefixed, so distinct trees never share an encoding. Rationals
//! are already in lowest terms, so `2/8` and `1/4` encode identically.

use num_bigint::BigInt;

use super::{Action, AgentRef, AgentSpec, BoxLevel, Formula, Rational, Relation};

pub fn canonical_serialize(spec: &AgentSpec) -> Vec<u8> {
    let mut out = Vec::with_capacity(32);
    match spec {
        AgentSpec::Constant(a) => {
            out.push(b'K');
            action(&mut out, *a);
        }
        AgentSpec::CliqueBot => out.push(b'Q'),
        AgentSpec::Modal(f) => {
            out.push(b'M');
            formula(&mut out, f);
        }
        AgentSpec::Grounded(eps) => {
            out.push(b'G');
            rational(&mut out, eps);
        }
    }
    out
}

fn action(out: &mut Vec<u8>, a: Action) {
    out.push(a.symbol() as u8);
}

fn bytes(out: &mut Vec<u8>, b: &[u8]) {
    out.extend_from_slice(&(b.len() as u32).to_be_bytes());
    out.extend_from_slice(b);
}

fn integer(out: &mut Vec<u8>, n: &BigInt) {
    let (sign, mag) = n.to_bytes_be();
    out.push(match sign {
        num_bigint::Sign::Minus => b'-',
        _ => b'+',
    });
    bytes(out, &mag);
}

fn rational(out: &mut Vec<u8>, q: &Rational) {
    integer(out, q.numer());
    integer(out, q.denom());
}

fn agent_ref(out: &mut Vec<u8>, r: &AgentRef) {
    match r {
        AgentRef::This => out.push(b's'),
        AgentRef::Opponent => out.push(b'o'),
        AgentRef::Named(n) => {
            out.push(b'n');
            bytes(out, n.as_bytes());
        }
    }
}

fn formula(out: &mut Vec<u8>, f: &Formula) {
    match f {
        Formula::Top => out.push(b'T'),
        Formula::Bottom => out.push(b'F'),
        Formula::Act {
            subject,
            adversary,
            action: a,
        } => {
            out.push(b'A');
            agent_ref(out, subject);
            agent_ref(out, adversary);
            action(out, *a);
        }
        Formula::Prob(p) => {
            out.push(b'P');
            agent_ref(out, &p.subject);
            agent_ref(out, &p.adversary);
            action(out, p.action);
            out.push(match p.relation {
                Relation::AtLeast => b'g',
                Relation::Greater => b'G',
            });
            rational(out, &p.threshold);
        }
        Formula::Not(a) => {
            out.push(b'N');
            formula(out, a);
        }
        Formula::And(a, b) => {
            out.push(b'&');
            formula(out, a);
            formula(out, b);
        }
        Formula::Or(a, b) => {
            out.push(b'|');
            formula(out, a);
            formula(out, b);
        }
        Formula::Implies(a, b) => {
            out.push(b'>');
            formula(out, a);
            formula(out, b);
        }
        Formula::Boxed(level, a) => {
            out.push(b'B');
            out.push(match level {
                BoxLevel::Pa => b'0',
                BoxLevel::PaPlus1 => b'1',
            });
            formula(out, a);
        }
    }
}
