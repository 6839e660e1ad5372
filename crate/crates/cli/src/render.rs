use serde_json::{json, Map, Value};

use lobmatch::formula::fraction_string;
use lobmatch::{OutcomeDistribution, Rational};

pub fn q(x: &Rational) -> String {
    fraction_string(x)
}

/// `{"CC": "a/b", "CD": ..., "DC": ..., "DD": ...}`
pub fn dist_json(d: &OutcomeDistribution) -> Value {
    let mut m = Map::new();
    for (profile, p) in d.iter() {
        m.insert(OutcomeDistribution::key(profile), json!(q(p)));
    }
    Value::Object(m)
}

/// One line per profile with non-zero probability.
pub fn dist_lines(d: &OutcomeDistribution) -> String {
    d.iter()
        .filter(|(_, p)| p != &&Rational::default())
        .map(|((a1, a2), p)| format!("  ({a1},{a2})  {p}\n"))
        .collect()
}
