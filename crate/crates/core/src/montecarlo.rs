//! Seeded simulation of matches under the random-bitstring model.
//!
//! Randomness comes from splitmix64. Stream `id` under seed `s` starts from
//! state `mix64(s ^ id * GAMMA)` (wrapping multiply), and each 64-bit output
//! is consumed most significant bit first. A Bernoulli(a/b) draw reads
//! `m = ceil(log2 b)` bits as an integer `u`: `u < a` succeeds, `u < b` fails,
//! anything else is redrawn. Trial `t` uses stream `t`, so tallies do not
//! depend on how trials are split across threads.

use num_bigint::BigUint;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::formula::{Action, AgentSpec, Rational};
use crate::matchup::{Arena, MatchError, OutcomeDistribution};

pub const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid probability {0}: need 0 <= a/b <= 1")]
    InvalidRational(String),
    #[error("invalid trial configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Match(#[from] MatchError),
}

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(state: u64) -> Self {
        SplitMix64 { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix64(self.state)
    }
}

/// Bits of one stream, most significant first within each word.
#[derive(Clone, Debug)]
pub struct BitStream {
    rng: SplitMix64,
    word: u64,
    left: u32,
}

pub fn bit_stream(seed: u64, stream_id: u64) -> BitStream {
    BitStream {
        rng: SplitMix64::new(mix64(seed ^ stream_id.wrapping_mul(GAMMA))),
        word: 0,
        left: 0,
    }
}

impl BitStream {
    pub fn next_bit(&mut self) -> bool {
        if self.left == 0 {
            self.word = self.rng.next_u64();
            self.left = 64;
        }
        let bit = self.word >> 63 == 1;
        self.word <<= 1;
        self.left -= 1;
        bit
    }

    /// Reads `m <= 64` bits as a big-endian integer.
    pub fn take_u64(&mut self, m: u32) -> u64 {
        debug_assert!(m <= 64);
        (0..m).fold(0u64, |u, _| (u << 1) | self.next_bit() as u64)
    }

    fn take_big(&mut self, m: u64) -> BigUint {
        let mut u = BigUint::zero();
        for _ in 0..m {
            u <<= 1u32;
            if self.next_bit() {
                u += 1u32;
            }
        }
        u
    }
}

impl Iterator for BitStream {
    type Item = bool;

    fn next(&mut self) -> Option<bool> {
        Some(self.next_bit())
    }
}

/// Rejection sampler for an exact rational probability.
#[derive(Clone, Debug)]
pub enum Bernoulli {
    Small { a: u64, b: u64, m: u32 },
    Big { a: BigUint, b: BigUint, m: u64 },
}

impl Bernoulli {
    pub fn new(p: &Rational) -> Result<Self, SimError> {
        if p.is_negative() || p > &Rational::one() {
            return Err(SimError::InvalidRational(p.to_string()));
        }
        let a = p.numer().to_biguint().expect("non-negative");
        let b = p.denom().to_biguint().expect("positive");
        let m = (&b - 1u32).bits();
        Ok(match (a.to_u64(), b.to_u64()) {
            (Some(a), Some(b)) => Bernoulli::Small { a, b, m: m as u32 },
            _ => Bernoulli::Big { a, b, m },
        })
    }

    /// Bits read per attempt.
    pub fn bits(&self) -> u64 {
        match self {
            Bernoulli::Small { m, .. } => *m as u64,
            Bernoulli::Big { m, .. } => *m,
        }
    }

    pub fn sample(&self, bits: &mut BitStream) -> bool {
        match self {
            Bernoulli::Small { a, b, m } => loop {
                let u = bits.take_u64(*m);
                if u < *a {
                    return true;
                }
                if u < *b {
                    return false;
                }
            },
            Bernoulli::Big { a, b, m } => loop {
                let u = bits.take_big(*m);
                if &u < a {
                    return true;
                }
                if &u < b {
                    return false;
                }
            },
        }
    }
}

pub fn sample_bernoulli(bits: &mut BitStream, p: &Rational) -> Result<bool, SimError> {
    Ok(Bernoulli::new(p)?.sample(bits))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TrialConfig {
    pub trials: u64,
    pub seed: u64,
    pub depth_limit: u32,
}

impl TrialConfig {
    pub fn new(trials: u64, seed: u64, depth_limit: u32) -> Result<Self, SimError> {
        let cfg = TrialConfig {
            trials,
            seed,
            depth_limit,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.trials == 0 {
            return Err(SimError::Config("trials must be at least 1"));
        }
        if self.depth_limit == 0 {
            return Err(SimError::Config("depth limit must be at least 1"));
        }
        Ok(())
    }
}

/// Tally of joint actions. Truncated trials are counted under their
/// defaulted actions and also in `truncated`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EmpiricalResult {
    /// Order: CC, CD, DC, DD.
    pub counts: [u64; 4],
    pub truncated: u64,
}

fn slot(a1: Action, a2: Action) -> usize {
    (a1 == Action::Defect) as usize * 2 + (a2 == Action::Defect) as usize
}

impl EmpiricalResult {
    pub fn count(&self, a1: Action, a2: Action) -> u64 {
        self.counts[slot(a1, a2)]
    }

    pub fn trials(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn frequency(&self, a1: Action, a2: Action) -> f64 {
        self.count(a1, a2) as f64 / self.trials() as f64
    }

    fn merge(mut self, other: EmpiricalResult) -> Self {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self.truncated += other.truncated;
        self
    }
}

enum Player {
    Fixed(Action),
    Grounded(Bernoulli),
}

struct Trial<'a> {
    players: [&'a Player; 2],
    bits: BitStream,
    truncated: bool,
}

impl Trial<'_> {
    /// Action of player `me` against the other player, `depth` nested calls allowed.
    fn play(&mut self, me: usize, depth: u32) -> Action {
        match self.players[me] {
            Player::Fixed(a) => *a,
            Player::Grounded(coin) => {
                if depth == 0 {
                    self.truncated = true;
                    return Action::Defect;
                }
                if coin.sample(&mut self.bits) {
                    Action::Cooperate
                } else {
                    self.play(1 - me, depth - 1)
                }
            }
        }
    }
}

/// Runs `cfg.trials` independent matches of `p1` (row) against `p2`.
///
/// Non-grounded agents play their exact action for the pair; grounded ones
/// flip their coin and otherwise copy the opponent's play against them.
pub fn simulate(
    arena: &Arena<'_>,
    p1: &AgentSpec,
    p2: &AgentSpec,
    cfg: &TrialConfig,
) -> Result<EmpiricalResult, SimError> {
    cfg.validate()?;
    let exact = arena.outcome_distribution(p1, p2)?;
    let player = |spec: &AgentSpec, first: bool| -> Result<Player, SimError> {
        Ok(match spec {
            AgentSpec::Grounded(eps) => Player::Grounded(Bernoulli::new(eps)?),
            _ => {
                let coop = exact.marginal(first, Action::Cooperate);
                debug_assert!(coop.is_zero() || coop.is_one());
                Player::Fixed(Action::from_cooperates(coop.is_one()))
            }
        })
    };
    let players = [player(p1, true)?, player(p2, false)?];
    let depth = cfg.depth_limit;
    let seed = cfg.seed;

    Ok((0..cfg.trials)
        .into_par_iter()
        .fold(EmpiricalResult::default, |mut acc, t| {
            let mut trial = Trial {
                players: [&players[0], &players[1]],
                bits: bit_stream(seed, t),
                truncated: false,
            };
            let a1 = trial.play(0, depth);
            let a2 = trial.play(1, depth);
            acc.counts[slot(a1, a2)] += 1;
            acc.truncated += trial.truncated as u64;
            acc
        })
        .reduce(EmpiricalResult::default, EmpiricalResult::merge))
}

/// Comparison of one profile's empirical frequency with its exact probability.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Agreement {
    pub profile: (Action, Action),
    pub exact: f64,
    pub empirical: f64,
    pub sigma: f64,
    pub within: bool,
}

/// Binomial check of every profile at `k` standard deviations. Profiles with
/// exact probability 0 or 1 must match exactly.
pub fn agreement(result: &EmpiricalResult, exact: &OutcomeDistribution, k: f64) -> Vec<Agreement> {
    let n = result.trials() as f64;
    exact
        .iter()
        .map(|(profile, p)| {
            let p = p.to_f64().unwrap_or(f64::NAN);
            let empirical = result.count(profile.0, profile.1) as f64 / n;
            let sigma = (p * (1.0 - p) / n).sqrt();
            let within = if sigma == 0.0 {
                empirical == p
            } else {
                (empirical - p).abs() <= k * sigma
            };
            Agreement {
                profile,
                exact: p,
                empirical,
                sigma,
                within,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{builtin, default_roster, Builtin};
    use crate::formula::ratio;

    #[test]
    fn mix_reference_values() {
        // first outputs of splitmix64 seeded with 0
        let mut g = SplitMix64::new(0);
        assert_eq!(g.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(g.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(g.next_u64(), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn bits_are_msb_first() {
        let mut s = bit_stream(7, 3);
        let mut g = SplitMix64::new(mix64(7 ^ 3u64.wrapping_mul(GAMMA)));
        let w = g.next_u64();
        for i in 0..64 {
            assert_eq!(s.next_bit(), (w >> (63 - i)) & 1 == 1);
        }
        let w2 = g.next_u64();
        assert_eq!(s.take_u64(8), w2 >> 56);
    }

    #[test]
    fn bit_widths() {
        let m = |a, b| Bernoulli::new(&ratio(a, b)).unwrap().bits();
        assert_eq!(m(1, 1), 0);
        assert_eq!(m(1, 2), 1);
        assert_eq!(m(1, 3), 2);
        assert_eq!(m(1, 4), 2);
        assert_eq!(m(1, 5), 3);
        assert_eq!(m(3, 1024), 10);
    }

    #[test]
    fn half_is_first_bit_zero() {
        for id in 0..64 {
            let mut a = bit_stream(1, id);
            let mut b = bit_stream(1, id);
            assert_eq!(
                sample_bernoulli(&mut a, &ratio(1, 2)).unwrap(),
                !b.next_bit()
            );
        }
    }

    #[test]
    fn certain_and_impossible() {
        let mut s = bit_stream(0, 0);
        for _ in 0..100 {
            assert!(sample_bernoulli(&mut s, &ratio(1, 1)).unwrap());
            assert!(!sample_bernoulli(&mut s, &ratio(0, 1)).unwrap());
        }
    }

    #[test]
    fn rejects_bad_probabilities() {
        let mut s = bit_stream(0, 0);
        assert!(sample_bernoulli(&mut s, &ratio(3, 2)).is_err());
        assert!(sample_bernoulli(&mut s, &ratio(-1, 2)).is_err());
    }

    #[test]
    fn huge_denominator_path() {
        let b = Rational::new(1.into(), num_bigint::BigInt::from(1u8) << 80u32);
        let coin = Bernoulli::new(&b).unwrap();
        assert!(matches!(coin, Bernoulli::Big { m: 80, .. }));
        let mut s = bit_stream(5, 5);
        assert!(!coin.sample(&mut s));
    }

    #[test]
    fn config_validation() {
        assert!(TrialConfig::new(0, 1, 1).is_err());
        assert!(TrialConfig::new(1, 1, 0).is_err());
        assert!(TrialConfig::new(1, 1, 1).is_ok());
    }

    #[test]
    fn deterministic_pair_has_no_variance() {
        let roster = default_roster();
        let arena = Arena::new(&roster);
        let d = builtin(&Builtin::Dupoc).unwrap();
        let cfg = TrialConfig::new(500, 9, 64).unwrap();
        let r = simulate(&arena, &d, &d, &cfg).unwrap();
        assert_eq!(r.count(Action::Cooperate, Action::Cooperate), 500);
        assert_eq!(r.truncated, 0);
    }

    #[test]
    fn shallow_depth_truncates() {
        let roster = default_roster();
        let arena = Arena::new(&roster);
        let g = AgentSpec::Grounded(ratio(1, 4));
        let cfg = TrialConfig::new(4000, 1, 1).unwrap();
        let r = simulate(&arena, &g, &g, &cfg).unwrap();
        assert!(r.truncated > 0);
        assert_eq!(r.trials(), 4000);
    }
}
