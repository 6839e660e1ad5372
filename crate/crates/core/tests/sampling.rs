use lobmatch::agents::{builtin, default_roster, Builtin};
use lobmatch::formula::ratio;
use lobmatch::montecarlo::{bit_stream, sample_bernoulli, simulate, Bernoulli, TrialConfig};
use lobmatch::{Action, AgentSpec, Arena};
use proptest::prelude::*;

// chi-square critical values at significance 0.001
const CHI2_DF1: f64 = 10.828;
const CHI2_DF3: f64 = 16.266;

fn chi_square(observed: &[u64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum()
}

#[test]
fn one_third_passes_chi_square() {
    let n = 1_000_000u64;
    let coin = Bernoulli::new(&ratio(1, 3)).unwrap();
    let mut bits = bit_stream(2024, 0);
    let hits = (0..n).filter(|_| coin.sample(&mut bits)).count() as u64;
    let stat = chi_square(&[hits, n - hits], &[n as f64 / 3.0, 2.0 * n as f64 / 3.0]);
    assert!(stat < CHI2_DF1, "chi-square {stat}, hits {hits}");
}

#[test]
fn two_bit_words_are_uniform() {
    let n = 400_000u64;
    let mut bits = bit_stream(99, 1);
    let mut counts = [0u64; 4];
    for _ in 0..n {
        counts[bits.take_u64(2) as usize] += 1;
    }
    let stat = chi_square(&counts, &[n as f64 / 4.0; 4]);
    assert!(stat < CHI2_DF3, "chi-square {stat}, counts {counts:?}");
}

#[test]
fn one_third_redraws_on_three() {
    // replay the stream by hand: 2-bit words, 0 wins, 1 or 2 loses, 3 retries
    for id in 0..200 {
        let mut a = bit_stream(5, id);
        let mut b = bit_stream(5, id);
        let got = sample_bernoulli(&mut a, &ratio(1, 3)).unwrap();
        let expect = loop {
            match b.take_u64(2) {
                0 => break true,
                1 | 2 => break false,
                _ => continue,
            }
        };
        assert_eq!(got, expect);
        // both streams consumed the same number of bits
        assert_eq!(a.take_u64(64), b.take_u64(64));
    }
}

proptest! {
    #[test]
    fn dyadic_matches_prefix_test(n in 1u32..=12, seed in any::<u64>(), id in any::<u64>()) {
        let k = 1i64;
        let p = ratio(k, 1 << n);
        let mut a = bit_stream(seed, id);
        let mut b = bit_stream(seed, id);
        let prefix_zero = (0..n).all(|_| !b.next_bit());
        prop_assert_eq!(sample_bernoulli(&mut a, &p).unwrap(), prefix_zero);
    }

    #[test]
    fn dyadic_multiples_read_exactly_n_bits(n in 1u32..=12, k in 0u64..4096, seed in any::<u64>()) {
        let k = k % (1 << n);
        let p = ratio(k as i64, 1 << n);
        let mut a = bit_stream(seed, 0);
        let mut b = bit_stream(seed, 0);
        let u = b.take_u64(n);
        prop_assert_eq!(sample_bernoulli(&mut a, &p).unwrap(), u < k);
    }
}

fn run(
    threads: usize,
    p1: &AgentSpec,
    p2: &AgentSpec,
    cfg: &TrialConfig,
) -> lobmatch::montecarlo::EmpiricalResult {
    let roster = default_roster();
    let arena = Arena::new(&roster);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(|| simulate(&arena, p1, p2, cfg).unwrap())
}

#[test]
fn tally_independent_of_thread_count() {
    let g = AgentSpec::Grounded(ratio(1, 3));
    let db = builtin(&Builtin::Db).unwrap();
    let cfg = TrialConfig::new(20_000, 11, 3).unwrap();
    let one = run(1, &g, &db, &cfg);
    assert_eq!(one, run(4, &g, &db, &cfg));
    assert_eq!(one, run(7, &g, &db, &cfg));
    assert_eq!(one.trials(), 20_000);
}

#[test]
fn grounded_pair_stays_cooperative() {
    let g = AgentSpec::Grounded(ratio(1, 4));
    let cfg = TrialConfig::new(10_000, 3, 64).unwrap();
    let r = run(2, &g, &g, &cfg);
    assert_eq!(r.count(Action::Cooperate, Action::Cooperate), 10_000);
    assert_eq!(r.truncated, 0);
}

#[test]
fn defector_against_grounded_within_four_sigma() {
    let g = AgentSpec::Grounded(ratio(1, 4));
    let db = builtin(&Builtin::Db).unwrap();
    let n = 10_000f64;
    let cfg = TrialConfig::new(n as u64, 8, 64).unwrap();
    let r = run(2, &db, &g, &cfg);
    let p = 0.25;
    let sigma = (p * (1.0 - p) / n).sqrt();
    assert!((r.frequency(Action::Defect, Action::Cooperate) - p).abs() <= 4.0 * sigma);
    assert_eq!(
        r.count(Action::Defect, Action::Cooperate) + r.count(Action::Defect, Action::Defect),
        n as u64
    );
}

#[test]
fn depth_one_truncation_rate() {
    // with depth 1 each player truncates exactly when its single draw fails
    let g = AgentSpec::Grounded(ratio(1, 2));
    let n = 40_000f64;
    let cfg = TrialConfig::new(n as u64, 21, 1).unwrap();
    let r = run(3, &g, &g, &cfg);
    let p = 0.75; // at least one of two fair draws fails
    let sigma = (p * (1.0 - p) / n).sqrt();
    assert!((r.truncated as f64 / n - p).abs() <= 4.0 * sigma, "{r:?}");
}
