mod common;

use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn laws_hold_on_guarded_systems((sys, probes) in common::system_and_probes()) {
        if let Err(msg) = common::check_laws(&sys, &probes) {
            prop_assert!(false, "{msg}\n{sys}");
        }
    }
}
