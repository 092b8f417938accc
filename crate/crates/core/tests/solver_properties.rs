//! Idempotent substitutions and complete dependency sets, on the fixtures
//! and on generated well-typed proofs.

use logon_core::check::World;
use logon_core::testing::{arb_proof, fixture_properties, fixtures, generated_proof};
use proptest::prelude::*;

#[test]
fn fixture_units() {
    let w = World::from_sources([("lf.mmt", fixtures::LF), ("pl.mmt", fixtures::PL), ("two.mmt", fixtures::TWO)]);
    assert_eq!(w.error_count(), 0);
    let spot = fixture_properties(&w).unwrap_or_else(|e| panic!("{e}"));
    assert!(spot >= 5);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn generated_proofs(p in arb_proof()) {
        if let Err(e) = generated_proof(&p) {
            prop_assert!(false, "{}", e);
        }
    }
}
