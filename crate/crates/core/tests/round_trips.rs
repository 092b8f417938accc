//! Rendering then reparsing gives back the parsed term.

use logon_core::check::World;
use logon_core::testing::{fixtures, round_trips};

#[test]
fn every_fixture_term_round_trips() {
    let w = World::from_sources([("lf.mmt", fixtures::LF), ("pl.mmt", fixtures::PL), ("two.mmt", fixtures::TWO)]);
    let n = round_trips(&w, &["lf.mmt", "pl.mmt", "two.mmt"]).unwrap_or_else(|e| panic!("{e}"));
    assert!(n >= 16, "{n}");
}
