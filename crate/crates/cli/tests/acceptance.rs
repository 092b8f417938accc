//! One PASS/FAIL line per acceptance criterion. Runs without the test
//! harness so the lines always show; exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::collection::vec;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use logon_core::change::Workspace;
use logon_core::check::World;
use logon_core::engine::erases_to;
use logon_core::ide::{self, ItemKind};
use logon_core::index::{SearchQuery, TermIndex};
use logon_core::lf::lf_rules;
use logon_core::model::{alpha_eq, QName, SlotId};
use logon_core::project::{build_project, BuildOptions, ProjectConfig};
use logon_core::render::RenderOptions;
use logon_core::testing::{self, fixtures};

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn slot(q: &str, tp: bool) -> SlotId {
    let q = QName::parse(q).unwrap();
    if tp {
        SlotId::tp(q)
    } else {
        SlotId::def(q)
    }
}

fn pl_world(pl: &str) -> World {
    World::from_sources([("lf.mmt", fixtures::LF), ("pl.mmt", pl)])
}

fn project_dir() -> tempfile::TempDir {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("lf.mmt"), fixtures::LF).unwrap();
    fs::write(d.path().join("pl.mmt"), fixtures::PL).unwrap();
    d
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn fixture_build() -> Outcome {
    let d = project_dir();
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_logon"))
        .args(["build", "--json"])
        .arg(d.path())
        .env_remove("LOGON_CACHE")
        .output()
        .map_err(|e| e.to_string())?;
    let took = start.elapsed();
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| format!("report: {e}"))?;
    check!(
        out.status.success(),
        "exit status {}: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout)
    );
    check!(report["errors"] == 0, "{} errors", report["errors"]);
    check!(report["files"].as_array().map_or(0, Vec::len) == 2, "files {}", report["files"]);
    check!(took < Duration::from_secs(5), "took {took:?}");
    Ok(format!("0 errors, {} ms", took.as_millis()))
}

fn elaboration() -> Outcome {
    let w = pl_world(fixtures::PL);
    let ex = slot("PL?example", false);
    let full = w.render_slot(&ex, RenderOptions::full()).ok_or("no elaboration")?;
    check!(full == "[A:prop] impI A (A∧A) ([p:ded A] andI A A p p)", "rendered {full}");
    let head = w.table("PL").unwrap().application_head();
    for (s, p) in &w.parsed {
        let e = w.elaborated(s).ok_or(format!("{s} not elaborated"))?;
        check!(erases_to(e, &p.term, head), "{s} does not erase to its parse");
    }
    Ok(full)
}

fn error_recovery() -> Outcome {
    let bad = fixtures::PL.replace("  example :", "  equiv : prop → prop → prop ❘ = [x,y] (x ⟹ y) ∧ ded ❙\n  example :");
    let w = pl_world(&bad);
    let ds = w.diagnostics();
    check!(ds.len() == 1, "{} diagnostics", ds.len());
    check!(ds[0].log.iter().any(|l| l == "ded : prop"), "log {:?}", ds[0].log);
    let at = ds[0].src.as_ref().map(|r| r.slice(&bad).to_string());
    check!(at.as_deref() == Some("ded"), "reported at {at:?}");
    let full = w
        .render_slot(&slot("PL?equiv", false), RenderOptions::full())
        .ok_or("no partial term")?;
    check!(full.starts_with("[x:prop,y:prop]"), "partial term {full}");
    Ok(format!("1 diagnostic, partial term {full}"))
}

/// Each round puts the top hint into every hole, like a user accepting the
/// first completion everywhere.
fn proof_hints() -> Outcome {
    let mut text = fixtures::PL.replace("= [A] impI [p] andI p p", "= [A] ⟨ded (A ⟹ (A ∧ A))⟩");
    let rules = lf_rules();
    let mut ws = Workspace::open([("lf.mmt", fixtures::LF), ("pl.mmt", text.as_str())], lf_rules());
    let mut rounds = 0;
    loop {
        let holes: Vec<usize> = text.match_indices('⟨').map(|(i, _)| i + '⟨'.len_utf8()).collect();
        if holes.is_empty() {
            break;
        }
        rounds += 1;
        check!(rounds <= 4, "still open after 4 rounds: {text}");
        let mut edits = Vec::new();
        for h in holes {
            let items = ide::completions_at(ws.world(), &rules, "pl.mmt", h);
            let top = items
                .first()
                .filter(|i| i.kind == ItemKind::Hint)
                .ok_or(format!("no hint at {h} in {text}"))?;
            let r = top.src.as_ref().ok_or("hint without a hole")?;
            edits.push(((r.start, r.end), top.insert_text.clone()));
        }
        edits.sort();
        edits.dedup();
        for ((a, b), insert) in edits.into_iter().rev() {
            text.replace_range(a..b, &insert);
        }
        ws.edit("pl.mmt", &text);
    }
    check!(ws.world().error_count() == 0, "errors: {:?}", ws.world().diagnostics());
    let ex = slot("PL?example", false);
    let want = pl_world(fixtures::PL);
    let (got, want) = (&ws.world().parsed[&ex].term, &want.parsed[&ex].term);
    check!(
        alpha_eq(&testing::canonical_metas(got), &testing::canonical_metas(want)),
        "ended with {text}"
    );
    Ok(format!("{rounds} rounds"))
}

fn search() -> Outcome {
    let d = project_dir();
    let config = ProjectConfig::load(d.path()).map_err(|e| e.to_string())?;
    let (_, p) = build_project(&config, &lf_rules(), BuildOptions::default()).map_err(|e| e.to_string())?;
    let hits = |q: &str| -> Result<Vec<(String, bool, String)>, String> {
        let q = ide::parse_query(&p.world, q, None)?;
        Ok(p.terms
            .search(&q)
            .into_iter()
            .map(|h| {
                let subst: Vec<String> = h
                    .substitution
                    .iter()
                    .map(|(k, v)| format!("{k}={}", v.as_var().unwrap_or("?")))
                    .collect();
                (h.slot.to_string(), h.inferred, subst.join(","))
            })
            .collect())
    };
    let xx = hits("$x: x∧x")?;
    let want = vec![
        ("PL?example^tp".to_string(), false, "x=A".to_string()),
        ("PL?example^def".to_string(), true, "x=A".to_string()),
    ];
    check!(xx == want, "x∧x gave {xx:?}");
    let xyz = hits("$x,$y,$z: x⟹(y∧z)")?;
    check!(
        xyz == vec![("PL?example^tp".to_string(), false, "x=A,y=A,z=A".to_string())],
        "x⟹(y∧z) gave {xyz:?}"
    );
    // same corpus through the plain index
    check!(
        TermIndex::build(&p.world)
            .search(&SearchQuery::parse("$x: x∧x", p.world.table("PL").unwrap()).unwrap())
            .len()
            == 2,
        "index"
    );

    let cases = 1000;
    runner(cases)
        .run(&(vec(testing::arb_term(), 1..4), testing::arb_pattern()), |(terms, pattern)| {
            testing::search_agrees(&terms, &pattern).map_err(TestCaseError::fail)
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("hit sets match, {cases} random corpora agree with brute force"))
}

fn change_minimality() -> Outcome {
    let open = || Workspace::open([("pl.mmt", fixtures::PL), ("two.mmt", fixtures::TWO)], lf_rules());
    let mut ws = open();
    let d = ws.edit("two.mmt", &fixtures::TWO.replace("[X] [h] andI h h", "[X] [k] andI k k"));
    check!(
        d.revalidated == vec![slot("Two?c", false)],
        "proof edit revalidated {:?}",
        d.revalidated
    );
    testing::matches_full(&ws)?;
    let mut ws = open();
    let d = ws.edit(
        "two.mmt",
        &fixtures::TWO.replace("c : {X} ded X → ded (X ∧ X)", "c : {Z} ded Z → ded (Z ∧ Z)"),
    );
    let want = vec![slot("Two?c", true), slot("Two?c", false), slot("Two?d", false)];
    check!(d.revalidated == want, "statement edit revalidated {:?}", d.revalidated);
    testing::matches_full(&ws)?;

    let cases = 500;
    runner(cases)
        .run(&(proptest::num::u64::ANY, 1usize..4), |(seed, len)| {
            testing::edit_script(seed, len).map(drop).map_err(TestCaseError::fail)
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("1 and 3 revalidations, {cases} edit scripts match full rechecks"))
}

fn cache_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let e = e.unwrap();
        if e.file_type().unwrap().is_file() {
            out.insert(e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap());
        }
    }
    out
}

fn round_trips() -> Outcome {
    let w = World::from_sources([("lf.mmt", fixtures::LF), ("pl.mmt", fixtures::PL), ("two.mmt", fixtures::TWO)]);
    let terms = testing::round_trips(&w, &["lf.mmt", "pl.mmt", "two.mmt"])?;

    let d = project_dir();
    let config = ProjectConfig::load(d.path()).map_err(|e| e.to_string())?;
    build_project(&config, &lf_rules(), BuildOptions::default()).map_err(|e| e.to_string())?;
    let first = cache_bytes(&config.cache);
    let (again, _) = build_project(&config, &lf_rules(), BuildOptions::default()).map_err(|e| e.to_string())?;
    check!(again.built() == 0, "second build rebuilt {} files", again.built());
    check!(cache_bytes(&config.cache) == first, "cache changed without edits");
    build_project(&config, &lf_rules(), BuildOptions { force: true }).map_err(|e| e.to_string())?;
    check!(cache_bytes(&config.cache) == first, "forced rebuild wrote different bytes");
    Ok(format!("{terms} terms, {} cache files byte-stable", first.len()))
}

fn solver_properties() -> Outcome {
    let w = World::from_sources([("lf.mmt", fixtures::LF), ("pl.mmt", fixtures::PL), ("two.mmt", fixtures::TWO)]);
    check!(w.error_count() == 0, "fixtures have errors");
    let spot = testing::fixture_properties(&w)?;
    let cases = 1000;
    runner(cases)
        .run(&testing::arb_proof(), |p| {
            if p.depth() > 6 {
                return Err(TestCaseError::fail(format!("depth {}", p.depth())));
            }
            testing::generated_proof(&p).map_err(TestCaseError::fail)
        })
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "{} units, {spot} withheld dependencies, {cases} generated proofs",
        w.units.len()
    ))
}

fn main() -> std::process::ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("fixture build", fixture_build),
        ("elaboration", elaboration),
        ("error recovery", error_recovery),
        ("proof hints", proof_hints),
        ("search", search),
        ("change minimality", change_minimality),
        ("round-trips", round_trips),
        ("solver properties", solver_properties),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                println!("FAIL {name}: {why}");
                failed.push(name);
            }
        }
    }
    if failed.is_empty() {
        std::process::ExitCode::SUCCESS
    } else {
        eprintln!("failed: {failed:?}");
        std::process::ExitCode::FAILURE
    }
}
