use std::fs;
use std::path::Path;

use super::*;
use crate::lf::lf_rules;

const PL: &str = include_str!("../../../../fixtures/pl.mmt");
const LF: &str = include_str!("../../../../fixtures/lf.mmt");
const TWO: &str = include_str!("../../../../fixtures/two.mmt");

fn setup(dir: &Path) -> ProjectConfig {
    fs::create_dir_all(dir.join("source")).unwrap();
    fs::write(dir.join("source/pl.mmt"), PL).unwrap();
    fs::write(dir.join("source/two.mmt"), TWO).unwrap();
    ProjectConfig::load(dir).unwrap()
}

fn cache_bytes(cfg: &ProjectConfig) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(&cfg.cache).unwrap() {
        let p = e.unwrap().path();
        if p.is_file() {
            out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap());
        }
    }
    out
}

#[test]
fn config_defaults_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ProjectConfig::load(dir.path()).unwrap();
    assert_eq!(cfg.source, dir.path());
    assert_eq!(cfg.include, vec!["**/*.mmt".to_string()]);
    fs::write(
        dir.path().join(CONFIG_FILE),
        "source = \"src\"\ncache = \"out\"\ninclude = [\"*.lf\"]\n",
    )
    .unwrap();
    let cfg = ProjectConfig::load(dir.path()).unwrap();
    assert_eq!(cfg.source, dir.path().join("src"));
    assert_eq!(cfg.include, vec!["*.lf".to_string()]);
    fs::write(dir.path().join(CONFIG_FILE), "sources = \"src\"\n").unwrap();
    assert!(matches!(ProjectConfig::load(dir.path()), Err(ProjectError::Config(_))));
    fs::write(dir.path().join(CONFIG_FILE), "source = \"../elsewhere\"\n").unwrap();
    assert!(matches!(ProjectConfig::load(dir.path()), Err(ProjectError::Config(_))));
}

#[test]
fn files_are_ordered_by_includes() {
    let docs = vec![
        ("two.mmt".to_string(), parse_document(TWO, FileId::new("two.mmt"))),
        ("pl.mmt".to_string(), parse_document(PL, FileId::new("pl.mmt"))),
    ];
    let (order, deps) = file_order(&docs);
    assert_eq!(order, vec![1, 0]);
    assert_eq!(deps[0], BTreeSet::from([1]));
}

#[test]
fn second_build_skips_everything() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let rules = lf_rules();
    let (r1, p1) = build_project(&cfg, &rules, BuildOptions::default()).unwrap();
    assert_eq!((r1.built(), r1.skipped(), r1.errors), (2, 0, 0));
    let first = cache_bytes(&cfg);
    assert!(first.contains_key("manifest.json"));
    assert!(first.contains_key("pl.mmt.json"));

    let (r2, p2) = build_project(&cfg, &rules, BuildOptions::default()).unwrap();
    assert_eq!((r2.built(), r2.skipped(), r2.errors), (0, 2, 0));
    assert_eq!(cache_bytes(&cfg), first, "rebuilding must not change a byte");
    assert_eq!(p1.relations, p2.relations);
    assert_eq!(p1.terms.entries, p2.terms.entries);
    assert_eq!(p1.world.results, p2.world.results);

    let (r3, p3) = build_project(&cfg, &rules, BuildOptions { force: true }).unwrap();
    assert_eq!(r3.built(), 2);
    assert_eq!(cache_bytes(&cfg), first);
    assert_eq!(p3.terms.entries, p2.terms.entries);
}

#[test]
fn editing_a_dependency_rebuilds_its_dependents() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let rules = lf_rules();
    build_project(&cfg, &rules, BuildOptions::default()).unwrap();
    fs::write(dir.path().join("source/two.mmt"), format!("{TWO}\n// trailing\n")).unwrap();
    let (r, _) = build_project(&cfg, &rules, BuildOptions::default()).unwrap();
    let status: Vec<_> = r.files.iter().map(|f| (f.file.as_str(), f.status)).collect();
    assert_eq!(status, vec![("pl.mmt", FileStatus::Skipped), ("two.mmt", FileStatus::Built)]);
    fs::write(dir.path().join("source/pl.mmt"), format!("{PL}\n")).unwrap();
    let (r, _) = build_project(&cfg, &rules, BuildOptions::default()).unwrap();
    assert_eq!(r.built(), 2);
}

#[test]
fn errors_are_reported_and_cached() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let broken = TWO.replace("(c Y h)", "(c Y Y)");
    assert_ne!(broken, TWO);
    fs::write(dir.path().join("source/two.mmt"), broken).unwrap();
    let rules = lf_rules();
    let (r, _) = build_project(&cfg, &rules, BuildOptions::default()).unwrap();
    assert_eq!(r.errors, 1, "{:#?}", r.diagnostics);
    let two = r.files.iter().find(|f| f.file == "two.mmt").unwrap();
    assert_eq!(two.errors, 1);
    assert!(cfg.cache.join("two.mmt.json").exists());
    let (again, _) = build_project(&cfg, &rules, BuildOptions::default()).unwrap();
    assert_eq!((again.skipped(), again.errors), (2, 1));
}

#[test]
fn lf_and_pl_with_the_ded_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("lf.mmt"), LF).unwrap();
    fs::write(dir.path().join("pl.mmt"), PL).unwrap();
    let cfg = ProjectConfig::load(dir.path()).unwrap();
    let rules = lf_rules();
    let (r, p) = build_project(&cfg, &rules, BuildOptions::default()).unwrap();
    assert_eq!((r.built(), r.errors), (2, 0));
    assert!(p.world.docs.iter().all(|d| d.file.as_str() != crate::check::BUILTIN_LF_FILE));

    let bad = PL.replace("❚", "  equiv : prop → prop → prop ❘ = [x,y] (x ⟹ y) ∧ ded ❙\n❚");
    fs::write(dir.path().join("pl.mmt"), &bad).unwrap();
    let (r, _) = build_project(&cfg, &rules, BuildOptions::default()).unwrap();
    let status: Vec<_> = r.files.iter().map(|f| (f.file.as_str(), f.status, f.errors)).collect();
    assert_eq!(status, vec![("lf.mmt", FileStatus::Skipped, 0), ("pl.mmt", FileStatus::Built, 1)]);
    // the oracle: checking the file alone
    let alone = World::from_sources([("pl.mmt", bad.as_str())]);
    assert_eq!(alone.diagnostics(), r.diagnostics);
    let path = cfg.cache.join("pl.mmt.json");
    let e = CacheEntry::from_bytes(&fs::read(&path).unwrap(), &path).unwrap();
    assert_eq!(e.diagnostics.len(), 1);
    assert!(e.results.iter().any(|(s, _)| s.constant.local() == "equiv"));
}

#[test]
fn cache_entries_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    build_project(&cfg, &lf_rules(), BuildOptions::default()).unwrap();
    let path = cfg.cache.join("two.mmt.json");
    let bytes = fs::read(&path).unwrap();
    let e = CacheEntry::from_bytes(&bytes, &path).unwrap();
    assert_eq!(e.to_bytes(), bytes);
    assert_eq!(e.results.len(), 4);
    assert!(e.relations.tuples.values().flatten().all(|(a, _)| a.starts_with("Two")));
    let stale = String::from_utf8(bytes).unwrap().replacen("\"format\": 1", "\"format\": 0", 1);
    assert!(CacheEntry::from_bytes(stale.as_bytes(), &path).is_err());
}

#[test]
fn html_pages() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let (_, p) = build_project(&cfg, &lf_rules(), BuildOptions::default()).unwrap();
    let out = cfg.html_dir();
    let pages = html::write_site(&p, &out).unwrap();
    assert_eq!(pages, vec!["pl.mmt.html", "two.mmt.html", "index.html"]);
    let page = fs::read_to_string(out.join("pl.mmt.html")).unwrap();
    let text = strip_tags(&page);
    assert!(text.contains("example : {A} ded (A⟹(A∧A))"), "{text}");
    assert!(text.contains("impI A (A∧A)"), "{text}");
    assert!(page.contains("<details class=\"inferred\">"));
    assert!(page.contains("data-path=\"1.0\""));
    let index = fs::read_to_string(out.join("index.html")).unwrap();
    assert!(index.contains("<a href=\"two.mmt.html\">two.mmt</a>: Two"));
}

#[test]
fn empty_project() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ProjectConfig::load(dir.path()).unwrap();
    let (r, p) = build_project(&cfg, &lf_rules(), BuildOptions::default()).unwrap();
    assert!(r.files.is_empty());
    assert_eq!(r.errors, 0);
    assert_eq!(html::write_site(&p, &cfg.html_dir()).unwrap(), vec!["index.html"]);
}

#[test]
fn nested_spans_balance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let (_, p) = build_project(&cfg, &lf_rules(), BuildOptions::default()).unwrap();
    for (slot, t) in p.world.results.iter().filter_map(|(s, _)| Some((s, p.world.elaborated(s)?))) {
        let table = p.world.table(slot.constant.theory()).unwrap();
        let r = crate::render::render_with_map(t, table, crate::render::RenderOptions::full());
        let h = html::spans_to_html(&r);
        assert_eq!(h.matches("<span").count(), h.matches("</span>").count());
        assert_eq!(strip_tags(&h), html::escape(&r.text));
    }
}

fn strip_tags(s: &str) -> String {
    let mut out = String::new();
    let mut inside = false;
    for c in s.chars() {
        match c {
            '<' => inside = true,
            '>' if inside => inside = false,
            c if !inside => out.push(c),
            _ => {}
        }
    }
    out
}
