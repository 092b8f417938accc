use super::*;
use crate::lf::lf_rules;

const LF: &str = include_str!("../../../../fixtures/lf.mmt");
const PL: &str = include_str!("../../../../fixtures/pl.mmt");

fn world(pl: &str) -> World {
    World::from_sources([("lf.mmt", LF), ("pl.mmt", pl)])
}

/// Offset of the `n`th occurrence of `needle` after `after`.
fn at(text: &str, after: &str, needle: &str, n: usize) -> usize {
    let base = text.find(after).unwrap();
    let mut from = base;
    for _ in 0..n {
        from = text[from..].find(needle).unwrap() + from + needle.len();
    }
    from + text[from..].find(needle).unwrap()
}

#[test]
fn types_of_variables_constants_and_subterms() {
    let w = world(PL);
    let rules = lf_rules();
    let ty = |o| type_at(&w, &rules, "pl.mmt", o).map(|t| t.rendered);
    let p_use = at(PL, "andI p p ❙", "p", 0);
    assert_eq!(ty(p_use).as_deref(), Some("ded A"));
    let p_bound = at(PL, "[p] andI", "p", 0);
    assert_eq!(ty(p_bound).as_deref(), Some("ded A"));
    let and = at(PL, "and :", "and", 0);
    assert_eq!(ty(and).as_deref(), Some("prop→prop→prop"));
    let andi = at(PL, "[p] andI", "andI", 0);
    assert_eq!(ty(andi).as_deref(), Some("{A} {B} ded A → ded B → ded (A∧B)"));
    let space = at(PL, "andI p p ❙", " ", 0);
    assert_eq!(ty(space), None);
}

#[test]
fn inferred_application_types() {
    let w = world(PL);
    let rules = lf_rules();
    let s = site_at(&w, "pl.mmt", at(PL, "(A ⟹ (A ∧ A))", "∧", 0)).unwrap();
    assert!(s.term.as_complex().is_some());
    let r = subterm_range(&w, "pl.mmt", s.src.start, s.src.end).unwrap();
    assert_eq!(&PL[r.start..r.end], "(A ∧ A)");
    let t = type_at(&w, &rules, "pl.mmt", at(PL, "(A ⟹ (A ∧ A))", "∧", 0)).unwrap();
    assert_eq!(t.rendered, "prop");
}

#[test]
fn double_click_selects_the_smallest_subterm() {
    let w = world(PL);
    let o = at(PL, "(A ⟹ (A ∧ A))", "⟹", 0);
    let r = subterm_range(&w, "pl.mmt", o, o + "⟹".len()).unwrap();
    assert_eq!(&PL[r.start..r.end], "(A ⟹ (A ∧ A))");
    let o = at(PL, "andI p p ❙", "p", 1);
    let r = subterm_range(&w, "pl.mmt", o, o + 1).unwrap();
    assert_eq!(&PL[r.start..r.end], "p");
}

#[test]
fn definitions_and_relations() {
    let w = world(PL);
    let r = definition_at(&w, "pl.mmt", at(PL, "[p] andI", "andI", 0)).unwrap();
    assert!(PL[r.start..r.end].starts_with("andI : {A}{B}"), "{}", &PL[r.start..r.end]);
    let r = definition_at(&w, "pl.mmt", at(PL, "prop : type", "type", 0)).unwrap();
    assert_eq!(r.file.as_str(), "lf.mmt");
    let ix = RelationalIndex::build(&w);
    let expr = RelExpr::parse("inverse(RefersTo)").unwrap();
    let locs = related_at(&w, &ix, "pl.mmt", at(PL, "and :", "and", 0), &expr).unwrap();
    let names: Vec<&str> = locs.iter().map(|l| l.name.as_str()).collect();
    assert_eq!(names, vec!["PL?andI", "PL?example"]);
    assert!(locs.iter().all(|l| l.src.is_some()));
    assert_eq!(
        name_ref(&w, "PL?example^def").map(|r| PL[r.start..r.end].to_string()).as_deref(),
        Some("[A] impI [p] andI p p")
    );
    assert!(definition_at(&w, "pl.mmt", 0).is_none());
}

#[test]
fn completions_in_holes_and_elsewhere() {
    let src = PL.replace("= [A] impI [p] andI p p", "= [A] ⟨ded (A ⟹ (A ∧ A))⟩");
    let w = world(&src);
    let rules = lf_rules();
    let items = completions_at(&w, &rules, "pl.mmt", at(&src, "⟨ded", "ded", 0));
    let first = &items[0];
    assert_eq!((first.kind, first.label.as_str()), (ItemKind::Hint, "impI"));
    assert_eq!(first.insert_text, "impI ⟨ded A → ded (A∧A)⟩");
    let hole = first.src.clone().unwrap();
    assert_eq!(&src[hole.start..hole.end], "⟨ded (A ⟹ (A ∧ A))⟩");

    let items = completions_at(&w, &rules, "pl.mmt", at(PL, "ded (A ∧ B)", "A", 0));
    assert!(items.iter().all(|i| i.kind == ItemKind::Scope));
    let labels: Vec<&str> = items.iter().map(|i| i.label.as_str()).collect();
    for name in ["prop", "ded", "imp", "and", "A", "B", "type", "Pi", "lambda"] {
        assert!(labels.contains(&name), "{name} missing from {labels:?}");
    }
    assert!(!labels.contains(&"example"), "later declarations are not in scope");
    let labels: Vec<String> = completions_at(&w, &rules, "pl.mmt", at(&src, "[A] ⟨", "A", 0))
        .into_iter()
        .map(|i| i.label)
        .collect();
    assert!(!labels.iter().any(|l| l == "example"), "a declaration cannot refer to itself");
    let more = PL.replace("❚", "  more : prop → prop ❘ = [x] x ❙\n❚");
    let w = world(&more);
    assert_eq!(w.error_count(), 0);
    let labels: Vec<String> = completions_at(&w, &rules, "pl.mmt", at(&more, "= [x]", "x", 1))
        .into_iter()
        .map(|i| i.label)
        .collect();
    assert_eq!(labels[0], "x");
    for name in ["prop", "ded", "imp", "and", "andI", "impI", "example", "type", "lambda"] {
        assert!(labels.iter().any(|l| l == name), "{name} missing from {labels:?}");
    }

    let empty = World::from_sources([("empty.mmt", "")]);
    assert!(completions_at(&empty, &rules, "empty.mmt", 0).is_empty());
}
