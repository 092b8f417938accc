use proptest::prelude::*;

use super::*;
use crate::check::World;
use crate::lf::lf;
use crate::model::{alpha_eq, FileId, QName, SourceRef, Term};
use crate::termparse::parse_text;
use crate::testing::canonical_metas;

const LF: &str = include_str!("../../../../fixtures/lf.mmt");
const PL: &str = include_str!("../../../../fixtures/pl.mmt");

fn pl() -> World {
    World::from_sources([("lf.mmt", LF), ("pl.mmt", PL)])
}

fn c(s: &str) -> Term {
    Term::constant(QName::new("PL", s))
}

fn app(f: &str, args: Vec<Term>) -> Term {
    lf().apply(c(f), args)
}

fn reparse(w: &World, text: &str, bound: &[String]) -> Term {
    let src = SourceRef::new(FileId::new("r"), 0, text.len());
    let r = parse_text(text, &src, w.table("PL").unwrap(), bound);
    assert!(r.is_ok(), "{text}: {:?}", r.errors);
    r.term
}

#[test]
fn arrow_sugar_for_unused_binder() {
    let w = pl();
    let t = lf().pi1("_1", c("prop"), c("prop"));
    assert_eq!(render(&t, w.table("PL").unwrap(), RenderOptions::source()), "prop→prop");
    let dep = lf().pi1("A", c("prop"), app("ded", vec![Term::var("A")]));
    assert_eq!(render(&dep, w.table("PL").unwrap(), RenderOptions::source()), "{A:prop} ded A");
}

#[test]
fn infix_and_application() {
    let w = pl();
    let t = w.table("PL").unwrap();
    let p = Term::var("p");
    let and = app("and", vec![p.clone(), p.clone()]);
    assert_eq!(render(&and, t, RenderOptions::source()), "p∧p");
    let imp = app("imp", vec![p.clone(), and.clone()]);
    assert_eq!(render(&imp, t, RenderOptions::source()), "p⟹(p∧p)");
    let left = app("and", vec![imp.clone(), p.clone()]);
    assert_eq!(render(&left, t, RenderOptions::source()), "(p⟹(p∧p))∧p");
    let ded = app("ded", vec![and]);
    assert_eq!(render(&ded, t, RenderOptions::source()), "ded (p∧p)");
}

#[test]
fn implicit_arguments_only_when_asked() {
    let w = pl();
    let t = w.table("PL").unwrap();
    let a = Term::var("A");
    let mut implicit = a.clone();
    implicit.inferred = true;
    let p = app("andI", vec![implicit.clone(), implicit, Term::var("p"), Term::var("p")]);
    assert_eq!(render(&p, t, RenderOptions::source()), "andI p p");
    assert_eq!(render(&p, t, RenderOptions::full()), "andI A A p p");
}

#[test]
fn span_map_points_at_subterms() {
    let w = pl();
    let p = Term::var("p");
    let q = Term::var("q");
    let and = app("and", vec![p, q]);
    let r = render_with_map(&and, w.table("PL").unwrap(), RenderOptions::source());
    assert_eq!(r.text, "p∧q");
    let q_at = r.text.find('q').unwrap();
    let path = r.path_at(q_at).unwrap();
    assert_eq!(and.at_path(path).unwrap().as_var(), Some("q"));
}

#[test]
fn fixture_slots_round_trip() {
    let w = pl();
    let table = w.table("PL").unwrap();
    let mut seen = 0;
    for (slot, parsed) in &w.parsed {
        if slot.constant.theory() != "PL" {
            continue;
        }
        let text = render(&parsed.term, table, RenderOptions::source());
        let again = reparse(&w, &text, &[]);
        assert!(alpha_eq(&canonical_metas(&again), &canonical_metas(&parsed.term)), "{slot}: {text}");
        seen += 1;
    }
    assert_eq!(seen, 8);
}

#[test]
fn elaborated_slots_reparse_to_their_source_form() {
    let w = pl();
    let table = w.table("PL").unwrap();
    for (slot, r) in &w.results {
        if slot.constant.theory() != "PL" {
            continue;
        }
        let e = crate::check::slot_term(&r.elaborated);
        let text = render(e, table, RenderOptions::source());
        let again = reparse(&w, &text, &[]);
        let original = &w.parsed[slot].term;
        assert!(alpha_eq(&canonical_metas(&again), &canonical_metas(original)), "{slot}: {text}");
    }
}

/// Replaces `A → B` by its Pi form everywhere.
fn desugar(t: &Term) -> Term {
    let mut t = lf().arrow_to_pi(t).unwrap_or_else(|| t.clone());
    for c in t.children_mut() {
        *c = desugar(c);
    }
    t
}

fn arb_prop(vars: Vec<String>) -> impl Strategy<Value = Term> {
    let leaf = prop::sample::select(vars).prop_map(Term::var);
    leaf.prop_recursive(5, 40, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| app("and", vec![a, b])),
            (inner.clone(), inner).prop_map(|(a, b)| app("imp", vec![a, b])),
        ]
    })
}

fn arb_type() -> impl Strategy<Value = Term> {
    let vars: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
    let ded = arb_prop(vars).prop_map(|p| app("ded", vec![p]));
    prop::collection::vec(ded, 1..4).prop_map(|ds| {
        let n = lf();
        let mut it = ds.into_iter().rev();
        let mut t = it.next().unwrap();
        for (i, d) in it.enumerate() {
            t = n.pi1(&format!("_{i}"), d, t);
        }
        t
    })
}

proptest! {
    #[test]
    fn generated_types_round_trip(t in arb_type()) {
        let w = pl();
        let bound: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        let text = render(&t, w.table("PL").unwrap(), RenderOptions::source());
        let again = reparse(&w, &text, &bound);
        prop_assert!(alpha_eq(&desugar(&again), &t), "{}", text);
    }
}
