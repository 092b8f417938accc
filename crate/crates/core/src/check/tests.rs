use super::*;

const LF: &str = include_str!("../../../../fixtures/lf.mmt");
const PL: &str = include_str!("../../../../fixtures/pl.mmt");

fn world(pl: &str) -> World {
    World::from_sources([("lf.mmt", LF), ("pl.mmt", pl)])
}

fn slot(s: &str, c: Component) -> SlotId {
    SlotId::new(QName::parse(s).unwrap(), c)
}

#[test]
fn fixtures_check_cleanly() {
    let w = world(PL);
    let ds = w.diagnostics();
    assert!(ds.is_empty(), "{ds:#?}");
    assert_eq!(w.results.len(), 8);
}

#[test]
fn example_elaborates() {
    let w = world(PL);
    let s = slot("PL?example", Component::Definiens);
    assert_eq!(
        w.render_slot(&s, RenderOptions::full()).unwrap(),
        "[A:prop] impI A (A∧A) ([p:ded A] andI A A p p)"
    );
    assert_eq!(w.render_slot(&s, RenderOptions::source()).unwrap(), "[A] impI [p] andI p p");
    let r = &w.results[&s];
    assert!(r.dependencies.contains(&slot("PL?impI", Component::Type)));
    assert!(r.dependencies.contains(&slot("PL?andI", Component::Type)));
}

#[test]
fn ill_typed_definiens_reports_failed_judgment() {
    let bad = PL.replace("  example :", "  equiv : prop → prop → prop ❘ = [x,y] (x ⟹ y) ∧ ded ❙\n  example :");
    let w = world(&bad);
    let ds = w.diagnostics();
    assert_eq!(ds.len(), 1, "{ds:#?}");
    assert!(ds[0].log.iter().any(|l| l == "ded : prop"), "{:?}", ds[0].log);
    let src = ds[0].src.clone().unwrap();
    assert_eq!(src.slice(&bad), "ded");
    // the bound variables still got their types
    let s = slot("PL?equiv", Component::Definiens);
    let full = w.render_slot(&s, RenderOptions::full()).unwrap();
    assert!(full.starts_with("[x:prop,y:prop]"), "{full}");
}

#[test]
fn elaboration_erases_to_the_parse() {
    let w = world(PL);
    for (slot, p) in &w.parsed {
        let table = w.table(slot.constant.theory()).unwrap();
        let e = w.elaborated(slot).unwrap();
        assert!(
            crate::engine::erases_to(e, &p.term, table.application_head()),
            "{slot}: {}",
            render(e, table, RenderOptions::full())
        );
    }
    // and a rigid change is noticed
    let ex = slot("PL?example", Component::Definiens);
    let mut other = w.elaborated(&ex).unwrap().clone();
    *other.children_mut().pop().unwrap() = Term::var("A");
    assert!(!crate::engine::erases_to(
        &other,
        &w.parsed[&ex].term,
        w.table("PL").unwrap().application_head()
    ));
}
