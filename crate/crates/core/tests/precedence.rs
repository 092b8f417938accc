//! Infix disambiguation checked against exhaustive enumeration of bracketings.

use logon_core::model::{Assoc, FileId, Marker, Notation, QName, SourceRef, Term};
use logon_core::termparse::{parse_text, NotationTable, TableEntry};
use proptest::prelude::*;

// (name, delimiter, precedence, assoc)
const OPS: [(&str, &str, i32, Assoc); 5] = [
    ("and", "∧", 20, Assoc::Left),
    ("or", "∨", 20, Assoc::Left),
    ("imp", "⟹", 10, Assoc::Right),
    ("plus", "+", 30, Assoc::Left),
    ("cons", "::", 30, Assoc::Right),
];

fn table() -> NotationTable {
    NotationTable::new(OPS.iter().map(|(n, d, p, a)| TableEntry {
        name: QName::new("T", n),
        notation: Some(Notation {
            markers: vec![
                Marker::Arg { index: 1, sequence: false },
                Marker::Delim { text: d.to_string() },
                Marker::Arg { index: 2, sequence: false },
            ],
            precedence: *p,
            assoc: *a,
        }),
        typed: false,
    }))
}

#[derive(Clone, Debug, PartialEq)]
enum Tree {
    Leaf(usize),
    Node(usize, Box<Tree>, Box<Tree>),
}

/// All bracketings of atoms `lo..=hi` joined by `ops[lo..hi]`.
fn bracketings(ops: &[usize], lo: usize, hi: usize) -> Vec<Tree> {
    if lo == hi {
        return vec![Tree::Leaf(lo)];
    }
    let mut out = Vec::new();
    for k in lo..hi {
        for l in bracketings(ops, lo, k) {
            for r in bracketings(ops, k + 1, hi) {
                out.push(Tree::Node(ops[k], Box::new(l.clone()), Box::new(r)));
            }
        }
    }
    out
}

fn respects_precedence(t: &Tree) -> bool {
    let Tree::Node(o, l, r) = t else { return true };
    let (_, _, p, a) = OPS[*o];
    let ok = |child: &Tree, side: Assoc| match child {
        Tree::Leaf(_) => true,
        Tree::Node(c, _, _) => {
            let cp = OPS[*c].2;
            cp > p || (cp == p && c == o && a == side)
        }
    };
    ok(l, Assoc::Left) && ok(r, Assoc::Right) && respects_precedence(l) && respects_precedence(r)
}

fn to_term(t: &Tree) -> Term {
    match t {
        Tree::Leaf(i) => Term::var(format!("x{i}")),
        Tree::Node(o, l, r) => Term::app(QName::new("T", OPS[*o].0), vec![to_term(l), to_term(r)]),
    }
}

fn source(ops: &[usize]) -> String {
    let mut s = "x0".to_string();
    for (i, o) in ops.iter().enumerate() {
        s.push_str(&format!(" {} x{}", OPS[*o].1, i + 1));
    }
    s
}

fn parse(s: &str, n: usize) -> logon_core::termparse::ParseResult {
    let vars: Vec<String> = (0..=n).map(|i| format!("x{i}")).collect();
    parse_text(s, &SourceRef::new(FileId::new("q"), 0, s.len()), &table(), &vars)
}

#[test]
fn and_binds_tighter_than_imp() {
    let r = parse("x0 ∧ x1 ⟹ x2", 2);
    assert!(r.errors.is_empty());
    let expected = to_term(&Tree::Node(
        2,
        Box::new(Tree::Node(0, Box::new(Tree::Leaf(0)), Box::new(Tree::Leaf(1)))),
        Box::new(Tree::Leaf(2)),
    ));
    assert_eq!(r.term, expected);
}

proptest! {
    #[test]
    fn parser_agrees_with_enumeration(ops in prop::collection::vec(0usize..OPS.len(), 1..6)) {
        let valid: Vec<Tree> = bracketings(&ops, 0, ops.len())
            .into_iter()
            .filter(respects_precedence)
            .collect();
        prop_assert!(valid.len() <= 1);
        let r = parse(&source(&ops), ops.len());
        match valid.first() {
            Some(t) => {
                prop_assert!(r.errors.is_empty(), "{:?}", r.errors);
                prop_assert_eq!(r.term, to_term(t));
            }
            None => prop_assert!(!r.errors.is_empty()),
        }
    }
}
