//! Structural well-formedness and emission of per-slot validation units.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{Component, Context, Judgment, Node, QName, SlotId, SourceRef, Term, VarDecl, META_PREFIX};
use crate::surface::{Document, TheorySkeleton};
use crate::termparse::ParseResult;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationUnit {
    pub id: SlotId,
    #[serde(rename = "metaContext")]
    pub metas: Context,
    pub judgment: Judgment,
    #[serde(rename = "ref")]
    pub src: SourceRef,
}

impl ValidationUnit {
    pub fn theory(&self) -> &str {
        self.judgment.theory()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StructureErrorKind {
    DuplicateName,
    UnknownInclude,
    IncludeCycle,
    UnresolvedReference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureError {
    pub kind: StructureErrorKind,
    pub message: String,
    #[serde(rename = "ref")]
    pub src: SourceRef,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StructureResult {
    pub units: Vec<ValidationUnit>,
    pub errors: Vec<StructureError>,
    /// Theory names, included theories first.
    pub order: Vec<String>,
}

/// Finds a theory by name; the first definition wins.
pub fn find_theory<'d>(docs: &'d [Document], name: &str) -> Option<&'d TheorySkeleton> {
    docs.iter().find_map(|d| d.theory(name))
}

/// Theory names in include order, with cycle and unknown-include errors.
pub fn theory_order(docs: &[Document]) -> (Vec<String>, Vec<StructureError>) {
    #[derive(PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn visit(
        th: &TheorySkeleton,
        docs: &[Document],
        marks: &mut BTreeMap<String, Mark>,
        order: &mut Vec<String>,
        errors: &mut Vec<StructureError>,
    ) {
        marks.insert(th.name.clone(), Mark::Active);
        for inc in &th.includes {
            match (marks.get(&inc.theory), find_theory(docs, &inc.theory)) {
                (Some(Mark::Done), _) => {}
                (Some(Mark::Active), _) => errors.push(StructureError {
                    kind: StructureErrorKind::IncludeCycle,
                    message: format!("include cycle through `{}`", inc.theory),
                    src: inc.src.clone(),
                }),
                (None, Some(target)) => visit(target, docs, marks, order, errors),
                (None, None) => errors.push(StructureError {
                    kind: StructureErrorKind::UnknownInclude,
                    message: format!("unknown theory `{}`", inc.theory),
                    src: inc.src.clone(),
                }),
            }
        }
        marks.insert(th.name.clone(), Mark::Done);
        order.push(th.name.clone());
    }
    let mut marks = BTreeMap::new();
    let mut order = Vec::new();
    let mut errors = Vec::new();
    let mut seen = BTreeSet::new();
    for doc in docs {
        for th in &doc.theories {
            if !seen.insert(th.name.clone()) {
                errors.push(StructureError {
                    kind: StructureErrorKind::DuplicateName,
                    message: format!("theory `{}` is declared twice", th.name),
                    src: th.name_ref.clone(),
                });
                continue;
            }
            if !marks.contains_key(&th.name) {
                visit(th, docs, &mut marks, &mut order, &mut errors);
            }
        }
    }
    (order, errors)
}

/// Renames free occurrences of metas `/X…` to `/T…`, keeping references.
pub fn rename_type_metas(t: &Term) -> Term {
    let mut t = t.clone();
    fn go(t: &mut Term) {
        match &mut t.node {
            Node::Var { name } => {
                if let Some(rest) = name.strip_prefix(&format!("{META_PREFIX}X")) {
                    *name = format!("{META_PREFIX}T{rest}");
                }
            }
            Node::Const { .. } => {}
            Node::Complex { bound, args, .. } => {
                for d in bound.0.iter_mut() {
                    if let Some(x) = d.ty.as_mut() {
                        go(x);
                    }
                    if let Some(x) = d.def.as_mut() {
                        go(x);
                    }
                }
                args.iter_mut().for_each(go);
            }
        }
    }
    go(&mut t);
    t
}

/// Checks names, includes and reference order, and emits one unit per
/// typed or defined constant. `parsed` holds the parse of every term slot.
pub fn validate_structure(docs: &[Document], parsed: &BTreeMap<SlotId, ParseResult>) -> StructureResult {
    let (order, mut errors) = theory_order(docs);
    let mut units = Vec::new();
    for tname in &order {
        let th = find_theory(docs, tname).expect("ordered theories exist");
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, d) in th.declarations.iter().enumerate() {
            if index.contains_key(d.name.as_str()) {
                errors.push(StructureError {
                    kind: StructureErrorKind::DuplicateName,
                    message: format!("`{}` is already declared in `{}`", d.name, th.name),
                    src: d.name_ref.clone(),
                });
                continue;
            }
            index.insert(&d.name, i);
        }
        for (i, d) in th.declarations.iter().enumerate() {
            if index.get(d.name.as_str()) != Some(&i) {
                continue;
            }
            let name = QName::new(&th.name, &d.name);
            let tp = parsed.get(&SlotId::tp(name.clone()));
            let df = parsed.get(&SlotId::def(name.clone()));
            for r in tp.iter().chain(df.iter()) {
                for (_, sub) in r.term.subterms() {
                    let Some(c) = sub.as_const() else { continue };
                    if c.theory() != th.name {
                        continue;
                    }
                    if let Some(&j) = index.get(c.local()) {
                        if j >= i {
                            let what = if j == i { "refers to itself" } else { "is declared later" };
                            errors.push(StructureError {
                                kind: StructureErrorKind::UnresolvedReference,
                                message: format!("`{}` {}", c.local(), what),
                                src: sub.src.clone().unwrap_or_else(|| d.name_ref.clone()),
                            });
                        }
                    }
                }
            }
            if let (Some(r), Some(u)) = (tp, d.ty.as_ref()) {
                units.push(ValidationUnit {
                    id: SlotId::tp(name.clone()),
                    metas: r.metas.clone(),
                    judgment: Judgment::Inhabitable {
                        theory: th.name.clone(),
                        ty: r.term.clone(),
                    },
                    src: u.src.clone(),
                });
            }
            if let (Some(r), Some(u)) = (df, d.def.as_ref()) {
                let mut metas = r.metas.clone();
                let ty = match tp {
                    Some(t) => {
                        for m in t.metas.iter() {
                            let renamed = rename_type_metas(&Term::var(m.name.clone()));
                            metas.push(VarDecl::new(renamed.as_var().unwrap(), None));
                        }
                        rename_type_metas(&t.term)
                    }
                    None => {
                        let m = format!("{META_PREFIX}T0");
                        metas.push(VarDecl::new(m.clone(), None));
                        Term::var(m)
                    }
                };
                units.push(ValidationUnit {
                    id: SlotId::new(name.clone(), Component::Definiens),
                    metas,
                    judgment: Judgment::Typing {
                        theory: th.name.clone(),
                        term: r.term.clone(),
                        ty,
                    },
                    src: u.src.clone(),
                });
            }
        }
    }
    StructureResult { units, errors, order }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FileId;
    use crate::surface::parse_document;
    use crate::termparse::{parse_term, table_for};

    const LF: &str = include_str!("../../../fixtures/lf.mmt");
    const PL: &str = include_str!("../../../fixtures/pl.mmt");

    fn run(extra: &str) -> StructureResult {
        let docs = vec![
            parse_document(LF, FileId::new("lf.mmt")),
            parse_document(PL, FileId::new("pl.mmt")),
            parse_document(extra, FileId::new("x.mmt")),
        ];
        let mut parsed = BTreeMap::new();
        for doc in &docs {
            for th in &doc.theories {
                let table = table_for(&th.name, &|n| find_theory(&docs, n));
                for d in &th.declarations {
                    for u in d.units() {
                        parsed.entry(u.slot.clone()).or_insert_with(|| parse_term(u, &table));
                    }
                }
            }
        }
        validate_structure(&docs, &parsed)
    }

    #[test]
    fn fixture_units() {
        let r = run("");
        assert!(r.errors.is_empty(), "{:?}", r.errors);
        assert_eq!(r.order, vec!["LF", "PL"]);
        // LF has no typed constants; PL has 7 types and 1 definiens
        assert_eq!(r.units.len(), 8);
        let ex: Vec<&ValidationUnit> = r.units.iter().filter(|u| u.id.constant.local() == "example").collect();
        assert_eq!(ex.len(), 2);
        assert!(matches!(ex[0].judgment, Judgment::Inhabitable { .. }));
        let Judgment::Typing { ty, .. } = &ex[1].judgment else { panic!() };
        // the declared type with its metas renamed
        assert!(ty.metas().iter().all(|m| m.starts_with("/T")));
        assert!(ex[1].metas.contains("/T1"));
        assert!(ex[1].metas.contains("/X1"));
    }

    #[test]
    fn duplicates_and_includes() {
        let r = run("theory Q = include PL ❙ include Nope ❙ c : prop ❙ c : prop ❙ d = c ❙ ❚");
        let kinds: Vec<StructureErrorKind> = r.errors.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, vec![StructureErrorKind::UnknownInclude, StructureErrorKind::DuplicateName]);
        let q: Vec<String> = r.units.iter().filter(|u| u.theory() == "Q").map(|u| u.id.to_string()).collect();
        assert_eq!(q, vec!["Q?c^tp", "Q?d^def"]);
        let d = r.units.last().unwrap();
        assert!(d.metas.contains("/T0"));
    }

    #[test]
    fn forward_reference_and_cycle() {
        let r = run("theory A = include B ❙ x : y ❙ y : type ❙ ❚ theory B = include A ❙ ❚");
        let kinds: Vec<StructureErrorKind> = r.errors.iter().map(|e| e.kind).collect();
        assert!(kinds.contains(&StructureErrorKind::IncludeCycle));
        assert!(kinds.contains(&StructureErrorKind::UnresolvedReference));
    }
}
