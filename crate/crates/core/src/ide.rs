//! Position-based queries over a checked world: what is at an offset, its
//! type, where it is declared, what may be typed there.

use serde::{Deserialize, Serialize};

use crate::check::World;
use crate::engine::{solve_in, Environment, HoleGoal, RuleSet};
use crate::index::{RelExpr, RelationalIndex, SearchQuery};
use crate::lf::{hints_for, lf};
use crate::model::{Component, Context, FileId, Judgment, QName, SlotId, SourceRef, Term, VarDecl};
use crate::render::{render, RenderOptions};
use crate::surface::Document;

/// A subterm found at a source position.
#[derive(Clone, Debug)]
pub struct Site {
    pub slot: SlotId,
    /// Path into the slot's elaborated term. For a binder this is the path of
    /// the binding node.
    pub path: Vec<usize>,
    pub term: Term,
    /// Variables in scope, including a binder's own variable.
    pub ctx: Context,
    pub src: SourceRef,
    /// Whether the site is a variable's binding occurrence.
    pub binder: bool,
}

fn document<'w>(w: &'w World, file: &str) -> Option<&'w Document> {
    w.docs.iter().find(|d| d.file.as_str() == file)
}

/// The slot whose source contains `offset`.
pub fn slot_at(w: &World, file: &str, offset: usize) -> Option<SlotId> {
    document(w, file)?
        .units()
        .find(|u| u.src.start <= offset && offset <= u.src.end)
        .map(|u| u.slot.clone())
}

/// The innermost written subterm at `offset`. Inferred parts have no
/// position of their own and are never returned.
pub fn site_at(w: &World, file: &str, offset: usize) -> Option<Site> {
    let slot = slot_at(w, file, offset)?;
    let root = w.elaborated(&slot)?;
    let region = SourceRef::new(FileId::new(file), offset, offset);
    fn go(t: &Term, region: &SourceRef, path: &mut Vec<usize>, best: &mut Option<(Vec<usize>, Option<usize>)>) {
        if t.inferred || !t.src.as_ref().is_some_and(|r| covers(r, region)) {
            return;
        }
        *best = Some((path.clone(), None));
        if let Some((_, bound, _)) = t.as_complex() {
            for (j, d) in bound.iter().enumerate() {
                if d.src.as_ref().is_some_and(|r| covers(r, region) && r.len() == d.name.len()) {
                    *best = Some((path.clone(), Some(j)));
                }
            }
        }
        for (i, c) in t.children().into_iter().enumerate() {
            path.push(i);
            go(c, region, path, best);
            path.pop();
        }
    }
    let mut best = None;
    go(root, &region, &mut Vec::new(), &mut best);
    let (mut path, binder) = best?;
    if binder.is_none() {
        path = lift_operator(root, path);
    }
    let node = root.at_path(&path)?;
    let mut ctx = root.binders_along(&path);
    match binder {
        Some(j) => {
            let (_, bound, _) = node.as_complex()?;
            for d in bound.iter().take(j + 1) {
                ctx.push(d.clone());
            }
            let d = &bound.0[j];
            Some(Site {
                slot,
                path,
                term: Term::var(d.name.clone()).with_ref(d.src.clone()),
                ctx,
                src: d.src.clone()?,
                binder: true,
            })
        }
        None => Some(Site {
            slot,
            path,
            src: node.src.clone()?,
            term: node.clone(),
            ctx,
            binder: false,
        }),
    }
}

/// An infix or postfix operator token stands for its whole application.
fn lift_operator(root: &Term, path: Vec<usize>) -> Vec<usize> {
    let Some((&0, parent)) = path.split_last() else { return path };
    let (Some(p), Some(c)) = (root.at_path(parent), root.at_path(&path)) else {
        return path;
    };
    let is_app = p.as_complex().is_some_and(|(h, b, _)| *h == lf().apply && b.is_empty());
    match (&p.src, &c.src) {
        (Some(pr), Some(cr)) if is_app && c.as_const().is_some() && pr.start < cr.start => parent.to_vec(),
        _ => path,
    }
}

/// `r` covers an empty region at its end too, so a cursor right after a
/// word still finds the word.
fn covers(r: &SourceRef, region: &SourceRef) -> bool {
    r.file == region.file && r.start <= region.start && region.end <= r.end && !(r.is_empty() && region.is_empty())
}

/// The source character at `offset`, as far as the document records text.
fn char_at(w: &World, file: &str, offset: usize) -> Option<char> {
    let doc = document(w, file)?;
    for th in &doc.theories {
        for d in &th.declarations {
            if d.name_ref.start <= offset && offset < d.name_ref.end {
                return d.name[offset - d.name_ref.start..].chars().next();
            }
            for u in d.units() {
                if u.src.start <= offset && offset < u.src.end {
                    return u.text.get(offset - u.src.start..)?.chars().next();
                }
            }
        }
    }
    None
}

/// The declaration whose name is at `offset`.
pub fn declaration_name_at(w: &World, file: &str, offset: usize) -> Option<QName> {
    let doc = document(w, file)?;
    for th in &doc.theories {
        for d in &th.declarations {
            if d.name_ref.start <= offset && offset < d.name_ref.end.max(d.name_ref.start + 1) {
                return Some(QName::new(&th.name, &d.name));
            }
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeInfo {
    #[serde(rename = "type")]
    pub rendered: String,
    pub term: Term,
}

fn declared_type(w: &World, c: &QName) -> Option<Term> {
    w.elaborated(&SlotId::tp(c.clone())).cloned()
}

/// The type of what is at `offset`: a variable's declared (possibly
/// inferred) type, a constant's declared type, or else the type the rules
/// infer for the subterm in its context.
pub fn type_at(w: &World, rules: &RuleSet, file: &str, offset: usize) -> Option<TypeInfo> {
    if char_at(w, file, offset).is_none_or(char::is_whitespace) {
        return None;
    }
    let (theory, ty) = match declaration_name_at(w, file, offset) {
        Some(c) => (c.theory().to_string(), declared_type(w, &c)?),
        None => {
            let s = site_at(w, file, offset)?;
            let theory = s.slot.constant.theory().to_string();
            let ty = if let Some(x) = s.term.as_var() {
                s.ctx.lookup(x)?.ty.clone()?
            } else if let Some(c) = s.term.as_const() {
                declared_type(w, c)?
            } else {
                infer(w, rules, &s)?
            };
            (theory, ty)
        }
    };
    let table = w.table(&theory)?;
    Some(TypeInfo {
        rendered: render(&ty, table, RenderOptions::source()),
        term: ty,
    })
}

fn infer(w: &World, rules: &RuleSet, s: &Site) -> Option<Term> {
    let theory = s.slot.constant.theory();
    let meta = "/T";
    let metas = Context(vec![VarDecl::new(meta, None)]);
    let j = Judgment::Typing {
        theory: theory.to_string(),
        term: s.term.clone(),
        ty: Term::var(meta),
    };
    let mut env = w.env_for(theory, Some(s.slot.constant.local()));
    let r = solve_in(theory, &s.ctx, &metas, &j, rules, &mut env);
    let ty = r.substitution.get(meta)?.clone();
    (r.is_ok() && ty.metas().is_empty()).then_some(ty)
}

/// Where the constant at `offset` is declared.
pub fn definition_at(w: &World, file: &str, offset: usize) -> Option<SourceRef> {
    let c = match declaration_name_at(w, file, offset) {
        Some(c) => c,
        None => site_at(w, file, offset)?.term.as_const()?.clone(),
    };
    declaration_ref(w, &c)
}

pub fn declaration_ref(w: &World, c: &QName) -> Option<SourceRef> {
    let th = crate::structure::find_theory(&w.docs, c.theory())?;
    Some(th.get(c.local())?.src.clone())
}

/// Where an index name (`T`, `T?c` or `T?c^tp`) lives in the sources.
pub fn name_ref(w: &World, name: &str) -> Option<SourceRef> {
    let (base, part) = match name.rsplit_once('^') {
        Some((b, p)) => (b, Some(p)),
        None => (name, None),
    };
    match QName::parse(base) {
        Some(c) => {
            let d = crate::structure::find_theory(&w.docs, c.theory())?.get(c.local())?;
            match part {
                Some(p) => {
                    let comp = if p == Component::Type.tag() {
                        Component::Type
                    } else {
                        Component::Definiens
                    };
                    Some(d.unit(comp)?.src.clone())
                }
                None => Some(d.src.clone()),
            }
        }
        None => Some(crate::structure::find_theory(&w.docs, base)?.src.clone()),
    }
}

/// The index name standing at `offset`: a constant occurrence or a
/// declaration name.
pub fn name_at(w: &World, file: &str, offset: usize) -> Option<String> {
    if let Some(c) = declaration_name_at(w, file, offset) {
        return Some(c.to_string());
    }
    if let Some(c) = site_at(w, file, offset).and_then(|s| s.term.as_const().cloned()) {
        return Some(c.to_string());
    }
    let doc = document(w, file)?;
    doc.theories
        .iter()
        .find(|t| t.name_ref.start <= offset && offset < t.name_ref.end)
        .map(|t| t.name.clone())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub name: String,
    #[serde(rename = "ref", default, skip_serializing_if = "Option::is_none")]
    pub src: Option<SourceRef>,
}

/// The names related to the one at `offset`, with their positions.
pub fn related_at(w: &World, ix: &RelationalIndex, file: &str, offset: usize, expr: &RelExpr) -> Option<Vec<Location>> {
    let start = name_at(w, file, offset)?;
    Some(
        ix.related(&start, expr)
            .into_iter()
            .map(|name| Location {
                src: name_ref(w, &name),
                name,
            })
            .collect(),
    )
}

/// Double-click selection: the smallest written subterm containing the range.
pub fn subterm_range(w: &World, file: &str, start: usize, end: usize) -> Option<SourceRef> {
    let slot = slot_at(w, file, start)?;
    let root = w.elaborated(&slot)?;
    let region = SourceRef::new(FileId::new(file), start, end);
    let mut best: Option<(Vec<usize>, usize)> = None;
    for (path, t) in root.subterms() {
        if t.inferred {
            continue;
        }
        if let Some(r) = &t.src {
            if r.contains(&region) && best.as_ref().is_none_or(|(_, len)| r.len() < *len) {
                best = Some((path, r.len()));
            }
        }
    }
    let path = lift_operator(root, best?.0);
    root.at_path(&path)?.src.clone()
}

/// Parses a search query with the notations of `theory`, or else of the
/// first theory, latest in dependency order, that accepts it.
pub fn parse_query(w: &World, query: &str, theory: Option<&str>) -> Result<SearchQuery, String> {
    let theories: Vec<&str> = match theory {
        Some(t) => vec![t],
        None => w.order.iter().rev().map(String::as_str).collect(),
    };
    let mut first_error = None;
    for th in theories {
        let Some(table) = w.table(th) else { continue };
        match SearchQuery::parse(query, table) {
            Ok(q) => return Ok(q),
            Err(errs) => {
                first_error.get_or_insert_with(|| errs.iter().map(|e| e.message.clone()).collect::<Vec<_>>().join("; "));
            }
        }
    }
    Err(first_error.unwrap_or_else(|| match theory {
        Some(t) => format!("unknown theory `{t}`"),
        None => "no theory to parse the query in".into(),
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemKind {
    Hint,
    Scope,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub label: String,
    pub kind: ItemKind,
    #[serde(rename = "insertText")]
    pub insert_text: String,
    #[serde(rename = "remainingGoals", default, skip_serializing_if = "Option::is_none")]
    pub remaining_goals: Option<usize>,
    /// The hole the hint fills.
    #[serde(rename = "ref", default, skip_serializing_if = "Option::is_none")]
    pub src: Option<SourceRef>,
}

/// Hints for the enclosing hole, if any, followed by every name in scope.
pub fn completions_at(w: &World, rules: &RuleSet, file: &str, offset: usize) -> Vec<Item> {
    let Some(slot) = slot_at(w, file, offset) else {
        return Vec::new();
    };
    let theory = slot.constant.theory().to_string();
    let mut env = w.env_for(&theory, Some(slot.constant.local()));
    let mut out = Vec::new();
    let site = site_at(w, file, offset);
    if let (Some(s), Some(root)) = (&site, w.elaborated(&slot)) {
        let n = lf();
        // nearest hole on the way from the site to the root
        let hole = (0..=s.path.len()).rev().find_map(|k| {
            let t = root.at_path(&s.path[..k])?;
            let (h, b, args) = t.as_complex()?;
            (*h == n.hole && b.is_empty() && args.len() == 1).then(|| (k, t))
        });
        if let Some((k, t)) = hole {
            let goal = HoleGoal {
                ctx: root.binders_along(&s.path[..k]),
                expected: t.children()[0].clone(),
                theory: theory.clone(),
            };
            for h in hints_for(&mut env, rules, &goal) {
                out.push(Item {
                    label: h.head.clone(),
                    kind: ItemKind::Hint,
                    insert_text: h.rendered.clone(),
                    remaining_goals: Some(h.remaining_goals),
                    src: t.src.clone(),
                });
            }
        }
    }
    let mut scope: Vec<String> = site.map(|s| s.ctx.iter().map(|d| d.name.clone()).collect()).unwrap_or_default();
    scope.reverse();
    scope.extend(env.visible().into_iter().map(|c| c.local().to_string()));
    let mut seen = std::collections::BTreeSet::new();
    for name in scope {
        if seen.insert(name.clone()) {
            out.push(Item {
                label: name.clone(),
                kind: ItemKind::Scope,
                insert_text: name,
                remaining_goals: None,
                src: None,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests;
