//! Relational navigation and term search over a checked [`World`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::check::{slot_term, World};
use crate::model::{alpha_eq, is_meta_name, Context, FileId, QName, SlotId, SourceRef, Substitution, Term};
use crate::termparse::{parse_text, NotationTable, ParseError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Relation {
    Includes,
    Declares,
    RefersTo,
    DependsOn,
}

impl Relation {
    pub const ALL: [Relation; 4] = [Relation::Includes, Relation::Declares, Relation::RefersTo, Relation::DependsOn];

    pub fn name(self) -> &'static str {
        match self {
            Relation::Includes => "includes",
            Relation::Declares => "declares",
            Relation::RefersTo => "refersTo",
            Relation::DependsOn => "dependsOn",
        }
    }
}

/// Tuples over names: theories are `T`, constants `T?c`, slots `T?c^tp`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationalIndex {
    pub tuples: BTreeMap<Relation, BTreeSet<(String, String)>>,
}

impl RelationalIndex {
    pub fn build(w: &World) -> Self {
        let mut ix = RelationalIndex::default();
        for th in w.order.iter().filter_map(|t| crate::structure::find_theory(&w.docs, t)) {
            for inc in &th.includes {
                ix.add(Relation::Includes, &th.name, &inc.theory);
            }
            for d in &th.declarations {
                ix.add(Relation::Declares, &th.name, QName::new(&th.name, &d.name).as_str());
            }
        }
        for (slot, r) in &w.results {
            let user = slot.constant.as_str();
            for c in slot_term(&r.elaborated).constants() {
                let declared = crate::structure::find_theory(&w.docs, c.theory()).is_some_and(|t| t.get(c.local()).is_some());
                if c != slot.constant && declared {
                    ix.add(Relation::RefersTo, user, c.as_str());
                }
            }
            for d in &r.dependencies {
                if w.results.contains_key(d) {
                    ix.add(Relation::DependsOn, &slot.to_string(), &d.to_string());
                }
            }
        }
        ix
    }

    fn add(&mut self, r: Relation, a: &str, b: &str) {
        self.tuples.entry(r).or_default().insert((a.to_string(), b.to_string()));
    }

    pub fn pairs(&self, r: Relation) -> BTreeSet<(String, String)> {
        self.tuples.get(&r).cloned().unwrap_or_default()
    }

    /// Everything `start` is related to under `expr`.
    pub fn related(&self, start: &str, expr: &RelExpr) -> BTreeSet<String> {
        expr.eval(self).into_iter().filter(|(a, _)| a == start).map(|(_, b)| b).collect()
    }
}

/// Relation algebra.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RelExpr {
    Base(Relation),
    Inverse(Box<RelExpr>),
    Union(Box<RelExpr>, Box<RelExpr>),
    Closure(Box<RelExpr>),
    /// Keeps pairs whose target lies in the theory.
    Restrict(Box<RelExpr>, String),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RelError {
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("malformed relation expression: {0}")]
    Syntax(String),
}

fn in_theory(name: &str, theory: &str) -> bool {
    name == theory || name.split_once('?').is_some_and(|(t, _)| t == theory)
}

impl RelExpr {
    pub fn eval(&self, ix: &RelationalIndex) -> BTreeSet<(String, String)> {
        match self {
            RelExpr::Base(r) => ix.pairs(*r),
            RelExpr::Inverse(e) => e.eval(ix).into_iter().map(|(a, b)| (b, a)).collect(),
            RelExpr::Union(a, b) => {
                let mut s = a.eval(ix);
                s.extend(b.eval(ix));
                s
            }
            RelExpr::Restrict(e, t) => e.eval(ix).into_iter().filter(|(_, b)| in_theory(b, t)).collect(),
            RelExpr::Closure(e) => {
                let base = e.eval(ix);
                let mut succ: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
                for (a, b) in &base {
                    succ.entry(a).or_default().push(b);
                }
                let mut out = BTreeSet::new();
                for a in succ.keys() {
                    let mut stack: Vec<&str> = succ[a].clone();
                    let mut seen = BTreeSet::new();
                    while let Some(x) = stack.pop() {
                        if seen.insert(x) {
                            out.insert((a.to_string(), x.to_string()));
                            stack.extend(succ.get(x).into_iter().flatten());
                        }
                    }
                }
                out
            }
        }
    }

    /// Reads `refersTo`, `inverse(e)`, `union(e,e)`, `closure(e)`, `restrict(e,T)`.
    pub fn parse(s: &str) -> Result<RelExpr, RelError> {
        let s = s.trim();
        let Some(open) = s.find('(') else {
            return Relation::ALL
                .iter()
                .find(|r| r.name().eq_ignore_ascii_case(s))
                .map(|r| RelExpr::Base(*r))
                .ok_or_else(|| RelError::UnknownRelation(s.to_string()));
        };
        if !s.ends_with(')') {
            return Err(RelError::Syntax(s.to_string()));
        }
        let op = s[..open].trim();
        let args = split_args(&s[open + 1..s.len() - 1]);
        match (op, args.as_slice()) {
            ("inverse", [a]) => Ok(RelExpr::Inverse(Box::new(RelExpr::parse(a)?))),
            ("closure", [a]) => Ok(RelExpr::Closure(Box::new(RelExpr::parse(a)?))),
            ("union", [a, b]) => Ok(RelExpr::Union(Box::new(RelExpr::parse(a)?), Box::new(RelExpr::parse(b)?))),
            ("restrict", [a, t]) => Ok(RelExpr::Restrict(Box::new(RelExpr::parse(a)?), t.trim().to_string())),
            _ => Err(RelError::Syntax(s.to_string())),
        }
    }
}

fn split_args(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0, 0);
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

impl fmt::Display for RelExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelExpr::Base(r) => f.write_str(r.name()),
            RelExpr::Inverse(e) => write!(f, "inverse({e})"),
            RelExpr::Union(a, b) => write!(f, "union({a},{b})"),
            RelExpr::Closure(e) => write!(f, "closure({e})"),
            RelExpr::Restrict(e, t) => write!(f, "restrict({e},{t})"),
        }
    }
}

// ---- term search

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub slot: SlotId,
    pub path: Vec<usize>,
    pub term: Term,
    /// The term's own reference, or that of its nearest visible ancestor.
    #[serde(rename = "ref", default, skip_serializing_if = "Option::is_none")]
    pub src: Option<SourceRef>,
    pub inferred: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<IndexEntry>", into = "Vec<IndexEntry>")]
pub struct TermIndex {
    pub entries: Vec<IndexEntry>,
    /// head key → entry positions
    by_head: BTreeMap<String, Vec<usize>>,
}

impl From<Vec<IndexEntry>> for TermIndex {
    fn from(entries: Vec<IndexEntry>) -> Self {
        TermIndex::from_entries(entries)
    }
}

impl From<TermIndex> for Vec<IndexEntry> {
    fn from(ix: TermIndex) -> Self {
        ix.entries
    }
}

fn head_key(t: &Term) -> String {
    match (t.as_const(), t.as_var(), t.as_complex()) {
        (Some(c), _, _) => format!("c{c}"),
        (_, Some(_), _) => "v".into(),
        (_, _, Some((h, _, args))) => {
            // applications are keyed by what is applied
            match args.first().and_then(|a| a.as_const()) {
                Some(c) => format!("a{h}/{c}"),
                None => format!("a{h}"),
            }
        }
        _ => String::new(),
    }
}

impl TermIndex {
    pub fn build(w: &World) -> Self {
        let mut entries = Vec::new();
        for (slot, r) in &w.results {
            let t = slot_term(&r.elaborated);
            let mut visible: Vec<Option<SourceRef>> = Vec::new();
            walk(t, &mut Vec::new(), &mut visible, &mut |path, sub, src| {
                entries.push(IndexEntry {
                    slot: slot.clone(),
                    path: path.to_vec(),
                    term: sub.clone(),
                    src,
                    inferred: sub.inferred,
                })
            });
        }
        TermIndex::from_entries(entries)
    }

    pub fn from_entries(entries: Vec<IndexEntry>) -> Self {
        let mut by_head: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            by_head.entry(head_key(&e.term)).or_default().push(i);
        }
        TermIndex { entries, by_head }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn search(&self, q: &SearchQuery) -> Vec<Hit> {
        let candidates: Box<dyn Iterator<Item = usize>> = if q.vars.iter().any(|v| q.pattern.as_var() == Some(v)) {
            Box::new(0..self.entries.len())
        } else {
            Box::new(self.by_head.get(&head_key(&q.pattern)).into_iter().flatten().copied())
        };
        // metas the parser left in the pattern are anonymous wildcards
        let mut vars = q.vars.clone();
        vars.extend(q.pattern.metas());
        let mut hits: Vec<Hit> = candidates
            .filter_map(|i| {
                let e = &self.entries[i];
                let mut sigma = match_pattern(&vars, &q.pattern, &e.term)?;
                sigma.retain(|k, _| q.vars.contains(k));
                Some(Hit::new(e, sigma))
            })
            .collect();
        sort_hits(&mut hits);
        hits
    }
}

fn walk(t: &Term, path: &mut Vec<usize>, visible: &mut Vec<Option<SourceRef>>, f: &mut impl FnMut(&[usize], &Term, Option<SourceRef>)) {
    let src = if t.inferred { None } else { t.src.clone() };
    let shown = src.clone().or_else(|| visible.iter().rev().flatten().next().cloned());
    f(path, t, shown);
    visible.push(src);
    for (i, c) in t.children().into_iter().enumerate() {
        path.push(i);
        walk(c, path, visible, f);
        path.pop();
    }
    visible.pop();
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub slot: SlotId,
    pub path: Vec<usize>,
    #[serde(rename = "ref", default, skip_serializing_if = "Option::is_none")]
    pub src: Option<SourceRef>,
    pub inferred: bool,
    pub substitution: Substitution,
}

impl Hit {
    fn new(e: &IndexEntry, substitution: Substitution) -> Self {
        Hit {
            slot: e.slot.clone(),
            path: e.path.clone(),
            src: e.src.clone(),
            inferred: e.inferred,
            substitution,
        }
    }
}

pub fn sort_hits(hits: &mut [Hit]) {
    hits.sort_by(|a, b| {
        let k = |h: &Hit| {
            (
                h.src.as_ref().map(|r| (r.file.clone(), r.start, r.end)),
                h.slot.clone(),
                h.path.clone(),
            )
        };
        k(a).cmp(&k(b))
    });
}

/// `$x1,…,$xn: E`
#[derive(Clone, Debug, PartialEq)]
pub struct SearchQuery {
    pub vars: Vec<String>,
    pub pattern: Term,
}

impl SearchQuery {
    pub fn parse(query: &str, table: &NotationTable) -> Result<SearchQuery, Vec<ParseError>> {
        let (head, body, offset) = match query.find(':') {
            Some(i) if query[..i].trim().is_empty() || query[..i].trim_start().starts_with('$') => (&query[..i], &query[i + 1..], i + 1),
            _ => ("", query, 0),
        };
        let vars: Vec<String> = head
            .split(',')
            .map(|v| v.trim().trim_start_matches('$').to_string())
            .filter(|v| !v.is_empty())
            .collect();
        let src = SourceRef::new(FileId::new("query"), offset, query.len());
        let r = parse_text(body, &src, table, &vars);
        if !r.errors.is_empty() {
            return Err(r.errors);
        }
        let pattern = match table.application_head() {
            Some(app) => collapse_metas(&r.term, app),
            None => r.term,
        };
        Ok(SearchQuery { vars, pattern })
    }
}

/// `X x1 … xn` for a parser meta `X` becomes plain `X`: the binder scope it
/// records does not matter to a wildcard.
fn collapse_metas(t: &Term, app: &QName) -> Term {
    if let Some((h, b, args)) = t.as_complex() {
        if h == app && b.is_empty() && args.first().and_then(|a| a.as_meta()).is_some() {
            return args[0].clone();
        }
    }
    let mut t = t.clone();
    for c in t.children_mut() {
        *c = collapse_metas(c, app);
    }
    t
}

/// One-way matching modulo alpha. Repeated variables must match
/// alpha-equal subterms.
pub fn match_pattern(vars: &[String], pattern: &Term, t: &Term) -> Option<Substitution> {
    let mut sigma = Substitution::new();
    go(vars, pattern, t, &mut Vec::new(), &mut sigma).then_some(sigma)
}

/// `bound` pairs pattern binder names with term binder names, innermost last.
fn go(vars: &[String], p: &Term, t: &Term, bound: &mut Vec<(String, String)>, sigma: &mut Substitution) -> bool {
    use crate::model::Node;
    match (&p.node, &t.node) {
        (Node::Var { name: x }, _) if !bound.iter().any(|(a, _)| a == x) && vars.contains(x) => {
            // the value must not mention variables bound inside the match,
            // unless it is an anonymous wildcard
            if !is_meta_name(x) && bound.iter().any(|(_, b)| t.has_free_var(b)) {
                return false;
            }
            match sigma.get(x) {
                Some(v) => alpha_eq(v, t),
                None => {
                    sigma.insert(x.clone(), t.clone());
                    true
                }
            }
        }
        (Node::Var { name: x }, Node::Var { name: y }) => match bound.iter().rev().find(|(a, b)| a == x || b == y) {
            Some((a, b)) => a == x && b == y,
            None => x == y,
        },
        (Node::Const { name: a }, Node::Const { name: b }) => a == b,
        (
            Node::Complex {
                head: h1,
                bound: b1,
                args: a1,
            },
            Node::Complex {
                head: h2,
                bound: b2,
                args: a2,
            },
        ) => {
            if h1 != h2 || b1.len() != b2.len() || a1.len() != a2.len() {
                return false;
            }
            let depth = bound.len();
            let ok = decls(vars, b1, b2, bound, sigma) && a1.iter().zip(a2).all(|(x, y)| go(vars, x, y, bound, sigma));
            bound.truncate(depth);
            ok
        }
        _ => false,
    }
}

fn decls(vars: &[String], b1: &Context, b2: &Context, bound: &mut Vec<(String, String)>, sigma: &mut Substitution) -> bool {
    for (d1, d2) in b1.iter().zip(b2.iter()) {
        let same = |x: &Option<Term>, y: &Option<Term>, bound: &mut Vec<(String, String)>, sigma: &mut Substitution| match (x, y) {
            (Some(x), Some(y)) => go(vars, x, y, bound, sigma),
            (None, None) => true,
            // an omitted binder type in the pattern matches anything
            (None, Some(_)) => true,
            _ => false,
        };
        if !same(&d1.ty, &d2.ty, bound, sigma) || !same(&d1.def, &d2.def, bound, sigma) {
            return false;
        }
        bound.push((d1.name.clone(), d2.name.clone()));
    }
    true
}
