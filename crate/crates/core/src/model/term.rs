//! Terms, contexts and the structure-preserving utilities on them.
//!
//! Equality on [`Term`] (the `PartialEq` impl) is structural: source references
//! and inferred-flags are ignored, bound variable names compare literally.
//! Use [`alpha_eq`] where binder names should not matter.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::source::SourceRef;

/// Meta-variable names start with this character, which the term lexer never
/// produces for an identifier.
pub const META_PREFIX: char = '/';

pub fn is_meta_name(name: &str) -> bool {
    name.starts_with(META_PREFIX)
}

/// A qualified constant name `Theory?local`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QName(String);

impl QName {
    pub fn new(theory: &str, local: &str) -> Self {
        QName(format!("{theory}?{local}"))
    }

    /// Parses `T?c`; a string without `?` is rejected.
    pub fn parse(s: &str) -> Option<Self> {
        let (t, c) = s.split_once('?')?;
        if t.is_empty() || c.is_empty() {
            return None;
        }
        Some(QName(s.to_string()))
    }

    pub fn theory(&self) -> &str {
        self.0.split_once('?').map(|(t, _)| t).unwrap_or("")
    }

    pub fn local(&self) -> &str {
        self.0.split_once('?').map(|(_, c)| c).unwrap_or(&self.0)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for QName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Const {
        name: QName,
    },
    Var {
        name: String,
    },
    Complex {
        head: QName,
        #[serde(default, skip_serializing_if = "Context::is_empty")]
        bound: Context,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        args: Vec<Term>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Term {
    #[serde(flatten)]
    pub node: Node,
    #[serde(rename = "ref", default, skip_serializing_if = "Option::is_none")]
    pub src: Option<SourceRef>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub inferred: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// One entry `name[:type][=definiens]` of a context.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VarDecl {
    pub name: String,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub ty: Option<Term>,
    #[serde(rename = "def", default, skip_serializing_if = "Option::is_none")]
    pub def: Option<Term>,
    #[serde(rename = "ref", default, skip_serializing_if = "Option::is_none")]
    pub src: Option<SourceRef>,
}

impl VarDecl {
    pub fn new(name: impl Into<String>, ty: Option<Term>) -> Self {
        VarDecl {
            name: name.into(),
            ty,
            def: None,
            src: None,
        }
    }
}

impl PartialEq for VarDecl {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.ty == other.ty && self.def == other.def
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Context(pub Vec<VarDecl>);

impl Context {
    pub fn empty() -> Self {
        Context(Vec::new())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, VarDecl> {
        self.0.iter()
    }

    pub fn push(&mut self, decl: VarDecl) {
        self.0.push(decl);
    }

    /// Innermost (last) declaration of `name`.
    pub fn lookup(&self, name: &str) -> Option<&VarDecl> {
        self.0.iter().rev().find(|d| d.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.lookup(name).is_some()
    }

    pub fn extended(&self, decl: VarDecl) -> Context {
        let mut c = self.clone();
        c.push(decl);
        c
    }

    /// Names declared twice in this context.
    pub fn duplicate_names(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.0
            .iter()
            .filter(|d| !seen.insert(d.name.as_str()))
            .map(|d| d.name.as_str())
            .collect()
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Node::Const { name: a }, Node::Const { name: b }) => a == b,
            (Node::Var { name: a }, Node::Var { name: b }) => a == b,
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
            ) => h1 == h2 && b1 == b2 && a1 == a2,
            _ => false,
        }
    }
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

/// Structural equality: refs and inferred-flags erased, binder names literal.
pub fn equals_structural(a: &Term, b: &Term) -> bool {
    a == b
}

impl Term {
    pub fn new(node: Node) -> Self {
        Term {
            node,
            src: None,
            inferred: false,
        }
    }

    pub fn constant(name: QName) -> Self {
        Term::new(Node::Const { name })
    }

    pub fn var(name: impl Into<String>) -> Self {
        Term::new(Node::Var { name: name.into() })
    }

    pub fn complex(head: QName, bound: Context, args: Vec<Term>) -> Self {
        Term::new(Node::Complex { head, bound, args })
    }

    pub fn app(head: QName, args: Vec<Term>) -> Self {
        Term::complex(head, Context::empty(), args)
    }

    pub fn with_ref(mut self, src: Option<SourceRef>) -> Self {
        self.src = src;
        self
    }

    pub fn with_inferred(mut self, inferred: bool) -> Self {
        self.inferred = inferred;
        self
    }

    pub fn as_const(&self) -> Option<&QName> {
        match &self.node {
            Node::Const { name } => Some(name),
            _ => None,
        }
    }

    pub fn as_var(&self) -> Option<&str> {
        match &self.node {
            Node::Var { name } => Some(name),
            _ => None,
        }
    }

    pub fn as_meta(&self) -> Option<&str> {
        self.as_var().filter(|n| is_meta_name(n))
    }

    pub fn as_complex(&self) -> Option<(&QName, &Context, &[Term])> {
        match &self.node {
            Node::Complex { head, bound, args } => Some((head, bound, args)),
            _ => None,
        }
    }

    /// The head constant of a complex term or the constant itself.
    pub fn head(&self) -> Option<&QName> {
        match &self.node {
            Node::Const { name } => Some(name),
            Node::Complex { head, .. } => Some(head),
            Node::Var { .. } => None,
        }
    }

    /// Direct subterms in a fixed order: each bound entry's type then
    /// definiens, followed by the arguments.
    pub fn children(&self) -> Vec<&Term> {
        match &self.node {
            Node::Complex { bound, args, .. } => {
                let mut out = Vec::new();
                for d in bound.iter() {
                    out.extend(d.ty.iter());
                    out.extend(d.def.iter());
                }
                out.extend(args.iter());
                out
            }
            _ => Vec::new(),
        }
    }

    pub fn children_mut(&mut self) -> Vec<&mut Term> {
        match &mut self.node {
            Node::Complex { bound, args, .. } => {
                let mut out = Vec::new();
                for d in bound.0.iter_mut() {
                    out.extend(d.ty.iter_mut());
                    out.extend(d.def.iter_mut());
                }
                out.extend(args.iter_mut());
                out
            }
            _ => Vec::new(),
        }
    }

    pub fn at_path(&self, path: &[usize]) -> Option<&Term> {
        let mut t = self;
        for &i in path {
            t = *t.children().get(i)?;
        }
        Some(t)
    }

    /// Binders in scope at `path` (outermost first), excluding ambient context.
    pub fn binders_along(&self, path: &[usize]) -> Context {
        let mut ctx = Context::empty();
        let mut t = self;
        for &i in path {
            let Node::Complex { bound, .. } = &t.node else {
                break;
            };
            // child i is inside entry j's type/def, or is an argument
            let mut k = 0;
            let mut in_entry = None;
            for (j, d) in bound.iter().enumerate() {
                let n = d.ty.is_some() as usize + d.def.is_some() as usize;
                if i < k + n {
                    in_entry = Some(j);
                    break;
                }
                k += n;
            }
            let visible = in_entry.unwrap_or(bound.len());
            for d in bound.iter().take(visible) {
                ctx.push(d.clone());
            }
            match t.children().get(i) {
                Some(c) => t = c,
                None => break,
            }
        }
        ctx
    }

    /// Pre-order traversal yielding `(path, subterm)` for every node.
    pub fn subterms(&self) -> Vec<(Vec<usize>, &Term)> {
        let mut out = Vec::new();
        fn go<'a>(t: &'a Term, path: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, &'a Term)>) {
            out.push((path.clone(), t));
            for (i, c) in t.children().into_iter().enumerate() {
                path.push(i);
                go(c, path, out);
                path.pop();
            }
        }
        go(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound_names: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match &self.node {
            Node::Const { .. } => {}
            Node::Var { name } => {
                if !bound_names.contains(name) {
                    out.insert(name.clone());
                }
            }
            Node::Complex { bound, args, .. } => {
                let mark = bound_names.len();
                for d in bound.iter() {
                    if let Some(ty) = &d.ty {
                        ty.collect_free(bound_names, out);
                    }
                    if let Some(df) = &d.def {
                        df.collect_free(bound_names, out);
                    }
                    bound_names.push(d.name.clone());
                }
                for a in args {
                    a.collect_free(bound_names, out);
                }
                bound_names.truncate(mark);
            }
        }
    }

    pub fn has_free_var(&self, name: &str) -> bool {
        self.free_vars().contains(name)
    }

    /// Meta-variables occurring anywhere in the term.
    pub fn metas(&self) -> BTreeSet<String> {
        self.free_vars().into_iter().filter(|n| is_meta_name(n)).collect()
    }

    /// Constants occurring anywhere, heads included.
    pub fn constants(&self) -> BTreeSet<QName> {
        let mut out = BTreeSet::new();
        for (_, t) in self.subterms() {
            if let Some(h) = t.head() {
                out.insert(h.clone());
            }
        }
        out
    }

    pub fn map_refs(&mut self, f: &mut impl FnMut(&SourceRef) -> SourceRef) {
        if let Some(r) = &self.src {
            self.src = Some(f(r));
        }
        if let Node::Complex { bound, .. } = &mut self.node {
            for d in bound.0.iter_mut() {
                if let Some(r) = &d.src {
                    d.src = Some(f(r));
                }
            }
        }
        for c in self.children_mut() {
            c.map_refs(f);
        }
    }

    pub fn shift_refs(&mut self, delta: isize) {
        if delta != 0 {
            self.map_refs(&mut |r| r.shifted(delta));
        }
    }

    /// Marks every node inferred and gives it the supplied reference.
    pub fn mark_inferred(&mut self, src: Option<&SourceRef>) {
        self.inferred = true;
        self.src = src.cloned();
        if let Node::Complex { bound, .. } = &mut self.node {
            for d in bound.0.iter_mut() {
                d.src = src.cloned();
            }
        }
        for c in self.children_mut() {
            c.mark_inferred(src);
        }
    }

    pub fn contains_inferred(&self) -> bool {
        self.subterms().iter().any(|(_, t)| t.inferred)
    }

    /// Compact canonical text of the structure, used for hashing.
    pub fn structural_key(&self) -> String {
        let mut s = String::new();
        self.write_key(&mut s);
        s
    }

    fn write_key(&self, out: &mut String) {
        match &self.node {
            Node::Const { name } => {
                out.push('c');
                out.push_str(name.as_str());
                out.push(';');
            }
            Node::Var { name } => {
                out.push('v');
                out.push_str(name);
                out.push(';');
            }
            Node::Complex { head, bound, args } => {
                out.push('(');
                out.push_str(head.as_str());
                out.push('[');
                for d in bound.iter() {
                    out.push_str(&d.name);
                    if let Some(t) = &d.ty {
                        out.push(':');
                        t.write_key(out);
                    }
                    if let Some(t) = &d.def {
                        out.push('=');
                        t.write_key(out);
                    }
                    out.push(',');
                }
                out.push(']');
                for a in args {
                    a.write_key(out);
                }
                out.push(')');
            }
        }
    }

    pub fn structural_hash(&self) -> String {
        hash_str(&self.structural_key())
    }
}

pub fn hash_str(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

/// Picks `base1`, `base2`, … (stripping an existing numeric suffix) until
/// `taken` rejects none.
pub fn fresh_name(base: &str, taken: impl Fn(&str) -> bool) -> String {
    let stem = base.trim_end_matches(|c: char| c.is_ascii_digit());
    let stem = if stem.is_empty() { base } else { stem };
    (1..).map(|i| format!("{stem}{i}")).find(|n| !taken(n)).expect("unbounded")
}

#[derive(Clone)]
enum Replacement<'a> {
    With(&'a Term),
    Rename(String),
}

pub type Substitution = BTreeMap<String, Term>;

/// Capture-avoiding simultaneous substitution.
///
/// Unchanged subterms keep their references; substituted-in subterms carry the
/// references of the substitution's values. A binder that would capture a free
/// variable of a value is renamed with a numeric suffix.
pub fn substitute(t: &Term, sigma: &Substitution) -> Term {
    let map: BTreeMap<String, Replacement> = sigma.iter().map(|(k, v)| (k.clone(), Replacement::With(v))).collect();
    subst_in(t, &map)
}

fn replacement_free(r: &Replacement) -> BTreeSet<String> {
    match r {
        Replacement::With(t) => t.free_vars(),
        Replacement::Rename(n) => std::iter::once(n.clone()).collect(),
    }
}

fn subst_in(t: &Term, map: &BTreeMap<String, Replacement>) -> Term {
    if map.is_empty() {
        return t.clone();
    }
    match &t.node {
        Node::Const { .. } => t.clone(),
        Node::Var { name } => match map.get(name) {
            Some(Replacement::With(v)) => (*v).clone(),
            Some(Replacement::Rename(n)) => Term {
                node: Node::Var { name: n.clone() },
                src: t.src.clone(),
                inferred: t.inferred,
            },
            None => t.clone(),
        },
        Node::Complex { head, bound, args } => {
            let mut map = map.clone();
            let mut new_bound = Context::empty();
            // free names of everything that may be substituted in, plus the
            // remaining scope, determine which binders need renaming
            let scope_free: BTreeSet<String> = {
                let mut s = BTreeSet::new();
                for a in args {
                    s.extend(a.free_vars());
                }
                for d in bound.iter() {
                    s.extend(d.ty.iter().flat_map(|t| t.free_vars()));
                    s.extend(d.def.iter().flat_map(|t| t.free_vars()));
                }
                s
            };
            for d in bound.iter() {
                let ty = d.ty.as_ref().map(|x| subst_in(x, &map));
                let df = d.def.as_ref().map(|x| subst_in(x, &map));
                map.remove(&d.name);
                let incoming: BTreeSet<String> = map
                    .iter()
                    .filter(|(k, _)| scope_free.contains(*k))
                    .flat_map(|(_, r)| replacement_free(r))
                    .collect();
                let mut name = d.name.clone();
                if incoming.contains(&name) {
                    let later: BTreeSet<&str> = bound.iter().map(|e| e.name.as_str()).collect();
                    name = fresh_name(&d.name, |n| incoming.contains(n) || scope_free.contains(n) || later.contains(n));
                    map.insert(d.name.clone(), Replacement::Rename(name.clone()));
                }
                new_bound.push(VarDecl {
                    name,
                    ty,
                    def: df,
                    src: d.src.clone(),
                });
            }
            let args = args.iter().map(|a| subst_in(a, &map)).collect();
            Term {
                node: Node::Complex {
                    head: head.clone(),
                    bound: new_bound,
                    args,
                },
                src: t.src.clone(),
                inferred: t.inferred,
            }
        }
    }
}

pub fn substitute1(t: &Term, name: &str, value: &Term) -> Term {
    let mut s = Substitution::new();
    s.insert(name.to_string(), value.clone());
    substitute(t, &s)
}

/// Equality modulo renaming of bound variables.
pub fn alpha_eq(a: &Term, b: &Term) -> bool {
    alpha_eq_in(a, b, &mut Vec::new(), &mut Vec::new())
}

fn alpha_eq_in(a: &Term, b: &Term, ea: &mut Vec<String>, eb: &mut Vec<String>) -> bool {
    match (&a.node, &b.node) {
        (Node::Const { name: x }, Node::Const { name: y }) => x == y,
        (Node::Var { name: x }, Node::Var { name: y }) => {
            let ix = ea.iter().rposition(|n| n == x);
            let iy = eb.iter().rposition(|n| n == y);
            match (ix, iy) {
                (Some(i), Some(j)) => ea.len() - i == eb.len() - j,
                (None, None) => x == y,
                _ => false,
            }
        }
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
            let (ma, mb) = (ea.len(), eb.len());
            let mut ok = true;
            for (d1, d2) in b1.iter().zip(b2.iter()) {
                ok = ok && opt_alpha(d1.ty.as_ref(), d2.ty.as_ref(), ea, eb) && opt_alpha(d1.def.as_ref(), d2.def.as_ref(), ea, eb);
                ea.push(d1.name.clone());
                eb.push(d2.name.clone());
            }
            ok = ok && a1.iter().zip(a2.iter()).all(|(x, y)| alpha_eq_in(x, y, ea, eb));
            ea.truncate(ma);
            eb.truncate(mb);
            ok
        }
        _ => false,
    }
}

fn opt_alpha(a: Option<&Term>, b: Option<&Term>, ea: &mut Vec<String>, eb: &mut Vec<String>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => alpha_eq_in(x, y, ea, eb),
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no subterm covers the region")]
pub struct NotFound;

/// The deepest subterm whose reference contains `region`, with its path.
pub fn subterm_at<'a>(t: &'a Term, region: &SourceRef) -> Result<(&'a Term, Vec<usize>), NotFound> {
    fn go<'a>(t: &'a Term, region: &SourceRef, path: &mut Vec<usize>) -> Option<(&'a Term, Vec<usize>)> {
        let here = t.src.as_ref().is_some_and(|r| r.contains(region));
        for (i, c) in t.children().into_iter().enumerate() {
            path.push(i);
            let found = go(c, region, path);
            path.pop();
            if found.is_some() {
                return found;
            }
        }
        here.then(|| (t, path.clone()))
    }
    match &t.src {
        Some(r) if r.contains(region) => go(t, region, &mut Vec::new()).ok_or(NotFound),
        _ => Err(NotFound),
    }
}
