//! Notation-based rendering of terms, with a map from output ranges to
//! subterm paths.

use serde::{Deserialize, Serialize};

use crate::model::{is_meta_name, Assoc, Fixity, Marker, Notation, QName, Term, VarDecl};
use crate::termparse::NotationTable;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderOptions {
    #[serde(rename = "showInferred")]
    pub show_inferred: bool,
}

impl RenderOptions {
    pub fn source() -> Self {
        RenderOptions { show_inferred: false }
    }

    pub fn full() -> Self {
        RenderOptions { show_inferred: true }
    }
}

/// A rendered subterm: byte range in the output and child-index path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub path: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rendered {
    pub text: String,
    pub spans: Vec<Span>,
}

impl Rendered {
    /// Path of the innermost subterm covering `offset`.
    pub fn path_at(&self, offset: usize) -> Option<&[usize]> {
        self.spans
            .iter()
            .filter(|s| s.start <= offset && offset < s.end)
            .max_by_key(|s| s.path.len())
            .map(|s| s.path.as_slice())
    }
}

pub fn render(t: &Term, table: &NotationTable, opts: RenderOptions) -> String {
    render_with_map(t, table, opts).text
}

pub fn render_with_map(t: &Term, table: &NotationTable, opts: RenderOptions) -> Rendered {
    let r = Renderer { table, opts };
    let doc = r.term(t, Slot::Free { tail: true });
    let mut out = Rendered {
        text: String::new(),
        spans: Vec::new(),
    };
    flatten(&doc, &mut Vec::new(), &mut out);
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Level {
    Atom,
    /// Juxtaposition, or a prefix notation whose last argument is an atom.
    App,
    Infix(i32),
    /// Extends maximally to the right.
    Binder,
}

#[derive(Clone, Copy, Debug)]
enum Slot<'q> {
    /// Delimited on the right, or at the end of the enclosing text if `tail`.
    Free {
        tail: bool,
    },
    Atom {
        tail: bool,
    },
    Left {
        prec: i32,
        op: &'q QName,
    },
    Right {
        prec: i32,
        op: &'q QName,
        right: bool,
        tail: bool,
    },
}

#[derive(Clone, Debug)]
enum Seg {
    Text(String),
    Node(usize, Doc),
}

#[derive(Clone, Debug)]
struct Doc {
    segs: Vec<Seg>,
    text: String,
    level: Level,
    op: Option<QName>,
}

impl Doc {
    fn text(s: impl Into<String>) -> Doc {
        let s = s.into();
        Doc {
            segs: vec![Seg::Text(s.clone())],
            text: s,
            level: Level::Atom,
            op: None,
        }
    }

    fn new(segs: Vec<Seg>, level: Level, op: Option<QName>) -> Doc {
        let mut text = String::new();
        for s in &segs {
            match s {
                Seg::Text(t) => text.push_str(t),
                Seg::Node(_, d) => text.push_str(&d.text),
            }
        }
        Doc { segs, text, level, op }
    }

    fn parenthesized(self) -> Doc {
        let inner = self.segs;
        let mut segs = vec![Seg::Text("(".into())];
        segs.extend(inner);
        segs.push(Seg::Text(")".into()));
        Doc::new(segs, Level::Atom, None)
    }
}

fn flatten(doc: &Doc, path: &mut Vec<usize>, out: &mut Rendered) {
    let start = out.text.len();
    for s in &doc.segs {
        match s {
            Seg::Text(t) => out.text.push_str(t),
            Seg::Node(i, d) => {
                path.push(*i);
                flatten(d, path, out);
                path.pop();
            }
        }
    }
    out.spans.push(Span {
        start,
        end: out.text.len(),
        path: path.clone(),
    });
}

fn is_symbolic(d: &str) -> bool {
    !d.chars().all(|c| c.is_alphanumeric() || c == '_')
}

enum Item {
    Open(String),
    Close(String),
    Word(String),
    Part(Vec<Seg>),
}

/// Joins notation pieces: no space after an opening symbol or before a
/// closing one, single spaces elsewhere.
fn join(items: Vec<Item>) -> Vec<Seg> {
    let mut out: Vec<Seg> = Vec::new();
    let mut prev_open = true;
    for it in items {
        let (glue, segs, open) = match it {
            Item::Open(s) => (false, vec![Seg::Text(s)], true),
            Item::Close(s) => (true, vec![Seg::Text(s)], false),
            Item::Word(s) => (false, vec![Seg::Text(s)], false),
            Item::Part(segs) => (false, segs, false),
        };
        if !out.is_empty() && !prev_open && !glue {
            out.push(Seg::Text(" ".into()));
        }
        out.extend(segs);
        prev_open = open;
    }
    out
}

struct Renderer<'a> {
    table: &'a NotationTable,
    opts: RenderOptions,
}

impl<'a> Renderer<'a> {
    fn app_prec(&self) -> i32 {
        self.table.application_precedence().min(1000)
    }

    fn fits(&self, d: &Doc, slot: Slot) -> bool {
        let lv = match d.level {
            Level::Atom => return true,
            Level::Binder => {
                return match slot {
                    Slot::Free { tail } | Slot::Atom { tail } | Slot::Right { tail, .. } => tail,
                    Slot::Left { .. } => false,
                }
            }
            Level::App => self.app_prec(),
            Level::Infix(p) => p,
        };
        match slot {
            Slot::Free { .. } => true,
            Slot::Atom { .. } => false,
            Slot::Left { prec, op } => lv > prec || (lv == prec && d.op.as_ref() == Some(op) && !self.right_assoc(op)),
            Slot::Right { prec, op, right, .. } => lv > prec || (lv == prec && d.op.as_ref() == Some(op) && right),
        }
    }

    fn right_assoc(&self, op: &QName) -> bool {
        self.table.notation_of(op).is_some_and(|n| n.assoc == Assoc::Right)
    }

    fn term(&self, t: &Term, slot: Slot) -> Doc {
        let d = self.raw(t, slot);
        if self.fits(&d, slot) {
            d
        } else {
            d.parenthesized()
        }
    }

    fn name(&self, c: &QName) -> String {
        let same = self.table.resolve(c.local());
        if same.is_empty() || (same.len() == 1 && same[0].name == *c) {
            c.local().to_string()
        } else {
            c.to_string()
        }
    }

    fn is_meta_site(&self, t: &Term) -> bool {
        if t.as_meta().is_some() {
            return true;
        }
        match (t.as_complex(), self.table.application_head()) {
            (Some((h, b, args)), Some(app)) => h == app && b.is_empty() && args.first().and_then(|a| a.as_var()).is_some_and(is_meta_name),
            _ => false,
        }
    }

    fn show_binder_type(&self, ty: &Term) -> bool {
        (self.opts.show_inferred || !ty.inferred) && !self.is_meta_site(ty)
    }

    fn raw(&self, t: &Term, slot: Slot) -> Doc {
        if let Some(v) = t.as_var() {
            return Doc::text(v);
        }
        if let Some(c) = t.as_const() {
            if let Some(n) = self.table.notation_of(c) {
                if n.arity() == 0 && !n.binds() {
                    let ds: Vec<&str> = n.delimiters().collect();
                    if !ds.is_empty() {
                        return Doc::text(ds.join(" "));
                    }
                }
            }
            return Doc::text(self.name(c));
        }
        let (h, bound, args) = t.as_complex().unwrap();
        let app = self.table.application_head();
        if Some(h) == app && bound.is_empty() && !args.is_empty() {
            return self.application(&args[0], &args[1..], slot);
        }
        if let Some(d) = self.arrow_sugar(t, slot) {
            return d;
        }
        match self.table.get(h).and_then(|e| e.notation.as_ref().map(|n| (e, n))) {
            Some((_, n)) if self.notation_fits(n, bound.len(), args.len()) => {
                if n.var_count() > 0 && bound.len() > 1 && !n.significant().any(|m| matches!(m, Marker::Var { sequence: true, .. })) {
                    // one variable per occurrence: render nested
                    let mut inner = bound.clone();
                    let first = inner.0.remove(0);
                    let nested = Term::complex(
                        h.clone(),
                        crate::model::Context(vec![first]),
                        vec![Term::complex(h.clone(), inner, args.to_vec())],
                    );
                    return self.raw(&nested, slot);
                }
                self.notation(h, n, bound.iter().collect(), args, 0, slot)
            }
            _ => self.generic(h, bound.iter().collect(), args),
        }
    }

    fn notation_fits(&self, n: &Notation, nbound: usize, nargs: usize) -> bool {
        let seq = n.has_sequence_arg();
        (n.var_count() == 0) == (nbound == 0) && (nargs == n.arity() || (seq && nargs >= n.arity().saturating_sub(1)))
    }

    fn arrow_sugar(&self, t: &Term, slot: Slot) -> Option<Doc> {
        let (h, bound, args) = t.as_complex()?;
        if h.local() != "Pi" || bound.len() != 1 || args.len() != 1 {
            return None;
        }
        let d = &bound.0[0];
        if !d.name.starts_with('_') || args[0].has_free_var(&d.name) {
            return None;
        }
        let arrow = QName::new(h.theory(), "arrow");
        let n = self.table.notation_of(&arrow)?;
        let ty = d.ty.as_ref()?;
        let fake = vec![ty.clone(), args[0].clone()];
        let mut doc = self.notation(&arrow, n, Vec::new(), &fake, 0, slot);
        // children of Pi are (binder type, body)
        renumber(&mut doc, &[0, 1]);
        Some(doc)
    }

    fn generic(&self, h: &QName, bound: Vec<&VarDecl>, args: &[Term]) -> Doc {
        let mut segs = vec![Seg::Text(self.name(h))];
        let mut idx = 0;
        if !bound.is_empty() {
            segs.push(Seg::Text("[".into()));
            for (j, d) in bound.iter().enumerate() {
                if j > 0 {
                    segs.push(Seg::Text(",".into()));
                }
                segs.push(Seg::Text(d.name.clone()));
                if let Some(ty) = &d.ty {
                    segs.push(Seg::Text(":".into()));
                    segs.push(Seg::Node(idx, self.term(ty, Slot::Free { tail: true })));
                    idx += 1;
                }
                if let Some(df) = &d.def {
                    segs.push(Seg::Text("=".into()));
                    segs.push(Seg::Node(idx, self.term(df, Slot::Free { tail: true })));
                    idx += 1;
                }
            }
            segs.push(Seg::Text("]".into()));
        }
        segs.push(Seg::Text("(".into()));
        for (j, a) in args.iter().enumerate() {
            if j > 0 {
                segs.push(Seg::Text(", ".into()));
            }
            segs.push(Seg::Node(idx + j, self.term(a, Slot::Free { tail: true })));
        }
        segs.push(Seg::Text(")".into()));
        Doc::new(segs, Level::Atom, None)
    }

    /// `f a1 … an` through the application head.
    fn application(&self, f: &Term, args: &[Term], slot: Slot) -> Doc {
        let tail = matches!(
            slot,
            Slot::Free { tail: true } | Slot::Atom { tail: true } | Slot::Right { tail: true, .. }
        );
        if let Some(c) = f.as_const() {
            if let Some(e) = self.table.get(c) {
                if let Some(n) = e.notation.as_ref().filter(|n| e.typed && !n.binds()) {
                    if args.len() == n.arity() && n.arity() > 0 {
                        let hidden_ok = n
                            .implicit_positions()
                            .iter()
                            .all(|&p| args[p].inferred || self.is_meta_site(&args[p]));
                        let generic = self.opts.show_inferred && !n.implicit_positions().is_empty();
                        if !generic && hidden_ok {
                            return self.notation(c, n, Vec::new(), args, 1, slot);
                        }
                    }
                }
            }
        }
        let mut segs = vec![Seg::Node(0, self.head_doc(f))];
        let mut level = Level::App;
        for (i, a) in args.iter().enumerate() {
            segs.push(Seg::Text(" ".into()));
            let last = i + 1 == args.len();
            let d = self.term(
                a,
                Slot::Atom {
                    tail: last && tail && !self.opts.show_inferred,
                },
            );
            if last && d.level == Level::Binder {
                level = Level::Binder;
            }
            segs.push(Seg::Node(i + 1, d));
        }
        Doc::new(segs, level, None)
    }

    fn head_doc(&self, f: &Term) -> Doc {
        let d = self.raw(f, Slot::Atom { tail: false });
        if d.level == Level::Atom {
            d
        } else {
            d.parenthesized()
        }
    }

    /// Renders `args` (children numbered from `offset`) by notation `n`.
    fn notation(&self, head: &QName, n: &Notation, bound: Vec<&VarDecl>, args: &[Term], offset: usize, slot: Slot) -> Doc {
        let tail = matches!(
            slot,
            Slot::Free { tail: true } | Slot::Atom { tail: true } | Slot::Right { tail: true, .. }
        );
        let markers: Vec<&Marker> = n.significant().collect();
        let vars = n.var_count();
        let binder_children: usize = bound.iter().map(|d| d.ty.is_some() as usize + d.def.is_some() as usize).sum();
        let arg_index = |pos: usize| offset + binder_children + pos;
        let fixity = n.fixity();
        let mut items = Vec::new();
        let mut level = Level::Atom;
        let mut arg_docs: Vec<bool> = Vec::new(); // operand contains a space
        for (k, m) in markers.iter().enumerate() {
            let next = markers.get(k + 1);
            let last = next.is_none();
            match m {
                Marker::Delim { text } => {
                    if !is_symbolic(text) {
                        items.push(Item::Word(text.clone()));
                    } else if k == 0 {
                        items.push(Item::Open(text.clone()));
                    } else {
                        items.push(Item::Close(text.clone()));
                    }
                }
                Marker::Var { .. } => {
                    let mut segs = Vec::new();
                    let mut idx = 0;
                    for (j, d) in bound.iter().enumerate() {
                        if j > 0 {
                            segs.push(Seg::Text(",".into()));
                        }
                        segs.push(Seg::Text(d.name.clone()));
                        if let Some(ty) = &d.ty {
                            if self.show_binder_type(ty) {
                                segs.push(Seg::Text(":".into()));
                                segs.push(Seg::Node(offset + idx, self.term(ty, Slot::Free { tail: true })));
                            }
                            idx += 1;
                        }
                        if d.def.is_some() {
                            idx += 1;
                        }
                    }
                    items.push(Item::Part(segs));
                }
                Marker::Arg { index, sequence } => {
                    let pos = index - vars - 1;
                    if *sequence {
                        let mut segs = Vec::new();
                        for (j, a) in args.iter().enumerate().skip(pos) {
                            if j > pos {
                                segs.push(Seg::Text(" ".into()));
                            }
                            let d = self.term(
                                a,
                                Slot::Atom {
                                    tail: last && tail && j + 1 == args.len(),
                                },
                            );
                            arg_docs.push(d.text.contains(' '));
                            segs.push(Seg::Node(arg_index(j), d));
                        }
                        items.push(Item::Part(segs));
                        if last {
                            level = Level::App;
                        }
                        continue;
                    }
                    let a = &args[pos];
                    let sl = if fixity == Fixity::Infix && k == 0 {
                        Slot::Left {
                            prec: n.precedence,
                            op: head,
                        }
                    } else if fixity == Fixity::Infix && last {
                        Slot::Right {
                            prec: n.precedence,
                            op: head,
                            right: n.assoc == Assoc::Right,
                            tail,
                        }
                    } else if matches!(next, Some(Marker::Delim { .. })) {
                        Slot::Free { tail: true }
                    } else if last && vars > 0 {
                        level = Level::Binder;
                        Slot::Free { tail }
                    } else {
                        if last {
                            level = Level::App;
                        }
                        Slot::Atom { tail: last && tail }
                    };
                    let d = self.term(a, sl);
                    if last && d.level == Level::Binder {
                        level = Level::Binder;
                    }
                    arg_docs.push(d.text.contains(' '));
                    items.push(Item::Part(vec![Seg::Node(arg_index(pos), d)]));
                }
            }
        }
        if fixity == Fixity::Infix {
            level = Level::Infix(n.precedence);
            let spaced = arg_docs.iter().any(|&s| s) || n.delimiters().any(|d| !is_symbolic(d));
            let segs = if spaced {
                join(
                    items
                        .into_iter()
                        .map(|i| match i {
                            Item::Close(s) | Item::Open(s) => Item::Word(s),
                            x => x,
                        })
                        .collect(),
                )
            } else {
                items
                    .into_iter()
                    .flat_map(|i| match i {
                        Item::Open(s) | Item::Close(s) | Item::Word(s) => vec![Seg::Text(s)],
                        Item::Part(p) => p,
                    })
                    .collect()
            };
            return Doc::new(segs, level, Some(head.clone()));
        }
        if markers.len() == 1 && matches!(markers[0], Marker::Delim { .. }) {
            level = Level::Atom;
        }
        Doc::new(join(items), level, Some(head.clone()))
    }
}

fn renumber(doc: &mut Doc, map: &[usize]) {
    for s in doc.segs.iter_mut() {
        if let Seg::Node(i, _) = s {
            if let Some(&m) = map.get(*i) {
                *i = m;
            }
        }
    }
}

#[cfg(test)]
mod tests;
