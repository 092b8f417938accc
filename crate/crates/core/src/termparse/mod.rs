//! Notation-driven term parser.
//!
//! Prefix notations start with a delimiter, infix ones with an argument.
//! Infix operators are resolved by precedence climbing; juxtaposition goes
//! through the table's application head. Omitted binder types and implicit
//! arguments become fresh meta-variables applied to the bound variables in
//! scope.

mod lexer;
mod table;

pub use lexer::{tokenize, TokKind, Token};
pub(crate) use table::{is_word, is_word_char};
pub use table::{table_for, NotationTable, TableEntry};

use serde::{Deserialize, Serialize};

use crate::model::{Assoc, Context, FileId, Marker, Notation, QName, SourceRef, Term, VarDecl, META_PREFIX};
use crate::surface::ParsingUnit;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParseError {
    pub message: String,
    #[serde(rename = "ref")]
    pub src: SourceRef,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParseResult {
    pub term: Term,
    /// Meta-variables introduced while parsing, in order.
    pub metas: Context,
    pub errors: Vec<ParseError>,
}

impl ParseResult {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

pub fn parse_term(unit: &ParsingUnit, table: &NotationTable) -> ParseResult {
    parse_text(&unit.text, &unit.src, table, &[])
}

/// Parses `text`, which starts at `origin.start` in `origin.file`. Names in
/// `bound` are treated as variables bound outside the text.
pub fn parse_text(text: &str, origin: &SourceRef, table: &NotationTable, bound: &[String]) -> ParseResult {
    let mut p = Parser {
        table,
        toks: tokenize(text, table),
        pos: 0,
        file: origin.file.clone(),
        base: origin.start,
        scope: bound.to_vec(),
        metas: Context::empty(),
        counter: 0,
        errors: Vec::new(),
    };
    let term = if p.toks.is_empty() {
        p.error("empty term", 0, text.len());
        p.placeholder(0, text.len())
    } else {
        p.expr(0)
    };
    if p.pos < p.toks.len() {
        let (s, e) = (p.toks[p.pos].start, p.toks.last().unwrap().end);
        let msg = format!("unexpected `{}`", p.toks[p.pos].text);
        p.error(msg, s, e);
    }
    ParseResult {
        term,
        metas: p.metas,
        errors: p.errors,
    }
}

struct Parser<'a> {
    table: &'a NotationTable,
    toks: Vec<Token>,
    pos: usize,
    file: FileId,
    base: usize,
    scope: Vec<String>,
    metas: Context,
    counter: usize,
    errors: Vec<ParseError>,
}

impl<'a> Parser<'a> {
    fn sref(&self, start: usize, end: usize) -> SourceRef {
        SourceRef::new(self.file.clone(), self.base + start, self.base + end)
    }

    fn error(&mut self, msg: impl Into<String>, start: usize, end: usize) {
        let src = self.sref(start, end);
        self.errors.push(ParseError { message: msg.into(), src });
    }

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        self.pos += 1;
        t
    }

    fn here(&self) -> usize {
        match self.peek() {
            Some(t) => t.start,
            None => self.toks.last().map(|t| t.end).unwrap_or(0),
        }
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            self.here()
        } else {
            self.toks[self.pos - 1].end
        }
    }

    fn is_bound(&self, name: &str) -> bool {
        self.scope.iter().any(|s| s == name)
    }

    /// Bound variables a meta may depend on, innermost shadowing outer.
    fn meta_args(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for (i, s) in self.scope.iter().enumerate() {
            if !self.scope[i + 1..].contains(s) {
                out.push(s.clone());
            }
        }
        out
    }

    fn fresh_meta(&mut self, at: usize) -> Term {
        self.counter += 1;
        let name = format!("{META_PREFIX}X{}", self.counter);
        self.metas.push(VarDecl::new(name.clone(), None));
        let z = Some(self.sref(at, at));
        let head = Term::var(name).with_ref(z.clone());
        let args = self.meta_args();
        match self.table.application_head() {
            Some(app) if !args.is_empty() => {
                let args = args.into_iter().map(|a| Term::var(a).with_ref(z.clone())).collect::<Vec<_>>();
                let mut all = vec![head];
                all.extend(args);
                Term::app(app.clone(), all).with_ref(z)
            }
            _ => head,
        }
    }

    fn placeholder(&mut self, start: usize, end: usize) -> Term {
        let src = self.sref(start, end);
        let mut t = self.fresh_meta(start);
        t.map_refs(&mut |_| src.clone());
        t
    }

    fn can_start_atom(&self) -> bool {
        match self.peek() {
            Some(t) => match t.kind {
                TokKind::Ident | TokKind::LParen => true,
                TokKind::Delim => self.is_bound(&t.text) || !self.table.prefix(&t.text).is_empty(),
                _ => false,
            },
            None => false,
        }
    }

    fn expect(&mut self, text: &str) -> bool {
        match self.peek() {
            Some(t) if t.text == text => {
                self.bump();
                true
            }
            other => {
                let (s, e, found) = match other {
                    Some(t) => (t.start, t.end, format!("`{}`", t.text)),
                    None => (self.here(), self.here(), "end of term".to_string()),
                };
                self.error(format!("expected `{text}`, found {found}"), s, e);
                false
            }
        }
    }

    fn expr(&mut self, min: i32) -> Term {
        self.expr_after(min, None)
    }

    /// `last` is the operator whose right operand is being parsed, if any.
    fn expr_after(&mut self, min: i32, mut last: Option<(QName, i32)>) -> Term {
        let mut lhs = self.prefix();
        loop {
            let Some(tok) = self.peek().cloned() else { break };
            if tok.kind == TokKind::Delim && !self.is_bound(&tok.text) {
                let cands = self.table.infix(&tok.text);
                if let Some(&(entry, n)) = cands.first() {
                    let (entry, n) = (entry.clone(), n.clone());
                    if n.precedence < min {
                        break;
                    }
                    if let Some(other) = cands.iter().find(|(e, _)| e.name != entry.name) {
                        self.error(
                            format!("ambiguous notation: `{}` and `{}` share `{}`", entry.name, other.0.name, tok.text),
                            tok.start,
                            tok.end,
                        );
                    }
                    if let Some((h, lp)) = &last {
                        if *lp == n.precedence && *h != entry.name {
                            self.error(
                                format!(
                                    "ambiguous: `{}` and `{}` have equal precedence {}; add parentheses",
                                    h, entry.name, lp
                                ),
                                tok.start,
                                tok.end,
                            );
                        }
                    }
                    lhs = self.infix(&entry, &n, lhs);
                    last = Some((entry.name.clone(), n.precedence));
                    continue;
                }
            }
            if self.can_start_atom() {
                if self.table.application().is_none() {
                    break;
                }
                if self.table.application_precedence() < min {
                    break;
                }
                let mut args = Vec::new();
                while self.can_start_atom() {
                    args.push(self.prefix());
                }
                lhs = self.apply(lhs, args);
                last = None;
                continue;
            }
            break;
        }
        lhs
    }

    fn apply(&self, f: Term, args: Vec<Term>) -> Term {
        let app = self.table.application_head().unwrap().clone();
        let src = match (&f.src, args.last().and_then(|a| a.src.as_ref())) {
            (Some(a), Some(b)) => Some(a.join(b)),
            (a, _) => a.clone(),
        };
        let mut all = match f.as_complex() {
            Some((h, b, fa)) if *h == app && b.is_empty() => fa.to_vec(),
            _ => vec![f],
        };
        all.extend(args);
        Term::app(app, all).with_ref(src)
    }

    fn prefix(&mut self) -> Term {
        let Some(tok) = self.peek().cloned() else {
            let at = self.here();
            self.error("expected a term, found end of term", at, at);
            return self.placeholder(at, at);
        };
        match tok.kind {
            TokKind::LParen => {
                self.bump();
                let mut inner = self.expr(0);
                let end = if self.expect(")") {
                    self.prev_end()
                } else {
                    inner.src.as_ref().map(|s| s.end - self.base).unwrap_or(tok.end)
                };
                inner.src = Some(self.sref(tok.start, end));
                inner
            }
            TokKind::Ident | TokKind::Delim if self.is_bound(&tok.text) => {
                self.bump();
                Term::var(tok.text.clone()).with_ref(Some(self.sref(tok.start, tok.end)))
            }
            TokKind::Delim => {
                let cands = self.table.prefix(&tok.text);
                match cands.first() {
                    Some(&(entry, n)) => {
                        let (entry, n) = (entry.clone(), n.clone());
                        if let Some(other) = cands.iter().find(|(e, _)| e.name != entry.name) {
                            self.error(
                                format!(
                                    "ambiguous notation: `{}` and `{}` both start with `{}`",
                                    entry.name, other.0.name, tok.text
                                ),
                                tok.start,
                                tok.end,
                            );
                        }
                        self.bump();
                        self.finish_prefix(&entry, &n, &tok)
                    }
                    None => {
                        self.error(format!("unexpected `{}`", tok.text), tok.start, tok.end);
                        if self.table.is_inner_delimiter(&tok.text) {
                            self.placeholder(tok.start, tok.start)
                        } else {
                            self.bump();
                            self.placeholder(tok.start, tok.end)
                        }
                    }
                }
            }
            TokKind::Ident => {
                self.bump();
                if tok.text.starts_with(META_PREFIX) {
                    self.error(format!("identifiers must not start with `{META_PREFIX}`"), tok.start, tok.end);
                    return self.placeholder(tok.start, tok.end);
                }
                let cands = self.table.resolve(&tok.text);
                match cands.first() {
                    None => {
                        self.error(format!("unknown identifier `{}`", tok.text), tok.start, tok.end);
                        self.placeholder(tok.start, tok.end)
                    }
                    Some(first) => {
                        if cands.len() > 1 {
                            let names: Vec<String> = cands.iter().map(|c| c.name.to_string()).collect();
                            self.error(
                                format!("ambiguous identifier `{}`: {}", tok.text, names.join(", ")),
                                tok.start,
                                tok.end,
                            );
                        }
                        Term::constant(first.name.clone()).with_ref(Some(self.sref(tok.start, tok.end)))
                    }
                }
            }
            TokKind::RParen | TokKind::Colon | TokKind::Comma => {
                self.error(format!("unexpected `{}`", tok.text), tok.start, tok.end);
                self.placeholder(tok.start, tok.start)
            }
        }
    }

    fn finish_prefix(&mut self, entry: &TableEntry, n: &Notation, head: &Token) -> Term {
        let markers: Vec<Marker> = n.significant().cloned().collect();
        let vars = n.var_count();
        let mark = self.scope.len();
        let mut bound = Context::empty();
        let mut explicit: Vec<(usize, Vec<Term>)> = Vec::new();
        for k in 1..markers.len() {
            let next = markers.get(k + 1);
            match &markers[k] {
                Marker::Delim { text } => {
                    self.expect(text);
                }
                Marker::Var { sequence, .. } => {
                    let closing = match next {
                        Some(Marker::Delim { text }) => Some(text.clone()),
                        _ => None,
                    };
                    self.binder_vars(*sequence, closing.as_deref(), &mut bound);
                }
                Marker::Arg { index, sequence } => {
                    let pos = index - vars - 1;
                    if *sequence {
                        let mut ts = Vec::new();
                        while self.can_start_atom() {
                            ts.push(self.prefix());
                        }
                        explicit.push((pos, ts));
                    } else if matches!(next, Some(Marker::Delim { .. })) || (next.is_none() && n.binds()) {
                        let t = self.expr(0);
                        explicit.push((pos, vec![t]));
                    } else if self.can_start_atom() {
                        let t = self.prefix();
                        explicit.push((pos, vec![t]));
                    } else if k == 1 && entry.typed {
                        // used unapplied
                        self.scope.truncate(mark);
                        return Term::constant(entry.name.clone()).with_ref(Some(self.sref(head.start, head.end)));
                    } else {
                        let at = self.here();
                        self.error(format!("missing argument for `{}`", entry.name), at, at);
                        let t = self.placeholder(at, at);
                        explicit.push((pos, vec![t]));
                    }
                }
            }
        }
        self.scope.truncate(mark);
        let end = self.prev_end();
        self.build(entry, n, head, bound, explicit, head.start, end)
    }

    fn infix(&mut self, entry: &TableEntry, n: &Notation, lhs: Term) -> Term {
        let markers: Vec<Marker> = n.significant().cloned().collect();
        let vars = n.var_count();
        let start = lhs.src.as_ref().map(|s| s.start - self.base).unwrap_or(self.here());
        let head = self.peek().cloned().unwrap();
        let mut explicit: Vec<(usize, Vec<Term>)> = Vec::new();
        if let Marker::Arg { index, .. } = &markers[0] {
            explicit.push((index - vars - 1, vec![lhs]));
        }
        for k in 1..markers.len() {
            let next = markers.get(k + 1);
            match &markers[k] {
                Marker::Delim { text } => {
                    self.expect(text);
                }
                Marker::Var { .. } => {
                    let at = self.here();
                    self.error("infix notations cannot bind variables", at, at);
                }
                Marker::Arg { index, sequence } => {
                    let pos = index - vars - 1;
                    let t = if *sequence {
                        let mut ts = Vec::new();
                        while self.can_start_atom() {
                            ts.push(self.prefix());
                        }
                        explicit.push((pos, ts));
                        continue;
                    } else if matches!(next, Some(Marker::Delim { .. })) {
                        self.expr(0)
                    } else if next.is_some() {
                        self.prefix()
                    } else {
                        let p = n.precedence;
                        if n.assoc == Assoc::Right {
                            self.expr_after(p, Some((entry.name.clone(), p)))
                        } else {
                            self.expr(p.saturating_add(1))
                        }
                    };
                    explicit.push((pos, vec![t]));
                }
            }
        }
        let end = self.prev_end();
        self.build(entry, n, &head, Context::empty(), explicit, start, end)
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        &mut self,
        entry: &TableEntry,
        n: &Notation,
        head: &Token,
        bound: Context,
        mut explicit: Vec<(usize, Vec<Term>)>,
        start: usize,
        end: usize,
    ) -> Term {
        explicit.sort_by_key(|(p, _)| *p);
        let mut args = Vec::new();
        for pos in 0..n.arity() {
            match explicit.iter().position(|(p, _)| *p == pos) {
                Some(i) => args.append(&mut explicit[i].1),
                None => args.push(self.fresh_meta(head.end)),
            }
        }
        let src = Some(self.sref(start, end));
        let head_ref = Some(self.sref(head.start, head.end));
        let app = self.table.application_head().cloned();
        match app {
            Some(app) if entry.typed && bound.is_empty() => {
                if args.is_empty() {
                    return Term::constant(entry.name.clone()).with_ref(src);
                }
                let mut all = vec![Term::constant(entry.name.clone()).with_ref(head_ref)];
                all.extend(args);
                Term::app(app, all).with_ref(src)
            }
            _ => {
                if args.is_empty() && bound.is_empty() {
                    Term::constant(entry.name.clone()).with_ref(src)
                } else {
                    Term::complex(entry.name.clone(), bound, args).with_ref(src)
                }
            }
        }
    }

    fn binder_vars(&mut self, sequence: bool, closing: Option<&str>, bound: &mut Context) {
        let first = bound.len();
        loop {
            let mut names = Vec::new();
            while let Some(t) = self.peek() {
                let ok = t.kind == TokKind::Ident
                    || (t.kind == TokKind::Delim
                        && Some(t.text.as_str()) != closing
                        && self.table.prefix(&t.text).is_empty()
                        && table::is_word(&t.text));
                if !ok {
                    break;
                }
                names.push(self.bump());
            }
            if names.is_empty() {
                let at = self.here();
                self.error("expected a variable name", at, at);
                break;
            }
            let ty = match self.peek() {
                Some(t) if t.kind == TokKind::Colon => {
                    self.bump();
                    Some(self.expr(0))
                }
                _ => None,
            };
            for name in names {
                if name.text.starts_with(META_PREFIX) {
                    self.error(format!("variable names must not start with `{META_PREFIX}`"), name.start, name.end);
                }
                let ty = match &ty {
                    Some(t) => t.clone(),
                    None => self.fresh_meta(name.end),
                };
                let mut d = VarDecl::new(name.text.clone(), Some(ty));
                d.src = Some(self.sref(name.start, name.end));
                bound.push(d);
                self.scope.push(name.text);
            }
            match self.peek() {
                Some(t) if t.kind == TokKind::Comma => {
                    self.bump();
                }
                _ => break,
            }
        }
        if !sequence && bound.len() - first > 1 {
            let at = self.here();
            self.error("this notation binds a single variable", at, at);
        }
    }
}
