//! Keyword/separator based structure parser.
//!
//! A file is a sequence of modules ended by `❚` (ASCII 28), each a sequence of
//! declarations ended by `❙` (ASCII 29), each a sequence of components
//! separated by `❘` (ASCII 30). ASCII 31 is reserved and rejected. Term
//! components stay unparsed as [`ParsingUnit`]s; notations are parsed here.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{Assoc, Component, FileId, Marker, Notation, QName, SlotId, SourceRef};

pub const MODULE_DELIMS: [char; 2] = ['\u{1c}', '❚'];
pub const DECL_DELIMS: [char; 2] = ['\u{1d}', '❙'];
pub const COMPONENT_DELIMS: [char; 2] = ['\u{1e}', '❘'];
pub const RESERVED_SEPARATOR: char = '\u{1f}';

/// A term component awaiting the term parser.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParsingUnit {
    pub text: String,
    #[serde(rename = "ref")]
    pub src: SourceRef,
    pub theory: String,
    pub slot: SlotId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NotationSource {
    pub text: String,
    #[serde(rename = "ref")]
    pub src: SourceRef,
    pub notation: Notation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeclSkeleton {
    pub name: String,
    pub name_ref: SourceRef,
    /// The whole declaration, trimmed.
    #[serde(rename = "ref")]
    pub src: SourceRef,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub ty: Option<ParsingUnit>,
    #[serde(rename = "def", default, skip_serializing_if = "Option::is_none")]
    pub def: Option<ParsingUnit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notation: Option<NotationSource>,
}

impl DeclSkeleton {
    pub fn unit(&self, component: Component) -> Option<&ParsingUnit> {
        match component {
            Component::Type => self.ty.as_ref(),
            Component::Definiens => self.def.as_ref(),
        }
    }

    pub fn units(&self) -> impl Iterator<Item = &ParsingUnit> {
        self.ty.iter().chain(self.def.iter())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Include {
    pub theory: String,
    #[serde(rename = "ref")]
    pub src: SourceRef,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheorySkeleton {
    pub name: String,
    pub name_ref: SourceRef,
    #[serde(rename = "ref")]
    pub src: SourceRef,
    pub includes: Vec<Include>,
    pub declarations: Vec<DeclSkeleton>,
}

impl TheorySkeleton {
    pub fn get(&self, name: &str) -> Option<&DeclSkeleton> {
        self.declarations.iter().find(|d| d.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralError {
    pub message: String,
    #[serde(rename = "ref")]
    pub src: SourceRef,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub file: FileId,
    pub theories: Vec<TheorySkeleton>,
    pub errors: Vec<StructuralError>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeclPart {
    Name,
    Type,
    Definiens,
    Notation,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeclPosition {
    pub theory: String,
    pub constant: String,
    pub part: Option<DeclPart>,
}

impl Document {
    pub fn theory(&self, name: &str) -> Option<&TheorySkeleton> {
        self.theories.iter().find(|t| t.name == name)
    }

    pub fn units(&self) -> impl Iterator<Item = &ParsingUnit> {
        self.theories.iter().flat_map(|t| t.declarations.iter()).flat_map(|d| d.units())
    }

    /// The innermost declaration part containing `offset`; keywords,
    /// delimiters and whitespace between declarations yield `None`.
    pub fn declaration_at(&self, offset: usize) -> Option<DeclPosition> {
        for th in &self.theories {
            for d in &th.declarations {
                if !d.src.contains_offset(offset) {
                    continue;
                }
                let parts = [
                    (DeclPart::Name, Some(&d.name_ref)),
                    (DeclPart::Type, d.ty.as_ref().map(|u| &u.src)),
                    (DeclPart::Definiens, d.def.as_ref().map(|u| &u.src)),
                    (DeclPart::Notation, d.notation.as_ref().map(|n| &n.src)),
                ];
                let part = parts
                    .iter()
                    .find(|(_, r)| r.is_some_and(|r| r.contains_offset(offset)))
                    .map(|(p, _)| *p);
                return Some(DeclPosition {
                    theory: th.name.clone(),
                    constant: d.name.clone(),
                    part,
                });
            }
        }
        None
    }

    /// Re-serializes with visible delimiters and the raw component texts.
    pub fn to_source(&self) -> String {
        let mut out = String::new();
        for th in &self.theories {
            let _ = write!(out, "theory {} =", th.name);
            let mut first = true;
            let mut sep = |out: &mut String| {
                if !first {
                    out.push_str(" ❙\n ");
                } else {
                    out.push(' ');
                }
                first = false;
            };
            for inc in &th.includes {
                sep(&mut out);
                let _ = write!(out, "include {}", inc.theory);
            }
            for d in &th.declarations {
                sep(&mut out);
                out.push_str(&d.name);
                if let Some(u) = &d.ty {
                    let _ = write!(out, " ❘ : {}", u.text);
                }
                if let Some(u) = &d.def {
                    let _ = write!(out, " ❘ = {}", u.text);
                }
                if let Some(n) = &d.notation {
                    let _ = write!(out, " ❘ # {}", n.text);
                }
            }
            if !first {
                out.push_str(" ❙");
            }
            out.push_str("\n❚\n");
        }
        out
    }

    /// Equality ignoring source references.
    pub fn same_structure(&self, other: &Document) -> bool {
        fn shape(d: &Document) -> Vec<String> {
            let mut v = Vec::new();
            for t in &d.theories {
                v.push(format!("theory {}", t.name));
                for i in &t.includes {
                    v.push(format!("include {}", i.theory));
                }
                for c in &t.declarations {
                    v.push(format!(
                        "{}|{:?}|{:?}|{:?}",
                        c.name,
                        c.ty.as_ref().map(|u| &u.text),
                        c.def.as_ref().map(|u| &u.text),
                        c.notation.as_ref().map(|n| &n.notation)
                    ));
                }
            }
            v.extend(d.errors.iter().map(|e| e.message.clone()));
            v
        }
        shape(self) == shape(other)
    }
}

fn is_module_delim(c: char) -> bool {
    MODULE_DELIMS.contains(&c)
}

fn is_decl_delim(c: char) -> bool {
    DECL_DELIMS.contains(&c)
}

fn is_component_delim(c: char) -> bool {
    COMPONENT_DELIMS.contains(&c)
}

/// Blanks out `//` line comments, preserving every byte offset.
pub fn strip_comments(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_comment = false;
    let mut chars = text.char_indices().peekable();
    while let Some((_, c)) = chars.next() {
        if in_comment {
            if c == '\n' {
                in_comment = false;
                out.push('\n');
            } else {
                out.extend(std::iter::repeat(' ').take(c.len_utf8()));
            }
        } else if c == '/' && chars.peek().map(|(_, n)| *n) == Some('/') {
            in_comment = true;
            out.push(' ');
        } else {
            out.push(c);
        }
    }
    out
}

/// Narrows `[start, end)` to exclude surrounding whitespace of `s`.
fn trim_range(s: &str, start: usize, end: usize) -> (usize, usize) {
    let slice = &s[start..end];
    let lead = slice.len() - slice.trim_start().len();
    let trail = slice.len() - slice.trim_end().len();
    if lead == slice.len() {
        (start, start)
    } else {
        (start + lead, end - trail)
    }
}

/// Splits `[start, end)` of `s` on characters matching `pred`. Each piece is
/// returned with a flag saying whether a delimiter terminated it.
fn split_on(s: &str, start: usize, end: usize, pred: impl Fn(char) -> bool) -> Vec<(usize, usize, bool)> {
    let mut out = Vec::new();
    let mut piece = start;
    for (i, c) in s[start..end].char_indices() {
        if pred(c) {
            out.push((piece, start + i, true));
            piece = start + i + c.len_utf8();
        }
    }
    out.push((piece, end, false));
    out
}

/// Parses the notation micro-syntax: whitespace separated tokens where `n` is
/// an argument marker, `Vn` a variable marker, a trailing `…` marks a
/// sequence, a trailing `prec <int> [right]` sets precedence and
/// associativity, and anything else is a delimiter.
pub fn parse_notation(text: &str) -> Result<Notation, String> {
    let mut tokens: Vec<&str> = text.split_whitespace().collect();
    let mut precedence = 0;
    let mut assoc = Assoc::Left;
    if tokens.last() == Some(&"right") && tokens.len() >= 3 && tokens[tokens.len() - 3] == "prec" {
        assoc = Assoc::Right;
        tokens.pop();
    }
    if tokens.len() >= 2 && tokens[tokens.len() - 2] == "prec" {
        precedence = tokens[tokens.len() - 1]
            .parse::<i32>()
            .map_err(|_| format!("invalid precedence `{}`", tokens[tokens.len() - 1]))?;
        tokens.truncate(tokens.len() - 2);
    }
    let mut markers: Vec<Marker> = Vec::new();
    for tok in tokens {
        if tok == "…" {
            match markers.last_mut() {
                Some(Marker::Arg { sequence, .. }) | Some(Marker::Var { sequence, .. }) => {
                    *sequence = true;
                    continue;
                }
                _ => {}
            }
        }
        let (body, sequence) = match tok.strip_suffix('…') {
            Some(b) if !b.is_empty() => (b, true),
            _ => (tok, false),
        };
        if !body.is_empty() && body.bytes().all(|b| b.is_ascii_digit()) {
            let index = body.parse().map_err(|_| format!("invalid marker `{tok}`"))?;
            markers.push(Marker::Arg { index, sequence });
        } else if body.len() > 1 && body.starts_with('V') && body[1..].bytes().all(|b| b.is_ascii_digit()) {
            let index = body[1..].parse().map_err(|_| format!("invalid marker `{tok}`"))?;
            markers.push(Marker::Var { index, sequence });
        } else {
            markers.push(Marker::Delim { text: tok.to_string() });
        }
    }
    if markers.is_empty() {
        return Err("empty notation".into());
    }
    let n = Notation {
        markers,
        precedence,
        assoc,
    };
    n.validate()?;
    Ok(n)
}

type KeywordHandler = fn(&mut TheoryBuilder, &str, SourceRef, &mut Vec<StructuralError>);

/// Declarations whose first token is a registered keyword are handed to the
/// keyword's handler instead of being read as constants.
pub struct KeywordRegistry {
    handlers: BTreeMap<&'static str, KeywordHandler>,
}

impl Default for KeywordRegistry {
    fn default() -> Self {
        let mut handlers: BTreeMap<&'static str, KeywordHandler> = BTreeMap::new();
        handlers.insert("include", handle_include);
        handlers.insert("theory", handle_nested_theory);
        KeywordRegistry { handlers }
    }
}

pub struct TheoryBuilder {
    theory: TheorySkeleton,
}

fn handle_include(b: &mut TheoryBuilder, rest: &str, src: SourceRef, errors: &mut Vec<StructuralError>) {
    let mut words = rest.split_whitespace();
    match (words.next(), words.next()) {
        (Some(name), None) if !name.contains(['❘', '\u{1e}']) => b.theory.includes.push(Include {
            theory: name.to_string(),
            src,
        }),
        _ => errors.push(StructuralError {
            message: "include expects exactly one theory name".into(),
            src,
        }),
    }
}

fn handle_nested_theory(_: &mut TheoryBuilder, _: &str, src: SourceRef, errors: &mut Vec<StructuralError>) {
    errors.push(StructuralError {
        message: "theories cannot be nested".into(),
        src,
    });
}

pub fn parse_document(text: &str, file: FileId) -> Document {
    Parser {
        raw: text,
        s: strip_comments(text),
        file,
        keywords: KeywordRegistry::default(),
        errors: Vec::new(),
    }
    .run()
}

struct Parser<'a> {
    raw: &'a str,
    s: String,
    file: FileId,
    keywords: KeywordRegistry,
    errors: Vec<StructuralError>,
}

impl Parser<'_> {
    fn r(&self, start: usize, end: usize) -> SourceRef {
        SourceRef::new(self.file.clone(), start, end)
    }

    fn err(&mut self, message: impl Into<String>, start: usize, end: usize) {
        let src = self.r(start, end);
        self.errors.push(StructuralError {
            message: message.into(),
            src,
        });
    }

    fn run(mut self) -> Document {
        let s = self.s.clone();
        if let Some(i) = s.find(RESERVED_SEPARATOR) {
            self.err("reserved separator (ASCII 31) has no role", i, i + 1);
        }
        let modules = split_on(&s, 0, s.len(), is_module_delim);
        let mut theories = Vec::new();
        // a trailing module without its `❚` is tolerated
        for (start, end, _) in modules {
            let (ts, te) = trim_range(&s, start, end);
            if ts == te {
                continue;
            }
            if let Some(th) = self.module(ts, te) {
                theories.push(th);
            }
        }
        Document {
            file: self.file,
            theories,
            errors: self.errors,
        }
    }

    fn module(&mut self, start: usize, end: usize) -> Option<TheorySkeleton> {
        let s = self.s.clone();
        let text = &s[start..end];
        let mut words = text.split_whitespace();
        let kw = words.next().unwrap_or("");
        if kw != "theory" {
            let kw_end = start + text.find(char::is_whitespace).unwrap_or(text.len());
            self.err(format!("unknown keyword `{kw}`, expected `theory`"), start, kw_end);
            return None;
        }
        let after_kw = start + "theory".len();
        let Some(eq) = s[after_kw..end].find('=') else {
            self.err("theory header must have the form `theory <Name> =`", start, end);
            return None;
        };
        let (ns, ne) = trim_range(&s, after_kw, after_kw + eq);
        let name = &s[ns..ne];
        if name.is_empty() || name.contains(char::is_whitespace) || name.contains(is_reserved) {
            self.err("invalid theory name", start, after_kw + eq + 1);
            return None;
        }
        let mut builder = TheoryBuilder {
            theory: TheorySkeleton {
                name: name.to_string(),
                name_ref: self.r(ns, ne),
                src: self.r(start, end),
                includes: Vec::new(),
                declarations: Vec::new(),
            },
        };
        let body_start = after_kw + eq + 1;
        let pieces = split_on(&s, body_start, end, is_decl_delim);
        for (ps, pe, terminated) in pieces {
            let (ds, de) = trim_range(&s, ps, pe);
            if ds == de {
                if terminated {
                    self.err("empty declaration (dangling delimiter)", ps, pe.max(ps));
                }
                continue;
            }
            self.declaration(&mut builder, ds, de);
        }
        Some(builder.theory)
    }

    fn declaration(&mut self, b: &mut TheoryBuilder, start: usize, end: usize) {
        let s = self.s.clone();
        let comps = split_on(&s, start, end, is_component_delim);
        let (fs, fe, _) = comps[0];
        let (fs, fe) = trim_range(&s, fs, fe);
        let first = &s[fs..fe];
        let name_len = first
            .find(|c: char| c.is_whitespace() || matches!(c, ':' | '=' | '#'))
            .unwrap_or(first.len());
        let name = &first[..name_len];
        if name.is_empty() {
            self.err("declaration missing name", start, end);
            return;
        }
        if let Some(h) = self.keywords.handlers.get(name).copied() {
            if comps.len() > 1 {
                self.err(format!("`{name}` declaration takes no components"), start, end);
                return;
            }
            let rest = first[name_len..].to_string();
            let src = self.r(start, end);
            h(b, &rest, src, &mut self.errors);
            return;
        }
        if name.contains(is_reserved) {
            self.err("invalid constant name", fs, fs + name_len);
            return;
        }
        let mut decl = DeclSkeleton {
            name: name.to_string(),
            name_ref: self.r(fs, fs + name_len),
            src: self.r(start, end),
            ty: None,
            def: None,
            notation: None,
        };
        let mut parts = vec![(fs + name_len, fe, true)];
        parts.extend(comps[1..].iter().map(|&(a, z, _)| (a, z, false)));
        for (ps, pe, in_first) in parts {
            let (ps, pe) = trim_range(&s, ps, pe);
            if ps == pe {
                if !in_first {
                    self.err("empty component (dangling delimiter)", start, end);
                    return;
                }
                continue;
            }
            let marker = s[ps..].chars().next().unwrap();
            let (us, ue) = trim_range(&s, ps + marker.len_utf8(), pe);
            let unit_text = self.raw[us..ue].to_string();
            let ok = match marker {
                ':' | '=' => {
                    let component = if marker == ':' { Component::Type } else { Component::Definiens };
                    let slot_ref = if marker == ':' { &mut decl.ty } else { &mut decl.def };
                    if slot_ref.is_some() {
                        Err(format!("duplicate `{marker}` component"))
                    } else if us == ue {
                        Err(format!("empty `{marker}` component"))
                    } else {
                        *slot_ref = Some(ParsingUnit {
                            text: unit_text,
                            src: SourceRef::new(self.file.clone(), us, ue),
                            theory: b.theory.name.clone(),
                            slot: SlotId::new(QName::new(&b.theory.name, name), component),
                        });
                        Ok(())
                    }
                }
                '#' => {
                    if decl.notation.is_some() {
                        Err("duplicate `#` component".to_string())
                    } else {
                        match parse_notation(&s[us..ue]) {
                            Ok(notation) => {
                                decl.notation = Some(NotationSource {
                                    text: s[us..ue].to_string(),
                                    src: SourceRef::new(self.file.clone(), us, ue),
                                    notation,
                                });
                                Ok(())
                            }
                            Err(e) => Err(format!("invalid notation: {e}")),
                        }
                    }
                }
                _ => Err(if in_first {
                    "unexpected text after declaration name".to_string()
                } else {
                    "component must start with `:`, `=` or `#`".to_string()
                }),
            };
            if let Err(msg) = ok {
                self.err(msg, ps, pe);
                return;
            }
        }
        b.theory.declarations.push(decl);
    }
}

fn is_reserved(c: char) -> bool {
    is_module_delim(c) || is_decl_delim(c) || is_component_delim(c) || c == RESERVED_SEPARATOR
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(s: &str) -> Document {
        parse_document(s, FileId::new("t.mmt"))
    }

    #[test]
    fn empty_input() {
        let d = doc("");
        assert!(d.theories.is_empty());
        assert!(d.errors.is_empty());
    }

    #[test]
    fn pl_fragment() {
        let src = "theory PL = prop : type ❘ # prop ❙ and : prop→prop→prop ❘ # 1 ∧ 2 ❙ ❚";
        let d = doc(src);
        assert!(d.errors.is_empty(), "{:?}", d.errors);
        let th = &d.theories[0];
        assert_eq!(th.name, "PL");
        assert_eq!(th.declarations.len(), 2);
        let and = th.get("and").unwrap();
        let ty = and.ty.as_ref().unwrap();
        assert_eq!(ty.text, "prop→prop→prop");
        assert_eq!(ty.src.slice(src), "prop→prop→prop");
        assert_eq!(
            and.notation.as_ref().unwrap().notation.markers,
            vec![
                Marker::Arg { index: 1, sequence: false },
                Marker::Delim { text: "∧".into() },
                Marker::Arg { index: 2, sequence: false },
            ]
        );
    }

    #[test]
    fn missing_name_is_recovered() {
        let src = "theory T = : type ❙ ❚";
        let d = doc(src);
        assert_eq!(d.theories.len(), 1);
        assert!(d.theories[0].declarations.is_empty());
        assert_eq!(d.errors.len(), 1);
        assert_eq!(d.errors[0].message, "declaration missing name");
        assert_eq!(d.errors[0].src.slice(src), ": type");
    }

    #[test]
    fn ascii_and_visible_delimiters_agree() {
        let a = doc("theory T = a : b ❘ # x ❙ ❚");
        let b = doc("theory T = a : b \u{1e} # x \u{1d} \u{1c}");
        assert!(a.same_structure(&b));
    }

    #[test]
    fn declaration_positions() {
        let src = "theory PL = prop : type ❘ # prop ❙ and : prop→prop→prop ❘ # 1 ∧ 2 ❙ ❚";
        let d = doc(src);
        let off = src.find("prop→prop").unwrap() + 2;
        let p = d.declaration_at(off).unwrap();
        assert_eq!(
            (p.theory.as_str(), p.constant.as_str(), p.part),
            ("PL", "and", Some(DeclPart::Type))
        );
        assert!(d.declaration_at(2).is_none(), "inside keyword");
        assert!(doc("").declaration_at(0).is_none());
    }

    #[test]
    fn comments_are_blanked_but_kept_in_units() {
        let src = "theory T = c : a // note ❙\n b ❙ ❚";
        let d = doc(src);
        // the `❙` inside the comment does not split
        let c = d.theories[0].get("c").unwrap();
        assert_eq!(c.ty.as_ref().unwrap().text, "a // note ❙\n b");
    }

    #[test]
    fn include_and_errors() {
        let d = doc("theory PL = include LF ❙ x ❘ foo ❙ ❚ junk");
        assert_eq!(d.theories[0].includes[0].theory, "LF");
        assert_eq!(d.errors.len(), 2, "{:?}", d.errors);
    }

    #[test]
    fn notation_micro_syntax() {
        let n = parse_notation("[ V1… ] 2 prec 3 right").unwrap();
        assert_eq!(n.precedence, 3);
        assert_eq!(n.assoc, Assoc::Right);
        assert_eq!(n.markers[1], Marker::Var { index: 1, sequence: true });
        let n = parse_notation("1 ⎵ 2 …").unwrap();
        assert_eq!(n.markers[2], Marker::Arg { index: 2, sequence: true });
        assert!(parse_notation("").is_err());
    }

    #[test]
    fn reserved_separator_rejected() {
        let d = doc("theory T = a : b\u{1f}c ❙ ❚");
        assert!(d.errors.iter().any(|e| e.message.contains("ASCII 31")));
    }

    proptest::proptest! {
        #[test]
        fn any_text_yields_a_document(
            parts in proptest::collection::vec(
                proptest::sample::select(vec![
                    "theory", "T", "=", ":", "#", "❚", "❙", "❘", "→", "∧", "//", "\n", " ", "include", "1", "V1…", "prec", "é",
                ]),
                0..40,
            )
        ) {
            let text: String = parts.concat();
            let d = doc(&text);
            for u in d.units() {
                proptest::prop_assert_eq!(u.src.slice(&text), u.text.as_str());
            }
        }
    }
}
