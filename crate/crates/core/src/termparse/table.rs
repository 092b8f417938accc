use std::collections::{BTreeMap, BTreeSet};

use crate::model::{Fixity, Notation, QName};

/// A constant visible to the term parser.
#[derive(Clone, Debug, PartialEq)]
pub struct TableEntry {
    pub name: QName,
    pub notation: Option<Notation>,
    /// Declared with a type. Typed constants with notations are parsed as
    /// applications through the application head.
    pub typed: bool,
}

/// Everything the term parser needs to know about the constants in scope.
#[derive(Clone, Debug, Default)]
pub struct NotationTable {
    entries: Vec<TableEntry>,
    by_local: BTreeMap<String, Vec<usize>>,
    by_qname: BTreeMap<QName, usize>,
    application: Option<usize>,
    symbolic: Vec<String>,
    words: BTreeSet<String>,
}

pub(crate) fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

pub(crate) fn is_word(s: &str) -> bool {
    !s.is_empty() && s.chars().all(is_word_char)
}

impl NotationTable {
    /// Later entries with an already present name are ignored.
    pub fn new(entries: impl IntoIterator<Item = TableEntry>) -> Self {
        let mut t = NotationTable::default();
        for e in entries {
            if t.by_qname.contains_key(&e.name) {
                continue;
            }
            let i = t.entries.len();
            t.by_qname.insert(e.name.clone(), i);
            t.by_local.entry(e.name.local().to_string()).or_default().push(i);
            if let Some(n) = &e.notation {
                if t.application.is_none() && !e.typed && n.is_juxtaposition() {
                    t.application = Some(i);
                }
                for d in n.delimiters() {
                    if is_word(d) {
                        t.words.insert(d.to_string());
                    } else if !t.symbolic.iter().any(|s| s == d) {
                        t.symbolic.push(d.to_string());
                    }
                }
            }
            t.entries.push(e);
        }
        // longest match first
        t.symbolic.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        t
    }

    pub fn entries(&self) -> &[TableEntry] {
        &self.entries
    }

    pub fn get(&self, name: &QName) -> Option<&TableEntry> {
        self.by_qname.get(name).map(|&i| &self.entries[i])
    }

    pub fn contains(&self, name: &QName) -> bool {
        self.by_qname.contains_key(name)
    }

    /// Constants whose local name is `local`, in declaration order.
    pub fn resolve(&self, local: &str) -> Vec<&TableEntry> {
        match QName::parse(local) {
            Some(q) => self.get(&q).into_iter().collect(),
            None => self
                .by_local
                .get(local)
                .map(|v| v.iter().map(|&i| &self.entries[i]).collect())
                .unwrap_or_default(),
        }
    }

    /// The head used for juxtaposition, if any constant has the notation `1 ⎵ 2…`.
    pub fn application(&self) -> Option<&TableEntry> {
        self.application.map(|i| &self.entries[i])
    }

    pub fn application_head(&self) -> Option<&QName> {
        self.application().map(|e| &e.name)
    }

    pub fn application_precedence(&self) -> i32 {
        self.application()
            .and_then(|e| e.notation.as_ref())
            .map(|n| n.precedence)
            .unwrap_or(i32::MAX)
    }

    pub fn symbolic_delimiters(&self) -> &[String] {
        &self.symbolic
    }

    pub fn is_word_delimiter(&self, s: &str) -> bool {
        self.words.contains(s)
    }

    pub fn is_delimiter(&self, s: &str) -> bool {
        self.words.contains(s) || self.symbolic.iter().any(|d| d == s)
    }

    /// Prefix notations starting with `delim`.
    pub fn prefix(&self, delim: &str) -> Vec<(&TableEntry, &Notation)> {
        self.with_notation()
            .filter(|(_, n)| n.fixity() == Fixity::Prefix && n.first_delimiter() == Some(delim))
            .collect()
    }

    /// Infix notations whose first delimiter is `delim`, excluding juxtaposition.
    pub fn infix(&self, delim: &str) -> Vec<(&TableEntry, &Notation)> {
        self.with_notation()
            .filter(|(_, n)| n.fixity() == Fixity::Infix && n.first_delimiter_any() == Some(delim))
            .collect()
    }

    /// True if `delim` occurs somewhere other than first in some notation.
    pub fn is_inner_delimiter(&self, delim: &str) -> bool {
        self.with_notation().any(|(_, n)| {
            let mut ds = n.delimiters();
            if n.fixity() == Fixity::Prefix {
                ds.next();
            }
            ds.any(|d| d == delim)
        })
    }

    pub fn notation_of(&self, name: &QName) -> Option<&Notation> {
        self.get(name).and_then(|e| e.notation.as_ref())
    }

    fn with_notation(&self) -> impl Iterator<Item = (&TableEntry, &Notation)> {
        self.entries.iter().filter_map(|e| e.notation.as_ref().map(|n| (e, n)))
    }
}

trait FirstDelim {
    fn first_delimiter_any(&self) -> Option<&str>;
}

impl FirstDelim for Notation {
    fn first_delimiter_any(&self) -> Option<&str> {
        self.delimiters().next()
    }
}

/// Table for parsing inside `theory`: the transitively included theories
/// first, then the theory's own declarations.
pub fn table_for<'d>(theory: &str, find: &dyn Fn(&str) -> Option<&'d crate::surface::TheorySkeleton>) -> NotationTable {
    fn visit<'d>(
        name: &str,
        find: &dyn Fn(&str) -> Option<&'d crate::surface::TheorySkeleton>,
        seen: &mut BTreeSet<String>,
        out: &mut Vec<TableEntry>,
    ) {
        if !seen.insert(name.to_string()) {
            return;
        }
        let Some(th) = find(name) else { return };
        for inc in &th.includes {
            visit(&inc.theory, find, seen, out);
        }
        for d in &th.declarations {
            out.push(TableEntry {
                name: QName::new(&th.name, &d.name),
                notation: d.notation.as_ref().map(|n| n.notation.clone()),
                typed: d.ty.is_some(),
            });
        }
    }
    let mut out = Vec::new();
    visit(theory, find, &mut BTreeSet::new(), &mut out);
    NotationTable::new(out)
}
