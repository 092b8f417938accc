use super::table::{is_word, NotationTable};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TokKind {
    Ident,
    /// A notation delimiter. Word delimiters may still be used as variable names.
    Delim,
    LParen,
    RParen,
    Colon,
    Comma,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub kind: TokKind,
    pub text: String,
    /// Byte offsets relative to the lexed text.
    pub start: usize,
    pub end: usize,
}

fn builtin(c: char) -> Option<TokKind> {
    match c {
        '(' => Some(TokKind::LParen),
        ')' => Some(TokKind::RParen),
        ':' => Some(TokKind::Colon),
        ',' => Some(TokKind::Comma),
        _ => None,
    }
}

fn symbolic_at<'t>(table: &'t NotationTable, rest: &str) -> Option<&'t str> {
    table
        .symbolic_delimiters()
        .iter()
        .find(|d| rest.starts_with(d.as_str()))
        .map(|d| d.as_str())
}

/// Splits `text` into tokens. `//` comments run to the end of the line.
pub fn tokenize(text: &str, table: &NotationTable) -> Vec<Token> {
    let mut toks = Vec::new();
    let mut i = 0;
    while i < text.len() {
        let rest = &text[i..];
        let c = rest.chars().next().unwrap();
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        if rest.starts_with("//") {
            i += rest.find('\n').unwrap_or(rest.len());
            continue;
        }
        if let Some(d) = symbolic_at(table, rest) {
            toks.push(Token {
                kind: TokKind::Delim,
                text: d.to_string(),
                start: i,
                end: i + d.len(),
            });
            i += d.len();
            continue;
        }
        if let Some(kind) = builtin(c) {
            toks.push(Token {
                kind,
                text: c.to_string(),
                start: i,
                end: i + 1,
            });
            i += 1;
            continue;
        }
        let mut j = i;
        while j < text.len() {
            let r = &text[j..];
            let ch = r.chars().next().unwrap();
            if ch.is_whitespace() || builtin(ch).is_some() || r.starts_with("//") && j > i {
                break;
            }
            if j > i && symbolic_at(table, r).is_some() {
                break;
            }
            j += ch.len_utf8();
        }
        let word = &text[i..j];
        let kind = if is_word(word) && table.is_word_delimiter(word) {
            TokKind::Delim
        } else {
            TokKind::Ident
        };
        toks.push(Token {
            kind,
            text: word.to_string(),
            start: i,
            end: j,
        });
        i = j;
    }
    toks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Marker, Notation, QName};
    use crate::termparse::table::TableEntry;

    fn table() -> NotationTable {
        let n = |ms: Vec<Marker>| Notation {
            markers: ms,
            precedence: 0,
            assoc: Default::default(),
        };
        let d = |s: &str| Marker::Delim { text: s.into() };
        let a = |i| Marker::Arg { index: i, sequence: false };
        NotationTable::new(vec![
            TableEntry {
                name: QName::new("T", "imp"),
                notation: Some(n(vec![a(1), d("⟹"), a(2)])),
                typed: true,
            },
            TableEntry {
                name: QName::new("T", "eq"),
                notation: Some(n(vec![a(1), d("="), a(2)])),
                typed: true,
            },
            TableEntry {
                name: QName::new("T", "eqq"),
                notation: Some(n(vec![a(1), d("=="), a(2)])),
                typed: true,
            },
            TableEntry {
                name: QName::new("T", "ded"),
                notation: Some(n(vec![d("ded"), a(1)])),
                typed: true,
            },
        ])
    }

    fn kinds(s: &str) -> Vec<(TokKind, String)> {
        tokenize(s, &table()).into_iter().map(|t| (t.kind, t.text)).collect()
    }

    #[test]
    fn symbolic_delimiters_split_words() {
        let ks = kinds("a⟹b");
        assert_eq!(ks.len(), 3);
        assert_eq!(ks[1], (TokKind::Delim, "⟹".into()));
    }

    #[test]
    fn longest_delimiter_wins() {
        let ks = kinds("a==b = c");
        assert_eq!(ks[1].1, "==");
        assert_eq!(ks[3].1, "=");
    }

    #[test]
    fn word_delimiters_only_whole() {
        let ks = kinds("ded deduce (x:A), y // ded");
        assert_eq!(ks[0].0, TokKind::Delim);
        assert_eq!(ks[1], (TokKind::Ident, "deduce".into()));
        assert_eq!(ks[2].0, TokKind::LParen);
        assert_eq!(ks[4].0, TokKind::Colon);
        assert_eq!(ks.len(), 9);
    }

    #[test]
    fn offsets_are_bytes() {
        let t = tokenize("p ∧ p", &NotationTable::default());
        // no ∧ delimiter here: it lexes as an identifier
        assert_eq!((t[1].start, t[1].end), (2, 5));
        assert_eq!(t[2].start, 6);
    }
}
