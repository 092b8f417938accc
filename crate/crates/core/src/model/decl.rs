use std::fmt;

use serde::{Deserialize, Serialize};

use super::source::SourceRef;
use super::term::{Context, QName, Term};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "marker", rename_all = "lowercase")]
pub enum Marker {
    /// The n-th position, counting bound variables first.
    Var {
        index: usize,
        #[serde(default, skip_serializing_if = "is_false")]
        sequence: bool,
    },
    Arg {
        index: usize,
        #[serde(default, skip_serializing_if = "is_false")]
        sequence: bool,
    },
    Delim {
        text: String,
    },
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Glyph for juxtaposition in a notation: `1 ⎵ 2` means "1 followed by 2".
pub const JUXTAPOSITION: &str = "⎵";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Assoc {
    #[default]
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Notation {
    pub markers: Vec<Marker>,
    #[serde(default)]
    pub precedence: i32,
    #[serde(default)]
    pub assoc: Assoc,
}

/// Shape of a notation as far as the term parser is concerned.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fixity {
    /// Starts with a delimiter: `[ V1 ] 2`, `ded 1`, `⟨ 1 ⟩`, `prop`.
    Prefix,
    /// Starts with an argument: `1 ∧ 2`, `1 ⎵ 2…`.
    Infix,
}

impl Notation {
    /// Markers with the juxtaposition glyph removed.
    pub fn significant(&self) -> impl Iterator<Item = &Marker> {
        self.markers
            .iter()
            .filter(|m| !matches!(m, Marker::Delim { text } if text == JUXTAPOSITION))
    }

    pub fn var_count(&self) -> usize {
        self.markers
            .iter()
            .filter_map(|m| match m {
                Marker::Var { index, .. } => Some(*index),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Number of argument positions, mentioned or implicit.
    pub fn arity(&self) -> usize {
        let vars = self.var_count();
        self.markers
            .iter()
            .filter_map(|m| match m {
                Marker::Arg { index, .. } => Some(index.saturating_sub(vars)),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Argument positions (0-based) not mentioned by any marker.
    pub fn implicit_positions(&self) -> Vec<usize> {
        let vars = self.var_count();
        let mentioned: Vec<usize> = self
            .markers
            .iter()
            .filter_map(|m| match m {
                Marker::Arg { index, .. } if *index > vars => Some(index - vars - 1),
                _ => None,
            })
            .collect();
        (0..self.arity()).filter(|i| !mentioned.contains(i)).collect()
    }

    pub fn has_sequence_arg(&self) -> bool {
        self.markers.iter().any(|m| matches!(m, Marker::Arg { sequence: true, .. }))
    }

    pub fn fixity(&self) -> Fixity {
        match self.significant().next() {
            Some(Marker::Delim { .. }) | None => Fixity::Prefix,
            _ => Fixity::Infix,
        }
    }

    pub fn binds(&self) -> bool {
        self.var_count() > 0
    }

    pub fn is_juxtaposition(&self) -> bool {
        self.fixity() == Fixity::Infix && self.significant().all(|m| !matches!(m, Marker::Delim { .. }))
    }

    pub fn delimiters(&self) -> impl Iterator<Item = &str> {
        self.significant().filter_map(|m| match m {
            Marker::Delim { text } => Some(text.as_str()),
            _ => None,
        })
    }

    pub fn first_delimiter(&self) -> Option<&str> {
        match self.significant().next() {
            Some(Marker::Delim { text }) => Some(text),
            _ => None,
        }
    }

    /// Marker indices must be pairwise distinct.
    pub fn validate(&self) -> Result<(), String> {
        let mut seen = Vec::new();
        for m in &self.markers {
            let idx = match m {
                Marker::Var { index, .. } | Marker::Arg { index, .. } => *index,
                Marker::Delim { .. } => continue,
            };
            if idx == 0 {
                return Err("marker indices start at 1".into());
            }
            if seen.contains(&idx) {
                return Err(format!("marker index {idx} used twice"));
            }
            seen.push(idx);
        }
        let vars = self.var_count();
        for m in &self.markers {
            if let Marker::Arg { index, .. } = m {
                if *index <= vars {
                    return Err(format!("argument marker {index} collides with variable positions"));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Notation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .markers
            .iter()
            .map(|m| match m {
                Marker::Var { index, sequence } => {
                    format!("V{index}{}", if *sequence { "…" } else { "" })
                }
                Marker::Arg { index, sequence } => {
                    format!("{index}{}", if *sequence { "…" } else { "" })
                }
                Marker::Delim { text } => text.clone(),
            })
            .collect();
        write!(f, "{}", parts.join(" "))?;
        if self.precedence != 0 || self.assoc == Assoc::Right {
            write!(f, " prec {}", self.precedence)?;
        }
        if self.assoc == Assoc::Right {
            write!(f, " right")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Type,
    Definiens,
}

impl Component {
    pub fn tag(self) -> &'static str {
        match self {
            Component::Type => "tp",
            Component::Definiens => "def",
        }
    }
}

/// One term slot of a constant: `cᵗᵖ` or `cᵈᵉᶠ`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SlotId {
    pub constant: QName,
    pub component: Component,
}

impl SlotId {
    pub fn new(constant: QName, component: Component) -> Self {
        SlotId { constant, component }
    }

    pub fn tp(constant: QName) -> Self {
        SlotId::new(constant, Component::Type)
    }

    pub fn def(constant: QName) -> Self {
        SlotId::new(constant, Component::Definiens)
    }
}

impl fmt::Display for SlotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}^{}", self.constant, self.component.tag())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constant {
    pub name: String,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub ty: Option<Term>,
    #[serde(rename = "def", default, skip_serializing_if = "Option::is_none")]
    pub def: Option<Term>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notation: Option<Notation>,
    #[serde(rename = "ref", default, skip_serializing_if = "Option::is_none")]
    pub src: Option<SourceRef>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theory {
    pub name: String,
    pub includes: Vec<String>,
    pub declarations: Vec<Constant>,
    #[serde(rename = "ref", default, skip_serializing_if = "Option::is_none")]
    pub src: Option<SourceRef>,
}

impl Theory {
    pub fn qname(&self, local: &str) -> QName {
        QName::new(&self.name, local)
    }

    pub fn get(&self, local: &str) -> Option<&Constant> {
        self.declarations.iter().find(|c| c.name == local)
    }
}

/// The three judgment forms, each relative to a theory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "judgment", rename_all = "lowercase")]
pub enum Judgment {
    Inhabitable {
        theory: String,
        #[serde(rename = "type")]
        ty: Term,
    },
    Typing {
        theory: String,
        term: Term,
        #[serde(rename = "type")]
        ty: Term,
    },
    Equal {
        theory: String,
        lhs: Term,
        rhs: Term,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<Term>,
    },
}

impl Judgment {
    pub fn theory(&self) -> &str {
        match self {
            Judgment::Inhabitable { theory, .. } | Judgment::Typing { theory, .. } | Judgment::Equal { theory, .. } => theory,
        }
    }

    pub fn terms(&self) -> Vec<&Term> {
        match self {
            Judgment::Inhabitable { ty, .. } => vec![ty],
            Judgment::Typing { term, ty, .. } => vec![term, ty],
            Judgment::Equal { lhs, rhs, at, .. } => {
                let mut v = vec![lhs, rhs];
                v.extend(at.iter());
                v
            }
        }
    }

    pub fn map_terms(&self, mut f: impl FnMut(&Term) -> Term) -> Judgment {
        match self {
            Judgment::Inhabitable { theory, ty } => Judgment::Inhabitable {
                theory: theory.clone(),
                ty: f(ty),
            },
            Judgment::Typing { theory, term, ty } => Judgment::Typing {
                theory: theory.clone(),
                term: f(term),
                ty: f(ty),
            },
            Judgment::Equal { theory, lhs, rhs, at } => Judgment::Equal {
                theory: theory.clone(),
                lhs: f(lhs),
                rhs: f(rhs),
                at: at.as_ref().map(f),
            },
        }
    }

    /// Free variables of the judgment's terms must all be declared in `ctx`.
    pub fn is_well_scoped(&self, ctx: &Context) -> bool {
        self.terms().iter().all(|t| t.free_vars().iter().all(|v| ctx.contains(v)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arg(i: usize) -> Marker {
        Marker::Arg { index: i, sequence: false }
    }

    fn delim(s: &str) -> Marker {
        Marker::Delim { text: s.into() }
    }

    #[test]
    fn implicit_positions_of_prefix_notation() {
        let n = Notation {
            markers: vec![delim("andI"), arg(3), arg(4)],
            precedence: 0,
            assoc: Assoc::Left,
        };
        assert_eq!(n.arity(), 4);
        assert_eq!(n.implicit_positions(), vec![0, 1]);
        assert_eq!(n.fixity(), Fixity::Prefix);
    }

    #[test]
    fn binder_counts_variables_first() {
        let n = Notation {
            markers: vec![delim("["), Marker::Var { index: 1, sequence: true }, delim("]"), arg(2)],
            precedence: 0,
            assoc: Assoc::Left,
        };
        assert_eq!(n.var_count(), 1);
        assert_eq!(n.arity(), 1);
        assert!(n.implicit_positions().is_empty());
        assert!(n.binds());
    }

    #[test]
    fn duplicate_marker_rejected() {
        let n = Notation {
            markers: vec![arg(1), delim("+"), arg(1)],
            precedence: 0,
            assoc: Assoc::Left,
        };
        assert!(n.validate().is_err());
    }

    #[test]
    fn juxtaposition_detected() {
        let n = Notation {
            markers: vec![arg(1), delim(JUXTAPOSITION), Marker::Arg { index: 2, sequence: true }],
            precedence: 100,
            assoc: Assoc::Left,
        };
        assert!(n.is_juxtaposition());
        assert_eq!(n.fixity(), Fixity::Infix);
    }
}
