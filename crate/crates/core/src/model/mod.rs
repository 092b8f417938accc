//! Shared data model: terms, contexts, notations, declarations, judgments.

pub mod decl;
pub mod source;
pub mod term;

pub use decl::{Assoc, Component, Constant, Fixity, Judgment, Marker, Notation, SlotId, Theory, JUXTAPOSITION};
pub use source::{FileId, LineCol, LineIndex, SourceRef};
pub use term::{
    alpha_eq, equals_structural, fresh_name, hash_str, is_meta_name, substitute, substitute1, subterm_at, Context, Node, NotFound, QName,
    Substitution, Term, VarDecl, META_PREFIX,
};
