//! Whole-project checking: parse every slot, validate structure, solve every
//! unit in dependency order.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{solve, Environment, Lookup, RuleSet, SolveResult};
use crate::lf::{lf_rules, LF_SOURCE, LF_THEORY};
use crate::model::{Component, FileId, Judgment, Node, QName, SlotId, SourceRef, Term};
use crate::render::{render, RenderOptions};
use crate::structure::{find_theory, theory_order, validate_structure, StructureError, ValidationUnit};
use crate::surface::{parse_document, Document, ParsingUnit};
use crate::termparse::{parse_term, table_for, NotationTable, ParseResult};

pub const BUILTIN_LF_FILE: &str = "builtin:lf.mmt";

/// Adds the shipped LF theory unless some document declares `LF`.
pub fn with_builtin_lf(mut docs: Vec<Document>) -> Vec<Document> {
    if find_theory(&docs, LF_THEORY).is_none() {
        docs.insert(0, parse_document(LF_SOURCE, FileId::new(BUILTIN_LF_FILE)));
    }
    docs
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    /// `structure`, `parse` or `type`.
    pub phase: String,
    pub message: String,
    #[serde(rename = "ref", default, skip_serializing_if = "Option::is_none")]
    pub src: Option<SourceRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<SlotId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub log: Vec<String>,
}

/// Notation tables for every theory.
pub fn build_tables(docs: &[Document]) -> BTreeMap<String, NotationTable> {
    let (order, _) = theory_order(docs);
    order.iter().map(|t| (t.clone(), table_for(t, &|n| find_theory(docs, n)))).collect()
}

/// Parses every term slot against its theory's table.
pub fn parse_all(docs: &[Document], tables: &BTreeMap<String, NotationTable>) -> BTreeMap<SlotId, ParseResult> {
    let units = live_units(docs);
    let parsed: Vec<(SlotId, ParseResult)> = units
        .par_iter()
        .filter_map(|u| tables.get(&u.theory).map(|t| (u.slot.clone(), parse_term(u, t))))
        .collect();
    let mut out = BTreeMap::new();
    for (k, v) in parsed {
        out.entry(k).or_insert(v);
    }
    out
}

/// Parsing units of every theory that is not shadowed by an earlier one of
/// the same name.
pub fn live_units(docs: &[Document]) -> Vec<&ParsingUnit> {
    docs.iter()
        .flat_map(|d| d.theories.iter())
        .filter(|th| find_theory(docs, &th.name).is_some_and(|f| std::ptr::eq(f, *th)))
        .flat_map(|th| th.declarations.iter().flat_map(|d| d.units()))
        .collect()
}

/// The term a validated slot stands for.
pub fn slot_term(j: &Judgment) -> &Term {
    match j {
        Judgment::Inhabitable { ty, .. } => ty,
        Judgment::Typing { term, .. } => term,
        Judgment::Equal { lhs, .. } => lhs,
    }
}

/// Read-only view of validated slots, as seen from one declaration.
pub struct SlotEnv<'w> {
    pub docs: &'w [Document],
    pub results: &'w BTreeMap<SlotId, SolveResult>,
    pub table: &'w NotationTable,
    pub theory: String,
    /// The declaration being validated; later own declarations are invisible.
    pub current: Option<String>,
}

impl<'w> SlotEnv<'w> {
    fn declared(&self, c: &QName) -> Option<&crate::surface::DeclSkeleton> {
        find_theory(self.docs, c.theory())?.get(c.local())
    }
}

/// Gives metas left in another slot's term names that cannot clash.
fn foreign(t: &Term, owner: &QName) -> Term {
    if t.metas().is_empty() {
        return t.clone();
    }
    let mut t = t.clone();
    fn go(t: &mut Term, owner: &QName) {
        if let Node::Var { name } = &mut t.node {
            if crate::model::is_meta_name(name) {
                *name = format!("{name}@{owner}");
            }
        }
        for c in t.children_mut() {
            go(c, owner);
        }
    }
    go(&mut t, owner);
    t
}

impl<'w> Environment for SlotEnv<'w> {
    fn lookup(&mut self, name: &QName, component: Component) -> Lookup {
        if self.declared(name).is_none() {
            return Lookup::Unknown;
        }
        match self.results.get(&SlotId::new(name.clone(), component)) {
            Some(r) => Lookup::Found(foreign(slot_term(&r.elaborated), name)),
            None => Lookup::Absent,
        }
    }

    fn render(&self, t: &Term) -> String {
        render(t, self.table, RenderOptions::source())
    }

    fn visible(&self) -> Vec<QName> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        fn walk(docs: &[Document], th: &str, stop: Option<&str>, seen: &mut BTreeSet<String>, out: &mut Vec<QName>) {
            if !seen.insert(th.to_string()) {
                return;
            }
            let Some(t) = find_theory(docs, th) else { return };
            for inc in &t.includes {
                walk(docs, &inc.theory, None, seen, out);
            }
            for d in &t.declarations {
                if Some(d.name.as_str()) == stop {
                    break;
                }
                out.push(QName::new(th, &d.name));
            }
        }
        walk(self.docs, &self.theory, self.current.as_deref(), &mut seen, &mut out);
        out
    }
}

/// Solves one unit against the results validated so far.
pub fn solve_unit(
    unit: &ValidationUnit,
    docs: &[Document],
    results: &BTreeMap<SlotId, SolveResult>,
    tables: &BTreeMap<String, NotationTable>,
    rules: &RuleSet,
) -> SolveResult {
    let empty = NotationTable::default();
    let mut env = SlotEnv {
        docs,
        results,
        table: tables.get(unit.theory()).unwrap_or(&empty),
        theory: unit.theory().to_string(),
        current: Some(unit.id.constant.local().to_string()),
    };
    solve(unit.theory(), &unit.metas, &unit.judgment, rules, &mut env)
}

/// A fully checked snapshot of a set of documents.
#[derive(Clone, Debug)]
pub struct World {
    pub docs: Vec<Document>,
    pub tables: BTreeMap<String, NotationTable>,
    pub parsed: BTreeMap<SlotId, ParseResult>,
    pub units: Vec<ValidationUnit>,
    pub structure_errors: Vec<StructureError>,
    pub order: Vec<String>,
    pub results: BTreeMap<SlotId, SolveResult>,
}

impl World {
    /// Full check. `docs` should already contain LF (see [`with_builtin_lf`]).
    pub fn check(docs: Vec<Document>, rules: &RuleSet) -> World {
        World::check_with(docs, rules, BTreeMap::new(), BTreeMap::new())
    }

    /// Full check that takes the given parses and results as already done.
    pub fn check_with(
        docs: Vec<Document>,
        rules: &RuleSet,
        mut known_parses: BTreeMap<SlotId, ParseResult>,
        mut known_results: BTreeMap<SlotId, SolveResult>,
    ) -> World {
        let tables = build_tables(&docs);
        let parsed: BTreeMap<SlotId, ParseResult> = if known_parses.is_empty() {
            parse_all(&docs, &tables)
        } else {
            let units: Vec<&ParsingUnit> = live_units(&docs)
                .into_iter()
                .filter(|u| !known_parses.contains_key(&u.slot))
                .collect();
            let fresh: Vec<(SlotId, ParseResult)> = units
                .par_iter()
                .filter_map(|u| tables.get(&u.theory).map(|t| (u.slot.clone(), parse_term(u, t))))
                .collect();
            let live: BTreeSet<SlotId> = live_units(&docs).iter().map(|u| u.slot.clone()).collect();
            known_parses.retain(|k, _| live.contains(k));
            known_parses.extend(fresh);
            known_parses
        };
        let st = validate_structure(&docs, &parsed);
        let mut results = BTreeMap::new();
        for u in &st.units {
            let r = match known_results.remove(&u.id) {
                Some(r) => r,
                None => solve_unit(u, &docs, &results, &tables, rules),
            };
            results.insert(u.id.clone(), r);
        }
        World {
            docs,
            tables,
            parsed,
            units: st.units,
            structure_errors: st.errors,
            order: st.order,
            results,
        }
    }

    /// Parses the texts and checks them with the LF rules.
    pub fn from_sources<'s>(files: impl IntoIterator<Item = (&'s str, &'s str)>) -> World {
        let docs = files
            .into_iter()
            .map(|(name, text)| parse_document(text, FileId::new(name)))
            .collect();
        World::check(with_builtin_lf(docs), &lf_rules())
    }

    pub fn table(&self, theory: &str) -> Option<&NotationTable> {
        self.tables.get(theory)
    }

    pub fn unit(&self, slot: &SlotId) -> Option<&ValidationUnit> {
        self.units.iter().find(|u| u.id == *slot)
    }

    /// The elaborated term of a slot.
    pub fn elaborated(&self, slot: &SlotId) -> Option<&Term> {
        self.results.get(slot).map(|r| slot_term(&r.elaborated))
    }

    pub fn env_for(&self, theory: &str, current: Option<&str>) -> SlotEnv<'_> {
        static EMPTY: std::sync::OnceLock<NotationTable> = std::sync::OnceLock::new();
        SlotEnv {
            docs: &self.docs,
            results: &self.results,
            table: self.tables.get(theory).unwrap_or_else(|| EMPTY.get_or_init(NotationTable::default)),
            theory: theory.to_string(),
            current: current.map(str::to_string),
        }
    }

    pub fn render_slot(&self, slot: &SlotId, opts: RenderOptions) -> Option<String> {
        let t = self.elaborated(slot)?;
        Some(render(t, self.table(slot.constant.theory())?, opts))
    }

    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for d in &self.docs {
            for e in &d.errors {
                out.push(Diagnostic {
                    severity: Severity::Error,
                    phase: "structure".into(),
                    message: e.message.clone(),
                    src: Some(e.src.clone()),
                    slot: None,
                    log: Vec::new(),
                });
            }
        }
        for e in &self.structure_errors {
            out.push(Diagnostic {
                severity: Severity::Error,
                phase: "structure".into(),
                message: e.message.clone(),
                src: Some(e.src.clone()),
                slot: None,
                log: Vec::new(),
            });
        }
        for (slot, p) in &self.parsed {
            for e in &p.errors {
                out.push(Diagnostic {
                    severity: Severity::Error,
                    phase: "parse".into(),
                    message: e.message.clone(),
                    src: Some(e.src.clone()),
                    slot: Some(slot.clone()),
                    log: Vec::new(),
                });
            }
        }
        for u in &self.units {
            if let Some(r) = self.results.get(&u.id) {
                if self.parsed.get(&u.id).is_some_and(|p| !p.errors.is_empty()) {
                    // type errors in unparsable slots are noise
                    continue;
                }
                for e in &r.errors {
                    out.push(Diagnostic {
                        severity: Severity::Error,
                        phase: "type".into(),
                        message: e.message.clone(),
                        src: e.src.clone().or_else(|| Some(u.src.clone())),
                        slot: Some(u.id.clone()),
                        log: e.log.clone(),
                    });
                }
            }
        }
        out.sort_by(|a, b| {
            let ka = a.src.as_ref().map(|r| (r.file.clone(), r.start, r.end));
            let kb = b.src.as_ref().map(|r| (r.file.clone(), r.start, r.end));
            ka.cmp(&kb).then(a.message.cmp(&b.message))
        });
        // one mistake may fail several constraints at the same place
        out.dedup_by(|a, b| a.src == b.src && a.message == b.message && a.slot == b.slot);
        out
    }

    pub fn error_count(&self) -> usize {
        self.diagnostics().iter().filter(|d| d.severity == Severity::Error).count()
    }
}

#[cfg(test)]
mod tests;
