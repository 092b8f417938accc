//! Incremental re-checking.
//!
//! Every term slot has three layers: its source string, its parse and its
//! validation. An edit reparses only slots whose string changed and
//! revalidates only slots whose validation input changed or whose
//! dependencies now look different. Results of untouched slots are reused,
//! with their source references moved to where the text went.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::check::{build_tables, live_units, slot_term, solve_unit, with_builtin_lf, Diagnostic, World};
use crate::engine::{RuleSet, SolveResult};
use crate::lf::LF_SOURCE;
use crate::model::{hash_str, FileId, SlotId, SourceRef, Term};
use crate::structure::{find_theory, validate_structure, ValidationUnit};
use crate::surface::{parse_document, Document, ParsingUnit};
use crate::termparse::{parse_term, NotationTable, ParseResult};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LayerHashes {
    pub string: String,
    pub parsed: Option<String>,
    pub validated: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SlotNode {
    pub id: SlotId,
    pub string_rep: String,
    pub parsed: Option<ParseResult>,
    pub validated: Option<SolveResult>,
    pub hashes: LayerHashes,
    input: Option<String>,
    /// What each dependency looked like when this slot was validated.
    observed: BTreeMap<SlotId, String>,
}

#[derive(Clone, Debug, Default)]
pub struct DepGraph {
    pub nodes: BTreeMap<SlotId, SlotNode>,
    /// dependent → dependencies
    pub horizontal: BTreeMap<SlotId, BTreeSet<SlotId>>,
    /// Validation order.
    pub order: Vec<SlotId>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Plan {
    pub reparse: BTreeSet<SlotId>,
    pub structural: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleDetected(pub Vec<SlotId>);

impl std::fmt::Display for CycleDetected {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<String> = self.0.iter().map(|s| s.to_string()).collect();
        write!(f, "dependency cycle through {}", names.join(", "))
    }
}

impl std::error::Error for CycleDetected {}

impl DepGraph {
    pub fn dependents(&self, slot: &SlotId) -> BTreeSet<SlotId> {
        self.horizontal
            .iter()
            .filter(|(_, deps)| deps.contains(slot))
            .map(|(s, _)| s.clone())
            .collect()
    }

    /// Slots that transitively depend on a slot whose validated hash changed,
    /// in validation order.
    pub fn propagate(&self, revalidated: &BTreeMap<SlotId, bool>) -> Result<Vec<SlotId>, CycleDetected> {
        self.check_acyclic()?;
        let mut todo: Vec<SlotId> = revalidated.iter().filter(|(_, c)| **c).map(|(s, _)| s.clone()).collect();
        let mut out = BTreeSet::new();
        while let Some(s) = todo.pop() {
            for d in self.dependents(&s) {
                if out.insert(d.clone()) {
                    todo.push(d);
                }
            }
        }
        let mut ordered: Vec<SlotId> = self.order.iter().filter(|s| out.contains(*s)).cloned().collect();
        ordered.extend(out.into_iter().filter(|s| !self.order.contains(s)));
        Ok(ordered)
    }

    fn check_acyclic(&self) -> Result<(), CycleDetected> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Open,
            Done,
        }
        fn visit(g: &DepGraph, s: &SlotId, marks: &mut BTreeMap<SlotId, Mark>, stack: &mut Vec<SlotId>) -> Result<(), CycleDetected> {
            match marks.get(s) {
                Some(Mark::Done) => return Ok(()),
                Some(Mark::Open) => {
                    let from = stack.iter().position(|x| x == s).unwrap_or(0);
                    return Err(CycleDetected(stack[from..].to_vec()));
                }
                None => {}
            }
            marks.insert(s.clone(), Mark::Open);
            stack.push(s.clone());
            for d in g.horizontal.get(s).into_iter().flatten() {
                visit(g, d, marks, stack)?;
            }
            stack.pop();
            marks.insert(s.clone(), Mark::Done);
            Ok(())
        }
        let mut marks = BTreeMap::new();
        for s in self.horizontal.keys() {
            visit(self, s, &mut marks, &mut Vec::new())?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub edits: usize,
    pub reparsed: usize,
    pub revalidated: usize,
}

/// Outcome of one edit.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Delta {
    pub plan: Plan,
    pub reparsed: Vec<SlotId>,
    pub revalidated: Vec<SlotId>,
    pub added: Vec<Diagnostic>,
    pub removed: Vec<Diagnostic>,
}

/// A set of open files kept checked incrementally.
pub struct Workspace {
    rules: RuleSet,
    files: Vec<(String, String)>,
    world: World,
    graph: DepGraph,
    stats: Stats,
}

impl Workspace {
    pub fn new(rules: RuleSet) -> Self {
        Workspace {
            world: World::check(with_builtin_lf(Vec::new()), &rules),
            rules,
            files: Vec::new(),
            graph: DepGraph::default(),
            stats: Stats::default(),
        }
    }

    pub fn open<'s>(files: impl IntoIterator<Item = (&'s str, &'s str)>, rules: RuleSet) -> Self {
        let mut ws = Workspace::new(rules);
        let files: Vec<(String, String)> = files.into_iter().map(|(n, t)| (n.to_string(), t.to_string())).collect();
        ws.rebuild(files);
        ws
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn graph(&self) -> &DepGraph {
        &self.graph
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    pub fn files(&self) -> impl Iterator<Item = (&str, &str)> {
        self.files.iter().map(|(n, t)| (n.as_str(), t.as_str()))
    }

    pub fn text(&self, file: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == file).map(|(_, t)| t.as_str())
    }

    fn with_file(&self, file: &str, text: Option<&str>) -> Vec<(String, String)> {
        let mut files = self.files.clone();
        match (files.iter().position(|(n, _)| n == file), text) {
            (Some(i), Some(t)) => files[i].1 = t.to_string(),
            (Some(i), None) => {
                files.remove(i);
            }
            (None, Some(t)) => files.push((file.to_string(), t.to_string())),
            (None, None) => {}
        }
        files
    }

    /// What an edit would reparse, without doing it.
    pub fn plan(&self, file: &str, text: &str) -> Plan {
        let files = self.with_file(file, Some(text));
        let docs = documents(&files);
        let tables = build_tables(&docs);
        let (_, plan, _) = reparse(&self.world, &self.graph, &docs, &tables);
        plan
    }

    /// Replaces (or adds) a file and rechecks what is necessary.
    pub fn edit(&mut self, file: &str, text: &str) -> Delta {
        let files = self.with_file(file, Some(text));
        self.rebuild(files)
    }

    pub fn close(&mut self, file: &str) -> Delta {
        let files = self.with_file(file, None);
        self.rebuild(files)
    }

    fn rebuild(&mut self, files: Vec<(String, String)>) -> Delta {
        let docs = documents(&files);
        let tables = build_tables(&docs);
        let raw = raw_texts(&files);
        let (parsed, plan, refmap) = reparse(&self.world, &self.graph, &docs, &tables);
        let st = validate_structure(&docs, &parsed);

        let mut results: BTreeMap<SlotId, SolveResult> = BTreeMap::new();
        let mut observed: BTreeMap<SlotId, BTreeMap<SlotId, String>> = BTreeMap::new();
        let mut inputs: BTreeMap<SlotId, String> = BTreeMap::new();
        let mut revalidated = Vec::new();
        for u in &st.units {
            let input = input_hash(u, tables.get(u.theory()));
            let old = self.graph.nodes.get(&u.id);
            let reused = old.and_then(|n| {
                let r = n.validated.as_ref()?;
                let same_input = n.input.as_deref() == Some(input.as_str());
                let same_deps = n.observed.iter().all(|(d, seen)| observe(d, &docs, &results) == *seen);
                if !(same_input && same_deps) {
                    return None;
                }
                Some((remap_result(r, &refmap)?, n.observed.clone()))
            });
            let (r, seen) = match reused {
                Some(x) => x,
                None => {
                    let r = solve_unit(u, &docs, &results, &tables, &self.rules);
                    let seen = r.dependencies.iter().map(|d| (d.clone(), observe(d, &docs, &results))).collect();
                    revalidated.push(u.id.clone());
                    (r, seen)
                }
            };
            inputs.insert(u.id.clone(), input);
            observed.insert(u.id.clone(), seen);
            results.insert(u.id.clone(), r);
        }

        let before = self.world.diagnostics();
        self.world = World {
            docs,
            tables,
            parsed,
            units: st.units,
            structure_errors: st.errors,
            order: st.order,
            results,
        };
        self.graph = graph_of(&self.world, &raw, inputs, observed);
        self.files = files;
        let after = self.world.diagnostics();
        self.stats.edits += 1;
        self.stats.reparsed += plan.reparse.len();
        self.stats.revalidated += revalidated.len();
        Delta {
            reparsed: plan.reparse.iter().cloned().collect(),
            plan,
            revalidated,
            added: difference(&after, &before),
            removed: difference(&before, &after),
        }
    }
}

fn documents(files: &[(String, String)]) -> Vec<Document> {
    with_builtin_lf(files.iter().map(|(n, t)| parse_document(t, FileId::new(n))).collect())
}

fn raw_texts(files: &[(String, String)]) -> BTreeMap<FileId, String> {
    let mut m: BTreeMap<FileId, String> = files.iter().map(|(n, t)| (FileId::new(n), t.clone())).collect();
    m.entry(FileId::new(crate::check::BUILTIN_LF_FILE))
        .or_insert_with(|| LF_SOURCE.to_string());
    m
}

fn difference(a: &[Diagnostic], b: &[Diagnostic]) -> Vec<Diagnostic> {
    let mut rest: Vec<&Diagnostic> = b.iter().collect();
    let mut out = Vec::new();
    for d in a {
        match rest.iter().position(|x| *x == d) {
            Some(i) => {
                rest.swap_remove(i);
            }
            None => out.push(d.clone()),
        }
    }
    out
}

// ---- hashes

fn parse_hash(p: &ParseResult) -> String {
    let mut s = p.term.structural_key();
    for m in p.metas.iter() {
        s.push('|');
        s.push_str(&m.name);
    }
    for e in &p.errors {
        s.push('!');
        s.push_str(&e.message);
    }
    hash_str(&s)
}

/// Hash of the term a slot offers to lookups.
fn term_hash(r: &SolveResult) -> String {
    slot_term(&r.elaborated).structural_hash()
}

pub fn validated_hash(r: &SolveResult) -> String {
    let mut s = String::new();
    for t in r.elaborated.terms() {
        s.push_str(&t.structural_key());
        s.push('|');
    }
    for (m, v) in &r.substitution {
        s.push_str(&format!("{m}={};", v.structural_key()));
    }
    for (m, ok) in &r.solved {
        s.push_str(&format!("{m}:{ok};"));
    }
    for e in &r.errors {
        s.push_str(&format!("!{:?}/{}/{:?}/{}", e.kind, e.message, e.judgment, e.log.join("\n")));
    }
    for d in &r.dependencies {
        s.push_str(&format!("<{d}"));
    }
    hash_str(&s)
}

/// Entries that affect more than name resolution.
fn notation_fingerprint(t: &NotationTable) -> String {
    let mut s = String::new();
    for e in t.entries() {
        if let Some(n) = &e.notation {
            s.push_str(&format!("{}#{n}#{};", e.name, e.typed));
        }
    }
    if let Some(a) = t.application_head() {
        s.push_str(&format!("@{a}"));
    }
    hash_str(&s)
}

fn input_hash(u: &ValidationUnit, table: Option<&NotationTable>) -> String {
    let mut s = String::new();
    s.push_str(u.theory());
    for t in u.judgment.terms() {
        s.push('|');
        s.push_str(&t.structural_key());
    }
    for m in u.metas.iter() {
        s.push(',');
        s.push_str(&m.name);
    }
    // rendered logs depend on notations
    s.push_str(&table.map(notation_fingerprint).unwrap_or_default());
    hash_str(&s)
}

/// How a lookup of `d` looks to the slot being validated.
fn observe(d: &SlotId, docs: &[Document], results: &BTreeMap<SlotId, SolveResult>) -> String {
    let declared = find_theory(docs, d.constant.theory()).is_some_and(|t| t.get(d.constant.local()).is_some());
    match (declared, results.get(d)) {
        (false, _) => "unknown".into(),
        (true, Some(r)) => format!("found:{}", term_hash(r)),
        (true, None) => "absent".into(),
    }
}

// ---- reparsing

/// Whether a table change can alter how `text` parses.
fn table_affects(old: Option<&NotationTable>, new: Option<&NotationTable>, text: &str) -> bool {
    let (Some(old), Some(new)) = (old, new) else {
        return true;
    };
    if notation_fingerprint(old) != notation_fingerprint(new) {
        return true;
    }
    let key = |e: &crate::termparse::TableEntry| (e.name.clone(), e.typed);
    let a: BTreeSet<_> = old.entries().iter().map(key).collect();
    let b: BTreeSet<_> = new.entries().iter().map(key).collect();
    a.symmetric_difference(&b)
        .any(|(n, _)| mentions(text, n.local()) || mentions(text, n.as_str()))
}

/// Whole-identifier occurrence for word names, substring otherwise.
fn mentions(text: &str, name: &str) -> bool {
    use crate::termparse::{is_word, is_word_char};
    let ident = |c: char| is_word_char(c) || c == '?';
    if !is_word(&name.replace('?', "")) {
        return text.contains(name);
    }
    text.split(|c: char| !ident(c)).any(|w| w == name)
}

type RefMap = BTreeMap<SourceRef, Option<SourceRef>>;

fn note(map: &mut RefMap, old: &SourceRef, new: &SourceRef) {
    match map.get(old) {
        Some(Some(x)) if x != new => {
            map.insert(old.clone(), None);
        }
        Some(_) => {}
        None => {
            map.insert(old.clone(), Some(new.clone()));
        }
    }
}

fn collect_refs(t: &Term, out: &mut Vec<Option<SourceRef>>) {
    out.push(t.src.clone());
    if let Some((_, bound, _)) = t.as_complex() {
        out.extend(bound.iter().map(|d| d.src.clone()));
    }
    for c in t.children() {
        collect_refs(c, out);
    }
}

fn parse_refs(p: &ParseResult) -> Vec<Option<SourceRef>> {
    let mut v = Vec::new();
    collect_refs(&p.term, &mut v);
    v.extend(p.metas.iter().map(|m| m.src.clone()));
    v.extend(p.errors.iter().map(|e| Some(e.src.clone())));
    v
}

fn shift_parse(p: &ParseResult, delta: isize, file: &FileId) -> ParseResult {
    let mut p = p.clone();
    let mut f = |r: &SourceRef| {
        let mut r = r.shifted(delta);
        r.file = file.clone();
        r
    };
    p.term.map_refs(&mut f);
    for m in p.metas.0.iter_mut() {
        if let Some(r) = &m.src {
            m.src = Some(f(r));
        }
    }
    for e in p.errors.iter_mut() {
        e.src = f(&e.src);
    }
    p
}

/// Parses every live slot, reusing old parses of unchanged strings. Also
/// returns where each old source reference went.
fn reparse(
    old: &World,
    graph: &DepGraph,
    docs: &[Document],
    tables: &BTreeMap<String, NotationTable>,
) -> (BTreeMap<SlotId, ParseResult>, Plan, RefMap) {
    let units: Vec<&ParsingUnit> = live_units(docs);
    let mut parsed = BTreeMap::new();
    let mut plan = Plan {
        structural: outline(&old.docs) != outline(docs),
        ..Plan::default()
    };
    let mut map = RefMap::new();
    for u in units {
        if parsed.contains_key(&u.slot) {
            continue;
        }
        let Some(table) = tables.get(&u.theory) else { continue };
        let old_unit = old_unit(old, &u.slot);
        let old_parse = graph.nodes.get(&u.slot).and_then(|n| n.parsed.as_ref());
        let reusable = match (old_unit, old_parse) {
            (Some(ou), Some(_)) => {
                ou.text == u.text && ou.theory == u.theory && !table_affects(old.tables.get(&u.theory), Some(table), &u.text)
            }
            _ => false,
        };
        let p = if reusable {
            let (ou, op) = (old_unit.unwrap(), old_parse.unwrap());
            let delta = u.src.start as isize - ou.src.start as isize;
            let p = shift_parse(op, delta, &u.src.file);
            for (a, b) in parse_refs(op).iter().zip(parse_refs(&p).iter()) {
                if let (Some(a), Some(b)) = (a, b) {
                    note(&mut map, a, b);
                }
            }
            p
        } else {
            plan.reparse.insert(u.slot.clone());
            let p = parse_term(u, table);
            if let Some(op) = old_parse {
                if parse_hash(op) == parse_hash(&p) {
                    for (a, b) in parse_refs(op).iter().zip(parse_refs(&p).iter()) {
                        if let (Some(a), Some(b)) = (a, b) {
                            note(&mut map, a, b);
                        }
                    }
                }
            }
            p
        };
        if let Some(ou) = old_unit {
            note(&mut map, &ou.src, &u.src);
        }
        parsed.insert(u.slot.clone(), p);
    }
    (parsed, plan, map)
}

fn old_unit<'w>(w: &'w World, slot: &SlotId) -> Option<&'w ParsingUnit> {
    let th = find_theory(&w.docs, slot.constant.theory())?;
    th.get(slot.constant.local())?.unit(slot.component)
}

/// Declarations, includes and notations: what makes an edit structural.
fn outline(docs: &[Document]) -> Vec<String> {
    let mut v = Vec::new();
    for d in docs {
        for t in &d.theories {
            v.push(format!("theory {} in {}", t.name, d.file));
            for i in &t.includes {
                v.push(format!("include {}", i.theory));
            }
            for c in &t.declarations {
                v.push(format!(
                    "{} {} {} {:?}",
                    c.name,
                    c.ty.is_some(),
                    c.def.is_some(),
                    c.notation.as_ref().map(|n| n.notation.to_string())
                ));
            }
        }
    }
    v
}

fn remap_term(t: &Term, map: &RefMap) -> Option<Term> {
    let mut ok = true;
    let mut t = t.clone();
    t.map_refs(&mut |r| match map.get(r) {
        Some(Some(n)) => n.clone(),
        _ => {
            ok = false;
            r.clone()
        }
    });
    ok.then_some(t)
}

/// The old result with every reference moved, or `None` if some reference
/// has nowhere definite to go.
fn remap_result(r: &SolveResult, map: &RefMap) -> Option<SolveResult> {
    let mut out = r.clone();
    for v in out.substitution.values_mut() {
        *v = remap_term(v, map)?;
    }
    let mut ok = true;
    out.elaborated = r.elaborated.map_terms(|t| match remap_term(t, map) {
        Some(t) => t,
        None => {
            ok = false;
            t.clone()
        }
    });
    if !ok {
        return None;
    }
    for e in out.errors.iter_mut() {
        if let Some(s) = &e.src {
            e.src = Some(map.get(s)?.clone()?);
        }
    }
    Some(out)
}

fn graph_of(
    w: &World,
    raw: &BTreeMap<FileId, String>,
    inputs: BTreeMap<SlotId, String>,
    mut observed: BTreeMap<SlotId, BTreeMap<SlotId, String>>,
) -> DepGraph {
    let mut g = DepGraph::default();
    for (slot, p) in &w.parsed {
        let Some(u) = old_unit(w, slot) else { continue };
        let string_rep = raw
            .get(&u.src.file)
            .map(|t| u.src.slice(t).to_string())
            .unwrap_or_else(|| u.text.clone());
        let validated = w.results.get(slot).cloned();
        g.nodes.insert(
            slot.clone(),
            SlotNode {
                id: slot.clone(),
                hashes: LayerHashes {
                    string: hash_str(&string_rep),
                    parsed: Some(parse_hash(p)),
                    validated: validated.as_ref().map(validated_hash),
                },
                string_rep,
                parsed: Some(p.clone()),
                validated,
                input: inputs.get(slot).cloned(),
                observed: observed.remove(slot).unwrap_or_default(),
            },
        );
    }
    for (slot, r) in &w.results {
        let deps: BTreeSet<SlotId> = r
            .dependencies
            .iter()
            .filter(|d| g.nodes.contains_key(*d) && *d != slot)
            .cloned()
            .collect();
        g.horizontal.insert(slot.clone(), deps);
    }
    g.order = w.units.iter().map(|u| u.id.clone()).collect();
    g
}
