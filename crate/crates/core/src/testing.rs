//! Generators and oracles shared by the property tests of this crate and by
//! downstream acceptance tests. Enabled by the `testing` feature.
//!
//! Every check returns `Err` with a readable account instead of panicking,
//! so callers can count failures.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::change::Workspace;
use crate::check::{SlotEnv, World};
use crate::engine::{solve, solve_in, Environment, Lookup, SolveResult};
use crate::index::{IndexEntry, SearchQuery, TermIndex};
use crate::lf::{lf, lf_rules};
use crate::model::{alpha_eq, substitute, Component, Context, FileId, Judgment, QName, SlotId, SourceRef, Substitution, Term, VarDecl};
use crate::render::{render, RenderOptions};
use crate::termparse::{parse_text, ParseResult};

pub mod fixtures {
    pub const LF: &str = include_str!("../../../fixtures/lf.mmt");
    pub const PL: &str = include_str!("../../../fixtures/pl.mmt");
    pub const TWO: &str = include_str!("../../../fixtures/two.mmt");
}

use fixtures::{LF, PL, TWO};

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)*) => {
        if !$cond {
            return Err(format!($($fmt)*));
        }
    };
}

// ---- incremental checking

/// Incremental state must equal a from-scratch check, references included.
pub fn matches_full(ws: &Workspace) -> Result<(), String> {
    let files: Vec<(&str, &str)> = ws.files().collect();
    let full = World::from_sources(files.iter().copied());
    let w = ws.world();
    ensure!(
        w.diagnostics() == full.diagnostics(),
        "diagnostics differ:\n{:#?}\nvs\n{:#?}",
        w.diagnostics(),
        full.diagnostics()
    );
    let json = |r: &BTreeMap<SlotId, SolveResult>| serde_json::to_value(r.iter().collect::<Vec<_>>()).expect("serializable");
    ensure!(json(&w.results) == json(&full.results), "results differ");
    let pj = |p: &BTreeMap<SlotId, ParseResult>| serde_json::to_value(p.iter().collect::<Vec<_>>()).expect("serializable");
    ensure!(pj(&w.parsed) == pj(&full.parsed), "parses differ");
    Ok(())
}

const VOCAB: [&str; 16] = [
    "A", "X", "Y", "h", "p", "prop", "ded", "∧", "⟹", "andI", "impI", "c", "d", "type", "→", "[h]",
];

fn char_cut(text: &str, rng: &mut ChaCha8Rng) -> usize {
    let cuts: Vec<usize> = text.char_indices().map(|(i, _)| i).chain([text.len()]).collect();
    cuts[rng.gen_range(0..cuts.len())]
}

/// One random edit: whitespace, comments, token swaps, deletions, new
/// declarations, line swaps or a global rename.
pub fn mutate(text: &str, rng: &mut ChaCha8Rng) -> String {
    let mut t = text.to_string();
    match rng.gen_range(0..8) {
        0 => {
            let at = char_cut(&t, rng);
            t.insert_str(at, if rng.gen_bool(0.5) { " " } else { "\n  " });
        }
        1 => {
            let lines: Vec<usize> = t.match_indices('\n').map(|(i, _)| i + 1).collect();
            if let Some(&at) = lines.get(rng.gen_range(0..lines.len().max(1))) {
                t.insert_str(at, "  // note\n");
            }
        }
        2 | 3 => {
            let from = VOCAB[rng.gen_range(0..VOCAB.len())];
            let to = VOCAB[rng.gen_range(0..VOCAB.len())];
            let hits: Vec<usize> = t.match_indices(from).map(|(i, _)| i).collect();
            if !hits.is_empty() {
                let at = hits[rng.gen_range(0..hits.len())];
                t.replace_range(at..at + from.len(), to);
            }
        }
        4 => {
            let a = char_cut(&t, rng);
            let rest = &t[a..];
            let len: usize = rest.chars().take(rng.gen_range(1..6)).map(char::len_utf8).sum();
            t.replace_range(a..a + len, "");
        }
        5 => {
            let decl = [
                "  e : ded X → ded X ❙\n",
                "  e : prop ❘ = prop ❙\n",
                "  f : {Z} ded Z → ded (Z ∧ Z) ❘ = c ❙\n",
            ][rng.gen_range(0..3)];
            if let Some(at) = t.rfind('❚') {
                t.insert_str(at, decl);
            }
        }
        6 => {
            let mut lines: Vec<&str> = t.split('\n').collect();
            if lines.len() > 3 {
                let i = rng.gen_range(1..lines.len() - 1);
                lines.swap(i, i + 1);
            }
            t = lines.join("\n");
        }
        _ => {
            let from = VOCAB[rng.gen_range(0..VOCAB.len())];
            t = t.replace(from, "Q");
        }
    }
    t
}

/// Runs `len` random edits from `seed` over the two-theorem project and
/// compares each state with a full check. Returns the revalidations done.
pub fn edit_script(seed: u64, len: usize) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ws = Workspace::open([("pl.mmt", PL), ("two.mmt", TWO)], lf_rules());
    let mut files: BTreeMap<&str, String> = [("pl.mmt", PL.to_string()), ("two.mmt", TWO.to_string())].into();
    let start = ws.stats().revalidated;
    for step in 0..len {
        let f = if rng.gen_bool(0.7) { "two.mmt" } else { "pl.mmt" };
        let next = mutate(&files[f], &mut rng);
        files.insert(f, next.clone());
        let before = ws.stats().revalidated;
        ws.edit(f, &next);
        let units = ws.world().units.len();
        let done = ws.stats().revalidated - before;
        ensure!(done <= units, "step {step}: {done} revalidations for {units} units");
        matches_full(&ws).map_err(|e| format!("seed {seed}, step {step} editing {f}:\n{next}\n{e}"))?;
    }
    Ok(ws.stats().revalidated - start)
}

// ---- search

fn c(s: &str) -> Term {
    Term::constant(QName::new("PL", s))
}

fn app(f: &str, args: Vec<Term>) -> Term {
    lf().apply(c(f), args)
}

/// Small terms over `and`, `imp`, `ded` and λ, with free `a`, `b`.
pub fn arb_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![Just(Term::var("a")), Just(Term::var("b")), Just(c("prop")),];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(x, y)| app("and", vec![x, y])),
            (inner.clone(), inner.clone()).prop_map(|(x, y)| app("imp", vec![x, y])),
            inner.clone().prop_map(|x| app("ded", vec![x])),
            (prop_oneof![Just("a"), Just("b"), Just("e")], inner).prop_map(|(v, body)| lf().lambda1(v, c("prop"), body)),
        ]
    })
}

/// Patterns with query variables `x`, `y` and the constant variable `a`.
pub fn arb_pattern() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![Just(Term::var("x")), Just(Term::var("y")), Just(Term::var("a")), Just(c("prop")),];
    leaf.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(x, y)| app("and", vec![x, y])),
            (inner.clone(), inner.clone()).prop_map(|(x, y)| app("imp", vec![x, y])),
            inner.prop_map(|x| app("ded", vec![x])),
        ]
    })
}

/// Generate and test: tries every assignment of subterms to the pattern
/// variables.
pub fn brute_force(vars: &[String], pattern: &Term, entries: &[IndexEntry]) -> BTreeSet<(usize, String)> {
    let mut out = BTreeSet::new();
    for (i, e) in entries.iter().enumerate() {
        let subs: Vec<Term> = e.term.subterms().into_iter().map(|(_, s)| s.clone()).collect();
        let mut choice = vec![0usize; vars.len()];
        loop {
            let sigma: Substitution = vars.iter().cloned().zip(choice.iter().map(|&k| subs[k].clone())).collect();
            // values may not capture binders of the surrounding term: the
            // substituted pattern has to mean the same thing at the root
            if alpha_eq(&substitute(pattern, &sigma), &e.term)
                && sigma.values().all(|v| v.free_vars().iter().all(|x| e.term.has_free_var(x)))
            {
                out.insert((i, key(&sigma)));
            }
            let mut k = 0;
            while k < choice.len() {
                choice[k] += 1;
                if choice[k] < subs.len() {
                    break;
                }
                choice[k] = 0;
                k += 1;
            }
            if k == choice.len() {
                break;
            }
        }
    }
    out
}

/// Substitutions compared up to renaming of bound variables.
fn key(s: &Substitution) -> String {
    s.iter()
        .map(|(k, v)| format!("{k}={};", canonical_binders(v, 0).structural_key()))
        .collect()
}

/// Renames bound variables to `%depth`, which no source name can be.
fn canonical_binders(t: &Term, depth: usize) -> Term {
    let Some((head, bound, args)) = t.as_complex() else {
        return t.clone();
    };
    let mut decls = Vec::new();
    let mut renaming: Vec<(String, Term)> = Vec::new();
    let rename =
        |t: &Term, renaming: &[(String, Term)]| renaming.iter().fold(t.clone(), |acc, (x, v)| crate::model::substitute1(&acc, x, v));
    for (j, d) in bound.iter().enumerate() {
        let name = format!("%{}", depth + j);
        let ty = d.ty.as_ref().map(|ty| canonical_binders(&rename(ty, &renaming), depth + j));
        let mut nd = VarDecl::new(name.clone(), ty);
        nd.def = d.def.as_ref().map(|df| canonical_binders(&rename(df, &renaming), depth + j));
        decls.push(nd);
        renaming.push((d.name.clone(), Term::var(name)));
    }
    let inner = depth + bound.len();
    let args = args.iter().map(|a| canonical_binders(&rename(a, &renaming), inner)).collect();
    let mut out = t.clone();
    out.node = Term::complex(head.clone(), Context(decls), args).node;
    out
}

/// Indexes every subterm of `terms` and compares search with
/// [`brute_force`].
pub fn search_agrees(terms: &[Term], pattern: &Term) -> Result<(), String> {
    let mut entries = Vec::new();
    for (n, t) in terms.iter().enumerate() {
        let slot = SlotId::tp(QName::new("T", &format!("c{n}")));
        for (path, s) in t.subterms() {
            entries.push(IndexEntry {
                slot: slot.clone(),
                path,
                term: s.clone(),
                src: None,
                inferred: false,
            });
        }
    }
    let ix = TermIndex::from_entries(entries.clone());
    let vars: Vec<String> = ["x", "y"]
        .iter()
        .map(|s| s.to_string())
        .filter(|v| pattern.has_free_var(v))
        .collect();
    let q = SearchQuery {
        vars: vars.clone(),
        pattern: pattern.clone(),
    };
    let mut got = BTreeSet::new();
    for h in ix.search(&q) {
        let i = entries
            .iter()
            .position(|e| e.slot == h.slot && e.path == h.path)
            .ok_or("hit outside the index")?;
        got.insert((i, key(&h.substitution)));
    }
    let want = brute_force(&vars, pattern, &entries);
    ensure!(got == want, "search {got:?} but brute force {want:?}");
    Ok(())
}

// ---- solver properties

/// Serves only the listed slots; everything else is unknown.
pub struct Only<'w> {
    pub inner: SlotEnv<'w>,
    pub allowed: BTreeSet<SlotId>,
}

impl Environment for Only<'_> {
    fn lookup(&mut self, name: &QName, component: Component) -> Lookup {
        if self.allowed.contains(&SlotId::new(name.clone(), component)) {
            self.inner.lookup(name, component)
        } else {
            Lookup::Unknown
        }
    }

    fn render(&self, t: &Term) -> String {
        self.inner.render(t)
    }
}

/// Solutions never mention solved metas, and elaborated terms keep none.
pub fn idempotent(r: &SolveResult) -> Result<(), String> {
    for (m, v) in &r.substitution {
        ensure!(&substitute(v, &r.substitution) == v, "value of {m} mentions a solved meta");
    }
    for t in r.elaborated.terms() {
        for m in t.metas() {
            ensure!(!r.substitution.contains_key(&m), "elaborated term keeps solved {m}");
        }
    }
    Ok(())
}

/// On every unit: idempotence, an identical re-solve seeing only the
/// recorded dependencies, and failure when any validated one is withheld.
/// Returns how many withheld dependencies were tried.
pub fn fixture_properties(w: &World) -> Result<usize, String> {
    let rules = lf_rules();
    let mut spot = 0;
    for u in &w.units {
        let r = &w.results[&u.id];
        idempotent(r).map_err(|e| format!("{}: {e}", u.id))?;
        let env = |allowed: BTreeSet<SlotId>| Only {
            inner: w.env_for(u.theory(), Some(u.id.constant.local())),
            allowed,
        };
        let again = solve(u.theory(), &u.metas, &u.judgment, &rules, &mut env(r.dependencies.clone()));
        ensure!(&again == r, "{} needs more than its dependencies", u.id);
        for d in r.dependencies.iter().filter(|d| w.results.contains_key(*d)) {
            let mut fewer = r.dependencies.clone();
            fewer.remove(d);
            let without = solve(u.theory(), &u.metas, &u.judgment, &rules, &mut env(fewer));
            ensure!(!without.is_ok(), "{} does not need {d}", u.id);
            spot += 1;
        }
    }
    Ok(spot)
}

/// Renames metas to `/M0, /M1, …` in order of first occurrence.
pub fn canonical_metas(t: &Term) -> Term {
    let mut order: Vec<String> = Vec::new();
    for (_, s) in t.subterms() {
        if let Some(m) = s.as_meta() {
            if !order.iter().any(|o| o == m) {
                order.push(m.to_string());
            }
        }
    }
    let sigma: Substitution = order
        .into_iter()
        .enumerate()
        .map(|(i, m)| (m, Term::var(format!("/M{i}"))))
        .collect();
    substitute(t, &sigma)
}

/// Renders every parsed slot of the given files and every elaborated one in
/// source form, reparses the text and compares with the parse up to the
/// names of metas. Returns how many terms were compared.
pub fn round_trips(w: &World, files: &[&str]) -> Result<usize, String> {
    let mut seen = 0;
    for doc in w.docs.iter().filter(|d| files.contains(&d.file.as_str())) {
        for u in doc.units() {
            let (Some(p), Some(table)) = (w.parsed.get(&u.slot), w.table(u.slot.constant.theory())) else {
                continue;
            };
            ensure!(p.is_ok(), "{}: does not parse", u.slot);
            let mut forms = vec![("parsed", p.term.clone())];
            if let Some(e) = w.elaborated(&u.slot) {
                forms.push(("elaborated", e.clone()));
            }
            for (what, t) in forms {
                let text = render(&t, table, RenderOptions::source());
                let src = SourceRef::new(FileId::new("round-trip"), 0, text.len());
                let again = parse_text(&text, &src, table, &[]);
                ensure!(again.is_ok(), "{} ({what}): `{text}` does not reparse: {:?}", u.slot, again.errors);
                ensure!(
                    alpha_eq(&canonical_metas(&again.term), &canonical_metas(&p.term)),
                    "{} ({what}): `{text}` reparses differently",
                    u.slot
                );
                seen += 1;
            }
        }
    }
    Ok(seen)
}

#[derive(Clone, Debug)]
pub enum Prop {
    Atom(&'static str),
    And(Box<Prop>, Box<Prop>),
    Imp(Box<Prop>, Box<Prop>),
}

impl Prop {
    pub fn text(&self) -> String {
        match self {
            Prop::Atom(a) => a.to_string(),
            Prop::And(a, b) => format!("({} ∧ {})", a.text(), b.text()),
            Prop::Imp(a, b) => format!("({} ⟹ {})", a.text(), b.text()),
        }
    }
}

fn arb_prop() -> impl Strategy<Value = Prop> {
    prop_oneof![Just(Prop::Atom("A")), Just(Prop::Atom("B"))].prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Prop::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| Prop::Imp(Box::new(a), Box::new(b))),
        ]
    })
}

/// A proof skeleton; hypotheses are picked by index into the ones in scope.
#[derive(Clone, Debug)]
pub enum Proof {
    Hyp(usize),
    AndI(Box<Proof>, Box<Proof>),
    ImpI(Prop, Box<Proof>),
}

impl Proof {
    pub fn depth(&self) -> usize {
        match self {
            Proof::Hyp(_) => 1,
            Proof::AndI(a, b) => 1 + a.depth().max(b.depth()),
            Proof::ImpI(_, b) => 1 + b.depth(),
        }
    }

    /// Source text of the proof and the proposition it proves. Missing
    /// hypotheses are closed off by an outer `impI`.
    pub fn realize(&self, hyps: &mut Vec<(String, Prop)>) -> (String, Prop) {
        match self {
            Proof::Hyp(i) => {
                if hyps.is_empty() {
                    let a = Prop::Atom("A");
                    return ("impI [h] h".to_string(), Prop::Imp(Box::new(a.clone()), Box::new(a)));
                }
                let (h, f) = &hyps[i % hyps.len()];
                (h.clone(), f.clone())
            }
            Proof::AndI(a, b) => {
                let (ta, fa) = a.realize(hyps);
                let (tb, fb) = b.realize(hyps);
                (format!("andI ({ta}) ({tb})"), Prop::And(Box::new(fa), Box::new(fb)))
            }
            Proof::ImpI(a, body) => {
                let h = format!("h{}", hyps.len());
                hyps.push((h.clone(), a.clone()));
                let (tb, fb) = body.realize(hyps);
                hyps.pop();
                (format!("impI [{h}] {tb}"), Prop::Imp(Box::new(a.clone()), Box::new(fb)))
            }
        }
    }
}

/// Proof skeletons of depth at most 6.
pub fn arb_proof() -> impl Strategy<Value = Proof> {
    let leaf = (0usize..4).prop_map(Proof::Hyp);
    leaf.prop_recursive(5, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Proof::AndI(Box::new(a), Box::new(b))),
            (arb_prop(), inner).prop_map(|(a, b)| Proof::ImpI(a, Box::new(b))),
        ]
    })
}

/// The fixture world generated proofs are checked in.
pub fn pl_world() -> &'static World {
    static W: std::sync::OnceLock<World> = std::sync::OnceLock::new();
    W.get_or_init(|| World::from_sources([("lf.mmt", LF), ("pl.mmt", PL)]))
}

/// Checks a generated proof against its proposition, with `A` and `B`
/// bound: well-typed, idempotent, and identical when re-solved on its
/// dependencies alone.
pub fn generated_proof(p: &Proof) -> Result<(), String> {
    ensure!(p.depth() <= 6, "depth {}", p.depth());
    let (text, goal) = p.realize(&mut Vec::new());
    let world = pl_world();
    let table = world.table("PL").ok_or("no PL")?;
    let bound = vec!["A".to_string(), "B".to_string()];
    let src = SourceRef::new(FileId::new("gen"), 0, text.len());
    let term = parse_text(&text, &src, table, &bound);
    ensure!(term.is_ok(), "{text}: {:?}", term.errors);
    let gsrc = SourceRef::new(FileId::new("goal"), 0, 0);
    let ty = parse_text(&format!("ded {}", goal.text()), &gsrc, table, &bound).term;
    let prop = Term::constant(QName::new("PL", "prop"));
    let ctx = Context(vec![VarDecl::new("A", Some(prop.clone())), VarDecl::new("B", Some(prop))]);
    let j = Judgment::Typing {
        theory: "PL".into(),
        term: term.term,
        ty,
    };
    let rules = lf_rules();
    let mut env = world.env_for("PL", None);
    let r = solve_in("PL", &ctx, &term.metas, &j, &rules, &mut env);
    ensure!(r.is_ok(), "{text} : {}\n{:?}", goal.text(), r.errors);
    let mut only = Only {
        inner: world.env_for("PL", None),
        allowed: r.dependencies.clone(),
    };
    let again = solve_in("PL", &ctx, &term.metas, &j, &rules, &mut only);
    ensure!(again == r, "{text}: re-solve on dependencies differs");
    idempotent(&r).map_err(|e| format!("{text}: {e}"))
}
