use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{RuleSet, Step};
use crate::model::{alpha_eq, substitute, Component, Context, Judgment, Node, QName, SlotId, SourceRef, Substitution, Term, VarDecl};

/// Rewrite steps allowed per unit.
pub const REWRITE_FUEL: usize = 10_000;
/// Goal steps allowed per unit.
const GOAL_FUEL: usize = 200_000;

pub enum Lookup {
    Found(Term),
    /// Declared, but without that component.
    Absent,
    Unknown,
}

/// Access to other constants, and rendering for messages.
pub trait Environment {
    fn lookup(&mut self, name: &QName, component: Component) -> Lookup;
    fn render(&self, t: &Term) -> String;
    /// Constants visible in the current theory, in declaration order.
    fn visible(&self) -> Vec<QName> {
        Vec::new()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SolveErrorKind {
    RuleMissing { head: String },
    TypingFailed,
    NotAFunction,
    NonPatternConstraint,
    DivergentRewrite,
    UnsolvedMeta { name: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveError {
    #[serde(flatten)]
    pub kind: SolveErrorKind,
    pub message: String,
    /// The nearest enclosing typing judgment, rendered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judgment: Option<String>,
    /// Rendered judgments from the root down to the failure.
    pub log: Vec<String>,
    #[serde(rename = "ref", default, skip_serializing_if = "Option::is_none")]
    pub src: Option<SourceRef>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub substitution: Substitution,
    pub solved: BTreeMap<String, bool>,
    pub errors: Vec<SolveError>,
    pub dependencies: BTreeSet<SlotId>,
    pub elaborated: Judgment,
}

impl SolveResult {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

#[derive(Clone, Debug)]
pub enum GoalKind {
    Typing { term: Term, ty: Term },
    Equal { lhs: Term, rhs: Term, at: Option<Term> },
    Inhabitable { ty: Term },
}

#[derive(Clone, Debug)]
pub struct Goal {
    pub ctx: Context,
    pub kind: GoalKind,
    log: Vec<String>,
    typing: Option<(String, Option<SourceRef>)>,
}

pub struct Solver<'a> {
    pub rules: &'a RuleSet,
    env: &'a mut dyn Environment,
    pub theory: String,
    flexible: BTreeSet<String>,
    pub sigma: Substitution,
    queue: VecDeque<Goal>,
    pending: Vec<Goal>,
    current: Option<(Vec<String>, Option<(String, Option<SourceRef>)>)>,
    errors: Vec<SolveError>,
    deps: BTreeSet<SlotId>,
    fuel: usize,
    goal_fuel: usize,
    progress: bool,
}

/// Solves one validation unit's judgment over its meta context.
pub fn solve(theory: &str, metas: &Context, judgment: &Judgment, rules: &RuleSet, env: &mut dyn Environment) -> SolveResult {
    solve_in(theory, &Context::empty(), metas, judgment, rules, env)
}

/// Like [`solve`], with the judgment's free variables declared in `ctx`.
pub fn solve_in(
    theory: &str,
    ctx: &Context,
    metas: &Context,
    judgment: &Judgment,
    rules: &RuleSet,
    env: &mut dyn Environment,
) -> SolveResult {
    let mut s = Solver::new(rules, env, theory, metas);
    let kind = match judgment.clone() {
        Judgment::Inhabitable { ty, .. } => GoalKind::Inhabitable { ty },
        Judgment::Typing { term, ty, .. } => GoalKind::Typing { term, ty },
        Judgment::Equal { lhs, rhs, at, .. } => GoalKind::Equal { lhs, rhs, at },
    };
    s.current = Some((Vec::new(), None));
    s.pending.clear();
    s.push(ctx.clone(), kind);
    let root: Vec<Goal> = std::mem::take(&mut s.pending);
    s.queue.extend(root);
    s.current = None;
    s.run();
    s.finish(metas, judgment)
}

impl<'a> Solver<'a> {
    pub fn new(rules: &'a RuleSet, env: &'a mut dyn Environment, theory: &str, metas: &Context) -> Self {
        Solver {
            rules,
            env,
            theory: theory.to_string(),
            flexible: metas.iter().map(|d| d.name.clone()).collect(),
            sigma: Substitution::new(),
            queue: VecDeque::new(),
            pending: Vec::new(),
            current: None,
            errors: Vec::new(),
            deps: BTreeSet::new(),
            fuel: REWRITE_FUEL,
            goal_fuel: GOAL_FUEL,
            progress: false,
        }
    }

    pub fn application(&self) -> Option<&QName> {
        self.rules.application.as_ref()
    }

    pub fn render(&self, t: &Term) -> String {
        let t = self.instantiate(t);
        self.env.render(&t)
    }

    pub fn render_judgment(&self, kind: &GoalKind) -> String {
        match kind {
            GoalKind::Typing { term, ty } => format!("{} : {}", self.render(term), self.render(ty)),
            GoalKind::Equal { lhs, rhs, at } => {
                let mut s = format!("{} ≡ {}", self.render(lhs), self.render(rhs));
                if let Some(at) = at {
                    s.push_str(&format!(" : {}", self.render(at)));
                }
                s
            }
            GoalKind::Inhabitable { ty } => format!("{} inhabitable", self.render(ty)),
        }
    }

    /// Type of a constant, recording the dependency.
    pub fn lookup_type(&mut self, c: &QName) -> Option<Term> {
        // absence is an observation too: the slot may appear later
        self.deps.insert(SlotId::tp(c.clone()));
        match self.env.lookup(c, Component::Type) {
            Lookup::Found(t) => Some(t),
            _ => None,
        }
    }

    pub fn env(&mut self) -> &mut dyn Environment {
        self.env
    }

    // ---- goals

    fn push(&mut self, ctx: Context, kind: GoalKind) {
        let (mut log, mut typing) = self.current.clone().unwrap_or_default();
        let me = self.render_judgment(&kind);
        if let GoalKind::Typing { term, .. } = &kind {
            typing = Some((me.clone(), term.src.clone()));
        }
        log.push(me);
        self.pending.push(Goal { ctx, kind, log, typing });
    }

    pub fn emit_typing(&mut self, ctx: &Context, term: Term, ty: Term) {
        self.push(ctx.clone(), GoalKind::Typing { term, ty });
    }

    pub fn emit_equal(&mut self, ctx: &Context, lhs: Term, rhs: Term, at: Option<Term>) {
        self.push(ctx.clone(), GoalKind::Equal { lhs, rhs, at });
    }

    pub fn emit_inhabitable(&mut self, ctx: &Context, ty: Term) {
        self.push(ctx.clone(), GoalKind::Inhabitable { ty });
    }

    fn run(&mut self) {
        while !self.queue.is_empty() {
            self.progress = false;
            for _ in 0..self.queue.len() {
                let g = self.queue.pop_front().unwrap();
                if self.goal_fuel == 0 {
                    self.record(&g, SolveErrorKind::DivergentRewrite, "goal limit exceeded".into());
                    self.queue.clear();
                    return;
                }
                self.goal_fuel -= 1;
                self.step_goal(g);
            }
            if !self.progress {
                for g in std::mem::take(&mut self.queue) {
                    if let GoalKind::Equal { .. } = g.kind {
                        let msg = format!("cannot solve {}", g.log.last().cloned().unwrap_or_default());
                        self.record(&g, SolveErrorKind::NonPatternConstraint, msg);
                    }
                }
            }
        }
    }

    fn step_goal(&mut self, g: Goal) {
        self.current = Some((g.log.clone(), g.typing.clone()));
        self.pending.clear();
        let r = self.process(&g);
        match r {
            Step::Done(()) => {
                let p = std::mem::take(&mut self.pending);
                self.queue.extend(p);
                self.progress = true;
            }
            Step::Blocked => {
                self.pending.clear();
                self.queue.push_back(g);
            }
            Step::Failed(k, m) => {
                self.pending.clear();
                self.record(&g, k, m);
                self.progress = true;
            }
        }
        self.current = None;
    }

    fn record(&mut self, g: &Goal, kind: SolveErrorKind, message: String) {
        let first_ref = match &g.kind {
            GoalKind::Typing { term, .. } => term.src.clone(),
            GoalKind::Equal { lhs, rhs, .. } => lhs.src.clone().or(rhs.src.clone()),
            GoalKind::Inhabitable { ty } => ty.src.clone(),
        };
        let mut log = g.log.clone();
        log.push(message.clone());
        self.errors.push(SolveError {
            kind,
            message,
            judgment: g.typing.as_ref().map(|t| t.0.clone()),
            log,
            src: g.typing.as_ref().and_then(|t| t.1.clone()).or(first_ref),
        });
    }

    fn process(&mut self, g: &Goal) -> Step<()> {
        match &g.kind {
            GoalKind::Typing { term, ty } => self.typing(&g.ctx, term, ty),
            GoalKind::Equal { lhs, rhs, at } => self.equal(&g.ctx, lhs, rhs, at.as_ref()),
            GoalKind::Inhabitable { ty } => match self.rules.inhabitable.clone() {
                Some(f) => f(self, &g.ctx, ty),
                None => {
                    log::warn!("no inhabitability rule; accepting {}", self.render(ty));
                    Step::Done(())
                }
            },
        }
    }

    fn typing(&mut self, ctx: &Context, t: &Term, ty: &Term) -> Step<()> {
        let t = self.resolve(t);
        if self.unsolved_head(&t).is_some() {
            return Step::Blocked;
        }
        let ty = crate::step!(self.whnf(ty));
        if let Some(h) = ty.head() {
            if let Some(rule) = self.rules.checking.get(h).cloned() {
                return rule(self, ctx, &t, &ty);
            }
        }
        let inferred = crate::step!(self.infer(ctx, &t));
        self.emit_equal(ctx, inferred, ty, None);
        Step::Done(())
    }

    pub fn infer(&mut self, ctx: &Context, t: &Term) -> Step<Term> {
        let t = crate::step!(self.whnf(t));
        match &t.node {
            Node::Var { name } => match ctx.lookup(name) {
                Some(VarDecl { ty: Some(ty), .. }) => Step::Done(ty.clone()),
                Some(_) => Step::fail(format!("variable `{name}` has no type")),
                None if self.flexible.contains(name) => Step::Blocked,
                None => Step::fail(format!("unbound variable `{name}`")),
            },
            Node::Const { name } => {
                if let Some(rule) = self.rules.inference.get(name).cloned() {
                    return rule(self, ctx, &t);
                }
                match self.lookup_type(name) {
                    Some(ty) => Step::Done(ty),
                    None => Step::Failed(
                        SolveErrorKind::RuleMissing { head: name.to_string() },
                        format!("cannot infer the type of `{}`", name.local()),
                    ),
                }
            }
            Node::Complex { head, .. } => {
                if self.unsolved_head(&t).is_some() {
                    return Step::Blocked;
                }
                match self.rules.inference.get(head).cloned() {
                    Some(rule) => rule(self, ctx, &t),
                    None => Step::Failed(
                        SolveErrorKind::RuleMissing { head: head.to_string() },
                        format!("no inference rule for `{}`", head.local()),
                    ),
                }
            }
        }
    }

    fn equal(&mut self, ctx: &Context, lhs: &Term, rhs: &Term, at: Option<&Term>) -> Step<()> {
        let l = crate::step!(self.whnf(lhs));
        let r = crate::step!(self.whnf(rhs));
        if alpha_eq(&l, &r) || alpha_eq(&self.instantiate(&l), &self.instantiate(&r)) {
            return Step::Done(());
        }
        let lm = self.unsolved_head(&l).is_some();
        let rm = self.unsolved_head(&r).is_some();
        if lm || rm {
            for sol in self.rules.solutions.clone() {
                let found = if lm { sol(self, ctx, &l, &r) } else { None };
                let found = found.or_else(|| if rm { sol(self, ctx, &r, &l) } else { None });
                if let Some((m, v)) = found {
                    self.bind(m, v);
                    return Step::Done(());
                }
            }
            return Step::Blocked;
        }
        if let Some(at) = at {
            let at = crate::step!(self.whnf(at));
            if let Some(rule) = at.head().and_then(|h| self.rules.equality.get(h).cloned()) {
                return rule(self, ctx, &l, &r, &at);
            }
        }
        self.congruence(ctx, &l, &r)
    }

    fn congruence(&mut self, ctx: &Context, l: &Term, r: &Term) -> Step<()> {
        let mismatch = |s: &mut Self| {
            let msg = format!("{} and {} are not equal", s.render(l), s.render(r));
            Step::fail(msg)
        };
        match (&l.node, &r.node) {
            (Node::Const { name: a }, Node::Const { name: b }) if a == b => Step::Done(()),
            (Node::Var { name: a }, Node::Var { name: b }) if a == b => Step::Done(()),
            (
                Node::Complex {
                    head: h1,
                    bound: b1,
                    args: a1,
                },
                Node::Complex {
                    head: h2,
                    bound: b2,
                    args: a2,
                },
            ) if h1 == h2 && b1.len() == b2.len() && a1.len() == a2.len() => {
                let mut inner = ctx.clone();
                let mut ren = Substitution::new();
                let r_free = r.free_vars();
                let mut lsub = Substitution::new();
                for (d1, d2) in b1.iter().zip(b2.iter()) {
                    let t1 = d1.ty.as_ref().map(|t| substitute(t, &lsub));
                    let t2 = d2.ty.as_ref().map(|t| substitute(t, &ren));
                    match (&t1, &t2) {
                        (Some(x), Some(y)) => self.emit_equal(&inner, x.clone(), y.clone(), None),
                        (None, None) => {}
                        _ => return mismatch(self),
                    }
                    let mut name = d1.name.clone();
                    if name != d2.name && r_free.contains(&name) {
                        let taken: BTreeSet<String> = l.free_vars().union(&r_free).cloned().collect();
                        name = crate::model::fresh_name(&name, |n| taken.contains(n) || inner.contains(n));
                        lsub.insert(d1.name.clone(), Term::var(name.clone()));
                    }
                    if name != d2.name {
                        ren.insert(d2.name.clone(), Term::var(name.clone()));
                    }
                    inner.push(VarDecl::new(name, t1));
                }
                for (x, y) in a1.iter().zip(a2.iter()) {
                    self.emit_equal(&inner, substitute(x, &lsub), substitute(y, &ren), None);
                }
                Step::Done(())
            }
            _ => mismatch(self),
        }
    }

    // ---- metas and normalization

    pub fn is_flexible(&self, name: &str) -> bool {
        self.flexible.contains(name)
    }

    pub fn bind(&mut self, meta: String, value: Term) {
        self.sigma.insert(meta, value);
        self.progress = true;
    }

    /// A meta-variable applied to arguments through the application head.
    pub fn meta_application<'t>(&self, t: &'t Term) -> Option<(&'t str, &'t [Term])> {
        let app = self.application()?;
        let (h, b, args) = t.as_complex()?;
        if h != app || !b.is_empty() {
            return None;
        }
        let m = args.first()?.as_var()?;
        if self.flexible.contains(m) {
            Some((m, &args[1..]))
        } else {
            None
        }
    }

    /// The unsolved meta heading `t` (bare or applied), with its arguments.
    pub fn unsolved_head<'t>(&self, t: &'t Term) -> Option<(&'t str, &'t [Term])> {
        if let Some(m) = t.as_var() {
            if self.flexible.contains(m) && !self.sigma.contains_key(m) {
                return Some((m, &[]));
            }
            return None;
        }
        self.meta_application(t).filter(|(m, _)| !self.sigma.contains_key(*m))
    }

    pub fn mk_apply(&self, f: Term, args: Vec<Term>) -> Term {
        if args.is_empty() {
            return f;
        }
        let app = self.application().expect("application head").clone();
        let mut all = match f.as_complex() {
            Some((h, b, fa)) if *h == app && b.is_empty() => fa.to_vec(),
            _ => vec![f],
        };
        all.extend(args);
        Term::app(app, all)
    }

    /// Replaces solved metas at the root.
    pub fn resolve(&self, t: &Term) -> Term {
        let mut cur = t.clone();
        loop {
            if let Some(v) = cur.as_var().and_then(|m| self.sigma.get(m)) {
                cur = v.clone();
                continue;
            }
            if let Some((m, args)) = self.meta_application(&cur) {
                if let Some(v) = self.sigma.get(m) {
                    cur = self.mk_apply(v.clone(), args.to_vec());
                    continue;
                }
            }
            return cur;
        }
    }

    /// Root normalization by the rewrite rules.
    pub fn whnf(&mut self, t: &Term) -> Step<Term> {
        let rules = self.rules;
        let mut cur = self.resolve(t);
        'outer: loop {
            for r in &rules.rewrites {
                if let Some(n) = r(&cur) {
                    if self.fuel == 0 {
                        return Step::Failed(
                            SolveErrorKind::DivergentRewrite,
                            format!("rewriting did not terminate after {REWRITE_FUEL} steps"),
                        );
                    }
                    self.fuel -= 1;
                    cur = self.resolve(&n);
                    continue 'outer;
                }
            }
            return Step::Done(cur);
        }
    }

    /// Rewrites at the root while the root applies a substituted value.
    fn reduce_site(&self, mut t: Term) -> Term {
        let rules = self.rules;
        for _ in 0..REWRITE_FUEL {
            let redex = match (self.application(), t.as_complex()) {
                (Some(app), Some((h, _, args))) => h == app && args.first().is_some_and(|f| f.inferred),
                _ => false,
            };
            if !redex {
                return t;
            }
            match rules.rewrites.iter().find_map(|r| r(&t)) {
                Some(n) => t = n,
                None => return t,
            }
        }
        t
    }

    /// Applies the current solutions everywhere.
    pub fn instantiate(&self, t: &Term) -> Term {
        self.elab(t, false)
    }

    fn elab(&self, t: &Term, mark: bool) -> Term {
        if let Some(v) = t.as_var().and_then(|m| self.sigma.get(m)).cloned() {
            let mut v = self.elab(&v, false);
            if mark {
                v.mark_inferred(t.src.as_ref());
            }
            return v;
        }
        if let Some((m, args)) = self.meta_application(t) {
            if let Some(v) = self.sigma.get(m).cloned() {
                let mut f = self.elab(&v, false);
                f.mark_inferred(None);
                let args: Vec<Term> = args.iter().map(|a| self.elab(a, false)).collect();
                let mut r = self.reduce_site(self.mk_apply(f, args));
                if mark {
                    r.mark_inferred(t.src.as_ref());
                } else {
                    clear_inferred(&mut r);
                }
                return r;
            }
        }
        let mut out = t.clone();
        if let Node::Complex { bound, args, .. } = &mut out.node {
            for d in bound.0.iter_mut() {
                if let Some(x) = &d.ty {
                    d.ty = Some(self.elab(x, mark));
                }
                if let Some(x) = &d.def {
                    d.def = Some(self.elab(x, mark));
                }
            }
            for a in args.iter_mut() {
                *a = self.elab(a, mark);
            }
        }
        out
    }

    fn finish(mut self, metas: &Context, judgment: &Judgment) -> SolveResult {
        let mut solved = BTreeMap::new();
        let mut substitution = Substitution::new();
        for d in metas.iter() {
            let ok = self.sigma.contains_key(&d.name);
            solved.insert(d.name.clone(), ok);
            if ok {
                let mut v = self.instantiate(&Term::var(d.name.clone()));
                v.mark_inferred(None);
                substitution.insert(d.name.clone(), v);
            }
        }
        if self.errors.is_empty() {
            let sites = meta_sites(judgment);
            for (name, ok) in &solved {
                if !ok {
                    self.errors.push(SolveError {
                        kind: SolveErrorKind::UnsolvedMeta { name: name.clone() },
                        message: format!("could not infer `{name}`"),
                        judgment: None,
                        log: Vec::new(),
                        src: sites.get(name).cloned(),
                    });
                }
            }
        }
        let elaborated = judgment.map_terms(|t| self.elab(t, true));
        SolveResult {
            substitution,
            solved,
            errors: self.errors,
            dependencies: self.deps,
            elaborated,
        }
    }
}

fn clear_inferred(t: &mut Term) {
    t.inferred = false;
    for c in t.children_mut() {
        clear_inferred(c);
    }
}

/// First source reference of each meta occurrence.
fn meta_sites(j: &Judgment) -> BTreeMap<String, SourceRef> {
    let mut out = BTreeMap::new();
    for t in j.terms() {
        for (_, s) in t.subterms() {
            if let (Some(m), Some(r)) = (s.as_meta(), &s.src) {
                out.entry(m.to_string()).or_insert_with(|| r.clone());
            }
        }
    }
    out
}
