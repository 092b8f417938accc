//! LF: typing, equality, rewriting and meta-variable solving for the
//! constants of the `LF` theory, plus the hole rule and proof hints.

mod hints;

pub use hints::{hint_rule, hints_for, holes_in, HoleSite};

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::engine::{register_rules, RulePlugin, RuleSet, SolveErrorKind, Solver, Step};
use crate::model::{fresh_name, substitute1, Context, QName, Term, VarDecl};
use crate::step;

/// Source of the LF theory.
pub const LF_SOURCE: &str = include_str!("../../../../fixtures/lf.mmt");
pub const LF_THEORY: &str = "LF";

#[derive(Clone, Debug)]
pub struct LfNames {
    pub ty: QName,
    pub kind: QName,
    pub pi: QName,
    pub lambda: QName,
    pub apply: QName,
    pub arrow: QName,
    pub hole: QName,
}

pub fn lf() -> LfNames {
    let q = |l: &str| QName::new(LF_THEORY, l);
    LfNames {
        ty: q("type"),
        kind: q("kind"),
        pi: q("Pi"),
        lambda: q("lambda"),
        apply: q("apply"),
        arrow: q("arrow"),
        hole: q("hole"),
    }
}

impl LfNames {
    pub fn binder(&self, head: &QName, bound: Context, body: Term) -> Term {
        Term::complex(head.clone(), bound, vec![body])
    }

    pub fn pi1(&self, x: &str, a: Term, b: Term) -> Term {
        self.binder(&self.pi, Context(vec![VarDecl::new(x, Some(a))]), b)
    }

    pub fn lambda1(&self, x: &str, a: Term, b: Term) -> Term {
        self.binder(&self.lambda, Context(vec![VarDecl::new(x, Some(a))]), b)
    }

    pub fn hole(&self, e: Term) -> Term {
        Term::app(self.hole.clone(), vec![e])
    }

    pub fn apply(&self, f: Term, args: Vec<Term>) -> Term {
        if args.is_empty() {
            return f;
        }
        let mut all = match f.as_complex() {
            Some((h, b, fa)) if *h == self.apply && b.is_empty() => fa.to_vec(),
            _ => vec![f],
        };
        all.extend(args);
        Term::app(self.apply.clone(), all)
    }

    /// Splits `head(x:A, rest. body)` into `x:A` and `head(rest. body)`.
    pub fn peel(&self, head: &QName, t: &Term) -> Option<(VarDecl, Term)> {
        let (h, bound, args) = t.as_complex()?;
        if h != head || bound.is_empty() || args.len() != 1 {
            return None;
        }
        let first = bound.0[0].clone();
        let rest = if bound.len() == 1 {
            args[0].clone()
        } else {
            Term::complex(h.clone(), Context(bound.0[1..].to_vec()), args.to_vec()).with_inferred(t.inferred)
        };
        Some((first, rest))
    }

    pub fn is_type_or_kind(&self, t: &Term) -> bool {
        t.as_const().is_some_and(|c| *c == self.ty || *c == self.kind)
    }

    /// `arrow(A, B)` as `Pi(_n:A. B)`.
    pub fn arrow_to_pi(&self, t: &Term) -> Option<Term> {
        let (h, b, args) = t.as_complex()?;
        if *h != self.arrow || !b.is_empty() || args.len() != 2 {
            return None;
        }
        let free = args[1].free_vars();
        let x = fresh_name("_", |n| free.contains(n));
        Some(self.pi1(&x, args[0].clone(), args[1].clone()).with_ref(t.src.clone()))
    }

    /// β-reduction of the leading redex, and flattening of nested applications.
    pub fn beta(&self, t: &Term) -> Option<Term> {
        let (h, b, args) = t.as_complex()?;
        if *h != self.apply || !b.is_empty() || args.len() < 2 {
            return None;
        }
        if let Some((fh, fb, fa)) = args[0].as_complex() {
            if *fh == self.apply && fb.is_empty() {
                let mut all = fa.to_vec();
                all.extend(args[1..].iter().cloned());
                return Some(Term::app(self.apply.clone(), all).with_ref(t.src.clone()));
            }
        }
        let (x, body) = self.peel(&self.lambda, &args[0])?;
        let reduced = substitute1(&body, &x.name, &args[1]);
        Some(self.apply(reduced, args[2..].to_vec()))
    }

    /// A binder with several variables as nested single binders.
    pub fn split_binder(&self, t: &Term) -> Option<Term> {
        let (h, b, args) = t.as_complex()?;
        if (*h != self.pi && *h != self.lambda) || b.len() < 2 || args.len() != 1 {
            return None;
        }
        let (x, rest) = self.peel(h, t)?;
        Some(self.binder(h, Context(vec![x]), rest).with_ref(t.src.clone()))
    }
}

fn avoid(ctx: &Context, terms: &[&Term]) -> BTreeSet<String> {
    let mut s: BTreeSet<String> = ctx.iter().map(|d| d.name.clone()).collect();
    for t in terms {
        s.extend(t.free_vars());
    }
    s
}

fn infer_type(_s: &mut Solver, _ctx: &Context, _t: &Term) -> Step<Term> {
    Step::Done(Term::constant(lf().kind))
}

fn infer_pi(s: &mut Solver, ctx: &Context, t: &Term) -> Step<Term> {
    let n = lf();
    let Some((x, rest)) = n.peel(&n.pi, t) else {
        return Step::fail("malformed Pi");
    };
    let Some(a) = x.ty.clone() else {
        return Step::fail(format!("bound variable `{}` has no type", x.name));
    };
    let inner = ctx.extended(VarDecl::new(x.name.clone(), Some(a.clone())));
    let b = step!(s.infer(&inner, &rest));
    let b = step!(s.whnf(&b));
    if s.unsolved_head(&b).is_some() {
        return Step::Blocked;
    }
    if !n.is_type_or_kind(&b) {
        return Step::fail(format!("{} is not a type or kind", s.render(&rest)));
    }
    s.emit_inhabitable(ctx, a);
    Step::Done(b)
}

fn infer_lambda(s: &mut Solver, ctx: &Context, t: &Term) -> Step<Term> {
    let n = lf();
    let Some((x, rest)) = n.peel(&n.lambda, t) else {
        return Step::fail("malformed lambda");
    };
    let Some(a) = x.ty.clone() else {
        return Step::fail(format!("bound variable `{}` has no type", x.name));
    };
    let inner = ctx.extended(VarDecl::new(x.name.clone(), Some(a.clone())));
    let b = step!(s.infer(&inner, &rest));
    s.emit_inhabitable(ctx, a.clone());
    Step::Done(n.pi1(&x.name, a, b))
}

fn infer_apply(s: &mut Solver, ctx: &Context, t: &Term) -> Step<Term> {
    let n = lf();
    let Some((_, _, args)) = t.as_complex() else {
        return Step::fail("malformed application");
    };
    let Some((f, rest)) = args.split_first() else {
        return Step::fail("empty application");
    };
    let mut ty = step!(s.infer(ctx, f));
    for a in rest {
        let w = step!(s.whnf(&ty));
        if s.unsolved_head(&w).is_some() {
            return Step::Blocked;
        }
        match n.peel(&n.pi, &w) {
            Some((x, body)) => {
                let dom = x.ty.clone().unwrap_or_else(|| Term::constant(n.ty.clone()));
                s.emit_typing(ctx, a.clone(), dom);
                ty = substitute1(&body, &x.name, a);
            }
            None => {
                return Step::Failed(
                    SolveErrorKind::NotAFunction,
                    format!("{} : {} is not a function", s.render(f), s.render(&w)),
                )
            }
        }
    }
    Step::Done(ty)
}

fn infer_hole(s: &mut Solver, ctx: &Context, t: &Term) -> Step<Term> {
    match t.as_complex() {
        Some((_, _, [e])) => {
            s.emit_inhabitable(ctx, e.clone());
            Step::Done(e.clone())
        }
        _ => Step::fail("malformed hole"),
    }
}

fn check_pi(s: &mut Solver, ctx: &Context, f: &Term, ty: &Term) -> Step<()> {
    let n = lf();
    let Some((y, body)) = n.peel(&n.pi, ty) else {
        return Step::fail("malformed Pi");
    };
    let a = y.ty.clone().unwrap_or_else(|| Term::constant(n.ty.clone()));
    if let Some((x, lbody)) = n.peel(&n.lambda, f) {
        let mut xname = x.name.clone();
        let mut lbody = lbody;
        if xname != y.name && body.has_free_var(&xname) {
            let taken = avoid(ctx, &[&body, &lbody]);
            let fresh = fresh_name(&xname, |c| taken.contains(c));
            lbody = substitute1(&lbody, &xname, &Term::var(fresh.clone()));
            xname = fresh;
        }
        let xty = match x.ty {
            Some(t) => {
                s.emit_equal(ctx, a.clone(), t.clone(), None);
                t
            }
            None => a,
        };
        let inner = ctx.extended(VarDecl::new(xname.clone(), Some(xty)));
        let expected = substitute1(&body, &y.name, &Term::var(xname));
        s.emit_typing(&inner, lbody, expected);
    } else {
        let taken = avoid(ctx, &[f, &body]);
        let x = if taken.contains(&y.name) {
            fresh_name(&y.name, |c| taken.contains(c))
        } else {
            y.name.clone()
        };
        let inner = ctx.extended(VarDecl::new(x.clone(), Some(a)));
        let applied = n.apply(f.clone(), vec![Term::var(x.clone())]).with_ref(f.src.clone());
        let expected = substitute1(&body, &y.name, &Term::var(x));
        s.emit_typing(&inner, applied, expected);
    }
    Step::Done(())
}

fn equal_at_pi(s: &mut Solver, ctx: &Context, l: &Term, r: &Term, at: &Term) -> Step<()> {
    let n = lf();
    let Some((y, body)) = n.peel(&n.pi, at) else {
        return Step::fail("malformed Pi");
    };
    let taken = avoid(ctx, &[l, r, &body]);
    let x = fresh_name(&y.name, |c| taken.contains(c));
    let inner = ctx.extended(VarDecl::new(x.clone(), y.ty.clone()));
    let v = Term::var(x.clone());
    s.emit_equal(
        &inner,
        n.apply(l.clone(), vec![v.clone()]),
        n.apply(r.clone(), vec![v.clone()]),
        Some(substitute1(&body, &y.name, &v)),
    );
    Step::Done(())
}

/// Miller pattern: `X x1 … xn ≡ E` with distinct bound `xi` gives `X := [x1 … xn] E`.
pub fn solve_pattern(s: &Solver, ctx: &Context, side: &Term, other: &Term) -> Option<(String, Term)> {
    let n = lf();
    let (m, args) = s.unsolved_head(side)?;
    let mut vars: Vec<&str> = Vec::new();
    for a in args {
        let v = a.as_var()?;
        if s.is_flexible(v) || ctx.lookup(v).is_none() || vars.contains(&v) {
            return None;
        }
        vars.push(v);
    }
    let e = s.instantiate(other);
    if e.metas().contains(m) {
        return None;
    }
    for v in e.free_vars() {
        if !vars.contains(&v.as_str()) && !s.is_flexible(&v) {
            return None;
        }
    }
    if vars.is_empty() {
        return Some((m.to_string(), e));
    }
    let mut bound = Context::empty();
    for (i, v) in vars.iter().enumerate() {
        let ty = s.instantiate(ctx.lookup(v)?.ty.as_ref()?);
        for f in ty.free_vars() {
            if !vars[..i].contains(&f.as_str()) && !s.is_flexible(&f) {
                return None;
            }
        }
        bound.push(VarDecl::new(*v, Some(ty)));
    }
    Some((m.to_string(), n.binder(&n.lambda, bound, e)))
}

fn inhabitable(s: &mut Solver, ctx: &Context, a: &Term) -> Step<()> {
    let n = lf();
    let k = step!(s.infer(ctx, a));
    let k = step!(s.whnf(&k));
    if s.unsolved_head(&k).is_some() {
        return Step::Blocked;
    }
    if n.is_type_or_kind(&k) {
        Step::Done(())
    } else {
        Step::fail(format!("{} is not a type", s.render(a)))
    }
}

/// Inference for `type`, `lambda`, `Pi` and `apply`, checking against and
/// equality at `Pi`, the rewrites and the pattern solution rule.
pub fn lf_plugin() -> RulePlugin {
    let n = lf();
    let n2 = lf();
    let n3 = lf();
    RulePlugin {
        name: "LF".into(),
        inference: vec![
            (n.lambda.clone(), Arc::new(infer_lambda)),
            (n.pi.clone(), Arc::new(infer_pi)),
            (n.apply.clone(), Arc::new(infer_apply)),
            (n.ty.clone(), Arc::new(infer_type)),
        ],
        checking: vec![(n.pi.clone(), Arc::new(check_pi))],
        equality: vec![(n.pi.clone(), Arc::new(equal_at_pi))],
        rewrites: vec![
            Arc::new(move |t: &Term| n2.arrow_to_pi(t)),
            Arc::new(move |t: &Term| n3.beta(t)),
            Arc::new(move |t: &Term| lf().split_binder(t)),
        ],
        solutions: vec![Arc::new(solve_pattern)],
        inhabitable: Some(Arc::new(inhabitable)),
        completions: Vec::new(),
        application: Some(n.apply.clone()),
    }
}

/// The hole rule `⟨E⟩ : E` and the hint generator.
pub fn hole_plugin() -> RulePlugin {
    RulePlugin {
        name: "hole".into(),
        inference: vec![(lf().hole, Arc::new(infer_hole))],
        completions: vec![Arc::new(hint_rule)],
        ..Default::default()
    }
}

pub fn lf_rules() -> RuleSet {
    let r = register_rules(&RuleSet::new(), lf_plugin()).expect("fresh rule set");
    register_rules(&r, hole_plugin()).expect("disjoint plugins")
}
