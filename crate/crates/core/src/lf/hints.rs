//! Proof hints for holes `⟨E⟩`.

use std::collections::BTreeSet;

use crate::engine::{solve_in, Environment, Hint, HoleGoal, Lookup, RuleSet};
use crate::model::{fresh_name, substitute, Component, Context, Judgment, Substitution, Term, VarDecl};

use super::lf;

/// A hole occurring in a term, with the context of its position.
#[derive(Clone, Debug)]
pub struct HoleSite {
    pub path: Vec<usize>,
    pub ctx: Context,
    pub expected: Term,
    pub term: Term,
}

/// All holes in `t`, outermost first.
pub fn holes_in(t: &Term) -> Vec<HoleSite> {
    fn go(t: &Term, ctx: &Context, path: &mut Vec<usize>, out: &mut Vec<HoleSite>) {
        let n = lf();
        if let Some((h, b, args)) = t.as_complex() {
            if *h == n.hole && b.is_empty() && args.len() == 1 {
                out.push(HoleSite {
                    path: path.clone(),
                    ctx: ctx.clone(),
                    expected: args[0].clone(),
                    term: t.clone(),
                });
            }
            let mut inner = ctx.clone();
            let mut i = 0;
            for d in b.iter() {
                for c in d.ty.iter().chain(d.def.iter()) {
                    path.push(i);
                    go(c, &inner, path, out);
                    path.pop();
                    i += 1;
                }
                inner.push(VarDecl::new(d.name.clone(), d.ty.clone()));
            }
            for a in args {
                path.push(i);
                go(a, &inner, path, out);
                path.pop();
                i += 1;
            }
        }
    }
    let mut out = Vec::new();
    go(t, &Context::empty(), &mut Vec::new(), &mut out);
    out
}

/// Runs every completion rule and orders the hints by remaining goals, then name.
pub fn hints_for(env: &mut dyn Environment, rules: &RuleSet, goal: &HoleGoal) -> Vec<Hint> {
    let mut hints: Vec<Hint> = rules.completions.iter().flat_map(|c| c(env, rules, goal)).collect();
    hints.sort_by(|a, b| (a.remaining_goals, &a.head, &a.rendered).cmp(&(b.remaining_goals, &b.head, &b.rendered)));
    hints.dedup_by(|a, b| a.rendered == b.rendered);
    hints
}

/// Splits `{x1}…{xm} T1 → … → Tn → T` into binders and the result type.
fn split_pi(t: &Term) -> (Vec<VarDecl>, Term) {
    let n = lf();
    let mut binders = Vec::new();
    let mut cur = t.clone();
    loop {
        if let Some(p) = n.arrow_to_pi(&cur) {
            cur = p;
            continue;
        }
        match n.peel(&n.pi, &cur) {
            Some((d, rest)) => {
                binders.push(d);
                cur = rest;
            }
            None => return (binders, cur),
        }
    }
}

/// Candidate name for a new bound variable.
fn binder_name(preferred: &str, taken: &BTreeSet<String>) -> String {
    if !preferred.starts_with('_') && !taken.contains(preferred) {
        return preferred.to_string();
    }
    for c in "pqrstuvw".chars() {
        let s = c.to_string();
        if !taken.contains(&s) {
            return s;
        }
    }
    fresh_name("p", |n| taken.contains(n))
}

/// The LF completion rule: every constant or variable whose type ends in
/// something unifying with the hole's type, applied to holes for its
/// remaining explicit premises. A Pi-typed hole also gets a λ-hint.
pub fn hint_rule(env: &mut dyn Environment, rules: &RuleSet, goal: &HoleGoal) -> Vec<Hint> {
    let n = lf();
    let mut out = Vec::new();
    let mut candidates: Vec<(String, Term, Term)> = Vec::new();
    for c in env.visible() {
        if let Lookup::Found(ty) = env.lookup(&c, Component::Type) {
            candidates.push((c.local().to_string(), Term::constant(c.clone()), ty));
        }
    }
    for d in goal.ctx.iter() {
        if let Some(ty) = &d.ty {
            candidates.push((d.name.clone(), Term::var(d.name.clone()), ty.clone()));
        }
    }
    let ctx_vars: Vec<Term> = goal.ctx.iter().map(|d| Term::var(d.name.clone())).collect();
    let meta_for = |i: usize| {
        let m = Term::var(format!("/H{i}"));
        if ctx_vars.is_empty() {
            m
        } else {
            n.apply(m, ctx_vars.clone())
        }
    };
    let expected_metas = goal.expected.metas();
    for (name, head, ty) in candidates {
        let (binders, result) = split_pi(&ty);
        let mut sigma = Substitution::new();
        let mut metas = Context(expected_metas.iter().map(|m| VarDecl::new(m.clone(), None)).collect());
        let mut args: Vec<(bool, Term)> = Vec::new();
        for (i, d) in binders.iter().enumerate() {
            let rest_uses = binders[i + 1..]
                .iter()
                .any(|e| e.ty.as_ref().is_some_and(|t| t.has_free_var(&d.name)))
                || result.has_free_var(&d.name);
            let dty = d.ty.as_ref().map(|t| substitute(t, &sigma));
            if rest_uses {
                let m = meta_for(i);
                metas.push(VarDecl::new(format!("/H{i}"), None));
                sigma.insert(d.name.clone(), m.clone());
                args.push((true, m));
            } else {
                let t = dty.unwrap_or_else(|| Term::constant(n.ty.clone()));
                args.push((false, n.hole(t)));
            }
        }
        let target = substitute(&result, &sigma);
        let judgment = Judgment::Equal {
            theory: goal.theory.clone(),
            lhs: target,
            rhs: goal.expected.clone(),
            at: None,
        };
        let r = solve_in(&goal.theory, &goal.ctx, &metas, &judgment, rules, env);
        let own_solved = binders
            .iter()
            .enumerate()
            .all(|(i, _)| r.solved.get(&format!("/H{i}")).copied().unwrap_or(true));
        if !r.errors.is_empty()
            && !r
                .errors
                .iter()
                .all(|e| matches!(e.kind, crate::engine::SolveErrorKind::UnsolvedMeta { .. }))
        {
            continue;
        }
        if !own_solved {
            continue;
        }
        // instantiate the arguments; solved positions are inferred
        let mut inst = Substitution::new();
        for (i, _) in binders.iter().enumerate() {
            if let Some(v) = r.substitution.get(&format!("/H{i}")) {
                inst.insert(format!("/H{i}"), v.clone());
            }
        }
        let sub = |t: &Term| -> Term { instantiate_metas(t, &inst, &n) };
        let mut holes = 0;
        let mut final_args = Vec::new();
        for (dep, a) in &args {
            let mut t = sub(a);
            if *dep {
                t.mark_inferred(None);
            } else {
                holes += 1;
            }
            final_args.push(t);
        }
        let insertion = n.apply(head.clone(), final_args);
        out.push(Hint {
            head: name,
            rendered: env.render(&insertion),
            insertion,
            remaining_goals: holes,
        });
    }
    // λ-introduction
    let e = expand_arrow(&goal.expected);
    if let Some((x, body)) = n.peel(&n.pi, &e) {
        let mut taken: BTreeSet<String> = goal.ctx.iter().map(|d| d.name.clone()).collect();
        taken.extend(body.free_vars());
        let name = binder_name(&x.name, &taken);
        let body = crate::model::substitute1(&body, &x.name, &Term::var(name.clone()));
        let mut ty = x.ty.clone().unwrap_or_else(|| Term::constant(n.ty.clone()));
        ty.mark_inferred(None);
        let insertion = n.lambda1(&name, ty, n.hole(body));
        out.push(Hint {
            head: "lambda".into(),
            rendered: env.render(&insertion),
            insertion,
            remaining_goals: 1,
        });
    }
    out
}

fn expand_arrow(t: &Term) -> Term {
    let n = lf();
    n.arrow_to_pi(t).or_else(|| n.split_binder(t)).unwrap_or_else(|| t.clone())
}

/// Substitutes solved metas, β-reducing meta applications.
fn instantiate_metas(t: &Term, sigma: &Substitution, n: &super::LfNames) -> Term {
    if let Some(v) = t.as_var().and_then(|m| sigma.get(m)) {
        return v.clone();
    }
    if let Some((h, b, args)) = t.as_complex() {
        if *h == n.apply && b.is_empty() {
            if let Some(v) = args[0].as_var().and_then(|m| sigma.get(m)) {
                let rest: Vec<Term> = args[1..].iter().map(|a| instantiate_metas(a, sigma, n)).collect();
                let mut cur = n.apply(v.clone(), rest);
                while let Some(next) = n.beta(&cur) {
                    cur = next;
                }
                return cur;
            }
        }
        let mut out = t.clone();
        for c in out.children_mut() {
            *c = instantiate_metas(c, sigma, n);
        }
        return out;
    }
    t.clone()
}
