//! Generic judgment solver.
//!
//! The engine knows only structural rules: congruence, variable and constant
//! lookup, meta-variable bookkeeping. Everything else is dispatched on heads
//! to rules supplied by plugins.

mod solver;

pub use solver::{solve, solve_in, Environment, Goal, GoalKind, Lookup, SolveError, SolveErrorKind, SolveResult, Solver};

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::model::{Context, QName, Term};

/// Outcome of one rule application.
#[derive(Debug)]
pub enum Step<T> {
    Done(T),
    /// Waiting for a meta-variable to be solved.
    Blocked,
    Failed(SolveErrorKind, String),
}

impl<T> Step<T> {
    pub fn fail(msg: impl Into<String>) -> Self {
        Step::Failed(SolveErrorKind::TypingFailed, msg.into())
    }
}

/// `?` for steps: propagate anything but `Done`.
#[macro_export]
macro_rules! step {
    ($e:expr) => {
        match $e {
            $crate::engine::Step::Done(v) => v,
            $crate::engine::Step::Blocked => return $crate::engine::Step::Blocked,
            $crate::engine::Step::Failed(k, m) => return $crate::engine::Step::Failed(k, m),
        }
    };
}

/// Infers the type of a term whose head the rule is registered for.
pub type InferFn = Arc<dyn Fn(&mut Solver, &Context, &Term) -> Step<Term> + Send + Sync>;
/// Decomposes `Typing(term, ty)` where `ty`'s head is the rule's key.
pub type CheckFn = Arc<dyn Fn(&mut Solver, &Context, &Term, &Term) -> Step<()> + Send + Sync>;
/// Decomposes `Equal(lhs, rhs, at)` where `at`'s head is the rule's key.
pub type EqualityFn = Arc<dyn Fn(&mut Solver, &Context, &Term, &Term, &Term) -> Step<()> + Send + Sync>;
/// One root rewrite step.
pub type RewriteFn = Arc<dyn Fn(&Term) -> Option<Term> + Send + Sync>;
/// Given a meta-headed side and the other side, proposes `(meta, value)`.
pub type SolutionFn = Arc<dyn Fn(&Solver, &Context, &Term, &Term) -> Option<(String, Term)> + Send + Sync>;
pub type InhabitableFn = Arc<dyn Fn(&mut Solver, &Context, &Term) -> Step<()> + Send + Sync>;

/// A hole's expected type and context, handed to completion rules.
#[derive(Clone, Debug)]
pub struct HoleGoal {
    pub ctx: Context,
    pub expected: Term,
    pub theory: String,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Hint {
    #[serde(rename = "headName")]
    pub head: String,
    #[serde(rename = "insertionTerm")]
    pub insertion: Term,
    #[serde(rename = "renderedText")]
    pub rendered: String,
    #[serde(rename = "remainingGoals")]
    pub remaining_goals: usize,
}

pub type CompletionFn = Arc<dyn Fn(&mut dyn Environment, &RuleSet, &HoleGoal) -> Vec<Hint> + Send + Sync>;

/// Rules contributed by one plugin.
#[derive(Clone, Default)]
pub struct RulePlugin {
    pub name: String,
    pub inference: Vec<(QName, InferFn)>,
    pub checking: Vec<(QName, CheckFn)>,
    pub equality: Vec<(QName, EqualityFn)>,
    pub rewrites: Vec<RewriteFn>,
    pub solutions: Vec<SolutionFn>,
    pub inhabitable: Option<InhabitableFn>,
    pub completions: Vec<CompletionFn>,
    /// The head used for meta-variable application and juxtaposition.
    pub application: Option<QName>,
}

#[derive(Clone, Default)]
pub struct RuleSet {
    pub inference: BTreeMap<QName, InferFn>,
    pub checking: BTreeMap<QName, CheckFn>,
    pub equality: BTreeMap<QName, EqualityFn>,
    pub rewrites: Vec<RewriteFn>,
    pub solutions: Vec<SolutionFn>,
    pub inhabitable: Option<InhabitableFn>,
    pub completions: Vec<CompletionFn>,
    pub application: Option<QName>,
}

impl fmt::Debug for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RuleSet")
            .field("inference", &self.inference.keys().collect::<Vec<_>>())
            .field("checking", &self.checking.keys().collect::<Vec<_>>())
            .field("equality", &self.equality.keys().collect::<Vec<_>>())
            .field("rewrites", &self.rewrites.len())
            .field("solutions", &self.solutions.len())
            .field("completions", &self.completions.len())
            .finish()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RuleError {
    #[error("duplicate rule for `{0}`")]
    DuplicateRule(QName),
}

impl RuleSet {
    pub fn new() -> Self {
        RuleSet::default()
    }

    pub fn inference_heads(&self) -> Vec<&QName> {
        self.inference.keys().collect()
    }
}

/// Merges a plugin into a rule set. Heads may carry at most one inference,
/// checking and equality rule each.
pub fn register_rules(rules: &RuleSet, plugin: RulePlugin) -> Result<RuleSet, RuleError> {
    let mut out = rules.clone();
    for (h, r) in plugin.inference {
        if out.inference.insert(h.clone(), r).is_some() {
            return Err(RuleError::DuplicateRule(h));
        }
    }
    for (h, r) in plugin.checking {
        if out.checking.insert(h.clone(), r).is_some() {
            return Err(RuleError::DuplicateRule(h));
        }
    }
    for (h, r) in plugin.equality {
        if out.equality.insert(h.clone(), r).is_some() {
            return Err(RuleError::DuplicateRule(h));
        }
    }
    out.rewrites.extend(plugin.rewrites);
    out.solutions.extend(plugin.solutions);
    out.completions.extend(plugin.completions);
    if plugin.inhabitable.is_some() {
        out.inhabitable = plugin.inhabitable;
    }
    if plugin.application.is_some() {
        out.application = plugin.application;
    }
    Ok(out)
}

/// True if `elaborated` becomes `parsed` when every meta-variable site of
/// `parsed` (a bare meta or a meta applied through `app`) is put back.
pub fn erases_to(elaborated: &Term, parsed: &Term, app: Option<&QName>) -> bool {
    let site = match (parsed.as_meta(), parsed.as_complex(), app) {
        (Some(_), _, _) => true,
        (None, Some((h, b, args)), Some(app)) => h == app && b.is_empty() && args.first().and_then(|a| a.as_meta()).is_some(),
        _ => false,
    };
    if site {
        return elaborated == parsed || elaborated.subterms().iter().all(|(_, s)| s.inferred);
    }
    use crate::model::Node;
    match (&elaborated.node, &parsed.node) {
        (Node::Const { name: a }, Node::Const { name: b }) => a == b,
        (Node::Var { name: a }, Node::Var { name: b }) => a == b,
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
        ) => {
            h1 == h2 && b1.len() == b2.len() && a1.len() == a2.len() && b1.iter().zip(b2.iter()).all(|(x, y)| x.name == y.name) && {
                let (c1, c2) = (elaborated.children(), parsed.children());
                c1.len() == c2.len() && c1.iter().zip(c2.iter()).all(|(x, y)| erases_to(x, y, app))
            }
        }
        _ => false,
    }
}
