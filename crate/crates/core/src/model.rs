//! GSOS languages: actions, signatures, rules and ruloids.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use itertools::Itertools;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::term::{Op, Renaming, Term, Var};

/// An action label.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action(Arc<str>);

impl Action {
    pub fn new(label: impl AsRef<str>) -> Self {
        Action(Arc::from(label.as_ref()))
    }

    pub fn label(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Action {
    fn from(s: &str) -> Self {
        Action::new(s)
    }
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

/// A set of actions, e.g. the initial actions of a closed term.
pub type ActionSet = BTreeSet<Action>;

pub fn fmt_action_set(set: &ActionSet) -> String {
    format!("{{{}}}", set.iter().join(","))
}

/// A premise of a rule or ruloid.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Premise {
    Positive { subject: Var, action: Action, target: Var },
    Negative { subject: Var, action: Action },
}

impl Premise {
    pub fn positive(subject: impl Into<Var>, action: impl Into<Action>, target: impl Into<Var>) -> Self {
        Premise::Positive { subject: subject.into(), action: action.into(), target: target.into() }
    }

    pub fn negative(subject: impl Into<Var>, action: impl Into<Action>) -> Self {
        Premise::Negative { subject: subject.into(), action: action.into() }
    }

    pub fn subject(&self) -> &Var {
        match self {
            Premise::Positive { subject, .. } | Premise::Negative { subject, .. } => subject,
        }
    }

    pub fn action(&self) -> &Action {
        match self {
            Premise::Positive { action, .. } | Premise::Negative { action, .. } => action,
        }
    }

    pub fn target(&self) -> Option<&Var> {
        match self {
            Premise::Positive { target, .. } => Some(target),
            Premise::Negative { .. } => None,
        }
    }

    pub fn is_positive(&self) -> bool {
        matches!(self, Premise::Positive { .. })
    }

    pub fn rename(&self, r: &Renaming) -> Premise {
        match self {
            Premise::Positive { subject, action, target } => Premise::Positive {
                subject: r.apply(subject),
                action: action.clone(),
                target: r.apply(target),
            },
            Premise::Negative { subject, action } => {
                Premise::Negative { subject: r.apply(subject), action: action.clone() }
            }
        }
    }
}

impl fmt::Display for Premise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Premise::Positive { subject, action, target } => write!(f, "{subject} -{action}-> {target}"),
            Premise::Negative { subject, action } => write!(f, "{subject} -{action}-/>"),
        }
    }
}

impl fmt::Debug for Premise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Renders premises as `{p1, p2}`, sorted lexicographically by their text.
pub fn fmt_premises<'a>(premises: impl IntoIterator<Item = &'a Premise>) -> String {
    let mut parts: Vec<String> = premises.into_iter().map(|p| p.to_string()).collect();
    parts.sort();
    format!("{{{}}}", parts.join(", "))
}

/// A derived rule `premises ⊢ source -action-> target` with an arbitrary
/// source context.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Ruloid {
    pub premises: BTreeSet<Premise>,
    pub source: Term,
    pub action: Action,
    pub target: Term,
}

impl Ruloid {
    pub fn sourcevars(&self) -> BTreeSet<Var> {
        self.source.vars()
    }

    pub fn targetvars(&self) -> BTreeSet<Var> {
        self.premises.iter().filter_map(|p| p.target().cloned()).collect()
    }

    /// All variables mentioned anywhere in the ruloid.
    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = self.source.vars();
        self.target.collect_vars(&mut out);
        for p in &self.premises {
            out.insert(p.subject().clone());
            if let Some(t) = p.target() {
                out.insert(t.clone());
            }
        }
        out
    }

    /// Applies `r` to premises and target; the source is left alone.
    pub fn rename_targets(&self, r: &Renaming) -> Ruloid {
        Ruloid {
            premises: self.premises.iter().map(|p| p.rename(r)).collect(),
            source: self.source.clone(),
            action: self.action.clone(),
            target: self.target.rename(r),
        }
    }

    /// Applies `r` everywhere.
    pub fn rename(&self, r: &Renaming) -> Ruloid {
        Ruloid {
            premises: self.premises.iter().map(|p| p.rename(r)).collect(),
            source: self.source.rename(r),
            action: self.action.clone(),
            target: self.target.rename(r),
        }
    }

    /// The premise whose target is `y`, if any.
    pub fn premise_for_target(&self, y: &Var) -> Option<&Premise> {
        self.premises.iter().find(|p| p.target() == Some(y))
    }

    /// Checks the four shape invariants of a ruloid.
    pub fn shape_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let sources = self.sourcevars();
        let targets: Vec<&Var> = self.premises.iter().filter_map(Premise::target).collect();
        let target_set: BTreeSet<&Var> = targets.iter().copied().collect();
        if target_set.len() != targets.len() {
            out.push("premise targets are not pairwise distinct".to_string());
        }
        for t in &target_set {
            if sources.contains(*t) {
                out.push(format!("premise target {t} is also a source variable"));
            }
        }
        for p in &self.premises {
            if !sources.contains(p.subject()) {
                out.push(format!("premise `{p}` tests {} which is not a source variable", p.subject()));
            }
        }
        for v in self.target.vars() {
            if !sources.contains(&v) && !target_set.contains(&v) {
                out.push(format!("target uses undeclared variable {v}"));
            }
        }
        out
    }
}

impl Ord for Ruloid {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (&self.action, &self.source, &self.target, &self.premises).cmp(&(
            &other.action,
            &other.source,
            &other.target,
            &other.premises,
        ))
    }
}

impl PartialOrd for Ruloid {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Ruloid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} |- {} -{}-> {}", fmt_premises(&self.premises), self.source, self.action, self.target)
    }
}

impl fmt::Debug for Ruloid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Ruloid {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A GSOS rule: a ruloid whose source is `principal(x1, ..., xl)`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    pub principal: Op,
    pub args: Vec<Var>,
    pub premises: BTreeSet<Premise>,
    pub action: Action,
    pub target: Term,
}

impl Rule {
    pub fn source(&self) -> Term {
        Term::App(self.principal.clone(), self.args.iter().cloned().map(Term::Var).collect())
    }

    pub fn to_ruloid(&self) -> Ruloid {
        Ruloid {
            premises: self.premises.clone(),
            source: self.source(),
            action: self.action.clone(),
            target: self.target.clone(),
        }
    }

    /// Premises on the `i`-th argument.
    pub fn premises_on(&self, i: usize) -> impl Iterator<Item = &Premise> {
        let x = &self.args[i];
        self.premises.iter().filter(move |p| p.subject() == x)
    }

    pub fn is_non_inheriting(&self) -> bool {
        self.args.iter().all(|x| !self.target.contains_var(x))
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.to_ruloid(), f)
    }
}

impl fmt::Debug for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Operation symbols with their arities.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    ops: BTreeMap<Op, usize>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares `op/arity`. Returns false if `op` is already declared.
    pub fn declare(&mut self, op: Op, arity: usize) -> bool {
        if self.ops.contains_key(&op) {
            return false;
        }
        self.ops.insert(op, arity);
        true
    }

    pub fn arity(&self, op: &Op) -> Option<usize> {
        self.ops.get(op).copied()
    }

    pub fn contains(&self, op: &Op) -> bool {
        self.ops.contains_key(op)
    }

    pub fn contains_name(&self, name: &str) -> bool {
        self.ops.contains_key(&Op::new(name))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Op, usize)> {
        self.ops.iter().map(|(o, a)| (o, *a))
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Diagnostics for a term that is not well-sorted over this signature.
    pub fn term_violations(&self, t: &Term) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_term_violations(t, &mut out);
        out
    }

    fn collect_term_violations(&self, t: &Term, out: &mut Vec<String>) {
        match t {
            Term::Var(v) => {
                if self.contains_name(v.name()) {
                    out.push(format!("variable {v} clashes with an operation symbol"));
                }
            }
            Term::App(op, args) => {
                match self.arity(op) {
                    None => out.push(format!("undeclared operation {op}")),
                    Some(n) if n != args.len() => {
                        out.push(format!("{op} has arity {n} but is applied to {} arguments", args.len()))
                    }
                    _ => {}
                }
                args.iter().for_each(|a| self.collect_term_violations(a, out));
            }
        }
    }
}

/// A problem found by [`GsosLanguage::validate`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    /// Index of the offending rule, if the problem is rule-specific.
    pub rule: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.rule {
            Some(i) => write!(f, "rule #{}: {}", i + 1, self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtendError {
    #[error("extension redeclares operation {0} of the base language")]
    Overlap(Op),
    #[error("extension adds a rule for base operation {0}")]
    RuleForBaseOperation(Op),
    #[error("action sets differ: base {base}, extension {ext}")]
    ActionMismatch { base: String, ext: String },
}

/// A GSOS language over a finite action set.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GsosLanguage {
    pub acts: ActionSet,
    pub sig: Signature,
    pub rules: Vec<Rule>,
}

impl GsosLanguage {
    pub fn new(acts: impl IntoIterator<Item = Action>) -> Self {
        GsosLanguage { acts: acts.into_iter().collect(), sig: Signature::new(), rules: Vec::new() }
    }

    /// Adds a rule unless an identical one is already present.
    pub fn add_rule(&mut self, rule: Rule) {
        if !self.rules.contains(&rule) {
            self.rules.push(rule);
        }
    }

    pub fn rules_for<'a>(&'a self, op: &'a Op) -> impl Iterator<Item = &'a Rule> + 'a {
        self.rules.iter().filter(move |r| &r.principal == op)
    }

    /// Checks every GSOS shape constraint; an empty result means the language
    /// is well formed.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.acts.is_empty() {
            out.push(Diagnostic { rule: None, message: "the action set is empty".to_string() });
        }
        for (i, rule) in self.rules.iter().enumerate() {
            for message in self.rule_violations(rule) {
                out.push(Diagnostic { rule: Some(i), message });
            }
        }
        out
    }

    fn rule_violations(&self, rule: &Rule) -> Vec<String> {
        let mut out = Vec::new();
        match self.sig.arity(&rule.principal) {
            None => out.push(format!("undeclared principal operation {}", rule.principal)),
            Some(n) if n != rule.args.len() => out.push(format!(
                "{} has arity {n} but the rule source has {} arguments",
                rule.principal,
                rule.args.len()
            )),
            _ => {}
        }
        let distinct: BTreeSet<&Var> = rule.args.iter().collect();
        if distinct.len() != rule.args.len() {
            out.push("source arguments are not distinct variables".to_string());
        }
        for p in &rule.premises {
            if !self.acts.contains(p.action()) {
                out.push(format!("premise `{p}` uses undeclared action {}", p.action()));
            }
            if let Some(t) = p.target() {
                if t == p.subject() {
                    out.push(format!("premise `{p}` has the same subject and target"));
                }
            }
        }
        if !self.acts.contains(&rule.action) {
            out.push(format!("conclusion uses undeclared action {}", rule.action));
        }
        out.extend(rule.to_ruloid().shape_violations());
        for v in rule.args.iter().chain(rule.premises.iter().filter_map(Premise::target)) {
            if self.sig.contains_name(v.name()) {
                out.push(format!("variable {v} clashes with an operation symbol"));
            }
        }
        out.extend(self.sig.term_violations(&rule.target).into_iter().filter(|m| !m.starts_with("variable")));
        out
    }

    /// True iff no rule's target mentions one of its source variables.
    pub fn is_non_inheriting(&self) -> bool {
        self.rules.iter().all(Rule::is_non_inheriting)
    }
}

/// Merges `ext` into `base`, provided `ext` only adds new operations and rules
/// for them.
pub fn disjoint_extend(base: &GsosLanguage, ext: &GsosLanguage) -> Result<GsosLanguage, ExtendError> {
    if base.acts != ext.acts {
        return Err(ExtendError::ActionMismatch {
            base: fmt_action_set(&base.acts),
            ext: fmt_action_set(&ext.acts),
        });
    }
    let mut out = base.clone();
    for (op, arity) in ext.sig.iter() {
        if base.sig.contains(op) {
            return Err(ExtendError::Overlap(op.clone()));
        }
        out.sig.declare(op.clone(), arity);
    }
    for rule in &ext.rules {
        if base.sig.contains(&rule.principal) {
            return Err(ExtendError::RuleForBaseOperation(rule.principal.clone()));
        }
        out.add_rule(rule.clone());
    }
    Ok(out)
}

/// Name of the prefixing operation for action `a`, written `a.(x)`.
pub fn prefix_op(a: &Action) -> Op {
    Op::new(format!("{a}."))
}

pub const NIL: &str = "0";
pub const CHOICE: &str = "plus";

/// The BCCSP operations over `acts`: the constant `0`, prefixing `a.(x)` for
/// every action and, when `with_choice` is set, binary choice `plus`.
pub fn bccsp_prelude(acts: &ActionSet, with_choice: bool) -> GsosLanguage {
    let mut lang = GsosLanguage::new(acts.iter().cloned());
    lang.sig.declare(Op::new(NIL), 0);
    let x = Var::new("x");
    let y = Var::new("y");
    for a in acts {
        let op = prefix_op(a);
        lang.sig.declare(op.clone(), 1);
        lang.add_rule(Rule {
            principal: op,
            args: vec![x.clone()],
            premises: BTreeSet::new(),
            action: a.clone(),
            target: Term::Var(x.clone()),
        });
    }
    if with_choice {
        let choice = Op::new(CHOICE);
        lang.sig.declare(choice.clone(), 2);
        for a in acts {
            for (subject, target) in [(&x, "x'"), (&y, "y'")] {
                lang.add_rule(Rule {
                    principal: choice.clone(),
                    args: vec![x.clone(), y.clone()],
                    premises: [Premise::positive(subject.clone(), a.clone(), Var::new(target))].into(),
                    action: a.clone(),
                    target: Term::var(target),
                });
            }
        }
    }
    lang
}
