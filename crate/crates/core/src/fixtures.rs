//! Small languages shared by the unit tests.

use std::collections::BTreeSet;

use crate::model::{bccsp_prelude, Action, ActionSet, GsosLanguage, Premise, Rule};
use crate::term::{Op, Term, Var};

pub fn acts(names: &[&str]) -> ActionSet {
    names.iter().map(Action::new).collect()
}

pub fn rule(op: &str, args: &[&str], premises: &[Premise], action: &str, target: Term) -> Rule {
    Rule {
        principal: Op::new(op),
        args: args.iter().map(Var::new).collect(),
        premises: premises.iter().cloned().collect(),
        action: Action::new(action),
        target,
    }
}

pub fn add_seq(lang: &mut GsosLanguage) {
    let names: Vec<Action> = lang.acts.iter().cloned().collect();
    lang.sig.declare(Op::new("seq"), 2);
    for a in &names {
        lang.add_rule(Rule {
            principal: Op::new("seq"),
            args: vec!["x".into(), "y".into()],
            premises: [Premise::positive("x", a.clone(), "z")].into(),
            action: a.clone(),
            target: Term::app("seq", vec![Term::var("z"), Term::var("y")]),
        });
        let mut premises: BTreeSet<Premise> = names.iter().map(|b| Premise::negative("x", b.clone())).collect();
        premises.insert(Premise::positive("y", a.clone(), "z"));
        lang.add_rule(Rule {
            principal: Op::new("seq"),
            args: vec!["x".into(), "y".into()],
            premises,
            action: a.clone(),
            target: Term::var("z"),
        });
    }
}

/// Sequential composition alone.
pub fn sequencing(names: &[&str]) -> GsosLanguage {
    let mut lang = GsosLanguage::new(acts(names));
    add_seq(&mut lang);
    lang
}

/// Sequential composition over BCCSP.
pub fn bccsp_seq(names: &[&str]) -> GsosLanguage {
    let mut lang = bccsp_prelude(&acts(names), true);
    add_seq(&mut lang);
    lang
}

pub fn add_int(lang: &mut GsosLanguage) {
    let names: Vec<Action> = lang.acts.iter().cloned().collect();
    lang.sig.declare(Op::new("int"), 2);
    for a in &names {
        let a = a.label();
        lang.add_rule(rule("int", &["x", "y"], &[Premise::positive("x", a, "x'")], a, Term::app("int", vec![Term::var("x'"), Term::var("y")])));
        lang.add_rule(rule("int", &["x", "y"], &[Premise::positive("y", a, "y'")], a, Term::app("int", vec![Term::var("x"), Term::var("y'")])));
    }
}

/// `Omega` performing every action forever, with interleaving.
pub fn clock(names: &[&str]) -> GsosLanguage {
    let mut lang = GsosLanguage::new(acts(names));
    lang.sig.declare(Op::new("Omega"), 0);
    for a in names {
        lang.add_rule(rule("Omega", &[], &[], a, Term::constant("Omega")));
    }
    add_int(&mut lang);
    lang
}

/// `ab` performing a and b forever, plus unary h, i, f, g.
pub fn lookahead() -> GsosLanguage {
    let mut lang = GsosLanguage::new(acts(&["a", "b"]));
    lang.sig.declare(Op::new("ab"), 0);
    for op in ["f", "g", "h", "i"] {
        lang.sig.declare(Op::new(op), 1);
    }
    lang.add_rule(rule("ab", &[], &[], "a", Term::constant("ab")));
    lang.add_rule(rule("ab", &[], &[], "b", Term::constant("ab")));
    let both = [Premise::positive("x", "a", "y1"), Premise::positive("x", "b", "y2")];
    let x = || Term::var("x");
    lang.add_rule(rule("h", &["x"], &both, "a", Term::app("f", vec![x()])));
    lang.add_rule(rule("i", &["x"], &both, "a", Term::app("g", vec![x()])));
    lang.add_rule(rule("f", &["x"], &both, "a", Term::app("f", vec![x()])));
    lang.add_rule(rule("g", &["x"], &[Premise::positive("x", "a", "y1")], "a", Term::app("g", vec![x()])));
    lang
}

/// Constants `a` and `0`, binary f and unary g whose combination
/// `f(x, g(x))` has only a junk ruloid.
pub fn junk_context() -> GsosLanguage {
    let mut lang = GsosLanguage::new(acts(&["a", "b"]));
    lang.sig.declare(Op::new("a"), 0);
    lang.sig.declare(Op::new("0"), 0);
    lang.sig.declare(Op::new("f"), 2);
    lang.sig.declare(Op::new("g"), 1);
    lang.add_rule(rule("a", &[], &[], "a", Term::constant("0")));
    lang.add_rule(rule(
        "f",
        &["x", "y"],
        &[Premise::positive("x", "a", "x'"), Premise::positive("y", "b", "y'")],
        "a",
        Term::constant("0"),
    ));
    lang.add_rule(rule("g", &["x"], &[Premise::negative("x", "a")], "b", Term::constant("0")));
    lang
}

/// Up to `cap` closed substitutions for `vars` drawn from `pool`, spread
/// evenly over the full product.
pub fn substitutions(vars: &[Var], pool: &[Term], cap: usize) -> Vec<crate::term::Substitution> {
    use itertools::Itertools;
    let total = pool.len().checked_pow(vars.len() as u32).unwrap_or(usize::MAX).max(1);
    let stride = total.div_ceil(cap.max(1)).max(1);
    let tuples: Box<dyn Iterator<Item = Vec<&Term>>> =
        if vars.is_empty() { Box::new(std::iter::once(Vec::new())) } else { Box::new(vars.iter().map(|_| pool.iter()).multi_cartesian_product()) };
    tuples
        .step_by(stride)
        .map(|ts| vars.iter().cloned().zip(ts.into_iter().cloned()).collect())
        .collect()
}

/// Extensions of the closed substitution `s` to the targets of `r` under
/// which every premise of `r` holds.
pub fn fire_ruloid(
    sem: &crate::semantics::Semantics,
    r: &crate::model::Ruloid,
    s: &crate::term::Substitution,
) -> Vec<crate::term::Substitution> {
    let mut out = vec![s.clone()];
    for p in &r.premises {
        let subject = Term::Var(p.subject().clone()).apply(s);
        let steps = sem.step(&subject).unwrap();
        out = match p {
            Premise::Negative { action, .. } => {
                if steps.iter().any(|(a, _)| a == action) {
                    return Vec::new();
                }
                out
            }
            Premise::Positive { action, target, .. } => out
                .into_iter()
                .flat_map(|partial| {
                    steps.iter().filter(|(a, _)| a == action).map(move |(_, q)| {
                        let mut next = partial.clone();
                        next.insert(target.clone(), q.clone());
                        next
                    })
                })
                .collect(),
        };
    }
    out
}
