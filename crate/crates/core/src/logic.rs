//! Initial transition formulae and their entailment relative to the init
//! sets realizable in a language.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;
use serde::Serialize;
use thiserror::Error;

use crate::model::{fmt_action_set, Action, ActionSet, Premise, Ruloid};
use crate::semantics::InitUniverse;
use crate::term::{Substitution, Var};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    Atom(Var, Action),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(x: impl Into<Var>, a: impl Into<Action>) -> Self {
        Formula::Atom(x.into(), a.into())
    }

    pub fn falsum() -> Self {
        Formula::Not(Box::new(Formula::True))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(f: Formula, g: Formula) -> Self {
        Formula::And(Box::new(f), Box::new(g))
    }

    pub fn or(f: Formula, g: Formula) -> Self {
        Formula::not(Formula::and(Formula::not(f), Formula::not(g)))
    }

    /// Right-nested conjunction; `True` when empty.
    pub fn conj(items: impl IntoIterator<Item = Formula>) -> Self {
        let items: Vec<_> = items.into_iter().collect();
        items.into_iter().rev().reduce(|acc, f| Formula::and(f, acc)).unwrap_or(Formula::True)
    }

    /// Right-nested disjunction; `False` when empty.
    pub fn disj(items: impl IntoIterator<Item = Formula>) -> Self {
        let items: Vec<_> = items.into_iter().collect();
        items.into_iter().rev().reduce(|acc, f| Formula::or(f, acc)).unwrap_or_else(Formula::falsum)
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.visit_atoms(&mut |x, _| {
            out.insert(x.clone());
        });
        out
    }

    pub fn atom_count(&self) -> usize {
        let mut n = 0;
        self.visit_atoms(&mut |_, _| n += 1);
        n
    }

    fn visit_atoms(&self, f: &mut impl FnMut(&Var, &Action)) {
        match self {
            Formula::True => {}
            Formula::Atom(x, a) => f(x, a),
            Formula::Not(g) => g.visit_atoms(f),
            Formula::And(g, h) => {
                g.visit_atoms(f);
                h.visit_atoms(f);
            }
        }
    }

    pub fn eval(&self, alpha: &Assignment) -> Result<bool, UnboundVariable> {
        Ok(match self {
            Formula::True => true,
            Formula::Atom(x, a) => alpha.get(x).ok_or_else(|| UnboundVariable(x.clone()))?.contains(a),
            Formula::Not(g) => !g.eval(alpha)?,
            Formula::And(g, h) => g.eval(alpha)? && h.eval(alpha)?,
        })
    }

    fn as_or(&self) -> Option<(&Formula, &Formula)> {
        if let Formula::Not(inner) = self {
            if let Formula::And(g, h) = inner.as_ref() {
                if let (Formula::Not(g), Formula::Not(h)) = (g.as_ref(), h.as_ref()) {
                    return Some((g, h));
                }
            }
        }
        None
    }

    fn is_falsum(&self) -> bool {
        matches!(self, Formula::Not(g) if **g == Formula::True)
    }

    fn collect_conjuncts<'a>(&'a self, out: &mut Vec<&'a Formula>) {
        match self {
            Formula::And(g, h) => {
                g.collect_conjuncts(out);
                h.collect_conjuncts(out);
            }
            _ => out.push(self),
        }
    }

    fn collect_disjuncts<'a>(&'a self, out: &mut Vec<&'a Formula>) {
        match self.as_or() {
            Some((g, h)) => {
                g.collect_disjuncts(out);
                h.collect_disjuncts(out);
            }
            None => out.push(self),
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
        if self.is_falsum() {
            return f.write_str("false");
        }
        if self.as_or().is_some() {
            let mut parts = Vec::new();
            self.collect_disjuncts(&mut parts);
            return self.fmt_joined(f, &parts, " | ", 1, prec > 0);
        }
        match self {
            Formula::True => f.write_str("true"),
            Formula::Atom(x, a) => write!(f, "{x} -{a}->"),
            Formula::Not(g) => {
                f.write_str("!")?;
                g.fmt_prec(f, 3)
            }
            Formula::And(..) => {
                let mut parts = Vec::new();
                self.collect_conjuncts(&mut parts);
                self.fmt_joined(f, &parts, " & ", 2, prec > 1)
            }
        }
    }

    fn fmt_joined(&self, f: &mut fmt::Formatter<'_>, parts: &[&Formula], sep: &str, inner: u8, paren: bool) -> fmt::Result {
        if paren {
            f.write_str("(")?;
        }
        for (i, p) in parts.iter().enumerate() {
            if i > 0 {
                f.write_str(sep)?;
            }
            p.fmt_prec(f, inner + 1)?;
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Serialize for Formula {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("variable {0} is not assigned")]
pub struct UnboundVariable(pub Var);

pub type Assignment = BTreeMap<Var, ActionSet>;

pub fn fmt_assignment(alpha: &Assignment) -> String {
    let parts = alpha.iter().map(|(x, s)| format!("{x}->{}", fmt_action_set(s)));
    format!("[{}]", parts.format(", "))
}

/// `x -a->` or its negation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub var: Var,
    pub action: Action,
    pub positive: bool,
}

impl Literal {
    pub fn of_premise(p: &Premise) -> Self {
        Literal { var: p.subject().clone(), action: p.action().clone(), positive: p.is_positive() }
    }

    pub fn negated(&self) -> Self {
        Literal { positive: !self.positive, ..self.clone() }
    }

    pub fn to_formula(&self) -> Formula {
        let atom = Formula::Atom(self.var.clone(), self.action.clone());
        if self.positive {
            atom
        } else {
            Formula::not(atom)
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{} -{}->", self.var, self.action)
        } else {
            write!(f, "!{} -{}->", self.var, self.action)
        }
    }
}

pub fn literals_of<'a>(premises: impl IntoIterator<Item = &'a Premise>) -> BTreeSet<Literal> {
    premises.into_iter().map(Literal::of_premise).collect()
}

/// Conjunction of the premises' initial transition formulae, with duplicate
/// literals collapsed.
pub fn hyps_of_premises<'a>(premises: impl IntoIterator<Item = &'a Premise>) -> Formula {
    Formula::conj(literals_of(premises).iter().map(Literal::to_formula))
}

pub fn hyps_of_ruloid_set<'a>(ruloids: impl IntoIterator<Item = &'a Ruloid>) -> Formula {
    Formula::disj(ruloids.into_iter().map(|r| hyps_of_premises(&r.premises)))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub assignment: Assignment,
    pub witness: Substitution,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let witness = self.witness.iter().map(|(x, t)| format!("{x}:={t}"));
        write!(f, "{} (e.g. {})", fmt_assignment(&self.assignment), witness.format(", "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Entailment {
    Valid,
    Refuted(Counterexample),
}

impl Entailment {
    pub fn holds(&self) -> bool {
        matches!(self, Entailment::Valid)
    }
}

/// Does every realizable assignment satisfying `f` satisfy `g`? On failure
/// returns the lexicographically least falsifying assignment.
pub fn entails(universe: &InitUniverse, f: &Formula, g: &Formula) -> Entailment {
    let mut vars = f.vars();
    vars.extend(g.vars());
    let mut relevant: BTreeMap<Var, ActionSet> = vars.iter().map(|x| (x.clone(), ActionSet::new())).collect();
    for h in [f, g] {
        h.visit_atoms(&mut |x, a| {
            relevant.get_mut(x).expect("collected").insert(a.clone());
        });
    }
    // One representative (the least set) per projection onto the probed actions.
    let choices: Vec<Vec<&ActionSet>> = vars
        .iter()
        .map(|x| {
            let mut seen = BTreeSet::new();
            universe.realizable.iter().filter(|s| seen.insert(s.intersection(&relevant[x]).cloned().collect::<ActionSet>())).collect()
        })
        .collect();
    let tuples: Box<dyn Iterator<Item = Vec<&ActionSet>>> = if vars.is_empty() {
        Box::new(std::iter::once(Vec::new()).filter(|_| !universe.is_empty()))
    } else {
        Box::new(choices.iter().map(|c| c.iter().copied()).multi_cartesian_product())
    };
    for tuple in tuples {
        let alpha: Assignment = vars.iter().cloned().zip(tuple.into_iter().cloned()).collect();
        let holds = |h: &Formula| h.eval(&alpha).expect("all variables assigned");
        if holds(f) && !holds(g) {
            let witness = alpha.iter().map(|(x, s)| (x.clone(), universe.witness[s].clone())).collect();
            return Entailment::Refuted(Counterexample { assignment: alpha, witness });
        }
    }
    Entailment::Valid
}

pub fn satisfiable(universe: &InitUniverse, f: &Formula) -> bool {
    !entails(universe, f, &Formula::falsum()).holds()
}

/// Satisfiability of a conjunction of literals; variables are independent,
/// so each is checked against the universe on its own.
pub fn literals_satisfiable<'a>(universe: &InitUniverse, lits: impl IntoIterator<Item = &'a Literal>) -> bool {
    let mut per_var: BTreeMap<&Var, (ActionSet, ActionSet)> = BTreeMap::new();
    for l in lits {
        let entry = per_var.entry(&l.var).or_default();
        if l.positive {
            entry.0.insert(l.action.clone());
        } else {
            entry.1.insert(l.action.clone());
        }
    }
    if per_var.is_empty() {
        return !universe.is_empty();
    }
    per_var.values().all(|(must, must_not)| universe.admits(must, must_not))
}

pub fn is_junk(universe: &InitUniverse, r: &Ruloid) -> bool {
    !literals_satisfiable(universe, &literals_of(&r.premises))
}

/// Why a premise set can never hold, or `None` if it can.
pub fn junk_reason<'a>(universe: &InitUniverse, premises: impl IntoIterator<Item = &'a Premise>) -> Option<String> {
    let lits = literals_of(premises);
    if universe.is_empty() {
        return Some("no closed terms exist".to_string());
    }
    if let Some(l) = lits.iter().find(|l| l.positive && lits.contains(&l.negated())) {
        return Some(format!("contradictory premises on {} for action {}", l.var, l.action));
    }
    let mut per_var: BTreeMap<&Var, (ActionSet, ActionSet)> = BTreeMap::new();
    for l in &lits {
        let entry = per_var.entry(&l.var).or_default();
        if l.positive { &mut entry.0 } else { &mut entry.1 }.insert(l.action.clone());
    }
    per_var.iter().find(|(_, (must, must_not))| !universe.admits(must, must_not)).map(|(x, (must, must_not))| {
        format!(
            "no realizable init set for {x} contains {} and avoids {}",
            fmt_action_set(must),
            fmt_action_set(must_not)
        )
    })
}
