//! Open and closed terms, substitutions, injective renamings and a
//! deterministic supply of fresh variables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

/// A process variable.
///
/// Names are a base identifier with an optional numeric suffix; two variables
/// are equal iff their full names are equal.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(name: impl AsRef<str>) -> Self {
        Var(Arc::from(name.as_ref()))
    }

    pub fn name(&self) -> &str {
        &self.0
    }

    /// Throwaway variables (`_`, `_1`, ...) only ever occur as targets of
    /// premises that exist to test for an action.
    pub fn is_throwaway(&self) -> bool {
        self.0.starts_with('_')
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Var {
    fn from(s: &str) -> Self {
        Var::new(s)
    }
}

impl Serialize for Var {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

/// An operation symbol.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Op(Arc<str>);

impl Op {
    pub fn new(name: impl AsRef<str>) -> Self {
        Op(Arc::from(name.as_ref()))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Op {
    fn from(s: &str) -> Self {
        Op::new(s)
    }
}

/// A term over some signature. Equality is syntactic.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Var),
    App(Op, Vec<Term>),
}

impl Term {
    pub fn var(name: impl AsRef<str>) -> Self {
        Term::Var(Var::new(name))
    }

    pub fn app(op: impl AsRef<str>, args: Vec<Term>) -> Self {
        Term::App(Op::new(op), args)
    }

    pub fn constant(op: impl AsRef<str>) -> Self {
        Term::App(Op::new(op), Vec::new())
    }

    pub fn as_var(&self) -> Option<&Var> {
        match self {
            Term::Var(v) => Some(v),
            Term::App(..) => None,
        }
    }

    /// The set of variables occurring in the term.
    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    /// Variables in left-to-right order of first occurrence.
    pub fn vars_in_order(&self, out: &mut Vec<Var>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::App(_, args) => args.iter().for_each(|a| a.vars_in_order(out)),
        }
    }

    pub fn contains_var(&self, x: &Var) -> bool {
        match self {
            Term::Var(v) => v == x,
            Term::App(_, args) => args.iter().any(|a| a.contains_var(x)),
        }
    }

    pub fn is_closed(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::App(_, args) => args.iter().all(Term::is_closed),
        }
    }

    /// Number of symbol occurrences (variables and operations).
    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) => 1,
            Term::App(_, args) => 1 + args.iter().map(Term::size).sum::<usize>(),
        }
    }

    /// Nesting depth; variables and constants have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Term::Var(_) => 0,
            Term::App(_, args) => args.iter().map(|a| a.depth() + 1).max().unwrap_or(0),
        }
    }

    pub fn apply(&self, s: &Substitution) -> Term {
        apply_subst(self, s)
    }

    pub fn rename(&self, r: &Renaming) -> Term {
        match self {
            Term::Var(v) => Term::Var(r.get(v).cloned().unwrap_or_else(|| v.clone())),
            Term::App(op, args) => Term::App(op.clone(), args.iter().map(|a| a.rename(r)).collect()),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::App(op, args) if args.is_empty() => write!(f, "{op}"),
            Term::App(op, args) => {
                write!(f, "{op}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Term {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A substitution: identity outside its finite support.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Substitution(BTreeMap<Var, Term>);

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, v: Var, t: Term) {
        self.0.insert(v, t);
    }

    pub fn get(&self, v: &Var) -> Option<&Term> {
        self.0.get(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Term)> {
        self.0.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(Var, Term)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (Var, Term)>>(iter: I) -> Self {
        Substitution(iter.into_iter().collect())
    }
}

/// Simultaneous substitution of every supported variable.
pub fn apply_subst(t: &Term, s: &Substitution) -> Term {
    match t {
        Term::Var(v) => s.get(v).cloned().unwrap_or_else(|| t.clone()),
        Term::App(op, args) => Term::App(op.clone(), args.iter().map(|a| apply_subst(a, s)).collect()),
    }
}

/// A variable-to-variable map, injective on its support.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Renaming(BTreeMap<Var, Var>);

impl Renaming {
    pub fn new() -> Self {
        Self::default()
    }

    /// Extends the renaming with `from ↦ to`. Fails if that would make it
    /// inconsistent or non-injective.
    pub fn bind(&mut self, from: &Var, to: &Var) -> bool {
        match self.0.get(from) {
            Some(existing) => existing == to,
            None => {
                if self.0.values().any(|v| v == to) {
                    return false;
                }
                self.0.insert(from.clone(), to.clone());
                true
            }
        }
    }

    pub fn get(&self, v: &Var) -> Option<&Var> {
        self.0.get(v)
    }

    pub fn apply(&self, v: &Var) -> Var {
        self.0.get(v).cloned().unwrap_or_else(|| v.clone())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Var)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_injective(&self) -> bool {
        let image: BTreeSet<_> = self.0.values().collect();
        image.len() == self.0.len()
    }

    /// `other ∘ self`: first apply `self`, then `other`.
    pub fn then(&self, other: &Renaming) -> Renaming {
        let mut out = BTreeMap::new();
        for (k, v) in &self.0 {
            out.insert(k.clone(), other.apply(v));
        }
        for (k, v) in &other.0 {
            if !self.0.contains_key(k) {
                out.insert(k.clone(), v.clone());
            }
        }
        Renaming(out)
    }

    pub fn inverse(&self) -> Renaming {
        Renaming(self.0.iter().map(|(k, v)| (v.clone(), k.clone())).collect())
    }

    pub fn to_substitution(&self) -> Substitution {
        self.0.iter().map(|(k, v)| (k.clone(), Term::Var(v.clone()))).collect()
    }
}

impl FromIterator<(Var, Var)> for Renaming {
    fn from_iter<I: IntoIterator<Item = (Var, Var)>>(iter: I) -> Self {
        Renaming(iter.into_iter().collect())
    }
}

/// A variable not in `exclude`, derived from `hint`.
///
/// Returns `hint` itself when free; otherwise the hint's base (trailing digits
/// stripped) followed by the lowest unused positive index.
pub fn fresh(exclude: &BTreeSet<Var>, hint: &str) -> Var {
    fresh_with(|v| exclude.contains(v), hint)
}

pub fn fresh_with(taken: impl Fn(&Var) -> bool, hint: &str) -> Var {
    let candidate = Var::new(hint);
    if !taken(&candidate) {
        return candidate;
    }
    let base = hint.trim_end_matches(|c: char| c.is_ascii_digit());
    (1usize..)
        .map(|i| Var::new(format!("{base}{i}")))
        .find(|v| !taken(v))
        .expect("unbounded index range")
}

/// Finds an injective renaming `σ` with `(pattern.0 σ, pattern.1 σ) ≡ instance`.
pub fn match_modulo_renaming(pattern: (&Term, &Term), instance: (&Term, &Term)) -> Option<Renaming> {
    let mut r = Renaming::new();
    if match_into(pattern.0, instance.0, &mut r) && match_into(pattern.1, instance.1, &mut r) {
        Some(r)
    } else {
        None
    }
}

fn match_into(pattern: &Term, instance: &Term, r: &mut Renaming) -> bool {
    match (pattern, instance) {
        (Term::Var(x), Term::Var(y)) => r.bind(x, y),
        (Term::App(f, xs), Term::App(g, ys)) => {
            f == g && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| match_into(x, y, r))
        }
        _ => false,
    }
}

/// Renames the variables of a pair to `v1, v2, ...` in left-to-right order of
/// first occurrence. Two pairs are equal modulo injective renaming iff their
/// canonical forms are identical.
pub fn canonical_pair(left: &Term, right: &Term) -> (Term, Term) {
    let mut order = Vec::new();
    left.vars_in_order(&mut order);
    right.vars_in_order(&mut order);
    let r: Renaming = order
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, Var::new(format!("v{}", i + 1))))
        .collect();
    (left.rename(&r), right.rename(&r))
}
