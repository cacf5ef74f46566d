#![allow(dead_code)]

use std::path::PathBuf;

use gsos_core::model::{Premise, Ruloid, Signature};
use gsos_core::parser::{load_spec, SpecFile};
use gsos_core::semantics::Semantics;
use gsos_core::{Op, Substitution, Term, Var};
use proptest::prelude::*;

pub const CORPUS: [&str; 9] = [
    "sequencing.gsos",
    "interleave.gsos",
    "clock.gsos",
    "example53.gsos",
    "triv.gsos",
    "fg-extension.gsos",
    "fg-extension-nil.gsos",
    "bccsp.gsos",
    "junk-context.gsos",
];

pub fn spec_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../specs").join(name)
}

pub fn load(name: &str) -> SpecFile {
    load_spec(&spec_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Terms over `sig` and the variables `vars`.
pub fn term_strategy(sig: &Signature, vars: &'static [&'static str]) -> BoxedStrategy<Term> {
    let ops: Vec<(Op, usize)> = sig.iter().map(|(o, n)| (o.clone(), n)).collect();
    let constants: Vec<Term> = ops.iter().filter(|(_, n)| *n == 0).map(|(o, _)| Term::App(o.clone(), vec![])).collect();
    let mut leaves: Vec<Term> = vars.iter().copied().map(Term::var).collect();
    leaves.extend(constants);
    let leaf = proptest::sample::select(leaves).boxed();
    let compound: Vec<(Op, usize)> = ops.into_iter().filter(|(_, n)| *n > 0).collect();
    if compound.is_empty() {
        return leaf;
    }
    leaf.prop_recursive(4, 24, 3, move |inner| {
        proptest::sample::select(compound.clone())
            .prop_flat_map(move |(op, n)| proptest::collection::vec(inner.clone(), n).prop_map(move |args| Term::App(op.clone(), args)))
    })
    .boxed()
}

/// Extensions of `s` to the targets of `r` under which every premise of
/// `r` holds.
pub fn fire(sem: &Semantics, r: &Ruloid, s: &Substitution) -> Vec<Substitution> {
    let mut out = vec![s.clone()];
    for p in &r.premises {
        let steps = sem.step(&Term::Var(p.subject().clone()).apply(s)).unwrap();
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

/// Every substitution of `vars` by terms of `pool`.
pub fn all_substitutions(vars: &[Var], pool: &[Term]) -> Vec<Substitution> {
    let mut out = vec![Substitution::new()];
    for x in vars {
        out = out
            .iter()
            .flat_map(|s| {
                pool.iter().map(move |t| {
                    let mut s = s.clone();
                    s.insert(x.clone(), t.clone());
                    s
                })
            })
            .collect();
    }
    out
}
