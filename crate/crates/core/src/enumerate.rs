//! Exhaustive enumeration of small terms.

use std::collections::BTreeSet;

use itertools::Itertools;

use crate::model::Signature;
use crate::term::{Term, Var};

/// Closed terms of depth at most `max_depth`, shallowest first, stopping
/// once `cap` terms have been produced.
pub fn closed_terms(sig: &Signature, max_depth: usize, cap: usize) -> Vec<Term> {
    let mut levels: Vec<Term> = Vec::new();
    let mut seen = BTreeSet::new();
    for _ in 0..=max_depth {
        let prev = levels.clone();
        let mut grown = Vec::new();
        for (op, arity) in sig.iter() {
            let tuples: Vec<Vec<&Term>> =
                if arity == 0 { vec![Vec::new()] } else { (0..arity).map(|_| prev.iter()).multi_cartesian_product().collect() };
            for args in tuples {
                let t = Term::App(op.clone(), args.into_iter().cloned().collect());
                if seen.insert(t.clone()) {
                    grown.push(t);
                    if seen.len() >= cap {
                        levels.extend(grown);
                        return levels;
                    }
                }
            }
        }
        if grown.is_empty() {
            break;
        }
        levels.extend(grown);
    }
    levels
}

/// Terms over `vars` with at most `max_size` symbols (variables count as
/// symbols), smallest first.
pub fn terms_over(sig: &Signature, vars: &[Var], max_size: usize) -> Vec<Term> {
    let mut by_size: Vec<Vec<Term>> = vec![Vec::new(); max_size + 1];
    for size in 1..=max_size {
        let mut out = Vec::new();
        if size == 1 {
            out.extend(vars.iter().cloned().map(Term::Var));
        }
        for (op, arity) in sig.iter() {
            if arity == 0 {
                if size == 1 {
                    out.push(Term::App(op.clone(), Vec::new()));
                }
                continue;
            }
            for split in compositions(size - 1, arity) {
                let pools: Vec<&Vec<Term>> = split.iter().map(|&s| &by_size[s]).collect();
                for args in pools.iter().map(|p| p.iter()).multi_cartesian_product() {
                    out.push(Term::App(op.clone(), args.into_iter().cloned().collect()));
                }
            }
        }
        by_size[size] = out;
    }
    by_size.into_iter().flatten().collect()
}

/// Ordered ways of writing `n` as a sum of `parts` positive integers.
fn compositions(n: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if n == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    let mut out = Vec::new();
    for first in 1..=n.saturating_sub(parts - 1) {
        for mut rest in compositions(n - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}
