mod common;

use common::{fire, load, CORPUS};
use gsos_core::enumerate::closed_terms;
use gsos_core::logic::{entails, is_junk, satisfiable, Assignment, Entailment, Formula};
use gsos_core::model::{Action, ActionSet};
use gsos_core::semantics::{init_universe, InitUniverse, Semantics};
use gsos_core::Var;
use proptest::prelude::*;

fn formula(acts: Vec<&'static str>) -> impl Strategy<Value = Formula> {
    let atom = (proptest::sample::select(vec!["x", "y", "z"]), proptest::sample::select(acts))
        .prop_map(|(x, a)| Formula::atom(x, a));
    let leaf = prop_oneof![atom, Just(Formula::True), Just(Formula::falsum())];
    leaf.prop_recursive(3, 8, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(f, g)| Formula::and(f, g)),
            (inner.clone(), inner).prop_map(|(f, g)| Formula::or(f, g)),
        ]
    })
}

/// Validity of `f => g` by trying every assignment of realizable sets.
fn brute_force(universe: &InitUniverse, f: &Formula, g: &Formula) -> bool {
    let vars: Vec<Var> = f.vars().union(&g.vars()).cloned().collect();
    let sets: Vec<&ActionSet> = universe.realizable.iter().collect();
    if sets.is_empty() {
        return true;
    }
    let mut idx = vec![0usize; vars.len()];
    loop {
        let alpha: Assignment = vars.iter().cloned().zip(idx.iter().map(|&i| sets[i].clone())).collect();
        if f.eval(&alpha).unwrap() && !g.eval(&alpha).unwrap() {
            return false;
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return true;
            }
            idx[k] += 1;
            if idx[k] < sets.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn universes() -> Vec<(&'static str, InitUniverse)> {
    CORPUS.iter().map(|n| (*n, init_universe(&load(n).language))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn entailment_is_reflexive_and_decides_validity(f in formula(vec!["a", "b"]), g in formula(vec!["a", "b"])) {
        for (name, universe) in universes() {
            prop_assert!(entails(&universe, &f, &f).holds(), "{}: {} => itself", name, f);
            let decided = entails(&universe, &f, &g);
            prop_assert_eq!(decided.holds(), brute_force(&universe, &f, &g), "{}: {} => {}", name, f, g);
            if let Entailment::Refuted(c) = decided {
                prop_assert_eq!(f.eval(&c.assignment), Ok(true));
                prop_assert_eq!(g.eval(&c.assignment), Ok(false));
            }
            prop_assert_eq!(satisfiable(&universe, &f), !entails(&universe, &f, &Formula::falsum()).holds());
        }
    }

    #[test]
    fn entailment_is_transitive(f in formula(vec!["a", "b"]), g in formula(vec!["a", "b"]), h in formula(vec!["a", "b"])) {
        for (_, universe) in universes() {
            if entails(&universe, &f, &g).holds() && entails(&universe, &g, &h).holds() {
                prop_assert!(entails(&universe, &f, &h).holds());
            }
        }
    }
}

#[test]
fn counterexample_witnesses_realize_their_sets() {
    for name in CORPUS {
        let spec = load(name);
        let universe = init_universe(&spec.language);
        let sem = Semantics::new(&spec.language);
        let f = Formula::True;
        let g = Formula::atom("x", Action::new(spec.language.acts.iter().next().unwrap().label()));
        if let Entailment::Refuted(c) = entails(&universe, &f, &g) {
            for (x, t) in c.witness.iter() {
                assert_eq!(Some(&sem.init(t).unwrap()), c.assignment.get(x), "{name}");
            }
        }
    }
}

#[test]
fn junk_rules_never_fire() {
    for name in CORPUS {
        let spec = load(name);
        let universe = init_universe(&spec.language);
        let sem = Semantics::new(&spec.language);
        let pool = closed_terms(&spec.language.sig, 2, 200);
        for rule in &spec.language.rules {
            let r = rule.to_ruloid();
            if !is_junk(&universe, &r) {
                continue;
            }
            for s in common::all_substitutions(&rule.args, &pool) {
                assert!(fire(&sem, &r, &s).is_empty(), "{name}: junk rule {rule} fires under {s:?}");
            }
        }
    }
}
