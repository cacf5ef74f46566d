//! Independent reference implementations used to judge the library.

#![allow(dead_code)]

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::path::PathBuf;
use std::rc::Rc;

use gsos_core::enumerate::closed_terms;
use gsos_core::model::{Action, ActionSet, GsosLanguage, Premise};
use gsos_core::parser::{load_spec, SpecFile};
use gsos_core::semantics::InitUniverse;
use gsos_core::{Substitution, Term, Var};

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

type Steps = Rc<Vec<(Action, Term)>>;

/// Closed transitions computed by firing rules directly.
pub struct Oracle<'a> {
    lang: &'a GsosLanguage,
    memo: RefCell<HashMap<Term, Steps>>,
}

impl<'a> Oracle<'a> {
    pub fn new(lang: &'a GsosLanguage) -> Self {
        Oracle { lang, memo: RefCell::new(HashMap::new()) }
    }

    pub fn step(&self, t: &Term) -> Steps {
        if let Some(s) = self.memo.borrow().get(t) {
            return s.clone();
        }
        let Term::App(f, args) = t else { panic!("{t} is open") };
        let arg_steps: Vec<Steps> = args.iter().map(|a| self.step(a)).collect();
        let mut out = BTreeSet::new();
        for rule in self.lang.rules.iter().filter(|r| &r.principal == f && r.args.len() == args.len()) {
            let index: BTreeMap<&Var, usize> = rule.args.iter().enumerate().map(|(i, x)| (x, i)).collect();
            let mut base = Substitution::new();
            for (x, a) in rule.args.iter().zip(args) {
                base.insert(x.clone(), a.clone());
            }
            let mut partial = vec![base];
            for p in &rule.premises {
                let i = index[p.subject()];
                partial = match p {
                    Premise::Negative { action, .. } => {
                        if arg_steps[i].iter().any(|(b, _)| b == action) {
                            Vec::new()
                        } else {
                            partial
                        }
                    }
                    Premise::Positive { action, target, .. } => partial
                        .iter()
                        .flat_map(|s| {
                            arg_steps[i].iter().filter(|(b, _)| b == action).map(move |(_, q)| {
                                let mut s = s.clone();
                                s.insert(target.clone(), q.clone());
                                s
                            })
                        })
                        .collect(),
                };
            }
            for s in partial {
                out.insert((rule.action.clone(), rule.target.apply(&s)));
            }
        }
        let steps: Steps = Rc::new(out.into_iter().collect());
        self.memo.borrow_mut().insert(t.clone(), steps.clone());
        steps
    }

    pub fn init(&self, t: &Term) -> ActionSet {
        self.step(t).iter().map(|(a, _)| a.clone()).collect()
    }

    /// Bisimilarity by naive signature refinement of the states reachable from `p`
    /// and `q`.
    pub fn bisimilar(&self, p: &Term, q: &Term) -> bool {
        let mut states: Vec<Term> = Vec::new();
        let mut index: HashMap<Term, usize> = HashMap::new();
        let mut queue = VecDeque::new();
        for t in [p, q] {
            if !index.contains_key(t) {
                index.insert(t.clone(), states.len());
                states.push(t.clone());
                queue.push_back(t.clone());
            }
        }
        let mut succ: Vec<Vec<(Action, usize)>> = Vec::new();
        while let Some(t) = queue.pop_front() {
            let mut out = Vec::new();
            for (a, u) in self.step(&t).iter() {
                let j = *index.entry(u.clone()).or_insert_with(|| {
                    states.push(u.clone());
                    queue.push_back(u.clone());
                    states.len() - 1
                });
                out.push((a.clone(), j));
            }
            assert!(states.len() < 20_000, "state space from {p} / {q} too large for the oracle");
            succ.push(out);
        }
        // signature refinement: split blocks until (block, moves) stabilizes
        let mut block = vec![0usize; states.len()];
        let mut count = 1;
        loop {
            let mut ids: HashMap<(usize, BTreeSet<(Action, usize)>), usize> = HashMap::new();
            let next: Vec<usize> = (0..states.len())
                .map(|i| {
                    let sig = (block[i], succ[i].iter().map(|(a, j)| (a.clone(), block[*j])).collect());
                    let k = ids.len();
                    *ids.entry(sig).or_insert(k)
                })
                .collect();
            block = next;
            if ids.len() == count {
                return block[index[p]] == block[index[q]];
            }
            count = ids.len();
        }
    }
}

/// Closed terms of depth at most 2 plus one witness per realizable init set.
pub fn pool(lang: &GsosLanguage, universe: &InitUniverse) -> Vec<Term> {
    let mut out: BTreeSet<Term> = closed_terms(&lang.sig, 2, 10_000).into_iter().collect();
    out.extend(universe.witness.values().cloned());
    out.into_iter().collect()
}

/// One term per bisimilarity class of `pool`. Bisimilarity is a
/// congruence for GSOS languages, so instantiating contexts with these
/// representatives decides the same equations as the whole pool.
pub fn representatives(oracle: &Oracle, pool: &[Term]) -> Vec<Term> {
    let mut out: Vec<Term> = Vec::new();
    for t in pool {
        if !out.iter().any(|u| oracle.bisimilar(t, u)) {
            out.push(t.clone());
        }
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

/// Instantiations of both sides of an open equation that the oracle
/// distinguishes.
pub fn counterexamples(oracle: &Oracle, pool: &[Term], p: &Term, q: &Term) -> Vec<Substitution> {
    let vars: Vec<Var> = p.vars().union(&q.vars()).cloned().collect();
    all_substitutions(&vars, pool).into_iter().filter(|s| !oracle.bisimilar(&p.apply(s), &q.apply(s))).collect()
}
