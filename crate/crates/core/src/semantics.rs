//! The transition relation over closed terms, LTS extraction, strong
//! bisimilarity by partition refinement, and the realizable init sets.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::sync::{Arc, Mutex};

use itertools::Itertools;
use serde::Serialize;
use thiserror::Error;

use crate::model::{fmt_action_set, Action, ActionSet, GsosLanguage, Premise, Rule};
use crate::term::{Op, Substitution, Term};

pub const DEFAULT_MAX_STATES: usize = 4096;

pub type Transitions = BTreeSet<(Action, Term)>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SemanticsError {
    #[error("term {0} is not closed")]
    NotClosed(Term),
}

#[derive(Debug, Error, Clone)]
pub enum LtsError {
    #[error("term {0} is not closed")]
    NotClosed(Term),
    #[error("state budget of {} exhausted", .0.states.len())]
    BudgetExceeded(Lts),
}

/// Transition relation of a GSOS language, computed by structural recursion
/// and cached per term.
pub struct Semantics<'a> {
    lang: &'a GsosLanguage,
    rules: HashMap<Op, Vec<&'a Rule>>,
    cache: Mutex<HashMap<Term, Arc<Transitions>>>,
}

impl<'a> Semantics<'a> {
    pub fn new(lang: &'a GsosLanguage) -> Self {
        let mut rules: HashMap<Op, Vec<&Rule>> = HashMap::new();
        for r in &lang.rules {
            rules.entry(r.principal.clone()).or_default().push(r);
        }
        Semantics { lang, rules, cache: Mutex::new(HashMap::new()) }
    }

    pub fn language(&self) -> &GsosLanguage {
        self.lang
    }

    /// All `(c, q)` with `p -c-> q`.
    pub fn step(&self, p: &Term) -> Result<Arc<Transitions>, SemanticsError> {
        if !p.is_closed() {
            return Err(SemanticsError::NotClosed(p.clone()));
        }
        Ok(self.step_closed(p))
    }

    pub fn init(&self, p: &Term) -> Result<ActionSet, SemanticsError> {
        Ok(self.step(p)?.iter().map(|(a, _)| a.clone()).collect())
    }

    fn step_closed(&self, p: &Term) -> Arc<Transitions> {
        if let Some(hit) = self.cache.lock().unwrap().get(p) {
            return hit.clone();
        }
        let Term::App(op, args) = p else { unreachable!("closed terms are applications") };
        let mut out = Transitions::new();
        let mut child_steps: Vec<Option<Arc<Transitions>>> = vec![None; args.len()];
        for rule in self.rules.get(op).into_iter().flatten() {
            for i in 0..args.len() {
                if child_steps[i].is_none() && rule.premises_on(i).next().is_some() {
                    child_steps[i] = Some(self.step_closed(&args[i]));
                }
            }
            fire(rule, args, &child_steps, &mut out);
        }
        let out = Arc::new(out);
        self.cache.lock().unwrap().insert(p.clone(), out.clone());
        out
    }

    pub fn build_lts(&self, p: &Term, max_states: usize) -> Result<Lts, LtsError> {
        self.build_lts_multi(std::slice::from_ref(p), max_states)
    }

    /// Breadth-first closure from several roots into one LTS. The first root
    /// is the initial state.
    pub fn build_lts_multi(&self, roots: &[Term], max_states: usize) -> Result<Lts, LtsError> {
        let mut lts = Lts::default();
        let mut queue = VecDeque::new();
        for r in roots {
            if !r.is_closed() {
                return Err(LtsError::NotClosed(r.clone()));
            }
            if !lts.index.contains_key(r) {
                if lts.states.len() >= max_states.max(1) {
                    lts.truncated = true;
                    return Err(LtsError::BudgetExceeded(lts));
                }
                queue.push_back(lts.add_state(r.clone()));
            }
        }
        while let Some(s) = queue.pop_front() {
            let term = lts.states[s].clone();
            for (a, q) in self.step_closed(&term).iter() {
                let t = match lts.index.get(q) {
                    Some(&t) => t,
                    None => {
                        if lts.states.len() >= max_states {
                            lts.truncated = true;
                            return Err(LtsError::BudgetExceeded(lts));
                        }
                        let t = lts.add_state(q.clone());
                        queue.push_back(t);
                        t
                    }
                };
                lts.transitions.push((s, a.clone(), t));
            }
        }
        Ok(lts)
    }

    /// Bisimilarity of two closed terms; `Inconclusive` when either side has
    /// more than `max_states` reachable states.
    pub fn bisimilar(&self, p: &Term, q: &Term, max_states: usize) -> Result<BisimVerdict, SemanticsError> {
        for t in [p, q] {
            if !t.is_closed() {
                return Err(SemanticsError::NotClosed(t.clone()));
            }
        }
        for t in [p, q] {
            if let Err(LtsError::BudgetExceeded(_)) = self.build_lts(t, max_states) {
                return Ok(BisimVerdict::Inconclusive);
            }
        }
        let lts = match self.build_lts_multi(&[p.clone(), q.clone()], max_states.saturating_mul(2)) {
            Ok(lts) => lts,
            Err(_) => return Ok(BisimVerdict::Inconclusive),
        };
        let blocks = partition_refinement(&lts);
        let (i, j) = (lts.index[p], lts.index[q]);
        Ok(if blocks[i] == blocks[j] { BisimVerdict::Yes } else { BisimVerdict::No })
    }

    /// Bisimulation class of each root, computed on one shared LTS.
    pub fn classify(&self, roots: &[Term], max_states: usize) -> Result<Vec<usize>, LtsError> {
        let lts = self.build_lts_multi(roots, max_states)?;
        let blocks = partition_refinement(&lts);
        Ok(roots.iter().map(|r| blocks[lts.index[r]]).collect())
    }
}

/// Adds every transition `rule` supports for `op(args)` to `out`.
fn fire(rule: &Rule, args: &[Term], child_steps: &[Option<Arc<Transitions>>], out: &mut Transitions) {
    let mut base = Substitution::new();
    for (x, p) in rule.args.iter().zip(args) {
        base.insert(x.clone(), p.clone());
    }
    let index_of = |v| rule.args.iter().position(|x| x == v).expect("premise subject is a source variable");
    let mut positives = Vec::new();
    for premise in &rule.premises {
        let i = index_of(premise.subject());
        let steps = child_steps[i].as_ref().expect("child steps computed for tested arguments");
        match premise {
            Premise::Negative { action, .. } => {
                if steps.iter().any(|(a, _)| a == action) {
                    return;
                }
            }
            Premise::Positive { action, target, .. } => {
                let children: Vec<&Term> = steps.iter().filter(|(a, _)| a == action).map(|(_, q)| q).collect();
                if children.is_empty() {
                    return;
                }
                positives.push((target.clone(), children));
            }
        }
    }
    for choice in positives.iter().map(|(_, cs)| cs.iter()).multi_cartesian_product() {
        let mut s = base.clone();
        for ((y, _), q) in positives.iter().zip(choice) {
            s.insert(y.clone(), (*q).clone());
        }
        out.insert((rule.action.clone(), rule.target.apply(&s)));
    }
    if positives.is_empty() {
        out.insert((rule.action.clone(), rule.target.apply(&base)));
    }
}

/// `step` as a free function.
pub fn step(lang: &GsosLanguage, p: &Term) -> Result<Transitions, SemanticsError> {
    Semantics::new(lang).step(p).map(|t| (*t).clone())
}

pub fn build_lts(lang: &GsosLanguage, p: &Term, max_states: usize) -> Result<Lts, LtsError> {
    Semantics::new(lang).build_lts(p, max_states)
}

pub fn bisimilar_closed(lang: &GsosLanguage, p: &Term, q: &Term, max_states: usize) -> Result<BisimVerdict, SemanticsError> {
    Semantics::new(lang).bisimilar(p, q, max_states)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BisimVerdict {
    Yes,
    No,
    Inconclusive,
}

impl fmt::Display for BisimVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BisimVerdict::Yes => "yes",
            BisimVerdict::No => "no",
            BisimVerdict::Inconclusive => "inconclusive",
        })
    }
}

/// A finite fragment of the transition relation; states are numbered in
/// breadth-first discovery order.
#[derive(Clone, Debug, Default)]
pub struct Lts {
    pub states: Vec<Term>,
    pub index: HashMap<Term, usize>,
    pub transitions: Vec<(usize, Action, usize)>,
    pub truncated: bool,
}

impl Lts {
    fn add_state(&mut self, t: Term) -> usize {
        let id = self.states.len();
        self.index.insert(t.clone(), id);
        self.states.push(t);
        id
    }

    pub fn initial(&self) -> Option<&Term> {
        self.states.first()
    }

    pub fn successors(&self) -> Vec<Vec<(Action, usize)>> {
        let mut out = vec![Vec::new(); self.states.len()];
        for (s, a, t) in &self.transitions {
            out[*s].push((a.clone(), *t));
        }
        out
    }

    /// Line-based dump: `state <id> <term>` then `trans <id> <action> <id>`.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.states.iter().enumerate() {
            out.push_str(&format!("state {i} {s}\n"));
        }
        for (s, a, t) in &self.transitions {
            out.push_str(&format!("trans {s} {a} {t}\n"));
        }
        out
    }
}

/// Coarsest stable partition: returns a block number per state, where two
/// states share a block iff they are strongly bisimilar.
pub fn partition_refinement(lts: &Lts) -> Vec<usize> {
    let succ = lts.successors();
    let mut block = vec![0usize; lts.states.len()];
    let mut count = 1;
    loop {
        let mut ids: BTreeMap<(usize, BTreeSet<(Action, usize)>), usize> = BTreeMap::new();
        let signatures: Vec<_> = (0..lts.states.len())
            .map(|s| (block[s], succ[s].iter().map(|(a, t)| (a.clone(), block[*t])).collect::<BTreeSet<_>>()))
            .collect();
        for sig in &signatures {
            let next = ids.len();
            ids.entry(sig.clone()).or_insert(next);
        }
        let refined: Vec<usize> = signatures.iter().map(|sig| ids[sig]).collect();
        let new_count = ids.len();
        block = refined;
        if new_count == count {
            return block;
        }
        count = new_count;
    }
}

/// The init sets realized by closed terms, each with a witness term.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InitUniverse {
    pub realizable: BTreeSet<ActionSet>,
    pub witness: BTreeMap<ActionSet, Term>,
}

impl InitUniverse {
    pub fn is_empty(&self) -> bool {
        self.realizable.is_empty()
    }

    pub fn len(&self) -> usize {
        self.realizable.len()
    }

    /// Is there a realizable set containing all of `must` and none of `must_not`?
    pub fn admits(&self, must: &ActionSet, must_not: &ActionSet) -> bool {
        self.realizable.iter().any(|i| must.is_subset(i) && i.is_disjoint(must_not))
    }

    pub fn is_full_powerset(&self, acts: &ActionSet) -> bool {
        self.missing(acts).is_empty()
    }

    /// Subsets of `acts` not realized by any closed term.
    pub fn missing(&self, acts: &ActionSet) -> Vec<ActionSet> {
        let acts: Vec<&Action> = acts.iter().collect();
        (0..1u64 << acts.len())
            .map(|mask| {
                acts.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, a)| (*a).clone()).collect()
            })
            .filter(|s: &ActionSet| !self.realizable.contains(s))
            .sorted()
            .collect()
    }
}

impl fmt::Display for InitUniverse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.realizable.iter().map(fmt_action_set).join(", "))
    }
}

/// Least fixpoint of realizable init sets: the init set of `f(p1..pl)` only
/// depends on the init sets of the `pi`.
pub fn init_universe(lang: &GsosLanguage) -> InitUniverse {
    let mut universe = InitUniverse::default();
    loop {
        let snapshot: Vec<ActionSet> = universe.realizable.iter().cloned().collect();
        let mut found = Vec::new();
        for (op, arity) in lang.sig.iter() {
            let rules: Vec<&Rule> = lang.rules_for(op).collect();
            let tuples: Vec<Vec<&ActionSet>> = if arity == 0 {
                vec![Vec::new()]
            } else {
                (0..arity).map(|_| snapshot.iter()).multi_cartesian_product().collect()
            };
            for tuple in tuples {
                let enabled: ActionSet =
                    rules.iter().filter(|r| enabled_by(r, &tuple)).map(|r| r.action.clone()).collect();
                if universe.realizable.contains(&enabled) || found.iter().any(|(s, _)| s == &enabled) {
                    continue;
                }
                let args = tuple.iter().map(|s| universe.witness[*s].clone()).collect();
                found.push((enabled, Term::App(op.clone(), args)));
            }
        }
        if found.is_empty() {
            return universe;
        }
        for (set, w) in found {
            universe.realizable.insert(set.clone());
            universe.witness.insert(set, w);
        }
    }
}

/// Whether `rule` fires for arguments with the given init sets.
fn enabled_by(rule: &Rule, inits: &[&ActionSet]) -> bool {
    rule.premises.iter().all(|p| {
        let i = rule.args.iter().position(|x| x == p.subject()).expect("premise subject is a source variable");
        match p {
            Premise::Positive { action, .. } => inits[i].contains(action),
            Premise::Negative { action, .. } => !inits[i].contains(action),
        }
    })
}
