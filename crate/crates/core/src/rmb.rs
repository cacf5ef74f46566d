//! Rule-matching bisimulations: checking a candidate relation between open
//! terms, and searching for one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;
use serde::Serialize;

use crate::logic::{entails, hyps_of_premises, hyps_of_ruloid_set, Counterexample, Entailment, Formula};
use crate::model::{ActionSet, Premise, Ruloid};
use crate::ruloids::{valid_renamings, RuloidEngine};
use crate::term::{canonical_pair, match_modulo_renaming, Renaming, Term, Var};

pub const DEFAULT_MAX_PATTERNS: usize = 64;
pub const DEFAULT_MAX_TERM_SIZE: usize = 32;
pub const CAVEAT: &str = "method incomplete; equation may still hold";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budgets {
    pub max_patterns: usize,
    pub max_term_size: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets { max_patterns: DEFAULT_MAX_PATTERNS, max_term_size: DEFAULT_MAX_TERM_SIZE }
    }
}

type PairKey = (Term, Term);

/// A finite set of pair patterns, closed under consistent injective
/// renaming, optionally under symmetry, and optionally containing the
/// identity.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OpenRelation {
    pairs: Vec<(Term, Term)>,
    keys: BTreeSet<PairKey>,
    pub symmetric: bool,
    pub identity: bool,
}

impl OpenRelation {
    pub fn new(symmetric: bool, identity: bool) -> Self {
        OpenRelation { symmetric, identity, ..Default::default() }
    }

    /// Symmetric and containing the identity.
    pub fn closed() -> Self {
        Self::new(true, true)
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Term, Term)>) -> Self {
        let mut rel = Self::closed();
        for (p, q) in pairs {
            rel.insert(p, q);
        }
        rel
    }

    fn key(&self, p: &Term, q: &Term) -> PairKey {
        let forward = canonical_pair(p, q);
        if self.symmetric {
            forward.min(canonical_pair(q, p))
        } else {
            forward
        }
    }

    /// Adds a pattern; false if an equivalent one is already present.
    pub fn insert(&mut self, p: Term, q: Term) -> bool {
        let key = self.key(&p, &q);
        if self.keys.insert(key) {
            self.pairs.push((p, q));
            true
        } else {
            false
        }
    }

    fn remove(&mut self, p: &Term, q: &Term) {
        let key = self.key(p, q);
        if self.keys.remove(&key) {
            let pairs = std::mem::take(&mut self.pairs);
            self.pairs = pairs.into_iter().filter(|(a, b)| self.key(a, b) != key).collect();
        }
    }

    pub fn contains(&self, p: &Term, q: &Term) -> bool {
        (self.identity && p == q) || self.keys.contains(&self.key(p, q))
    }

    /// The stored pattern relating `(p, q)` and the renaming that maps it
    /// onto them; `None` for identity membership or non-members.
    pub fn witness(&self, p: &Term, q: &Term) -> Option<((Term, Term), Renaming)> {
        for (a, b) in &self.pairs {
            if let Some(r) = match_modulo_renaming((a, b), (p, q)) {
                return Some(((a.clone(), b.clone()), r));
            }
            if self.symmetric {
                if let Some(r) = match_modulo_renaming((b, a), (p, q)) {
                    return Some(((a.clone(), b.clone()), r));
                }
            }
        }
        None
    }

    pub fn pairs(&self) -> &[(Term, Term)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

impl fmt::Display for OpenRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pairs = self.pairs.iter().map(|(p, q)| format!("({p}, {q})"));
        write!(f, "{{{}}}", pairs.format("; "))?;
        if self.identity {
            f.write_str(" + identity")?;
        }
        Ok(())
    }
}

impl Serialize for OpenRelation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("OpenRelation", 3)?;
        let pairs: Vec<[String; 2]> = self.pairs.iter().map(|(p, q)| [p.to_string(), q.to_string()]).collect();
        st.serialize_field("pairs", &pairs)?;
        st.serialize_field("symmetric", &self.symmetric)?;
        st.serialize_field("identity", &self.identity)?;
        st.end()
    }
}

/// A valid renaming of a ruloid of the right-hand term, with the outcome
/// of each matching condition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Candidate {
    pub ruloid: Ruloid,
    pub same_action: bool,
    pub targets_related: bool,
    pub variables_disjoint: bool,
    pub shared_targets_justified: bool,
}

impl Candidate {
    pub fn admissible(&self) -> bool {
        self.same_action && self.targets_related && self.variables_disjoint && self.shared_targets_justified
    }

    fn structural(&self) -> bool {
        self.same_action && self.variables_disjoint && self.shared_targets_justified
    }
}

/// How one ruloid of the left-hand term fares against the right-hand term.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RuloidMatch {
    pub ruloid: Ruloid,
    pub candidates: Vec<Candidate>,
    pub hypothesis: Formula,
    pub conclusion: Formula,
    pub matched: bool,
    pub counterexample: Option<Counterexample>,
    pub blocked: Vec<(Term, Term)>,
}

impl RuloidMatch {
    /// The admissible candidates, which together form the matching set.
    pub fn chosen(&self) -> impl Iterator<Item = &Ruloid> {
        self.candidates.iter().filter(|c| c.admissible()).map(|c| &c.ruloid)
    }
}

/// The ruloids of `left` matched against `right`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PairReport {
    pub left: Term,
    pub right: Term,
    pub ruloids: Vec<RuloidMatch>,
}

impl PairReport {
    pub fn passed(&self) -> bool {
        self.ruloids.iter().all(|m| m.matched)
    }

    pub fn first_unmatched(&self) -> Option<&RuloidMatch> {
        self.ruloids.iter().find(|m| !m.matched)
    }
}

fn targetvars(r: &Ruloid) -> BTreeSet<Var> {
    r.targetvars()
}

/// The variables-apart condition between a ruloid and a candidate.
fn variables_disjoint(rho: &Ruloid, cand: &Ruloid) -> bool {
    let targets: BTreeSet<Var> = targetvars(rho).union(&targetvars(cand)).cloned().collect();
    let sources: BTreeSet<Var> = rho.sourcevars().union(&cand.sourcevars()).cloned().collect();
    targets.is_disjoint(&sources)
}

/// Every shared target comes from a premise common to both ruloids on a
/// common source variable.
fn shared_targets_justified(rho: &Ruloid, cand: &Ruloid) -> bool {
    let shared_sources: BTreeSet<Var> = rho.sourcevars().intersection(&cand.sourcevars()).cloned().collect();
    targetvars(rho).intersection(&targetvars(cand)).all(|y| {
        rho.premises.iter().any(|p| {
            matches!(p, Premise::Positive { subject, target, .. } if target == y && shared_sources.contains(subject))
                && cand.premises.contains(p)
        })
    })
}

/// Candidate matching ruloids for `rho` among the ruloids of `q`, with
/// conditions evaluated against `related`.
fn candidates(
    rho: &Ruloid,
    q_ruloids: &[Ruloid],
    forbidden: &BTreeSet<Var>,
    related: &dyn Fn(&Term, &Term) -> bool,
) -> Vec<Candidate> {
    q_ruloids
        .iter()
        .filter(|r| r.action == rho.action)
        .flat_map(|r| valid_renamings(r, rho, forbidden))
        .map(|cand| Candidate {
            same_action: cand.action == rho.action,
            targets_related: related(&rho.target, &cand.target),
            variables_disjoint: variables_disjoint(rho, &cand),
            shared_targets_justified: shared_targets_justified(rho, &cand),
            ruloid: cand,
        })
        .collect()
}

fn pair_vars(p: &Term, q: &Term) -> BTreeSet<Var> {
    let mut vars = p.vars();
    q.collect_vars(&mut vars);
    vars
}

/// Matches every ruloid of `p` against valid ruloids of `q`.
pub fn match_pair(engine: &RuloidEngine, p: &Term, q: &Term, related: &dyn Fn(&Term, &Term) -> bool) -> PairReport {
    let forbidden = pair_vars(p, q);
    let p_set = engine.ruloids(p, &forbidden);
    let q_set = engine.ruloids(q, &forbidden);
    let ruloids = p_set
        .ruloids
        .iter()
        .map(|rho| {
            let cands = candidates(rho, &q_set.ruloids, &forbidden, related);
            let hypothesis = hyps_of_premises(&rho.premises);
            let conclusion = hyps_of_ruloid_set(cands.iter().filter(|c| c.admissible()).map(|c| &c.ruloid));
            let (matched, counterexample) = match entails(engine.universe(), &hypothesis, &conclusion) {
                Entailment::Valid => (true, None),
                Entailment::Refuted(c) => (false, Some(c)),
            };
            let blocked = cands
                .iter()
                .filter(|c| c.structural() && !c.targets_related)
                .map(|c| (rho.target.clone(), c.ruloid.target.clone()))
                .unique()
                .collect();
            RuloidMatch { ruloid: rho.clone(), candidates: cands, hypothesis, conclusion, matched, counterexample, blocked }
        })
        .collect();
    PairReport { left: p.clone(), right: q.clone(), ruloids }
}

/// Both orientations of `(p, q)` against `rel`.
pub fn check_pair(engine: &RuloidEngine, rel: &OpenRelation, p: &Term, q: &Term) -> [PairReport; 2] {
    let related = |a: &Term, b: &Term| rel.contains(a, b);
    [match_pair(engine, p, q, &related), match_pair(engine, q, p, &related)]
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Refutation {
    /// The pair whose ruloid could not be matched.
    pub pair: (Term, Term),
    pub ruloid: Ruloid,
    pub counterexample: Counterexample,
    /// Target pairs that would have supplied candidates had they been
    /// related.
    pub blocked: Vec<(Term, Term)>,
    /// From the checked pair down to `pair`, each failing because of the next.
    pub chain: Vec<(Term, Term)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Verdict {
    Proven { relation: OpenRelation, evidence: Vec<PairReport> },
    Refuted(Refutation),
    Inconclusive { reason: String, frontier: Vec<(Term, Term)> },
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Proven { .. } => "proven",
            Verdict::Refuted(_) => "refuted",
            Verdict::Inconclusive { .. } => "inconclusive",
        }
    }

    pub fn is_proven(&self) -> bool {
        matches!(self, Verdict::Proven { .. })
    }

    pub fn is_refuted(&self) -> bool {
        matches!(self, Verdict::Refuted(_))
    }
}

/// Checks `rel` (closed under symmetry) pair by pair.
pub fn check_relation(engine: &RuloidEngine, rel: &OpenRelation) -> Verdict {
    let mut closed = rel.clone();
    closed.symmetric = true;
    let mut evidence = Vec::new();
    for (p, q) in rel.pairs() {
        for report in check_pair(engine, &closed, p, q) {
            if let Some(m) = report.first_unmatched() {
                return Verdict::Refuted(Refutation {
                    pair: (report.left.clone(), report.right.clone()),
                    ruloid: m.ruloid.clone(),
                    counterexample: m.counterexample.clone().expect("unmatched ruloids carry a counterexample"),
                    blocked: m.blocked.clone(),
                    chain: vec![(report.left.clone(), report.right.clone())],
                });
            }
            evidence.push(report);
        }
    }
    Verdict::Proven { relation: closed, evidence }
}

/// Re-evaluates every recorded condition and entailment; true iff all
/// agree with the record.
pub fn replay(engine: &RuloidEngine, rel: &OpenRelation, report: &PairReport) -> bool {
    report.ruloids.iter().all(|m| {
        let conditions_agree = m.candidates.iter().all(|c| {
            c.same_action == (c.ruloid.action == m.ruloid.action)
                && c.targets_related == rel.contains(&m.ruloid.target, &c.ruloid.target)
                && c.variables_disjoint == variables_disjoint(&m.ruloid, &c.ruloid)
                && c.shared_targets_justified == shared_targets_justified(&m.ruloid, &c.ruloid)
        });
        let hypothesis = hyps_of_premises(&m.ruloid.premises);
        let conclusion = hyps_of_ruloid_set(m.chosen());
        let verdict = entails(engine.universe(), &hypothesis, &conclusion);
        conditions_agree
            && hypothesis == m.hypothesis
            && conclusion == m.conclusion
            && verdict.holds() == m.matched
            && match (&verdict, &m.counterexample) {
                (Entailment::Refuted(c), Some(recorded)) => c == recorded,
                (Entailment::Valid, None) => true,
                _ => false,
            }
    })
}

type Pair = (Term, Term);

#[derive(Clone, Debug)]
struct Death {
    pair: (Term, Term),
    ruloid: Ruloid,
    counterexample: Counterexample,
    blocked: Vec<(Term, Term)>,
    because: Vec<PairKey>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Related,
    Dead,
    Oversized,
    New,
}

/// Searches for a rule-matching bisimulation containing `(p, q)` by
/// adding the target pairs unmatched ruloids need, and discarding pairs
/// that cannot be part of any such relation.
pub fn search(engine: &RuloidEngine, p: &Term, q: &Term, budgets: Budgets) -> Verdict {
    let mut rel = OpenRelation::closed();
    rel.insert(p.clone(), q.clone());
    if p == q {
        return Verdict::Proven { relation: rel, evidence: Vec::new() };
    }
    let mut dead: BTreeMap<PairKey, Death> = BTreeMap::new();
    let root_key = rel.key(p, q);
    loop {
        let mut changed = false;
        let mut stuck: Vec<(Term, Term)> = Vec::new();
        let snapshot: Vec<(Term, Term)> = rel.pairs().to_vec();
        'pairs: for (a, b) in &snapshot {
            if !rel.contains(a, b) || a == b {
                continue;
            }
            for (left, right) in [(a, b), (b, a)] {
                let forbidden = pair_vars(left, right);
                let l_set = engine.ruloids(left, &forbidden);
                let r_set = engine.ruloids(right, &forbidden);
                for rho in &l_set.ruloids {
                    let status = |x: &Term, y: &Term| {
                        if rel.contains(x, y) {
                            Status::Related
                        } else if dead.contains_key(&rel.key(x, y)) {
                            Status::Dead
                        } else if x.size().max(y.size()) > budgets.max_term_size {
                            Status::Oversized
                        } else {
                            Status::New
                        }
                    };
                    let cands = candidates(rho, &r_set.ruloids, &forbidden, &|x, y| rel.contains(x, y));
                    let structural: Vec<(&Candidate, Status)> = cands
                        .iter()
                        .filter(|c| c.structural())
                        .map(|c| (c, status(&rho.target, &c.ruloid.target)))
                        .collect();
                    let hyp = hyps_of_premises(&rho.premises);
                    let holds_with = |keep: &dyn Fn(&Candidate, Status) -> bool| {
                        let j = structural.iter().filter(|(c, s)| keep(c, *s)).map(|(c, _)| &c.ruloid);
                        entails(engine.universe(), &hyp, &hyps_of_ruloid_set(j))
                    };
                    if holds_with(&|_, s| s == Status::Related).holds() {
                        continue;
                    }
                    if let Entailment::Refuted(cex) = holds_with(&|_, s| s != Status::Dead) {
                        let because = structural
                            .iter()
                            .filter(|(_, s)| *s == Status::Dead)
                            .map(|(c, _)| rel.key(&rho.target, &c.ruloid.target))
                            .unique()
                            .collect();
                        let blocked = structural
                            .iter()
                            .filter(|(_, s)| *s == Status::Dead)
                            .map(|(c, _)| (rho.target.clone(), c.ruloid.target.clone()))
                            .unique()
                            .collect();
                        let key = rel.key(a, b);
                        dead.insert(
                            key.clone(),
                            Death {
                                pair: (left.clone(), right.clone()),
                                ruloid: rho.clone(),
                                counterexample: cex,
                                blocked,
                                because,
                            },
                        );
                        rel.remove(a, b);
                        if key == root_key {
                            return refutation(&dead, &root_key);
                        }
                        changed = true;
                        continue 'pairs;
                    }
                    let addable: Vec<(Term, Term)> = structural
                        .iter()
                        .filter(|(_, s)| *s == Status::New)
                        .map(|(c, _)| (rho.target.clone(), c.ruloid.target.clone()))
                        .unique_by(|(x, y)| rel.key(x, y))
                        .collect();
                    let satisfied_by = |added: &[&(Term, Term)]| {
                        let keys: BTreeSet<PairKey> = added.iter().map(|(x, y)| rel.key(x, y)).collect();
                        holds_with(&|c, s| {
                            s == Status::Related || (s == Status::New && keys.contains(&rel.key(&rho.target, &c.ruloid.target)))
                        })
                        .holds()
                    };
                    let Some(chosen) = choose_additions(&addable, &satisfied_by) else {
                        stuck.push((left.clone(), right.clone()));
                        continue;
                    };
                    for (x, y) in chosen {
                        let (cx, cy) = canonical_pair(&x, &y);
                        rel.insert(cx, cy);
                    }
                    changed = true;
                    if rel.len() + dead.len() > budgets.max_patterns {
                        return Verdict::Inconclusive {
                            reason: format!("pattern budget of {} exhausted", budgets.max_patterns),
                            frontier: rel.pairs().to_vec(),
                        };
                    }
                }
            }
        }
        if !changed {
            if !stuck.is_empty() {
                return Verdict::Inconclusive {
                    reason: format!("matching needs target pairs larger than {} symbols", budgets.max_term_size),
                    frontier: stuck,
                };
            }
            let evidence = rel
                .pairs()
                .iter()
                .filter(|(a, b)| a != b)
                .flat_map(|(a, b)| check_pair(engine, &rel, a, b))
                .collect();
            return Verdict::Proven { relation: rel, evidence };
        }
    }
}

/// A smallest subset of `addable` (searched exhaustively among the first
/// few, greedily beyond) for which `ok` holds.
fn choose_additions(addable: &[(Term, Term)], ok: &dyn Fn(&[&Pair]) -> bool) -> Option<Vec<(Term, Term)>> {
    const EXHAUSTIVE: usize = 12;
    let head = &addable[..addable.len().min(EXHAUSTIVE)];
    for size in 1..=head.len() {
        for subset in head.iter().combinations(size) {
            if ok(&subset) {
                return Some(subset.into_iter().cloned().collect());
            }
        }
    }
    let mut chosen: Vec<&(Term, Term)> = Vec::new();
    for pair in addable {
        chosen.push(pair);
        if ok(&chosen) {
            return Some(chosen.into_iter().cloned().collect());
        }
    }
    None
}

/// Follows the recorded causes from the root down to a pair that failed on
/// its own.
fn refutation(dead: &BTreeMap<PairKey, Death>, root: &PairKey) -> Verdict {
    let mut chain = Vec::new();
    let mut seen = BTreeSet::new();
    let mut key = root.clone();
    loop {
        let death = &dead[&key];
        chain.push(death.pair.clone());
        seen.insert(key.clone());
        match death.because.iter().find(|k| dead.contains_key(*k) && !seen.contains(*k)) {
            Some(next) => key = next.clone(),
            None => {
                return Verdict::Refuted(Refutation {
                    pair: death.pair.clone(),
                    ruloid: death.ruloid.clone(),
                    counterexample: death.counterexample.clone(),
                    blocked: death.blocked.clone(),
                    chain,
                });
            }
        }
    }
}

/// Whether every subset of actions is the init set of some closed term,
/// which makes proven equations hold in every disjoint extension.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Stability {
    pub stable: bool,
    pub missing: Vec<ActionSet>,
}

pub fn certify_extension_stability(engine: &RuloidEngine) -> Stability {
    let missing = engine.universe().missing(&engine.language().acts);
    Stability { stable: missing.is_empty(), missing }
}
