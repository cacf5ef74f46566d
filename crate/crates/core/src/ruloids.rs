//! Ruloids: derived rules describing the behaviour of open contexts.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use crate::logic::{literals_of, literals_satisfiable, Literal};
use crate::model::{Action, GsosLanguage, Premise, Rule, Ruloid};
use crate::semantics::{init_universe, InitUniverse};
use crate::term::{fresh_with, Renaming, Substitution, Term, Var};

/// The junk-free ruloids of a context.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuloidSet {
    pub context: Term,
    pub excluded: BTreeSet<Var>,
    pub ruloids: Vec<Ruloid>,
    pub junk_removed: usize,
}

impl RuloidSet {
    pub fn with_action<'a>(&'a self, a: &'a Action) -> impl Iterator<Item = &'a Ruloid> + 'a {
        self.ruloids.iter().filter(move |r| &r.action == a)
    }

    pub fn len(&self) -> usize {
        self.ruloids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ruloids.is_empty()
    }
}

/// Premise sets over the context's variables, one of which holds whenever
/// the context cannot perform `action`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DenialSet {
    pub context: Term,
    pub action: Action,
    pub alternatives: Vec<BTreeSet<Premise>>,
}

type Alternative = BTreeSet<Literal>;

struct Derived {
    ruloids: Vec<Ruloid>,
    junk_removed: usize,
}

type DenialMemo = HashMap<(Term, Action), Arc<Vec<Alternative>>>;

/// Derives ruloid sets, memoizing per context modulo renaming.
pub struct RuloidEngine<'a> {
    lang: &'a GsosLanguage,
    universe: InitUniverse,
    rules: HashMap<&'a str, Vec<&'a Rule>>,
    reserved: BTreeSet<Var>,
    memo: Mutex<HashMap<Term, Arc<Derived>>>,
    denials: Mutex<DenialMemo>,
}

const CANON_SOURCE: &str = "%";
const TARGET: &str = "%t";
const THROWAWAY: &str = "_%";

impl<'a> RuloidEngine<'a> {
    pub fn new(lang: &'a GsosLanguage) -> Self {
        Self::with_universe(lang, init_universe(lang))
    }

    pub fn with_universe(lang: &'a GsosLanguage, universe: InitUniverse) -> Self {
        let mut rules: HashMap<&str, Vec<&Rule>> = HashMap::new();
        for r in &lang.rules {
            rules.entry(r.principal.name()).or_default().push(r);
        }
        RuloidEngine {
            lang,
            universe,
            rules,
            reserved: lang.sig.iter().map(|(op, _)| Var::new(op.name())).collect(),
            memo: Mutex::new(HashMap::new()),
            denials: Mutex::new(HashMap::new()),
        }
    }

    pub fn language(&self) -> &GsosLanguage {
        self.lang
    }

    pub fn universe(&self) -> &InitUniverse {
        &self.universe
    }

    /// Variable names that would print like operation symbols.
    pub fn reserved(&self) -> &BTreeSet<Var> {
        &self.reserved
    }

    /// The ruloid set of `d`, with target variables fresh for `exclude`
    /// and for `vars(d)`.
    pub fn ruloids(&self, d: &Term, exclude: &BTreeSet<Var>) -> RuloidSet {
        let derived = self.derive(d);
        let mut taken: BTreeSet<Var> = exclude.clone();
        d.collect_vars(&mut taken);
        let mut ruloids: Vec<Ruloid> =
            derived.ruloids.iter().map(|r| self.freshen(r, &taken)).collect();
        ruloids.sort();
        ruloids.dedup();
        RuloidSet { context: d.clone(), excluded: exclude.clone(), ruloids, junk_removed: derived.junk_removed }
    }

    pub fn denial(&self, d: &Term, b: &Action) -> DenialSet {
        let alternatives = self.denial_literals(d, b);
        let vars = d.vars();
        let alternatives = alternatives
            .iter()
            .map(|alt| {
                let mut taken = vars.clone();
                taken.extend(self.reserved.iter().cloned());
                alt.iter()
                    .map(|l| {
                        if l.positive {
                            let y = fresh_with(|v| taken.contains(v), "_");
                            taken.insert(y.clone());
                            Premise::positive(l.var.clone(), l.action.clone(), y)
                        } else {
                            Premise::negative(l.var.clone(), l.action.clone())
                        }
                    })
                    .collect()
            })
            .collect();
        DenialSet { context: d.clone(), action: b.clone(), alternatives }
    }

    /// Every ruloid of `p` has target `p`.
    pub fn is_persistent(&self, p: &Term) -> bool {
        self.derive(p).ruloids.iter().all(|r| &r.target == p)
    }

    /// At most one ruloid per action.
    pub fn unique_action_ruloids(&self, p: &Term) -> bool {
        let derived = self.derive(p);
        let actions: BTreeSet<&Action> = derived.ruloids.iter().map(|r| &r.action).collect();
        actions.len() == derived.ruloids.len()
    }

    /// Ruloids of `d` with internal target names, memoized modulo renaming.
    fn derive(&self, d: &Term) -> Arc<Derived> {
        let (key, back) = canonical(d);
        let hit = self.memo.lock().unwrap().get(&key).cloned();
        let derived = match hit {
            Some(hit) => hit,
            None => {
                let computed = Arc::new(self.derive_canonical(&key));
                self.memo.lock().unwrap().entry(key).or_insert(computed).clone()
            }
        };
        if back.iter().all(|(a, b)| a == b) {
            return derived;
        }
        Arc::new(Derived {
            ruloids: derived.ruloids.iter().map(|r| r.rename(&back)).collect(),
            junk_removed: derived.junk_removed,
        })
    }

    fn derive_canonical(&self, d: &Term) -> Derived {
        match d {
            Term::Var(x) => {
                let y = Var::new(format!("{TARGET}1"));
                let ruloids = self
                    .lang
                    .acts
                    .iter()
                    .map(|a| Ruloid {
                        premises: [Premise::positive(x.clone(), a.clone(), y.clone())].into(),
                        source: d.clone(),
                        action: a.clone(),
                        target: Term::Var(y.clone()),
                    })
                    .collect::<Vec<_>>();
                let total = ruloids.len();
                let ruloids: Vec<_> =
                    ruloids.into_iter().filter(|r| literals_satisfiable(&self.universe, &literals_of(&r.premises))).collect();
                Derived { junk_removed: total - ruloids.len(), ruloids }
            }
            Term::App(op, args) => {
                let subs: Vec<Arc<Derived>> = args.iter().map(|a| self.derive(a)).collect();
                let mut out = BTreeSet::new();
                let mut junk_removed = 0;
                for rule in self.rules.get(op.name()).into_iter().flatten() {
                    junk_removed += self.combine(rule, d, args, &subs, &mut out);
                }
                Derived { ruloids: out.into_iter().collect(), junk_removed }
            }
        }
    }

    /// Adds the ruloids `rule` contributes to the context `d = f(args)`;
    /// returns how many candidate combinations were junk.
    fn combine(&self, rule: &Rule, d: &Term, args: &[Term], subs: &[Arc<Derived>], out: &mut BTreeSet<Ruloid>) -> usize {
        let index_of = |v: &Var| rule.args.iter().position(|x| x == v).expect("premise subject is a source variable");
        let mut slots = Vec::new();
        for p in &rule.premises {
            let i = index_of(p.subject());
            slots.push(match p {
                Premise::Positive { action, target, .. } => Slot::Positive {
                    target: target.clone(),
                    options: subs[i].ruloids.iter().filter(|r| &r.action == action).collect(),
                },
                Premise::Negative { action, .. } => Slot::Negative { options: self.denial_literals(&args[i], action) },
            });
        }
        if slots.iter().any(|s| s.len() == 0) {
            return 0;
        }
        let mut base = Substitution::new();
        for (x, t) in rule.args.iter().zip(args) {
            base.insert(x.clone(), t.clone());
        }
        let mut search = Combination { engine: self, rule, d, base, slots: &slots, chosen: Vec::new(), junk: 0, out };
        search.run(0, &BTreeSet::new());
        search.junk
    }

    fn denial_literals(&self, d: &Term, b: &Action) -> Arc<Vec<Alternative>> {
        let (key, back) = canonical(d);
        let k = (key, b.clone());
        let hit = self.denials.lock().unwrap().get(&k).cloned();
        let alts = match hit {
            Some(hit) => hit,
            None => {
                let computed = Arc::new(self.denial_canonical(&k.0, b));
                self.denials.lock().unwrap().entry(k).or_insert(computed).clone()
            }
        };
        if back.iter().all(|(a, b)| a == b) {
            return alts;
        }
        Arc::new(
            alts.iter()
                .map(|alt| alt.iter().map(|l| Literal { var: back.apply(&l.var), ..l.clone() }).collect())
                .collect(),
        )
    }

    /// Picks one literal from each b-ruloid and negates it, keeping only
    /// satisfiable, subset-minimal choices.
    fn denial_canonical(&self, d: &Term, b: &Action) -> Vec<Alternative> {
        let derived = self.derive(d);
        let mut partial: Vec<Alternative> = vec![Alternative::new()];
        for r in derived.ruloids.iter().filter(|r| &r.action == b) {
            let lits = literals_of(&r.premises);
            let mut next = Vec::new();
            for alt in &partial {
                if lits.iter().any(|l| alt.contains(&l.negated())) {
                    next.push(alt.clone());
                    continue;
                }
                for l in &lits {
                    let mut grown = alt.clone();
                    grown.insert(l.negated());
                    if literals_satisfiable(&self.universe, &grown) {
                        next.push(grown);
                    }
                }
            }
            partial = minimize(next);
            if partial.is_empty() {
                break;
            }
        }
        partial
    }

    /// Renames internal target names apart from `taken`, in order of first
    /// occurrence in the target and then in the premises.
    fn freshen(&self, r: &Ruloid, taken: &BTreeSet<Var>) -> Ruloid {
        let mut taken = taken.clone();
        taken.extend(self.reserved.iter().cloned());
        let mut renaming = Renaming::new();
        for (y, subject) in target_order(r) {
            let hint = if y.is_throwaway() { "_".to_string() } else { format!("{subject}'") };
            let z = fresh_with(|v| taken.contains(v), &hint);
            taken.insert(z.clone());
            renaming.bind(&y, &z);
        }
        r.rename_targets(&renaming)
    }
}

enum Slot<'r> {
    Positive { target: Var, options: Vec<&'r Ruloid> },
    Negative { options: Arc<Vec<Alternative>> },
}

impl Slot<'_> {
    fn len(&self) -> usize {
        match self {
            Slot::Positive { options, .. } => options.len(),
            Slot::Negative { options } => options.len(),
        }
    }
}

enum Choice<'r> {
    Ruloid(&'r Ruloid),
    Denial(&'r Alternative),
}

struct Combination<'s, 'r> {
    engine: &'s RuloidEngine<'s>,
    rule: &'s Rule,
    d: &'s Term,
    base: Substitution,
    slots: &'r [Slot<'r>],
    chosen: Vec<Choice<'r>>,
    junk: usize,
    out: &'s mut BTreeSet<Ruloid>,
}

impl<'r> Combination<'_, 'r> {
    fn run(&mut self, k: usize, acc: &BTreeSet<Literal>) {
        if k == self.slots.len() {
            self.emit();
            return;
        }
        let slots = self.slots;
        let remaining: usize = slots[k + 1..].iter().map(Slot::len).product();
        let choices: Vec<(Choice<'r>, BTreeSet<Literal>)> = match &slots[k] {
            Slot::Positive { options, .. } => options.iter().map(|r| (Choice::Ruloid(r), literals_of(&r.premises))).collect(),
            Slot::Negative { options } => options.iter().map(|alt| (Choice::Denial(alt), alt.clone())).collect(),
        };
        for (choice, lits) in choices {
            let mut grown = acc.clone();
            grown.extend(lits);
            if !literals_satisfiable(&self.engine.universe, &grown) {
                self.junk += remaining;
                continue;
            }
            self.chosen.push(choice);
            self.run(k + 1, &grown);
            self.chosen.pop();
        }
    }

    fn emit(&mut self) {
        let mut premises = BTreeSet::new();
        let mut subst = self.base.clone();
        let mut counter = 0;
        let mut denied = Vec::new();
        for (slot, choice) in self.slots.iter().zip(&self.chosen) {
            match (slot, choice) {
                (Slot::Positive { target, .. }, Choice::Ruloid(r)) => {
                    let mut renaming = Renaming::new();
                    for y in r.targetvars() {
                        counter += 1;
                        let prefix = if y.is_throwaway() { "_#" } else { "#" };
                        renaming.bind(&y, &Var::new(format!("{prefix}{counter}")));
                    }
                    premises.extend(r.premises.iter().map(|p| p.rename(&renaming)));
                    subst.insert(target.clone(), r.target.rename(&renaming));
                }
                (Slot::Negative { .. }, Choice::Denial(alt)) => denied.extend(alt.iter().cloned()),
                _ => unreachable!("choices follow their slots"),
            }
        }
        for l in denied {
            if l.positive {
                counter += 1;
                premises.insert(Premise::positive(l.var, l.action, Var::new(format!("_#{counter}"))));
            } else {
                premises.insert(Premise::negative(l.var, l.action));
            }
        }
        let premises = prune_throwaways(premises);
        let raw = Ruloid {
            premises,
            source: self.d.clone(),
            action: self.rule.action.clone(),
            target: self.rule.target.apply(&subst),
        };
        self.out.insert(canonical_targets(&raw));
    }
}

/// Drops throwaway positive premises already implied by another positive
/// premise on the same subject and action.
fn prune_throwaways(premises: BTreeSet<Premise>) -> BTreeSet<Premise> {
    let mut seen: BTreeSet<(Var, Action)> = premises
        .iter()
        .filter_map(|p| match p {
            Premise::Positive { subject, action, target } if !target.is_throwaway() => Some((subject.clone(), action.clone())),
            _ => None,
        })
        .collect();
    premises
        .into_iter()
        .filter(|p| match p {
            Premise::Positive { subject, action, target } if target.is_throwaway() => {
                seen.insert((subject.clone(), action.clone()))
            }
            _ => true,
        })
        .collect()
}

/// Target variables with their premise subjects: first those in the target
/// term left to right, then the rest in premise order.
fn target_order(r: &Ruloid) -> Vec<(Var, Var)> {
    let subject_of: BTreeMap<&Var, &Var> = r.premises.iter().filter_map(|p| p.target().map(|t| (t, p.subject()))).collect();
    let mut order = Vec::new();
    r.target.vars_in_order(&mut order);
    for p in &r.premises {
        if let Some(t) = p.target() {
            order.push(t.clone());
        }
    }
    let mut seen = BTreeSet::new();
    order
        .into_iter()
        .filter(|v| subject_of.contains_key(v) && seen.insert(v.clone()))
        .map(|v| {
            let s = subject_of[&v].clone();
            (v, s)
        })
        .collect()
}

fn canonical_targets(r: &Ruloid) -> Ruloid {
    let mut renaming = Renaming::new();
    for (k, (y, _)) in target_order(r).into_iter().enumerate() {
        let prefix = if y.is_throwaway() { THROWAWAY } else { TARGET };
        renaming.bind(&y, &Var::new(format!("{prefix}{}", k + 1)));
    }
    r.rename_targets(&renaming)
}

/// Renames the variables of `t` to `%1, %2, ...` by first occurrence;
/// returns the renamed term and the way back.
fn canonical(t: &Term) -> (Term, Renaming) {
    let mut order = Vec::new();
    t.vars_in_order(&mut order);
    let mut to = Renaming::new();
    for v in order {
        if to.get(&v).is_none() {
            let c = Var::new(format!("{CANON_SOURCE}{}", to.len() + 1));
            to.bind(&v, &c);
        }
    }
    (t.rename(&to), to.inverse())
}

fn minimize(alts: Vec<Alternative>) -> Vec<Alternative> {
    let mut alts: Vec<Alternative> = alts.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    alts.sort_by_key(|a| a.len());
    let mut kept: Vec<Alternative> = Vec::new();
    for a in alts {
        if !kept.iter().any(|k| k.is_subset(&a)) {
            kept.push(a);
        }
    }
    kept.sort();
    kept
}

/// The variants of `rho2` whose target variables are mapped injectively
/// either onto a target of `rho` reached by the same premise subject and
/// action, or onto a variable avoiding `forbidden`, `vars(rho)` and
/// `vars(rho2)`. Sorted by the number of fresh variables used.
pub fn valid_renamings(rho2: &Ruloid, rho: &Ruloid, forbidden: &BTreeSet<Var>) -> Vec<Ruloid> {
    let mut taken: BTreeSet<Var> = forbidden.clone();
    taken.extend(rho.vars());
    taken.extend(rho2.vars());
    let targets = target_order(rho2);
    let mut options: Vec<Vec<Option<Var>>> = Vec::new();
    let mut fresh = Vec::new();
    for (t, subject) in &targets {
        let hint = if t.is_throwaway() { "_".to_string() } else { format!("{subject}'") };
        let f = fresh_with(|v| taken.contains(v), &hint);
        taken.insert(f.clone());
        fresh.push(f);
        let mut opts: Vec<Option<Var>> = Vec::new();
        if !t.is_throwaway() {
            let action = rho2.premise_for_target(t).expect("target has a premise").action();
            for p in &rho.premises {
                if let Premise::Positive { subject: s, action: a, target: y } = p {
                    if s == subject && a == action && !y.is_throwaway() {
                        opts.push(Some(y.clone()));
                    }
                }
            }
        }
        opts.push(None);
        options.push(opts);
    }
    let mut out: Vec<(usize, Ruloid)> = Vec::new();
    let mut pick: Vec<usize> = vec![0; targets.len()];
    loop {
        let chosen: Vec<&Var> = pick
            .iter()
            .enumerate()
            .map(|(i, &k)| options[i][k].as_ref().unwrap_or(&fresh[i]))
            .collect();
        if chosen.iter().collect::<BTreeSet<_>>().len() == chosen.len() {
            let renaming: Renaming = targets.iter().map(|(t, _)| t.clone()).zip(chosen.iter().map(|v| (*v).clone())).collect();
            let fresh_count = pick.iter().enumerate().filter(|(i, &k)| options[*i][k].is_none()).count();
            out.push((fresh_count, rho2.rename_targets(&renaming)));
        }
        let mut i = 0;
        loop {
            if i == pick.len() {
                out.sort();
                out.dedup();
                return out.into_iter().map(|(_, r)| r).collect();
            }
            pick[i] += 1;
            if pick[i] < options[i].len() {
                break;
            }
            pick[i] = 0;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{acts, bccsp_seq, clock, lookahead, junk_context, rule};
    use crate::logic::{entails, hyps_of_premises};
    use crate::model::bccsp_prelude;

    fn v(x: &str) -> Term {
        Term::var(x)
    }

    fn seq(p: Term, q: Term) -> Term {
        Term::app("seq", vec![p, q])
    }

    fn lines(set: &RuloidSet) -> Vec<String> {
        set.ruloids.iter().map(|r| r.to_string()).collect()
    }

    #[test]
    fn variable_context() {
        let lang = bccsp_seq(&["a", "b"]);
        let engine = RuloidEngine::new(&lang);
        let set = engine.ruloids(&v("x"), &BTreeSet::new());
        assert_eq!(lines(&set), ["{x -a-> x'} |- x -a-> x'", "{x -b-> x'} |- x -b-> x'"]);
        let set = engine.ruloids(&v("x"), &[Var::new("x'")].into());
        assert_eq!(lines(&set)[0], "{x -a-> x'1} |- x -a-> x'1");
    }

    #[test]
    fn sequencing_ruloids() {
        let lang = bccsp_seq(&["a", "b"]);
        let engine = RuloidEngine::new(&lang);
        let l = seq(seq(v("x"), v("y")), v("z"));
        let set = engine.ruloids(&l, &BTreeSet::new());
        let a: Vec<String> = set.with_action(&Action::new("a")).map(|r| r.to_string()).collect();
        assert_eq!(
            a,
            [
                "{x -/a->, x -/b->, y -/a->, y -/b->, z -a-> z'} |- seq(seq(x,y),z) -a-> z'",
                "{x -/a->, x -/b->, y -a-> y'} |- seq(seq(x,y),z) -a-> seq(y',z)",
                "{x -a-> x'} |- seq(seq(x,y),z) -a-> seq(seq(x',y),z)",
            ]
            .map(|s| s.replace("-/a->", "-a-/>").replace("-/b->", "-b-/>"))
        );
        assert_eq!(set.len(), 6);
        // per action, three of the four ways to deny both actions of seq(x,y) contradict
        assert_eq!(set.junk_removed, 6);

        let r = seq(v("x"), seq(v("y"), v("z")));
        let set = engine.ruloids(&r, &BTreeSet::new());
        assert_eq!(set.with_action(&Action::new("b")).count(), 3);
    }

    #[test]
    fn contradictory_context_has_only_junk() {
        let lang = junk_context();
        let engine = RuloidEngine::new(&lang);
        let d = Term::app("f", vec![v("x"), Term::app("g", vec![v("x")])]);
        let set = engine.ruloids(&d, &BTreeSet::new());
        assert!(set.is_empty());
        assert_eq!(set.junk_removed, 1);
        let e = Term::app("f", vec![v("x"), Term::app("g", vec![v("y")])]);
        assert_eq!(lines(&engine.ruloids(&e, &BTreeSet::new())), ["{x -a-> x', y -a-/>} |- f(x,g(y)) -a-> 0"]);
    }

    #[test]
    fn clock_ruloids() {
        let lang = clock(&["a", "b"]);
        let engine = RuloidEngine::new(&lang);
        let c = Term::app("int", vec![v("x"), Term::constant("Omega")]);
        let set = engine.ruloids(&c, &BTreeSet::new());
        assert_eq!(
            lines(&set),
            [
                "{} |- int(x,Omega) -a-> int(x,Omega)",
                "{x -a-> x'} |- int(x,Omega) -a-> int(x',Omega)",
                "{} |- int(x,Omega) -b-> int(x,Omega)",
                "{x -b-> x'} |- int(x,Omega) -b-> int(x',Omega)",
            ]
        );
        assert!(engine.is_persistent(&Term::constant("Omega")));
        assert!(!engine.is_persistent(&c));
        assert!(!engine.unique_action_ruloids(&Term::app("int", vec![v("x"), v("y")])));
    }

    #[test]
    fn denial_examples() {
        let lang = bccsp_seq(&["a", "b"]);
        let engine = RuloidEngine::new(&lang);
        let b = Action::new("b");
        let d = engine.denial(&v("x"), &b);
        assert_eq!(d.alternatives, vec![BTreeSet::from([Premise::negative("x", "b")])]);

        let clock = clock(&["a", "b"]);
        let engine = RuloidEngine::new(&clock);
        assert!(engine.denial(&Term::constant("Omega"), &b).alternatives.is_empty());
        let mut lang = clock.clone();
        lang.sig.declare(crate::term::Op::new("k"), 1);
        lang.add_rule(rule("k", &["x"], &[Premise::negative("x", "a")], "a", Term::constant("Omega")));
        let engine = RuloidEngine::new(&lang);
        assert!(engine.ruloids(&Term::app("k", vec![Term::constant("Omega")]), &BTreeSet::new()).is_empty());
    }

    #[test]
    fn denial_of_sequencing_blocks_every_transition() {
        let lang = bccsp_seq(&["a", "b"]);
        let engine = RuloidEngine::new(&lang);
        let d = seq(v("x"), v("y"));
        let b = Action::new("b");
        let denial = engine.denial(&d, &b);
        assert!(!denial.alternatives.is_empty());
        let sem = crate::semantics::Semantics::new(&lang);
        let pool = crate::enumerate::closed_terms(&lang.sig, 2, 60);
        for p in &pool {
            for q in &pool {
                let s: Substitution = [(Var::new("x"), p.clone()), (Var::new("y"), q.clone())].into_iter().collect();
                let can_b = sem.init(&d.apply(&s)).unwrap().contains(&b);
                let some_alt = denial.alternatives.iter().any(|alt| {
                    alt.iter().all(|prem| {
                        let init = sem.init(&Term::Var(prem.subject().clone()).apply(&s)).unwrap();
                        init.contains(prem.action()) == prem.is_positive()
                    })
                });
                assert_eq!(can_b, !some_alt, "x={p}, y={q}");
            }
        }
    }

    #[test]
    fn ruloids_of_flat_context_are_the_rules() {
        for lang in [bccsp_seq(&["a", "b"]), lookahead(), clock(&["a", "b", "c"])] {
            let engine = RuloidEngine::new(&lang);
            for (op, arity) in lang.sig.iter() {
                let args: Vec<Term> = (1..=arity).map(|i| v(&format!("u{i}"))).collect();
                let d = Term::App(op.clone(), args.clone());
                let set = engine.ruloids(&d, &BTreeSet::new());
                let mut expected = Vec::new();
                for r in lang.rules_for(op) {
                    let renaming: Renaming =
                        r.args.iter().cloned().zip(args.iter().map(|a| a.as_var().unwrap().clone())).collect();
                    let candidate = r.to_ruloid().rename(&renaming);
                    if !crate::logic::is_junk(engine.universe(), &candidate) {
                        expected.push(candidate);
                    }
                }
                assert_eq!(set.len(), expected.len(), "{d}");
                for e in &expected {
                    assert!(
                        set.ruloids.iter().any(|r| same_up_to_targets(r, e)),
                        "{e} missing from {:?}",
                        set.ruloids
                    );
                }
            }
        }
    }

    fn same_up_to_targets(r: &Ruloid, e: &Ruloid) -> bool {
        let a = r.targetvars();
        let b = e.targetvars();
        if a.len() != b.len() || r.action != e.action || r.source != e.source {
            return false;
        }
        let a: Vec<Var> = a.into_iter().collect();
        let b: Vec<Var> = b.into_iter().collect();
        itertools::Itertools::permutations(b.iter(), b.len()).any(|perm| {
            let ren: Renaming = a.iter().cloned().zip(perm.into_iter().cloned()).collect();
            r.rename_targets(&ren) == *e
        })
    }

    #[test]
    fn valid_renaming_examples() {
        let g = Ruloid {
            premises: [Premise::positive("x", "a", "z")].into(),
            source: Term::app("g", vec![v("x")]),
            action: Action::new("a"),
            target: v("z"),
        };
        let f = Ruloid {
            premises: [Premise::positive("x", "a", "y")].into(),
            source: Term::app("f", vec![v("x")]),
            action: Action::new("a"),
            target: v("y"),
        };
        let out = valid_renamings(&g, &f, &BTreeSet::new());
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].to_string(), "{x -a-> y} |- g(x) -a-> y");
        assert!(out[1].target != v("y") && out[1].target != v("z"));

        let axiom = Ruloid { premises: BTreeSet::new(), target: Term::constant("0"), ..g.clone() };
        assert_eq!(valid_renamings(&axiom, &f, &BTreeSet::new()), vec![axiom]);

        let h = Ruloid {
            premises: [Premise::positive("w", "b", "y")].into(),
            source: Term::app("h", vec![v("w")]),
            action: Action::new("a"),
            target: v("y"),
        };
        let out = valid_renamings(&h, &f, &BTreeSet::new());
        assert_eq!(out.len(), 1);
        assert!(!out[0].targetvars().contains(&Var::new("y")));
    }

    #[test]
    fn valid_renamings_are_injective() {
        let two = Ruloid {
            premises: [Premise::positive("x", "a", "p"), Premise::positive("x", "a", "q")].into(),
            source: Term::app("g", vec![v("x")]),
            action: Action::new("a"),
            target: Term::app("g", vec![v("p"), v("q")]),
        };
        let one = Ruloid {
            premises: [Premise::positive("x", "a", "y")].into(),
            source: Term::app("f", vec![v("x")]),
            action: Action::new("a"),
            target: v("y"),
        };
        let out = valid_renamings(&two, &one, &BTreeSet::new());
        assert_eq!(out.len(), 3);
        for r in &out {
            assert_eq!(r.targetvars().len(), 2);
            assert!(r.shape_violations().is_empty());
        }
    }

    #[test]
    fn soundness_and_support_on_closed_instances() {
        let langs = [bccsp_seq(&["a", "b"]), lookahead(), junk_context()];
        for lang in &langs {
            let engine = RuloidEngine::new(lang);
            let sem = crate::semantics::Semantics::new(lang);
            let pool = crate::enumerate::closed_terms(&lang.sig, 2, 60);
            let contexts = crate::enumerate::terms_over(&lang.sig, &[Var::new("x"), Var::new("y")], 4);
            for d in &contexts {
                let set = engine.ruloids(d, &BTreeSet::new());
                let vars: Vec<Var> = d.vars().into_iter().collect();
                for s in crate::fixtures::substitutions(&vars, &pool, 40) {
                    let closed = d.apply(&s);
                    let steps = sem.step(&closed).unwrap();
                    let mut supported = BTreeSet::new();
                    for r in &set.ruloids {
                        for full in crate::fixtures::fire_ruloid(&sem, r, &s) {
                            let t = r.target.apply(&full);
                            assert!(steps.contains(&(r.action.clone(), t.clone())), "unsound {r} at {closed}");
                            supported.insert((r.action.clone(), t));
                        }
                    }
                    assert_eq!(&supported, steps.as_ref(), "support gap for {closed}");
                }
            }
        }
    }

    #[test]
    fn memo_is_renaming_invariant() {
        let lang = bccsp_seq(&["a", "b"]);
        let engine = RuloidEngine::new(&lang);
        let one = engine.ruloids(&seq(v("p"), v("q")), &BTreeSet::new());
        let two = engine.ruloids(&seq(v("x"), v("y")), &BTreeSet::new());
        let renaming: Renaming = [(Var::new("p"), Var::new("x")), (Var::new("q"), Var::new("y"))].into_iter().collect();
        assert_eq!(one.len(), two.len());
        for (a, b) in one.ruloids.iter().zip(&two.ruloids) {
            let h1 = hyps_of_premises(&a.rename(&renaming).premises);
            let h2 = hyps_of_premises(&b.premises);
            assert!(entails(engine.universe(), &h1, &h2).holds() && entails(engine.universe(), &h2, &h1).holds());
        }
        let bccsp = bccsp_prelude(&acts(&["a"]), false);
        assert!(RuloidEngine::new(&bccsp).is_persistent(&Term::constant("0")));
    }
}
