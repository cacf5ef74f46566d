//! Batch commands behind the `gsos` binary. Each returns the exit status
//! together with everything that should be written to stdout and stderr.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gsos_core::logic::{entails, junk_reason, Entailment};
use gsos_core::parser::{load_spec, parse_formula, CheckKind, CheckRequest, Mode, SpecError, SpecFile};
use gsos_core::rmb::{certify_extension_stability, check_relation, search, Budgets, OpenRelation, Stability, Verdict, CAVEAT};
use gsos_core::ruloids::{RuloidEngine, RuloidSet};
use gsos_core::semantics::{BisimVerdict, LtsError, Semantics, DEFAULT_MAX_STATES};
use gsos_core::Term;
use serde::Serialize;
use serde_json::{json, Value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REFUTED: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_ERROR: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum CliMode {
    Rm,
    Closed,
    Ruloids,
    Junk,
    Lts,
    Entail,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Structured,
}

#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    pub mode: Option<CliMode>,
    pub budget_pairs: Option<usize>,
    pub budget_states: Option<usize>,
    pub format: Format,
    pub stability: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Report {
    pub exit: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Report {
    fn error(message: impl std::fmt::Display) -> Report {
        Report { exit: EXIT_ERROR, stdout: String::new(), stderr: format!("error: {message}\n") }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct JunkRule {
    pub index: usize,
    pub rule: String,
    pub reason: String,
}

/// What running one check produced.
#[derive(Clone, Debug)]
pub enum CheckResult {
    Rm { verdict: Verdict, note: Option<String> },
    Closed(BisimVerdict),
    Entail(Entailment),
    Ruloids(Vec<RuloidSet>),
    Junk(Vec<JunkRule>),
    Lts(Vec<String>),
    Error(String),
}

impl CheckResult {
    pub fn name(&self) -> &'static str {
        match self {
            CheckResult::Rm { verdict, .. } => verdict.name(),
            CheckResult::Closed(BisimVerdict::Yes) | CheckResult::Entail(Entailment::Valid) => "yes",
            CheckResult::Closed(BisimVerdict::No) | CheckResult::Entail(Entailment::Refuted(_)) => "no",
            CheckResult::Closed(BisimVerdict::Inconclusive) => "inconclusive",
            CheckResult::Ruloids(_) | CheckResult::Junk(_) | CheckResult::Lts(_) => "done",
            CheckResult::Error(_) => "error",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.name() {
            "refuted" | "no" => EXIT_REFUTED,
            "inconclusive" => EXIT_INCONCLUSIVE,
            "error" => EXIT_ERROR,
            _ => EXIT_OK,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub label: String,
    pub mode: CliMode,
    pub result: CheckResult,
}

/// Refutations win over errors, errors over inconclusive results.
pub fn combine_exit(codes: impl IntoIterator<Item = i32>) -> i32 {
    codes.into_iter().max_by_key(|c| match *c {
        EXIT_REFUTED => 3,
        EXIT_ERROR => 2,
        EXIT_INCONCLUSIVE => 1,
        _ => 0,
    })
    .unwrap_or(EXIT_OK)
}

fn label(spec: &SpecFile, check: &CheckRequest) -> String {
    match &check.kind {
        CheckKind::Equation { left, right, .. } => {
            let name = |t: &Term| spec.context_name(t).map_or_else(|| t.to_string(), String::from);
            format!("{} = {}", name(left), name(right))
        }
        CheckKind::Entailment { .. } => check.to_string(),
    }
}

fn effective_mode(check: &CheckRequest, cfg: &RunConfig) -> CliMode {
    if let Some(m) = cfg.mode {
        return m;
    }
    match check.effective_mode() {
        Mode::Rm => CliMode::Rm,
        Mode::Closed => CliMode::Closed,
        Mode::Ruloids => CliMode::Ruloids,
        Mode::Junk => CliMode::Junk,
        Mode::Entail => CliMode::Entail,
    }
}

pub fn junk_rules(engine: &RuloidEngine) -> Vec<JunkRule> {
    engine
        .language()
        .rules
        .iter()
        .enumerate()
        .filter_map(|(index, r)| {
            junk_reason(engine.universe(), &r.premises).map(|reason| JunkRule { index, rule: r.to_string(), reason })
        })
        .collect()
}

/// Runs the equation `left = right`: a supplied relation is checked as
/// given, and the search takes over if it is not a rule-matching
/// bisimulation.
fn run_rm(engine: &RuloidEngine, left: &Term, right: &Term, hint: Option<&Vec<(Term, Term)>>, budgets: Budgets) -> CheckResult {
    let mut note = None;
    if let Some(pairs) = hint {
        let mut rel = OpenRelation::closed();
        rel.insert(left.clone(), right.clone());
        for (p, q) in pairs {
            rel.insert(p.clone(), q.clone());
        }
        let verdict = check_relation(engine, &rel);
        if verdict.is_proven() {
            return CheckResult::Rm { verdict, note: None };
        }
        note = Some("the supplied relation is not a rule-matching bisimulation; searched instead".to_string());
    }
    CheckResult::Rm { verdict: search(engine, left, right, budgets), note }
}

fn lts_dump(sem: &Semantics, t: &Term, max_states: usize) -> Result<String, String> {
    match sem.build_lts(t, max_states) {
        Ok(lts) => Ok(lts.export()),
        Err(LtsError::BudgetExceeded(lts)) => Ok(format!("{}# state budget of {max_states} exceeded; LTS truncated\n", lts.export())),
        Err(LtsError::NotClosed(t)) => Err(format!("{t} is not a closed term")),
    }
}

/// Runs a single check against an engine built for `spec`.
pub fn run_check(spec: &SpecFile, engine: &RuloidEngine, check: &CheckRequest, cfg: &RunConfig) -> CheckOutcome {
    let mode = effective_mode(check, cfg);
    let states = cfg.budget_states.or(check.budget.states).unwrap_or(DEFAULT_MAX_STATES);
    let mut budgets = Budgets::default();
    if let Some(n) = cfg.budget_pairs.or(check.budget.pairs) {
        budgets.max_patterns = n;
    }
    if let Some(n) = check.budget.size {
        budgets.max_term_size = n;
    }
    let sem = Semantics::new(&spec.language);
    let result = match (&check.kind, mode) {
        (_, CliMode::Junk) => CheckResult::Junk(junk_rules(engine)),
        (CheckKind::Entailment { premise, conclusion }, _) => CheckResult::Entail(entails(engine.universe(), premise, conclusion)),
        (CheckKind::Equation { .. }, CliMode::Entail) => CheckResult::Error("mode entail applies to formula checks only".into()),
        (CheckKind::Equation { left, right, relation }, CliMode::Rm) => run_rm(engine, left, right, relation.as_ref(), budgets),
        (CheckKind::Equation { left, right, .. }, CliMode::Closed) => match sem.bisimilar(left, right, states) {
            Ok(v) => CheckResult::Closed(v),
            Err(e) => CheckResult::Error(e.to_string()),
        },
        (CheckKind::Equation { left, right, .. }, CliMode::Ruloids) => {
            let exclude = left.vars().into_iter().chain(right.vars()).collect();
            CheckResult::Ruloids(vec![engine.ruloids(left, &exclude), engine.ruloids(right, &exclude)])
        }
        (CheckKind::Equation { left, right, .. }, CliMode::Lts) => {
            match [left, right].into_iter().map(|t| lts_dump(&sem, t, states)).collect::<Result<Vec<_>, _>>() {
                Ok(dumps) => CheckResult::Lts(dumps),
                Err(e) => CheckResult::Error(e),
            }
        }
    };
    CheckOutcome { label: label(spec, check), mode, result }
}

/// Runs every check of `spec` concurrently; results keep file order.
pub fn run_spec(spec: &SpecFile, cfg: &RunConfig) -> Vec<CheckOutcome> {
    let engine = RuloidEngine::new(&spec.language);
    std::thread::scope(|s| {
        let handles: Vec<_> = spec.checks.iter().map(|c| s.spawn(|| run_check(spec, &engine, c, cfg))).collect();
        handles.into_iter().map(|h| h.join().expect("check thread panicked")).collect()
    })
}

fn mode_name(m: CliMode) -> &'static str {
    match m {
        CliMode::Rm => "rm",
        CliMode::Closed => "closed",
        CliMode::Ruloids => "ruloids",
        CliMode::Junk => "junk",
        CliMode::Lts => "lts",
        CliMode::Entail => "entail",
    }
}

fn pair_text((p, q): &(Term, Term)) -> String {
    format!("({p}, {q})")
}

fn stability_text(s: &Stability) -> String {
    if s.stable {
        "stable under disjoint extension".to_string()
    } else {
        let missing: Vec<String> = s.missing.iter().map(gsos_core::model::fmt_action_set).collect();
        format!("not certified stable; unrealizable init sets: {}", missing.join(", "))
    }
}

fn write_text(out: &mut String, file: &str, o: &CheckOutcome, stability: Option<&Stability>) {
    let _ = writeln!(out, "{file}: check {} [{}]", o.label, mode_name(o.mode));
    let _ = writeln!(out, "  verdict: {}", o.result.name());
    match &o.result {
        CheckResult::Rm { verdict, note } => {
            if let Some(note) = note {
                let _ = writeln!(out, "  note: {note}");
            }
            match verdict {
                Verdict::Proven { relation, evidence } => {
                    let _ = writeln!(out, "  relation: {relation}");
                    for report in evidence {
                        let _ = writeln!(out, "  pair ({}, {}):", report.left, report.right);
                        for m in &report.ruloids {
                            let chosen: Vec<String> = m.chosen().map(|r| r.to_string()).collect();
                            let _ = writeln!(out, "    {}", m.ruloid);
                            let _ = writeln!(out, "      |= {} => {}", m.hypothesis, m.conclusion);
                            for c in chosen {
                                let _ = writeln!(out, "      by {c}");
                            }
                        }
                    }
                }
                Verdict::Refuted(r) => {
                    let chain: Vec<String> = r.chain.iter().map(pair_text).collect();
                    let _ = writeln!(out, "  chain: {}", chain.join(" -> "));
                    let _ = writeln!(out, "  pair: {}", pair_text(&r.pair));
                    let _ = writeln!(out, "  unmatched ruloid: {}", r.ruloid);
                    let _ = writeln!(out, "  falsifying assignment: {}", r.counterexample);
                    if !r.blocked.is_empty() {
                        let blocked: Vec<String> = r.blocked.iter().map(pair_text).collect();
                        let _ = writeln!(out, "  unrelatable targets: {}", blocked.join(", "));
                    }
                    let _ = writeln!(out, "  caveat: {CAVEAT}");
                }
                Verdict::Inconclusive { reason, frontier } => {
                    let _ = writeln!(out, "  reason: {reason}");
                    if !frontier.is_empty() {
                        let frontier: Vec<String> = frontier.iter().map(pair_text).collect();
                        let _ = writeln!(out, "  frontier: {}", frontier.join(", "));
                    }
                }
            }
        }
        CheckResult::Closed(_) => {}
        CheckResult::Entail(e) => {
            if let Entailment::Refuted(c) = e {
                let _ = writeln!(out, "  falsifying assignment: {c}");
            }
        }
        CheckResult::Ruloids(sets) => {
            for set in sets {
                write_ruloid_set(out, "  ", set);
            }
        }
        CheckResult::Junk(rules) => write_junk(out, "  ", rules),
        CheckResult::Lts(dumps) => {
            for d in dumps {
                out.push_str(d);
            }
        }
        CheckResult::Error(e) => {
            let _ = writeln!(out, "  error: {e}");
        }
    }
    if let Some(s) = stability {
        let _ = writeln!(out, "  stability: {}", stability_text(s));
    }
}

fn write_ruloid_set(out: &mut String, indent: &str, set: &RuloidSet) {
    let _ = writeln!(out, "{indent}ruloids for {}:", set.context);
    for r in &set.ruloids {
        let _ = writeln!(out, "{indent}  {r}");
    }
    let _ = writeln!(out, "{indent}{} ruloid(s)", set.len());
    let _ = writeln!(out, "{indent}{} junk ruloid(s) removed", set.junk_removed);
}

fn write_junk(out: &mut String, indent: &str, rules: &[JunkRule]) {
    if rules.is_empty() {
        let _ = writeln!(out, "{indent}no junk rules");
    }
    for j in rules {
        let _ = writeln!(out, "{indent}rule #{}: {}", j.index + 1, j.rule);
        let _ = writeln!(out, "{indent}  junk: {}", j.reason);
    }
}

fn ruloid_set_json(set: &RuloidSet) -> Value {
    json!({
        "context": set.context,
        "ruloids": set.ruloids,
        "junk_removed": set.junk_removed,
    })
}

/// The structured document for one check.
pub fn outcome_json(file: &str, o: &CheckOutcome, stability: Option<&Stability>) -> Value {
    let mut doc = json!({
        "file": file,
        "check": o.label,
        "mode": mode_name(o.mode),
        "verdict": o.result.name(),
        "relation": Value::Null,
        "evidence": Value::Null,
        "stability": stability,
        "caveat": Value::Null,
    });
    let set = |doc: &mut Value, k: &str, v: Value| {
        doc[k] = v;
    };
    match &o.result {
        CheckResult::Rm { verdict, note } => {
            if let Some(note) = note {
                set(&mut doc, "note", json!(note));
            }
            match verdict {
                Verdict::Proven { relation, evidence } => {
                    set(&mut doc, "relation", json!(relation));
                    set(&mut doc, "evidence", json!(evidence));
                }
                Verdict::Refuted(r) => {
                    set(&mut doc, "evidence", json!(r));
                    set(&mut doc, "caveat", json!(CAVEAT));
                }
                Verdict::Inconclusive { reason, frontier } => {
                    set(&mut doc, "evidence", json!({ "reason": reason, "frontier": frontier }));
                }
            }
        }
        CheckResult::Closed(_) => {}
        CheckResult::Entail(Entailment::Valid) => set(&mut doc, "evidence", json!({ "counterexample": Value::Null })),
        CheckResult::Entail(Entailment::Refuted(c)) => set(&mut doc, "evidence", json!({ "counterexample": c })),
        CheckResult::Ruloids(sets) => set(&mut doc, "evidence", Value::Array(sets.iter().map(ruloid_set_json).collect())),
        CheckResult::Junk(rules) => set(&mut doc, "evidence", json!(rules)),
        CheckResult::Lts(dumps) => set(&mut doc, "evidence", json!(dumps)),
        CheckResult::Error(e) => set(&mut doc, "error", json!(e)),
    }
    doc
}

fn load(path: &Path) -> Result<SpecFile, Report> {
    load_spec(path).map_err(|e| {
        let mut r = Report::error(format!("{}: {}", path.display(), describe(&e)));
        if let SpecError::Validation(diags) = &e {
            for d in diags {
                let _ = writeln!(r.stderr, "  {d}");
            }
        }
        r
    })
}

fn describe(e: &SpecError) -> String {
    match e {
        SpecError::Validation(d) => format!("invalid language ({} problem(s))", d.len()),
        other => other.to_string(),
    }
}

fn warnings(path: &Path, spec: &SpecFile, stderr: &mut String) {
    for w in &spec.warnings {
        let _ = writeln!(stderr, "warning: {}: {w}", path.display());
    }
}

pub fn cmd_check(paths: &[PathBuf], cfg: &RunConfig) -> Report {
    if let Some(0) = cfg.budget_pairs.or(cfg.budget_states) {
        return Report::error("budgets must be positive");
    }
    let mut report = Report::default();
    let mut codes = Vec::new();
    for path in paths {
        let spec = match load(path) {
            Ok(spec) => spec,
            Err(r) => {
                report.stderr.push_str(&r.stderr);
                codes.push(r.exit);
                continue;
            }
        };
        warnings(path, &spec, &mut report.stderr);
        let file = path.display().to_string();
        let stability = cfg.stability.then(|| certify_extension_stability(&RuloidEngine::new(&spec.language)));
        for o in run_spec(&spec, cfg) {
            codes.push(o.result.exit_code());
            match cfg.format {
                Format::Text => write_text(&mut report.stdout, &file, &o, stability.as_ref()),
                Format::Structured => {
                    let doc = outcome_json(&file, &o, stability.as_ref());
                    let _ = writeln!(report.stdout, "{doc}");
                }
            }
        }
    }
    report.exit = combine_exit(codes);
    report
}

pub fn cmd_ruloids(path: &Path, context: &str) -> Report {
    let spec = match load(path) {
        Ok(spec) => spec,
        Err(r) => return r,
    };
    let Some(t) = spec.context(context) else {
        return Report::error(format!("unknown context {context} in {}", path.display()));
    };
    let engine = RuloidEngine::new(&spec.language);
    let set = engine.ruloids(t, &t.vars());
    let mut report = Report::default();
    warnings(path, &spec, &mut report.stderr);
    write_ruloid_set(&mut report.stdout, "", &set);
    report
}

pub fn cmd_junk(path: &Path) -> Report {
    let spec = match load(path) {
        Ok(spec) => spec,
        Err(r) => return r,
    };
    let engine = RuloidEngine::new(&spec.language);
    let mut report = Report::default();
    warnings(path, &spec, &mut report.stderr);
    let _ = writeln!(report.stdout, "realizable init sets: {}", engine.universe());
    write_junk(&mut report.stdout, "", &junk_rules(&engine));
    report
}

pub fn cmd_lts(path: &Path, term: &str, max_states: Option<usize>) -> Report {
    let spec = match load(path) {
        Ok(spec) => spec,
        Err(r) => return r,
    };
    let t = match spec.parse_term(term) {
        Ok(t) => t,
        Err(e) => return Report::error(e),
    };
    let sem = Semantics::new(&spec.language);
    match lts_dump(&sem, &t, max_states.unwrap_or(DEFAULT_MAX_STATES)) {
        Ok(dump) => Report { exit: EXIT_OK, stdout: dump, stderr: String::new() },
        Err(e) => Report::error(e),
    }
}

pub fn cmd_entail(path: &Path, premise: &str, conclusion: &str) -> Report {
    let spec = match load(path) {
        Ok(spec) => spec,
        Err(r) => return r,
    };
    let (f, g) = match (parse_formula(premise), parse_formula(conclusion)) {
        (Ok(f), Ok(g)) => (f, g),
        (Err(e), _) | (_, Err(e)) => return Report::error(e),
    };
    let engine = RuloidEngine::new(&spec.language);
    match entails(engine.universe(), &f, &g) {
        Entailment::Valid => Report { exit: EXIT_OK, stdout: format!("yes: {f} => {g}\n"), stderr: String::new() },
        Entailment::Refuted(c) => Report {
            exit: EXIT_REFUTED,
            stdout: format!("no: {f} => {g}\n  falsifying assignment: {c}\n"),
            stderr: String::new(),
        },
    }
}
