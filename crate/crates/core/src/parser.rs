//! The `.gsos` text format: languages, named contexts and check requests.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::path::Path;

use itertools::Itertools;
use thiserror::Error;

use crate::logic::Formula;
use crate::model::{bccsp_prelude, Action, Diagnostic, GsosLanguage, Premise, Rule, Signature};
use crate::term::{Op, Term, Var};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub file: Option<String>,
    pub line: usize,
    pub col: usize,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(file) = &self.file {
            write!(f, "{file}:")?;
        }
        write!(f, "{}:{}: expected {}, found {}", self.line, self.col, self.expected.join(" or "), self.found)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SpecError {
    #[error("parse error at {0}")]
    Parse(ParseError),
    #[error("{line}:{col}: {op} expects {expected} argument(s), found {found}")]
    Arity { op: String, expected: usize, found: usize, line: usize, col: usize },
    #[error("invalid language: {}", .0.iter().join("; "))]
    Validation(Vec<Diagnostic>),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    Rm,
    Closed,
    Ruloids,
    Junk,
    Entail,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Mode> {
        Some(match s {
            "rm" => Mode::Rm,
            "closed" => Mode::Closed,
            "ruloids" => Mode::Ruloids,
            "junk" => Mode::Junk,
            "entail" => Mode::Entail,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Rm => "rm",
            Mode::Closed => "closed",
            Mode::Ruloids => "ruloids",
            Mode::Junk => "junk",
            Mode::Entail => "entail",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CheckBudget {
    pub pairs: Option<usize>,
    pub states: Option<usize>,
    pub size: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CheckKind {
    Equation { left: Term, right: Term, relation: Option<Vec<(Term, Term)>> },
    Entailment { premise: Formula, conclusion: Formula },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckRequest {
    pub kind: CheckKind,
    pub mode: Option<Mode>,
    pub budget: CheckBudget,
}

impl CheckRequest {
    /// The explicit mode, or `entail` for formulae and `rm` for equations.
    pub fn effective_mode(&self) -> Mode {
        self.mode.unwrap_or(match self.kind {
            CheckKind::Entailment { .. } => Mode::Entail,
            CheckKind::Equation { .. } => Mode::Rm,
        })
    }
}

impl fmt::Display for CheckRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            CheckKind::Equation { left, right, .. } => write!(f, "{left} = {right}"),
            CheckKind::Entailment { premise, conclusion } => write!(f, "{premise} => {conclusion}"),
        }
    }
}

/// A parsed and validated `.gsos` file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SpecFile {
    pub language: GsosLanguage,
    pub sync: BTreeMap<(Action, Action), Action>,
    pub contexts: Vec<(String, Term)>,
    pub checks: Vec<CheckRequest>,
    pub warnings: Vec<String>,
}

impl SpecFile {
    pub fn context(&self, name: &str) -> Option<&Term> {
        self.contexts.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// The name of a context equal to `t`, if any.
    pub fn context_name(&self, t: &Term) -> Option<&str> {
        self.contexts.iter().find(|(_, c)| c == t).map(|(n, _)| n.as_str())
    }

    /// Parses a term in which context names may appear.
    pub fn parse_term(&self, text: &str) -> Result<Term, SpecError> {
        let contexts: BTreeMap<String, Term> = self.contexts.iter().cloned().collect();
        let mut p = Parser::new(text, None, &self.language.sig)?;
        p.contexts = contexts;
        let t = p.term()?;
        p.expect_eof()?;
        Ok(t)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Str(String),
    Arrow,
    NegArrow,
    Dash,
    Turnstile,
    FatArrow,
    Eq,
    Star,
    Slash,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Colon,
    Bang,
    Amp,
    Bar,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Str(s) => write!(f, "\"{s}\""),
            Tok::Eof => f.write_str("end of input"),
            other => write!(f, "`{}`", tok_text(other)),
        }
    }
}

fn tok_text(t: &Tok) -> &'static str {
    match t {
        Tok::Arrow => "->",
        Tok::NegArrow => "-/>",
        Tok::Dash => "-",
        Tok::Turnstile => "|-",
        Tok::FatArrow => "=>",
        Tok::Eq => "=",
        Tok::Star => "*",
        Tok::Slash => "/",
        Tok::LParen => "(",
        Tok::RParen => ")",
        Tok::LBrace => "{",
        Tok::RBrace => "}",
        Tok::Comma => ",",
        Tok::Semi => ";",
        Tok::Colon => ":",
        Tok::Bang => "!",
        Tok::Amp => "&",
        Tok::Bar => "|",
        Tok::Ident(_) | Tok::Str(_) | Tok::Eof => "",
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\'' || c == '.'
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str, file: Option<&str>) -> Result<Vec<Token>, SpecError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, col, found: String, expected: &str| {
        SpecError::Parse(ParseError { file: file.map(String::from), line, col, expected: vec![expected.to_string()], found })
    };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let peek = |k: usize| chars.get(i + k).copied();
        let mut advance = |n: usize, i: &mut usize| {
            *i += n;
            col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (tok, len) = match c {
            '-' if peek(1) == Some('>') => (Tok::Arrow, 2),
            '-' if peek(1) == Some('/') && peek(2) == Some('>') => (Tok::NegArrow, 3),
            '-' => (Tok::Dash, 1),
            '|' if peek(1) == Some('-') => (Tok::Turnstile, 2),
            '|' => (Tok::Bar, 1),
            '=' if peek(1) == Some('>') => (Tok::FatArrow, 2),
            '=' => (Tok::Eq, 1),
            '*' => (Tok::Star, 1),
            '/' => (Tok::Slash, 1),
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            '{' => (Tok::LBrace, 1),
            '}' => (Tok::RBrace, 1),
            ',' => (Tok::Comma, 1),
            ';' => (Tok::Semi, 1),
            ':' => (Tok::Colon, 1),
            '!' => (Tok::Bang, 1),
            '&' => (Tok::Amp, 1),
            '"' => {
                let mut j = i + 1;
                while j < chars.len() && chars[j] != '"' && chars[j] != '\n' {
                    j += 1;
                }
                if chars.get(j) != Some(&'"') {
                    return Err(err(l0, c0, "unterminated string".into(), "closing `\"`"));
                }
                (Tok::Str(chars[i + 1..j].iter().collect()), j + 1 - i)
            }
            c if is_ident_start(c) => {
                let mut j = i + 1;
                while j < chars.len() && is_ident_char(chars[j]) {
                    j += 1;
                }
                (Tok::Ident(chars[i..j].iter().collect()), j - i)
            }
            other => return Err(err(l0, c0, format!("`{other}`"), "a token")),
        };
        advance(len, &mut i);
        out.push(Token { tok, line: l0, col: c0 });
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

/// How action names in a rule are bound.
enum Binder {
    Act(String),
    Sync(String, String, String),
}

struct Parser<'s> {
    toks: Vec<Token>,
    pos: usize,
    file: Option<String>,
    sig: &'s Signature,
    contexts: BTreeMap<String, Term>,
}

impl<'s> Parser<'s> {
    fn new(text: &str, file: Option<&str>, sig: &'s Signature) -> Result<Self, SpecError> {
        Ok(Parser { toks: lex(text, file)?, pos: 0, file: file.map(String::from), sig, contexts: BTreeMap::new() })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, tok: &Token, expected: &[&str]) -> SpecError {
        SpecError::Parse(ParseError {
            file: self.file.clone(),
            line: tok.line,
            col: tok.col,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: tok.tok.to_string(),
        })
    }

    fn error(&self, expected: &[&str]) -> SpecError {
        self.error_at(&self.toks[self.pos], expected)
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok) -> Result<(), SpecError> {
        if self.eat(&t) {
            Ok(())
        } else {
            Err(self.error(&[&format!("`{}`", tok_text(&t))]))
        }
    }

    fn expect_eof(&mut self) -> Result<(), SpecError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.error(&["end of input"]))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), SpecError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.error(&[&format!("`{kw}`")]))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, SpecError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(&[what])),
        }
    }

    fn number(&mut self) -> Result<usize, SpecError> {
        match self.peek().clone() {
            Tok::Ident(s) if s.chars().all(|c| c.is_ascii_digit()) => {
                let tok = self.bump();
                s.parse().map_err(|_| self.error_at(&tok, &["a number"]))
            }
            _ => Err(self.error(&["a number"])),
        }
    }

    fn variable(&mut self) -> Result<Var, SpecError> {
        let tok = self.toks[self.pos].clone();
        let name = self.ident("a variable")?;
        if !name.starts_with(|c: char| c.is_ascii_alphabetic()) {
            return Err(self.error_at(&tok, &["a variable starting with a letter"]));
        }
        Ok(Var::new(name))
    }

    fn term(&mut self) -> Result<Term, SpecError> {
        let tok = self.toks[self.pos].clone();
        let name = self.ident("a term")?;
        let op = Op::new(&name);
        if *self.peek() == Tok::LParen {
            let Some(arity) = self.sig.arity(&op) else {
                return Err(self.error_at(&tok, &["a declared operation"]));
            };
            self.bump();
            let mut args = Vec::new();
            if *self.peek() != Tok::RParen {
                loop {
                    args.push(self.term()?);
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
            }
            self.expect(Tok::RParen)?;
            if args.len() != arity {
                return Err(SpecError::Arity { op: name, expected: arity, found: args.len(), line: tok.line, col: tok.col });
            }
            return Ok(Term::App(op, args));
        }
        if let Some(arity) = self.sig.arity(&op) {
            if arity != 0 {
                return Err(SpecError::Arity { op: name, expected: arity, found: 0, line: tok.line, col: tok.col });
            }
            return Ok(Term::App(op, Vec::new()));
        }
        if let Some(t) = self.contexts.get(&name) {
            return Ok(t.clone());
        }
        if !name.starts_with(|c: char| c.is_ascii_alphabetic()) {
            return Err(self.error_at(&tok, &["a declared operation or a variable starting with a letter"]));
        }
        Ok(Term::Var(Var::new(name)))
    }

    fn formula(&mut self) -> Result<Formula, SpecError> {
        let mut parts = vec![self.conjunction()?];
        while self.eat(&Tok::Bar) {
            parts.push(self.conjunction()?);
        }
        Ok(Formula::disj(parts))
    }

    fn conjunction(&mut self) -> Result<Formula, SpecError> {
        let mut parts = vec![self.unary()?];
        while self.eat(&Tok::Amp) {
            parts.push(self.unary()?);
        }
        Ok(Formula::conj(parts))
    }

    fn unary(&mut self) -> Result<Formula, SpecError> {
        if self.eat(&Tok::Bang) {
            return Ok(Formula::not(self.unary()?));
        }
        if self.eat(&Tok::LParen) {
            let f = self.formula()?;
            self.expect(Tok::RParen)?;
            return Ok(f);
        }
        if matches!(self.peek_at(1), Tok::Dash) {
            let x = self.variable()?;
            self.expect(Tok::Dash)?;
            let a = self.ident("an action")?;
            self.expect(Tok::Arrow)?;
            return Ok(Formula::atom(x, Action::new(a)));
        }
        if self.eat_keyword("true") {
            return Ok(Formula::True);
        }
        if self.eat_keyword("false") {
            return Ok(Formula::falsum());
        }
        Err(self.error(&["`true`", "`false`", "`!`", "`(`", "an atom `x -a->`"]))
    }
}

/// Parses `text` against `sig`; identifiers declared as operations are
/// applications, all others variables.
pub fn parse_term(text: &str, sig: &Signature) -> Result<Term, SpecError> {
    let mut p = Parser::new(text, None, sig)?;
    let t = p.term()?;
    p.expect_eof()?;
    Ok(t)
}

pub fn parse_formula(text: &str) -> Result<Formula, SpecError> {
    let sig = Signature::new();
    let mut p = Parser::new(text, None, &sig)?;
    let f = p.formula()?;
    p.expect_eof()?;
    Ok(f)
}

/// Parses a file that uses no `include`.
pub fn parse_spec(text: &str) -> Result<SpecFile, SpecError> {
    parse_spec_with(text, &mut |name| Err(format!("include of {name} is not available here")))
}

/// Parses a file, resolving `include "name"` through `loader`.
pub fn parse_spec_with(text: &str, loader: &mut dyn FnMut(&str) -> Result<String, String>) -> Result<SpecFile, SpecError> {
    let mut b = Builder::default();
    b.statements(text, None, loader, 0)?;
    b.finish()
}

/// Reads and parses a file; includes are resolved relative to it.
pub fn load_spec(path: &Path) -> Result<SpecFile, SpecError> {
    let io = |p: &Path, e: std::io::Error| SpecError::Io { path: p.display().to_string(), message: e.to_string() };
    let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut loader = |name: &str| std::fs::read_to_string(dir.join(name)).map_err(|e| format!("{}: {e}", dir.join(name).display()));
    let mut b = Builder::default();
    b.statements(&text, Some(&path.display().to_string()), &mut loader, 0)?;
    b.finish()
}

const MAX_INCLUDE_DEPTH: usize = 16;

#[derive(Default)]
struct Builder {
    acts_declared: bool,
    spec: SpecFile,
    contexts: BTreeMap<String, Term>,
    seen_vars: BTreeSet<String>,
}

impl Builder {
    fn statements(
        &mut self,
        text: &str,
        file: Option<&str>,
        loader: &mut dyn FnMut(&str) -> Result<String, String>,
        depth: usize,
    ) -> Result<(), SpecError> {
        let sig = self.spec.language.sig.clone();
        let mut p = Parser::new(text, file, &sig)?;
        p.contexts = self.contexts.clone();
        loop {
            // the signature may have grown; re-borrow it for the next statement
            let sig = self.spec.language.sig.clone();
            let mut q = Parser { toks: std::mem::take(&mut p.toks), pos: p.pos, file: p.file.clone(), sig: &sig, contexts: self.contexts.clone() };
            let done = self.statement(&mut q, loader, depth)?;
            p.toks = std::mem::take(&mut q.toks);
            p.pos = q.pos;
            if done {
                return Ok(());
            }
        }
    }

    fn require_acts(&self, p: &Parser) -> Result<(), SpecError> {
        if self.acts_declared {
            Ok(())
        } else {
            Err(p.error(&["`acts` declaration first"]))
        }
    }

    fn action(&self, p: &mut Parser, binders: &BTreeMap<String, Action>) -> Result<Action, SpecError> {
        let name = p.ident("an action")?;
        Ok(binders.get(&name).cloned().unwrap_or_else(|| Action::new(name)))
    }

    /// Parses one statement; true at end of input.
    fn statement(
        &mut self,
        p: &mut Parser,
        loader: &mut dyn FnMut(&str) -> Result<String, String>,
        depth: usize,
    ) -> Result<bool, SpecError> {
        let start = p.toks[p.pos].clone();
        let kw = match p.peek().clone() {
            Tok::Eof => return Ok(true),
            Tok::Ident(kw) => kw,
            _ => return Err(p.error(&["a statement"])),
        };
        p.bump();
        match kw.as_str() {
            "acts" => {
                if self.acts_declared {
                    return Err(p.error_at(&start, &["a single `acts` declaration"]));
                }
                loop {
                    let a = p.ident("an action")?;
                    self.spec.language.acts.insert(Action::new(a));
                    if !p.eat(&Tok::Comma) {
                        break;
                    }
                }
                self.acts_declared = true;
            }
            "sync" => {
                self.require_acts(p)?;
                loop {
                    let tok = p.toks[p.pos].clone();
                    let a = Action::new(p.ident("an action")?);
                    p.expect(Tok::Star)?;
                    let b = Action::new(p.ident("an action")?);
                    p.expect(Tok::Eq)?;
                    let c = Action::new(p.ident("an action")?);
                    for (x, y) in [(a.clone(), b.clone()), (b, a)] {
                        match self.spec.sync.get(&(x.clone(), y.clone())) {
                            Some(prev) if *prev != c => {
                                return Err(p.error_at(&tok, &[&format!("{x}*{y}={prev} as declared before")]));
                            }
                            _ => {
                                self.spec.sync.insert((x, y), c.clone());
                            }
                        }
                    }
                    if !p.eat(&Tok::Comma) {
                        break;
                    }
                }
            }
            "op" => loop {
                let tok = p.toks[p.pos].clone();
                let name = p.ident("an operation name")?;
                p.expect(Tok::Slash)?;
                let arity = p.number()?;
                if self.contexts.contains_key(&name) || !self.spec.language.sig.declare(Op::new(&name), arity) {
                    return Err(p.error_at(&tok, &["a fresh operation name"]));
                }
                if !p.eat(&Tok::Comma) {
                    break;
                }
            },
            "prelude" => {
                self.require_acts(p)?;
                let tok = p.toks[p.pos].clone();
                let which = p.ident("`bccsp` or `bccsp0`")?;
                let prelude = match which.as_str() {
                    "bccsp" => bccsp_prelude(&self.spec.language.acts, true),
                    "bccsp0" => bccsp_prelude(&self.spec.language.acts, false),
                    _ => return Err(p.error_at(&tok, &["`bccsp` or `bccsp0`"])),
                };
                for (op, arity) in prelude.sig.iter() {
                    if !self.spec.language.sig.declare(op.clone(), arity) {
                        return Err(p.error_at(&tok, &[&format!("no prior declaration of {op}")]));
                    }
                }
                for r in prelude.rules {
                    self.spec.language.add_rule(r);
                }
            }
            "include" => {
                let tok = p.toks[p.pos].clone();
                let Tok::Str(name) = p.peek().clone() else {
                    return Err(p.error(&["a quoted file name"]));
                };
                p.bump();
                if depth >= MAX_INCLUDE_DEPTH {
                    return Err(p.error_at(&tok, &["fewer nested includes"]));
                }
                let text = loader(&name).map_err(|message| SpecError::Io { path: name.clone(), message })?;
                self.statements(&text, Some(&name), loader, depth + 1)?;
            }
            "rule" => {
                self.require_acts(p)?;
                self.rule(p)?;
            }
            "context" => {
                let tok = p.toks[p.pos].clone();
                let name = p.ident("a context name")?;
                if self.contexts.contains_key(&name)
                    || self.spec.language.sig.contains_name(&name)
                    || self.seen_vars.contains(&name)
                {
                    return Err(p.error_at(&tok, &["a fresh context name"]));
                }
                p.expect(Tok::Eq)?;
                let t = self.user_term(p)?;
                self.contexts.insert(name.clone(), t.clone());
                self.spec.contexts.push((name, t));
            }
            "check" => {
                self.require_acts(p)?;
                let check = self.check(p)?;
                self.spec.checks.push(check);
            }
            _ => return Err(p.error_at(&start, &["`acts`", "`sync`", "`op`", "`prelude`", "`include`", "`rule`", "`context`", "`check`"])),
        }
        p.expect(Tok::Semi)?;
        Ok(false)
    }

    fn user_term(&mut self, p: &mut Parser) -> Result<Term, SpecError> {
        p.contexts = self.contexts.clone();
        let start = p.pos;
        let t = p.term()?;
        for tok in &p.toks[start..p.pos] {
            if let Tok::Ident(name) = &tok.tok {
                if !self.contexts.contains_key(name) && !self.spec.language.sig.contains_name(name) {
                    self.seen_vars.insert(name.clone());
                }
            }
        }
        Ok(t)
    }

    fn binders(&mut self, p: &mut Parser) -> Result<Vec<Binder>, SpecError> {
        let mut out = Vec::new();
        if !p.eat_keyword("forall") {
            return Ok(out);
        }
        loop {
            let a = p.ident("a binder name")?;
            if p.eat(&Tok::Star) {
                let b = p.ident("a binder name")?;
                p.expect(Tok::Eq)?;
                let c = p.ident("a binder name")?;
                p.expect_keyword("in")?;
                p.expect_keyword("sync")?;
                out.push(Binder::Sync(a, b, c));
            } else {
                p.expect_keyword("in")?;
                p.expect_keyword("Act")?;
                out.push(Binder::Act(a));
            }
            let another = *p.peek() == Tok::Comma
                && matches!(p.peek_at(1), Tok::Ident(_))
                && (matches!(p.peek_at(2), Tok::Ident(s) if s == "in") || *p.peek_at(2) == Tok::Star);
            if !another {
                break;
            }
            p.bump();
        }
        p.eat(&Tok::Colon);
        Ok(out)
    }

    fn rule(&mut self, p: &mut Parser) -> Result<(), SpecError> {
        let binders = self.binders(p)?;
        let mut envs: Vec<BTreeMap<String, Action>> = vec![BTreeMap::new()];
        for b in &binders {
            envs = envs
                .into_iter()
                .flat_map(|env| -> Vec<BTreeMap<String, Action>> {
                    match b {
                        Binder::Act(a) => self
                            .spec
                            .language
                            .acts
                            .iter()
                            .map(|act| {
                                let mut e = env.clone();
                                e.insert(a.clone(), act.clone());
                                e
                            })
                            .collect(),
                        Binder::Sync(a, b, c) => self
                            .spec
                            .sync
                            .iter()
                            .map(|((x, y), z)| {
                                let mut e = env.clone();
                                e.insert(a.clone(), x.clone());
                                e.insert(b.clone(), y.clone());
                                e.insert(c.clone(), z.clone());
                                e
                            })
                            .collect(),
                    }
                })
                .collect();
        }
        let body = p.pos;
        for env in &envs {
            p.pos = body;
            let rule = self.rule_body(p, env)?;
            self.spec.language.add_rule(rule);
        }
        if envs.is_empty() {
            // no instances; still parse the body for syntax errors
            self.rule_body(p, &BTreeMap::new())?;
        }
        Ok(())
    }

    fn rule_body(&mut self, p: &mut Parser, env: &BTreeMap<String, Action>) -> Result<Rule, SpecError> {
        let mut premises = BTreeSet::new();
        if *p.peek() != Tok::Turnstile {
            loop {
                let x = p.variable()?;
                if p.eat(&Tok::NegArrow) {
                    for a in &self.spec.language.acts {
                        premises.insert(Premise::negative(x.clone(), a.clone()));
                    }
                } else {
                    p.expect(Tok::Dash)?;
                    let a = self.action(p, env)?;
                    if p.eat(&Tok::NegArrow) {
                        premises.insert(Premise::negative(x, a));
                    } else {
                        p.expect(Tok::Arrow)?;
                        let y = p.variable()?;
                        premises.insert(Premise::positive(x, a, y));
                    }
                }
                if !p.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        p.expect(Tok::Turnstile)?;
        p.contexts.clear();
        let source_tok = p.toks[p.pos].clone();
        let source = p.term()?;
        let Term::App(principal, args) = source else {
            return Err(p.error_at(&source_tok, &["an operation applied to variables"]));
        };
        let args = args
            .into_iter()
            .map(|a| a.as_var().cloned().ok_or_else(|| p.error_at(&source_tok, &["an operation applied to variables"])))
            .collect::<Result<Vec<_>, _>>()?;
        p.expect(Tok::Dash)?;
        let action = self.action(p, env)?;
        p.expect(Tok::Arrow)?;
        let target = p.term()?;
        Ok(Rule { principal, args, premises, action, target })
    }

    fn check(&mut self, p: &mut Parser) -> Result<CheckRequest, SpecError> {
        let is_formula = p.toks[p.pos..].iter().take_while(|t| t.tok != Tok::Semi && t.tok != Tok::Eof).any(|t| t.tok == Tok::FatArrow);
        let kind = if is_formula {
            let premise = p.formula()?;
            p.expect(Tok::FatArrow)?;
            let conclusion = p.formula()?;
            CheckKind::Entailment { premise, conclusion }
        } else {
            let left = self.user_term(p)?;
            p.expect(Tok::Eq)?;
            let right = self.user_term(p)?;
            let mut relation = None;
            if p.eat_keyword("with") {
                p.expect_keyword("relation")?;
                p.expect(Tok::LBrace)?;
                let mut pairs = Vec::new();
                if *p.peek() != Tok::RBrace {
                    loop {
                        p.expect(Tok::LParen)?;
                        let a = self.user_term(p)?;
                        p.expect(Tok::Comma)?;
                        let b = self.user_term(p)?;
                        p.expect(Tok::RParen)?;
                        pairs.push((a, b));
                        if !p.eat(&Tok::Semi) {
                            break;
                        }
                    }
                }
                p.expect(Tok::RBrace)?;
                relation = Some(pairs);
            }
            CheckKind::Equation { left, right, relation }
        };
        let mut mode = None;
        let mut budget = CheckBudget::default();
        loop {
            if mode.is_none() && p.eat_keyword("mode") {
                let tok = p.toks[p.pos].clone();
                let name = p.ident("a mode")?;
                mode = Some(Mode::parse(&name).ok_or_else(|| {
                    p.error_at(&tok, &["`rm`", "`closed`", "`ruloids`", "`junk`", "`entail`"])
                })?);
            } else if budget == CheckBudget::default() && p.eat_keyword("budget") {
                while let Tok::Ident(key) = p.peek().clone() {
                    let slot = match key.as_str() {
                        "pairs" => &mut budget.pairs,
                        "states" => &mut budget.states,
                        "size" => &mut budget.size,
                        _ => break,
                    };
                    p.bump();
                    p.expect(Tok::Eq)?;
                    let n = p.number()?;
                    if n == 0 {
                        return Err(p.error(&["a positive budget"]));
                    }
                    *slot = Some(n);
                }
                if budget == CheckBudget::default() {
                    return Err(p.error(&["`pairs=`", "`states=`", "`size=`"]));
                }
            } else {
                break;
            }
        }
        let check = CheckRequest { kind, mode, budget };
        let formula = matches!(check.kind, CheckKind::Entailment { .. });
        if formula != (check.effective_mode() == Mode::Entail) {
            return Err(p.error(&[if formula { "mode `entail` for a formula check" } else { "an equation for this mode" }]));
        }
        Ok(check)
    }

    fn finish(mut self) -> Result<SpecFile, SpecError> {
        if !self.acts_declared {
            return Err(SpecError::Parse(ParseError {
                file: None,
                line: 1,
                col: 1,
                expected: vec!["`acts` declaration".into()],
                found: "end of input".into(),
            }));
        }
        let diags = self.spec.language.validate();
        if !diags.is_empty() {
            return Err(SpecError::Validation(diags));
        }
        self.spec.warnings.extend(associativity_warnings(&self.spec.sync));
        Ok(self.spec)
    }
}

fn associativity_warnings(sync: &BTreeMap<(Action, Action), Action>) -> Vec<String> {
    let acts: BTreeSet<&Action> = sync.keys().flat_map(|(a, b)| [a, b]).chain(sync.values()).collect();
    let g = |a: &Action, b: &Action| sync.get(&(a.clone(), b.clone())).cloned();
    let mut out = Vec::new();
    for a in &acts {
        for b in &acts {
            for c in &acts {
                let left = g(a, b).and_then(|ab| g(&ab, c));
                let right = g(b, c).and_then(|bc| g(a, &bc));
                if left != right {
                    let show = |x: Option<Action>| x.map_or("undefined".to_string(), |x| x.to_string());
                    out.push(format!(
                        "synchronization is not associative: ({a}*{b})*{c} is {} but {a}*({b}*{c}) is {}",
                        show(left),
                        show(right)
                    ));
                }
            }
        }
    }
    out
}

/// Prints `spec` in the text format with every rule family expanded;
/// parsing the output yields `spec` again.
pub fn print_spec(spec: &SpecFile) -> String {
    let mut out = String::new();
    let lang = &spec.language;
    writeln!(out, "acts {};", lang.acts.iter().join(", ")).unwrap();
    let sync: Vec<String> =
        spec.sync.iter().filter(|((a, b), _)| a <= b).map(|((a, b), c)| format!("{a}*{b}={c}")).collect();
    if !sync.is_empty() {
        writeln!(out, "sync {};", sync.join(", ")).unwrap();
    }
    for (op, arity) in lang.sig.iter() {
        writeln!(out, "op {op}/{arity};").unwrap();
    }
    for r in &lang.rules {
        let premises = r.premises.iter().join(", ");
        let sep = if premises.is_empty() { "" } else { " " };
        writeln!(out, "rule {premises}{sep}|- {} -{}-> {};", r.source(), r.action, r.target).unwrap();
    }
    for (name, t) in &spec.contexts {
        writeln!(out, "context {name} = {t};").unwrap();
    }
    for c in &spec.checks {
        out.push_str("check ");
        match &c.kind {
            CheckKind::Equation { left, right, relation } => {
                write!(out, "{left} = {right}").unwrap();
                if let Some(pairs) = relation {
                    let pairs = pairs.iter().map(|(a, b)| format!("({a}, {b})")).join("; ");
                    write!(out, " with relation {{ {pairs} }}").unwrap();
                }
            }
            CheckKind::Entailment { premise, conclusion } => write!(out, "{premise} => {conclusion}").unwrap(),
        }
        if let Some(m) = c.mode {
            write!(out, " mode {m}").unwrap();
        }
        let b = &c.budget;
        if *b != CheckBudget::default() {
            out.push_str(" budget");
            for (k, v) in [("pairs", b.pairs), ("states", b.states), ("size", b.size)] {
                if let Some(v) = v {
                    write!(out, " {k}={v}").unwrap();
                }
            }
        }
        out.push_str(";\n");
    }
    out
}
