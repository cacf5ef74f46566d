//! Structural operational semantics in the GSOS format: terms, rules,
//! the closed transition relation, ruloids and rule-matching bisimulations
//! for proving open equations.

pub mod enumerate;
#[cfg(test)]
mod fixtures;
pub mod logic;
pub mod model;
pub mod parser;
pub mod rmb;
pub mod ruloids;
pub mod semantics;
pub mod term;

pub use model::{Action, ActionSet, GsosLanguage, Premise, Rule, Ruloid, Signature};
pub use term::{Op, Renaming, Substitution, Term, Var};
