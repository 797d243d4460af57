//! LTL formulas, a lasso evaluator and translation to Büchi automata.

mod automaton;
mod eval;
mod hoa;
mod syntax;

pub use automaton::{translate, translate_formula, Buchi, Guard, MAX_ATOMS};
pub use eval::{eval_lasso, eval_lasso_letters, Symbol};
pub use hoa::{from_hoa, to_hoa};
pub use syntax::{parse_ltl, parse_ltl_unchecked, Ltl};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LtlError {
    #[error("parse error at byte {pos}: {message}")]
    Parse { pos: usize, message: String },
    #[error("unknown atom `{name}` at byte {pos}")]
    UnknownAtom { pos: usize, name: String },
    #[error("lasso cycle must be non-empty")]
    EmptyCycle,
    #[error("{0} atoms exceed the supported alphabet size")]
    TooManyAtoms(usize),
    #[error("malformed automaton: {0}")]
    Malformed(String),
    #[error("HOA syntax error: {0}")]
    Hoa(String),
    #[error("unsupported acceptance condition {0}")]
    UnsupportedAcceptance(String),
    #[error("unsupported HOA feature: {0}")]
    UnsupportedHoa(String),
}
