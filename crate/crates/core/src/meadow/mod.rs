//! Exact rational arithmetic with total division, propositions over it read
//! under three semantics, grid enumeration of solution sets, and
//! multi-valued logic creep detection.

mod creep;
mod eval;
mod expr;
mod parse;
mod rational;
mod solve;

pub use creep::{detect_mvl_creep, detect_mvl_creep_with, CreepFinding, CreepReport, CreepStatus};
pub use eval::{eval_arith, eval_bool, eval_bool_traced, Env, EvalError, Semantics, TruthValue};
pub use expr::{CmpOp, Expr};
pub use parse::{parse_expr, ParseError};
pub use rational::{ParseRationalError, Rational};
pub use solve::{
    check_simplification, grid, sole_variable, solution_set, solution_set_with,
    SimplificationReport, SolveError, DEFAULT_BOUND,
};
