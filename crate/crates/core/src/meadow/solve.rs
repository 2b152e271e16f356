use std::collections::BTreeSet;

use num_integer::Integer;
use serde::Serialize;

use super::{eval_bool, Env, EvalError, Expr, Rational, Semantics};
use crate::par::Execution;

pub const DEFAULT_BOUND: u32 = 32;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolveError {
    #[error("expected a single free variable `{expected}`, found {found:?}")]
    FreeVariables {
        expected: String,
        found: Vec<String>,
    },
    #[error("expected at most one free variable, found {0:?}")]
    TooManyVariables(Vec<String>),
    #[error("enumeration bound must be positive")]
    ZeroBound,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Every rational `p/q` in lowest terms with `|p| <= bound` and
/// `1 <= q <= bound`, sorted by value.
pub fn grid(bound: u32) -> Vec<Rational> {
    let b = i64::from(bound);
    let mut out = Vec::new();
    for q in 1..=b {
        for p in -b..=b {
            if p.gcd(&q) == 1 {
                out.push(Rational::new(p, q));
            }
        }
    }
    out.sort();
    out
}

/// The single variable an expression (or pair of expressions) ranges over.
pub fn sole_variable<'a>(exprs: impl IntoIterator<Item = &'a Expr>) -> Result<Option<String>, SolveError> {
    let vars: BTreeSet<String> = exprs.into_iter().flat_map(|e| e.free_vars()).collect();
    if vars.len() > 1 {
        return Err(SolveError::TooManyVariables(vars.into_iter().collect()));
    }
    Ok(vars.into_iter().next())
}

fn check_vars(expr: &Expr, var: &str) -> Result<(), SolveError> {
    let found = expr.free_vars();
    if found.iter().any(|v| v != var) {
        return Err(SolveError::FreeVariables {
            expected: var.to_string(),
            found: found.into_iter().collect(),
        });
    }
    Ok(())
}

/// Satisfying bindings of `var` on the bound-`bound` grid under meadow
/// semantics.
pub fn solution_set(expr: &Expr, var: &str, bound: u32) -> Result<BTreeSet<Rational>, SolveError> {
    solution_set_with(expr, var, bound, Execution::default())
}

pub fn solution_set_with(
    expr: &Expr,
    var: &str,
    bound: u32,
    exec: Execution,
) -> Result<BTreeSet<Rational>, SolveError> {
    if bound == 0 {
        return Err(SolveError::ZeroBound);
    }
    check_vars(expr, var)?;
    let points = grid(bound);
    let hits: Vec<Result<Rational, EvalError>> = exec.filter_map(&points, |x| {
        let env = Env::from([(var.to_string(), x.clone())]);
        match eval_bool(expr, &env, Semantics::MeadowTotal) {
            Ok(v) if v.is_true() => Some(Ok(x.clone())),
            Ok(_) => None,
            Err(e) => Some(Err(e)),
        }
    });
    let mut out = BTreeSet::new();
    for h in hits {
        out.insert(h?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum SimplificationReport {
    Equivalent {
        bound: u32,
        solutions: Vec<Rational>,
    },
    Counterexamples {
        bound: u32,
        /// Satisfy the original but not the simplified form.
        only_original: Vec<Rational>,
        /// Satisfy the simplified form but not the original.
        only_simplified: Vec<Rational>,
    },
}

impl SimplificationReport {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, SimplificationReport::Equivalent { .. })
    }

    /// All differing witnesses, sorted.
    pub fn witnesses(&self) -> Vec<Rational> {
        match self {
            SimplificationReport::Equivalent { .. } => Vec::new(),
            SimplificationReport::Counterexamples {
                only_original,
                only_simplified,
                ..
            } => {
                let mut all: Vec<Rational> =
                    only_original.iter().chain(only_simplified).cloned().collect();
                all.sort();
                all
            }
        }
    }
}

/// Compares two propositions over one shared variable on the grid.
pub fn check_simplification(
    original: &Expr,
    simplified: &Expr,
    bound: u32,
) -> Result<SimplificationReport, SolveError> {
    let var = sole_variable([original, simplified])?.unwrap_or_else(|| "X".to_string());
    let a = solution_set(original, &var, bound)?;
    let b = solution_set(simplified, &var, bound)?;
    if a == b {
        return Ok(SimplificationReport::Equivalent {
            bound,
            solutions: a.into_iter().collect(),
        });
    }
    Ok(SimplificationReport::Counterexamples {
        bound,
        only_original: a.difference(&b).cloned().collect(),
        only_simplified: b.difference(&a).cloned().collect(),
    })
}
