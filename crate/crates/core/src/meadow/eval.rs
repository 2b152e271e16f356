use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::{Expr, Rational};

pub type Env = BTreeMap<String, Rational>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Semantics {
    /// Two-valued logic over total arithmetic, `0⁻¹ = 0`.
    MeadowTotal,
    /// Division is partial; `sand` skips its right side when the left is false.
    ShortCircuitPartial,
    /// Division is partial; connectives are strong Kleene.
    ThreeValued,
}

impl Semantics {
    pub const ALL: [Semantics; 3] = [
        Semantics::MeadowTotal,
        Semantics::ShortCircuitPartial,
        Semantics::ThreeValued,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthValue {
    True,
    False,
    Undefined,
}

impl TruthValue {
    pub fn from_bool(b: bool) -> TruthValue {
        if b {
            TruthValue::True
        } else {
            TruthValue::False
        }
    }

    pub fn is_true(self) -> bool {
        self == TruthValue::True
    }

    pub fn kleene_and(self, other: TruthValue) -> TruthValue {
        use TruthValue::*;
        match (self, other) {
            (False, _) | (_, False) => False,
            (True, True) => True,
            _ => Undefined,
        }
    }

    pub fn kleene_or(self, other: TruthValue) -> TruthValue {
        use TruthValue::*;
        match (self, other) {
            (True, _) | (_, True) => True,
            (False, False) => False,
            _ => Undefined,
        }
    }

    /// Undefined on either side makes the result undefined.
    fn strict(self, other: TruthValue, op: fn(bool, bool) -> bool) -> TruthValue {
        match (self, other) {
            (TruthValue::Undefined, _) | (_, TruthValue::Undefined) => TruthValue::Undefined,
            (a, b) => TruthValue::from_bool(op(a.is_true(), b.is_true())),
        }
    }
}

impl fmt::Display for TruthValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TruthValue::True => "true",
            TruthValue::False => "false",
            TruthValue::Undefined => "undefined",
        })
    }
}

impl std::ops::Not for TruthValue {
    type Output = TruthValue;
    fn not(self) -> TruthValue {
        match self {
            TruthValue::True => TruthValue::False,
            TruthValue::False => TruthValue::True,
            TruthValue::Undefined => TruthValue::Undefined,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("expected an arithmetic term, found `{0}`")]
    NotArithmetic(String),
    #[error("expected a proposition, found `{0}`")]
    NotProposition(String),
}

/// Evaluates an arithmetic term in the meadow of rationals.
pub fn eval_arith(expr: &Expr, env: &Env) -> Result<Rational, EvalError> {
    let v = Evaluator::new(env, Semantics::MeadowTotal).arith(expr)?;
    Ok(v.expect("meadow arithmetic is total"))
}

/// Evaluates a proposition under the chosen semantics.
pub fn eval_bool(expr: &Expr, env: &Env, semantics: Semantics) -> Result<TruthValue, EvalError> {
    check_bound(expr, env)?;
    Evaluator::new(env, semantics).prop(expr)
}

/// Evaluates a proposition and also returns the zero-divisor subterms that
/// were reached in evaluated positions, rendered as text.
pub fn eval_bool_traced(
    expr: &Expr,
    env: &Env,
    semantics: Semantics,
) -> Result<(TruthValue, Vec<String>), EvalError> {
    check_bound(expr, env)?;
    let mut ev = Evaluator::new(env, semantics);
    let v = ev.prop(expr)?;
    Ok((v, ev.zero_divisions))
}

fn check_bound(expr: &Expr, env: &Env) -> Result<(), EvalError> {
    match expr.free_vars().into_iter().find(|v| !env.contains_key(v)) {
        Some(v) => Err(EvalError::Unbound(v)),
        None => Ok(()),
    }
}

struct Evaluator<'a> {
    env: &'a Env,
    semantics: Semantics,
    zero_divisions: Vec<String>,
}

impl<'a> Evaluator<'a> {
    fn new(env: &'a Env, semantics: Semantics) -> Self {
        Evaluator {
            env,
            semantics,
            zero_divisions: Vec::new(),
        }
    }

    fn partial(&self) -> bool {
        self.semantics != Semantics::MeadowTotal
    }

    /// `None` means a zero divisor was hit under a partial reading.
    fn arith(&mut self, expr: &Expr) -> Result<Option<Rational>, EvalError> {
        Ok(match expr {
            Expr::Const(c) => Some(c.clone()),
            Expr::Var(name) => Some(
                self.env
                    .get(name)
                    .cloned()
                    .ok_or_else(|| EvalError::Unbound(name.clone()))?,
            ),
            Expr::Neg(a) => self.arith(a)?.map(|v| -v),
            Expr::Add(a, b) => self.binary(a, b, |x, y| x + y)?,
            Expr::Sub(a, b) => self.binary(a, b, |x, y| x - y)?,
            Expr::Mul(a, b) => self.binary(a, b, |x, y| x * y)?,
            Expr::Inv(a) => match self.arith(a)? {
                Some(v) => self.invert(expr, v),
                None => None,
            },
            Expr::Div(a, b) => {
                let num = self.arith(a)?;
                let den = self.arith(b)?;
                match (num, den) {
                    (Some(n), Some(d)) => self.invert(expr, d).map(|inv| n * inv),
                    _ => None,
                }
            }
            other => return Err(EvalError::NotArithmetic(other.to_string())),
        })
    }

    fn invert(&mut self, node: &Expr, v: Rational) -> Option<Rational> {
        if v.is_zero() {
            self.zero_divisions.push(node.to_string());
            if self.partial() {
                return None;
            }
        }
        Some(v.inv())
    }

    fn binary(
        &mut self,
        a: &Expr,
        b: &Expr,
        op: fn(Rational, Rational) -> Rational,
    ) -> Result<Option<Rational>, EvalError> {
        let x = self.arith(a)?;
        let y = self.arith(b)?;
        Ok(match (x, y) {
            (Some(x), Some(y)) => Some(op(x, y)),
            _ => None,
        })
    }

    fn prop(&mut self, expr: &Expr) -> Result<TruthValue, EvalError> {
        use TruthValue::*;
        Ok(match expr {
            Expr::Bool(b) => TruthValue::from_bool(*b),
            Expr::Cmp(op, a, b) => {
                let x = self.arith(a)?;
                let y = self.arith(b)?;
                match (x, y) {
                    (Some(x), Some(y)) => TruthValue::from_bool(op.holds(&x, &y)),
                    _ => Undefined,
                }
            }
            Expr::In(a, set) => match self.arith(a)? {
                Some(v) => TruthValue::from_bool(set.contains(&v)),
                None => Undefined,
            },
            Expr::Not(a) => !self.prop(a)?,
            Expr::And(a, b) => {
                let l = self.prop(a)?;
                let r = self.prop(b)?;
                match self.semantics {
                    Semantics::ThreeValued => l.kleene_and(r),
                    _ => l.strict(r, |x, y| x && y),
                }
            }
            Expr::AndThen(a, b) => {
                let l = self.prop(a)?;
                match self.semantics {
                    Semantics::ShortCircuitPartial => match l {
                        False => False,
                        Undefined => Undefined,
                        True => self.prop(b)?,
                    },
                    Semantics::ThreeValued => l.kleene_and(self.prop(b)?),
                    Semantics::MeadowTotal => l.strict(self.prop(b)?, |x, y| x && y),
                }
            }
            Expr::Or(a, b) => {
                let l = self.prop(a)?;
                let r = self.prop(b)?;
                match self.semantics {
                    Semantics::ThreeValued => l.kleene_or(r),
                    _ => l.strict(r, |x, y| x || y),
                }
            }
            other => return Err(EvalError::NotProposition(other.to_string())),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meadow::parse_expr;

    fn env(pairs: &[(&str, &str)]) -> Env {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.parse().unwrap()))
            .collect()
    }

    fn arith(src: &str, e: &Env) -> Rational {
        eval_arith(&parse_expr(src).unwrap(), e).unwrap()
    }

    fn prop(src: &str, e: &Env, s: Semantics) -> TruthValue {
        eval_bool(&parse_expr(src).unwrap(), e, s).unwrap()
    }

    #[test]
    fn inverse_of_zero() {
        assert_eq!(arith("inv(0)", &Env::new()), Rational::zero());
        assert_eq!(arith("1/0", &Env::new()), Rational::zero());
    }

    #[test]
    fn fraction_at_pole_is_zero() {
        assert_eq!(arith("X/(X-1)", &env(&[("X", "1")])), Rational::zero());
        assert_eq!(arith("X/X", &env(&[("X", "0")])), Rational::zero());
        assert_eq!(
            prop("X/X = 1", &env(&[("X", "0")]), Semantics::MeadowTotal),
            TruthValue::False
        );
    }

    #[test]
    fn unbound_variable_is_an_error() {
        let e = parse_expr("X + 1").unwrap();
        assert_eq!(
            eval_arith(&e, &Env::new()),
            Err(EvalError::Unbound("X".into()))
        );
        let p = parse_expr("Y = 1").unwrap();
        assert!(matches!(
            eval_bool(&p, &Env::new(), Semantics::ThreeValued),
            Err(EvalError::Unbound(_))
        ));
    }

    #[test]
    fn guard_short_circuits() {
        let at0 = env(&[("X", "0")]);
        assert_eq!(
            prop("X != 0 sand X/X != 1", &at0, Semantics::ShortCircuitPartial),
            TruthValue::False
        );
        // classical conjunction evaluates the right side and hits 0/0
        assert_eq!(
            prop("X != 0 and X/X != 1", &at0, Semantics::ShortCircuitPartial),
            TruthValue::Undefined
        );
    }

    #[test]
    fn partial_readings_disagree_with_total() {
        let at0 = env(&[("X", "0")]);
        assert_eq!(prop("X/X = 1", &at0, Semantics::MeadowTotal), TruthValue::False);
        assert_eq!(prop("X/X = 1", &at0, Semantics::ThreeValued), TruthValue::Undefined);
        assert_eq!(
            prop("X/X = 1", &at0, Semantics::ShortCircuitPartial),
            TruthValue::Undefined
        );
    }

    #[test]
    fn kleene_absorbs_false_on_either_side() {
        let at0 = env(&[("X", "0")]);
        assert_eq!(
            prop("X/X = 1 sand X != 0", &at0, Semantics::ThreeValued),
            TruthValue::False
        );
        assert_eq!(
            prop("X/X = 1 sand X != 0", &at0, Semantics::ShortCircuitPartial),
            TruthValue::Undefined
        );
        assert_eq!(
            prop("X/X = 1 or X = 0", &at0, Semantics::ThreeValued),
            TruthValue::True
        );
    }

    #[test]
    fn traced_evaluation_names_the_division() {
        let e = parse_expr("0 <= X/(X-1)").unwrap();
        let (v, hits) =
            eval_bool_traced(&e, &env(&[("X", "1")]), Semantics::ShortCircuitPartial).unwrap();
        assert_eq!(v, TruthValue::Undefined);
        assert_eq!(hits, vec!["X / (X - 1)".to_string()]);
    }

    #[test]
    fn membership() {
        let e = env(&[("X", "1/2")]);
        assert_eq!(prop("X in {0, 1/2}", &e, Semantics::MeadowTotal), TruthValue::True);
        assert_eq!(prop("X in {0, 1}", &e, Semantics::MeadowTotal), TruthValue::False);
    }
}
