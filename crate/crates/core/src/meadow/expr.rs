use std::collections::BTreeSet;
use std::fmt;

use super::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
        }
    }

    pub fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
        }
    }
}

/// Arithmetic and propositional terms over rational variables.
///
/// `Div(a, b)` is kept as its own node so reports can point at the division
/// that was responsible for a zero divisor; it evaluates as `a · Inv(b)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(Rational),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Inv(Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    /// Classical conjunction: both sides are always evaluated.
    And(Box<Expr>, Box<Expr>),
    /// Left-to-right conjunction: a false left side skips the right side.
    AndThen(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Bool(bool),
    In(Box<Expr>, Vec<Rational>),
}

impl Expr {
    pub fn constant(value: impl Into<Rational>) -> Expr {
        Expr::Const(value.into())
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn is_arithmetic(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Var(_) => true,
            Expr::Neg(a) | Expr::Inv(a) => a.is_arithmetic(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.is_arithmetic() && b.is_arithmetic()
            }
            _ => false,
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(name) => {
                out.insert(name.clone());
            }
            Expr::Const(_) | Expr::Bool(_) => {}
            Expr::Neg(a) | Expr::Inv(a) | Expr::Not(a) | Expr::In(a, _) => a.collect_vars(out),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Cmp(_, a, b)
            | Expr::And(a, b)
            | Expr::AndThen(a, b)
            | Expr::Or(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// True when the term contains an inversion or a division anywhere.
    pub fn has_division(&self) -> bool {
        match self {
            Expr::Inv(_) | Expr::Div(_, _) => true,
            Expr::Const(_) | Expr::Var(_) | Expr::Bool(_) => false,
            Expr::Neg(a) | Expr::Not(a) | Expr::In(a, _) => a.has_division(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Cmp(_, a, b)
            | Expr::And(a, b)
            | Expr::AndThen(a, b)
            | Expr::Or(a, b) => a.has_division() || b.has_division(),
        }
    }

    /// Replaces variables using `lookup`; unmapped variables stay in place.
    pub fn substitute<F>(&self, lookup: &F) -> Expr
    where
        F: Fn(&str) -> Option<Expr>,
    {
        let sub = |e: &Expr| Box::new(e.substitute(lookup));
        match self {
            Expr::Var(name) => lookup(name).unwrap_or_else(|| self.clone()),
            Expr::Const(_) | Expr::Bool(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(sub(a)),
            Expr::Inv(a) => Expr::Inv(sub(a)),
            Expr::Not(a) => Expr::Not(sub(a)),
            Expr::In(a, set) => Expr::In(sub(a), set.clone()),
            Expr::Add(a, b) => Expr::Add(sub(a), sub(b)),
            Expr::Sub(a, b) => Expr::Sub(sub(a), sub(b)),
            Expr::Mul(a, b) => Expr::Mul(sub(a), sub(b)),
            Expr::Div(a, b) => Expr::Div(sub(a), sub(b)),
            Expr::Cmp(op, a, b) => Expr::Cmp(*op, sub(a), sub(b)),
            Expr::And(a, b) => Expr::And(sub(a), sub(b)),
            Expr::AndThen(a, b) => Expr::AndThen(sub(a), sub(b)),
            Expr::Or(a, b) => Expr::Or(sub(a), sub(b)),
        }
    }

    /// Folds every closed arithmetic subterm to a constant (meadow semantics).
    pub fn fold_constants(&self) -> Expr {
        if self.is_arithmetic() && self.is_closed() {
            if let Ok(v) = super::eval_arith(self, &super::Env::new()) {
                return Expr::Const(v);
            }
        }
        let fold = |e: &Expr| Box::new(e.fold_constants());
        match self {
            Expr::Var(_) | Expr::Const(_) | Expr::Bool(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(fold(a)),
            Expr::Inv(a) => Expr::Inv(fold(a)),
            Expr::Not(a) => Expr::Not(fold(a)),
            Expr::In(a, set) => Expr::In(fold(a), set.clone()),
            Expr::Add(a, b) => Expr::Add(fold(a), fold(b)),
            Expr::Sub(a, b) => Expr::Sub(fold(a), fold(b)),
            Expr::Mul(a, b) => Expr::Mul(fold(a), fold(b)),
            Expr::Div(a, b) => Expr::Div(fold(a), fold(b)),
            Expr::Cmp(op, a, b) => Expr::Cmp(*op, fold(a), fold(b)),
            Expr::And(a, b) => Expr::And(fold(a), fold(b)),
            Expr::AndThen(a, b) => Expr::AndThen(fold(a), fold(b)),
            Expr::Or(a, b) => Expr::Or(fold(a), fold(b)),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Or(..) => 1,
            Expr::And(..) | Expr::AndThen(..) => 2,
            Expr::Not(..) => 3,
            Expr::Cmp(..) | Expr::In(..) => 4,
            Expr::Add(..) | Expr::Sub(..) => 5,
            Expr::Mul(..) | Expr::Div(..) => 6,
            Expr::Neg(..) => 7,
            Expr::Const(c) if c.is_negative() || !c.is_integer() => 6,
            _ => 8,
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if e.precedence() < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

/// Renders in the same surface syntax the parser accepts.
impl serde::Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.precedence();
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(name) => write!(f, "{name}"),
            Expr::Bool(true) => write!(f, "true"),
            Expr::Bool(false) => write!(f, "false"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_operand(f, a, 8)
            }
            Expr::Inv(a) => write!(f, "inv({a})"),
            Expr::Not(a) => {
                write!(f, "not ")?;
                write_operand(f, a, p)
            }
            Expr::In(a, set) => {
                write_operand(f, a, 5)?;
                write!(f, " in {{")?;
                for (i, v) in set.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, "}}")
            }
            Expr::Cmp(op, a, b) => {
                write_operand(f, a, 5)?;
                write!(f, " {} ", op.symbol())?;
                write_operand(f, b, 5)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                let sym = match self {
                    Expr::Add(..) => "+",
                    Expr::Sub(..) => "-",
                    Expr::Mul(..) => "*",
                    _ => "/",
                };
                write_operand(f, a, p)?;
                write!(f, " {sym} ")?;
                // left-associative: the right operand needs strictly higher binding
                write_operand(f, b, p + 1)
            }
            Expr::And(a, b) | Expr::AndThen(a, b) | Expr::Or(a, b) => {
                let sym = match self {
                    Expr::And(..) => "and",
                    Expr::AndThen(..) => "sand",
                    _ => "or",
                };
                write_operand(f, a, p)?;
                write!(f, " {sym} ")?;
                write_operand(f, b, p + 1)
            }
        }
    }
}
