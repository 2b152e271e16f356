//! Detection of multi-valued logic creep: bindings where reading division as
//! a partial operation changes the truth of a proposition that is two-valued
//! in the meadow.

use std::fmt;

use serde::Serialize;

use super::solve::{grid, sole_variable, SolveError};
use super::{eval_bool_traced, Env, Expr, Rational, Semantics, TruthValue};
use crate::par::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CreepStatus {
    /// No zero divisor is reached at any binding.
    Clean,
    /// Zero divisors occur, but short-circuit evaluation never reaches one.
    Guarded,
    /// Some binding is undefined under short-circuit evaluation.
    Creep,
}

impl fmt::Display for CreepStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CreepStatus::Clean => "clean: no division by zero reachable",
            CreepStatus::Guarded => "guarded: no creep under short-circuit",
            CreepStatus::Creep => "creep: partial division changes the outcome",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CreepFinding {
    pub binding: Rational,
    pub meadow_total: TruthValue,
    pub short_circuit: TruthValue,
    pub three_valued: TruthValue,
    /// Zero-divisor subterms reached by short-circuit evaluation.
    pub zero_divisions: Vec<String>,
    /// A false left guard kept short-circuit evaluation defined.
    pub guard_suppresses: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CreepReport {
    pub expression: String,
    pub variable: Option<String>,
    pub bound: u32,
    pub status: CreepStatus,
    pub findings: Vec<CreepFinding>,
    /// Bindings where a total division by zero produced a 0 that was then
    /// compared; the result may admit no meaningful reading.
    pub division_warnings: Vec<Rational>,
}

impl CreepReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty() && self.division_warnings.is_empty()
    }

    pub fn creep_free_under_short_circuit(&self) -> bool {
        self.status != CreepStatus::Creep
    }
}

struct Probe {
    binding: Rational,
    total: TruthValue,
    short: TruthValue,
    kleene: TruthValue,
    short_hits: Vec<String>,
    total_hits: usize,
}

pub fn detect_mvl_creep(expr: &Expr, bound: u32) -> Result<CreepReport, SolveError> {
    detect_mvl_creep_with(expr, bound, Execution::default())
}

pub fn detect_mvl_creep_with(
    expr: &Expr,
    bound: u32,
    exec: Execution,
) -> Result<CreepReport, SolveError> {
    if bound == 0 {
        return Err(SolveError::ZeroBound);
    }
    let var = sole_variable([expr])?;
    let points = match var {
        Some(_) => grid(bound),
        None => vec![Rational::zero()],
    };
    let probes = exec.map(&points, |x| {
        let env: Env = var.iter().map(|v| (v.clone(), x.clone())).collect();
        let (total, total_hits) = eval_bool_traced(expr, &env, Semantics::MeadowTotal)?;
        let (short, short_hits) = eval_bool_traced(expr, &env, Semantics::ShortCircuitPartial)?;
        let (kleene, _) = eval_bool_traced(expr, &env, Semantics::ThreeValued)?;
        Ok::<_, SolveError>(Probe {
            binding: x.clone(),
            total,
            short,
            kleene,
            short_hits,
            total_hits: total_hits.len(),
        })
    });

    let mut findings = Vec::new();
    let mut division_warnings = Vec::new();
    let mut any_zero_division = false;
    let mut any_short_undefined = false;
    for probe in probes {
        let p = probe?;
        if p.total_hits > 0 {
            any_zero_division = true;
            division_warnings.push(p.binding.clone());
        }
        if p.short == TruthValue::Undefined {
            any_short_undefined = true;
        }
        if p.total != p.short || p.total != p.kleene {
            findings.push(CreepFinding {
                guard_suppresses: p.short != TruthValue::Undefined && p.total_hits > 0,
                binding: p.binding,
                meadow_total: p.total,
                short_circuit: p.short,
                three_valued: p.kleene,
                zero_divisions: p.short_hits,
            });
        }
    }
    let status = if !any_zero_division {
        CreepStatus::Clean
    } else if any_short_undefined {
        CreepStatus::Creep
    } else {
        CreepStatus::Guarded
    };
    Ok(CreepReport {
        expression: expr.to_string(),
        variable: var,
        bound,
        status,
        findings,
        division_warnings,
    })
}

impl fmt::Display for CreepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "expression: {}", self.expression)?;
        writeln!(f, "bound: {}", self.bound)?;
        writeln!(f, "status: {}", self.status)?;
        for c in &self.findings {
            writeln!(
                f,
                "  {} = {}: total {}, short-circuit {}, three-valued {}; zero divisions [{}]{}",
                self.variable.as_deref().unwrap_or("_"),
                c.binding,
                c.meadow_total,
                c.short_circuit,
                c.three_valued,
                c.zero_divisions.join(", "),
                if c.guard_suppresses {
                    "; suppressed by guard"
                } else {
                    ""
                }
            )?;
        }
        if !self.division_warnings.is_empty() {
            let list: Vec<String> = self.division_warnings.iter().map(|r| r.to_string()).collect();
            writeln!(
                f,
                "warning: division by zero evaluated to 0 at {{{}}}",
                list.join(", ")
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meadow::parse_expr;

    #[test]
    fn division_free_is_empty() {
        let e = parse_expr("0 <= X and X <= 2 or X = 5").unwrap();
        let rep = detect_mvl_creep(&e, 8).unwrap();
        assert!(rep.is_empty());
        assert_eq!(rep.status, CreepStatus::Clean);
    }

    #[test]
    fn nonvanishing_divisor_is_clean() {
        let e = parse_expr("X / (X * X + 1) <= 1").unwrap();
        let rep = detect_mvl_creep(&e, 8).unwrap();
        assert_eq!(rep.status, CreepStatus::Clean);
        assert!(rep.is_empty());
    }

    #[test]
    fn guarded_division_reports_guard() {
        let e = parse_expr("X != 0 sand X / X = 1").unwrap();
        let rep = detect_mvl_creep(&e, 8).unwrap();
        assert_eq!(rep.status, CreepStatus::Guarded);
        assert!(rep.findings.is_empty());
        assert_eq!(rep.division_warnings, vec![Rational::zero()]);
    }

    #[test]
    fn right_guard_does_not_protect() {
        let e = parse_expr("X / X = 1 sand X != 0").unwrap();
        let rep = detect_mvl_creep(&e, 4).unwrap();
        assert_eq!(rep.status, CreepStatus::Creep);
        let f = &rep.findings[0];
        assert_eq!(f.binding, Rational::zero());
        assert_eq!(f.meadow_total, TruthValue::False);
        assert_eq!(f.short_circuit, TruthValue::Undefined);
        assert_eq!(f.three_valued, TruthValue::False);
    }
}
