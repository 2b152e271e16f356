//! Budgets as tuplices: labelled meadow terms with free variables,
//! refinement by substitution, instance checking, and account conformance.
//!
//! Positive entries are income, negative entries are expenses.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::meadow::{eval_arith, grid, parse_expr, Env, Expr, ParseError, Rational};
use crate::par::Execution;

pub const DEFAULT_INSTANCE_BOUND: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TuplixError {
    #[error("variable `{0}` is not declared")]
    Undeclared(String),
    #[error("substitution is cyclic through `{0}`")]
    Cyclic(String),
    #[error("entry `{label}` is not an arithmetic term")]
    NotArithmetic { label: String },
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("label sets differ: {left:?} vs {right:?}")]
    LabelMismatch {
        left: Vec<String>,
        right: Vec<String>,
    },
    #[error("tuplix still has free variables {0:?}")]
    Open(Vec<String>),
    #[error("shortfall must be nonnegative, got {0}")]
    NegativeShortfall(Rational),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

impl TuplixError {
    fn syntax(line: usize, message: impl Into<String>) -> TuplixError {
        TuplixError::Syntax {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tuplix {
    vars: BTreeSet<String>,
    entries: BTreeMap<String, Expr>,
}

impl Tuplix {
    pub fn new(
        vars: impl IntoIterator<Item = impl Into<String>>,
        entries: impl IntoIterator<Item = (impl Into<String>, Expr)>,
    ) -> Result<Tuplix, TuplixError> {
        let vars: BTreeSet<String> = vars.into_iter().map(Into::into).collect();
        let mut map = BTreeMap::new();
        for (label, expr) in entries {
            let label = label.into();
            if !expr.is_arithmetic() {
                return Err(TuplixError::NotArithmetic { label });
            }
            if let Some(v) = expr.free_vars().into_iter().find(|v| !vars.contains(v)) {
                return Err(TuplixError::Undeclared(v));
            }
            if map.insert(label.clone(), expr.fold_constants()).is_some() {
                return Err(TuplixError::DuplicateLabel(label));
            }
        }
        Ok(Tuplix { vars, entries: map })
    }

    pub fn vars(&self) -> &BTreeSet<String> {
        &self.vars
    }

    pub fn entries(&self) -> &BTreeMap<String, Expr> {
        &self.entries
    }

    pub fn labels(&self) -> BTreeSet<&str> {
        self.entries.keys().map(String::as_str).collect()
    }

    /// Variables that actually occur in some entry.
    pub fn occurring_vars(&self) -> BTreeSet<String> {
        self.entries.values().flat_map(Expr::free_vars).collect()
    }

    pub fn is_closed(&self) -> bool {
        self.entries.values().all(Expr::is_closed)
    }

    /// Entry values of a closed tuplix.
    pub fn closed_values(&self) -> Result<BTreeMap<String, Rational>, TuplixError> {
        let open = self.occurring_vars();
        if !open.is_empty() {
            return Err(TuplixError::Open(open.into_iter().collect()));
        }
        Ok(self
            .entries
            .iter()
            .map(|(l, e)| (l.clone(), eval_arith(e, &Env::new()).expect("closed term")))
            .collect())
    }
}

impl fmt::Display for Tuplix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vars: Vec<&str> = self.vars.iter().map(String::as_str).collect();
        writeln!(f, "vars: {}", vars.join(", "))?;
        for (label, e) in &self.entries {
            writeln!(f, "{label}: {e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Substitution {
    bindings: BTreeMap<String, Expr>,
}

impl Substitution {
    pub fn new() -> Substitution {
        Substitution::default()
    }

    pub fn bind(mut self, var: impl Into<String>, value: Expr) -> Substitution {
        self.bindings.insert(var.into(), value);
        self
    }

    pub fn bindings(&self) -> &BTreeMap<String, Expr> {
        &self.bindings
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    /// Bindings with every chain `x ↦ … y …, y ↦ …` followed to the end.
    pub fn resolved(&self) -> Result<BTreeMap<String, Expr>, TuplixError> {
        let mut done: BTreeMap<String, Expr> = BTreeMap::new();
        for var in self.bindings.keys() {
            let mut stack = Vec::new();
            self.resolve(var, &mut stack, &mut done)?;
        }
        Ok(done)
    }

    fn resolve(
        &self,
        var: &str,
        stack: &mut Vec<String>,
        done: &mut BTreeMap<String, Expr>,
    ) -> Result<Expr, TuplixError> {
        if let Some(e) = done.get(var) {
            return Ok(e.clone());
        }
        if stack.iter().any(|s| s == var) {
            return Err(TuplixError::Cyclic(var.to_string()));
        }
        let Some(rhs) = self.bindings.get(var) else {
            return Ok(Expr::Var(var.to_string()));
        };
        stack.push(var.to_string());
        let mut resolved_deps = BTreeMap::new();
        for dep in rhs.free_vars() {
            let r = self.resolve(&dep, stack, done)?;
            resolved_deps.insert(dep, r);
        }
        stack.pop();
        let out = rhs.substitute(&|v| resolved_deps.get(v).cloned()).fold_constants();
        done.insert(var.to_string(), out.clone());
        Ok(out)
    }

    /// `other ∘ self`: apply `self` first, then `other`.
    pub fn then(&self, other: &Substitution) -> Result<Substitution, TuplixError> {
        let first = self.resolved()?;
        let second = other.resolved()?;
        let mut bindings: BTreeMap<String, Expr> = first
            .iter()
            .map(|(v, e)| (v.clone(), e.substitute(&|x| second.get(x).cloned()).fold_constants()))
            .collect();
        for (v, e) in second {
            bindings.entry(v).or_insert(e);
        }
        Ok(Substitution { bindings })
    }
}

/// Applies a substitution, folding entries that become closed.
pub fn instantiate(t: &Tuplix, sigma: &Substitution) -> Result<Tuplix, TuplixError> {
    for (var, rhs) in &sigma.bindings {
        if !t.vars.contains(var) {
            return Err(TuplixError::Undeclared(var.clone()));
        }
        if let Some(v) = rhs.free_vars().into_iter().find(|v| !t.vars.contains(v)) {
            return Err(TuplixError::Undeclared(v));
        }
    }
    let resolved = sigma.resolved()?;
    let entries = t
        .entries
        .iter()
        .map(|(l, e)| {
            (
                l.clone(),
                e.substitute(&|v| resolved.get(v).cloned()).fold_constants(),
            )
        })
        .collect();
    let vars = t
        .vars
        .iter()
        .filter(|v| !sigma.bindings.contains_key(*v))
        .cloned()
        .collect();
    Ok(Tuplix { vars, entries })
}

/// Sum of all entries of a closed tuplix.
pub fn net_result(t: &Tuplix) -> Result<Rational, TuplixError> {
    Ok(t.closed_values()?.values().sum())
}

fn same_labels<A, B>(left: &BTreeMap<String, A>, right: &BTreeMap<String, B>) -> Result<(), TuplixError> {
    if left.keys().eq(right.keys()) {
        Ok(())
    } else {
        Err(TuplixError::LabelMismatch {
            left: left.keys().cloned().collect(),
            right: right.keys().cloned().collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Account {
    entries: BTreeMap<String, Rational>,
}

impl Account {
    pub fn new(entries: impl IntoIterator<Item = (impl Into<String>, Rational)>) -> Result<Account, TuplixError> {
        let mut map = BTreeMap::new();
        for (l, v) in entries {
            let l = l.into();
            if map.insert(l.clone(), v).is_some() {
                return Err(TuplixError::DuplicateLabel(l));
            }
        }
        Ok(Account { entries: map })
    }

    pub fn entries(&self) -> &BTreeMap<String, Rational> {
        &self.entries
    }

    pub fn net_result(&self) -> Rational {
        self.entries.values().sum()
    }
}

/// True iff the account's result is at most `shortfall` below the result the
/// closed budget predicts.
pub fn conforms(account: &Account, budget: &Tuplix, shortfall: &Rational) -> Result<bool, TuplixError> {
    if shortfall.is_negative() {
        return Err(TuplixError::NegativeShortfall(shortfall.clone()));
    }
    let predicted = budget.closed_values()?;
    same_labels(&account.entries, &predicted)?;
    let predicted: Rational = predicted.values().sum();
    Ok(account.net_result() >= predicted - shortfall)
}

/// Whether `t1` is obtained from `t2` by some substitution of `t2`'s free
/// variables.
///
/// Entries are first matched structurally; entries of `t1` that are closed
/// but did not match become numeric constraints, solved by the affine
/// shortcut where an entry is linear in one unknown and otherwise searched
/// over the bound-`bound` rational grid.
pub fn is_instance_of(t1: &Tuplix, t2: &Tuplix, bound: u32) -> Result<bool, TuplixError> {
    is_instance_of_with(t1, t2, bound, Execution::default())
}

pub fn is_instance_of_with(
    t1: &Tuplix,
    t2: &Tuplix,
    bound: u32,
    exec: Execution,
) -> Result<bool, TuplixError> {
    same_labels(&t1.entries, &t2.entries)?;
    let pattern_vars = &t2.vars;
    let mut bindings: BTreeMap<String, Expr> = BTreeMap::new();
    let mut constraints: Vec<(&Expr, Rational)> = Vec::new();
    for (label, pattern) in &t2.entries {
        let target = &t1.entries[label];
        let mut trial = bindings.clone();
        if unify(pattern, target, pattern_vars, &mut trial) {
            bindings = trial;
        } else if target.is_closed() {
            let value = eval_arith(target, &Env::new()).expect("closed term");
            constraints.push((pattern, value));
        } else {
            return Ok(false);
        }
    }
    if constraints.is_empty() {
        return Ok(true);
    }
    let mut env = Env::new();
    for (v, e) in &bindings {
        if e.is_closed() {
            env.insert(v.clone(), eval_arith(e, &Env::new()).expect("closed term"));
        } else if constraints.iter().any(|(p, _)| p.free_vars().contains(v)) {
            return Ok(false);
        }
    }
    let points = grid(bound.max(1));
    Ok(solve_numeric(&constraints, env, &points, exec))
}

fn unify(
    pattern: &Expr,
    target: &Expr,
    vars: &BTreeSet<String>,
    bindings: &mut BTreeMap<String, Expr>,
) -> bool {
    if let Expr::Var(v) = pattern {
        if vars.contains(v) {
            return match bindings.get(v) {
                Some(bound) => bound == target,
                None => {
                    bindings.insert(v.clone(), target.clone());
                    true
                }
            };
        }
    }
    if pattern.is_closed() {
        return target.is_closed()
            && eval_arith(pattern, &Env::new()).ok() == eval_arith(target, &Env::new()).ok();
    }
    match (pattern, target) {
        (Expr::Neg(a), Expr::Neg(b)) | (Expr::Inv(a), Expr::Inv(b)) => unify(a, b, vars, bindings),
        (Expr::Add(a1, a2), Expr::Add(b1, b2))
        | (Expr::Sub(a1, a2), Expr::Sub(b1, b2))
        | (Expr::Mul(a1, a2), Expr::Mul(b1, b2))
        | (Expr::Div(a1, a2), Expr::Div(b1, b2)) => {
            unify(a1, b1, vars, bindings) && unify(a2, b2, vars, bindings)
        }
        _ => false,
    }
}

/// `(a, b)` with `expr = a·v + b` when `expr` is affine in `v` and all other
/// variables are bound in `env`.
fn affine(expr: &Expr, v: &str, env: &Env) -> Option<(Rational, Rational)> {
    match expr {
        Expr::Const(c) => Some((Rational::zero(), c.clone())),
        Expr::Var(name) if name == v => Some((Rational::one(), Rational::zero())),
        Expr::Var(name) => env.get(name).map(|x| (Rational::zero(), x.clone())),
        Expr::Neg(a) => affine(a, v, env).map(|(p, q)| (-p, -q)),
        Expr::Add(a, b) => {
            let (p1, q1) = affine(a, v, env)?;
            let (p2, q2) = affine(b, v, env)?;
            Some((p1 + p2, q1 + q2))
        }
        Expr::Sub(a, b) => {
            let (p1, q1) = affine(a, v, env)?;
            let (p2, q2) = affine(b, v, env)?;
            Some((p1 - p2, q1 - q2))
        }
        Expr::Mul(a, b) => {
            let (p1, q1) = affine(a, v, env)?;
            let (p2, q2) = affine(b, v, env)?;
            if p1.is_zero() {
                Some((&q1 * &p2, q1 * q2))
            } else if p2.is_zero() {
                Some((p1 * &q2, q1 * q2))
            } else {
                None
            }
        }
        Expr::Div(a, b) => {
            let (p1, q1) = affine(a, v, env)?;
            let (p2, q2) = affine(b, v, env)?;
            if !p2.is_zero() {
                return None;
            }
            let inv = q2.inv();
            Some((p1 * &inv, q1 * inv))
        }
        Expr::Inv(a) => {
            let (p, q) = affine(a, v, env)?;
            p.is_zero().then(|| (Rational::zero(), q.inv()))
        }
        _ => None,
    }
}

fn solve_numeric(constraints: &[(&Expr, Rational)], mut env: Env, points: &[Rational], exec: Execution) -> bool {
    loop {
        let mut progress = false;
        for (pattern, target) in constraints {
            let unknown: Vec<String> = pattern
                .free_vars()
                .into_iter()
                .filter(|v| !env.contains_key(v))
                .collect();
            match unknown.as_slice() {
                [] => {
                    if eval_arith(pattern, &env).ok().as_ref() != Some(target) {
                        return false;
                    }
                }
                [v] => {
                    if let Some((a, b)) = affine(pattern, v, &env) {
                        if a.is_zero() {
                            if &b != target {
                                return false;
                            }
                        } else {
                            env.insert(v.clone(), (target - &b).div(&a));
                            progress = true;
                        }
                    }
                }
                _ => {}
            }
        }
        if !progress {
            break;
        }
    }
    let next = constraints
        .iter()
        .flat_map(|(p, _)| p.free_vars())
        .find(|v| !env.contains_key(v));
    match next {
        None => constraints
            .iter()
            .all(|(p, t)| eval_arith(p, &env).ok().as_ref() == Some(t)),
        Some(var) => exec
            .find_first(points, |x| {
                let mut trial = env.clone();
                trial.insert(var.clone(), x.clone());
                solve_numeric(constraints, trial, points, Execution::Sequential)
            })
            .is_some(),
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
    .trim()
}

fn parse_term(text: &str, line: usize) -> Result<Expr, TuplixError> {
    parse_expr(text).map_err(|e: ParseError| TuplixError::syntax(line, e.to_string()))
}

/// Parses the budget file format: an optional `vars: x, y` header and one
/// `label: <term>` entry per line. `#` starts a comment.
pub fn parse_budget(text: &str) -> Result<Tuplix, TuplixError> {
    let mut vars: Option<Vec<String>> = None;
    let mut entries: Vec<(String, Expr, usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let Some((label, rhs)) = line.split_once(':') else {
            return Err(TuplixError::syntax(line_no, "expected `label: term`"));
        };
        let label = label.trim();
        if label.is_empty() || !label.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-' || c == '.') {
            return Err(TuplixError::syntax(line_no, format!("bad label `{label}`")));
        }
        if label == "vars" {
            if vars.is_some() || !entries.is_empty() {
                return Err(TuplixError::syntax(line_no, "`vars:` must be the first line and appear once"));
            }
            let list = rhs
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect();
            vars = Some(list);
            continue;
        }
        if entries.iter().any(|(l, _, _)| l == label) {
            return Err(TuplixError::syntax(line_no, format!("duplicate label `{label}`")));
        }
        entries.push((label.to_string(), parse_term(rhs, line_no)?, line_no));
    }
    let vars = vars.unwrap_or_default();
    for (label, e, line_no) in &entries {
        if !e.is_arithmetic() {
            return Err(TuplixError::syntax(*line_no, format!("entry `{label}` is not an arithmetic term")));
        }
        if let Some(v) = e.free_vars().into_iter().find(|v| !vars.contains(v)) {
            return Err(TuplixError::syntax(*line_no, format!("variable `{v}` is not declared")));
        }
    }
    Tuplix::new(vars, entries.into_iter().map(|(l, e, _)| (l, e)))
}

/// Parses an account file: the budget format with every entry closed.
pub fn parse_account(text: &str) -> Result<Account, TuplixError> {
    let t = parse_budget(text)?;
    if !t.vars.is_empty() {
        return Err(TuplixError::syntax(1, "accounts declare no variables"));
    }
    Account::new(t.closed_values()?)
}

/// Parses `x = 3, y = n + 1/2` into a substitution.
pub fn parse_substitution(text: &str) -> Result<Substitution, TuplixError> {
    let mut sigma = Substitution::new();
    for part in text.split([',', ';']).map(str::trim).filter(|p| !p.is_empty()) {
        let Some((var, rhs)) = part.split_once('=') else {
            return Err(TuplixError::syntax(1, format!("expected `var = term` in `{part}`")));
        };
        let var = var.trim();
        if var.is_empty() || !var.chars().all(|c| c.is_alphanumeric() || c == '_') {
            return Err(TuplixError::syntax(1, format!("bad variable `{var}`")));
        }
        let e = parse_term(rhs, 1)?;
        if !e.is_arithmetic() {
            return Err(TuplixError::syntax(1, format!("binding for `{var}` is not arithmetic")));
        }
        if sigma.bindings.contains_key(var) {
            return Err(TuplixError::syntax(1, format!("`{var}` bound twice")));
        }
        sigma = sigma.bind(var, e);
    }
    Ok(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn tq() -> Tuplix {
        parse_budget(
            "vars: n, p, c\n\
             fees: n * p\n\
             venue: -c\n\
             catering: -3 * n\n",
        )
        .unwrap()
    }

    #[test]
    fn identity_substitution() {
        let t = tq();
        assert_eq!(instantiate(&t, &Substitution::new()).unwrap(), t);
    }

    #[test]
    fn closing_every_variable() {
        let sigma = parse_substitution("n = 10, p = 5, c = 12").unwrap();
        let closed = instantiate(&tq(), &sigma).unwrap();
        assert!(closed.is_closed());
        assert!(closed.vars().is_empty());
        assert!(closed.entries().values().all(|e| matches!(e, Expr::Const(_))));
        assert_eq!(net_result(&closed).unwrap(), r("8"));
    }

    #[test]
    fn undeclared_and_cyclic_bindings() {
        let bad = parse_substitution("z = 1").unwrap();
        assert_eq!(instantiate(&tq(), &bad), Err(TuplixError::Undeclared("z".into())));
        let cyc = parse_substitution("n = p + 1, p = n").unwrap();
        assert!(matches!(instantiate(&tq(), &cyc), Err(TuplixError::Cyclic(_))));
        let selfref = parse_substitution("n = n + 1").unwrap();
        assert!(matches!(instantiate(&tq(), &selfref), Err(TuplixError::Cyclic(_))));
    }

    #[test]
    fn chained_bindings_resolve() {
        let sigma = parse_substitution("n = 2 * p, p = 3").unwrap();
        let t = instantiate(&tq(), &sigma).unwrap();
        assert_eq!(t.entries()["fees"], Expr::Const(r("18")));
        assert_eq!(t.vars().iter().collect::<Vec<_>>(), vec!["c"]);
    }

    #[test]
    fn net_result_examples() {
        let t = parse_budget("fee: 10\nvenue: -4\ncatering: -3").unwrap();
        assert_eq!(net_result(&t).unwrap(), r("3"));
        let z = parse_budget("a: 0\nb: 0").unwrap();
        assert_eq!(net_result(&z).unwrap(), r("0"));
        assert_eq!(net_result(&parse_budget("x: -7").unwrap()).unwrap(), r("-7"));
        assert!(matches!(net_result(&tq()), Err(TuplixError::Open(_))));
    }

    #[test]
    fn instance_checks() {
        let t = tq();
        assert!(is_instance_of(&t, &t, 8).unwrap());
        let sb = instantiate(&t, &parse_substitution("p = 20").unwrap()).unwrap();
        assert!(is_instance_of(&sb, &t, 8).unwrap());
        // reverse direction: t has a free p where sb has the constant 20
        assert!(!is_instance_of(&t, &sb, 8).unwrap());
        let closed = instantiate(&sb, &parse_substitution("n = 30, c = 100").unwrap()).unwrap();
        assert!(is_instance_of(&closed, &sb, 8).unwrap());
        assert!(is_instance_of(&closed, &t, 8).unwrap());

        let a = parse_budget("x: -5").unwrap();
        let b = parse_budget("x: -3").unwrap();
        assert!(!is_instance_of(&a, &b, 8).unwrap());
        let other = parse_budget("y: -3").unwrap();
        assert!(matches!(is_instance_of(&a, &other, 8), Err(TuplixError::LabelMismatch { .. })));
    }

    #[test]
    fn instance_search_needs_grid_for_nonlinear_entries() {
        let t2 = parse_budget("vars: x\nsq: x * x\nlin: 0 * x").unwrap();
        let t1 = parse_budget("sq: 9/4\nlin: 0").unwrap();
        assert!(is_instance_of(&t1, &t2, 4).unwrap());
        let seq = is_instance_of_with(&t1, &t2, 4, Execution::Sequential).unwrap();
        assert!(seq);
        let t3 = parse_budget("sq: 2\nlin: 0").unwrap();
        assert!(!is_instance_of(&t3, &t2, 8).unwrap());
    }

    #[test]
    fn conformance_boundary() {
        let budget = parse_budget("fee: 10\nvenue: -4").unwrap();
        let exact = parse_account("fee: 10\nvenue: -4").unwrap();
        assert!(conforms(&exact, &budget, &r("0")).unwrap());
        let short = parse_account("fee: 8\nvenue: -4").unwrap();
        assert!(conforms(&short, &budget, &r("2")).unwrap());
        assert!(!conforms(&short, &budget, &r("1")).unwrap());
        assert!(conforms(&exact, &tq(), &r("0")).is_err());
        assert!(matches!(conforms(&exact, &budget, &r("-1")), Err(TuplixError::NegativeShortfall(_))));
    }

    #[test]
    fn file_format_errors() {
        assert!(matches!(parse_budget("fee 10"), Err(TuplixError::Syntax { line: 1, .. })));
        assert!(matches!(parse_budget("a: 1\na: 2"), Err(TuplixError::Syntax { line: 2, .. })));
        assert!(matches!(parse_budget("vars: x\na: y"), Err(TuplixError::Syntax { line: 2, .. })));
        assert!(matches!(parse_budget("a: 1 < 2"), Err(TuplixError::Syntax { .. })));
        assert!(parse_account("vars: x\na: x").is_err());
        assert!(parse_account("# header\n\nfee: 3/2 # note\n").is_ok());
    }
}
