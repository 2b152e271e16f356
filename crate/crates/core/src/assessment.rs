//! The reasoning an agent runs on each outcome instance it holds:
//! expectations, an assessment method, its application to the evidence,
//! trust maintenance, and rule-driven planning.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Serialize, Serializer};

use crate::decision::DecisionId;
use crate::event::{Event, EventPattern};
use crate::meadow::{eval_bool, Env, Expr, Semantics, TruthValue};
use crate::promise::{AgentId, BudgetRef, OutcomeInstance, PromiseBody, PromiseId, Quality, Time};
use crate::tuplix::{conforms, Account, Tuplix};
use crate::Rational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TrustError {
    #[error("{name} must lie strictly between 0 and 1, got {value}")]
    OutOfRange { name: &'static str, value: Rational },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Expectation {
    pub holder: AgentId,
    pub promise_id: PromiseId,
    pub proposition: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub valid_until: Option<Time>,
}

pub fn derive_expectations(instance: &OutcomeInstance, body: &PromiseBody) -> Vec<Expectation> {
    let proposition = match &body.quality {
        Quality::Transfer(t) => match body.deadline {
            Some(d) => format!("transfer {} from {} to {} occurs before {d}", t.amount, t.from, t.to),
            None => format!("transfer {} from {} to {} occurs", t.amount, t.from, t.to),
        },
        Quality::Meadow(e) => e.to_string(),
        Quality::Budget(b) => format!(
            "final account conforms to {} with shortfall at most {}",
            b.budget, b.shortfall
        ),
        Quality::Opaque(text) => text.clone(),
    };
    vec![Expectation {
        holder: instance.holder.clone(),
        promise_id: instance.promise_id.clone(),
        proposition,
        valid_until: body.deadline,
    }]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MethodKind {
    DeadlineEvent {
        pattern: EventPattern,
        #[serde(skip_serializing_if = "Option::is_none")]
        deadline: Option<Time>,
        confirmations: u32,
    },
    /// Bindings come from the latest `observe` facts.
    MeadowCheck { proposition: Expr },
    BudgetConformance { budget: BudgetRef, shortfall: Rational },
    ManualObservation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssessmentMethod {
    pub observer: AgentId,
    pub promise_id: PromiseId,
    pub kind: MethodKind,
}

pub fn generate_method(instance: &OutcomeInstance, body: &PromiseBody) -> AssessmentMethod {
    let kind = match &body.quality {
        Quality::Transfer(t) => MethodKind::DeadlineEvent {
            pattern: EventPattern::new("transfer")
                .with("amount", t.amount.to_string())
                .with("from", t.from.clone())
                .with("to", t.to.clone()),
            deadline: body.deadline,
            confirmations: t.confirmations.max(1),
        },
        Quality::Meadow(e) => MethodKind::MeadowCheck { proposition: e.clone() },
        Quality::Budget(b) => MethodKind::BudgetConformance {
            budget: b.budget.clone(),
            shortfall: b.shortfall.clone(),
        },
        Quality::Opaque(_) => MethodKind::ManualObservation,
    };
    AssessmentMethod {
        observer: instance.holder.clone(),
        promise_id: instance.promise_id.clone(),
        kind,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Pending,
    Kept,
    Broken,
}

impl fmt::Display for VerdictStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerdictStatus::Pending => "pending",
            VerdictStatus::Kept => "kept",
            VerdictStatus::Broken => "broken",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    status: VerdictStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    degree: Option<Rational>,
}

impl Verdict {
    pub fn kept() -> Verdict {
        Verdict {
            status: VerdictStatus::Kept,
            degree: Some(Rational::one()),
        }
    }

    pub fn broken() -> Verdict {
        Verdict {
            status: VerdictStatus::Broken,
            degree: Some(Rational::zero()),
        }
    }

    pub fn pending() -> Verdict {
        Verdict {
            status: VerdictStatus::Pending,
            degree: None,
        }
    }

    pub fn of(status: VerdictStatus) -> Verdict {
        match status {
            VerdictStatus::Kept => Verdict::kept(),
            VerdictStatus::Broken => Verdict::broken(),
            VerdictStatus::Pending => Verdict::pending(),
        }
    }

    pub fn status(&self) -> VerdictStatus {
        self.status
    }

    pub fn degree(&self) -> Option<&Rational> {
        self.degree.as_ref()
    }
}

/// A scripted verdict. `degree` is the observer's weight on it, in [0,1].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManualVerdict {
    pub status: VerdictStatus,
    pub degree: Rational,
}

/// What assessment can see of a run, restricted to times `<= now`.
pub trait Evidence {
    fn events_until(&self, now: Time) -> Vec<(Time, &Event)>;
    fn binding(&self, var: &str, now: Time) -> Option<Rational>;
    fn account(&self, now: Time) -> Option<&Account>;
    /// Latest scripted verdict on `promise` that applies to `observer`.
    fn manual_verdict(&self, observer: &AgentId, promise: &PromiseId, now: Time) -> Option<ManualVerdict>;
    fn budget(&self, reference: &BudgetRef) -> Option<Tuplix>;
}

pub fn assess(method: &AssessmentMethod, evidence: &dyn Evidence, now: Time) -> Verdict {
    assess_weighted(method, evidence, now).0
}

/// The verdict together with the weight its trust update should carry:
/// 1 for automatic methods, the scripted degree for manual ones.
pub fn assess_weighted(method: &AssessmentMethod, evidence: &dyn Evidence, now: Time) -> (Verdict, Rational) {
    let full = Rational::one();
    match &method.kind {
        MethodKind::DeadlineEvent {
            pattern,
            deadline,
            confirmations,
        } => {
            let horizon = deadline.map_or(now, |d| d.min(now));
            let seen = evidence
                .events_until(horizon)
                .into_iter()
                .filter(|(_, e)| pattern.matches(e))
                .count();
            let verdict = if seen >= *confirmations as usize {
                Verdict::kept()
            } else if deadline.is_some_and(|d| now > d) {
                Verdict::broken()
            } else {
                Verdict::pending()
            };
            (verdict, full)
        }
        MethodKind::MeadowCheck { proposition } => {
            let mut env = Env::new();
            for var in proposition.free_vars() {
                match evidence.binding(&var, now) {
                    Some(v) => env.insert(var, v),
                    None => return (Verdict::pending(), full),
                };
            }
            let verdict = match eval_bool(proposition, &env, Semantics::MeadowTotal) {
                Ok(TruthValue::True) => Verdict::kept(),
                Ok(TruthValue::False) => Verdict::broken(),
                _ => Verdict::pending(),
            };
            (verdict, full)
        }
        MethodKind::BudgetConformance { budget, shortfall } => {
            let verdict = match (evidence.budget(budget), evidence.account(now)) {
                (Some(b), Some(acc)) => match conforms(acc, &b, shortfall) {
                    Ok(true) => Verdict::kept(),
                    Ok(false) => Verdict::broken(),
                    Err(_) => Verdict::pending(),
                },
                _ => Verdict::pending(),
            };
            (verdict, full)
        }
        MethodKind::ManualObservation => match evidence.manual_verdict(&method.observer, &method.promise_id, now) {
            Some(m) => (Verdict::of(m.status), m.degree),
            None => (Verdict::pending(), full),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrustParams {
    alpha: Rational,
    beta: Rational,
}

impl TrustParams {
    pub fn new(alpha: Rational, beta: Rational) -> Result<TrustParams, TrustError> {
        for (name, value) in [("alpha", &alpha), ("beta", &beta)] {
            if value <= &Rational::zero() || value >= &Rational::one() {
                return Err(TrustError::OutOfRange {
                    name,
                    value: value.clone(),
                });
            }
        }
        Ok(TrustParams { alpha, beta })
    }

    pub fn alpha(&self) -> &Rational {
        &self.alpha
    }

    pub fn beta(&self) -> &Rational {
        &self.beta
    }
}

impl Default for TrustParams {
    fn default() -> TrustParams {
        TrustParams {
            alpha: Rational::new(1, 10),
            beta: Rational::new(1, 2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrustLedger {
    entries: BTreeMap<(AgentId, AgentId), Rational>,
    initial: Rational,
}

impl Default for TrustLedger {
    fn default() -> TrustLedger {
        TrustLedger::new(Rational::new(1, 2)).expect("1/2 is a valid trust")
    }
}

impl TrustLedger {
    pub fn new(initial: Rational) -> Result<TrustLedger, TrustError> {
        if !initial.is_unit_interval() {
            return Err(TrustError::OutOfRange {
                name: "initial trust",
                value: initial,
            });
        }
        Ok(TrustLedger {
            entries: BTreeMap::new(),
            initial,
        })
    }

    pub fn initial(&self) -> &Rational {
        &self.initial
    }

    pub fn trust(&self, observer: &AgentId, promiser: &AgentId) -> Rational {
        self.entries
            .get(&(observer.clone(), promiser.clone()))
            .cloned()
            .unwrap_or_else(|| self.initial.clone())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&AgentId, &AgentId, &Rational)> {
        self.entries.iter().map(|((o, p), t)| (o, p, t))
    }
}

impl Serialize for TrustLedger {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Entry<'a> {
            observer: &'a AgentId,
            promiser: &'a AgentId,
            trust: &'a Rational,
        }
        s.collect_seq(self.entries().map(|(observer, promiser, trust)| Entry {
            observer,
            promiser,
            trust,
        }))
    }
}

pub fn update_trust(
    ledger: &TrustLedger,
    observer: &AgentId,
    promiser: &AgentId,
    verdict: &Verdict,
    params: &TrustParams,
) -> TrustLedger {
    update_trust_weighted(ledger, observer, promiser, verdict, &Rational::one(), params)
}

/// Kept moves trust toward 1 by `w·α` of the gap; Broken removes a
/// `w·(1-β)` share. With `w = 1` these are `t + α(1-t)` and `β·t`.
pub fn update_trust_weighted(
    ledger: &TrustLedger,
    observer: &AgentId,
    promiser: &AgentId,
    verdict: &Verdict,
    weight: &Rational,
    params: &TrustParams,
) -> TrustLedger {
    let t = ledger.trust(observer, promiser);
    let w = weight.clone().clamp_unit();
    let next = match verdict.status() {
        VerdictStatus::Pending => return ledger.clone(),
        VerdictStatus::Kept => &t + &(&w * &(&params.alpha * &(Rational::one() - &t))),
        VerdictStatus::Broken => &t - &(&w * &(&(Rational::one() - &params.beta) * &t)),
    };
    let mut out = ledger.clone();
    out.entries.insert((observer.clone(), promiser.clone()), next);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    ExpectationCreation,
    MethodGeneration,
    Assessment,
    TrustMaintenance,
    Planning,
}

impl ProcessKind {
    pub const ALL: [ProcessKind; 5] = [
        ProcessKind::ExpectationCreation,
        ProcessKind::MethodGeneration,
        ProcessKind::Assessment,
        ProcessKind::TrustMaintenance,
        ProcessKind::Planning,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProcessDetail {
    Expectations { expectations: Vec<Expectation> },
    Method { method: AssessmentMethod },
    Assessment { verdict: Verdict },
    Trust { promiser: AgentId, trust: Rational },
    Planning { rules: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProcessRecord {
    pub process: ProcessKind,
    pub holder: AgentId,
    pub promise_id: PromiseId,
    pub detail: ProcessDetail,
}

/// The five process records for a freshly received instance, in process
/// order.
pub fn spawn_reasoning(
    instance: &OutcomeInstance,
    body: &PromiseBody,
    promiser: &AgentId,
    ledger: &TrustLedger,
    holder_rules: usize,
) -> Vec<ProcessRecord> {
    let details = [
        ProcessDetail::Expectations {
            expectations: derive_expectations(instance, body),
        },
        ProcessDetail::Method {
            method: generate_method(instance, body),
        },
        ProcessDetail::Assessment {
            verdict: Verdict::pending(),
        },
        ProcessDetail::Trust {
            promiser: promiser.clone(),
            trust: ledger.trust(&instance.holder, promiser),
        },
        ProcessDetail::Planning { rules: holder_rules },
    ];
    ProcessKind::ALL
        .into_iter()
        .zip(details)
        .map(|(process, detail)| ProcessRecord {
            process,
            holder: instance.holder.clone(),
            promise_id: instance.promise_id.clone(),
            detail,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TrustCmp {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

impl TrustCmp {
    pub fn holds(self, a: &Rational, b: &Rational) -> bool {
        match self {
            TrustCmp::Lt => a < b,
            TrustCmp::Le => a <= b,
            TrustCmp::Gt => a > b,
            TrustCmp::Ge => a >= b,
            TrustCmp::Eq => a == b,
            TrustCmp::Ne => a != b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Condition {
    Trust { promiser: AgentId, op: TrustCmp, value: Rational },
    /// The planning agent holds a live instance of the promise.
    Holds { promise: PromiseId },
    /// The planning agent has an expectation mentioning this text.
    Expects { text: String },
    Observed { pattern: EventPattern },
    Verdict { promise: PromiseId, status: VerdictStatus },
    Issued { promise: PromiseId },
    Decided { decision: DecisionId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PlannedAction {
    Perform { content: String },
    Emit { event: Event },
    RefuseOffersFrom { agent: AgentId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlanningRule {
    pub agent: AgentId,
    pub conditions: Vec<Condition>,
    pub action: PlannedAction,
}

/// Run facts visible to planning, up to the current tick.
pub struct PlanningView<'a> {
    pub instances: &'a [OutcomeInstance],
    pub expectations: &'a [Expectation],
    pub ledger: &'a TrustLedger,
    pub events: &'a [Event],
    pub verdicts: &'a BTreeMap<(AgentId, PromiseId), VerdictStatus>,
    pub issued: &'a BTreeSet<PromiseId>,
    pub decided: &'a BTreeSet<DecisionId>,
}

impl PlanningView<'_> {
    fn satisfied(&self, agent: &AgentId, c: &Condition) -> bool {
        match c {
            Condition::Trust { promiser, op, value } => op.holds(&self.ledger.trust(agent, promiser), value),
            Condition::Holds { promise } => self
                .instances
                .iter()
                .any(|i| &i.holder == agent && &i.promise_id == promise),
            Condition::Expects { text } => self
                .expectations
                .iter()
                .any(|e| &e.holder == agent && e.proposition.contains(text.as_str())),
            Condition::Observed { pattern } => self.events.iter().any(|e| pattern.matches(e)),
            Condition::Verdict { promise, status } => {
                self.verdicts
                    .get(&(agent.clone(), promise.clone()))
                    .copied()
                    .unwrap_or(VerdictStatus::Pending)
                    == *status
            }
            Condition::Issued { promise } => self.issued.contains(promise),
            Condition::Decided { decision } => self.decided.contains(decision),
        }
    }
}

/// Indices and actions of `agent`'s rules, in declaration order, whose
/// conditions all hold and that have not fired yet.
pub fn plan_next(
    agent: &AgentId,
    view: &PlanningView<'_>,
    rules: &[PlanningRule],
    fired: &BTreeSet<usize>,
) -> Vec<(usize, PlannedAction)> {
    rules
        .iter()
        .enumerate()
        .filter(|(i, r)| &r.agent == agent && !fired.contains(i))
        .filter(|(_, r)| r.conditions.iter().all(|c| view.satisfied(agent, c)))
        .map(|(i, r)| (i, r.action.clone()))
        .collect()
}
