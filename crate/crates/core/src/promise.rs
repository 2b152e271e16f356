//! Promises: bodies, intention classification, issuing with one outcome
//! instance per agent in scope, implied promises, offers, and instance
//! erosion.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::One;
use serde::Serialize;

use crate::meadow::{Expr, Rational};

pub type Time = u64;

/// Denominator bound of the dyadic erosion factors.
pub const EROSION_PRECISION_BITS: u32 = 16;

pub fn default_half_life() -> Rational {
    Rational::from(100)
}

pub fn default_drop_threshold() -> Rational {
    Rational::new(1, 100)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromiseError {
    #[error("agent identifiers must be non-empty")]
    EmptyAgentId,
    #[error("promisee `{0}` is not in the scope of the promise")]
    PromiseeNotInScope(AgentId),
    #[error("offer {offer} is addressed to `{promisee}`, not `{acceptor}`")]
    NotPromisee {
        offer: String,
        promisee: AgentId,
        acceptor: AgentId,
    },
    #[error("offer {0} has already been accepted")]
    AlreadyAccepted(String),
    #[error("half-life must be positive, got {0}")]
    NonPositiveHalfLife(Rational),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct AgentId(String);

impl AgentId {
    pub fn new(name: impl Into<String>) -> Result<AgentId, PromiseError> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(PromiseError::EmptyAgentId);
        }
        Ok(AgentId(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct PromiseId(pub String);

impl fmt::Display for PromiseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Hands out `P1, P2, …`-style identifiers.
#[derive(Debug, Clone)]
pub struct IdSource {
    prefix: &'static str,
    next: u64,
}

impl IdSource {
    pub fn new(prefix: &'static str) -> IdSource {
        IdSource { prefix, next: 1 }
    }

    pub fn next_id(&mut self) -> String {
        let id = format!("{}{}", self.prefix, self.next);
        self.next += 1;
        id
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Quantity {
    pub name: String,
    pub value: Rational,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransferClaim {
    pub amount: Rational,
    pub from: String,
    pub to: String,
    /// Matching transfer events required before the claim counts as kept.
    pub confirmations: u32,
}

/// A budget obtained from a named tuplix by a chain of named substitutions,
/// written `s2(s1(t))`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BudgetRef {
    Named(String),
    Apply { subst: String, inner: Box<BudgetRef> },
}

impl fmt::Display for BudgetRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BudgetRef::Named(n) => f.write_str(n),
            BudgetRef::Apply { subst, inner } => write!(f, "{subst}({inner})"),
        }
    }
}

impl Serialize for BudgetRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BudgetClaim {
    pub budget: BudgetRef,
    pub shortfall: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Quality {
    Opaque(String),
    Meadow(Expr),
    Transfer(TransferClaim),
    Budget(BudgetClaim),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromiseBody {
    pub quality: Quality,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub quantity: Vec<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deadline: Option<Time>,
}

impl PromiseBody {
    pub fn new(quality: Quality) -> PromiseBody {
        PromiseBody {
            quality,
            quantity: Vec::new(),
            deadline: None,
        }
    }

    pub fn opaque(text: impl Into<String>) -> PromiseBody {
        PromiseBody::new(Quality::Opaque(text.into()))
    }

    pub fn with_deadline(mut self, deadline: Time) -> PromiseBody {
        self.deadline = Some(deadline);
        self
    }

    /// Adds a quantity parameter; a repeated name replaces the earlier value.
    pub fn with_quantity(mut self, name: impl Into<String>, value: Rational, unit: impl Into<String>) -> PromiseBody {
        let name = name.into();
        self.quantity.retain(|q| q.name != name);
        self.quantity.push(Quantity {
            name,
            value,
            unit: unit.into(),
        });
        self
    }
}

impl fmt::Display for PromiseBody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.quality {
            Quality::Opaque(text) => f.write_str(text)?,
            Quality::Meadow(e) => write!(f, "{e}")?,
            Quality::Transfer(t) => write!(f, "transfer {} from {} to {}", t.amount, t.from, t.to)?,
            Quality::Budget(b) => write!(f, "within budget {} short by at most {}", b.budget, b.shortfall)?,
        }
        for q in &self.quantity {
            write!(f, " [{} = {} {}]", q.name, q.value, q.unit)?;
        }
        if let Some(d) = self.deadline {
            write!(f, " by {d}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentionClass {
    Real,
    Incidental,
    Indifferent,
    Deceptive,
    Invalid,
}

/// Five-way classification of an apparent intention by its underlying one.
///
/// An empty or absent underlying intention is indifferent; an identical one
/// is real when committed and incidental otherwise; a differing one is
/// invalid when the discrepancy is publicly observable and deceptive when it
/// is not.
pub fn classify_intention(
    apparent: &str,
    underlying: Option<&str>,
    committed: bool,
    publicly_observable_discrepancy: bool,
) -> IntentionClass {
    let underlying = underlying.map(str::trim).unwrap_or("");
    if underlying.is_empty() {
        IntentionClass::Indifferent
    } else if underlying == apparent.trim() {
        if committed {
            IntentionClass::Real
        } else {
            IntentionClass::Incidental
        }
    } else if publicly_observable_discrepancy {
        IntentionClass::Invalid
    } else {
        IntentionClass::Deceptive
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromiseDraft {
    pub promiser: AgentId,
    pub promisee: AgentId,
    pub scope: BTreeSet<AgentId>,
    pub body: PromiseBody,
    pub apparent_intention: String,
    /// Private to the promiser; never exported.
    pub underlying_intention: Option<String>,
    pub committed: bool,
    pub discrepancy_public: bool,
}

impl PromiseDraft {
    /// A real, committed promise whose apparent intention is the body itself.
    pub fn new(
        promiser: AgentId,
        promisee: AgentId,
        scope: impl IntoIterator<Item = AgentId>,
        body: PromiseBody,
    ) -> PromiseDraft {
        let apparent = body.to_string();
        PromiseDraft {
            promiser,
            promisee,
            scope: scope.into_iter().collect(),
            body,
            underlying_intention: Some(apparent.clone()),
            apparent_intention: apparent,
            committed: true,
            discrepancy_public: false,
        }
    }

    pub fn validate(&self) -> Result<(), PromiseError> {
        if !self.scope.contains(&self.promisee) {
            return Err(PromiseError::PromiseeNotInScope(self.promisee.clone()));
        }
        Ok(())
    }

    pub fn classification(&self) -> IntentionClass {
        classify_intention(
            &self.apparent_intention,
            self.underlying_intention.as_deref(),
            self.committed,
            self.discrepancy_public,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PromiseKind {
    Explicit,
    Silent,
    Implied { parent: PromiseId, silent: bool },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromiseRecord {
    pub id: PromiseId,
    pub promiser: AgentId,
    pub promisee: AgentId,
    pub scope: BTreeSet<AgentId>,
    pub body: PromiseBody,
    pub apparent_intention: String,
    #[serde(skip)]
    pub underlying_intention: Option<String>,
    pub issue_time: Time,
    pub kind: PromiseKind,
    #[serde(skip)]
    pub classification: IntentionClass,
}

impl PromiseRecord {
    fn from_draft(id: PromiseId, draft: PromiseDraft, time: Time, kind: PromiseKind) -> PromiseRecord {
        let classification = draft.classification();
        PromiseRecord {
            id,
            promiser: draft.promiser,
            promisee: draft.promisee,
            scope: draft.scope,
            body: draft.body,
            apparent_intention: draft.apparent_intention,
            underlying_intention: draft.underlying_intention,
            issue_time: time,
            kind,
            classification,
        }
    }
}

/// Per-holder half-lives for outcome instances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErosionPolicy {
    pub default_half_life: Rational,
    pub per_holder: BTreeMap<AgentId, Rational>,
    pub drop_threshold: Rational,
}

impl Default for ErosionPolicy {
    fn default() -> ErosionPolicy {
        ErosionPolicy {
            default_half_life: default_half_life(),
            per_holder: BTreeMap::new(),
            drop_threshold: default_drop_threshold(),
        }
    }
}

impl ErosionPolicy {
    pub fn half_life_for(&self, holder: &AgentId) -> Rational {
        self.per_holder
            .get(holder)
            .cloned()
            .unwrap_or_else(|| self.default_half_life.clone())
    }
}

/// One agent's copy of a promise outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutcomeInstance {
    pub promise_id: PromiseId,
    pub holder: AgentId,
    pub received_time: Time,
    pub confidence: Rational,
    pub half_life: Rational,
}

/// One instance per agent in the (deduplicated) scope, delivered at the
/// issue time with full confidence.
pub fn distribute(record: &PromiseRecord, policy: &ErosionPolicy) -> Vec<OutcomeInstance> {
    record
        .scope
        .iter()
        .map(|holder| OutcomeInstance {
            promise_id: record.id.clone(),
            holder: holder.clone(),
            received_time: record.issue_time,
            confidence: Rational::one(),
            half_life: policy.half_life_for(holder),
        })
        .collect()
}

pub fn issue_promise(
    id: PromiseId,
    draft: PromiseDraft,
    time: Time,
    policy: &ErosionPolicy,
) -> Result<(PromiseRecord, Vec<OutcomeInstance>), PromiseError> {
    issue_with_kind(id, draft, time, PromiseKind::Explicit, policy)
}

pub fn issue_with_kind(
    id: PromiseId,
    draft: PromiseDraft,
    time: Time,
    kind: PromiseKind,
    policy: &ErosionPolicy,
) -> Result<(PromiseRecord, Vec<OutcomeInstance>), PromiseError> {
    draft.validate()?;
    for holder in &draft.scope {
        let h = policy.half_life_for(holder);
        if h <= Rational::zero() {
            return Err(PromiseError::NonPositiveHalfLife(h));
        }
    }
    let record = PromiseRecord::from_draft(id, draft, time, kind);
    let instances = distribute(&record, policy);
    Ok((record, instances))
}

/// Template for a promise implied by another one. `promiser: None` means
/// the parent's promiser.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImplicationRule {
    pub pattern: String,
    promiser: Option<AgentId>,
    promisee: AgentId,
    scope: BTreeSet<AgentId>,
    body: String,
    silent: bool,
}

impl ImplicationRule {
    pub fn new(
        pattern: impl Into<String>,
        promiser: Option<AgentId>,
        promisee: AgentId,
        scope: impl IntoIterator<Item = AgentId>,
        body: impl Into<String>,
        silent: bool,
    ) -> Result<ImplicationRule, PromiseError> {
        let scope: BTreeSet<AgentId> = scope.into_iter().collect();
        if !scope.contains(&promisee) {
            return Err(PromiseError::PromiseeNotInScope(promisee));
        }
        Ok(ImplicationRule {
            pattern: pattern.into(),
            promiser,
            promisee,
            scope,
            body: body.into(),
            silent,
        })
    }

    /// Non-overlapping occurrences of the pattern in the rendered body.
    pub fn match_count(&self, body: &PromiseBody) -> usize {
        if self.pattern.is_empty() {
            return 0;
        }
        body.to_string().matches(self.pattern.as_str()).count()
    }

    pub fn mentions(&self) -> impl Iterator<Item = &AgentId> {
        self.promiser.iter().chain(std::iter::once(&self.promisee)).chain(&self.scope)
    }
}

/// Implied promises issued concurrently with `parent`: one per rule match.
pub fn derive_implied_promises(
    parent: &PromiseRecord,
    rules: &[ImplicationRule],
    mut next_id: impl FnMut() -> PromiseId,
) -> Vec<PromiseRecord> {
    let mut out = Vec::new();
    for rule in rules {
        for _ in 0..rule.match_count(&parent.body) {
            let draft = PromiseDraft::new(
                rule.promiser.clone().unwrap_or_else(|| parent.promiser.clone()),
                rule.promisee.clone(),
                rule.scope.iter().cloned(),
                PromiseBody::opaque(rule.body.clone()),
            );
            let kind = PromiseKind::Implied {
                parent: parent.id.clone(),
                silent: rule.silent,
            };
            out.push(PromiseRecord::from_draft(next_id(), draft, parent.issue_time, kind));
        }
    }
    out
}

/// `2^(-dt/half_life)` rounded down to a multiple of `2^-16`, computed
/// exactly.
pub fn erosion_factor(dt: Time, half_life: &Rational) -> Rational {
    let scale = BigInt::one() << EROSION_PRECISION_BITS;
    if dt == 0 {
        return Rational::one();
    }
    // dt / half_life = a / b in lowest terms
    let x = Rational::from_integer(dt).div(half_life);
    let a = x.numer().clone();
    let b = x.denom().clone();
    let bits = BigInt::from(EROSION_PRECISION_BITS);
    if a > &bits * &b {
        return Rational::zero();
    }
    let a_u = u32::try_from(&a).expect("exponent bounded by 16·b");
    let b_u = u32::try_from(&b).expect("half-life denominator fits u32");
    // largest m with m^b · 2^a <= 2^(16 b)
    let limit = BigInt::one() << (EROSION_PRECISION_BITS as u64 * b_u as u64);
    let fits = |m: u64| BigInt::from(m).pow(b_u) << a_u <= limit;
    let (mut lo, mut hi) = (0u64, 1u64 << EROSION_PRECISION_BITS);
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Rational::new(lo, scale)
}

/// Erodes each instance by `dt` and drops those that fall below the
/// threshold.
pub fn erode_instances(instances: &[OutcomeInstance], dt: Time, drop_threshold: &Rational) -> Vec<OutcomeInstance> {
    instances
        .iter()
        .filter_map(|inst| {
            let confidence = &inst.confidence * &erosion_factor(dt, &inst.half_life);
            (&confidence >= drop_threshold).then(|| OutcomeInstance {
                confidence,
                ..inst.clone()
            })
        })
        .collect()
}

/// An offer: a promise conditional on its acceptance by the promisee.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionalPromise {
    pub id: String,
    pub draft: PromiseDraft,
    pub condition: String,
    pub accepted: bool,
}

pub fn make_offer(id: impl Into<String>, draft: PromiseDraft, condition: impl Into<String>) -> Result<ConditionalPromise, PromiseError> {
    draft.validate()?;
    Ok(ConditionalPromise {
        id: id.into(),
        draft,
        condition: condition.into(),
        accepted: false,
    })
}

/// Accepting issues the offered promise and the acceptor's promise to make
/// use of it. A second acceptance is rejected.
pub fn accept_offer(
    offer: &mut ConditionalPromise,
    acceptor: &AgentId,
    time: Time,
    ids: (PromiseId, PromiseId),
) -> Result<(PromiseRecord, PromiseRecord), PromiseError> {
    if acceptor != &offer.draft.promisee {
        return Err(PromiseError::NotPromisee {
            offer: offer.id.clone(),
            promisee: offer.draft.promisee.clone(),
            acceptor: acceptor.clone(),
        });
    }
    if offer.accepted {
        return Err(PromiseError::AlreadyAccepted(offer.id.clone()));
    }
    offer.accepted = true;
    let offered = PromiseRecord::from_draft(ids.0, offer.draft.clone(), time, PromiseKind::Explicit);
    let usage_body = PromiseBody::opaque(format!(
        "make use of the promise contained in offer {}: {}",
        offer.id, offered.body
    ));
    let usage_draft = PromiseDraft::new(
        acceptor.clone(),
        offer.draft.promiser.clone(),
        [offer.draft.promiser.clone()],
        usage_body,
    );
    let usage = PromiseRecord::from_draft(ids.1, usage_draft, time, PromiseKind::Explicit);
    Ok((offered, usage))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent(s: &str) -> AgentId {
        AgentId::new(s).unwrap()
    }

    fn draft(scope: &[&str]) -> PromiseDraft {
        PromiseDraft::new(agent("A"), agent("B"), scope.iter().map(|s| agent(s)), PromiseBody::opaque("deliver X"))
    }

    #[test]
    fn issue_creates_one_instance_per_scoped_agent() {
        let policy = ErosionPolicy::default();
        let (rec, inst) = issue_promise(PromiseId("P1".into()), draft(&["B", "B1", "B2"]), 4, &policy).unwrap();
        let holders: Vec<&str> = inst.iter().map(|i| i.holder.as_str()).collect();
        assert_eq!(holders, ["B", "B1", "B2"]);
        assert!(inst.iter().all(|i| i.confidence == Rational::one() && i.received_time == 4));
        assert_eq!(rec.kind, PromiseKind::Explicit);
        assert_eq!(rec.classification, IntentionClass::Real);

        let (_, one) = issue_promise(PromiseId("P2".into()), draft(&["B"]), 0, &policy).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].holder, agent("B"));
    }

    #[test]
    fn duplicate_scope_entries_collapse() {
        let policy = ErosionPolicy::default();
        let (_, inst) = issue_promise(PromiseId("P1".into()), draft(&["B", "B", "C"]), 0, &policy).unwrap();
        assert_eq!(inst.len(), 2);
    }

    #[test]
    fn promisee_must_be_in_scope() {
        let err = issue_promise(PromiseId("P1".into()), draft(&["C"]), 0, &ErosionPolicy::default()).unwrap_err();
        assert_eq!(err, PromiseError::PromiseeNotInScope(agent("B")));
        assert_eq!(AgentId::new(" "), Err(PromiseError::EmptyAgentId));
    }

    #[test]
    fn promiser_in_own_scope_receives_instance() {
        let (_, inst) = issue_promise(PromiseId("P1".into()), draft(&["A", "B"]), 0, &ErosionPolicy::default()).unwrap();
        assert!(inst.iter().any(|i| i.holder == agent("A")));
    }

    #[test]
    fn classification_cases() {
        assert_eq!(classify_intention("pay", Some("pay"), true, false), IntentionClass::Real);
        assert_eq!(classify_intention("pay", Some("pay"), false, false), IntentionClass::Incidental);
        assert_eq!(classify_intention("pay", None, true, false), IntentionClass::Indifferent);
        assert_eq!(classify_intention("pay", Some(""), true, true), IntentionClass::Indifferent);
        assert_eq!(classify_intention("pay", Some("keep money"), true, false), IntentionClass::Deceptive);
        assert_eq!(classify_intention("pay", Some("keep money"), true, true), IntentionClass::Invalid);
    }

    #[test]
    fn erosion_closed_forms() {
        let h = Rational::from(100);
        assert_eq!(erosion_factor(0, &h), Rational::one());
        assert_eq!(erosion_factor(100, &h), Rational::new(1, 2));
        assert_eq!(erosion_factor(200, &h), Rational::new(1, 4));
        assert_eq!(erosion_factor(1700, &h), Rational::zero());
        // 2^(-1/2) = 0.70710678…; floor(65536 · 0.70710678) = 46340
        assert_eq!(erosion_factor(50, &h), Rational::new(46340, 65536));
        let third = Rational::new(1, 3);
        assert_eq!(erosion_factor(1, &third), Rational::new(1, 8));
    }

    #[test]
    fn erosion_drops_below_threshold() {
        let inst = OutcomeInstance {
            promise_id: PromiseId("P1".into()),
            holder: agent("B"),
            received_time: 0,
            confidence: Rational::new(1, 8),
            half_life: Rational::from(100),
        };
        assert!(erode_instances(std::slice::from_ref(&inst), 0, &Rational::new(1, 4)).is_empty());
        let kept = erode_instances(std::slice::from_ref(&inst), 0, &Rational::new(1, 16));
        assert_eq!(kept, vec![inst]);
    }

    #[test]
    fn implied_promises() {
        let policy = ErosionPolicy::default();
        let body = PromiseBody::opaque("pay for meal; later pay for meal again");
        let d = PromiseDraft::new(agent("A"), agent("B"), [agent("B")], body);
        let (parent, _) = issue_promise(PromiseId("P1".into()), d, 3, &policy).unwrap();
        let rule = ImplicationRule::new("pay for meal", None, agent("Staff"), [agent("Staff")], "will pay for what has been ordered", true).unwrap();
        let mut n = 1;
        let implied = derive_implied_promises(&parent, &[rule], || {
            n += 1;
            PromiseId(format!("P{n}"))
        });
        assert_eq!(implied.len(), 2);
        assert_ne!(implied[0].id, implied[1].id);
        for p in &implied {
            assert_eq!(p.issue_time, 3);
            assert_eq!(p.promiser, agent("A"));
            assert_eq!(p.kind, PromiseKind::Implied { parent: PromiseId("P1".into()), silent: true });
        }
        assert!(derive_implied_promises(&parent, &[], || unreachable!()).is_empty());
    }

    #[test]
    fn offers() {
        let d = PromiseDraft::new(agent("A"), agent("B"), [agent("B")], PromiseBody::opaque("production task for X"));
        let mut offer = make_offer("O1", d, "B accepts third-party validation").unwrap();
        let ids = || (PromiseId("P1".into()), PromiseId("P2".into()));
        assert!(matches!(accept_offer(&mut offer, &agent("C"), 1, ids()), Err(PromiseError::NotPromisee { .. })));
        let (offered, usage) = accept_offer(&mut offer, &agent("B"), 2, ids()).unwrap();
        assert_eq!(offered.promiser, agent("A"));
        assert_eq!(usage.promiser, agent("B"));
        assert_eq!(usage.promisee, agent("A"));
        assert_eq!(accept_offer(&mut offer, &agent("B"), 3, ids()), Err(PromiseError::AlreadyAccepted("O1".into())));
    }

    #[test]
    fn underlying_intention_is_not_serialized() {
        let mut d = draft(&["B"]);
        d.underlying_intention = Some("SECRET-PLAN".into());
        let (rec, _) = issue_promise(PromiseId("P1".into()), d, 0, &ErosionPolicy::default()).unwrap();
        assert_eq!(rec.classification, IntentionClass::Deceptive);
        let json = serde_json::to_string(&rec).unwrap();
        assert!(!json.contains("SECRET-PLAN"));
        assert!(!json.contains("deceptive"));
    }
}
