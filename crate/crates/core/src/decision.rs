//! Decisions: tangible outcomes notified to a jurisdiction, internalized
//! decisions (Idoccs) that wait for a trigger, and obligations, which only
//! promissory decisions can create.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::event::{Event, EventPattern};
use crate::promise::{
    issue_promise, AgentId, ErosionPolicy, OutcomeInstance, PromiseBody, PromiseDraft, PromiseError, PromiseId,
    PromiseRecord, Quality, Time,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecisionError {
    #[error("`{decider}` may not deactivate idocc {idocc} owned by `{owner}`")]
    Permission {
        decider: AgentId,
        owner: AgentId,
        idocc: IdoccId,
    },
    #[error("idocc {idocc} is {state}, expected loaded")]
    State { idocc: IdoccId, state: IdoccState },
    #[error("a promissory decision by `{decider}` cannot oblige `{actor}` to act")]
    ForeignActor { decider: AgentId, actor: AgentId },
    #[error(transparent)]
    Promise(#[from] PromiseError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct DecisionId(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct IdoccId(pub String);

impl fmt::Display for DecisionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for IdoccId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A decision outcome. It is always a tangible object, which is why a
/// decision can have a jurisdiction but never a scope.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecisionOutcome {
    pub id: DecisionId,
    pub decider: AgentId,
    pub role: String,
    pub content: PromiseBody,
    pub jurisdiction: BTreeSet<AgentId>,
    pub time: Time,
    pub tangible: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Notification {
    pub agent: AgentId,
    pub decision: DecisionId,
}

pub fn take_decision(
    id: DecisionId,
    decider: AgentId,
    role: impl Into<String>,
    content: PromiseBody,
    jurisdiction: impl IntoIterator<Item = AgentId>,
    time: Time,
) -> (DecisionOutcome, Vec<Notification>) {
    let outcome = DecisionOutcome {
        id,
        decider,
        role: role.into(),
        content,
        jurisdiction: jurisdiction.into_iter().collect(),
        time,
        tangible: true,
    };
    let notes = outcome
        .jurisdiction
        .iter()
        .map(|agent| Notification {
            agent: agent.clone(),
            decision: outcome.id.clone(),
        })
        .collect();
    (outcome, notes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IdoccState {
    Loaded,
    Effectuated,
    Deactivated,
}

impl fmt::Display for IdoccState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IdoccState::Loaded => "loaded",
            IdoccState::Effectuated => "effectuated",
            IdoccState::Deactivated => "deactivated",
        })
    }
}

/// An internal decision outcome, private to its owner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Idocc {
    pub id: IdoccId,
    pub owner: AgentId,
    pub content: PromiseBody,
    pub trigger: Option<EventPattern>,
    pub state: IdoccState,
    pub load_time: Time,
}

pub fn take_internal_decision(
    id: IdoccId,
    owner: AgentId,
    content: PromiseBody,
    trigger: Option<EventPattern>,
    time: Time,
) -> Idocc {
    Idocc {
        id,
        owner,
        content,
        trigger,
        state: IdoccState::Loaded,
        load_time: time,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    Perform { actor: AgentId, content: String },
    Emit { actor: AgentId, event: Event },
}

/// What an agent does to carry out `content`. A transfer becomes a public
/// transfer event; anything else is performed as is.
pub fn effectuate(actor: &AgentId, content: &PromiseBody) -> Action {
    match &content.quality {
        Quality::Transfer(t) => Action::Emit {
            actor: actor.clone(),
            event: Event::new("transfer")
                .with("amount", t.amount.to_string())
                .with("from", t.from.clone())
                .with("to", t.to.clone())
                .with("by", actor.to_string()),
        },
        _ => Action::Perform {
            actor: actor.clone(),
            content: content.to_string(),
        },
    }
}

/// Fires a loaded Idocc whose trigger matches `event`. Anything else is
/// left unchanged with no actions.
pub fn trigger_idocc(idocc: &Idocc, event: &Event) -> (Idocc, Vec<Action>) {
    let fires = idocc.state == IdoccState::Loaded && idocc.trigger.as_ref().is_some_and(|p| p.matches(event));
    if !fires {
        return (idocc.clone(), Vec::new());
    }
    let mut next = idocc.clone();
    next.state = IdoccState::Effectuated;
    (next, vec![effectuate(&idocc.owner, &idocc.content)])
}

/// Only the owner may deactivate, and only a loaded Idocc.
pub fn deactivate_idocc(idocc: &Idocc, decider: &AgentId) -> Result<Idocc, DecisionError> {
    if decider != &idocc.owner {
        return Err(DecisionError::Permission {
            decider: decider.clone(),
            owner: idocc.owner.clone(),
            idocc: idocc.id.clone(),
        });
    }
    if idocc.state != IdoccState::Loaded {
        return Err(DecisionError::State {
            idocc: idocc.id.clone(),
            state: idocc.state,
        });
    }
    let mut next = idocc.clone();
    next.state = IdoccState::Deactivated;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", content = "id", rename_all = "snake_case")]
pub enum ObligationSource {
    PromissoryDecision(DecisionId),
    InternalizedPromissoryDecision(IdoccId),
}

/// A self-obligation of the decider. There is deliberately no public
/// constructor: obligations exist only as the product of a promissory
/// decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Obligation {
    obligor: AgentId,
    content: PromiseBody,
    source: ObligationSource,
}

impl Obligation {
    pub fn obligor(&self) -> &AgentId {
        &self.obligor
    }

    pub fn content(&self) -> &PromiseBody {
        &self.content
    }

    pub fn source(&self) -> &ObligationSource {
        &self.source
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PromissoryOutcome {
    External {
        outcome: DecisionOutcome,
        notifications: Vec<Notification>,
    },
    Internal(Idocc),
}

pub struct PromissoryDecision {
    pub decider: AgentId,
    pub role: String,
    pub content: PromiseBody,
    pub jurisdiction: BTreeSet<AgentId>,
    /// Who the content has act; must be the decider.
    pub actor: AgentId,
    pub trigger: Option<EventPattern>,
    pub internal: bool,
}

/// `id` names the decision outcome, or the Idocc when `internal` is set.
pub fn take_promissory_decision(
    id: String,
    decision: PromissoryDecision,
    time: Time,
) -> Result<(PromissoryOutcome, Obligation), DecisionError> {
    if decision.actor != decision.decider {
        return Err(DecisionError::ForeignActor {
            decider: decision.decider,
            actor: decision.actor,
        });
    }
    let obligor = decision.decider.clone();
    let content = decision.content.clone();
    if decision.internal {
        let id = IdoccId(id);
        let idocc = take_internal_decision(id.clone(), decision.decider, decision.content, decision.trigger, time);
        let ob = Obligation {
            obligor,
            content,
            source: ObligationSource::InternalizedPromissoryDecision(id),
        };
        Ok((PromissoryOutcome::Internal(idocc), ob))
    } else {
        let id = DecisionId(id);
        let (outcome, notifications) = take_decision(
            id.clone(),
            decision.decider,
            decision.role,
            decision.content,
            decision.jurisdiction,
            time,
        );
        let ob = Obligation {
            obligor,
            content,
            source: ObligationSource::PromissoryDecision(id),
        };
        Ok((PromissoryOutcome::External { outcome, notifications }, ob))
    }
}

pub struct Combined {
    pub promise: PromiseRecord,
    pub instances: Vec<OutcomeInstance>,
    pub decision: DecisionOutcome,
    pub notifications: Vec<Notification>,
    pub obligation: Obligation,
}

/// A promise together with a promissory decision by the promiser on the
/// same content, jurisdiction equal to the promise's scope.
pub fn combine_promise_with_promissory_decision(
    promise_id: PromiseId,
    decision_id: DecisionId,
    draft: PromiseDraft,
    time: Time,
    policy: &ErosionPolicy,
) -> Result<Combined, DecisionError> {
    let decision = PromissoryDecision {
        decider: draft.promiser.clone(),
        role: "promiser".into(),
        content: draft.body.clone(),
        jurisdiction: draft.scope.clone(),
        actor: draft.promiser.clone(),
        trigger: None,
        internal: false,
    };
    let (promise, instances) = issue_promise(promise_id, draft, time, policy)?;
    let (outcome, obligation) = take_promissory_decision(decision_id.0, decision, time)?;
    let PromissoryOutcome::External { outcome, notifications } = outcome else {
        unreachable!("external promissory decision")
    };
    Ok(Combined {
        promise,
        instances,
        decision: outcome,
        notifications,
        obligation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::promise::TransferClaim;
    use crate::Rational;

    fn agent(s: &str) -> AgentId {
        AgentId::new(s).unwrap()
    }

    fn transfer() -> PromiseBody {
        PromiseBody::new(Quality::Transfer(TransferClaim {
            amount: Rational::from(5),
            from: "a".into(),
            to: "b".into(),
            confirmations: 1,
        }))
    }

    #[test]
    fn decision_notifies_jurisdiction() {
        let (out, notes) = take_decision(
            DecisionId("D1".into()),
            agent("A"),
            "manager",
            PromiseBody::opaque("hire"),
            [agent("B"), agent("C")],
            2,
        );
        assert!(out.tangible);
        assert_eq!(notes.len(), 2);
        assert!(notes.iter().all(|n| n.decision == out.id));
    }

    #[test]
    fn idocc_lifecycle() {
        let trigger = EventPattern::new("deploy");
        let i = take_internal_decision(IdoccId("I1".into()), agent("A"), transfer(), Some(trigger), 0);
        let (same, none) = trigger_idocc(&i, &Event::new("other"));
        assert_eq!(same, i);
        assert!(none.is_empty());
        let (fired, actions) = trigger_idocc(&i, &Event::new("deploy"));
        assert_eq!(fired.state, IdoccState::Effectuated);
        assert!(matches!(&actions[..], [Action::Emit { event, .. }] if event.kind == "transfer"));
        let (again, none) = trigger_idocc(&fired, &Event::new("deploy"));
        assert_eq!(again.state, IdoccState::Effectuated);
        assert!(none.is_empty());
        assert!(matches!(deactivate_idocc(&fired, &agent("A")), Err(DecisionError::State { .. })));
    }

    #[test]
    fn deactivation_rules() {
        let i = take_internal_decision(IdoccId("I1".into()), agent("A"), PromiseBody::opaque("x"), None, 0);
        assert!(matches!(deactivate_idocc(&i, &agent("B")), Err(DecisionError::Permission { .. })));
        let d = deactivate_idocc(&i, &agent("A")).unwrap();
        assert_eq!(d.state, IdoccState::Deactivated);
        let (still, acts) = trigger_idocc(&d, &Event::new("anything"));
        assert_eq!(still.state, IdoccState::Deactivated);
        assert!(acts.is_empty());
    }

    #[test]
    fn promissory_decisions_oblige_the_decider() {
        let mk = |actor: &str, internal: bool| PromissoryDecision {
            decider: agent("A"),
            role: "payer".into(),
            content: transfer(),
            jurisdiction: [agent("B")].into(),
            actor: agent(actor),
            trigger: Some(EventPattern::new("deploy")),
            internal,
        };
        let (out, ob) = take_promissory_decision("D1".into(), mk("A", false), 1).unwrap();
        assert!(matches!(out, PromissoryOutcome::External { .. }));
        assert_eq!(ob.obligor(), &agent("A"));
        assert_eq!(ob.source(), &ObligationSource::PromissoryDecision(DecisionId("D1".into())));
        let (out, ob) = take_promissory_decision("I1".into(), mk("A", true), 1).unwrap();
        assert!(matches!(out, PromissoryOutcome::Internal(ref i) if i.state == IdoccState::Loaded));
        assert!(matches!(ob.source(), ObligationSource::InternalizedPromissoryDecision(_)));
        assert!(matches!(
            take_promissory_decision("D2".into(), mk("B", false), 1),
            Err(DecisionError::ForeignActor { .. })
        ));
    }

    #[test]
    fn combination_shares_content_and_scope() {
        let draft = PromiseDraft::new(agent("A"), agent("B"), [agent("B"), agent("C")], PromiseBody::opaque("pay"));
        let c = combine_promise_with_promissory_decision(
            PromiseId("P1".into()),
            DecisionId("D1".into()),
            draft,
            3,
            &ErosionPolicy::default(),
        )
        .unwrap();
        assert_eq!(c.promise.body, c.decision.content);
        assert_eq!(c.promise.scope, c.decision.jurisdiction);
        assert_eq!(c.instances.len(), 2);
        assert_eq!(c.notifications.len(), 2);
        assert_eq!(c.obligation.obligor(), &agent("A"));
    }
}
