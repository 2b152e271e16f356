use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;
use serde_json::{json, Value};

use super::trace::{Origin, Partition, RecordRef, Trace};
use super::{DecideSpec, Observation, OfferSpec, PromiseSpec, Scenario, ScriptAction};
use crate::assessment::{
    assess_weighted, derive_expectations, generate_method, plan_next, spawn_reasoning, update_trust_weighted, AssessmentMethod, Condition,
    Evidence, Expectation, ManualVerdict, PlannedAction, PlanningView, TrustError, TrustLedger, TrustParams, Verdict,
    VerdictStatus,
};
use crate::decision::{
    combine_promise_with_promissory_decision, deactivate_idocc, take_decision, take_internal_decision,
    take_promissory_decision, trigger_idocc, Action, DecisionId, Idocc, IdoccId, Obligation, PromissoryDecision,
    PromissoryOutcome,
};
use crate::event::Event;
use crate::par::Execution;
use crate::promise::{
    accept_offer, derive_implied_promises, distribute, erosion_factor, issue_with_kind, make_offer, AgentId,
    BudgetRef, ConditionalPromise, IdSource, OutcomeInstance, PromiseId, PromiseKind, PromiseRecord, Time,
};
use crate::tuplix::{instantiate, Account, Tuplix};
use crate::Rational;

/// Overrides applied on top of the scenario configuration.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub alpha: Option<Rational>,
    pub beta: Option<Rational>,
    pub execution: Execution,
}

pub fn run(scenario: &Scenario) -> Trace {
    Engine::new(scenario, scenario.config.trust.clone(), Execution::default()).run()
}

pub fn run_with(scenario: &Scenario, options: &RunOptions) -> Result<Trace, TrustError> {
    let cfg = &scenario.config.trust;
    let params = TrustParams::new(
        options.alpha.clone().unwrap_or_else(|| cfg.alpha().clone()),
        options.beta.clone().unwrap_or_else(|| cfg.beta().clone()),
    )?;
    Ok(Engine::new(scenario, params, options.execution).run())
}

fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("engine payloads serialize")
}

fn partition(private: bool) -> Partition {
    if private {
        Partition::Private
    } else {
        Partition::Public
    }
}

struct PromiseEntry {
    record: PromiseRecord,
    private: bool,
    at: RecordRef,
}

struct Live {
    instance: OutcomeInstance,
    promiser: AgentId,
    method: AssessmentMethod,
    expectations: Vec<Expectation>,
    confidence: Rational,
    status: VerdictStatus,
    degree: Option<Rational>,
    settled: bool,
    dropped: bool,
    forgotten: bool,
    private: bool,
    at: RecordRef,
}

impl Live {
    fn active(&self) -> bool {
        !self.dropped && !self.forgotten
    }
}

enum Consequence {
    Issued(PromiseId),
    Notify {
        decision: DecisionId,
        agents: Vec<AgentId>,
        cause: RecordRef,
    },
    Oblige {
        obligation: Obligation,
        private: bool,
        cause: RecordRef,
    },
    Triggers {
        event: Event,
        cause: RecordRef,
    },
}

struct ManualEntry {
    time: Time,
    promise: PromiseId,
    by: Option<AgentId>,
    verdict: ManualVerdict,
}

struct View<'a> {
    scenario: &'a Scenario,
    events: &'a [(Time, Event, RecordRef)],
    bindings: &'a [(Time, String, Rational)],
    accounts: &'a [(Time, String)],
    manual: &'a [ManualEntry],
}

impl View<'_> {
    fn resolve(&self, r: &BudgetRef) -> Option<Tuplix> {
        match r {
            BudgetRef::Named(n) => self.scenario.budgets.get(n).cloned(),
            BudgetRef::Apply { subst, inner } => {
                instantiate(&self.resolve(inner)?, self.scenario.substitutions.get(subst)?).ok()
            }
        }
    }
}

impl Evidence for View<'_> {
    fn events_until(&self, now: Time) -> Vec<(Time, &Event)> {
        self.events
            .iter()
            .take_while(|(t, _, _)| *t <= now)
            .map(|(t, e, _)| (*t, e))
            .collect()
    }

    fn binding(&self, var: &str, now: Time) -> Option<Rational> {
        self.bindings
            .iter()
            .rev()
            .find(|(t, v, _)| *t <= now && v == var)
            .map(|(_, _, r)| r.clone())
    }

    fn account(&self, now: Time) -> Option<&Account> {
        let name = self.accounts.iter().rev().find(|(t, _)| *t <= now)?;
        self.scenario.accounts.get(&name.1)
    }

    fn manual_verdict(&self, observer: &AgentId, promise: &PromiseId, now: Time) -> Option<ManualVerdict> {
        self.manual
            .iter()
            .rev()
            .find(|m| m.time <= now && &m.promise == promise && m.by.as_ref().is_none_or(|b| b == observer))
            .map(|m| m.verdict.clone())
    }

    fn budget(&self, reference: &BudgetRef) -> Option<Tuplix> {
        self.resolve(reference)
    }
}

struct Engine<'s> {
    sc: &'s Scenario,
    params: TrustParams,
    exec: Execution,
    trace: Trace,
    now: Time,
    promise_ids: IdSource,
    decision_ids: IdSource,
    idocc_ids: IdSource,
    offer_ids: IdSource,
    promises: BTreeMap<PromiseId, PromiseEntry>,
    instances: Vec<Live>,
    idoccs: Vec<(Idocc, RecordRef)>,
    offers: BTreeMap<String, (ConditionalPromise, RecordRef)>,
    ledger: TrustLedger,
    trust_refs: BTreeMap<(AgentId, AgentId), RecordRef>,
    events: Vec<(Time, Event, RecordRef)>,
    bindings: Vec<(Time, String, Rational)>,
    accounts: Vec<(Time, String)>,
    manual: Vec<ManualEntry>,
    verdicts: BTreeMap<(AgentId, PromiseId), (VerdictStatus, RecordRef)>,
    issued: BTreeMap<PromiseId, RecordRef>,
    decided: BTreeMap<DecisionId, RecordRef>,
    fired: BTreeSet<usize>,
    planned: Vec<(Time, AgentId, PlannedAction, RecordRef)>,
    refusals: BTreeSet<(AgentId, AgentId)>,
    queue: VecDeque<Consequence>,
}

impl<'s> Engine<'s> {
    fn new(sc: &'s Scenario, params: TrustParams, exec: Execution) -> Engine<'s> {
        Engine {
            sc,
            params,
            exec,
            trace: Trace::new(),
            now: 0,
            promise_ids: IdSource::new("P"),
            decision_ids: IdSource::new("D"),
            idocc_ids: IdSource::new("I"),
            offer_ids: IdSource::new("O"),
            promises: BTreeMap::new(),
            instances: Vec::new(),
            idoccs: Vec::new(),
            offers: BTreeMap::new(),
            ledger: TrustLedger::new(sc.config.initial_trust.clone()).unwrap_or_default(),
            trust_refs: BTreeMap::new(),
            events: Vec::new(),
            bindings: Vec::new(),
            accounts: Vec::new(),
            manual: Vec::new(),
            verdicts: BTreeMap::new(),
            issued: BTreeMap::new(),
            decided: BTreeMap::new(),
            fired: BTreeSet::new(),
            planned: Vec::new(),
            refusals: BTreeSet::new(),
            queue: VecDeque::new(),
        }
    }

    fn fresh(&self, source: &mut IdSource) -> String {
        loop {
            let id = source.next_id();
            if !self.sc.reserved_ids.contains(&id) {
                return id;
            }
        }
    }

    fn next_promise_id(&mut self) -> PromiseId {
        let mut src = self.promise_ids.clone();
        let id = self.fresh(&mut src);
        self.promise_ids = src;
        PromiseId(id)
    }

    fn next_id(&mut self, which: char) -> String {
        let mut src = match which {
            'D' => self.decision_ids.clone(),
            'I' => self.idocc_ids.clone(),
            _ => self.offer_ids.clone(),
        };
        let id = self.fresh(&mut src);
        match which {
            'D' => self.decision_ids = src,
            'I' => self.idocc_ids = src,
            _ => self.offer_ids = src,
        }
        id
    }

    fn emit(&mut self, part: Partition, cause: Option<RecordRef>, kind: &'static str, payload: Value) -> RecordRef {
        self.trace.push(self.now, part, Origin::Engine, cause, kind, payload, None)
    }

    fn script(&mut self, part: Partition, index: usize, kind: &'static str, payload: Value) -> RecordRef {
        self.trace.push(self.now, part, Origin::Script, None, kind, payload, Some(index))
    }

    fn error(&mut self, part: Partition, cause: Option<RecordRef>, message: String) {
        self.emit(part, cause, "error", json!({ "message": message }));
    }

    fn last_time(&self) -> Time {
        let scripted = self.sc.actions.last().map_or(0, |a| a.time);
        self.sc.config.end.unwrap_or(scripted)
    }

    fn run(mut self) -> Trace {
        let seed = self.sc.config.seed;
        self.emit(
            Partition::Public,
            None,
            "run",
            json!({ "seed": seed, "run_id": format!("{:016x}", splitmix64(seed)) }),
        );
        let end = self.last_time();
        let mut next_action = 0;
        let mut t = 0;
        loop {
            let pending_plans = self.planned.iter().any(|p| p.0 >= t);
            let pending_script = next_action < self.sc.actions.len();
            if t > end && !pending_plans && !pending_script {
                break;
            }
            self.now = t;
            while next_action < self.sc.actions.len() && self.sc.actions[next_action].time == t {
                self.scripted(next_action);
                next_action += 1;
            }
            self.planned_actions();
            self.drain();
            self.erode();
            self.assess();
            self.plan();
            t += 1;
        }
        self.finish();
        self.trace
    }

    fn scripted(&mut self, index: usize) {
        let action = &self.sc.actions[index].action;
        match action {
            ScriptAction::Promise(spec) => self.scripted_promise(index, spec),
            ScriptAction::Decide(spec) => self.scripted_decision(index, spec),
            ScriptAction::Offer(spec) => self.scripted_offer(index, spec),
            ScriptAction::Accept { offer, by } => self.scripted_accept(index, offer, by),
            ScriptAction::Event(event) => {
                let at = self.script(Partition::Public, index, "event", to_value(event));
                self.events.push((self.now, event.clone(), at));
                self.queue.push_back(Consequence::Triggers {
                    event: event.clone(),
                    cause: at,
                });
            }
            ScriptAction::Observe(Observation::Binding { var, value }) => {
                self.script(Partition::Public, index, "observe", json!({ "var": var, "value": value }));
                self.bindings.push((self.now, var.clone(), value.clone()));
            }
            ScriptAction::Observe(Observation::Account(name)) => {
                let acc = &self.sc.accounts[name];
                self.script(
                    Partition::Public,
                    index,
                    "observe",
                    json!({ "account": name, "entries": acc.entries(), "net": acc.net_result() }),
                );
                self.accounts.push((self.now, name.clone()));
            }
            ScriptAction::Verdict {
                promise,
                status,
                degree,
                by,
            } => {
                let at = self.script(
                    Partition::Public,
                    index,
                    "verdict_event",
                    json!({ "promise": promise, "status": status, "degree": degree, "by": by }),
                );
                if !self.promises.contains_key(promise) {
                    self.error(Partition::Public, Some(at), format!("verdict on unknown promise {promise}"));
                    return;
                }
                self.manual.push(ManualEntry {
                    time: self.now,
                    promise: promise.clone(),
                    by: by.clone(),
                    verdict: ManualVerdict {
                        status: *status,
                        degree: degree.clone(),
                    },
                });
            }
            ScriptAction::Forget(agent) => {
                self.script(Partition::Private, index, "forget", json!({ "agent": agent }));
                for live in self.instances.iter_mut().filter(|l| &l.instance.holder == agent) {
                    live.forgotten = true;
                }
            }
            ScriptAction::Tick => {
                self.script(Partition::Public, index, "tick", json!({}));
            }
        }
    }

    fn promise_payload(record: &PromiseRecord, extra: Value) -> Value {
        let mut v = to_value(record);
        if let (Value::Object(map), Value::Object(more)) = (&mut v, extra) {
            map.extend(more);
        }
        v
    }

    fn scripted_promise(&mut self, index: usize, spec: &PromiseSpec) {
        let id = spec.id.clone().unwrap_or_else(|| self.next_promise_id());
        let part = partition(spec.internal);
        let kind = match (&spec.implied_by, spec.silent) {
            (Some(parent), silent) => PromiseKind::Implied {
                parent: parent.clone(),
                silent,
            },
            (None, true) => PromiseKind::Silent,
            (None, false) => PromiseKind::Explicit,
        };
        if spec.promissory {
            let did = DecisionId(self.next_id('D'));
            let combined = combine_promise_with_promissory_decision(
                id.clone(),
                did.clone(),
                spec.draft.clone(),
                self.now,
                &self.sc.config.erosion,
            );
            match combined {
                Ok(mut c) => {
                    c.promise.kind = kind;
                    let at = self.script(part, index, "promise", Self::promise_payload(&c.promise, json!({ "promissory": true })));
                    let dat = self.emit(part, Some(at), "decision", to_value(&c.decision));
                    self.decided.insert(did.clone(), dat);
                    self.register_promise(c.promise, spec.internal, at);
                    self.queue.push_back(Consequence::Notify {
                        decision: did,
                        agents: c.notifications.into_iter().map(|n| n.agent).collect(),
                        cause: dat,
                    });
                    self.queue.push_back(Consequence::Oblige {
                        obligation: c.obligation,
                        private: spec.internal,
                        cause: dat,
                    });
                    self.queue.push_back(Consequence::Issued(id));
                }
                Err(e) => {
                    let at = self.script(part, index, "promise", json!({ "id": id, "rejected": true }));
                    self.error(part, Some(at), e.to_string());
                }
            }
            return;
        }
        match issue_with_kind(id.clone(), spec.draft.clone(), self.now, kind, &self.sc.config.erosion) {
            Ok((record, _)) => {
                let at = self.script(part, index, "promise", Self::promise_payload(&record, json!({})));
                self.register_promise(record, spec.internal, at);
                self.queue.push_back(Consequence::Issued(id));
            }
            Err(e) => {
                let at = self.script(part, index, "promise", json!({ "id": id, "rejected": true }));
                self.error(part, Some(at), e.to_string());
            }
        }
    }

    fn register_promise(&mut self, record: PromiseRecord, private: bool, at: RecordRef) {
        if !private {
            self.issued.insert(record.id.clone(), at);
        }
        self.promises.insert(record.id.clone(), PromiseEntry { record, private, at });
    }

    fn scripted_decision(&mut self, index: usize, spec: &DecideSpec) {
        let part = partition(spec.internal);
        if spec.internal {
            let id = spec.id.clone().unwrap_or_else(|| self.next_id('I'));
            let (idocc, obligation) = if spec.promissory {
                let decision = PromissoryDecision {
                    decider: spec.decider.clone(),
                    role: spec.role.clone(),
                    content: spec.content.clone(),
                    jurisdiction: BTreeSet::new(),
                    actor: spec.actor.clone().unwrap_or_else(|| spec.decider.clone()),
                    trigger: spec.trigger.clone(),
                    internal: true,
                };
                match take_promissory_decision(id.clone(), decision, self.now) {
                    Ok((PromissoryOutcome::Internal(i), ob)) => (i, Some(ob)),
                    Ok(_) => unreachable!("internal promissory decision yields an idocc"),
                    Err(e) => {
                        let at = self.script(part, index, "idocc_loaded", json!({ "id": id, "rejected": true }));
                        self.error(part, Some(at), e.to_string());
                        return;
                    }
                }
            } else {
                let i = take_internal_decision(
                    IdoccId(id.clone()),
                    spec.decider.clone(),
                    spec.content.clone(),
                    spec.trigger.clone(),
                    self.now,
                );
                (i, None)
            };
            let mut payload = to_value(&idocc);
            payload["promissory"] = json!(spec.promissory);
            let at = self.script(part, index, "idocc_loaded", payload);
            self.idoccs.push((idocc, at));
            if let Some(obligation) = obligation {
                self.queue.push_back(Consequence::Oblige {
                    obligation,
                    private: true,
                    cause: at,
                });
            }
            self.deactivation(spec, at);
            return;
        }

        let id = spec.id.clone().unwrap_or_else(|| self.next_id('D'));
        let (outcome, notes, obligation) = if spec.promissory {
            let decision = PromissoryDecision {
                decider: spec.decider.clone(),
                role: spec.role.clone(),
                content: spec.content.clone(),
                jurisdiction: spec.jurisdiction.clone(),
                actor: spec.actor.clone().unwrap_or_else(|| spec.decider.clone()),
                trigger: None,
                internal: false,
            };
            match take_promissory_decision(id.clone(), decision, self.now) {
                Ok((PromissoryOutcome::External { outcome, notifications }, ob)) => (outcome, notifications, Some(ob)),
                Ok(_) => unreachable!("external promissory decision yields an outcome"),
                Err(e) => {
                    let at = self.script(part, index, "decision", json!({ "id": id, "rejected": true }));
                    self.error(part, Some(at), e.to_string());
                    return;
                }
            }
        } else {
            let (o, n) = take_decision(
                DecisionId(id.clone()),
                spec.decider.clone(),
                spec.role.clone(),
                spec.content.clone(),
                spec.jurisdiction.clone(),
                self.now,
            );
            (o, n, None)
        };
        let mut payload = to_value(&outcome);
        payload["promissory"] = json!(spec.promissory);
        let at = self.script(part, index, "decision", payload);
        self.decided.insert(outcome.id.clone(), at);
        self.queue.push_back(Consequence::Notify {
            decision: outcome.id.clone(),
            agents: notes.into_iter().map(|n| n.agent).collect(),
            cause: at,
        });
        if let Some(obligation) = obligation {
            self.queue.push_back(Consequence::Oblige {
                obligation,
                private: false,
                cause: at,
            });
        }
        self.deactivation(spec, at);
    }

    fn deactivation(&mut self, spec: &DecideSpec, cause: RecordRef) {
        let Some(target) = &spec.deactivates else { return };
        let Some(pos) = self.idoccs.iter().position(|(i, _)| &i.id == target) else {
            self.error(Partition::Private, Some(cause), format!("unknown idocc {target}"));
            return;
        };
        match deactivate_idocc(&self.idoccs[pos].0, &spec.decider) {
            Ok(next) => {
                self.emit(
                    Partition::Private,
                    Some(cause),
                    "idocc_deactivated",
                    json!({ "idocc": next.id, "owner": next.owner }),
                );
                self.idoccs[pos].0 = next;
            }
            Err(e) => self.error(Partition::Private, Some(cause), e.to_string()),
        }
    }

    fn scripted_offer(&mut self, index: usize, spec: &OfferSpec) {
        let id = spec.id.clone().unwrap_or_else(|| self.next_id('O'));
        match make_offer(id.clone(), spec.draft.clone(), spec.condition.clone()) {
            Ok(offer) => {
                let at = self.script(
                    Partition::Public,
                    index,
                    "offer",
                    json!({
                        "id": id,
                        "promiser": offer.draft.promiser,
                        "promisee": offer.draft.promisee,
                        "scope": offer.draft.scope,
                        "body": offer.draft.body,
                        "condition": offer.condition,
                    }),
                );
                self.offers.insert(id, (offer, at));
            }
            Err(e) => {
                let at = self.script(Partition::Public, index, "offer", json!({ "id": id, "rejected": true }));
                self.error(Partition::Public, Some(at), e.to_string());
            }
        }
    }

    fn scripted_accept(&mut self, index: usize, offer_id: &str, by: &AgentId) {
        let at = self.script(Partition::Public, index, "accept", json!({ "offer": offer_id, "by": by }));
        let Some((offer, _)) = self.offers.get(offer_id) else {
            self.error(Partition::Public, Some(at), format!("unknown offer {offer_id}"));
            return;
        };
        if self.refusals.contains(&(by.clone(), offer.draft.promiser.clone())) {
            self.emit(
                Partition::Public,
                Some(at),
                "offer_refused",
                json!({ "offer": offer_id, "by": by, "from": offer.draft.promiser }),
            );
            return;
        }
        let ids = (self.next_promise_id(), self.next_promise_id());
        let (mut offer, oat) = self.offers.remove(offer_id).expect("offer present");
        let result = accept_offer(&mut offer, by, self.now, ids);
        self.offers.insert(offer_id.to_string(), (offer, oat));
        match result {
            Ok((offered, usage)) => {
                for record in [offered, usage] {
                    let id = record.id.clone();
                    let pat = self.emit(Partition::Public, Some(at), "promise", Self::promise_payload(&record, json!({})));
                    self.register_promise(record, false, pat);
                    self.queue.push_back(Consequence::Issued(id));
                }
            }
            Err(e) => self.error(Partition::Public, Some(at), e.to_string()),
        }
    }

    fn planned_actions(&mut self) {
        let now = self.now;
        let (due, later): (Vec<_>, Vec<_>) = std::mem::take(&mut self.planned).into_iter().partition(|p| p.0 == now);
        self.planned = later;
        for (_, agent, action, cause) in due {
            let part = cause.partition;
            match action {
                PlannedAction::Perform { content } => {
                    self.emit(part, Some(cause), "perform", json!({ "actor": agent, "content": content }));
                }
                PlannedAction::Emit { mut event } => {
                    event.fields.entry("by".into()).or_insert_with(|| agent.to_string());
                    let at = self.emit(part, Some(cause), "event", to_value(&event));
                    if part == Partition::Public {
                        self.events.push((now, event.clone(), at));
                    }
                    self.queue.push_back(Consequence::Triggers { event, cause: at });
                }
                PlannedAction::RefuseOffersFrom { agent: from } => {
                    self.emit(part, Some(cause), "refusal", json!({ "agent": agent, "refuses_offers_from": from }));
                    self.refusals.insert((agent, from));
                }
            }
        }
    }

    fn drain(&mut self) {
        while let Some(c) = self.queue.pop_front() {
            match c {
                Consequence::Issued(id) => self.distribute(&id),
                Consequence::Notify { decision, agents, cause } => {
                    for agent in agents {
                        self.emit(cause.partition, Some(cause), "notice", json!({ "agent": agent, "decision": decision }));
                    }
                }
                Consequence::Oblige {
                    obligation,
                    private,
                    cause,
                } => {
                    self.emit(partition(private), Some(cause), "obligation", to_value(&obligation));
                }
                Consequence::Triggers { event, cause } => self.triggers(&event, cause),
            }
        }
    }

    fn distribute(&mut self, id: &PromiseId) {
        let entry = &self.promises[id];
        let (record, private, at) = (entry.record.clone(), entry.private, entry.at);
        let part = partition(private);
        self.emit(
            Partition::Private,
            Some(at),
            "intention",
            json!({ "promise": record.id, "classification": record.classification, "memorized": private }),
        );
        // an internally issued promise is only memorized by its promiser
        if private {
            return;
        }
        for inst in distribute(&record, &self.sc.config.erosion) {
            let iat = self.emit(part, Some(at), "instance", to_value(&inst));
            let holder_rules = self.sc.planning_rules.iter().filter(|r| r.agent == inst.holder).count();
            for proc in spawn_reasoning(&inst, &record.body, &record.promiser, &self.ledger, holder_rules) {
                self.emit(part, Some(iat), "reasoning", to_value(&proc));
            }
            self.instances.push(Live {
                method: generate_method(&inst, &record.body),
                expectations: derive_expectations(&inst, &record.body),
                promiser: record.promiser.clone(),
                confidence: inst.confidence.clone(),
                instance: inst,
                status: VerdictStatus::Pending,
                degree: None,
                settled: false,
                dropped: false,
                forgotten: false,
                private,
                at: iat,
            });
        }
        if matches!(record.kind, PromiseKind::Implied { .. }) {
            return;
        }
        let mut ids = Vec::new();
        let rules = &self.sc.implication_rules;
        let needed: usize = rules.iter().map(|r| r.match_count(&record.body)).sum();
        for _ in 0..needed {
            ids.push(self.next_promise_id());
        }
        let mut it = ids.into_iter();
        let implied = derive_implied_promises(&record, rules, || it.next().expect("enough ids"));
        for child in implied {
            let cid = child.id.clone();
            let cat = self.emit(part, Some(at), "promise", Self::promise_payload(&child, json!({})));
            self.register_promise(child, private, cat);
            self.queue.push_back(Consequence::Issued(cid));
        }
    }

    fn triggers(&mut self, event: &Event, cause: RecordRef) {
        for i in 0..self.idoccs.len() {
            let (next, actions) = trigger_idocc(&self.idoccs[i].0, event);
            if actions.is_empty() {
                continue;
            }
            self.emit(
                Partition::Private,
                Some(cause),
                "idocc_effectuated",
                json!({ "idocc": next.id, "owner": next.owner }),
            );
            self.idoccs[i].0 = next;
            for action in actions {
                match action {
                    Action::Perform { actor, content } => {
                        self.emit(cause.partition, Some(cause), "perform", json!({ "actor": actor, "content": content }));
                    }
                    Action::Emit { event, .. } => {
                        let at = self.emit(cause.partition, Some(cause), "event", to_value(&event));
                        if cause.partition == Partition::Public {
                            self.events.push((self.now, event.clone(), at));
                        }
                        self.queue.push_back(Consequence::Triggers { event, cause: at });
                    }
                }
            }
        }
    }

    fn erode(&mut self) {
        let threshold = self.sc.config.erosion.drop_threshold.clone();
        let now = self.now;
        let mut drops = Vec::new();
        for (i, live) in self.instances.iter_mut().enumerate().filter(|(_, l)| l.active()) {
            let dt = now - live.instance.received_time;
            live.confidence = &live.instance.confidence * &erosion_factor(dt, &live.instance.half_life);
            if live.confidence < threshold {
                live.dropped = true;
                drops.push(i);
            }
        }
        for i in drops {
            let live = &self.instances[i];
            let payload = json!({
                "promise": live.instance.promise_id,
                "holder": live.instance.holder,
                "confidence": live.confidence,
            });
            self.emit(partition(live.private), Some(live.at), "instance_dropped", payload);
        }
    }

    fn assess(&mut self) {
        let now = self.now;
        let view = View {
            scenario: self.sc,
            events: &self.events,
            bindings: &self.bindings,
            accounts: &self.accounts,
            manual: &self.manual,
        };
        let open: Vec<usize> = (0..self.instances.len())
            .filter(|&i| self.instances[i].active() && !self.instances[i].settled)
            .collect();
        let instances = &self.instances;
        let results = self.exec.map(&open, |&i| assess_weighted(&instances[i].method, &view, now));
        for (i, (verdict, weight)) in open.into_iter().zip(results) {
            if verdict.status() == self.instances[i].status {
                continue;
            }
            self.record_verdict(i, verdict, weight);
        }
    }

    fn record_verdict(&mut self, i: usize, verdict: Verdict, weight: Rational) {
        let live = &mut self.instances[i];
        live.status = verdict.status();
        live.degree = verdict.degree().cloned();
        live.settled = verdict.status() != VerdictStatus::Pending;
        let (holder, promiser, pid) = (live.instance.holder.clone(), live.promiser.clone(), live.instance.promise_id.clone());
        let (part, cause) = (partition(live.private), live.at);
        let vat = self.emit(
            part,
            Some(cause),
            "verdict",
            json!({ "promise": pid, "observer": holder, "verdict": verdict, "weight": weight }),
        );
        self.verdicts.insert((holder.clone(), pid), (verdict.status(), vat));
        if !self.instances[i].settled || holder == promiser {
            return;
        }
        let before = self.ledger.trust(&holder, &promiser);
        self.ledger = update_trust_weighted(&self.ledger, &holder, &promiser, &verdict, &weight, &self.params);
        let after = self.ledger.trust(&holder, &promiser);
        let tat = self.emit(
            part,
            Some(vat),
            "trust",
            json!({ "observer": holder, "promiser": promiser, "before": before, "after": after }),
        );
        if part == Partition::Public {
            self.trust_refs.insert((holder, promiser), tat);
        }
    }

    fn witness(&self, agent: &AgentId, c: &Condition) -> Option<RecordRef> {
        match c {
            Condition::Trust { promiser, .. } => self.trust_refs.get(&(agent.clone(), promiser.clone())).copied(),
            Condition::Holds { promise } => self
                .instances
                .iter()
                .find(|l| &l.instance.holder == agent && &l.instance.promise_id == promise)
                .map(|l| l.at),
            Condition::Expects { text } => self
                .instances
                .iter()
                .find(|l| &l.instance.holder == agent && l.expectations.iter().any(|e| e.proposition.contains(text.as_str())))
                .map(|l| l.at),
            Condition::Observed { pattern } => self.events.iter().find(|(_, e, _)| pattern.matches(e)).map(|x| x.2),
            Condition::Verdict { promise, .. } => self.verdicts.get(&(agent.clone(), promise.clone())).map(|v| v.1),
            Condition::Issued { promise } => self.issued.get(promise).copied(),
            Condition::Decided { decision } => self.decided.get(decision).copied(),
        }
    }

    fn plan(&mut self) {
        let rules = &self.sc.planning_rules;
        if rules.is_empty() {
            return;
        }
        let held: Vec<OutcomeInstance> = self
            .instances
            .iter()
            .filter(|l| l.active())
            .map(|l| l.instance.clone())
            .collect();
        let expectations: Vec<Expectation> = self
            .instances
            .iter()
            .filter(|l| l.active())
            .flat_map(|l| l.expectations.iter().cloned())
            .collect();
        let events: Vec<Event> = self.events.iter().map(|(_, e, _)| e.clone()).collect();
        let verdicts: BTreeMap<(AgentId, PromiseId), VerdictStatus> =
            self.verdicts.iter().map(|(k, v)| (k.clone(), v.0)).collect();
        let issued: BTreeSet<PromiseId> = self.issued.keys().cloned().collect();
        let decided: BTreeSet<DecisionId> = self.decided.keys().cloned().collect();
        let mut fires = Vec::new();
        for agent in &self.sc.agents {
            let view = PlanningView {
                instances: &held,
                expectations: &expectations,
                ledger: &self.ledger,
                events: &events,
                verdicts: &verdicts,
                issued: &issued,
                decided: &decided,
            };
            for (idx, action) in plan_next(agent, &view, rules, &self.fired) {
                let cause = rules[idx]
                    .conditions
                    .iter()
                    .filter_map(|c| self.witness(agent, c))
                    .max_by_key(|r| self.trace.position(*r));
                fires.push((agent.clone(), idx, action, cause));
            }
        }
        for (agent, idx, action, cause) in fires {
            self.fired.insert(idx);
            let part = cause.map_or(Partition::Public, |c| c.partition);
            let at = self.emit(
                part,
                cause,
                "plan",
                json!({ "agent": agent, "rule": idx, "action": action, "at": self.now + 1 }),
            );
            self.planned.push((self.now + 1, agent, action, at));
        }
    }

    fn finish(&mut self) {
        for i in 0..self.instances.len() {
            let live = &self.instances[i];
            let payload = json!({
                "promise": live.instance.promise_id,
                "holder": live.instance.holder,
                "promiser": live.promiser,
                "method": method_name(&live.method),
                "status": live.status,
                "degree": live.degree,
                "confidence": live.confidence,
                "dropped": live.dropped,
                "forgotten": live.forgotten,
            });
            self.emit(partition(live.private), Some(live.at), "instance_state", payload);
        }
        let ledger = to_value(&self.ledger);
        self.emit(Partition::Public, None, "ledger", json!({ "trust": ledger, "initial": self.ledger.initial() }));
    }
}

fn method_name(m: &AssessmentMethod) -> &'static str {
    use crate::assessment::MethodKind::*;
    match m.kind {
        DeadlineEvent { .. } => "deadline_event",
        MeadowCheck { .. } => "meadow_check",
        BudgetConformance { .. } => "budget_conformance",
        ManualObservation => "manual_observation",
    }
}
