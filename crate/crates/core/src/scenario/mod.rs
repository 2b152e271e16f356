//! Scenario scripts: a line-oriented DSL, a deterministic discrete-event
//! engine over the promise, decision and assessment operations, the trace
//! it produces, and a summary report.

mod engine;
mod parse;
mod report;
mod trace;

use std::collections::{BTreeMap, BTreeSet};

use crate::assessment::{PlanningRule, TrustParams, VerdictStatus};
use crate::decision::IdoccId;
use crate::event::{Event, EventPattern};
use crate::promise::{AgentId, ErosionPolicy, ImplicationRule, PromiseBody, PromiseDraft, PromiseId, Time};
use crate::tuplix::{Account, Substitution, Tuplix};
use crate::Rational;

pub use engine::{run, run_with, RunOptions};
pub use parse::{parse_scenario, parse_scenario_with, ScenarioError, ScenarioErrorKind};
pub use report::{report, CreepSummary, ErosionStats, ObligationEntry, Summary, TrustEntry, VerdictEntry};
pub use trace::{Origin, Partition, Record, RecordRef, Trace};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub trust: TrustParams,
    pub initial_trust: Rational,
    pub erosion: ErosionPolicy,
    pub seed: u64,
    /// Last tick; defaults to the last scripted time.
    pub end: Option<Time>,
}

impl Default for Config {
    fn default() -> Config {
        Config {
            trust: TrustParams::default(),
            initial_trust: Rational::new(1, 2),
            erosion: ErosionPolicy::default(),
            seed: 0,
            end: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromiseSpec {
    pub id: Option<PromiseId>,
    pub draft: PromiseDraft,
    pub silent: bool,
    pub implied_by: Option<PromiseId>,
    /// Combine with a promissory decision by the promiser.
    pub promissory: bool,
    /// Issued by the promiser to itself and kept private.
    pub internal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecideSpec {
    pub id: Option<String>,
    pub decider: AgentId,
    pub role: String,
    pub actor: Option<AgentId>,
    pub internal: bool,
    pub trigger: Option<EventPattern>,
    pub promissory: bool,
    pub deactivates: Option<IdoccId>,
    pub content: PromiseBody,
    pub jurisdiction: BTreeSet<AgentId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OfferSpec {
    pub id: Option<String>,
    pub draft: PromiseDraft,
    pub condition: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Observation {
    Binding { var: String, value: Rational },
    Account(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptAction {
    Promise(Box<PromiseSpec>),
    Decide(Box<DecideSpec>),
    Offer(Box<OfferSpec>),
    Accept {
        offer: String,
        by: AgentId,
    },
    Event(Event),
    Observe(Observation),
    Verdict {
        promise: PromiseId,
        status: VerdictStatus,
        degree: Rational,
        by: Option<AgentId>,
    },
    /// Erases the agent's memory apart from its loaded internal decisions.
    Forget(AgentId),
    Tick,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scripted {
    pub time: Time,
    pub line: usize,
    pub action: ScriptAction,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Scenario {
    pub agents: BTreeSet<AgentId>,
    pub actions: Vec<Scripted>,
    pub implication_rules: Vec<ImplicationRule>,
    pub planning_rules: Vec<PlanningRule>,
    pub config: Config,
    pub budgets: BTreeMap<String, Tuplix>,
    pub substitutions: BTreeMap<String, Substitution>,
    pub accounts: BTreeMap<String, Account>,
    /// Identifiers given with `as`; generated ones skip these.
    pub reserved_ids: BTreeSet<String>,
}
