//! Bundled example scenarios.

use crate::scenario::{parse_scenario, Scenario, ScenarioError};

pub const MONEY_TRANSFER: &str = include_str!("../corpus/money_transfer.scn");
pub const MONEY_TRANSFER_DOUBLE_SPEND: &str = include_str!("../corpus/money_transfer_double_spend.scn");
pub const BUDGET: &str = include_str!("../corpus/budget.scn");
pub const MEADOW_PROMISES: &str = include_str!("../corpus/meadow_promises.scn");
pub const RESTAURANT: &str = include_str!("../corpus/restaurant.scn");
pub const INSEQ_CONSTRUCTION: &str = include_str!("../corpus/inseq_construction.scn");
pub const INSEQ_USAGE: &str = include_str!("../corpus/inseq_usage.scn");

/// `(file name, source)` for every bundled scenario.
pub const ALL: &[(&str, &str)] = &[
    ("money_transfer.scn", MONEY_TRANSFER),
    ("money_transfer_double_spend.scn", MONEY_TRANSFER_DOUBLE_SPEND),
    ("budget.scn", BUDGET),
    ("meadow_promises.scn", MEADOW_PROMISES),
    ("restaurant.scn", RESTAURANT),
    ("inseq_construction.scn", INSEQ_CONSTRUCTION),
    ("inseq_usage.scn", INSEQ_USAGE),
];

pub fn source(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, _)| *n == name || n.trim_end_matches(".scn") == name).map(|(_, s)| *s)
}

pub fn load(name: &str) -> Option<Result<Scenario, ScenarioError>> {
    source(name).map(parse_scenario)
}
