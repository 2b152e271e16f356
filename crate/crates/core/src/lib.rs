//! Promise and decision calculus for autonomous agents.
//!
//! The crate models promise issuing with distributed, eroding outcome
//! instances; external and internalized decision taking with obligations
//! that can only originate in promissory decisions; per-instance assessment
//! and trust maintenance; exact meadow arithmetic for machine-checkable
//! promise bodies; tuplix budgets; and a deterministic scenario engine that
//! ties them together.

pub mod assessment;
pub mod corpus;
pub mod decision;
pub mod event;
pub mod meadow;
pub mod par;
pub mod promise;
pub mod scenario;
pub mod tuplix;

pub use meadow::Rational;
