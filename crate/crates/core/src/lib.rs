//! Reliability KPI extraction from wind-turbine maintenance work orders (MWOs).
//!
//! Three labeling routes feed the same MTBF / failure-rate computation:
//!
//! * expert ZEUS labels attached to the work orders,
//! * automatic ZEUS classification ([`classify`]) with naive Bayes or logistic
//!   regression, trained on oversampled data,
//! * human-in-the-loop term tagging ([`tagging`]) followed by extraction
//!   rules ([`rules`]).
//!
//! [`kpi`] turns any of those selections into per-turbine MTBF, failure rate
//! and a fleet aggregate, and compares methods against each other.
//! [`synth`] generates corpora with planted ground truth for validation.

pub mod classify;
pub mod corpus;
pub mod features;
pub mod kpi;
pub mod pipeline;
pub mod rules;
pub mod synth;
pub mod tagging;

pub use corpus::{FleetMeta, TokenDoc, WorkOrder, ZeusCode};
