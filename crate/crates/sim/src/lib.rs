//! Monte-Carlo evaluation of NOMA resource-allocation schemes: channel
//! generation, a name-keyed registry of schemes, campaign runner, metrics and
//! CSV/JSON output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod campaign;
pub mod channel;
pub mod error;
pub mod instance;
pub mod metrics;
pub mod output;
pub mod scenario;
pub mod scheme;

pub use campaign::{run_campaign, CampaignResult, MetricsRow, RunOptions, TrialResult};
pub use error::{Result, SimError};
pub use scenario::{ScenarioSpec, SweepSpec, SweepVariable};
pub use scheme::{Scheme, SchemeRegistry, SlotOutcome};
