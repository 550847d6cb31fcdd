use thiserror::Error;

use crate::power::GpSolution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty coalition")]
    EmptyCoalition,
    #[error("user {j} not on sub-channel {k}")]
    UserNotOnSubchannel { k: usize, j: usize },
    #[error("index out of range: sub-channel {k}, user {j}")]
    IndexOutOfRange { k: usize, j: usize },
    #[error("invalid swap: {0}")]
    InvalidSwap(String),
    #[error("quota overflow: {0}")]
    QuotaOverflow(String),
    #[error("inconsistent power support: {0}")]
    InconsistentPower(String),
    #[error("non-transmittable link: sub-channel {k}, user {j} has zero gain")]
    NonTransmittableLink { k: usize, j: usize },
    #[error("infeasible rate vector: recovered power {value} on sub-channel {k}")]
    InfeasibleRates { k: usize, value: f64 },
    #[error("power solver did not converge after {iterations} iterations")]
    SolverNonConvergence {
        iterations: usize,
        best: Box<GpSolution>,
    },
    #[error("oracle scale exceeded: more than {limit} feasible matchings")]
    OracleScaleExceeded { limit: usize },
    #[error("no throughput")]
    NoThroughput,
    #[error("configuration error: {0}")]
    Config(String),
}
