mod bounds;
mod dtgo;
mod metrics;
mod objective;
mod schedule;
mod trace;

pub use bounds::{deviation_bound, rate_report, RateTerms};
pub use dtgo::{
    centralized_sgd_run, dtgo_matrix_step, dtgo_run, CorrectionSource, DtgoConfig, Engine,
    InitialState, DIVERGENCE_LIMIT,
};
pub use metrics::{consensus_metric, cost_metric};
pub use objective::{GradientSampler, Objective, Quadratic};
pub use schedule::StepSchedule;
pub use trace::Trace;
