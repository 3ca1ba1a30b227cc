//! Config-driven experiments: each named experiment wires laws, simulators,
//! exact oracles and statistical tests into a list of [`TestReport`]s plus
//! plot-ready tables.
//!
//! Seeding is deterministic: every batch of replicates gets its master seed
//! from [`derive_seed`](crate::parallel::derive_seed) applied to the config
//! seed and the batch number, and replicate results are merged in index
//! order, so reports and tables do not depend on the worker count.
//!
//! [`TestReport`]: crate::stats::TestReport

mod config;
mod report;
mod runs;

pub use config::{ExperimentConfig, ExperimentId, DEFAULT_SEED};
pub use report::{emit_report, ExperimentRecord, ReportFormat, Table, ALL_FORMATS};
pub use runs::{green_tolerance, run_experiment, FINITE_VARIANCE_CAPPED_TOLERANCE};
