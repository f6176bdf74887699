//! Seeded, parallel Monte Carlo experiments on random matching, with
//! CSV/JSON output.

pub mod config;
pub mod emit;
pub mod error;
pub mod experiments;
pub mod rng;
pub mod run;
pub mod summary;

pub use config::{ExperimentConfig, ExperimentKind, TimeForm, TimeRule};
pub use emit::{emit, EmittedFiles, Sidecar};
pub use error::{HarnessError, Result};
pub use experiments::{TrialRecord, TrialStatus};
pub use rng::{sampler, trial_rng};
pub use run::{run_experiment, run_experiment_with, run_gamma_sweep, ExperimentOutput};
pub use summary::{SummaryRow, SummaryTable};
