//! Parallel execution with deterministic aggregation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{HarnessError, Result};
use crate::experiments::{run_trial, TrialRecord, TrialResult, TrialSetup, TrialStatus};
use crate::summary::{summarize, SummaryTable};

/// Gammas swept by [`run_gamma_sweep`].
pub const GAMMA_SWEEP: [f64; 4] = [0.25, 0.5, 1.0, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub table: SummaryTable,
    /// sorted by `(n, trial_index)`
    pub records: Vec<TrialRecord>,
}

/// Runs every `(n, trial)` pair on the current rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    run_experiment_with(cfg, |_, _| {})
}

/// As [`run_experiment`], handing each size's records to `on_batch` as soon
/// as that size completes.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    mut on_batch: impl FnMut(usize, &[TrialRecord]),
) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let d = cfg.geometry().dimension();
    let total = cfg.trials * cfg.n_values.len();
    let mut failed = 0;
    let mut first_error = None;
    let mut rows = Vec::with_capacity(cfg.n_values.len());
    let mut records = Vec::with_capacity(total);
    for &n in &cfg.n_values {
        let setup = TrialSetup::new(cfg, n)?;
        // collect() on an indexed parallel iterator preserves trial order
        let results: Vec<TrialResult> = (0..cfg.trials)
            .into_par_iter()
            .map(|i| run_trial(cfg, &setup, i).unwrap_or_else(|e| TrialRecord::failed(n, i, &e).into()))
            .collect();
        let mut batch = Vec::with_capacity(results.len());
        let mut fields = vec![];
        for r in results {
            if r.record.status == TrialStatus::Failed {
                failed += 1;
                first_error.get_or_insert_with(|| r.record.error.clone().unwrap_or_default());
            }
            fields.extend(r.displacements);
            batch.push(r.record);
        }
        // abort as soon as the failure budget of the whole run is exceeded
        if failed * 100 > total {
            return Err(HarnessError::TooManyFailures { failed, total, first: first_error.unwrap_or_default() });
        }
        on_batch(n, &batch);
        rows.push(summarize(cfg.experiment, d, n, setup.t, &batch, &fields));
        records.extend(batch);
    }
    Ok(ExperimentOutput {
        config: cfg.clone(),
        table: SummaryTable { experiment: cfg.experiment, domain: cfg.domain, rows },
        records,
    })
}

/// Runs a bound experiment once per gamma in [`GAMMA_SWEEP`].
pub fn run_gamma_sweep(cfg: &ExperimentConfig) -> Result<Vec<ExperimentOutput>> {
    if !matches!(
        cfg.experiment,
        ExperimentKind::DmBound | ExperimentKind::DualBound | ExperimentKind::SupResidual
    ) {
        return Err(HarnessError::Config(format!("{} has no smoothing time to sweep", cfg.experiment.name())));
    }
    GAMMA_SWEEP
        .iter()
        .map(|&gamma| {
            let mut c = cfg.clone();
            c.t_rule.gamma = gamma;
            run_experiment(&c)
        })
        .collect()
}
