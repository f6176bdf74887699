//! Per-n statistics of the trial records.

use std::collections::BTreeMap;

use matchlab_core::transport::{displacement_statistics, DisplacementField};
use matchlab_core::DomainKind;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentKind;
use crate::experiments::{TrialRecord, TrialStatus};

/// Two-sided 95% normal quantile used for the jackknife intervals.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub t: Option<f64>,
    pub mean: f64,
    pub std_error: f64,
    pub normalized_mean: Option<f64>,
    /// trials entering the mean
    pub trials: usize,
    pub excluded: usize,
    pub failed: usize,
    pub jackknife_low: f64,
    pub jackknife_high: f64,
    pub extras: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub experiment: ExperimentKind,
    pub domain: DomainKind,
    pub rows: Vec<SummaryRow>,
}

/// Factor turning the mean into the scale-free quantity of each experiment:
/// `n` in one dimension and `n / log n` in two, square-rooted for `W_1`.
pub fn normalization(experiment: ExperimentKind, dimension: usize, n: usize) -> Option<f64> {
    let nf = n as f64;
    let base = match dimension {
        1 => nf,
        _ if n > 1 => nf / nf.ln(),
        _ => return None,
    };
    match experiment {
        ExperimentKind::EnergyIdentity | ExperimentKind::SupResidual => None,
        ExperimentKind::W1Scaling => Some(base.sqrt()),
        _ => Some(base),
    }
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let k = xs.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (mean, (var / k as f64).sqrt())
}

/// Jackknife standard error of the mean from the leave-one-out means.
fn jackknife_se(xs: &[f64]) -> f64 {
    let k = xs.len();
    if k < 2 {
        return f64::INFINITY;
    }
    let kf = k as f64;
    let total: f64 = xs.iter().sum();
    let loo: Vec<f64> = xs.iter().map(|x| (total - x) / (kf - 1.0)).collect();
    let m = loo.iter().sum::<f64>() / kf;
    ((kf - 1.0) / kf * loo.iter().map(|v| (v - m).powi(2)).sum::<f64>()).sqrt()
}

pub fn summarize(
    experiment: ExperimentKind,
    dimension: usize,
    n: usize,
    t: Option<f64>,
    records: &[TrialRecord],
    displacements: &[DisplacementField],
) -> SummaryRow {
    let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.status == TrialStatus::Ok).collect();
    let values: Vec<f64> = ok.iter().map(|r| r.value).collect();
    let (mean, std_error) = mean_and_se(&values);
    let jk = jackknife_se(&values);
    let mut extras = BTreeMap::new();
    let keys: Vec<String> = ok.iter().flat_map(|r| r.auxiliaries.keys().cloned()).collect();
    for key in keys {
        if extras.contains_key(&key) {
            continue;
        }
        let vs: Vec<f64> = ok.iter().filter_map(|r| r.auxiliaries.get(&key).copied()).collect();
        extras.insert(key, mean_and_se(&vs).0);
    }
    let not_failed = records.iter().filter(|r| r.status != TrialStatus::Failed).count();
    let excluded = records.iter().filter(|r| r.status == TrialStatus::Excluded).count();
    extras.insert("excluded_fraction".into(), excluded as f64 / not_failed.max(1) as f64);
    if experiment == ExperimentKind::BipartiteIdentity && !displacements.is_empty() {
        if let Ok(stats) = displacement_statistics(displacements) {
            let diffs: Vec<f64> = ok.iter().map(|r| r.value - 2.0 * r.auxiliaries["uniform"]).collect();
            let (dm, dse) = mean_and_se(&diffs);
            extras.insert("displacement_integral".into(), stats.integral);
            extras.insert("displacement_se".into(), stats.std_error);
            extras.insert("identity_residual".into(), dm + 2.0 * stats.integral);
            extras.insert("identity_error".into(), (dse * dse + 4.0 * stats.std_error.powi(2)).sqrt());
            extras.insert("identity_slack".into(), 2.0 * extras.get("uniform_slack").copied().unwrap_or(0.0));
        }
    }
    SummaryRow {
        n,
        t,
        mean,
        std_error,
        normalized_mean: normalization(experiment, dimension, n).map(|s| s * mean),
        trials: ok.len(),
        excluded,
        failed: records.len() - not_failed,
        jackknife_low: mean - Z95 * jk,
        jackknife_high: mean + Z95 * jk,
        extras,
    }
}
