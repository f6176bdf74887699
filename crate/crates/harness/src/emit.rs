//! CSV tables and JSON sidecars.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::experiments::TrialRecord;
use crate::run::ExperimentOutput;
use crate::summary::{SummaryRow, SummaryTable};

/// `git describe` of the build, or "unknown" outside a checkout.
pub const GIT_DESCRIBE: &str = env!("MATCHLAB_GIT_DESCRIBE");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub config: ExperimentConfig,
    pub git_describe: String,
    pub rows: Vec<SummaryRow>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmittedFiles {
    pub table: PathBuf,
    pub sidecar: PathBuf,
    pub trials: PathBuf,
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv { path: path.into(), source }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn extra_keys<'a>(maps: impl Iterator<Item = &'a std::collections::BTreeMap<String, f64>>) -> Vec<String> {
    maps.flat_map(|m| m.keys().cloned()).collect::<BTreeSet<_>>().into_iter().collect()
}

/// One row per `n`; auxiliary means follow the fixed columns.
pub fn write_table_csv(table: &SummaryTable, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let extras = extra_keys(table.rows.iter().map(|r| &r.extras));
    let mut header: Vec<String> = [
        "n",
        "t",
        "mean",
        "std_error",
        "normalized_mean",
        "trials",
        "excluded",
        "failed",
        "jackknife_low",
        "jackknife_high",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(extras.iter().cloned());
    w.write_record(&header).map_err(csv_err(path))?;
    for r in &table.rows {
        let mut rec = vec![
            r.n.to_string(),
            opt(r.t),
            r.mean.to_string(),
            r.std_error.to_string(),
            opt(r.normalized_mean),
            r.trials.to_string(),
            r.excluded.to_string(),
            r.failed.to_string(),
            r.jackknife_low.to_string(),
            r.jackknife_high.to_string(),
        ];
        rec.extend(extras.iter().map(|k| opt(r.extras.get(k).copied())));
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| HarnessError::Io { path: path.into(), source })
}

pub fn write_trials_csv(records: &[TrialRecord], path: &Path) -> Result<()> {
    let w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    write_trials(records, w).map_err(|e| match e {
        HarnessError::Csv { source, .. } => HarnessError::Csv { path: path.into(), source },
        other => other,
    })
}

/// Trial records as CSV on any writer (`path` in errors is empty).
pub fn write_trials<W: std::io::Write>(records: &[TrialRecord], mut w: csv::Writer<W>) -> Result<()> {
    let path = Path::new("");
    let extras = extra_keys(records.iter().map(|r| &r.auxiliaries));
    let mut header: Vec<String> = ["n", "trial_index", "value", "status"].iter().map(|s| s.to_string()).collect();
    header.extend(extras.iter().cloned());
    header.push("error".into());
    w.write_record(&header).map_err(csv_err(path))?;
    for r in records {
        let status = serde_json::to_value(r.status).ok().and_then(|v| v.as_str().map(str::to_string));
        let mut rec = vec![r.n.to_string(), r.trial_index.to_string(), r.value.to_string(), status.unwrap_or_default()];
        rec.extend(extras.iter().map(|k| opt(r.auxiliaries.get(k).copied())));
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| HarnessError::Io { path: path.into(), source })
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| HarnessError::Json { path: path.into(), source })?;
    fs::write(path, text + "\n").map_err(|source| HarnessError::Io { path: path.into(), source })
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| HarnessError::Json { path: path.into(), source })
}

/// Writes `<stem>.csv`, `<stem>.json` and `<stem>_trials.csv` into `dir`.
/// The stem is the configured output path when set, otherwise
/// `<experiment>_<domain>`.
pub fn emit(output: &ExperimentOutput, dir: &Path) -> Result<EmittedFiles> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.into(), source })?;
    let cfg = &output.config;
    let stem = if cfg.output_path.is_empty() {
        format!("{}_{}", cfg.experiment.name(), cfg.domain)
    } else {
        cfg.output_path.clone()
    };
    let files = EmittedFiles {
        table: dir.join(format!("{stem}.csv")),
        sidecar: dir.join(format!("{stem}.json")),
        trials: dir.join(format!("{stem}_trials.csv")),
    };
    write_table_csv(&output.table, &files.table)?;
    write_trials_csv(&output.records, &files.trials)?;
    let sidecar = Sidecar { config: cfg.clone(), git_describe: GIT_DESCRIBE.to_string(), rows: output.table.rows.clone() };
    write_json(&sidecar, &files.sidecar)?;
    Ok(files)
}
