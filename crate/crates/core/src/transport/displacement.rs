//! Averages of optimal displacement fields over independent trials.

use serde::{Deserialize, Serialize};

use crate::domain::DomainGeometry;
use crate::error::{Error, Result};
use crate::grid::GridField;

use super::{EmpiricalSample, TransportPlanResult};

/// `T(x) - x` at every node of the `k`-per-axis midpoint grid, x-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementField {
    pub domain: DomainGeometry,
    pub grid_size: usize,
    pub values: Vec<[f64; 2]>,
}

impl DisplacementField {
    /// Reads the map off a quantized plan whose assignment sends grid node
    /// `i` to sample point `assignment[i]`. Periodic displacements are the
    /// representatives in `(-1/2, 1/2]`.
    pub fn from_plan(sample: &EmpiricalSample, k: usize, plan: &TransportPlanResult) -> Result<Self> {
        let map = plan
            .assignment
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("plan carries no assignment".into()))?;
        let grid = EmpiricalSample::grid(sample.domain, k)?;
        if map.len() != grid.n() {
            return Err(Error::LengthMismatch(map.len(), grid.n()));
        }
        let values = grid
            .points
            .iter()
            .zip(map)
            .map(|(x, &j)| sample.domain.displacement(x, &sample.points[j]))
            .collect();
        Ok(DisplacementField { domain: sample.domain, grid_size: k, values })
    }
}

/// Trial average of displacement fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementStatistics {
    /// One field per axis.
    pub mean_field: Vec<GridField>,
    /// Jackknife bias-corrected estimate of `int |E[T - x]|^2`.
    pub integral: f64,
    /// Jackknife standard error of `integral`.
    pub std_error: f64,
    pub trials: usize,
}

/// Estimates `int |E[T(x) - x]|^2 dx` from independent trials.
///
/// The plug-in `|mean|^2` is biased upward by `Var/T`; the jackknife removes
/// this term exactly, so `integral` may be slightly negative when the true
/// value is near zero.
pub fn displacement_statistics(trials: &[DisplacementField]) -> Result<DisplacementStatistics> {
    let Some(first) = trials.first() else {
        return Err(Error::InvalidArgument("no trials".into()));
    };
    if trials
        .iter()
        .any(|t| t.domain != first.domain || t.grid_size != first.grid_size || t.values.len() != first.values.len())
    {
        return Err(Error::GridMismatch);
    }
    let dim = first.domain.dimension();
    let nodes = first.values.len();
    let nt = trials.len();
    let mut sum = vec![[0.0f64; 2]; nodes];
    for t in trials {
        for (s, v) in sum.iter_mut().zip(&t.values) {
            s[0] += v[0];
            s[1] += v[1];
        }
    }
    let plug_in = |s: &dyn Fn(usize) -> [f64; 2], count: f64| -> f64 {
        (0..nodes)
            .map(|i| {
                let v = s(i);
                (v[0] * v[0] + v[1] * v[1]) / (count * count)
            })
            .sum::<f64>()
            / nodes as f64
    };
    let full = plug_in(&|i| sum[i], nt as f64);
    let mean_field = (0..dim)
        .map(|a| {
            GridField::new(first.domain, first.grid_size, sum.iter().map(|s| s[a] / nt as f64).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    if nt == 1 {
        return Ok(DisplacementStatistics { mean_field, integral: full, std_error: f64::INFINITY, trials: 1 });
    }
    let loo: Vec<f64> = trials
        .iter()
        .map(|t| {
            plug_in(&|i| [sum[i][0] - t.values[i][0], sum[i][1] - t.values[i][1]], (nt - 1) as f64)
        })
        .collect();
    let nf = nt as f64;
    let loo_mean = loo.iter().sum::<f64>() / nf;
    let integral = nf * full - (nf - 1.0) * loo_mean;
    let var = (nf - 1.0) / nf * loo.iter().map(|x| (x - loo_mean).powi(2)).sum::<f64>();
    Ok(DisplacementStatistics { mean_field, integral, std_error: var.sqrt(), trials: nt })
}
