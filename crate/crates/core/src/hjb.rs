//! Viscous Hamilton-Jacobi flow through the Hopf-Cole transform, the direct
//! Hopf-Lax infimum, and the dual lower bound for `W_2^2(mu^{n,t}, m)`.
//!
//! The heat step of the Hopf-Cole formula is carried out in the log domain:
//! `log P_s e^{a}` is a log-sum-exp against the sampled periodized heat
//! kernel, normalized to unit mass. This is the same Markov operator as
//! [`GridField::periodic_heat`], but values of `e^{a}` far below machine
//! epsilon keep full relative precision.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{sup_residual, CoefficientKind, SpectralCoefficients};
use crate::grid::GridField;

/// `phi_t^sigma = -sigma log(P_{sigma t / 2} e^{-f / sigma})` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ViscousFlowState {
    pub sigma: f64,
    pub time: f64,
    pub phi: GridField,
    pub source: GridField,
}

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + it.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Log-weights of the normalized sampled periodized heat kernel at time `s`,
/// indexed by node offset.
fn log_kernel_axis(m: usize, s: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..m)
        .map(|a| {
            let delta = a as f64 / m as f64;
            log_sum_exp((-8i32..=8).map(move |l| {
                let r = delta + l as f64;
                -r * r / (4.0 * s) - 0.5 * (4.0 * PI * s).ln()
            }))
        })
        .collect();
    let norm = log_sum_exp(raw.iter().copied());
    raw.into_iter().map(|v| v - norm).collect()
}

/// `log P_s e^{a}` for a periodic grid field `a`, separably over axes.
fn log_heat(a: &GridField, s: f64) -> GridField {
    let m = a.grid_size;
    let lk = log_kernel_axis(m, s);
    let conv_1d = |src: &[f64], out: &mut [f64]| {
        for (y, o) in out.iter_mut().enumerate() {
            *o = log_sum_exp((0..m).map(|x| lk[(y + m - x) % m] + src[x]));
        }
    };
    let mut values = vec![0.0; a.len()];
    match a.domain.dimension() {
        1 => conv_1d(&a.values, &mut values),
        _ => {
            let mut tmp = vec![0.0; a.len()];
            for i in 0..m {
                conv_1d(&a.values[i * m..(i + 1) * m], &mut tmp[i * m..(i + 1) * m]);
            }
            let mut col = vec![0.0; m];
            let mut out = vec![0.0; m];
            for j in 0..m {
                for i in 0..m {
                    col[i] = tmp[i * m + j];
                }
                conv_1d(&col, &mut out);
                for i in 0..m {
                    values[i * m + j] = out[i];
                }
            }
        }
    }
    GridField { domain: a.domain, grid_size: m, values }
}

/// Smallest `sigma` that keeps `e^{-(f - min f)/sigma}` above the double
/// underflow threshold.
pub fn underflow_floor(f: &GridField) -> f64 {
    (f.max() - f.min()) / 700.0
}

pub fn hopf_cole_flow(f: &GridField, sigma: f64, t: f64) -> Result<ViscousFlowState> {
    if !f.domain.is_periodic() {
        return Err(Error::InvalidArgument(format!(
            "Hopf-Cole flow needs a domain without boundary, got {}",
            f.domain
        )));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("flow time must lie in [0, 1], got {t}")));
    }
    let oscillation = f.max() - f.min();
    if sigma < oscillation / 700.0 {
        return Err(Error::UnderflowRisk { sigma, oscillation });
    }
    if t == 0.0 {
        return Ok(ViscousFlowState { sigma, time: t, phi: f.clone(), source: f.clone() });
    }
    let lo = f.min();
    let a = f.map(|v| -(v - lo) / sigma);
    let heated = log_heat(&a, 0.5 * sigma * t);
    let phi = heated.map(|v| lo - sigma * v);
    Ok(ViscousFlowState { sigma, time: t, phi, source: f.clone() })
}

/// `Q_t f(y) = min_x f(x) + d(x, y)^2 / (2t)` over grid nodes.
///
/// Squared distances split over axes, so the minimum is taken one axis at a
/// time.
pub fn hopf_lax(f: &GridField, t: f64) -> Result<GridField> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("Hopf-Lax time must be positive, got {t}")));
    }
    let m = f.grid_size;
    let periodic = f.domain.is_periodic();
    let cost: Vec<f64> = (0..m)
        .map(|a| {
            let mut dx = a as f64 / m as f64;
            if periodic {
                dx = dx.min(1.0 - dx);
            }
            dx * dx / (2.0 * t)
        })
        .collect();
    let pass = |src: &[f64], out: &mut [f64]| {
        for (y, o) in out.iter_mut().enumerate() {
            *o = (0..m)
                .map(|x| src[x] + cost[x.abs_diff(y)])
                .fold(f64::INFINITY, f64::min);
        }
    };
    let mut values = vec![0.0; f.len()];
    match f.domain.dimension() {
        1 => pass(&f.values, &mut values),
        _ => {
            let mut tmp = vec![0.0; f.len()];
            for i in 0..m {
                pass(&f.values[i * m..(i + 1) * m], &mut tmp[i * m..(i + 1) * m]);
            }
            let mut col = vec![0.0; m];
            let mut out = vec![0.0; m];
            for j in 0..m {
                for i in 0..m {
                    col[i] = tmp[i * m + j];
                }
                pass(&col, &mut out);
                for i in 0..m {
                    values[i * m + j] = out[i];
                }
            }
        }
    }
    Ok(GridField { domain: f.domain, grid_size: m, values })
}

/// Dual partner of `f`: the viscous flow of `-f` at time 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPotential {
    pub g: GridField,
    pub sigma: f64,
    /// `sup (Delta f)^-` on the grid
    pub laplacian_neg: f64,
    /// `(sigma / 2) ||(Delta f)^-||_inf`, the allowed excess in
    /// `f(x) + g(y) <= d(x, y)^2 / 2`
    pub slack: f64,
}

/// Whether `sigma` is usable on the grid of `f`: no underflow, and the heat
/// kernel of the flow (standard deviation `sqrt(sigma)` per axis at time 1)
/// spans at least two grid cells so the grid sum resolves it.
pub fn sigma_is_safe(f: &GridField, sigma: f64) -> bool {
    let h = 1.0 / f.grid_size as f64;
    sigma >= underflow_floor(f) && sigma.sqrt() >= 2.0 * h
}

pub fn dual_potential(f: &GridField, sigma_sequence: &[f64]) -> Result<DualPotential> {
    let sigma = sigma_sequence
        .iter()
        .copied()
        .filter(|&s| s > 0.0 && sigma_is_safe(f, s))
        .fold(f64::INFINITY, f64::min);
    if !sigma.is_finite() {
        let smallest = sigma_sequence.iter().copied().fold(f64::INFINITY, f64::min);
        return Err(Error::UnderflowRisk { sigma: smallest, oscillation: f.max() - f.min() });
    }
    let neg = f.map(|v| -v);
    let flow = hopf_cole_flow(&neg, sigma, 1.0)?;
    let lap = f.periodic_laplacian()?;
    let laplacian_neg = lap.values.iter().fold(0.0f64, |a, v| a.max(-v));
    Ok(DualPotential { g: flow.phi, sigma, laplacian_neg, slack: 0.5 * sigma * laplacian_neg })
}

/// Geometric sigma schedule from 0.1 down to `floor` with ratio 1/2.
pub fn sigma_schedule(floor: f64) -> Vec<f64> {
    let mut out = vec![];
    let mut s = 0.1;
    while s >= floor {
        out.push(s);
        s *= 0.5;
    }
    if out.is_empty() {
        out.push(floor);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualLowerBound {
    /// `2 [int (f + g) dm + int f r^{n,t} / sqrt n dm]`
    pub value: f64,
    /// twice the pair-constraint allowance of the dual potential
    pub slack: f64,
    pub sigma: f64,
    /// certified `sup |u^{n,t} - 1|`
    pub sup_residual: f64,
    /// `max_y g(y) - Q_1(-f)(y)` on the grid (`<= slack / 2` in theory)
    pub pair_violation: f64,
}

impl DualLowerBound {
    pub fn certified(&self) -> f64 {
        self.value - self.slack
    }
}

/// Lower bound for `W_2^2(mu^{n,t}, m)` from the potential `f = -f^{n,t}/sqrt n`
/// and its viscous dual partner.
pub fn dual_lower_bound(
    f_potential: &SpectralCoefficients,
    r_smooth: &SpectralCoefficients,
    n: usize,
    eta: f64,
    grid_size: usize,
    sigma_floor: f64,
) -> Result<DualLowerBound> {
    if f_potential.kind != CoefficientKind::Potential || r_smooth.kind != CoefficientKind::SmoothedResidual {
        return Err(Error::InvalidArgument("dual_lower_bound expects (potential, smoothed residual)".into()));
    }
    let sup = sup_residual(r_smooth, n, grid_size)?;
    if sup.certified_upper() > eta {
        return Err(Error::EventViolated { sup: sup.certified_upper(), eta });
    }
    let sn = (n as f64).sqrt();
    let f = f_potential.scaled(-1.0 / sn);
    let f_grid = f.synthesize(grid_size, 0, 0);
    let dual = dual_potential(&f_grid, &sigma_schedule(sigma_floor))?;
    // Delta f = -r/sqrt n, so ||(Delta f)^-||_inf <= certified sup |u - 1|
    let slack_one = 0.5 * dual.sigma * sup.certified_upper();
    let fg = f_grid.zip_map(&dual.g, |a, b| a + b)?.integral();
    let cross = f.inner(r_smooth)? / sn;
    let q = hopf_lax(&f_grid.map(|v| -v), 1.0)?;
    let pair_violation = dual
        .g
        .values
        .iter()
        .zip(&q.values)
        .fold(f64::NEG_INFINITY, |a, (g, q)| a.max(g - q));
    Ok(DualLowerBound {
        value: 2.0 * (fg + cross),
        slack: 2.0 * slack_one,
        sigma: dual.sigma,
        sup_residual: sup.certified_upper(),
        pair_violation,
    })
}
