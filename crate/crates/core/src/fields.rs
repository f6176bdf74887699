//! Spectral representation of the empirical residual `r^n`, its heat
//! regularization `r^{n,t}`, the Poisson potential `f^{n,t}`, energies, the
//! logarithmic mean and the Dacorogna-Moser transport bound.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::Point;
use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::spectral::SpectralBasis;
use crate::transport::EmpiricalSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientKind {
    MeasureResidual,
    SmoothedResidual,
    Potential,
}

/// Coefficients in the dense tensor basis of [`SpectralBasis`]. Real fields
/// have Hermitian-symmetric coefficients on periodic kinds and real ones on
/// boundary kinds.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoefficients {
    pub basis: Arc<SpectralBasis>,
    pub kind: CoefficientKind,
    pub coeffs: Vec<Complex64>,
}

impl SpectralCoefficients {
    pub fn zeros(basis: Arc<SpectralBasis>, kind: CoefficientKind) -> Self {
        let coeffs = vec![Complex64::new(0.0, 0.0); basis.dense_len()];
        SpectralCoefficients { basis, kind, coeffs }
    }

    /// Builds coefficients from values in the real basis of
    /// [`SpectralBasis::modes`].
    pub fn from_real(basis: Arc<SpectralBasis>, kind: CoefficientKind, real: &[f64]) -> Result<Self> {
        if real.len() != basis.dense_len() {
            return Err(Error::LengthMismatch(real.len(), basis.dense_len()));
        }
        let mut out = SpectralCoefficients::zeros(basis.clone(), kind);
        let axis = basis.axis();
        let inner = basis.inner_len();
        let idx = |k: [i64; 2]| {
            let j1 = axis.index_of(k[0]);
            if inner == 1 {
                j1
            } else {
                j1 * inner + axis.index_of(k[1])
            }
        };
        use crate::spectral::ModeFunction::*;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (m, &a) in basis.modes().iter().zip(real) {
            let k = m.wavevector;
            match m.function {
                Constant | NeumannCosine => out.coeffs[idx(k)] += a,
                PeriodicCos | PeriodicSin => {
                    // sqrt2 cos = (e + conj e)/sqrt2, sqrt2 sin = (e - conj e)/(i sqrt2)
                    let c = if m.function == PeriodicCos {
                        Complex64::new(a * s, 0.0)
                    } else {
                        Complex64::new(0.0, -a * s)
                    };
                    out.coeffs[idx(k)] += c;
                    out.coeffs[idx([-k[0], -k[1]])] += c.conj();
                }
            }
        }
        Ok(out)
    }

    /// Coefficients in the real basis of [`SpectralBasis::modes`].
    pub fn real(&self) -> Vec<f64> {
        self.basis.real_coefficients(&self.coeffs)
    }

    pub fn constant_coefficient(&self) -> Complex64 {
        self.coeffs[self.basis.constant_index()]
    }

    pub fn evaluate(&self, p: &Point) -> f64 {
        self.basis.evaluate(&self.coeffs, p)
    }

    /// Values on the midpoint grid, optionally differentiated.
    pub fn synthesize(&self, grid_size: usize, ox: u8, oy: u8) -> GridField {
        let values = self.basis.synthesize(&self.coeffs, grid_size, ox, oy);
        GridField { domain: self.basis.domain(), grid_size, values }
    }

    /// Coefficients of the Laplacian.
    pub fn laplacian(&self) -> SpectralCoefficients {
        let coeffs = self
            .coeffs
            .iter()
            .zip(self.basis.dense_eigenvalues())
            .map(|(c, l)| c * *l)
            .collect();
        SpectralCoefficients { basis: self.basis.clone(), kind: CoefficientKind::SmoothedResidual, coeffs }
    }

    pub fn scaled(&self, s: f64) -> SpectralCoefficients {
        SpectralCoefficients {
            basis: self.basis.clone(),
            kind: self.kind,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// `int f g dm` for real fields by Parseval.
    pub fn inner(&self, other: &SpectralCoefficients) -> Result<f64> {
        if self.coeffs.len() != other.coeffs.len() {
            return Err(Error::LengthMismatch(self.coeffs.len(), other.coeffs.len()));
        }
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a * b.conj()).re).sum())
    }

    /// Upper bound on `sup_x |grad^2 u(x)|` (Frobenius norm).
    pub fn hessian_bound(&self) -> f64 {
        let sup = if self.basis.domain().is_periodic() {
            1.0
        } else {
            2f64.powf(self.basis.dimension() as f64 / 2.0)
        };
        self.coeffs
            .iter()
            .zip(self.basis.dense_eigenvalues())
            .map(|(c, l)| c.norm() * (-l) * sup)
            .sum()
    }
}

/// `r^n` coefficients: `n^{-1/2} sum_i conj(Phi(X_i))` on nonconstant modes.
pub fn residual_coefficients(sample: &EmpiricalSample, basis: &Arc<SpectralBasis>) -> Result<SpectralCoefficients> {
    if sample.n() == 0 {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    if sample.domain != basis.domain() {
        return Err(Error::DomainMismatch(sample.domain.to_string(), basis.domain().to_string()));
    }
    let axis = basis.axis();
    let l = axis.len();
    let inner = basis.inner_len();
    let mut acc = vec![Complex64::new(0.0, 0.0); basis.dense_len()];
    let mut r1 = vec![Complex64::new(0.0, 0.0); l];
    let mut r2 = vec![Complex64::new(0.0, 0.0); l];
    for p in &sample.points {
        axis.values(p.x(), 0, &mut r1);
        if inner == 1 {
            for (a, v) in acc.iter_mut().zip(&r1) {
                *a += v.conj();
            }
        } else {
            axis.values(p.y(), 0, &mut r2);
            for (j1, v1) in r1.iter().enumerate() {
                let v1c = v1.conj();
                let row = &mut acc[j1 * inner..(j1 + 1) * inner];
                for (a, v2) in row.iter_mut().zip(&r2) {
                    *a += v1c * v2.conj();
                }
            }
        }
    }
    let s = 1.0 / (sample.n() as f64).sqrt();
    for a in acc.iter_mut() {
        *a *= s;
    }
    acc[basis.constant_index()] = Complex64::new(0.0, 0.0);
    Ok(SpectralCoefficients { basis: basis.clone(), kind: CoefficientKind::MeasureResidual, coeffs: acc })
}

/// `r^{n,t}`: multiplies every mode by `exp(lambda t)`.
pub fn heat_smooth(r: &SpectralCoefficients, t: f64) -> Result<SpectralCoefficients> {
    if r.kind != CoefficientKind::MeasureResidual {
        return Err(Error::InvalidArgument("heat_smooth expects a measure residual".into()));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("smoothing time must be positive, got {t}")));
    }
    let coeffs = r
        .coeffs
        .iter()
        .zip(r.basis.dense_eigenvalues())
        .map(|(c, l)| c * (l * t).exp())
        .collect();
    Ok(SpectralCoefficients { basis: r.basis.clone(), kind: CoefficientKind::SmoothedResidual, coeffs })
}

/// `u^{n,t} = 1 + r^{n,t} / sqrt n` on the grid.
pub fn density_field(r_smooth: &SpectralCoefficients, n: usize, grid_size: usize) -> Result<GridField> {
    if r_smooth.kind != CoefficientKind::SmoothedResidual {
        return Err(Error::InvalidArgument("density_field expects a smoothed residual".into()));
    }
    let s = 1.0 / (n as f64).sqrt();
    Ok(r_smooth.synthesize(grid_size, 0, 0).map(|v| 1.0 + s * v))
}

/// Solves `Delta f = r` with zero mean (Neumann condition on boundary kinds).
pub fn poisson_solve(r: &SpectralCoefficients) -> Result<SpectralCoefficients> {
    let c0 = r.constant_coefficient();
    if c0.norm() != 0.0 {
        return Err(Error::ZeroEigenvalueDivision(c0.norm()));
    }
    let coeffs = r
        .coeffs
        .iter()
        .zip(r.basis.dense_eigenvalues())
        .map(|(c, &l)| if l == 0.0 { Complex64::new(0.0, 0.0) } else { c / l })
        .collect();
    Ok(SpectralCoefficients { basis: r.basis.clone(), kind: CoefficientKind::Potential, coeffs })
}

/// Exact masses of `u^{n,t} m` on the cells of the `g`-per-axis grid,
/// x-major like [`GridField`]; each basis function is integrated in closed
/// form over every cell.
pub fn cell_masses(r_smooth: &SpectralCoefficients, n: usize, g: usize) -> Result<GridField> {
    if r_smooth.kind != CoefficientKind::SmoothedResidual {
        return Err(Error::InvalidArgument("cell_masses expects a smoothed residual".into()));
    }
    if g == 0 {
        return Err(Error::InvalidArgument("cell_masses needs g >= 1".into()));
    }
    let basis = &r_smooth.basis;
    let axis = basis.axis();
    let l = axis.len();
    let h = 1.0 / g as f64;
    // integrals[c * l + j] = int over cell c of phi_j
    let mut integrals = vec![Complex64::new(0.0, 0.0); g * l];
    for c in 0..g {
        let (a, b) = (c as f64 * h, (c + 1) as f64 * h);
        for j in 0..l {
            let w = axis.omega(j);
            integrals[c * l + j] = if w == 0.0 {
                Complex64::new(h, 0.0)
            } else if axis.periodic {
                (Complex64::from_polar(1.0, w * b) - Complex64::from_polar(1.0, w * a)) / Complex64::new(0.0, w)
            } else {
                Complex64::new(std::f64::consts::SQRT_2 * ((w * b).sin() - (w * a).sin()) / w, 0.0)
            };
        }
    }
    let s = 1.0 / (n as f64).sqrt();
    let d = basis.dimension();
    let values = if d == 1 {
        (0..g)
            .map(|c| {
                let acc: Complex64 = (0..l).map(|j| r_smooth.coeffs[j] * integrals[c * l + j]).sum();
                h + s * acc.re
            })
            .collect()
    } else {
        let inner = basis.inner_len();
        let mut out = Vec::with_capacity(g * g);
        // partial[cy][j1] = sum_j2 c[j1, j2] I_{j2}(cy)
        let mut partial = vec![Complex64::new(0.0, 0.0); g * l];
        for cy in 0..g {
            for j1 in 0..l {
                partial[cy * l + j1] =
                    (0..l).map(|j2| r_smooth.coeffs[j1 * inner + j2] * integrals[cy * l + j2]).sum();
            }
        }
        for cx in 0..g {
            for cy in 0..g {
                let acc: Complex64 =
                    (0..l).map(|j1| integrals[cx * l + j1] * partial[cy * l + j1]).sum();
                out.push(h * h + s * acc.re);
            }
        }
        out
    };
    GridField::new(basis.domain(), g, values)
}

/// `int |grad f|^2 dm = sum (-lambda) |f_hat|^2`.
pub fn dirichlet_energy(f: &SpectralCoefficients) -> f64 {
    f.coeffs
        .iter()
        .zip(f.basis.dense_eigenvalues())
        .map(|(c, l)| -l * c.norm_sqr())
        .sum()
}

/// Gradient of a potential sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub components: Vec<GridField>,
    pub magnitude: GridField,
    /// quadrature of `|grad f|^2`
    pub energy2: f64,
    /// quadrature of `|grad f|^4`
    pub energy4: f64,
}

pub fn gradient_field(f: &SpectralCoefficients, grid_size: usize) -> Result<GradientField> {
    let cutoff = f.basis.cutoff();
    if grid_size < 2 * cutoff {
        return Err(Error::AliasingRisk { grid_size, cutoff, required: 2 * cutoff });
    }
    let d = f.basis.dimension();
    let mut components = vec![f.synthesize(grid_size, 1, 0)];
    if d == 2 {
        components.push(f.synthesize(grid_size, 0, 1));
    }
    let sq: Vec<f64> = (0..components[0].len())
        .map(|i| components.iter().map(|c| c.values[i] * c.values[i]).sum())
        .collect();
    let w = components[0].weight();
    let energy2 = sq.iter().sum::<f64>() * w;
    let energy4 = sq.iter().map(|v| v * v).sum::<f64>() * w;
    let magnitude = GridField {
        domain: f.basis.domain(),
        grid_size,
        values: sq.iter().map(|v| v.sqrt()).collect(),
    };
    Ok(GradientField { components, magnitude, energy2, energy4 })
}

/// Logarithmic mean `(a - b) / (ln a - ln b)`, extended continuously.
pub fn log_mean(a: f64, b: f64) -> Result<f64> {
    if !(a >= 0.0) || !(b >= 0.0) {
        return Err(Error::InvalidArgument(format!("log mean needs nonnegative arguments, got {a}, {b}")));
    }
    if a == 0.0 || b == 0.0 {
        return Ok(0.0);
    }
    let s = a + b;
    let z = (a - b) / s;
    if (a - b).abs() < 1e-8 * s {
        // M = (s/2) * z / atanh(z), expanded in z^2
        let z2 = z * z;
        return Ok(0.5 * s * (1.0 - z2 / 3.0 - 4.0 * z2 * z2 / 45.0 - 44.0 * z2 * z2 * z2 / 945.0));
    }
    Ok((a - b) / (a.ln() - b.ln()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmBound {
    pub value: f64,
    /// most negative density value clamped to zero (0 when none)
    pub clamp: f64,
}

/// `int |grad f|^2 / M(u0, 1) dm`, bounding `W_2^2(u0 m, m)` when
/// `Delta f = 1 - u0`.
pub fn dm_upper_bound(u0: &GridField, f: &SpectralCoefficients) -> Result<DmBound> {
    if f.basis.domain() != u0.domain {
        return Err(Error::DomainMismatch(u0.domain.to_string(), f.basis.domain().to_string()));
    }
    let min = u0.min();
    if min < -1e-9 {
        return Err(Error::NonpositiveDensity { min });
    }
    let lap = f.laplacian().synthesize(u0.grid_size, 0, 0);
    let scale = u0.values.iter().fold(1.0f64, |a, v| a.max((v - 1.0).abs()));
    let resid = lap
        .values
        .iter()
        .zip(&u0.values)
        .fold(0.0f64, |a, (l, u)| a.max((l - (1.0 - u)).abs()));
    if resid > 1e-8 * scale {
        return Err(Error::InvalidArgument(format!(
            "potential does not solve Delta f = 1 - u0 (residual {resid:.3e})"
        )));
    }
    let grad = gradient_field(f, u0.grid_size)?;
    let mut total = 0.0;
    for (g, &u) in grad.magnitude.values.iter().zip(&u0.values) {
        let m = log_mean(u.max(0.0), 1.0)?;
        total += g * g / m;
    }
    Ok(DmBound {
        value: total * u0.weight(),
        clamp: if min < 0.0 { -min } else { 0.0 },
    })
}

/// `int (M((1-c) u + c, 1)^{-1} - 1)^2 dm`.
pub fn log_mean_integral(u: &GridField, c: f64) -> Result<f64> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::InvalidArgument(format!("mixing constant must lie in (0, 1], got {c}")));
    }
    let mut total = 0.0;
    for &v in &u.values {
        let uc = (1.0 - c) * v.max(0.0) + c;
        let m = log_mean(uc, 1.0)?;
        total += (1.0 / m - 1.0).powi(2);
    }
    Ok(total * u.weight())
}

/// Default mixing constant `c(n) = n^{-1/2}`.
pub fn default_mixing(n: usize) -> f64 {
    1.0 / (n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupResidual {
    /// largest `|r^{n,t}| / sqrt n` over the grid nodes
    pub sup: f64,
    /// certified bound on `sup_D - sup_grid`
    pub slack: f64,
    pub grid_size: usize,
}

impl SupResidual {
    pub fn certified_upper(&self) -> f64 {
        self.sup + self.slack
    }
}

/// Maximum tolerated certification slack for [`sup_residual`].
pub const SUP_SLACK_TOL: f64 = 1e-3;

/// `sup_y |r^{n,t}(y)| / sqrt n` estimated on the grid, with a
/// second-order Taylor certificate: inside each cell
/// `|u(y)| <= |u(x)| + |grad u(x)| rho + H rho^2 / 2`, where `rho` is the
/// half-diagonal of a cell and `H` bounds the Hessian spectrally.
pub fn sup_residual(r_smooth: &SpectralCoefficients, n: usize, grid_size: usize) -> Result<SupResidual> {
    let scale = 1.0 / (n as f64).sqrt();
    let u = r_smooth.scaled(scale);
    let d = u.basis.dimension();
    let vals = u.synthesize(grid_size, 0, 0);
    let gx = u.synthesize(grid_size, 1, 0);
    let gy = if d == 2 { Some(u.synthesize(grid_size, 0, 1)) } else { None };
    let h = 1.0 / grid_size as f64;
    let rho = 0.5 * h * (d as f64).sqrt();
    let hess = u.hessian_bound();
    let mut sup: f64 = 0.0;
    let mut cert: f64 = 0.0;
    for i in 0..vals.len() {
        let g2 = gx.values[i].powi(2) + gy.as_ref().map_or(0.0, |g| g.values[i].powi(2));
        let a = vals.values[i].abs();
        sup = sup.max(a);
        cert = cert.max(a + g2.sqrt() * rho);
    }
    let slack = cert - sup + 0.5 * hess * rho * rho;
    if slack > SUP_SLACK_TOL {
        // slack is at least linear in h
        let required = ((grid_size as f64) * slack / SUP_SLACK_TOL).ceil() as usize + 1;
        return Err(Error::GridTooCoarse { slack, tolerance: SUP_SLACK_TOL, required });
    }
    Ok(SupResidual { sup, slack, grid_size })
}

/// Default grid size for a cutoff: `2 K + 1`.
pub fn default_grid_size(cutoff: usize) -> usize {
    2 * cutoff + 1
}
