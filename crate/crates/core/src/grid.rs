//! Real-valued fields sampled on the midpoint quadrature grid.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::domain::{DomainGeometry, Point};
use crate::error::{Error, Result};

/// Values on the `grid_size^d` midpoint grid, x-major (`values[i * m + j]`
/// holds the node `((i + 1/2)/m, (j + 1/2)/m)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub domain: DomainGeometry,
    pub grid_size: usize,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(domain: DomainGeometry, grid_size: usize, values: Vec<f64>) -> Result<Self> {
        let expected = grid_size.pow(domain.dimension() as u32);
        if grid_size == 0 || values.len() != expected {
            return Err(Error::LengthMismatch(values.len(), expected));
        }
        Ok(GridField { domain, grid_size, values })
    }

    pub fn constant(domain: DomainGeometry, grid_size: usize, c: f64) -> Self {
        let n = grid_size.pow(domain.dimension() as u32);
        GridField { domain, grid_size, values: vec![c; n] }
    }

    /// Samples `f` at every grid node.
    pub fn from_fn(domain: DomainGeometry, grid_size: usize, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..grid_size.pow(domain.dimension() as u32))
            .map(|i| f(node_of(domain, grid_size, i)))
            .collect();
        GridField { domain, grid_size, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node(&self, index: usize) -> Point {
        node_of(self.domain, self.grid_size, index)
    }

    pub fn nodes(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(move |i| self.node(i))
    }

    /// Quadrature weight of every node.
    pub fn weight(&self) -> f64 {
        1.0 / self.len() as f64
    }

    /// Midpoint-rule integral against the unit-volume measure.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.weight()
    }

    pub fn mean(&self) -> f64 {
        self.integral()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridField {
        GridField {
            domain: self.domain,
            grid_size: self.grid_size,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> Result<GridField> {
        self.check_compatible(other)?;
        Ok(GridField {
            domain: self.domain,
            grid_size: self.grid_size,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn check_compatible(&self, other: &GridField) -> Result<()> {
        if self.domain != other.domain {
            return Err(Error::DomainMismatch(self.domain.to_string(), other.domain.to_string()));
        }
        if self.grid_size != other.grid_size {
            return Err(Error::LengthMismatch(self.grid_size, other.grid_size));
        }
        Ok(())
    }

    /// Largest difference between neighbouring nodes divided by their
    /// distance (wrapping on periodic domains).
    pub fn grid_lipschitz(&self) -> f64 {
        let m = self.grid_size;
        let h = 1.0 / m as f64;
        let periodic = self.domain.is_periodic();
        let mut best: f64 = 0.0;
        let mut visit = |a: usize, b: usize| {
            best = best.max((self.values[a] - self.values[b]).abs() / h);
        };
        match self.domain.dimension() {
            1 => {
                for i in 0..m {
                    if i + 1 < m {
                        visit(i, i + 1);
                    } else if periodic && m > 1 {
                        visit(i, 0);
                    }
                }
            }
            _ => {
                for i in 0..m {
                    for j in 0..m {
                        let here = i * m + j;
                        if i + 1 < m {
                            visit(here, (i + 1) * m + j);
                        } else if periodic && m > 1 {
                            visit(here, j);
                        }
                        if j + 1 < m {
                            visit(here, i * m + j + 1);
                        } else if periodic && m > 1 {
                            visit(here, i * m);
                        }
                    }
                }
            }
        }
        best
    }

    fn require_periodic(&self) -> Result<()> {
        if self.domain.is_periodic() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "grid Fourier operators need a periodic domain, got {}",
                self.domain
            )))
        }
    }

    /// Discrete Fourier coefficients `c_k = mean_j f(x_j) e^{-2 pi i k x_j}`
    /// with `k` in the aliased range, in FFT order per axis.
    fn forward(&self) -> Vec<Complex64> {
        let m = self.grid_size;
        let mut data: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_nd(&mut data, m, self.domain.dimension(), false);
        let scale = 1.0 / self.len() as f64;
        // midpoint nodes sit at (j + 1/2)/m: shift the phase of every mode
        for (idx, c) in data.iter_mut().enumerate() {
            let phase: f64 = wavevector_of(idx, m, self.domain.dimension())
                .iter()
                .map(|&k| -PI * k as f64 / m as f64)
                .sum();
            *c *= Complex64::from_polar(scale, phase);
        }
        data
    }

    fn inverse(&self, mut coeffs: Vec<Complex64>) -> GridField {
        let m = self.grid_size;
        let d = self.domain.dimension();
        for (idx, c) in coeffs.iter_mut().enumerate() {
            let phase: f64 = wavevector_of(idx, m, d).iter().map(|&k| PI * k as f64 / m as f64).sum();
            *c *= Complex64::from_polar(1.0, phase);
        }
        fft_nd(&mut coeffs, m, d, true);
        GridField {
            domain: self.domain,
            grid_size: m,
            values: coeffs.into_iter().map(|c| c.re).collect(),
        }
    }

    /// Applies a real, even Fourier multiplier `mult(k)` to the trigonometric
    /// interpolant of the field.
    fn apply_multiplier(&self, mult: impl Fn(&[i64]) -> Complex64) -> Result<GridField> {
        self.require_periodic()?;
        let m = self.grid_size;
        let d = self.domain.dimension();
        let mut coeffs = self.forward();
        for (idx, c) in coeffs.iter_mut().enumerate() {
            let k = wavevector_of(idx, m, d);
            let nyquist = m % 2 == 0 && k.iter().any(|&ki| ki == -(m as i64) / 2);
            *c *= if nyquist { Complex64::new(mult(&k).re, 0.0) } else { mult(&k) };
        }
        Ok(self.inverse(coeffs))
    }

    /// Discrete heat semigroup for time `s` on a periodic grid.
    ///
    /// The multiplier is the periodized symbol `sum_l exp(-4 pi^2 |k + l m|^2 s)`
    /// normalized at `k = 0`: the Fourier transform of the true heat kernel
    /// sampled on the grid. The resulting operator is a convolution with a
    /// positive kernel of unit mass, so it is Markov (maximum principle holds
    /// exactly, up to rounding).
    pub fn periodic_heat(&self, s: f64) -> Result<GridField> {
        if s < 0.0 {
            return Err(Error::InvalidArgument(format!("heat time must be >= 0, got {s}")));
        }
        if s == 0.0 {
            return Ok(self.clone());
        }
        let m = self.grid_size as i64;
        let axis = |k: i64| -> f64 {
            let mut total = 0.0;
            for l in -8i64..=8 {
                let q = (k + l * m) as f64;
                total += (-4.0 * PI * PI * q * q * s).exp();
            }
            total
        };
        let norm = axis(0);
        self.apply_multiplier(|k| Complex64::new(k.iter().map(|&ki| axis(ki) / norm).product(), 0.0))
    }

    /// Spectral Laplacian of the trigonometric interpolant.
    pub fn periodic_laplacian(&self) -> Result<GridField> {
        self.apply_multiplier(|k| {
            let q2: f64 = k.iter().map(|&ki| (ki * ki) as f64).sum();
            Complex64::new(-4.0 * PI * PI * q2, 0.0)
        })
    }

    /// Spectral partial derivative along `axis` of the trigonometric interpolant.
    pub fn periodic_derivative(&self, axis: usize) -> Result<GridField> {
        if axis >= self.domain.dimension() {
            return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
        }
        self.apply_multiplier(|k| Complex64::new(0.0, 2.0 * PI * k[axis] as f64))
    }

    /// `int |grad f|^2 dm` of the trigonometric interpolant.
    pub fn periodic_dirichlet_energy(&self) -> Result<f64> {
        let mut total = 0.0;
        for axis in 0..self.domain.dimension() {
            let g = self.periodic_derivative(axis)?;
            total += g.values.iter().map(|v| v * v).sum::<f64>() * g.weight();
        }
        Ok(total)
    }
}

pub(crate) fn node_of(domain: DomainGeometry, m: usize, index: usize) -> Point {
    let h = 1.0 / m as f64;
    match domain.dimension() {
        1 => Point::d1((index as f64 + 0.5) * h),
        _ => Point::d2(((index / m) as f64 + 0.5) * h, ((index % m) as f64 + 0.5) * h),
    }
}

fn signed_freq(i: usize, m: usize) -> i64 {
    if i <= m / 2 && !(m % 2 == 0 && i == m / 2) {
        i as i64
    } else {
        i as i64 - m as i64
    }
}

fn wavevector_of(idx: usize, m: usize, d: usize) -> Vec<i64> {
    match d {
        1 => vec![signed_freq(idx, m)],
        _ => vec![signed_freq(idx / m, m), signed_freq(idx % m, m)],
    }
}

fn fft_nd(data: &mut [Complex64], m: usize, d: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(m) } else { planner.plan_fft_forward(m) };
    match d {
        1 => fft.process(data),
        _ => {
            // rows (second index contiguous)
            for row in data.chunks_mut(m) {
                fft.process(row);
            }
            let mut col = vec![Complex64::new(0.0, 0.0); m];
            for j in 0..m {
                for i in 0..m {
                    col[i] = data[i * m + j];
                }
                fft.process(&mut col);
                for i in 0..m {
                    data[i * m + j] = col[i];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainKind;

    #[test]
    fn integral_of_constant() {
        for k in DomainKind::ALL {
            let g = GridField::constant(k.into(), 9, 2.5);
            assert!((g.integral() - 2.5).abs() < 1e-14);
        }
    }

    #[test]
    fn fourier_operators_on_single_mode() {
        let t: DomainGeometry = DomainKind::Torus2.into();
        let g = GridField::from_fn(t, 16, |p| (2.0 * PI * (p.x() + 2.0 * p.y())).cos());
        let lap = g.periodic_laplacian().unwrap();
        for (a, b) in lap.values.iter().zip(&g.values) {
            assert!((a + 4.0 * PI * PI * 5.0 * b).abs() < 1e-9);
        }
        let dx = g.periodic_derivative(0).unwrap();
        let expect = GridField::from_fn(t, 16, |p| -2.0 * PI * (2.0 * PI * (p.x() + 2.0 * p.y())).sin());
        for (a, b) in dx.values.iter().zip(&expect.values) {
            assert!((a - b).abs() < 1e-10);
        }
        // energy of cos(2 pi (x + 2y)) = 4 pi^2 * 5 / 2
        let e = g.periodic_dirichlet_energy().unwrap();
        assert!((e - 2.0 * PI * PI * 5.0).abs() < 1e-9);
    }

    #[test]
    fn heat_is_markov() {
        let c: DomainGeometry = DomainKind::Circle.into();
        let g = GridField::from_fn(c, 32, |p| if p.x() < 0.3 { 1.0 } else { 0.0 });
        let h = g.periodic_heat(0.001).unwrap();
        assert!((h.integral() - g.integral()).abs() < 1e-13);
        assert!(h.min() >= -1e-14 && h.max() <= 1.0 + 1e-14);
        let mode = GridField::from_fn(c, 32, |p| (2.0 * PI * 3.0 * p.x()).cos());
        let hm = mode.periodic_heat(0.01).unwrap();
        let factor = (-4.0 * PI * PI * 9.0 * 0.01f64).exp();
        for (a, b) in hm.values.iter().zip(&mode.values) {
            assert!((a - factor * b).abs() < 1e-6);
        }
    }

    #[test]
    fn fourier_rejects_boundary_domains() {
        let g = GridField::constant(DomainKind::Square.into(), 4, 1.0);
        assert!(g.periodic_heat(0.1).is_err());
    }

    #[test]
    fn lipschitz_of_linear_ramp() {
        let i: DomainGeometry = DomainKind::Interval.into();
        let g = GridField::from_fn(i, 10, |p| 3.0 * p.x());
        assert!((g.grid_lipschitz() - 3.0).abs() < 1e-12);
    }
}
