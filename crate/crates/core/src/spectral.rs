//! Laplacian eigenstructure of the flat domains and everything derived from
//! it: heat kernels, the trace `sum exp(s lambda)`, the energy curve
//! `-sum_{lambda != 0} exp(2 t lambda) / lambda`, and separable synthesis of
//! coefficient expansions on the quadrature grid.
//!
//! Internally every domain uses a tensor-product basis `Phi_j(x) = phi_{j1}(x1)
//! phi_{j2}(x2)` that is orthonormal in `L^2(m)`:
//!
//! * boundary kinds: `phi_0 = 1`, `phi_k = sqrt(2) cos(pi k x)`, `0 <= k <= K`
//! * periodic kinds: `phi_k = exp(2 pi i k x)`, `-K <= k <= K`
//!
//! The real basis exposed through [`SpectralBasis::modes`] (cosine/sine pairs
//! on the periodic kinds) is a unitary recombination of the complex one.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{DomainGeometry, Point, SemigroupConstants};
use crate::error::{Error, Result};

/// Absolute truncation tolerance for kernel and trace evaluations.
pub const TRUNCATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeFunction {
    Constant,
    /// `prod_i sqrt(2) cos(pi k_i x_i)` over the nonzero components.
    NeumannCosine,
    /// `sqrt(2) cos(2 pi k.x)`
    PeriodicCos,
    /// `sqrt(2) sin(2 pi k.x)`
    PeriodicSin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub wavevector: [i64; 2],
    pub eigenvalue: f64,
    pub function: ModeFunction,
}

impl Mode {
    pub fn eval(&self, periodic_dim: usize, x: &Point) -> f64 {
        let [k1, k2] = self.wavevector;
        match self.function {
            ModeFunction::Constant => 1.0,
            ModeFunction::NeumannCosine => {
                let f = |k: i64, c: f64| if k == 0 { 1.0 } else { SQRT_2 * (PI * k as f64 * c).cos() };
                if periodic_dim == 1 {
                    f(k1, x.x())
                } else {
                    f(k1, x.x()) * f(k2, x.y())
                }
            }
            ModeFunction::PeriodicCos => SQRT_2 * (2.0 * PI * (k1 as f64 * x.x() + k2 as f64 * x.y())).cos(),
            ModeFunction::PeriodicSin => SQRT_2 * (2.0 * PI * (k1 as f64 * x.x() + k2 as f64 * x.y())).sin(),
        }
    }
}

/// One-dimensional factor of the tensor basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AxisBasis {
    pub periodic: bool,
    pub cutoff: usize,
}

impl AxisBasis {
    pub fn len(&self) -> usize {
        if self.periodic {
            2 * self.cutoff + 1
        } else {
            self.cutoff + 1
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn wavenumber(&self, j: usize) -> i64 {
        if self.periodic {
            j as i64 - self.cutoff as i64
        } else {
            j as i64
        }
    }

    pub fn index_of(&self, k: i64) -> usize {
        if self.periodic {
            (k + self.cutoff as i64) as usize
        } else {
            k as usize
        }
    }

    /// Angular frequency `omega` with eigenvalue `-omega^2`.
    #[inline]
    pub fn omega(&self, j: usize) -> f64 {
        let k = self.wavenumber(j) as f64;
        if self.periodic {
            2.0 * PI * k
        } else {
            PI * k
        }
    }

    #[inline]
    pub fn eigenvalue(&self, j: usize) -> f64 {
        let w = self.omega(j);
        -w * w
    }

    /// Writes `d^order/dx^order phi_j(x)` for every `j` (order 0, 1 or 2).
    pub fn values(&self, x: f64, order: u8, out: &mut [Complex64]) {
        debug_assert_eq!(out.len(), self.len());
        if self.periodic {
            let w = Complex64::from_polar(1.0, 2.0 * PI * x);
            let mut z = Complex64::from_polar(1.0, -2.0 * PI * self.cutoff as f64 * x);
            for (j, o) in out.iter_mut().enumerate() {
                let om = self.omega(j);
                *o = match order {
                    0 => z,
                    1 => z * Complex64::new(0.0, om),
                    _ => z * (-om * om),
                };
                z *= w;
            }
        } else {
            let w = Complex64::from_polar(1.0, PI * x);
            let mut z = Complex64::new(1.0, 0.0);
            for (j, o) in out.iter_mut().enumerate() {
                let norm = if j == 0 { 1.0 } else { SQRT_2 };
                let om = self.omega(j);
                let v = match order {
                    0 => norm * z.re,
                    1 => -norm * om * z.im,
                    _ => -norm * om * om * z.re,
                };
                *o = Complex64::new(v, 0.0);
                z *= w;
            }
        }
    }

    /// Sum of `exp(lambda t)` over this axis truncated at the cutoff.
    pub fn heat_sum(&self, t: f64) -> f64 {
        (0..self.len()).map(|j| (self.eigenvalue(j) * t).exp()).sum()
    }

    /// Sum of `exp(lambda t)` over all wavenumbers beyond the cutoff.
    pub fn heat_tail(&self, t: f64) -> f64 {
        let mult = if self.periodic { 2.0 } else { 1.0 };
        let scale = if self.periodic { 2.0 * PI } else { PI };
        let mut total = 0.0;
        let mut k = self.cutoff as f64 + 1.0;
        loop {
            let w = scale * k;
            let term = mult * (-w * w * t).exp();
            total += term;
            if term <= total * 1e-17 || term < 1e-300 {
                break;
            }
            k += 1.0;
            if k > self.cutoff as f64 + 1e7 {
                break;
            }
        }
        total
    }
}

/// Eigenstructure of the Laplacian (Neumann on boundary kinds) truncated at
/// max-norm wavenumber `cutoff`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    domain: DomainGeometry,
    cutoff: usize,
    axis: AxisBasis,
    modes: Vec<Mode>,
    dense_eigen: Vec<f64>,
}

/// Result of [`SpectralBasis::energy_curve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyCurve {
    pub value: f64,
    /// Bound on the contribution of the modes beyond the cutoff (before any
    /// analytic tail correction).
    pub tail_bound: f64,
}

impl SpectralBasis {
    pub fn new(domain: DomainGeometry, cutoff: usize) -> Result<Self> {
        if cutoff == 0 {
            return Err(Error::InvalidArgument("spectral cutoff must be >= 1".into()));
        }
        let axis = AxisBasis { periodic: domain.is_periodic(), cutoff };
        let d = domain.dimension();
        let l = axis.len();
        let l2 = if d == 2 { l } else { 1 };
        let mut dense_eigen = Vec::with_capacity(l * l2);
        for j1 in 0..l {
            for j2 in 0..l2 {
                let e2 = if d == 2 { axis.eigenvalue(j2) } else { 0.0 };
                dense_eigen.push(axis.eigenvalue(j1) + e2);
            }
        }
        let modes = real_modes(domain, cutoff);
        Ok(SpectralBasis { domain, cutoff, axis, modes, dense_eigen })
    }

    /// Smallest cutoff whose truncation tail at `t_min` is below `tol`.
    pub fn cutoff_for(domain: DomainGeometry, t_min: f64, tol: f64) -> Result<usize> {
        if !(t_min > 0.0) {
            return Err(Error::InvalidArgument(format!("t_min must be positive, got {t_min}")));
        }
        let mut k = 1;
        loop {
            let b = SpectralBasis::new(domain, k)?;
            if b.truncation_tail(t_min) <= tol {
                return Ok(k);
            }
            k += 1;
            if k > 100_000 {
                return Err(Error::InvalidArgument(format!("t_min {t_min} needs an enormous cutoff")));
            }
        }
    }

    /// Convenience: basis whose cutoff satisfies the default truncation rule at `t_min`.
    pub fn for_time(domain: DomainGeometry, t_min: f64) -> Result<Self> {
        SpectralBasis::new(domain, SpectralBasis::cutoff_for(domain, t_min, TRUNCATION_TOL)?)
    }

    pub fn domain(&self) -> DomainGeometry {
        self.domain
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn axis(&self) -> AxisBasis {
        self.axis
    }

    pub fn dimension(&self) -> usize {
        self.domain.dimension()
    }

    /// Real orthonormal modes, constant mode first.
    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// Number of entries of the dense tensor layout (`len^d`).
    pub fn dense_len(&self) -> usize {
        self.dense_eigen.len()
    }

    /// Second-axis length of the dense layout (1 in one dimension).
    pub fn inner_len(&self) -> usize {
        if self.dimension() == 2 {
            self.axis.len()
        } else {
            1
        }
    }

    pub fn dense_eigenvalues(&self) -> &[f64] {
        &self.dense_eigen
    }

    /// Dense index of the constant mode.
    pub fn constant_index(&self) -> usize {
        let j0 = self.axis.index_of(0);
        j0 * self.inner_len() + if self.dimension() == 2 { j0 } else { 0 }
    }

    /// Squared sup-norm of the tensor basis functions.
    fn sup_sq(&self) -> f64 {
        if self.axis.periodic {
            1.0
        } else {
            2f64.powi(self.dimension() as i32)
        }
    }

    /// `sup|Phi|^2 * sum_{outside} exp(lambda t)`: bound on the pointwise
    /// truncation error of the heat kernel at time `t`.
    pub fn truncation_tail(&self, t: f64) -> f64 {
        let inside = self.axis.heat_sum(t);
        let outside = self.axis.heat_tail(t);
        let tail = match self.dimension() {
            1 => outside,
            _ => (inside + outside).powi(2) - inside * inside,
        };
        self.sup_sq() * tail
    }

    fn check_tail(&self, t: f64) -> Result<()> {
        let tail = self.truncation_tail(t);
        if tail > TRUNCATION_TOL {
            return Err(Error::CutoffInsufficient {
                cutoff: self.cutoff,
                t,
                tail,
                tolerance: TRUNCATION_TOL,
            });
        }
        Ok(())
    }

    /// Values of all dense basis functions at `p`.
    pub fn dense_values(&self, p: &Point) -> Vec<Complex64> {
        let l = self.axis.len();
        let mut r1 = vec![Complex64::new(0.0, 0.0); l];
        self.axis.values(p.x(), 0, &mut r1);
        if self.dimension() == 1 {
            return r1;
        }
        let mut r2 = vec![Complex64::new(0.0, 0.0); l];
        self.axis.values(p.y(), 0, &mut r2);
        let mut out = Vec::with_capacity(l * l);
        for a in &r1 {
            for b in &r2 {
                out.push(a * b);
            }
        }
        out
    }

    /// Transition density `p_t(x, y) = sum exp(t lambda) Phi(x) conj(Phi(y))`.
    pub fn heat_kernel(&self, t: f64, x: &Point, y: &Point) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("heat kernel needs t > 0, got {t}")));
        }
        self.check_tail(t)?;
        // the kernel factorizes over axes
        let k1 = self.axis_kernel(t, x.x(), y.x(), 0);
        if self.dimension() == 1 {
            return Ok(k1);
        }
        Ok(k1 * self.axis_kernel(t, x.y(), y.y(), 0))
    }

    /// `grad_y p_t(x, y)`.
    pub fn heat_kernel_gradient(&self, t: f64, x: &Point, y: &Point) -> Result<[f64; 2]> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("heat kernel needs t > 0, got {t}")));
        }
        self.check_tail(t)?;
        let p1 = self.axis_kernel(t, x.x(), y.x(), 0);
        let d1 = self.axis_kernel(t, x.x(), y.x(), 1);
        if self.dimension() == 1 {
            return Ok([d1, 0.0]);
        }
        let p2 = self.axis_kernel(t, x.y(), y.y(), 0);
        let d2 = self.axis_kernel(t, x.y(), y.y(), 1);
        Ok([d1 * p2, p1 * d2])
    }

    /// One-dimensional kernel factor, differentiated `order` times in `y`.
    fn axis_kernel(&self, t: f64, x: f64, y: f64, order: u8) -> f64 {
        let l = self.axis.len();
        let mut a = vec![Complex64::new(0.0, 0.0); l];
        let mut b = vec![Complex64::new(0.0, 0.0); l];
        self.axis.values(x, 0, &mut a);
        self.axis.values(y, order, &mut b);
        (0..l)
            .map(|j| ((self.axis.eigenvalue(j) * t).exp() * a[j] * b[j].conj()).re)
            .sum()
    }

    /// `sum_lambda exp(s lambda)`, counted with multiplicity.
    pub fn trace(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::InvalidArgument(format!("trace needs s > 0, got {s}")));
        }
        self.check_tail(s)?;
        Ok(self.axis.heat_sum(s).powi(self.dimension() as i32))
    }

    /// Expected Dirichlet energy of the smoothed potential,
    /// `-sum_{lambda != 0} exp(2 t lambda) / lambda`.
    ///
    /// At `t = 0` (one dimension only) the missing tail `sum_{k > K} 1/omega_k^2`
    /// is added through its midpoint-integral approximation
    /// `mult / (scale^2 (K + 1/2))`.
    pub fn energy_curve(&self, t: f64) -> Result<EnergyCurve> {
        if t < 0.0 {
            return Err(Error::InvalidArgument(format!("energy curve needs t >= 0, got {t}")));
        }
        let d = self.dimension();
        if t == 0.0 && d == 2 {
            return Err(Error::DivergentAtZero(d));
        }
        let mut value = 0.0;
        for &lam in &self.dense_eigen {
            if lam != 0.0 {
                value -= (2.0 * t * lam).exp() / lam;
            }
        }
        let mult = if self.axis.periodic { 2.0 } else { 1.0 };
        let scale = if self.axis.periodic { 2.0 * PI } else { PI };
        let kp = self.cutoff as f64 + 1.0;
        let lam_next = scale * scale * kp * kp;
        let tail_bound = if t == 0.0 {
            let k = self.cutoff as f64;
            value += mult / (scale * scale * (k + 0.5));
            mult / (scale * scale * k)
        } else {
            // every omitted mode has |lambda| >= lam_next
            let inside = self.axis.heat_sum(2.0 * t);
            let outside = self.axis.heat_tail(2.0 * t);
            let mass = if d == 1 { outside } else { (inside + outside).powi(2) - inside * inside };
            mass / lam_next
        };
        Ok(EnergyCurve { value, tail_bound })
    }

    /// Evaluates the real expansion `Re sum_j c_j Phi_j(p)`.
    pub fn evaluate(&self, dense: &[Complex64], p: &Point) -> f64 {
        let l = self.axis.len();
        let mut r1 = vec![Complex64::new(0.0, 0.0); l];
        self.axis.values(p.x(), 0, &mut r1);
        if self.dimension() == 1 {
            return dense.iter().zip(&r1).map(|(c, v)| (c * v).re).sum();
        }
        let mut r2 = vec![Complex64::new(0.0, 0.0); l];
        self.axis.values(p.y(), 0, &mut r2);
        let mut total = 0.0;
        for j1 in 0..l {
            let mut inner = Complex64::new(0.0, 0.0);
            for j2 in 0..l {
                inner += dense[j1 * l + j2] * r2[j2];
            }
            total += (inner * r1[j1]).re;
        }
        total
    }

    /// Evaluates `Re sum_j c_j d^{ox}_x d^{oy}_y Phi_j` on the `m`-point
    /// midpoint grid by separable summation (cost `m L^2 + m^2 L`).
    pub fn synthesize(&self, dense: &[Complex64], m: usize, ox: u8, oy: u8) -> Vec<f64> {
        let l = self.axis.len();
        let table = |order: u8| -> Vec<Complex64> {
            let mut t = vec![Complex64::new(0.0, 0.0); m * l];
            for a in 0..m {
                let x = (a as f64 + 0.5) / m as f64;
                self.axis.values(x, order, &mut t[a * l..(a + 1) * l]);
            }
            t
        };
        let tx = table(ox);
        if self.dimension() == 1 {
            return (0..m)
                .map(|a| (0..l).map(|j| (dense[j] * tx[a * l + j]).re).sum())
                .collect();
        }
        let ty = table(oy);
        // partial[j1][b] = sum_j2 c[j1, j2] phi_j2(y_b)
        let mut partial = vec![Complex64::new(0.0, 0.0); l * m];
        for j1 in 0..l {
            let row = &dense[j1 * l..(j1 + 1) * l];
            if row.iter().all(|c| c.re == 0.0 && c.im == 0.0) {
                continue;
            }
            for b in 0..m {
                let tyb = &ty[b * l..(b + 1) * l];
                let mut acc = Complex64::new(0.0, 0.0);
                for j2 in 0..l {
                    acc += row[j2] * tyb[j2];
                }
                partial[j1 * m + b] = acc;
            }
        }
        let mut out = vec![0.0; m * m];
        for a in 0..m {
            let txa = &tx[a * l..(a + 1) * l];
            for b in 0..m {
                let mut acc = 0.0;
                for j1 in 0..l {
                    let p = partial[j1 * m + b];
                    let q = txa[j1];
                    acc += p.re * q.re - p.im * q.im;
                }
                out[a * m + b] = acc;
            }
        }
        out
    }

    /// Coefficients in the real basis of [`SpectralBasis::modes`], in the
    /// same order.
    pub fn real_coefficients(&self, dense: &[Complex64]) -> Vec<f64> {
        let l = self.axis.len();
        let idx = |k: [i64; 2]| -> usize {
            let j1 = self.axis.index_of(k[0]);
            if self.dimension() == 1 {
                j1
            } else {
                j1 * l + self.axis.index_of(k[1])
            }
        };
        self.modes
            .iter()
            .map(|m| {
                let c = dense[idx(m.wavevector)];
                match m.function {
                    ModeFunction::Constant | ModeFunction::NeumannCosine => c.re,
                    ModeFunction::PeriodicCos => SQRT_2 * c.re,
                    ModeFunction::PeriodicSin => -SQRT_2 * c.im,
                }
            })
            .collect()
    }
}

fn real_modes(domain: DomainGeometry, cutoff: usize) -> Vec<Mode> {
    let k = cutoff as i64;
    let d = domain.dimension();
    let mut modes = vec![Mode { wavevector: [0, 0], eigenvalue: 0.0, function: ModeFunction::Constant }];
    if domain.boundary() {
        let pi2 = PI * PI;
        let second = if d == 2 { 0..=k } else { 0..=0 };
        for k1 in 0..=k {
            for k2 in second.clone() {
                if k1 == 0 && k2 == 0 {
                    continue;
                }
                modes.push(Mode {
                    wavevector: [k1, k2],
                    eigenvalue: -pi2 * (k1 * k1 + k2 * k2) as f64,
                    function: ModeFunction::NeumannCosine,
                });
            }
        }
    } else {
        let c = 4.0 * PI * PI;
        let second = if d == 2 { -k..=k } else { 0..=0 };
        for k1 in 0..=k {
            for k2 in second.clone() {
                // half-space representatives of +-k
                if !(k1 > 0 || (k1 == 0 && k2 > 0)) {
                    continue;
                }
                let eigenvalue = -c * (k1 * k1 + k2 * k2) as f64;
                for function in [ModeFunction::PeriodicCos, ModeFunction::PeriodicSin] {
                    modes.push(Mode { wavevector: [k1, k2], eigenvalue, function });
                }
            }
        }
    }
    modes
}

/// Empirical semigroup constants measured on a `(t, x, y)` scan over
/// `t in [1e-4, 2]`, source points on a coarse grid (including corners and
/// edges) and targets on a fine grid.
///
/// The kernel of a product domain factorizes over axes, so the scan works
/// with one-dimensional kernel tables.
pub fn measure_constants(domain: DomainGeometry) -> Result<SemigroupConstants> {
    let d = domain.dimension();
    let declared = domain.constants();
    let sources: Vec<f64> = if domain.is_periodic() {
        vec![0.0]
    } else {
        vec![0.0, 0.125, 0.25, 0.5]
    };
    let ny = 401;
    let targets: Vec<f64> = (0..ny).map(|i| i as f64 / (ny - 1) as f64).collect();
    let mut c_uc: f64 = 0.0;
    let mut c_ge: f64 = 0.0;
    let mut c_dr: f64 = 0.0;
    let n_t = 48;
    for it in 0..n_t {
        let t = 1e-4 * (2.0f64 / 1e-4).powf(it as f64 / (n_t - 1) as f64);
        let basis = SpectralBasis::for_time(DomainGeometry::new(one_dim(domain)), t)?;
        // 1-D tables per source point: kernel and its y-derivative
        let mut p_tab = Vec::new();
        let mut g_tab = Vec::new();
        for &x in &sources {
            let p: Vec<f64> = targets.iter().map(|&y| basis.axis_kernel(t, x, y, 0)).collect();
            let g: Vec<f64> = targets.iter().map(|&y| basis.axis_kernel(t, x, y, 1)).collect();
            p_tab.push(p);
            g_tab.push(g);
        }
        // dispersion along one axis, midpoint quadrature in y
        let nq = 2000;
        let axis_dom = DomainGeometry::new(one_dim(domain));
        for &x in &sources {
            let mut acc = 0.0;
            for q in 0..nq {
                let y = (q as f64 + 0.5) / nq as f64;
                acc += axis_dom.distance_sq(&Point::d1(x), &Point::d1(y)) * basis.axis_kernel(t, x, y, 0);
            }
            c_dr = c_dr.max(d as f64 * acc / nq as f64 / t);
        }
        if d == 1 {
            for (p, g) in p_tab.iter().zip(&g_tab) {
                for (pv, gv) in p.iter().zip(g) {
                    c_uc = c_uc.max(t.sqrt() * (pv - 1.0).abs());
                    c_ge = c_ge.max(t * gv.abs());
                }
            }
        } else {
            for (pa, ga) in p_tab.iter().zip(&g_tab) {
                for (pb, gb) in p_tab.iter().zip(&g_tab) {
                    for i in 0..ny {
                        for j in 0..ny {
                            let v = pa[i] * pb[j];
                            c_uc = c_uc.max(t * (v - 1.0).abs());
                            let gx = ga[i] * pb[j];
                            let gy = pa[i] * gb[j];
                            c_ge = c_ge.max(t.powf(1.5) * (gx * gx + gy * gy).sqrt());
                        }
                    }
                }
            }
        }
    }
    Ok(SemigroupConstants {
        c_sg: declared.c_sg,
        c_uc,
        c_ge,
        c_dr,
        c_cover: declared.c_cover,
    })
}

fn one_dim(domain: DomainGeometry) -> crate::domain::DomainKind {
    use crate::domain::DomainKind;
    if domain.is_periodic() {
        DomainKind::Circle
    } else {
        DomainKind::Interval
    }
}
