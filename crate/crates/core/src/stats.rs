//! Moment functionals of test functions, the exact moment identities of the
//! centered empirical residual, and the Bernstein-type tail machinery.

use serde::{Deserialize, Serialize};

use crate::domain::{DomainGeometry, SemigroupConstants};
use crate::error::{Error, Result};
use crate::grid::GridField;

/// Centered moments `<f>_2^2`, `<f>_4^4`, `<f>_inf` of a test function and,
/// for a pair, the mixed moments `m_2(f, g)` and `m_4(f, g)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentProfile {
    pub m2: f64,
    pub m4: f64,
    pub m_inf: f64,
    pub cross_m2: Option<f64>,
    pub cross_m4: Option<f64>,
}

fn centered(f: &GridField) -> Vec<f64> {
    let mean = f.mean();
    f.values.iter().map(|v| v - mean).collect()
}

/// Centered moments of `f` by midpoint quadrature.
pub fn moments(f: &GridField) -> MomentProfile {
    let c = centered(f);
    let w = f.weight();
    MomentProfile {
        m2: c.iter().map(|v| v * v).sum::<f64>() * w,
        m4: c.iter().map(|v| v.powi(4)).sum::<f64>() * w,
        m_inf: c.iter().fold(0.0, |a, v| a.max(v.abs())),
        cross_m2: None,
        cross_m4: None,
    }
}

/// Moments of `f` together with the mixed moments against `g`.
pub fn joint_moments(f: &GridField, g: &GridField) -> Result<MomentProfile> {
    f.check_compatible(g)?;
    let (cf, cg) = (centered(f), centered(g));
    let w = f.weight();
    let mut p = moments(f);
    p.cross_m2 = Some(cf.iter().zip(&cg).map(|(a, b)| a * b).sum::<f64>() * w);
    p.cross_m4 = Some(cf.iter().zip(&cg).map(|(a, b)| a * a * b * b).sum::<f64>() * w);
    Ok(p)
}

/// Signed centered moments `int (f - mean f)^k dm` for `k = 0..=k_max`.
pub fn centered_moment_sequence(f: &GridField, k_max: usize) -> Vec<f64> {
    let c = centered(f);
    let w = f.weight();
    let mut out = vec![0.0; k_max + 1];
    for v in c {
        let mut p = 1.0;
        for o in out.iter_mut() {
            *o += p * w;
            p *= v;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgfSeries {
    /// `(1 + sum_{k>=2} lambda^k <f>_k^k / (k! n^{k/2}))^n`
    pub value: f64,
    /// `exp[(lambda^2 <f>_2^2 / 2) exp(|lambda| <f>_inf / sqrt n)]`
    pub upper: f64,
    pub terms: usize,
}

/// Moment generating function of `int f dr^n` through its exact series.
pub fn mgf_series(f: &GridField, lambda: f64, n: usize) -> Result<MgfSeries> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let prof = moments(f);
    let sn = (n as f64).sqrt();
    let x = prof.m_inf * lambda.abs() / sn;
    // smallest k whose geometric majorant term is negligible
    let cap = 600;
    let mut k_max = None;
    let mut term = 1.0;
    for k in 1..=cap {
        term *= x / k as f64;
        if term < 1e-14 * k as f64 {
            k_max = Some(k);
            break;
        }
    }
    let k_max = match k_max {
        Some(k) => k.max(2),
        None => return Err(Error::NonconvergentTruncation { k: cap, tail: term }),
    };
    // remaining terms are dominated by a geometric series of ratio x/(k+1)
    let ratio = x / (k_max + 1) as f64;
    let tail = if ratio < 1.0 { term * ratio / (1.0 - ratio) } else { f64::INFINITY };
    if tail > 1e-12 {
        return Err(Error::NonconvergentTruncation { k: k_max, tail });
    }
    let mom = centered_moment_sequence(f, k_max);
    let mut series = 0.0;
    let mut coef = 1.0;
    for (k, m) in mom.iter().enumerate().skip(1) {
        coef *= lambda / (k as f64 * sn);
        if k >= 2 {
            series += coef * m;
        }
    }
    let value = (n as f64 * series.ln_1p()).exp();
    let upper = (0.5 * lambda * lambda * prof.m2 * x.exp()).exp();
    Ok(MgfSeries { value, upper, terms: k_max })
}

/// Closed-form `E[(int f dr^n)(int g dr^n)]` and
/// `E[(int f dr^n)^2 (int g dr^n)^2]`.
pub fn covariance_identities(f: &GridField, g: &GridField, n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let p = joint_moments(f, g)?;
    let q = moments(g);
    let m2fg = p.cross_m2.unwrap_or(0.0);
    let m4fg = p.cross_m4.unwrap_or(0.0);
    let nf = n as f64;
    let fourth = (nf - 1.0) / nf * (p.m2 * q.m2 + 2.0 * m2fg * m2fg) + m4fg / nf;
    Ok((m2fg, fourth))
}

/// `int f dr^n = n^{-1/2} sum_i f(X_i) - sqrt(n) int f dm` for a function
/// given in closed form with known mean.
pub fn residual_integral<P>(points: &[P], f: impl Fn(&P) -> f64, mean: f64) -> f64 {
    let n = points.len() as f64;
    points.iter().map(&f).sum::<f64>() / n.sqrt() - n.sqrt() * mean
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// `F(c, eta) = sup_{lambda > 0} { lambda eta - (lambda^2 / 2) e^{c lambda} }`.
///
/// The objective is concave, so a bracket `[0, hi]` with a decreasing
/// right endpoint is found by doubling and then shrunk by golden section.
pub fn tail_rate(c: f64, eta: f64) -> Result<f64> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument(format!("tail rate needs c > 0, got {c}")));
    }
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidArgument(format!("tail rate needs eta >= 0, got {eta}")));
    }
    if eta == 0.0 {
        return Ok(0.0);
    }
    let h = |l: f64| l * eta - 0.5 * l * l * (c * l).exp();
    let slope = |l: f64| eta - l * (c * l).exp() * (1.0 + 0.5 * c * l);
    let mut hi = eta.min(1.0);
    while slope(hi) > 0.0 {
        hi *= 2.0;
    }
    let (mut a, mut b) = (0.0, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (h(x1), h(x2));
    while b - a > 1e-13 * hi {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = h(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = h(x1);
        }
    }
    Ok(h(0.5 * (a + b)).max(0.0))
}

/// Tail bound `2 exp[-(1/c1) F(c2/c1, eta)]` for a variable whose moment
/// generating function is below `exp[(lambda^2 c1 / 2) exp(|lambda| c2)]`.
pub fn bernstein_tail(c1: f64, c2: f64, eta: f64) -> Result<f64> {
    if !(c1 > 0.0) || !(c2 > 0.0) {
        return Err(Error::InvalidArgument(format!("bernstein tail needs c1, c2 > 0, got {c1}, {c2}")));
    }
    Ok(2.0 * (-tail_rate(c2 / c1, eta)? / c1).exp())
}

/// `P(|r^{n,t}(y)| / sqrt n > eta) <= 2 exp(-n t^{d/2} F(1, eta) / (2 C_uc))`.
pub fn pointwise_tail_bound(n: usize, t: f64, dimension: usize, c_uc: f64, eta: f64) -> Result<f64> {
    let scale = n as f64 * t.powf(dimension as f64 / 2.0) / (2.0 * c_uc);
    Ok(2.0 * (-scale * tail_rate(1.0, eta)?).exp())
}

/// Union bound over a `delta`-net for `P(sup_y |r^{n,t}(y)| / sqrt n > eta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformTailBound {
    /// net radius `eta t^{(d+1)/2} / (4 C_ge)`, on which the oscillation is `<= eta / 2`
    pub delta: f64,
    pub net_size: usize,
    /// `min(1, |T| * 2 exp(-n t^{d/2} F(1, eta/2) / (2 C_uc)))`
    pub bound: f64,
}

/// Net-and-oscillation bound on the uniform deviation of `r^{n,t}`: a
/// `delta`-net `T` absorbs the oscillation, and the pointwise tail at level
/// `eta / 2` is summed over `T`.
pub fn uniform_tail_bound(
    domain: DomainGeometry,
    n: usize,
    t: f64,
    eta: f64,
    constants: &SemigroupConstants,
) -> Result<UniformTailBound> {
    if !(t > 0.0) || !(eta > 0.0) || n == 0 {
        return Err(Error::InvalidArgument(format!("uniform tail bound needs n, t, eta > 0 (n={n}, t={t}, eta={eta})")));
    }
    let d = domain.dimension();
    let delta = eta * t.powf((d as f64 + 1.0) / 2.0) / (4.0 * constants.c_ge);
    let net_size = domain.covering_number(delta)?;
    let point = pointwise_tail_bound(n, t, d, constants.c_uc, 0.5 * eta)?;
    Ok(UniformTailBound { delta, net_size, bound: (net_size as f64 * point).min(1.0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{DomainGeometry, DomainKind};
    use std::f64::consts::PI;

    #[test]
    fn moments_of_simple_fields() {
        let i: DomainGeometry = DomainKind::Interval.into();
        let c = GridField::constant(i, 10, 3.0);
        let p = moments(&c);
        assert!(p.m2.abs() < 1e-28 && p.m4.abs() < 1e-28 && p.m_inf.abs() < 1e-14);

        // int_0^1 (x - 1/2)^2 dx = 1/12, midpoint error h^2/12
        let ramp = GridField::from_fn(i, 2000, |p| p.x());
        assert!((moments(&ramp).m2 - 1.0 / 12.0).abs() < 1e-7);

        let circ = GridField::from_fn(DomainKind::Circle.into(), 64, |p| 2f64.sqrt() * (2.0 * PI * p.x()).cos());
        let p = moments(&circ);
        assert!((p.m2 - 1.0).abs() < 1e-12);
        assert!(p.m4 <= p.m2 * p.m_inf * p.m_inf + 1e-12);
    }

    #[test]
    fn covariance_examples() {
        let c: DomainGeometry = DomainKind::Circle.into();
        let f = GridField::from_fn(c, 64, |p| 2f64.sqrt() * (2.0 * PI * p.x()).cos());
        let g = GridField::from_fn(c, 64, |p| 2f64.sqrt() * (2.0 * PI * p.x()).sin());
        let (m2, m4) = covariance_identities(&f, &g, 10).unwrap();
        assert!(m2.abs() < 1e-12);
        assert!((m4 - 0.95).abs() < 1e-12);

        let (m2, m4) = covariance_identities(&f, &f, 7).unwrap();
        let p = moments(&f);
        assert!((m2 - p.m2).abs() < 1e-12);
        assert!((m4 - (3.0 * 6.0 / 7.0 * p.m2 * p.m2 + p.m4 / 7.0)).abs() < 1e-12);

        let k = GridField::constant(c, 8, 1.0);
        assert_eq!(covariance_identities(&k, &k, 3).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn mgf_trivial_cases() {
        let c: DomainGeometry = DomainKind::Circle.into();
        let k = GridField::constant(c, 8, 1.0);
        assert!((mgf_series(&k, 2.0, 5).unwrap().value - 1.0).abs() < 1e-15);
        let f = GridField::from_fn(c, 64, |p| (2.0 * PI * p.x()).cos());
        let m = mgf_series(&f, 0.0, 5).unwrap();
        assert_eq!(m.value, 1.0);
        for i in 0..20 {
            let lambda = -3.0 + 0.3 * i as f64;
            let m = mgf_series(&f, lambda, 10).unwrap();
            assert!(m.value <= m.upper * (1.0 + 1e-12));
        }
    }

    #[test]
    fn mgf_matches_closed_form_for_n_one() {
        // E exp(lambda (f(X) - mean)) for f = cos(2 pi x) is the Bessel value I_0(lambda)
        let c: DomainGeometry = DomainKind::Circle.into();
        let f = GridField::from_fn(c, 128, |p| (2.0 * PI * p.x()).cos());
        let lambda: f64 = 1.3;
        let bessel: f64 = (0..40)
            .map(|k| (lambda / 2.0).powi(2 * k) / (1..=k).map(|j| (j * j) as f64).product::<f64>())
            .sum();
        let m = mgf_series(&f, lambda, 1).unwrap();
        assert!((m.value - bessel).abs() < 1e-12, "{} vs {bessel}", m.value);
    }

    fn brute_f(c: f64, eta: f64) -> f64 {
        let mut best: f64 = 0.0;
        let hi = 10.0 * eta.max(1e-3) + 1.0;
        let steps = 2_000_000;
        for i in 1..=steps {
            let l = hi * i as f64 / steps as f64;
            best = best.max(l * eta - 0.5 * l * l * (c * l).exp());
        }
        best
    }

    #[test]
    fn tail_rate_examples() {
        assert_eq!(tail_rate(3.0, 0.0).unwrap(), 0.0);
        let v = tail_rate(1.0, 1e-3).unwrap();
        assert!((v - 0.5e-6).abs() < 0.01 * 0.5e-6);
        assert!((v - brute_f(1.0, 1e-3)).abs() <= 1e-6 * v);
        assert!(tail_rate(2.0, 1.0).unwrap() < tail_rate(1.0, 1.0).unwrap());
        for &(c, eta) in &[(0.5, 0.3), (1.0, 1.0), (4.0, 2.0)] {
            let a = tail_rate(c, eta).unwrap();
            let b = brute_f(c, eta);
            assert!(a >= b - 1e-12 && (a - b).abs() < 1e-6 * a.max(1e-12), "{c} {eta}: {a} vs {b}");
        }
        assert!(tail_rate(0.0, 1.0).is_err());
        assert!(tail_rate(1.0, -1.0).is_err());
    }

    #[test]
    fn tail_rate_monotonicity_grid() {
        let cs: Vec<f64> = (0..20).map(|i| 0.05 * 1.4f64.powi(i)).collect();
        let etas: Vec<f64> = (0..20).map(|i| 0.01 * 1.4f64.powi(i)).collect();
        for &eta in &etas {
            for w in cs.windows(2) {
                let (a, b) = (tail_rate(w[0], eta).unwrap(), tail_rate(w[1], eta).unwrap());
                assert!(b <= a, "F not decreasing in c");
                assert!(w[1] * b >= w[0] * a, "c F not increasing in c");
            }
        }
        for &c in &cs {
            for w in etas.windows(2) {
                assert!(tail_rate(c, w[1]).unwrap() >= tail_rate(c, w[0]).unwrap());
            }
        }
    }

    #[test]
    fn bernstein_examples() {
        assert_eq!(bernstein_tail(0.3, 0.7, 0.0).unwrap(), 2.0);
        let (n, t, cuc, eta) = (256usize, 0.02, 0.09, 0.4);
        let c = 2.0 * cuc / (n as f64 * t);
        let a = bernstein_tail(c, c, eta).unwrap();
        let b = pointwise_tail_bound(n, t, 2, cuc, eta).unwrap();
        assert!((a - b).abs() < 1e-14 * b.max(1e-300));
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let v = bernstein_tail(0.1, 0.2, 0.02 * i as f64).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn uniform_bound_is_net_times_pointwise() {
        let d: DomainGeometry = DomainKind::Torus2.into();
        let c = d.constants();
        let (n, t, eta) = (4096, 0.05, 0.5);
        let u = uniform_tail_bound(d, n, t, eta, &c).unwrap();
        assert!((u.delta - eta * t.powf(1.5) / (4.0 * c.c_ge)).abs() < 1e-15);
        assert_eq!(u.net_size, d.covering_number(u.delta).unwrap());
        let p = pointwise_tail_bound(n, t, 2, c.c_uc, eta / 2.0).unwrap();
        assert!((u.bound - u.net_size as f64 * p).abs() <= 1e-12 * u.bound);
        // small n makes it vacuous, capped at one
        assert_eq!(uniform_tail_bound(d, 10, 0.01, 0.1, &c).unwrap().bound, 1.0);
    }
}
