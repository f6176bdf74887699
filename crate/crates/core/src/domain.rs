//! The four flat unit-volume geometries: `[0,1]`, `[0,1]^2`, the circle `T^1`
//! and the flat torus `T^2`, all parametrized by the fundamental domain
//! `[0,1)^d` (periodic) or `[0,1]^d` (with boundary).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Interval,
    Square,
    Circle,
    Torus2,
}

impl DomainKind {
    pub const ALL: [DomainKind; 4] = [
        DomainKind::Interval,
        DomainKind::Square,
        DomainKind::Circle,
        DomainKind::Torus2,
    ];

    pub fn token(self) -> &'static str {
        match self {
            DomainKind::Interval => "interval",
            DomainKind::Square => "square",
            DomainKind::Circle => "circle",
            DomainKind::Torus2 => "torus2",
        }
    }
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for DomainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "interval" => Ok(DomainKind::Interval),
            "square" => Ok(DomainKind::Square),
            "circle" => Ok(DomainKind::Circle),
            "torus2" => Ok(DomainKind::Torus2),
            other => Err(Error::UnknownDomain(other.to_string())),
        }
    }
}

/// A point of the fundamental domain. One-dimensional domains ignore the
/// second coordinate, which is kept at zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point(pub [f64; 2]);

impl Point {
    pub fn d1(x: f64) -> Self {
        Point([x, 0.0])
    }

    pub fn d2(x: f64, y: f64) -> Self {
        Point([x, y])
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.0[0]
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.0[1]
    }
}

/// Constants of the quantitative heat-semigroup estimates, realized for a
/// flat domain.
///
/// * `c_sg`: `||P_t f||_2 <= exp(-c_sg t) ||f||_2` on zero-mean `f`
/// * `c_uc`: `|p_t(x,y) - 1| <= c_uc t^{-d/2}`
/// * `c_ge`: `Lip(p_t(x,.)) <= c_ge t^{-(d+1)/2}`
/// * `c_dr`: `int d(x,y)^2 p_t(x,y) dm(y) <= c_dr t`
/// * `c_cover`: `N(delta) <= max(1, c_cover delta^{-d})`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemigroupConstants {
    pub c_sg: f64,
    pub c_uc: f64,
    pub c_ge: f64,
    pub c_dr: f64,
    pub c_cover: f64,
}

/// One of the four flat domains with unit volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DomainGeometry {
    pub kind: DomainKind,
}

impl From<DomainKind> for DomainGeometry {
    fn from(kind: DomainKind) -> Self {
        DomainGeometry { kind }
    }
}

impl FromStr for DomainGeometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.parse::<DomainKind>().map(DomainGeometry::from)
    }
}

impl fmt::Display for DomainGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind.fmt(f)
    }
}

impl DomainGeometry {
    pub fn new(kind: DomainKind) -> Self {
        DomainGeometry { kind }
    }

    pub fn dimension(&self) -> usize {
        match self.kind {
            DomainKind::Interval | DomainKind::Circle => 1,
            DomainKind::Square | DomainKind::Torus2 => 2,
        }
    }

    /// True for the domains with boundary (Neumann conditions).
    pub fn boundary(&self) -> bool {
        matches!(self.kind, DomainKind::Interval | DomainKind::Square)
    }

    pub fn is_periodic(&self) -> bool {
        !self.boundary()
    }

    /// Flat domains: Ricci curvature vanishes identically.
    pub fn ricci_lower_bound(&self) -> f64 {
        0.0
    }

    pub fn volume(&self) -> f64 {
        1.0
    }

    pub fn diameter(&self) -> f64 {
        match self.kind {
            DomainKind::Interval => 1.0,
            DomainKind::Square => 2f64.sqrt(),
            DomainKind::Circle => 0.5,
            DomainKind::Torus2 => 0.5f64.sqrt(),
        }
    }

    /// Hausdorff measure of the boundary (0 for periodic domains).
    pub fn perimeter(&self) -> f64 {
        match self.kind {
            DomainKind::Interval => 2.0,
            DomainKind::Square => 4.0,
            DomainKind::Circle | DomainKind::Torus2 => 0.0,
        }
    }

    /// Declared semigroup constants.
    ///
    /// `c_uc` and `c_ge` sit just above the small-time Gaussian limits at the
    /// worst point (corners double the kernel once per reflecting axis);
    /// `spectral::measure_constants` checks them on a `(t, x, y)` scan.
    /// `c_dr = 2d` holds because reflection and periodic wrap are 1-Lipschitz
    /// images of Brownian motion with generator `Delta`.
    pub fn constants(&self) -> SemigroupConstants {
        let (c_sg, c_uc, c_ge, c_cover) = match self.kind {
            DomainKind::Interval => (PI * PI, 0.6, 0.25, 1.0),
            DomainKind::Square => (PI * PI, 0.35, 0.14, 2.0),
            DomainKind::Circle => (4.0 * PI * PI, 0.3, 0.125, 1.0),
            DomainKind::Torus2 => (4.0 * PI * PI, 0.09, 0.035, 2.0),
        };
        SemigroupConstants {
            c_sg,
            c_uc,
            c_ge,
            c_dr: 2.0 * self.dimension() as f64,
            c_cover,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        let ok = |c: f64| {
            if self.boundary() {
                (0.0..=1.0).contains(&c)
            } else {
                (0.0..1.0).contains(&c)
            }
        };
        match self.dimension() {
            1 => ok(p.x()) && p.y() == 0.0,
            _ => ok(p.x()) && ok(p.y()),
        }
    }

    /// Brings an arbitrary coordinate tuple into the fundamental domain:
    /// periodic wrap for tori, clamping for boundary kinds.
    pub fn canonicalize(&self, p: Point) -> Point {
        let f = |c: f64| {
            if self.boundary() {
                c.clamp(0.0, 1.0)
            } else {
                let w = c - c.floor();
                if w >= 1.0 {
                    0.0
                } else {
                    w
                }
            }
        };
        match self.dimension() {
            1 => Point::d1(f(p.x())),
            _ => Point::d2(f(p.x()), f(p.y())),
        }
    }

    /// Squared distance; periodic kinds use the quotient metric coordinatewise.
    #[inline]
    pub fn distance_sq(&self, a: &Point, b: &Point) -> f64 {
        let periodic = self.is_periodic();
        let axis = |u: f64, v: f64| {
            let mut d = (u - v).abs();
            if periodic {
                d -= d.floor();
                d = d.min(1.0 - d);
            }
            d * d
        };
        match self.dimension() {
            1 => axis(a.x(), b.x()),
            _ => axis(a.x(), b.x()) + axis(a.y(), b.y()),
        }
    }

    #[inline]
    pub fn distance(&self, a: &Point, b: &Point) -> f64 {
        self.distance_sq(a, b).sqrt()
    }

    /// Shortest displacement `b - a`; on periodic kinds each component is the
    /// representative in `(-1/2, 1/2]`.
    pub fn displacement(&self, a: &Point, b: &Point) -> [f64; 2] {
        let periodic = self.is_periodic();
        let axis = |u: f64, v: f64| {
            let mut d = v - u;
            if periodic {
                d -= d.round();
                if d <= -0.5 {
                    d += 1.0;
                }
            }
            d
        };
        match self.dimension() {
            1 => [axis(a.x(), b.x()), 0.0],
            _ => [axis(a.x(), b.x()), axis(a.y(), b.y())],
        }
    }

    /// Midpoint rule with `m` nodes per axis and equal weights.
    pub fn quadrature_grid(&self, m: usize) -> Result<Vec<(Point, f64)>> {
        if m == 0 {
            return Err(Error::InvalidArgument("quadrature grid needs m >= 1".into()));
        }
        let h = 1.0 / m as f64;
        let node = |i: usize| (i as f64 + 0.5) * h;
        Ok(match self.dimension() {
            1 => (0..m).map(|i| (Point::d1(node(i)), h)).collect(),
            _ => (0..m)
                .flat_map(|i| (0..m).map(move |j| (Point::d2(node(i), node(j)), h * h)))
                .collect(),
        })
    }

    /// Regular-grid delta-net; see [`DomainGeometry::covering_number`].
    pub fn covering_net(&self, delta: f64) -> Result<Vec<Point>> {
        let m = self.covering_per_axis(delta)?;
        let h = 1.0 / m as f64;
        let node = |i: usize| (i as f64 + 0.5) * h;
        Ok(match self.dimension() {
            1 => (0..m).map(|i| Point::d1(node(i))).collect(),
            _ => (0..m)
                .flat_map(|i| (0..m).map(move |j| Point::d2(node(i), node(j))))
                .collect(),
        })
    }

    /// Cardinality of a regular-grid closed delta-net.
    ///
    /// In one dimension a cell of width `h` is covered by its midpoint iff
    /// `h <= 2 delta`; in two dimensions a square cell is covered by its
    /// center iff its half-diagonal `h / sqrt(2) <= delta`.
    pub fn covering_number(&self, delta: f64) -> Result<usize> {
        let m = self.covering_per_axis(delta)?;
        Ok(m.pow(self.dimension() as u32))
    }

    fn covering_per_axis(&self, delta: f64) -> Result<usize> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "covering radius must be positive, got {delta}"
            )));
        }
        let cell = match self.dimension() {
            1 => 2.0 * delta,
            _ => 2f64.sqrt() * delta,
        };
        // small relative guard so exact fits (delta = 0.1 -> 5 cells) are not
        // pushed up by rounding
        let m = ((1.0 / cell) * (1.0 - 1e-12)).ceil().max(1.0);
        Ok(m as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom(k: DomainKind) -> DomainGeometry {
        DomainGeometry::new(k)
    }

    #[test]
    fn distance_examples() {
        let c = dom(DomainKind::Circle);
        assert!((c.distance(&Point::d1(0.1), &Point::d1(0.9)) - 0.2).abs() < 1e-15);
        let s = dom(DomainKind::Square);
        assert!((s.distance(&Point::d2(0.0, 0.0), &Point::d2(1.0, 1.0)) - 2f64.sqrt()).abs() < 1e-15);
        let t = dom(DomainKind::Torus2);
        assert!((t.distance(&Point::d2(0.0, 0.0), &Point::d2(0.5, 0.5)) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn diameters_and_boundary_flags() {
        for k in DomainKind::ALL {
            let d = dom(k);
            assert_eq!(d.boundary(), matches!(k, DomainKind::Interval | DomainKind::Square));
            assert_eq!(d.volume(), 1.0);
            assert_eq!(d.ricci_lower_bound(), 0.0);
            let c = d.constants();
            assert!(c.c_sg > 0.0 && c.c_uc > 0.0 && c.c_ge > 0.0 && c.c_dr > 0.0 && c.c_cover > 0.0);
        }
        // diameter is attained on a grid of candidate pairs
        for k in DomainKind::ALL {
            let d = dom(k);
            let pts: Vec<Point> = d.quadrature_grid(20).unwrap().into_iter().map(|(p, _)| p).collect();
            let mut extra = vec![Point::default()];
            if d.boundary() {
                extra.push(if d.dimension() == 1 { Point::d1(1.0) } else { Point::d2(1.0, 1.0) });
            }
            let mut best: f64 = 0.0;
            for a in pts.iter().chain(extra.iter()) {
                for b in pts.iter().chain(extra.iter()) {
                    best = best.max(d.distance(a, b));
                }
            }
            assert!(best <= d.diameter() + 1e-12);
            assert!(best >= d.diameter() - 0.08, "{k}: {best}");
        }
    }

    #[test]
    fn quadrature_examples() {
        let i = dom(DomainKind::Interval);
        let g = i.quadrature_grid(2).unwrap();
        assert_eq!(g, vec![(Point::d1(0.25), 0.5), (Point::d1(0.75), 0.5)]);
        let t = dom(DomainKind::Torus2);
        assert_eq!(t.quadrature_grid(1).unwrap(), vec![(Point::d2(0.5, 0.5), 1.0)]);
        assert!(i.quadrature_grid(0).is_err());
        for k in DomainKind::ALL {
            let w: f64 = dom(k).quadrature_grid(7).unwrap().iter().map(|(_, w)| 3.5 * w).sum();
            assert!((w - 3.5).abs() < 1e-13);
        }
    }

    #[test]
    fn covering_examples() {
        let i = dom(DomainKind::Interval);
        assert_eq!(i.covering_number(0.5).unwrap(), 1);
        assert_eq!(i.covering_number(0.1).unwrap(), 5);
        assert!(i.covering_number(0.0).is_err());
        assert!(i.covering_number(-1.0).is_err());
    }

    #[test]
    fn covering_interval_is_minimal() {
        // k closed balls of radius delta cover total length at most 2 k delta,
        // so ceil(1 / (2 delta)) is a lower bound for any cover of [0,1]
        let i = dom(DomainKind::Interval);
        for &delta in &[0.03, 0.07, 0.1, 0.13, 0.25, 0.4, 0.5, 0.9] {
            let lower = (1.0f64 / (2.0 * delta) - 1e-12).ceil().max(1.0) as usize;
            assert_eq!(i.covering_number(delta).unwrap(), lower, "delta {delta}");
        }
    }

    #[test]
    fn covering_torus_matches_regular_net_search() {
        // exhaustive search over regular a x b nets (with any offset on the
        // torus, nets are translation-equivalent) checked on a fine sample
        let t = dom(DomainKind::Torus2);
        let delta = 0.4;
        let probe: Vec<Point> = t.quadrature_grid(60).unwrap().into_iter().map(|(p, _)| p).collect();
        let mut best = usize::MAX;
        for a in 1..=4usize {
            for b in 1..=4usize {
                let net: Vec<Point> = (0..a)
                    .flat_map(|i| {
                        (0..b).map(move |j| Point::d2((i as f64 + 0.5) / a as f64, (j as f64 + 0.5) / b as f64))
                    })
                    .collect();
                let covers = probe
                    .iter()
                    .all(|p| net.iter().any(|q| t.distance(p, q) <= delta));
                if covers {
                    best = best.min(a * b);
                }
            }
        }
        assert_eq!(t.covering_number(delta).unwrap(), best);
    }

    #[test]
    fn parse_tokens() {
        assert_eq!("torus2".parse::<DomainKind>().unwrap(), DomainKind::Torus2);
        assert_eq!("Interval".parse::<DomainKind>().unwrap(), DomainKind::Interval);
        assert!("sphere".parse::<DomainKind>().is_err());
        for k in DomainKind::ALL {
            assert_eq!(k.token().parse::<DomainKind>().unwrap(), k);
        }
    }

    #[test]
    fn displacement_representative() {
        let t = dom(DomainKind::Torus2);
        let d = t.displacement(&Point::d2(0.9, 0.1), &Point::d2(0.1, 0.6));
        assert!((d[0] - 0.2).abs() < 1e-12);
        assert!((d[1] - 0.5).abs() < 1e-12);
        let s = dom(DomainKind::Square);
        let d = s.displacement(&Point::d2(0.9, 0.1), &Point::d2(0.1, 0.6));
        assert!((d[0] + 0.8).abs() < 1e-12);
    }
}
