use std::f64::consts::PI;
use std::sync::Arc;

use matchlab_core::fields::{log_mean, poisson_solve, CoefficientKind, SpectralCoefficients};
use matchlab_core::hjb::{dual_potential, hopf_cole_flow, hopf_lax, sigma_schedule};
use matchlab_core::stats::tail_rate;
use matchlab_core::transport::{
    exact_assignment, w2_bipartite, w2_interval_to_uniform, w2_to_uniform_quantized, EmpiricalSample,
};
use matchlab_core::{DomainGeometry, DomainKind, GridField, Point, SpectralBasis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn point(kind: DomainKind) -> impl Strategy<Value = Point> {
    let d = DomainGeometry::new(kind).dimension();
    (0.0..1.0f64, 0.0..1.0f64).prop_map(move |(x, y)| if d == 1 { Point::d1(x) } else { Point::d2(x, y) })
}

fn any_kind() -> impl Strategy<Value = DomainKind> {
    prop_oneof![
        Just(DomainKind::Interval),
        Just(DomainKind::Circle),
        Just(DomainKind::Square),
        Just(DomainKind::Torus2)
    ]
}

fn sample(kind: DomainKind, n: usize, rng: &mut ChaCha8Rng) -> EmpiricalSample {
    let d = DomainGeometry::new(kind);
    let pts = (0..n)
        .map(|_| if d.dimension() == 1 { Point::d1(rng.random()) } else { Point::d2(rng.random(), rng.random()) })
        .collect();
    EmpiricalSample::new(d, pts).unwrap()
}

/// A smooth random field on the torus from a few Fourier modes.
fn smooth_field(seed: u64, m: usize, amplitude: f64) -> GridField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(0..3) as f64,
                rng.random_range(-2..3) as f64,
                amplitude * (rng.random::<f64>() - 0.5),
                2.0 * PI * rng.random::<f64>(),
            )
        })
        .collect();
    GridField::from_fn(DomainKind::Torus2.into(), m, |p| {
        terms
            .iter()
            .map(|&(k1, k2, a, ph)| a * (2.0 * PI * (k1 * p.x() + k2 * p.y()) + ph).cos())
            .sum()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn distance_triangle_inequality(kind in any_kind(), seed in any::<u64>()) {
        let d = DomainGeometry::new(kind);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = || Point::d2(rng.random(), if d.dimension() == 1 { 0.0 } else { rng.random() });
        let (a, b, c) = (p(), p(), p());
        prop_assert!(d.distance(&a, &c) <= d.distance(&a, &b) + d.distance(&b, &c) + 1e-15);
    }

    #[test]
    fn quotient_metrics_are_shorter(a in point(DomainKind::Square), b in point(DomainKind::Square)) {
        let sq = DomainGeometry::new(DomainKind::Square);
        let to = DomainGeometry::new(DomainKind::Torus2);
        prop_assert!(to.distance(&a, &b) <= sq.distance(&a, &b));
        let (x, y) = (Point::d1(a.x()), Point::d1(b.x()));
        let iv = DomainGeometry::new(DomainKind::Interval);
        let ci = DomainGeometry::new(DomainKind::Circle);
        prop_assert!(ci.distance(&x, &y) <= iv.distance(&x, &y));
    }

    #[test]
    fn log_mean_between_geometric_and_arithmetic(a in 1e-6..1e3f64, b in 1e-6..1e3f64) {
        let m = log_mean(a, b).unwrap();
        let tol = 1e-12 * (a + b);
        prop_assert!((a * b).sqrt() <= m + tol);
        prop_assert!(m <= 0.5 * (a + b) + tol);
    }

    #[test]
    fn log_mean_power_bounds_half(a in 1e-6..1e3f64, b in 1e-6..1e3f64) {
        prop_assume!((a - b).abs() > 1e-6 * (a + b));
        let m = log_mean(a, b).unwrap();
        let q = 0.5;
        let ratio = (a - b) / (a.powf(q) - b.powf(q));
        let lower = q * (a * b).powf(q / 2.0) * ratio;
        let upper = q * 0.5 * (a.powf(q) + b.powf(q)) * ratio;
        let tol = 1e-10 * (a + b);
        prop_assert!(lower <= m + tol && m <= upper + tol, "{lower} {m} {upper}");
    }
}

#[test]
fn covering_nets_cover() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for kind in DomainKind::ALL {
        let d = DomainGeometry::new(kind);
        for delta in [0.3, 0.11, 0.05, 0.013] {
            let net = d.covering_net(delta).unwrap();
            assert_eq!(net.len(), d.covering_number(delta).unwrap());
            for _ in 0..25_000 / 4 {
                let p = if d.dimension() == 1 { Point::d1(rng.random()) } else { Point::d2(rng.random(), rng.random()) };
                let best = net.iter().map(|q| d.distance(&p, q)).fold(f64::INFINITY, f64::min);
                assert!(best <= delta + 1e-15, "{kind:?} delta {delta}: {best}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn poisson_inverts_laplacian(kind in any_kind(), seed in any::<u64>()) {
        let d = DomainGeometry::new(kind);
        let basis = Arc::new(SpectralBasis::new(d, 6).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut real: Vec<f64> = (0..basis.dense_len()).map(|_| rng.random::<f64>() - 0.5).collect();
        real[0] = 0.0;
        let f = SpectralCoefficients::from_real(basis.clone(), CoefficientKind::Potential, &real).unwrap();
        let back = poisson_solve(&f.laplacian()).unwrap().real();
        for (x, y) in back.iter().zip(&real) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn assignment_is_symmetric_and_label_invariant(kind in any_kind(), seed in any::<u64>(), n in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = sample(kind, n, &mut rng);
        let b = sample(kind, n, &mut rng);
        let ab = w2_bipartite(&a, &b, 2).unwrap().cost;
        let ba = w2_bipartite(&b, &a, 2).unwrap().cost;
        prop_assert!((ab - ba).abs() < 1e-12);
        let mut shuffled = b.clone();
        shuffled.points.reverse();
        shuffled.points.rotate_left(seed as usize % n);
        prop_assert!((w2_bipartite(&a, &shuffled, 2).unwrap().cost - ab).abs() < 1e-12);
        // explicit matrix path agrees
        let m: Vec<Vec<f64>> = a.points.iter().map(|x| b.points.iter().map(|y| a.domain.distance_sq(x, y)).collect()).collect();
        prop_assert!((exact_assignment(&m).unwrap().cost / n as f64 - ab).abs() < 1e-12);
    }

    #[test]
    fn w1_below_w2_and_torus_below_square(seed in any::<u64>(), n in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = sample(DomainKind::Square, n, &mut rng);
        let b = sample(DomainKind::Square, n, &mut rng);
        let w1 = w2_bipartite(&a, &b, 1).unwrap().cost;
        let w2sq = w2_bipartite(&a, &b, 2).unwrap().cost;
        prop_assert!(w1 <= w2sq.sqrt() + 1e-12);
        let t = DomainGeometry::new(DomainKind::Torus2);
        let at = EmpiricalSample::new(t, a.points.clone()).unwrap();
        let bt = EmpiricalSample::new(t, b.points.clone()).unwrap();
        prop_assert!(w2_bipartite(&at, &bt, 2).unwrap().cost <= w2sq + 1e-12);
    }

    #[test]
    fn hopf_cole_maximum_principle_and_lipschitz(seed in any::<u64>(), amp in 0.05..2.0f64, si in 0usize..4) {
        let f = smooth_field(seed, 24, amp);
        let sigma = [0.2, 0.05, 0.02, 0.01][si];
        prop_assume!(sigma >= (f.max() - f.min()) / 700.0);
        let mut previous = f.integral();
        for t in [0.25, 0.5, 1.0] {
            let phi = hopf_cole_flow(&f, sigma, t).unwrap().phi;
            let tol = 1e-12 * (1.0 + f.max().abs() + f.min().abs());
            prop_assert!(phi.min() >= f.min() - tol && phi.max() <= f.max() + tol);
            prop_assert!(phi.grid_lipschitz() <= f.grid_lipschitz() * (1.0 + 1e-10) + 1e-12);
            // int phi_t dm is nonincreasing in t
            let now = phi.integral();
            prop_assert!(now <= previous + tol);
            previous = now;
        }
    }

    #[test]
    fn hopf_cole_energy_inequality(seed in any::<u64>(), amp in 0.01..0.5f64) {
        let f = smooth_field(seed, 32, amp);
        let sigma = 0.02;
        let phi1 = hopf_cole_flow(&f, sigma, 1.0).unwrap().phi;
        let lap_pos = f.periodic_laplacian().unwrap().values.iter().fold(0.0f64, |a, v| a.max(*v));
        let energy = f.periodic_dirichlet_energy().unwrap();
        let drop = f.integral() - phi1.integral();
        prop_assert!(drop <= lap_pos.exp() * energy / 2.0 + 1e-12, "{drop} vs {}", lap_pos.exp() * energy / 2.0);
    }

    #[test]
    fn dual_pair_constraint_holds_with_slack(seed in any::<u64>(), amp in 0.01..0.3f64) {
        let f = smooth_field(seed, 32, amp);
        let dual = dual_potential(&f, &sigma_schedule(1e-4)).unwrap();
        let d = f.domain;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for _ in 0..10_000 {
            let x = rng.random_range(0..f.len());
            let y = rng.random_range(0..f.len());
            let c = 0.5 * d.distance_sq(&f.node(x), &f.node(y));
            prop_assert!(f.values[x] + dual.g.values[y] <= c + dual.slack + 1e-12);
        }
        // the viscous partner stays below the Hopf-Lax transform up to the slack
        let q = hopf_lax(&f.map(|v| -v), 1.0).unwrap();
        for (g, q) in dual.g.values.iter().zip(&q.values) {
            prop_assert!(*g <= q + dual.slack + 1e-12);
        }
    }
}

#[test]
fn tail_rate_is_monotone() {
    let cs = [0.1, 0.5, 1.0, 2.0, 10.0];
    let etas = [0.01, 0.1, 0.5, 1.0, 3.0];
    for (a, &c) in cs.iter().enumerate() {
        for (b, &eta) in etas.iter().enumerate() {
            let v = tail_rate(c, eta).unwrap();
            if a > 0 {
                assert!(v <= tail_rate(cs[a - 1], eta).unwrap() + 1e-12);
            }
            if b > 0 {
                assert!(v >= tail_rate(c, etas[b - 1]).unwrap() - 1e-12);
            }
        }
    }
}

#[test]
fn quantization_slack_is_honest_in_one_dimension() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for trial in 0..1000 {
        let n = [1, 2, 4, 8][trial % 4];
        let a = sample(DomainKind::Interval, n, &mut rng);
        let exact = w2_interval_to_uniform(&a.xs()).unwrap().cost;
        let q = w2_to_uniform_quantized(&a, 4 * n).unwrap();
        assert!((q.cost - exact).abs() <= q.slack, "trial {trial}: {} vs {exact} (slack {})", q.cost, q.slack);
    }
}
