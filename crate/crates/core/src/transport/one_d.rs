//! Closed-form transport on the interval and the circle.

use crate::error::{Error, Result};

use super::TransportPlanResult;

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Permutation that sorts `xs`.
fn argsort(xs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    idx
}

/// `W_p^p` between two empirical measures on `[0, 1]` by monotone
/// rearrangement. Inputs need not be sorted; the assignment refers to the
/// input order.
pub fn wp_interval_empirical(xs: &[f64], ys: &[f64], p: u32) -> Result<TransportPlanResult> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let (ix, iy) = (argsort(xs), argsort(ys));
    let mut assignment = vec![0; xs.len()];
    let mut total = 0.0;
    for (&a, &b) in ix.iter().zip(&iy) {
        assignment[a] = b;
        total += (xs[a] - ys[b]).abs().powi(p as i32);
    }
    Ok(TransportPlanResult::exact(total / xs.len() as f64, Some(assignment)))
}

pub fn w2_interval_empirical(xs: &[f64], ys: &[f64]) -> Result<TransportPlanResult> {
    wp_interval_empirical(xs, ys, 2)
}

/// `W_2^2` between the empirical measure of `xs` and Lebesgue measure on
/// `[0, 1]`: `sum_k int_{(k-1)/n}^{k/n} (x_(k) - s)^2 ds`.
pub fn w2_interval_to_uniform(xs: &[f64]) -> Result<TransportPlanResult> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let n = xs.len() as f64;
    let total: f64 = sorted(xs)
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let (a, b) = (k as f64 / n, (k + 1) as f64 / n);
            ((x - a).powi(3) - (x - b).powi(3)) / 3.0
        })
        .sum();
    Ok(TransportPlanResult::exact(total, None))
}

fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(1.0 - d)
}

/// `W_p^p` between two empirical measures on the circle `R/Z`. The optimum
/// is a cyclic shift of the sorted matching; all `n` shifts are tried.
pub fn wp_circle_empirical(xs: &[f64], ys: &[f64], p: u32) -> Result<TransportPlanResult> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let n = xs.len();
    let (ix, iy) = (argsort(xs), argsort(ys));
    let mut best = (f64::INFINITY, 0);
    for s in 0..n {
        let c: f64 = (0..n)
            .map(|k| circle_dist(xs[ix[k]], ys[iy[(k + s) % n]]).powi(p as i32))
            .sum();
        if c < best.0 {
            best = (c, s);
        }
    }
    let mut assignment = vec![0; n];
    for k in 0..n {
        assignment[ix[k]] = iy[(k + best.1) % n];
    }
    Ok(TransportPlanResult::exact(best.0 / n as f64, Some(assignment)))
}

pub fn w2_circle_empirical(xs: &[f64], ys: &[f64]) -> Result<TransportPlanResult> {
    wp_circle_empirical(xs, ys, 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn interval_examples() {
        let xs = [0.3, 0.1, 0.8];
        assert_eq!(w2_interval_empirical(&xs, &xs).unwrap().cost, 0.0);
        assert_eq!(w2_interval_empirical(&[0.0], &[1.0]).unwrap().cost, 1.0);
        assert!(w2_interval_empirical(&[0.0], &[1.0, 0.5]).is_err());
        // midpoints, n = 2: 2 int_0^{1/2} (1/4 - s)^2 ds = 1/48
        let c = w2_interval_to_uniform(&[0.25, 0.75]).unwrap().cost;
        assert!((c - 1.0 / 48.0).abs() < 1e-15);
        let c = w2_interval_to_uniform(&[0.5]).unwrap().cost;
        assert!((c - 1.0 / 12.0).abs() < 1e-15);
    }

    fn brute_circle(xs: &[f64], ys: &[f64]) -> f64 {
        fn rec(xs: &[f64], ys: &[f64], k: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if k == xs.len() {
                *best = best.min(acc);
                return;
            }
            for j in 0..ys.len() {
                if !used[j] {
                    used[j] = true;
                    rec(xs, ys, k + 1, used, acc + circle_dist(xs[k], ys[j]).powi(2), best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(xs, ys, 0, &mut vec![false; ys.len()], 0.0, &mut best);
        best / xs.len() as f64
    }

    #[test]
    fn circle_matches_factorial_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for inst in 0..1000 {
            let n = 1 + inst % 8;
            let xs: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let ys: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let got = w2_circle_empirical(&xs, &ys).unwrap();
            let want = brute_circle(&xs, &ys);
            assert!((got.cost - want).abs() < 1e-14, "{inst}: {} vs {want}", got.cost);
            // the returned assignment realizes the cost
            let a = got.assignment.unwrap();
            let c: f64 = (0..n).map(|i| circle_dist(xs[i], ys[a[i]]).powi(2)).sum::<f64>() / n as f64;
            assert!((c - got.cost).abs() < 1e-14);
        }
        assert_eq!(w2_circle_empirical(&[0.1], &[0.9]).unwrap().cost, circle_dist(0.1, 0.9).powi(2));
    }
}
