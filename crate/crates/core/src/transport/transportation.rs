//! Transportation problem between two discrete measures with arbitrary
//! weights, by successive shortest paths with node potentials on the dense
//! bipartite residual graph.

use crate::error::{Error, Result};

/// Optimal coupling between supplies `a` and demands `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportationPlan {
    /// `flow[i * nb + j]`
    pub flow: Vec<f64>,
    pub cost: f64,
    pub row_duals: Vec<f64>,
    pub col_duals: Vec<f64>,
}

const MASS_EPS: f64 = 1e-15;

/// Solves `min sum c_ij x_ij` over couplings of `a` and `b` (equal totals).
pub fn solve_transportation<F>(a: &[f64], b: &[f64], cost: F) -> Result<TransportationPlan>
where
    F: Fn(usize, usize) -> f64,
{
    let (na, nb) = (a.len(), b.len());
    if na == 0 || nb == 0 {
        return Err(Error::InvalidArgument("transportation needs nonempty marginals".into()));
    }
    if a.iter().chain(b).any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
    }
    let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
    if (sa - sb).abs() > 1e-9 * sa.max(sb).max(1.0) {
        return Err(Error::InvalidArgument(format!("unbalanced marginals: {sa} vs {sb}")));
    }
    let mut c = vec![0.0; na * nb];
    let mut cmax: f64 = 0.0;
    for i in 0..na {
        for j in 0..nb {
            let v = cost(i, j);
            if !v.is_finite() {
                return Err(Error::NonfiniteCost(i, j));
            }
            cmax = cmax.max(v.abs());
            c[i * nb + j] = v;
        }
    }
    let mut supply = a.to_vec();
    let mut demand: Vec<f64> = b.iter().map(|w| w * sa / sb).collect();
    let mut flow = vec![0.0; na * nb];
    // potentials: reduced cost c_ij + pr_i - pc_j >= 0
    let mut pr = vec![0.0; na];
    let mut pc = vec![0.0; nb];
    for j in 0..nb {
        pc[j] = (0..na).map(|i| c[i * nb + j]).fold(f64::INFINITY, f64::min);
    }
    let tol_mass = MASS_EPS * sa.max(1.0) * (na + nb) as f64;
    let mut dr = vec![0.0; na];
    let mut dc = vec![0.0; nb];
    let mut done_r = vec![false; na];
    let mut done_c = vec![false; nb];
    let mut pred_c = vec![0usize; nb]; // row preceding a column
    let mut pred_r = vec![usize::MAX; na]; // column preceding a row (MAX: source)
    loop {
        let remaining: f64 = supply.iter().sum();
        if remaining <= tol_mass {
            break;
        }
        // Dijkstra from all rows with supply
        for i in 0..na {
            dr[i] = if supply[i] > MASS_EPS { 0.0 } else { f64::INFINITY };
            done_r[i] = false;
            pred_r[i] = usize::MAX;
        }
        dc.iter_mut().for_each(|d| *d = f64::INFINITY);
        done_c.iter_mut().for_each(|d| *d = false);
        let sink;
        loop {
            // closest unfinished node
            let mut best = (f64::INFINITY, usize::MAX, false);
            for i in 0..na {
                if !done_r[i] && dr[i] < best.0 {
                    best = (dr[i], i, true);
                }
            }
            for j in 0..nb {
                if !done_c[j] && dc[j] < best.0 {
                    best = (dc[j], j, false);
                }
            }
            let (d, node, is_row) = best;
            if node == usize::MAX {
                return Err(Error::InvalidArgument("transportation: no augmenting path".into()));
            }
            if is_row {
                done_r[node] = true;
                let row = &c[node * nb..(node + 1) * nb];
                for j in 0..nb {
                    if !done_c[j] {
                        let nd = d + (row[j] + pr[node] - pc[j]).max(0.0);
                        if nd < dc[j] {
                            dc[j] = nd;
                            pred_c[j] = node;
                        }
                    }
                }
            } else {
                done_c[node] = true;
                if demand[node] > MASS_EPS {
                    sink = node;
                    break;
                }
                // backward arcs along positive flow have zero reduced cost
                for i in 0..na {
                    if !done_r[i] && flow[i * nb + node] > 0.0 && d < dr[i] {
                        dr[i] = d;
                        pred_r[i] = node;
                    }
                }
            }
        }
        let dist = dc[sink];
        // shifting by distances capped at the sink keeps reduced costs nonnegative
        for i in 0..na {
            pr[i] += dr[i].min(dist);
        }
        for j in 0..nb {
            pc[j] += dc[j].min(dist);
        }
        // walk back from the sink to find the bottleneck
        let mut amount = demand[sink];
        let mut j = sink;
        let source;
        loop {
            let i = pred_c[j];
            match pred_r[i] {
                usize::MAX => {
                    source = i;
                    break;
                }
                jb => {
                    amount = amount.min(flow[i * nb + jb]);
                    j = jb;
                }
            }
        }
        amount = amount.min(supply[source]);
        let mut j = sink;
        loop {
            let i = pred_c[j];
            flow[i * nb + j] += amount;
            match pred_r[i] {
                usize::MAX => break,
                jb => {
                    let f = &mut flow[i * nb + jb];
                    *f -= amount;
                    if *f < MASS_EPS {
                        *f = 0.0;
                    }
                    j = jb;
                }
            }
        }
        supply[source] -= amount;
        demand[sink] -= amount;
        if supply[source] < MASS_EPS {
            supply[source] = 0.0;
        }
        if demand[sink] < MASS_EPS {
            demand[sink] = 0.0;
        }
    }
    let total: f64 = flow.iter().zip(&c).map(|(x, c)| x * c).sum();
    // certificate: u_i = -pr_i, v_j = pc_j with c_ij - u_i - v_j >= 0, tight on the support
    let tol = 1e-9 * (1.0 + cmax);
    for i in 0..na {
        for j in 0..nb {
            let r = c[i * nb + j] + pr[i] - pc[j];
            if r < -tol || (flow[i * nb + j] > 0.0 && r > tol) {
                return Err(Error::Certificate(format!("reduced cost {r:.3e} at ({i}, {j})")));
            }
        }
    }
    Ok(TransportationPlan {
        flow,
        cost: total,
        row_duals: pr.iter().map(|p| -p).collect(),
        col_duals: pc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::assignment::solve_assignment;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_weights_agree_with_assignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.random_range(1..20);
            let c: Vec<f64> = (0..n * n).map(|_| rng.random()).collect();
            let w = vec![1.0 / n as f64; n];
            let t = solve_transportation(&w, &w, |i, j| c[i * n + j]).unwrap();
            let a = solve_assignment(n, |i, j| c[i * n + j]).unwrap();
            assert!((t.cost - a.cost / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn marginals_are_respected_and_duals_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let na = rng.random_range(1..15);
            let nb = rng.random_range(1..15);
            let mut a: Vec<f64> = (0..na).map(|_| rng.random::<f64>()).collect();
            let mut b: Vec<f64> = (0..nb).map(|_| rng.random::<f64>()).collect();
            let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
            a.iter_mut().for_each(|x| *x /= sa);
            b.iter_mut().for_each(|x| *x /= sb);
            let c: Vec<f64> = (0..na * nb).map(|_| rng.random()).collect();
            let t = solve_transportation(&a, &b, |i, j| c[i * nb + j]).unwrap();
            for i in 0..na {
                let row: f64 = (0..nb).map(|j| t.flow[i * nb + j]).sum();
                assert!((row - a[i]).abs() < 1e-12);
            }
            for j in 0..nb {
                let col: f64 = (0..na).map(|i| t.flow[i * nb + j]).sum();
                assert!((col - b[j]).abs() < 1e-12);
            }
            assert!(t.flow.iter().all(|&x| x >= 0.0));
            let dual: f64 = a.iter().zip(&t.row_duals).map(|(w, u)| w * u).sum::<f64>()
                + b.iter().zip(&t.col_duals).map(|(w, v)| w * v).sum::<f64>();
            assert!((dual - t.cost).abs() < 1e-10);
        }
    }
}
