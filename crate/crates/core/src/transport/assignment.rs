//! Dense linear assignment by the Jonker-Volgenant shortest augmenting path
//! method. Costs are read through a closure so that `n x n` matrices of
//! geometric costs never need to be materialized.

use crate::error::{Error, Result};

/// Optimal assignment with its dual certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `row_to_col[i]` is the column matched to row `i`.
    pub row_to_col: Vec<usize>,
    pub cost: f64,
    pub row_duals: Vec<f64>,
    pub col_duals: Vec<f64>,
}

impl Assignment {
    /// Dual objective `sum u + sum v`.
    pub fn dual_objective(&self) -> f64 {
        self.row_duals.iter().sum::<f64>() + self.col_duals.iter().sum::<f64>()
    }
}

/// Solves `min_sigma sum_i cost(i, sigma(i))` over permutations.
///
/// The result is checked before returning: every reduced cost
/// `c_ij - u_i - v_j` must be nonnegative and every matched one zero, up to
/// rounding relative to the largest cost seen.
pub fn solve_assignment<F>(n: usize, cost: F) -> Result<Assignment>
where
    F: Fn(usize, usize) -> f64,
{
    if n == 0 {
        return Err(Error::InvalidArgument("assignment needs n >= 1".into()));
    }
    const NONE: usize = usize::MAX;
    const ARR_BUDGET: usize = 2;
    let mut v = vec![0.0f64; n];
    let mut rowsol = vec![NONE; n];
    let mut colsol = vec![NONE; n];
    let mut matches = vec![0usize; n];

    // column reduction
    let mut cmax: f64 = 0.0;
    for j in (0..n).rev() {
        let mut min = f64::INFINITY;
        let mut imin = 0;
        for i in 0..n {
            let c = cost(i, j);
            if !c.is_finite() {
                return Err(Error::NonfiniteCost(i, j));
            }
            cmax = cmax.max(c.abs());
            if c < min {
                min = c;
                imin = i;
            }
        }
        v[j] = min;
        matches[imin] += 1;
        if matches[imin] == 1 {
            rowsol[imin] = j;
            colsol[j] = imin;
        } else if v[j] < v[rowsol[imin]] {
            let j1 = rowsol[imin];
            rowsol[imin] = j;
            colsol[j] = imin;
            colsol[j1] = NONE;
        } else {
            colsol[j] = NONE;
        }
    }

    // reduction transfer
    let mut free: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        if matches[i] == 0 {
            free.push(i);
        } else if matches[i] == 1 && n > 1 {
            let j1 = rowsol[i];
            let mut min = f64::INFINITY;
            for j in 0..n {
                if j != j1 {
                    min = min.min(cost(i, j) - v[j]);
                }
            }
            v[j1] -= min;
        }
    }

    // augmenting row reduction, two passes
    for _ in 0..2 {
        let prv = std::mem::take(&mut free);
        let mut queue = prv;
        let mut k = 0;
        let mut budget = ARR_BUDGET * n;
        // rows displaced with a strict price drop are retried in place
        while k < queue.len() {
            if budget == 0 {
                // price wars on near-ties are cheaper to settle by augmentation
                free.extend_from_slice(&queue[k..]);
                break;
            }
            budget -= 1;
            let i = queue[k];
            k += 1;
            let mut umin = cost(i, 0) - v[0];
            let mut j1 = 0;
            let mut j2 = NONE;
            let mut usubmin = f64::INFINITY;
            for j in 1..n {
                let h = cost(i, j) - v[j];
                if h < usubmin {
                    if h >= umin {
                        usubmin = h;
                        j2 = j;
                    } else {
                        usubmin = umin;
                        umin = h;
                        j2 = j1;
                        j1 = j;
                    }
                }
            }
            let mut i0 = colsol[j1];
            let strict = umin < usubmin;
            if strict {
                v[j1] -= usubmin - umin;
            } else if i0 != NONE && j2 != NONE {
                j1 = j2;
                i0 = colsol[j2];
            }
            rowsol[i] = j1;
            colsol[j1] = i;
            if i0 != NONE {
                rowsol[i0] = NONE;
                if strict {
                    k -= 1;
                    queue[k] = i0;
                } else {
                    free.push(i0);
                }
            }
        }
    }

    // augmentation by Dijkstra over reduced costs
    let mut d = vec![0.0f64; n];
    let mut pred = vec![0usize; n];
    let mut collist: Vec<usize> = (0..n).collect();
    for &freerow in &free {
        for j in 0..n {
            d[j] = cost(freerow, j) - v[j];
            pred[j] = freerow;
            collist[j] = j;
        }
        let mut low = 0;
        let mut up = 0;
        let mut last = 0;
        let mut min = 0.0;
        let endofpath;
        'search: loop {
            if up == low {
                last = low;
                min = d[collist[up]];
                up += 1;
                for k in up..n {
                    let j = collist[k];
                    let h = d[j];
                    if h <= min {
                        if h < min {
                            up = low;
                            min = h;
                        }
                        collist[k] = collist[up];
                        collist[up] = j;
                        up += 1;
                    }
                }
                for &j in &collist[low..up] {
                    if colsol[j] == NONE {
                        endofpath = j;
                        break 'search;
                    }
                }
            }
            let j1 = collist[low];
            low += 1;
            let i = colsol[j1];
            let h = cost(i, j1) - v[j1] - min;
            let mut k = up;
            while k < n {
                let j = collist[k];
                let v2 = cost(i, j) - v[j] - h;
                if v2 < d[j] {
                    pred[j] = i;
                    if v2 <= min {
                        if colsol[j] == NONE {
                            endofpath = j;
                            // columns scanned so far get their final distance
                            d[j] = v2;
                            break 'search;
                        }
                        collist[k] = collist[up];
                        collist[up] = j;
                        up += 1;
                    }
                    d[j] = v2;
                }
                k += 1;
            }
        }
        // price update for the columns finalized before the last minimum
        for &j in &collist[..last] {
            v[j] += d[j] - min;
        }
        let mut j = endofpath;
        loop {
            let i = pred[j];
            colsol[j] = i;
            let next = rowsol[i];
            rowsol[i] = j;
            j = next;
            if i == freerow {
                break;
            }
        }
    }

    let mut u = vec![0.0; n];
    let mut total = 0.0;
    for i in 0..n {
        let j = rowsol[i];
        let c = cost(i, j);
        u[i] = c - v[j];
        total += c;
    }
    let result = Assignment { row_to_col: rowsol, cost: total, row_duals: u, col_duals: v };
    verify_certificate(&result, &cost, cmax)?;
    Ok(result)
}

/// Checks dual feasibility of `(u, v)` against every entry.
fn verify_certificate<F>(a: &Assignment, cost: &F, cmax: f64) -> Result<()>
where
    F: Fn(usize, usize) -> f64,
{
    let n = a.row_to_col.len();
    let tol = 1e-9 * (1.0 + cmax) * (n as f64).sqrt().max(1.0);
    let mut seen = vec![false; n];
    for &j in &a.row_to_col {
        if j >= n || std::mem::replace(&mut seen[j], true) {
            return Err(Error::Certificate(format!("row_to_col is not a permutation (column {j})")));
        }
    }
    for i in 0..n {
        let ui = a.row_duals[i];
        for j in 0..n {
            let r = cost(i, j) - ui - a.col_duals[j];
            if r < -tol {
                return Err(Error::Certificate(format!("reduced cost {r:.3e} at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Assignment on an explicit matrix (rows of equal length).
pub fn exact_assignment(cost_matrix: &[Vec<f64>]) -> Result<Assignment> {
    let n = cost_matrix.len();
    if let Some(row) = cost_matrix.iter().find(|r| r.len() != n) {
        return Err(Error::LengthMismatch(row.len(), n));
    }
    solve_assignment(n, |i, j| cost_matrix[i][j])
}

/// Optimal many-to-one assignment with its dual certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacitatedAssignment {
    /// `row_to_col[i]` is the column receiving row `i`.
    pub row_to_col: Vec<usize>,
    pub cost: f64,
    pub row_duals: Vec<f64>,
    pub col_duals: Vec<f64>,
}

/// Candidate arcs kept per row before the dense certificate check.
const CANDIDATES: usize = 24;

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Item {
    // reversed: BinaryHeap pops the smallest distance
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

struct Sparse {
    cols: usize,
    capacity: usize,
    arcs: Vec<Vec<(usize, f64)>>,
    u: Vec<f64>,
    v: Vec<f64>,
    row_col: Vec<usize>,
    members: Vec<Vec<usize>>,
    d: Vec<f64>,
    pred: Vec<usize>,
    done: Vec<bool>,
}

impl Sparse {
    const NONE: usize = usize::MAX;

    fn unassign(&mut self, i: usize) {
        let j = std::mem::replace(&mut self.row_col[i], Self::NONE);
        if j != Self::NONE {
            let pos = self.members[j].iter().position(|&r| r == i).expect("row listed under its column");
            self.members[j].swap_remove(pos);
        }
    }

    /// One shortest augmenting path from the free row `start`; false when the
    /// candidate graph has none.
    fn augment(&mut self, start: usize) -> bool {
        let mut heap = std::collections::BinaryHeap::new();
        let mut touched = Vec::new();
        let mut finalized = Vec::new();
        let mut reached = vec![(start, 0.0)];
        for &(j, c) in &self.arcs[start] {
            let nd = c - self.u[start] - self.v[j];
            if nd < self.d[j] {
                if self.d[j] == f64::INFINITY {
                    touched.push(j);
                }
                self.d[j] = nd;
                self.pred[j] = start;
                heap.push(Item(nd, j));
            }
        }
        let mut sink = None;
        while let Some(Item(dj, j)) = heap.pop() {
            if self.done[j] || dj > self.d[j] {
                continue;
            }
            self.done[j] = true;
            finalized.push(j);
            if self.members[j].len() < self.capacity {
                sink = Some((j, dj));
                break;
            }
            for &i in &self.members[j] {
                reached.push((i, dj));
                let base = dj - self.u[i];
                for &(jj, c) in &self.arcs[i] {
                    if !self.done[jj] {
                        let nd = base + c - self.v[jj];
                        if nd < self.d[jj] {
                            if self.d[jj] == f64::INFINITY {
                                touched.push(jj);
                            }
                            self.d[jj] = nd;
                            self.pred[jj] = i;
                            heap.push(Item(nd, jj));
                        }
                    }
                }
            }
        }
        if let Some((sink, dist)) = sink {
            for &j in &finalized {
                self.v[j] += self.d[j] - dist;
            }
            for &(i, di) in &reached {
                self.u[i] += dist - di;
            }
            let mut j = sink;
            loop {
                let i = self.pred[j];
                let old = self.row_col[i];
                self.unassign(i);
                self.row_col[i] = j;
                self.members[j].push(i);
                if old == Self::NONE {
                    break;
                }
                j = old;
            }
        }
        for &j in &touched {
            self.d[j] = f64::INFINITY;
            self.done[j] = false;
        }
        sink.is_some()
    }
}

/// Assigns `rows = cols * capacity` rows so that every column receives
/// exactly `capacity` of them, minimizing the total cost.
///
/// Shortest augmenting paths run on a sparse graph of the cheapest arcs per
/// row. The duals are then checked against every entry of the dense matrix;
/// violated arcs are added and their rows re-augmented until the check
/// passes, so the result is optimal for the full problem.
pub fn solve_capacitated<F>(cols: usize, capacity: usize, cost: F) -> Result<CapacitatedAssignment>
where
    F: Fn(usize, usize) -> f64,
{
    if cols == 0 || capacity == 0 {
        return Err(Error::InvalidArgument("capacitated assignment needs cols, capacity >= 1".into()));
    }
    let rows = cols * capacity;
    let keep = (CANDIDATES + 4 * capacity).min(cols);
    let mut cmax: f64 = 0.0;
    let mut arcs = Vec::with_capacity(rows);
    let mut row = Vec::with_capacity(cols);
    for i in 0..rows {
        row.clear();
        for j in 0..cols {
            let c = cost(i, j);
            if !c.is_finite() {
                return Err(Error::NonfiniteCost(i, j));
            }
            cmax = cmax.max(c.abs());
            row.push((j, c));
        }
        if keep < cols {
            row.select_nth_unstable_by(keep - 1, |a, b| a.1.total_cmp(&b.1));
        }
        arcs.push(row[..keep].to_vec());
    }
    let tol = 1e-9 * (1.0 + cmax) * (rows as f64).sqrt();
    let mut s = Sparse {
        cols,
        capacity,
        arcs,
        u: vec![0.0; rows],
        v: vec![0.0; cols],
        row_col: vec![Sparse::NONE; rows],
        members: vec![Vec::with_capacity(capacity); cols],
        d: vec![f64::INFINITY; cols],
        pred: vec![0; cols],
        done: vec![false; cols],
    };
    let mut free = Vec::new();
    for i in 0..rows {
        let &(j, c) = s.arcs[i].iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("nonempty row");
        s.u[i] = c;
        if s.members[j].len() < capacity {
            s.row_col[i] = j;
            s.members[j].push(i);
        } else {
            free.push(i);
        }
    }
    loop {
        for &i in &free {
            if !s.augment(i) {
                // the candidate graph admits no completion; widen this row
                s.arcs[i] = (0..cols).map(|j| (j, cost(i, j))).collect();
                let m = s.arcs[i].iter().map(|&(j, c)| c - s.v[j]).fold(f64::INFINITY, f64::min);
                s.u[i] = m;
                if !s.augment(i) {
                    return Err(Error::Certificate("no augmenting path in the dense graph".into()));
                }
            }
        }
        free.clear();
        for i in 0..rows {
            let mut violated = false;
            for j in 0..s.cols {
                let c = cost(i, j);
                if c - s.u[i] - s.v[j] < -tol {
                    s.arcs[i].push((j, c));
                    violated = true;
                }
            }
            if violated {
                s.unassign(i);
                s.u[i] = s.arcs[i].iter().map(|&(j, c)| c - s.v[j]).fold(f64::INFINITY, f64::min);
                free.push(i);
            }
        }
        if free.is_empty() {
            break;
        }
    }
    if s.members.iter().any(|m| m.len() != capacity) {
        return Err(Error::Certificate("column loads differ from capacity".into()));
    }
    let mut total = 0.0;
    for i in 0..rows {
        let j = s.row_col[i];
        let c = cost(i, j);
        if (c - s.u[i] - s.v[j]).abs() > tol {
            return Err(Error::Certificate(format!("matched arc ({i}, {j}) is not tight")));
        }
        total += c;
    }
    Ok(CapacitatedAssignment { row_to_col: s.row_col, cost: total, row_duals: s.u, col_duals: s.v })
}

/// Square assignment on geometric costs through the sparse solver.
pub fn solve_sparse_assignment<F>(n: usize, cost: F) -> Result<Assignment>
where
    F: Fn(usize, usize) -> f64,
{
    let s = solve_capacitated(n, 1, cost)?;
    Ok(Assignment { row_to_col: s.row_to_col, cost: s.cost, row_duals: s.row_duals, col_duals: s.col_duals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(c: &[Vec<f64>]) -> f64 {
        fn rec(c: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == c.len() {
                *best = best.min(acc);
                return;
            }
            for j in 0..c.len() {
                if !used[j] {
                    used[j] = true;
                    rec(c, row + 1, used, acc + c[row][j], best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(c, 0, &mut vec![false; c.len()], 0.0, &mut best);
        best
    }

    #[test]
    fn identity_favoring() {
        let n = 6;
        let c: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect()).collect();
        let a = exact_assignment(&c).unwrap();
        assert_eq!(a.row_to_col, (0..n).collect::<Vec<_>>());
        assert_eq!(a.cost, 0.0);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for inst in 0..1000 {
            let n = 1 + inst % 8;
            let integer = inst % 3 == 0;
            let c: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    (0..n)
                        .map(|_| if integer { rng.random_range(0..4) as f64 } else { rng.random::<f64>() })
                        .collect()
                })
                .collect();
            let a = exact_assignment(&c).unwrap();
            let b = brute(&c);
            assert!((a.cost - b).abs() < 1e-12, "instance {inst}: {} vs {b}", a.cost);
            assert!((a.dual_objective() - a.cost).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_nonfinite() {
        let c = vec![vec![0.0, f64::NAN], vec![1.0, 0.0]];
        assert!(matches!(exact_assignment(&c), Err(Error::NonfiniteCost(0, 1))));
    }

    #[test]
    fn larger_random_instances_are_certified() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [50usize, 200, 500] {
            let pts: Vec<(f64, f64, f64, f64)> =
                (0..n).map(|_| (rng.random(), rng.random(), rng.random(), rng.random())).collect();
            let a = solve_assignment(n, |i, j| {
                let dx = pts[i].0 - pts[j].2;
                let dy = pts[i].1 - pts[j].3;
                dx * dx + dy * dy
            })
            .unwrap();
            assert!((a.dual_objective() - a.cost).abs() < 1e-9 * a.cost.max(1.0));
        }
    }

    #[test]
    fn capacitated_equals_replicated_assignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for inst in 0..300 {
            let cols = 1 + inst % 7;
            let cap = 1 + inst % 4;
            let rows = cols * cap;
            let integer = inst % 3 == 0;
            let c: Vec<f64> = (0..rows * cols)
                .map(|_| if integer { rng.random_range(0..3) as f64 } else { rng.random::<f64>() })
                .collect();
            let capd = solve_capacitated(cols, cap, |i, j| c[i * cols + j]).unwrap();
            let rep = solve_assignment(rows, |i, j| c[i * cols + j / cap]).unwrap();
            assert!((capd.cost - rep.cost).abs() < 1e-12, "{inst}: {} vs {}", capd.cost, rep.cost);
            let realized: f64 = (0..rows).map(|i| c[i * cols + capd.row_to_col[i]]).sum();
            assert!((realized - capd.cost).abs() < 1e-12);
            let dual = capd.row_duals.iter().sum::<f64>() + cap as f64 * capd.col_duals.iter().sum::<f64>();
            assert!((dual - capd.cost).abs() < 1e-9);
        }
    }

    #[test]
    fn sparse_candidates_reach_the_dense_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for (n, cap) in [(60usize, 1usize), (300, 1), (600, 1), (100, 4), (64, 16)] {
            let rows: Vec<(f64, f64)> = (0..n * cap).map(|_| (rng.random(), rng.random())).collect();
            let cols: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
            let c = |i: usize, j: usize| {
                let (dx, dy) = (rows[i].0 - cols[j].0, rows[i].1 - cols[j].1);
                dx * dx + dy * dy
            };
            let sparse = solve_capacitated(n, cap, c).unwrap();
            let dense = solve_assignment(n * cap, |i, j| c(i, j / cap)).unwrap();
            assert!((sparse.cost - dense.cost).abs() < 1e-9 * dense.cost, "{n} {cap}");
        }
    }
}
