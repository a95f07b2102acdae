//! Transportation simplex (network simplex on the complete bipartite graph).
//!
//! Basic cells always form a spanning tree of the `n + m` row/column nodes, so the
//! basis keeps exactly `n + m - 1` cells, some possibly carrying zero flow.

use std::collections::VecDeque;

use crate::error::{Error, Result};

const REDUCED_COST_TOL: f64 = 1e-12;
/// Consecutive degenerate pivots before switching to the anti-cycling rule.
const DEGENERATE_STREAK: usize = 50;

/// Optimal basic solution of a balanced transportation problem.
#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub value: f64,
    /// `(row, column, flow)` for every basic cell.
    pub cells: Vec<(usize, usize, f64)>,
    /// Row potentials `u` and column potentials `v` with `u_i + v_j = c_ij` on basic cells.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub pivots: usize,
}

/// Minimises `sum c[i][j] f_ij` subject to row sums `supply` and column sums `demand`.
///
/// Masses must be nonnegative and balanced; `cost(i, j)` must be finite.
pub fn solve<F>(supply: &[f64], demand: &[f64], cost: F) -> Result<TransportSolution>
where
    F: Fn(usize, usize) -> f64,
{
    let n = supply.len();
    let m = demand.len();
    if n == 0 || m == 0 {
        return Err(Error::Distribution("empty transport problem".into()));
    }
    let c: Vec<f64> = (0..n * m).map(|k| cost(k / m, k % m)).collect();
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Distribution("non-finite cost".into()));
    }
    let mut basis = northwest_corner(supply, demand);
    let mut pivots = 0usize;
    let mut streak = 0usize;
    let limit = 50 * (n * m).max(100);
    loop {
        let (u, v) = potentials(n, m, &basis, &c);
        let entering = if streak < DEGENERATE_STREAK {
            most_negative(n, m, &c, &u, &v)
        } else {
            first_negative(n, m, &c, &u, &v)
        };
        let Some((ei, ej)) = entering else {
            let value = basis.iter().map(|&(i, j, f)| f * c[i * m + j]).sum();
            return Ok(TransportSolution { value, cells: basis, u, v, pivots });
        };
        pivots += 1;
        if pivots > limit {
            return Err(Error::Lp(format!("transportation simplex exceeded {limit} pivots")));
        }
        // The entering cell gains theta; the tree path joining its row and column has odd
        // length and alternates, starting and ending with cells that lose theta.
        let path = tree_path(n, m, &basis, n + ej, ei);
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (k, &b) in path.iter().enumerate() {
            if k % 2 == 0 {
                let f = basis[b].2;
                if leave == usize::MAX
                    || f < theta
                    || (f == theta && basis_key(&basis[b], m) < basis_key(&basis[leave], m))
                {
                    theta = f;
                    leave = b;
                }
            }
        }
        streak = if theta <= 0.0 { streak + 1 } else { 0 };
        for (k, &b) in path.iter().enumerate() {
            let f = &mut basis[b].2;
            if k % 2 == 0 {
                *f = (*f - theta).max(0.0);
            } else {
                *f += theta;
            }
        }
        basis[leave] = (ei, ej, theta);
    }
}

fn basis_key(cell: &(usize, usize, f64), m: usize) -> usize {
    cell.0 * m + cell.1
}

fn northwest_corner(supply: &[f64], demand: &[f64]) -> Vec<(usize, usize, f64)> {
    let (n, m) = (supply.len(), demand.len());
    let mut s = supply.to_vec();
    let mut d = demand.to_vec();
    let (mut i, mut j) = (0, 0);
    let mut cells = Vec::with_capacity(n + m - 1);
    loop {
        let f = s[i].min(d[j]).max(0.0);
        cells.push((i, j, f));
        s[i] -= f;
        d[j] -= f;
        if i + 1 == n && j + 1 == m {
            break;
        }
        // Advance the exhausted side; on ties advance the row unless rows are done.
        if j + 1 == m || (i + 1 < n && s[i] <= d[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }
    cells
}

/// Row and column potentials from the spanning tree, rooted at `u_0 = 0`.
fn potentials(n: usize, m: usize, basis: &[(usize, usize, f64)], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let adj = adjacency(n, m, basis);
    let mut pot = vec![f64::NAN; n + m];
    pot[0] = 0.0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(node) = queue.pop_front() {
        for &b in &adj[node] {
            let (i, j, _) = basis[b];
            let cost = c[i * m + j];
            let other = if node < n { n + j } else { i };
            if pot[other].is_nan() {
                pot[other] = cost - pot[node];
                queue.push_back(other);
            }
        }
    }
    let v = pot.split_off(n);
    (pot, v)
}

fn adjacency(n: usize, m: usize, basis: &[(usize, usize, f64)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n + m];
    for (b, &(i, j, _)) in basis.iter().enumerate() {
        adj[i].push(b);
        adj[n + j].push(b);
    }
    adj
}

fn most_negative(n: usize, m: usize, c: &[f64], u: &[f64], v: &[f64]) -> Option<(usize, usize)> {
    let mut best = -REDUCED_COST_TOL;
    let mut arg = None;
    for i in 0..n {
        for j in 0..m {
            let r = c[i * m + j] - u[i] - v[j];
            if r < best {
                best = r;
                arg = Some((i, j));
            }
        }
    }
    arg
}

fn first_negative(n: usize, m: usize, c: &[f64], u: &[f64], v: &[f64]) -> Option<(usize, usize)> {
    (0..n * m)
        .find(|&k| c[k] - u[k / m] - v[k % m] < -REDUCED_COST_TOL)
        .map(|k| (k / m, k % m))
}

/// Basis cells on the tree path from node `start` to node `goal`, in order.
fn tree_path(n: usize, m: usize, basis: &[(usize, usize, f64)], start: usize, goal: usize) -> Vec<usize> {
    let adj = adjacency(n, m, basis);
    let mut via = vec![usize::MAX; n + m];
    let mut seen = vec![false; n + m];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == goal {
            break;
        }
        for &b in &adj[node] {
            let (i, j, _) = basis[b];
            let other = if node < n { n + j } else { i };
            if !seen[other] {
                seen[other] = true;
                via[other] = b;
                queue.push_back(other);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = goal;
    while node != start {
        let b = via[node];
        path.push(b);
        let (i, j, _) = basis[b];
        node = if node < n { n + j } else { i };
    }
    path
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_instance() {
        // Classic 3x4 instance with optimum 743.
        let supply = [7.0, 9.0, 18.0];
        let demand = [5.0, 8.0, 7.0, 14.0];
        let c = [[19.0, 30.0, 50.0, 10.0], [70.0, 30.0, 40.0, 60.0], [40.0, 8.0, 70.0, 20.0]];
        let sol = solve(&supply, &demand, |i, j| c[i][j]).unwrap();
        assert!((sol.value - 743.0).abs() < 1e-9, "{}", sol.value);
        assert_eq!(sol.cells.len(), 6);
    }

    #[test]
    fn degenerate_ties() {
        let supply = [0.25; 4];
        let demand = [0.25; 4];
        let sol = solve(&supply, &demand, |_, _| 1.0).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-12);
        let sol = solve(&supply, &demand, |i, j| (i as f64 - j as f64).abs()).unwrap();
        assert!(sol.value.abs() < 1e-12);
    }
}
