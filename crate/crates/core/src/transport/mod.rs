//! Discrete Wasserstein-1 distances: an exact primal solver, an independent solver for the
//! Kantorovich-Rubinstein dual, and shortest-path costs on configuration space.

pub mod config;
pub mod lp;
pub mod network;

pub use config::{config_cost, config_cost_with_cap, wasserstein_configs, ConfigCost, CostMethod, CONFIG_GRAPH_CAP};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{CostMatrix, Lattice, Region};

/// Marginals must sum to one within this.
pub const MASS_TOL: f64 = 1e-10;
/// Allowed `|primal - dual|` relative to `max(1, primal)`.
pub const DUALITY_TOL: f64 = 1e-9;
const LIPSCHITZ_TOL: f64 = 1e-12;
const MAX_CUT_ROUNDS: usize = 500;

/// Optimal coupling; `get(i, j)` is the mass moved from `x_i` to `y_j`, so row sums give
/// `x` and column sums give `y`.
#[derive(Debug, Clone, Serialize)]
pub struct TransportPlan {
    n: usize,
    coupling: Vec<f64>,
}

impl TransportPlan {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.coupling[i * self.n + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n).map(|j| (0..self.n).map(|i| self.get(i, j)).sum()).collect()
    }

    pub fn cost(&self, c: &CostMatrix) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                total += self.get(i, j) * c.get(i, j);
            }
        }
        total
    }

    /// Nonzero entries as `(from, to, mass)`.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                let m = self.get(i, j);
                if m > 0.0 {
                    out.push((i, j, m));
                }
            }
        }
        out
    }
}

/// Dual potential with `|phi_i - phi_j| <= c_ij`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzPotential(pub Vec<f64>);

impl LipschitzPotential {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// `phi^T (x - y)`.
    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> f64 {
        self.0.iter().zip(x.iter().zip(y)).map(|(p, (a, b))| p * (a - b)).sum()
    }

    /// `max (|phi_i - phi_j| - c_ij)`, zero or negative when feasible.
    pub fn max_violation(&self, c: &CostMatrix) -> f64 {
        let n = self.0.len();
        let mut worst = f64::NEG_INFINITY;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max((self.0[i] - self.0[j]).abs() - c.get(i, j));
                }
            }
        }
        if n < 2 {
            0.0
        } else {
            worst
        }
    }
}

fn validate(x: &[f64], y: &[f64], c: &CostMatrix) -> Result<()> {
    let n = c.len();
    if x.len() != n || y.len() != n {
        return Err(Error::Distribution(format!(
            "marginals have lengths {} and {}, cost table has {n} points",
            x.len(),
            y.len()
        )));
    }
    for (name, d) in [("x", x), ("y", y)] {
        if d.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Distribution(format!("{name} has negative or non-finite mass")));
        }
        let s: f64 = d.iter().sum();
        if (s - 1.0).abs() > MASS_TOL {
            return Err(Error::Distribution(format!("{name} sums to {s}, expected 1")));
        }
    }
    let certified = c.exponent().is_some_and(|e| e > 0.0 && e <= 1.0);
    if !certified && !c.verify_triangle() {
        return Err(Error::Distribution("cost table is not a metric".into()));
    }
    Ok(())
}

fn support(d: &[f64]) -> Vec<usize> {
    (0..d.len()).filter(|&i| d[i] > 0.0).collect()
}

/// Minimum-cost coupling between `x` and `y`.
pub fn wasserstein_primal(x: &[f64], y: &[f64], c: &CostMatrix) -> Result<(f64, TransportPlan)> {
    validate(x, y, c)?;
    let n = c.len();
    let rows = support(x);
    let cols = support(y);
    let supply: Vec<f64> = rows.iter().map(|&i| x[i]).collect();
    let demand: Vec<f64> = cols.iter().map(|&j| y[j]).collect();
    let sol = network::solve(&supply, &demand, |a, b| c.get(rows[a], cols[b]))?;
    let mut coupling = vec![0.0; n * n];
    for (a, b, f) in sol.cells {
        coupling[rows[a] * n + cols[b]] += f;
    }
    Ok((sol.value, TransportPlan { n, coupling }))
}

/// `W_1(x, y)` from the primal solver.
pub fn wasserstein(x: &[f64], y: &[f64], c: &CostMatrix) -> Result<f64> {
    Ok(wasserstein_primal(x, y, c)?.0)
}

/// `max phi^T (x - y)` over potentials that are 1-Lipschitz for `c`.
///
/// Solved as a linear program on the joint support with lazily added difference
/// constraints, then extended to every point by the McShane formula.
pub fn wasserstein_dual(x: &[f64], y: &[f64], c: &CostMatrix) -> Result<(f64, LipschitzPotential)> {
    validate(x, y, c)?;
    let n = c.len();
    let s: Vec<usize> = (0..n).filter(|&i| x[i] > 0.0 || y[i] > 0.0).collect();
    if s.len() <= 1 {
        return Ok((0.0, LipschitzPotential(vec![0.0; n])));
    }
    let phi_s = dual_on_support(x, y, c, &s)?;
    // McShane extension keeps the Lipschitz constant under the triangle inequality.
    let mut phi = vec![0.0; n];
    for (k, p) in phi.iter_mut().enumerate() {
        *p = s.iter().zip(&phi_s).map(|(&si, &ps)| ps + c.get(si, k)).fold(f64::INFINITY, f64::min);
    }
    let potential = LipschitzPotential(phi);
    Ok((potential.evaluate(x, y), potential))
}

/// Variables `psi_i = phi_i + c_{i0}` for support points `1..k` (with `phi_0 = 0`), all
/// nonnegative; `phi_i <= c_{i0}` becomes `psi_i <= 2 c_{i0}` and differences become
/// `psi_i - psi_j <= c_ij + c_{i0} - c_{j0}`, whose right side is nonnegative for metrics.
fn dual_on_support(x: &[f64], y: &[f64], c: &CostMatrix, s: &[usize]) -> Result<Vec<f64>> {
    let k = s.len();
    let nv = k - 1;
    let c0 = |i: usize| c.get(s[i + 1], s[0]);
    let cij = |i: usize, j: usize| c.get(s[i + 1], s[j + 1]);
    let objective: Vec<f64> = (0..nv).map(|i| x[s[i + 1]] - y[s[i + 1]]).collect();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..nv {
        let mut r = vec![0.0; nv];
        r[i] = 1.0;
        rows.push(r);
        rhs.push(2.0 * c0(i));
    }
    let mut active = vec![false; nv * nv];
    let mut add_pair = |rows: &mut Vec<Vec<f64>>, rhs: &mut Vec<f64>, i: usize, j: usize| {
        if active[i * nv + j] {
            return false;
        }
        active[i * nv + j] = true;
        let mut r = vec![0.0; nv];
        r[i] = 1.0;
        r[j] = -1.0;
        rows.push(r);
        rhs.push((cij(i, j) + c0(i) - c0(j)).max(0.0));
        true
    };
    // Seed with each point's nearest neighbour in both directions.
    for i in 0..nv {
        if let Some(j) = (0..nv).filter(|&j| j != i).min_by(|&a, &b| cij(i, a).total_cmp(&cij(i, b))) {
            add_pair(&mut rows, &mut rhs, i, j);
            add_pair(&mut rows, &mut rhs, j, i);
        }
    }
    for _ in 0..MAX_CUT_ROUNDS {
        let sol = lp::maximize(&objective, &rows, &rhs)?;
        let phi: Vec<f64> = std::iter::once(0.0).chain((0..nv).map(|i| sol.x[i] - c0(i))).collect();
        // Add the most violated difference constraint for every point.
        let mut added = false;
        for i in 0..nv {
            let mut worst = LIPSCHITZ_TOL;
            let mut arg = None;
            for j in 0..nv {
                if j == i {
                    continue;
                }
                let excess = phi[i + 1] - phi[j + 1] - cij(i, j);
                if excess > worst {
                    worst = excess;
                    arg = Some(j);
                }
            }
            if let Some(j) = arg {
                added |= add_pair(&mut rows, &mut rhs, i, j);
            }
        }
        if !added {
            return Ok(phi);
        }
    }
    Err(Error::Lp(format!("dual did not settle after {MAX_CUT_ROUNDS} constraint rounds")))
}

/// `|primal - dual|`.
pub fn duality_gap(x: &[f64], y: &[f64], c: &CostMatrix) -> Result<f64> {
    let (p, _) = wasserstein_primal(x, y, c)?;
    let (d, _) = wasserstein_dual(x, y, c)?;
    Ok((p - d).abs())
}

/// Whether a gap is within the certificate tolerance for a given primal value.
pub fn gap_within_tolerance(gap: f64, primal: f64) -> bool {
    gap <= DUALITY_TOL * primal.abs().max(1.0)
}

/// `mu * d_XY^a` with `mu = x_Y(tau) - x_{X^c}(0)` clamped at zero.
///
/// When a fraction `mu` has been carried from `X` into `Y`, any coupling must move at least
/// that much mass across distance `d_XY`, so this is a lower bound on `W(x0, x_tau)` for
/// costs `|i - j|^a`.
pub fn region_transfer_lower_bound(
    x0: &[f64],
    x_tau: &[f64],
    x: &Region,
    y: &Region,
    lattice: &Lattice,
    exponent: f64,
) -> Result<f64> {
    let n = lattice.len();
    if x0.len() != n || x_tau.len() != n {
        return Err(Error::Distribution("concentration vectors do not match the lattice".into()));
    }
    let d = lattice.set_distance(x, y)?;
    let mu = measured_fraction(x0, x_tau, x, y);
    Ok(mu.max(0.0) * d.powf(exponent))
}

/// `x_Y(tau) - x_{X^c}(0)`, the fraction demonstrably moved from `X` into `Y`.
pub fn measured_fraction(x0: &[f64], x_tau: &[f64], x: &Region, y: &Region) -> f64 {
    let outside_x: f64 = (0..x0.len()).filter(|s| !x.contains(*s)).map(|s| x0[s]).sum();
    let in_y: f64 = y.sites().iter().map(|&s| x_tau[s]).sum();
    in_y - outside_x
}
