//! Particle flows between sites and probability currents between configurations.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{FockBasis, State};
use crate::hamiltonian::HamiltonianModel;
use crate::lattice::CostMatrix;

/// Antisymmetric site-flow matrix; `get(i, j)` is the rate of concentration moving into
/// `i` from `j`, so `dx_i/dt = sum_j get(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowMatrix {
    n: usize,
    data: Vec<f64>,
}

impl FlowMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        Self { n, data: rows.concat() }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// `dx_i/dt` reconstructed from the flows.
    pub fn rates(&self) -> Vec<f64> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).sum()).collect()
    }

    /// `max |phi_ij + phi_ji|`.
    pub fn antisymmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                worst = worst.max((self.get(i, j) + self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Site flows `phi_ij = (2 / N) Im tr[K_ij rho]`, where `K_ij` is the part of the
/// Hamiltonian moving one boson from `j` to `i` (hopping plus any tunneling).
pub fn site_flows(state: &State, model: &HamiltonianModel, basis: &FockBasis) -> FlowMatrix {
    let n = basis.sites();
    let mut flows = FlowMatrix::zeros(n);
    if basis.total() == 0 {
        return flows;
    }
    let scale = 2.0 / basis.total() as f64;
    for a in 0..basis.dim() {
        let c = basis.config(a);
        for hop in basis.hop_neighbors(a) {
            let amp = model.hop_amplitude(c, hop.from, hop.to);
            if amp == 0.0 {
                continue;
            }
            // <c| rho |c'> with c' = c after the hop.
            let coherence = state.element(a, hop.target).im;
            flows.data[hop.to * n + hop.from] += scale * amp * coherence;
        }
    }
    flows
}

/// `Phi = (1/2) sum_{i != j} c_ij |phi_ij|`.
pub fn velocity_term(flows: &FlowMatrix, cost: &CostMatrix) -> f64 {
    let n = flows.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += cost.get(i, j) * flows.get(i, j).abs();
            }
        }
    }
    0.5 * total
}

/// Probability current between two neighbouring configurations.
///
/// `dp_a/dt` receives `+value` and `dp_b/dt` receives `-value`. The pair differs by one
/// boson at `site_a` (occupied in `a`) that sits at `site_b` in `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfigCurrent {
    pub a: usize,
    pub b: usize,
    pub site_a: usize,
    pub site_b: usize,
    pub value: f64,
}

/// Currents `-2 H_ab Im <a|rho|b>` over every unordered neighbouring pair.
pub fn config_currents(state: &State, model: &HamiltonianModel, basis: &FockBasis) -> Result<Vec<ConfigCurrent>> {
    if model.has_tunneling() {
        return Err(Error::Unsupported(
            "configuration currents are defined for tunneling-free models".into(),
        ));
    }
    let mut out = Vec::new();
    for a in 0..basis.dim() {
        let c = basis.config(a);
        for hop in basis.hop_neighbors(a) {
            if hop.target <= a {
                continue;
            }
            // <b|H|a> with b = a after moving a boson from `hop.from` to `hop.to`.
            let h_ba = model.hop_amplitude(c, hop.from, hop.to);
            let value = -2.0 * h_ba * state.element(a, hop.target).im;
            out.push(ConfigCurrent { a, b: hop.target, site_a: hop.from, site_b: hop.to, value });
        }
    }
    Ok(out)
}

/// `dp/dt` reconstructed from configuration currents.
pub fn probability_rates(currents: &[ConfigCurrent], dim: usize) -> Vec<f64> {
    let mut rates = vec![0.0; dim];
    for cur in currents {
        rates[cur.a] += cur.value;
        rates[cur.b] -= cur.value;
    }
    rates
}
