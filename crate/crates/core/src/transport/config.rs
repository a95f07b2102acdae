//! Transport costs between boson configurations.
//!
//! Moving one boson from `i` to `j` costs `|i - j|^a`; the cost between configurations is
//! the cheapest sequence of such hops.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use super::{network, MASS_TOL};
use crate::error::{Error, Result};
use crate::fock::{FockBasis, Occupation};
use crate::lattice::{CostMatrix, Lattice};

/// Largest hop graph searched directly.
pub const CONFIG_GRAPH_CAP: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMethod {
    /// Dijkstra over the hop graph.
    ShortestPath,
    /// Optimal matching of the occupation vectors, used when the hop graph exceeds the cap.
    /// It coincides with the shortest path for exponents in `(0, 1]` but is reported as a
    /// bound because the graph was not searched.
    Matching,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfigCost {
    pub value: f64,
    pub method: CostMethod,
}

impl ConfigCost {
    pub fn bound_only(&self) -> bool {
        self.method == CostMethod::Matching
    }
}

pub fn config_cost(a: &[Occupation], b: &[Occupation], lattice: &Lattice, exponent: f64) -> Result<ConfigCost> {
    config_cost_with_cap(a, b, lattice, exponent, CONFIG_GRAPH_CAP)
}

pub fn config_cost_with_cap(
    a: &[Occupation],
    b: &[Occupation],
    lattice: &Lattice,
    exponent: f64,
    cap: usize,
) -> Result<ConfigCost> {
    let costs = lattice.cost_matrix(exponent)?;
    let n = lattice.len();
    if a.len() != n || b.len() != n {
        return Err(Error::State(format!("configurations must have {n} sites")));
    }
    let total: usize = a.iter().map(|&v| v as usize).sum();
    if b.iter().map(|&v| v as usize).sum::<usize>() != total {
        return Err(Error::State("configurations hold different boson numbers".into()));
    }
    if a == b {
        return Ok(ConfigCost { value: 0.0, method: CostMethod::ShortestPath });
    }
    match FockBasis::with_cap(n, total, cap) {
        Ok(basis) => {
            let src = basis.index_of(a).expect("validated configuration");
            let dst = basis.index_of(b).expect("validated configuration");
            let dist = dijkstra(&basis, &costs, src, Some(dst));
            Ok(ConfigCost { value: dist[dst], method: CostMethod::ShortestPath })
        }
        Err(Error::DimensionCap { .. }) => Ok(ConfigCost { value: matching_cost(a, b, &costs)?, method: CostMethod::Matching }),
        Err(e) => Err(e),
    }
}

/// Minimum-cost assignment of the bosons of `a` onto those of `b`.
pub fn matching_cost(a: &[Occupation], b: &[Occupation], costs: &CostMatrix) -> Result<f64> {
    let supply: Vec<f64> = a.iter().map(|&v| v as f64).collect();
    let demand: Vec<f64> = b.iter().map(|&v| v as f64).collect();
    Ok(network::solve(&supply, &demand, |i, j| costs.get(i, j))?.value)
}

#[derive(Clone, Copy)]
struct Entry(f64, usize);

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    // Min-heap on distance.
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Shortest hop-path costs from `source`; stops early once `target` is settled.
pub fn dijkstra(basis: &FockBasis, costs: &CostMatrix, source: usize, target: Option<usize>) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; basis.dim()];
    let mut done = vec![false; basis.dim()];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::from([Entry(0.0, source)]);
    while let Some(Entry(d, node)) = heap.pop() {
        if done[node] {
            continue;
        }
        done[node] = true;
        if Some(node) == target {
            break;
        }
        for hop in basis.hop_neighbors(node) {
            let nd = d + costs.get(hop.from, hop.to);
            if nd < dist[hop.target] {
                dist[hop.target] = nd;
                heap.push(Entry(nd, hop.target));
            }
        }
    }
    dist
}

/// `W_1(p, q)` between distributions over the configurations of `basis`, with
/// configuration costs from [`config_cost`].
pub fn wasserstein_configs(p: &[f64], q: &[f64], basis: &FockBasis, lattice: &Lattice, exponent: f64) -> Result<ConfigCost> {
    let dim = basis.dim();
    if p.len() != dim || q.len() != dim {
        return Err(Error::Distribution(format!("distributions must have {dim} entries")));
    }
    for d in [p, q] {
        if d.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Distribution("negative or non-finite probability".into()));
        }
        let s: f64 = d.iter().sum();
        if (s - 1.0).abs() > MASS_TOL {
            return Err(Error::Distribution(format!("probabilities sum to {s}")));
        }
    }
    let costs = lattice.cost_matrix(exponent)?;
    let rows: Vec<usize> = (0..dim).filter(|&i| p[i] > 0.0).collect();
    let cols: Vec<usize> = (0..dim).filter(|&i| q[i] > 0.0).collect();
    let table: Vec<Vec<f64>> = if dim <= CONFIG_GRAPH_CAP {
        rows.iter()
            .map(|&r| {
                let d = dijkstra(basis, &costs, r, None);
                cols.iter().map(|&c| d[c]).collect()
            })
            .collect()
    } else {
        rows.iter()
            .map(|&r| cols.iter().map(|&c| matching_cost(basis.config(r), basis.config(c), &costs)).collect())
            .collect::<Result<_>>()?
    };
    let supply: Vec<f64> = rows.iter().map(|&i| p[i]).collect();
    let demand: Vec<f64> = cols.iter().map(|&j| q[j]).collect();
    let value = network::solve(&supply, &demand, |a, b| table[a][b])?.value;
    let method = if dim <= CONFIG_GRAPH_CAP { CostMethod::ShortestPath } else { CostMethod::Matching };
    Ok(ConfigCost { value, method })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Region;

    #[test]
    fn identical_configurations_cost_nothing() {
        let lat = Lattice::chain(4).unwrap();
        let c = config_cost(&[1, 2, 0, 1], &[1, 2, 0, 1], &lat, 0.7).unwrap();
        assert_eq!(c.value, 0.0);
    }

    #[test]
    fn single_hop_is_direct() {
        let lat = Lattice::chain(6).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let mut a = vec![0; 6];
                let mut b = vec![0; 6];
                a[i] = 1;
                b[j] = 1;
                let c = config_cost(&a, &b, &lat, 1.0).unwrap();
                assert!((c.value - (i as f64 - j as f64).abs()).abs() < 1e-12);
                // No two-hop detour is cheaper.
                for k in 0..6 {
                    let detour = (i as f64 - k as f64).abs() + (k as f64 - j as f64).abs();
                    assert!(c.value <= detour + 1e-12);
                }
            }
        }
    }

    #[test]
    fn dijkstra_matches_matching() {
        let lat = Lattice::hypercubic(2, &[2, 3]).unwrap();
        let basis = FockBasis::new(6, 3).unwrap();
        let costs = lat.cost_matrix(0.6).unwrap();
        for src in 0..basis.dim() {
            let d = dijkstra(&basis, &costs, src, None);
            for dst in 0..basis.dim() {
                let m = matching_cost(basis.config(src), basis.config(dst), &costs).unwrap();
                assert!((d[dst] - m).abs() < 1e-12, "{src} -> {dst}: {} vs {m}", d[dst]);
            }
        }
    }

    #[test]
    fn cap_switches_to_matching() {
        let lat = Lattice::chain(5).unwrap();
        let a = [3, 0, 0, 0, 0];
        let b = [0, 0, 0, 1, 2];
        let exact = config_cost(&a, &b, &lat, 1.0).unwrap();
        let capped = config_cost_with_cap(&a, &b, &lat, 1.0, 10).unwrap();
        assert_eq!(exact.method, CostMethod::ShortestPath);
        assert!(capped.bound_only());
        assert!((exact.value - 11.0).abs() < 1e-12);
        assert!((capped.value - exact.value).abs() < 1e-12);
    }

    #[test]
    fn moving_bosons_between_regions_costs_at_least_distance() {
        let lat = Lattice::chain(6).unwrap();
        let x = Region::new([0, 1]);
        let y = Region::new([4, 5]);
        let d = lat.set_distance(&x, &y).unwrap();
        let a = [2, 1, 0, 0, 0, 0];
        let b = [0, 1, 0, 0, 1, 1];
        let c = config_cost(&a, &b, &lat, 0.5).unwrap();
        assert!(c.value >= 2.0 * d.powf(0.5) - 1e-12);
    }

    #[test]
    fn configs_between_point_masses() {
        let lat = Lattice::chain(3).unwrap();
        let basis = FockBasis::new(3, 2).unwrap();
        let ia = basis.index_of(&[2, 0, 0]).unwrap();
        let ib = basis.index_of(&[0, 1, 1]).unwrap();
        let mut p = vec![0.0; basis.dim()];
        let mut q = vec![0.0; basis.dim()];
        p[ia] = 1.0;
        q[ib] = 1.0;
        let w = wasserstein_configs(&p, &q, &basis, &lat, 1.0).unwrap();
        assert!((w.value - 3.0).abs() < 1e-12);
        assert!(wasserstein_configs(&p, &p, &basis, &lat, 1.0).unwrap().value.abs() < 1e-15);
    }
}
