//! Independent reference computations checked against the library.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use speedlimit::bounds::{configuration_flow_check, current_ceiling_excess, min_time_check, BoundParams};
use speedlimit::evolve::{Evolution, Stage};
use speedlimit::fock::{FockBasis, Occupation, PureState};
use speedlimit::hamiltonian::{transfer_model, HamiltonianModel, Hopping, Interaction, TwoSiteTransfer};
use speedlimit::lattice::{CostMatrix, Lattice, Region};
use speedlimit::protocols::{execute_protocol, sequential_mott_transfer};
use speedlimit::spectral::{corner_amplitude_exact, KacSystem};
use speedlimit::transport::wasserstein;

/// Minimum over all basic feasible solutions of the transportation polytope.
fn vertex_enumeration(supply: &[f64], demand: &[f64], cost: impl Fn(usize, usize) -> f64) -> f64 {
    let (n, m) = (supply.len(), demand.len());
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
    let rank = n + m - 1;
    // Row sums, then all but the last column sum (the dropped one is implied).
    let rhs = DVector::from_iterator(rank, supply.iter().chain(&demand[..m - 1]).copied());
    let mut best = f64::INFINITY;
    let mut pick = vec![0usize; rank];
    fn combos(k: usize, start: usize, total: usize, pick: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        if k == pick.len() {
            visit(pick);
            return;
        }
        for c in start..total {
            pick[k] = c;
            combos(k + 1, c + 1, total, pick, visit);
        }
    }
    combos(0, 0, cells.len(), &mut pick, &mut |chosen| {
        let mut a = DMatrix::zeros(rank, rank);
        for (col, &cell) in chosen.iter().enumerate() {
            let (i, j) = cells[cell];
            a[(i, col)] = 1.0;
            if j < m - 1 {
                a[(n + j, col)] = 1.0;
            }
        }
        let Some(x) = a.lu().solve(&rhs) else { return };
        if x.iter().any(|v| !v.is_finite() || *v < -1e-12) {
            return;
        }
        // The implied last column sum must hold too.
        let last: f64 = chosen.iter().zip(x.iter()).filter(|(c, _)| cells[**c].1 == m - 1).map(|(_, v)| v).sum();
        if (last - demand[m - 1]).abs() > 1e-9 {
            return;
        }
        let value: f64 = chosen.iter().zip(x.iter()).map(|(&c, v)| v * cost(cells[c].0, cells[c].1)).sum();
        best = best.min(value);
    });
    best
}

#[test]
fn transport_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for trial in 0..60 {
        let lat = Lattice::chain(6).unwrap();
        let exponent = [0.3, 0.7, 1.0][trial % 3];
        let c = lat.cost_matrix(exponent).unwrap();
        // Three source sites and three sink sites, possibly overlapping.
        let sources: Vec<usize> = rand::seq::index::sample(&mut rng, 6, 3).into_vec();
        let sinks: Vec<usize> = rand::seq::index::sample(&mut rng, 6, 3).into_vec();
        let mass = |rng: &mut ChaCha8Rng| {
            let w: Vec<f64> = (0..3).map(|_| rng.random::<f64>() + 0.05).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|v| v / s).collect::<Vec<_>>()
        };
        let (ps, qs) = (mass(&mut rng), mass(&mut rng));
        let mut x = vec![0.0; 6];
        let mut y = vec![0.0; 6];
        for (s, p) in sources.iter().zip(&ps) {
            x[*s] += p;
        }
        for (s, q) in sinks.iter().zip(&qs) {
            y[*s] += q;
        }
        let oracle = vertex_enumeration(&ps, &qs, |i, j| c.get(sources[i], sinks[j]));
        let w = wasserstein(&x, &y, &c).unwrap();
        assert!((w - oracle).abs() <= 1e-10 * oracle.max(1.0), "trial {trial}: {w} vs {oracle}");
    }
}

#[test]
fn non_metric_costs_are_rejected() {
    // The oracle still answers; the library refuses costs that break the triangle inequality.
    let rows = vec![vec![0.0, 5.0, 1.0], vec![5.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
    let oracle = vertex_enumeration(&[0.5, 0.5, 0.0], &[0.0, 0.0, 1.0], |i, j| rows[i][j]);
    assert!((oracle - 1.0).abs() < 1e-12);
    let c = CostMatrix::from_rows(&rows).unwrap();
    assert!(wasserstein(&[0.5, 0.5, 0.0], &[0.0, 0.0, 1.0], &c).is_err());
}

#[test]
fn tunneling_ladder_is_scaled_kac_matrix() {
    let lat = Lattice::chain(2).unwrap();
    for m in 3..=10usize {
        let j = 0.8;
        let basis = FockBasis::new(2, m).unwrap();
        let model = transfer_model(TwoSiteTransfer::TunnelingMirror, &lat, 0, m, j, None).unwrap();
        let h = model.materialize(&basis, &lat).unwrap().to_dense();
        let g = KacSystem::new(m).unwrap().g;
        // Basis index is the right-hand occupation, G is indexed by the left one.
        for a in 0..=m {
            for b in 0..=m {
                let expected = j * m as f64 * g[(m - a, m - b)];
                assert!((h[(a, b)] - expected).abs() < 1e-12, "M={m} ({a},{b}): {} vs {expected}", h[(a, b)]);
            }
        }
    }
}

#[test]
fn evolved_transfer_amplitude_equals_corner_entry() {
    let lat = Lattice::chain(2).unwrap();
    for m in 3..=9usize {
        let j = 1.3;
        let basis = FockBasis::new(2, m).unwrap();
        let model = transfer_model(TwoSiteTransfer::TunnelingMirror, &lat, 0, m, j, None).unwrap();
        let t = TwoSiteTransfer::TunnelingMirror.duration(m, j).unwrap();
        let start = basis.mott_state(&[m as Occupation - 1, 1]).unwrap();
        let ev = Evolution::new(&basis, &lat, &[Stage::new(model, t)], start.into()).unwrap();
        let out = ev.final_state().as_pure().unwrap();
        let target = basis.index_of(&[1, m as Occupation - 1]).unwrap();
        let amp: Complex64 = out.amplitudes()[target];
        let corner = corner_amplitude_exact(m).unwrap();
        assert!((amp.norm() - corner.norm()).abs() < 1e-9, "M={m}: |{amp}| vs |{corner}|");
        assert!((amp - corner).norm() < 1e-9, "M={m}: {amp} vs {corner}");
    }
}

#[test]
fn speed_limit_chain_on_sequential_transfer() {
    let schedule = sequential_mott_transfer(4, 3, 1.0, 1e5).unwrap();
    let basis = schedule.basis().unwrap();
    let ev = schedule.evolution(&basis).unwrap();
    let lat = &schedule.lattice;
    let x = Region::new([0]);
    let y = Region::new([3]);
    let p = BoundParams::for_lattice(lat, 1.0, 3.0, 0.9).unwrap();
    let report = min_time_check(&ev, &x, &y, &p, 16).unwrap();
    assert!(report.passed(), "{report:?}");
    let w = report.params["wasserstein"];
    let region = report.params["region_lower_bound"];
    let integral = report.params["velocity_integral"];
    let ceiling = report.params["velocity_ceiling"];
    assert!(w >= region - 1e-12);
    assert!(integral >= w - report.params["quadrature_uncertainty"] - 1e-12);
    // Composing the two links with Phi <= ceiling reproduces the time bound.
    assert!((region / ceiling - report.bound).abs() < 1e-12 * report.bound);
    assert!(ev.duration() * ceiling >= integral);
}

#[test]
fn configuration_chain_and_current_ceilings_on_random_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let lat = Lattice::chain(4).unwrap();
    let basis = FockBasis::new(4, 2).unwrap();
    for trial in 0..20 {
        let stages: Vec<Stage> = (0..3)
            .map(|_| {
                let mut hop = Hopping::zero(4);
                for a in 0..4 {
                    for b in a + 1..4 {
                        hop.set(a, b, (2.0 * rng.random::<f64>() - 1.0) * lat.distance(a, b).powf(-2.5));
                    }
                }
                let model = HamiltonianModel::new(hop, Interaction::bose_hubbard(3.0 * rng.random::<f64>(), 0.0));
                Stage::new(model, 0.2 + rng.random::<f64>())
            })
            .collect();
        let start = PureState::basis(basis.dim(), 0);
        let ev = Evolution::new(&basis, &lat, &stages, start.into()).unwrap();
        let report = configuration_flow_check(&ev, 0.5, 16).unwrap();
        assert!(report.passed(), "trial {trial}: {report:?}");
        for stage in ev.stages() {
            for k in 0..=8 {
                let state = stage.state_at(stage.duration * k as f64 / 8.0).unwrap();
                assert!(current_ceiling_excess(&state, &stage.model, &basis).unwrap() <= 1e-12);
            }
        }
    }
}

#[test]
fn sequential_run_stays_on_checkpoints() {
    let schedule = sequential_mott_transfer(3, 3, 1.0, 1e5).unwrap();
    let run = execute_protocol(&schedule, None).unwrap();
    assert!(run.min_stage_fidelity() > 0.999, "{:?}", run.stage_fidelities);
    assert!(run.spectator_drift < 1e-12);
}
