use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use speedlimit::bounds::{current_ceiling_excess, velocity_ceiling_check, BoundParams};
use speedlimit::evolve::{site_flows, Evolution, Stage};
use speedlimit::fock::{Count, FockBasis, PureState, State};
use speedlimit::hamiltonian::{HamiltonianModel, Hopping, Interaction, InteractionTerm};
use speedlimit::lattice::{CostMatrix, Lattice, Region};
use speedlimit::transport::{wasserstein, wasserstein_dual, wasserstein_primal};

fn random_state(dim: usize, rng: &mut ChaCha8Rng) -> PureState {
    let amps = (0..dim).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    PureState::normalized(amps).unwrap()
}

/// Hopping with `|J_ij| <= j / r^alpha` and random signs, plus a random Bose-Hubbard diagonal.
fn random_model(lat: &Lattice, j: f64, alpha: f64, rng: &mut ChaCha8Rng) -> HamiltonianModel {
    let mut hop = Hopping::zero(lat.len());
    for a in 0..lat.len() {
        for b in a + 1..lat.len() {
            let limit = j * lat.distance(a, b).powf(-alpha);
            hop.set(a, b, limit * (2.0 * rng.random::<f64>() - 1.0));
        }
    }
    let u = 4.0 * rng.random::<f64>();
    let mu = rng.random::<f64>() - 0.5;
    HamiltonianModel::new(hop.with_certificate(j, alpha), Interaction::bose_hubbard(u, mu))
}

fn random_distribution(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    // Some zeros keep supports partial.
    let raw: Vec<f64> = (0..n).map(|_| if rng.random::<f64>() < 0.2 { 0.0 } else { rng.random::<f64>() }).collect();
    let s: f64 = raw.iter().sum();
    if s == 0.0 {
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        return v;
    }
    raw.iter().map(|v| v / s).collect()
}

fn random_lattice(rng: &mut ChaCha8Rng, max_sites: usize) -> Lattice {
    if rng.random::<bool>() {
        Lattice::chain(rng.random_range(2..=max_sites)).unwrap()
    } else {
        let w = rng.random_range(2..=3);
        let h = rng.random_range(1..=max_sites / w);
        Lattice::hypercubic(2, &[w, h.max(1)]).unwrap()
    }
}

fn cost_exponent() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.3), Just(0.7), Just(1.0), 0.05f64..=1.0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cost_matrices_are_metrics(seed in any::<u64>(), exponent in cost_exponent()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lat = random_lattice(&mut rng, 12);
        let c = lat.cost_matrix(exponent).unwrap();
        prop_assert!(c.verify_triangle());
        for i in 0..lat.len() {
            prop_assert_eq!(c.get(i, i), 0.0);
            for j in 0..lat.len() {
                prop_assert_eq!(c.get(i, j), c.get(j, i));
            }
        }
    }

    #[test]
    fn set_distance_is_symmetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lat = random_lattice(&mut rng, 12);
        let n = lat.len();
        let x = Region::new((0..n).filter(|_| rng.random::<f64>() < 0.4));
        let y = Region::new((0..n).filter(|s| !x.contains(*s) && rng.random::<f64>() < 0.5));
        prop_assume!(!x.is_empty() && !y.is_empty());
        prop_assert_eq!(lat.set_distance(&x, &y).unwrap(), lat.set_distance(&y, &x).unwrap());
    }

    #[test]
    fn basis_round_trip_and_hop_pairs(sites in 1usize..=5, bosons in 0usize..=4) {
        let basis = FockBasis::new(sites, bosons).unwrap();
        for idx in 0..basis.dim() {
            prop_assert_eq!(basis.index_of(basis.config(idx)), Some(idx));
            for hop in basis.hop_neighbors(idx) {
                let back = basis.hop_neighbors(hop.target);
                let mirrored = back.iter().find(|h| h.target == idx && h.from == hop.to && h.to == hop.from);
                prop_assert!(mirrored.is_some_and(|h| (h.factor - hop.factor).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn concentrations_and_number_ceiling(seed in any::<u64>(), sites in 2usize..=5, bosons in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = FockBasis::new(sites, bosons).unwrap();
        let state: State = random_state(basis.dim(), &mut rng).into();
        let x = state.concentrations(&basis).unwrap();
        prop_assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(x.iter().all(|&v| v >= -1e-15));
        let region = Region::new((0..sites).filter(|_| rng.random::<bool>()));
        prop_assert!((state.projector_weight(&basis, &region, Count::AtMost(bosons)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn materialized_models_are_hermitian(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lat = random_lattice(&mut rng, 6);
        let basis = FockBasis::new(lat.len(), 3).unwrap();
        let h = random_model(&lat, 1.0, 2.5, &mut rng).materialize(&basis, &lat).unwrap();
        prop_assert!(h.max_asymmetry() <= 1e-12);
        for r in 0..h.dim() {
            prop_assert!(h.row(r).all(|(c, _)| c < basis.dim()));
        }
    }

    #[test]
    fn wasserstein_primal_equals_dual(seed in any::<u64>(), exponent in cost_exponent()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lat = random_lattice(&mut rng, 12);
        let c = lat.cost_matrix(exponent).unwrap();
        let x = random_distribution(lat.len(), &mut rng);
        let y = random_distribution(lat.len(), &mut rng);
        let (primal, plan) = wasserstein_primal(&x, &y, &c).unwrap();
        let (dual, phi) = wasserstein_dual(&x, &y, &c).unwrap();
        prop_assert!((primal - dual).abs() <= 1e-9 * primal.max(1.0), "{} vs {}", primal, dual);
        prop_assert!(phi.max_violation(&c) <= 1e-9);
        for (a, b) in plan.row_sums().iter().zip(&x) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
        for (a, b) in plan.column_sums().iter().zip(&y) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
        // Complementary slackness, aggregated.
        prop_assert!((plan.cost(&c) - phi.evaluate(&x, &y)).abs() <= 1e-9 * primal.max(1.0));
    }

    #[test]
    fn wasserstein_is_a_metric(seed in any::<u64>(), exponent in cost_exponent(), scale in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lat = random_lattice(&mut rng, 10);
        let c = lat.cost_matrix(exponent).unwrap();
        let n = lat.len();
        let (x, y, z) = (random_distribution(n, &mut rng), random_distribution(n, &mut rng), random_distribution(n, &mut rng));
        let xy = wasserstein(&x, &y, &c).unwrap();
        let yx = wasserstein(&y, &x, &c).unwrap();
        let xz = wasserstein(&x, &z, &c).unwrap();
        let zy = wasserstein(&z, &y, &c).unwrap();
        prop_assert!((xy - yx).abs() <= 1e-12 * xy.max(1.0));
        prop_assert!(wasserstein(&x, &x, &c).unwrap().abs() <= 1e-12);
        prop_assert!(xy <= xz + zy + 1e-12);
        let scaled: CostMatrix = c.scaled(scale);
        let sxy = wasserstein(&x, &y, &scaled).unwrap();
        prop_assert!((sxy - scale * xy).abs() <= 1e-12 * (scale * xy).max(1.0));
    }

    #[test]
    fn flows_match_finite_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lat = random_lattice(&mut rng, 5);
        let bosons = rng.random_range(1..=3);
        let basis = FockBasis::new(lat.len(), bosons).unwrap();
        let model = random_model(&lat, 1.0, 2.0, &mut rng);
        let psi = random_state(basis.dim(), &mut rng);
        let ev = Evolution::new(&basis, &lat, &[Stage::new(model.clone(), 1.0)], psi.into()).unwrap();
        let t = 0.2 + 0.6 * rng.random::<f64>();
        let h = 1e-4;
        let x = |t: f64| ev.state_at(t).unwrap().concentrations(&basis).unwrap();
        let (xp, xm) = (x(t + h), x(t - h));
        let flows = site_flows(&ev.state_at(t).unwrap(), &model, &basis);
        for (i, r) in flows.rates().iter().enumerate() {
            let fd = (xp[i] - xm[i]) / (2.0 * h);
            prop_assert!((fd - r).abs() < 1e-6, "site {}: {} vs {}", i, fd, r);
        }
    }

    #[test]
    fn unitarity_and_time_reversal(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lat = Lattice::chain(4).unwrap();
        let basis = FockBasis::new(4, 3).unwrap();
        let model = random_model(&lat, 1.0, 3.0, &mut rng);
        let psi = random_state(basis.dim(), &mut rng);
        let tau = 10.0 * rng.random::<f64>() + 0.1;
        let ev = Evolution::new(&basis, &lat, &[Stage::new(model.clone(), tau)], psi.clone().into()).unwrap();
        let out = ev.final_state().as_pure().unwrap().clone();
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-9);
        // -H: negated hopping, and the negated diagonal as an energy table.
        let h = model.materialize(&basis, &lat).unwrap();
        let mut hop = Hopping::zero(4);
        for a in 0..4 {
            for b in a + 1..4 {
                hop.set(a, b, -model.hopping.get(a, b));
            }
        }
        let table = (0..basis.dim()).map(|i| -h.get(i, i)).collect();
        let reversed = HamiltonianModel::new(hop, Interaction::none().with(InteractionTerm::Table(table)));
        let back = Evolution::new(&basis, &lat, &[Stage::new(reversed, tau)], out.into()).unwrap();
        let f = back.final_state().as_pure().unwrap().fidelity(&psi);
        prop_assert!(1.0 - f < 1e-9, "fidelity deficit {}", 1.0 - f);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn velocity_below_ceiling(seed in any::<u64>(), alpha in 1.2f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lat = random_lattice(&mut rng, 6);
        prop_assume!(alpha > lat.dim() as f64 + 0.05);
        let basis = FockBasis::new(lat.len(), rng.random_range(1..=3)).unwrap();
        let model = random_model(&lat, 1.0, alpha, &mut rng);
        let state: State = random_state(basis.dim(), &mut rng).into();
        let p = BoundParams::for_lattice(&lat, 1.0, alpha, 1.0).unwrap();
        let report = velocity_ceiling_check(&state, &model, &lat, &basis, &p).unwrap();
        prop_assert!(report.passed(), "{:?}", report);
        prop_assert!(current_ceiling_excess(&state, &model, &basis).unwrap() <= 1e-12);
    }
}
