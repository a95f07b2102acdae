//! Seeded adversarial instances for the property sweeps.
//!
//! Every generator draws from a ChaCha stream fixed by `(seed, index)`, so results do not
//! depend on how work is split across threads.

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use speedlimit::evolve::Stage;
use speedlimit::fock::{FockBasis, PureState};
use speedlimit::hamiltonian::{HamiltonianModel, Hopping, Interaction, InteractionTerm};
use speedlimit::lattice::{CostMatrix, Lattice};
use speedlimit::{Error, Result};

/// Independent stream `index` of the generator seeded by `seed`.
pub fn instance_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Envelope for random models: `|J_ij| <= j / r^alpha`, on-site `U_i` in `[0, u_max]`,
/// chemical potentials in `[-chem_max, chem_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelLimits {
    pub j: f64,
    pub u_max: f64,
    pub chem_max: f64,
}

impl Default for ModelLimits {
    fn default() -> Self {
        Self { j: 1.0, u_max: 2.0, chem_max: 1.0 }
    }
}

/// A piecewise-constant random protocol.
#[derive(Debug, Clone)]
pub struct RandomSchedule {
    pub seed: u64,
    pub lattice: Lattice,
    pub bosons: usize,
    pub alpha: f64,
    pub limits: ModelLimits,
    pub stages: Vec<Stage>,
}

impl RandomSchedule {
    pub fn duration(&self) -> f64 {
        self.stages.iter().map(|s| s.duration).sum()
    }

    pub fn basis(&self) -> Result<FockBasis> {
        FockBasis::new(self.lattice.len(), self.bosons)
    }

    /// Every stage respects the decay envelope it was drawn under.
    pub fn certified(&self) -> bool {
        self.stages.iter().all(|s| s.model.verify_hopping_decay(&self.lattice))
    }
}

/// Random long-range Bose-Hubbard protocol with unit `J` and default diagonal ranges.
pub fn random_protocol(
    seed: u64,
    lattice: &Lattice,
    bosons: usize,
    alpha: f64,
    stage_count: usize,
    horizon: f64,
) -> Result<RandomSchedule> {
    random_protocol_with(&mut instance_rng(seed, 0), seed, lattice, bosons, alpha, stage_count, horizon, ModelLimits::default())
}

/// [`random_protocol`] drawing from `rng`, with explicit model limits.
#[allow(clippy::too_many_arguments)]
pub fn random_protocol_with(
    rng: &mut ChaCha8Rng,
    seed: u64,
    lattice: &Lattice,
    bosons: usize,
    alpha: f64,
    stage_count: usize,
    horizon: f64,
    limits: ModelLimits,
) -> Result<RandomSchedule> {
    if stage_count == 0 {
        return Err(Error::Parameter("a protocol needs at least one stage".into()));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Parameter(format!("horizon {horizon} must be positive")));
    }
    if !(alpha > 0.0) || !(limits.j > 0.0) || limits.u_max < 0.0 || limits.chem_max < 0.0 {
        return Err(Error::Parameter("model limits must be nonnegative, with J and alpha positive".into()));
    }
    // Enforces the sector cap before any model is drawn.
    FockBasis::new(lattice.len(), bosons)?;
    let weights: Vec<f64> = (0..stage_count).map(|_| 0.1 + rng.random::<f64>()).collect();
    let total: f64 = weights.iter().sum();
    let stages = weights
        .iter()
        .enumerate()
        .map(|(k, w)| {
            Stage::new(random_model(rng, lattice, alpha, limits), horizon * w / total).labeled(format!("random stage {k}"))
        })
        .collect();
    Ok(RandomSchedule { seed, lattice: lattice.clone(), bosons, alpha, limits, stages })
}

/// One random model inside the envelope, certified against it.
pub fn random_model(rng: &mut ChaCha8Rng, lattice: &Lattice, alpha: f64, limits: ModelLimits) -> HamiltonianModel {
    let n = lattice.len();
    let mut hop = Hopping::zero(n);
    for a in 0..n {
        for b in a + 1..n {
            let limit = limits.j * lattice.distance(a, b).powf(-alpha);
            hop.set(a, b, limit * (2.0 * rng.random::<f64>() - 1.0));
        }
    }
    let u = (0..n).map(|_| limits.u_max * rng.random::<f64>()).collect();
    let mu = (0..n).map(|_| limits.chem_max * (2.0 * rng.random::<f64>() - 1.0)).collect();
    HamiltonianModel::new(
        hop.with_certificate(limits.j, alpha),
        Interaction::none().with(InteractionTerm::SiteHubbard { u, mu }),
    )
}

/// Haar-like random pure state on the configurations accepted by `keep`.
pub fn random_state_on(rng: &mut ChaCha8Rng, basis: &FockBasis, keep: impl Fn(usize) -> bool) -> Result<PureState> {
    let amps = (0..basis.dim())
        .map(|i| {
            if keep(i) {
                Complex64::new(gaussian(rng), gaussian(rng))
            } else {
                Complex64::default()
            }
        })
        .collect();
    PureState::normalized(amps)
}

pub fn random_state(rng: &mut ChaCha8Rng, basis: &FockBasis) -> Result<PureState> {
    random_state_on(rng, basis, |_| true)
}

// Box-Muller; one draw per call keeps the stream layout simple.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Probability vector of length `n` with roughly `zero_fraction` of its entries zero.
pub fn random_distribution(rng: &mut ChaCha8Rng, n: usize, zero_fraction: f64) -> Vec<f64> {
    let mut raw: Vec<f64> = (0..n)
        .map(|_| if rng.random::<f64>() < zero_fraction { 0.0 } else { rng.random::<f64>() + 1e-3 })
        .collect();
    if raw.iter().all(|&v| v == 0.0) {
        raw[rng.random_range(0..n)] = 1.0;
    }
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

/// A lattice of dimension one to three with at least `points` sites, and `points`
/// distinct sites drawn from it.
pub fn random_support(rng: &mut ChaCha8Rng, points: usize) -> Result<(Lattice, Vec<usize>)> {
    let lattice = match rng.random_range(1..=3) {
        1 => Lattice::chain(points + rng.random_range(0..=4))?,
        2 => {
            let w = rng.random_range(2..=4);
            Lattice::hypercubic(2, &[w, points.div_ceil(w) + rng.random_range(0..=1)])?
        }
        _ => Lattice::hypercubic(3, &[2, 2, points.div_ceil(4).max(1) + rng.random_range(0..=1)])?,
    };
    let sites = sample(rng, lattice.len(), points).into_vec();
    Ok((lattice, sites))
}

/// Costs `r^exponent` restricted to `sites`; a sub-table of a metric is a metric.
pub fn restricted_costs(lattice: &Lattice, sites: &[usize], exponent: f64) -> Result<CostMatrix> {
    let full = lattice.cost_matrix(exponent)?;
    let rows: Vec<Vec<f64>> = sites.iter().map(|&a| sites.iter().map(|&b| full.get(a, b)).collect()).collect();
    CostMatrix::from_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_schedule() {
        let lat = Lattice::chain(5).unwrap();
        let a = random_protocol(11, &lat, 3, 2.5, 4, 3.0).unwrap();
        let b = random_protocol(11, &lat, 3, 2.5, 4, 3.0).unwrap();
        let c = random_protocol(12, &lat, 3, 2.5, 4, 3.0).unwrap();
        assert_eq!(format!("{:?}", a.stages), format!("{:?}", b.stages));
        assert_ne!(format!("{:?}", a.stages), format!("{:?}", c.stages));
        assert!((a.duration() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn generated_models_pass_decay_check() {
        let lat = Lattice::hypercubic(2, &[2, 3]).unwrap();
        for seed in 0..20 {
            let s = random_protocol(seed, &lat, 2, 3.1, 3, 1.0).unwrap();
            assert!(s.certified());
            assert!(s.stages.iter().all(|st| !st.model.has_tunneling()));
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let lat = Lattice::chain(4).unwrap();
        assert!(random_protocol(0, &lat, 3, 2.0, 0, 1.0).is_err());
        assert!(random_protocol(0, &lat, 3, 2.0, 2, 0.0).is_err());
        assert!(random_protocol(0, &Lattice::chain(40).unwrap(), 40, 2.0, 1, 1.0).is_err());
    }

    #[test]
    fn restricted_support_states() {
        let basis = FockBasis::new(4, 2).unwrap();
        let mut rng = instance_rng(3, 1);
        let psi = random_state_on(&mut rng, &basis, |i| basis.config(i)[0] == 2).unwrap();
        let p: f64 = (0..basis.dim()).filter(|&i| basis.config(i)[0] == 2).map(|i| psi.amplitudes()[i].norm_sqr()).sum();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn supports_have_requested_size() {
        let mut rng = instance_rng(5, 0);
        for points in 3..=12 {
            let (lat, sites) = random_support(&mut rng, points).unwrap();
            assert_eq!(sites.len(), points);
            assert!(restricted_costs(&lat, &sites, 0.7).unwrap().verify_triangle());
        }
    }
}
