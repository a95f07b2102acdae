//! Exact piecewise-constant time evolution and the sampled trajectories it produces.
//!
//! Each stage is propagated exactly: by a dense eigendecomposition for small sectors (and
//! always for density matrices), otherwise by an adaptive Lanczos exponential.

mod flows;
pub mod krylov;

pub use flows::{config_currents, probability_rates, site_flows, velocity_term, ConfigCurrent, FlowMatrix};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, Ensemble, FockBasis, PureState, State};
use crate::hamiltonian::{HamiltonianModel, SparseHamiltonian};
use crate::lattice::{CostMatrix, Lattice};

/// Pure states up to this dimension are propagated by dense eigendecomposition.
pub const DENSE_DIM_LIMIT: usize = 512;
/// Evolution aborts when the norm (or trace) drifts by more than this.
pub const NORM_DRIFT_LIMIT: f64 = 1e-8;
pub const DEFAULT_SAMPLES_PER_STAGE: usize = 64;
/// Target agreement between successive Richardson estimates of a time integral.
pub const QUADRATURE_TOL: f64 = 1e-7;
const MAX_QUADRATURE_LEVELS: u32 = 16;

/// A Hamiltonian held fixed for `duration`.
#[derive(Debug, Clone)]
pub struct Stage {
    pub model: HamiltonianModel,
    pub duration: f64,
    pub label: String,
}

impl Stage {
    pub fn new(model: HamiltonianModel, duration: f64) -> Self {
        Self { model, duration, label: String::new() }
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

enum Propagator {
    Dense { values: Vec<f64>, vectors: DMatrix<f64> },
    Krylov(SparseHamiltonian),
}

impl Propagator {
    fn new(h: &SparseHamiltonian, dense: bool) -> Self {
        if dense {
            let eig = SymmetricEigen::new(h.to_dense());
            Propagator::Dense { values: eig.eigenvalues.iter().copied().collect(), vectors: eig.eigenvectors }
        } else {
            Propagator::Krylov(h.clone())
        }
    }

    fn apply(&self, psi: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
        match self {
            Propagator::Dense { values, vectors } => {
                let n = values.len();
                // V^T psi, phase, V.
                let mut coeffs = vec![Complex64::default(); n];
                for k in 0..n {
                    let col = vectors.column(k);
                    let mut acc = Complex64::default();
                    for (r, p) in psi.iter().enumerate() {
                        acc += p * col[r];
                    }
                    coeffs[k] = acc * Complex64::new(0.0, -values[k] * t).exp();
                }
                let mut out = vec![Complex64::default(); n];
                for (k, ck) in coeffs.iter().enumerate() {
                    let col = vectors.column(k);
                    for (r, o) in out.iter_mut().enumerate() {
                        *o += ck * col[r];
                    }
                }
                Ok(out)
            }
            Propagator::Krylov(h) => krylov::expm_apply(h, psi, t),
        }
    }

    fn unitary(&self, t: f64) -> Option<DMatrix<Complex64>> {
        match self {
            Propagator::Dense { values, vectors } => {
                let n = values.len();
                let v = vectors.map(|x| Complex64::new(x, 0.0));
                let phases = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                    n,
                    values.iter().map(|l| Complex64::new(0.0, -l * t).exp()),
                ));
                Some(&v * phases * v.transpose())
            }
            Propagator::Krylov(_) => None,
        }
    }

    fn evolve(&self, state: &State, t: f64) -> Result<State> {
        Ok(match state {
            State::Pure(p) => State::Pure(PureState::from_raw(self.apply(p.amplitudes(), t)?)),
            State::Ensemble(e) => {
                let mut members = Vec::with_capacity(e.members().len());
                for (w, p) in e.members() {
                    members.push((*w, PureState::from_raw(self.apply(p.amplitudes(), t)?)));
                }
                State::Ensemble(Ensemble::new(members)?)
            }
            State::Mixed(rho) => {
                let u = self.unitary(t).expect("density matrices use dense propagators");
                State::Mixed(DensityMatrix::from_raw(&u * rho.matrix() * u.adjoint()))
            }
        })
    }
}

/// A stage with its materialized operator and propagator.
pub struct CompiledStage {
    pub model: HamiltonianModel,
    pub hamiltonian: SparseHamiltonian,
    pub start: f64,
    pub duration: f64,
    pub label: String,
    propagator: Propagator,
    initial: State,
}

impl CompiledStage {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn initial_state(&self) -> &State {
        &self.initial
    }

    /// State at `offset` into this stage.
    pub fn state_at(&self, offset: f64) -> Result<State> {
        self.propagator.evolve(&self.initial, offset)
    }
}

/// Result of a time integral by refined trapezoid quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quadrature {
    pub value: f64,
    /// Sum over stages of the last change between Richardson estimates.
    pub uncertainty: f64,
    pub evaluations: usize,
}

/// An initial state pushed through a list of stages.
pub struct Evolution<'a> {
    basis: &'a FockBasis,
    lattice: &'a Lattice,
    stages: Vec<CompiledStage>,
    final_state: State,
}

impl<'a> Evolution<'a> {
    pub fn new(basis: &'a FockBasis, lattice: &'a Lattice, stages: &[Stage], initial: State) -> Result<Self> {
        if initial.dim() != basis.dim() {
            return Err(Error::State(format!(
                "state has dimension {}, basis {}",
                initial.dim(),
                basis.dim()
            )));
        }
        let initial_trace = initial.trace();
        if (initial_trace - 1.0).abs() > crate::fock::NORM_TOL {
            return Err(Error::State(format!("initial state has trace {initial_trace}")));
        }
        let dense = basis.dim() <= DENSE_DIM_LIMIT || matches!(initial, State::Mixed(_));
        let mut compiled = Vec::with_capacity(stages.len());
        let mut current = initial;
        let mut start = 0.0;
        for stage in stages {
            if !(stage.duration > 0.0) || !stage.duration.is_finite() {
                return Err(Error::Parameter(format!("stage duration {} must be positive", stage.duration)));
            }
            let hamiltonian = stage.model.materialize(basis, lattice)?;
            let propagator = Propagator::new(&hamiltonian, dense);
            let next = propagator.evolve(&current, stage.duration)?;
            let end = start + stage.duration;
            let drift = (next.trace() - 1.0).abs();
            if drift > NORM_DRIFT_LIMIT {
                return Err(Error::NormDrift { drift, time: end });
            }
            compiled.push(CompiledStage {
                model: stage.model.clone(),
                hamiltonian,
                start,
                duration: stage.duration,
                label: stage.label.clone(),
                propagator,
                initial: current,
            });
            current = next;
            start = end;
        }
        Ok(Self { basis, lattice, stages: compiled, final_state: current })
    }

    pub fn basis(&self) -> &FockBasis {
        self.basis
    }

    pub fn lattice(&self) -> &Lattice {
        self.lattice
    }

    pub fn stages(&self) -> &[CompiledStage] {
        &self.stages
    }

    pub fn duration(&self) -> f64 {
        self.stages.last().map_or(0.0, CompiledStage::end)
    }

    pub fn initial_state(&self) -> &State {
        match self.stages.first() {
            Some(s) => &s.initial,
            None => &self.final_state,
        }
    }

    pub fn final_state(&self) -> &State {
        &self.final_state
    }

    /// State at the start of each stage, followed by the final state.
    pub fn stage_boundaries(&self) -> impl Iterator<Item = &State> {
        self.stages.iter().map(|s| &s.initial).chain(std::iter::once(&self.final_state))
    }

    /// Index of the stage active at `t`; boundaries belong to the later stage.
    pub fn stage_index(&self, t: f64) -> Option<usize> {
        if self.stages.is_empty() || t < 0.0 || t > self.duration() {
            return None;
        }
        Some(self.stages.iter().rposition(|s| s.start <= t).unwrap_or(0))
    }

    pub fn state_at(&self, t: f64) -> Result<State> {
        let idx = self
            .stage_index(t)
            .ok_or_else(|| Error::Parameter(format!("time {t} outside [0, {}]", self.duration())))?;
        let stage = &self.stages[idx];
        stage.state_at(t - stage.start)
    }

    /// `integral_0^tau f(t) dt` where `f` sees the state and the active stage.
    ///
    /// Each stage is integrated separately by trapezoid rules on `samples * 2^k` intervals
    /// with Richardson extrapolation, refined until successive extrapolations agree to
    /// `QUADRATURE_TOL` (relative).
    pub fn time_integral<F>(&self, samples: usize, f: F) -> Result<Quadrature>
    where
        F: Fn(&State, &CompiledStage) -> f64,
    {
        let mut value = 0.0;
        let mut uncertainty = 0.0;
        let mut evaluations = 0;
        for stage in &self.stages {
            let eval = |offset: f64| -> Result<f64> { Ok(f(&stage.state_at(offset)?, stage)) };
            let mut n = samples.max(2);
            let h0 = stage.duration / n as f64;
            let mut sum_interior = 0.0;
            for k in 1..n {
                sum_interior += eval(h0 * k as f64)?;
            }
            let ends = eval(0.0)? + eval(stage.duration)?;
            evaluations += n + 1;
            let mut trap = h0 * (0.5 * ends + sum_interior);
            let mut prev_rich: Option<f64> = None;
            let mut last_delta = f64::INFINITY;
            let mut best = trap;
            for _ in 0..MAX_QUADRATURE_LEVELS {
                let h = stage.duration / (2 * n) as f64;
                let mut mid = 0.0;
                for k in 0..n {
                    mid += eval(h * (2 * k + 1) as f64)?;
                }
                evaluations += n;
                sum_interior += mid;
                n *= 2;
                let refined = h * (0.5 * ends + sum_interior);
                let rich = refined + (refined - trap) / 3.0;
                trap = refined;
                best = rich;
                if let Some(p) = prev_rich {
                    last_delta = (rich - p).abs();
                    if last_delta <= QUADRATURE_TOL * rich.abs().max(1e-12) {
                        break;
                    }
                }
                prev_rich = Some(rich);
            }
            value += best;
            uncertainty += last_delta;
        }
        Ok(Quadrature { value, uncertainty, evaluations })
    }

    /// Samples the trajectory on a uniform sub-grid of every stage.
    pub fn sample(&self, options: &SampleOptions) -> Result<Trajectory> {
        let per_stage = options.samples_per_stage.max(1);
        let mut traj = Trajectory {
            duration: self.duration(),
            n_sites: self.basis.sites(),
            samples: Vec::new(),
        };
        for (idx, stage) in self.stages.iter().enumerate() {
            let last_stage = idx + 1 == self.stages.len();
            let count = if last_stage { per_stage + 1 } else { per_stage };
            for k in 0..count {
                let offset = stage.duration * k as f64 / per_stage as f64;
                let state = stage.state_at(offset)?;
                traj.samples.push(self.summarize(stage, idx, stage.start + offset, state, options)?);
            }
        }
        Ok(traj)
    }

    fn summarize(
        &self,
        stage: &CompiledStage,
        stage_index: usize,
        time: f64,
        state: State,
        options: &SampleOptions,
    ) -> Result<Sample> {
        let drift = (state.trace() - 1.0).abs();
        if drift > NORM_DRIFT_LIMIT {
            return Err(Error::NormDrift { drift, time });
        }
        let concentrations = state.concentrations(self.basis)?;
        let flows = site_flows(&state, &stage.model, self.basis);
        let velocity = options.cost.as_ref().map(|c| velocity_term(&flows, c));
        let fidelity = match (&options.target, &state) {
            (Some(target), State::Pure(p)) => Some(target.fidelity(p)),
            (Some(target), other) => {
                let amps = target.amplitudes();
                let mut f = Complex64::default();
                for a in 0..amps.len() {
                    for b in 0..amps.len() {
                        f += amps[a].conj() * other.element(a, b) * amps[b];
                    }
                }
                Some(f.re)
            }
            (None, _) => None,
        };
        let probabilities = options.config_probabilities.then(|| state.probabilities());
        Ok(Sample {
            time,
            stage: stage_index,
            concentrations,
            flows,
            velocity,
            fidelity,
            probabilities,
            state: options.keep_states.then_some(state),
        })
    }
}

/// What to record at each sample.
#[derive(Debug, Clone)]
pub struct SampleOptions {
    pub samples_per_stage: usize,
    pub cost: Option<CostMatrix>,
    pub target: Option<PureState>,
    pub config_probabilities: bool,
    pub keep_states: bool,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self {
            samples_per_stage: DEFAULT_SAMPLES_PER_STAGE,
            cost: None,
            target: None,
            config_probabilities: false,
            keep_states: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub time: f64,
    pub stage: usize,
    pub concentrations: Vec<f64>,
    pub flows: FlowMatrix,
    pub velocity: Option<f64>,
    pub fidelity: Option<f64>,
    pub probabilities: Option<Vec<f64>>,
    pub state: Option<State>,
}

/// Sampled summary of an evolution.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub duration: f64,
    pub n_sites: usize,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.time).collect()
    }

    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has samples")
    }

    /// Header for the plot-ready table: `t, x_0 .. x_{n-1}, Φ_t, fidelity`. Empty cells mean
    /// the column was not requested.
    pub fn csv_header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend((0..self.n_sites).map(|i| format!("x_{i}")));
        h.push("Φ_t".into());
        h.push("fidelity".into());
        h
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.samples
            .iter()
            .map(|s| {
                let mut row = vec![format!("{:.12e}", s.time)];
                row.extend(s.concentrations.iter().map(|x| format!("{x:.12e}")));
                row.push(s.velocity.map(|v| format!("{v:.12e}")).unwrap_or_default());
                row.push(s.fidelity.map(|v| format!("{v:.12e}")).unwrap_or_default());
                row
            })
            .collect()
    }
}

/// Evolves `initial` through `stages` and samples it.
pub fn evolve(
    basis: &FockBasis,
    lattice: &Lattice,
    initial: State,
    stages: &[Stage],
    options: &SampleOptions,
) -> Result<Trajectory> {
    Evolution::new(basis, lattice, stages, initial)?.sample(options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{transfer_model, Hopping, Interaction, TwoSiteTransfer};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(dim: usize, seed: u64) -> PureState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..dim).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        PureState::normalized(amps).unwrap()
    }

    fn chain_model(lat: &Lattice, u: f64) -> HamiltonianModel {
        HamiltonianModel::new(Hopping::power_law(lat, 1.0, 2.5), Interaction::bose_hubbard(u, 0.3))
    }

    fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let lat = Lattice::chain(3).unwrap();
        let basis = FockBasis::new(3, 2).unwrap();
        let psi = random_state(basis.dim(), 1);
        let stages = [Stage::new(HamiltonianModel::zero(3), 2.0)];
        let ev = Evolution::new(&basis, &lat, &stages, psi.clone().into()).unwrap();
        let out = ev.final_state().as_pure().unwrap();
        assert!(max_diff(out.amplitudes(), psi.amplitudes()) < 1e-14);
    }

    #[test]
    fn single_particle_rabi_half_period() {
        let lat = Lattice::chain(2).unwrap();
        let basis = FockBasis::new(2, 1).unwrap();
        let mut hop = Hopping::zero(2);
        hop.set(0, 1, 1.0);
        let model = HamiltonianModel::new(hop, Interaction::none());
        let start = basis.mott_state(&[1, 0]).unwrap();
        let target = basis.mott_state(&[0, 1]).unwrap();
        let stages = [Stage::new(model, std::f64::consts::FRAC_PI_2)];
        let ev = Evolution::new(&basis, &lat, &stages, start.into()).unwrap();
        assert!((ev.final_state().as_pure().unwrap().fidelity(&target) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hopping_mirror_reaches_target() {
        let lat = Lattice::chain(2).unwrap();
        let basis = FockBasis::new(2, 5).unwrap();
        let kind = TwoSiteTransfer::HoppingMirror;
        let (from, to) = kind.endpoints(5).unwrap();
        let model = transfer_model(kind, &lat, 0, 5, 1.0, None).unwrap();
        let stages = [Stage::new(model, kind.duration(5, 1.0).unwrap())];
        let ev = Evolution::new(&basis, &lat, &stages, basis.mott_state(&from).unwrap().into()).unwrap();
        let f = ev.final_state().as_pure().unwrap().fidelity(&basis.mott_state(&to).unwrap());
        assert!(f >= 1.0 - 1e-10, "fidelity {f}");
    }

    #[test]
    fn unitarity_energy_and_time_reversal() {
        let lat = Lattice::chain(4).unwrap();
        let basis = FockBasis::new(4, 3).unwrap();
        let model = chain_model(&lat, 0.8);
        let h = model.materialize(&basis, &lat).unwrap();
        let psi = random_state(basis.dim(), 7);
        let ev = Evolution::new(&basis, &lat, &[Stage::new(model.clone(), 1.3)], psi.clone().into()).unwrap();
        let out = ev.final_state().as_pure().unwrap().clone();
        assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
        let energy = |p: &PureState| {
            let mut y = vec![Complex64::default(); p.dim()];
            h.apply(p.amplitudes(), &mut y);
            p.amplitudes().iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum::<f64>()
        };
        assert!((energy(&out) - energy(&psi)).abs() < 1e-11);
        let mut neg = model.clone();
        neg.hopping = Hopping::from_rows(
            &(0..4).map(|a| (0..4).map(|b| -model.hopping.get(a, b)).collect()).collect::<Vec<_>>(),
        )
        .unwrap()
        .with_certificate(1.0, 2.5);
        neg.interaction = Interaction::bose_hubbard(-0.8, -0.3);
        let back = Evolution::new(&basis, &lat, &[Stage::new(neg, 1.3)], out.into()).unwrap();
        assert!(max_diff(back.final_state().as_pure().unwrap().amplitudes(), psi.amplitudes()) < 1e-11);
    }

    #[test]
    fn krylov_matches_dense() {
        let lat = Lattice::chain(8).unwrap();
        let basis = FockBasis::new(8, 5).unwrap();
        assert!(basis.dim() > DENSE_DIM_LIMIT);
        let model = chain_model(&lat, 1.1);
        let h = model.materialize(&basis, &lat).unwrap();
        let psi = random_state(basis.dim(), 3);
        let dense = Propagator::new(&h, true).apply(psi.amplitudes(), 0.9).unwrap();
        let sparse = Propagator::new(&h, false).apply(psi.amplitudes(), 0.9).unwrap();
        assert!(max_diff(&dense, &sparse) < 1e-9);
    }

    #[test]
    fn density_matrix_matches_pure_path() {
        let lat = Lattice::chain(3).unwrap();
        let basis = FockBasis::new(3, 2).unwrap();
        let psi = random_state(basis.dim(), 11);
        let model = chain_model(&lat, 0.5);
        let stages = [Stage::new(model, 0.7)];
        let pure = Evolution::new(&basis, &lat, &stages, psi.clone().into()).unwrap();
        let mixed = Evolution::new(&basis, &lat, &stages, DensityMatrix::from_pure(&psi).into()).unwrap();
        for a in 0..basis.dim() {
            for b in 0..basis.dim() {
                let d = pure.final_state().element(a, b) - mixed.final_state().element(a, b);
                assert!(d.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn flows_match_concentration_derivatives() {
        let lat = Lattice::chain(4).unwrap();
        let basis = FockBasis::new(4, 3).unwrap();
        let model = chain_model(&lat, 0.9);
        let psi = random_state(basis.dim(), 5);
        let ev = Evolution::new(&basis, &lat, &[Stage::new(model.clone(), 1.0)], psi.into()).unwrap();
        let t = 0.4;
        let h = 1e-5;
        let x = |t: f64| ev.state_at(t).unwrap().concentrations(&basis).unwrap();
        let (xp, xm) = (x(t + h), x(t - h));
        let flows = site_flows(&ev.state_at(t).unwrap(), &model, &basis);
        assert!(flows.antisymmetry_defect() < 1e-13);
        for (i, r) in flows.rates().iter().enumerate() {
            let fd = (xp[i] - xm[i]) / (2.0 * h);
            assert!((fd - r).abs() < 1e-8, "site {i}: {fd} vs {r}");
        }
    }

    #[test]
    fn currents_match_probability_derivatives() {
        let lat = Lattice::chain(3).unwrap();
        let basis = FockBasis::new(3, 3).unwrap();
        let model = chain_model(&lat, 1.7);
        let psi = random_state(basis.dim(), 9);
        let ev = Evolution::new(&basis, &lat, &[Stage::new(model.clone(), 1.0)], psi.into()).unwrap();
        let t = 0.6;
        let h = 1e-5;
        let (pp, pm) = (ev.state_at(t + h).unwrap().probabilities(), ev.state_at(t - h).unwrap().probabilities());
        let currents = config_currents(&ev.state_at(t).unwrap(), &model, &basis).unwrap();
        let rates = probability_rates(&currents, basis.dim());
        for a in 0..basis.dim() {
            let fd = (pp[a] - pm[a]) / (2.0 * h);
            assert!((fd - rates[a]).abs() < 1e-8, "config {a}: {fd} vs {}", rates[a]);
        }
    }

    #[test]
    fn tunneling_flows_match_derivatives() {
        let lat = Lattice::chain(2).unwrap();
        let basis = FockBasis::new(2, 4).unwrap();
        let model = transfer_model(TwoSiteTransfer::TunnelingMirror, &lat, 0, 4, 1.0, None).unwrap();
        let psi = random_state(basis.dim(), 4);
        let ev = Evolution::new(&basis, &lat, &[Stage::new(model.clone(), 1.0)], psi.into()).unwrap();
        let h = 1e-5;
        let x = |t: f64| ev.state_at(t).unwrap().concentrations(&basis).unwrap();
        let flows = site_flows(&ev.state_at(0.3).unwrap(), &model, &basis);
        let fd = (x(0.3 + h)[0] - x(0.3 - h)[0]) / (2.0 * h);
        assert!((fd - flows.rates()[0]).abs() < 1e-7);
        assert!(config_currents(&ev.state_at(0.3).unwrap(), &model, &basis).is_err());
    }

    #[test]
    fn quadrature_integrates_constant_and_smooth() {
        let lat = Lattice::chain(2).unwrap();
        let basis = FockBasis::new(2, 1).unwrap();
        let mut hop = Hopping::zero(2);
        hop.set(0, 1, 1.0);
        let model = HamiltonianModel::new(hop, Interaction::none());
        let stages = [Stage::new(model.clone(), 0.5), Stage::new(model, 0.7)];
        let ev = Evolution::new(&basis, &lat, &stages, basis.mott_state(&[1, 0]).unwrap().into()).unwrap();
        // x_1(t) = sin^2 t.
        let q = ev.time_integral(8, |s, _| s.prob(1)).unwrap();
        let exact = 0.6 - (2.4f64).sin() / 4.0;
        assert!((q.value - exact).abs() < 1e-9, "{} vs {exact}", q.value);
        let one = ev.time_integral(4, |_, _| 1.0).unwrap();
        assert!((one.value - 1.2).abs() < 1e-14);
    }

    #[test]
    fn sampling_covers_stage_boundaries() {
        let lat = Lattice::chain(2).unwrap();
        let basis = FockBasis::new(2, 1).unwrap();
        let stages = [
            Stage::new(HamiltonianModel::zero(2), 0.5),
            Stage::new(HamiltonianModel::zero(2), 0.25),
        ];
        let ev = Evolution::new(&basis, &lat, &stages, basis.mott_state(&[1, 0]).unwrap().into()).unwrap();
        let opts = SampleOptions { samples_per_stage: 4, ..Default::default() };
        let traj = ev.sample(&opts).unwrap();
        assert_eq!(traj.samples.len(), 9);
        assert_eq!(traj.first().time, 0.0);
        assert!((traj.last().time - 0.75).abs() < 1e-15);
        assert_eq!(traj.csv_header(), ["t", "x_0", "x_1", "Φ_t", "fidelity"]);
        assert_eq!(ev.stage_index(0.5), Some(1));
        assert!(ev.state_at(1.0).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let lat = Lattice::chain(2).unwrap();
        let basis = FockBasis::new(2, 1).unwrap();
        let psi: State = basis.mott_state(&[1, 0]).unwrap().into();
        assert!(Evolution::new(&basis, &lat, &[Stage::new(HamiltonianModel::zero(2), 0.0)], psi.clone()).is_err());
        let other = FockBasis::new(2, 2).unwrap();
        assert!(Evolution::new(&other, &lat, &[], psi).is_err());
    }
}
