//! The fixed-particle-number bosonic Fock sector and states living on it.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::Region;

/// Default dimension cap for pure-state work.
pub const PURE_DIM_CAP: usize = 200_000;
/// Default dimension cap when full density matrices are involved.
pub const DENSITY_DIM_CAP: usize = 2_000;
/// Tolerance on state normalization.
pub const NORM_TOL: f64 = 1e-10;

pub type Occupation = u16;

/// Number of ways to put `bosons` particles on `sites` sites, `C(bosons + sites - 1, bosons)`.
pub fn sector_dimension(sites: usize, bosons: usize) -> u128 {
    if sites == 0 {
        return u128::from(bosons == 0);
    }
    // C(n + k, k) with k = min(bosons, sites - 1), multiplicative form stays integral.
    let n = (bosons + sites - 1) as u128;
    let k = bosons.min(sites - 1) as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// All occupation vectors with a fixed total, ordered lexicographically descending:
/// `(N, 0, ..)` first, `(0, .., N)` last.
#[derive(Debug, Clone)]
pub struct FockBasis {
    sites: usize,
    total: usize,
    configs: Vec<Occupation>,
    // counts[m][n]: configurations of n bosons on m sites.
    counts: Vec<Vec<usize>>,
}

impl FockBasis {
    pub fn new(sites: usize, total: usize) -> Result<Self> {
        Self::with_cap(sites, total, PURE_DIM_CAP)
    }

    pub fn with_cap(sites: usize, total: usize, cap: usize) -> Result<Self> {
        if sites == 0 {
            return Err(Error::State("Fock basis needs at least one site".into()));
        }
        if total > Occupation::MAX as usize {
            return Err(Error::State(format!("{total} bosons exceed occupation range")));
        }
        let dim = sector_dimension(sites, total);
        if dim > cap as u128 {
            return Err(Error::DimensionCap { dim, cap });
        }
        let mut counts = vec![vec![0usize; total + 1]; sites + 1];
        for row in counts.iter_mut().skip(1) {
            row[0] = 1;
        }
        for m in 1..=sites {
            for n in 1..=total {
                counts[m][n] = if m == 1 { 1 } else { counts[m - 1][n] + counts[m][n - 1] };
            }
        }
        debug_assert_eq!(counts[sites][total] as u128, dim);

        let mut configs = Vec::with_capacity(dim as usize * sites);
        let mut cur = vec![0 as Occupation; sites];
        fill(&mut configs, &mut cur, 0, total);
        Ok(Self { sites, total, configs, counts })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn dim(&self) -> usize {
        self.configs.len() / self.sites
    }

    pub fn config(&self, index: usize) -> &[Occupation] {
        &self.configs[index * self.sites..(index + 1) * self.sites]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Occupation]> {
        self.configs.chunks_exact(self.sites)
    }

    /// Rank of a configuration, or `None` if it is not in this sector.
    pub fn index_of(&self, config: &[Occupation]) -> Option<usize> {
        if config.len() != self.sites {
            return None;
        }
        let mut remaining = self.total;
        let mut rank = 0usize;
        for (s, &n) in config.iter().enumerate() {
            let n = n as usize;
            if n > remaining {
                return None;
            }
            if s + 1 == self.sites {
                return (n == remaining).then_some(rank);
            }
            // Configurations sharing the prefix but with a larger occupation here come first.
            let rest = self.sites - s - 1;
            for v in (n + 1)..=remaining {
                rank += self.counts[rest][remaining - v];
            }
            remaining -= n;
        }
        unreachable!()
    }

    /// Configurations reachable by moving one boson between two distinct sites.
    pub fn hop_neighbors(&self, index: usize) -> Vec<Hop> {
        let c = self.config(index);
        let mut out = Vec::new();
        let mut scratch = c.to_vec();
        for from in 0..self.sites {
            if c[from] == 0 {
                continue;
            }
            for to in 0..self.sites {
                if to == from {
                    continue;
                }
                scratch[from] -= 1;
                scratch[to] += 1;
                let target = self.index_of(&scratch).expect("hop stays in sector");
                scratch[from] += 1;
                scratch[to] -= 1;
                let factor = ((c[from] as f64) * (c[to] as f64 + 1.0)).sqrt();
                out.push(Hop { target, from, to, factor });
            }
        }
        out
    }

    /// Occupation of `region` in configuration `index`.
    pub fn region_number(&self, index: usize, region: &Region) -> usize {
        let c = self.config(index);
        region.sites().iter().map(|&s| c[s] as usize).sum()
    }

    /// Basis vector for a Mott configuration.
    pub fn mott_state(&self, config: &[Occupation]) -> Result<PureState> {
        let idx = self
            .index_of(config)
            .ok_or_else(|| Error::State(format!("configuration {config:?} not in sector")))?;
        Ok(PureState::basis(self.dim(), idx))
    }
}

fn fill(out: &mut Vec<Occupation>, cur: &mut [Occupation], site: usize, remaining: usize) {
    if site + 1 == cur.len() {
        cur[site] = remaining as Occupation;
        out.extend_from_slice(cur);
        return;
    }
    for n in (0..=remaining).rev() {
        cur[site] = n as Occupation;
        fill(out, cur, site + 1, remaining - n);
    }
}

/// One boson moved from `from` to `to`; `factor = sqrt(n_from * (n_to + 1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hop {
    pub target: usize,
    pub from: usize,
    pub to: usize,
    pub factor: f64,
}

/// Projector selector for `P_{n_X <= N0}` and `P_{n_X >= N0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Count {
    AtMost(usize),
    AtLeast(usize),
}

impl Count {
    pub fn holds(self, n: usize) -> bool {
        match self {
            Count::AtMost(k) => n <= k,
            Count::AtLeast(k) => n >= k,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: Vec<Complex64>,
}

impl PureState {
    /// Wraps amplitudes, rejecting states that are not normalized to `NORM_TOL`.
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::State(format!("norm^2 = {norm}, expected 1")));
        }
        Ok(Self { amps })
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(mut amps: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::State("cannot normalize a zero vector".into()));
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { amps })
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Self { amps }
    }

    pub(crate) fn from_raw(amps: Vec<Complex64>) -> Self {
        Self { amps }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn fidelity(&self, other: &PureState) -> f64 {
        self.inner(other).norm_sqr()
    }
}

/// Dense density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    rho: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validates unit trace, Hermiticity and positivity to `NORM_TOL`.
    pub fn new(rho: DMatrix<Complex64>) -> Result<Self> {
        if !rho.is_square() {
            return Err(Error::State("density matrix must be square".into()));
        }
        let trace: Complex64 = rho.trace();
        if (trace.re - 1.0).abs() > NORM_TOL || trace.im.abs() > NORM_TOL {
            return Err(Error::State(format!("trace = {trace}, expected 1")));
        }
        let herm = (&rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > NORM_TOL {
            return Err(Error::State(format!("not Hermitian: deviation {herm:e}")));
        }
        let min_eig = rho
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -NORM_TOL {
            return Err(Error::State(format!("not positive: eigenvalue {min_eig:e}")));
        }
        Ok(Self { rho })
    }

    pub fn from_pure(psi: &PureState) -> Self {
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        Self { rho: &v * v.adjoint() }
    }

    /// `sum_k w_k |psi_k><psi_k|` with weights summing to one.
    pub fn mixture(members: &[(f64, PureState)]) -> Result<Self> {
        let dim = members.first().map(|(_, p)| p.dim()).ok_or_else(|| Error::State("empty mixture".into()))?;
        let mut rho = DMatrix::zeros(dim, dim);
        for (w, psi) in members {
            rho += DensityMatrix::from_pure(psi).rho * Complex64::new(*w, 0.0);
        }
        Self::new(rho)
    }

    pub(crate) fn from_raw(rho: DMatrix<Complex64>) -> Self {
        Self { rho }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }
}

/// Weighted collection of pure states; the mixed state without forming `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<(f64, PureState)>,
}

impl Ensemble {
    pub fn new(members: Vec<(f64, PureState)>) -> Result<Self> {
        let Some(dim) = members.first().map(|(_, p)| p.dim()) else {
            return Err(Error::State("empty ensemble".into()));
        };
        if members.iter().any(|(w, p)| *w < 0.0 || p.dim() != dim) {
            return Err(Error::State("ensemble weights must be nonnegative, dims equal".into()));
        }
        let total: f64 = members.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::State(format!("ensemble weights sum to {total}")));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[(f64, PureState)] {
        &self.members
    }
}

/// Any of the state representations the evolver understands.
#[derive(Debug, Clone, PartialEq)]
pub enum State {
    Pure(PureState),
    Mixed(DensityMatrix),
    Ensemble(Ensemble),
}

impl From<PureState> for State {
    fn from(p: PureState) -> Self {
        State::Pure(p)
    }
}

impl From<DensityMatrix> for State {
    fn from(r: DensityMatrix) -> Self {
        State::Mixed(r)
    }
}

impl From<Ensemble> for State {
    fn from(e: Ensemble) -> Self {
        State::Ensemble(e)
    }
}

impl State {
    pub fn dim(&self) -> usize {
        match self {
            State::Pure(p) => p.dim(),
            State::Mixed(r) => r.dim(),
            State::Ensemble(e) => e.members[0].1.dim(),
        }
    }

    /// `<a|rho|b>`.
    pub fn element(&self, a: usize, b: usize) -> Complex64 {
        match self {
            State::Pure(p) => p.amps[a] * p.amps[b].conj(),
            State::Mixed(r) => r.rho[(a, b)],
            State::Ensemble(e) => e
                .members
                .iter()
                .map(|(w, p)| p.amps[a] * p.amps[b].conj() * *w)
                .sum(),
        }
    }

    /// Diagonal weight `p_a = <a|rho|a>`.
    pub fn prob(&self, a: usize) -> f64 {
        match self {
            State::Pure(p) => p.amps[a].norm_sqr(),
            State::Mixed(r) => r.rho[(a, a)].re,
            State::Ensemble(e) => e.members.iter().map(|(w, p)| w * p.amps[a].norm_sqr()).sum(),
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.dim()).map(|a| self.prob(a)).collect()
    }

    /// `tr(rho)`, or the squared norm for pure states.
    pub fn trace(&self) -> f64 {
        match self {
            State::Pure(p) => p.norm_sqr(),
            State::Mixed(r) => r.trace(),
            State::Ensemble(e) => e.members.iter().map(|(w, p)| w * p.norm_sqr()).sum(),
        }
    }

    pub fn as_pure(&self) -> Option<&PureState> {
        match self {
            State::Pure(p) => Some(p),
            _ => None,
        }
    }

    /// `tr(P rho)` for the projector onto configurations whose `region` count satisfies `count`.
    pub fn projector_weight(&self, basis: &FockBasis, region: &Region, count: Count) -> f64 {
        (0..basis.dim())
            .filter(|&a| count.holds(basis.region_number(a, region)))
            .map(|a| self.prob(a))
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }

    /// Boson concentrations `x_i = <n_i> / N`.
    pub fn concentrations(&self, basis: &FockBasis) -> Result<Vec<f64>> {
        if basis.total() == 0 {
            return Err(Error::State("concentrations undefined for zero bosons".into()));
        }
        let mut x = vec![0.0; basis.sites()];
        for (a, c) in basis.iter().enumerate() {
            let p = self.prob(a);
            if p == 0.0 {
                continue;
            }
            for (xi, &n) in x.iter_mut().zip(c) {
                *xi += p * n as f64;
            }
        }
        let n = basis.total() as f64;
        x.iter_mut().for_each(|v| *v /= n);
        Ok(x)
    }

    /// Expected occupations `<n_i>`.
    pub fn occupations(&self, basis: &FockBasis) -> Vec<f64> {
        let mut x = vec![0.0; basis.sites()];
        for (a, c) in basis.iter().enumerate() {
            let p = self.prob(a);
            for (xi, &n) in x.iter_mut().zip(c) {
                *xi += p * n as f64;
            }
        }
        x
    }
}
