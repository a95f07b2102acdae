//! Long-range Bose-Hubbard Hamiltonians on a Fock sector.
//!
//! A [`HamiltonianModel`] is constant in time; time dependence is carried by stage lists
//! (see [`crate::evolve::Stage`]). Every model conserves the total particle number, so
//! materialization never leaves the sector it was given.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fock::{FockBasis, Occupation};
use crate::lattice::Lattice;

/// Relative slack allowed when checking `|J_ij| <= J / |i - j|^alpha`.
const DECAY_SLACK: f64 = 1e-12;

/// Hopping amplitudes satisfy `|J_ij| <= j / |i - j|^alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayCertificate {
    pub j: f64,
    pub alpha: f64,
}

/// Symmetric real hopping matrix `J_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hopping {
    n: usize,
    amps: Vec<f64>,
    certificate: Option<DecayCertificate>,
}

impl Hopping {
    pub fn zero(n_sites: usize) -> Self {
        Self { n: n_sites, amps: vec![0.0; n_sites * n_sites], certificate: None }
    }

    /// `J_ij = j / |i - j|^alpha` on every pair; saturates its own certificate.
    pub fn power_law(lattice: &Lattice, j: f64, alpha: f64) -> Self {
        let mut h = Self::zero(lattice.len());
        for a in 0..lattice.len() {
            for b in (a + 1)..lattice.len() {
                h.set(a, b, j / lattice.distance(a, b).powf(alpha));
            }
        }
        h.certificate = Some(DecayCertificate { j, alpha });
        h
    }

    /// `J_ij = j` between unit-distance neighbours, zero otherwise.
    pub fn nearest_neighbor(lattice: &Lattice, j: f64) -> Self {
        let mut h = Self::zero(lattice.len());
        for a in 0..lattice.len() {
            for b in (a + 1)..lattice.len() {
                if lattice.distance_sq(a, b) == 1 {
                    h.set(a, b, j);
                }
            }
        }
        h
    }

    /// Dense table; must be symmetric with zero diagonal.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Model("hopping table must be square".into()));
        }
        let mut h = Self::zero(n);
        for a in 0..n {
            if rows[a][a] != 0.0 {
                return Err(Error::Model(format!("hopping table has nonzero diagonal at {a}")));
            }
            for b in 0..n {
                if rows[a][b] != rows[b][a] {
                    return Err(Error::Model(format!("hopping table asymmetric at ({a}, {b})")));
                }
                h.amps[a * n + b] = rows[a][b];
            }
        }
        Ok(h)
    }

    pub fn with_certificate(mut self, j: f64, alpha: f64) -> Self {
        self.certificate = Some(DecayCertificate { j, alpha });
        self
    }

    /// Sets `J_ab = J_ba = value`.
    pub fn set(&mut self, a: usize, b: usize, value: f64) {
        assert_ne!(a, b, "hopping needs distinct sites");
        self.amps[a * self.n + b] = value;
        self.amps[b * self.n + a] = value;
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.amps[a * self.n + b]
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn certificate(&self) -> Option<DecayCertificate> {
        self.certificate
    }

    /// First pair breaking the power-law envelope, if any.
    pub fn decay_violation(&self, lattice: &Lattice) -> Option<Error> {
        let cert = self.certificate?;
        for a in 0..self.n {
            for b in (a + 1)..self.n {
                let limit = cert.j / lattice.distance(a, b).powf(cert.alpha);
                let value = self.get(a, b);
                if value.abs() > limit * (1.0 + DECAY_SLACK) {
                    return Some(Error::HoppingDecay { i: a, j: b, value, limit });
                }
            }
        }
        None
    }
}

/// A diagonal energy contribution in the occupation basis.
#[derive(Clone)]
pub enum InteractionTerm {
    /// `(u/2) sum n_i (n_i - 1) - mu sum n_i`.
    BoseHubbard { u: f64, mu: f64 },
    /// Site-resolved `(u_i/2) n_i (n_i - 1) + mu_i n_i`.
    SiteHubbard { u: Vec<f64>, mu: Vec<f64> },
    /// `quadratic * n_site^2 + linear * n_site`.
    OnSite { site: usize, quadratic: f64, linear: f64 },
    /// `sum_{i<j} v_ij n_i n_j`, `v` row-major and symmetric.
    DensityDensity { v: Vec<f64> },
    /// One energy per basis index.
    Table(Vec<f64>),
    /// Arbitrary function of the occupations.
    Custom(Arc<dyn Fn(&[Occupation]) -> f64 + Send + Sync>),
}

impl fmt::Debug for InteractionTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BoseHubbard { u, mu } => write!(f, "BoseHubbard {{ u: {u}, mu: {mu} }}"),
            Self::SiteHubbard { u, mu } => write!(f, "SiteHubbard {{ u: {u:?}, mu: {mu:?} }}"),
            Self::OnSite { site, quadratic, linear } => {
                write!(f, "OnSite {{ site: {site}, quadratic: {quadratic}, linear: {linear} }}")
            }
            Self::DensityDensity { v } => write!(f, "DensityDensity {{ v: {v:?} }}"),
            Self::Table(t) => write!(f, "Table({} entries)", t.len()),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl InteractionTerm {
    fn energy(&self, index: usize, c: &[Occupation]) -> f64 {
        match self {
            Self::BoseHubbard { u, mu } => c
                .iter()
                .map(|&n| {
                    let n = n as f64;
                    0.5 * u * n * (n - 1.0) - mu * n
                })
                .sum(),
            Self::SiteHubbard { u, mu } => c
                .iter()
                .enumerate()
                .map(|(i, &n)| {
                    let n = n as f64;
                    0.5 * u[i] * n * (n - 1.0) + mu[i] * n
                })
                .sum(),
            Self::OnSite { site, quadratic, linear } => {
                let n = c[*site] as f64;
                quadratic * n * n + linear * n
            }
            Self::DensityDensity { v } => {
                let len = c.len();
                let mut e = 0.0;
                for a in 0..len {
                    for b in (a + 1)..len {
                        e += v[a * len + b] * c[a] as f64 * c[b] as f64;
                    }
                }
                e
            }
            Self::Table(t) => t[index],
            Self::Custom(f) => f(c),
        }
    }

    fn validate(&self, n_sites: usize, dim: usize) -> Result<()> {
        match self {
            Self::SiteHubbard { u, mu } if u.len() != n_sites || mu.len() != n_sites => {
                Err(Error::Model("site Hubbard parameters must have one entry per site".into()))
            }
            Self::OnSite { site, .. } if *site >= n_sites => {
                Err(Error::SiteIndex { index: *site, sites: n_sites })
            }
            Self::DensityDensity { v } if v.len() != n_sites * n_sites => {
                Err(Error::Model("density-density table must be |sites| x |sites|".into()))
            }
            Self::Table(t) if t.len() != dim => Err(Error::Model(format!(
                "diagonal table has {} entries, basis has {dim}",
                t.len()
            ))),
            _ => Ok(()),
        }
    }
}

/// Sum of diagonal terms; an arbitrary function of the occupation numbers.
#[derive(Debug, Clone, Default)]
pub struct Interaction(pub Vec<InteractionTerm>);

impl Interaction {
    pub fn none() -> Self {
        Self(Vec::new())
    }

    pub fn bose_hubbard(u: f64, mu: f64) -> Self {
        Self(vec![InteractionTerm::BoseHubbard { u, mu }])
    }

    pub fn with(mut self, term: InteractionTerm) -> Self {
        self.0.push(term);
        self
    }

    pub fn energy(&self, index: usize, c: &[Occupation]) -> f64 {
        self.0.iter().map(|t| t.energy(index, c)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Nearest-neighbour density-dependent tunneling `T_ij b_i^† (n_i + n_j) b_j` on a chain.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tunneling {
    pairs: Vec<(usize, usize, f64)>,
}

impl Tunneling {
    /// `pairs` lists unordered neighbour pairs; both orderings get the same amplitude.
    pub fn new(lattice: &Lattice, pairs: Vec<(usize, usize, f64)>) -> Result<Self> {
        if lattice.dim() != 1 {
            return Err(Error::Model("tunneling terms are defined on one-dimensional chains".into()));
        }
        for &(a, b, _) in &pairs {
            if a >= lattice.len() || b >= lattice.len() {
                return Err(Error::SiteIndex { index: a.max(b), sites: lattice.len() });
            }
            if lattice.distance_sq(a, b) != 1 {
                return Err(Error::Model(format!("tunneling pair ({a}, {b}) is not nearest-neighbour")));
            }
        }
        Ok(Self { pairs })
    }

    pub fn amplitude(&self, a: usize, b: usize) -> f64 {
        self.pairs
            .iter()
            .filter(|&&(p, q, _)| (p == a && q == b) || (p == b && q == a))
            .map(|&(_, _, t)| t)
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.iter().all(|&(_, _, t)| t == 0.0)
    }
}

/// Hopping plus diagonal interactions plus optional tunneling, constant in time.
#[derive(Debug, Clone)]
pub struct HamiltonianModel {
    pub hopping: Hopping,
    pub interaction: Interaction,
    pub tunneling: Option<Tunneling>,
}

impl HamiltonianModel {
    pub fn new(hopping: Hopping, interaction: Interaction) -> Self {
        Self { hopping, interaction, tunneling: None }
    }

    pub fn with_tunneling(mut self, tunneling: Tunneling) -> Self {
        self.tunneling = Some(tunneling);
        self
    }

    /// The zero operator on `n_sites` sites.
    pub fn zero(n_sites: usize) -> Self {
        Self::new(Hopping::zero(n_sites), Interaction::none())
    }

    pub fn n_sites(&self) -> usize {
        self.hopping.n_sites()
    }

    pub fn has_tunneling(&self) -> bool {
        self.tunneling.as_ref().is_some_and(|t| !t.is_empty())
    }

    /// Matrix element `<c'|H|c>` for `c' = c` with one boson moved `from -> to`.
    pub fn hop_amplitude(&self, c: &[Occupation], from: usize, to: usize) -> f64 {
        let n_from = c[from] as f64;
        let n_to = c[to] as f64;
        let factor = (n_from * (n_to + 1.0)).sqrt();
        let mut amp = self.hopping.get(to, from);
        if let Some(t) = &self.tunneling {
            // (n_to + n_from) acts after the annihilation at `from`.
            amp += t.amplitude(to, from) * (n_to + n_from - 1.0);
        }
        amp * factor
    }

    /// Checks the hopping decay certificate against the lattice.
    pub fn verify_hopping_decay(&self, lattice: &Lattice) -> bool {
        self.hopping.decay_violation(lattice).is_none()
    }

    /// Sparse matrix of this model on `basis`. Fails when the decay certificate is broken.
    pub fn materialize(&self, basis: &FockBasis, lattice: &Lattice) -> Result<SparseHamiltonian> {
        if basis.sites() != self.n_sites() || lattice.len() != self.n_sites() {
            return Err(Error::Model(format!(
                "model has {} sites, basis {} and lattice {}",
                self.n_sites(),
                basis.sites(),
                lattice.len()
            )));
        }
        if let Some(err) = self.hopping.decay_violation(lattice) {
            return Err(err);
        }
        for term in &self.interaction.0 {
            term.validate(self.n_sites(), basis.dim())?;
        }
        let dim = basis.dim();
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        for a in 0..dim {
            let c = basis.config(a);
            let e = self.interaction.energy(a, c);
            if e != 0.0 {
                triplets.push((a, a, e));
            }
            for hop in basis.hop_neighbors(a) {
                let amp = self.hop_amplitude(c, hop.from, hop.to);
                if amp != 0.0 {
                    triplets.push((hop.target, a, amp));
                }
            }
        }
        Ok(SparseHamiltonian::from_triplets(dim, triplets))
    }
}

/// Real symmetric matrix in compressed-row form, rows and columns sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHamiltonian {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseHamiltonian {
    /// Duplicated coordinates are summed.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "entry ({r}, {c}) outside dimension {dim}");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            cols.push(c);
            vals.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => 0.0,
        }
    }

    /// `y = H x`.
    pub fn apply<T>(&self, x: &[T], y: &mut [T])
    where
        T: Copy + Default + std::ops::AddAssign + std::ops::Mul<f64, Output = T>,
    {
        for r in 0..self.dim {
            let mut acc = T::default();
            for (c, v) in self.row(r) {
                acc += x[c] * v;
            }
            y[r] = acc;
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// `max |H_rc - H_cr|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// The four two-site transfer Hamiltonians.
///
/// Site 0 and site 1 of a two-site chain; `bosons` is the total number `M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoSiteTransfer {
    /// Hopping plus tunneling; `|M-1,1> <-> |1,M-1>` in `pi / (2 J M)`.
    TunnelingMirror,
    /// Hopping, tunneling and a resonant diagonal; `|k,M-k> <-> |k-1,M-k+1>` in
    /// `pi / (2 J M sqrt(k (M-k+1)))` as `U -> infinity`.
    TunnelingResonant { k: usize },
    /// Bare hopping; `|M-1,1> <-> |1,M-1>` in `pi / (2 J)`.
    HoppingMirror,
    /// Hopping and a resonant diagonal; `|k,M-k> <-> |k-1,M-k+1>` in
    /// `pi / (2 J sqrt(k (M-k+1)))` as `U -> infinity`.
    HoppingResonant { k: usize },
}

impl TwoSiteTransfer {
    pub fn resonance(self) -> Option<usize> {
        match self {
            Self::TunnelingResonant { k } | Self::HoppingResonant { k } => Some(k),
            _ => None,
        }
    }

    pub fn has_tunneling(self) -> bool {
        matches!(self, Self::TunnelingMirror | Self::TunnelingResonant { .. })
    }

    /// Analytic duration of the transfer.
    pub fn duration(self, bosons: usize, j: f64) -> Result<f64> {
        self.validate(bosons)?;
        let m = bosons as f64;
        let pi = std::f64::consts::PI;
        Ok(match self {
            Self::TunnelingMirror => pi / (2.0 * j * m),
            Self::HoppingMirror => pi / (2.0 * j),
            Self::TunnelingResonant { k } => pi / (2.0 * j * m * resonant_factor(bosons, k)),
            Self::HoppingResonant { k } => pi / (2.0 * j * resonant_factor(bosons, k)),
        })
    }

    /// Occupations `(n_0, n_1)` before and after the transfer.
    pub fn endpoints(self, bosons: usize) -> Result<([Occupation; 2], [Occupation; 2])> {
        self.validate(bosons)?;
        let m = bosons as Occupation;
        Ok(match self {
            Self::TunnelingMirror | Self::HoppingMirror => ([m - 1, 1], [1, m - 1]),
            Self::TunnelingResonant { k } | Self::HoppingResonant { k } => {
                let k = k as Occupation;
                ([k, m - k], [k - 1, m - k + 1])
            }
        })
    }

    fn validate(self, bosons: usize) -> Result<()> {
        if bosons < 3 {
            return Err(Error::Parameter(format!("two-site transfers need M >= 3, got {bosons}")));
        }
        if let Some(k) = self.resonance() {
            if k == 0 || k > bosons {
                return Err(Error::Parameter(format!("k = {k} outside 1..={bosons}")));
            }
        }
        Ok(())
    }
}

fn resonant_factor(bosons: usize, k: usize) -> f64 {
    ((k * (bosons - k + 1)) as f64).sqrt()
}

/// A two-site model embedded on the pair `(left, left + 1)` of a chain; everything else zero.
///
/// `diagonal` is `(site, quadratic, linear)` for a `quadratic n^2 + linear n` term.
pub fn pair_model(
    chain: &Lattice,
    left: usize,
    hop: f64,
    tunnel: f64,
    diagonal: Option<(usize, f64, f64)>,
) -> Result<HamiltonianModel> {
    if chain.dim() != 1 || left + 1 >= chain.len() {
        return Err(Error::Parameter(format!(
            "pair ({left}, {}) not inside a chain of {} sites",
            left + 1,
            chain.len()
        )));
    }
    let mut hopping = Hopping::zero(chain.len());
    hopping.set(left, left + 1, hop);
    let mut interaction = Interaction::none();
    if let Some((site, quadratic, linear)) = diagonal {
        interaction = interaction.with(InteractionTerm::OnSite { site, quadratic, linear });
    }
    let mut model = HamiltonianModel::new(hopping, interaction);
    if tunnel != 0.0 {
        model = model.with_tunneling(Tunneling::new(chain, vec![(left, left + 1, tunnel)])?);
    }
    Ok(model)
}

/// One of the [`TwoSiteTransfer`] Hamiltonians on sites `(left, left + 1)` of `chain`,
/// for `bosons` particles on the pair.
///
/// The resonant variants add `-U n^2 + U (2M - 2k + 1) n` on the right-hand site and
/// require `u`.
pub fn transfer_model(
    kind: TwoSiteTransfer,
    chain: &Lattice,
    left: usize,
    bosons: usize,
    j: f64,
    u: Option<f64>,
) -> Result<HamiltonianModel> {
    kind.validate(bosons)?;
    let tunnel = if kind.has_tunneling() { j } else { 0.0 };
    let diagonal = match kind.resonance() {
        Some(k) => {
            let u = u.ok_or_else(|| Error::Parameter("resonant transfers need an interaction U".into()))?;
            let linear = u * (2 * bosons - 2 * k + 1) as f64;
            Some((left + 1, -u, linear))
        }
        None => None,
    };
    pair_model(chain, left, j, tunnel, diagonal)
}

/// The three stages of the tunneling-assisted relay step on sites `(k, k+1)` of an
/// `L`-site chain carrying `L` bosons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelayStage {
    /// `|L,0> -> |L-1,1>`; resonant diagonal on site `k`.
    Load,
    /// `|L-1,1> -> |1,L-1>`; no interaction.
    Swap,
    /// `|1,L-1> -> |0,L>`; resonant diagonal on site `k+1`.
    Unload,
}

impl RelayStage {
    pub fn duration(self, chain_len: usize, j: f64) -> f64 {
        let l = chain_len as f64;
        let pi = std::f64::consts::PI;
        match self {
            Self::Load | Self::Unload => pi / (2.0 * j * l * l.sqrt()),
            Self::Swap => pi / (2.0 * j * l),
        }
    }
}

/// Relay stage Hamiltonian: hopping `J` and tunneling `J` on `(k, k+1)`, plus
/// `-U n^2 + U (2L - 1) n` on site `k` (load) or `k+1` (unload).
pub fn relay_stage_model(stage: RelayStage, chain: &Lattice, k: usize, j: f64, u: f64) -> Result<HamiltonianModel> {
    let l = chain.len();
    if l < 3 {
        return Err(Error::Parameter(format!("relay needs L >= 3, got {l}")));
    }
    let linear = u * (2 * l - 1) as f64;
    let diagonal = match stage {
        RelayStage::Load => Some((k, -u, linear)),
        RelayStage::Swap => None,
        RelayStage::Unload => Some((k + 1, -u, linear)),
    };
    pair_model(chain, k, j, j, diagonal)
}
