//! TOML experiment configuration and its validation into runnable plans.
//!
//! Validation builds every lattice, basis, region, model and parameter set up front, so a
//! bad file is rejected before anything is evolved. Errors name the offending key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use speedlimit::bounds::BoundParams;
use speedlimit::evolve::Stage;
use speedlimit::fock::{FockBasis, Occupation};
use speedlimit::hamiltonian::{HamiltonianModel, Hopping, Interaction, Tunneling};
use speedlimit::lattice::{Lattice, Region};
use speedlimit::protocols::{
    sequential_mott_transfer, stepwise_relay_transfer, supersonic_transfer, ProtocolSchedule, DEFAULT_U_OVER_J,
};
use speedlimit::transport::MASS_TOL;

use crate::error::{HarnessError, Result};
use crate::random::{instance_rng, random_protocol_with, random_state, ModelLimits};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Ot,
    BoundCheck,
    Protocol,
    Oracle,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Ot => "ot",
            Self::BoundCheck => "bound-check",
            Self::Protocol => "protocol",
            Self::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<ExperimentKind>,
    pub seed: Option<u64>,
    pub lattice: Option<LatticeSpec>,
    pub system: Option<SystemSpec>,
    pub regions: Option<RegionSpec>,
    pub initial: Option<InitialSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stages: Vec<StageSpec>,
    pub random: Option<RandomSpec>,
    pub sampling: Option<SamplingSpec>,
    pub bounds: Option<BoundSpec>,
    pub sweep: Option<SweepSpec>,
    pub ot: Option<OtSpec>,
    pub protocol: Option<ProtocolSpec>,
    pub oracle: Option<OracleSpec>,
    pub output: Option<OutputSpec>,
}

/// Hypercubic box; the dimension is the number of extents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub extents: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub bosons: usize,
    #[serde(default = "one")]
    pub j: f64,
    pub alpha: f64,
}

/// Site indices are 0-based, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    /// Start from this Mott configuration.
    pub config: Option<Vec<Occupation>>,
    /// Start from a seeded random pure state on the whole sector.
    #[serde(default)]
    pub random: bool,
    /// Fidelity target for the trajectory table.
    pub target: Option<Vec<Occupation>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoppingShape {
    /// `scale * J / r^alpha` on every pair.
    #[default]
    PowerLaw,
    /// `scale * J` between unit-distance neighbours.
    NearestNeighbor,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub duration: f64,
    #[serde(default)]
    pub hopping: HoppingShape,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub u: f64,
    #[serde(default)]
    pub mu: f64,
    /// Density-dependent tunneling amplitude on every nearest-neighbour pair of a chain.
    #[serde(default)]
    pub tunneling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    pub stage_count: usize,
    /// Total duration of each protocol; sweeps draw it uniformly from `[horizon/20, horizon]`.
    pub horizon: f64,
    #[serde(default = "two")]
    pub u_max: f64,
    #[serde(default = "one")]
    pub chem_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    #[serde(default = "default_samples")]
    pub samples_per_stage: usize,
    /// Starting trapezoid count per stage for time integrals.
    #[serde(default = "default_quadrature")]
    pub quadrature_samples: usize,
    /// Exponent of the `r^a` costs used for the velocity term.
    #[serde(default = "one")]
    pub cost_exponent: f64,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self { samples_per_stage: default_samples(), quadrature_samples: default_quadrature(), cost_exponent: 1.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSpec {
    pub epsilon: Option<f64>,
    /// Shell constant override; taken from the lattice when absent.
    pub gamma: Option<f64>,
    pub mu: Option<f64>,
    pub n0: Option<usize>,
    pub delta_n0: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Unified,
    MinTime,
    Leakage,
    VelocityCeiling,
    Configuration,
}

pub const ALL_CHECKS: [CheckKind; 5] =
    [CheckKind::Unified, CheckKind::MinTime, CheckKind::Leakage, CheckKind::VelocityCeiling, CheckKind::Configuration];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    pub checks: Option<Vec<CheckKind>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OtSpec {
    #[serde(default = "one")]
    pub exponent: f64,
    pub x: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
    /// Random instances instead of `x`, `y`.
    pub instances: Option<usize>,
    #[serde(default = "three")]
    pub min_points: usize,
    #[serde(default = "twelve")]
    pub max_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolName {
    Sequential,
    Supersonic,
    Stepwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    pub name: ProtocolName,
    pub sites: usize,
    /// Sequential transfer only; the relays carry one boson per site.
    pub bosons: Option<usize>,
    #[serde(default = "one")]
    pub j: f64,
    pub u: Option<f64>,
    /// Decay exponent used for the minimum-time check.
    #[serde(default = "three")]
    pub alpha: f64,
    /// Fraction that must reach the last site for the minimum-time check to apply.
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_fidelity")]
    pub min_fidelity: f64,
    /// Also integrate the velocity term and check the unified limit.
    #[serde(default)]
    pub unified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    #[serde(default = "default_kac_max")]
    pub max_m: usize,
    #[serde(default = "default_corner_max")]
    pub corner_max_m: usize,
    #[serde(default = "default_identity_max")]
    pub identity_max_m: usize,
    #[serde(default = "default_finite_u")]
    pub finite_u: Vec<f64>,
    #[serde(default = "default_finite_u_bosons")]
    pub finite_u_bosons: Vec<usize>,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            max_m: default_kac_max(),
            corner_max_m: default_corner_max(),
            identity_max_m: default_identity_max(),
            finite_u: default_finite_u(),
            finite_u_bosons: default_finite_u_bosons(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn three<T: From<u8>>() -> T {
    T::from(3)
}
fn twelve() -> usize {
    12
}
fn default_samples() -> usize {
    64
}
fn default_quadrature() -> usize {
    16
}
fn default_seeds() -> usize {
    100
}
fn default_mu() -> f64 {
    0.99
}
fn default_fidelity() -> f64 {
    0.99
}
fn default_kac_max() -> usize {
    25
}
fn default_corner_max() -> usize {
    15
}
fn default_identity_max() -> usize {
    30
}
fn default_finite_u() -> Vec<f64> {
    vec![1e3, 1e4, 1e5, 1e6]
}
fn default_finite_u_bosons() -> Vec<usize> {
    vec![3, 4, 5, 6]
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Validation(format!("config: {e}")))
    }
}

/// Everything needed to run a simulation, already checked.
#[derive(Debug, Clone)]
pub struct SimulatePlan {
    pub lattice: Lattice,
    pub basis: FockBasis,
    pub initial: speedlimit::fock::PureState,
    pub target: Option<speedlimit::fock::PureState>,
    pub stages: Vec<Stage>,
    pub sampling: SamplingSpec,
    pub regions: Option<(Region, Region)>,
    pub params: Option<BoundParams>,
    pub leakage: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub lattice: Lattice,
    pub bosons: usize,
    pub alpha: f64,
    pub limits: ModelLimits,
    pub stage_count: usize,
    pub horizon: f64,
    pub seeds: usize,
    pub regions: (Region, Region),
    pub params: BoundParams,
    pub n0: usize,
    pub delta_n0: usize,
    pub checks: Vec<CheckKind>,
    pub sampling: SamplingSpec,
}

#[derive(Debug, Clone)]
pub enum OtPlan {
    Explicit { lattice: Lattice, x: Vec<f64>, y: Vec<f64>, exponent: f64 },
    Random { instances: usize, min_points: usize, max_points: usize },
}

#[derive(Debug, Clone)]
pub struct ProtocolPlan {
    pub schedule: ProtocolSchedule,
    pub params: BoundParams,
    pub min_fidelity: f64,
    pub unified: bool,
    pub sampling: SamplingSpec,
}

#[derive(Debug, Clone)]
pub enum Plan {
    Simulate(Box<SimulatePlan>),
    Ot(OtPlan),
    BoundCheck(Box<SweepPlan>),
    Protocol(Box<ProtocolPlan>),
    Oracle(OracleSpec),
}

fn require<'a, T>(v: &'a Option<T>, path: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| HarnessError::validation(path, "missing section"))
}

fn at(path: &str) -> impl FnOnce(speedlimit::Error) -> HarnessError + '_ {
    move |e| HarnessError::validation(path, e)
}

fn positive(path: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(HarnessError::validation(path, format!("must be positive and finite, got {v}")))
    }
}

fn build_lattice(spec: &LatticeSpec) -> Result<Lattice> {
    Lattice::hypercubic(spec.extents.len(), &spec.extents).map_err(at("lattice.extents"))
}

fn build_regions(spec: &RegionSpec, lattice: &Lattice) -> Result<(Region, Region)> {
    let x = lattice.region(spec.x.iter().copied()).map_err(at("regions.x"))?;
    let y = lattice.region(spec.y.iter().copied()).map_err(at("regions.y"))?;
    if x.is_empty() {
        return Err(HarnessError::validation("regions.x", "empty region"));
    }
    if y.is_empty() {
        return Err(HarnessError::validation("regions.y", "empty region"));
    }
    if let Some(s) = y.sites().iter().find(|s| x.contains(**s)) {
        return Err(HarnessError::validation("regions.y", format!("overlaps regions.x at site {s}")));
    }
    Ok((x, y))
}

fn build_params(bounds: Option<&BoundSpec>, lattice: &Lattice, j: f64, alpha: f64, default_mu: f64) -> Result<BoundParams> {
    let gamma = bounds.and_then(|b| b.gamma).unwrap_or_else(|| lattice.shell_constant().value);
    let mu = bounds.and_then(|b| b.mu).unwrap_or(default_mu);
    let mut p = BoundParams::new(j, alpha, lattice.dim(), gamma, mu).map_err(at("bounds"))?;
    if let Some(eps) = bounds.and_then(|b| b.epsilon) {
        p = p.with_epsilon(eps).map_err(at("bounds.epsilon"))?;
    }
    Ok(p)
}

fn check_sampling(s: &SamplingSpec) -> Result<()> {
    if s.samples_per_stage == 0 {
        return Err(HarnessError::validation("sampling.samples_per_stage", "must be at least 1"));
    }
    if s.quadrature_samples < 2 {
        return Err(HarnessError::validation("sampling.quadrature_samples", "must be at least 2"));
    }
    if !(s.cost_exponent > 0.0 && s.cost_exponent <= 1.0) {
        return Err(HarnessError::validation("sampling.cost_exponent", "must lie in (0, 1]"));
    }
    Ok(())
}

fn explicit_stage(spec: &StageSpec, k: usize, lattice: &Lattice, system: &SystemSpec) -> Result<Stage> {
    let path = format!("stages[{k}]");
    positive(&format!("{path}.duration"), spec.duration)?;
    let hopping = match spec.hopping {
        HoppingShape::PowerLaw => {
            let mut h = Hopping::power_law(lattice, spec.scale * system.j, system.alpha);
            if spec.scale.abs() <= 1.0 {
                h = h.with_certificate(system.j, system.alpha);
            }
            h
        }
        HoppingShape::NearestNeighbor => Hopping::nearest_neighbor(lattice, spec.scale * system.j),
        HoppingShape::None => Hopping::zero(lattice.len()),
    };
    let mut model = HamiltonianModel::new(hopping, Interaction::bose_hubbard(spec.u, spec.mu));
    if spec.tunneling != 0.0 {
        let pairs = (0..lattice.len().saturating_sub(1)).map(|a| (a, a + 1, spec.tunneling)).collect();
        let t = Tunneling::new(lattice, pairs).map_err(|e| HarnessError::validation(&format!("{path}.tunneling"), e))?;
        model = model.with_tunneling(t);
    }
    Ok(Stage::new(model, spec.duration).labeled(path))
}

fn mott(basis: &FockBasis, config: &[Occupation], path: &str) -> Result<speedlimit::fock::PureState> {
    basis.mott_state(config).map_err(|e| HarnessError::validation(path, e))
}

impl ExperimentConfig {
    /// Checks the sections `kind` needs and builds its plan. No dynamics are computed.
    pub fn plan(&self, kind: ExperimentKind, seed: u64) -> Result<Plan> {
        if let Some(k) = self.kind {
            if k != kind {
                return Err(HarnessError::validation("kind", format!("config is for {}, not {}", k.name(), kind.name())));
            }
        }
        match kind {
            ExperimentKind::Simulate => self.simulate_plan(seed).map(|p| Plan::Simulate(Box::new(p))),
            ExperimentKind::Ot => self.ot_plan().map(Plan::Ot),
            ExperimentKind::BoundCheck => self.sweep_plan().map(|p| Plan::BoundCheck(Box::new(p))),
            ExperimentKind::Protocol => self.protocol_plan().map(|p| Plan::Protocol(Box::new(p))),
            ExperimentKind::Oracle => self.oracle_plan().map(Plan::Oracle),
        }
    }

    fn simulate_plan(&self, seed: u64) -> Result<SimulatePlan> {
        let lattice = build_lattice(require(&self.lattice, "lattice")?)?;
        let system = require(&self.system, "system")?;
        positive("system.j", system.j)?;
        positive("system.alpha", system.alpha)?;
        let basis = FockBasis::new(lattice.len(), system.bosons).map_err(at("system.bosons"))?;
        let sampling = self.sampling.clone().unwrap_or_default();
        check_sampling(&sampling)?;

        let stages = match (&self.stages[..], &self.random) {
            ([], None) => return Err(HarnessError::validation("stages", "give [[stages]] or a [random] section")),
            ([_, ..], Some(_)) => return Err(HarnessError::validation("random", "conflicts with explicit [[stages]]")),
            (specs @ [_, ..], None) => {
                specs.iter().enumerate().map(|(k, s)| explicit_stage(s, k, &lattice, system)).collect::<Result<_>>()?
            }
            ([], Some(r)) => {
                positive("random.horizon", r.horizon)?;
                let limits = ModelLimits { j: system.j, u_max: r.u_max, chem_max: r.chem_max };
                let mut rng = instance_rng(seed, 0);
                random_protocol_with(&mut rng, seed, &lattice, system.bosons, system.alpha, r.stage_count, r.horizon, limits)
                    .map_err(at("random"))?
                    .stages
            }
        };

        let init = self.initial.clone().unwrap_or_default();
        let initial = match (&init.config, init.random) {
            (Some(_), true) => return Err(HarnessError::validation("initial", "set either config or random, not both")),
            (Some(c), false) => mott(&basis, c, "initial.config")?,
            (None, true) => random_state(&mut instance_rng(seed, 1), &basis).map_err(at("initial.random"))?,
            (None, false) => {
                let mut c = vec![0; lattice.len()];
                c[0] = system.bosons as Occupation;
                mott(&basis, &c, "initial")?
            }
        };
        let target = init.target.as_ref().map(|c| mott(&basis, c, "initial.target")).transpose()?;

        let regions = self.regions.as_ref().map(|r| build_regions(r, &lattice)).transpose()?;
        let params = match &regions {
            Some(_) => Some(build_params(self.bounds.as_ref(), &lattice, system.j, system.alpha, 0.5)?),
            None => None,
        };
        let leakage = match (&regions, self.bounds.as_ref().and_then(|b| b.delta_n0)) {
            (Some(_), Some(0)) => return Err(HarnessError::validation("bounds.delta_n0", "must be at least 1")),
            (Some(_), Some(d)) => Some((self.bounds.as_ref().and_then(|b| b.n0).unwrap_or(0), d)),
            (None, Some(_)) => return Err(HarnessError::validation("bounds.delta_n0", "needs a [regions] section")),
            _ => None,
        };
        Ok(SimulatePlan { lattice, basis, initial, target, stages, sampling, regions, params, leakage })
    }

    fn sweep_plan(&self) -> Result<SweepPlan> {
        let lattice = build_lattice(require(&self.lattice, "lattice")?)?;
        let system = require(&self.system, "system")?;
        positive("system.j", system.j)?;
        FockBasis::new(lattice.len(), system.bosons).map_err(at("system.bosons"))?;
        let random = require(&self.random, "random")?;
        positive("random.horizon", random.horizon)?;
        if random.stage_count == 0 {
            return Err(HarnessError::validation("random.stage_count", "must be at least 1"));
        }
        if random.u_max < 0.0 || random.chem_max < 0.0 {
            return Err(HarnessError::validation("random", "u_max and chem_max must be nonnegative"));
        }
        let regions = build_regions(require(&self.regions, "regions")?, &lattice)?;
        let params = build_params(self.bounds.as_ref(), &lattice, system.j, system.alpha, 0.5)
            .map_err(|e| HarnessError::Validation(format!("{e} (system.alpha must exceed the lattice dimension)")))?;
        let sweep = self.sweep.clone().unwrap_or(SweepSpec { seeds: default_seeds(), checks: None });
        if sweep.seeds == 0 {
            return Err(HarnessError::validation("sweep.seeds", "must be at least 1"));
        }
        let checks = sweep.checks.unwrap_or_else(|| ALL_CHECKS.to_vec());
        if checks.is_empty() {
            return Err(HarnessError::validation("sweep.checks", "empty list"));
        }
        let n0 = self.bounds.as_ref().and_then(|b| b.n0).unwrap_or(0);
        let delta_n0 = self.bounds.as_ref().and_then(|b| b.delta_n0).unwrap_or(1);
        if delta_n0 == 0 {
            return Err(HarnessError::validation("bounds.delta_n0", "must be at least 1"));
        }
        if n0 + delta_n0 > system.bosons {
            return Err(HarnessError::validation("bounds", format!("n0 + delta_n0 exceeds the {} bosons", system.bosons)));
        }
        let sampling = self.sampling.clone().unwrap_or_default();
        check_sampling(&sampling)?;
        Ok(SweepPlan {
            lattice,
            bosons: system.bosons,
            alpha: system.alpha,
            limits: ModelLimits { j: system.j, u_max: random.u_max, chem_max: random.chem_max },
            stage_count: random.stage_count,
            horizon: random.horizon,
            seeds: sweep.seeds,
            regions,
            params,
            n0,
            delta_n0,
            checks,
            sampling,
        })
    }

    fn ot_plan(&self) -> Result<OtPlan> {
        let spec = require(&self.ot, "ot")?;
        if !(spec.exponent > 0.0 && spec.exponent <= 1.0) {
            return Err(HarnessError::validation("ot.exponent", "must lie in (0, 1]"));
        }
        match (&spec.x, &spec.y, spec.instances) {
            (Some(x), Some(y), None) => {
                let lattice = build_lattice(require(&self.lattice, "lattice")?)?;
                for (name, d) in [("ot.x", x), ("ot.y", y)] {
                    if d.len() != lattice.len() {
                        return Err(HarnessError::validation(name, format!("has {} entries, lattice has {} sites", d.len(), lattice.len())));
                    }
                    if d.iter().any(|v| !v.is_finite() || *v < 0.0) {
                        return Err(HarnessError::validation(name, "negative or non-finite mass"));
                    }
                    let s: f64 = d.iter().sum();
                    if (s - 1.0).abs() > MASS_TOL {
                        return Err(HarnessError::validation(name, format!("sums to {s}, not 1")));
                    }
                }
                Ok(OtPlan::Explicit { lattice, x: x.clone(), y: y.clone(), exponent: spec.exponent })
            }
            (None, None, Some(n)) => {
                if n == 0 {
                    return Err(HarnessError::validation("ot.instances", "must be at least 1"));
                }
                if spec.min_points < 1 || spec.min_points > spec.max_points || spec.max_points > 64 {
                    return Err(HarnessError::validation("ot", "need 1 <= min_points <= max_points <= 64"));
                }
                Ok(OtPlan::Random { instances: n, min_points: spec.min_points, max_points: spec.max_points })
            }
            _ => Err(HarnessError::validation("ot", "give both x and y, or instances")),
        }
    }

    fn protocol_plan(&self) -> Result<ProtocolPlan> {
        let spec = require(&self.protocol, "protocol")?;
        positive("protocol.j", spec.j)?;
        let u = positive("protocol.u", spec.u.unwrap_or(DEFAULT_U_OVER_J * spec.j))?;
        let schedule = match spec.name {
            ProtocolName::Sequential => {
                let bosons = spec.bosons.ok_or_else(|| HarnessError::validation("protocol.bosons", "required for sequential"))?;
                sequential_mott_transfer(spec.sites, bosons, spec.j, u)
            }
            ProtocolName::Supersonic => supersonic_transfer(spec.sites, spec.j, u),
            ProtocolName::Stepwise => stepwise_relay_transfer(spec.sites, spec.j, u),
        }
        .map_err(at("protocol"))?;
        if !matches!(spec.name, ProtocolName::Sequential) && spec.bosons.is_some_and(|b| b != spec.sites) {
            return Err(HarnessError::validation("protocol.bosons", "relays carry exactly one boson per site"));
        }
        schedule.basis().map_err(at("protocol.sites"))?;
        let params = build_params(
            self.bounds.as_ref(),
            &schedule.lattice,
            spec.j,
            spec.alpha,
            spec.mu,
        )?;
        if !(spec.min_fidelity > 0.0 && spec.min_fidelity <= 1.0) {
            return Err(HarnessError::validation("protocol.min_fidelity", "must lie in (0, 1]"));
        }
        let sampling = self.sampling.clone().unwrap_or_default();
        check_sampling(&sampling)?;
        Ok(ProtocolPlan { schedule, params, min_fidelity: spec.min_fidelity, unified: spec.unified, sampling })
    }

    fn oracle_plan(&self) -> Result<OracleSpec> {
        let spec = self.oracle.clone().unwrap_or_default();
        if spec.max_m == 0 || spec.max_m > 60 {
            return Err(HarnessError::validation("oracle.max_m", "must lie in 1..=60"));
        }
        if spec.corner_max_m < 3 || spec.corner_max_m > 60 {
            return Err(HarnessError::validation("oracle.corner_max_m", "must lie in 3..=60"));
        }
        if spec.identity_max_m == 0 || spec.identity_max_m > 200 {
            return Err(HarnessError::validation("oracle.identity_max_m", "must lie in 1..=200"));
        }
        if spec.finite_u.iter().any(|u| !(*u > 0.0) || !u.is_finite()) {
            return Err(HarnessError::validation("oracle.finite_u", "values must be positive"));
        }
        if spec.finite_u_bosons.iter().any(|&m| !(3..=40).contains(&m)) {
            return Err(HarnessError::validation("oracle.finite_u_bosons", "values must lie in 3..=40"));
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIMULATE: &str = r#"
        seed = 4
        [lattice]
        extents = [5]
        [system]
        bosons = 3
        alpha = 2.5
        [random]
        stage_count = 3
        horizon = 2.0
        [regions]
        x = [0, 1]
        y = [4]
    "#;

    #[test]
    fn parses_and_plans_simulation() {
        let cfg = ExperimentConfig::parse(SIMULATE).unwrap();
        let Plan::Simulate(p) = cfg.plan(ExperimentKind::Simulate, 4).unwrap() else { panic!() };
        assert_eq!(p.basis.dim(), 35);
        assert_eq!(p.stages.len(), 3);
        assert!(p.params.is_some());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::parse("[lattice]\nextents = [3]\nshape = 1\n").unwrap_err();
        assert!(err.to_string().contains("shape"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn overlapping_regions_fail_validation() {
        let text = SIMULATE.replace("y = [4]", "y = [1, 4]");
        let err = ExperimentConfig::parse(&text).unwrap().plan(ExperimentKind::Simulate, 0).unwrap_err();
        assert!(err.to_string().contains("regions.y"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn missing_sections_are_named() {
        let err = ExperimentConfig::default().plan(ExperimentKind::Simulate, 0).unwrap_err();
        assert!(err.to_string().contains("lattice"), "{err}");
        let err = ExperimentConfig::default().plan(ExperimentKind::Ot, 0).unwrap_err();
        assert!(err.to_string().contains("ot"), "{err}");
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        let cfg = ExperimentConfig { kind: Some(ExperimentKind::Ot), ..Default::default() };
        assert!(cfg.plan(ExperimentKind::Protocol, 0).is_err());
    }

    #[test]
    fn explicit_stages_and_distributions() {
        let text = r#"
            [lattice]
            extents = [3]
            [system]
            bosons = 2
            alpha = 3.0
            [initial]
            config = [0, 2, 0]
            [[stages]]
            duration = 0.5
            u = 1.0
            [[stages]]
            duration = 0.25
            hopping = "nearest_neighbor"
            tunneling = 0.5
            [ot]
            x = [0.5, 0.5, 0.0]
            y = [0.0, 0.5, 0.6]
        "#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        let Plan::Simulate(p) = cfg.plan(ExperimentKind::Simulate, 0).unwrap() else { panic!() };
        assert!(p.stages[1].model.has_tunneling());
        let err = cfg.plan(ExperimentKind::Ot, 0).unwrap_err();
        assert!(err.to_string().contains("ot.y"), "{err}");
    }

    #[test]
    fn bad_values_are_located() {
        let text = SIMULATE.replace("alpha = 2.5", "alpha = 0.5");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        assert!(cfg.plan(ExperimentKind::Simulate, 0).is_err());
        let text = SIMULATE.replace("bosons = 3", "bosons = 300");
        let err = ExperimentConfig::parse(&text).unwrap().plan(ExperimentKind::Simulate, 0).unwrap_err();
        assert!(err.to_string().contains("system.bosons"), "{err}");
    }
}
