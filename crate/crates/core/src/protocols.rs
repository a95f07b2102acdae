//! Constructive transfer protocols built from two-site stages, and their execution.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::{Evolution, SampleOptions, Stage, Trajectory};
use crate::fock::{FockBasis, Occupation, PureState, State};
use crate::hamiltonian::{relay_stage_model, transfer_model, RelayStage, TwoSiteTransfer};
use crate::lattice::Lattice;

/// Default interaction strength, in units of `J`, for stages that are exact only as
/// `U -> infinity`.
pub const DEFAULT_U_OVER_J: f64 = 1e5;

/// Analytic duration of a two-site stage.
pub fn stage_time(kind: TwoSiteTransfer, bosons: usize, j: f64) -> Result<f64> {
    kind.duration(bosons, j)
}

/// A chain protocol: ordered stages, each acting on one nearest-neighbour pair, with the
/// Mott configuration expected after every stage.
#[derive(Debug, Clone)]
pub struct ProtocolSchedule {
    pub name: String,
    pub lattice: Lattice,
    pub bosons: usize,
    pub initial: Vec<Occupation>,
    pub stages: Vec<Stage>,
    /// Pair `(left, left + 1)` acted on by each stage.
    pub pairs: Vec<usize>,
    /// Configuration expected at the end of each stage.
    pub checkpoints: Vec<Vec<Occupation>>,
    pub analytic_time: f64,
}

impl ProtocolSchedule {
    pub fn target(&self) -> &[Occupation] {
        self.checkpoints.last().map_or(&self.initial, Vec::as_slice)
    }

    pub fn basis(&self) -> Result<FockBasis> {
        FockBasis::new(self.lattice.len(), self.bosons)
    }

    pub fn total_duration(&self) -> f64 {
        self.stages.iter().map(|s| s.duration).sum()
    }

    pub fn has_tunneling(&self) -> bool {
        self.stages.iter().any(|s| s.model.has_tunneling())
    }

    pub fn evolution<'a>(&'a self, basis: &'a FockBasis) -> Result<Evolution<'a>> {
        let initial = basis.mott_state(&self.initial)?;
        Evolution::new(basis, &self.lattice, &self.stages, initial.into())
    }

    fn push(&mut self, stage: Stage, left: usize, checkpoint: Vec<Occupation>) {
        self.stages.push(stage);
        self.pairs.push(left);
        self.checkpoints.push(checkpoint);
    }
}

fn moved(config: &[Occupation], left: usize, pair: [Occupation; 2]) -> Vec<Occupation> {
    let mut c = config.to_vec();
    c[left] = pair[0];
    c[left + 1] = pair[1];
    c
}

/// Moves all `N` bosons from site 0 to site `L-1` one bond at a time:
/// `|N,0> -> |N-1,1> -> |1,N-1> -> |0,N>` on every bond, using resonant hopping stages
/// (finite `u`) and a bare-hopping mirror stage. Each bond takes `pi/(2J) + pi/(J sqrt N)`.
pub fn sequential_mott_transfer(sites: usize, bosons: usize, j: f64, u: f64) -> Result<ProtocolSchedule> {
    if sites < 2 {
        return Err(Error::Parameter(format!("need at least two sites, got {sites}")));
    }
    if bosons < 3 {
        return Err(Error::Parameter(format!("need at least three bosons, got {bosons}")));
    }
    check_positive(j, u)?;
    let lattice = Lattice::chain(sites)?;
    let mut initial = vec![0; sites];
    initial[0] = bosons as Occupation;
    let mut s = ProtocolSchedule {
        name: "sequential".into(),
        lattice: lattice.clone(),
        bosons,
        initial: initial.clone(),
        stages: Vec::new(),
        pairs: Vec::new(),
        checkpoints: Vec::new(),
        analytic_time: 0.0,
    };
    let plan = [
        TwoSiteTransfer::HoppingResonant { k: bosons },
        TwoSiteTransfer::HoppingMirror,
        TwoSiteTransfer::HoppingResonant { k: 1 },
    ];
    let mut config = initial;
    for left in 0..sites - 1 {
        for kind in plan {
            let duration = kind.duration(bosons, j)?;
            let model = transfer_model(kind, &lattice, left, bosons, j, Some(u))?;
            let (_, after) = kind.endpoints(bosons)?;
            config = moved(&config, left, after);
            s.push(Stage::new(model, duration).labeled(format!("{kind:?} on ({left},{})", left + 1)), left, config.clone());
        }
    }
    s.analytic_time = s.total_duration();
    Ok(s)
}

/// Analytic total of [`sequential_mott_transfer`]: `(L-1)(pi/(2J) + pi/(J sqrt N))`.
pub fn sequential_time(sites: usize, bosons: usize, j: f64) -> f64 {
    let pi = std::f64::consts::PI;
    (sites - 1) as f64 * (pi / (2.0 * j) + pi / (j * (bosons as f64).sqrt()))
}

/// `L` bosons relayed from site 0 to site `L-1` with tunneling-assisted stages; every bond
/// costs `pi/(2JL) + pi/(JL sqrt L)`, so the total stays below `pi/J` for any `L >= 3`.
pub fn supersonic_transfer(sites: usize, j: f64, u: f64) -> Result<ProtocolSchedule> {
    if sites < 3 {
        return Err(Error::Parameter(format!("the relay needs L >= 3, got {sites}")));
    }
    check_positive(j, u)?;
    let lattice = Lattice::chain(sites)?;
    let l = sites as Occupation;
    let mut initial = vec![0; sites];
    initial[0] = l;
    let mut s = ProtocolSchedule {
        name: "supersonic".into(),
        lattice: lattice.clone(),
        bosons: sites,
        initial: initial.clone(),
        stages: Vec::new(),
        pairs: Vec::new(),
        checkpoints: Vec::new(),
        analytic_time: 0.0,
    };
    let mut config = initial;
    for left in 0..sites - 1 {
        for (stage, after) in [(RelayStage::Load, [l - 1, 1]), (RelayStage::Swap, [1, l - 1]), (RelayStage::Unload, [0, l])] {
            let model = relay_stage_model(stage, &lattice, left, j, u)?;
            config = moved(&config, left, after);
            s.push(
                Stage::new(model, stage.duration(sites, j)).labeled(format!("{stage:?} on ({left},{})", left + 1)),
                left,
                config.clone(),
            );
        }
    }
    s.analytic_time = s.total_duration();
    Ok(s)
}

/// `(pi/(2J)) (L-1) (1/L + 2/L^(3/2))`.
pub fn supersonic_time(sites: usize, j: f64) -> f64 {
    let l = sites as f64;
    std::f64::consts::FRAC_PI_2 / j * (l - 1.0) * (1.0 / l + 2.0 / (l * l.sqrt()))
}

/// Whether the relay total is below `pi/J`, decided in integers:
/// `(L-1)(1/L + 2/L^(3/2)) < 2` is equivalent to `4 (L-1)^2 < L (L+1)^2`.
pub fn supersonic_budget_holds(sites: usize) -> bool {
    let l = sites as u128;
    sites >= 1 && 4 * (l - 1) * (l - 1) < l * (l + 1) * (l + 1)
}

/// Variant moving the `L` bosons across each bond one at a time with tunneling-assisted
/// resonant stages `|k, L-k> -> |k-1, L-k+1>` for `k = L..1`.
pub fn stepwise_relay_transfer(sites: usize, j: f64, u: f64) -> Result<ProtocolSchedule> {
    if sites < 3 {
        return Err(Error::Parameter(format!("the relay needs L >= 3, got {sites}")));
    }
    check_positive(j, u)?;
    let lattice = Lattice::chain(sites)?;
    let mut initial = vec![0; sites];
    initial[0] = sites as Occupation;
    let mut s = ProtocolSchedule {
        name: "stepwise".into(),
        lattice: lattice.clone(),
        bosons: sites,
        initial: initial.clone(),
        stages: Vec::new(),
        pairs: Vec::new(),
        checkpoints: Vec::new(),
        analytic_time: 0.0,
    };
    let mut config = initial;
    for left in 0..sites - 1 {
        for k in (1..=sites).rev() {
            let kind = TwoSiteTransfer::TunnelingResonant { k };
            let model = transfer_model(kind, &lattice, left, sites, j, Some(u))?;
            let (_, after) = kind.endpoints(sites)?;
            config = moved(&config, left, after);
            s.push(
                Stage::new(model, kind.duration(sites, j)?).labeled(format!("{kind:?} on ({left},{})", left + 1)),
                left,
                config.clone(),
            );
        }
    }
    s.analytic_time = s.total_duration();
    Ok(s)
}

/// Analytic total of [`stepwise_relay_transfer`]:
/// `(L-1) sum_k pi / (2 J L sqrt(k (L-k+1)))`, which tends to `pi^2 / (2J)` as `L` grows.
pub fn stepwise_time(sites: usize, j: f64) -> f64 {
    let l = sites as f64;
    let bond: f64 = (1..=sites)
        .map(|k| std::f64::consts::FRAC_PI_2 / (j * l * ((k as f64) * ((sites - k + 1) as f64)).sqrt()))
        .sum();
    (l - 1.0) * bond
}

fn check_positive(j: f64, u: f64) -> Result<()> {
    if !(j > 0.0) || !j.is_finite() {
        return Err(Error::Parameter(format!("J = {j} must be positive")));
    }
    if !(u >= 0.0) || !u.is_finite() {
        return Err(Error::Parameter(format!("U = {u} must be nonnegative")));
    }
    Ok(())
}

/// Outcome of running a schedule from its initial Mott state.
#[derive(Debug, Clone, Serialize)]
pub struct ProtocolRun {
    pub name: String,
    pub analytic_time: f64,
    pub final_fidelity: f64,
    /// Fidelity with the expected configuration at the end of each stage, when the stage
    /// starts from its exact expected input.
    pub stage_fidelities: Vec<f64>,
    /// Fidelity with each checkpoint along the actual evolved trajectory.
    pub cumulative_fidelities: Vec<f64>,
    /// Largest change in a spectator site's mean occupation over any single stage.
    pub spectator_drift: f64,
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
}

impl ProtocolRun {
    pub fn min_stage_fidelity(&self) -> f64 {
        self.stage_fidelities.iter().copied().fold(1.0, f64::min)
    }
}

/// Runs `schedule` and scores every stage against its checkpoint.
pub fn execute_protocol(schedule: &ProtocolSchedule, options: Option<&SampleOptions>) -> Result<ProtocolRun> {
    let basis = schedule.basis()?;
    let ev = schedule.evolution(&basis)?;
    let target = basis.mott_state(schedule.target())?;
    let checkpoint_states: Vec<PureState> =
        schedule.checkpoints.iter().map(|c| basis.mott_state(c)).collect::<Result<_>>()?;
    let boundaries: Vec<&State> = ev.stage_boundaries().collect();
    let cumulative_fidelities: Vec<f64> =
        checkpoint_states.iter().zip(&boundaries[1..]).map(|(c, s)| fidelity(c, s)).collect();

    // Each stage on its own, started from the expected input.
    let mut stage_fidelities = Vec::with_capacity(schedule.stages.len());
    let mut spectator_drift: f64 = 0.0;
    for (idx, stage) in schedule.stages.iter().enumerate() {
        let input = if idx == 0 { &schedule.initial } else { &schedule.checkpoints[idx - 1] };
        let start = basis.mott_state(input)?;
        let single = Evolution::new(&basis, &schedule.lattice, std::slice::from_ref(stage), start.into())?;
        stage_fidelities.push(fidelity(&checkpoint_states[idx], single.final_state()));
        let before = boundaries[idx].occupations(&basis);
        let after = boundaries[idx + 1].occupations(&basis);
        let left = schedule.pairs[idx];
        for site in 0..basis.sites() {
            if site != left && site != left + 1 {
                spectator_drift = spectator_drift.max((after[site] - before[site]).abs());
            }
        }
    }
    let trajectory = match options {
        Some(opts) => {
            let mut opts = opts.clone();
            opts.target.get_or_insert_with(|| target.clone());
            Some(ev.sample(&opts)?)
        }
        None => None,
    };
    Ok(ProtocolRun {
        name: schedule.name.clone(),
        analytic_time: schedule.analytic_time,
        final_fidelity: fidelity(&target, ev.final_state()),
        stage_fidelities,
        cumulative_fidelities,
        spectator_drift,
        trajectory,
    })
}

fn fidelity(target: &PureState, state: &State) -> f64 {
    match state {
        State::Pure(p) => target.fidelity(p),
        other => {
            let amps = target.amplitudes();
            let mut f = num_complex::Complex64::default();
            for a in 0..amps.len() {
                for b in 0..amps.len() {
                    f += amps[a].conj() * other.element(a, b) * amps[b];
                }
            }
            f.re
        }
    }
}

/// Fidelity of one resonant two-site stage at its analytic duration for several `U`.
#[derive(Debug, Clone, Serialize)]
pub struct FiniteUSweep {
    pub kind: String,
    pub bosons: usize,
    /// `(U, fidelity, duration)`.
    pub rows: Vec<(f64, f64, f64)>,
    /// Slope of `log(1 - F)` against `log(1/U)`.
    pub exponent: f64,
    /// Root-mean-square residual of that fit.
    pub residual: f64,
}

/// Runs a resonant stage on an isolated pair for every `U` in `us`.
pub fn finite_u_convergence(kind: TwoSiteTransfer, bosons: usize, j: f64, us: &[f64]) -> Result<FiniteUSweep> {
    if kind.resonance().is_none() {
        return Err(Error::Parameter("only resonant stages depend on U".into()));
    }
    let lattice = Lattice::chain(2)?;
    let basis = FockBasis::new(2, bosons)?;
    let (from, to) = kind.endpoints(bosons)?;
    let duration = kind.duration(bosons, j)?;
    let start = basis.mott_state(&from)?;
    let goal = basis.mott_state(&to)?;
    let mut rows = Vec::with_capacity(us.len());
    for &u in us {
        let model = transfer_model(kind, &lattice, 0, bosons, j, Some(u))?;
        let ev = Evolution::new(&basis, &lattice, &[Stage::new(model, duration)], start.clone().into())?;
        rows.push((u, fidelity(&goal, ev.final_state()), duration));
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(u, _, _)| *u > 0.0)
        .map(|&(u, f, _)| ((1.0 / u).ln(), (1.0 - f).max(1e-300).ln()))
        .collect();
    let (exponent, residual) = linear_fit(&pts);
    Ok(FiniteUSweep { kind: format!("{kind:?}"), bosons, rows, exponent, residual })
}

/// Least-squares slope and RMS residual; NaN with fewer than two points.
fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    (slope, (rss / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn stage_times() {
        assert!((stage_time(TwoSiteTransfer::HoppingMirror, 7, 2.0).unwrap() - PI / 4.0).abs() < 1e-15);
        let t = stage_time(TwoSiteTransfer::TunnelingResonant { k: 5 }, 5, 1.0).unwrap();
        assert!((t - PI / (2.0 * 5.0 * 5f64.sqrt())).abs() < 1e-15);
        let t = stage_time(TwoSiteTransfer::HoppingResonant { k: 4 }, 4, 1.0).unwrap();
        assert!((t - PI / 4.0).abs() < 1e-15);
        assert!(stage_time(TwoSiteTransfer::HoppingMirror, 2, 1.0).is_err());
        assert!(stage_time(TwoSiteTransfer::HoppingResonant { k: 0 }, 4, 1.0).is_err());
    }

    #[test]
    fn sequential_schedule_times() {
        let s = sequential_mott_transfer(5, 4, 1.0, 1e5).unwrap();
        assert_eq!(s.stages.len(), 12);
        assert!((s.analytic_time - sequential_time(5, 4, 1.0)).abs() < 1e-12);
        assert!((sequential_time(5, 4, 1.0) - 4.0 * (PI / 2.0 + PI / 2.0)).abs() < 1e-12);
        assert_eq!(s.target(), &[0, 0, 0, 0, 4]);
        let single = sequential_mott_transfer(2, 3, 1.0, 1e5).unwrap();
        assert_eq!(single.stages.len(), 3);
    }

    #[test]
    fn supersonic_schedule_times() {
        let s = supersonic_transfer(4, 1.0, 1e5).unwrap();
        assert!((s.analytic_time - 3.0 * PI / 4.0).abs() < 1e-12);
        assert!((supersonic_time(4, 1.0) - 3.0 * PI / 4.0).abs() < 1e-12);
        assert!(s.has_tunneling());
        for l in 3..=64 {
            assert!(supersonic_budget_holds(l));
            assert!(supersonic_time(l, 1.0) < PI);
        }
        assert!((supersonic_time(100_000_000, 1.0) - PI / 2.0).abs() < 1e-3);
        assert!(supersonic_transfer(2, 1.0, 1.0).is_err());
    }

    #[test]
    fn stepwise_time_limit() {
        let t = stepwise_time(1_000_000, 1.0);
        assert!((t - PI * PI / 2.0).abs() < 1e-2, "{t}");
        let s = stepwise_relay_transfer(4, 1.0, 1e5).unwrap();
        assert!((s.analytic_time - stepwise_time(4, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn exact_stages_reach_checkpoints() {
        for m in 3..=8 {
            let lat = Lattice::chain(2).unwrap();
            let kind = TwoSiteTransfer::TunnelingMirror;
            let (from, to) = kind.endpoints(m).unwrap();
            let s = ProtocolSchedule {
                name: "mirror".into(),
                lattice: lat.clone(),
                bosons: m,
                initial: from.to_vec(),
                stages: vec![Stage::new(transfer_model(kind, &lat, 0, m, 1.0, None).unwrap(), kind.duration(m, 1.0).unwrap())],
                pairs: vec![0],
                checkpoints: vec![to.to_vec()],
                analytic_time: kind.duration(m, 1.0).unwrap(),
            };
            let run = execute_protocol(&s, None).unwrap();
            assert!(run.final_fidelity >= 1.0 - 1e-10, "M = {m}: {}", run.final_fidelity);
        }
    }

    #[test]
    fn half_stage_is_incomplete() {
        let lat = Lattice::chain(2).unwrap();
        let kind = TwoSiteTransfer::HoppingMirror;
        let (from, to) = kind.endpoints(5).unwrap();
        let half = kind.duration(5, 1.0).unwrap() / 2.0;
        let s = ProtocolSchedule {
            name: "half".into(),
            lattice: lat.clone(),
            bosons: 5,
            initial: from.to_vec(),
            stages: vec![Stage::new(transfer_model(kind, &lat, 0, 5, 1.0, None).unwrap(), half)],
            pairs: vec![0],
            checkpoints: vec![to.to_vec()],
            analytic_time: half,
        };
        assert!(execute_protocol(&s, None).unwrap().final_fidelity < 0.9);
    }

    #[test]
    fn supersonic_run_small() {
        let s = supersonic_transfer(3, 1.0, 1e5).unwrap();
        let run = execute_protocol(&s, None).unwrap();
        assert!(run.final_fidelity >= 0.99, "{}", run.final_fidelity);
        assert!(run.spectator_drift < 1e-12);
    }

    #[test]
    fn finite_u_trend() {
        let sweep = finite_u_convergence(TwoSiteTransfer::HoppingResonant { k: 4 }, 4, 1.0, &[1e3, 1e4, 1e5, 1e6]).unwrap();
        let inf: Vec<f64> = sweep.rows.iter().map(|r| 1.0 - r.1).collect();
        assert!(inf[3] < inf[0]);
        assert!(sweep.rows[3].1 > 0.999);
        assert!(sweep.exponent > 0.0);
        let control = finite_u_convergence(TwoSiteTransfer::HoppingResonant { k: 4 }, 4, 1.0, &[0.0]).unwrap();
        assert!(control.rows[0].1 < 0.9);
        assert!(finite_u_convergence(TwoSiteTransfer::HoppingMirror, 4, 1.0, &[1.0]).is_err());
    }
}
