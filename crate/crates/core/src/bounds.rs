//! Closed-form speed-limit constants and their checks against simulated dynamics.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::{config_currents, site_flows, velocity_term, Evolution};
use crate::fock::{Count, State};
use crate::lattice::{CostMatrix, Lattice, Region};
use crate::transport::{self, wasserstein, wasserstein_configs};

/// Initial states must satisfy the occupation hypothesis up to this deviation.
pub const HYPOTHESIS_TOL: f64 = 1e-12;
/// Slack allowed on the probability bound at every sample.
pub const PROBABILITY_SLACK: f64 = 1e-9;
/// Relative floating-point allowance on pointwise checks.
const POINTWISE_TOL: f64 = 1e-12;

const EM_TERMS: usize = 32;
/// `B_2k / (2k)!` for `k = 1..8`.
const BERNOULLI_OVER_FACTORIAL: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
    -3617.0 / 10670622842880000.0,
];

/// Riemann zeta for real `s > 1` by Euler-Maclaurin summation.
pub fn riemann_zeta(s: f64) -> Result<f64> {
    if !(s > 1.0) || !s.is_finite() {
        return Err(Error::Parameter(format!("zeta diverges for s = {s}")));
    }
    let n = EM_TERMS.max(s.ceil() as usize);
    let nf = n as f64;
    let mut sum: f64 = (1..n).rev().map(|k| (k as f64).powf(-s)).sum();
    sum += nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s);
    // Rising factorial s (s+1) ... (s+2k-2) times n^{-s-2k+1}.
    let mut rising = s;
    let mut power = nf.powf(-s - 1.0);
    for (k, coeff) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        if k > 0 {
            let a = s + (2 * k - 1) as f64;
            rising *= a * (a + 1.0);
            power /= nf * nf;
        }
        sum += coeff * rising * power;
    }
    Ok(sum)
}

/// Parameters of the long-range model class and the transfer being bounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundParams {
    pub j: f64,
    pub alpha: f64,
    pub dim: usize,
    pub epsilon: f64,
    pub gamma: f64,
    /// Fraction of all bosons that must be moved.
    pub mu: f64,
}

impl BoundParams {
    /// Uses `epsilon = alpha - D - 1` when `alpha > D + 1`, otherwise `(alpha - D) / 2`.
    pub fn new(j: f64, alpha: f64, dim: usize, gamma: f64, mu: f64) -> Result<Self> {
        let excess = alpha - dim as f64;
        let epsilon = if excess > 1.0 { excess - 1.0 } else { excess / 2.0 };
        Self { j, alpha, dim, epsilon, gamma, mu }.validated()
    }

    /// Parameters with `gamma` taken from the lattice.
    pub fn for_lattice(lattice: &Lattice, j: f64, alpha: f64, mu: f64) -> Result<Self> {
        Self::new(j, alpha, lattice.dim(), lattice.shell_constant().value, mu)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        self.epsilon = epsilon;
        self.validated()
    }

    pub fn with_mu(mut self, mu: f64) -> Result<Self> {
        self.mu = mu;
        self.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let excess = self.alpha - self.dim as f64;
        if !(self.j > 0.0) || !self.j.is_finite() {
            return Err(Error::Parameter(format!("J = {} must be positive", self.j)));
        }
        if self.dim == 0 || !(excess > 0.0) {
            return Err(Error::Parameter(format!("need alpha > D, got alpha = {}, D = {}", self.alpha, self.dim)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < excess) {
            return Err(Error::Parameter(format!("epsilon = {} outside (0, {excess})", self.epsilon)));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::Parameter(format!("gamma = {} must be positive", self.gamma)));
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(Error::Parameter(format!("mu = {} outside (0, 1]", self.mu)));
        }
        Ok(self)
    }

    /// `min(1, alpha - D - epsilon)`.
    pub fn alpha_eps(&self) -> f64 {
        (self.alpha - self.dim as f64 - self.epsilon).min(1.0)
    }

    /// `alpha - alpha_eps - D + 1`, always above one.
    pub fn zeta_argument(&self) -> f64 {
        self.alpha - self.alpha_eps() - self.dim as f64 + 1.0
    }

    fn echo(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("J".to_string(), self.j),
            ("alpha".to_string(), self.alpha),
            ("D".to_string(), self.dim as f64),
            ("epsilon".to_string(), self.epsilon),
            ("gamma".to_string(), self.gamma),
            ("mu".to_string(), self.mu),
            ("alpha_eps".to_string(), self.alpha_eps()),
        ])
    }
}

/// `J gamma zeta(alpha - alpha_eps - D + 1)`: the ceiling on the velocity term.
pub fn velocity_upper_bound(p: &BoundParams) -> Result<f64> {
    Ok(p.j * p.gamma * riemann_zeta(p.zeta_argument())?)
}

pub fn kappa2(p: &BoundParams) -> Result<f64> {
    velocity_upper_bound(p)
}

pub fn kappa1(p: &BoundParams) -> Result<f64> {
    Ok(p.mu / kappa2(p)?)
}

/// `kappa1 * d^alpha_eps`: the minimum time to move a fraction `mu` across `d`.
pub fn min_time_bound(p: &BoundParams, d: f64) -> Result<f64> {
    if !(d >= 1.0) {
        return Err(Error::Parameter(format!("distance {d} below one lattice spacing")));
    }
    Ok(kappa1(p)? * d.powf(p.alpha_eps()))
}

/// `kappa2 N tau / (dN0 d^alpha_eps)`, unclamped; values above one are vacuous.
pub fn probability_bound(p: &BoundParams, total: usize, delta_n0: usize, tau: f64, d: f64) -> Result<f64> {
    if delta_n0 == 0 {
        return Err(Error::Parameter("the excess boson count must be at least one".into()));
    }
    if !(tau >= 0.0) {
        return Err(Error::Parameter(format!("tau = {tau} is negative")));
    }
    if !(d >= 1.0) {
        return Err(Error::Parameter(format!("distance {d} below one lattice spacing")));
    }
    Ok(kappa2(p)? * total as f64 * tau / (delta_n0 as f64 * d.powf(p.alpha_eps())))
}

/// `mu' (mu - mu') / (mu (1 - x - mu'))` where `x` is the initial concentration outside `X`.
pub fn markov_prefactor(mu: f64, mu_prime: f64, x_outside: f64) -> Result<f64> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::Parameter(format!("mu = {mu} outside (0, 1]")));
    }
    if !(mu_prime > 0.0 && mu_prime < mu) {
        return Err(Error::Parameter(format!("mu' = {mu_prime} outside (0, {mu})")));
    }
    if !(x_outside >= 0.0) || x_outside + mu > 1.0 + 1e-15 {
        return Err(Error::Parameter(format!("x = {x_outside} leaves no room for mu = {mu}")));
    }
    Ok(mu_prime * (mu - mu_prime) / (mu * (1.0 - x_outside - mu_prime)))
}

/// The maximiser `1 - x - sqrt((1 - x)(1 - x - mu))` of [`markov_prefactor`].
///
/// When `x + mu = 1` this equals `mu` and the supremum (one) is approached, not attained.
pub fn optimal_mu_prime(mu: f64, x_outside: f64) -> f64 {
    let r = 1.0 - x_outside;
    r - (r * (r - mu)).max(0.0).sqrt()
}

/// Time bound from the probability bound via Markov's inequality:
/// `prefactor * kappa1 * d^alpha_eps`.
pub fn markov_corollary(mu: f64, mu_prime: f64, x_outside: f64, kappa1: f64, d: f64, alpha_eps: f64) -> Result<f64> {
    Ok(markov_prefactor(mu, mu_prime, x_outside)? * kappa1 * d.powf(alpha_eps))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The trajectory lies outside the hypotheses; nothing is asserted.
    OutOfScope,
}

/// Which side of the bound the measured value must lie on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// measured >= bound
    AtLeast,
    /// measured <= bound
    AtMost,
}

/// One bound compared against one measurement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub name: String,
    pub direction: Direction,
    pub bound: f64,
    pub measured: f64,
    /// Signed distance to the bound, positive when satisfied.
    pub margin: f64,
    /// Numerical budget; the check fails only when `margin < -uncertainty`.
    pub uncertainty: f64,
    pub status: CheckStatus,
    pub params: BTreeMap<String, f64>,
    pub note: Option<String>,
}

impl BoundReport {
    pub fn new(name: &str, direction: Direction, bound: f64, measured: f64, uncertainty: f64) -> Self {
        let margin = match direction {
            Direction::AtLeast => measured - bound,
            Direction::AtMost => bound - measured,
        };
        let status = if margin >= -uncertainty { CheckStatus::Pass } else { CheckStatus::Fail };
        Self {
            name: name.to_string(),
            direction,
            bound,
            measured,
            margin,
            uncertainty,
            status,
            params: BTreeMap::new(),
            note: None,
        }
    }

    pub fn out_of_scope(name: &str, direction: Direction, note: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            direction,
            bound: f64::NAN,
            measured: f64::NAN,
            margin: f64::NAN,
            uncertainty: 0.0,
            status: CheckStatus::OutOfScope,
            params: BTreeMap::new(),
            note: Some(note.into()),
        }
    }

    pub fn with_params(mut self, params: BTreeMap<String, f64>) -> Self {
        self.params.extend(params);
        self
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }

    pub fn failed(&self) -> bool {
        self.status == CheckStatus::Fail
    }
}

fn has_tunneling(ev: &Evolution) -> bool {
    ev.stages().iter().any(|s| s.model.has_tunneling())
}

/// `integral_0^tau Phi_t dt` with its quadrature uncertainty.
pub fn velocity_integral(ev: &Evolution, cost: &CostMatrix, samples: usize) -> Result<(f64, f64)> {
    let basis = ev.basis();
    let q = ev.time_integral(samples, |state, stage| velocity_term(&site_flows(state, &stage.model, basis), cost))?;
    Ok((q.value, q.uncertainty))
}

/// `tau >= W(x_0, x_tau) / <Phi>_tau`, checked as `integral Phi dt >= W`.
///
/// Holds for every number-conserving Hamiltonian, tunneling included, because the flows
/// carry the full continuity equation.
pub fn unified_speed_limit_check(ev: &Evolution, cost: &CostMatrix, samples: usize) -> Result<BoundReport> {
    let basis = ev.basis();
    let x0 = ev.initial_state().concentrations(basis)?;
    let xt = ev.final_state().concentrations(basis)?;
    let w = wasserstein(&x0, &xt, cost)?;
    let tau = ev.duration();
    let (integral, quad_unc) = velocity_integral(ev, cost, samples)?;
    let w_unc = POINTWISE_TOL * w.max(1.0);
    let mean_phi = if tau > 0.0 { integral / tau } else { 0.0 };
    let (bound, uncertainty) = if integral > 0.0 {
        let b = w / mean_phi;
        (b, b * (quad_unc / integral) + w_unc / mean_phi)
    } else if w <= w_unc {
        (0.0, 0.0)
    } else {
        (f64::INFINITY, 0.0)
    };
    let mut report = BoundReport::new("unified_speed_limit", Direction::AtLeast, bound, tau, uncertainty)
        .with_param("wasserstein", w)
        .with_param("mean_velocity", mean_phi)
        .with_param("velocity_integral", integral)
        .with_param("quadrature_uncertainty", quad_unc);
    if bound.is_infinite() {
        report = report.with_note("zero velocity with nonzero transport: inconsistent trajectory");
    }
    Ok(report)
}

/// Why a trajectory falls outside the long-range model class, if it does.
fn model_class_violation(ev: &Evolution, p: &BoundParams) -> Option<String> {
    if has_tunneling(ev) {
        return Some("Hamiltonian contains interaction-induced tunneling".into());
    }
    let lat = ev.lattice();
    for (k, stage) in ev.stages().iter().enumerate() {
        for a in 0..lat.len() {
            for b in a + 1..lat.len() {
                let limit = p.j * lat.distance(a, b).powf(-p.alpha);
                if stage.model.hopping.get(a, b).abs() > limit * (1.0 + POINTWISE_TOL) {
                    return Some(format!("stage {k}: |J_{a}{b}| exceeds J / r^alpha"));
                }
            }
        }
    }
    None
}

/// Minimum-time check for moving a fraction `p.mu` from `x` to `y`.
///
/// Reports the constituent chain `W >= mu d^alpha_eps` and `integral Phi >= W` in the
/// params, evaluated with costs `r^alpha_eps`.
pub fn min_time_check(ev: &Evolution, x: &Region, y: &Region, p: &BoundParams, samples: usize) -> Result<BoundReport> {
    const NAME: &str = "min_transfer_time";
    if let Some(reason) = model_class_violation(ev, p) {
        return Ok(BoundReport::out_of_scope(NAME, Direction::AtLeast, reason).with_params(p.echo()));
    }
    let lat = ev.lattice();
    let basis = ev.basis();
    let d = lat.set_distance(x, y)?;
    let x0 = ev.initial_state().concentrations(basis)?;
    let xt = ev.final_state().concentrations(basis)?;
    let measured_mu = transport::measured_fraction(&x0, &xt, x, y);
    if measured_mu < p.mu - POINTWISE_TOL {
        return Ok(BoundReport::out_of_scope(
            NAME,
            Direction::AtLeast,
            format!("only {measured_mu} of the bosons reached Y, below mu = {}", p.mu),
        )
        .with_params(p.echo()));
    }
    let bound = min_time_bound(p, d)?;
    let cost = lat.cost_matrix(p.alpha_eps())?;
    let w = wasserstein(&x0, &xt, &cost)?;
    let (integral, quad_unc) = velocity_integral(ev, &cost, samples)?;
    Ok(BoundReport::new(NAME, Direction::AtLeast, bound, ev.duration(), POINTWISE_TOL * bound)
        .with_params(p.echo())
        .with_param("d_xy", d)
        .with_param("measured_mu", measured_mu)
        .with_param("kappa1", kappa1(p)?)
        .with_param("wasserstein", w)
        .with_param("region_lower_bound", p.mu * d.powf(p.alpha_eps()))
        .with_param("velocity_integral", integral)
        .with_param("quadrature_uncertainty", quad_unc)
        .with_param("velocity_ceiling", velocity_upper_bound(p)?))
}

/// Region data for the probability bound: at most `n0` bosons start outside `X`, and the
/// check watches for at least `n0 + delta_n0` inside `Y`.
#[derive(Debug, Clone)]
pub struct LeakageSetup {
    pub x: Region,
    pub y: Region,
    pub n0: usize,
    pub delta_n0: usize,
}

/// `P(n_Y >= N0 + dN0) <= kappa2 N t / (dN0 d^alpha_eps)` at every sample time.
///
/// The reported values belong to the sample with the smallest margin.
pub fn leakage_check(ev: &Evolution, setup: &LeakageSetup, p: &BoundParams, samples_per_stage: usize) -> Result<BoundReport> {
    const NAME: &str = "leakage_probability";
    if let Some(reason) = model_class_violation(ev, p) {
        return Ok(BoundReport::out_of_scope(NAME, Direction::AtMost, reason).with_params(p.echo()));
    }
    let basis = ev.basis();
    let lat = ev.lattice();
    let outside = setup.x.complement(lat.len());
    let initial_weight = ev.initial_state().projector_weight(basis, &outside, Count::AtMost(setup.n0));
    if (1.0 - initial_weight).abs() > HYPOTHESIS_TOL {
        return Ok(BoundReport::out_of_scope(
            NAME,
            Direction::AtMost,
            format!("initial weight with at most {} bosons outside X is {initial_weight}", setup.n0),
        )
        .with_params(p.echo()));
    }
    let d = lat.set_distance(&setup.x, &setup.y)?;
    let threshold = Count::AtLeast(setup.n0 + setup.delta_n0);
    let mut worst: Option<BoundReport> = None;
    let mut consider = |t: f64, state: &State| -> Result<()> {
        let measured = state.projector_weight(basis, &setup.y, threshold);
        let bound = probability_bound(p, basis.total(), setup.delta_n0, t, d)?;
        let r = BoundReport::new(NAME, Direction::AtMost, bound, measured, PROBABILITY_SLACK).with_param("time", t);
        if worst.as_ref().is_none_or(|w| r.margin < w.margin) {
            worst = Some(r);
        }
        Ok(())
    };
    let per_stage = samples_per_stage.max(1);
    for stage in ev.stages() {
        for k in 0..per_stage {
            let off = stage.duration * k as f64 / per_stage as f64;
            consider(stage.start + off, &stage.state_at(off)?)?;
        }
    }
    consider(ev.duration(), ev.final_state())?;
    let report = worst.expect("at least one sample");
    Ok(report
        .with_params(p.echo())
        .with_param("d_xy", d)
        .with_param("kappa2", kappa2(p)?)
        .with_param("n0", setup.n0 as f64)
        .with_param("delta_n0", setup.delta_n0 as f64))
}

/// `Phi <= J gamma zeta(...)` for a single state under a single model.
pub fn velocity_ceiling_check(
    state: &State,
    model: &crate::hamiltonian::HamiltonianModel,
    lattice: &Lattice,
    basis: &crate::fock::FockBasis,
    p: &BoundParams,
) -> Result<BoundReport> {
    const NAME: &str = "velocity_ceiling";
    if model.has_tunneling() {
        return Ok(BoundReport::out_of_scope(NAME, Direction::AtMost, "tunneling present"));
    }
    let cost = lattice.cost_matrix(p.alpha_eps())?;
    let phi = velocity_term(&site_flows(state, model, basis), &cost);
    let ceiling = velocity_upper_bound(p)?;
    Ok(BoundReport::new(NAME, Direction::AtMost, ceiling, phi, POINTWISE_TOL * ceiling).with_params(p.echo()))
}

/// Worst `|phi_NN'| - |J_ij| (n_i p_N + n_j' p_N')` over neighbouring configuration pairs;
/// nonpositive when every current respects its ceiling.
pub fn current_ceiling_excess(
    state: &State,
    model: &crate::hamiltonian::HamiltonianModel,
    basis: &crate::fock::FockBasis,
) -> Result<f64> {
    let probs = state.probabilities();
    let mut worst = f64::NEG_INFINITY;
    for cur in config_currents(state, model, basis)? {
        let ni = basis.config(cur.a)[cur.site_a] as f64;
        let nj = basis.config(cur.b)[cur.site_b] as f64;
        let ceiling = model.hopping.get(cur.site_a, cur.site_b).abs() * (ni * probs[cur.a] + nj * probs[cur.b]);
        worst = worst.max(cur.value.abs() - ceiling);
    }
    Ok(worst)
}

/// `W(p_0, p_tau) <= integral sum_{pairs} c_NN' |phi_NN'| dt` on configuration space, with
/// neighbouring-pair costs `r^alpha_eps`.
pub fn configuration_flow_check(ev: &Evolution, alpha_eps: f64, samples: usize) -> Result<BoundReport> {
    const NAME: &str = "configuration_transport";
    if has_tunneling(ev) {
        return Ok(BoundReport::out_of_scope(NAME, Direction::AtLeast, "tunneling present"));
    }
    let basis = ev.basis();
    let lat = ev.lattice();
    let cost = lat.cost_matrix(alpha_eps)?;
    let p0 = ev.initial_state().probabilities();
    let pt = ev.final_state().probabilities();
    let w = wasserstein_configs(&p0, &pt, basis, lat, alpha_eps)?.value;
    let failure = std::cell::RefCell::new(None);
    let q = ev.time_integral(samples, |state, stage| match config_currents(state, &stage.model, basis) {
        Ok(cs) => cs.iter().map(|c| cost.get(c.site_a, c.site_b) * c.value.abs()).sum(),
        Err(e) => {
            *failure.borrow_mut() = Some(e);
            0.0
        }
    });
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let q = q?;
    Ok(
        BoundReport::new(NAME, Direction::AtLeast, w, q.value, q.uncertainty + POINTWISE_TOL * w.max(1.0))
            .with_param("alpha_eps", alpha_eps),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Partial sum plus the midpoint-rule tail `integral_{K+1/2}^inf x^{-s} dx`.
    fn zeta_oracle(s: f64) -> f64 {
        let k = 20_000usize;
        let head: f64 = (1..=k).rev().map(|n| (n as f64).powf(-s)).sum();
        head + (k as f64 + 0.5).powf(1.0 - s) / (s - 1.0)
    }

    #[test]
    fn zeta_classical_values() {
        assert!((riemann_zeta(2.0).unwrap() - PI * PI / 6.0).abs() < 1e-14);
        assert!((riemann_zeta(4.0).unwrap() - PI.powi(4) / 90.0).abs() < 1e-14);
        assert!(riemann_zeta(1.0).is_err());
        assert!(riemann_zeta(0.5).is_err());
    }

    #[test]
    fn zeta_agrees_with_direct_summation() {
        for s in [1.05, 1.1, 1.5, 2.0, 3.0, 4.0, 6.0] {
            let a = riemann_zeta(s).unwrap();
            let b = zeta_oracle(s);
            assert!(((a - b) / a).abs() < 1e-10, "s = {s}: {a} vs {b}");
        }
        assert!((riemann_zeta(60.0).unwrap() - 1.0).abs() < 1e-17);
    }

    #[test]
    fn kappa_values() {
        let p = BoundParams::new(1.0, 3.0, 1, 2.0, 1.0).unwrap();
        assert_eq!(p.epsilon, 1.0);
        assert_eq!(p.alpha_eps(), 1.0);
        assert!((kappa1(&p).unwrap() - 3.0 / (PI * PI)).abs() < 1e-14);
        assert!((kappa2(&p).unwrap() - PI * PI / 3.0).abs() < 1e-13);
        assert!((kappa1(&p).unwrap() * kappa2(&p).unwrap() - p.mu).abs() < 1e-15);
        let doubled = BoundParams { j: 2.0, ..p };
        assert!((kappa1(&doubled).unwrap() * 2.0 - kappa1(&p).unwrap()).abs() < 1e-15);
        let small = p.with_mu(1e-9).unwrap();
        assert!(kappa1(&small).unwrap() < 1e-9);
    }

    #[test]
    fn kappa2_grows_as_zeta_argument_approaches_one() {
        // For D < alpha <= D + 1 the argument is 1 + epsilon.
        let base = BoundParams::new(1.0, 1.8, 1, 2.0, 1.0).unwrap();
        let mut prev = 0.0;
        for eps in [0.79, 0.5, 0.2, 0.05, 0.01] {
            let k = kappa2(&base.with_epsilon(eps).unwrap()).unwrap();
            assert!(k > prev);
            prev = k;
        }
    }

    #[test]
    fn min_time_intermediate_regime() {
        let p = BoundParams::new(1.0, 1.5, 1, 2.0, 0.5).unwrap().with_epsilon(0.25).unwrap();
        assert!((p.alpha_eps() - 0.25).abs() < 1e-15);
        let d = 16.0;
        let expected = 0.5 / (2.0 * riemann_zeta(1.25).unwrap()) * 2.0;
        assert!((min_time_bound(&p, d).unwrap() - expected).abs() < 1e-14);
        assert!((min_time_bound(&p, 1.0).unwrap() - kappa1(&p).unwrap()).abs() < 1e-15);
        assert!(min_time_bound(&p, 0.5).is_err());
    }

    #[test]
    fn parameter_validation() {
        assert!(BoundParams::new(1.0, 1.0, 1, 2.0, 1.0).is_err());
        assert!(BoundParams::new(0.0, 3.0, 1, 2.0, 1.0).is_err());
        assert!(BoundParams::new(1.0, 3.0, 1, 2.0, 0.0).is_err());
        let p = BoundParams::new(1.0, 3.0, 1, 2.0, 1.0).unwrap();
        assert!(p.with_epsilon(2.0).is_err());
        assert!(p.with_epsilon(0.0).is_err());
        let q = BoundParams::new(1.0, 1.6, 1, 2.0, 1.0).unwrap();
        assert!((q.epsilon - 0.3).abs() < 1e-15);
    }

    #[test]
    fn probability_bound_forms() {
        let p = BoundParams::new(1.0, 3.0, 1, 2.0, 1.0).unwrap();
        assert_eq!(probability_bound(&p, 4, 2, 0.0, 3.0).unwrap(), 0.0);
        // Macroscopic form: kappa2 / mu * tau * d^-alpha_eps with mu = dN0 / N.
        let (n, dn, tau, d) = (8usize, 2usize, 0.3, 5.0);
        let mu = dn as f64 / n as f64;
        let macro_form = kappa2(&p).unwrap() / mu * tau / d;
        assert!((probability_bound(&p, n, dn, tau, d).unwrap() - macro_form).abs() < 1e-14);
        assert!(probability_bound(&p, n, 0, tau, d).is_err());
    }

    #[test]
    fn velocity_ceiling_large_alpha() {
        let p = BoundParams::new(1.0, 80.0, 1, 2.0, 1.0).unwrap();
        assert!((velocity_upper_bound(&p).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn markov_prefactor_properties() {
        assert!(markov_prefactor(0.5, 0.6, 0.1).is_err());
        assert!(markov_prefactor(0.5, 0.2, 0.6).is_err());
        for (mu, x) in [(0.5, 0.1), (0.9, 0.0), (0.3, 0.6)] {
            let best = optimal_mu_prime(mu, x);
            let top = markov_prefactor(mu, best, x).unwrap();
            assert!(top <= 1.0);
            assert!(markov_prefactor(mu, 1e-9, x).unwrap() < 1e-8);
            assert!(markov_prefactor(mu, mu * (1.0 - 1e-9), x).unwrap() < 1e-8);
            for k in 1..100 {
                let mp = mu * k as f64 / 100.0;
                assert!(markov_prefactor(mu, mp, x).unwrap() <= top + 1e-15);
            }
        }
    }

    #[test]
    fn report_margins() {
        let r = BoundReport::new("t", Direction::AtLeast, 1.0, 0.9999999, 1e-6);
        assert!(r.passed());
        let r = BoundReport::new("t", Direction::AtMost, 1.0, 1.1, 1e-6);
        assert!(r.failed());
        assert!((r.margin + 0.1).abs() < 1e-15);
    }
}
