//! Executes validated plans and writes their reports.

use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};

use speedlimit::bounds::{
    configuration_flow_check, leakage_check, min_time_check, unified_speed_limit_check, velocity_ceiling_check,
    BoundReport, Direction, LeakageSetup,
};
use speedlimit::evolve::{Evolution, SampleOptions};
use speedlimit::fock::State;
use speedlimit::lattice::Region;
use speedlimit::protocols::execute_protocol;
use speedlimit::transport::{wasserstein_dual, wasserstein_primal};

use crate::config::{CheckKind, ExperimentConfig, ExperimentKind, OtPlan, Plan, ProtocolPlan, SimulatePlan, SweepPlan};
use crate::error::{HarnessError, Result};
use crate::random::{instance_rng, random_protocol_with, random_state_on};
use crate::report::{ensure_dir, write_json, write_trajectory_csv, RunReport};
use crate::suite;

/// Everything a run computed, before it is written out.
struct Outcome {
    checks: Vec<BoundReport>,
    results: Value,
    trajectory: Option<speedlimit::evolve::Trajectory>,
}

/// Plans, runs and writes `{kind}.json` (and `{kind}.csv` when a trajectory exists) into
/// `out_dir`.
pub fn run(kind: ExperimentKind, config: &ExperimentConfig, seed: u64, out_dir: &Path) -> Result<RunReport> {
    let plan = config.plan(kind, seed)?;
    let outcome = match plan {
        Plan::Simulate(p) => simulate(&p)?,
        Plan::BoundCheck(p) => bound_check(&p, seed)?,
        Plan::Ot(p) => ot(&p, seed)?,
        Plan::Protocol(p) => protocol(&p)?,
        Plan::Oracle(spec) => {
            let spectral = suite::spectral(spec.max_m, spec.corner_max_m, spec.identity_max_m)?;
            let finite = suite::finite_u(&spec.finite_u_bosons, &spec.finite_u, 0.999)?;
            let results = json!({ "spectral": spectral.details, "finite_u": finite.details, "notes": spectral.notes });
            let mut checks = spectral.checks;
            checks.extend(finite.checks);
            Outcome { checks, results, trajectory: None }
        }
    };
    let mut report = RunReport::new(kind.name(), seed, config.clone(), outcome.checks, outcome.results);
    ensure_dir(out_dir)?;
    if let Some(t) = &outcome.trajectory {
        let name = format!("{}.csv", kind.name());
        write_trajectory_csv(&out_dir.join(&name), t)?;
        report.artifacts.push(name);
    }
    let name = format!("{}.json", kind.name());
    report.artifacts.push(name.clone());
    write_json(&out_dir.join(name), &report)?;
    Ok(report)
}

fn numerical(stage: impl Into<String>) -> impl FnOnce(speedlimit::Error) -> HarnessError {
    HarnessError::numerical(stage)
}

fn simulate(p: &SimulatePlan) -> Result<Outcome> {
    let ev = Evolution::new(&p.basis, &p.lattice, &p.stages, p.initial.clone().into()).map_err(numerical("evolution"))?;
    let cost = p.lattice.cost_matrix(p.sampling.cost_exponent).map_err(numerical("cost matrix"))?;
    let options = SampleOptions {
        samples_per_stage: p.sampling.samples_per_stage,
        cost: Some(cost.clone()),
        target: p.target.clone(),
        ..SampleOptions::default()
    };
    let trajectory = ev.sample(&options).map_err(numerical("sampling"))?;
    let q = p.sampling.quadrature_samples;
    let mut checks = vec![unified_speed_limit_check(&ev, &cost, q).map_err(numerical("unified check"))?];
    if let (Some((x, y)), Some(params)) = (&p.regions, &p.params) {
        checks.push(min_time_check(&ev, x, y, params, q).map_err(numerical("minimum-time check"))?);
        if let Some((n0, delta_n0)) = p.leakage {
            let setup = LeakageSetup { x: x.clone(), y: y.clone(), n0, delta_n0 };
            checks.push(
                leakage_check(&ev, &setup, params, p.sampling.samples_per_stage).map_err(numerical("leakage check"))?,
            );
        }
        checks.push(configuration_flow_check(&ev, params.alpha_eps(), q).map_err(numerical("configuration check"))?);
    }
    let last = trajectory.last();
    let results = json!({
        "dimension": p.basis.dim(),
        "stages": p.stages.len(),
        "duration": ev.duration(),
        "initial_concentrations": trajectory.first().concentrations,
        "final_concentrations": last.concentrations,
        "final_fidelity": last.fidelity,
    });
    Ok(Outcome { checks, results, trajectory: Some(trajectory) })
}

fn sweep_one(p: &SweepPlan, seed: u64, index: usize) -> Result<Vec<BoundReport>> {
    let ctx = format!("sweep seed {index}");
    let mut rng = instance_rng(seed, index as u64);
    let horizon = p.horizon * (0.05 + 0.95 * rand::Rng::random::<f64>(&mut rng));
    let schedule =
        random_protocol_with(&mut rng, seed, &p.lattice, p.bosons, p.alpha, p.stage_count, horizon, p.limits)
            .map_err(numerical(&ctx))?;
    let basis = schedule.basis().map_err(numerical(&ctx))?;
    let (x, y) = &p.regions;
    // Every state drawn here satisfies the leakage hypothesis, so one state serves all checks.
    let outside = x.complement(p.lattice.len());
    let initial =
        random_state_on(&mut rng, &basis, |i| basis.region_number(i, &outside) <= p.n0).map_err(numerical(&ctx))?;
    let ev = Evolution::new(&basis, &p.lattice, &schedule.stages, initial.into()).map_err(numerical(&ctx))?;
    let q = p.sampling.quadrature_samples;
    let mut out = Vec::new();
    for check in &p.checks {
        match check {
            CheckKind::Unified => {
                let cost = p.lattice.cost_matrix(p.sampling.cost_exponent).map_err(numerical(&ctx))?;
                out.push(unified_speed_limit_check(&ev, &cost, q).map_err(numerical(&ctx))?);
            }
            CheckKind::MinTime => out.push(min_time_check(&ev, x, y, &p.params, q).map_err(numerical(&ctx))?),
            CheckKind::Leakage => {
                let setup = LeakageSetup { x: x.clone(), y: y.clone(), n0: p.n0, delta_n0: p.delta_n0 };
                out.push(
                    leakage_check(&ev, &setup, &p.params, p.sampling.samples_per_stage).map_err(numerical(&ctx))?,
                );
            }
            CheckKind::VelocityCeiling => {
                for (k, stage) in ev.stages().iter().enumerate() {
                    let r = velocity_ceiling_check(stage.initial_state(), &stage.model, &p.lattice, &basis, &p.params)
                        .map_err(numerical(&ctx))?;
                    out.push(r.with_param("stage", k as f64));
                }
            }
            CheckKind::Configuration => {
                out.push(configuration_flow_check(&ev, p.params.alpha_eps(), q).map_err(numerical(&ctx))?);
            }
        }
    }
    Ok(out.into_iter().map(|r| r.with_param("seed", index as f64).with_param("horizon", horizon)).collect())
}

fn bound_check(p: &SweepPlan, seed: u64) -> Result<Outcome> {
    let per_seed: Vec<Result<Vec<BoundReport>>> = (0..p.seeds).into_par_iter().map(|i| sweep_one(p, seed, i)).collect();
    let mut checks = Vec::new();
    for r in per_seed {
        checks.extend(r?);
    }
    let results = json!({
        "seeds": p.seeds,
        "dimension": speedlimit::fock::sector_dimension(p.lattice.len(), p.bosons) as f64,
        "alpha": p.alpha,
        "gamma": p.params.gamma,
        "alpha_eps": p.params.alpha_eps(),
    });
    Ok(Outcome { checks, results, trajectory: None })
}

fn ot(p: &OtPlan, seed: u64) -> Result<Outcome> {
    match p {
        OtPlan::Explicit { lattice, x, y, exponent } => {
            let c = lattice.cost_matrix(*exponent).map_err(numerical("cost matrix"))?;
            let (primal, plan) = wasserstein_primal(x, y, &c).map_err(numerical("primal"))?;
            let (dual, phi) = wasserstein_dual(x, y, &c).map_err(numerical("dual"))?;
            let checks = vec![
                BoundReport::new("kr_duality_gap", Direction::AtMost, 1e-9 * primal.max(1.0), (primal - dual).abs(), 0.0),
                BoundReport::new("dual_lipschitz", Direction::AtMost, 1e-9, phi.max_violation(&c), 0.0),
            ];
            let results = json!({
                "primal": primal,
                "dual": dual,
                "plan": plan.entries(),
                "potential": phi.values(),
            });
            Ok(Outcome { checks, results, trajectory: None })
        }
        OtPlan::Random { instances, min_points, max_points } => {
            let out = suite::kr_duality(seed, *instances, *min_points, *max_points)?;
            Ok(Outcome { results: json!(out.details), checks: out.checks, trajectory: None })
        }
    }
}

fn protocol(p: &ProtocolPlan) -> Result<Outcome> {
    let s = &p.schedule;
    let cost = s.lattice.cost_matrix(p.sampling.cost_exponent).map_err(numerical("cost matrix"))?;
    let options = SampleOptions {
        samples_per_stage: p.sampling.samples_per_stage,
        cost: Some(cost.clone()),
        ..SampleOptions::default()
    };
    let run = execute_protocol(s, Some(&options)).map_err(numerical(&s.name))?;
    let mut checks = vec![
        BoundReport::new("final_fidelity", Direction::AtLeast, p.min_fidelity, run.final_fidelity, 0.0),
        BoundReport::new("min_stage_fidelity", Direction::AtLeast, p.min_fidelity, run.min_stage_fidelity(), 0.0),
    ];
    let basis = s.basis().map_err(numerical(&s.name))?;
    let ev = s.evolution(&basis).map_err(numerical(&s.name))?;
    let x = Region::new([0]);
    let y = Region::new([s.lattice.len() - 1]);
    let q = p.sampling.quadrature_samples;
    let min_time = min_time_check(&ev, &x, &y, &p.params, q).map_err(numerical("minimum-time check"))?;
    let ratio = ev.duration() / min_time.bound;
    checks.push(min_time);
    if p.unified {
        checks.push(unified_speed_limit_check(&ev, &cost, q).map_err(numerical("unified check"))?);
    }
    let final_state = match ev.final_state() {
        State::Pure(_) => "pure",
        _ => "mixed",
    };
    let results = json!({
        "run": run,
        "duration": ev.duration(),
        "tau_over_bound": ratio,
        "has_tunneling": s.has_tunneling(),
        "state": final_state,
    });
    Ok(Outcome { checks, results, trajectory: run.trajectory })
}
