//! Studies tying the discrete solvers and the continuous closed loop together.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispatch::{
    analytic_dispatch, dual_ascent_initial, dual_ascent_solve, dual_ascent_step,
    dual_contraction_factor, mom_contraction_factor, mom_initial, mom_solve, mom_step,
    IterOptions, IterState, IterationTrace, StopReason,
};
use crate::dynamics::{
    frequency_deviation, settling_time, simulate, step_euler, FrequencyModel, LoadEvent, SimOptions,
    SimState, SimulationTrace,
};
use crate::error::{require_positive, Error, Result};
use crate::model::{validate_scenario, ControllerConfig, ControllerKind, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquivalencePair {
    DualVsIntegral,
    MomVsPi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub method: EquivalencePair,
    /// Largest `|P_discrete − P_euler|` over all steps and generators, MW.
    pub max_abs_deviation: f64,
    /// Largest residual of the discrete power-command recursion evaluated on
    /// the Euler trajectory.
    pub max_recursion_residual: f64,
    pub steps: usize,
}

/// Runs the discrete iteration with `α = ρ = K/β` next to forward Euler on the
/// matching controller with `h = τ`, from the same starting price.
pub fn check_euler_equivalence(
    s: &Scenario,
    method: EquivalencePair,
    steps: usize,
    lambda0: Option<f64>,
) -> Result<EquivalenceReport> {
    if steps == 0 {
        return Err(Error::param("steps", "must be at least 1"));
    }
    let step_size = s.implied_step();
    let opts = IterOptions {
        lambda0,
        ..IterOptions::default()
    };
    let lambda0 = opts.initial_price(s);
    let model = FrequencyModel::quasi_static(s);
    let (kind, mut discrete): (ControllerKind, IterState) = match method {
        EquivalencePair::DualVsIntegral => {
            (ControllerKind::Integral, dual_ascent_initial(s, lambda0))
        }
        EquivalencePair::MomVsPi => (
            ControllerKind::ProportionalIntegral,
            mom_initial(s, lambda0, step_size),
        ),
    };
    let cfg = ControllerConfig::from_scenario(kind, s);
    let mut continuous = SimState {
        t: 0.0,
        p: discrete.p.clone(),
        delta_f: discrete.delta_f,
    };
    let demand = s.total_load();
    let two_a: Vec<f64> = s.costs().map(|c| 2.0 * c.a).collect();

    let mut max_dev: f64 = 0.0;
    let mut max_res: f64 = 0.0;
    for _ in 0..steps {
        discrete = match method {
            EquivalencePair::DualVsIntegral => dual_ascent_step(&discrete, s, step_size),
            EquivalencePair::MomVsPi => mom_step(&discrete, s, step_size),
        };
        let next = step_euler(&continuous, s, &cfg, model, s.tau);

        let df = frequency_deviation(&continuous.p, demand, s.beta);
        let df_next = frequency_deviation(&next.p, demand, s.beta);
        #[allow(clippy::needless_range_loop)]
        for i in 0..two_a.len() {
            max_dev = max_dev.max((discrete.p[i] - next.p[i]).abs());
            let dp = next.p[i] - continuous.p[i];
            let res = match method {
                // P' = P − K/(2a)·Δf
                EquivalencePair::DualVsIntegral => dp + s.gain_k / two_a[i] * df,
                // 2a(P' − P) + K(Δf' − Δf) = −K·Δf
                EquivalencePair::MomVsPi => {
                    two_a[i] * dp + s.gain_k * (df_next - df) + s.gain_k * df
                }
            };
            max_res = max_res.max(res.abs());
        }
        continuous = next;
    }
    Ok(EquivalenceReport {
        method,
        max_abs_deviation: max_dev,
        max_recursion_residual: max_res,
        steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    pub lambda_star: f64,
    pub dispatch: Vec<f64>,
    pub final_p: Vec<f64>,
    /// `max_i |P_i − P*_i|`, MW.
    pub power_gap: f64,
    pub final_delta_f: f64,
    /// `max_i mc_i − min_i mc_i` at the final sample, $/MWh.
    pub marginal_cost_spread: f64,
    pub passed: bool,
    pub failures: Vec<String>,
}

/// False for NaN.
fn below(x: f64, tol: f64) -> bool {
    x < tol
}

/// Final sample against the analytic dispatch at the final load: power gap,
/// frequency deviation and marginal-cost spread must all be below `tol`.
pub fn verify_steady_state_optimality(
    trace: &SimulationTrace,
    s: &Scenario,
    tol: f64,
) -> OptimalityReport {
    let target = analytic_dispatch(&s.with_loads(trace.final_loads().to_vec()));
    let last = trace.last();
    let power_gap = last
        .p
        .iter()
        .zip(&target.p)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mc = s.marginal_costs(&last.p);
    let spread = mc.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - mc.iter().copied().fold(f64::INFINITY, f64::min);

    let mut failures = Vec::new();
    if !below(power_gap, tol) {
        failures.push(format!("power gap {power_gap:e} MW to economic dispatch >= {tol:e}"));
    }
    if !below(last.delta_f.abs(), tol) {
        failures.push(format!("final |delta_f| {:e} Hz >= {tol:e}", last.delta_f.abs()));
    }
    if !below(spread, tol) {
        failures.push(format!("marginal cost spread {spread:e} $/MWh >= {tol:e}"));
    }
    OptimalityReport {
        lambda_star: target.lambda_star,
        dispatch: target.p,
        final_p: last.p.clone(),
        power_gap,
        final_delta_f: last.delta_f,
        marginal_cost_spread: spread,
        passed: failures.is_empty(),
        failures,
    }
}

/// Largest change, over the trace, of the marginal-cost differences
/// `mc_i − mc_1` relative to their initial values.
pub fn marginal_cost_spread_drift(trace: &SimulationTrace, s: &Scenario) -> f64 {
    let diffs = |p: &[f64]| -> Vec<f64> {
        let mc = s.marginal_costs(p);
        mc.iter().map(|m| m - mc[0]).collect()
    };
    let initial = diffs(&trace.samples[0].p);
    trace
        .samples
        .iter()
        .flat_map(|st| {
            diffs(&st.p)
                .into_iter()
                .zip(initial.clone())
                .map(|(d, d0)| (d - d0).abs())
        })
        .fold(0.0, f64::max)
}

/// `max_t |Δf − (ΣP − D(t))/β|` over a quasi-static trace.
pub fn quasi_static_residual(trace: &SimulationTrace) -> Option<f64> {
    let FrequencyModel::QuasiStatic { beta } = trace.model else {
        return None;
    };
    Some(
        trace
            .samples
            .iter()
            .map(|st| {
                let d: f64 = trace.loads_at(st.t).iter().sum();
                (st.delta_f - frequency_deviation(&st.p, d, beta)).abs()
            })
            .fold(0.0, f64::max),
    )
}

/// The disturbance and metric used for settling-time comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettlingStudy {
    pub events: Vec<LoadEvent>,
    /// Settling band on `|Δf|`, Hz.
    pub eps: f64,
    pub sim: SimOptions,
}

impl SettlingStudy {
    /// 20% load step at `t = τ`, `eps = 1e-4` Hz, `h = τ/100`, `t_end = 100·τ`.
    pub fn default_for(s: &Scenario) -> Self {
        Self {
            events: vec![LoadEvent::new(
                s.tau,
                s.loads.iter().map(|d| 1.2 * d).collect(),
            )],
            eps: 1e-4,
            sim: SimOptions::study_defaults(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConvergence {
    pub step: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub converged: bool,
    pub empirical_ratio: Option<f64>,
    pub predicted_ratio: f64,
}

impl MethodConvergence {
    fn from_trace(step: f64, trace: &IterationTrace, tol: f64, predicted_ratio: f64) -> Self {
        Self {
            step,
            iterations: trace.iterations(),
            stop_reason: trace.stop_reason,
            converged: trace.converged,
            empirical_ratio: trace.empirical_ratio(tol),
            predicted_ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub dual: MethodConvergence,
    pub mom: MethodConvergence,
    /// Settling time of the integral loop, s. `None` if it never settles.
    pub integral_settling: Option<f64>,
    pub pi_settling: Option<f64>,
    pub eps: f64,
}

pub fn compare_convergence(
    s: &Scenario,
    alpha: f64,
    rho: f64,
    opts: &IterOptions,
    study: &SettlingStudy,
) -> Result<ConvergenceReport> {
    let dual = dual_ascent_solve(s, alpha, opts)?;
    let mom = mom_solve(s, rho, opts)?;
    let model = FrequencyModel::quasi_static(s);
    let settle = |kind| -> Result<Option<f64>> {
        let cfg = ControllerConfig::from_scenario(kind, s);
        let trace = simulate(s, &cfg, model, &study.sim, &study.events)?;
        let t = settling_time(&trace, study.eps);
        Ok(t.is_finite().then_some(t))
    };
    Ok(ConvergenceReport {
        dual: MethodConvergence::from_trace(alpha, &dual, opts.tol, dual_contraction_factor(s, alpha)),
        mom: MethodConvergence::from_trace(rho, &mom, opts.tol, mom_contraction_factor(s, rho)),
        integral_settling: settle(ControllerKind::Integral)?,
        pi_settling: settle(ControllerKind::ProportionalIntegral)?,
        eps: study.eps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Alpha,
    Rho,
    #[serde(rename = "K")]
    GainK,
    Tau,
}

impl std::str::FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "alpha" => Ok(SweepParam::Alpha),
            "rho" => Ok(SweepParam::Rho),
            "K" | "k" => Ok(SweepParam::GainK),
            "tau" => Ok(SweepParam::Tau),
            other => Err(format!("unknown sweep parameter {other:?} (alpha, rho, K, tau)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub report: Option<ConvergenceReport>,
    pub error: Option<String>,
}

/// One convergence record per value. Sweeping α or ρ leaves the other at
/// `K/β`; sweeping K or τ rebuilds the scenario and uses `α = ρ = K/β`.
/// With `study = None` each row uses [`SettlingStudy::default_for`] its scenario.
pub fn sweep(
    s: &Scenario,
    param: SweepParam,
    values: &[f64],
    opts: &IterOptions,
    study: Option<&SettlingStudy>,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::param("values", "must not be empty"));
    }
    for &v in values {
        require_positive("values", v)?;
    }
    Ok(values
        .par_iter()
        .map(|&value| {
            let run = || -> Result<ConvergenceReport> {
                let mut sc = s.clone();
                let (alpha, rho) = match param {
                    SweepParam::Alpha => (value, s.implied_step()),
                    SweepParam::Rho => (s.implied_step(), value),
                    SweepParam::GainK => {
                        sc.gain_k = value;
                        (sc.implied_step(), sc.implied_step())
                    }
                    SweepParam::Tau => {
                        sc.tau = value;
                        (sc.implied_step(), sc.implied_step())
                    }
                };
                let sc = validate_scenario(sc)?;
                let own;
                let study = match study {
                    Some(st) => st,
                    None => {
                        own = SettlingStudy::default_for(&sc);
                        &own
                    }
                };
                compare_convergence(&sc, alpha, rho, opts, study)
            };
            match run() {
                Ok(report) => SweepRow {
                    value,
                    report: Some(report),
                    error: None,
                },
                Err(e) => SweepRow {
                    value,
                    report: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}
