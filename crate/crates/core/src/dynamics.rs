//! Continuous-time closed loop: frequency model, integral and PI secondary
//! controllers with cost-derived gains, fixed-step simulation and settling
//! metrics.
//!
//! Integral law: `τ·Ṗ_i = −K/(2a_i)·Δf`.
//! PI law: `2a_i·τ·Ṗ_i + K·τ·Δḟ = −K·Δf`, i.e. `P_i/Δf = −K/(2a_i)·(1 + 1/(τs))`.
//!
//! Under the quasi-static model `Δf = (ΣP − D)/β` is algebraic, so the PI law
//! closes into a diagonal-plus-rank-one system for `Ṗ`. In both laws the
//! increments of `2a_i·P_i` are common to all generators, so the spread of
//! marginal costs is conserved along every trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::linalg::solve_diag_plus_ones;
use crate::model::{ControllerConfig, ControllerKind, CostCoefficients, Scenario};
use crate::ode::Integrator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrequencyModel {
    /// `Δf = (ΣP − D)/β`.
    QuasiStatic { beta: f64 },
    /// Aggregate swing with damping: `M·Δḟ = (ΣP − D) − d·Δf`.
    Inertial { m_inertia: f64, d_damp: f64 },
}

impl FrequencyModel {
    pub fn quasi_static(s: &Scenario) -> Self {
        FrequencyModel::QuasiStatic { beta: s.beta }
    }

    fn check(&self) -> Result<()> {
        match *self {
            FrequencyModel::QuasiStatic { beta } => require_positive("beta", beta),
            FrequencyModel::Inertial { m_inertia, d_damp } => {
                require_positive("m_inertia", m_inertia)?;
                if d_damp.is_finite() && d_damp >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::param("d_damp", "must be finite and >= 0"))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub t: f64,
    pub p: Vec<f64>,
    pub delta_f: f64,
}

/// Replace the load vector at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadEvent {
    pub t: f64,
    pub loads: Vec<f64>,
}

impl LoadEvent {
    pub fn new(t: f64, loads: Vec<f64>) -> Self {
        Self { t, loads }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Step size, s.
    pub h: f64,
    pub t_end: f64,
    pub integrator: Integrator,
}

impl SimOptions {
    /// `h = τ/100`, `t_end = 100·τ`, RK4.
    pub fn study_defaults(s: &Scenario) -> Self {
        Self {
            h: s.tau / 100.0,
            t_end: 100.0 * s.tau,
            integrator: Integrator::Rk4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub samples: Vec<SimState>,
    /// Events as applied, with times snapped to the integration grid.
    pub events: Vec<LoadEvent>,
    pub controller: ControllerConfig,
    pub model: FrequencyModel,
    pub initial_loads: Vec<f64>,
}

impl SimulationTrace {
    pub fn last(&self) -> &SimState {
        self.samples.last().expect("trace is never empty")
    }

    /// Load vector in force at time `t` (events apply at their own sample).
    pub fn loads_at(&self, t: f64) -> &[f64] {
        self.events
            .iter()
            .rev()
            .find(|e| e.t <= t)
            .map_or(self.initial_loads.as_slice(), |e| e.loads.as_slice())
    }

    pub fn final_loads(&self) -> &[f64] {
        self.events
            .last()
            .map_or(self.initial_loads.as_slice(), |e| e.loads.as_slice())
    }
}

/// `(Σp − D)/β`: surplus generation gives a positive deviation.
pub fn frequency_deviation(p: &[f64], d_total: f64, beta: f64) -> f64 {
    (p.iter().sum::<f64>() - d_total) / beta
}

/// Integral control under the quasi-static model: `Ṗ_i = −K/(2a_iτ)·Δf`.
pub fn integral_rhs(state: &SimState, s: &Scenario, cfg: &ControllerConfig) -> Vec<f64> {
    let delta_f = frequency_deviation(&state.p, s.total_load(), s.beta);
    integral_law(s, cfg, delta_f)
}

/// PI control under the quasi-static model: solves
/// `2a_i·τ·Ṗ_i + K·τ·(ΣṖ)/β = −K·Δf` for `Ṗ`.
pub fn pi_rhs(state: &SimState, s: &Scenario, cfg: &ControllerConfig) -> Vec<f64> {
    let delta_f = frequency_deviation(&state.p, s.total_load(), s.beta);
    pi_quasi_static_law(s, cfg, s.beta, delta_f)
}

fn integral_law(s: &Scenario, cfg: &ControllerConfig, delta_f: f64) -> Vec<f64> {
    s.costs()
        .map(|c| -cfg.gain_k / (2.0 * c.a * cfg.tau) * delta_f)
        .collect()
}

fn pi_quasi_static_law(s: &Scenario, cfg: &ControllerConfig, beta: f64, delta_f: f64) -> Vec<f64> {
    let diag: Vec<f64> = s.costs().map(|c| 2.0 * c.a * cfg.tau).collect();
    let weight = cfg.gain_k * cfg.tau / beta;
    let rhs = vec![-cfg.gain_k * delta_f; diag.len()];
    solve_diag_plus_ones(&diag, weight, &rhs)
}

/// PI under the inertial model, where `Δḟ` is known explicitly.
fn pi_inertial_law(s: &Scenario, cfg: &ControllerConfig, delta_f: f64, d_delta_f: f64) -> Vec<f64> {
    let drive = -cfg.gain_k * delta_f - cfg.gain_k * cfg.tau * d_delta_f;
    s.costs().map(|c| drive / (2.0 * c.a * cfg.tau)).collect()
}

/// Vector field of the closed loop. The state is `P` under the quasi-static
/// model and `[P, Δf]` under the inertial model.
fn closed_loop<'a>(
    s: &'a Scenario,
    cfg: &'a ControllerConfig,
    model: FrequencyModel,
) -> impl Fn(f64, &[f64]) -> Vec<f64> + 'a {
    let demand = s.total_load();
    let n = s.n_generators();
    move |_t, x| match model {
        FrequencyModel::QuasiStatic { beta } => {
            let delta_f = frequency_deviation(x, demand, beta);
            match cfg.kind {
                ControllerKind::Integral => integral_law(s, cfg, delta_f),
                ControllerKind::ProportionalIntegral => pi_quasi_static_law(s, cfg, beta, delta_f),
            }
        }
        FrequencyModel::Inertial { m_inertia, d_damp } => {
            let (p, delta_f) = (&x[..n], x[n]);
            let d_delta_f = (p.iter().sum::<f64>() - demand - d_damp * delta_f) / m_inertia;
            let mut dx = match cfg.kind {
                ControllerKind::Integral => integral_law(s, cfg, delta_f),
                ControllerKind::ProportionalIntegral => {
                    pi_inertial_law(s, cfg, delta_f, d_delta_f)
                }
            };
            dx.push(d_delta_f);
            dx
        }
    }
}

/// One fixed step of the closed loop. Under the quasi-static model `Δf` is
/// recomputed from the new powers.
pub fn step(
    integrator: Integrator,
    state: &SimState,
    s: &Scenario,
    cfg: &ControllerConfig,
    model: FrequencyModel,
    h: f64,
) -> SimState {
    let field = closed_loop(s, cfg, model);
    match model {
        FrequencyModel::QuasiStatic { beta } => {
            let p = integrator.step(&field, state.t, &state.p, h);
            let delta_f = frequency_deviation(&p, s.total_load(), beta);
            SimState {
                t: state.t + h,
                p,
                delta_f,
            }
        }
        FrequencyModel::Inertial { .. } => {
            let mut x = state.p.clone();
            x.push(state.delta_f);
            let mut x = integrator.step(&field, state.t, &x, h);
            let delta_f = x.pop().expect("augmented state");
            SimState {
                t: state.t + h,
                p: x,
                delta_f,
            }
        }
    }
}

pub fn step_euler(
    state: &SimState,
    s: &Scenario,
    cfg: &ControllerConfig,
    model: FrequencyModel,
    h: f64,
) -> SimState {
    step(Integrator::Euler, state, s, cfg, model, h)
}

pub fn step_rk4(
    state: &SimState,
    s: &Scenario,
    cfg: &ControllerConfig,
    model: FrequencyModel,
    h: f64,
) -> SimState {
    step(Integrator::Rk4, state, s, cfg, model, h)
}

/// Powers right after a load step under quasi-static PI control.
///
/// The integrator states `z_i = 2a_i·P_i + K·Δf` are continuous across the
/// step, so the proportional path moves `P` at once: solve
/// `2a_i·P_i + K·(ΣP − D_new)/β = z_i`.
pub fn pi_load_step(p: &[f64], costs: &[CostCoefficients], gain_k: f64, beta: f64, d_old: f64, d_new: f64) -> Vec<f64> {
    let delta_f_old = frequency_deviation(p, d_old, beta);
    let diag: Vec<f64> = costs.iter().map(|c| 2.0 * c.a).collect();
    let rhs: Vec<f64> = costs
        .iter()
        .zip(p)
        .map(|(c, pi)| 2.0 * c.a * pi + gain_k * delta_f_old + gain_k * d_new / beta)
        .collect();
    solve_diag_plus_ones(&diag, gain_k / beta, &rhs)
}

/// Integrates the closed loop from `p_init`, applying load steps at the grid
/// point nearest to each event time. Under the inertial model the system
/// starts at nominal frequency (`Δf = 0`).
pub fn simulate(
    s: &Scenario,
    cfg: &ControllerConfig,
    model: FrequencyModel,
    opts: &SimOptions,
    events: &[LoadEvent],
) -> Result<SimulationTrace> {
    require_positive("h", opts.h)?;
    require_positive("gain_K", cfg.gain_k)?;
    require_positive("tau", cfg.tau)?;
    model.check()?;
    if !(opts.t_end.is_finite() && opts.t_end > opts.h) {
        return Err(Error::param("t_end", "must be finite and greater than h"));
    }
    for (i, e) in events.iter().enumerate() {
        if !(e.t.is_finite() && e.t >= 0.0) {
            return Err(Error::BadEvent {
                index: i,
                reason: format!("time must be finite and >= 0, got {}", e.t),
            });
        }
        if e.loads.is_empty() || e.loads.iter().any(|d| !d.is_finite()) {
            return Err(Error::BadEvent {
                index: i,
                reason: "loads must be non-empty and finite".into(),
            });
        }
        if i > 0 && e.t < events[i - 1].t {
            return Err(Error::UnsortedEvents { index: i, time: e.t });
        }
    }

    let n_steps = (opts.t_end / opts.h).round() as usize;
    let snapped: Vec<(usize, &LoadEvent)> = events
        .iter()
        .map(|e| (((e.t / opts.h).round() as usize).min(n_steps), e))
        .collect();

    let mut work = s.clone();
    if let FrequencyModel::QuasiStatic { beta } = model {
        work.beta = beta;
    }
    let costs: Vec<CostCoefficients> = s.costs().copied().collect();
    let mut applied = Vec::with_capacity(events.len());

    let p0 = s.p_init();
    let delta_f0 = match model {
        FrequencyModel::QuasiStatic { beta } => frequency_deviation(&p0, work.total_load(), beta),
        FrequencyModel::Inertial { .. } => 0.0,
    };
    let mut state = SimState {
        t: 0.0,
        p: p0,
        delta_f: delta_f0,
    };

    let mut next_event = 0;
    let mut apply_events = |n: usize, state: &mut SimState, work: &mut Scenario| {
        while next_event < snapped.len() && snapped[next_event].0 == n {
            let event = snapped[next_event].1;
            if let FrequencyModel::QuasiStatic { beta } = model {
                let d_old = work.total_load();
                let d_new: f64 = event.loads.iter().sum();
                if cfg.kind == ControllerKind::ProportionalIntegral {
                    state.p = pi_load_step(&state.p, &costs, cfg.gain_k, beta, d_old, d_new);
                }
                state.delta_f = frequency_deviation(&state.p, d_new, beta);
            }
            work.loads = event.loads.clone();
            applied.push(LoadEvent::new(state.t, event.loads.clone()));
            next_event += 1;
        }
    };

    let mut samples = Vec::with_capacity(n_steps + 1);
    apply_events(0, &mut state, &mut work);
    samples.push(state.clone());
    for n in 0..n_steps {
        let mut next = step(opts.integrator, &state, &work, cfg, model, opts.h);
        next.t = (n + 1) as f64 * opts.h;
        apply_events(n + 1, &mut next, &mut work);
        samples.push(next.clone());
        state = next;
    }

    Ok(SimulationTrace {
        samples,
        events: applied,
        controller: *cfg,
        model,
        initial_loads: s.loads.clone(),
    })
}

/// Earliest sample time after the last event from which `|Δf| ≤ eps` holds
/// for the rest of the trace; `f64::INFINITY` if the final sample violates it.
pub fn settling_time(trace: &SimulationTrace, eps: f64) -> f64 {
    let t_event = trace.events.last().map_or(f64::NEG_INFINITY, |e| e.t);
    let start = trace
        .samples
        .iter()
        .position(|st| st.t >= t_event)
        .unwrap_or(trace.samples.len());
    let window = &trace.samples[start..];
    match window.iter().rposition(|st| st.delta_f.abs() > eps) {
        None => window.first().map_or(f64::INFINITY, |st| st.t),
        Some(j) if j + 1 == window.len() => f64::INFINITY,
        Some(j) => window[j + 1].t,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyResponse {
    pub re: f64,
    pub im: f64,
}

impl FrequencyResponse {
    pub fn magnitude(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

/// `P_i/Δf_i = −K/(2a_i)·(1 + 1/(τs))` evaluated at `s = jω`.
pub fn pi_frequency_response(
    c: &CostCoefficients,
    gain_k: f64,
    tau: f64,
    omega: f64,
) -> Result<FrequencyResponse> {
    if omega == 0.0 || !omega.is_finite() {
        return Err(Error::param(
            "omega",
            "must be finite and non-zero (integrator pole at s = 0)",
        ));
    }
    let gain = gain_k / (2.0 * c.a);
    // 1/(jωτ) = −j/(ωτ)
    Ok(FrequencyResponse {
        re: -gain,
        im: gain / (omega * tau),
    })
}
