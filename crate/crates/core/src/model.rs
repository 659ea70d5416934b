//! Problem data and the elementary cost algebra.
//!
//! Units used throughout the crate: power in MW, price λ in $/MWh, frequency
//! deviation Δf in Hz, the price-to-frequency gain K in ($/MWh)/Hz and the
//! frequency response coefficient β in MW/Hz.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{ValidationError, Violation};

/// Quadratic generation cost `a·p² + b·p + c` in $/h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostCoefficients {
    /// Quadratic coefficient, $/MW²h. Must be strictly positive.
    pub a: f64,
    /// Linear coefficient, $/MWh.
    pub b: f64,
    /// Constant offset, $/h. Never affects an optimizer.
    pub c: f64,
}

impl CostCoefficients {
    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn cost(&self, p: f64) -> f64 {
        cost_value(self, p)
    }

    pub fn marginal(&self, p: f64) -> f64 {
        marginal_cost(self, p)
    }

    /// Output at which the marginal cost equals `lambda`.
    pub fn output_at_price(&self, lambda: f64) -> f64 {
        (lambda - self.b) / (2.0 * self.a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: String,
    pub cost: CostCoefficients,
    /// Initial power output, MW.
    pub p_init: f64,
}

impl Generator {
    pub fn new(id: impl Into<String>, cost: CostCoefficients, p_init: f64) -> Self {
        Self {
            id: id.into(),
            cost,
            p_init,
        }
    }
}

/// The single source of problem data shared by solvers and simulations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub generators: Vec<Generator>,
    /// Load demands D_i, MW.
    pub loads: Vec<f64>,
    /// Price-to-frequency gain K, ($/MWh)/Hz.
    pub gain_k: f64,
    /// Frequency response coefficient β, MW/Hz.
    pub beta: f64,
    /// Iteration step / controller time constant τ, s.
    pub tau: f64,
}

impl Scenario {
    pub fn n_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn total_load(&self) -> f64 {
        total_load(self)
    }

    pub fn costs(&self) -> impl ExactSizeIterator<Item = &CostCoefficients> + '_ {
        self.generators.iter().map(|g| &g.cost)
    }

    pub fn p_init(&self) -> Vec<f64> {
        self.generators.iter().map(|g| g.p_init).collect()
    }

    /// S = Σ 1/(2a_i): total output response to a unit price change.
    pub fn price_sensitivity(&self) -> f64 {
        self.costs().map(|c| 1.0 / (2.0 * c.a)).sum()
    }

    /// Total generation cost of the power vector `p`.
    pub fn total_cost(&self, p: &[f64]) -> f64 {
        self.costs().zip(p).map(|(c, &pi)| c.cost(pi)).sum()
    }

    pub fn marginal_costs(&self, p: &[f64]) -> Vec<f64> {
        self.costs().zip(p).map(|(c, &pi)| c.marginal(pi)).collect()
    }

    /// The step size α (equivalently penalty ρ) that the quasi-static
    /// frequency map identifies with this scenario's gain: K/β.
    pub fn implied_step(&self) -> f64 {
        self.gain_k / self.beta
    }

    /// Same scenario with the loads replaced.
    pub fn with_loads(&self, loads: Vec<f64>) -> Scenario {
        Scenario {
            loads,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSolution {
    /// Power vector, MW.
    pub p: Vec<f64>,
    /// Clearing price, $/MWh.
    pub lambda_star: f64,
    /// $/h.
    pub total_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Integral,
    ProportionalIntegral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    pub gain_k: f64,
    pub tau: f64,
}

impl ControllerConfig {
    /// Controller of the given kind using the scenario's K and τ.
    pub fn from_scenario(kind: ControllerKind, s: &Scenario) -> Self {
        Self {
            kind,
            gain_k: s.gain_k,
            tau: s.tau,
        }
    }

    /// Per-generator integral gains K/(2a_iτ), MW/Hz/s.
    pub fn integral_gains(&self, s: &Scenario) -> Vec<f64> {
        s.costs()
            .map(|c| integral_gain(c, self.gain_k, self.tau))
            .collect()
    }

    /// Per-generator proportional gains K/(2a_i), MW/Hz. Zero for pure integral control.
    pub fn proportional_gains(&self, s: &Scenario) -> Vec<f64> {
        match self.kind {
            ControllerKind::Integral => vec![0.0; s.n_generators()],
            ControllerKind::ProportionalIntegral => {
                s.costs().map(|c| self.gain_k / (2.0 * c.a)).collect()
            }
        }
    }
}

pub fn cost_value(c: &CostCoefficients, p: f64) -> f64 {
    c.a * p * p + c.b * p + c.c
}

pub fn marginal_cost(c: &CostCoefficients, p: f64) -> f64 {
    2.0 * c.a * p + c.b
}

/// Coefficient multiplying −Δf in the continuous integral law: K/(2aτ).
pub fn integral_gain(c: &CostCoefficients, gain_k: f64, tau: f64) -> f64 {
    gain_k / (2.0 * c.a * tau)
}

pub fn total_load(s: &Scenario) -> f64 {
    s.loads.iter().sum()
}

/// Returns the scenario unchanged if every invariant holds, otherwise every
/// violation found.
pub fn validate_scenario(s: Scenario) -> Result<Scenario, ValidationError> {
    let violations = scenario_violations(&s);
    if violations.is_empty() {
        Ok(s)
    } else {
        Err(ValidationError(violations))
    }
}

pub fn scenario_violations(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();

    if s.generators.is_empty() {
        out.push(Violation::new("generators", "at least one generator is required"));
    }
    let mut seen = HashSet::new();
    for (i, g) in s.generators.iter().enumerate() {
        let label = format!("generator {} ({:?})", i + 1, g.id);
        if g.id.is_empty() {
            out.push(Violation::new(format!("generators[{i}].id"), "id must not be empty"));
        } else if !seen.insert(g.id.as_str()) {
            out.push(Violation::new(
                format!("generators[{i}].id"),
                format!("duplicate generator id {:?}", g.id),
            ));
        }
        let a = g.cost.a;
        if !a.is_finite() {
            out.push(Violation::new(
                format!("generators[{i}].a"),
                format!("a must be finite for {label}"),
            ));
        } else if a <= 0.0 {
            out.push(Violation::new(
                format!("generators[{i}].a"),
                format!("a must be > 0 for {label}, got {a}"),
            ));
        }
        for (name, v) in [("b", g.cost.b), ("c", g.cost.c), ("p_init", g.p_init)] {
            if !v.is_finite() {
                out.push(Violation::new(
                    format!("generators[{i}].{name}"),
                    format!("{name} must be finite for {label}"),
                ));
            }
        }
    }

    if s.loads.is_empty() {
        out.push(Violation::new("loads", "at least one load is required"));
    }
    let mut loads_finite = true;
    for (j, d) in s.loads.iter().enumerate() {
        if !d.is_finite() {
            loads_finite = false;
            out.push(Violation::new(format!("loads[{j}]"), "load must be finite"));
        }
    }
    if loads_finite && !total_load(s).is_finite() {
        out.push(Violation::new("loads", "total load overflows"));
    }

    for (name, v) in [("gain_K", s.gain_k), ("beta", s.beta), ("tau", s.tau)] {
        if !v.is_finite() || v <= 0.0 {
            out.push(Violation::new(name, format!("{name} must be finite and > 0, got {v}")));
        }
    }
    out
}


#[cfg(test)]
mod tests {
    use super::fixtures::reference;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cost_value_examples() {
        assert_eq!(cost_value(&CostCoefficients::new(0.5, 1.0, 0.0), 7.0), 31.5);
        assert_eq!(cost_value(&CostCoefficients::new(1.0, 2.0, 0.0), 0.0), 0.0);
        assert_eq!(cost_value(&CostCoefficients::new(1.0, 2.0, 5.0), 3.0), 20.0);
    }

    #[test]
    fn marginal_cost_examples() {
        assert_eq!(marginal_cost(&CostCoefficients::new(0.5, 1.0, 0.0), 7.0), 8.0);
        assert_eq!(marginal_cost(&CostCoefficients::new(1.0, 2.0, 0.0), 0.0), 2.0);
        assert_eq!(marginal_cost(&CostCoefficients::new(1.0, 2.0, 0.0), 3.0), 8.0);
    }

    #[test]
    fn integral_gain_examples() {
        assert_eq!(integral_gain(&CostCoefficients::new(0.5, 0.0, 0.0), 1.0, 1.0), 1.0);
        assert_eq!(integral_gain(&CostCoefficients::new(1.0, 0.0, 0.0), 1.0, 1.0), 0.5);
        assert_eq!(integral_gain(&CostCoefficients::new(0.5, 0.0, 0.0), 2.0, 4.0), 0.5);
    }

    #[test]
    fn total_load_examples() {
        let mut s = reference();
        assert_eq!(total_load(&s), 10.0);
        s.loads = vec![10.0];
        assert_eq!(total_load(&s), 10.0);
        s.loads = vec![3.0, 3.0, 4.0];
        assert_eq!(total_load(&s), 10.0);
    }

    #[test]
    fn valid_scenario_passes_unchanged() {
        let s = reference();
        assert_eq!(validate_scenario(s.clone()).unwrap(), s);
    }

    #[test]
    fn zero_quadratic_coefficient_is_reported() {
        let mut s = reference();
        s.generators[1].cost.a = 0.0;
        let err = validate_scenario(s).unwrap_err();
        assert!(err.mentions("generators[1].a"));
        assert!(err.to_string().contains("a must be > 0 for generator 2"));
    }

    #[test]
    fn negative_beta_is_reported() {
        let mut s = reference();
        s.beta = -1.0;
        let err = validate_scenario(s).unwrap_err();
        assert_eq!(err.violations().len(), 1);
        assert!(err.mentions("beta"));
    }

    #[test]
    fn all_violations_are_listed() {
        let mut s = reference();
        s.gain_k = 0.0;
        s.tau = f64::NAN;
        s.generators[1].id = "G1".into();
        s.loads[0] = f64::INFINITY;
        let err = validate_scenario(s).unwrap_err();
        for f in ["gain_K", "tau", "generators[1].id", "loads[0]"] {
            assert!(err.mentions(f), "missing {f}: {err}");
        }
    }

    #[test]
    fn empty_lists_are_rejected() {
        let mut s = reference();
        s.generators.clear();
        s.loads.clear();
        let err = validate_scenario(s).unwrap_err();
        assert!(err.mentions("generators"));
        assert!(err.mentions("loads"));
    }

    proptest! {
        #[test]
        fn marginal_cost_is_derivative_of_cost(
            a in 0.01f64..10.0, b in -50.0f64..50.0, c in -100.0f64..100.0, p in -100.0f64..100.0,
        ) {
            let cc = CostCoefficients::new(a, b, c);
            let h = 1e-4;
            let fd = (cost_value(&cc, p + h) - cost_value(&cc, p - h)) / (2.0 * h);
            prop_assert!((fd - marginal_cost(&cc, p)).abs() <= 1e-6 * (1.0 + marginal_cost(&cc, p).abs()));
        }

        #[test]
        fn integral_gain_positive_and_decreasing_in_a(
            a in 0.01f64..10.0, da in 0.001f64..5.0, k in 0.01f64..10.0, tau in 0.01f64..10.0,
        ) {
            let g1 = integral_gain(&CostCoefficients::new(a, 0.0, 0.0), k, tau);
            let g2 = integral_gain(&CostCoefficients::new(a + da, 0.0, 0.0), k, tau);
            prop_assert!(g1 > 0.0 && g2 > 0.0);
            prop_assert!(g2 < g1);
        }

        #[test]
        fn validation_tracks_each_boundary(
            a in -1.0f64..1.0, k in -1.0f64..1.0, beta in -1.0f64..1.0, tau in -1.0f64..1.0,
        ) {
            let mut s = reference();
            s.generators[0].cost.a = a;
            s.gain_k = k;
            s.beta = beta;
            s.tau = tau;
            let expect_ok = a > 0.0 && k > 0.0 && beta > 0.0 && tau > 0.0;
            let res = validate_scenario(s);
            prop_assert_eq!(res.is_ok(), expect_ok);
            if let Err(e) = res {
                prop_assert_eq!(e.mentions("generators[0].a"), a <= 0.0);
                prop_assert_eq!(e.mentions("gain_K"), k <= 0.0);
                prop_assert_eq!(e.mentions("beta"), beta <= 0.0);
                prop_assert_eq!(e.mentions("tau"), tau <= 0.0);
            }
        }
    }
}
