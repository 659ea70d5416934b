//! Versioned JSON scenario files.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "scenario": {
//!     "generators": [
//!       { "id": "G1", "a": 0.5, "b": 1.0, "c": 0.0, "p_init": 7.0 },
//!       { "id": "G2", "a": 1.0, "b": 2.0, "p_init": 3.0 }
//!     ],
//!     "loads": [6.0, 4.0],
//!     "gain_K": 1.0, "beta": 1.5, "tau": 1.0
//!   },
//!   "solver": { "alpha": 0.5, "rho": 0.5, "tol": 1e-6, "max_iter": 10000, "lambda0": 0.0 },
//!   "simulation": {
//!     "controller": "pi", "h": 0.01, "t_end": 100.0, "integrator": "rk4",
//!     "model": { "kind": "quasi_static" },
//!     "events": [ { "t": 1.0, "loads": [7.2, 4.8] } ]
//!   }
//! }
//! ```
//!
//! Parsing is strict: unknown keys are rejected and every error carries the
//! JSON path of the offending field.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispatch::IterOptions;
use crate::dynamics::{FrequencyModel, LoadEvent, SimOptions};
use crate::error::{ValidationError, Violation};
use crate::model::{
    scenario_violations, ControllerConfig, ControllerKind, CostCoefficients, Generator, Scenario,
};
use crate::ode::Integrator;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub format_version: u32,
    pub scenario: ScenarioSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub generators: Vec<GeneratorEntry>,
    pub loads: Vec<f64>,
    #[serde(rename = "gain_K")]
    pub gain_k: f64,
    pub beta: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorEntry {
    pub id: String,
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub c: f64,
    pub p_init: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerName {
    Integral,
    Pi,
}

impl From<ControllerName> for ControllerKind {
    fn from(c: ControllerName) -> Self {
        match c {
            ControllerName::Integral => ControllerKind::Integral,
            ControllerName::Pi => ControllerKind::ProportionalIntegral,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Uses the scenario's β.
    QuasiStatic,
    Inertial { m_inertia: f64, d_damp: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventEntry {
    pub t: f64,
    pub loads: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<Integrator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<EventEntry>,
}

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{0}")]
    Syntax(SyntaxError),
    #[error("unsupported format_version {found} (expected {FORMAT_VERSION})")]
    UnsupportedVersion { found: String },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

#[derive(Debug)]
pub struct SyntaxError {
    pub path: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
        } else {
            write!(
                f,
                "{} (line {}, column {}): {}",
                self.path, self.line, self.column, self.message
            )
        }
    }
}

fn syntax_error(err: serde_path_to_error::Error<serde_json::Error>) -> FileError {
    let path = err.path().to_string();
    let inner = err.into_inner();
    FileError::Syntax(SyntaxError {
        path,
        line: inner.line(),
        column: inner.column(),
        message: strip_position(&inner.to_string()),
    })
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

/// Strict parse followed by every scenario and block invariant check.
pub fn parse_scenario_file(text: &str) -> Result<ScenarioFile, FileError> {
    // Check the version before strict parsing so a newer file reports the
    // version rather than an unknown key.
    let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| {
        FileError::Syntax(SyntaxError {
            path: String::new(),
            line: e.line(),
            column: e.column(),
            message: strip_position(&e.to_string()),
        })
    })?;
    if let Some(v) = raw.get("format_version") {
        if v.as_u64() != Some(FORMAT_VERSION as u64) {
            return Err(FileError::UnsupportedVersion {
                found: v.to_string(),
            });
        }
    }

    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(syntax_error)?;

    let violations = file.violations();
    if violations.is_empty() {
        Ok(file)
    } else {
        Err(FileError::Invalid(ValidationError(violations)))
    }
}

fn positive(out: &mut Vec<Violation>, field: &str, v: Option<f64>) {
    if let Some(v) = v {
        if !(v.is_finite() && v > 0.0) {
            out.push(Violation::new(field, format!("must be finite and > 0, got {v}")));
        }
    }
}

impl ScenarioFile {
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            scenario: ScenarioSpec {
                generators: s
                    .generators
                    .iter()
                    .map(|g| GeneratorEntry {
                        id: g.id.clone(),
                        a: g.cost.a,
                        b: g.cost.b,
                        c: g.cost.c,
                        p_init: g.p_init,
                    })
                    .collect(),
                loads: s.loads.clone(),
                gain_k: s.gain_k,
                beta: s.beta,
                tau: s.tau,
            },
            solver: None,
            simulation: None,
        }
    }

    pub fn scenario(&self) -> Scenario {
        let spec = &self.scenario;
        Scenario {
            generators: spec
                .generators
                .iter()
                .map(|g| Generator::new(g.id.clone(), CostCoefficients::new(g.a, g.b, g.c), g.p_init))
                .collect(),
            loads: spec.loads.clone(),
            gain_k: spec.gain_k,
            beta: spec.beta,
            tau: spec.tau,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    /// Every violation, with paths relative to the file root.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out: Vec<Violation> = scenario_violations(&self.scenario())
            .into_iter()
            .map(|v| Violation::new(format!("scenario.{}", v.field), v.message))
            .collect();

        if let Some(sv) = &self.solver {
            positive(&mut out, "solver.alpha", sv.alpha);
            positive(&mut out, "solver.rho", sv.rho);
            positive(&mut out, "solver.tol", sv.tol);
            if sv.max_iter == Some(0) {
                out.push(Violation::new("solver.max_iter", "must be at least 1"));
            }
            if let Some(l) = sv.lambda0 {
                if !l.is_finite() {
                    out.push(Violation::new("solver.lambda0", "must be finite"));
                }
            }
        }

        if let Some(sim) = &self.simulation {
            positive(&mut out, "simulation.h", sim.h);
            positive(&mut out, "simulation.t_end", sim.t_end);
            if let Some(ModelSpec::Inertial { m_inertia, d_damp }) = sim.model {
                positive(&mut out, "simulation.model.m_inertia", Some(m_inertia));
                if !(d_damp.is_finite() && d_damp >= 0.0) {
                    out.push(Violation::new("simulation.model.d_damp", "must be finite and >= 0"));
                }
            }
            for (i, e) in sim.events.iter().enumerate() {
                if !(e.t.is_finite() && e.t >= 0.0) {
                    out.push(Violation::new(format!("simulation.events[{i}].t"), "must be finite and >= 0"));
                }
                if i > 0 && e.t < sim.events[i - 1].t {
                    out.push(Violation::new(format!("simulation.events[{i}].t"), "events must be sorted by time"));
                }
                if e.loads.is_empty() {
                    out.push(Violation::new(format!("simulation.events[{i}].loads"), "must not be empty"));
                }
                for (j, d) in e.loads.iter().enumerate() {
                    if !d.is_finite() {
                        out.push(Violation::new(format!("simulation.events[{i}].loads[{j}]"), "load must be finite"));
                    }
                }
            }
        }
        out
    }

    /// α from the solver block, defaulting to `K/β`.
    pub fn alpha(&self) -> f64 {
        self.solver.as_ref().and_then(|b| b.alpha).unwrap_or(self.scenario().implied_step())
    }

    /// ρ from the solver block, defaulting to `K/β`.
    pub fn rho(&self) -> f64 {
        self.solver.as_ref().and_then(|b| b.rho).unwrap_or(self.scenario().implied_step())
    }

    pub fn iter_options(&self) -> IterOptions {
        let d = IterOptions::default();
        let b = self.solver.clone().unwrap_or_default();
        IterOptions {
            tol: b.tol.unwrap_or(d.tol),
            max_iter: b.max_iter.unwrap_or(d.max_iter),
            lambda0: b.lambda0,
        }
    }

    pub fn controller(&self) -> ControllerConfig {
        let kind = self
            .simulation
            .as_ref()
            .and_then(|b| b.controller)
            .map_or(ControllerKind::Integral, ControllerKind::from);
        ControllerConfig::from_scenario(kind, &self.scenario())
    }

    pub fn sim_options(&self) -> SimOptions {
        let s = self.scenario();
        let d = SimOptions::study_defaults(&s);
        let b = self.simulation.clone().unwrap_or_default();
        SimOptions {
            h: b.h.unwrap_or(d.h),
            t_end: b.t_end.unwrap_or(d.t_end),
            integrator: b.integrator.unwrap_or(d.integrator),
        }
    }

    pub fn frequency_model(&self) -> FrequencyModel {
        match self.simulation.as_ref().and_then(|b| b.model) {
            Some(ModelSpec::Inertial { m_inertia, d_damp }) => {
                FrequencyModel::Inertial { m_inertia, d_damp }
            }
            _ => FrequencyModel::QuasiStatic {
                beta: self.scenario.beta,
            },
        }
    }

    pub fn events(&self) -> Vec<LoadEvent> {
        self.simulation
            .as_ref()
            .map(|b| b.events.iter().map(|e| LoadEvent::new(e.t, e.loads.clone())).collect())
            .unwrap_or_default()
    }
}
