//! Quadratic-cost economic dispatch by dual decomposition and the method of
//! multipliers, and the secondary frequency controllers they are equivalent to.
//!
//! With the power imbalance read as a frequency deviation (`Δf = (ΣP − D)/β`),
//! a dual-ascent price update is an integral controller and a
//! method-of-multipliers update is a PI controller, each with gains
//! `K/(2a_i)` set by the generator's cost curve.

pub mod cli;
pub mod dispatch;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod scenario_file;
pub mod trace_csv;

pub use error::{Error, Result, ValidationError, Violation};
