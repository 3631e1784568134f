//! Corotational solver for the Ginzburg-Landau penalized harmonic map heat
//! flow with penalty `lambda^(1 - arctan(t)/pi)`, plus global and
//! space-time-local diagnostics of the flow.

pub mod config;
pub mod diagnostics;
pub mod dump;
pub mod error;
pub mod grid;
pub mod harness;
pub mod probes;
pub mod report;
pub mod scheme;
pub mod solver;
pub mod tridiag;

pub use config::RunConfig;
pub use error::{GlhfError, Result};
pub use grid::{CorotationalField, InitialDatum, RadialGrid};
pub use scheme::SchemeParams;
pub use solver::{run, Accumulators, Scheme, StepperConfig, Trajectory};
