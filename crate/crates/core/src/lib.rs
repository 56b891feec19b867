//! Reduced von Karman plate with aerodynamic memory.
//!
//! The crate simulates a clamped von Karman plate with rotational inertia and
//! square-root damping, driven by the delay potential of a subsonic flow,
//! reconstructs the flow potential from the plate history, computes
//! equilibria and buckling branches, and runs the energy, Lyapunov and
//! quasi-stability diagnostics.

pub mod banded;
pub mod config;
pub mod equilibria;
pub mod error;
pub mod flow;
pub mod diagnostics;
pub mod grid;
pub mod integrator;
pub mod io;
pub mod linalg;
pub mod memory;
pub mod ops;
pub mod probes;
pub mod run;
pub mod vonkarman;

pub use error::{Error, Result};
pub use grid::{GridSpec, PlateField, PlateState, Point2};
