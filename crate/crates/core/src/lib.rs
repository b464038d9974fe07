//! Macroscopic pedestrian dynamics driven by a mean-field game in which every
//! agent forecasts the crowd only a finite time `theta` ahead.
//!
//! At each outer time step the engine solves a forward-backward system on a
//! sliding prediction window: a push-forward Fokker-Planck scheme predicts
//! the crowd, the prediction is frozen beyond the window, and a
//! semi-Lagrangian Hamilton-Jacobi-Bellman sweep turns it into an optimal
//! control. Only the control at the current instant moves the main density.
//!
//! Module map:
//!
//! - [`grid`]: uniform space-time discretization, interpolation, CFL check.
//! - [`fields`]: density, value and control storage, L1 metric, averaging.
//! - [`interaction`]: sensory-region repulsion and wall projection.
//! - [`fokker_planck`]: conservative push-forward step with diffusion.
//! - [`hjb`]: finite-horizon and minimum-time value sweeps, control synthesis.
//! - [`engine`]: the windowed fixed point and the outer time loop.
//! - [`scenarios`]: declarative scenario model and TOML configuration.
//! - [`metrics`]: barycenters, turn times and evacuation diagnostics.

pub mod engine;
pub mod error;
pub mod fields;
pub mod fokker_planck;
pub mod grid;
pub mod hjb;
pub mod interaction;
pub mod metrics;
pub mod model;
pub mod par;
pub mod scenarios;

pub use engine::{
    ConvergenceRecord, Simulation, SimulationResult, Verdict, WindowOutcome, WindowSolveOptions,
};
pub use error::{Error, Result};
pub use fields::{ControlField, DensityField, SpaceTimeDensity, ValueField};
pub use grid::{Grid, Vec2};
pub use scenarios::Scenario;
