//! Finite-horizon double optimal stopping on marked renewal-reward
//! processes.
//!
//! An expedition accrues rewards from renewal event streams over a fixed
//! ticket `[0, t0]` and must pick two ordered stopping times: the switch
//! time `s`, when the method changes, and the terminal time `t <= t0`. The
//! payoff is a per-stage utility of accumulated mass minus a running time
//! cost, with a penalty for overrunning the ticket.
//!
//! The solver computes both stage value functions as fixed points of
//! contracting dynamic-programming operators on `(mass, elapsed, remaining)`
//! grids, extracts the delay policies, and validates them three ways:
//! finite-catch backward induction over raw states, closed-form
//! exponential-case rules, and seeded Monte Carlo policy execution.
//!
//! Module map:
//!
//! - [`dist`] - holding-time and reward laws: densities, survival, hazards,
//!   samplers, quadratures.
//! - [`model`] - problem specification, payoff functionals, marked
//!   trajectories and superposition, competitive payoff fields.
//! - [`table`] - 3-D value/policy tables with clamped trilinear
//!   interpolation and CSV/JSON export.
//! - [`stage2`] - post-switch value fixed point and stopping policy.
//! - [`stage1`] - pre-switch value fixed point, the overall value
//!   `gamma(0, 0)`, and the fresh-state slope diagnostic.
//! - [`oracle`] - independent cross-checks: backward induction, the
//!   infinitesimal generator, exponential-case policy rules.
//! - [`sim`] - reproducible Monte Carlo policy and game evaluation.
//! - [`config`] / [`cli`] - JSON instance schema and the command-line shell.
//!
//! The `examples/` directory holds one runnable example per capability; the
//! thin `renewal-stopping` binary exposes the same flows as subcommands.

pub mod cli;
pub mod config;
pub mod dist;
pub mod error;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod sim;
pub mod solver;
pub mod stage1;
pub mod stage2;
pub mod table;

/// Clock time within the ticket, in the horizon's unit.
pub type Time = f64;
/// Accumulated catch mass.
pub type Mass = f64;
/// Payoff amounts.
pub type Money = f64;
/// Per-time quantities (hazards, slopes).
pub type Rate = f64;

pub use config::InstanceConfig;
pub use dist::{HoldingDist, RewardDist};
pub use error::{Error, Result};
pub use model::{CostFn, MarkedEvent, ProblemSpec, StageSpec, Trajectory, UtilityFn};
pub use sim::{GameRule, GameRules, SimulationReport};
pub use solver::{GridDims, SolverOptions};
pub use stage1::FirstStageSolution;
pub use stage2::StoppingPolicy;
pub use table::{Axis, Grid3, ValueTable3};
