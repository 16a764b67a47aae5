//! JSON instance configuration.
//!
//! Schema (all floats decimal):
//!
//! ```json
//! {
//!   "name": "linear-ref",
//!   "horizon": 1.0,
//!   "penalty": 1.0,
//!   "a_max": 8.0,
//!   "stage_a": {
//!     "utility": { "kind": "linear", "slope": 1.0 },
//!     "cost":    { "kind": "linear", "rate": 0.1 },
//!     "holding": { "kind": "exponential", "rate": 2.0 },
//!     "reward":  { "kind": "exponential", "rate": 1.0 }
//!   },
//!   "stage_b": { ... },
//!   "rod2":    { "holding": {...}, "reward": {...} },
//!   "solver":  { "grid": { "na": 64, "nb": 64, "nc": 64 }, "tol": 1e-8 },
//!   "game":    { "players": [...], "cost_b": {...}, "rules": {...} }
//! }
//! ```
//!
//! `rod2`, `solver` and `game` are optional.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CostFn, PlayerPayoffSpec, ProblemSpec, RodSpec, StageSpec};
use crate::sim::GameRules;
use crate::solver::SolverOptions;

/// Game section of a config: payoffs plus the three stopping rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    pub players: [PlayerPayoffSpec; 2],
    pub cost_b: CostFn,
    pub rules: GameRules,
}

fn default_a_max() -> f64 {
    8.0
}

/// One solvable instance, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub horizon: f64,
    pub penalty: f64,
    #[serde(default = "default_a_max")]
    pub a_max: f64,
    pub stage_a: StageSpec,
    pub stage_b: StageSpec,
    #[serde(default)]
    pub rod2: Option<RodSpec>,
    #[serde(default)]
    pub solver: Option<SolverOptions>,
    #[serde(default)]
    pub game: Option<GameConfig>,
}

impl InstanceConfig {
    /// Loads and validates a config file; parse errors carry the line/field
    /// diagnostic from the JSON parser.
    pub fn load(path: &Path) -> Result<InstanceConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let config: InstanceConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.problem().validate()?;
        if let Some(solver) = &config.solver {
            solver.validate()?;
        }
        Ok(config)
    }

    pub fn problem(&self) -> ProblemSpec {
        ProblemSpec {
            horizon: self.horizon,
            penalty: self.penalty,
            a_max: self.a_max,
            stage_a: self.stage_a.clone(),
            stage_b: self.stage_b.clone(),
            rod2: self.rod2.clone(),
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        self.solver.clone().unwrap_or_default()
    }

    pub fn display_name(&self, path: &Path) -> String {
        self.name.clone().unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "instance".into())
        })
    }
}
