//! Command-line shell: solve, validate and export instances.
//!
//! Exit codes: 0 on success, 1 on configuration errors, 2 when a fixed-point
//! solve does not converge.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::InstanceConfig;
use crate::error::{Error, Result};
use crate::solver::{GridDims, SolverOptions};
use crate::stage1::{self, FirstStageSolution};
use crate::stage2::{self, StoppingPolicy};
use crate::table::{Grid3, ValueTable3};
use crate::{oracle, sim};

#[derive(Parser)]
#[command(
    name = "renewal-stopping",
    about = "Double optimal stopping on marked renewal-reward processes",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Instance configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for tables and reports.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Grid override as `na,nb,nc`.
    #[arg(long)]
    grid: Option<String>,
    /// Fixed-point tolerance override.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve both stage fixed points and write the value tables.
    Solve(CommonArgs),
    /// Solve, then validate the policies by Monte Carlo simulation.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 100_000)]
        replicates: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Also write the first N simulated trajectories.
        #[arg(long, default_value_t = 0)]
        dump_paths: u64,
    },
    /// Compare the second-stage solver against backward induction.
    Oracle {
        #[command(flatten)]
        common: CommonArgs,
        /// Catch budget of the induction.
        #[arg(long, default_value_t = 2)]
        k: usize,
    },
    /// Evaluate the two-player payoff field under configured rules.
    Game {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 100_000)]
        replicates: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Solve + simulate + oracle comparison, one summary JSON.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 100_000)]
        replicates: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        k: usize,
    },
}

/// Parses argv and runs; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with success status.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NonConvergence { .. } => 2,
                _ => 1,
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(common) => {
            let ctx = Context::load(&common)?;
            let solved = ctx.solve()?;
            ctx.write_tables(&solved)?;
            ctx.write_summary(&solved, None, None)?;
            println!(
                "solved {}: gamma00 = {}",
                ctx.name, solved.first.gamma00
            );
            Ok(())
        }
        Command::Simulate {
            common,
            replicates,
            seed,
            dump_paths,
        } => {
            let ctx = Context::load(&common)?;
            let solved = ctx.solve()?;
            let report = ctx.simulate(&solved, replicates, seed)?;
            ctx.write_tables(&solved)?;
            if dump_paths > 0 {
                ctx.dump_paths(&solved, dump_paths, seed)?;
            }
            ctx.write_summary(&solved, Some(&report), None)?;
            println!(
                "simulated {}: mc = {} +- {}, solver = {}",
                ctx.name, report.mc_mean, report.mc_stderr, report.gamma00
            );
            Ok(())
        }
        Command::Oracle { common, k } => {
            let ctx = Context::load(&common)?;
            let solved = ctx.solve()?;
            let (rows, max_diff) = ctx.oracle_rows(&solved, k)?;
            let mut buf = Vec::new();
            oracle::write_diff_csv(&rows, &mut buf)?;
            ctx.write_bytes("oracle_diff.csv", &buf)?;
            ctx.write_summary(&solved, None, Some(max_diff))?;
            println!(
                "oracle comparison {}: {} nodes, max |diff| = {max_diff}",
                ctx.name,
                rows.len()
            );
            Ok(())
        }
        Command::Game {
            common,
            replicates,
            seed,
        } => {
            let ctx = Context::load(&common)?;
            let game = ctx.config.game.clone().ok_or_else(|| {
                Error::Config("this command needs a `game` section in the config".into())
            })?;
            let game_spec = crate::model::GameSpec {
                players: game.players.clone(),
                cost_b: game.cost_b,
                penalty: ctx.spec.penalty,
                horizon: ctx.spec.horizon,
            };
            let report =
                sim::run_game_eval(&ctx.spec, &game_spec, &game.rules, replicates, seed)?;
            ctx.write_bytes(
                "game_report.json",
                serde_json::to_string_pretty(&report)?.as_bytes(),
            )?;
            println!(
                "game {}: player1 = {} +- {}, player2 = {} +- {}",
                ctx.name,
                report.player1.mean,
                report.player1.stderr,
                report.player2.mean,
                report.player2.stderr
            );
            Ok(())
        }
        Command::Compare {
            common,
            replicates,
            seed,
            k,
        } => {
            let ctx = Context::load(&common)?;
            let solved = ctx.solve()?;
            let report = ctx.simulate(&solved, replicates, seed)?;
            let (rows, max_diff) = ctx.oracle_rows(&solved, k)?;
            let mut buf = Vec::new();
            oracle::write_diff_csv(&rows, &mut buf)?;
            ctx.write_bytes("oracle_diff.csv", &buf)?;
            ctx.write_tables(&solved)?;
            ctx.write_summary(&solved, Some(&report), Some(max_diff))?;
            println!(
                "compared {}: gamma00 = {}, mc = {} +- {}, oracle max |diff| = {max_diff}",
                ctx.name, solved.first.gamma00, report.mc_mean, report.mc_stderr
            );
            Ok(())
        }
    }
}

struct Solved {
    y_b: ValueTable3,
    first: FirstStageSolution,
    slope_report: stage1::SlopeDiagnostic,
}

struct Context {
    config: InstanceConfig,
    spec: crate::model::ProblemSpec,
    opts: SolverOptions,
    grid: Grid3,
    out: PathBuf,
    name: String,
}

impl Context {
    fn load(common: &CommonArgs) -> Result<Context> {
        let config = InstanceConfig::load(&common.config)?;
        let spec = config.problem();
        let mut opts = config.solver_options();
        if let Some(grid) = &common.grid {
            opts.grid = parse_grid(grid)?;
        }
        if let Some(tol) = common.tol {
            opts.tol = tol;
        }
        opts.validate()?;
        let grid = opts.make_grid(spec.a_max, spec.horizon)?;
        let name = config.display_name(&common.config);
        Ok(Context {
            config,
            spec,
            opts,
            grid,
            out: common.out.clone(),
            name,
        })
    }

    fn solve(&self) -> Result<Solved> {
        let y_b = stage2::solve(&self.spec, &self.grid, &self.opts)?;
        let first = stage1::solve(&self.spec, &y_b, &self.grid, &self.opts)?;
        let slope_report = stage1::boundary_slope_report(&self.spec, &y_b, 9);
        Ok(Solved {
            y_b,
            first,
            slope_report,
        })
    }

    fn simulate(
        &self,
        solved: &Solved,
        replicates: u64,
        seed: u64,
    ) -> Result<sim::SimulationReport> {
        sim::validate_solution(
            &self.spec,
            solved.y_b.clone(),
            &solved.first,
            replicates,
            seed,
            &self.name,
        )
    }

    fn oracle_rows(&self, solved: &Solved, k: usize) -> Result<(Vec<oracle::DiffRow>, f64)> {
        let induction =
            oracle::backward_induction(&self.spec, 0.0, 0.0, k, &self.grid, &self.opts)?;
        let y_k = stage2::iterate(&self.spec, &self.grid, k, &self.opts);
        let rows = oracle::compare_tables(&y_k, &induction, k, &self.spec);
        let max_diff = rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
        let _ = solved;
        Ok((rows, max_diff))
    }

    fn dump_paths(&self, solved: &Solved, n: u64, seed: u64) -> Result<()> {
        let policy_a = StoppingPolicy::new(solved.first.y_a.clone())?;
        let policy_b = StoppingPolicy::new(solved.y_b.clone())?;
        let paths = sim::dump_trajectories(&self.spec, &policy_a, &policy_b, n, seed);
        for (i, traj) in paths.iter().enumerate() {
            let file = if i == 0 {
                "trajectories.csv".to_string()
            } else {
                format!("trajectories_{i}.csv")
            };
            let mut buf = Vec::new();
            traj.write_csv(&mut buf)?;
            self.write_bytes(&file, &buf)?;
        }
        Ok(())
    }

    fn write_tables(&self, solved: &Solved) -> Result<()> {
        let mut buf = Vec::new();
        solved.y_b.write_csv(&mut buf)?;
        self.write_bytes("table_stage_b.csv", &buf)?;
        self.write_bytes(
            "table_stage_b.json",
            serde_json::to_string_pretty(&solved.y_b.header_json(None))?.as_bytes(),
        )?;
        let mut buf = Vec::new();
        solved.first.y_a.write_csv(&mut buf)?;
        self.write_bytes("table_stage_a.csv", &buf)?;
        self.write_bytes(
            "table_stage_a.json",
            serde_json::to_string_pretty(
                &solved.first.y_a.header_json(Some(solved.first.gamma00)),
            )?
            .as_bytes(),
        )?;
        Ok(())
    }

    fn write_summary(
        &self,
        solved: &Solved,
        report: Option<&sim::SimulationReport>,
        oracle_max_diff: Option<f64>,
    ) -> Result<()> {
        if let Some(d) = &solved.slope_report.max_abs_discrepancy {
            println!(
                "fresh-state slope diagnostic: measured vs predicted 0, \
                 max |discrepancy| = {d}"
            );
        }
        let summary = serde_json::json!({
            "instance": self.name,
            "gamma00": solved.first.gamma00,
            "u00": solved.first.u00,
            "stage_b": solved.y_b.header_json(None),
            "stage_a": solved.first.y_a.header_json(Some(solved.first.gamma00)),
            "slope_diagnostic": solved.slope_report,
            "simulation": report,
            "oracle_max_abs_diff": oracle_max_diff,
        });
        self.write_bytes(
            "summary.json",
            serde_json::to_string_pretty(&summary)?.as_bytes(),
        )
    }

    fn write_bytes(&self, file: &str, bytes: &[u8]) -> Result<()> {
        fs::create_dir_all(&self.out)?;
        fs::write(self.out.join(file), bytes)?;
        Ok(())
    }
}

fn parse_grid(text: &str) -> Result<GridDims> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "--grid expects `na,nb,nc`, got `{text}`"
        )));
    }
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("--grid component `{s}` is not an integer")))
    };
    Ok(GridDims {
        na: parse(parts[0])?,
        nb: parse(parts[1])?,
        nc: parse(parts[2])?,
    })
}

/// Entry point for the binary: runs against the process argv.
pub fn run_main() -> i32 {
    run(std::env::args_os())
}
