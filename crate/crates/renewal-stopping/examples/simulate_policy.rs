//! Execute the solved stopping policies over seeded Monte Carlo replicates
//! and compare the estimate against the solver value and two fixed rules.
//!
//! Run with: `cargo run --release --example simulate_policy`

use std::path::Path;

use renewal_stopping::{sim, stage1, stage2, Grid3, InstanceConfig};

fn main() -> renewal_stopping::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/linear.json");
    let config = InstanceConfig::load(&path)?;
    let spec = config.problem();
    let opts = config.solver_options();
    let grid = Grid3::new(spec.a_max, spec.horizon, 64, 64, 64)?;

    let y_b = stage2::solve(&spec, &grid, &opts)?;
    let first = stage1::solve(&spec, &y_b, &grid, &opts)?;
    let report = sim::validate_solution(&spec, y_b, &first, 100_000, 7, "linear-ref")?;

    println!("solver value   : {:.6}", report.gamma00);
    println!(
        "policy estimate: {:.6} +- {:.6} ({} replicates, seed {})",
        report.mc_mean, report.mc_stderr, report.replicates, report.seed
    );
    println!(
        "baseline switch-at-0 / stop-at-deadline: {:.6} +- {:.6}",
        report.baseline_switch0_stop_horizon.mean, report.baseline_switch0_stop_horizon.stderr
    );
    println!(
        "baseline switch-at-0 / stop-at-0       : {:.6}",
        report.baseline_switch0_stop0.mean
    );
    println!(
        "switch times: mean {:.4}, max {:.4}; stop times: mean {:.4}, max {:.4}",
        report.switch_times.mean,
        report.switch_times.max,
        report.stop_times.mean,
        report.stop_times.max
    );
    println!("stop-time histogram over [0, t0]: {:?}", report.stop_times.bins);
    Ok(())
}
