//! Solve the saturating reference instance and show the structure of the
//! solution: both value tables, the overall value, and where the
//! second-stage policy switches from "keep fishing" to "stop at once".
//!
//! Run with: `cargo run --release --example solve_reference`

use std::path::Path;

use renewal_stopping::{stage1, stage2, Grid3, InstanceConfig};

fn main() -> renewal_stopping::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/saturating.json");
    let config = InstanceConfig::load(&path)?;
    let spec = config.problem();
    let opts = config.solver_options();
    let grid = Grid3::new(spec.a_max, spec.horizon, 64, 64, 64)?;

    let y_b = stage2::solve(&spec, &grid, &opts)?;
    println!(
        "second stage: {} sweeps, residual {:.2e}, contraction estimate {:.3} (bound {:.3})",
        y_b.meta.iterations,
        y_b.meta.final_residual,
        y_b.meta.contraction_estimate,
        y_b.meta.contraction_bound,
    );

    let first = stage1::solve(&spec, &y_b, &grid, &opts)?;
    println!(
        "first stage:  {} sweeps, residual {:.2e}",
        first.y_a.meta.iterations, first.y_a.meta.final_residual,
    );
    println!("overall value gamma(0, 0) = {:.6}", first.gamma00);
    println!("switch payoff u(0, 0)     = {:.6}", first.u00);

    // The second-stage policy at full remaining horizon, along the mass axis:
    // the delay drops from the whole horizon to zero once one more catch is
    // no longer worth its expected cost.
    println!("\nsecond-stage delay at b = 0, c = t0, by accumulated mass:");
    let mut last: Option<f64> = None;
    for ia in 0..grid.a.n {
        let a = grid.a.at(ia);
        let r = stage2::optimal_delay(&y_b, a, 0.0, spec.horizon);
        if last.is_none_or(|p| (p - r).abs() > 1e-12) {
            println!("  a = {a:.4}: delay = {r:.4}");
        }
        last = Some(r);
    }
    println!(
        "(the crossing sits at mass ln 10 = {:.4}, where the hazard-weighted \
         utility gain equals the marginal cost)",
        10.0f64.ln()
    );
    Ok(())
}
