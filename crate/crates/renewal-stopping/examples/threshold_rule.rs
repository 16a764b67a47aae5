//! Compare the solved second-stage policy against the closed-form hazard
//! threshold rule for exponential holdings: stop as soon as
//! `rate * E[g(a + X) - g(a)] <= c'(t - s)`, and show that the pointwise
//! generator of the payoff process changes sign at the same mass.
//!
//! Run with: `cargo run --release --example threshold_rule`

use std::path::Path;

use renewal_stopping::oracle::{self, Decision};
use renewal_stopping::{stage2, Grid3, InstanceConfig};

fn main() -> renewal_stopping::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/saturating.json");
    let config = InstanceConfig::load(&path)?;
    let spec = config.problem();
    let opts = config.solver_options();
    let grid = Grid3::new(spec.a_max, spec.horizon, 64, 64, 64)?;
    let y_b = stage2::solve(&spec, &grid, &opts)?;

    println!("mass      rule       solved delay   generator");
    let c = spec.horizon;
    let mut agreements = 0;
    let mut checked = 0;
    for ia in 0..grid.a.n {
        let a = grid.a.at(ia);
        let rule = oracle::hazard_threshold_rule(&spec, a, 0.0, 0.0)?;
        let delay = stage2::optimal_delay(&y_b, a, 0.0, c);
        let gen = oracle::generator_stage_b(&spec, a, 0.0, 0.5, 0.2);
        if ia % 8 == 0 {
            println!(
                "{a:7.4}   {rule:?}{}   {delay:9.4}      {gen:+.4}",
                if rule == Decision::Stop { "    " } else { "" }
            );
        }
        // Away from the crossing the rule and the solved policy agree
        // exactly: delay c where it says continue, 0 where it says stop.
        let boundary = 10.0f64.ln();
        if (a - boundary).abs() > grid.a.step() {
            checked += 1;
            let expect = if rule == Decision::Stop { 0.0 } else { c };
            if delay == expect {
                agreements += 1;
            }
        }
    }
    println!(
        "\nrule vs solved policy away from the ln 10 = {:.4} crossing: {agreements}/{checked} exact",
        10.0f64.ln()
    );
    Ok(())
}
