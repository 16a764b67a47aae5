//! Evaluate the two-player payoff field: each angler runs one rod, the
//! earlier stopper leads the final segment and takes the other rod, and the
//! leader's deadline ends the expedition. Rules here are simple fixtures
//! (stop at the first own catch / at a fixed time); the harness evaluates
//! payoffs, it does not search for equilibria.
//!
//! Run with: `cargo run --release --example competitive_game`

use std::path::Path;

use renewal_stopping::model::GameSpec;
use renewal_stopping::sim::{run_game_eval, GameRule, GameRules};
use renewal_stopping::InstanceConfig;

fn main() -> renewal_stopping::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/game.json");
    let config = InstanceConfig::load(&path)?;
    let spec = config.problem();
    let game_config = config.game.clone().expect("game.json carries a game section");
    let game = GameSpec {
        players: game_config.players.clone(),
        cost_b: game_config.cost_b,
        penalty: spec.penalty,
        horizon: spec.horizon,
    };

    let configured = run_game_eval(&spec, &game, &game_config.rules, 100_000, 11)?;
    println!("configured rules ({:?}):", game_config.rules);
    println!(
        "  player 1: {:.5} +- {:.5}",
        configured.player1.mean, configured.player1.stderr
    );
    println!(
        "  player 2: {:.5} +- {:.5}",
        configured.player2.mean, configured.player2.stderr
    );
    println!("  merge ties broken by rod order: {}", configured.ties_broken);

    // An impatient leader against a deadline player.
    let impatient = GameRules {
        tau1: GameRule::AfterOwnCatches { k: 1 },
        tau2: GameRule::At { t: spec.horizon },
        sigma: GameRule::At { t: spec.horizon },
    };
    let report = run_game_eval(&spec, &game, &impatient, 100_000, 11)?;
    println!("\nfirst-catch leader vs deadline opponent:");
    println!(
        "  player 1: {:.5} +- {:.5}",
        report.player1.mean, report.player1.stderr
    );
    println!(
        "  player 2: {:.5} +- {:.5}",
        report.player2.mean, report.player2.stderr
    );
    Ok(())
}
