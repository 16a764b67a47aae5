//! Monte Carlo policy execution and game payoff evaluation.
//!
//! Replicates draw from counter-based RNG streams keyed by
//! `(seed, purpose, replicate)`, so parallel and serial runs produce
//! bit-identical estimates; reductions use a fixed pairwise-summation tree.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    filter_by_mark, simulate_stream, superpose, GameSpec, MarkedEvent, ProblemSpec, Trajectory,
};
use crate::numeric::mean_stderr;
use crate::stage1::FirstStageSolution;
use crate::stage2::StoppingPolicy;
use crate::{Money, Time};

// ---------------------------------------------------------------------------
// Reporting types
// ---------------------------------------------------------------------------

/// Point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Fixed-bin histogram of times in `[0, hi]`, with summary moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeHistogram {
    pub hi: f64,
    pub bins: Vec<u64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl TimeHistogram {
    fn build(times: &[f64], hi: f64, nbins: usize) -> TimeHistogram {
        let mut bins = vec![0u64; nbins];
        let (mut lo, mut top) = (f64::INFINITY, f64::NEG_INFINITY);
        for &t in times {
            let idx = if hi > 0.0 {
                (((t / hi) * nbins as f64) as usize).min(nbins - 1)
            } else {
                0
            };
            bins[idx] += 1;
            lo = lo.min(t);
            top = top.max(t);
        }
        let (mean, _) = mean_stderr(times);
        TimeHistogram {
            hi,
            bins,
            mean,
            min: if times.is_empty() { 0.0 } else { lo },
            max: if times.is_empty() { 0.0 } else { top },
        }
    }
}

/// Monte Carlo validation report for one solved instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub instance: String,
    /// Solver value of the expedition from the origin state.
    pub gamma00: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub replicates: u64,
    pub seed: u64,
    pub switch_times: TimeHistogram,
    pub stop_times: TimeHistogram,
    /// Fixed rule "switch at 0, stop at the deadline".
    pub baseline_switch0_stop_horizon: Estimate,
    /// Fixed rule "switch at 0, stop at 0".
    pub baseline_switch0_stop0: Estimate,
}

// ---------------------------------------------------------------------------
// RNG streams
// ---------------------------------------------------------------------------

const PURPOSE_POLICY: u64 = 0;
const PURPOSE_BASELINE: u64 = 1;
const PURPOSE_GAME: u64 = 2;

fn replicate_rng(seed: u64, purpose: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 56) | replicate);
    rng
}

// ---------------------------------------------------------------------------
// Policy execution
// ---------------------------------------------------------------------------

struct Replicate {
    switch_time: f64,
    stop_time: f64,
    payoff: f64,
    trajectory: Option<Trajectory>,
}

/// Walks one stream under a delay policy: after each event, wait the policy
/// delay and stop unless the next event arrives first. Returns the stop
/// time, the state mass at the stop, and the events taken.
fn walk_stage<R: rand::Rng>(
    holding: &crate::dist::HoldingDist,
    reward: &crate::dist::RewardDist,
    policy: &StoppingPolicy,
    start: Time,
    horizon: Time,
    mark: u8,
    record: bool,
    rng: &mut R,
) -> (Time, f64, Vec<MarkedEvent>) {
    let mut t = start;
    let mut mass = 0.0;
    let mut events = Vec::new();
    loop {
        let c = horizon - t;
        let delay = policy.delay(mass, t - start, c);
        let gap = holding.sample(rng);
        if delay < gap {
            return ((t + delay).min(horizon), mass, events);
        }
        t += gap;
        mass += {
            let x = reward.sample(rng);
            if record {
                events.push(MarkedEvent { time: t, mark, reward: x });
            }
            x
        };
    }
}

fn run_replicate(
    spec: &ProblemSpec,
    policy_a: &StoppingPolicy,
    policy_b: &StoppingPolicy,
    record: bool,
    rng: &mut ChaCha8Rng,
) -> Replicate {
    let t0 = spec.horizon;
    let (switch_time, pre_mass, mut events) = walk_stage(
        &spec.stage_a.holding,
        &spec.stage_a.reward,
        policy_a,
        0.0,
        t0,
        1,
        record,
        rng,
    );
    let (stop_time, post_mass, post_events) = walk_stage(
        &spec.stage_b.holding,
        &spec.stage_b.reward,
        policy_b,
        switch_time,
        t0,
        3,
        record,
        rng,
    );
    assert!(
        switch_time <= stop_time && stop_time <= t0,
        "policy feasibility keeps 0 <= s <= t <= t0"
    );
    events.extend(post_events);
    let payoff = spec.w_b(pre_mass, switch_time, post_mass, stop_time);
    Replicate {
        switch_time,
        stop_time,
        payoff,
        trajectory: record.then_some(Trajectory {
            events,
            switch_time: Some(switch_time),
            ties_broken: 0,
        }),
    }
}

/// Executes the solved policies over `replicates` independent expeditions
/// and reports the estimate against the solver value and two fixed-rule
/// baselines. Identical `(spec, policies, replicates, seed)` inputs produce
/// a bit-identical report.
pub fn run_policy_simulation(
    spec: &ProblemSpec,
    policy_a: &StoppingPolicy,
    policy_b: &StoppingPolicy,
    gamma00: f64,
    replicates: u64,
    seed: u64,
    instance: &str,
) -> SimulationReport {
    assert!(replicates >= 1, "need at least one replicate");
    let n = replicates as usize;
    let results: Vec<(f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, PURPOSE_POLICY, i as u64);
            let rep = run_replicate(spec, policy_a, policy_b, false, &mut rng);
            (rep.payoff, rep.switch_time, rep.stop_time)
        })
        .collect();
    let payoffs: Vec<f64> = results.iter().map(|r| r.0).collect();
    let switches: Vec<f64> = results.iter().map(|r| r.1).collect();
    let stops: Vec<f64> = results.iter().map(|r| r.2).collect();
    let (mc_mean, mc_stderr) = mean_stderr(&payoffs);

    // Baseline: switch at 0, stop at the deadline (accrue stage b on [0, t0]).
    let base_end: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, PURPOSE_BASELINE, i as u64);
            let traj = simulate_stream(
                &spec.stage_b.holding,
                &spec.stage_b.reward,
                spec.horizon,
                3,
                &mut rng,
            );
            spec.w_b(0.0, 0.0, traj.mass_at(spec.horizon), spec.horizon)
        })
        .collect();
    let (b1_mean, b1_se) = mean_stderr(&base_end);
    // Baseline: switch at 0, stop at 0 (deterministic).
    let b0 = spec.w_b(0.0, 0.0, 0.0, 0.0);

    SimulationReport {
        instance: instance.to_string(),
        gamma00,
        mc_mean,
        mc_stderr,
        replicates,
        seed,
        switch_times: TimeHistogram::build(&switches, spec.horizon, 10),
        stop_times: TimeHistogram::build(&stops, spec.horizon, 10),
        baseline_switch0_stop_horizon: Estimate {
            mean: b1_mean,
            stderr: b1_se,
        },
        baseline_switch0_stop0: Estimate { mean: b0, stderr: 0.0 },
    }
}

/// Wires a solved pair of tables into policies and runs the validation.
pub fn validate_solution(
    spec: &ProblemSpec,
    y_b: crate::table::ValueTable3,
    first: &FirstStageSolution,
    replicates: u64,
    seed: u64,
    instance: &str,
) -> Result<SimulationReport> {
    let policy_a = StoppingPolicy::new(first.y_a.clone())?;
    let policy_b = StoppingPolicy::new(y_b)?;
    Ok(run_policy_simulation(
        spec,
        &policy_a,
        &policy_b,
        first.gamma00,
        replicates,
        seed,
        instance,
    ))
}

/// Dumps the first `n` replicate trajectories of the policy run.
pub fn dump_trajectories(
    spec: &ProblemSpec,
    policy_a: &StoppingPolicy,
    policy_b: &StoppingPolicy,
    n: u64,
    seed: u64,
) -> Vec<Trajectory> {
    (0..n)
        .map(|i| {
            let mut rng = replicate_rng(seed, PURPOSE_POLICY, i);
            run_replicate(spec, policy_a, policy_b, true, &mut rng)
                .trajectory
                .expect("recording was requested")
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Game payoff evaluation
// ---------------------------------------------------------------------------

/// First-stop rule of one player, applied to their own-rod event stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GameRule {
    /// Stop at a fixed time.
    At { t: f64 },
    /// Stop at the k-th own-rod catch (never stops if fewer arrive).
    AfterOwnCatches { k: usize },
    /// Stop at the first own-rod catch bringing own mass to `level`.
    OwnMassAtLeast { level: f64 },
}

impl GameRule {
    fn eval(&self, own_events: &[MarkedEvent]) -> f64 {
        match *self {
            GameRule::At { t } => t,
            GameRule::AfterOwnCatches { k } => {
                if k >= 1 && k <= own_events.len() {
                    own_events[k - 1].time
                } else {
                    f64::INFINITY
                }
            }
            GameRule::OwnMassAtLeast { level } => {
                let mut mass = 0.0;
                for e in own_events {
                    mass += e.reward;
                    if mass >= level {
                        return e.time;
                    }
                }
                f64::INFINITY
            }
        }
    }
}

/// The three stopping rules of a game evaluation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameRules {
    pub tau1: GameRule,
    pub tau2: GameRule,
    /// Leader deadline for the final segment (absolute time).
    pub sigma: GameRule,
}

/// Paired payoff report of a game evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameReport {
    pub player1: Estimate,
    pub player2: Estimate,
    pub replicates: u64,
    pub seed: u64,
    /// Equal-time merge ties broken by mark order across all replicates.
    pub ties_broken: u64,
}

/// Simulates the two-rod superposed process, applies the supplied first-stop
/// rules and leader deadline, and evaluates the payoff pair per replicate.
/// The deadline rule makes no optimality claim; it is caller data.
pub fn run_game_eval(
    spec: &ProblemSpec,
    game: &GameSpec,
    rules: &GameRules,
    replicates: u64,
    seed: u64,
) -> Result<GameReport> {
    let rod2 = spec
        .rod2
        .as_ref()
        .ok_or_else(|| Error::InvalidSpec("game evaluation needs rod2 configured".into()))?;
    let n = replicates as usize;
    let results: Vec<(f64, f64, u64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, PURPOSE_GAME, i as u64);
            let rod1_traj = simulate_stream(
                &spec.stage_a.holding,
                &spec.stage_a.reward,
                spec.horizon,
                1,
                &mut rng,
            );
            let rod2_traj =
                simulate_stream(&rod2.holding, &rod2.reward, spec.horizon, 2, &mut rng);
            let merged = superpose(&rod1_traj, &rod2_traj);
            let tau1 = rules.tau1.eval(&rod1_traj.events);
            let tau2 = rules.tau2.eval(&rod2_traj.events);
            let s = tau1.min(tau2);
            let sigma = rules.sigma.eval(&[]);
            // Post-switch stream from s up to the leader deadline.
            let full = if sigma > s && s <= spec.horizon {
                let span = (sigma.min(spec.horizon) - s).max(0.0);
                let mut post = simulate_stream(
                    &spec.stage_b.holding,
                    &spec.stage_b.reward,
                    span,
                    3,
                    &mut rng,
                );
                for e in &mut post.events {
                    e.time += s;
                }
                superpose(&merged, &post)
            } else {
                merged
            };
            let (z1, z2) = crate::model::game_payoffs(&full, tau1, tau2, sigma, game);
            (z1, z2, full.ties_broken as u64)
        })
        .collect();
    let p1: Vec<f64> = results.iter().map(|r| r.0).collect();
    let p2: Vec<f64> = results.iter().map(|r| r.1).collect();
    let (m1, s1) = mean_stderr(&p1);
    let (m2, s2) = mean_stderr(&p2);
    Ok(GameReport {
        player1: Estimate { mean: m1, stderr: s1 },
        player2: Estimate { mean: m2, stderr: s2 },
        replicates,
        seed,
        ties_broken: results.iter().map(|r| r.2).sum(),
    })
}

/// Best fixed-rule payoff pair on a hand-built trajectory; exposed for
/// direct identity checks against the random-field payoff.
pub fn eval_rules_on_trajectory(
    traj: &Trajectory,
    rules: &GameRules,
    game: &GameSpec,
) -> (Money, Money) {
    let tau1 = rules.tau1.eval(&filter_by_mark(traj, 1).events);
    let tau2 = rules.tau2.eval(&filter_by_mark(traj, 2).events);
    let sigma = rules.sigma.eval(&[]);
    crate::model::game_payoffs(traj, tau1, tau2, sigma, game)
}
