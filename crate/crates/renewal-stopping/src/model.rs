//! Problem specification, the marked renewal-reward process, and the payoff
//! functionals.
//!
//! An expedition runs on a fixed ticket `[0, t0]`. Phase one accrues catches
//! from stream 1 until the switch time `s`; phase two accrues catches from
//! stream 3 until the terminal stop `t`. Stopping after the horizon pays the
//! penalty `-C`. Payoffs are a utility of accumulated mass minus a running
//! time cost, per stage.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{HoldingDist, RewardDist};
use crate::error::{Error, Result};
use crate::{Mass, Money, Time};

// ---------------------------------------------------------------------------
// Utility and cost functions
// ---------------------------------------------------------------------------

/// Utility of accumulated catch mass. A small closed set; each member knows
/// its shape properties so closed-form policy rules can check their regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilityFn {
    /// slope * m, optionally capped at slope * cap.
    Linear {
        slope: f64,
        #[serde(default)]
        cap: Option<f64>,
    },
    /// 1 - e^{-rate * m}: increasing, concave, saturating at 1.
    ExpSaturating { rate: f64 },
    Constant { value: f64 },
}

impl UtilityFn {
    pub fn validate(&self) -> Result<()> {
        match *self {
            UtilityFn::Linear { slope, cap } => {
                if !(slope >= 0.0) || cap.is_some_and(|c| !(c > 0.0)) {
                    return Err(Error::InvalidParameters(
                        "linear utility needs slope >= 0 and cap > 0 when given".into(),
                    ));
                }
            }
            UtilityFn::ExpSaturating { rate } => {
                if !(rate > 0.0) {
                    return Err(Error::InvalidParameters(
                        "saturating utility needs rate > 0".into(),
                    ));
                }
            }
            UtilityFn::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::InvalidParameters("constant utility must be finite".into()));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, m: Mass) -> Money {
        match *self {
            UtilityFn::Linear { slope, cap } => slope * cap.map_or(m, |c| m.min(c)),
            UtilityFn::ExpSaturating { rate } => 1.0 - (-rate * m).exp(),
            UtilityFn::Constant { value } => value,
        }
    }

    /// Supremum over m >= 0, when finite.
    pub fn bound(&self) -> Option<Money> {
        match *self {
            UtilityFn::Linear { slope, cap } => cap.map(|c| slope * c),
            UtilityFn::ExpSaturating { .. } => Some(1.0),
            UtilityFn::Constant { value } => Some(value.abs()),
        }
    }

    pub fn is_nondecreasing(&self) -> bool {
        true // every member of the closed set is (weakly) nondecreasing
    }

    pub fn is_concave(&self) -> bool {
        true // linear, capped-linear, saturating and constant all qualify
    }

    pub fn is_convex(&self) -> bool {
        match *self {
            UtilityFn::Linear { cap, .. } => cap.is_none(),
            UtilityFn::ExpSaturating { .. } => false,
            UtilityFn::Constant { .. } => true,
        }
    }
}

/// Cumulative time cost of fishing one stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostFn {
    /// rate * t.
    Linear { rate: f64 },
    /// coef * t^exponent, exponent > 0.
    Power { coef: f64, exponent: f64 },
}

impl CostFn {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CostFn::Linear { rate } => {
                if !(rate >= 0.0) {
                    return Err(Error::InvalidParameters("cost rate must be >= 0".into()));
                }
            }
            CostFn::Power { coef, exponent } => {
                if !(coef >= 0.0 && exponent > 0.0) {
                    return Err(Error::InvalidParameters(
                        "power cost needs coef >= 0 and exponent > 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: Time) -> Money {
        match *self {
            CostFn::Linear { rate } => rate * t,
            CostFn::Power { coef, exponent } => coef * t.powf(exponent),
        }
    }

    /// c'(t). For power costs with exponent < 1 this diverges at t = 0; the
    /// sweep integrators only evaluate it at interior points.
    pub fn derivative(&self, t: Time) -> f64 {
        match *self {
            CostFn::Linear { rate } => rate,
            CostFn::Power { coef, exponent } => coef * exponent * t.powf(exponent - 1.0),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, CostFn::Linear { .. })
    }

    pub fn is_convex(&self) -> bool {
        match *self {
            CostFn::Linear { .. } => true,
            CostFn::Power { exponent, .. } => exponent >= 1.0,
        }
    }

    pub fn is_concave(&self) -> bool {
        match *self {
            CostFn::Linear { .. } => true,
            CostFn::Power { exponent, .. } => exponent <= 1.0,
        }
    }
}

// ---------------------------------------------------------------------------
// Problem specification
// ---------------------------------------------------------------------------

/// Payoff functions and event-stream laws of one expedition stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub utility: UtilityFn,
    pub cost: CostFn,
    pub holding: HoldingDist,
    pub reward: RewardDist,
}

impl StageSpec {
    pub fn validate(&self, label: &str) -> Result<()> {
        self.utility
            .validate()
            .map_err(|e| Error::InvalidSpec(format!("{label}.utility: {e}")))?;
        self.cost
            .validate()
            .map_err(|e| Error::InvalidSpec(format!("{label}.cost: {e}")))?;
        self.holding
            .validate()
            .map_err(|e| Error::InvalidSpec(format!("{label}.holding: {e}")))?;
        self.reward
            .validate()
            .map_err(|e| Error::InvalidSpec(format!("{label}.reward: {e}")))
    }
}

/// Second-rod stream laws, used only by the competitive simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RodSpec {
    pub holding: HoldingDist,
    pub reward: RewardDist,
}

fn default_a_max() -> f64 {
    8.0
}

/// Full instance: horizon, penalty, per-stage payoffs and stream laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    /// Ticket length t0 (> 0).
    pub horizon: Time,
    /// Post-horizon penalty C (>= 0); stopping after t0 pays -C.
    pub penalty: Money,
    /// Upper edge of the mass axis used by the grid solvers; values above it
    /// interpolate with a clamp.
    #[serde(default = "default_a_max")]
    pub a_max: Mass,
    pub stage_a: StageSpec,
    pub stage_b: StageSpec,
    /// Optional second pre-switch rod, for the game payoff evaluation only.
    #[serde(default)]
    pub rod2: Option<RodSpec>,
}

impl ProblemSpec {
    /// Checks all parameter constraints, including the fixed-point
    /// precondition F(t0) < 1 for both stage holding distributions.
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if !(self.penalty >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "penalty must be >= 0, got {}",
                self.penalty
            )));
        }
        if !(self.a_max > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "a_max must be positive, got {}",
                self.a_max
            )));
        }
        self.stage_a.validate("stage_a")?;
        self.stage_b.validate("stage_b")?;
        if let Some(rod) = &self.rod2 {
            rod.holding
                .validate()
                .map_err(|e| Error::InvalidSpec(format!("rod2.holding: {e}")))?;
            rod.reward
                .validate()
                .map_err(|e| Error::InvalidSpec(format!("rod2.reward: {e}")))?;
        }
        for (label, stage) in [("stage_a", &self.stage_a), ("stage_b", &self.stage_b)] {
            let q = stage.holding.cdf(self.horizon);
            if !(q < 1.0) {
                return Err(Error::InvalidSpec(format!(
                    "{label}.holding has F(t0) = {q}; the stage operator is only a \
                     contraction when F(t0) < 1"
                )));
            }
        }
        Ok(())
    }

    /// Net stage-one payoff when the expedition ends at t with mass m before
    /// any switch: g_a(m) - c_a(t).
    pub fn w_a(&self, m: Mass, t: Time) -> Money {
        self.stage_a.utility.eval(m) - self.stage_a.cost.eval(t)
    }

    /// Net payoff when switching at s with mass m and stopping at t >= s with
    /// post-switch mass `post`: w_a(m, s) + g_b(post) - c_b(t - s).
    pub fn w_b(&self, m: Mass, s: Time, post: Mass, t: Time) -> Money {
        self.w_a(m, s) + self.stage_b.utility.eval(post) - self.stage_b.cost.eval(t - s)
    }

    /// Total payoff of the expedition, as a total function of (s, t).
    ///
    /// `mass_at_min` is the accumulated mass at min(s, t); `post_mass` is the
    /// mass accumulated after the switch (ignored when t < s).
    pub fn expedition_payoff(
        &self,
        s: Time,
        t: Time,
        mass_at_min: Mass,
        post_mass: Mass,
    ) -> Money {
        if t > self.horizon {
            -self.penalty
        } else if t < s {
            self.w_a(mass_at_min, t)
        } else {
            self.w_b(mass_at_min, s, post_mass, t)
        }
    }

    /// Upper bound on |payoff| when every configured utility is bounded.
    pub fn payoff_bound(&self) -> Option<Money> {
        let ga = self.stage_a.utility.bound()?;
        let gb = self.stage_b.utility.bound()?;
        let ca = self.stage_a.cost.eval(self.horizon);
        let cb = self.stage_b.cost.eval(self.horizon);
        Some(ga + gb + ca + cb + self.penalty)
    }
}

// ---------------------------------------------------------------------------
// Marked events and trajectories
// ---------------------------------------------------------------------------

/// One catch: time, originating stream, and reward mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkedEvent {
    pub time: Time,
    pub mark: u8,
    pub reward: Mass,
}

/// Time-ordered list of marked events, optionally with the phase-switch time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub events: Vec<MarkedEvent>,
    #[serde(default)]
    pub switch_time: Option<Time>,
    /// Number of equal-time ties broken by mark order during superposition.
    #[serde(default)]
    pub ties_broken: usize,
}

impl Trajectory {
    /// Count of mark-i events up to and including time t.
    pub fn count_by(&self, mark: u8, t: Time) -> usize {
        self.events
            .iter()
            .filter(|e| e.mark == mark && e.time <= t)
            .count()
    }

    /// Accumulated mass of all events up to and including time t.
    pub fn mass_at(&self, t: Time) -> Mass {
        self.events
            .iter()
            .filter(|e| e.time <= t)
            .map(|e| e.reward)
            .sum()
    }

    /// Accumulated mass at time t when the stream structure changed at s:
    /// pre-switch events count up to min(s, t), post-switch (mark 3) events
    /// count up to t.
    pub fn mass_switched(&self, s: Time, t: Time) -> Mass {
        self.events
            .iter()
            .filter(|e| {
                if e.mark == 3 {
                    e.time <= t
                } else {
                    e.time <= s.min(t)
                }
            })
            .map(|e| e.reward)
            .sum()
    }

    /// 1-based index of the k-th event whose mark lies in `marks`
    /// (0 means "before any such event").
    pub fn group_index(&self, k: usize, marks: &[u8]) -> Option<usize> {
        if k == 0 {
            return Some(0);
        }
        self.events
            .iter()
            .enumerate()
            .filter(|(_, e)| marks.contains(&e.mark))
            .nth(k - 1)
            .map(|(i, _)| i + 1)
    }

    /// 1-based index of the first event after time t whose mark lies in
    /// `marks`.
    pub fn next_index_after(&self, t: Time, marks: &[u8]) -> Option<usize> {
        self.events
            .iter()
            .enumerate()
            .find(|(_, e)| e.time > t && marks.contains(&e.mark))
            .map(|(i, _)| i + 1)
    }

    /// Mark of the last event at or before t, if any.
    pub fn last_mark_at(&self, t: Time) -> Option<u8> {
        self.events.iter().rev().find(|e| e.time <= t).map(|e| e.mark)
    }

    /// Writes the trajectory as CSV with columns `n,time,mark,reward`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,time,mark,reward")?;
        for (n, e) in self.events.iter().enumerate() {
            writeln!(w, "{},{},{},{}", n + 1, e.time, e.mark, e.reward)?;
        }
        Ok(())
    }
}

/// Simulates one renewal-reward stream on [0, horizon].
///
/// Event times are partial sums of i.i.d. holding draws; generation stops at
/// the first time exceeding the horizon (that event is excluded).
pub fn simulate_stream<R: Rng + ?Sized>(
    holding: &HoldingDist,
    reward: &RewardDist,
    horizon: Time,
    mark: u8,
    rng: &mut R,
) -> Trajectory {
    let mut events = Vec::new();
    let mut t = 0.0;
    loop {
        t += holding.sample(rng);
        if t > horizon {
            break;
        }
        events.push(MarkedEvent {
            time: t,
            mark,
            reward: reward.sample(rng),
        });
    }
    Trajectory {
        events,
        switch_time: None,
        ties_broken: 0,
    }
}

/// Merges two trajectories with distinct marks into one time-ordered
/// trajectory. Equal-time ties (probability zero under continuous holding
/// laws, but possible in hand-built fixtures) are broken by mark order and
/// counted in `ties_broken`.
pub fn superpose(a: &Trajectory, b: &Trajectory) -> Trajectory {
    let mut events = Vec::with_capacity(a.events.len() + b.events.len());
    let (mut i, mut j) = (0, 0);
    let mut ties = 0;
    while i < a.events.len() && j < b.events.len() {
        let (ea, eb) = (a.events[i], b.events[j]);
        if ea.time < eb.time {
            events.push(ea);
            i += 1;
        } else if eb.time < ea.time {
            events.push(eb);
            j += 1;
        } else {
            ties += 1;
            if ea.mark <= eb.mark {
                events.push(ea);
                i += 1;
            } else {
                events.push(eb);
                j += 1;
            }
        }
    }
    events.extend_from_slice(&a.events[i..]);
    events.extend_from_slice(&b.events[j..]);
    Trajectory {
        events,
        switch_time: None,
        ties_broken: ties,
    }
}

/// Restricts a trajectory to the events of one mark.
pub fn filter_by_mark(traj: &Trajectory, mark: u8) -> Trajectory {
    Trajectory {
        events: traj.events.iter().copied().filter(|e| e.mark == mark).collect(),
        switch_time: traj.switch_time,
        ties_broken: 0,
    }
}

// ---------------------------------------------------------------------------
// Competitive payoffs
// ---------------------------------------------------------------------------

/// Per-player payoff configuration for the two-angler game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerPayoffSpec {
    /// Utility of the player's own-rod catch during the first phase.
    pub utility_a: UtilityFn,
    pub cost_a: CostFn,
    /// Post-switch utility, indexed by the technique (rod) the player holds
    /// after the change: `utility_b[0]` for rod 1, `utility_b[1]` for rod 2.
    pub utility_b: [UtilityFn; 2],
}

/// Two-player payoff structure. The leader (whoever forces the first stop)
/// takes the opponent's rod for the final segment; both pay the shared
/// second-phase time cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub players: [PlayerPayoffSpec; 2],
    pub cost_b: CostFn,
    pub penalty: Money,
    pub horizon: Time,
}

/// Masses entering the competitive payoff: per-rod accumulated masses at
/// min(s, t) and the post-switch accumulated mass (0 when t <= s).
#[derive(Debug, Clone, Copy, Default)]
pub struct CompetitiveState {
    pub rod_mass: [Mass; 2],
    pub post_mass: Mass,
}

/// Payoff pair `(leader, follower)` when player `leader` (1 or 2) forces the
/// method change at s and the expedition ends at t; `last_mark` is the rod of
/// the catch immediately preceding the first stop.
///
/// Branches: before the switch (t <= s <= t0) each player keeps the gross
/// utility of their own rod's catch; after the switch (s < t <= t0) each
/// player settles their first-phase net payoff plus the post-switch utility
/// of the technique they hold (the leader swaps rods); past the horizon both
/// pay the penalty.
pub fn competitive_payoffs(
    game: &GameSpec,
    leader: usize,
    last_mark: u8,
    s: Time,
    t: Time,
    state: &CompetitiveState,
) -> (Money, Money) {
    assert!(leader == 1 || leader == 2, "leader must be player 1 or 2");
    let _ = last_mark; // carried for the payoff signature; utilities here depend on own-rod mass
    let t0 = game.horizon;
    if t > t0 {
        return (-game.penalty, -game.penalty);
    }
    let li = leader - 1;
    let fi = 1 - li;
    if t <= s {
        let pay = |i: usize| game.players[i].utility_a.eval(state.rod_mass[i]);
        return (pay(li), pay(fi));
    }
    // s < t <= t0: leader ends up holding the opponent's rod, the follower
    // keeps the leader's original rod.
    let shared_cost = game.cost_b.eval(t - s);
    let pay = |i: usize, technique: usize| {
        let p = &game.players[i];
        p.utility_a.eval(state.rod_mass[i]) - p.cost_a.eval(s)
            + p.utility_b[technique].eval(state.post_mass)
            - shared_cost
    };
    (pay(li, fi), pay(fi, li))
}

/// Random-field payoff pair `(player 1, player 2)` for first-stop strategies
/// `tau1`, `tau2` and leader deadline `sigma`.
///
/// The earlier stopper leads; an exact tie makes player 1 the leader (ties
/// have probability zero under continuous holding laws).
pub fn game_payoffs(
    traj: &Trajectory,
    tau1: Time,
    tau2: Time,
    sigma: Time,
    game: &GameSpec,
) -> (Money, Money) {
    let s = tau1.min(tau2);
    let leader = if tau2 < tau1 { 2 } else { 1 };
    let last_mark = traj.last_mark_at(s).unwrap_or(1);
    let at = s.min(sigma);
    let state = CompetitiveState {
        rod_mass: [
            filter_by_mark(traj, 1).mass_at(at),
            filter_by_mark(traj, 2).mass_at(at),
        ],
        post_mass: if sigma > s {
            filter_by_mark(traj, 3).mass_at(sigma)
        } else {
            0.0
        },
    };
    let (z_leader, z_follower) = competitive_payoffs(game, leader, last_mark, s, sigma, &state);
    if leader == 1 {
        (z_leader, z_follower)
    } else {
        (z_follower, z_leader)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn saturating_spec() -> ProblemSpec {
        let stage = StageSpec {
            utility: UtilityFn::ExpSaturating { rate: 1.0 },
            cost: CostFn::Linear { rate: 0.1 },
            holding: HoldingDist::Exponential { rate: 2.0 },
            reward: RewardDist::Exponential { rate: 1.0 },
        };
        ProblemSpec {
            horizon: 1.0,
            penalty: 1.0,
            a_max: 3.2,
            stage_a: stage.clone(),
            stage_b: stage,
            rod2: None,
        }
    }

    #[test]
    fn validate_rejects_full_support_holding() {
        let mut spec = saturating_spec();
        spec.stage_b.holding = HoldingDist::Uniform { lo: 0.0, hi: 1.0 };
        // F(t0) = F(1) = 1: the fixed-point precondition fails.
        let err = spec.validate().unwrap_err();
        assert!(err.to_string().contains("F(t0)"));
        spec.stage_b.holding = HoldingDist::Uniform { lo: 0.0, hi: 2.0 };
        spec.validate().unwrap();
    }

    #[test]
    fn payoff_beyond_horizon_is_penalty() {
        let spec = saturating_spec();
        assert_eq!(spec.expedition_payoff(0.4, 1.1, 5.0, 3.0), -1.0);
    }

    #[test]
    fn payoff_zero_functions_is_zero() {
        let mut spec = saturating_spec();
        let zero_stage = StageSpec {
            utility: UtilityFn::Constant { value: 0.0 },
            cost: CostFn::Linear { rate: 0.0 },
            holding: HoldingDist::Exponential { rate: 2.0 },
            reward: RewardDist::Exponential { rate: 1.0 },
        };
        spec.stage_a = zero_stage.clone();
        spec.stage_b = zero_stage;
        assert_eq!(spec.expedition_payoff(0.3, 0.7, 2.0, 1.0), 0.0);
    }

    #[test]
    fn payoff_first_phase_formula() {
        // g_a(m) = 1 - e^{-m}, c_a(t) = 0.1 t, m = ln 2, t = 0.5 < s.
        let spec = saturating_spec();
        let got = spec.expedition_payoff(0.9, 0.5, 2f64.ln(), 0.0);
        assert_abs_diff_eq!(got, 0.45, epsilon = 1e-12);
    }

    #[test]
    fn payoff_at_switch_time_matches_stage_split() {
        let spec = saturating_spec();
        let (m, s) = (1.3, 0.6);
        let got = spec.expedition_payoff(s, s, m, 0.0);
        let expected = spec.w_a(m, s) + spec.stage_b.utility.eval(0.0)
            - spec.stage_b.cost.eval(0.0);
        assert_eq!(got, expected);
    }

    #[test]
    fn simulate_stream_zero_horizon_is_empty() {
        let spec = saturating_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let traj = simulate_stream(
            &spec.stage_a.holding,
            &spec.stage_a.reward,
            0.0,
            1,
            &mut rng,
        );
        assert!(traj.events.is_empty());
    }

    #[test]
    fn simulate_stream_times_strictly_increase() {
        let spec = saturating_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let traj = simulate_stream(
                &spec.stage_a.holding,
                &spec.stage_a.reward,
                1.0,
                1,
                &mut rng,
            );
            for w in traj.events.windows(2) {
                assert!(w[0].time < w[1].time);
            }
            assert!(traj.events.iter().all(|e| e.reward >= 0.0 && e.time <= 1.0));
        }
    }

    #[test]
    fn simulate_stream_event_count_matches_poisson_mean() {
        // Exp(2) holdings on [0,1]: the count is Poisson(2).
        let holding = HoldingDist::Exponential { rate: 2.0 };
        let reward = RewardDist::Exponential { rate: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let total: usize = (0..n)
            .map(|_| simulate_stream(&holding, &reward, 1.0, 1, &mut rng).events.len())
            .sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 2.0).abs() <= 0.03, "mean count {mean}");
    }

    #[test]
    fn superpose_with_empty_is_identity() {
        let holding = HoldingDist::Exponential { rate: 1.0 };
        let reward = RewardDist::Exponential { rate: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = simulate_stream(&holding, &reward, 1.0, 1, &mut rng);
        let empty = Trajectory::default();
        assert_eq!(superpose(&a, &empty).events, a.events);
        assert_eq!(superpose(&empty, &a).events, a.events);
    }

    #[test]
    fn superpose_filter_round_trip_is_exact() {
        let h1 = HoldingDist::Exponential { rate: 1.0 };
        let h2 = HoldingDist::Exponential { rate: 2.0 };
        let reward = RewardDist::Exponential { rate: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let a = simulate_stream(&h1, &reward, 1.0, 1, &mut rng);
            let b = simulate_stream(&h2, &reward, 1.0, 2, &mut rng);
            let merged = superpose(&a, &b);
            assert_eq!(filter_by_mark(&merged, 1).events, a.events);
            assert_eq!(filter_by_mark(&merged, 2).events, b.events);
            for w in merged.events.windows(2) {
                assert!(w[0].time <= w[1].time);
            }
        }
    }

    #[test]
    fn superpose_rate_sum() {
        // Exp(1) + Exp(2) streams on [0,1]: merged count has mean 3.
        let h1 = HoldingDist::Exponential { rate: 1.0 };
        let h2 = HoldingDist::Exponential { rate: 2.0 };
        let reward = RewardDist::Exponential { rate: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 100_000;
        let total: usize = (0..n)
            .map(|_| {
                let a = simulate_stream(&h1, &reward, 1.0, 1, &mut rng);
                let b = simulate_stream(&h2, &reward, 1.0, 2, &mut rng);
                superpose(&a, &b).events.len()
            })
            .sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 3.0).abs() <= 0.04, "merged mean count {mean}");
    }

    #[test]
    fn superpose_breaks_ties_by_mark_order() {
        let a = Trajectory {
            events: vec![MarkedEvent { time: 0.5, mark: 2, reward: 1.0 }],
            ..Default::default()
        };
        let b = Trajectory {
            events: vec![MarkedEvent { time: 0.5, mark: 1, reward: 2.0 }],
            ..Default::default()
        };
        let merged = superpose(&a, &b);
        assert_eq!(merged.ties_broken, 1);
        assert_eq!(merged.events[0].mark, 1);
        assert_eq!(merged.events[1].mark, 2);
    }

    #[test]
    fn wald_identity_for_accumulated_mass() {
        // E M_{t0} = rate * mean_reward * t0 for a compound Poisson stream.
        let holding = HoldingDist::Exponential { rate: 2.0 };
        let reward = RewardDist::Exponential { rate: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| simulate_stream(&holding, &reward, 1.0, 1, &mut rng).mass_at(1.0))
            .collect();
        let (mean, se) = crate::numeric::mean_stderr(&samples);
        assert!(
            (mean - 2.0).abs() <= 3.0 * se,
            "mass mean {mean} +- {se}"
        );
    }

    #[test]
    fn group_index_accessors() {
        let traj = Trajectory {
            events: vec![
                MarkedEvent { time: 0.1, mark: 1, reward: 1.0 },
                MarkedEvent { time: 0.2, mark: 2, reward: 1.0 },
                MarkedEvent { time: 0.3, mark: 1, reward: 1.0 },
            ],
            ..Default::default()
        };
        assert_eq!(traj.group_index(0, &[1]), Some(0));
        assert_eq!(traj.group_index(2, &[1]), Some(3));
        assert_eq!(traj.group_index(2, &[2]), None);
        assert_eq!(traj.next_index_after(0.15, &[1, 2]), Some(2));
        assert_eq!(traj.next_index_after(0.25, &[2]), None);
        assert_eq!(traj.count_by(1, 0.25), 1);
        assert_eq!(traj.count_by(1, 0.35), 2);
    }

    fn zero_game() -> GameSpec {
        let player = PlayerPayoffSpec {
            utility_a: UtilityFn::Constant { value: 0.0 },
            cost_a: CostFn::Linear { rate: 0.0 },
            utility_b: [
                UtilityFn::Constant { value: 0.0 },
                UtilityFn::Constant { value: 0.0 },
            ],
        };
        GameSpec {
            players: [player.clone(), player],
            cost_b: CostFn::Linear { rate: 0.0 },
            penalty: 1.0,
            horizon: 1.0,
        }
    }

    #[test]
    fn competitive_payoff_past_horizon() {
        let game = zero_game();
        let state = CompetitiveState::default();
        assert_eq!(
            competitive_payoffs(&game, 1, 1, 0.5, 1.5, &state),
            (-1.0, -1.0)
        );
    }

    #[test]
    fn competitive_payoff_zero_functions() {
        let game = zero_game();
        let state = CompetitiveState { rod_mass: [1.0, 2.0], post_mass: 3.0 };
        assert_eq!(competitive_payoffs(&game, 2, 1, 0.5, 0.4, &state), (0.0, 0.0));
        assert_eq!(competitive_payoffs(&game, 1, 2, 0.3, 0.9, &state), (0.0, 0.0));
    }

    #[test]
    fn competitive_payoff_leader_branch_linear_hand_computed() {
        // Leader 1 forces at s = 0.4, stop at t = 0.8, linear utilities.
        let mk = |slope: f64| UtilityFn::Linear { slope, cap: None };
        let game = GameSpec {
            players: [
                PlayerPayoffSpec {
                    utility_a: mk(1.0),
                    cost_a: CostFn::Linear { rate: 0.1 },
                    utility_b: [mk(2.0), mk(3.0)],
                },
                PlayerPayoffSpec {
                    utility_a: mk(0.5),
                    cost_a: CostFn::Linear { rate: 0.2 },
                    utility_b: [mk(4.0), mk(5.0)],
                },
            ],
            cost_b: CostFn::Linear { rate: 1.0 },
            penalty: 1.0,
            horizon: 1.0,
        };
        let state = CompetitiveState { rod_mass: [2.0, 3.0], post_mass: 0.5 };
        let (z1, z2) = competitive_payoffs(&game, 1, 2, 0.4, 0.8, &state);
        // Player 1 (leader) holds rod 2 after the change:
        // 1.0*2.0 - 0.1*0.4 + 3.0*0.5 - 1.0*0.4 = 2.0 - 0.04 + 1.5 - 0.4
        assert_abs_diff_eq!(z1, 3.06, epsilon = 1e-12);
        // Player 2 (follower) holds rod 1:
        // 0.5*3.0 - 0.2*0.4 + 4.0*0.5 - 0.4 = 1.5 - 0.08 + 2.0 - 0.4
        assert_abs_diff_eq!(z2, 3.02, epsilon = 1e-12);
    }

    #[test]
    fn game_payoffs_branch_selection() {
        let game = zero_game();
        let traj = Trajectory {
            events: vec![MarkedEvent { time: 0.2, mark: 2, reward: 1.0 }],
            ..Default::default()
        };
        // tau1 < tau2: player 1 leads; zero payoffs inside the horizon.
        assert_eq!(game_payoffs(&traj, 0.3, 0.6, 0.9, &game), (0.0, 0.0));
        // sigma beyond the horizon: both pay the penalty.
        assert_eq!(game_payoffs(&traj, 0.3, 0.6, 1.2, &game), (-1.0, -1.0));
        // Tie goes to player 1 and evaluates the same branch structure.
        assert_eq!(game_payoffs(&traj, 0.6, 0.6, 0.9, &game), (0.0, 0.0));
    }

    proptest! {
        #[test]
        fn payoff_is_bounded(s in 0.0f64..2.0, t in 0.0f64..2.0,
                             m in 0.0f64..50.0, post in 0.0f64..50.0) {
            let spec = saturating_spec();
            let bound = spec.payoff_bound().unwrap();
            let z = spec.expedition_payoff(s, t, m, post);
            prop_assert!(z.abs() <= bound + 1e-12);
        }
    }
}
