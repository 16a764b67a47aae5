//! Second-stage (post-switch) value function and stopping policy.
//!
//! After the method change at `s` with accumulated mass `m`, the remaining
//! problem depends only on the reduced state `(a, b, c)`: post-switch mass,
//! elapsed post-switch time, remaining horizon. The value surface is the
//! fixed point of the stage operator; the argmax delay surface induces the
//! stopping rule "wait `r*(state)` after each catch, stop unless the next
//! catch arrives first".

use crate::error::{Error, Result};
use crate::model::ProblemSpec;
use crate::solver::{solve_fixed_point, continuation_point, SolverOptions, StageOperator};
use crate::table::{Grid3, ValueTable3};
use crate::{Mass, Money, Time};

/// Continuation value of delaying up to `r` from state `(a, b, c)` against a
/// candidate value table.
pub fn continuation_value(
    delta: &ValueTable3,
    a: Mass,
    b: Time,
    c: Time,
    r: Time,
    spec: &ProblemSpec,
    opts: &SolverOptions,
) -> Result<Money> {
    let quad = spec.stage_b.reward.quadrature(opts.reward_nodes);
    continuation_point(
        &spec.stage_b,
        delta,
        None,
        a,
        b,
        c,
        r,
        opts.z_subintervals,
        &quad,
    )
}

/// One application of the second-stage operator on the table's own grid.
pub fn apply_operator(
    delta: &ValueTable3,
    spec: &ProblemSpec,
    opts: &SolverOptions,
) -> ValueTable3 {
    let op = StageOperator::new(
        &spec.stage_b,
        &delta.grid,
        opts.z_subintervals,
        opts.reward_nodes,
        None,
    );
    let (values, policy) = op.apply(&delta.values);
    let mut out = ValueTable3::zeros(delta.grid);
    out.values = values;
    out.policy = policy;
    out.meta.contraction_bound = spec.stage_b.holding.cdf(spec.horizon);
    out
}

/// `sweeps` applications of the operator starting from the zero table.
pub fn iterate(
    spec: &ProblemSpec,
    grid: &Grid3,
    sweeps: usize,
    opts: &SolverOptions,
) -> ValueTable3 {
    let op = StageOperator::new(
        &spec.stage_b,
        grid,
        opts.z_subintervals,
        opts.reward_nodes,
        None,
    );
    let mut table = ValueTable3::zeros(*grid);
    for _ in 0..sweeps {
        let (values, policy) = op.apply(&table.values);
        table.values = values;
        table.policy = policy;
    }
    table.meta.iterations = sweeps;
    table.meta.contraction_bound = spec.stage_b.holding.cdf(spec.horizon);
    table
}

/// Solves the second-stage fixed point on `grid` to the requested tolerance.
///
/// Iterates from zero, which makes the iterates the finite-catch values:
/// they increase pointwise and the residuals decay geometrically at the
/// contraction rate F(t0). When the stage cost is linear in time the value
/// does not depend on elapsed stage time and the b-axis is solved as a
/// single plane, then broadcast back onto the requested grid.
pub fn solve(spec: &ProblemSpec, grid: &Grid3, opts: &SolverOptions) -> Result<ValueTable3> {
    spec.validate()?;
    opts.validate()?;
    let q = spec.stage_b.holding.cdf(spec.horizon);
    let collapse = opts.collapse_linear_cost && spec.stage_b.cost.is_linear() && grid.b.n > 1;
    let work_grid = if collapse { grid.with_collapsed_b() } else { *grid };
    let op = StageOperator::new(
        &spec.stage_b,
        &work_grid,
        opts.z_subintervals,
        opts.reward_nodes,
        None,
    );
    let table = solve_fixed_point(&op, q, opts.tol, opts.max_sweeps)?;
    Ok(if collapse { table.expand_b(grid) } else { table })
}

/// Value of the whole expedition after switching at `s` with mass `m`, seen
/// from the post-switch state `(m_tilde, t)`: the settled payoff plus the
/// remaining second-stage surplus, or the penalty past the horizon.
pub fn post_switch_value(
    y_b: &ValueTable3,
    m: Mass,
    m_tilde: Mass,
    s: Time,
    t: Time,
    spec: &ProblemSpec,
) -> Money {
    debug_assert!(m_tilde >= m && s <= t);
    if t > spec.horizon {
        return -spec.penalty;
    }
    spec.w_b(m, s, m_tilde - m, t) + y_b.value_at(m_tilde - m, t - s, spec.horizon - t)
}

/// Optimal delay after a catch at state `(a, b, c)`.
pub fn optimal_delay(y_b: &ValueTable3, a: Mass, b: Time, c: Time) -> Time {
    y_b.policy_at(a, b, c)
}

/// Threshold rule derived from a solved table: after the n-th post-switch
/// catch, wait `delay(state)` and stop unless the next catch arrives first.
#[derive(Debug, Clone)]
pub struct StoppingPolicy {
    table: ValueTable3,
}

impl StoppingPolicy {
    pub fn new(table: ValueTable3) -> Result<Self> {
        if table.policy.len() != table.grid.len() {
            return Err(Error::InvalidSpec("policy table has wrong length".into()));
        }
        Ok(StoppingPolicy { table })
    }

    pub fn table(&self) -> &ValueTable3 {
        &self.table
    }

    /// Delay to wait from state `(a, b, c)`; never exceeds the remaining
    /// horizon `c`, so induced stopping times stay inside the ticket.
    pub fn delay(&self, a: Mass, b: Time, c: Time) -> Time {
        self.table.policy_at(a, b, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{HoldingDist, RewardDist};
    use crate::model::{CostFn, StageSpec, UtilityFn};
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// Saturating-utility reference instance: utility gain crosses the
    /// marginal cost at mass ln 10.
    fn saturating_spec() -> ProblemSpec {
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

    /// Linear instance: net stage-b drift alpha * mu - kappa = 1.9.
    fn linear_spec(rate: f64, kappa: f64) -> ProblemSpec {
        let stage = StageSpec {
            utility: UtilityFn::Linear { slope: 1.0, cap: None },
            cost: CostFn::Linear { rate: kappa },
            holding: HoldingDist::Exponential { rate },
            reward: RewardDist::Exponential { rate: 1.0 },
        };
        ProblemSpec {
            horizon: 1.0,
            penalty: 1.0,
            a_max: 8.0,
            stage_a: stage.clone(),
            stage_b: stage,
            rod2: None,
        }
    }

    fn small_grid(spec: &ProblemSpec, n: usize) -> Grid3 {
        Grid3::new(spec.a_max, spec.horizon, n, n, n).unwrap()
    }

    /// Closed-form second-stage integral for a constant net drift:
    /// integral of F̄(z) (alpha * gain - kappa) dz = net * (1 - e^{-alpha r}) / alpha.
    fn constant_drift_oracle(alpha: f64, net: f64, r: f64) -> f64 {
        net * (1.0 - (-alpha * r).exp()) / alpha
    }

    #[test]
    fn continuation_value_zero_delay_is_zero() {
        let spec = linear_spec(2.0, 0.1);
        let opts = SolverOptions::default();
        let zero = ValueTable3::zeros(small_grid(&spec, 8));
        let got = continuation_value(&zero, 0.5, 0.2, 0.6, 0.0, &spec, &opts).unwrap();
        assert_eq!(got, 0.0);
    }

    #[test]
    fn continuation_value_matches_antiderivative_oracle() {
        // Zero table, Exp(2) holdings, unit gain, kappa = 0.1: the integrand
        // is the constant net drift 1.9 times the survival.
        let spec = linear_spec(2.0, 0.1);
        let opts = SolverOptions::default();
        let zero = ValueTable3::zeros(small_grid(&spec, 8));
        // The reward quadrature truncates a 1e-8 tail, which biases the unit
        // gain by ~2e-7; the z-integration itself is accurate to ~1e-12.
        let got = continuation_value(&zero, 0.0, 0.0, 1.0, 1.0, &spec, &opts).unwrap();
        let oracle = constant_drift_oracle(2.0, 1.9, 1.0);
        assert_abs_diff_eq!(got, oracle, epsilon = 1e-6);
        assert_abs_diff_eq!(got, 0.95 * (1.0 - (-2.0f64).exp()), epsilon = 1e-6);
    }

    #[test]
    fn continuation_value_pure_cost_is_negative_oracle() {
        // Constant utility kills the gain term; only the cost drag remains.
        let mut spec = linear_spec(2.0, 0.1);
        spec.stage_b.utility = UtilityFn::Constant { value: 0.0 };
        let opts = SolverOptions::default();
        let zero = ValueTable3::zeros(small_grid(&spec, 8));
        let got = continuation_value(&zero, 0.0, 0.0, 1.0, 1.0, &spec, &opts).unwrap();
        let oracle = constant_drift_oracle(2.0, -0.1, 1.0);
        assert_abs_diff_eq!(got, oracle, epsilon = 1e-9);
        assert_abs_diff_eq!(got, -0.0432, epsilon = 1e-4);
    }

    #[test]
    fn continuation_value_rejects_infeasible_delay() {
        let spec = linear_spec(2.0, 0.1);
        let opts = SolverOptions::default();
        let zero = ValueTable3::zeros(small_grid(&spec, 8));
        assert!(continuation_value(&zero, 0.0, 0.0, 0.5, 0.6, &spec, &opts).is_err());
        assert!(continuation_value(&zero, 0.0, 0.0, 0.5, -0.1, &spec, &opts).is_err());
    }

    #[test]
    fn apply_operator_positive_drift_runs_to_the_deadline() {
        let spec = linear_spec(2.0, 0.1);
        let opts = SolverOptions::default();
        let grid = small_grid(&spec, 9);
        let out = apply_operator(&ValueTable3::zeros(grid), &spec, &opts);
        for ia in 0..grid.a.n {
            for ib in 0..grid.b.n {
                for ic in 0..grid.c.n {
                    let c = grid.c.at(ic);
                    let i = grid.index(ia, ib, ic);
                    let oracle = constant_drift_oracle(2.0, 1.9, c);
                    assert_abs_diff_eq!(out.values[i], oracle, epsilon = 1e-6);
                    assert_eq!(out.policy[i], c, "delay must hit the deadline");
                }
            }
        }
    }

    #[test]
    fn apply_operator_negative_drift_stops_at_once() {
        let mut spec = linear_spec(2.0, 0.1);
        spec.stage_b.utility = UtilityFn::Constant { value: 0.0 };
        let opts = SolverOptions::default();
        let grid = small_grid(&spec, 9);
        let out = apply_operator(&ValueTable3::zeros(grid), &spec, &opts);
        assert!(out.values.iter().all(|&v| v == 0.0));
        assert!(out.policy.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn operator_contracts_random_tables() {
        let spec = saturating_spec();
        let opts = SolverOptions::default();
        let grid = small_grid(&spec, 12);
        let q = spec.stage_b.holding.cdf(spec.horizon);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let mut d1 = ValueTable3::zeros(grid);
            let mut d2 = ValueTable3::zeros(grid);
            for v in d1.values.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            for v in d2.values.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let o1 = apply_operator(&d1, &spec, &opts);
            let o2 = apply_operator(&d2, &spec, &opts);
            assert!(o1.sup_diff(&o2) <= q * d1.sup_diff(&d2) + 1e-9);
        }
    }

    #[test]
    fn solve_linear_case_reaches_closed_form_fixed_point() {
        // Fixed point of the linear instance: y(a, b, c) = (alpha mu - kappa) c.
        let spec = linear_spec(2.0, 0.1);
        let opts = SolverOptions::default();
        let grid = small_grid(&spec, 17);
        let y = solve(&spec, &grid, &opts).unwrap();
        for ia in 0..grid.a.n {
            for ib in 0..grid.b.n {
                for ic in 0..grid.c.n {
                    let c = grid.c.at(ic);
                    let i = grid.index(ia, ib, ic);
                    assert!(
                        (y.values[i] - 1.9 * c).abs() <= 1e-3,
                        "node ({ia},{ib},{ic}): {} vs {}",
                        y.values[i],
                        1.9 * c
                    );
                    assert_eq!(y.policy[i], c);
                }
            }
        }
        assert!(y.meta.monotone);
        assert!(y.meta.collapsed_b);
    }

    #[test]
    fn solve_boundary_plane_is_exactly_zero() {
        let spec = saturating_spec();
        let opts = SolverOptions::default();
        let grid = small_grid(&spec, 17);
        let y = solve(&spec, &grid, &opts).unwrap();
        for ia in 0..grid.a.n {
            for ib in 0..grid.b.n {
                assert_eq!(y.values[grid.index(ia, ib, 0)], 0.0);
                assert_eq!(y.policy[grid.index(ia, ib, 0)], 0.0);
            }
        }
    }

    #[test]
    fn solve_saturating_value_vanishes_above_threshold_mass() {
        // Above mass ln 10 the integrand is strictly negative, so the fixed
        // point is identically zero there and the rule stops at once.
        let spec = saturating_spec();
        let opts = SolverOptions::default();
        let grid = small_grid(&spec, 33);
        let y = solve(&spec, &grid, &opts).unwrap();
        let threshold = 10.0_f64.ln();
        for ia in 0..grid.a.n {
            if grid.a.at(ia) < 2.31 {
                continue;
            }
            assert!(grid.a.at(ia) > threshold);
            for ib in 0..grid.b.n {
                for ic in 0..grid.c.n {
                    let i = grid.index(ia, ib, ic);
                    assert_eq!(y.values[i], 0.0);
                    assert_eq!(y.policy[i], 0.0);
                }
            }
        }
        // Below the threshold the surplus is positive when time remains.
        let i = grid.index(0, 0, grid.c.n - 1);
        assert!(y.values[i] > 0.0);
    }

    #[test]
    fn solve_collapsed_b_axis_matches_full_grid() {
        let spec = saturating_spec();
        let grid = small_grid(&spec, 13);
        let mut opts = SolverOptions::default();
        opts.collapse_linear_cost = true;
        let fast = solve(&spec, &grid, &opts).unwrap();
        opts.collapse_linear_cost = false;
        let full = solve(&spec, &grid, &opts).unwrap();
        assert!(fast.meta.collapsed_b && !full.meta.collapsed_b);
        assert!(fast.sup_diff(&full) <= 1e-10);
    }

    #[test]
    fn post_switch_value_branches() {
        let spec = linear_spec(2.0, 0.1);
        let opts = SolverOptions::default();
        let grid = small_grid(&spec, 17);
        let y = solve(&spec, &grid, &opts).unwrap();
        // Past the horizon: the penalty.
        assert_eq!(post_switch_value(&y, 1.0, 2.0, 0.5, 1.2, &spec), -1.0);
        // At the horizon: no surplus remains.
        let at_t0 = post_switch_value(&y, 1.0, 2.5, 0.5, 1.0, &spec);
        assert_abs_diff_eq!(at_t0, spec.w_b(1.0, 0.5, 1.5, 1.0), epsilon = 1e-12);
        // Inside: settled payoff plus the linear-case surplus.
        let got = post_switch_value(&y, 1.0, 1.0, 0.5, 0.5, &spec);
        let expected = spec.w_b(1.0, 0.5, 0.0, 0.5) + 1.9 * 0.5;
        assert_abs_diff_eq!(got, expected, epsilon = 2e-3);
    }

    #[test]
    fn optimal_delay_examples() {
        let spec = saturating_spec();
        let opts = SolverOptions::default();
        let grid = small_grid(&spec, 33);
        let y = solve(&spec, &grid, &opts).unwrap();
        // No time left: no delay.
        assert_eq!(optimal_delay(&y, 0.7, 0.3, 0.0), 0.0);
        // Saturated mass: stop immediately.
        assert_eq!(optimal_delay(&y, 3.0, 0.0, 0.5), 0.0);
        // Linear instance: wait out the whole remaining horizon.
        let lin = linear_spec(2.0, 0.1);
        let ylin = solve(&lin, &small_grid(&lin, 17), &opts).unwrap();
        assert_abs_diff_eq!(optimal_delay(&ylin, 0.3, 0.1, 0.7), 0.7, epsilon = 1e-12);
    }

    #[test]
    fn iterates_increase_pointwise_and_residuals_contract() {
        let spec = saturating_spec();
        let opts = SolverOptions::default();
        let grid = small_grid(&spec, 17);
        let y = solve(&spec, &grid, &opts).unwrap();
        assert!(y.meta.monotone, "finite-catch values must be nondecreasing");
        let q = y.meta.contraction_bound;
        for w in y.meta.residual_history.windows(2) {
            assert!(w[1] <= (q + 0.02) * w[0] + 1e-15);
        }
        assert!(y.meta.contraction_estimate <= q + 0.02);
        // Policy feasibility and the sup-norm bound everywhere: the surplus
        // cannot exceed utility bound + cost bound + penalty.
        let sup = spec.stage_b.utility.bound().unwrap()
            + spec.stage_b.cost.eval(spec.horizon)
            + spec.penalty;
        for ia in 0..grid.a.n {
            for ib in 0..grid.b.n {
                for ic in 0..grid.c.n {
                    let i = grid.index(ia, ib, ic);
                    let c = grid.c.at(ic);
                    assert!((0.0..=c).contains(&y.policy[i]));
                    assert!(y.values[i] >= 0.0 && y.values[i] <= sup);
                }
            }
        }
    }

    #[test]
    fn stopping_policy_never_exceeds_remaining_horizon() {
        let spec = saturating_spec();
        let opts = SolverOptions::default();
        let y = solve(&spec, &small_grid(&spec, 17), &opts).unwrap();
        let policy = StoppingPolicy::new(y).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..1000 {
            let a: f64 = rng.gen_range(0.0..6.0);
            let b: f64 = rng.gen_range(0.0..1.0);
            let c: f64 = rng.gen_range(0.0..1.0);
            let d = policy.delay(a, b, c);
            assert!((0.0..=c).contains(&d));
        }
    }
}
