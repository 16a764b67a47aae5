//! Shared machinery for the two stage operators.
//!
//! Both stages apply the same dynamic-programming operator shape: at a state
//! `(a, b, c)` the continuation value of delaying up to `r` is
//!
//! ```text
//! integral over z in [0, r] of
//!     F̄(z) * { α(z) * [Δ(a) + E δ(a + X, b + z, c - z)] - drag(b + z, c - z) } dz
//! ```
//!
//! where `Δ(a)` is the mean utility increment of one more catch, `δ` is the
//! previous value table, and `drag` collects the marginal time cost (plus,
//! for the first stage, the left-hand slope of the second-stage value). The
//! operator takes the max over `r` and keeps the smallest maximizer.
//!
//! The integral is accumulated over a uniform z-grid (two interior
//! Gauss-Legendre nodes per subinterval), so maximization and integration
//! share one cumulative sweep and the argmax is O(n_z) per node. Interior
//! nodes keep hazard and slope evaluations away from the endpoints, and the
//! positive weights make one sweep a monotone, contracting map of the table:
//! the numerical operator inherits the F(t0) contraction bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::RewardQuad;
use crate::error::{Error, Result};
use crate::model::StageSpec;
use crate::numeric::GAUSS2_OFFSETS;
use crate::table::{Axis, Grid3, SolveMeta, ValueTable3};

// ---------------------------------------------------------------------------
// Options
// ---------------------------------------------------------------------------

/// Grid resolution requested for a solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridDims {
    pub na: usize,
    pub nb: usize,
    pub nc: usize,
}

impl Default for GridDims {
    fn default() -> Self {
        GridDims { na: 64, nb: 64, nc: 64 }
    }
}

fn default_tol() -> f64 {
    1e-8
}
fn default_max_sweeps() -> usize {
    200
}
fn default_z_subintervals() -> usize {
    64
}
fn default_reward_nodes() -> usize {
    32
}
fn default_true() -> bool {
    true
}

/// Numerical knobs of the fixed-point solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    #[serde(default)]
    pub grid: GridDims,
    /// Sup-norm accuracy of the returned fixed point.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
    /// Uniform subintervals of the cumulative z-integration per node.
    #[serde(default = "default_z_subintervals")]
    pub z_subintervals: usize,
    /// Node count of the reward quadrature.
    #[serde(default = "default_reward_nodes")]
    pub reward_nodes: usize,
    /// Collapse the b-axis to one plane when the stage cost is linear in
    /// time (the value is then independent of elapsed stage time).
    #[serde(default = "default_true")]
    pub collapse_linear_cost: bool,
    /// Smooth the left-hand slope of the second-stage value with a 3-point
    /// average before it enters the first-stage integrand.
    #[serde(default)]
    pub slope_smoothing: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            grid: GridDims::default(),
            tol: default_tol(),
            max_sweeps: default_max_sweeps(),
            z_subintervals: default_z_subintervals(),
            reward_nodes: default_reward_nodes(),
            collapse_linear_cost: default_true(),
            slope_smoothing: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidSpec("tol must be positive".into()));
        }
        if self.max_sweeps == 0 || self.z_subintervals == 0 || self.reward_nodes == 0 {
            return Err(Error::InvalidSpec(
                "max_sweeps, z_subintervals and reward_nodes must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn make_grid(&self, a_max: f64, t0: f64) -> Result<Grid3> {
        Grid3::new(a_max, t0, self.grid.na, self.grid.nb, self.grid.nc)
    }
}

// ---------------------------------------------------------------------------
// Stage operator
// ---------------------------------------------------------------------------

/// One stage operator frozen onto a grid: all distribution, cost and drag
/// evaluations are cached per node of the z-integration.
pub(crate) struct StageOperator {
    grid: Grid3,
    nsub: usize,
    /// Mean utility increment per a-node.
    delta_a: Vec<f64>,
    /// Reward quadrature (x_k, w_k).
    quad: RewardQuad,
    /// Subinterval width per c-node.
    h: Vec<f64>,
    /// z positions, density and survival values: `[ic][2 * nsub]`.
    z: Vec<f64>,
    f: Vec<f64>,
    fbar: Vec<f64>,
    /// Drag term c'(b + z) + slope(c - z): `[ib][ic][2 * nsub]`.
    drag: Vec<f64>,
}

impl StageOperator {
    pub fn new(
        stage: &StageSpec,
        grid: &Grid3,
        nsub: usize,
        reward_nodes: usize,
        slope: Option<&dyn Fn(f64) -> f64>,
    ) -> StageOperator {
        let quad = stage.reward.quadrature(reward_nodes);
        let delta_a: Vec<f64> = grid
            .a
            .values()
            .map(|a| quad.mean_increment(|m| stage.utility.eval(m), a))
            .collect();

        let row = 2 * nsub;
        let mut h = vec![0.0; grid.c.n];
        let mut z = vec![0.0; grid.c.n * row];
        let mut f = vec![0.0; grid.c.n * row];
        let mut fbar = vec![0.0; grid.c.n * row];
        for ic in 0..grid.c.n {
            let c = grid.c.at(ic);
            let hc = c / nsub as f64;
            h[ic] = hc;
            for l in 0..nsub {
                for (node, &off) in GAUSS2_OFFSETS.iter().enumerate() {
                    let zi = ic * row + 2 * l + node;
                    let zv = (l as f64 + off) * hc;
                    z[zi] = zv;
                    f[zi] = stage.holding.pdf(zv);
                    fbar[zi] = stage.holding.survival(zv);
                }
            }
        }

        let mut drag = vec![0.0; grid.b.n * grid.c.n * row];
        for ib in 0..grid.b.n {
            let b = grid.b.at(ib);
            for ic in 0..grid.c.n {
                let c = grid.c.at(ic);
                for k in 0..row {
                    let zv = z[ic * row + k];
                    let mut d = stage.cost.derivative(b + zv);
                    if let Some(sl) = slope {
                        d += sl(c - zv);
                    }
                    drag[(ib * grid.c.n + ic) * row + k] = d;
                }
            }
        }

        StageOperator {
            grid: *grid,
            nsub,
            delta_a,
            quad,
            h,
            z,
            f,
            fbar,
            drag,
        }
    }

    /// One application of the operator: new values and the smallest-argmax
    /// delay policy per node.
    pub fn apply(&self, prev: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let g = &self.grid;
        let plane = g.b.n * g.c.n;
        let mut values = vec![0.0; g.len()];
        let mut policy = vec![0.0; g.len()];
        let row = 2 * self.nsub;

        values
            .par_chunks_mut(plane)
            .zip(policy.par_chunks_mut(plane))
            .enumerate()
            .for_each(|(ia, (vslice, pslice))| {
                // Expected previous value after one more catch from mass a_i,
                // sampled on the (b, c) plane. Convex-combination arithmetic
                // keeps the application monotone and non-expanding in the
                // table values.
                let mut gplane = vec![0.0; plane];
                let a_i = g.a.at(ia);
                for (&x, &w) in self.quad.nodes.iter().zip(&self.quad.weights) {
                    let (i0, fa) = g.a.locate(a_i + x);
                    let i1 = i0 + (g.a.n > 1) as usize;
                    let base0 = i0 * plane;
                    let base1 = i1 * plane;
                    for p in 0..plane {
                        gplane[p] += w * ((1.0 - fa) * prev[base0 + p] + fa * prev[base1 + p]);
                    }
                }

                for ib in 0..g.b.n {
                    for ic in 0..g.c.n {
                        let c_k = g.c.at(ic);
                        let p = ib * g.c.n + ic;
                        if c_k <= 0.0 {
                            vslice[p] = 0.0;
                            pslice[p] = 0.0;
                            continue;
                        }
                        let hc = self.h[ic];
                        let b_j = g.b.at(ib);
                        let zrow = ic * row;
                        let drow = (ib * g.c.n + ic) * row;
                        let delta = self.delta_a[ia];

                        let mut best = 0.0_f64;
                        let mut best_l = 0usize;
                        let mut cum = 0.0_f64;
                        for l in 0..self.nsub {
                            let mut inc = 0.0;
                            for node in 0..2 {
                                let k = zrow + 2 * l + node;
                                let e =
                                    bilerp(&gplane, &g.b, &g.c, b_j + self.z[k], c_k - self.z[k]);
                                inc += self.f[k] * (delta + e)
                                    - self.fbar[k] * self.drag[drow + 2 * l + node];
                            }
                            cum += 0.5 * hc * inc;
                            if cum > best {
                                best = cum;
                                best_l = l + 1;
                            }
                        }
                        vslice[p] = best;
                        pslice[p] = if best_l == self.nsub {
                            c_k
                        } else {
                            best_l as f64 * hc
                        };
                    }
                }
            });
        (values, policy)
    }
}

/// Bilinear interpolation on a (b, c) plane with clamped extrapolation,
/// written as convex combinations.
#[inline]
fn bilerp(plane: &[f64], baxis: &Axis, caxis: &Axis, b: f64, c: f64) -> f64 {
    let (ib, fb) = baxis.locate(b);
    let (ic, fc) = caxis.locate(c);
    let nc = caxis.n;
    let db = (baxis.n > 1) as usize;
    let dc = (caxis.n > 1) as usize;
    let v00 = plane[ib * nc + ic];
    let v01 = plane[ib * nc + ic + dc];
    let v10 = plane[(ib + db) * nc + ic];
    let v11 = plane[(ib + db) * nc + ic + dc];
    let v0 = (1.0 - fc) * v00 + fc * v01;
    let v1 = (1.0 - fc) * v10 + fc * v11;
    (1.0 - fb) * v0 + fb * v1
}

/// Point evaluation of the continuation integral at one state and delay.
pub(crate) fn continuation_point(
    stage: &StageSpec,
    delta: &ValueTable3,
    slope: Option<&dyn Fn(f64) -> f64>,
    a: f64,
    b: f64,
    c: f64,
    r: f64,
    nsub: usize,
    quad: &RewardQuad,
) -> Result<f64> {
    if !(0.0..=c).contains(&r) {
        return Err(Error::Domain(format!(
            "delay r = {r} outside the feasible range [0, {c}]"
        )));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let gain = quad.mean_increment(|m| stage.utility.eval(m), a);
    let h = r / nsub as f64;
    let mut total = 0.0;
    for l in 0..nsub {
        for &off in &GAUSS2_OFFSETS {
            let z = (l as f64 + off) * h;
            let e = quad.expect(|x| delta.value_at(a + x, b + z, c - z));
            let mut d = stage.cost.derivative(b + z);
            if let Some(sl) = slope {
                d += sl(c - z);
            }
            total += 0.5
                * h
                * (stage.holding.pdf(z) * (gain + e) - stage.holding.survival(z) * d);
        }
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Fixed-point iteration
// ---------------------------------------------------------------------------

/// Iterates `y <- op(y)` from zero until the sup-norm step is below
/// `tol * (1 - q) / q`, which pins the distance to the fixed point below
/// `tol` for a q-contraction.
pub(crate) fn solve_fixed_point(
    op: &StageOperator,
    q: f64,
    tol: f64,
    max_sweeps: usize,
) -> Result<ValueTable3> {
    let threshold = if q > 1e-9 { tol * (1.0 - q) / q } else { tol };
    let mut values = vec![0.0; op.grid.len()];
    let mut policy = vec![0.0; op.grid.len()];
    let mut history = Vec::new();
    let mut monotone = true;
    let mut converged = false;

    for _ in 0..max_sweeps {
        let (next, next_policy) = op.apply(&values);
        let mut residual = 0.0_f64;
        for (new, old) in next.iter().zip(&values) {
            let d = new - old;
            if d < 0.0 {
                monotone = false;
            }
            residual = residual.max(d.abs());
        }
        history.push(residual);
        values = next;
        policy = next_policy;
        if residual <= threshold {
            converged = true;
            break;
        }
    }

    if !converged {
        return Err(Error::NonConvergence {
            sweeps: history.len(),
            last_residual: history.last().copied().unwrap_or(f64::NAN),
            residuals: history,
        });
    }

    let mut estimate = 0.0_f64;
    for w in history.windows(2) {
        if w[0] > 0.0 {
            estimate = estimate.max(w[1] / w[0]);
        }
    }

    let meta = SolveMeta {
        iterations: history.len(),
        final_residual: history.last().copied().unwrap_or(0.0),
        contraction_estimate: estimate,
        contraction_bound: q,
        monotone,
        collapsed_b: op.grid.b.n == 1,
        residual_history: history,
    };
    Ok(ValueTable3 {
        grid: op.grid,
        values,
        policy,
        meta,
    })
}
