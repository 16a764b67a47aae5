//! Discretized value functions on a 3-D grid.
//!
//! A [`ValueTable3`] stores a value surface `y(a, b, c)` and its argmax
//! policy `r*(a, b, c)` over accumulated stage mass `a`, elapsed stage time
//! `b` and remaining horizon `c`. Queries interpolate trilinearly with
//! clamped extrapolation on every axis, so an interpolated value is always a
//! convex combination of node values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly spaced axis with `n` nodes on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        Axis { lo, hi, n }
    }

    pub fn step(&self) -> f64 {
        if self.n > 1 {
            (self.hi - self.lo) / (self.n - 1) as f64
        } else {
            0.0
        }
    }

    pub fn at(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi // exact upper endpoint, no rounding drift
        } else {
            self.lo + self.step() * i as f64
        }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.at(i))
    }

    /// Lower cell index and fractional offset for clamped interpolation.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        if self.n == 1 {
            return (0, 0.0);
        }
        let t = (x - self.lo) / self.step();
        if t <= 0.0 {
            return (0, 0.0);
        }
        let max_cell = self.n - 2;
        if t >= (self.n - 1) as f64 {
            return (max_cell, 1.0);
        }
        let i = (t.floor() as usize).min(max_cell);
        (i, t - i as f64)
    }
}

/// Axes of a solver grid: mass `a`, elapsed stage time `b`, remaining
/// horizon `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid3 {
    pub a: Axis,
    pub b: Axis,
    pub c: Axis,
}

impl Grid3 {
    /// Standard solver grid: `a` on `[0, a_max]`, `b` and `c` on `[0, t0]`.
    pub fn new(a_max: f64, t0: f64, na: usize, nb: usize, nc: usize) -> Result<Self> {
        if na < 2 || nb < 2 || nc < 2 {
            return Err(Error::InvalidSpec(format!(
                "grid needs at least 2 nodes per axis, got ({na}, {nb}, {nc})"
            )));
        }
        if !(a_max > 0.0 && t0 > 0.0) {
            return Err(Error::InvalidSpec(
                "grid needs positive a_max and horizon".into(),
            ));
        }
        Ok(Grid3 {
            a: Axis::new(0.0, a_max, na),
            b: Axis::new(0.0, t0, nb),
            c: Axis::new(0.0, t0, nc),
        })
    }

    /// Same grid with the `b`-axis collapsed to a single plane. Used
    /// internally when the stage cost is linear in time, which makes the
    /// value independent of elapsed stage time.
    pub(crate) fn with_collapsed_b(&self) -> Grid3 {
        Grid3 {
            a: self.a,
            b: Axis::new(self.b.lo, self.b.lo, 1),
            c: self.c,
        }
    }

    pub fn len(&self) -> usize {
        self.a.n * self.b.n * self.c.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ia: usize, ib: usize, ic: usize) -> usize {
        (ia * self.b.n + ib) * self.c.n + ic
    }
}

/// Convergence metadata of a fixed-point solve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveMeta {
    /// Number of operator sweeps performed.
    pub iterations: usize,
    /// Sup-norm of the last iterate difference.
    pub final_residual: f64,
    /// Largest observed residual ratio after the first sweep.
    pub contraction_estimate: f64,
    /// Analytic contraction bound F(t0) of the stage holding law.
    pub contraction_bound: f64,
    /// True when every sweep increased the table pointwise.
    pub monotone: bool,
    /// Whether the solve ran on a collapsed (single-plane) b-axis.
    pub collapsed_b: bool,
    /// Residual after each sweep.
    pub residual_history: Vec<f64>,
}

/// Value surface and argmax policy on a [`Grid3`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable3 {
    pub grid: Grid3,
    pub values: Vec<f64>,
    pub policy: Vec<f64>,
    pub meta: SolveMeta,
}

impl ValueTable3 {
    pub fn zeros(grid: Grid3) -> Self {
        let n = grid.len();
        ValueTable3 {
            grid,
            values: vec![0.0; n],
            policy: vec![0.0; n],
            meta: SolveMeta::default(),
        }
    }

    pub fn from_values(grid: Grid3, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len());
        let n = grid.len();
        ValueTable3 {
            grid,
            values,
            policy: vec![0.0; n],
            meta: SolveMeta::default(),
        }
    }

    #[inline]
    fn trilinear(&self, data: &[f64], a: f64, b: f64, c: f64) -> f64 {
        let (ia, fa) = self.grid.a.locate(a);
        let (ib, fb) = self.grid.b.locate(b);
        let (ic, fc) = self.grid.c.locate(c);
        let (na1, nb1, nc1) = (
            (self.grid.a.n > 1) as usize,
            (self.grid.b.n > 1) as usize,
            (self.grid.c.n > 1) as usize,
        );
        let mut acc = 0.0;
        for (da, wa) in [(0, 1.0 - fa), (na1, fa)] {
            if wa == 0.0 {
                continue;
            }
            for (db, wb) in [(0, 1.0 - fb), (nb1, fb)] {
                if wb == 0.0 {
                    continue;
                }
                for (dc, wc) in [(0, 1.0 - fc), (nc1, fc)] {
                    if wc == 0.0 {
                        continue;
                    }
                    acc += wa * wb * wc * data[self.grid.index(ia + da, ib + db, ic + dc)];
                }
            }
        }
        acc
    }

    /// Interpolated value with clamped extrapolation.
    pub fn value_at(&self, a: f64, b: f64, c: f64) -> f64 {
        self.trilinear(&self.values, a, b, c)
    }

    /// Interpolated policy, clamped to the feasible delay range [0, c].
    pub fn policy_at(&self, a: f64, b: f64, c: f64) -> f64 {
        self.trilinear(&self.policy, a, b, c).clamp(0.0, c.max(0.0))
    }

    /// Sup-norm distance between the value surfaces of two tables.
    pub fn sup_diff(&self, other: &ValueTable3) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Expands a b-collapsed table back onto a full grid.
    pub(crate) fn expand_b(&self, full: &Grid3) -> ValueTable3 {
        assert_eq!(self.grid.b.n, 1);
        let mut out = ValueTable3::zeros(*full);
        for ia in 0..full.a.n {
            for ib in 0..full.b.n {
                for ic in 0..full.c.n {
                    let src = self.grid.index(ia, 0, ic);
                    let dst = full.index(ia, ib, ic);
                    out.values[dst] = self.values[src];
                    out.policy[dst] = self.policy[src];
                }
            }
        }
        out.meta = self.meta.clone();
        out
    }

    /// Writes the table as CSV with columns `a,b,c,y,r_star`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "a,b,c,y,r_star")?;
        for ia in 0..self.grid.a.n {
            for ib in 0..self.grid.b.n {
                for ic in 0..self.grid.c.n {
                    let i = self.grid.index(ia, ib, ic);
                    writeln!(
                        w,
                        "{},{},{},{},{}",
                        self.grid.a.at(ia),
                        self.grid.b.at(ib),
                        self.grid.c.at(ic),
                        self.values[i],
                        self.policy[i]
                    )?;
                }
            }
        }
        Ok(())
    }

    /// JSON header describing the grid and the solve, with an optional
    /// overall value attached.
    pub fn header_json(&self, gamma00: Option<f64>) -> serde_json::Value {
        serde_json::json!({
            "grid": {
                "a": { "lo": self.grid.a.lo, "hi": self.grid.a.hi, "n": self.grid.a.n },
                "b": { "lo": self.grid.b.lo, "hi": self.grid.b.hi, "n": self.grid.b.n },
                "c": { "lo": self.grid.c.lo, "hi": self.grid.c.hi, "n": self.grid.c.n },
            },
            "iterations": self.meta.iterations,
            "residual": self.meta.final_residual,
            "contraction_estimate": self.meta.contraction_estimate,
            "contraction_bound": self.meta.contraction_bound,
            "monotone": self.meta.monotone,
            "collapsed_b": self.meta.collapsed_b,
            "gamma00": gamma00,
        })
    }
}
