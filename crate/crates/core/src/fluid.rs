//! Deterministic fluid paths `z(t) = z(0) + theta t + R y(t)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lcp::SkorokhodProjector;
use crate::linalg::l1_norm;
use crate::model::{PathGrid, StateVec};

const RESID_TOL: f64 = 1e-9;
const SIGN_TOL: f64 = 1e-12;

/// `y(t) = u t`, `z(t) = z0 + v t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffinePath {
    pub z0: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl AffinePath {
    pub fn z_at(&self, t: f64) -> Vec<f64> {
        self.z0
            .iter()
            .zip(&self.v)
            .map(|(a, b)| a + b * t)
            .collect()
    }

    /// Samples the path on `t_i = i h`, `i = 0..=round(T/h)`, as a noiseless grid.
    pub fn sample(&self, h: f64, horizon: f64) -> PathGrid {
        let d = self.z0.len();
        let steps = (horizon / h).round() as usize;
        let mut g = PathGrid::with_capacity(h, d, steps + 1);
        let zero = vec![0.0; d];
        for i in 0..=steps {
            let t = i as f64 * h;
            let y: Vec<f64> = self.u.iter().map(|u| u * t).collect();
            g.push(t, &self.z_at(t), &y, &zero);
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathCheck {
    pub valid: bool,
    pub violations: Vec<String>,
}

/// Checks an affine candidate against the fluid path equations: `v = theta + R u`,
/// the path stays in the orthant for all `t >= 0`, and `y_k` only grows while `z_k = 0`.
// negated comparisons reject NaN
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn verify_affine_path(path: &AffinePath, theta: &DVector<f64>, r: &DMatrix<f64>) -> PathCheck {
    let d = theta.len();
    let mut violations = Vec::new();
    if path.z0.len() != d || path.u.len() != d || path.v.len() != d || r.shape() != (d, d) {
        violations.push(format!("dimension mismatch (d = {d})"));
        return PathCheck {
            valid: false,
            violations,
        };
    }
    let pred = theta + r * DVector::from_column_slice(&path.u);
    for k in 0..d {
        let resid = (path.v[k] - pred[k]).abs();
        if !(resid <= RESID_TOL) {
            violations.push(format!(
                "rate equation: v[{k}] = {} but (theta + R u)[{k}] = {}",
                path.v[k], pred[k]
            ));
        }
        if !(path.u[k] >= -SIGN_TOL) {
            violations.push(format!("u[{k}] = {} is negative", path.u[k]));
        }
        if !(path.z0[k] >= -SIGN_TOL) {
            violations.push(format!("z0[{k}] = {} is outside the orthant", path.z0[k]));
        }
        if path.v[k] < -SIGN_TOL {
            violations.push(format!(
                "v[{k}] = {} drives z[{k}] negative at t = {}",
                path.v[k],
                path.z0[k].max(0.0) / -path.v[k]
            ));
        }
        if path.u[k] > SIGN_TOL && (path.z0[k] > SIGN_TOL || path.v[k] > SIGN_TOL) {
            violations.push(format!(
                "complementarity: y[{k}] increases while z[{k}] = {} + {} t is positive",
                path.z0[k], path.v[k]
            ));
        }
    }
    PathCheck {
        valid: violations.is_empty(),
        violations,
    }
}

/// Euler fluid integrator: `z_{i+1}` is the Skorokhod projection of `z_i + theta h`.
pub fn integrate(
    z0: &StateVec,
    theta: &DVector<f64>,
    r: &DMatrix<f64>,
    h: f64,
    horizon: f64,
) -> Result<PathGrid> {
    let d = theta.len();
    if z0.d() != d {
        return Err(Error::Dimension {
            expected: d,
            got: z0.d(),
        });
    }
    if !(h > 0.0 && horizon >= h) {
        return Err(Error::Invalid(format!(
            "need h > 0 and horizon >= h, got h = {h}, horizon = {horizon}"
        )));
    }
    let proj = SkorokhodProjector::new(r)?;
    let steps = (horizon / h).round() as usize;
    let mut grid = PathGrid::with_capacity(h, d, steps + 1);
    let mut z = z0.as_slice().to_vec();
    let mut y = vec![0.0; d];
    let zero = vec![0.0; d];
    let mut q = vec![0.0; d];
    let mut dy = vec![0.0; d];
    let mut znew = vec![0.0; d];
    grid.push(0.0, &z, &y, &zero);
    for i in 0..steps {
        for k in 0..d {
            q[k] = z[k] + theta[k] * h;
        }
        proj.project(&q, &mut dy, &mut znew)?;
        for k in 0..d {
            y[k] += dy[k];
        }
        z.copy_from_slice(&znew);
        grid.push((i + 1) as f64 * h, &z, &y, &zero);
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Attracted,
    Divergent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluidVerdict {
    pub verdict: Verdict,
    pub final_norm: f64,
    pub horizon: f64,
}

pub const DEFAULT_GROWTH_THRESHOLD: f64 = 1.5;

/// `1e-6 (1 + |z0|_1)`.
pub fn default_eps_origin(z0: &[f64]) -> f64 {
    1e-6 * (1.0 + l1_norm(z0))
}

/// Finite-horizon reading of "attracted to the origin" / "divergent".
///
/// Attracted when `|z(T)|_1 < eps_origin`. Divergent when `|z(T)|_1` exceeds
/// `growth_threshold * |z(T/2)|_1`, exceeds the initial scale `max(|z(0)|_1, eps_origin)`,
/// and grew over the last quarter of the horizon. Otherwise inconclusive.
pub fn attraction_verdict(grid: &PathGrid, eps_origin: f64, growth_threshold: f64) -> FluidVerdict {
    let n = grid.len();
    let last = n - 1;
    let at = |i: usize| l1_norm(grid.z_row(i));
    let end = at(last);
    let mid = at(last / 2);
    let three_q = at(3 * last / 4);
    let start = at(0);
    let verdict = if end < eps_origin {
        Verdict::Attracted
    } else if end > growth_threshold * mid && end > start.max(eps_origin) && end > three_q {
        Verdict::Divergent
    } else {
        Verdict::Inconclusive
    };
    FluidVerdict {
        verdict,
        final_norm: end,
        horizon: grid.times[last],
    }
}
