//! Linear complementarity `u, v >= 0`, `v = theta + R u`, `u . v = 0`.
//!
//! [`solve_all`] enumerates every support of `u` and returns all solutions,
//! which is what the linear fluid path analysis needs. [`SkorokhodProjector`]
//! solves the one-step problem `z = q + R dy` used by the fluid and SDE
//! integrators, choosing the smallest feasible support.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, MAX_ENUM_DIM};

pub const FEAS_TOL: f64 = 1e-9;
pub const COMPL_TOL: f64 = 1e-12;
pub const DEDUP_TOL: f64 = 1e-8;
/// A component counts as positive above this.
pub const POS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Divergent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    Degenerate,
    Nondegenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LcpSolution {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub support_u: Vec<usize>,
    pub support_v: Vec<usize>,
    pub stability: Stability,
    pub degeneracy: Degeneracy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LcpReport {
    pub solutions: Vec<LcpSolution>,
    /// Supports skipped because `R_{aa}` is singular.
    pub singular_supports: Vec<Vec<usize>>,
}

fn positive_support(x: &[f64]) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter(|(_, &v)| v > POS_TOL)
        .map(|(i, _)| i)
        .collect()
}

/// Labels a solution: stable iff `v = 0`; nondegenerate iff `u` and `v`
/// together have exactly `d` positive components.
pub fn classify(u: &[f64], v: &[f64], d: usize) -> (Stability, Degeneracy) {
    let stability = if v.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x)) <= POS_TOL {
        Stability::Stable
    } else {
        Stability::Divergent
    };
    let positives = positive_support(u).len() + positive_support(v).len();
    let degeneracy = if positives == d {
        Degeneracy::Nondegenerate
    } else {
        Degeneracy::Degenerate
    };
    (stability, degeneracy)
}

impl LcpSolution {
    fn from_pair(u: Vec<f64>, v: Vec<f64>) -> Self {
        let (stability, degeneracy) = classify(&u, &v, u.len());
        Self {
            support_u: positive_support(&u),
            support_v: positive_support(&v),
            u,
            v,
            stability,
            degeneracy,
        }
    }
}

/// Every solution of the LCP, by enumeration of the support of `u`.
///
/// For each `a` the system `R_aa u_a = -theta_a` is solved; the pair is kept
/// when `u, v >= -1e-9` and `v_a <= 1e-9`. Solutions within `1e-8` (sup norm)
/// are merged and the list is ordered lexicographically by support.
pub fn solve_all(theta: &DVector<f64>, r: &DMatrix<f64>) -> Result<LcpReport> {
    let d = theta.len();
    if r.shape() != (d, d) {
        return Err(Error::Dimension {
            expected: d,
            got: r.nrows(),
        });
    }
    if d > MAX_ENUM_DIM {
        return Err(Error::Capability(format!(
            "support enumeration limited to d <= {MAX_ENUM_DIM}, got {d}"
        )));
    }
    let mut found: Vec<(Vec<usize>, Vec<f64>, Vec<f64>)> = Vec::new();
    let mut singular = Vec::new();
    for alpha in linalg::subsets_by_size(d) {
        let mut u = vec![0.0; d];
        if !alpha.is_empty() {
            let sub = linalg::principal_submatrix(r, &alpha);
            let rhs = DVector::from_iterator(alpha.len(), alpha.iter().map(|&i| -theta[i]));
            match linalg::solve(&sub, &rhs) {
                Some(x) => {
                    for (k, &i) in alpha.iter().enumerate() {
                        u[i] = x[k];
                    }
                }
                None => {
                    singular.push(alpha);
                    continue;
                }
            }
        }
        let uv = DVector::from_column_slice(&u);
        let mut v: Vec<f64> = (theta + r * uv).iter().copied().collect();
        let feasible = u.iter().all(|&x| x >= -FEAS_TOL)
            && v.iter().all(|&x| x >= -FEAS_TOL)
            && alpha.iter().all(|&i| v[i] <= FEAS_TOL);
        if !feasible {
            continue;
        }
        for &i in &alpha {
            v[i] = 0.0;
        }
        for x in u.iter_mut().chain(v.iter_mut()) {
            *x = x.max(0.0);
        }
        let duplicate = found
            .iter()
            .any(|(_, fu, fv)| linalg::sup_dist(fu, &u).max(linalg::sup_dist(fv, &v)) <= DEDUP_TOL);
        if !duplicate {
            found.push((alpha, u, v));
        }
    }
    found.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(LcpReport {
        solutions: found
            .into_iter()
            .map(|(_, u, v)| LcpSolution::from_pair(u, v))
            .collect(),
        singular_supports: singular,
    })
}

/// Residual check independent of how a solution was found.
pub fn residual(theta: &DVector<f64>, r: &DMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    let uv = DVector::from_column_slice(u);
    let rv = theta + r * uv;
    let eq = rv
        .iter()
        .zip(v)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    let neg = u.iter().chain(v).fold(0.0_f64, |m, &x| m.max(-x));
    let compl: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>().abs();
    eq.max(neg).max(compl)
}

struct Support {
    idx: Vec<usize>,
    // k x k inverse of R_aa, row-major
    inv: Vec<f64>,
}

/// Precomputed one-step Skorokhod projection for a fixed `R`.
///
/// Given `q`, finds `dy >= 0` with `z = q + R dy >= 0` and `dy . z = 0`,
/// trying supports of `dy` in order of cardinality and then lexicographically;
/// the first feasible one wins.
pub struct SkorokhodProjector {
    d: usize,
    r: Vec<f64>,
    supports: Vec<Support>,
}

/// Largest dimension with precomputed support inverses (`2^12` supports).
pub const MAX_PROJECTOR_DIM: usize = 12;

impl SkorokhodProjector {
    pub fn new(r: &DMatrix<f64>) -> Result<Self> {
        let d = r.nrows();
        if r.ncols() != d {
            return Err(Error::Invalid("square reflection matrix required".into()));
        }
        if d > MAX_PROJECTOR_DIM {
            return Err(Error::Capability(format!(
                "Skorokhod projection limited to d <= {MAX_PROJECTOR_DIM}, got {d}"
            )));
        }
        let mut supports = Vec::with_capacity(1 << d);
        for idx in linalg::subsets_by_size(d) {
            if idx.is_empty() {
                supports.push(Support {
                    idx,
                    inv: Vec::new(),
                });
                continue;
            }
            let sub = linalg::principal_submatrix(r, &idx);
            if let Some(inv) = linalg::inverse(&sub) {
                let k = idx.len();
                let inv = (0..k * k).map(|p| inv[(p / k, p % k)]).collect();
                supports.push(Support { idx, inv });
            }
        }
        let r = (0..d * d).map(|p| r[(p / d, p % d)]).collect();
        Ok(Self { d, r, supports })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    fn try_support(&self, s: &Support, q: &[f64], tol: f64, dy: &mut [f64], z: &mut [f64]) -> bool {
        let d = self.d;
        let k = s.idx.len();
        let mut local = [0.0_f64; MAX_PROJECTOR_DIM];
        #[allow(clippy::needless_range_loop)]
        for a in 0..k {
            let mut acc = 0.0;
            for b in 0..k {
                acc -= s.inv[a * k + b] * q[s.idx[b]];
            }
            if acc < -tol {
                return false;
            }
            local[a] = acc.max(0.0);
        }
        for i in 0..d {
            let row = &self.r[i * d..(i + 1) * d];
            let mut zi = q[i];
            for a in 0..k {
                zi += row[s.idx[a]] * local[a];
            }
            if zi < -tol {
                return false;
            }
            z[i] = zi;
        }
        dy.iter_mut().for_each(|x| *x = 0.0);
        for a in 0..k {
            dy[s.idx[a]] = local[a];
        }
        // rounding residue only; the pair is already feasible to `tol`
        z.iter_mut().for_each(|x| *x = x.max(0.0));
        true
    }

    /// Writes the projection of `q` into `dy` and `z`.
    pub fn project(&self, q: &[f64], dy: &mut [f64], z: &mut [f64]) -> Result<()> {
        debug_assert_eq!(q.len(), self.d);
        if q.iter().all(|&x| x >= 0.0) {
            dy.iter_mut().for_each(|x| *x = 0.0);
            z.copy_from_slice(q);
            return Ok(());
        }
        let scale = q.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        for tol in [1e-12 * scale, FEAS_TOL * scale] {
            for s in &self.supports {
                if self.try_support(s, q, tol, dy, z) {
                    return Ok(());
                }
            }
        }
        Err(Error::Infeasible { q: q.to_vec() })
    }
}

/// One-shot projection; builds a [`SkorokhodProjector`] for `R`.
pub fn skorokhod_step(q: &[f64], r: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    if r.nrows() != q.len() {
        return Err(Error::Dimension {
            expected: r.nrows(),
            got: q.len(),
        });
    }
    let p = SkorokhodProjector::new(r)?;
    let mut dy = vec![0.0; q.len()];
    let mut z = vec![0.0; q.len()];
    p.project(q, &mut dy, &mut z)?;
    Ok((dy, z))
}
