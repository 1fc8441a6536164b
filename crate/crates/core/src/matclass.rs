//! Reflection matrix classes: S, completely-S, P and M, plus the necessary
//! recurrence condition "R nonsingular with R^{-1} theta < 0".
//!
//! Subset-based tests enumerate principal submatrices by cardinality and then
//! lexicographically, so a reported failing subset is a smallest one.
//! Indices are 0-based.

use std::ops::ControlFlow;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, MAX_ENUM_DIM};

/// Optimum of the S-matrix LP must exceed this to count as an S-matrix.
pub const S_TOL: f64 = 1e-9;
/// Principal minors must exceed this times `max|entry|^k`.
pub const MINOR_TOL: f64 = 1e-12;
const NEC_TOL: f64 = 1e-12;
const PIVOT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SMatrixTest {
    pub holds: bool,
    /// Optimal `t` of `max t s.t. A w >= t 1, sum w = 1, w >= 0`, floored at 0.
    pub t_star: f64,
    /// Maximizing `w`, present when `holds`.
    pub witness: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetVerdict {
    pub holds: bool,
    pub failing_subset: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NecessaryCondition {
    pub holds: bool,
    pub singular: bool,
    /// `A^{-1} theta` when `A` is nonsingular.
    pub solution: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixClassReport {
    pub n: usize,
    pub is_s: bool,
    pub is_completely_s: bool,
    pub is_p: bool,
    pub is_m: bool,
    pub s_witness: Option<Vec<f64>>,
    /// Smallest principal subset that is not an S-matrix.
    pub completely_s_failing_subset: Option<Vec<usize>>,
    /// Smallest principal subset with a nonpositive minor.
    pub p_failing_subset: Option<Vec<usize>>,
    pub necessary_condition_holds: Option<bool>,
    pub necessary_condition: Option<NecessaryCondition>,
}

/// Dense tableau simplex for `max c.x s.t. A x <= b, x >= 0` with `b >= 0`,
/// started from the slack basis and pivoted with Bland's rule.
struct Simplex {
    rows: usize,
    cols: usize,
    // rows x (cols + 1), last column is the rhs; row `rows` is the objective
    t: Vec<f64>,
    basis: Vec<usize>,
}

impl Simplex {
    fn new(a: &DMatrix<f64>, b: &[f64], c: &[f64]) -> Self {
        let (m, n) = a.shape();
        let cols = n + m;
        let w = cols + 1;
        let mut t = vec![0.0; (m + 1) * w];
        for i in 0..m {
            for j in 0..n {
                t[i * w + j] = a[(i, j)];
            }
            t[i * w + n + i] = 1.0;
            t[i * w + cols] = b[i];
        }
        for j in 0..n {
            t[m * w + j] = -c[j];
        }
        Self {
            rows: m,
            cols,
            t,
            basis: (n..n + m).collect(),
        }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * (self.cols + 1) + j]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.cols + 1;
        let p = self.at(r, c);
        for j in 0..w {
            self.t[r * w + j] /= p;
        }
        for i in 0..=self.rows {
            if i == r {
                continue;
            }
            let f = self.t[i * w + c];
            if f != 0.0 {
                for j in 0..w {
                    self.t[i * w + j] -= f * self.t[r * w + j];
                }
            }
        }
        self.basis[r] = c;
    }

    /// Runs to optimality; the LPs built here are bounded, so no unbounded exit.
    fn solve(&mut self) {
        let max_iter = 50 * (self.rows + self.cols) + 1000;
        for _ in 0..max_iter {
            let Some(c) = (0..self.cols).find(|&j| self.at(self.rows, j) < -PIVOT_EPS) else {
                return;
            };
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..self.rows {
                let a = self.at(i, c);
                if a > PIVOT_EPS {
                    let ratio = self.at(i, self.cols) / a;
                    let better = match best {
                        None => true,
                        Some((br, _, bvar)) => {
                            ratio < br - 1e-15 || (ratio <= br + 1e-15 && self.basis[i] < bvar)
                        }
                    };
                    if better {
                        best = Some((ratio, i, self.basis[i]));
                    }
                }
            }
            match best {
                Some((_, r, _)) => self.pivot(r, c),
                None => return,
            }
        }
    }

    fn value(&self, var: usize) -> f64 {
        self.basis
            .iter()
            .position(|&b| b == var)
            .map_or(0.0, |r| self.at(r, self.cols))
    }
}

/// S-matrix test: `A` is an S-matrix iff some `w >= 0` has `A w > 0`.
///
/// Solves `max t s.t. A w >= t 1, sum w <= 1, w >= 0` after the shift
/// `t' = t + L` with `L = max|a_ij| + 1`, which makes the slack basis feasible.
/// With `sum w <= 1` the optimum equals `max(t*, 0)` of the equality form.
pub fn is_s_matrix(a: &DMatrix<f64>) -> SMatrixTest {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "square matrix required");
    if n == 0 {
        return SMatrixTest {
            holds: true,
            t_star: f64::INFINITY,
            witness: Some(Vec::new()),
        };
    }
    let shift = linalg::max_abs(a) + 1.0;
    // variables: w_0..w_{n-1}, t'
    let mut lp = DMatrix::<f64>::zeros(n + 1, n + 1);
    let mut rhs = vec![shift; n + 1];
    for i in 0..n {
        for j in 0..n {
            lp[(i, j)] = -a[(i, j)];
        }
        lp[(i, n)] = 1.0;
    }
    for j in 0..n {
        lp[(n, j)] = 1.0;
    }
    rhs[n] = 1.0;
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut sx = Simplex::new(&lp, &rhs, &c);
    sx.solve();
    let t_star = sx.value(n) - shift;
    if t_star > S_TOL {
        let mut w: Vec<f64> = (0..n).map(|j| sx.value(j).max(0.0)).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        SMatrixTest {
            holds: true,
            t_star,
            witness: Some(w),
        }
    } else {
        SMatrixTest {
            holds: false,
            t_star: t_star.max(0.0),
            witness: None,
        }
    }
}

fn check_enum_dim(a: &DMatrix<f64>) -> Result<usize> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Invalid(format!(
            "square matrix required, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if n > MAX_ENUM_DIM {
        return Err(Error::Capability(format!(
            "exhaustive subset enumeration limited to n <= {MAX_ENUM_DIM}, got {n}"
        )));
    }
    Ok(n)
}

fn first_failing_subset<F>(n: usize, mut passes: F) -> SubsetVerdict
where
    F: FnMut(&[usize]) -> bool,
{
    let mut failing = None;
    linalg::for_each_subset_by_size(n, |idx| {
        if passes(idx) {
            ControlFlow::Continue(())
        } else {
            failing = Some(idx.to_vec());
            ControlFlow::Break(())
        }
    });
    SubsetVerdict {
        holds: failing.is_none(),
        failing_subset: failing,
    }
}

/// Every nonempty principal submatrix is an S-matrix.
pub fn is_completely_s(a: &DMatrix<f64>) -> Result<SubsetVerdict> {
    let n = check_enum_dim(a)?;
    Ok(first_failing_subset(n, |idx| {
        is_s_matrix(&linalg::principal_submatrix(a, idx)).holds
    }))
}

/// Whether the minor of `sub` (a `k x k` principal submatrix) is positive.
fn minor_positive(sub: &DMatrix<f64>) -> bool {
    let k = sub.nrows() as i32;
    let scale = linalg::max_abs(sub);
    if scale == 0.0 {
        return false;
    }
    linalg::determinant(sub) > MINOR_TOL * scale.powi(k)
}

/// All principal minors positive.
pub fn is_p_matrix(a: &DMatrix<f64>) -> Result<SubsetVerdict> {
    let n = check_enum_dim(a)?;
    Ok(first_failing_subset(n, |idx| {
        minor_positive(&linalg::principal_submatrix(a, idx))
    }))
}

/// Nonsingular M-matrix: off-diagonal entries `<= 0` and a P-matrix.
pub fn is_m_matrix(a: &DMatrix<f64>) -> Result<bool> {
    let n = check_enum_dim(a)?;
    let z_sign = (0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] <= 0.0));
    if !z_sign {
        return Ok(false);
    }
    Ok(is_p_matrix(a)?.holds)
}

/// `A` nonsingular and every component of `A^{-1} theta` below `-1e-12`.
pub fn check_necessary_condition(theta: &DVector<f64>, a: &DMatrix<f64>) -> NecessaryCondition {
    if a.nrows() != a.ncols() || a.nrows() != theta.len() {
        return NecessaryCondition {
            holds: false,
            singular: true,
            solution: None,
        };
    }
    match linalg::solve(a, theta) {
        Some(x) => NecessaryCondition {
            holds: x.iter().all(|&v| v < -NEC_TOL),
            singular: false,
            solution: Some(x.iter().copied().collect()),
        },
        None => NecessaryCondition {
            holds: false,
            singular: true,
            solution: None,
        },
    }
}

/// Full class report, with the necessary condition when `theta` is given.
pub fn classify(a: &DMatrix<f64>, theta: Option<&DVector<f64>>) -> Result<MatrixClassReport> {
    let n = check_enum_dim(a)?;
    let s = is_s_matrix(a);
    let cs = is_completely_s(a)?;
    let p = is_p_matrix(a)?;
    let m = is_m_matrix(a)?;
    let nec = theta.map(|th| check_necessary_condition(th, a));
    Ok(MatrixClassReport {
        n,
        is_s: s.holds,
        is_completely_s: cs.holds,
        is_p: p.holds,
        is_m: m,
        s_witness: s.witness,
        completely_s_failing_subset: cs.failing_subset,
        p_failing_subset: p.failing_subset,
        necessary_condition_holds: nec.as_ref().map(|c| c.holds),
        necessary_condition: nec,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_example_r, REFERENCE_DELTAS};

    fn m(n: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(n, n, v)
    }

    #[test]
    fn identity_is_s_with_uniform_witness() {
        for n in 1..=5 {
            let t = is_s_matrix(&DMatrix::identity(n, n));
            assert!(t.holds);
            let w = t.witness.unwrap();
            for x in w {
                assert!((x - 1.0 / n as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn negative_scalar_is_not_s() {
        let t = is_s_matrix(&m(1, &[-1.0]));
        assert!(!t.holds);
        assert!(!is_s_matrix(&m(1, &[0.0])).holds);
    }

    #[test]
    fn antagonistic_pair_fails_on_full_set() {
        let a = m(2, &[1.0, -3.0, -3.0, 1.0]);
        let v = is_completely_s(&a).unwrap();
        assert!(!v.holds);
        assert_eq!(v.failing_subset, Some(vec![0, 1]));
    }

    #[test]
    fn nonpositive_diagonal_fails_on_singleton() {
        let a = m(3, &[1.0, 2.0, 2.0, -1.0, -1.0, -1.0, 0.0, 3.0, 1.0]);
        let v = is_completely_s(&a).unwrap();
        assert_eq!(v.failing_subset, Some(vec![1]));
    }

    #[test]
    fn s_but_not_completely_s() {
        // columns push into the orthant jointly but the 1x1 block is negative
        let a = m(2, &[-1.0, 2.0, 1.0, 1.0]);
        assert!(is_s_matrix(&a).holds);
        assert_eq!(is_completely_s(&a).unwrap().failing_subset, Some(vec![0]));
    }

    #[test]
    fn reference_r_classes() {
        let r = build_example_r(&REFERENCE_DELTAS).unwrap();
        assert!(is_s_matrix(&r).holds);
        assert!(is_completely_s(&r).unwrap().holds);
        assert!(!is_m_matrix(&r).unwrap());
    }

    #[test]
    fn p_matrix_basics() {
        assert!(is_p_matrix(&DMatrix::identity(4, 4)).unwrap().holds);
        let v = is_p_matrix(&m(2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert!(!v.holds);
        assert_eq!(v.failing_subset, Some(vec![0]));
    }

    #[test]
    fn m_matrix_basics() {
        assert!(is_m_matrix(&DMatrix::identity(3, 3)).unwrap());
        assert!(is_m_matrix(&m(2, &[1.0, -1.0, 0.0, 1.0])).unwrap());
        assert!(!is_m_matrix(&m(2, &[1.0, -2.0, -2.0, 1.0])).unwrap());
    }

    #[test]
    fn capability_limit() {
        let big = DMatrix::<f64>::identity(21, 21);
        assert!(matches!(is_p_matrix(&big), Err(Error::Capability(_))));
        assert!(matches!(is_completely_s(&big), Err(Error::Capability(_))));
    }

    #[test]
    fn necessary_condition_cases() {
        let i3 = DMatrix::identity(3, 3);
        let c = check_necessary_condition(&DVector::from_element(3, -1.0), &i3);
        assert!(c.holds && !c.singular);
        let c = check_necessary_condition(&DVector::from_vec(vec![1.0, -1.0, -1.0]), &i3);
        assert!(!c.holds);
        let sing = m(2, &[1.0, 1.0, 1.0, 1.0]);
        let c = check_necessary_condition(&DVector::from_element(2, -1.0), &sing);
        assert!(!c.holds && c.singular);
    }

    #[test]
    fn reference_example_meets_necessary_condition() {
        let r = build_example_r(&REFERENCE_DELTAS).unwrap();
        let th = DVector::from_element(6, -1.0);
        let c = check_necessary_condition(&th, &r);
        assert!(c.holds);
        let x = DVector::from_vec(c.solution.unwrap());
        assert!((&r * x - th).amax() < 1e-9);
    }
}
