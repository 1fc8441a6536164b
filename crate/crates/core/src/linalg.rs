//! Small dense helpers shared by the matrix-class, LCP and simulation code.

use std::ops::ControlFlow;

use nalgebra::{DMatrix, DVector};

/// Largest dimension for which exhaustive principal-subset enumeration is allowed.
pub const MAX_ENUM_DIM: usize = 20;

pub fn principal_submatrix(a: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])])
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Determinant by LU with partial pivoting.
pub fn determinant(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    a.clone().lu().determinant()
}

/// Solves `a x = b`, or `None` when `a` is numerically singular relative to
/// its own scale (`|det| <= 1e-12 * max|a|^n`).
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if !is_nonsingular(a) {
        return None;
    }
    a.clone().lu().solve(b)
}

pub fn is_nonsingular(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    let scale = max_abs(a);
    if scale == 0.0 {
        return n == 0;
    }
    let det = determinant(&(a / scale));
    det.is_finite() && det.abs() > 1e-12
}

pub fn inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if !is_nonsingular(a) {
        return None;
    }
    a.clone().try_inverse()
}

/// Visits every nonempty subset of `0..n` ordered by cardinality, then
/// lexicographically within a cardinality.
pub fn for_each_subset_by_size<F>(n: usize, mut f: F)
where
    F: FnMut(&[usize]) -> ControlFlow<()>,
{
    for k in 1..=n {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            if f(&idx).is_break() {
                return;
            }
            // advance to the next k-combination in lexicographic order
            let mut i = k;
            while i > 0 && idx[i - 1] == n - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
}

/// All subsets of `0..n`, including the empty one, by cardinality then lexicographic.
pub fn subsets_by_size(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for_each_subset_by_size(n, |s| {
        out.push(s.to_vec());
        ControlFlow::Continue(())
    });
    out
}

pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}
