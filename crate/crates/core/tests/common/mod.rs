#![allow(dead_code)]

use libm::erfc;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Determinant by cofactor expansion along the first row.
pub fn cofactor_det(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    match n {
        0 => 1.0,
        1 => a[0][0],
        _ => (0..n)
            .map(|j| {
                let minor: Vec<Vec<f64>> = a[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(c, _)| *c != j)
                            .map(|(_, x)| *x)
                            .collect()
                    })
                    .collect();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * a[0][j] * cofactor_det(&minor)
            })
            .sum(),
    }
}

pub fn rows(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect()
}

/// All nonempty principal minors, by cofactor expansion.
pub fn principal_minors(a: &DMatrix<f64>) -> Vec<(Vec<usize>, f64)> {
    let n = a.nrows();
    let full = rows(a);
    (1u32..(1 << n))
        .map(|mask| {
            let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let sub: Vec<Vec<f64>> = idx
                .iter()
                .map(|&i| idx.iter().map(|&j| full[i][j]).collect())
                .collect();
            (idx, cofactor_det(&sub))
        })
        .collect()
}

pub fn brute_is_p(a: &DMatrix<f64>) -> bool {
    principal_minors(a).iter().all(|(_, m)| *m > 0.0)
}

/// Solves `a x = b` by Cramer's rule.
pub fn cramer(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let det = cofactor_det(a);
    if det.abs() < 1e-12 {
        return None;
    }
    Some(
        (0..a.len())
            .map(|j| {
                let m: Vec<Vec<f64>> = a
                    .iter()
                    .zip(b)
                    .map(|(row, &bi)| {
                        row.iter()
                            .enumerate()
                            .map(|(c, &x)| if c == j { bi } else { x })
                            .collect()
                    })
                    .collect();
                cofactor_det(&m) / det
            })
            .collect(),
    )
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.random_range(lo..hi))
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(lo..hi))
}

/// `erf` from its Maclaurin series, accurate to ~1e-13 for `|x| <= 2`.
pub fn erf_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let x2 = x * x;
    for n in 1..200 {
        term *= -x2 / n as f64;
        let add = term / (2 * n + 1) as f64;
        sum += add;
        if add.abs() < 1e-17 {
            break;
        }
    }
    2.0 / std::f64::consts::PI.sqrt() * sum
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Transition density of Brownian motion with drift `mu` reflected at 0.
pub fn reflected_density(t: f64, x: f64, y: f64, mu: f64) -> f64 {
    let s = t.sqrt();
    let upper_tail = |z: f64| 0.5 * erfc(z / std::f64::consts::SQRT_2);
    phi((y - x - mu * t) / s) / s + (2.0 * mu * y).exp() * phi((y + x + mu * t) / s) / s
        - 2.0 * mu * (2.0 * mu * y).exp() * upper_tail((y + x + mu * t) / s)
}

/// `(mass, mean)` of the reflected density by the trapezoid rule on `[0, 40]`.
pub fn reflected_moments(t: f64, x: f64, mu: f64) -> (f64, f64) {
    let n = 400_000;
    let dy = 40.0 / n as f64;
    let (mut mass, mut mean) = (0.0, 0.0);
    for i in 0..=n {
        let y = i as f64 * dy;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        let p = reflected_density(t, x, y, mu);
        mass += w * p * dy;
        mean += w * y * p * dy;
    }
    (mass, mean)
}
