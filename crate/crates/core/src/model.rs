//! Model data for an SRBM and the six-dimensional example family.
//!
//! The example uses `theta = -1`, `sigma = I` and `R = J1 + J2` where `J1` is
//! the all-ones matrix and `J2` carries the four perturbations `delta1..delta4`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matclass;

/// The four parameters of the example reflection matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExampleDeltas {
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub delta4: f64,
}

/// The parameter instance used throughout: `delta1 = delta2 = delta3 = .05`, `delta4 = .6`.
pub const REFERENCE_DELTAS: ExampleDeltas = ExampleDeltas {
    delta1: 0.05,
    delta2: 0.05,
    delta3: 0.05,
    delta4: 0.6,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaCheck {
    pub name: &'static str,
    pub inequality: &'static str,
    /// `rhs - lhs`; nonnegative (positive for strict inequalities) when the check holds.
    pub margin: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaReport {
    pub accepted: bool,
    pub checks: Vec<DeltaCheck>,
}

impl DeltaReport {
    pub fn failures(&self) -> impl Iterator<Item = &DeltaCheck> {
        self.checks.iter().filter(|c| !c.holds)
    }
}

/// Exact rational value of the shortest decimal that round-trips to `x`.
///
/// Inequalities on the deltas are decided on these decimals, so `.05 + .05 <= .6 / 6`
/// holds with equality instead of failing on binary rounding.
fn decimal_value(x: f64) -> BigRational {
    let s = format!("{x:e}");
    let (mant, exp) = s.split_once('e').expect("LowerExp always has an exponent");
    let exp: i64 = exp.parse().expect("integer exponent");
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant),
    };
    let (int_part, frac_part) = mant.split_once('.').unwrap_or((mant, ""));
    let digits: BigInt = format!("{int_part}{frac_part}")
        .parse()
        .expect("decimal digits");
    let scale = exp - frac_part.len() as i64;
    let ten = BigInt::from(10);
    let mut value = if scale >= 0 {
        BigRational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(digits, num_traits::pow(ten, (-scale) as usize))
    };
    if neg {
        value = -value;
    }
    value
}

impl ExampleDeltas {
    pub fn new(delta1: f64, delta2: f64, delta3: f64, delta4: f64) -> Self {
        Self {
            delta1,
            delta2,
            delta3,
            delta4,
        }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.delta1, self.delta2, self.delta3, self.delta4]
    }

    /// Evaluates every constraint on the deltas. Never fails; the report carries failures.
    pub fn validate(&self) -> DeltaReport {
        validate_deltas(self)
    }
}

pub fn validate_deltas(d: &ExampleDeltas) -> DeltaReport {
    let mut checks = Vec::with_capacity(8);
    if d.as_array().iter().any(|x| !x.is_finite()) {
        checks.push(DeltaCheck {
            name: "finite",
            inequality: "all deltas finite",
            margin: f64::NAN,
            holds: false,
        });
        return DeltaReport {
            accepted: false,
            checks,
        };
    }
    let [d1, d2, d3, d4] = d.as_array().map(decimal_value);
    let zero = BigRational::zero();
    let tenth = BigRational::new(BigInt::one(), BigInt::from(10));
    let one = BigRational::one();
    let six = BigRational::from_integer(BigInt::from(6));

    let mut push = |name, inequality, lhs: &BigRational, rhs: &BigRational, strict: bool| {
        let margin = rhs - lhs;
        let holds = if strict {
            margin > zero
        } else {
            margin >= zero
        };
        checks.push(DeltaCheck {
            name,
            inequality,
            margin: margin.to_f64().unwrap_or(f64::NAN),
            holds,
        });
    };
    push("delta1 positive", "0 < delta1", &zero, &d1, true);
    push("delta2 positive", "0 < delta2", &zero, &d2, true);
    push("delta3 positive", "0 < delta3", &zero, &d3, true);
    push("delta4 positive", "0 < delta4", &zero, &d4, true);
    push(
        "perturbation balance",
        "delta2 + delta3 <= delta4 / 6",
        &(&d2 + &d3),
        &(&d4 / &six),
        false,
    );
    push("delta1 <= delta3", "delta1 <= delta3", &d1, &d3, false);
    push("delta3 <= 0.1", "delta3 <= 0.1", &d3, &tenth, false);
    push("delta4 < 1", "delta4 < 1", &d4, &one, true);

    let accepted = checks.iter().all(|c| c.holds);
    DeltaReport { accepted, checks }
}

/// `R = J1 + J2` for validated deltas.
pub fn build_example_r(deltas: &ExampleDeltas) -> Result<DMatrix<f64>> {
    let report = validate_deltas(deltas);
    if let Some(bad) = report.failures().next() {
        return Err(Error::Constraint(format!(
            "{} ({}) fails, margin {}",
            bad.name, bad.inequality, bad.margin
        )));
    }
    Ok(build_example_r_unchecked(deltas))
}

/// `R = J1 + J2` without validating the deltas.
pub fn build_example_r_unchecked(deltas: &ExampleDeltas) -> DMatrix<f64> {
    let ExampleDeltas {
        delta1,
        delta2,
        delta3,
        delta4,
    } = *deltas;
    let mut j2 = DMatrix::<f64>::zeros(6, 6);
    for j in 1..5 {
        j2[(0, j)] = delta2;
    }
    j2[(0, 5)] = -delta4;
    // rows 2..6 (0-based 1..5): -delta3 everywhere except column 1 and the diagonal
    for i in 1..6 {
        for j in 1..6 {
            if i != j {
                j2[(i, j)] = -delta3;
            }
        }
    }
    j2[(5, 0)] = delta1;
    DMatrix::from_element(6, 6, 1.0) + j2
}

/// Data `(theta, sigma, R)` of an SRBM on the `d`-dimensional orthant.
#[derive(Debug, Clone)]
pub struct SrbmModel {
    theta: DVector<f64>,
    sigma: DMatrix<f64>,
    r: DMatrix<f64>,
    chol: DMatrix<f64>,
    completely_s: OnceLock<Option<bool>>,
}

fn check_square(m: &DMatrix<f64>, d: usize, what: &str) -> Result<()> {
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::Invalid(format!(
            "{what} must be {d}x{d}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Invalid(format!("{what} has non-finite entries")));
    }
    Ok(())
}

impl SrbmModel {
    /// Builds a model, checking shapes and that `sigma` is symmetric positive definite.
    pub fn new(theta: DVector<f64>, sigma: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let d = theta.len();
        if d == 0 {
            return Err(Error::Invalid("dimension must be positive".into()));
        }
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("theta has non-finite entries".into()));
        }
        check_square(&sigma, d, "sigma")?;
        check_square(&r, d, "R")?;
        let scale = crate::linalg::max_abs(&sigma).max(1.0);
        let asym = (&sigma - sigma.transpose()).amax();
        if asym > 1e-10 * scale {
            return Err(Error::Invalid(format!(
                "sigma is not symmetric (max asymmetry {asym:e})"
            )));
        }
        let eig = SymmetricEigen::new(sigma.clone());
        let min_eig = eig.eigenvalues.min();
        if min_eig <= 1e-10 {
            return Err(Error::Invalid(format!(
                "sigma is not positive definite (smallest eigenvalue {min_eig:e})"
            )));
        }
        let chol = sigma
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Invalid("sigma has no Cholesky factor".into()))?
            .l();
        Ok(Self {
            theta,
            sigma,
            r,
            chol,
            completely_s: OnceLock::new(),
        })
    }

    /// A zero-covariance model. Simulating it reproduces the fluid integrator.
    pub fn noiseless(theta: DVector<f64>, r: DMatrix<f64>) -> Result<Self> {
        let d = theta.len();
        check_square(&r, d, "R")?;
        Ok(Self {
            theta,
            sigma: DMatrix::zeros(d, d),
            r,
            chol: DMatrix::zeros(d, d),
            completely_s: OnceLock::new(),
        })
    }

    /// The example: `theta = -1`, `sigma = I`, `R = J1 + J2(deltas)`.
    pub fn example(deltas: &ExampleDeltas) -> Result<Self> {
        let r = build_example_r(deltas)?;
        Self::new(DVector::from_element(6, -1.0), DMatrix::identity(6, 6), r)
    }

    pub fn reference_example() -> Self {
        Self::example(&REFERENCE_DELTAS).expect("reference deltas are valid")
    }

    pub fn d(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Lower Cholesky factor of `sigma` (zero for a noiseless model).
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// `Some(verdict)` for `d <= 20`, `None` when the check is too large to run.
    pub fn is_completely_s(&self) -> Option<bool> {
        *self
            .completely_s
            .get_or_init(|| matclass::is_completely_s(&self.r).ok().map(|c| c.holds))
    }

    /// Errors unless `R` is completely-S; simulation requires it.
    pub fn ensure_simulable(&self) -> Result<()> {
        match self.is_completely_s() {
            Some(true) => Ok(()),
            Some(false) => Err(Error::Invalid(
                "reflection matrix is not completely-S; no SRBM exists".into(),
            )),
            None => Err(Error::Capability(format!(
                "completely-S check limited to d <= {}",
                crate::linalg::MAX_ENUM_DIM
            ))),
        }
    }
}

/// A point of the orthant.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct StateVec(Vec<f64>);

impl StateVec {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if let Some((k, x)) = z
            .iter()
            .enumerate()
            .find(|(_, x)| !(x.is_finite() && **x >= 0.0))
        {
            return Err(Error::Invalid(format!(
                "state component {k} = {x} is not a finite nonnegative number"
            )));
        }
        Ok(Self(z))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn d(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for StateVec {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// `z1 + z2^2 + z3^2 + z4^2 + z5^2 + z6`, the Lyapunov-type norm of the example.
pub fn foster_norm(z: &[f64]) -> Result<f64> {
    if z.len() != 6 {
        return Err(Error::Dimension {
            expected: 6,
            got: z.len(),
        });
    }
    Ok(foster_norm_unchecked(z))
}

#[inline]
pub(crate) fn foster_norm_unchecked(z: &[f64]) -> f64 {
    z[0] + z[1] * z[1] + z[2] * z[2] + z[3] * z[3] + z[4] * z[4] + z[5]
}

/// Norm used for hitting sets and experiment scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Foster,
    L1,
}

impl NormKind {
    /// Foster norm for six-dimensional models, `|z|_1` otherwise.
    pub fn default_for(d: usize) -> Self {
        if d == 6 {
            NormKind::Foster
        } else {
            NormKind::L1
        }
    }

    pub fn check_dim(self, d: usize) -> Result<()> {
        match self {
            NormKind::Foster if d != 6 => Err(Error::Dimension {
                expected: 6,
                got: d,
            }),
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval(self, z: &[f64]) -> f64 {
        match self {
            NormKind::Foster => foster_norm_unchecked(z),
            NormKind::L1 => crate::linalg::l1_norm(z),
        }
    }
}

/// A discretized trajectory on `t_i = i h`. Rows are stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGrid {
    pub h: f64,
    pub d: usize,
    pub times: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    /// Cumulative driving noise, `B(0) = 0`.
    pub b: Vec<f64>,
}

impl PathGrid {
    pub fn with_capacity(h: f64, d: usize, rows: usize) -> Self {
        Self {
            h,
            d,
            times: Vec::with_capacity(rows),
            z: Vec::with_capacity(rows * d),
            y: Vec::with_capacity(rows * d),
            b: Vec::with_capacity(rows * d),
        }
    }

    pub fn push(&mut self, t: f64, z: &[f64], y: &[f64], b: &[f64]) {
        self.times.push(t);
        self.z.extend_from_slice(z);
        self.y.extend_from_slice(y);
        self.b.extend_from_slice(b);
    }

    /// Number of grid points (steps + 1).
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn z_row(&self, i: usize) -> &[f64] {
        &self.z[i * self.d..(i + 1) * self.d]
    }

    pub fn y_row(&self, i: usize) -> &[f64] {
        &self.y[i * self.d..(i + 1) * self.d]
    }

    pub fn b_row(&self, i: usize) -> &[f64] {
        &self.b[i * self.d..(i + 1) * self.d]
    }

    pub fn last_z(&self) -> &[f64] {
        self.z_row(self.len() - 1)
    }
}
