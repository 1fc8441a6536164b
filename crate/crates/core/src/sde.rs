//! Euler-Skorokhod simulation of the SRBM.
//!
//! Each step draws `dB ~ N(0, sigma h)` through the Cholesky factor of
//! `sigma`, forms `q = z + theta h + dB` and projects it back to the orthant
//! with the minimal-support Skorokhod step. Noise for step `i` of a run with
//! seed `s` is block `i` of the ChaCha8 stream `(s, 0)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lcp::SkorokhodProjector;
use crate::model::{NormKind, PathGrid, SrbmModel, StateVec};
use crate::rng::NormalStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerProjection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub h: f64,
    pub horizon: f64,
    pub seed: u64,
    pub scheme: Scheme,
}

impl SimConfig {
    pub fn new(h: f64, horizon: f64, seed: u64) -> Self {
        Self {
            h,
            horizon,
            seed,
            scheme: Scheme::EulerProjection,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite() && self.horizon >= self.h) {
            return Err(Error::Invalid(format!(
                "need h > 0 and horizon >= h, got h = {}, horizon = {}",
                self.h, self.horizon
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.h).round() as usize
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Streaming simulator state; does not keep the trajectory.
pub struct Stepper<'a> {
    model: &'a SrbmModel,
    proj: SkorokhodProjector,
    noise: NormalStream,
    h: f64,
    sqrt_h: f64,
    step: usize,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub b: Vec<f64>,
    pub dy: Vec<f64>,
    xi: Vec<f64>,
    q: Vec<f64>,
    znew: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(model: &'a SrbmModel, z0: &StateVec, h: f64, seed: u64) -> Result<Self> {
        let d = model.d();
        if z0.d() != d {
            return Err(Error::Dimension {
                expected: d,
                got: z0.d(),
            });
        }
        model.ensure_simulable()?;
        Ok(Self {
            model,
            proj: SkorokhodProjector::new(model.r())?,
            noise: NormalStream::new(seed, 0, d),
            h,
            sqrt_h: h.sqrt(),
            step: 0,
            z: z0.as_slice().to_vec(),
            y: vec![0.0; d],
            b: vec![0.0; d],
            dy: vec![0.0; d],
            xi: vec![0.0; d],
            q: vec![0.0; d],
            znew: vec![0.0; d],
        })
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.h
    }

    pub fn advance(&mut self) -> Result<()> {
        let d = self.z.len();
        self.noise.fill(&mut self.xi);
        let l = self.model.chol();
        let theta = self.model.theta();
        for i in 0..d {
            let mut db = 0.0;
            for j in 0..=i {
                db += l[(i, j)] * self.xi[j];
            }
            db *= self.sqrt_h;
            self.b[i] += db;
            self.q[i] = self.z[i] + theta[i] * self.h + db;
        }
        self.proj.project(&self.q, &mut self.dy, &mut self.znew)?;
        for i in 0..d {
            self.y[i] += self.dy[i];
        }
        self.z.copy_from_slice(&self.znew);
        self.step += 1;
        if self.z.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric {
                step: self.step,
                msg: "state became non-finite".into(),
            });
        }
        Ok(())
    }
}

/// Simulates one path on `t_i = i h` up to `horizon`, storing `Z`, `Y` and `B`.
pub fn simulate(model: &SrbmModel, z0: &StateVec, cfg: &SimConfig) -> Result<PathGrid> {
    cfg.validate()?;
    let steps = cfg.steps();
    let mut st = Stepper::new(model, z0, cfg.h, cfg.seed)?;
    let mut grid = PathGrid::with_capacity(cfg.h, model.d(), steps + 1);
    grid.push(0.0, &st.z, &st.y, &st.b);
    for _ in 0..steps {
        st.advance()?;
        grid.push(st.time(), &st.z, &st.y, &st.b);
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PathCheckKind {
    /// `Z(t) = Z(0) + B(t) + theta t + R Y(t)`
    Reconstruction,
    /// `Y` nondecreasing with `Y(0) = 0`
    Monotone,
    /// `Z >= 0`
    Nonnegative,
    /// `dY_k > 0` only where `Z_k = 0` after the step
    Complementarity,
    /// `sum_k Y_k(t) >= t - Z_l(0) - B_l(t)` for rows with entries `<= 1`
    PushLowerBound,
    /// `sum_k Y_k(t) >= (t - Z_l(0) - B_l(t)) / 2` for rows with entries `<= 2`
    HalfPushLowerBound,
    /// `Y_k(t) <= t + max_{s <= t} (-B_k(s))`
    PushUpperBound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathViolation {
    pub check: PathCheckKind,
    pub step: usize,
    pub coord: usize,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathReport {
    pub steps: usize,
    /// Whether the pathwise push bounds were checked (they need the example's sign structure).
    pub push_bounds_checked: bool,
    pub violations: Vec<PathViolation>,
}

impl PathReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: PathCheckKind) -> usize {
        self.violations.iter().filter(|v| v.check == kind).count()
    }
}

pub const PATH_TOL: f64 = 1e-7;

/// Rows eligible for the push lower bounds: `theta_l = -1` and every entry of row `l` at most `cap`.
fn rows_bounded_by(model: &SrbmModel, cap: f64) -> Vec<usize> {
    let r = model.r();
    (0..model.d())
        .filter(|&l| model.theta()[l] == -1.0 && (0..model.d()).all(|k| r[(l, k)] <= cap))
        .collect()
}

/// The push bounds hold pathwise for the example shape: `d = 6`, `theta = -1`,
/// unit diagonal, nonnegative `R` with rows 2..5 bounded by 1 and all entries below 2.
pub fn push_bounds_apply(model: &SrbmModel) -> bool {
    let r = model.r();
    model.d() == 6
        && model.theta().iter().all(|&t| t == -1.0)
        && (0..6).all(|k| r[(k, k)] == 1.0)
        && r.iter().all(|&x| (0.0..2.0).contains(&x))
        && (1..5).all(|l| (0..6).all(|k| r[(l, k)] <= 1.0))
}

/// Pathwise validation of a simulated grid, to tolerance `1e-7`.
pub fn validate_path(grid: &PathGrid, model: &SrbmModel) -> Result<PathReport> {
    validate_path_with_tol(grid, model, PATH_TOL)
}

pub fn validate_path_with_tol(grid: &PathGrid, model: &SrbmModel, tol: f64) -> Result<PathReport> {
    let d = model.d();
    if grid.d != d {
        return Err(Error::Dimension {
            expected: d,
            got: grid.d,
        });
    }
    let n = grid.len();
    if n == 0 {
        return Err(Error::Invalid("empty grid".into()));
    }
    let theta = model.theta();
    let r = model.r();
    let push_bounds = push_bounds_apply(model);
    let unit_rows = if push_bounds {
        rows_bounded_by(model, 1.0)
    } else {
        vec![]
    };
    let mut v = Vec::new();
    let mut flag = |check, step, coord, excess: f64| {
        v.push(PathViolation {
            check,
            step,
            coord,
            excess,
        })
    };
    let z0 = grid.z_row(0);
    let mut min_b = vec![0.0_f64; d];
    for i in 0..n {
        let t = grid.times[i];
        let (z, y, b) = (grid.z_row(i), grid.y_row(i), grid.b_row(i));
        for k in 0..d {
            let ry: f64 = (0..d).map(|j| r[(k, j)] * y[j]).sum();
            let recon = z0[k] + b[k] + theta[k] * t + ry;
            let err = (z[k] - recon).abs();
            if err > tol {
                flag(PathCheckKind::Reconstruction, i, k, err);
            }
            if z[k] < -tol {
                flag(PathCheckKind::Nonnegative, i, k, -z[k]);
            }
            if i == 0 && y[k] != 0.0 {
                flag(PathCheckKind::Monotone, i, k, y[k].abs());
            }
            if i > 0 {
                let dy = y[k] - grid.y_row(i - 1)[k];
                if dy < -tol {
                    flag(PathCheckKind::Monotone, i, k, -dy);
                }
                if dy.max(0.0) * z[k] > tol {
                    flag(PathCheckKind::Complementarity, i, k, dy * z[k]);
                }
            }
        }
        if push_bounds {
            let total: f64 = y.iter().sum();
            for &l in &unit_rows {
                let lower = t - z0[l] - b[l];
                if total < lower - tol {
                    flag(PathCheckKind::PushLowerBound, i, l, lower - total);
                }
            }
            for l in 0..d {
                let lower = 0.5 * (t - z0[l] - b[l]);
                if total < lower - tol {
                    flag(PathCheckKind::HalfPushLowerBound, i, l, lower - total);
                }
            }
            for k in 0..d {
                min_b[k] = min_b[k].min(b[k]);
                let upper = t - min_b[k];
                if y[k] > upper + tol {
                    flag(PathCheckKind::PushUpperBound, i, k, y[k] - upper);
                }
            }
        }
    }
    Ok(PathReport {
        steps: n - 1,
        push_bounds_checked: push_bounds,
        violations: v,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingSample {
    pub seed: u64,
    /// Hitting time, or the cap when censored.
    pub tau: f64,
    pub censored: bool,
    pub steps: usize,
    pub terminal: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HittingSpec {
    pub kappa: f64,
    pub delta: f64,
    pub cap: f64,
    pub norm: NormKind,
}

/// First grid time `t >= delta` with `norm(Z(t)) <= kappa`, censored at `cap`.
pub fn hitting_time(
    model: &SrbmModel,
    z0: &StateVec,
    spec: &HittingSpec,
    h: f64,
    seed: u64,
) -> Result<HittingSample> {
    spec.norm.check_dim(model.d())?;
    if !(spec.kappa > 0.0 && spec.delta >= 0.0 && spec.cap >= spec.delta && h > 0.0) {
        return Err(Error::Invalid(format!(
            "need kappa > 0, delta >= 0, cap >= delta, h > 0 (got {spec:?}, h = {h})"
        )));
    }
    let mut st = Stepper::new(model, z0, h, seed)?;
    // grid index of the first time >= delta, guarding against t = i h rounding just below delta
    let first = (spec.delta / h - 1e-9).ceil().max(0.0) as usize;
    let cap_steps = (spec.cap / h + 1e-9).floor() as usize;
    loop {
        let i = st.steps_taken();
        if i >= first && spec.norm.eval(&st.z) <= spec.kappa {
            return Ok(HittingSample {
                seed,
                tau: st.time(),
                censored: false,
                steps: i,
                terminal: st.z.clone(),
            });
        }
        if i >= cap_steps {
            return Ok(HittingSample {
                seed,
                tau: spec.cap,
                censored: true,
                steps: i,
                terminal: st.z.clone(),
            });
        }
        st.advance()?;
    }
}

/// `max_{s <= s'} (B(s') - B(s))^2` over a sampled one-dimensional path.
pub fn max_squared_increment(path: &[f64]) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut best = 0.0_f64;
    for &x in path {
        lo = lo.min(x);
        hi = hi.max(x);
        best = best.max(x - lo).max(hi - x);
    }
    best * best
}

/// Standard Brownian motion sampled on `i h`, `i = 0..=steps`, from stream `(seed, 0)`.
pub fn standard_bm_path(seed: u64, h: f64, steps: usize) -> Vec<f64> {
    let mut s = NormalStream::new(seed, 0, 1);
    let mut x = [0.0];
    let mut out = Vec::with_capacity(steps + 1);
    let mut b = 0.0;
    out.push(b);
    let sh = h.sqrt();
    for _ in 0..steps {
        s.fill(&mut x);
        b += sh * x[0];
        out.push(b);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid;
    use nalgebra::{DMatrix, DVector};

    fn one_d() -> SrbmModel {
        SrbmModel::new(
            DVector::from_element(1, -1.0),
            DMatrix::identity(1, 1),
            DMatrix::identity(1, 1),
        )
        .unwrap()
    }

    #[test]
    fn zero_noise_matches_fluid_integrator() {
        let ex = SrbmModel::reference_example();
        let quiet = SrbmModel::noiseless(ex.theta().clone(), ex.r().clone()).unwrap();
        let z0 = StateVec::new(vec![0.5, 0.2, 0.0, 0.0, 0.3, 0.1]).unwrap();
        let g = simulate(&quiet, &z0, &SimConfig::new(0.01, 3.0, 9)).unwrap();
        let f = fluid::integrate(&z0, ex.theta(), ex.r(), 0.01, 3.0).unwrap();
        assert_eq!(g.z, f.z);
        assert_eq!(g.y, f.y);
        assert!(g.b.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn deterministic_per_seed() {
        let m = SrbmModel::reference_example();
        let cfg = SimConfig::new(1e-2, 2.0, 77);
        let z0 = StateVec::zeros(6);
        let a = simulate(&m, &z0, &cfg).unwrap();
        let b = simulate(&m, &z0, &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate(&m, &z0, &cfg.with_seed(78)).unwrap();
        assert_ne!(a.z, c.z);
    }

    #[test]
    fn simulated_example_paths_are_clean() {
        let m = SrbmModel::reference_example();
        let z0 = StateVec::new(vec![2.0, 0.5, 0.0, 1.0, 0.0, 0.5]).unwrap();
        let g = simulate(&m, &z0, &SimConfig::new(1e-3, 5.0, 3)).unwrap();
        let rep = validate_path(&g, &m).unwrap();
        assert!(rep.push_bounds_checked);
        assert!(
            rep.is_clean(),
            "{:?}",
            &rep.violations[..rep.violations.len().min(5)]
        );
    }

    #[test]
    fn injected_monotonicity_fault_is_flagged() {
        let m = SrbmModel::reference_example();
        let mut g = simulate(&m, &StateVec::zeros(6), &SimConfig::new(1e-2, 1.0, 5)).unwrap();
        // find a step after some push on coordinate 0 and pull Y back there
        let i = (1..g.len()).find(|&i| g.y_row(i)[0] > 0.0).unwrap();
        g.y[i * 6] = g.y_row(i - 1)[0] - 1e-3;
        let rep = validate_path(&g, &m).unwrap();
        assert!(rep
            .violations
            .iter()
            .any(|v| v.check == PathCheckKind::Monotone && v.step == i && v.coord == 0));
    }

    #[test]
    fn noiseless_one_dimensional_upper_bound() {
        let quiet =
            SrbmModel::noiseless(DVector::from_element(1, -1.0), DMatrix::identity(1, 1)).unwrap();
        let g = simulate(
            &quiet,
            &StateVec::new(vec![2.0]).unwrap(),
            &SimConfig::new(0.01, 4.0, 0),
        )
        .unwrap();
        let rep = validate_path(&g, &quiet).unwrap();
        assert!(rep.is_clean());
        // y(t) <= t with equality only once absorbed: here y(t) = (t - 2)^+
        for i in 0..g.len() {
            assert!(g.y_row(i)[0] <= g.times[i] + 1e-12);
        }
    }

    #[test]
    fn hitting_inside_target_is_immediate() {
        let m = SrbmModel::reference_example();
        let spec = HittingSpec {
            kappa: 12.0,
            delta: 0.0,
            cap: 10.0,
            norm: NormKind::Foster,
        };
        let s = hitting_time(&m, &StateVec::new(vec![1.0; 6]).unwrap(), &spec, 1e-3, 1).unwrap();
        assert_eq!(s.tau, 0.0);
        assert!(!s.censored);
    }

    #[test]
    fn hitting_requires_foster_dimension() {
        let spec = HittingSpec {
            kappa: 1.0,
            delta: 0.0,
            cap: 1.0,
            norm: NormKind::Foster,
        };
        let r = hitting_time(&one_d(), &StateVec::new(vec![1.0]).unwrap(), &spec, 1e-3, 1);
        assert!(matches!(r, Err(Error::Dimension { .. })));
    }

    #[test]
    fn censoring_at_cap() {
        let spec = HittingSpec {
            kappa: 1e-12,
            delta: 0.0,
            cap: 0.5,
            norm: NormKind::L1,
        };
        let s = hitting_time(
            &one_d(),
            &StateVec::new(vec![50.0]).unwrap(),
            &spec,
            1e-2,
            4,
        )
        .unwrap();
        assert!(s.censored);
        assert_eq!(s.tau, 0.5);
        assert_eq!(s.steps, 50);
    }

    #[test]
    fn max_increment_of_known_path() {
        assert_eq!(max_squared_increment(&[0.0, 1.0, -2.0, 0.5]), 9.0);
        assert_eq!(max_squared_increment(&[0.0]), 0.0);
    }
}
