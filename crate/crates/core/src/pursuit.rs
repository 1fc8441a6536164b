//! Brownian pursuit: `n` predators chasing one prey on the line.
//!
//! The engine tracks gaps only, `G_k = X_k - X_0` (predator minus prey). With
//! prey noise `xi_0` and predator noise `xi_k`, each gap moves by
//! `sqrt(h) (xi_k - xi_0)`: variance 2 per unit time and pairwise covariance 1,
//! i.e. correlation 1/2. Capture is the first time some gap reaches 0.
//!
//! Noise streams are keyed by `(seed, stream)` with stream 0 for the prey and
//! stream `k` for predator `k`, so runs with `n` and `n + 1` predators share
//! the first `n` predators path by path.

use libm::erf;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{replica_seed, PursuitStream};
use crate::stats::{ols, LinearFit};

/// Tail exponent excess quoted for four predators; far below Monte Carlo resolution.
pub const ETA_FOUR_PREDATORS: f64 = 0.000073;
/// Tail exponent excess quoted for five predators.
pub const ETA_FIVE_PREDATORS: f64 = 0.0634;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PursuitConfig {
    pub n: usize,
    pub gaps: Vec<f64>,
    pub h: f64,
    pub cap: f64,
    pub seed: u64,
    pub bridge_correction: bool,
    /// Test hook: `false` drops the shared prey noise, making the gaps independent.
    pub correlated: bool,
}

impl PursuitConfig {
    pub fn new(gaps: Vec<f64>, h: f64, cap: f64, seed: u64) -> Self {
        Self {
            n: gaps.len(),
            gaps,
            h,
            cap,
            seed,
            bridge_correction: true,
            correlated: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gaps.len() != self.n {
            return Err(Error::Invalid(format!(
                "{} gaps given for n = {}",
                self.gaps.len(),
                self.n
            )));
        }
        if let Some(g) = self.gaps.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(Error::Invalid(format!("gaps must be positive, got {g}")));
        }
        if !(self.h > 0.0 && self.cap >= self.h && self.cap.is_finite()) {
            return Err(Error::Invalid(format!(
                "need h > 0 and finite cap >= h, got h = {}, cap = {}",
                self.h, self.cap
            )));
        }
        Ok(())
    }

    pub fn cap_steps(&self) -> usize {
        (self.cap / self.h).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaptureSample {
    /// Capture time, or the cap when censored.
    pub capture_time: f64,
    pub censored: bool,
    pub capturing_index: Option<usize>,
    /// Grid step at which capture was recorded (`cap_steps` when censored).
    pub step: usize,
}

/// One pursuit run with the configured seed.
pub fn simulate_capture(cfg: &PursuitConfig) -> Result<CaptureSample> {
    cfg.validate()?;
    simulate_capture_unchecked(cfg, cfg.seed)
}

fn simulate_capture_unchecked(cfg: &PursuitConfig, seed: u64) -> Result<CaptureSample> {
    let n = cfg.n;
    let cap_steps = cfg.cap_steps();
    let censored = CaptureSample {
        capture_time: cfg.cap,
        censored: true,
        capturing_index: None,
        step: cap_steps,
    };
    if n == 0 {
        return Ok(censored);
    }
    let h = cfg.h;
    let sh = h.sqrt();
    let scale = if cfg.correlated { sh } else { (2.0 * h).sqrt() };
    let mut prey = PursuitStream::new(seed, 0);
    let mut preds: Vec<PursuitStream> = (1..=n as u64)
        .map(|k| PursuitStream::new(seed, k))
        .collect();
    let mut g = cfg.gaps.clone();
    for step in 1..=cap_steps {
        let (xi0, _) = prey.next_step();
        let common = if cfg.correlated { xi0 } else { 0.0 };
        let mut hit: Option<usize> = None;
        for k in 0..n {
            let (xi, u) = preds[k].next_step();
            let prev = g[k];
            let next = prev + scale * (xi - common);
            g[k] = next;
            if hit.is_some() {
                continue;
            }
            if next <= 0.0 {
                hit = Some(k);
            } else if cfg.bridge_correction {
                // crossing probability of a bridge with variance 2 per unit time
                let a = prev * next / h;
                if a < 40.0 && u < (-a).exp() {
                    hit = Some(k);
                }
            }
        }
        if !g.iter().all(|x| x.is_finite()) {
            return Err(Error::Numeric {
                step,
                msg: "gap became non-finite".into(),
            });
        }
        if let Some(k) = hit {
            return Ok(CaptureSample {
                capture_time: step as f64 * h,
                censored: false,
                capturing_index: Some(k),
                step,
            });
        }
    }
    Ok(censored)
}

/// Capture samples for replicas `0..reps`, replica `i` seeded by `replica_seed(cfg.seed, i)`.
pub fn sample_captures(cfg: &PursuitConfig, reps: usize) -> Result<Vec<CaptureSample>> {
    cfg.validate()?;
    (0..reps)
        .into_par_iter()
        .map(|i| simulate_capture_unchecked(cfg, replica_seed(cfg.seed, i as u64)))
        .collect()
}

/// `P(T > t)` for one predator at distance `gap`: `2 Phi(gap / sqrt(2 t)) - 1`.
pub fn closed_form_survival_single(gap: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    // 2 Phi(x) - 1 = erf(x / sqrt 2)
    erf(gap / (2.0 * t.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalPoint {
    pub t: f64,
    pub survival: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalCurve {
    pub points: Vec<SurvivalPoint>,
    pub reps: usize,
    pub censored_fraction: f64,
    pub fit: Option<LinearFit>,
    /// 95% interval for the tail slope.
    pub slope_ci: Option<(f64, f64)>,
    pub fit_range: Option<(f64, f64)>,
}

/// Snaps requested times onto the step lattice, dropping duplicates and points past the cap.
pub fn snap_grid(t_grid: &[f64], h: f64, cap: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &t in t_grid {
        let s = (t / h).round() as usize;
        let ts = s as f64 * h;
        if s >= 1 && ts <= cap + 1e-9 * cap && out.last().is_none_or(|&l| ts > l) {
            out.push(ts);
        }
    }
    out
}

/// Empirical survival curve from capture samples, plus an OLS fit of
/// `log P(T > t)` on `log t` over the last decade of the grid.
pub fn survival_from_samples(samples: &[CaptureSample], h: f64, t_grid: &[f64]) -> SurvivalCurve {
    let reps = samples.len();
    let nf = reps as f64;
    let mut steps: Vec<usize> = samples
        .iter()
        .map(|s| if s.censored { usize::MAX } else { s.step })
        .collect();
    steps.sort_unstable();
    let points: Vec<SurvivalPoint> = t_grid
        .iter()
        .map(|&t| {
            let grid_step = (t / h).round() as usize;
            // captured at or before t
            let captured = steps.partition_point(|&s| s <= grid_step);
            let p = (reps - captured) as f64 / nf;
            SurvivalPoint {
                t,
                survival: p,
                std_error: (p * (1.0 - p) / nf).sqrt(),
            }
        })
        .collect();
    let censored_fraction = samples.iter().filter(|s| s.censored).count() as f64 / nf;
    let (fit, fit_range) = match t_grid.last() {
        Some(&tmax) => {
            let lo = tmax / 10.0 * (1.0 - 1e-9);
            let (xs, ys): (Vec<f64>, Vec<f64>) = points
                .iter()
                .filter(|p| p.t >= lo && p.survival > 0.0)
                .map(|p| (p.t.ln(), p.survival.ln()))
                .unzip();
            if xs.len() >= 2 {
                (Some(ols(&xs, &ys)), Some((lo, tmax)))
            } else {
                (None, None)
            }
        }
        None => (None, None),
    };
    let slope_ci = fit
        .filter(|f| f.slope_se.is_finite())
        .map(|f| (f.slope - 1.96 * f.slope_se, f.slope + 1.96 * f.slope_se));
    SurvivalCurve {
        points,
        reps,
        censored_fraction,
        fit,
        slope_ci,
        fit_range,
    }
}

/// Simulates `reps` runs and builds the survival curve on the lattice-snapped `t_grid`.
pub fn survival_curve(cfg: &PursuitConfig, reps: usize, t_grid: &[f64]) -> Result<SurvivalCurve> {
    if reps < 1000 {
        return Err(Error::Invalid(format!(
            "survival curves need at least 1000 replicas, got {reps}"
        )));
    }
    let samples = sample_captures(cfg, reps)?;
    let grid = snap_grid(t_grid, cfg.h, cfg.cap);
    Ok(survival_from_samples(&samples, cfg.h, &grid))
}

/// `10^(k / per_decade)` from `10^lo` to `10^hi`.
pub fn log_grid(lo: i32, hi: i32, per_decade: i32) -> Vec<f64> {
    (lo * per_decade..=hi * per_decade)
        .map(|k| 10f64.powf(k as f64 / per_decade as f64))
        .collect()
}
