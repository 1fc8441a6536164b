//! Monte Carlo experiments on recurrence of the example SRBM.
//!
//! The stopping times of the Foster-type criterion are proof constructions and
//! cannot be observed on a simulated path, so the experiments use proxies: a
//! deterministic time `c M` for the contraction step and the hitting time of
//! `A = {||z|| <= kappa}` after `delta` for the return time. Results say so in
//! their `proxies` field.
//!
//! Cell `j` (scale-major, then start state) uses seed `replica_seed(seed, j)`;
//! replica `i` of that cell uses `replica_seed(cell_seed, i)`.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::fluid::{self, AffinePath};
use crate::model::{NormKind, SrbmModel, StateVec};
use crate::rng::replica_seed;
use crate::sde::{hitting_time, HittingSpec, Stepper};
use crate::stats::{ols, summarize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentVerdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub label: String,
    pub scale: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub censored_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub name: String,
    pub parameters: serde_json::Value,
    pub rows: Vec<ExperimentRow>,
    pub verdict: ExperimentVerdict,
    pub summary: serde_json::Value,
    pub proxies: Vec<String>,
}

/// Censored fraction above which a hitting-time verdict is inconclusive.
pub const MAX_CENSORED_FRACTION: f64 = 0.10;

/// Start states of norm `m`.
///
/// With the Foster norm: all mass on `z1`, all mass on `z6`, equal spread over
/// `z2..z5`, and a mix with a third of the norm in each of the three groups.
/// With `|z|_1`: all mass on each coordinate in turn.
pub fn start_states(norm: NormKind, d: usize, m: f64) -> Vec<(String, Vec<f64>)> {
    match norm {
        NormKind::Foster => {
            let unit = |k: usize, s: f64| {
                let mut z = vec![0.0; 6];
                z[k] = s;
                z
            };
            let spread = (m / 4.0).sqrt();
            let mix = (m / 12.0).sqrt();
            vec![
                ("e1".into(), unit(0, m)),
                ("e6".into(), unit(5, m)),
                (
                    "spread".into(),
                    vec![0.0, spread, spread, spread, spread, 0.0],
                ),
                ("mixed".into(), vec![m / 3.0, mix, mix, mix, mix, m / 3.0]),
            ]
        }
        NormKind::L1 => (0..d)
            .map(|k| {
                let mut z = vec![0.0; d];
                z[k] = m;
                (format!("e{}", k + 1), z)
            })
            .collect(),
    }
}

fn check_scales(scales: &[f64]) -> Result<()> {
    if scales.is_empty() || scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::Invalid(format!(
            "scales must be positive, got {scales:?}"
        )));
    }
    Ok(())
}

/// Terminal norms of `reps` paths from `z0` run to `t`.
fn terminal_norms(
    model: &SrbmModel,
    z0: &StateVec,
    norm: NormKind,
    t: f64,
    h: f64,
    cell_seed: u64,
    reps: usize,
) -> Result<Vec<f64>> {
    let steps = (t / h).round() as usize;
    (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut st = Stepper::new(model, z0, h, replica_seed(cell_seed, i as u64))?;
            for _ in 0..steps {
                st.advance()?;
            }
            Ok(norm.eval(&st.z))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionParams {
    pub scales: Vec<f64>,
    /// Time multiplier: the state is read at `c M`.
    pub c: f64,
    pub gamma: f64,
    pub reps: usize,
    pub h: f64,
    pub seed: u64,
    pub norm: NormKind,
}

/// Estimates `E ||Z(c M)||` from start states of norm `M`.
///
/// Pass iff `estimate + 3 SE <= (1 - gamma) M` for every start state at the
/// two largest scales.
pub fn contraction_experiment(
    model: &SrbmModel,
    p: &ContractionParams,
) -> Result<ExperimentResult> {
    check_scales(&p.scales)?;
    p.norm.check_dim(model.d())?;
    if !(p.c > 0.0 && p.h > 0.0 && p.reps > 1) {
        return Err(Error::Invalid("need c > 0, h > 0 and reps > 1".into()));
    }
    let mut rows = Vec::new();
    let mut cell = 0u64;
    for &m in &p.scales {
        for (label, z) in start_states(p.norm, model.d(), m) {
            let z0 = StateVec::new(z)?;
            let xs = terminal_norms(
                model,
                &z0,
                p.norm,
                p.c * m,
                p.h,
                replica_seed(p.seed, cell),
                p.reps,
            )?;
            cell += 1;
            let s = summarize(&xs);
            rows.push(ExperimentRow {
                label,
                scale: m,
                estimate: s.mean,
                std_error: s.std_error,
                n_samples: s.n,
                censored_fraction: 0.0,
            });
        }
    }
    let mut sorted = p.scales.clone();
    sorted.sort_by(f64::total_cmp);
    let judged: Vec<f64> = sorted.iter().rev().take(2).copied().collect();
    let mut worst: Option<(String, f64, f64)> = None;
    let mut pass = true;
    for r in rows.iter().filter(|r| judged.contains(&r.scale)) {
        let upper = r.estimate + 3.0 * r.std_error;
        let ratio = upper / r.scale;
        if upper > (1.0 - p.gamma) * r.scale {
            pass = false;
        }
        if worst.as_ref().is_none_or(|w| ratio > w.2) {
            worst = Some((r.label.clone(), r.scale, ratio));
        }
    }
    let worst = worst.expect("at least one judged row");
    // smallest scale from which every tested scale contracts
    let contracts = |m: f64| {
        rows.iter()
            .filter(|r| r.scale == m)
            .all(|r| r.estimate + 3.0 * r.std_error <= (1.0 - p.gamma) * r.scale)
    };
    let onset = sorted
        .iter()
        .rev()
        .take_while(|&&m| contracts(m))
        .last()
        .copied();
    Ok(ExperimentResult {
        name: "contraction".into(),
        parameters: serde_json::to_value(p)?,
        rows,
        verdict: if pass {
            ExperimentVerdict::Pass
        } else {
            ExperimentVerdict::Fail
        },
        summary: json!({
            "judged_scales": judged,
            "threshold_factor": 1.0 - p.gamma,
            "worst_state": worst.0,
            "worst_scale": worst.1,
            "worst_upper_over_scale": worst.2,
            "onset_scale": onset,
        }),
        proxies: vec![format!(
            "stopping time sigma(z) replaced by the deterministic time c * ||z|| with c = {}",
            p.c
        )],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnTimeParams {
    pub scales: Vec<f64>,
    pub kappa: f64,
    pub delta: f64,
    pub reps: usize,
    pub h: f64,
    pub seed: u64,
    pub cap: f64,
    pub norm: NormKind,
}

/// Estimates `E tau_A(delta)` on the scale grid and on the halved grid.
///
/// The least-squares slope of the pooled mean return time against `M` is
/// computed on each grid; pass iff the ratio full/half lies in `[0.5, 2]`.
/// Inconclusive when any cell has more than 10% censored samples.
pub fn return_time_experiment(model: &SrbmModel, p: &ReturnTimeParams) -> Result<ExperimentResult> {
    check_scales(&p.scales)?;
    p.norm.check_dim(model.d())?;
    let half: Vec<f64> = p.scales.iter().map(|m| m / 2.0).collect();
    if let Some(m) = half.iter().find(|&&m| m < p.kappa) {
        return Err(Error::Invalid(format!(
            "every scale on both grids must be >= kappa = {}, halved grid has {m}",
            p.kappa
        )));
    }
    if p.reps < 2 {
        return Err(Error::Invalid("need reps > 1".into()));
    }
    let spec = HittingSpec {
        kappa: p.kappa,
        delta: p.delta,
        cap: p.cap,
        norm: p.norm,
    };
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    let mut max_censored: f64 = 0.0;
    let mut cell = 0u64;
    for (grid_name, grid) in [("full", &p.scales), ("half", &half)] {
        let mut pooled_means = Vec::new();
        for &m in grid.iter() {
            let mut pooled = Vec::new();
            let mut pooled_censored = 0usize;
            for (label, z) in start_states(p.norm, model.d(), m) {
                let z0 = StateVec::new(z)?;
                let cell_seed = replica_seed(p.seed, cell);
                cell += 1;
                let samples: Vec<_> = (0..p.reps)
                    .into_par_iter()
                    .map(|i| {
                        hitting_time(model, &z0, &spec, p.h, replica_seed(cell_seed, i as u64))
                    })
                    .collect::<Result<_>>()?;
                let taus: Vec<f64> = samples.iter().map(|s| s.tau).collect();
                let censored = samples.iter().filter(|s| s.censored).count();
                let cf = censored as f64 / samples.len() as f64;
                max_censored = max_censored.max(cf);
                let s = summarize(&taus);
                rows.push(ExperimentRow {
                    label: format!("{grid_name}/{label}"),
                    scale: m,
                    estimate: s.mean,
                    std_error: s.std_error,
                    n_samples: s.n,
                    censored_fraction: cf,
                });
                pooled.extend(taus);
                pooled_censored += censored;
            }
            let s = summarize(&pooled);
            rows.push(ExperimentRow {
                label: format!("{grid_name}/all"),
                scale: m,
                estimate: s.mean,
                std_error: s.std_error,
                n_samples: s.n,
                censored_fraction: pooled_censored as f64 / pooled.len() as f64,
            });
            pooled_means.push(s.mean);
        }
        let fit = if grid.len() >= 2 {
            ols(grid, &pooled_means).slope
        } else {
            f64::NAN
        };
        slopes.push(fit);
    }
    let (slope_full, slope_half) = (slopes[0], slopes[1]);
    let ratio = slope_full / slope_half;
    let verdict = if max_censored > MAX_CENSORED_FRACTION {
        ExperimentVerdict::Inconclusive
    } else if slope_half > 0.0 && (0.5..=2.0).contains(&ratio) {
        ExperimentVerdict::Pass
    } else {
        ExperimentVerdict::Fail
    };
    Ok(ExperimentResult {
        name: "return-time".into(),
        parameters: serde_json::to_value(p)?,
        rows,
        verdict,
        summary: json!({
            "slope_full": slope_full,
            "slope_half": slope_half,
            "slope_ratio": ratio,
            "max_censored_fraction": max_censored,
        }),
        proxies: vec!["censored samples enter means at the cap value (lower bounds)".into()],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluidVsDiffusionParams {
    pub horizon: f64,
    pub reps: usize,
    pub h: f64,
    pub seed: u64,
}

/// Contrasts the divergent linear fluid branch `y = e1 t`, `z = (theta + R e1) t`
/// with Monte Carlo estimates of `E Z6(t)` from the origin.
///
/// Pass iff the fluid `z6` grows linearly with positive rate and the Monte Carlo
/// estimate at the horizon is below half the fluid value at 3-standard-error confidence.
pub fn fluid_vs_diffusion(
    model: &SrbmModel,
    p: &FluidVsDiffusionParams,
) -> Result<ExperimentResult> {
    let d = model.d();
    if d != 6 {
        return Err(Error::Dimension {
            expected: 6,
            got: d,
        });
    }
    if !(p.horizon > 0.0 && p.h > 0.0 && p.reps > 1) {
        return Err(Error::Invalid(
            "need horizon > 0, h > 0 and reps > 1".into(),
        ));
    }
    let mut u = vec![0.0; d];
    u[0] = 1.0;
    let v: Vec<f64> = (model.theta() + model.r() * DVector::from_column_slice(&u))
        .iter()
        .copied()
        .collect();
    let path = AffinePath {
        z0: vec![0.0; d],
        u,
        v,
    };
    let check = fluid::verify_affine_path(&path, model.theta(), model.r());
    if !check.valid {
        return Err(Error::Invalid(format!(
            "u = e1 does not give a fluid path for this model: {:?}",
            check.violations
        )));
    }
    let rate = path.v[5];
    let times = [p.horizon / 4.0, p.horizon / 2.0, p.horizon];
    let fluid_z6: Vec<f64> = times.iter().map(|&t| path.z_at(t)[5]).collect();
    let linear = rate > 0.0
        && fluid_z6
            .iter()
            .zip(&times)
            .all(|(z, t)| (z - rate * t).abs() <= 1e-12 * (1.0 + rate * t));

    let integrated = fluid::integrate(
        &StateVec::zeros(d),
        model.theta(),
        model.r(),
        p.h,
        p.horizon,
    )?;
    let step_of = |t: f64| (t / p.h).round() as usize;

    let marks: Vec<usize> = times.iter().map(|&t| step_of(t)).collect();
    let per_rep: Vec<[f64; 3]> = (0..p.reps)
        .into_par_iter()
        .map(|i| {
            let mut st = Stepper::new(
                model,
                &StateVec::zeros(d),
                p.h,
                replica_seed(p.seed, i as u64),
            )?;
            let mut out = [0.0; 3];
            for (j, &m) in marks.iter().enumerate() {
                while st.steps_taken() < m {
                    st.advance()?;
                }
                out[j] = st.z[5];
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut mc_final = None;
    for (j, &t) in times.iter().enumerate() {
        rows.push(ExperimentRow {
            label: "fluid_affine_z6".into(),
            scale: t,
            estimate: fluid_z6[j],
            std_error: 0.0,
            n_samples: 1,
            censored_fraction: 0.0,
        });
        rows.push(ExperimentRow {
            label: "fluid_integrated_z6".into(),
            scale: t,
            estimate: integrated.z_row(marks[j].min(integrated.len() - 1))[5],
            std_error: 0.0,
            n_samples: 1,
            censored_fraction: 0.0,
        });
        let xs: Vec<f64> = per_rep.iter().map(|r| r[j]).collect();
        let s = summarize(&xs);
        rows.push(ExperimentRow {
            label: "mc_z6".into(),
            scale: t,
            estimate: s.mean,
            std_error: s.std_error,
            n_samples: s.n,
            censored_fraction: 0.0,
        });
        mc_final = Some(s);
    }
    let mc = mc_final.expect("three time points");
    let bound = rate * p.horizon / 2.0;
    let bounded = mc.mean + 3.0 * mc.std_error < bound;
    let verdict = if linear && bounded {
        ExperimentVerdict::Pass
    } else {
        ExperimentVerdict::Fail
    };
    Ok(ExperimentResult {
        name: "fluid-vs-diffusion".into(),
        parameters: serde_json::to_value(p)?,
        rows,
        verdict,
        summary: json!({
            "fluid_rate_z6": rate,
            "fluid_z6_at_horizon": fluid_z6[2],
            "integrated_branch_z6_at_horizon": integrated.last_z()[5],
            "mc_z6_at_horizon": mc.mean,
            "mc_z6_std_error": mc.std_error,
            "half_fluid_bound": bound,
            "fluid_linear": linear,
        }),
        proxies: vec![],
    })
}
