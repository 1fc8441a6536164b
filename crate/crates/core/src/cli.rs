//! `orthant-lab` command line front end.
//!
//! Exit codes: 0 success, 2 usage or config error, 3 numeric failure,
//! 4 experiment verdict "fail".

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::experiments::{
    self, ContractionParams, ExperimentResult, ExperimentVerdict, FluidVsDiffusionParams,
    ReturnTimeParams,
};
use crate::fluid::{self, attraction_verdict, default_eps_origin, DEFAULT_GROWTH_THRESHOLD};
use crate::lcp;
use crate::matclass;
use crate::model::{validate_deltas, ExampleDeltas, NormKind, SrbmModel, StateVec};
use crate::output::{self, OutputSet, RunManifest, MANIFEST_SCHEMA, TOOL_VERSION};
use crate::pursuit::{self, PursuitConfig};
use crate::rng::replica_seed;
use crate::sde::{self, HittingSpec, SimConfig};

pub const THREADS_ENV: &str = "ORTHANT_LAB_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_VERDICT_FAIL: i32 = 4;

/// Model description as it appears in a model/config file.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ModelSource {
    Explicit {
        d: usize,
        theta: Vec<f64>,
        sigma: Vec<Vec<f64>>,
        #[serde(rename = "R")]
        r: Vec<Vec<f64>>,
    },
    Example {
        example_deltas: [f64; 4],
    },
}

impl ModelSource {
    pub fn build(&self) -> Result<SrbmModel> {
        match self {
            ModelSource::Explicit { d, theta, sigma, r } => {
                let mat = |rows: &Vec<Vec<f64>>, key: &str| -> Result<DMatrix<f64>> {
                    if rows.len() != *d || rows.iter().any(|row| row.len() != *d) {
                        return Err(Error::Config(format!(
                            "key `{key}`: expected a {d}x{d} array"
                        )));
                    }
                    Ok(DMatrix::from_fn(*d, *d, |i, j| rows[i][j]))
                };
                if theta.len() != *d {
                    return Err(Error::Config(format!(
                        "key `theta`: expected {d} numbers, got {}",
                        theta.len()
                    )));
                }
                SrbmModel::new(
                    DVector::from_column_slice(theta),
                    mat(sigma, "sigma")?,
                    mat(r, "R")?,
                )
            }
            ModelSource::Example { example_deltas } => {
                SrbmModel::example(&ExampleDeltas::from_array(*example_deltas))
            }
        }
    }
}

/// A config file after parsing; run parameters left `None` take subcommand defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunConfig {
    pub model: Option<ModelSource>,
    pub seed: Option<u64>,
    pub h: Option<f64>,
    pub horizon: Option<f64>,
    pub z0: Option<Vec<f64>>,
    pub reps: Option<usize>,
    pub scales: Option<Vec<f64>>,
    pub kappa: Option<f64>,
    pub delta: Option<f64>,
    pub cap: Option<f64>,
    pub c: Option<f64>,
    pub gamma: Option<f64>,
    pub norm: Option<NormKind>,
    pub n: Option<usize>,
    pub gaps: Option<Vec<f64>>,
    pub t_grid: Option<Vec<f64>>,
    pub bridge_correction: Option<bool>,
}

const MODEL_KEYS: [&str; 5] = ["d", "theta", "sigma", "R", "example_deltas"];
const RUN_KEYS: [&str; 16] = [
    "seed",
    "h",
    "horizon",
    "z0",
    "reps",
    "scales",
    "kappa",
    "delta",
    "cap",
    "c",
    "gamma",
    "norm",
    "n",
    "gaps",
    "t_grid",
    "bridge_correction",
];

fn cfg_err(key: &str, expected: &str) -> Error {
    Error::Config(format!("key `{key}`: expected {expected}"))
}

fn get_f64(obj: &Map<String, Value>, key: &str) -> Result<Option<f64>> {
    obj.get(key)
        .map(|v| v.as_f64().ok_or_else(|| cfg_err(key, "a number")))
        .transpose()
}

fn get_uint(obj: &Map<String, Value>, key: &str) -> Result<Option<u64>> {
    obj.get(key)
        .map(|v| {
            v.as_u64()
                .ok_or_else(|| cfg_err(key, "a nonnegative integer"))
        })
        .transpose()
}

fn get_vec(obj: &Map<String, Value>, key: &str) -> Result<Option<Vec<f64>>> {
    obj.get(key)
        .map(|v| {
            v.as_array()
                .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<_>>>())
                .ok_or_else(|| cfg_err(key, "an array of numbers"))
        })
        .transpose()
}

fn get_matrix(obj: &Map<String, Value>, key: &str) -> Result<Option<Vec<Vec<f64>>>> {
    obj.get(key)
        .map(|v| {
            v.as_array()
                .and_then(|rows| {
                    rows.iter()
                        .map(|r| {
                            r.as_array().and_then(|a| {
                                a.iter().map(Value::as_f64).collect::<Option<Vec<_>>>()
                            })
                        })
                        .collect::<Option<Vec<_>>>()
                })
                .ok_or_else(|| cfg_err(key, "an array of arrays of numbers"))
        })
        .transpose()
}

/// Parses a config object: model keys (`d`, `theta`, `sigma`, `R`, or
/// `example_deltas`) plus optional run keys. Unknown keys are rejected and the
/// example form is validated against the delta constraints.
pub fn parse_config(value: &Value) -> Result<RunConfig> {
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
    if let Some(k) = obj
        .keys()
        .find(|k| !MODEL_KEYS.contains(&k.as_str()) && !RUN_KEYS.contains(&k.as_str()))
    {
        return Err(Error::Config(format!("unknown key `{k}`")));
    }
    let explicit_keys = ["d", "theta", "sigma", "R"];
    let has_explicit = explicit_keys.iter().any(|k| obj.contains_key(*k));
    let model = match (has_explicit, obj.contains_key("example_deltas")) {
        (true, true) => {
            return Err(Error::Config(
                "give either `example_deltas` or `d`/`theta`/`sigma`/`R`, not both".into(),
            ))
        }
        (false, true) => {
            let v = get_vec(obj, "example_deltas")?.expect("present");
            let arr: [f64; 4] = v
                .try_into()
                .map_err(|_| cfg_err("example_deltas", "an array of 4 numbers"))?;
            let report = validate_deltas(&ExampleDeltas::from_array(arr));
            if let Some(bad) = report.failures().next() {
                return Err(Error::Config(format!(
                    "key `example_deltas`: {} ({}) fails, margin {}",
                    bad.name, bad.inequality, bad.margin
                )));
            }
            Some(ModelSource::Example {
                example_deltas: arr,
            })
        }
        (true, false) => {
            if let Some(k) = explicit_keys.iter().find(|k| !obj.contains_key(**k)) {
                return Err(Error::Config(format!(
                    "key `{k}`: missing (explicit model needs d, theta, sigma, R)"
                )));
            }
            let d = get_uint(obj, "d")?.expect("present") as usize;
            if d == 0 {
                return Err(cfg_err("d", "a positive integer"));
            }
            Some(ModelSource::Explicit {
                d,
                theta: get_vec(obj, "theta")?.expect("present"),
                sigma: get_matrix(obj, "sigma")?.expect("present"),
                r: get_matrix(obj, "R")?.expect("present"),
            })
        }
        (false, false) => None,
    };
    let norm = match obj.get("norm") {
        None => None,
        Some(Value::String(s)) if s == "foster" => Some(NormKind::Foster),
        Some(Value::String(s)) if s == "l1" => Some(NormKind::L1),
        Some(_) => return Err(cfg_err("norm", "\"foster\" or \"l1\"")),
    };
    let bridge_correction = obj
        .get("bridge_correction")
        .map(|v| {
            v.as_bool()
                .ok_or_else(|| cfg_err("bridge_correction", "a boolean"))
        })
        .transpose()?;
    Ok(RunConfig {
        model,
        seed: get_uint(obj, "seed")?,
        h: get_f64(obj, "h")?,
        horizon: get_f64(obj, "horizon")?,
        z0: get_vec(obj, "z0")?,
        reps: get_uint(obj, "reps")?.map(|x| x as usize),
        scales: get_vec(obj, "scales")?,
        kappa: get_f64(obj, "kappa")?,
        delta: get_f64(obj, "delta")?,
        cap: get_f64(obj, "cap")?,
        c: get_f64(obj, "c")?,
        gamma: get_f64(obj, "gamma")?,
        norm,
        n: get_uint(obj, "n")?.map(|x| x as usize),
        gaps: get_vec(obj, "gaps")?,
        t_grid: get_vec(obj, "t_grid")?,
        bridge_correction,
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{} is not valid JSON: {e}", path.display())))?;
    parse_config(&value)
}

#[derive(Parser, Debug)]
#[command(
    name = "orthant-lab",
    version,
    about = "Reflected Brownian motion in the orthant"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON config: a model plus optional run parameters
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the six-dimensional example with these deltas
    #[arg(long, num_args = 4, value_names = ["D1", "D2", "D3", "D4"])]
    deltas: Option<Vec<f64>>,
    /// Output directory
    #[arg(long, default_value = "orthant-lab-out")]
    out: PathBuf,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
struct StepArgs {
    /// Initial state, comma separated
    #[arg(long, value_delimiter = ',')]
    z0: Option<Vec<f64>>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum NormArg {
    Foster,
    L1,
}

impl From<NormArg> for NormKind {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::Foster => NormKind::Foster,
            NormArg::L1 => NormKind::L1,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ExperimentName {
    Contraction,
    ReturnTime,
    FluidVsDiffusion,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Matrix classes of R and the necessary condition on (theta, R)
    Classify {
        #[command(flatten)]
        common: Common,
    },
    /// All solutions of the linear complementarity problem for (theta, R)
    Lcp {
        #[command(flatten)]
        common: Common,
    },
    /// Integrate the fluid path and report an attraction verdict
    Fluid {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        step: StepArgs,
    },
    /// Simulate one SRBM path
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        step: StepArgs,
    },
    /// Sample hitting times of {||z|| <= kappa}
    Hit {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        z0: Option<Vec<f64>>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        cap: Option<f64>,
        /// Number of replicas
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, value_enum)]
        norm: Option<NormArg>,
    },
    /// Run a Monte Carlo experiment
    Experiment {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        name: ExperimentName,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        scales: Option<Vec<f64>>,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        cap: Option<f64>,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, value_enum)]
        norm: Option<NormArg>,
    },
    /// Brownian pursuit survival curve
    Pursuit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        gaps: Option<Vec<f64>>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        cap: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        t_grid: Option<Vec<f64>>,
        #[arg(long)]
        h: Option<f64>,
        /// Disable the Brownian-bridge crossing correction
        #[arg(long)]
        no_bridge: bool,
    },
}

pub const DEFAULT_SEED: u64 = 1;

struct Ctx {
    cfg: RunConfig,
    out: OutputSet,
    seed: u64,
}

impl Ctx {
    fn new(common: &Common) -> Result<Self> {
        let mut cfg = match &common.config {
            Some(p) => load_config(p)?,
            None => RunConfig::default(),
        };
        if let Some(d) = &common.deltas {
            let arr: [f64; 4] = d.clone().try_into().expect("clap enforces four values");
            let report = validate_deltas(&ExampleDeltas::from_array(arr));
            if let Some(bad) = report.failures().next() {
                return Err(Error::Config(format!(
                    "--deltas: {} ({}) fails, margin {}",
                    bad.name, bad.inequality, bad.margin
                )));
            }
            cfg.model = Some(ModelSource::Example {
                example_deltas: arr,
            });
        }
        let seed = common.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
        Ok(Self {
            cfg,
            out: OutputSet::new(&common.out)?,
            seed,
        })
    }

    fn model(&self) -> Result<SrbmModel> {
        self.cfg
            .model
            .as_ref()
            .ok_or_else(|| {
                Error::Config("no model: pass --config with a model or --deltas".into())
            })?
            .build()
    }

    fn z0(&self, flag: &Option<Vec<f64>>, d: usize) -> Result<StateVec> {
        let z = flag
            .clone()
            .or_else(|| self.cfg.z0.clone())
            .unwrap_or_else(|| vec![0.0; d]);
        if z.len() != d {
            return Err(Error::Config(format!(
                "z0 has {} entries, model has d = {d}",
                z.len()
            )));
        }
        StateVec::new(z)
    }
}

/// Result of a subcommand: the resolved parameters for the manifest and whether a verdict failed.
struct Done {
    resolved: Value,
    verdict_fail: bool,
}

fn emit(ctx: &mut Ctx, name: &str, body: &str) -> Result<()> {
    ctx.out.write(name, body)?;
    print!("{body}");
    Ok(())
}

fn cmd_classify(ctx: &mut Ctx) -> Result<Done> {
    let m = ctx.model()?;
    let report = matclass::classify(m.r(), Some(m.theta()))?;
    emit(ctx, "classify.json", &output::versioned_json(&report)?)?;
    Ok(Done {
        resolved: json!({ "model": ctx.cfg.model }),
        verdict_fail: false,
    })
}

fn cmd_lcp(ctx: &mut Ctx) -> Result<Done> {
    let m = ctx.model()?;
    let rep = lcp::solve_all(m.theta(), m.r())?;
    emit(
        ctx,
        "lcp.jsonl",
        &output::versioned_json_lines(&rep.solutions)?,
    )?;
    if !rep.singular_supports.is_empty() {
        ctx.out.write(
            "lcp_diagnostics.json",
            &output::versioned_json(&json!({ "singular_supports": rep.singular_supports }))?,
        )?;
    }
    Ok(Done {
        resolved: json!({ "model": ctx.cfg.model }),
        verdict_fail: false,
    })
}

fn cmd_fluid(ctx: &mut Ctx, step: &StepArgs) -> Result<Done> {
    let m = ctx.model()?;
    let z0 = ctx.z0(&step.z0, m.d())?;
    let h = step.h.or(ctx.cfg.h).unwrap_or(1e-2);
    let horizon = step.horizon.or(ctx.cfg.horizon).unwrap_or(10.0);
    let grid = fluid::integrate(&z0, m.theta(), m.r(), h, horizon)?;
    let eps = default_eps_origin(z0.as_slice());
    let verdict = attraction_verdict(&grid, eps, DEFAULT_GROWTH_THRESHOLD);
    ctx.out
        .write("fluid_grid.csv", &output::grid_csv(&grid, false))?;
    emit(
        ctx,
        "fluid_verdict.json",
        &output::versioned_json(&verdict)?,
    )?;
    Ok(Done {
        resolved: json!({ "model": ctx.cfg.model, "z0": z0, "h": h, "horizon": horizon,
                          "eps_origin": eps, "growth_threshold": DEFAULT_GROWTH_THRESHOLD }),
        verdict_fail: false,
    })
}

fn cmd_simulate(ctx: &mut Ctx, step: &StepArgs) -> Result<Done> {
    let m = ctx.model()?;
    let z0 = ctx.z0(&step.z0, m.d())?;
    let cfg = SimConfig::new(
        step.h.or(ctx.cfg.h).unwrap_or(1e-3),
        step.horizon.or(ctx.cfg.horizon).unwrap_or(10.0),
        ctx.seed,
    );
    let grid = sde::simulate(&m, &z0, &cfg)?;
    let report = sde::validate_path(&grid, &m)?;
    ctx.out.write("path.csv", &output::grid_csv(&grid, true))?;
    emit(
        ctx,
        "path_validation.json",
        &output::versioned_json(&json!({
            "steps": report.steps,
            "push_bounds_checked": report.push_bounds_checked,
            "violation_count": report.violations.len(),
            "violations": report.violations.iter().take(100).collect::<Vec<_>>(),
        }))?,
    )?;
    Ok(Done {
        resolved: json!({ "model": ctx.cfg.model, "z0": z0, "sim": cfg }),
        verdict_fail: false,
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_hit(
    ctx: &mut Ctx,
    z0: &Option<Vec<f64>>,
    h: Option<f64>,
    kappa: Option<f64>,
    delta: Option<f64>,
    cap: Option<f64>,
    reps: Option<usize>,
    norm: Option<NormArg>,
) -> Result<Done> {
    use rayon::prelude::*;
    let m = ctx.model()?;
    let z0 = ctx.z0(z0, m.d())?;
    let h = h.or(ctx.cfg.h).unwrap_or(1e-3);
    let spec = HittingSpec {
        kappa: kappa.or(ctx.cfg.kappa).unwrap_or(12.0),
        delta: delta.or(ctx.cfg.delta).unwrap_or(0.1),
        cap: cap.or(ctx.cfg.cap).unwrap_or(1e4),
        norm: norm
            .map(NormKind::from)
            .or(ctx.cfg.norm)
            .unwrap_or_else(|| NormKind::default_for(m.d())),
    };
    let reps = reps.or(ctx.cfg.reps).unwrap_or(100);
    let master = ctx.seed;
    let rows: Vec<_> = (0..reps)
        .into_par_iter()
        .map(|i| sde::hitting_time(&m, &z0, &spec, h, replica_seed(master, i as u64)))
        .collect::<Result<_>>()?;
    let rows: Vec<Value> = rows
        .into_iter()
        .map(|s| json!({ "seed": s.seed, "tau": s.tau, "censored": s.censored, "terminal": s.terminal }))
        .collect();
    emit(ctx, "hit.jsonl", &output::versioned_json_lines(&rows)?)?;
    Ok(Done {
        resolved: json!({ "model": ctx.cfg.model, "z0": z0, "h": h, "hitting": spec, "reps": reps }),
        verdict_fail: false,
    })
}

fn write_experiment(ctx: &mut Ctx, res: &ExperimentResult) -> Result<()> {
    let stem = res.name.clone();
    ctx.out
        .write(&format!("{stem}.csv"), &output::experiment_csv(res))?;
    let doc = json!({
        "name": res.name,
        "verdict": res.verdict,
        "parameters": res.parameters,
        "summary": res.summary,
        "proxies": res.proxies,
    });
    emit(ctx, &format!("{stem}.json"), &output::versioned_json(&doc)?)
}

#[allow(clippy::too_many_arguments)]
fn cmd_pursuit(
    ctx: &mut Ctx,
    n: Option<usize>,
    gaps: &Option<Vec<f64>>,
    reps: Option<usize>,
    cap: Option<f64>,
    t_grid: &Option<Vec<f64>>,
    h: Option<f64>,
    no_bridge: bool,
) -> Result<Done> {
    let gaps = gaps.clone().or_else(|| ctx.cfg.gaps.clone());
    let n = n.or(ctx.cfg.n).or(gaps.as_ref().map(Vec::len)).unwrap_or(4);
    let gaps = gaps.unwrap_or_else(|| vec![1.0; n]);
    let h = h.or(ctx.cfg.h).unwrap_or(1e-2);
    let cap = cap.or(ctx.cfg.cap).unwrap_or(1e3);
    let reps = reps.or(ctx.cfg.reps).unwrap_or(10_000);
    let t_grid = t_grid
        .clone()
        .or_else(|| ctx.cfg.t_grid.clone())
        .unwrap_or_else(|| {
            let top = cap.log10().floor() as i32;
            let mut g = pursuit::log_grid(-1, top, 4);
            g.retain(|&t| t <= cap);
            g
        });
    let mut cfg = PursuitConfig::new(gaps, h, cap, ctx.seed);
    cfg.n = n;
    cfg.bridge_correction = !no_bridge && ctx.cfg.bridge_correction.unwrap_or(true);
    let curve = pursuit::survival_curve(&cfg, reps, &t_grid)?;
    ctx.out
        .write("pursuit_survival.csv", &output::survival_csv(&curve))?;
    let doc = json!({
        "n": n,
        "reps": reps,
        "slope": curve.fit.map(|f| f.slope),
        "slope_ci": curve.slope_ci,
        "fit_range": curve.fit_range,
        "censored_fraction": curve.censored_fraction,
        "reference_eta": match n {
            4 => Some(pursuit::ETA_FOUR_PREDATORS),
            5 => Some(pursuit::ETA_FIVE_PREDATORS),
            _ => None,
        },
        "reference_eta_note": "tail exponent 1 + eta quoted for reference only; not resolvable by Monte Carlo",
    });
    emit(ctx, "pursuit.json", &output::versioned_json(&doc)?)?;
    Ok(Done {
        resolved: json!({ "pursuit": cfg, "reps": reps, "t_grid": t_grid }),
        verdict_fail: false,
    })
}

fn usage_exit(e: clap::Error) -> i32 {
    use clap::error::ErrorKind;
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
            let _ = e.print();
            EXIT_OK
        }
        _ => {
            let _ = e.print();
            EXIT_CONFIG
        }
    }
}

/// Maps an error to the documented exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numeric { .. } | Error::Infeasible { .. } => EXIT_NUMERIC,
        _ => EXIT_CONFIG,
    }
}

fn thread_pool() -> std::result::Result<rayon::ThreadPool, String> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {v:?}"))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| e.to_string())
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    if argv.len() <= 1 {
        let mut cmd = <Cli as clap::CommandFactory>::command();
        let _ = cmd.print_help();
        return EXIT_CONFIG;
    }
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => return usage_exit(e),
    };
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
    };
    match pool.install(|| dispatch(cli.cmd)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    let started = chrono::Utc::now().to_rfc3339();
    let (name, common) = match &cmd {
        Command::Classify { common } => ("classify", common),
        Command::Lcp { common } => ("lcp", common),
        Command::Fluid { common, .. } => ("fluid", common),
        Command::Simulate { common, .. } => ("simulate", common),
        Command::Hit { common, .. } => ("hit", common),
        Command::Experiment { common, .. } => ("experiment", common),
        Command::Pursuit { common, .. } => ("pursuit", common),
    };
    let mut ctx = Ctx::new(common)?;
    let done = match &cmd {
        Command::Classify { .. } => cmd_classify(&mut ctx)?,
        Command::Lcp { .. } => cmd_lcp(&mut ctx)?,
        Command::Fluid { step, .. } => cmd_fluid(&mut ctx, step)?,
        Command::Simulate { step, .. } => cmd_simulate(&mut ctx, step)?,
        Command::Hit {
            z0,
            h,
            kappa,
            delta,
            cap,
            reps,
            norm,
            ..
        } => cmd_hit(&mut ctx, z0, *h, *kappa, *delta, *cap, *reps, *norm)?,
        Command::Experiment {
            name: exp,
            h,
            reps,
            scales,
            kappa,
            delta,
            cap,
            c,
            gamma,
            horizon,
            norm,
            ..
        } => {
            let m = ctx.model()?;
            let cfg = &ctx.cfg;
            let h = h.or(cfg.h).unwrap_or(2e-3);
            let reps = reps.or(cfg.reps).unwrap_or(500);
            let scales = scales
                .clone()
                .or_else(|| cfg.scales.clone())
                .unwrap_or(vec![8.0, 16.0, 32.0]);
            let norm = norm
                .map(NormKind::from)
                .or(cfg.norm)
                .unwrap_or_else(|| NormKind::default_for(m.d()));
            let seed = ctx.seed;
            let res = match exp {
                ExperimentName::Contraction => experiments::contraction_experiment(
                    &m,
                    &ContractionParams {
                        scales,
                        c: c.or(cfg.c).unwrap_or(2.0),
                        gamma: gamma.or(cfg.gamma).unwrap_or(0.1),
                        reps,
                        h,
                        seed,
                        norm,
                    },
                )?,
                ExperimentName::ReturnTime => experiments::return_time_experiment(
                    &m,
                    &ReturnTimeParams {
                        scales,
                        kappa: kappa.or(cfg.kappa).unwrap_or(12.0),
                        delta: delta.or(cfg.delta).unwrap_or(0.1),
                        reps,
                        h,
                        seed,
                        cap: cap.or(cfg.cap).unwrap_or(1e4),
                        norm,
                    },
                )?,
                ExperimentName::FluidVsDiffusion => experiments::fluid_vs_diffusion(
                    &m,
                    &FluidVsDiffusionParams {
                        horizon: horizon.or(cfg.horizon).unwrap_or(100.0),
                        reps,
                        h,
                        seed,
                    },
                )?,
            };
            write_experiment(&mut ctx, &res)?;
            Done {
                resolved: json!({ "model": ctx.cfg.model, "experiment": res.name, "parameters": res.parameters }),
                verdict_fail: res.verdict == ExperimentVerdict::Fail,
            }
        }
        Command::Pursuit {
            n,
            gaps,
            reps,
            cap,
            t_grid,
            h,
            no_bridge,
            ..
        } => cmd_pursuit(&mut ctx, *n, gaps, *reps, *cap, t_grid, *h, *no_bridge)?,
    };
    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA,
        tool_version: TOOL_VERSION.into(),
        subcommand: name.into(),
        config: done.resolved,
        master_seed: Some(ctx.seed),
        started_at: started,
        finished_at: chrono::Utc::now().to_rfc3339(),
        outputs: ctx.out.files.clone(),
    };
    let path = ctx.out.dir().join(format!("{name}.manifest.json"));
    fs::write(path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(if done.verdict_fail {
        EXIT_VERDICT_FAIL
    } else {
        EXIT_OK
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_config_expands() {
        let cfg = parse_config(&json!({ "example_deltas": [0.05, 0.05, 0.05, 0.6] })).unwrap();
        let m = cfg.model.unwrap().build().unwrap();
        assert_eq!(m.d(), 6);
        assert_eq!(m.r()[(0, 5)], 1.0 - 0.6);
    }

    #[test]
    fn invalid_example_rejected_with_constraint() {
        let e = parse_config(&json!({ "example_deltas": [0.05, 0.1, 0.1, 0.6] })).unwrap_err();
        assert!(
            e.to_string().contains("delta2 + delta3 <= delta4 / 6"),
            "{e}"
        );
    }

    #[test]
    fn explicit_one_dimensional_model() {
        let cfg =
            parse_config(&json!({ "d": 1, "theta": [-1], "sigma": [[1]], "R": [[1]] })).unwrap();
        let m = cfg.model.unwrap().build().unwrap();
        assert_eq!(m.d(), 1);
    }

    #[test]
    fn unknown_and_mistyped_keys() {
        let e = parse_config(&json!({ "example_deltas": [0.05, 0.05, 0.05, 0.6], "thetta": 1 }))
            .unwrap_err();
        assert!(e.to_string().contains("`thetta`"));
        let e =
            parse_config(&json!({ "d": 1, "theta": "x", "sigma": [[1]], "R": [[1]] })).unwrap_err();
        assert!(e.to_string().contains("`theta`") && e.to_string().contains("array of numbers"));
        let e = parse_config(&json!({ "d": 1, "theta": [-1], "sigma": [[1]] })).unwrap_err();
        assert!(e.to_string().contains("`R`"));
        let e = parse_config(&json!({ "h": "small" })).unwrap_err();
        assert!(e.to_string().contains("`h`: expected a number"));
    }

    #[test]
    fn empty_argv_is_usage_error() {
        assert_eq!(run(["orthant-lab"]), EXIT_CONFIG);
        assert_eq!(run(["orthant-lab", "frobnicate"]), EXIT_CONFIG);
    }
}
