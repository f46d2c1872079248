//! Experiments: Monte Carlo left-hand sides against predicted right-hand
//! sides, with ingredient estimation, disk caching and reports.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::asymptotics::{predict, AsymptoticsError, DriftIngredients, Ingredients, TheoremId};
use crate::harmonic::{self, build_harmonic_table, estimate_v_killed, estimate_v_ladder, EstimationMethod, HarmonicError, HarmonicTable, TableParams};
use crate::increments::{cramer_tilt, IncrementLaw, LawError, StepLaw, TiltedLaw};
use crate::quad::QuadratureError;
use crate::rng::mix;
use crate::target_fns::{TargetError, TargetFunction};
use crate::walk_sim::{mc_estimate, mc_tilted_survival, McEstimate, SimError, StatKind, Statistic};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("unknown theorem id `{0}`")]
    UnknownTheorem(String),
    #[error("a sweep needs at least two values of n, got {0}")]
    InsufficientSweep(usize),
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Harmonic(#[from] HarmonicError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Predict(#[from] AsymptoticsError),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Whether the error stems from the configuration rather than a run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            HarnessError::Config(_) | HarnessError::UnknownTheorem(_) | HarnessError::InsufficientSweep(_) | HarnessError::Law(_) | HarnessError::Target(_) | HarnessError::Json(_)
        )
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VSource {
    Ladder,
    Killed,
    Supplied(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstSource {
    Computed,
    Supplied(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngredientPolicy {
    pub v_source: VSource,
    #[serde(default = "computed")]
    pub kappa_source: ConstSource,
    /// `int e^{-lambda t} V_lambda*(t) dt` for the drifted survival predictors.
    #[serde(default = "computed")]
    pub i_source: ConstSource,
}

fn computed() -> ConstSource {
    ConstSource::Computed
}

impl Default for IngredientPolicy {
    fn default() -> Self {
        Self {
            v_source: VSource::Ladder,
            kappa_source: ConstSource::Computed,
            i_source: ConstSource::Computed,
        }
    }
}

/// Monte Carlo budget for harmonic-function ingredients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicBudget {
    pub samples: u64,
    pub ladder_cap: u64,
    pub killed_n: u64,
    pub seed: u64,
}

impl Default for HarmonicBudget {
    fn default() -> Self {
        Self {
            samples: 20_000,
            ladder_cap: 1_000_000,
            killed_n: 10_000,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub law: String,
    pub theorem_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Target function (target grammar) for the `f`-forms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    pub n_list: Vec<u64>,
    pub samples: u64,
    pub seed: u64,
    #[serde(default)]
    pub ingredient_policy: IngredientPolicy,
    #[serde(default)]
    pub harmonic: HarmonicBudget,
    /// Accepted range of `mc / predicted`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<[f64; 2]>,
}

/// Minimum number of samples in a config.
pub const MIN_SAMPLES: u64 = 1000;

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self, HarnessError> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let s = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&s)
    }

    pub fn theorem(&self) -> Result<TheoremId, HarnessError> {
        self.theorem_id.parse().map_err(|_| HarnessError::UnknownTheorem(self.theorem_id.clone()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.theorem()?;
        self.law.parse::<IncrementLaw>()?;
        if self.n_list.is_empty() || self.n_list.windows(2).any(|w| w[0] >= w[1]) || self.n_list[0] == 0 {
            return Err(HarnessError::Config("n_list must be non-empty, positive and strictly ascending".into()));
        }
        if self.samples < MIN_SAMPLES {
            return Err(HarnessError::Config(format!("samples must be >= {MIN_SAMPLES}, got {}", self.samples)));
        }
        if let Some([lo, hi]) = self.band {
            if !(lo < hi) {
                return Err(HarnessError::Config(format!("band [{lo}, {hi}] is empty")));
            }
        }
        if let Some(t) = &self.target {
            t.parse::<TargetFunction>()?;
        }
        Ok(())
    }
}

/// One `n` of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub theorem: String,
    pub n: u64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub samples: u64,
    pub seed: u64,
    pub predicted: f64,
    pub ratio: f64,
    pub ratio_lo: f64,
    pub ratio_hi: f64,
}

impl ReportRow {
    fn new(name: &str, theorem: TheoremId, n: u64, mc: McEstimate, predicted: f64) -> Self {
        Self {
            name: name.to_string(),
            theorem: theorem.to_string(),
            n,
            mc_mean: mc.mean,
            mc_stderr: mc.stderr,
            samples: mc.count,
            seed: mc.seed,
            predicted,
            ratio: mc.mean / predicted,
            ratio_lo: (mc.mean - 4.0 * mc.stderr) / predicted,
            ratio_hi: (mc.mean + 4.0 * mc.stderr) / predicted,
        }
    }

    pub fn mc(&self) -> McEstimate {
        McEstimate {
            mean: self.mc_mean,
            stderr: self.mc_stderr,
            count: self.samples,
            seed: self.seed,
        }
    }

    pub fn in_band(&self, band: [f64; 2]) -> bool {
        self.ratio >= band[0] && self.ratio <= band[1]
    }
}

/// On-disk cache of estimated ingredients, keyed by a hash of the
/// estimation parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cache {
    dir: Option<PathBuf>,
}

/// Environment variable overriding the cache directory.
pub const CACHE_ENV: &str = "CONDWALK_CACHE";

impl Cache {
    pub fn disabled() -> Self {
        Self { dir: None }
    }

    pub fn at(dir: impl Into<PathBuf>) -> Self {
        Self { dir: Some(dir.into()) }
    }

    /// `$CONDWALK_CACHE`, or `.condwalk-cache` in the working directory.
    /// The value `off` disables caching.
    pub fn from_env() -> Self {
        match std::env::var(CACHE_ENV) {
            Ok(v) if v == "off" => Self::disabled(),
            Ok(v) if !v.is_empty() => Self::at(v),
            _ => Self::at(".condwalk-cache"),
        }
    }

    pub fn key<K: Serialize>(material: &K) -> String {
        let bytes = serde_json::to_vec(material).expect("cache keys serialize");
        hex::encode(Sha256::digest(bytes))
    }

    /// Returns the cached value for `material`, or computes and stores it.
    /// Unreadable entries are recomputed.
    pub fn get_or_compute<K, T, F>(&self, material: &K, compute: F) -> Result<T, HarnessError>
    where
        K: Serialize,
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T, HarnessError>,
    {
        let Some(dir) = &self.dir else {
            return compute();
        };
        let path = dir.join(format!("{}.json", Self::key(material)));
        if let Ok(s) = fs::read_to_string(&path) {
            if let Ok(v) = serde_json::from_str(&s) {
                return Ok(v);
            }
        }
        let v = compute()?;
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        // Write then rename so a concurrent reader never sees a partial file.
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, serde_json::to_vec(&v)?).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
        Ok(v)
    }
}

/// Grid for tables used in `kappa`-type integrals: fine steps near the
/// boundary, coarse beyond.
pub fn kappa_grid(sigma: f64) -> Vec<f64> {
    let mut g: Vec<f64> = (0..=32).map(|k| sigma * k as f64 / 8.0).collect();
    g.extend([5.0, 6.0, 8.0, 12.0, 16.0].iter().map(|m| m * sigma));
    g
}

#[derive(Serialize)]
struct TableKey<'a> {
    kind: &'static str,
    law: String,
    tilt: Option<u64>,
    grid: &'a [f64],
    params: &'a TableParams,
}

#[derive(Serialize)]
struct PointKey {
    kind: &'static str,
    law: String,
    tilt: Option<u64>,
    x: f64,
    method: EstimationMethod,
    samples: u64,
    seed: u64,
}

/// Dual table (`V*`, or `V_lambda*` under `tilt`) on [`kappa_grid`].
pub fn dual_table(law: &IncrementLaw, tilt: Option<&TiltedLaw>, budget: &HarmonicBudget, cache: &Cache) -> Result<HarmonicTable, HarnessError> {
    let sigma = tilt.map_or_else(|| law.sigma(), |t| t.tilted_variance.sqrt());
    let grid = kappa_grid(sigma);
    let params = TableParams {
        method: EstimationMethod::Ladder { cap: budget.ladder_cap },
        samples: budget.samples,
        seed: budget.seed,
    };
    let key = TableKey {
        kind: "dual_table",
        law: law.to_string(),
        tilt: tilt.map(|t| t.lambda.to_bits()),
        grid: &grid,
        params: &params,
    };
    cache.get_or_compute(&key, || Ok(build_harmonic_table(law, &grid, &params, true, tilt)?))
}

/// `V(x)` (or `V_lambda(x)` under `tilt`) per the policy.
pub fn v_ingredient(law: &IncrementLaw, tilt: Option<&TiltedLaw>, x: f64, source: VSource, budget: &HarmonicBudget, cache: &Cache) -> Result<f64, HarnessError> {
    let method = match source {
        VSource::Supplied(v) => return Ok(v),
        VSource::Ladder => EstimationMethod::Ladder { cap: budget.ladder_cap },
        VSource::Killed => EstimationMethod::Killed { n: budget.killed_n },
    };
    let key = PointKey {
        kind: "v_point",
        law: law.to_string(),
        tilt: tilt.map(|t| t.lambda.to_bits()),
        x,
        method,
        samples: budget.samples,
        seed: budget.seed,
    };
    let est: McEstimate = cache.get_or_compute(&key, || {
        let e = match (method, tilt) {
            (EstimationMethod::Ladder { cap }, Some(t)) => estimate_v_ladder(t, x, cap, budget.samples, budget.seed, false)?.estimate,
            (EstimationMethod::Ladder { cap }, None) => estimate_v_ladder(law, x, cap, budget.samples, budget.seed, false)?.estimate,
            (EstimationMethod::Killed { n }, Some(t)) => estimate_v_killed(t, x, n, budget.samples, budget.seed, false)?,
            (EstimationMethod::Killed { n }, None) => estimate_v_killed(law, x, n, budget.samples, budget.seed, false)?,
        };
        Ok(e)
    })?;
    Ok(est.mean)
}

/// `y = sigma sqrt(q n log n)`.
pub fn moderate_deviation_level(sigma: f64, q: f64, n: u64) -> f64 {
    let n = n as f64;
    sigma * (q * n * n.ln()).sqrt()
}

struct Plan {
    theorem: TheoremId,
    law: IncrementLaw,
    tilt: Option<TiltedLaw>,
    x: f64,
    target: Option<TargetFunction>,
}

impl Plan {
    fn new(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let theorem = cfg.theorem()?;
        let law: IncrementLaw = cfg.law.parse()?;
        let tilt = if theorem.is_drifted() { Some(cramer_tilt(&law)?) } else { None };
        let target = cfg.target.as_deref().map(str::parse::<TargetFunction>).transpose()?;
        Ok(Self {
            theorem,
            law,
            tilt,
            x: cfg.x.unwrap_or(0.0),
            target,
        })
    }

    fn need<T: Copy>(v: Option<T>, name: &str, id: TheoremId) -> Result<T, HarnessError> {
        v.ok_or_else(|| HarnessError::Config(format!("theorem {id} needs `{name}` in the config")))
    }

    fn target(&self) -> Result<&TargetFunction, HarnessError> {
        self.target
            .as_ref()
            .ok_or_else(|| HarnessError::Config(format!("theorem {} needs `target` in the config", self.theorem)))
    }

    /// Statistic whose expectation is the left-hand side at `n`.
    fn statistic(&self, cfg: &ExperimentConfig, n: u64) -> Result<Statistic, HarnessError> {
        use TheoremId::*;
        let id = self.theorem;
        let sigma = self.law.sigma();
        let kind = match id {
            AA001 | AA002_1 | AA002_2 | BB001 | BB002_1 | BB002_2 => StatKind::Target {
                f: self.target()?.clone(),
                y_shift: Self::need(cfg.y, "y", id)?,
            },
            Expf => StatKind::Target {
                f: TargetFunction::exponential(Self::need(cfg.a, "a", id)?)?,
                y_shift: 0.0,
            },
            AA001D | AA002bis | BB001D | BB002bis => StatKind::Interval {
                y: Self::need(cfg.y, "y", id)?,
                delta: Self::need(cfg.delta, "delta", id)?,
            },
            MD | BB001DMD => StatKind::Interval {
                y: moderate_deviation_level(sigma, Self::need(cfg.q, "q", id)?, n),
                delta: Self::need(cfg.delta, "delta", id)?,
            },
            LltMd => StatKind::FreeInterval {
                y: moderate_deviation_level(sigma, Self::need(cfg.q, "q", id)?, n),
                delta: Self::need(cfg.delta, "delta", id)?,
            },
            Llt => {
                let delta = Self::need(cfg.delta, "delta", id)?;
                StatKind::FreeInterval {
                    y: cfg.y.unwrap_or(0.0) - delta / 2.0,
                    delta,
                }
            }
            TauS | TauL | TauSTilt | TauLTilt => StatKind::ExitAtN,
            IcltS | IcltL => match cfg.t {
                Some(t) => StatKind::ScaledCdf { t },
                None => StatKind::Survival,
            },
            IGL1 | IGL2 => StatKind::Survival,
        };
        Ok(Statistic::new(kind))
    }

    /// Ingredients that do not depend on `n`.
    fn base_ingredients(&self, cfg: &ExperimentConfig, cache: &Cache) -> Result<Ingredients, HarnessError> {
        use TheoremId::*;
        let id = self.theorem;
        let pol = &cfg.ingredient_policy;
        let budget = &cfg.harmonic;
        let mut ing = Ingredients {
            n: 1,
            sigma: Some(self.law.sigma()),
            x: Some(self.x),
            y: cfg.y,
            delta: cfg.delta,
            t: cfg.t,
            q: cfg.q,
            a: cfg.a,
            ..Default::default()
        };
        let needs_v = matches!(id, AA001 | AA001D | MD | AA002_1 | AA002_2 | AA002bis | TauS | IcltS | Expf);
        if needs_v {
            ing.v_x = Some(v_ingredient(&self.law, None, self.x, pol.v_source, budget, cache)?);
        }
        if matches!(id, AA001 | AA002_2 | BB001 | BB002_2 | Llt) {
            ing.f_int = Some(match id {
                Llt => Self::need(cfg.delta, "delta", id)?,
                _ => self.target()?.total_integral()?,
            });
        }
        let needs_table = matches!(id, AA002_1 | BB002_1 | Expf) || (matches!(id, TauS | TauL) && pol.kappa_source == ConstSource::Computed);
        let table = if needs_table { Some(dual_table(&self.law, None, budget, cache)?) } else { None };
        if matches!(id, AA002_1 | BB002_1) {
            let y = Self::need(cfg.y, "y", id)?;
            ing.f_vstar_int = Some(harmonic::target_vstar_integral(table.as_ref().unwrap(), self.target()?, y)?);
        }
        if id == Expf {
            let a = Self::need(cfg.a, "a", id)?;
            ing.exp_vstar_int = Some(harmonic::exp_vstar_integral(table.as_ref().unwrap(), a)?);
        }
        if matches!(id, TauS | TauL) {
            ing.kappa = Some(match pol.kappa_source {
                ConstSource::Supplied(k) => k,
                ConstSource::Computed => harmonic::kappa_constant(&self.law, table.as_ref().unwrap(), None, 1e-9)?.kappa,
            });
        }
        if let Some(tilt) = &self.tilt {
            let computed_needed = pol.i_source == ConstSource::Computed || (matches!(id, TauSTilt | TauLTilt) && pol.kappa_source == ConstSource::Computed);
            let ttable = if computed_needed { Some(dual_table(&self.law, Some(tilt), budget, cache)?) } else { None };
            let v_lambda_x = v_ingredient(&self.law, Some(tilt), self.x, pol.v_source, budget, cache)?;
            let i_integral = match (id, pol.i_source) {
                (IGL1 | IGL2, ConstSource::Supplied(i)) => Some(i),
                (IGL1 | IGL2, ConstSource::Computed) => Some(harmonic::exp_vstar_integral(ttable.as_ref().unwrap(), tilt.lambda)?),
                _ => None,
            };
            if matches!(id, TauSTilt | TauLTilt) {
                ing.kappa = Some(match pol.kappa_source {
                    ConstSource::Supplied(k) => k,
                    ConstSource::Computed => harmonic::kappa_constant(&self.law, ttable.as_ref().unwrap(), Some(tilt), 1e-9)?.kappa,
                });
            }
            ing.drift = Some(DriftIngredients {
                lambda: tilt.lambda,
                log_mgf: tilt.log_mgf,
                tilted_sigma: tilt.tilted_variance.sqrt(),
                v_lambda_x,
                i_integral,
            });
        }
        Ok(ing)
    }
}

/// Runs `cfg` with ingredients cached per [`Cache::from_env`].
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>, HarnessError> {
    run_experiment_with(cfg, &Cache::from_env())
}

/// Runs `cfg`: one row per `n`, reproducible from the config alone.
pub fn run_experiment_with(cfg: &ExperimentConfig, cache: &Cache) -> Result<Vec<ReportRow>, HarnessError> {
    let plan = Plan::new(cfg)?;
    let base = plan.base_ingredients(cfg, cache)?;
    let id = plan.theorem;
    let mut rows = Vec::with_capacity(cfg.n_list.len());
    for &n in &cfg.n_list {
        let stat = plan.statistic(cfg, n)?;
        let seed = mix(cfg.seed, n);
        let mc = match &plan.tilt {
            Some(tilt) => mc_tilted_survival(&plan.law, tilt, plan.x, n, &stat, cfg.samples, seed)?,
            None => mc_estimate(&plan.law, plan.x, n, &stat, cfg.samples, seed)?,
        };
        let mut ing = base.clone();
        ing.n = n;
        if matches!(id, TheoremId::BB001DMD) {
            ing.eta = Some(plan.x / (plan.law.sigma() * (n as f64).sqrt()));
        }
        let p = predict(id, &ing)?;
        if !(p.value > 0.0) {
            return Err(HarnessError::Config(format!("predicted value at n={n} is {}, ratios need a positive prediction", p.value)));
        }
        rows.push(ReportRow::new(&cfg.name, id, n, mc, p.value));
    }
    Ok(rows)
}

/// Rows of a sweep with the trend of `|ratio - 1|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<ReportRow>,
    /// `|ratio - 1|` never increases from one `n` to the next beyond the
    /// overlap of their `4 stderr` intervals.
    pub error_non_increasing: bool,
}

pub fn convergence_sweep(cfg: &ExperimentConfig, n_list: Option<&[u64]>) -> Result<SweepReport, HarnessError> {
    convergence_sweep_with(cfg, n_list, &Cache::from_env())
}

pub fn convergence_sweep_with(cfg: &ExperimentConfig, n_list: Option<&[u64]>, cache: &Cache) -> Result<SweepReport, HarnessError> {
    let mut cfg = cfg.clone();
    if let Some(ns) = n_list {
        cfg.n_list = ns.to_vec();
    }
    if cfg.n_list.len() < 2 {
        return Err(HarnessError::InsufficientSweep(cfg.n_list.len()));
    }
    let rows = run_experiment_with(&cfg, cache)?;
    let error_non_increasing = rows.windows(2).all(|w| {
        let (a, b) = (&w[0], &w[1]);
        let slack = (a.ratio_hi - a.ratio_lo) / 2.0 + (b.ratio_hi - b.ratio_lo) / 2.0;
        (b.ratio - 1.0).abs() <= (a.ratio - 1.0).abs() + slack
    });
    Ok(SweepReport { rows, error_non_increasing })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(HarnessError::Config(format!("unknown report format `{s}`"))),
        }
    }
}

pub const CSV_HEADER: &str = "name,theorem,n,mc_mean,mc_stderr,samples,seed,predicted,ratio,ratio_lo,ratio_hi";

fn sci(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Report text; reals are written with 17 significant digits.
pub fn render_report(rows: &[ReportRow], format: ReportFormat) -> Result<String, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::Config("a report needs at least one row".into()));
    }
    Ok(match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(rows)?;
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut s = String::from(CSV_HEADER);
            s.push('\n');
            for r in rows {
                let fields = [
                    csv_field(&r.name),
                    csv_field(&r.theorem),
                    r.n.to_string(),
                    sci(r.mc_mean),
                    sci(r.mc_stderr),
                    r.samples.to_string(),
                    r.seed.to_string(),
                    sci(r.predicted),
                    sci(r.ratio),
                    sci(r.ratio_lo),
                    sci(r.ratio_hi),
                ];
                s.push_str(&fields.join(","));
                s.push('\n');
            }
            s
        }
    })
}

pub fn emit_report(rows: &[ReportRow], format: ReportFormat, path: &Path) -> Result<(), HarnessError> {
    let text = render_report(rows, format)?;
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}

/// Parses a JSON report written by [`emit_report`].
pub fn read_json_report(path: &Path) -> Result<Vec<ReportRow>, HarnessError> {
    let s = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&s)?)
}

/// Parses a CSV report written by [`emit_report`] (names without commas).
pub fn parse_csv_report(text: &str) -> Result<Vec<ReportRow>, HarnessError> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(HarnessError::Config("missing or unexpected CSV header".into()));
    }
    let bad = |l: &str| HarnessError::Config(format!("bad CSV line `{l}`"));
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 11 {
                return Err(bad(l));
            }
            let real = |i: usize| f[i].parse::<f64>().map_err(|_| bad(l));
            let int = |i: usize| f[i].parse::<u64>().map_err(|_| bad(l));
            Ok(ReportRow {
                name: f[0].to_string(),
                theorem: f[1].to_string(),
                n: int(2)?,
                mc_mean: real(3)?,
                mc_stderr: real(4)?,
                samples: int(5)?,
                seed: int(6)?,
                predicted: real(7)?,
                ratio: real(8)?,
                ratio_lo: real(9)?,
                ratio_hi: real(10)?,
            })
        })
        .collect()
}

/// Whether every row lies in the config's band (vacuously true without one).
pub fn passes_band(cfg: &ExperimentConfig, rows: &[ReportRow]) -> bool {
    match cfg.band {
        Some(b) => rows.iter().all(|r| r.in_band(b)),
        None => true,
    }
}
