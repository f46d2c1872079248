//! Monte Carlo estimates of the harmonic functions `V`, `V*` (and their
//! tilted versions), interpolated tables, and the constants `kappa`,
//! `kappa_lambda`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::increments::{IncrementLaw, StepLaw, TiltedLaw};
use crate::quad::{self, QuadratureError};
use crate::target_fns::TargetFunction;
use crate::walk_sim::{killed_walk, mc_estimate, run_paths, run_scalar, McEstimate, SimError, StatKind, Statistic};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarmonicError {
    #[error("harmonic functions need a centred law, mean is {mean:e}")]
    DriftedLaw { mean: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HarmonicWarning {
    /// More than `1e-3` of the paths were still alive at the cap.
    CensoringExcess { rate: f64 },
}

/// Censoring rate above which [`HarmonicWarning::CensoringExcess`] is raised.
pub const CENSORING_LIMIT: f64 = 1e-3;
const DRIFT_TOL: f64 = 1e-10;

/// Ladder estimate of `V(x)` with its censoring diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderEstimate {
    pub estimate: McEstimate,
    pub censoring_rate: f64,
    /// Bound on the downward bias from censored paths: censoring rate times
    /// the mean undershoot of the exited paths.
    pub bias_bound: f64,
    pub warning: Option<HarmonicWarning>,
}

fn check_centred<L: StepLaw>(law: &L) -> Result<(), HarmonicError> {
    let m = law.mean();
    if m.abs() > DRIFT_TOL {
        Err(HarmonicError::DriftedLaw { mean: m })
    } else {
        Ok(())
    }
}

fn sign(dual: bool) -> f64 {
    if dual {
        -1.0
    } else {
        1.0
    }
}

/// `V(x) = -E S_{tau_x}` by simulating each path to its exit (or `cap`).
/// A censored path contributes `x`, i.e. a zero undershoot.
pub fn estimate_v_ladder<L: StepLaw>(law: &L, x: f64, cap: u64, samples: u64, seed: u64, dual: bool) -> Result<LadderEstimate, HarmonicError> {
    check_centred(law)?;
    if !(x >= 0.0) || samples == 0 || cap == 0 {
        return Err(HarmonicError::InvalidInput(format!("x={x}, cap={cap}, samples={samples}")));
    }
    let s = sign(dual);
    let acc = run_paths(samples, seed, 2, |rng, out| {
        let (exit, pos) = killed_walk(law, x, cap, s, rng);
        match exit {
            Some(_) => {
                out[0] = x - pos;
                out[1] = 0.0;
            }
            None => {
                out[0] = x;
                out[1] = 1.0;
            }
        }
    });
    let estimate = acc[0].estimate(seed);
    let rate = acc[1].estimate(seed).mean;
    let undershoot = if rate < 1.0 { (estimate.mean - x) / (1.0 - rate) } else { 0.0 };
    Ok(LadderEstimate {
        estimate,
        censoring_rate: rate,
        bias_bound: rate * undershoot.max(0.0),
        warning: (rate > CENSORING_LIMIT).then_some(HarmonicWarning::CensoringExcess { rate }),
    })
}

/// `E(x + S_n; tau_x > n)`, a finite-`n` approximant of `V(x)`.
pub fn estimate_v_killed<L: StepLaw>(law: &L, x: f64, n: u64, samples: u64, seed: u64, dual: bool) -> Result<McEstimate, HarmonicError> {
    check_centred(law)?;
    let stat = Statistic {
        kind: StatKind::KilledPosition,
        dual,
    };
    Ok(mc_estimate(law, x, n, &stat, samples, seed)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum EstimationMethod {
    Ladder { cap: u64 },
    Killed { n: u64 },
}

/// Estimation budget of a table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableParams {
    pub method: EstimationMethod,
    pub samples: u64,
    pub seed: u64,
}

impl Default for TableParams {
    fn default() -> Self {
        Self {
            method: EstimationMethod::Ladder { cap: 1_000_000 },
            samples: 20_000,
            seed: 0x5eed,
        }
    }
}

/// Grid `{0} U {sigma 2^{k/2} : k = -2..10}`.
pub fn default_grid(sigma: f64) -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend((-2..=10).map(|k| sigma * 2f64.powf(k as f64 / 2.0)));
    g
}

/// Estimates of `V` (or `V*`) on a grid, linearly interpolated inside the
/// grid and extended as `x + offset` beyond it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicTable {
    pub grid: Vec<f64>,
    pub values: Vec<McEstimate>,
    pub dual: bool,
    pub tilt: Option<f64>,
    pub extrapolation_offset: f64,
    pub censoring: Vec<f64>,
}

impl HarmonicTable {
    /// Assembles a table from precomputed estimates.
    pub fn from_estimates(grid: Vec<f64>, values: Vec<McEstimate>, dual: bool, tilt: Option<f64>) -> Result<Self, HarmonicError> {
        if grid.is_empty() || grid.len() != values.len() {
            return Err(HarmonicError::InvalidInput("grid and values must be non-empty and of equal length".into()));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) || grid[0] < 0.0 {
            return Err(HarmonicError::InvalidInput("grid must be strictly increasing and >= 0".into()));
        }
        let offset = fit_offset(&grid, &values);
        let censoring = vec![0.0; grid.len()];
        Ok(Self {
            grid,
            values,
            dual,
            tilt,
            extrapolation_offset: offset,
            censoring,
        })
    }

    /// Interpolated `V(x)` for `x >= 0`; zero below 0.
    pub fn eval(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let g = &self.grid;
        let last = g.len() - 1;
        if x >= g[last] {
            if x == g[last] {
                return self.values[last].mean;
            }
            return x + self.extrapolation_offset;
        }
        if x <= g[0] {
            return self.values[0].mean;
        }
        let i = g.partition_point(|&p| p <= x) - 1;
        let t = (x - g[i]) / (g[i + 1] - g[i]);
        self.values[i].mean * (1.0 - t) + self.values[i + 1].mean * t
    }

    /// Harmonic extension to `t < 0`: `V(t) = E[V(t + s X); t + s X >= 0]`
    /// with `s = -1` for a dual table. Equals [`Self::eval`] for `t >= 0`.
    pub fn extended<L: StepLaw>(&self, law: &L, t: f64) -> Result<f64, QuadratureError> {
        if t >= 0.0 {
            return Ok(self.eval(t));
        }
        let breaks: Vec<f64> = self.grid.iter().map(|&g| self.step_to(t, g)).collect();
        if self.dual {
            // t - X >= 0  <=>  X <= t
            law.expect_on(|x| self.eval(t - x), f64::NEG_INFINITY, t, &breaks)
        } else {
            law.expect_on(|x| self.eval(t + x), -t, f64::INFINITY, &breaks)
        }
    }

    /// Increment that moves `t` to `target`.
    fn step_to(&self, t: f64, target: f64) -> f64 {
        if self.dual {
            t - target
        } else {
            target - t
        }
    }

    fn check_invariants(&self) -> Vec<String> {
        let mut issues = Vec::new();
        for (x, v) in self.grid.iter().zip(&self.values) {
            if v.mean < x - 4.0 * v.stderr {
                issues.push(format!("V({x}) = {} below x", v.mean));
            }
        }
        for (i, w) in self.values.windows(2).enumerate() {
            if w[1].mean < w[0].mean - 4.0 * w[0].combined_stderr(&w[1]) {
                issues.push(format!("V decreases between grid points {} and {}", self.grid[i], self.grid[i + 1]));
            }
        }
        issues
    }

    /// Violations of `x <= V(x)` and monotonicity beyond 4 standard errors.
    pub fn invariant_violations(&self) -> Vec<String> {
        self.check_invariants()
    }
}

/// Offset `c` in `V(x) ~ x + c`, fitted by inverse-variance weighting over
/// the grid points in the top decade (at least two points); never negative.
fn fit_offset(grid: &[f64], values: &[McEstimate]) -> f64 {
    let top = *grid.last().unwrap();
    let mut idx: Vec<usize> = (0..grid.len()).filter(|&i| grid[i] >= top / 10.0).collect();
    if idx.len() < 2 {
        idx = (grid.len().saturating_sub(2)..grid.len()).collect();
    }
    let (mut num, mut den) = (0.0, 0.0);
    for &i in &idx {
        let w = 1.0 / values[i].stderr.max(1e-6).powi(2);
        num += w * (values[i].mean - grid[i]);
        den += w;
    }
    (num / den).max(0.0)
}

/// Builds a table of `V` (or `V*` when `dual`), estimated under the tilted
/// law when `tilt` is given. All grid points share the seed.
pub fn build_harmonic_table(
    law: &IncrementLaw,
    grid: &[f64],
    params: &TableParams,
    dual: bool,
    tilt: Option<&TiltedLaw>,
) -> Result<HarmonicTable, HarmonicError> {
    match tilt {
        Some(t) => {
            if &t.base != law {
                return Err(HarmonicError::InvalidInput(format!("tilt of {} used with {law}", t.base)));
            }
            build_with(t, grid, params, dual, Some(t.lambda))
        }
        None => build_with(law, grid, params, dual, None),
    }
}

fn build_with<L: StepLaw>(law: &L, grid: &[f64], params: &TableParams, dual: bool, tilt: Option<f64>) -> Result<HarmonicTable, HarmonicError> {
    check_centred(law)?;
    let mut values = Vec::with_capacity(grid.len());
    let mut censoring = Vec::with_capacity(grid.len());
    for &x in grid {
        match params.method {
            EstimationMethod::Ladder { cap } => {
                let e = estimate_v_ladder(law, x, cap, params.samples, params.seed, dual)?;
                values.push(e.estimate);
                censoring.push(e.censoring_rate);
            }
            EstimationMethod::Killed { n } => {
                values.push(estimate_v_killed(law, x, n, params.samples, params.seed, dual)?);
                censoring.push(0.0);
            }
        }
    }
    let mut table = HarmonicTable::from_estimates(grid.to_vec(), values, dual, tilt)?;
    table.censoring = censoring;
    Ok(table)
}

/// `E V(x + X) 1{x + X >= 0} - V(x)` with `V` the table interpolant, by
/// Monte Carlo over one step of `law` (negated for a dual table).
pub fn harmonicity_residual<L: StepLaw>(law: &L, table: &HarmonicTable, x: f64, samples: u64, seed: u64) -> McEstimate {
    let s = sign(table.dual);
    let vx = table.eval(x);
    run_scalar(samples, seed, |rng| {
        let y = x + s * law.sample(rng);
        if y >= 0.0 {
            table.eval(y) - vx
        } else {
            -vx
        }
    })
}

/// Deterministic counterpart of [`harmonicity_residual`] by quadrature.
pub fn harmonicity_defect<L: StepLaw>(law: &L, table: &HarmonicTable, x: f64) -> Result<f64, QuadratureError> {
    let s = sign(table.dual);
    let breaks: Vec<f64> = table.grid.iter().map(|&g| s * (g - x)).collect();
    let (lo, hi) = if table.dual { (f64::NEG_INFINITY, x) } else { (-x, f64::INFINITY) };
    Ok(law.expect_on(|v| table.eval(x + s * v), lo, hi, &breaks)? - table.eval(x))
}

/// `kappa` (or `kappa_lambda`) from both of its integral forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaResult {
    /// `int_{R+} P(t + X < 0) e^{-lambda t} V*(t) dt`.
    pub kappa: f64,
    /// `E e^{lambda X} int_{-inf}^0 e^{-lambda t} V*(t) dt`, with `V*`
    /// extended below zero by one harmonic step.
    pub first_form: f64,
    /// `|first_form / kappa - 1|`.
    pub gap: f64,
}

/// Integrand floor for truncating the half-line integrals.
const KAPPA_FLOOR: f64 = 1e-12;

/// Computes `kappa` from a table of `V*` (built under the tilted law when
/// `tilt` is given).
pub fn kappa_constant(law: &IncrementLaw, dual_table: &HarmonicTable, tilt: Option<&TiltedLaw>, quad_tol: f64) -> Result<KappaResult, HarmonicError> {
    if !dual_table.dual {
        return Err(HarmonicError::InvalidInput("kappa needs a table of the dual harmonic function".into()));
    }
    let lambda = tilt.map_or(0.0, |t| t.lambda);
    if let Some(t) = tilt {
        if &t.base != law {
            return Err(HarmonicError::InvalidInput(format!("tilt of {} used with {law}", t.base)));
        }
    }
    let second_integrand = |t: f64| law.left_exit_prob(t) * (-lambda * t).exp() * dual_table.eval(t);
    let t_max = quad::truncation_point(second_integrand, 0.0, law.sigma() * 0.25, KAPPA_FLOOR);
    let mut pts = quad::uniform_points(0.0, t_max, 32, &dual_table.grid);
    pts.retain(|&p| p <= t_max);
    let kappa = quad::integrate_panels(second_integrand, &pts, quad_tol)?;

    let first_form = match tilt {
        Some(t) => first_form_integral(t, dual_table, lambda, quad_tol)? * t.log_mgf.exp(),
        None => first_form_integral(law, dual_table, 0.0, quad_tol)?,
    };
    if !(kappa > 0.0) {
        return Err(HarmonicError::InvalidInput(format!("kappa evaluated to {kappa}")));
    }
    Ok(KappaResult {
        kappa,
        first_form,
        gap: (first_form / kappa - 1.0).abs(),
    })
}

/// `int_{-inf}^0 e^{-lambda t} V*(t) dt` with the extension under `step_law`.
fn first_form_integral<L: StepLaw>(step_law: &L, table: &HarmonicTable, lambda: f64, tol: f64) -> Result<f64, HarmonicError> {
    let integrand = |t: f64| -> f64 {
        match table.extended(step_law, t) {
            Ok(v) => (-lambda * t).exp() * v,
            Err(_) => f64::NAN,
        }
    };
    let t_min = -quad::truncation_point(|u| integrand(-u), 0.0, step_law.sigma() * 0.25, KAPPA_FLOOR);
    let pts = quad::uniform_points(t_min, 0.0, 32, &[]);
    Ok(quad::integrate_panels(integrand, &pts, tol)?)
}

/// `int_{R+} w(t) V(t) dt` for a weight that decays; `breaks` are kinks of `w`.
pub fn weighted_table_integral<W: Fn(f64) -> f64>(table: &HarmonicTable, w: W, breaks: &[f64], hi: f64, tol: f64) -> Result<f64, QuadratureError> {
    let end = if hi.is_finite() {
        hi
    } else {
        quad::truncation_point(|t| w(t) * table.eval(t), 0.0, 0.25, 1e-16)
    };
    if !(end > 0.0) {
        return Ok(0.0);
    }
    let mut extra: Vec<f64> = table.grid.clone();
    extra.extend_from_slice(breaks);
    let pts = quad::uniform_points(0.0, end, 64, &extra);
    quad::integrate_panels(|t| w(t) * table.eval(t), &pts, tol)
}

/// `int_{R+} f(t - y) V*(t) dt`.
pub fn target_vstar_integral(table: &HarmonicTable, f: &TargetFunction, y: f64) -> Result<f64, QuadratureError> {
    let breaks: Vec<f64> = f.breakpoints().iter().map(|b| b + y).collect();
    let hi = f.mass_horizon() + y;
    weighted_table_integral(table, |t| f.eval(t - y), &breaks, hi, 1e-10)
}

/// `int_{R+} e^{-a t} V*(t) dt`.
pub fn exp_vstar_integral(table: &HarmonicTable, a: f64) -> Result<f64, QuadratureError> {
    weighted_table_integral(table, |t| (-a * t).exp(), &[], f64::INFINITY, 1e-10)
}
