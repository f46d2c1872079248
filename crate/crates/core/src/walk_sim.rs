//! Monte Carlo engine for the killed walk `x + S_k` and its dual.
//!
//! Paths are grouped in chunks of [`CHUNK`] paths. Chunk `i` draws from its
//! own stream (see [`crate::rng`]) and chunk accumulators are merged in chunk
//! order, so every estimate is a pure function of its inputs and seed.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::increments::{cramer_tilt, IncrementLaw, LawError, StepLaw, TiltedLaw};
use crate::rng::{chunk_rng, WalkRng, CHUNK};
use crate::target_fns::{TargetError, TargetFunction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation input: {0}")]
    InvalidInput(String),
    #[error("tilt was derived from {tilt_base}, not from {base}")]
    MismatchedTilt { base: String, tilt_base: String },
    #[error("statistic {0} is not supported by the tilted estimator")]
    UnsupportedStatistic(String),
    #[error("cannot parse statistic {input:?}: {reason}")]
    Parse { input: String, reason: String },
    #[error(transparent)]
    Law(#[from] LawError),
}

/// Exit time of one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitTime {
    Exited(u64),
    Censored(u64),
}

/// Outcome of one simulated path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitSample {
    pub exit_time: ExitTime,
    /// Position at the horizon, or the (negative) position at exit.
    pub terminal: f64,
    pub survived: bool,
}

/// Point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: u64,
    pub seed: u64,
}

impl McEstimate {
    /// Estimate of `mean - other.mean` with independent errors combined.
    pub fn combined_stderr(&self, other: &McEstimate) -> f64 {
        self.stderr.hypot(other.stderr)
    }

    /// `|self - other| <= k * combined stderr`.
    pub fn agrees_with(&self, other: &McEstimate, k: f64) -> bool {
        (self.mean - other.mean).abs() <= k * self.combined_stderr(other)
    }

    /// `|self - value| <= k * stderr`.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr
    }
}

/// Streaming mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, o: &Welford) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n as f64 / n as f64;
        self.m2 += o.m2 + d * d * (self.n as f64) * (o.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn estimate(&self, seed: u64) -> McEstimate {
        let sd = if self.n > 1 {
            (self.m2.max(0.0) / (self.n - 1) as f64).sqrt()
        } else {
            0.0
        };
        McEstimate {
            mean: self.mean,
            stderr: if self.n > 0 { sd / (self.n as f64).sqrt() } else { 0.0 },
            count: self.n,
            seed,
        }
    }
}

/// Runs `samples` paths, each writing `width` outputs, and returns one
/// accumulator per output.
pub fn run_paths<F>(samples: u64, seed: u64, width: usize, per_path: F) -> Vec<Welford>
where
    F: Fn(&mut WalkRng, &mut [f64]) + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    let partial: Vec<Vec<Welford>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let count = CHUNK.min(samples - c * CHUNK);
            let mut acc = vec![Welford::default(); width];
            let mut out = vec![0.0; width];
            for _ in 0..count {
                per_path(&mut rng, &mut out);
                for (a, &v) in acc.iter_mut().zip(&out) {
                    a.push(v);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Welford::default(); width];
    for part in &partial {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    total
}

/// Single-output convenience wrapper around [`run_paths`].
pub fn run_scalar<F>(samples: u64, seed: u64, per_path: F) -> McEstimate
where
    F: Fn(&mut WalkRng) -> f64 + Sync,
{
    run_paths(samples, seed, 1, |r, out| out[0] = per_path(r))[0].estimate(seed)
}

/// Walks `x + sign * S_k` for at most `horizon` steps, stopping at the first
/// strictly negative position. Returns the exit step (if any) and the final
/// position.
#[inline]
pub fn killed_walk<L: StepLaw, R: Rng + ?Sized>(law: &L, x: f64, horizon: u64, sign: f64, rng: &mut R) -> (Option<u64>, f64) {
    let mut pos = x;
    for k in 1..=horizon {
        pos += sign * law.sample(rng);
        if pos < 0.0 {
            return (Some(k), pos);
        }
    }
    (None, pos)
}

/// Simulates one path of the killed walk up to `horizon`.
pub fn simulate_exit<L: StepLaw, R: Rng + ?Sized>(law: &L, x: f64, horizon: u64, rng: &mut R) -> ExitSample {
    let (exit, pos) = killed_walk(law, x, horizon, 1.0, rng);
    match exit {
        Some(k) => ExitSample {
            exit_time: ExitTime::Exited(k),
            terminal: pos,
            survived: false,
        },
        None => ExitSample {
            exit_time: ExitTime::Censored(horizon),
            terminal: pos,
            survived: true,
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StatKind {
    /// `1{tau_x > n}`
    Survival,
    /// `1{tau_x = n}`
    ExitAtN,
    /// `f(x + S_n - y_shift) 1{tau_x > n}`
    Target { f: TargetFunction, y_shift: f64 },
    /// `1{x + S_n in [y, y + delta], tau_x > n}`
    Interval { y: f64, delta: f64 },
    /// `1{(x + S_n)/(sigma sqrt n) <= t, tau_x > n}`
    ScaledCdf { t: f64 },
    /// `(x + S_n) 1{tau_x > n}`
    KilledPosition,
    /// `1{x + S_n in [y, y + delta]}` without killing.
    FreeInterval { y: f64, delta: f64 },
    /// `1{max_{k <= n} |S_k| > u}` without killing.
    MaxAbsAbove { u: f64 },
}

/// A path functional, on the walk (`dual = false`) or on `S* = -S`.
#[derive(Debug, Clone, PartialEq)]
pub struct Statistic {
    pub kind: StatKind,
    pub dual: bool,
}

impl Statistic {
    pub fn new(kind: StatKind) -> Self {
        Self { kind, dual: false }
    }

    pub fn survival() -> Self {
        Self::new(StatKind::Survival)
    }

    pub fn exit_at_n() -> Self {
        Self::new(StatKind::ExitAtN)
    }

    pub fn interval(y: f64, delta: f64) -> Self {
        Self::new(StatKind::Interval { y, delta })
    }

    pub fn dual(mut self) -> Self {
        self.dual = true;
        self
    }

    fn validate(&self) -> Result<(), SimError> {
        match self.kind {
            StatKind::Interval { delta, .. } | StatKind::FreeInterval { delta, .. } if !(delta > 0.0) => {
                Err(SimError::InvalidInput(format!("interval width must be > 0, got {delta}")))
            }
            StatKind::MaxAbsAbove { u } if !(u >= 0.0) => Err(SimError::InvalidInput(format!("u must be >= 0, got {u}"))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dual {
            write!(f, "dual:")?;
        }
        match &self.kind {
            StatKind::Survival => write!(f, "survival"),
            StatKind::ExitAtN => write!(f, "exit_at_n"),
            StatKind::Target { f: t, y_shift } => write!(f, "target:{y_shift}:{t}"),
            StatKind::Interval { y, delta } => write!(f, "interval:{y},{delta}"),
            StatKind::ScaledCdf { t } => write!(f, "scaled_cdf:{t}"),
            StatKind::KilledPosition => write!(f, "killed_position"),
            StatKind::FreeInterval { y, delta } => write!(f, "free_interval:{y},{delta}"),
            StatKind::MaxAbsAbove { u } => write!(f, "max_abs:{u}"),
        }
    }
}

impl FromStr for Statistic {
    type Err = SimError;

    /// Grammar: `[dual:]survival | exit_at_n | killed_position |
    /// interval:y,delta | free_interval:y,delta | scaled_cdf:t | max_abs:u |
    /// target:y_shift:<target>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: String| SimError::Parse {
            input: s.to_string(),
            reason,
        };
        let num = |v: &str| v.trim().parse::<f64>().map_err(|e| err(format!("bad number {v:?}: {e}")));
        let (dual, rest) = match s.trim().strip_prefix("dual:") {
            Some(r) => (true, r),
            None => (false, s.trim()),
        };
        let (head, body) = rest.split_once(':').unwrap_or((rest, ""));
        let pair = |b: &str| -> Result<(f64, f64), SimError> {
            let (a, c) = b.split_once(',').ok_or_else(|| err("expected two numbers".into()))?;
            Ok((num(a)?, num(c)?))
        };
        let kind = match head {
            "survival" => StatKind::Survival,
            "exit_at_n" => StatKind::ExitAtN,
            "killed_position" => StatKind::KilledPosition,
            "interval" => {
                let (y, delta) = pair(body)?;
                StatKind::Interval { y, delta }
            }
            "free_interval" => {
                let (y, delta) = pair(body)?;
                StatKind::FreeInterval { y, delta }
            }
            "scaled_cdf" => StatKind::ScaledCdf { t: num(body)? },
            "max_abs" => StatKind::MaxAbsAbove { u: num(body)? },
            "target" => {
                let (y, spec) = body.split_once(':').ok_or_else(|| err("target:y_shift:<target>".into()))?;
                StatKind::Target {
                    f: spec.parse().map_err(|e: TargetError| err(e.to_string()))?,
                    y_shift: num(y)?,
                }
            }
            other => return Err(err(format!("unknown statistic {other:?}"))),
        };
        let st = Statistic { kind, dual };
        st.validate()?;
        Ok(st)
    }
}

fn check_inputs(x: f64, n: u64, samples: u64) -> Result<(), SimError> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(SimError::InvalidInput(format!("x must be finite and >= 0, got {x}")));
    }
    if n == 0 {
        return Err(SimError::InvalidInput("n must be >= 1".into()));
    }
    if samples == 0 {
        return Err(SimError::InvalidInput("samples must be >= 1".into()));
    }
    Ok(())
}

/// Value of `stat` on one fresh path, with the final position.
#[inline]
fn path_value<L: StepLaw, R: Rng + ?Sized>(law: &L, x: f64, n: u64, stat: &Statistic, scale: f64, rng: &mut R) -> (f64, f64) {
    let sign = if stat.dual { -1.0 } else { 1.0 };
    match &stat.kind {
        StatKind::FreeInterval { y, delta } => {
            let mut pos = x;
            for _ in 0..n {
                pos += sign * law.sample(rng);
            }
            let hit = pos >= *y && pos <= y + delta;
            (if hit { 1.0 } else { 0.0 }, pos)
        }
        StatKind::MaxAbsAbove { u } => {
            let mut s = 0.0f64;
            let mut hit = false;
            for _ in 0..n {
                s += law.sample(rng);
                hit |= s.abs() > *u;
            }
            (if hit { 1.0 } else { 0.0 }, x + sign * s)
        }
        kind => {
            let (exit, pos) = killed_walk(law, x, n, sign, rng);
            let v = match kind {
                StatKind::ExitAtN => {
                    if exit == Some(n) {
                        1.0
                    } else {
                        0.0
                    }
                }
                _ if exit.is_some() => 0.0,
                StatKind::Survival => 1.0,
                StatKind::Target { f, y_shift } => f.eval(pos - y_shift),
                StatKind::Interval { y, delta } => {
                    if pos >= *y && pos <= y + delta {
                        1.0
                    } else {
                        0.0
                    }
                }
                StatKind::ScaledCdf { t } => {
                    if pos / scale <= *t {
                        1.0
                    } else {
                        0.0
                    }
                }
                StatKind::KilledPosition => pos,
                StatKind::FreeInterval { .. } | StatKind::MaxAbsAbove { .. } => unreachable!(),
            };
            (v, pos)
        }
    }
}

/// Monte Carlo estimate of `E stat` for the walk started at `x` with `n` steps.
pub fn mc_estimate<L: StepLaw>(law: &L, x: f64, n: u64, stat: &Statistic, samples: u64, seed: u64) -> Result<McEstimate, SimError> {
    check_inputs(x, n, samples)?;
    stat.validate()?;
    let scale = law.sigma() * (n as f64).sqrt();
    Ok(run_scalar(samples, seed, |rng| path_value(law, x, n, stat, scale, rng).0))
}

/// Importance-sampling estimate of a base-measure functional: paths are drawn
/// under `P_lambda` and reweighted by `e^{n Lambda - lambda S_n}`.
pub fn mc_tilted_survival(
    base: &IncrementLaw,
    tilt: &TiltedLaw,
    x: f64,
    n: u64,
    stat: &Statistic,
    samples: u64,
    seed: u64,
) -> Result<McEstimate, SimError> {
    check_inputs(x, n, samples)?;
    if &tilt.base != base {
        return Err(SimError::MismatchedTilt {
            base: base.to_string(),
            tilt_base: tilt.base.to_string(),
        });
    }
    match stat.kind {
        StatKind::Survival | StatKind::ExitAtN | StatKind::Target { .. } => {}
        _ => return Err(SimError::UnsupportedStatistic(stat.to_string())),
    }
    stat.validate()?;
    let sign = if stat.dual { -1.0 } else { 1.0 };
    let (lambda, big_lambda) = (tilt.lambda, tilt.log_mgf);
    let nl = n as f64 * big_lambda;
    let scale = base.sigma() * (n as f64).sqrt();
    Ok(run_scalar(samples, seed, |rng| {
        let (v, pos) = path_value(tilt, x, n, stat, scale, rng);
        if v == 0.0 {
            return 0.0;
        }
        // Raw increment sum S_n recovered from the final position.
        let s_n = sign * (pos - x);
        v * (nl - lambda * s_n).exp()
    }))
}

/// [`mc_tilted_survival`] with the tilt computed from `base`.
pub fn mc_tilted_estimate(base: &IncrementLaw, x: f64, n: u64, stat: &Statistic, samples: u64, seed: u64) -> Result<McEstimate, SimError> {
    let tilt = cramer_tilt(base)?;
    mc_tilted_survival(base, &tilt, x, n, stat, samples, seed)
}

/// `P((x + S_n)/(sigma sqrt n) <= t, tau_x > n)` for every `t` in `t_grid`,
/// all from the same paths.
pub fn mc_scaled_cdf_curve<L: StepLaw>(law: &L, x: f64, n: u64, t_grid: &[f64], samples: u64, seed: u64) -> Result<Vec<McEstimate>, SimError> {
    check_inputs(x, n, samples)?;
    if t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid.iter().any(|t| t.is_nan()) {
        return Err(SimError::InvalidInput("t_grid must be sorted".into()));
    }
    let scale = law.sigma() * (n as f64).sqrt();
    let acc = run_paths(samples, seed, t_grid.len(), |rng, out| {
        let (exit, pos) = killed_walk(law, x, n, 1.0, rng);
        let z = pos / scale;
        for (o, &t) in out.iter_mut().zip(t_grid) {
            *o = if exit.is_none() && z <= t { 1.0 } else { 0.0 };
        }
    });
    Ok(acc.iter().map(|w| w.estimate(seed)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn g01() -> IncrementLaw {
        IncrementLaw::gaussian(0.0, 1.0).unwrap()
    }

    #[test]
    fn deterministic_paths() {
        let down = IncrementLaw::finite_support(&[-1.0], &[1.0]).unwrap();
        let mut r = WalkRng::seed_from_u64(1);
        let s = simulate_exit(&down, 0.5, 10, &mut r);
        assert_eq!(s.exit_time, ExitTime::Exited(1));
        assert!(!s.survived && s.terminal < 0.0);
        let up = IncrementLaw::finite_support(&[1.0], &[1.0]).unwrap();
        let s = simulate_exit(&up, 0.0, 10, &mut r);
        assert_eq!(s.exit_time, ExitTime::Censored(10));
        assert!(s.survived);
        assert_eq!(s.terminal, 10.0);
    }

    #[test]
    fn zero_is_not_killed() {
        let law = IncrementLaw::finite_support(&[-1.0, 1.0], &[0.5, 0.5]).unwrap();
        // From x = 1 a single down-step lands exactly on 0 and survives.
        let e = mc_estimate(&law, 1.0, 1, &Statistic::survival(), 10_000, 3).unwrap();
        assert_eq!(e.mean, 1.0);
    }

    #[test]
    fn survival_matches_sparre_andersen() {
        let e = mc_estimate(&g01(), 0.0, 3, &Statistic::survival(), 1_000_000, 7).unwrap();
        assert!(e.covers(5.0 / 16.0, 4.0), "{e:?}");
        let e = mc_estimate(&g01(), 0.0, 10, &Statistic::survival(), 1_000_000, 8).unwrap();
        assert!(e.covers(184_756.0 / 1_048_576.0, 4.0), "{e:?}");
        let e = mc_estimate(&g01(), 0.0, 2, &Statistic::exit_at_n(), 1_000_000, 9).unwrap();
        assert!(e.covers(0.125, 4.0), "{e:?}");
    }

    #[test]
    fn unreachable_interval_is_zero() {
        let e = mc_estimate(&g01(), 0.0, 5, &Statistic::interval(1e9, 1.0), 10_000, 1).unwrap();
        assert_eq!((e.mean, e.stderr), (0.0, 0.0));
    }

    #[test]
    fn identical_seed_identical_estimate() {
        let a = mc_estimate(&g01(), 1.0, 20, &Statistic::survival(), 200_000, 42).unwrap();
        let b = mc_estimate(&g01(), 1.0, 20, &Statistic::survival(), 200_000, 42).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool.install(|| mc_estimate(&g01(), 1.0, 20, &Statistic::survival(), 200_000, 42).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn identity_tilt_reproduces_direct_estimate() {
        let base = g01();
        let tilt = cramer_tilt(&base).unwrap();
        let d = mc_estimate(&base, 1.0, 10, &Statistic::survival(), 100_000, 5).unwrap();
        let t = mc_tilted_survival(&base, &tilt, 1.0, 10, &Statistic::survival(), 100_000, 5).unwrap();
        assert_eq!(d, t);
    }

    #[test]
    fn tilted_and_direct_agree() {
        let base = IncrementLaw::gaussian(-0.5, 1.0).unwrap();
        let tilt = cramer_tilt(&base).unwrap();
        for n in [3, 5, 10] {
            let d = mc_estimate(&base, 0.0, n, &Statistic::survival(), 1_000_000, 11).unwrap();
            let t = mc_tilted_survival(&base, &tilt, 0.0, n, &Statistic::survival(), 1_000_000, 12).unwrap();
            assert!(d.agrees_with(&t, 4.0), "n={n}: {d:?} vs {t:?}");
        }
    }

    #[test]
    fn tilted_errors() {
        let base = IncrementLaw::gaussian(-0.5, 1.0).unwrap();
        let other = cramer_tilt(&IncrementLaw::gaussian(-0.4, 1.0).unwrap()).unwrap();
        assert!(matches!(
            mc_tilted_survival(&base, &other, 0.0, 5, &Statistic::survival(), 100, 1),
            Err(SimError::MismatchedTilt { .. })
        ));
        let tilt = cramer_tilt(&base).unwrap();
        assert!(matches!(
            mc_tilted_survival(&base, &tilt, 0.0, 5, &Statistic::interval(0.0, 1.0), 100, 1),
            Err(SimError::UnsupportedStatistic(_))
        ));
        let down = IncrementLaw::finite_support(&[-1.0], &[1.0]).unwrap();
        assert!(matches!(
            mc_tilted_estimate(&down, 0.0, 5, &Statistic::survival(), 100, 1),
            Err(SimError::Law(LawError::NoTiltExists { .. }))
        ));
    }

    #[test]
    fn scaled_cdf_curve_consistency() {
        let law = g01();
        let curve = mc_scaled_cdf_curve(&law, 0.0, 50, &[0.0, 1.0, 100.0], 200_000, 21).unwrap();
        let surv = mc_estimate(&law, 0.0, 50, &Statistic::survival(), 200_000, 21).unwrap();
        assert_eq!(curve[2].mean, surv.mean);
        assert_eq!(curve[0].mean, 0.0);
        assert!(curve[1].mean <= curve[2].mean);
    }

    #[test]
    fn exit_at_n_is_survival_difference() {
        let law = IncrementLaw::uniform(-1.0, 1.0).unwrap();
        let e = mc_estimate(&law, 0.5, 6, &Statistic::exit_at_n(), 1_000_000, 31).unwrap();
        let s5 = mc_estimate(&law, 0.5, 5, &Statistic::survival(), 1_000_000, 32).unwrap();
        let s6 = mc_estimate(&law, 0.5, 6, &Statistic::survival(), 1_000_000, 33).unwrap();
        let diff = s5.mean - s6.mean;
        let se = (e.stderr.powi(2) + s5.stderr.powi(2) + s6.stderr.powi(2)).sqrt();
        assert!((e.mean - diff).abs() <= 4.0 * se);
    }

    #[test]
    fn dual_symmetry_for_symmetric_law() {
        let law = IncrementLaw::laplace(0.0, 1.0).unwrap();
        let a = mc_estimate(&law, 0.3, 8, &Statistic::survival(), 500_000, 1).unwrap();
        let b = mc_estimate(&law, 0.3, 8, &Statistic::survival().dual(), 500_000, 2).unwrap();
        assert!(a.agrees_with(&b, 4.0));
    }

    #[test]
    fn welford_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let mut one = Welford::default();
        xs.iter().for_each(|&x| one.push(x));
        let mut a = Welford::default();
        let mut b = Welford::default();
        xs[..333].iter().for_each(|&x| a.push(x));
        xs[333..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert!((a.mean - one.mean).abs() < 1e-12);
        assert!((a.m2 - one.m2).abs() < 1e-9 * one.m2);
    }

    #[test]
    fn statistic_grammar() {
        for s in [
            "survival",
            "dual:exit_at_n",
            "interval:20,1",
            "scaled_cdf:1.5",
            "killed_position",
            "free_interval:0,1",
            "max_abs:30",
            "target:2:ind:0,1@shift:3",
        ] {
            let st: Statistic = s.parse().unwrap();
            assert_eq!(st.to_string(), s);
        }
        assert!("interval:0,0".parse::<Statistic>().is_err());
        assert!("median".parse::<Statistic>().is_err());
    }
}
