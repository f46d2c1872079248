//! Increment laws of the walk: sampling, moments, tails, lattice detection
//! and the Cramer exponential tilt.

use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad::{self, QuadratureError};
use crate::special_fns::normal_cdf;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LawError {
    #[error("invalid law parameters: {0}")]
    InvalidParameter(String),
    #[error("cannot parse law {input:?}: {reason}")]
    Parse { input: String, reason: String },
    #[error("no Cramer root of E X e^(lambda X) in the searched bracket [{lo}, {hi}]")]
    NoTiltExists { lo: f64, hi: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Absolute tolerance for expectations of continuous laws.
pub const EXPECT_TOL: f64 = 1e-11;
/// Means below this are treated as exactly centred.
const ZERO_MEAN: f64 = 1e-15;
const PROB_SUM_TOL: f64 = 1e-12;
const LATTICE_TOL: f64 = 1e-12;

/// Atoms and probabilities of a finitely supported law, sorted by position.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSupport {
    points: Vec<f64>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl FiniteSupport {
    pub fn new(points: &[f64], probs: &[f64]) -> Result<Self, LawError> {
        if points.is_empty() || points.len() != probs.len() {
            return Err(LawError::InvalidParameter(format!(
                "finite support needs matching non-empty points/probs, got {} and {}",
                points.len(),
                probs.len()
            )));
        }
        if points.iter().chain(probs).any(|v| !v.is_finite()) {
            return Err(LawError::InvalidParameter("finite support values must be finite".into()));
        }
        if probs.iter().any(|&p| p < 0.0) {
            return Err(LawError::InvalidParameter("probabilities must be >= 0".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(LawError::InvalidParameter(format!("probabilities sum to {total}, not 1")));
        }
        let mut pairs: Vec<(f64, f64)> = points.iter().copied().zip(probs.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut pts: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut ps: Vec<f64> = Vec::with_capacity(pairs.len());
        for (x, p) in pairs {
            if pts.last() == Some(&x) {
                *ps.last_mut().unwrap() += p;
            } else {
                pts.push(x);
                ps.push(p);
            }
        }
        Ok(Self::from_sorted(pts, ps))
    }

    fn from_sorted(points: Vec<f64>, probs: Vec<f64>) -> Self {
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        Self {
            points,
            probs,
            cumulative,
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn sample_with(&self, u: f64) -> f64 {
        let total = *self.cumulative.last().unwrap();
        let target = u * total;
        for (i, &c) in self.cumulative.iter().enumerate() {
            if target < c {
                return self.points[i];
            }
        }
        *self.points.last().unwrap()
    }

    fn sum<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        self.points.iter().zip(&self.probs).map(|(&x, &p)| p * g(x)).sum()
    }

    fn mass_where<P: Fn(f64) -> bool>(&self, pred: P) -> f64 {
        self.points
            .iter()
            .zip(&self.probs)
            .filter(|(&x, _)| pred(x))
            .map(|(_, &p)| p)
            .sum()
    }
}

/// The law of one increment of the walk.
#[derive(Debug, Clone, PartialEq)]
pub enum IncrementLaw {
    Gaussian { mu: f64, sigma: f64 },
    Laplace { mu: f64, scale: f64 },
    Uniform { lo: f64, hi: f64 },
    Finite(FiniteSupport),
}

/// Mean, variance and `E|X|^(2+delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: f64,
    pub variance: f64,
    pub abs_moment_2_delta: f64,
}

/// Operations the simulator and the quadratures need from a step law.
pub trait StepLaw: Sync + Send {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64;
    fn mean(&self) -> f64;
    fn variance(&self) -> f64;
    /// `P(X < x)`.
    fn prob_below(&self, x: f64) -> f64;
    /// `E[g(X); lo <= X <= hi]`; `breaks` are kinks of `g` worth splitting at.
    fn expect_on<G: Fn(f64) -> f64>(&self, g: G, lo: f64, hi: f64, breaks: &[f64]) -> Result<f64, QuadratureError>;

    /// Killing probability of one step from `t`: `P(t + X < 0)`.
    fn left_exit_prob(&self, t: f64) -> f64 {
        self.prob_below(-t)
    }

    fn sigma(&self) -> f64 {
        self.variance().sqrt()
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), LawError> {
    if cond {
        Ok(())
    } else {
        Err(LawError::InvalidParameter(msg()))
    }
}

impl IncrementLaw {
    pub fn gaussian(mu: f64, sigma: f64) -> Result<Self, LawError> {
        check(mu.is_finite() && sigma.is_finite() && sigma > 0.0, || {
            format!("gaussian needs finite mu and sigma > 0, got ({mu}, {sigma})")
        })?;
        Ok(Self::Gaussian { mu, sigma })
    }

    pub fn laplace(mu: f64, scale: f64) -> Result<Self, LawError> {
        check(mu.is_finite() && scale.is_finite() && scale > 0.0, || {
            format!("laplace needs finite mu and scale > 0, got ({mu}, {scale})")
        })?;
        Ok(Self::Laplace { mu, scale })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self, LawError> {
        check(lo.is_finite() && hi.is_finite() && lo < hi, || {
            format!("uniform needs lo < hi, got ({lo}, {hi})")
        })?;
        Ok(Self::Uniform { lo, hi })
    }

    pub fn finite_support(points: &[f64], probs: &[f64]) -> Result<Self, LawError> {
        Ok(Self::Finite(FiniteSupport::new(points, probs)?))
    }

    pub fn as_finite(&self) -> Option<&FiniteSupport> {
        match self {
            Self::Finite(f) => Some(f),
            _ => None,
        }
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self, Self::Finite(_))
    }

    /// Symmetric about zero (so that the walk and its dual agree in law).
    pub fn is_symmetric(&self) -> bool {
        match self {
            Self::Gaussian { mu, .. } | Self::Laplace { mu, .. } => *mu == 0.0,
            Self::Uniform { lo, hi } => *lo == -*hi,
            Self::Finite(f) => {
                let n = f.points.len();
                (0..n).all(|i| {
                    let j = n - 1 - i;
                    (f.points[i] + f.points[j]).abs() <= LATTICE_TOL && (f.probs[i] - f.probs[j]).abs() <= PROB_SUM_TOL
                })
            }
        }
    }

    /// `P(|X| > v)`.
    pub fn abs_tail(&self, v: f64) -> f64 {
        let v = v.abs();
        let above = match self {
            Self::Finite(f) => f.mass_where(|x| x > v),
            Self::Gaussian { mu, sigma } => normal_cdf((mu - v) / sigma),
            _ => 1.0 - self.cdf(v),
        };
        above + self.prob_below(-v)
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::Finite(f) => f.mass_where(|p| p <= x),
            _ => self.prob_below(x),
        }
    }

    /// Density of a continuous law (zero for finite support).
    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Self::Gaussian { mu, sigma } => {
                let z = (x - mu) / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            Self::Laplace { mu, scale } => (-(x - mu).abs() / scale).exp() / (2.0 * scale),
            Self::Uniform { lo, hi } => {
                if x >= lo && x <= hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Self::Finite(_) => 0.0,
        }
    }

    /// Integration window carrying all but a negligible amount of mass.
    fn window(&self) -> (f64, f64) {
        match *self {
            Self::Gaussian { mu, sigma } => (mu - 9.0 * sigma, mu + 9.0 * sigma),
            Self::Laplace { mu, scale } => (mu - 36.0 * scale, mu + 36.0 * scale),
            Self::Uniform { lo, hi } => (lo, hi),
            Self::Finite(ref f) => (f.points[0], *f.points.last().unwrap()),
        }
    }

    fn kinks(&self) -> Vec<f64> {
        match *self {
            Self::Laplace { mu, .. } => vec![mu],
            _ => Vec::new(),
        }
    }

    /// Moments with the absolute moment of order `2 + delta`.
    pub fn moments(&self, delta: f64) -> Result<MomentSummary, LawError> {
        check(delta >= 0.0 && delta.is_finite(), || format!("delta must be >= 0, got {delta}"))?;
        let p = 2.0 + delta;
        let abs = match *self {
            Self::Gaussian { mu, sigma } if mu == 0.0 => {
                sigma.powf(p) * 2f64.powf(p / 2.0) * libm::tgamma((p + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
            }
            Self::Laplace { mu, scale } if mu == 0.0 => scale.powf(p) * libm::tgamma(p + 1.0),
            Self::Uniform { lo, hi } => {
                let prim = |x: f64| x.signum() * x.abs().powf(p + 1.0) / (p + 1.0);
                (prim(hi) - prim(lo)) / (hi - lo)
            }
            Self::Finite(ref f) => f.sum(|x| x.abs().powf(p)),
            _ => {
                let (lo, hi) = self.window();
                self.expect_on(|x| x.abs().powf(p), lo, hi, &[0.0])?
            }
        };
        Ok(MomentSummary {
            mean: self.mean(),
            variance: self.variance(),
            abs_moment_2_delta: abs,
        })
    }

    /// True iff the law is supported on `hZ + a` for some `h > 0`.
    pub fn is_lattice(&self) -> bool {
        let f = match self {
            Self::Finite(f) => f,
            _ => return false,
        };
        let base = f.points[0];
        let diffs: Vec<f64> = f.points[1..].iter().map(|&x| x - base).collect();
        let scale = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if scale == 0.0 {
            return true;
        }
        let tol = LATTICE_TOL * scale;
        let mut h = 0.0f64;
        for &d in &diffs {
            h = float_gcd(h, d, tol);
        }
        if h < 1e-6 * scale {
            return false;
        }
        diffs.iter().all(|&d| (d - (d / h).round() * h).abs() <= 64.0 * tol)
    }

    /// A positive multiple of `E X e^{lambda X}`, safe from overflow; only its
    /// sign is used by the root finder.
    fn tilt_derivative_sign(&self, lambda: f64) -> f64 {
        match *self {
            Self::Gaussian { mu, sigma } => mu + lambda * sigma * sigma,
            Self::Laplace { mu, scale } => {
                let b2 = scale * scale;
                mu + 2.0 * b2 * lambda / (1.0 - b2 * lambda * lambda)
            }
            Self::Uniform { lo, hi } => {
                let c = 0.5 * (lo + hi);
                let h = 0.5 * (hi - lo);
                langevin(lambda * h) + c / h
            }
            Self::Finite(ref f) => {
                let m = if lambda >= 0.0 { f.points[f.points.len() - 1] } else { f.points[0] };
                f.sum(|x| x * (lambda * (x - m)).exp())
            }
        }
    }

    /// `E X e^{lambda X}` (unscaled; may overflow for extreme `lambda`).
    pub fn mgf_derivative(&self, lambda: f64) -> f64 {
        match *self {
            Self::Gaussian { mu, sigma } => {
                (mu + lambda * sigma * sigma) * (lambda * mu + 0.5 * lambda * lambda * sigma * sigma).exp()
            }
            Self::Laplace { mu, scale } => {
                let b2 = scale * scale;
                let m = (lambda * mu).exp() / (1.0 - b2 * lambda * lambda);
                m * (mu + 2.0 * b2 * lambda / (1.0 - b2 * lambda * lambda))
            }
            Self::Uniform { lo, hi } => {
                let c = 0.5 * (lo + hi);
                let h = 0.5 * (hi - lo);
                self.log_mgf(lambda).exp() * (c + h * langevin(lambda * h))
            }
            Self::Finite(ref f) => f.sum(|x| x * (lambda * x).exp()),
        }
    }

    /// `log E e^{lambda X}`.
    pub fn log_mgf(&self, lambda: f64) -> f64 {
        match *self {
            Self::Gaussian { mu, sigma } => lambda * mu + 0.5 * lambda * lambda * sigma * sigma,
            Self::Laplace { mu, scale } => lambda * mu - (1.0 - scale * scale * lambda * lambda).ln(),
            Self::Uniform { lo, hi } => {
                let c = 0.5 * (lo + hi);
                let h = 0.5 * (hi - lo);
                let z = lambda * h;
                if z.abs() < 20.0 {
                    lambda * c + sinhc(z).ln()
                } else {
                    // (e^{lambda hi} - e^{lambda lo}) / (lambda (hi - lo)), dominant term factored out
                    let w = 2.0 * z.abs();
                    (lambda * lo).max(lambda * hi) + (-(-w).exp_m1()).ln() - w.ln()
                }
            }
            Self::Finite(ref f) => {
                let m = f.points.iter().map(|&x| lambda * x).fold(f64::NEG_INFINITY, f64::max);
                m + f.sum(|x| (lambda * x - m).exp()).ln()
            }
        }
    }

    /// Open interval of `lambda` on which the moment generating function is finite.
    fn tilt_domain(&self) -> (f64, f64) {
        match *self {
            Self::Laplace { scale, .. } => (-1.0 / scale, 1.0 / scale),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

fn float_gcd(a: f64, b: f64, tol: f64) -> f64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b > tol {
        let r = (a - (a / b).round() * b).abs();
        a = b;
        b = r;
    }
    a
}

/// `sinh(z)/z`.
fn sinhc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        1.0 + z * z / 6.0
    } else {
        z.sinh() / z
    }
}

/// Langevin function `coth z - 1/z`, the mean of the tilted uniform law on
/// `[-1, 1]`.
fn langevin(z: f64) -> f64 {
    if z.abs() < 0.5 {
        let z2 = z * z;
        z * (1.0 / 3.0 - z2 * (1.0 / 45.0 - z2 * (2.0 / 945.0 - z2 / 4725.0)))
    } else {
        1.0 / z.tanh() - 1.0 / z
    }
}

impl StepLaw for IncrementLaw {
    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Gaussian { mu, sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                mu + sigma * z
            }
            Self::Laplace { mu, scale } => {
                let u: f64 = rng.sample(Open01);
                laplace_from_uniform(mu, scale, u)
            }
            Self::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Self::Finite(ref f) => {
                if f.points.len() == 1 {
                    f.points[0]
                } else {
                    f.sample_with(rng.random::<f64>())
                }
            }
        }
    }

    fn mean(&self) -> f64 {
        match *self {
            Self::Gaussian { mu, .. } | Self::Laplace { mu, .. } => mu,
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::Finite(ref f) => f.sum(|x| x),
        }
    }

    fn variance(&self) -> f64 {
        match *self {
            Self::Gaussian { sigma, .. } => sigma * sigma,
            Self::Laplace { scale, .. } => 2.0 * scale * scale,
            Self::Uniform { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
            Self::Finite(ref f) => {
                let m = f.sum(|x| x);
                f.sum(|x| (x - m) * (x - m))
            }
        }
    }

    fn prob_below(&self, x: f64) -> f64 {
        match *self {
            Self::Gaussian { mu, sigma } => normal_cdf((x - mu) / sigma),
            Self::Laplace { mu, scale } => {
                if x < mu {
                    0.5 * ((x - mu) / scale).exp()
                } else {
                    1.0 - 0.5 * (-(x - mu) / scale).exp()
                }
            }
            Self::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Self::Finite(ref f) => f.mass_where(|p| p < x),
        }
    }

    fn expect_on<G: Fn(f64) -> f64>(&self, g: G, lo: f64, hi: f64, breaks: &[f64]) -> Result<f64, QuadratureError> {
        if let Self::Finite(f) = self {
            return Ok(f.sum(|x| if x >= lo && x <= hi { g(x) } else { 0.0 }));
        }
        let (wl, wh) = self.window();
        let a = lo.max(wl);
        let b = hi.min(wh);
        if !(b > a) {
            return Ok(0.0);
        }
        let mut extra = self.kinks();
        extra.extend_from_slice(breaks);
        let pts = quad::uniform_points(a, b, 36, &extra);
        quad::integrate_panels(|x| g(x) * self.pdf(x), &pts, EXPECT_TOL)
    }
}

fn laplace_from_uniform(mu: f64, scale: f64, u: f64) -> f64 {
    if u < 0.5 {
        mu + scale * (2.0 * u).ln()
    } else {
        mu - scale * (2.0 * (1.0 - u)).ln()
    }
}

impl fmt::Display for IncrementLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gaussian { mu, sigma } => write!(f, "gaussian:{mu},{sigma}"),
            Self::Laplace { mu, scale } => write!(f, "laplace:{mu},{scale}"),
            Self::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            Self::Finite(s) => {
                write!(f, "finite:")?;
                for (i, (x, p)) in s.points.iter().zip(&s.probs).enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{x},{p}")?;
                }
                Ok(())
            }
        }
    }
}

fn parse_err(input: &str, reason: impl Into<String>) -> LawError {
    LawError::Parse {
        input: input.to_string(),
        reason: reason.into(),
    }
}

fn parse_num(input: &str, s: &str) -> Result<f64, LawError> {
    let t = s.trim();
    match t {
        "sqrt2" => Ok(std::f64::consts::SQRT_2),
        "-sqrt2" => Ok(-std::f64::consts::SQRT_2),
        _ => t.parse::<f64>().map_err(|e| parse_err(input, format!("bad number {t:?}: {e}"))),
    }
}

fn parse_pair(input: &str, body: &str) -> Result<(f64, f64), LawError> {
    let parts: Vec<&str> = body.split(',').collect();
    if parts.len() != 2 {
        return Err(parse_err(input, "expected two comma-separated numbers"));
    }
    Ok((parse_num(input, parts[0])?, parse_num(input, parts[1])?))
}

impl FromStr for IncrementLaw {
    type Err = LawError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (family, body) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| parse_err(s, "expected <family>:<parameters>"))?;
        match family.trim() {
            "gaussian" => {
                let (a, b) = parse_pair(s, body)?;
                Self::gaussian(a, b)
            }
            "laplace" => {
                let (a, b) = parse_pair(s, body)?;
                Self::laplace(a, b)
            }
            "uniform" => {
                let (a, b) = parse_pair(s, body)?;
                Self::uniform(a, b)
            }
            "finite" => {
                let mut pts = Vec::new();
                let mut ps = Vec::new();
                for atom in body.split(';').filter(|a| !a.trim().is_empty()) {
                    let (x, p) = parse_pair(s, atom)?;
                    pts.push(x);
                    ps.push(p);
                }
                Self::finite_support(&pts, &ps)
            }
            other => Err(parse_err(s, format!("unknown family {other:?}"))),
        }
    }
}

/// Law of one step under the tilted measure.
#[derive(Debug, Clone, PartialEq)]
enum TiltedShape {
    /// `lambda = 0`: the base law itself.
    Identity,
    Gaussian { sigma: f64 },
    Finite(FiniteSupport),
    /// Two exponential tails glued at `mu`.
    AsymLaplace {
        mu: f64,
        left_rate: f64,
        right_rate: f64,
        left_mass: f64,
    },
    /// Density proportional to `e^{rate x}` on `[lo, hi]`.
    ExpUniform { lo: f64, hi: f64, rate: f64 },
}

/// Cramer tilt of a base law: the root `lambda` of `E X e^{lambda X} = 0`,
/// `log_mgf = log E e^{lambda X}` and the law `P_lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltedLaw {
    pub lambda: f64,
    pub log_mgf: f64,
    pub tilted_variance: f64,
    pub base: IncrementLaw,
    shape: TiltedShape,
}

/// Solves `E X e^{lambda X} = 0` and builds the tilted law.
pub fn cramer_tilt(law: &IncrementLaw) -> Result<TiltedLaw, LawError> {
    if law.mean().abs() < ZERO_MEAN {
        return Ok(TiltedLaw {
            lambda: 0.0,
            log_mgf: 0.0,
            tilted_variance: law.variance() + law.mean() * law.mean(),
            base: law.clone(),
            shape: TiltedShape::Identity,
        });
    }
    match *law {
        IncrementLaw::Gaussian { mu, sigma } => {
            let s2 = sigma * sigma;
            Ok(TiltedLaw {
                lambda: -mu / s2,
                log_mgf: -mu * mu / (2.0 * s2),
                tilted_variance: s2,
                base: law.clone(),
                shape: TiltedShape::Gaussian { sigma },
            })
        }
        IncrementLaw::Finite(ref f) => {
            if !(f.points[0] < 0.0 && *f.points.last().unwrap() > 0.0) {
                return Err(LawError::NoTiltExists {
                    lo: f64::NEG_INFINITY,
                    hi: f64::INFINITY,
                });
            }
            let lambda = find_root(law)?;
            let log_mgf = law.log_mgf(lambda);
            let probs: Vec<f64> = f
                .points
                .iter()
                .zip(&f.probs)
                .map(|(&x, &p)| p * (lambda * x - log_mgf).exp())
                .collect();
            let tilted = FiniteSupport::from_sorted(f.points.clone(), probs);
            let tilted_variance = tilted.sum(|x| x * x);
            Ok(TiltedLaw {
                lambda,
                log_mgf,
                tilted_variance,
                base: law.clone(),
                shape: TiltedShape::Finite(tilted),
            })
        }
        IncrementLaw::Laplace { mu, scale } => {
            let lambda = find_root(law)?;
            let a = 1.0 / scale + lambda;
            let c = 1.0 / scale - lambda;
            let left = c / (a + c);
            let right = 1.0 - left;
            let second = left * (mu * mu - 2.0 * mu / a + 2.0 / (a * a)) + right * (mu * mu + 2.0 * mu / c + 2.0 / (c * c));
            Ok(TiltedLaw {
                lambda,
                log_mgf: law.log_mgf(lambda),
                tilted_variance: second,
                base: law.clone(),
                shape: TiltedShape::AsymLaplace {
                    mu,
                    left_rate: a,
                    right_rate: c,
                    left_mass: left,
                },
            })
        }
        IncrementLaw::Uniform { lo, hi } => {
            if !(lo < 0.0 && hi > 0.0) {
                return Err(LawError::NoTiltExists {
                    lo: f64::NEG_INFINITY,
                    hi: f64::INFINITY,
                });
            }
            let lambda = find_root(law)?;
            let mut t = TiltedLaw {
                lambda,
                log_mgf: law.log_mgf(lambda),
                tilted_variance: 0.0,
                base: law.clone(),
                shape: TiltedShape::ExpUniform { lo, hi, rate: lambda },
            };
            t.tilted_variance = t.expect_on(|x| x * x, lo, hi, &[])?;
            Ok(t)
        }
    }
}

/// Bracket by doubling from `[-8/sigma, 8/sigma]` (clamped to the domain of
/// the mgf), then bisect to machine precision.
fn find_root(law: &IncrementLaw) -> Result<f64, LawError> {
    let (dlo, dhi) = law.tilt_domain();
    let shrink = |v: f64, edge: f64| if v.abs() >= edge.abs() { edge * (1.0 - 1e-15) } else { v };
    let s = law.sigma();
    let mut lo = shrink(-8.0 / s, dlo);
    let mut hi = shrink(8.0 / s, dhi);
    let f = |l: f64| law.tilt_derivative_sign(l);
    for _ in 0..64 {
        if f(lo) < 0.0 {
            break;
        }
        lo = shrink(lo * 2.0, dlo);
    }
    for _ in 0..64 {
        if f(hi) > 0.0 {
            break;
        }
        hi = shrink(hi * 2.0, dhi);
    }
    if !(f(lo) < 0.0 && f(hi) > 0.0) {
        return Err(LawError::NoTiltExists { lo, hi });
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if f(lo).abs() <= f(hi).abs() { lo } else { hi })
}

impl TiltedLaw {
    /// `E X e^{lambda X}` under the base law at the stored root.
    pub fn residual(&self) -> f64 {
        self.base.mgf_derivative(self.lambda)
    }

    pub fn is_identity(&self) -> bool {
        self.shape == TiltedShape::Identity
    }

    /// Tilted law as one of the base families, when it is one.
    pub fn as_increment_law(&self) -> Option<IncrementLaw> {
        match &self.shape {
            TiltedShape::Identity => Some(self.base.clone()),
            TiltedShape::Gaussian { sigma } => Some(IncrementLaw::Gaussian { mu: 0.0, sigma: *sigma }),
            TiltedShape::Finite(f) => Some(IncrementLaw::Finite(f.clone())),
            _ => None,
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        match self.shape {
            TiltedShape::Identity => self.base.pdf(x),
            TiltedShape::Gaussian { sigma } => IncrementLaw::Gaussian { mu: 0.0, sigma }.pdf(x),
            TiltedShape::Finite(_) => 0.0,
            TiltedShape::AsymLaplace {
                mu,
                left_rate,
                right_rate,
                left_mass,
            } => {
                if x < mu {
                    left_mass * left_rate * (left_rate * (x - mu)).exp()
                } else {
                    (1.0 - left_mass) * right_rate * (-right_rate * (x - mu)).exp()
                }
            }
            TiltedShape::ExpUniform { .. } => (self.lambda * x - self.log_mgf).exp() * self.base.pdf(x),
        }
    }

    fn window(&self) -> (f64, f64) {
        match self.shape {
            TiltedShape::Identity => self.base.window(),
            TiltedShape::Gaussian { sigma } => (-9.0 * sigma, 9.0 * sigma),
            TiltedShape::Finite(ref f) => (f.points[0], *f.points.last().unwrap()),
            TiltedShape::AsymLaplace {
                mu,
                left_rate,
                right_rate,
                ..
            } => (mu - 36.0 / left_rate, mu + 36.0 / right_rate),
            TiltedShape::ExpUniform { lo, hi, .. } => (lo, hi),
        }
    }
}

impl StepLaw for TiltedLaw {
    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.shape {
            TiltedShape::Identity => self.base.sample(rng),
            TiltedShape::Gaussian { sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                sigma * z
            }
            TiltedShape::Finite(ref f) => f.sample_with(rng.random::<f64>()),
            TiltedShape::AsymLaplace {
                mu,
                left_rate,
                right_rate,
                left_mass,
            } => {
                let u: f64 = rng.sample(Open01);
                if u < left_mass {
                    mu + (u / left_mass).ln() / left_rate
                } else {
                    mu - ((1.0 - u) / (1.0 - left_mass)).ln() / right_rate
                }
            }
            TiltedShape::ExpUniform { lo, hi, rate } => {
                let u: f64 = rng.random::<f64>();
                if rate > 0.0 {
                    hi + (-(1.0 - u) * -(-rate * (hi - lo)).exp_m1()).ln_1p() / rate
                } else {
                    lo + (u * (rate * (hi - lo)).exp_m1()).ln_1p() / rate
                }
            }
        }
    }

    fn mean(&self) -> f64 {
        match self.shape {
            TiltedShape::Identity => self.base.mean(),
            TiltedShape::Finite(ref f) => f.sum(|x| x),
            // The Cramer root centres the continuous tilted laws exactly.
            _ => 0.0,
        }
    }

    fn variance(&self) -> f64 {
        match self.shape {
            TiltedShape::Identity => self.base.variance(),
            _ => self.tilted_variance - self.mean() * self.mean(),
        }
    }

    fn prob_below(&self, x: f64) -> f64 {
        match self.shape {
            TiltedShape::Identity => self.base.prob_below(x),
            TiltedShape::Gaussian { sigma } => normal_cdf(x / sigma),
            TiltedShape::Finite(ref f) => f.mass_where(|p| p < x),
            TiltedShape::AsymLaplace {
                mu,
                left_rate,
                right_rate,
                left_mass,
            } => {
                if x < mu {
                    left_mass * (left_rate * (x - mu)).exp()
                } else {
                    1.0 - (1.0 - left_mass) * (-right_rate * (x - mu)).exp()
                }
            }
            TiltedShape::ExpUniform { lo, hi, rate } => {
                if x <= lo {
                    0.0
                } else if x >= hi {
                    1.0
                } else if rate > 0.0 {
                    (-rate * (hi - x)).exp() * (-rate * (x - lo)).exp_m1() / (-rate * (hi - lo)).exp_m1()
                } else {
                    (rate * (x - lo)).exp_m1() / (rate * (hi - lo)).exp_m1()
                }
            }
        }
    }

    fn expect_on<G: Fn(f64) -> f64>(&self, g: G, lo: f64, hi: f64, breaks: &[f64]) -> Result<f64, QuadratureError> {
        match self.shape {
            TiltedShape::Identity => return self.base.expect_on(g, lo, hi, breaks),
            TiltedShape::Finite(ref f) => return Ok(f.sum(|x| if x >= lo && x <= hi { g(x) } else { 0.0 })),
            _ => {}
        }
        let (wl, wh) = self.window();
        let a = lo.max(wl);
        let b = hi.min(wh);
        if !(b > a) {
            return Ok(0.0);
        }
        let mut extra = breaks.to_vec();
        if let TiltedShape::AsymLaplace { mu, .. } = self.shape {
            extra.push(mu);
        }
        let pts = quad::uniform_points(a, b, 36, &extra);
        quad::integrate_panels(|x| g(x) * self.pdf(x), &pts, EXPECT_TOL)
    }
}
