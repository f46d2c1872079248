//! Non-negative target functions `f`, their ladder envelopes and weighted
//! integrals.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::quad::{self, QuadratureError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TargetError {
    #[error("invalid target: {0}")]
    Invalid(String),
    #[error("cannot parse target {input:?}: {reason}")]
    Parse { input: String, reason: String },
    #[error("integral of {target} against {weight} diverges")]
    DivergentIntegral { target: String, weight: String },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Mass of `f` left beyond the envelope window.
const TAIL_MASS: f64 = 1e-12;
const INTEGRAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum TargetFunction {
    /// Indicator of the closed interval `[lo, hi]`.
    Indicator { lo: f64, hi: f64 },
    /// `e^{-a t}` on `t >= 0`, zero below.
    Exponential { a: f64 },
    /// `values[i]` on `[breaks[i], breaks[i+1])`; the last value holds on
    /// `[breaks[last], inf)` and the function is zero below `breaks[0]`.
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<f64> },
    /// `t -> inner(t - y)`.
    Shifted { inner: Box<TargetFunction>, y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Upper,
    Lower,
}

/// Weight `w(t)` on the half line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightSpec {
    Unit,
    /// `1 + t`
    LinearGrowth,
    /// `(1 + t)^gamma`, `gamma > 1`
    PowerGrowth { gamma: f64 },
    /// `e^{-lambda t}`, `lambda > 0`
    ExpDecay { lambda: f64 },
    /// `e^{-lambda t} (1 + t)^gamma`
    ExpDecayPower { lambda: f64, gamma: f64 },
}

impl WeightSpec {
    pub fn power_growth(gamma: f64) -> Result<Self, TargetError> {
        if gamma > 1.0 && gamma.is_finite() {
            Ok(Self::PowerGrowth { gamma })
        } else {
            Err(TargetError::Invalid(format!("power growth needs gamma > 1, got {gamma}")))
        }
    }

    pub fn exp_decay(lambda: f64) -> Result<Self, TargetError> {
        if lambda > 0.0 && lambda.is_finite() {
            Ok(Self::ExpDecay { lambda })
        } else {
            Err(TargetError::Invalid(format!("exp decay needs lambda > 0, got {lambda}")))
        }
    }

    pub fn exp_decay_power(lambda: f64, gamma: f64) -> Result<Self, TargetError> {
        if lambda > 0.0 && gamma > 1.0 && lambda.is_finite() && gamma.is_finite() {
            Ok(Self::ExpDecayPower { lambda, gamma })
        } else {
            Err(TargetError::Invalid(format!(
                "exp decay power needs lambda > 0 and gamma > 1, got ({lambda}, {gamma})"
            )))
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Self::Unit => 1.0,
            Self::LinearGrowth => 1.0 + t,
            Self::PowerGrowth { gamma } => (1.0 + t).powf(gamma),
            Self::ExpDecay { lambda } => (-lambda * t).exp(),
            Self::ExpDecayPower { lambda, gamma } => (-lambda * t).exp() * (1.0 + t).powf(gamma),
        }
    }

    fn decays(&self) -> bool {
        matches!(self, Self::ExpDecay { .. } | Self::ExpDecayPower { .. })
    }

    /// Antiderivative where it is elementary.
    fn primitive(&self, t: f64) -> Option<f64> {
        match *self {
            Self::Unit => Some(t),
            Self::LinearGrowth => Some(t + 0.5 * t * t),
            Self::PowerGrowth { gamma } => Some((1.0 + t).powf(gamma + 1.0) / (gamma + 1.0)),
            Self::ExpDecay { lambda } => Some(-(-lambda * t).exp() / lambda),
            Self::ExpDecayPower { .. } => None,
        }
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Unit => write!(f, "unit"),
            Self::LinearGrowth => write!(f, "(1+t)"),
            Self::PowerGrowth { gamma } => write!(f, "(1+t)^{gamma}"),
            Self::ExpDecay { lambda } => write!(f, "e^(-{lambda}t)"),
            Self::ExpDecayPower { lambda, gamma } => write!(f, "e^(-{lambda}t)(1+t)^{gamma}"),
        }
    }
}

/// Shift-free form used for integrals and envelopes.
enum Canon {
    Indicator { lo: f64, hi: f64 },
    /// `e^{-a (t - start)}` on `t >= start`.
    Exp { a: f64, start: f64 },
    Pc { breaks: Vec<f64>, values: Vec<f64> },
}

impl TargetFunction {
    pub fn indicator(lo: f64, hi: f64) -> Result<Self, TargetError> {
        if lo < hi && lo.is_finite() && hi.is_finite() {
            Ok(Self::Indicator { lo, hi })
        } else {
            Err(TargetError::Invalid(format!("indicator needs lo < hi, got ({lo}, {hi})")))
        }
    }

    pub fn exponential(a: f64) -> Result<Self, TargetError> {
        if a > 0.0 && a.is_finite() {
            Ok(Self::Exponential { a })
        } else {
            Err(TargetError::Invalid(format!("exponential needs a > 0, got {a}")))
        }
    }

    pub fn piecewise_constant(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self, TargetError> {
        if breaks.is_empty() || breaks.len() != values.len() {
            return Err(TargetError::Invalid("piecewise constant needs matching non-empty breaks/values".into()));
        }
        if breaks.windows(2).any(|w| !(w[0] < w[1])) || breaks.iter().any(|b| !b.is_finite()) {
            return Err(TargetError::Invalid("breaks must be finite and strictly increasing".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(TargetError::Invalid("values must be finite and non-negative".into()));
        }
        Ok(Self::PiecewiseConstant { breaks, values })
    }

    pub fn shifted(self, y: f64) -> Self {
        Self::Shifted {
            inner: Box::new(self),
            y,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Indicator { lo, hi } => {
                if t >= *lo && t <= *hi {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Exponential { a } => {
                if t >= 0.0 {
                    (-a * t).exp()
                } else {
                    0.0
                }
            }
            Self::PiecewiseConstant { breaks, values } => {
                let i = breaks.partition_point(|&b| b <= t);
                if i == 0 {
                    0.0
                } else {
                    values[i - 1]
                }
            }
            Self::Shifted { inner, y } => inner.eval(t - y),
        }
    }

    fn canon(&self) -> Canon {
        match self {
            Self::Indicator { lo, hi } => Canon::Indicator { lo: *lo, hi: *hi },
            Self::Exponential { a } => Canon::Exp { a: *a, start: 0.0 },
            Self::PiecewiseConstant { breaks, values } => Canon::Pc {
                breaks: breaks.clone(),
                values: values.clone(),
            },
            Self::Shifted { inner, y } => match inner.canon() {
                Canon::Indicator { lo, hi } => Canon::Indicator { lo: lo + y, hi: hi + y },
                Canon::Exp { a, start } => Canon::Exp { a, start: start + y },
                Canon::Pc { breaks, values } => Canon::Pc {
                    breaks: breaks.iter().map(|b| b + y).collect(),
                    values,
                },
            },
        }
    }

    /// Left end of the support.
    pub fn support_lo(&self) -> f64 {
        match self.canon() {
            Canon::Indicator { lo, .. } => lo,
            Canon::Exp { start, .. } => start,
            Canon::Pc { breaks, values } => breaks
                .iter()
                .zip(&values)
                .find(|(_, &v)| v > 0.0)
                .map(|(&b, _)| b)
                .unwrap_or(breaks[0]),
        }
    }

    /// Right end of the support (`+inf` for unbounded support).
    pub fn support_hi(&self) -> f64 {
        match self.canon() {
            Canon::Indicator { hi, .. } => hi,
            Canon::Exp { .. } => f64::INFINITY,
            Canon::Pc { breaks, values } => {
                if *values.last().unwrap() > 0.0 {
                    f64::INFINITY
                } else {
                    let last_nz = values.iter().rposition(|&v| v > 0.0);
                    match last_nz {
                        Some(i) => breaks[i + 1],
                        None => breaks[0],
                    }
                }
            }
        }
    }

    /// Points where `f` may jump or kink.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.canon() {
            Canon::Indicator { lo, hi } => vec![lo, hi],
            Canon::Exp { start, .. } => vec![start],
            Canon::Pc { breaks, .. } => breaks,
        }
    }

    /// Point beyond which the mass of `f` is below `TAIL_MASS`.
    pub fn mass_horizon(&self) -> f64 {
        match self.canon() {
            Canon::Exp { a, start } => start + (1.0 / (a * TAIL_MASS)).ln().max(0.0) / a,
            _ => self.support_hi(),
        }
    }

    /// `sup f` over the half-open interval `[lo, hi)`.
    pub fn sup_on(&self, lo: f64, hi: f64) -> f64 {
        match self.canon() {
            Canon::Indicator { lo: l, hi: h } => {
                if lo <= h && hi > l {
                    1.0
                } else {
                    0.0
                }
            }
            Canon::Exp { a, start } => {
                if hi <= start {
                    0.0
                } else {
                    (-a * (lo.max(start) - start)).exp()
                }
            }
            Canon::Pc { breaks, values } => pc_fold(&breaks, &values, lo, hi, f64::max, 0.0),
        }
    }

    /// `inf f` over the half-open interval `[lo, hi)`.
    pub fn inf_on(&self, lo: f64, hi: f64) -> f64 {
        match self.canon() {
            Canon::Indicator { lo: l, hi: h } => {
                if lo >= l && hi <= h {
                    1.0
                } else {
                    0.0
                }
            }
            Canon::Exp { a, start } => {
                if lo < start {
                    0.0
                } else {
                    (-a * (hi - start)).exp()
                }
            }
            Canon::Pc { breaks, values } => pc_fold(&breaks, &values, lo, hi, f64::min, f64::INFINITY),
        }
    }

    /// Integral over the whole line.
    pub fn total_integral(&self) -> Result<f64, TargetError> {
        match self.canon() {
            Canon::Indicator { lo, hi } => Ok(hi - lo),
            Canon::Exp { a, .. } => Ok(1.0 / a),
            Canon::Pc { breaks, values } => {
                if *values.last().unwrap() > 0.0 {
                    return Err(self.divergent(&WeightSpec::Unit));
                }
                Ok(breaks.windows(2).zip(&values).map(|(w, v)| v * (w[1] - w[0])).sum())
            }
        }
    }

    fn divergent(&self, w: &WeightSpec) -> TargetError {
        TargetError::DivergentIntegral {
            target: self.to_string(),
            weight: w.to_string(),
        }
    }
}

/// Fold of `op` over the values of a piecewise constant function on `[lo, hi)`.
fn pc_fold(breaks: &[f64], values: &[f64], lo: f64, hi: f64, op: fn(f64, f64) -> f64, init: f64) -> f64 {
    let mut acc = init;
    if lo < breaks[0] {
        acc = op(acc, 0.0);
    }
    for i in 0..breaks.len() {
        let start = breaks[i];
        let end = breaks.get(i + 1).copied().unwrap_or(f64::INFINITY);
        if start < hi && end > lo {
            acc = op(acc, values[i]);
        }
    }
    acc
}

/// Builds the ladder envelope of `f` on the grid `{k delta}` and then its
/// `epsilon`-dilation (upper) or erosion (lower). The result is piecewise
/// constant and vanishes outside `[support_lo - 2 epsilon, T_max]`, where
/// `f` has mass below `1e-12` beyond `T_max`.
pub fn envelope(f: &TargetFunction, delta: f64, epsilon: f64, side: Side) -> Result<TargetFunction, TargetError> {
    if !(delta > 0.0 && epsilon > 0.0 && epsilon <= delta) {
        return Err(TargetError::Invalid(format!(
            "envelope needs 0 < epsilon <= delta, got delta={delta}, epsilon={epsilon}"
        )));
    }
    let t_max = f.mass_horizon();
    let k_min = (f.support_lo() / delta).floor() as i64;
    let k_max = (t_max / delta).floor() as i64;
    if k_max - k_min > 50_000_000 {
        return Err(TargetError::Invalid(format!("envelope grid too fine: {} cells", k_max - k_min)));
    }
    let cells: Vec<f64> = (k_min..=k_max)
        .map(|k| {
            let a = k as f64 * delta;
            let b = (k + 1) as f64 * delta;
            match side {
                Side::Upper => f.sup_on(a, b),
                Side::Lower => f.inf_on(a, b),
            }
        })
        .collect();
    let cell = |k: i64| -> f64 {
        if k < k_min || k > k_max {
            0.0
        } else {
            cells[(k - k_min) as usize]
        }
    };
    // The set of cells within epsilon of u only changes at k delta +/- epsilon.
    let mut pts: Vec<f64> = Vec::with_capacity(2 * cells.len() + 4);
    for k in k_min..=k_max + 1 {
        let g = k as f64 * delta;
        pts.push(g - epsilon);
        pts.push(g + epsilon);
    }
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
    let mut breaks = Vec::with_capacity(pts.len());
    let mut values: Vec<f64> = Vec::with_capacity(pts.len());
    for w in pts.windows(2) {
        let u = 0.5 * (w[0] + w[1]);
        let k_lo = ((u - epsilon) / delta).floor() as i64;
        let k_hi = ((u + epsilon) / delta).floor() as i64;
        let v = match side {
            Side::Upper => (k_lo..=k_hi).map(cell).fold(0.0, f64::max),
            Side::Lower => (k_lo..=k_hi).map(cell).fold(f64::INFINITY, f64::min),
        };
        if values.last() != Some(&v) {
            breaks.push(w[0]);
            values.push(v);
        }
    }
    if values.last() != Some(&0.0) {
        breaks.push(*pts.last().unwrap());
        values.push(0.0);
    }
    // Leading zero pieces carry no information.
    while values.len() > 1 && values[0] == 0.0 {
        breaks.remove(0);
        values.remove(0);
    }
    TargetFunction::piecewise_constant(breaks, values)
}

/// `int (upper - lower)` over the real line.
pub fn dri_defect(f: &TargetFunction, delta: f64, epsilon: f64) -> Result<f64, TargetError> {
    let up = envelope(f, delta, epsilon, Side::Upper)?;
    let lo = envelope(f, delta, epsilon, Side::Lower)?;
    Ok((up.total_integral()? - lo.total_integral()?).max(0.0))
}

/// `int_{R+} f(t) w(t) dt`.
pub fn weighted_integral(f: &TargetFunction, w: &WeightSpec) -> Result<f64, TargetError> {
    let span = |lo: f64, hi: f64| -> Result<f64, TargetError> {
        let lo = lo.max(0.0);
        if !(hi > lo) {
            return Ok(0.0);
        }
        if hi.is_infinite() && !w.decays() {
            return Err(f.divergent(w));
        }
        match w.primitive(lo) {
            Some(p_lo) => {
                let p_hi = if hi.is_infinite() { 0.0 } else { w.primitive(hi).unwrap() };
                Ok(p_hi - p_lo)
            }
            None => Ok(integrate_tail(|t| w.eval(t), lo, hi)?),
        }
    };
    match f.canon() {
        Canon::Indicator { lo, hi } => span(lo, hi),
        Canon::Pc { breaks, values } => {
            let mut acc = 0.0;
            for (i, &v) in values.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let end = breaks.get(i + 1).copied().unwrap_or(f64::INFINITY);
                acc += v * span(breaks[i], end)?;
            }
            Ok(acc)
        }
        Canon::Exp { a, start } => {
            let lo = start.max(0.0);
            let scale = (-a * (lo - start)).exp();
            let closed = match *w {
                WeightSpec::Unit => Some(1.0 / a),
                WeightSpec::LinearGrowth => Some((1.0 + lo) / a + 1.0 / (a * a)),
                WeightSpec::ExpDecay { lambda } => Some((-lambda * lo).exp() / (a + lambda)),
                _ => None,
            };
            match closed {
                Some(c) => Ok(scale * c),
                None => Ok(integrate_tail(|t| (-a * (t - start)).exp() * w.eval(t), lo, f64::INFINITY)?),
            }
        }
    }
}

/// Integral of a positive, eventually decaying `g` over `[lo, hi]`, with an
/// infinite `hi` truncated where `g` drops below `1e-15` of its peak.
fn integrate_tail<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64) -> Result<f64, QuadratureError> {
    let end = if hi.is_infinite() {
        quad::truncation_point(&g, lo, 1.0, 1e-17)
    } else {
        hi
    };
    let pts = quad::uniform_points(lo, end, 64, &[]);
    quad::integrate_panels(g, &pts, INTEGRAL_TOL)
}

impl fmt::Display for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Indicator { lo, hi } => write!(f, "ind:{lo},{hi}"),
            Self::Exponential { a } => write!(f, "exp:{a}"),
            Self::PiecewiseConstant { breaks, values } => {
                write!(f, "pc:")?;
                for (i, (b, v)) in breaks.iter().zip(values).enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{b},{v}")?;
                }
                Ok(())
            }
            Self::Shifted { inner, y } => write!(f, "{inner}@shift:{y}"),
        }
    }
}

fn parse_err(input: &str, reason: impl Into<String>) -> TargetError {
    TargetError::Parse {
        input: input.to_string(),
        reason: reason.into(),
    }
}

fn num(input: &str, s: &str) -> Result<f64, TargetError> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| parse_err(input, format!("bad number {:?}: {e}", s.trim())))
}

impl FromStr for TargetFunction {
    type Err = TargetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.trim().split('@');
        let base = parts.next().unwrap_or_default();
        let (kind, body) = base
            .split_once(':')
            .ok_or_else(|| parse_err(s, "expected <shape>:<parameters>"))?;
        let mut f = match kind.trim() {
            "ind" => {
                let (a, b) = body.split_once(',').ok_or_else(|| parse_err(s, "ind needs lo,hi"))?;
                Self::indicator(num(s, a)?, num(s, b)?)?
            }
            "exp" => Self::exponential(num(s, body)?)?,
            "pc" => {
                let mut breaks = Vec::new();
                let mut values = Vec::new();
                for piece in body.split(';').filter(|p| !p.trim().is_empty()) {
                    let (b, v) = piece.split_once(',').ok_or_else(|| parse_err(s, "pc pieces are b,v"))?;
                    breaks.push(num(s, b)?);
                    values.push(num(s, v)?);
                }
                Self::piecewise_constant(breaks, values)?
            }
            other => return Err(parse_err(s, format!("unknown shape {other:?}"))),
        };
        for m in parts {
            let (name, val) = m.split_once(':').ok_or_else(|| parse_err(s, "modifier needs name:value"))?;
            match name.trim() {
                "shift" => f = f.shifted(num(s, val)?),
                other => return Err(parse_err(s, format!("unknown modifier {other:?}"))),
            }
        }
        Ok(f)
    }
}
