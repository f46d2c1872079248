//! Right-hand sides of the asymptotic statements, evaluated from supplied
//! ingredients (`V(x)`, `kappa`, `sigma`, integrals of the target).
//!
//! Every predictor is identified by a stable string id:
//!
//! | id | quantity | formula |
//! |----|----------|---------|
//! | `AA001` | `E f(x+S_n - y); tau_x > n` | `2V(x)/(sqrt(2pi) s^2 n) phi+(y/(s sqrt n)) int f` |
//! | `AA001D` | `P(x+S_n in y+[0,D], tau_x > n)` | same with `D` for `int f` |
//! | `MD` | interval at `y = s sqrt(q n log n)` | `2V(x) D sqrt(q log n) / (sqrt(2pi) s^2 n^{1+q/2})` |
//! | `AA002.1` | target, `y = O(1)` | `2V(x)/(sqrt(2pi) s^3 n^{3/2}) int f(t-y) V*(t) dt` |
//! | `AA002.2` | target, `y = o(sqrt n)` | `2 y V(x)/(sqrt(2pi) s^3 n^{3/2}) int f` |
//! | `AA002bis` | interval, `y = o(sqrt n)` | `2 y V(x) D/(sqrt(2pi) s^3 n^{3/2})` |
//! | `BB001` | target, `x ~ sqrt n` | `psi(y/(s sqrt n), x/(s sqrt n)) int f/(s sqrt n)` |
//! | `BB001D` | interval, `x ~ sqrt n` | same with `D` |
//! | `BB001D-MD` | interval, `x = eta s sqrt n`, `y = s sqrt(q n log n)` | `D e^{-eta^2/2 + eta sqrt(q log n)}/(sqrt(2pi) s n^{(1+q)/2})` |
//! | `BB002.1` | target, `x ~ sqrt n`, `y = O(1)` | `2/(sqrt(2pi) s^2 n) phi+(x/(s sqrt n)) int f(t-y) V*(t) dt` |
//! | `BB002.2` | target, `x ~ sqrt n`, `y = o(sqrt n)` | `2y/(sqrt(2pi) s^2 n) phi+(x/(s sqrt n)) int f` |
//! | `BB002bis` | interval, same | same with `D` |
//! | `IGL1` | `P(tau_x > n)` with drift, small `x` | `2 V_l(x) e^{n L + l x}/(sqrt(2pi) s_l^3 n^{3/2}) I` |
//! | `IGL2` | same, `x ~ sqrt n` | `2 e^{n L + l x}/(sqrt(2pi) s_l^2 n) phi+(x/(s_l sqrt n)) I` |
//! | `TAU-S` | `P(tau_x = n)`, small `x` | `2 kappa V(x)/(sqrt(2pi) s^3 n^{3/2})` |
//! | `TAU-L` | `P(tau_x = n)`, `x ~ sqrt n` | `2 kappa/(sqrt(2pi) s^2 n) phi+(x/(s sqrt n))` |
//! | `TAU-S-TILT`, `TAU-L-TILT` | same with drift | tilted `V_l`, `s_l`, `kappa_l`, times `e^{n L + l x}` |
//! | `ICLT-S` | `P(x+S_n <= t s sqrt n, tau_x > n)` | `2V(x)/(s sqrt(2 pi n)) Phi+(t)`; survival without `t` |
//! | `ICLT-L` | same, `x ~ sqrt n` | `int_0^t psi(u, x/(s sqrt n)) du`; survival without `t` |
//! | `LLT` | `E f(S_n - y)` | `int f phi(y/(s sqrt n))/(s sqrt n)` |
//! | `LLT-MD` | `P(S_n in [0,D] + s sqrt(q n log n))` | `D/(sqrt(2pi) s n^{(1+q)/2})` |
//! | `EXPF` | `E e^{-a(x+S_n)}; tau_x > n` | `2V(x)/(sqrt(2pi) s^3 n^{3/2}) int e^{-at} V*(t) dt` |

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special_fns::{levy_psi, normal_cdf, normal_pdf, rayleigh, rayleigh_cdf};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AsymptoticsError {
    #[error("theorem {theorem} needs ingredient `{name}`")]
    MissingIngredient { theorem: TheoremId, name: &'static str },
    #[error("ingredient `{name}` = {value} is out of range")]
    InvalidIngredient { name: &'static str, value: f64 },
    #[error("unknown theorem id `{0}`")]
    UnknownTheorem(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TheoremId {
    AA001,
    AA001D,
    MD,
    AA002_1,
    AA002_2,
    AA002bis,
    BB001,
    BB001D,
    BB001DMD,
    BB002_1,
    BB002_2,
    BB002bis,
    IGL1,
    IGL2,
    TauS,
    TauL,
    TauSTilt,
    TauLTilt,
    IcltS,
    IcltL,
    Llt,
    LltMd,
    Expf,
}

/// Whether the starting point is near the boundary or of order `sqrt n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    SmallX,
    LargeX,
    /// Walk without killing.
    Free,
}

impl TheoremId {
    pub const ALL: [TheoremId; 23] = [
        TheoremId::AA001,
        TheoremId::AA001D,
        TheoremId::MD,
        TheoremId::AA002_1,
        TheoremId::AA002_2,
        TheoremId::AA002bis,
        TheoremId::BB001,
        TheoremId::BB001D,
        TheoremId::BB001DMD,
        TheoremId::BB002_1,
        TheoremId::BB002_2,
        TheoremId::BB002bis,
        TheoremId::IGL1,
        TheoremId::IGL2,
        TheoremId::TauS,
        TheoremId::TauL,
        TheoremId::TauSTilt,
        TheoremId::TauLTilt,
        TheoremId::IcltS,
        TheoremId::IcltL,
        TheoremId::Llt,
        TheoremId::LltMd,
        TheoremId::Expf,
    ];

    pub fn as_str(self) -> &'static str {
        use TheoremId::*;
        match self {
            AA001 => "AA001",
            AA001D => "AA001D",
            MD => "MD",
            AA002_1 => "AA002.1",
            AA002_2 => "AA002.2",
            AA002bis => "AA002bis",
            BB001 => "BB001",
            BB001D => "BB001D",
            BB001DMD => "BB001D-MD",
            BB002_1 => "BB002.1",
            BB002_2 => "BB002.2",
            BB002bis => "BB002bis",
            IGL1 => "IGL1",
            IGL2 => "IGL2",
            TauS => "TAU-S",
            TauL => "TAU-L",
            TauSTilt => "TAU-S-TILT",
            TauLTilt => "TAU-L-TILT",
            IcltS => "ICLT-S",
            IcltL => "ICLT-L",
            Llt => "LLT",
            LltMd => "LLT-MD",
            Expf => "EXPF",
        }
    }

    pub fn regime(self) -> RegimeKind {
        use TheoremId::*;
        match self {
            BB001 | BB001D | BB001DMD | BB002_1 | BB002_2 | BB002bis | IGL2 | TauL | TauLTilt | IcltL => RegimeKind::LargeX,
            Llt | LltMd => RegimeKind::Free,
            _ => RegimeKind::SmallX,
        }
    }

    /// Predictors that need the drift ingredients.
    pub fn is_drifted(self) -> bool {
        matches!(self, TheoremId::IGL1 | TheoremId::IGL2 | TheoremId::TauSTilt | TheoremId::TauLTilt)
    }

    /// Advisory validity range, as stated with the theorem.
    pub fn validity(self) -> &'static str {
        use TheoremId::*;
        match self {
            AA001 | AA001D => "x in [0, a_n sqrt n], y in [eta sqrt n, s sqrt(q n log n)]",
            MD => "x in [0, a_n sqrt n], 0 < q < q0, D in [D0, n^(1/2 - e)]",
            AA002_1 => "x in [0, a_n sqrt n], y = O(1)",
            AA002_2 | AA002bis => "x in [0, a_n sqrt n], y in [y0, a_n sqrt n]",
            BB001 | BB001D => "x in [sqrt n / eta, eta sqrt n], y up to s sqrt(q n log n)",
            BB001DMD => "x = eta s sqrt n, y = s sqrt(q n log n), D in [D0, n^(1/2 - e)]",
            BB002_1 => "x in [sqrt n / eta, eta sqrt n], y = O(1)",
            BB002_2 | BB002bis => "x in [sqrt n / eta, eta sqrt n], y in [y0, a_n sqrt n]",
            IGL1 | TauSTilt => "negative drift with Cramer root, x in [0, a_n sqrt n]",
            IGL2 | TauLTilt => "negative drift with Cramer root, x in [sqrt n / eta, eta sqrt n]",
            TauS => "x in [0, a_n sqrt n]",
            TauL => "x in [sqrt n / eta, eta sqrt n]",
            IcltS => "x in [0, a_n sqrt n], t >= 0",
            IcltL => "x in [sqrt n / eta, eta sqrt n], t >= 0",
            Llt => "y in R, f directly Riemann integrable",
            LltMd => "0 < q < q0",
            Expf => "a > 0, x in [0, a_n sqrt n]",
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TheoremId {
    type Err = AsymptoticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TheoremId::ALL
            .iter()
            .copied()
            .find(|id| id.as_str() == s.trim())
            .ok_or_else(|| AsymptoticsError::UnknownTheorem(s.to_string()))
    }
}

impl Serialize for TheoremId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for TheoremId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Cramer-tilt ingredients for the drifted predictors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftIngredients {
    pub lambda: f64,
    /// `Lambda(lambda) = log E e^{lambda X}`.
    pub log_mgf: f64,
    pub tilted_sigma: f64,
    /// `V_lambda(x)`.
    pub v_lambda_x: f64,
    /// `int_{R+} e^{-lambda t} V_lambda*(t) dt`.
    #[serde(default)]
    pub i_integral: Option<f64>,
}

/// Inputs of a predictor. Only the fields the selected theorem reads must be
/// present; every read is recorded in [`Prediction::ingredients`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ingredients {
    pub n: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_int: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_vstar_int: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exp_vstar_int: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<DriftIngredients>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub value: f64,
    pub theorem: TheoremId,
    /// The subset of the inputs the formula used.
    pub ingredients: Ingredients,
    pub validity: String,
}

/// Records the ingredients a formula reads.
struct Reader<'a> {
    id: TheoremId,
    src: &'a Ingredients,
    used: Ingredients,
}

macro_rules! getter {
    ($name:ident, $field:ident, $check:expr) => {
        fn $name(&mut self) -> Result<f64, AsymptoticsError> {
            let v = self.src.$field.ok_or(AsymptoticsError::MissingIngredient {
                theorem: self.id,
                name: stringify!($field),
            })?;
            let ok: fn(f64) -> bool = $check;
            if !ok(v) {
                return Err(AsymptoticsError::InvalidIngredient {
                    name: stringify!($field),
                    value: v,
                });
            }
            self.used.$field = Some(v);
            Ok(v)
        }
    };
}

fn finite(v: f64) -> bool {
    v.is_finite()
}
fn non_negative(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}
fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl<'a> Reader<'a> {
    fn new(id: TheoremId, src: &'a Ingredients) -> Result<Self, AsymptoticsError> {
        if src.n == 0 {
            return Err(AsymptoticsError::InvalidIngredient { name: "n", value: 0.0 });
        }
        let used = Ingredients {
            n: src.n,
            ..Default::default()
        };
        Ok(Self { id, src, used })
    }

    fn n(&self) -> f64 {
        self.src.n as f64
    }

    getter!(sigma, sigma, positive);
    getter!(x, x, non_negative);
    getter!(v_x, v_x, non_negative);
    getter!(y, y, finite);
    getter!(delta, delta, positive);
    getter!(f_int, f_int, finite);
    getter!(f_vstar_int, f_vstar_int, finite);
    getter!(t, t, |v| v >= 0.0);
    getter!(q, q, positive);
    getter!(eta, eta, non_negative);
    getter!(a, a, positive);
    getter!(kappa, kappa, positive);
    getter!(exp_vstar_int, exp_vstar_int, non_negative);

    fn optional_t(&mut self) -> Result<Option<f64>, AsymptoticsError> {
        match self.src.t {
            None => Ok(None),
            Some(_) => self.t().map(Some),
        }
    }

    fn drift(&mut self, need_i: bool) -> Result<DriftIngredients, AsymptoticsError> {
        let d = self.src.drift.ok_or(AsymptoticsError::MissingIngredient { theorem: self.id, name: "drift" })?;
        if !positive(d.lambda) {
            return Err(AsymptoticsError::InvalidIngredient { name: "lambda", value: d.lambda });
        }
        if !positive(d.tilted_sigma) {
            return Err(AsymptoticsError::InvalidIngredient {
                name: "tilted_sigma",
                value: d.tilted_sigma,
            });
        }
        if !finite(d.log_mgf) || d.log_mgf > 0.0 {
            return Err(AsymptoticsError::InvalidIngredient { name: "log_mgf", value: d.log_mgf });
        }
        if need_i && d.i_integral.is_none() {
            return Err(AsymptoticsError::MissingIngredient {
                theorem: self.id,
                name: "i_integral",
            });
        }
        let mut kept = d;
        if !need_i {
            kept.i_integral = None;
        }
        self.used.drift = Some(kept);
        Ok(d)
    }
}

/// `phi+(s) = s e^{-s^2/2}`, zero for `s <= 0`.
fn phi_plus(s: f64) -> f64 {
    rayleigh(s).0
}

/// `2 V / (sqrt(2 pi) s^3 n^{3/2})`.
fn near_boundary_local(v: f64, sigma: f64, n: f64) -> f64 {
    2.0 * v / ((2.0 * PI).sqrt() * sigma.powi(3) * n.powf(1.5))
}

/// `2 / (sqrt(2 pi) s^2 n)`.
fn bulk_local(sigma: f64, n: f64) -> f64 {
    2.0 / ((2.0 * PI).sqrt() * sigma * sigma * n)
}

/// `int_0^t psi(u, x) du`, closed form.
fn levy_psi_integral(t: f64, x: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let total = normal_cdf(x) - normal_cdf(-x);
    if t.is_infinite() {
        return total;
    }
    // Phi(t + x) - Phi(t - x) = mass the meander misses beyond t.
    let beyond = if t > x {
        normal_cdf(-(t - x)) - normal_cdf(-(t + x))
    } else {
        normal_cdf(t + x) - normal_cdf(t - x)
    };
    (total - beyond).max(0.0)
}

/// Evaluates the predictor `id` at `ing`.
pub fn predict(id: TheoremId, ing: &Ingredients) -> Result<Prediction, AsymptoticsError> {
    use TheoremId::*;
    let mut r = Reader::new(id, ing)?;
    let n = r.n();
    let value = match id {
        AA001 | AA001D => {
            let (v, s, y) = (r.v_x()?, r.sigma()?, r.y()?);
            let mass = if id == AA001 { r.f_int()? } else { r.delta()? };
            v * bulk_local(s, n) * phi_plus(y / (s * n.sqrt())) * mass
        }
        MD => {
            let (v, s, d, q) = (r.v_x()?, r.sigma()?, r.delta()?, r.q()?);
            2.0 * v * d * (q * n.ln()).sqrt() / ((2.0 * PI).sqrt() * s * s * n.powf(1.0 + q / 2.0))
        }
        AA002_1 => {
            let (v, s) = (r.v_x()?, r.sigma()?);
            near_boundary_local(v, s, n) * r.f_vstar_int()?
        }
        AA002_2 | AA002bis => {
            let (v, s, y) = (r.v_x()?, r.sigma()?, r.y()?);
            let mass = if id == AA002_2 { r.f_int()? } else { r.delta()? };
            y * near_boundary_local(v, s, n) * mass
        }
        BB001 | BB001D => {
            let (x, s, y) = (r.x()?, r.sigma()?, r.y()?);
            let mass = if id == BB001 { r.f_int()? } else { r.delta()? };
            let scale = s * n.sqrt();
            levy_psi(y / scale, x / scale, 1.0) * mass / scale
        }
        BB001DMD => {
            let (eta, s, d, q) = (r.eta()?, r.sigma()?, r.delta()?, r.q()?);
            let e = -eta * eta / 2.0 + eta * (q * n.ln()).sqrt();
            d * e.exp() / ((2.0 * PI).sqrt() * s * n.powf((1.0 + q) / 2.0))
        }
        BB002_1 => {
            let (x, s) = (r.x()?, r.sigma()?);
            bulk_local(s, n) * phi_plus(x / (s * n.sqrt())) * r.f_vstar_int()?
        }
        BB002_2 | BB002bis => {
            let (x, s, y) = (r.x()?, r.sigma()?, r.y()?);
            let mass = if id == BB002_2 { r.f_int()? } else { r.delta()? };
            y * bulk_local(s, n) * phi_plus(x / (s * n.sqrt())) * mass
        }
        IGL1 | IGL2 => {
            let x = r.x()?;
            let d = r.drift(true)?;
            let i = d.i_integral.unwrap_or_default();
            if !(i.is_finite() && i >= 0.0) {
                return Err(AsymptoticsError::InvalidIngredient { name: "i_integral", value: i });
            }
            let factor = (n * d.log_mgf + d.lambda * x).exp();
            let shape = if id == IGL1 {
                near_boundary_local(d.v_lambda_x, d.tilted_sigma, n)
            } else {
                bulk_local(d.tilted_sigma, n) * phi_plus(x / (d.tilted_sigma * n.sqrt()))
            };
            factor * shape * i
        }
        TauS => {
            let (k, v, s) = (r.kappa()?, r.v_x()?, r.sigma()?);
            k * near_boundary_local(v, s, n)
        }
        TauL => {
            let (k, x, s) = (r.kappa()?, r.x()?, r.sigma()?);
            k * bulk_local(s, n) * phi_plus(x / (s * n.sqrt()))
        }
        TauSTilt | TauLTilt => {
            let (k, x) = (r.kappa()?, r.x()?);
            let d = r.drift(false)?;
            let factor = (n * d.log_mgf + d.lambda * x).exp();
            let shape = if id == TauSTilt {
                near_boundary_local(d.v_lambda_x, d.tilted_sigma, n)
            } else {
                bulk_local(d.tilted_sigma, n) * phi_plus(x / (d.tilted_sigma * n.sqrt()))
            };
            factor * k * shape
        }
        IcltS => {
            let (v, s) = (r.v_x()?, r.sigma()?);
            let surv = 2.0 * v / (s * (2.0 * PI * n).sqrt());
            match r.optional_t()? {
                Some(t) => surv * rayleigh_cdf(t),
                None => surv,
            }
        }
        IcltL => {
            let (x, s) = (r.x()?, r.sigma()?);
            let t = r.optional_t()?.unwrap_or(f64::INFINITY);
            levy_psi_integral(t, x / (s * n.sqrt()))
        }
        Llt => {
            let (s, y, f) = (r.sigma()?, r.y()?, r.f_int()?);
            let scale = s * n.sqrt();
            f * normal_pdf(y / scale) / scale
        }
        LltMd => {
            let (s, d, q) = (r.sigma()?, r.delta()?, r.q()?);
            d / ((2.0 * PI).sqrt() * s * n.powf((1.0 + q) / 2.0))
        }
        Expf => {
            let (v, s) = (r.v_x()?, r.sigma()?);
            r.a()?;
            near_boundary_local(v, s, n) * r.exp_vstar_int()?
        }
    };
    Ok(Prediction {
        value: value.max(0.0),
        theorem: id,
        ingredients: r.used,
        validity: id.validity().to_string(),
    })
}

/// Branch of the target-expectation predictors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetBranch {
    /// `y` of order `sqrt n`.
    Bulk,
    /// `y = O(1)`, uses `int f(t-y) V*(t) dt`.
    Local,
    /// `1 << y << sqrt n`.
    Linear,
}

/// `E(f(x + S_n - y); tau_x > n)` for a small or large starting point.
#[allow(clippy::too_many_arguments)]
pub fn predict_target_expectation(
    regime: RegimeKind,
    branch: TargetBranch,
    v_x: Option<f64>,
    sigma: f64,
    n: u64,
    y: f64,
    f_int: f64,
    f_vstar_int: Option<f64>,
    x: f64,
) -> Result<Prediction, AsymptoticsError> {
    use TargetBranch::*;
    let id = match (regime, branch) {
        (RegimeKind::LargeX, Bulk) => TheoremId::BB001,
        (RegimeKind::LargeX, Local) => TheoremId::BB002_1,
        (RegimeKind::LargeX, Linear) => TheoremId::BB002_2,
        (_, Bulk) => TheoremId::AA001,
        (_, Local) => TheoremId::AA002_1,
        (_, Linear) => TheoremId::AA002_2,
    };
    let ing = Ingredients {
        n,
        sigma: Some(sigma),
        x: Some(x),
        v_x,
        y: Some(y),
        f_int: Some(f_int),
        f_vstar_int,
        ..Default::default()
    };
    predict(id, &ing)
}

/// `P(x + S_n in y + [0, delta], tau_x > n)`. With `q` set, the
/// moderate-deviation form is used and `y` is ignored.
#[allow(clippy::too_many_arguments)]
pub fn predict_interval_prob(regime: RegimeKind, linear: bool, v_x: Option<f64>, sigma: f64, n: u64, y: f64, delta: f64, x: f64, q: Option<f64>) -> Result<Prediction, AsymptoticsError> {
    let id = match (regime, linear, q.is_some()) {
        (RegimeKind::LargeX, _, true) => TheoremId::BB001DMD,
        (_, _, true) => TheoremId::MD,
        (RegimeKind::LargeX, true, _) => TheoremId::BB002bis,
        (RegimeKind::LargeX, false, _) => TheoremId::BB001D,
        (_, true, _) => TheoremId::AA002bis,
        (_, false, _) => TheoremId::AA001D,
    };
    let ing = Ingredients {
        n,
        sigma: Some(sigma),
        x: Some(x),
        v_x,
        y: Some(y),
        delta: Some(delta),
        q,
        eta: Some(x / (sigma * (n as f64).sqrt())),
        ..Default::default()
    };
    predict(id, &ing)
}

/// `P(tau_x > n)`; the drifted forms need `drift` with `i_integral`.
pub fn predict_survival(regime: RegimeKind, v_x: Option<f64>, sigma: f64, n: u64, x: f64, drift: Option<DriftIngredients>) -> Result<Prediction, AsymptoticsError> {
    let id = match (regime, drift.is_some()) {
        (RegimeKind::LargeX, true) => TheoremId::IGL2,
        (_, true) => TheoremId::IGL1,
        (RegimeKind::LargeX, false) => TheoremId::IcltL,
        (_, false) => TheoremId::IcltS,
    };
    let ing = Ingredients {
        n,
        sigma: Some(sigma),
        x: Some(x),
        v_x,
        drift,
        ..Default::default()
    };
    predict(id, &ing)
}

/// `P(tau_x = n)`; with `drift`, `kappa` is `kappa_lambda`.
#[allow(clippy::too_many_arguments)]
pub fn predict_exit_local(regime: RegimeKind, kappa: f64, v_x: Option<f64>, sigma: f64, n: u64, x: f64, drift: Option<DriftIngredients>) -> Result<Prediction, AsymptoticsError> {
    let id = match (regime, drift.is_some()) {
        (RegimeKind::LargeX, true) => TheoremId::TauLTilt,
        (_, true) => TheoremId::TauSTilt,
        (RegimeKind::LargeX, false) => TheoremId::TauL,
        (_, false) => TheoremId::TauS,
    };
    let ing = Ingredients {
        n,
        sigma: Some(sigma),
        x: Some(x),
        v_x,
        kappa: Some(kappa),
        drift,
        ..Default::default()
    };
    predict(id, &ing)
}

/// `P(x + S_n <= t sigma sqrt n, tau_x > n)`.
pub fn predict_integral_cdf(regime: RegimeKind, v_x: Option<f64>, sigma: f64, n: u64, x: f64, t: f64) -> Result<Prediction, AsymptoticsError> {
    let id = if regime == RegimeKind::LargeX { TheoremId::IcltL } else { TheoremId::IcltS };
    let ing = Ingredients {
        n,
        sigma: Some(sigma),
        x: Some(x),
        v_x,
        t: Some(t),
        ..Default::default()
    };
    predict(id, &ing)
}

/// Unconditioned local limit main term; `moderate_dev = (q, delta)` selects
/// the moderate-deviation form.
pub fn predict_unconditioned_llt(f_int: f64, sigma: f64, n: u64, y: f64, moderate_dev: Option<(f64, f64)>) -> Result<Prediction, AsymptoticsError> {
    let mut ing = Ingredients {
        n,
        sigma: Some(sigma),
        ..Default::default()
    };
    match moderate_dev {
        Some((q, delta)) => {
            ing.q = Some(q);
            ing.delta = Some(delta);
            predict(TheoremId::LltMd, &ing)
        }
        None => {
            ing.y = Some(y);
            ing.f_int = Some(f_int);
            predict(TheoremId::Llt, &ing)
        }
    }
}

/// `E(e^{-a(x + S_n)}; tau_x > n)`.
pub fn predict_exp_functional(v_x: f64, sigma: f64, n: u64, a: f64, exp_vstar_int: f64) -> Result<Prediction, AsymptoticsError> {
    let ing = Ingredients {
        n,
        sigma: Some(sigma),
        v_x: Some(v_x),
        a: Some(a),
        exp_vstar_int: Some(exp_vstar_int),
        ..Default::default()
    };
    predict(TheoremId::Expf, &ing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;
    use proptest::prelude::*;

    #[allow(clippy::approx_constant)]
    const V0: f64 = 0.7071;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a / b - 1.0).abs() < rel
    }

    #[test]
    fn ids_round_trip() {
        for id in TheoremId::ALL {
            assert_eq!(id.as_str().parse::<TheoremId>().unwrap(), id);
            let j = serde_json::to_string(&id).unwrap();
            assert_eq!(serde_json::from_str::<TheoremId>(&j).unwrap(), id);
        }
        assert!(matches!("AA003".parse::<TheoremId>(), Err(AsymptoticsError::UnknownTheorem(_))));
    }

    #[test]
    fn target_examples() {
        let p = predict_target_expectation(RegimeKind::SmallX, TargetBranch::Bulk, Some(V0), 1.0, 400, 20.0, 1.0, None, 0.0).unwrap();
        assert!(close(p.value, 0.0008554, 2e-4), "{}", p.value);
        let p = predict_target_expectation(RegimeKind::SmallX, TargetBranch::Linear, Some(V0), 1.0, 400, 5.0, 1.0, None, 0.0).unwrap();
        assert!(close(p.value, 3.5262e-4, 1e-4), "{}", p.value);
        let p = predict_target_expectation(RegimeKind::LargeX, TargetBranch::Bulk, None, 1.0, 400, 20.0, 1.0, None, 20.0).unwrap();
        // psi(1,1) = (1 - e^-2)/sqrt(2 pi)
        let psi11 = (1.0 - (-2.0f64).exp()) / (2.0 * PI).sqrt();
        assert!(close(p.value, psi11 / 20.0, 1e-12));
        assert!(close(p.value, 0.01724757, 1e-6));
    }

    #[test]
    fn local_branch_needs_vstar_integral() {
        let e = predict_target_expectation(RegimeKind::SmallX, TargetBranch::Local, Some(V0), 1.0, 400, 0.0, 1.0, None, 0.0).unwrap_err();
        assert_eq!(
            e,
            AsymptoticsError::MissingIngredient {
                theorem: TheoremId::AA002_1,
                name: "f_vstar_int"
            }
        );
    }

    #[test]
    fn interval_examples() {
        let p = predict_interval_prob(RegimeKind::SmallX, false, Some(V0), 1.0, 400, 20.0, 1.0, 0.0, None).unwrap();
        assert!(close(p.value, 0.0008554, 2e-4));
        let p = predict_interval_prob(RegimeKind::SmallX, false, Some(V0), 1.0, 400, 0.0, 1.0, 0.0, Some(0.1)).unwrap();
        let independent = 2.0 * V0 / (2.0 * PI).sqrt() * (0.1 * 400f64.ln()).sqrt() / (1.05 * 400f64.ln()).exp();
        assert!(close(p.value, independent, 1e-12));
        assert!(close(p.value, 8.0914e-4, 1e-4), "{}", p.value);
        let p = predict_interval_prob(RegimeKind::LargeX, false, None, 1.0, 400, 20.0, 2.0, 20.0, None).unwrap();
        assert!(close(p.value, 0.0344951, 1e-5));
    }

    #[test]
    fn survival_examples() {
        let p = predict_survival(RegimeKind::SmallX, Some(V0), 1.0, 400, 0.0, None).unwrap();
        assert!(close(p.value, 0.0282095, 1e-4));
        let exact = crate::oracle::sparre_andersen_survival(400);
        assert!(close(p.value / exact, 1.0003, 1e-4));
        let p = predict_survival(RegimeKind::LargeX, None, 1.0, 400, 20.0, None).unwrap();
        assert!(close(p.value, 0.6826895, 1e-6));
        let drift = DriftIngredients {
            lambda: 0.5,
            log_mgf: -0.125,
            tilted_sigma: 1.0,
            v_lambda_x: V0,
            i_integral: Some(1.0),
        };
        let p = predict_survival(RegimeKind::SmallX, None, 1.0, 30, 0.0, Some(drift)).unwrap();
        assert!(close(p.value, 8.075e-5, 1e-3), "{}", p.value);
        let mut no_i = drift;
        no_i.i_integral = None;
        assert!(matches!(
            predict_survival(RegimeKind::SmallX, None, 1.0, 30, 0.0, Some(no_i)),
            Err(AsymptoticsError::MissingIngredient { name: "i_integral", .. })
        ));
    }

    #[test]
    fn exit_examples() {
        let p = predict_exit_local(RegimeKind::SmallX, 0.5, Some(V0), 1.0, 100, 0.0, None).unwrap();
        assert!(close(p.value, 2.8210e-4, 1e-4));
        let exact = crate::oracle::sparre_andersen_exit_at(100);
        assert!((p.value / exact - 1.0).abs() < 0.01);
        let p = predict_exit_local(RegimeKind::LargeX, 0.5, None, 1.0, 100, 10.0, None).unwrap();
        assert!(close(p.value, 2.4198e-3, 1e-4));
        let drift = DriftIngredients {
            lambda: 0.5,
            log_mgf: -0.125,
            tilted_sigma: 1.0,
            v_lambda_x: V0,
            i_integral: None,
        };
        let base = predict_exit_local(RegimeKind::SmallX, 0.5, Some(V0), 1.0, 30, 0.0, None).unwrap();
        let tilted = predict_exit_local(RegimeKind::SmallX, 0.5, None, 1.0, 30, 0.0, Some(drift)).unwrap();
        assert!(close(tilted.value / base.value, 0.0235177, 1e-5));
    }

    #[test]
    fn integral_cdf_examples() {
        let p = predict_integral_cdf(RegimeKind::SmallX, Some(V0), 1.0, 400, 0.0, 1.0).unwrap();
        assert!(close(p.value, 0.0111000, 1e-4));
        let p = predict_integral_cdf(RegimeKind::LargeX, None, 1.0, 400, 20.0, f64::INFINITY).unwrap();
        assert!(close(p.value, 0.6826895, 1e-6));
        for r in [RegimeKind::SmallX, RegimeKind::LargeX] {
            assert_eq!(predict_integral_cdf(r, Some(V0), 1.0, 400, 20.0, 0.0).unwrap().value, 0.0);
        }
    }

    #[test]
    fn levy_integral_matches_quadrature() {
        for &(t, x) in &[(0.5, 1.0), (2.0, 1.0), (3.0, 0.01), (0.1, 3.0)] {
            let q = quad::integrate(|s| levy_psi(s, x, 1.0), 0.0, t, 1e-13).unwrap();
            assert!((levy_psi_integral(t, x) - q).abs() < 1e-12, "t={t} x={x}");
        }
    }

    #[test]
    fn llt_examples() {
        let p = predict_unconditioned_llt(1.0, 1.0, 400, 0.0, None).unwrap();
        assert!(close(p.value, 0.0199471, 1e-5));
        let p = predict_unconditioned_llt(0.0, 1.0, 400, 0.0, Some((0.1, 1.0))).unwrap();
        assert!(close(p.value, 1.0 / ((2.0 * PI).sqrt() * (0.55 * 400f64.ln()).exp()), 1e-12));
        assert!(close(p.value, 0.014776, 1e-3));
        let p2 = predict_unconditioned_llt(1.0, 2.0, 400, 0.0, None).unwrap();
        assert!(close(p2.value, 0.0199471 / 2.0, 1e-5));
    }

    #[test]
    fn exp_functional_examples() {
        let p = predict_exp_functional(V0, 1.0, 400, 1.0, 1.0).unwrap();
        assert!(close(p.value, 7.0524e-5, 1e-4));
        assert_eq!(predict_exp_functional(V0, 1.0, 400, 1e6, 0.0).unwrap().value, 0.0);
        let q = predict_exp_functional(V0, 1.0, 1600, 1.0, 1.0).unwrap();
        assert!(close(q.value / p.value, 0.125, 1e-12));
    }

    #[test]
    fn branch_continuity() {
        for alpha in [0.01, 0.03, 0.05] {
            let n = 400u64;
            let y = alpha * 20.0;
            let bulk = predict_interval_prob(RegimeKind::SmallX, false, Some(V0), 1.0, n, y, 1.0, 0.0, None).unwrap();
            let lin = predict_interval_prob(RegimeKind::SmallX, true, Some(V0), 1.0, n, y, 1.0, 0.0, None).unwrap();
            let r = bulk.value / lin.value;
            assert!((0.995..=1.0).contains(&r), "alpha={alpha}: {r}");
        }
    }

    #[test]
    fn large_x_handoff_matches_rayleigh_shape() {
        let n = 400u64;
        let x = 1e-3 * 20.0;
        let surv = predict_integral_cdf(RegimeKind::LargeX, None, 1.0, n, x, f64::INFINITY).unwrap().value;
        for i in 1..=30 {
            let t = i as f64 * 0.1;
            let shape = predict_integral_cdf(RegimeKind::LargeX, None, 1.0, n, x, t).unwrap().value / surv;
            assert!((shape / rayleigh_cdf(t) - 1.0).abs() < 0.02, "t={t}");
        }
    }

    #[test]
    fn audit_reproduces_value() {
        let drift = DriftIngredients {
            lambda: 0.5,
            log_mgf: -0.125,
            tilted_sigma: 1.0,
            v_lambda_x: V0,
            i_integral: Some(0.9),
        };
        let full = Ingredients {
            n: 100,
            sigma: Some(1.0),
            x: Some(3.0),
            v_x: Some(3.5),
            y: Some(4.0),
            delta: Some(1.0),
            f_int: Some(1.0),
            f_vstar_int: Some(2.0),
            t: Some(1.5),
            q: Some(0.1),
            eta: Some(0.3),
            a: Some(1.0),
            kappa: Some(0.5),
            exp_vstar_int: Some(1.2),
            drift: Some(drift),
        };
        for id in TheoremId::ALL {
            let p = predict(id, &full).unwrap();
            let again = predict(id, &p.ingredients).unwrap();
            assert_eq!(p.value.to_bits(), again.value.to_bits(), "{id}");
            let json = serde_json::to_string(&p).unwrap();
            let back: Prediction = serde_json::from_str(&json).unwrap();
            assert_eq!(back, p);
        }
    }

    proptest! {
        #[test]
        fn small_x_scaling(n in 1u64..10_000, v in 0.1f64..10.0, s in 0.2f64..5.0) {
            let a = predict_survival(RegimeKind::SmallX, Some(v), s, n, 0.0, None).unwrap().value;
            let b = predict_survival(RegimeKind::SmallX, Some(v), s, 4 * n, 0.0, None).unwrap().value;
            prop_assert!((a / b - 2.0).abs() < 1e-12);
            let a = predict_exit_local(RegimeKind::SmallX, 0.5, Some(v), s, n, 0.0, None).unwrap().value;
            let b = predict_exit_local(RegimeKind::SmallX, 0.5, Some(v), s, 4 * n, 0.0, None).unwrap().value;
            prop_assert!((a / b - 8.0).abs() < 1e-11);
        }

        #[test]
        fn predictions_are_non_negative(idx in 0usize..23, n in 1u64..5000, x in 0.0f64..50.0, y in -5.0f64..50.0) {
            let ing = Ingredients {
                n,
                sigma: Some(1.3),
                x: Some(x),
                v_x: Some(x + 0.7),
                y: Some(y),
                delta: Some(1.0),
                f_int: Some(1.0),
                f_vstar_int: Some(1.0),
                q: Some(0.1),
                eta: Some(x / (1.3 * (n as f64).sqrt())),
                a: Some(1.0),
                kappa: Some(0.5),
                exp_vstar_int: Some(1.0),
                drift: Some(DriftIngredients { lambda: 0.5, log_mgf: -0.125, tilted_sigma: 1.0, v_lambda_x: x + 0.7, i_integral: Some(1.0) }),
                ..Default::default()
            };
            let p = predict(TheoremId::ALL[idx], &ing).unwrap();
            prop_assert!(p.value >= 0.0 && p.value.is_finite());
        }
    }
}
