//! Closed-form densities, Brownian exit formulas, the smoothing kernel and the
//! Gaussian/Rayleigh/Levy convolution identities.
//!
//! Everything here is a pure function of its arguments.

use std::f64::consts::{PI, SQRT_2};

use thiserror::Error;

use crate::increments::IncrementLaw;
use crate::quad::{self, QuadratureError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecialError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;
const IDENTITY_TOL: f64 = 1e-11;
/// Below this argument the removable singularities switch to series.
const SERIES_CUTOFF: f64 = 1e-4;

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Normal density with mean 0 and variance `v`.
pub fn normal_pdf_var(v: f64, x: f64) -> f64 {
    (-x * x / (2.0 * v)).exp() / (2.0 * PI * v).sqrt()
}

/// Rayleigh density and distribution function at `s`.
pub fn rayleigh(s: f64) -> (f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0);
    }
    let e = (-0.5 * s * s).exp();
    (s * e, -(-0.5 * s * s).exp_m1())
}

/// Rayleigh distribution function `1 - exp(-t^2/2)` on `t >= 0` (0 below,
/// 1 at `+inf`).
pub fn rayleigh_cdf(t: f64) -> f64 {
    if t.is_infinite() && t > 0.0 {
        return 1.0;
    }
    rayleigh(t).1
}

/// Rayleigh density with scale `sqrt(v)`: `(s/v) exp(-s^2/(2v))` on `s >= 0`.
pub fn rayleigh_pdf_var(v: f64, s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        s / v * (-s * s / (2.0 * v)).exp()
    }
}

/// `psi_v(s, x) = (exp(-(s-x)^2/2v) - exp(-(s+x)^2/2v)) / sqrt(2 pi v)`.
pub fn levy_psi(s: f64, x: f64, v: f64) -> f64 {
    let r = s * x / v;
    let norm = 1.0 / (2.0 * PI * v).sqrt();
    if r.abs() < 1.0 {
        // Factored form avoids cancellation when s*x is small.
        2.0 * norm * (-(s * s + x * x) / (2.0 * v)).exp() * r.sinh()
    } else {
        norm * ((-(s - x) * (s - x) / (2.0 * v)).exp() - (-(s + x) * (s + x) / (2.0 * v)).exp())
    }
}

/// Total mass `2 Phi(x) - 1` of `psi(., x)` on the half line.
pub fn psi_normalizer(x: f64) -> Result<f64, SpecialError> {
    if !(x > 0.0) {
        return Err(SpecialError::Domain(format!("psi_normalizer needs x > 0, got {x}")));
    }
    Ok(libm::erf(x / SQRT_2))
}

/// `psi(s, x) / (2 Phi(x) - 1)`, the Levy density normalized on the half
/// line; tends to the Rayleigh density as `x -> 0`.
pub fn normalized_psi(s: f64, x: f64) -> Result<f64, SpecialError> {
    if !(x > 0.0) {
        return Err(SpecialError::Domain(format!("normalized_psi needs x > 0, got {x}")));
    }
    if s < 0.0 {
        return Ok(-normalized_psi(-s, x)?);
    }
    if x < SERIES_CUTOFF {
        let (d, _) = rayleigh(s);
        return Ok(d * (1.0 + x * x * (s * s - 2.0) / 6.0));
    }
    Ok(levy_psi(s, x, 1.0) / psi_normalizer(x)?)
}

fn check_open_unit(name: &str, v: f64, hi_closed: Option<f64>) -> Result<(), SpecialError> {
    let ok = match hi_closed {
        Some(h) => v > 0.0 && v <= h,
        None => v > 0.0 && v < 1.0,
    };
    if ok {
        Ok(())
    } else {
        Err(SpecialError::Domain(format!("{name}: v = {v} outside its allowed range")))
    }
}

/// `int phi_v(s - z) psi_{1-v}(z, x) dz` over the real line, or over the
/// half line when `restricted`.
pub fn conv_normal_levy(v: f64, s: f64, x: f64, restricted: bool) -> Result<f64, SpecialError> {
    check_open_unit("conv_normal_levy", v, None)?;
    if restricted && v > 0.25 {
        return Err(SpecialError::Domain(format!(
            "restricted convolution needs v <= 1/4, got {v}"
        )));
    }
    let w = 10.0 * v.sqrt();
    let mut lo = s - w;
    let hi = s + w;
    if restricted {
        if hi <= 0.0 {
            return Ok(0.0);
        }
        lo = lo.max(0.0);
    }
    let pts = quad::uniform_points(lo, hi, 16, &[x, -x, s]);
    let f = |z: f64| normal_pdf_var(v, s - z) * levy_psi(z, x, 1.0 - v);
    Ok(quad::integrate_panels(f, &pts, IDENTITY_TOL)?)
}

/// `(phi_v * phi^+_{1-v})(x)`, computed as the closed-form main part plus
/// the non-negative remainder obtained by quadrature.
pub fn conv_normal_rayleigh(v: f64, x: f64) -> Result<f64, SpecialError> {
    check_open_unit("conv_normal_rayleigh", v, Some(0.5))?;
    if x < 0.0 {
        return Err(SpecialError::Domain(format!("conv_normal_rayleigh needs x >= 0, got {x}")));
    }
    let main = (1.0 - v).sqrt() * rayleigh(x).0;
    // Remainder: sqrt(v / 2pi) e^{-x^2/2} int_c^inf (w - c) e^{-w^2/2} dw.
    let c = x * ((1.0 - v) / v).sqrt();
    let pref = (v / (2.0 * PI)).sqrt() * (-0.5 * x * x).exp();
    if pref == 0.0 {
        return Ok(main);
    }
    let upper = c + 40.0;
    let pts = quad::uniform_points(c, upper, 32, &[]);
    let tail = quad::integrate_panels(|w| (w - c) * (-0.5 * w * w).exp(), &pts, 1e-14)?;
    Ok(main + pref * tail.max(0.0))
}

/// Direct quadrature of the Gaussian/Rayleigh convolution, without the
/// main-part split used by [`conv_normal_rayleigh`].
pub fn conv_normal_rayleigh_direct(v: f64, x: f64) -> Result<f64, SpecialError> {
    check_open_unit("conv_normal_rayleigh_direct", v, Some(0.5))?;
    let lo = -12.0 * v.sqrt();
    if x <= lo {
        return Ok(0.0);
    }
    let pts = quad::uniform_points(lo, x, 32, &[0.0]);
    let f = |z: f64| normal_pdf_var(v, z) * rayleigh_pdf_var(1.0 - v, x - z);
    Ok(quad::integrate_panels(f, &pts, IDENTITY_TOL)?)
}

/// `int_{R+} phi^+_v(s) psi_{1-v}(s, x) ds`.
pub fn rayleigh_levy_integral(v: f64, x: f64) -> Result<f64, SpecialError> {
    check_open_unit("rayleigh_levy_integral", v, None)?;
    if x < 0.0 {
        return Err(SpecialError::Domain(format!("rayleigh_levy_integral needs x >= 0, got {x}")));
    }
    let hi = 12.0 * v.sqrt();
    if hi <= 0.0 {
        return Ok(0.0);
    }
    let pts = quad::uniform_points(0.0, hi, 32, &[x]);
    let f = |s: f64| rayleigh_pdf_var(v, s) * levy_psi(s, x, 1.0 - v);
    Ok(quad::integrate_panels(f, &pts, IDENTITY_TOL)?)
}

/// Probability that `x + sigma B_n` lies in `[a, b]` without the Brownian
/// motion having crossed below zero before time `n`. `b` may be `+inf`.
pub fn brownian_exit(x: f64, sigma: f64, n: f64, a: f64, b: f64) -> Result<f64, SpecialError> {
    if x < 0.0 || !(sigma > 0.0) || !(n > 0.0) || a < 0.0 || !(b > a) {
        return Err(SpecialError::Domain(format!(
            "brownian_exit(x={x}, sigma={sigma}, n={n}, a={a}, b={b})"
        )));
    }
    let scale = sigma * n.sqrt();
    let xs = x / scale;
    if xs == 0.0 {
        return Ok(0.0);
    }
    if a == 0.0 && b.is_infinite() {
        return Ok(libm::erf(xs / SQRT_2));
    }
    let a_s = a / scale;
    let b_s = b / scale;
    let cut = xs + 14.0;
    if a_s >= cut {
        return Ok(0.0);
    }
    let hi = b_s.min(cut);
    let pts = quad::uniform_points(a_s, hi, 16, &[xs]);
    Ok(quad::integrate_panels(|s| levy_psi(s, xs, 1.0), &pts, 1e-12)?)
}

/// Scale of the smoothing kernel; must lie in `(0, 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    epsilon: f64,
}

impl KernelSpec {
    pub fn new(epsilon: f64) -> Result<Self, SpecialError> {
        if epsilon > 0.0 && epsilon < 0.5 {
            Ok(Self { epsilon })
        } else {
            Err(SpecialError::Domain(format!("kernel epsilon must lie in (0, 1/2), got {epsilon}")))
        }
    }

    /// Unchecked scale, for evaluating the unit kernel (`epsilon = 1`).
    pub fn unit() -> Self {
        Self { epsilon: 1.0 }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

fn sinc(z: f64) -> f64 {
    if z.abs() < SERIES_CUTOFF {
        let z2 = z * z;
        1.0 - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// Normalizer of `sinc(u/4)^4`: `1 / int sinc(u/4)^4 du = 3 / (8 pi)`.
pub const KERNEL_NORMALIZER: f64 = 3.0 / (8.0 * PI);

/// `kappa_eps(u) = kappa(u / eps) / eps` with `kappa(u) = 3/(8 pi) sinc(u/4)^4`.
pub fn smoothing_kernel(spec: KernelSpec, u: f64) -> f64 {
    let e = spec.epsilon;
    let s = sinc(u / e / 4.0);
    KERNEL_NORMALIZER * s * s * s * s / e
}

/// Half-width of the numerical Fourier integral of the unit kernel.
const KERNEL_CUTOFF: f64 = 4000.0;

/// Fourier transform `int e^{-itu} kappa_eps(u) du`, computed by quadrature
/// (the kernel is even, so this is a cosine transform).
pub fn kernel_fourier(spec: KernelSpec, t: f64) -> Result<f64, SpecialError> {
    let w = spec.epsilon * t;
    let width = if w.abs() > 0.0 { (PI / w.abs()).min(4.0) } else { 4.0 };
    let k = (KERNEL_CUTOFF / width).ceil() as usize;
    let pts = quad::uniform_points(0.0, KERNEL_CUTOFF, k, &[]);
    let unit = KernelSpec::unit();
    let half = quad::integrate_panels(|u| (w * u).cos() * smoothing_kernel(unit, u), &pts, 1e-12)?;
    Ok(2.0 * half)
}

/// Fuk-Nagaev bound on `P(max_{k<=n} |S_k| > u)` for a centred walk:
/// `2 exp[(u/v)(1 + log(n/(uv)))] + n P(|X_1| > v)`.
pub fn fuk_nagaev_bound(u: f64, v: f64, n: u64, law: &IncrementLaw) -> Result<f64, SpecialError> {
    if !(u > 0.0 && v > 0.0) || n == 0 {
        return Err(SpecialError::Domain(format!("fuk_nagaev_bound(u={u}, v={v}, n={n})")));
    }
    let nf = n as f64;
    let exp_part = 2.0 * ((u / v) * (1.0 + (nf / (u * v)).ln())).exp();
    Ok(exp_part + nf * law.abs_tail(v))
}
