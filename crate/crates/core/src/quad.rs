//! Adaptive Simpson quadrature on finite intervals.
//!
//! Infinite domains are handled by the callers, which truncate where the
//! integrand falls below a relative floor of its peak (see [`truncation_point`]).

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("adaptive quadrature on [{lo}, {hi}] did not reach tolerance {tol:e} (estimated error {estimate:e})")]
    ToleranceNotMet {
        lo: f64,
        hi: f64,
        tol: f64,
        estimate: f64,
    },
    #[error("integrand returned a non-finite value at {at}")]
    NonFinite { at: f64 },
}

/// Absolute tolerance used for the identity checks.
pub const DEFAULT_TOL: f64 = 1e-10;

const MAX_DEPTH: u32 = 48;

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn eval<F: Fn(f64) -> f64>(f: &F, x: f64) -> Result<f64, QuadratureError> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(QuadratureError::NonFinite { at: x })
    }
}

fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    p: Panel,
    tol: f64,
    depth: u32,
    unresolved: &mut f64,
) -> Result<f64, QuadratureError> {
    let m = 0.5 * (p.a + p.b);
    let lm = 0.5 * (p.a + m);
    let rm = 0.5 * (m + p.b);
    let flm = eval(f, lm)?;
    let frm = eval(f, rm)?;
    let left = simpson(p.a, m, p.fa, flm, p.fm);
    let right = simpson(m, p.b, p.fm, frm, p.fb);
    let delta = left + right - p.whole;
    // Differences at this level are pure rounding noise.
    let noise = 64.0 * f64::EPSILON * (left.abs() + right.abs());
    if depth >= MAX_DEPTH || m <= p.a || m >= p.b {
        let err = delta.abs() / 15.0;
        if delta.abs() > noise {
            *unresolved += err;
        }
        return Ok(left + right + delta / 15.0);
    }
    // Force a few splits so that narrow features are not missed at the top level.
    if depth >= 4 && (delta.abs() <= 15.0 * tol || delta.abs() <= noise) {
        return Ok(left + right + delta / 15.0);
    }
    let l = recurse(
        f,
        Panel {
            a: p.a,
            b: m,
            fa: p.fa,
            fm: flm,
            fb: p.fm,
            whole: left,
        },
        0.5 * tol,
        depth + 1,
        unresolved,
    )?;
    let r = recurse(
        f,
        Panel {
            a: m,
            b: p.b,
            fa: p.fm,
            fm: frm,
            fb: p.fb,
            whole: right,
        },
        0.5 * tol,
        depth + 1,
        unresolved,
    )?;
    Ok(l + r)
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64, QuadratureError> {
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return integrate(f, b, a, tol).map(|v| -v);
    }
    let fa = eval(&f, a)?;
    let fb = eval(&f, b)?;
    let m = 0.5 * (a + b);
    let fm = eval(&f, m)?;
    let whole = simpson(a, b, fa, fm, fb);
    // Error estimates of leaves that hit the depth limit; only their sum is
    // held against the tolerance.
    let mut unresolved = 0.0;
    let value = recurse(
        &f,
        Panel {
            a,
            b,
            fa,
            fm,
            fb,
            whole,
        },
        tol,
        0,
        &mut unresolved,
    )?;
    if unresolved > tol {
        return Err(QuadratureError::ToleranceNotMet {
            lo: a,
            hi: b,
            tol,
            estimate: unresolved,
        });
    }
    Ok(value)
}

/// Integrates over consecutive panels `[p0, p1], [p1, p2], ...`; `points` is
/// sorted and deduplicated first. The tolerance is shared evenly.
pub fn integrate_panels<F: Fn(f64) -> f64>(f: F, points: &[f64], tol: f64) -> Result<f64, QuadratureError> {
    let mut pts: Vec<f64> = points.iter().copied().filter(|p| p.is_finite()).collect();
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
    if pts.len() < 2 {
        return Ok(0.0);
    }
    let per = tol / (pts.len() - 1) as f64;
    let mut acc = 0.0;
    for w in pts.windows(2) {
        acc += integrate(&f, w[0], w[1], per)?;
    }
    Ok(acc)
}

/// Splits `[a, b]` into `k` equal panels plus any interior `extra` points.
pub fn uniform_points(a: f64, b: f64, k: usize, extra: &[f64]) -> Vec<f64> {
    let k = k.max(1);
    let mut pts: Vec<f64> = (0..k).map(|i| a + (b - a) * i as f64 / k as f64).collect();
    pts.push(b);
    pts.extend(extra.iter().copied().filter(|&p| p > a && p < b));
    pts
}

/// Smallest `t >= start` (found by doubling the step) past which `|f|` stays
/// below `rel * peak`, where `peak` is the largest value seen on the way.
/// Assumes `f` eventually decays monotonically.
pub fn truncation_point<F: Fn(f64) -> f64>(f: F, start: f64, step: f64, rel: f64) -> f64 {
    let mut peak = f(start).abs();
    let mut t = start;
    let mut h = step.abs().max(1e-12);
    for _ in 0..200 {
        let next = t + h;
        let v = f(next).abs();
        peak = peak.max(v);
        t = next;
        if v <= rel * peak || peak == 0.0 && v == 0.0 {
            return t;
        }
        h *= 1.5;
    }
    t
}
