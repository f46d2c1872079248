//! Exact ground truth at small scale: the killed walk of a finitely supported
//! law by dynamic programming, the Sparre-Andersen survival law, and the
//! duality identity by path enumeration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::increments::{FiniteSupport, IncrementLaw};
use crate::target_fns::TargetFunction;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("exact oracles need a finitely supported law, got {0}")]
    NotFinite(String),
    #[error("state explosion: {atoms} atoms exceed the budget of {budget}")]
    StateExplosion { atoms: usize, budget: usize },
    #[error("target {0} is not piecewise constant with compact support")]
    UnsupportedTarget(String),
    #[error("invalid oracle input: {0}")]
    InvalidInput(String),
}

/// Atom budget of the dynamic programme.
pub const ATOM_BUDGET: usize = 1_000_000;
/// Path budget of the duality enumeration.
pub const PATH_BUDGET: usize = 1 << 22;
/// Atoms closer than this are merged.
const MERGE_TOL: f64 = 1e-12;

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    fn value(&self) -> f64 {
        self.s + self.c
    }
}

/// Law of `x + S_n` on `{tau_x > n}`, with the killed mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointLaw {
    /// `(position, probability)`, sorted by position.
    pub atoms: Vec<(f64, f64)>,
    pub survived_mass: f64,
    pub died_mass: f64,
    /// `exit_masses[k - 1] = P(tau_x = k)`.
    pub exit_masses: Vec<f64>,
}

impl JointLaw {
    /// `P(x + S_n in [y, y + delta], tau_x > n)`.
    pub fn interval_prob(&self, y: f64, delta: f64) -> f64 {
        let mut s = Sum::default();
        for &(pos, p) in &self.atoms {
            if pos >= y - MERGE_TOL && pos <= y + delta + MERGE_TOL {
                s.add(p);
            }
        }
        s.value()
    }

    /// `P(tau_x = n)` for the horizon `n` of this law.
    pub fn exit_at_horizon(&self) -> f64 {
        self.exit_masses.last().copied().unwrap_or(0.0)
    }

    /// `E(x + S_n; tau_x > n)`.
    pub fn killed_moment(&self) -> f64 {
        let mut s = Sum::default();
        for &(pos, p) in &self.atoms {
            s.add(pos * p);
        }
        s.value()
    }

    /// `E(g(x + S_n); tau_x > n)`.
    pub fn expect<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        let mut s = Sum::default();
        for &(pos, p) in &self.atoms {
            s.add(g(pos) * p);
        }
        s.value()
    }
}

fn finite(law: &IncrementLaw) -> Result<&FiniteSupport, OracleError> {
    law.as_finite().ok_or_else(|| OracleError::NotFinite(law.to_string()))
}

/// Exact law of the killed walk after `n` steps. A position of exactly zero
/// survives.
pub fn exact_joint_law(law: &IncrementLaw, x: f64, n: u32) -> Result<JointLaw, OracleError> {
    let f = finite(law)?;
    if !(x >= 0.0 && x.is_finite()) {
        return Err(OracleError::InvalidInput(format!("x must be >= 0, got {x}")));
    }
    let mut atoms: Vec<(f64, f64)> = vec![(x, 1.0)];
    let mut died = Sum::default();
    let mut exit_masses = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let mut next: Vec<(f64, f64)> = Vec::with_capacity(atoms.len() * f.points().len());
        let mut dead_now = Sum::default();
        for &(pos, p) in &atoms {
            for (&d, &q) in f.points().iter().zip(f.probs()) {
                let np = pos + d;
                if np < 0.0 {
                    dead_now.add(p * q);
                } else {
                    next.push((np, p * q));
                }
            }
        }
        next.sort_by(|a, b| a.0.total_cmp(&b.0));
        atoms = merge_atoms(next);
        if atoms.len() > ATOM_BUDGET {
            return Err(OracleError::StateExplosion {
                atoms: atoms.len(),
                budget: ATOM_BUDGET,
            });
        }
        exit_masses.push(dead_now.value());
        died.add(dead_now.value());
    }
    let mut surv = Sum::default();
    for &(_, p) in &atoms {
        surv.add(p);
    }
    Ok(JointLaw {
        atoms,
        survived_mass: surv.value(),
        died_mass: died.value(),
        exit_masses,
    })
}

fn merge_atoms(sorted: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, Sum)> = Vec::with_capacity(sorted.len());
    for (pos, p) in sorted {
        match out.last_mut() {
            Some((q, acc)) if (pos - *q).abs() <= MERGE_TOL * q.abs().max(1.0) => acc.add(p),
            _ => {
                let mut s = Sum::default();
                s.add(p);
                out.push((pos, s));
            }
        }
    }
    out.into_iter().map(|(x, s)| (x, s.value())).collect()
}

/// `E(x + S_n; tau_x > n)`.
pub fn exact_killed_moment(law: &IncrementLaw, x: f64, n: u32) -> Result<f64, OracleError> {
    Ok(exact_joint_law(law, x, n)?.killed_moment())
}

/// `P(tau_0 > n) = C(2n, n) 4^{-n}` for symmetric continuous increments.
pub fn sparre_andersen_survival(n: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    if n <= 30 {
        // C(60, 30) < 2^63, so the binomial is exact in integer arithmetic.
        let mut c: u128 = 1;
        for k in 1..=n as u128 {
            c = c * (n as u128 + k) / k;
        }
        return c as f64 / 4f64.powi(n as i32);
    }
    let nf = n as f64;
    (libm::lgamma(2.0 * nf + 1.0) - 2.0 * libm::lgamma(nf + 1.0) - 2.0 * nf * std::f64::consts::LN_2).exp()
}

/// `P(tau_0 = n) = P(tau_0 > n - 1) - P(tau_0 > n) = P(tau_0 > n - 1) / (2n)`.
pub fn sparre_andersen_exit_at(n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    sparre_andersen_survival(n - 1) / (2.0 * n as f64)
}

/// `P(tau_0 > n)` for `n = 0..=p_nonneg.len()` from `p_nonneg[k-1] = P(S_k >= 0)`,
/// by expanding `sum_n s^n P(tau_0 > n) = exp(sum_k s^k P(S_k >= 0) / k)`.
pub fn spitzer_baxter_survival(p_nonneg: &[f64]) -> Vec<f64> {
    let m = p_nonneg.len();
    let mut b = vec![0.0; m + 1];
    b[0] = 1.0;
    for n in 1..=m {
        let mut acc = Sum::default();
        for k in 1..=n {
            // k * a_k with a_k = P(S_k >= 0) / k
            acc.add(p_nonneg[k - 1] * b[n - k]);
        }
        b[n] = acc.value() / n as f64;
    }
    b
}

/// `P(tau_0 > n)`, `n = 0..=n_max`, for Gaussian increments with any mean.
pub fn gaussian_survival(mu: f64, sigma: f64, n_max: usize) -> Vec<f64> {
    let p: Vec<f64> = (1..=n_max)
        .map(|k| {
            let k = k as f64;
            crate::special_fns::normal_cdf(mu * k.sqrt() / sigma)
        })
        .collect();
    spitzer_baxter_survival(&p)
}

/// Piecewise constant description of a compactly supported target:
/// sorted breakpoints and an evaluator.
fn check_target(t: &TargetFunction) -> Result<Vec<f64>, OracleError> {
    let hi = t.support_hi();
    let ok = match t {
        TargetFunction::Exponential { .. } => false,
        TargetFunction::Shifted { inner, .. } => !matches!(**inner, TargetFunction::Exponential { .. }),
        _ => true,
    };
    if !ok || !hi.is_finite() {
        return Err(OracleError::UnsupportedTarget(t.to_string()));
    }
    Ok(t.breakpoints())
}

/// `int_{c}^{inf} a(u) b(u + s) du` for piecewise constant `a`, `b` with
/// breakpoints `ba`, `bb`.
fn product_integral(a: &TargetFunction, ba: &[f64], b: &TargetFunction, bb: &[f64], s: f64, c: f64) -> f64 {
    let mut pts: Vec<f64> = ba.iter().copied().chain(bb.iter().map(|&v| v - s)).filter(|&p| p > c).collect();
    pts.push(c);
    pts.sort_by(|x, y| x.total_cmp(y));
    pts.dedup();
    let mut acc = Sum::default();
    for w in pts.windows(2) {
        let m = 0.5 * (w[0] + w[1]);
        let v = a.eval(m) * b.eval(m + s);
        if v != 0.0 {
            acc.add(v * (w[1] - w[0]));
        }
    }
    acc.value()
}

/// Enumerates all `n`-step paths of `f`, calling `visit(prob, running_min,
/// running_max, s_n)` with extrema over steps `1..=n`.
fn enumerate_paths<V: FnMut(f64, f64, f64, f64)>(f: &FiniteSupport, n: u32, visit: &mut V) -> Result<(), OracleError> {
    let count = (f.points().len() as f64).powi(n as i32);
    if count > PATH_BUDGET as f64 {
        return Err(OracleError::StateExplosion {
            atoms: count as usize,
            budget: PATH_BUDGET,
        });
    }
    fn rec<V: FnMut(f64, f64, f64, f64)>(f: &FiniteSupport, left: u32, p: f64, lo: f64, hi: f64, s: f64, visit: &mut V) {
        if left == 0 {
            visit(p, lo, hi, s);
            return;
        }
        for (&d, &q) in f.points().iter().zip(f.probs()) {
            let ns = s + d;
            rec(f, left - 1, p * q, lo.min(ns), hi.max(ns), ns, visit);
        }
    }
    rec(f, n, 1.0, f64::INFINITY, f64::NEG_INFINITY, 0.0, visit);
    Ok(())
}

/// Both sides of the duality identity
/// `int h(x) E g(x + S_n) 1{tau_x > n} dx = int g(y) E h(y + S*_n) 1{tau*_y > n} dy`,
/// each computed from its own path enumeration.
pub fn verify_duality(law: &IncrementLaw, h: &TargetFunction, g: &TargetFunction, n: u32) -> Result<(f64, f64), OracleError> {
    let f = finite(law)?;
    if n == 0 {
        return Err(OracleError::InvalidInput("n must be >= 1".into()));
    }
    let bh = check_target(h)?;
    let bg = check_target(g)?;

    // Walk: x + s_k >= 0 for all k iff x >= -min_k s_k.
    let mut lhs = Sum::default();
    enumerate_paths(f, n, &mut |p, lo, _, s| {
        let c = (-lo).max(0.0);
        lhs.add(p * product_integral(h, &bh, g, &bg, s, c));
    })?;

    // Dual walk: steps are -X, so its running minimum is -max_k s_k.
    let neg_points: Vec<f64> = f.points().iter().map(|x| -x).collect();
    let dual = FiniteSupport::new(&neg_points, f.probs()).map_err(|e| OracleError::InvalidInput(e.to_string()))?;
    let mut rhs = Sum::default();
    enumerate_paths(&dual, n, &mut |p, lo, _, s| {
        let c = (-lo).max(0.0);
        rhs.add(p * product_integral(g, &bg, h, &bh, s, c));
    })?;
    Ok((lhs.value(), rhs.value()))
}
