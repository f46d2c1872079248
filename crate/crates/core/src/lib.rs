//! Random walks conditioned to stay non-negative: Monte Carlo estimators,
//! harmonic functions, asymptotic predictors and exact oracles.

pub mod asymptotics;
pub mod harmonic;
pub mod harness;
pub mod increments;
pub mod oracle;
pub mod quad;
pub mod rng;
pub mod special_fns;
pub mod target_fns;
pub mod walk_sim;

pub use increments::{cramer_tilt, IncrementLaw, LawError, MomentSummary, StepLaw, TiltedLaw};
