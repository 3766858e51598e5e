//! Shared numerical tolerances and thresholds.

/// Closed-form identities at a single point.
pub const CLOSED_FORM: f64 = 1e-12;

/// Minimum observed convergence order accepted over an `(h, h/2)` pair.
pub const MIN_ORDER: f64 = 1.9;

/// Slack on fitted decay exponents (one-sided).
pub const DECAY_SLACK: f64 = 0.15;

/// Floor below which samples are treated as non-positive in log fits.
pub const LOG_FLOOR: f64 = 1e-300;

/// Relative residual target for conjugate-gradient Poisson solves.
pub const CG_RTOL: f64 = 1e-10;

/// Largest admissible `dt/h`.
pub const CFL_LIMIT: f64 = 0.9;

/// Relative charge drift allowed over a long spherical run.
pub const CHARGE_DRIFT: f64 = 1e-6;

/// Observed order from errors at `h` and `h/2`.
pub fn order(e_h: f64, e_h2: f64) -> f64 {
    (e_h / e_h2).log2()
}
