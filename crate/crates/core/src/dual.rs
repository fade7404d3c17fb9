//! Projected online gradient descent on the Lagrange multiplier pair.
//!
//! The budget multiplier `lambda` lives in `[0, 1/rho]` (the void action keeps
//! the budget constraint slack by `rho`, so that box is safe); the ROI
//! multiplier `mu` is only projected onto the nonnegative half-line, and its
//! boundedness emerges from the primal-dual interaction rather than from a
//! hard cap.

use crate::model::{azuma_term, RunConfig};

/// Learning rates and the sublinear terms they are built from.
///
/// `eta_b = 1/(rho * sqrt(T))` and
/// `eta_r = 1/(6 + sqrt(T) + e_db + 6*e_azuma + 16*e_p)`, with
/// `e_db = sqrt(T)/rho` and `e_dr = sqrt(T)` the deterministic OGD regret
/// bounds (`D^2/(2 eta) + eta G^2 T / 2` evaluated at these rates), `e_azuma`
/// the full-horizon concentration term, and `e_p` the primal interval-regret
/// scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSchedule {
    pub eta_b: f64,
    pub eta_r: f64,
    pub e_db: f64,
    pub e_dr: f64,
    pub e_p: f64,
    pub e_azuma: f64,
}

/// Rate schedule for the EXP3-SIX framework with `m` bids and `n` valuations.
///
/// The primal scale is the interval-regret coefficient of EXP3-SIX with unit
/// loss range, carrying the `sqrt(n)` factor for `n` independent per-valuation
/// instances: `e_p = (3/2 + 4 ln(m n T / delta) + ln T + 1) * sqrt(n m T)`.
pub fn make_rates(config: &RunConfig, m: usize, n: usize) -> RateSchedule {
    assert!(m >= 1 && n >= 1, "bid and valuation counts must be at least 1");
    let t = config.horizon as f64;
    let e_p = (1.5 + 4.0 * (m as f64 * n as f64 * t / config.delta).ln() + t.ln() + 1.0)
        * (n as f64 * m as f64 * t).sqrt();
    rates_with_primal_scale(config, e_p)
}

/// Rate schedule for the closed-form second-price bidder, whose primal regret
/// is identically zero, so the primal scale drops out of `eta_r`.
pub fn make_rates_closed_form(config: &RunConfig) -> RateSchedule {
    rates_with_primal_scale(config, 0.0)
}

fn rates_with_primal_scale(config: &RunConfig, e_p: f64) -> RateSchedule {
    let t = config.horizon as f64;
    let rho = config.rho();
    let e_db = t.sqrt() / rho;
    let e_dr = t.sqrt();
    let e_azuma = azuma_term(config.horizon, config.horizon, config.delta);
    let eta_b = 1.0 / (rho * t.sqrt());
    let eta_r = 1.0 / (6.0 + t.sqrt() + e_db + 6.0 * e_azuma + 16.0 * e_p);
    RateSchedule { eta_b, eta_r, e_db, e_dr, e_p, e_azuma }
}

/// Current multiplier pair plus the step sizes and the projection box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualState {
    pub lambda: f64,
    pub mu: f64,
    pub eta_b: f64,
    pub eta_r: f64,
    lambda_cap: f64,
}

impl DualState {
    /// Fresh state with `lambda = mu = 0` and the box `[0, 1/rho]` for lambda.
    pub fn new(rates: &RateSchedule, rho: f64) -> Self {
        assert!(rho > 0.0 && rho <= 1.0, "per-round budget {rho} outside (0, 1]");
        Self { lambda: 0.0, mu: 0.0, eta_b: rates.eta_b, eta_r: rates.eta_r, lambda_cap: 1.0 / rho }
    }

    /// State with explicit step sizes, for tests that pin the rates by hand.
    pub fn with_rates(eta_b: f64, eta_r: f64, rho: f64) -> Self {
        Self { lambda: 0.0, mu: 0.0, eta_b, eta_r, lambda_cap: 1.0 / rho }
    }

    pub fn lambda_cap(&self) -> f64 {
        self.lambda_cap
    }
}

/// One projected gradient step on the realized gaps `(g, h)`.
///
/// `lambda' = clamp(lambda + eta_b * g, 0, 1/rho)`,
/// `mu' = max(0, mu + eta_r * h)`.
pub fn dual_step(state: &DualState, g: f64, h: f64) -> DualState {
    debug_assert!(g >= -state_rho(state) - 1e-12 && g <= 1.0 - state_rho(state) + 1e-12,
        "budget gap {g} outside [-rho, 1-rho]");
    debug_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&h), "ROI gap {h} outside [-1, 1]");
    let lambda = (state.lambda + state.eta_b * g).clamp(0.0, state.lambda_cap);
    let mu = (state.mu + state.eta_r * h).max(0.0);
    DualState { lambda, mu, ..*state }
}

fn state_rho(state: &DualState) -> f64 {
    1.0 / state.lambda_cap
}
