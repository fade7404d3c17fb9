//! The round loop: dual decision, primal decision, budget guard, feedback.
//!
//! Both drivers follow the same skeleton. Per round: read the multiplier pair,
//! get the primal decision, force the void action when the remaining budget is
//! below 1, realize the outcome, charge the budget, then update the primal
//! with the nonnegative Lagrangian loss and the dual with the realized gaps.
//! The dual and the primal both observe the realized (possibly forced-void)
//! outcome after depletion — the loop makes no exception once the guard fires.
//!
//! Budget accounting uses a single accumulator: the guard requires at least 1
//! unit before bidding and every cost is at most 1, so the remaining budget is
//! nonnegative after every round and total spend can never exceed `B`.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::dual::{dual_step, make_rates, make_rates_closed_form, DualState, RateSchedule};
use crate::env::{outcome_for_index, outcome_second_price, InputModel, Mechanism};
use crate::model::{primal_loss, BidGrid, RoundOutcome, RunConfig};
use crate::primal::{second_price_bid, Exp3SixBank, PrimalRm};
use crate::{split_seed, Error, Result};

/// Everything observable about one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRecord {
    /// 1-based round index.
    pub t: usize,
    pub valuation: f64,
    pub competing_bid: f64,
    /// Bid value actually played (0 for the void action).
    pub bid: f64,
    /// Grid index of the played bid; `None` for the continuous closed form.
    pub bid_index: Option<usize>,
    pub reward: f64,
    pub cost: f64,
    /// Budget gap `cost - rho` of the played action.
    pub budget_gap: f64,
    /// ROI gap `cost - reward` of the played action.
    pub roi_gap: f64,
    /// Multipliers used (not produced) this round.
    pub lambda: f64,
    pub mu: f64,
    /// Remaining budget after this round's cost.
    pub budget_remaining: f64,
    /// Whether the guard forced the void action this round.
    pub depleted: bool,
}

/// A completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<RoundRecord>,
    /// First round on which the guard forced the void action; `T + 1` if the
    /// budget never dropped below 1.
    pub tau: usize,
    /// Whether `eta <= 1 / max|loss|` held for the primal bandit (always true
    /// for the closed form).
    pub eta_bound_ok: bool,
}

impl Trace {
    pub fn horizon(&self) -> usize {
        self.records.len()
    }

    pub fn spend(&self) -> f64 {
        self.records.iter().map(|r| r.cost).sum()
    }

    pub fn total_reward(&self) -> f64 {
        self.records.iter().map(|r| r.reward).sum()
    }

    /// Realized cumulative ROI violation `sum (c - f)`.
    pub fn roi_violation(&self) -> f64 {
        self.records.iter().map(|r| r.roi_gap).sum()
    }

    pub fn mu_max(&self) -> f64 {
        self.records.iter().map(|r| r.mu).fold(0.0, f64::max)
    }

    pub fn final_budget(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.budget_remaining)
    }
}

struct LoopState {
    budget: f64,
    dual: DualState,
    tau: usize,
    records: Vec<RoundRecord>,
}

impl LoopState {
    fn new(config: &RunConfig, rates: &RateSchedule) -> Self {
        Self {
            budget: config.budget,
            dual: DualState::new(rates, config.rho()),
            tau: config.horizon + 1,
            records: Vec::with_capacity(config.horizon),
        }
    }

    fn record(
        &mut self,
        t: usize,
        v: f64,
        beta: f64,
        bid: f64,
        bid_index: Option<usize>,
        out: RoundOutcome,
        rho: f64,
        lambda: f64,
        mu: f64,
        depleted: bool,
    ) {
        self.budget -= out.cost;
        debug_assert!(self.budget >= 0.0, "budget accumulator went negative");
        if depleted && self.tau > t {
            self.tau = t;
        }
        self.records.push(RoundRecord {
            t,
            valuation: v,
            competing_bid: beta,
            bid,
            bid_index,
            reward: out.reward,
            cost: out.cost,
            budget_gap: out.budget_gap(rho),
            roi_gap: out.roi_gap(),
            lambda,
            mu,
            budget_remaining: self.budget,
            depleted,
        });
    }
}

/// Runs the generic primal-dual framework with the supplied primal regret
/// minimizer. Deterministic given `(model, config, seed)`.
pub fn run_framework<P: PrimalRm>(
    model: &InputModel,
    primal: &mut P,
    config: &RunConfig,
    seed: u64,
) -> Result<Trace> {
    model.check_horizon(config.horizon)?;
    let (n, m) = primal.dims();
    if n != model.valuations.len() || m != model.bids.len() {
        return Err(Error::DimensionMismatch(format!(
            "primal configured for {n} valuations x {m} bids, environment has {} x {}",
            model.valuations.len(),
            model.bids.len()
        )));
    }
    let rates = make_rates(config, m, n);
    let rho = config.rho();
    let mut env_rng = ChaCha12Rng::seed_from_u64(split_seed(seed, 0));
    let mut act_rng = ChaCha12Rng::seed_from_u64(split_seed(seed, 1));
    let mut state = LoopState::new(config, &rates);

    for t in 1..=config.horizon {
        let round = model.draw(t - 1, &mut env_rng);
        // Dual decision, then primal decision, per the loop contract.
        let (lambda, mu) = (state.dual.lambda, state.dual.mu);
        let row = primal.next_row(round.v_idx);
        let depleted = state.budget < 1.0;
        let x_idx = if depleted {
            BidGrid::VOID
        } else {
            Exp3SixBank::sample_bid(&row, &mut act_rng)
        };
        let out = outcome_for_index(model.mechanism, round.v, round.beta, &model.bids, x_idx, config.omega);

        let loss = primal_loss(out.reward, out.cost, lambda, mu, rho);
        let envelope = 1.0 + lambda * (2.0 - rho) + 2.0 * mu;
        assert!(
            (0.0..=envelope + 1e-9).contains(&loss),
            "primal loss {loss} left [0, {envelope}]"
        );
        primal.observe(round.v_idx, x_idx, loss, &row);
        state.dual = dual_step(&state.dual, out.budget_gap(rho), out.roi_gap());
        state.record(
            t,
            round.v,
            round.beta,
            model.bids.value(x_idx),
            Some(x_idx),
            out,
            rho,
            lambda,
            mu,
            depleted,
        );
    }

    let eta_bound_ok = primal.step_size_ok();
    if !eta_bound_ok {
        log::warn!("step-size condition eta <= 1/max|loss| failed on this run");
    }
    Ok(Trace { records: state.records, tau: state.tau, eta_bound_ok })
}

/// Runs the closed-form second-price bidder (no primal weight state).
pub fn run_second_price(model: &InputModel, config: &RunConfig, seed: u64) -> Result<Trace> {
    if model.mechanism != Mechanism::SecondPrice {
        return Err(Error::InvalidInput(
            "the closed-form bidder requires a second-price environment".into(),
        ));
    }
    model.check_horizon(config.horizon)?;
    let rates = make_rates_closed_form(config);
    let rho = config.rho();
    let mut env_rng = ChaCha12Rng::seed_from_u64(split_seed(seed, 0));
    let mut state = LoopState::new(config, &rates);

    for t in 1..=config.horizon {
        let round = model.draw(t - 1, &mut env_rng);
        let (lambda, mu) = (state.dual.lambda, state.dual.mu);
        let depleted = state.budget < 1.0;
        let (bid, out) = if depleted {
            (0.0, RoundOutcome::ZERO)
        } else {
            let bid = second_price_bid(round.v, &state.dual);
            (bid, outcome_second_price(round.v, round.beta, bid, config.omega))
        };
        state.dual = dual_step(&state.dual, out.budget_gap(rho), out.roi_gap());
        state.record(t, round.v, round.beta, bid, None, out, rho, lambda, mu, depleted);
    }

    Ok(Trace { records: state.records, tau: state.tau, eta_bound_ok: true })
}
