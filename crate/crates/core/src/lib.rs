//! roibandit — a primal-dual simulator for repeated auction bidding under a
//! hard budget constraint and a soft return-on-investment (ROI) constraint.
//!
//! The library implements a best-of-both-worlds primal-dual loop: a primal
//! regret minimizer picks bids, an online-gradient-descent dual prices the
//! budget and ROI constraints, and a hard guard keeps total spend at or below
//! the budget on every run. Two primal strategies are provided: EXP3-SIX with
//! implicit exploration and fixed share (one independent instance per
//! valuation, for first-price or any finite-bid mechanism) and the closed-form
//! multiplier-scaled bid for second-price auctions.
//!
//! Module map:
//! - [`model`] — domain types and the per-round primal/dual losses;
//! - [`dual`] — the projected OGD dual and its learning-rate schedule;
//! - [`primal`] — EXP3-SIX banks and the second-price closed form;
//! - [`env`] — input models (stochastic tables, adversarial scripts) and
//!   scenario generators, including k-interval safe scripts;
//! - [`engine`] — the round loop, budget guard and trace recording;
//! - [`baselines`] — offline LP baselines and feasibility margins;
//! - [`analysis`] — post-hoc metrics and bound audits;
//! - [`cli`] — configuration ingestion, experiment execution and file output.

pub mod analysis;
pub mod baselines;
pub mod cli;
pub mod dual;
pub mod engine;
pub mod env;
pub mod model;
pub mod primal;
pub(crate) mod simplex;

pub use analysis::{summarize, RunSummary};
pub use baselines::{
    compute_alpha_adversarial, compute_alpha_stochastic, empirical_distribution, solve_lp,
    AlphaSolution, LpSolution, LpStatus,
};
pub use dual::{dual_step, make_rates, make_rates_closed_form, DualState, RateSchedule};
pub use engine::{run_framework, run_second_price, RoundRecord, Trace};
pub use env::{
    gen_k_safe_script, outcome_first_price, outcome_second_price, InputKind, InputModel, Mechanism,
    ProbTable, Script,
};
pub use model::{
    azuma_term, dual_utility, primal_loss, BidGrid, Policy, RoundOutcome, RunConfig, ValuationGrid,
};
pub use primal::{second_price_bid, Exp3SixBank, PrimalRm};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid input model: {0}")]
    InvalidInput(String),
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
    #[error("linear program: {0}")]
    Lp(String),
    #[error("audit guard: {0}")]
    AuditGuard(String),
    #[error("config hash mismatch: trace hash {trace} does not match config hash {config}")]
    HashMismatch { trace: String, config: String },
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    ConfigParse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Derives an independent 64-bit seed for a named sub-stream of a run seed.
///
/// Environment sampling and action sampling use distinct lanes so that
/// changing the algorithm never perturbs the environment draw.
pub(crate) fn split_seed(seed: u64, lane: u64) -> u64 {
    let mut z = seed ^ lane.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
