//! Input models: what the bidder faces each round.
//!
//! A model produces a `(valuation, highest competing bid)` pair per round —
//! either sampled i.i.d. from an explicit finite probability table or read
//! from an adversarial script — and maps bids to realized `(reward, cost)`
//! through the auction mechanism. Ties (`x = beta`) win in both mechanisms.
//!
//! The void action is the grid index 0. It yields `(0, 0)` unconditionally,
//! even against a competing bid of zero, so the value-level outcome functions
//! are applied only to real bids.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::model::{BidGrid, RoundOutcome, ValuationGrid};
use crate::{Error, Result};

/// Auction payment rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    FirstPrice,
    SecondPrice,
}

impl std::fmt::Display for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mechanism::FirstPrice => write!(f, "first-price"),
            Mechanism::SecondPrice => write!(f, "second-price"),
        }
    }
}

/// First-price outcome for a real bid: win iff `x >= beta`, pay the bid.
/// Reward of a win is `v - omega * x`.
pub fn outcome_first_price(v: f64, beta: f64, x: f64, omega: f64) -> RoundOutcome {
    debug_assert!((0.0..=1.0).contains(&v) && (0.0..=1.0).contains(&beta));
    debug_assert!((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&omega));
    if x >= beta {
        RoundOutcome { reward: v - omega * x, cost: x }
    } else {
        RoundOutcome::ZERO
    }
}

/// Second-price outcome for a real bid: win iff `x >= beta`, pay the
/// competing bid. Reward of a win is `v - omega * beta`.
pub fn outcome_second_price(v: f64, beta: f64, x: f64, omega: f64) -> RoundOutcome {
    debug_assert!((0.0..=1.0).contains(&v) && (0.0..=1.0).contains(&beta));
    debug_assert!((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&omega));
    if x >= beta {
        RoundOutcome { reward: v - omega * beta, cost: beta }
    } else {
        RoundOutcome::ZERO
    }
}

/// Value-level outcome under either mechanism.
pub fn outcome(mechanism: Mechanism, v: f64, beta: f64, x: f64, omega: f64) -> RoundOutcome {
    match mechanism {
        Mechanism::FirstPrice => outcome_first_price(v, beta, x, omega),
        Mechanism::SecondPrice => outcome_second_price(v, beta, x, omega),
    }
}

/// Grid-level outcome: index 0 is the void action and yields `(0, 0)` no
/// matter what; other indices resolve through the mechanism.
pub fn outcome_for_index(
    mechanism: Mechanism,
    v: f64,
    beta: f64,
    bids: &BidGrid,
    x_idx: usize,
    omega: f64,
) -> RoundOutcome {
    if x_idx == BidGrid::VOID {
        RoundOutcome::ZERO
    } else {
        outcome(mechanism, v, beta, bids.value(x_idx), omega)
    }
}

/// Expected `(reward, cost)` of a policy row against a fixed round.
pub fn expected_outcome(
    mechanism: Mechanism,
    v: f64,
    beta: f64,
    bids: &BidGrid,
    row: &[f64],
    omega: f64,
) -> RoundOutcome {
    debug_assert_eq!(row.len(), bids.len());
    let mut reward = 0.0;
    let mut cost = 0.0;
    for (x_idx, &p) in row.iter().enumerate() {
        if p > 0.0 {
            let o = outcome_for_index(mechanism, v, beta, bids, x_idx, omega);
            reward += p * o.reward;
            cost += p * o.cost;
        }
    }
    RoundOutcome { reward, cost }
}

/// One atom of a finite joint distribution over `(valuation, competing bid)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub v_idx: usize,
    pub v: f64,
    pub beta: f64,
    pub p: f64,
}

/// Explicit finite probability table over `(v, beta)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbTable {
    atoms: Vec<Atom>,
}

impl ProbTable {
    /// Builds a table from `(v, beta, p)` triples; valuations must be grid
    /// members and masses must sum to 1 within 1e-12.
    pub fn new(entries: &[(f64, f64, f64)], valuations: &ValuationGrid) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("probability table must be nonempty".into()));
        }
        let mut atoms = Vec::with_capacity(entries.len());
        let mut total = 0.0;
        for &(v, beta, p) in entries {
            if !(0.0..=1.0).contains(&beta) || !beta.is_finite() {
                return Err(Error::InvalidInput(format!("competing bid {beta} outside [0, 1]")));
            }
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidInput(format!("atom mass {p} is negative")));
            }
            let v_idx = valuations.index_of(v)?;
            total += p;
            atoms.push(Atom { v_idx, v, beta, p });
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "probability table sums to {total}, expected 1 within 1e-12"
            )));
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Atom {
        let r: f64 = rng.random();
        let mut acc = 0.0;
        for atom in &self.atoms {
            acc += atom.p;
            if r < acc {
                return *atom;
            }
        }
        *self.atoms.last().expect("table is nonempty")
    }
}

/// A scripted round: the pair the adversary committed to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptRound {
    pub v_idx: usize,
    pub v: f64,
    pub beta: f64,
}

/// Oblivious adversarial script: an explicit length-T list of rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Script {
    rounds: Vec<ScriptRound>,
}

impl Script {
    pub fn new(pairs: &[(f64, f64)], valuations: &ValuationGrid) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidInput("script must be nonempty".into()));
        }
        let mut rounds = Vec::with_capacity(pairs.len());
        for &(v, beta) in pairs {
            if !(0.0..=1.0).contains(&beta) || !beta.is_finite() {
                return Err(Error::InvalidInput(format!("competing bid {beta} outside [0, 1]")));
            }
            let v_idx = valuations.index_of(v)?;
            rounds.push(ScriptRound { v_idx, v, beta });
        }
        Ok(Self { rounds })
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn rounds(&self) -> &[ScriptRound] {
        &self.rounds
    }
}

/// How rounds are generated.
#[derive(Debug, Clone, PartialEq)]
pub enum InputKind {
    Stochastic(ProbTable),
    Scripted(Script),
}

/// A complete environment: mechanism, grids, and the round generator.
#[derive(Debug, Clone, PartialEq)]
pub struct InputModel {
    pub mechanism: Mechanism,
    pub valuations: ValuationGrid,
    pub bids: BidGrid,
    pub kind: InputKind,
}

impl InputModel {
    pub fn stochastic(
        mechanism: Mechanism,
        valuations: ValuationGrid,
        bids: BidGrid,
        entries: &[(f64, f64, f64)],
    ) -> Result<Self> {
        let table = ProbTable::new(entries, &valuations)?;
        Ok(Self { mechanism, valuations, bids, kind: InputKind::Stochastic(table) })
    }

    pub fn scripted(
        mechanism: Mechanism,
        valuations: ValuationGrid,
        bids: BidGrid,
        pairs: &[(f64, f64)],
    ) -> Result<Self> {
        let script = Script::new(pairs, &valuations)?;
        Ok(Self { mechanism, valuations, bids, kind: InputKind::Scripted(script) })
    }

    /// Checks the model can drive a run of `horizon` rounds.
    pub fn check_horizon(&self, horizon: usize) -> Result<()> {
        if let InputKind::Scripted(script) = &self.kind {
            if script.len() != horizon {
                return Err(Error::DimensionMismatch(format!(
                    "script has {} rounds but the run horizon is {horizon}",
                    script.len()
                )));
            }
        }
        Ok(())
    }

    /// The round-`t` pair (0-based `t`); stochastic models draw from `rng`.
    pub fn draw(&self, t: usize, rng: &mut ChaCha12Rng) -> ScriptRound {
        match &self.kind {
            InputKind::Stochastic(table) => {
                let atom = table.sample(rng);
                ScriptRound { v_idx: atom.v_idx, v: atom.v, beta: atom.beta }
            }
            InputKind::Scripted(script) => script.rounds()[t],
        }
    }

    pub fn script(&self) -> Option<&Script> {
        match &self.kind {
            InputKind::Scripted(s) => Some(s),
            InputKind::Stochastic(_) => None,
        }
    }

    pub fn table(&self) -> Option<&ProbTable> {
        match &self.kind {
            InputKind::Stochastic(t) => Some(t),
            InputKind::Scripted(_) => None,
        }
    }
}

/// Certificate accompanying a k-interval-safe script: the designated safe bid
/// and the per-block constraint margins re-verified by direct summation.
#[derive(Debug, Clone, PartialEq)]
pub struct KSafeCertificate {
    pub safe_bid_index: usize,
    pub block_len: usize,
    pub alpha_target: f64,
    /// Sum of `g_t(safe bid)` over each block; all at most `-alpha_target * k`.
    pub per_block_g: Vec<f64>,
    /// Sum of `h_t(safe bid)` over each block; all at most `-alpha_target * k`.
    pub per_block_h: Vec<f64>,
    /// Certified per-round margin: `min_blocks min(-sum g, -sum h) / k`.
    pub alpha_block: f64,
}

/// A generated k-safe scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct KSafeScript {
    pub model: InputModel,
    pub certificate: KSafeCertificate,
}

/// Generates a first-price script where a designated safe bid meets the
/// aggregate feasibility margin `alpha_target` on every window of `k` rounds
/// while failing per-round feasibility inside each block (the bidder is priced
/// out on roughly half the rounds).
///
/// The block pattern is periodic with period `k` — a single seed-chosen
/// permutation of priced-out and cheap-win rounds shared by all blocks — so
/// every length-`k` window contains exactly one block's multiset of rounds.
/// Infeasible `(k, alpha_target)` combinations are reported, not adjusted.
pub fn gen_k_safe_script(
    horizon: usize,
    k: usize,
    alpha_target: f64,
    rho: f64,
    omega: f64,
    seed: u64,
) -> Result<KSafeScript> {
    if k == 0 || k > horizon {
        return Err(Error::Infeasible(format!("k must satisfy 1 <= k <= T, got k={k}, T={horizon}")));
    }
    if horizon % k != 0 {
        return Err(Error::Infeasible(format!(
            "horizon {horizon} must be a multiple of k={k} so block margins cover every window"
        )));
    }
    if !(alpha_target > 0.0) {
        return Err(Error::Infeasible(format!("alpha_target must be positive, got {alpha_target}")));
    }
    if alpha_target >= rho {
        return Err(Error::Infeasible(format!(
            "alpha_target {alpha_target} >= rho {rho}: the budget gap g >= -rho pointwise caps the margin"
        )));
    }

    let v_hat = 0.9;
    let beta_out = 0.95;
    let wins = k.div_ceil(2);
    let priced_out = k - wins;

    // Safe-bid value: stay at half of what the two margins allow, capped so it
    // sits strictly below the next grid bid.
    let cap_budget = k as f64 * (rho - alpha_target) / wins as f64;
    let cap_roi = (v_hat - alpha_target * k as f64 / wins as f64) / (1.0 + omega);
    let x_safe = 0.5 * cap_budget.min(cap_roi).min(0.4);
    if x_safe < 0.01 {
        return Err(Error::Infeasible(format!(
            "no safe bid fits (k={k}, alpha_target={alpha_target}, rho={rho}, omega={omega})"
        )));
    }

    let bids = BidGrid::new(vec![0.0, x_safe, 0.45, 0.8])?;
    let valuations = ValuationGrid::new(vec![v_hat])?;

    // Single within-block permutation shared by all blocks.
    let mut pattern: Vec<bool> = Vec::with_capacity(k);
    pattern.extend(std::iter::repeat(true).take(priced_out)); // true = priced out
    pattern.extend(std::iter::repeat(false).take(wins));
    let mut rng = <ChaCha12Rng as rand::SeedableRng>::seed_from_u64(crate::split_seed(seed, 7));
    pattern.shuffle(&mut rng);

    let mut pairs = Vec::with_capacity(horizon);
    for _ in 0..horizon / k {
        for &out in &pattern {
            let beta = if out { beta_out } else { x_safe };
            pairs.push((v_hat, beta));
        }
    }
    let model = InputModel::scripted(Mechanism::FirstPrice, valuations, bids, &pairs)?;

    // Verify the certificate by direct summation over the generated rounds.
    let safe_bid_index = 1;
    let script = model.script().expect("just built scripted");
    let mut per_block_g = Vec::with_capacity(horizon / k);
    let mut per_block_h = Vec::with_capacity(horizon / k);
    for block in script.rounds().chunks(k) {
        let mut sum_g = 0.0;
        let mut sum_h = 0.0;
        for round in block {
            let out = outcome_for_index(
                model.mechanism,
                round.v,
                round.beta,
                &model.bids,
                safe_bid_index,
                omega,
            );
            sum_g += out.budget_gap(rho);
            sum_h += out.roi_gap();
        }
        per_block_g.push(sum_g);
        per_block_h.push(sum_h);
    }
    let alpha_block = per_block_g
        .iter()
        .chain(per_block_h.iter())
        .map(|&s| -s / k as f64)
        .fold(f64::INFINITY, f64::min);
    if alpha_block + 1e-12 < alpha_target {
        return Err(Error::Infeasible(format!(
            "generated script only certifies margin {alpha_block} < target {alpha_target}"
        )));
    }

    Ok(KSafeScript {
        model,
        certificate: KSafeCertificate {
            safe_bid_index,
            block_len: k,
            alpha_target,
            per_block_g,
            per_block_h,
            alpha_block,
        },
    })
}

/// Benign-then-hostile competing bids at a single valuation (first price).
pub fn gen_phase_shift(
    horizon: usize,
    bids: BidGrid,
    v: f64,
    benign_beta: f64,
    hostile_beta: f64,
    switch_at: usize,
) -> Result<InputModel> {
    if switch_at > horizon {
        return Err(Error::InvalidInput(format!(
            "switch round {switch_at} beyond horizon {horizon}"
        )));
    }
    let valuations = ValuationGrid::new(vec![v])?;
    let pairs: Vec<(f64, f64)> = (0..horizon)
        .map(|t| (v, if t < switch_at { benign_beta } else { hostile_beta }))
        .collect();
    InputModel::scripted(Mechanism::FirstPrice, valuations, bids, &pairs)
}

/// Periodic price-out bursts: the first `burst_len` rounds of every `period`
/// rounds carry a competing bid above the whole grid.
pub fn gen_price_out_burst(
    horizon: usize,
    bids: BidGrid,
    v: f64,
    base_beta: f64,
    burst_beta: f64,
    period: usize,
    burst_len: usize,
) -> Result<InputModel> {
    if period == 0 || burst_len > period {
        return Err(Error::InvalidInput(format!(
            "burst length {burst_len} must fit inside the period {period}"
        )));
    }
    let max_bid = *bids.values().last().expect("grid nonempty");
    if burst_beta <= max_bid {
        return Err(Error::InvalidInput(format!(
            "burst competing bid {burst_beta} does not price out the top grid bid {max_bid}"
        )));
    }
    let valuations = ValuationGrid::new(vec![v])?;
    let pairs: Vec<(f64, f64)> = (0..horizon)
        .map(|t| (v, if t % period < burst_len { burst_beta } else { base_beta }))
        .collect();
    InputModel::scripted(Mechanism::FirstPrice, valuations, bids, &pairs)
}
