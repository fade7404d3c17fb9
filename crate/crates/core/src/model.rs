//! Domain types and the per-round loss functions.
//!
//! Rewards are normalized at environment ingestion so the internal ROI target
//! is always 1: a target `r > 1` divides every reward by `r`. All quantities
//! here are plain `f64` pairs `(f, c)` in `[0, 1]` together with the derived
//! constraint gaps `g = c - rho` (budget) and `h = c - f` (ROI).

use crate::{Error, Result};

/// Ordered grid of feasible bids. Index 0 is the void action: the zero bid
/// that never wins and never pays, regardless of the competing bid.
#[derive(Debug, Clone, PartialEq)]
pub struct BidGrid {
    bids: Vec<f64>,
}

impl BidGrid {
    /// Grid index of the void action.
    pub const VOID: usize = 0;

    /// Builds a grid from strictly increasing values in `[0, 1]` starting at 0.
    pub fn new(bids: Vec<f64>) -> Result<Self> {
        if bids.is_empty() {
            return Err(Error::InvalidGrid("bid grid must be nonempty".into()));
        }
        if bids[0] != 0.0 {
            return Err(Error::InvalidGrid(format!(
                "bid grid must start with the void bid 0.0, got {}",
                bids[0]
            )));
        }
        validate_grid_values("bid", &bids)?;
        Ok(Self { bids })
    }

    pub fn len(&self) -> usize {
        self.bids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bids.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.bids
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.bids[idx]
    }
}

/// Ordered grid of possible valuations.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuationGrid {
    valuations: Vec<f64>,
}

impl ValuationGrid {
    /// Builds a grid from strictly increasing values in `[0, 1]`.
    pub fn new(valuations: Vec<f64>) -> Result<Self> {
        if valuations.is_empty() {
            return Err(Error::InvalidGrid("valuation grid must be nonempty".into()));
        }
        validate_grid_values("valuation", &valuations)?;
        Ok(Self { valuations })
    }

    pub fn len(&self) -> usize {
        self.valuations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valuations.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.valuations
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.valuations[idx]
    }

    /// Index of an exact grid member, or an error naming the stray value.
    pub fn index_of(&self, v: f64) -> Result<usize> {
        self.valuations
            .iter()
            .position(|&x| x == v)
            .ok_or_else(|| Error::InvalidInput(format!("valuation {v} is not on the grid")))
    }
}

fn validate_grid_values(what: &str, values: &[f64]) -> Result<()> {
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidGrid(format!(
                "{what} grid value {v} at index {i} is outside [0, 1]"
            )));
        }
        if i > 0 && values[i - 1] >= v {
            return Err(Error::InvalidGrid(format!(
                "{what} grid must be strictly increasing (violated at index {i})"
            )));
        }
    }
    Ok(())
}

/// Run parameters shared by every algorithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    /// Number of rounds `T`.
    pub horizon: usize,
    /// Total budget `B`; the hard constraint is total spend `<= B`.
    pub budget: f64,
    /// Confidence parameter in `(0, 1]` used by the learning-rate schedule.
    pub delta: f64,
    /// ROI target; rewards are divided by this at ingestion, so internally the
    /// target is always 1.
    pub roi_target: f64,
    /// Capital-cost weight in `[0, 1]` inside the reward of a win.
    pub omega: f64,
}

impl RunConfig {
    pub fn new(horizon: usize, budget: f64, delta: f64, roi_target: f64, omega: f64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        if !budget.is_finite() || budget < 1.0 {
            return Err(Error::InvalidConfig(format!("budget must be >= 1, got {budget}")));
        }
        if budget > horizon as f64 {
            return Err(Error::InvalidConfig(format!(
                "budget {budget} exceeds horizon {horizon}; the per-round budget must stay in (0, 1]"
            )));
        }
        if !delta.is_finite() || delta <= 0.0 || delta > 1.0 {
            return Err(Error::InvalidConfig(format!("delta must be in (0, 1], got {delta}")));
        }
        if !roi_target.is_finite() || roi_target <= 0.0 {
            return Err(Error::InvalidConfig(format!("roi_target must be > 0, got {roi_target}")));
        }
        if !omega.is_finite() || !(0.0..=1.0).contains(&omega) {
            return Err(Error::InvalidConfig(format!("omega must be in [0, 1], got {omega}")));
        }
        Ok(Self { horizon, budget, delta, roi_target, omega })
    }

    /// Per-round budget `rho = B / T`.
    pub fn rho(&self) -> f64 {
        self.budget / self.horizon as f64
    }
}

/// One round's realized reward and cost.
///
/// The constraint gaps are derived on demand and never stored separately from
/// the pair, so they cannot drift out of sync.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundOutcome {
    pub reward: f64,
    pub cost: f64,
}

impl RoundOutcome {
    pub const ZERO: RoundOutcome = RoundOutcome { reward: 0.0, cost: 0.0 };

    /// Budget gap `g = c - rho`, in `[-rho, 1 - rho]`.
    pub fn budget_gap(&self, rho: f64) -> f64 {
        self.cost - rho
    }

    /// ROI gap `h = c - f`, in `[-1, 1]`.
    pub fn roi_gap(&self) -> f64 {
        self.cost - self.reward
    }
}

/// A randomized bidding policy: one distribution over the bid grid per
/// valuation. Rows always sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    rows: Vec<Vec<f64>>,
}

impl Policy {
    /// Validates row shapes and normalization (tolerance 1e-12), then
    /// renormalizes each row so the stored sums are exact.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("policy must have at least one row".into()));
        }
        let m = rows[0].len();
        if m == 0 {
            return Err(Error::InvalidInput("policy rows must be nonempty".into()));
        }
        let mut out = Vec::with_capacity(rows.len());
        for (v, row) in rows.into_iter().enumerate() {
            if row.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "policy row {v} has {} entries, expected {m}",
                    row.len()
                )));
            }
            let mut sum = 0.0;
            for (x, &p) in row.iter().enumerate() {
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "policy row {v} entry {x} is {p}; probabilities must be nonnegative"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "policy row {v} sums to {sum}, expected 1 within 1e-12"
                )));
            }
            out.push(row.iter().map(|&p| p / sum).collect());
        }
        Ok(Self { rows: out })
    }

    /// Uniform policy over `m` bids for each of `n` valuations.
    pub fn uniform(n: usize, m: usize) -> Self {
        Self { rows: vec![vec![1.0 / m as f64; m]; n] }
    }

    /// Deterministic policy playing `bid_index` for every valuation.
    pub fn deterministic(n: usize, m: usize, bid_index: usize) -> Self {
        let mut row = vec![0.0; m];
        row[bid_index] = 1.0;
        Self { rows: vec![row; n] }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn m(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, v_idx: usize) -> &[f64] {
        &self.rows[v_idx]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Convex combination `(1 - w) * self + w * other`, rowwise.
    pub fn mix(&self, other: &Policy, w: f64) -> Result<Policy> {
        if self.n() != other.n() || self.m() != other.m() {
            return Err(Error::DimensionMismatch("mixing policies of different shapes".into()));
        }
        let rows = self
            .rows
            .iter()
            .zip(other.rows.iter())
            .map(|(a, b)| a.iter().zip(b.iter()).map(|(&x, &y)| (1.0 - w) * x + w * y).collect())
            .collect();
        Policy::new(rows)
    }
}

/// Primal loss fed to the bandit: the Lagrangian relaxation of the round plus
/// the additive constant `1 + lambda + mu` that keeps it nonnegative.
///
/// Panics when the inputs leave their documented domains: `f, c` in `[0, 1]`,
/// multipliers nonnegative, `rho` in `(0, 1]`.
pub fn primal_loss(f: f64, c: f64, lambda: f64, mu: f64, rho: f64) -> f64 {
    assert!((0.0..=1.0).contains(&f), "reward {f} outside [0, 1]");
    assert!((0.0..=1.0).contains(&c), "cost {c} outside [0, 1]");
    assert!(lambda >= 0.0, "negative budget multiplier {lambda}");
    assert!(mu >= 0.0, "negative ROI multiplier {mu}");
    assert!(rho > 0.0 && rho <= 1.0, "per-round budget {rho} outside (0, 1]");
    -f + lambda * (c - rho) + mu * (c - f) + 1.0 + lambda + mu
}

/// Linear dual utility `lambda * g + mu * h` observed by the dual player.
///
/// Panics on negative multipliers.
pub fn dual_utility(g: f64, h: f64, lambda: f64, mu: f64) -> f64 {
    assert!(lambda >= 0.0, "negative budget multiplier {lambda}");
    assert!(mu >= 0.0, "negative ROI multiplier {mu}");
    lambda * g + mu * h
}

/// Azuma-Hoeffding interval term `2 * sqrt(len * ln(2T / delta))`, defined as
/// exactly 0 when `delta = 0`.
///
/// Panics when `delta` is outside `[0, 1]` or `horizon` is 0.
pub fn azuma_term(len: usize, horizon: usize, delta: f64) -> f64 {
    assert!(horizon >= 1, "horizon must be at least 1");
    assert!(
        delta.is_finite() && (0.0..=1.0).contains(&delta),
        "delta {delta} outside [0, 1]"
    );
    if delta == 0.0 {
        return 0.0;
    }
    2.0 * ((len as f64) * (2.0 * horizon as f64 / delta).ln()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn primal_loss_spec_values() {
        assert_eq!(primal_loss(0.0, 0.0, 0.0, 0.0, 0.5), 1.0);
        assert_eq!(primal_loss(1.0, 0.0, 0.0, 0.0, 0.5), 0.0);
        let l = primal_loss(0.5, 0.8, 2.0, 1.0, 0.25);
        assert!((l - 4.9).abs() < 1e-12, "got {l}");
    }

    #[test]
    #[should_panic(expected = "negative ROI multiplier")]
    fn primal_loss_rejects_negative_multiplier() {
        primal_loss(0.5, 0.5, 0.0, -0.1, 0.5);
    }

    #[test]
    #[should_panic(expected = "outside [0, 1]")]
    fn primal_loss_rejects_out_of_range_cost() {
        primal_loss(0.5, 1.5, 0.0, 0.0, 0.5);
    }

    #[test]
    fn dual_utility_spec_values() {
        assert_eq!(dual_utility(123.0, -9.0, 0.0, 0.0), 0.0);
        assert!((dual_utility(-0.5, 0.0, 2.0, 7.0) + 1.0).abs() < 1e-12);
        assert!((dual_utility(0.5, 0.5, 1.0, 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn azuma_term_spec_values() {
        assert_eq!(azuma_term(100, 100, 0.0), 0.0);
        assert_eq!(azuma_term(0, 10, 0.5), 0.0);
        let e = azuma_term(100, 100, 0.05);
        let expected = 2.0 * (100.0f64 * (4000.0f64).ln()).sqrt();
        assert!((e - expected).abs() < 1e-12);
        assert!((e - 57.594).abs() < 1e-2, "got {e}");
    }

    #[test]
    #[should_panic(expected = "outside [0, 1]")]
    fn azuma_term_rejects_bad_delta() {
        azuma_term(10, 10, 1.5);
    }

    #[test]
    fn grids_validate() {
        assert!(BidGrid::new(vec![]).is_err());
        assert!(BidGrid::new(vec![0.1, 0.2]).is_err(), "must start at the void bid");
        assert!(BidGrid::new(vec![0.0, 0.2, 0.2]).is_err(), "strictly increasing");
        assert!(BidGrid::new(vec![0.0, 1.2]).is_err());
        let g = BidGrid::new(vec![0.0, 0.25, 1.0]).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.value(BidGrid::VOID), 0.0);

        assert!(ValuationGrid::new(vec![0.5, 0.4]).is_err());
        let v = ValuationGrid::new(vec![0.3, 0.9]).unwrap();
        assert_eq!(v.index_of(0.9).unwrap(), 1);
        assert!(v.index_of(0.8).is_err());
    }

    #[test]
    fn run_config_validates() {
        assert!(RunConfig::new(0, 1.0, 0.5, 1.0, 0.0).is_err());
        assert!(RunConfig::new(10, 0.5, 0.5, 1.0, 0.0).is_err(), "B >= 1");
        assert!(RunConfig::new(10, 11.0, 0.5, 1.0, 0.0).is_err(), "rho <= 1");
        assert!(RunConfig::new(10, 5.0, 0.0, 1.0, 0.0).is_err(), "delta in (0,1]");
        assert!(RunConfig::new(10, 5.0, 0.5, 0.0, 0.0).is_err());
        assert!(RunConfig::new(10, 5.0, 0.5, 1.0, 2.0).is_err());
        let c = RunConfig::new(10, 5.0, 0.5, 1.0, 0.0).unwrap();
        assert_eq!(c.rho(), 0.5);
    }

    #[test]
    fn policy_validation_and_mixing() {
        assert!(Policy::new(vec![vec![0.5, 0.4]]).is_err(), "rows must sum to 1");
        assert!(Policy::new(vec![vec![1.1, -0.1]]).is_err(), "no negative entries");
        let p = Policy::new(vec![vec![0.25, 0.75], vec![1.0, 0.0]]).unwrap();
        let q = Policy::uniform(2, 2);
        let mixed = p.mix(&q, 0.5).unwrap();
        for row in mixed.rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
        assert!((mixed.row(0)[0] - 0.375).abs() < 1e-15);
    }

    proptest! {
        // The additive constant keeps the loss nonnegative over the whole domain.
        #[test]
        fn primal_loss_nonnegative(
            f in 0.0f64..=1.0,
            c in 0.0f64..=1.0,
            lambda in 0.0f64..20.0,
            mu in 0.0f64..20.0,
            rho in 0.01f64..=1.0,
        ) {
            prop_assert!(primal_loss(f, c, lambda, mu, rho) >= 0.0);
        }

        // Algebraic identity: loss + f - 1 - lambda - mu == lambda*g + mu*h.
        #[test]
        fn primal_loss_matches_dual_utility_identity(
            f in 0.0f64..=1.0,
            c in 0.0f64..=1.0,
            lambda in 0.0f64..20.0,
            mu in 0.0f64..20.0,
            rho in 0.01f64..=1.0,
        ) {
            let lhs = primal_loss(f, c, lambda, mu, rho) + f - 1.0 - lambda - mu;
            let rhs = dual_utility(c - rho, c - f, lambda, mu);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())));
        }

        #[test]
        fn policy_rows_renormalize_exactly(
            raw in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 3), 1..4)
        ) {
            // Build rows that sum to 1 by construction, then check Policy keeps them.
            let rows: Vec<Vec<f64>> = raw.iter().map(|r| {
                let s: f64 = r.iter().sum::<f64>() + 1e-9;
                r.iter().map(|&x| (x + 1e-9 / 3.0) / s).collect()
            }).collect();
            if let Ok(p) = Policy::new(rows) {
                for row in p.rows() {
                    let s: f64 = row.iter().sum();
                    prop_assert!((s - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
