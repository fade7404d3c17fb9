//! Offline baselines: the constrained LP over finite policies, the empirical
//! distribution of a script, and the strict-feasibility margin `alpha`.
//!
//! Everything reduces to small dense linear programs over the policy simplex
//! product: expected rewards and costs are precomputed per `(valuation, bid)`
//! by summing the probability table over competing bids, which makes the
//! optimization exact. The in-crate simplex keeps results bit-reproducible.

use crate::env::{outcome_for_index, InputModel, ProbTable, Script};
use crate::model::{BidGrid, Policy, ValuationGrid};
use crate::simplex::{self, Constraint, Rel};
use crate::{Error, Result};

/// Outcome of the constrained LP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    /// No policy beats the void action; the program's value is 0, which the
    /// void action always attains feasibly.
    OnlyVoidFeasible,
}

/// Optimal value, an optimal policy, and the dual certificate of the two
/// coupling constraints (budget, ROI).
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub value: f64,
    pub policy: Policy,
    pub duals: (f64, f64),
    pub status: LpStatus,
}

/// The feasibility margin together with the policy attaining it.
#[derive(Debug, Clone)]
pub struct AlphaSolution {
    pub alpha: f64,
    pub policy: Policy,
}

/// Mass-weighted expected reward/cost per `(valuation, bid)` cell. Entries
/// absorb the valuation marginal, so policy expectations are plain dot
/// products.
#[derive(Debug, Clone)]
pub struct ExpectedTables {
    pub f: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

/// Builds the expected tables of a probability table under a mechanism.
pub fn expected_tables(
    table: &ProbTable,
    valuations: &ValuationGrid,
    bids: &BidGrid,
    omega: f64,
    mechanism: crate::env::Mechanism,
) -> ExpectedTables {
    let n = valuations.len();
    let m = bids.len();
    let mut f = vec![vec![0.0; m]; n];
    let mut c = vec![vec![0.0; m]; n];
    for atom in table.atoms() {
        for x_idx in 0..m {
            let o = outcome_for_index(mechanism, atom.v, atom.beta, bids, x_idx, omega);
            f[atom.v_idx][x_idx] += atom.p * o.reward;
            c[atom.v_idx][x_idx] += atom.p * o.cost;
        }
    }
    ExpectedTables { f, c }
}

/// Empirical distribution of a script: one atom per distinct `(v, beta)` pair
/// with mass `count / T`, in ascending `(v, beta)` order.
pub fn empirical_distribution(script: &Script, valuations: &ValuationGrid) -> Result<ProbTable> {
    let t = script.len() as f64;
    let mut pairs: Vec<(f64, f64)> = script.rounds().iter().map(|r| (r.v, r.beta)).collect();
    pairs.sort_by(|a, b| a.partial_cmp(b).expect("validated finite"));
    let mut counts: Vec<(f64, f64, usize)> = Vec::new();
    for (v, beta) in pairs {
        match counts.last_mut() {
            Some(last) if last.0 == v && last.1 == beta => last.2 += 1,
            _ => counts.push((v, beta, 1)),
        }
    }
    let entries: Vec<(f64, f64, f64)> =
        counts.into_iter().map(|(v, beta, c)| (v, beta, c as f64 / t)).collect();
    ProbTable::new(&entries, valuations)
}

fn policy_from_solution(x: &[f64], n: usize, m: usize) -> Result<Policy> {
    let rows: Vec<Vec<f64>> = (0..n).map(|v| x[v * m..(v + 1) * m].to_vec()).collect();
    // Simplex rows satisfy the equality to solver precision; clean tiny noise.
    let cleaned: Vec<Vec<f64>> = rows
        .into_iter()
        .map(|row| {
            let sum: f64 = row.iter().map(|&p| p.max(0.0)).sum();
            row.into_iter().map(|p| p.max(0.0) / sum).collect()
        })
        .collect();
    Policy::new(cleaned)
}

/// Solves the constrained program: maximize expected reward subject to
/// `E[g] <= 0`, `E[h] <= 0` and one distribution per valuation. Exact on
/// these instance sizes; the returned policy re-verifies both constraints
/// within 1e-9.
pub fn solve_lp(
    table: &ProbTable,
    valuations: &ValuationGrid,
    bids: &BidGrid,
    rho: f64,
    omega: f64,
    mechanism: crate::env::Mechanism,
) -> Result<LpSolution> {
    let n = valuations.len();
    let m = bids.len();
    let tables = expected_tables(table, valuations, bids, omega, mechanism);
    let nm = n * m;

    let mut objective = vec![0.0; nm];
    let mut budget_row = vec![0.0; nm];
    let mut roi_row = vec![0.0; nm];
    for v in 0..n {
        for x in 0..m {
            objective[v * m + x] = tables.f[v][x];
            budget_row[v * m + x] = tables.c[v][x];
            roi_row[v * m + x] = tables.c[v][x] - tables.f[v][x];
        }
    }
    let mut constraints = vec![
        Constraint { coeffs: budget_row.clone(), rel: Rel::Le, rhs: rho },
        Constraint { coeffs: roi_row.clone(), rel: Rel::Le, rhs: 0.0 },
    ];
    for v in 0..n {
        let mut row = vec![0.0; nm];
        row[v * m..(v + 1) * m].fill(1.0);
        constraints.push(Constraint { coeffs: row, rel: Rel::Eq, rhs: 1.0 });
    }

    let sol = simplex::maximize(&objective, &constraints)?;
    let policy = policy_from_solution(&sol.x, n, m)?;

    // The void action is always feasible, so the solved policy must satisfy
    // both coupling constraints.
    let eg: f64 = dot(&budget_row, &sol.x) - rho;
    let eh: f64 = dot(&roi_row, &sol.x);
    if eg > 1e-9 || eh > 1e-9 {
        return Err(Error::Lp(format!("solution violates constraints: Eg={eg}, Eh={eh}")));
    }

    let status = if sol.value <= 1e-12 { LpStatus::OnlyVoidFeasible } else { LpStatus::Optimal };
    Ok(LpSolution { value: sol.value, policy, duals: (sol.duals[0], sol.duals[1]), status })
}

/// Stochastic feasibility margin: `alpha = -inf_policy max(E[g], E[h])`,
/// solved as `max u` subject to `E[g] <= -u`, `E[h] <= -u`. Always
/// nonnegative: the void action gives `E[g] = -rho`, `E[h] = 0`.
pub fn compute_alpha_stochastic(
    table: &ProbTable,
    valuations: &ValuationGrid,
    bids: &BidGrid,
    rho: f64,
    omega: f64,
    mechanism: crate::env::Mechanism,
) -> Result<AlphaSolution> {
    let n = valuations.len();
    let m = bids.len();
    let tables = expected_tables(table, valuations, bids, omega, mechanism);
    let nm = n * m;

    // Variables: policy entries then the margin u.
    let mut objective = vec![0.0; nm + 1];
    objective[nm] = 1.0;
    let mut budget_row = vec![0.0; nm + 1];
    let mut roi_row = vec![0.0; nm + 1];
    for v in 0..n {
        for x in 0..m {
            budget_row[v * m + x] = tables.c[v][x];
            roi_row[v * m + x] = tables.c[v][x] - tables.f[v][x];
        }
    }
    budget_row[nm] = 1.0;
    roi_row[nm] = 1.0;
    let mut constraints = vec![
        Constraint { coeffs: budget_row, rel: Rel::Le, rhs: rho },
        Constraint { coeffs: roi_row, rel: Rel::Le, rhs: 0.0 },
    ];
    for v in 0..n {
        let mut row = vec![0.0; nm + 1];
        row[v * m..(v + 1) * m].fill(1.0);
        constraints.push(Constraint { coeffs: row, rel: Rel::Eq, rhs: 1.0 });
    }
    let sol = simplex::maximize(&objective, &constraints)?;
    let policy = policy_from_solution(&sol.x[..nm], n, m)?;
    Ok(AlphaSolution { alpha: sol.value, policy })
}

/// Adversarial (worst-round) feasibility margin: `max u` subject to
/// `g_t(policy) <= -u` and `h_t(policy) <= -u` for every scripted round.
/// Identical rounds collapse to one constraint pair.
pub fn compute_alpha_adversarial(
    script: &Script,
    valuations: &ValuationGrid,
    bids: &BidGrid,
    rho: f64,
    omega: f64,
    mechanism: crate::env::Mechanism,
) -> Result<AlphaSolution> {
    let n = valuations.len();
    let m = bids.len();
    let nm = n * m;

    let mut distinct: Vec<(usize, f64)> = script.rounds().iter().map(|r| (r.v_idx, r.beta)).collect();
    distinct.sort_by(|a, b| (a.0, a.1).partial_cmp(&(b.0, b.1)).expect("finite"));
    distinct.dedup();

    let mut objective = vec![0.0; nm + 1];
    objective[nm] = 1.0;
    let mut constraints = Vec::with_capacity(2 * distinct.len() + n);
    for &(v_idx, beta) in &distinct {
        let v = valuations.value(v_idx);
        let mut g_row = vec![0.0; nm + 1];
        let mut h_row = vec![0.0; nm + 1];
        for x_idx in 0..m {
            let o = outcome_for_index(mechanism, v, beta, bids, x_idx, omega);
            g_row[v_idx * m + x_idx] = o.cost;
            h_row[v_idx * m + x_idx] = o.cost - o.reward;
        }
        g_row[nm] = 1.0;
        h_row[nm] = 1.0;
        constraints.push(Constraint { coeffs: g_row, rel: Rel::Le, rhs: rho });
        constraints.push(Constraint { coeffs: h_row, rel: Rel::Le, rhs: 0.0 });
    }
    for v in 0..n {
        let mut row = vec![0.0; nm + 1];
        row[v * m..(v + 1) * m].fill(1.0);
        constraints.push(Constraint { coeffs: row, rel: Rel::Eq, rhs: 1.0 });
    }
    let sol = simplex::maximize(&objective, &constraints)?;
    let policy = policy_from_solution(&sol.x[..nm], n, m)?;
    Ok(AlphaSolution { alpha: sol.value, policy })
}

/// Best unconstrained policy for a script: per valuation, the bid with the
/// highest cumulative reward (lowest index on ties).
pub fn unconstrained_optimal_policy(
    script: &Script,
    valuations: &ValuationGrid,
    bids: &BidGrid,
    omega: f64,
    mechanism: crate::env::Mechanism,
) -> Policy {
    let n = valuations.len();
    let m = bids.len();
    let mut reward = vec![vec![0.0; m]; n];
    for r in script.rounds() {
        for x_idx in 0..m {
            reward[r.v_idx][x_idx] +=
                outcome_for_index(mechanism, r.v, r.beta, bids, x_idx, omega).reward;
        }
    }
    let rows = reward
        .into_iter()
        .map(|row| {
            let best = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite"))
                .map(|(i, _)| i)
                .unwrap_or(0);
            // max_by returns the last max; prefer the lowest index instead.
            let best = row
                .iter()
                .enumerate()
                .find(|(_, &x)| x == row[best])
                .map(|(i, _)| i)
                .unwrap_or(best);
            let mut out = vec![0.0; m];
            out[best] = 1.0;
            out
        })
        .collect();
    Policy::new(rows).expect("rows are unit masses")
}

/// Expected `(reward, cost)` of a policy on each scripted round.
pub fn policy_round_outcomes(
    model: &InputModel,
    policy: &Policy,
    omega: f64,
) -> Result<Vec<crate::model::RoundOutcome>> {
    let script = model
        .script()
        .ok_or_else(|| Error::InvalidInput("per-round outcomes need a scripted model".into()))?;
    if policy.n() != model.valuations.len() || policy.m() != model.bids.len() {
        return Err(Error::DimensionMismatch("policy shape does not match grids".into()));
    }
    Ok(script
        .rounds()
        .iter()
        .map(|r| {
            crate::env::expected_outcome(
                model.mechanism,
                r.v,
                r.beta,
                &model.bids,
                policy.row(r.v_idx),
                omega,
            )
        })
        .collect())
}

/// Expected `(g, h)` of a policy on each scripted round.
pub fn policy_round_gaps(
    model: &InputModel,
    policy: &Policy,
    rho: f64,
    omega: f64,
) -> Result<Vec<(f64, f64)>> {
    Ok(policy_round_outcomes(model, policy, omega)?
        .into_iter()
        .map(|o| (o.budget_gap(rho), o.roi_gap()))
        .collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
