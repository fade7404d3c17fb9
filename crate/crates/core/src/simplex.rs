//! Dense two-phase primal simplex with Bland's rule.
//!
//! Sized for the tiny programs the baselines produce (tens of variables, a
//! handful of rows): a full tableau, artificial variables for equalities, and
//! lowest-index pivoting throughout, which rules out cycling. Right-hand
//! sides must be nonnegative; callers normalize their rows accordingly.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Rel {
    Le,
    Eq,
}

#[derive(Debug, Clone)]
pub(crate) struct Constraint {
    pub coeffs: Vec<f64>,
    pub rel: Rel,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct SimplexSolution {
    pub value: f64,
    pub x: Vec<f64>,
    /// One dual multiplier per constraint, in input order.
    pub duals: Vec<f64>,
}

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-9;

/// Maximizes `objective . x` subject to the constraints and `x >= 0`.
pub(crate) fn maximize(objective: &[f64], constraints: &[Constraint]) -> Result<SimplexSolution> {
    let n = objective.len();
    let m = constraints.len();
    for (i, c) in constraints.iter().enumerate() {
        assert_eq!(c.coeffs.len(), n, "constraint {i} width mismatch");
        assert!(c.rhs >= 0.0, "constraint {i} has negative rhs {}", c.rhs);
    }

    let n_slack = constraints.iter().filter(|c| c.rel == Rel::Le).count();
    let n_art = m - n_slack;
    let cols = n + n_slack + n_art;

    // Tableau rows; slack and artificial columns come after the structural ones.
    let mut a = vec![vec![0.0; cols]; m];
    let mut b = vec![0.0; m];
    let mut basis = vec![0usize; m];
    let mut slack_col_of_row = vec![usize::MAX; m];
    let mut art_col_of_row = vec![usize::MAX; m];
    let mut next_slack = n;
    let mut next_art = n + n_slack;
    for (i, c) in constraints.iter().enumerate() {
        a[i][..n].copy_from_slice(&c.coeffs);
        b[i] = c.rhs;
        match c.rel {
            Rel::Le => {
                a[i][next_slack] = 1.0;
                basis[i] = next_slack;
                slack_col_of_row[i] = next_slack;
                next_slack += 1;
            }
            Rel::Eq => {
                a[i][next_art] = 1.0;
                basis[i] = next_art;
                art_col_of_row[i] = next_art;
                next_art += 1;
            }
        }
    }

    let art_start = n + n_slack;

    // Phase 1: maximize -sum(artificials), i.e. drive them to zero.
    if n_art > 0 {
        let mut cost = vec![0.0; cols];
        for col in art_start..cols {
            cost[col] = -1.0;
        }
        let mut obj = build_objective_row(&cost, &a, &b, &basis);
        iterate(&mut a, &mut b, &mut basis, &mut obj, cols, None)?;
        if obj.value < -1e-7 {
            return Err(Error::Lp(format!("infeasible program (phase-1 gap {})", -obj.value)));
        }
        // Pivot any artificial still in the basis out on a real column.
        for row in 0..m {
            if basis[row] >= art_start && b[row].abs() <= 1e-9 {
                if let Some(col) = (0..art_start).find(|&c| a[row][c].abs() > PIVOT_TOL) {
                    pivot(&mut a, &mut b, &mut basis, &mut obj, row, col);
                }
            }
        }
    }

    // Phase 2: the real objective, artificial columns barred from entering.
    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(objective);
    let mut obj = build_objective_row(&cost, &a, &b, &basis);
    iterate(&mut a, &mut b, &mut basis, &mut obj, cols, Some(art_start))?;

    let mut x = vec![0.0; n];
    for row in 0..m {
        if basis[row] < n {
            x[basis[row]] = b[row];
        }
    }
    // Duals: negated reduced cost of each row's slack (or artificial) column.
    let mut duals = vec![0.0; m];
    for row in 0..m {
        let col = if slack_col_of_row[row] != usize::MAX {
            slack_col_of_row[row]
        } else {
            art_col_of_row[row]
        };
        duals[row] = -obj.coeffs[col];
    }
    Ok(SimplexSolution { value: obj.value, x, duals })
}

struct ObjectiveRow {
    coeffs: Vec<f64>,
    value: f64,
}

fn build_objective_row(cost: &[f64], a: &[Vec<f64>], b: &[f64], basis: &[usize]) -> ObjectiveRow {
    // Reduced costs c_j - c_B B^{-1} A_j, expressed against the current
    // canonical tableau (basic columns are unit vectors).
    let mut coeffs = cost.to_vec();
    let mut value = 0.0;
    for (row, &bv) in basis.iter().enumerate() {
        let cb = cost[bv];
        if cb != 0.0 {
            for (j, coeff) in coeffs.iter_mut().enumerate() {
                *coeff -= cb * a[row][j];
            }
            // Keep the basic column exactly zero.
            coeffs[bv] = 0.0;
            value += cb * b[row];
        }
    }
    ObjectiveRow { coeffs, value }
}

fn iterate(
    a: &mut [Vec<f64>],
    b: &mut [f64],
    basis: &mut [usize],
    obj: &mut ObjectiveRow,
    cols: usize,
    barred_from: Option<usize>,
) -> Result<()> {
    let m = a.len();
    loop {
        // Bland: entering column is the lowest index with positive reduced cost.
        let barred = barred_from.unwrap_or(cols);
        let entering = (0..cols).find(|&j| j < barred && obj.coeffs[j] > COST_TOL);
        let Some(col) = entering else {
            return Ok(());
        };
        // Ratio test; ties resolved on the lowest basis variable index.
        let mut leave: Option<(usize, f64)> = None;
        for row in 0..m {
            if a[row][col] > PIVOT_TOL {
                let ratio = b[row] / a[row][col];
                match leave {
                    None => leave = Some((row, ratio)),
                    Some((best_row, best_ratio)) => {
                        if ratio < best_ratio - 1e-12
                            || ((ratio - best_ratio).abs() <= 1e-12
                                && basis[row] < basis[best_row])
                        {
                            leave = Some((row, ratio));
                        }
                    }
                }
            }
        }
        let Some((row, _)) = leave else {
            return Err(Error::Lp("unbounded program".into()));
        };
        pivot(a, b, basis, obj, row, col);
    }
}

fn pivot(
    a: &mut [Vec<f64>],
    b: &mut [f64],
    basis: &mut [usize],
    obj: &mut ObjectiveRow,
    row: usize,
    col: usize,
) {
    let m = a.len();
    let cols = a[row].len();
    let p = a[row][col];
    for j in 0..cols {
        a[row][j] /= p;
    }
    b[row] /= p;
    a[row][col] = 1.0;
    for r in 0..m {
        if r != row {
            let factor = a[r][col];
            if factor != 0.0 {
                for j in 0..cols {
                    a[r][j] -= factor * a[row][j];
                }
                a[r][col] = 0.0;
                b[r] -= factor * b[row];
                if b[r].abs() < 1e-14 {
                    b[r] = 0.0;
                }
            }
        }
    }
    let factor = obj.coeffs[col];
    if factor != 0.0 {
        for j in 0..cols {
            obj.coeffs[j] -= factor * a[row][j];
        }
        obj.coeffs[col] = 0.0;
        obj.value += factor * b[row];
    }
    basis[row] = col;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_box_lp() {
        // max x + 2y st x + y <= 4, y <= 3.
        let sol = maximize(
            &[1.0, 2.0],
            &[
                Constraint { coeffs: vec![1.0, 1.0], rel: Rel::Le, rhs: 4.0 },
                Constraint { coeffs: vec![0.0, 1.0], rel: Rel::Le, rhs: 3.0 },
            ],
        )
        .unwrap();
        assert!((sol.value - 7.0).abs() < 1e-9);
        assert!((sol.x[0] - 1.0).abs() < 1e-9);
        assert!((sol.x[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn equality_rows_via_phase_one() {
        // max 3x + y st x + y = 1, x <= 0.4.
        let sol = maximize(
            &[3.0, 1.0],
            &[
                Constraint { coeffs: vec![1.0, 1.0], rel: Rel::Eq, rhs: 1.0 },
                Constraint { coeffs: vec![1.0, 0.0], rel: Rel::Le, rhs: 0.4 },
            ],
        )
        .unwrap();
        assert!((sol.value - (3.0 * 0.4 + 0.6)).abs() < 1e-9);
    }

    #[test]
    fn infeasible_program_detected() {
        // x = 2 with x <= 1 is infeasible.
        let r = maximize(
            &[1.0],
            &[
                Constraint { coeffs: vec![1.0], rel: Rel::Eq, rhs: 2.0 },
                Constraint { coeffs: vec![1.0], rel: Rel::Le, rhs: 1.0 },
            ],
        );
        assert!(r.is_err());
    }

    #[test]
    fn unbounded_detected() {
        let r = maximize(&[1.0], &[Constraint { coeffs: vec![-1.0], rel: Rel::Le, rhs: 1.0 }]);
        assert!(matches!(r, Err(Error::Lp(_))));
    }

    #[test]
    fn duals_of_binding_rows() {
        // max x st x <= 2: dual of the row is 1.
        let sol = maximize(&[1.0], &[Constraint { coeffs: vec![1.0], rel: Rel::Le, rhs: 2.0 }]).unwrap();
        assert!((sol.duals[0] - 1.0).abs() < 1e-9);

        // Nonbinding row has dual 0.
        let sol = maximize(
            &[1.0],
            &[
                Constraint { coeffs: vec![1.0], rel: Rel::Le, rhs: 2.0 },
                Constraint { coeffs: vec![1.0], rel: Rel::Le, rhs: 5.0 },
            ],
        )
        .unwrap();
        assert!(sol.duals[1].abs() < 1e-9);
    }

    #[test]
    fn degenerate_ties_terminate() {
        // Degenerate vertex: multiple rows with zero ratio.
        let sol = maximize(
            &[1.0, 1.0],
            &[
                Constraint { coeffs: vec![1.0, 0.0], rel: Rel::Le, rhs: 0.0 },
                Constraint { coeffs: vec![1.0, 1.0], rel: Rel::Le, rhs: 0.0 },
                Constraint { coeffs: vec![0.0, 1.0], rel: Rel::Le, rhs: 1.0 },
            ],
        )
        .unwrap();
        assert!(sol.value.abs() < 1e-9);
    }
}
