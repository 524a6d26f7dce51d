//! Dense tableau simplex for the small linear programs used elsewhere in
//! the crate.
//!
//! Problems arrive in standard computational form: minimize c.x subject to
//! A x = b, x >= 0, together with a starting basic feasible solution. Both
//! call sites can construct one directly (slack basis for the fairness LPs,
//! signed box-multiplier basis for version-space support queries), so no
//! phase-one machinery exists here.
//!
//! Pivot selection is Bland's rule: the entering variable is the lowest
//! index with negative reduced cost, and ratio-test ties leave the row whose
//! basic variable has the lowest index. That makes the pivot sequence (and
//! hence the returned vertex) deterministic and cycle-free. After the
//! tableau terminates, the vertex is re-solved from the original data (LU
//! plus one iterative-refinement step) so accumulated elimination drift does
//! not leak into reported solutions.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;

/// Reduced costs above -REDCOST_TOL count as optimal.
const REDCOST_TOL: f64 = 1e-9;
/// Entries below PIVOT_TOL are treated as zero in the ratio test.
const PIVOT_TOL: f64 = 1e-10;
/// Feasibility slack tolerated in the starting basis and the final vertex.
const FEAS_TOL: f64 = 1e-7;

/// minimize cost.x subject to (columns as a matrix) x = rhs, x >= 0.
/// Columns are stored column-major; every column has `rhs.len()` rows.
#[derive(Debug, Clone)]
pub struct StandardForm {
    pub columns: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub cost: Vec<f64>,
}

/// An optimal basic feasible solution.
#[derive(Debug, Clone)]
pub struct Vertex {
    pub x: Vec<f64>,
    pub objective: f64,
    pub basis: Vec<usize>,
}

/// Reasons a solve can stop without an optimum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimplexStop {
    /// The objective is unbounded below over the feasible region.
    Unbounded,
    /// Iteration limit hit; indicates a bug or pathological conditioning.
    Stalled,
}

/// Runs the simplex method from the supplied feasible basis.
///
/// `basis[i]` names the column basic in row `i`; the basis matrix must be
/// nonsingular and the implied basic solution nonnegative.
pub fn solve_from_basis(
    sf: &StandardForm,
    basis: Vec<usize>,
) -> std::result::Result<Vertex, SimplexStop> {
    let m = sf.rhs.len();
    let n = sf.columns.len();
    debug_assert_eq!(basis.len(), m);
    debug_assert!(sf.columns.iter().all(|c| c.len() == m));
    debug_assert_eq!(sf.cost.len(), n);

    let mut basis = basis;
    let mut tableau = build_tableau(sf, &basis).ok_or(SimplexStop::Stalled)?;
    let mut in_basis = vec![false; n];
    for &b in &basis {
        in_basis[b] = true;
    }

    // Reduced-cost row: rc[j] = cost[j] - cost_B . T[:, j].
    let mut rc = vec![0.0; n];
    for j in 0..n {
        let mut acc = sf.cost[j];
        for i in 0..m {
            acc -= sf.cost[basis[i]] * tableau[i][j];
        }
        rc[j] = acc;
    }

    let max_iters = 200 + 20 * (m + n);
    for _ in 0..max_iters {
        // Bland entering rule: lowest index with negative reduced cost.
        let mut entering = None;
        for j in 0..n {
            if !in_basis[j] && rc[j] < -REDCOST_TOL {
                entering = Some(j);
                break;
            }
        }
        let Some(enter) = entering else {
            return Ok(finish(sf, &basis, &tableau));
        };

        // Ratio test; ties leave the lowest basic variable index.
        let mut best_ratio = f64::INFINITY;
        let mut leave_row: Option<usize> = None;
        for i in 0..m {
            let coef = tableau[i][enter];
            if coef > PIVOT_TOL {
                let ratio = tableau[i][n] / coef;
                let better = match leave_row {
                    None => true,
                    Some(prev) => {
                        ratio < best_ratio - 1e-12 * (1.0 + best_ratio.abs())
                            || (ratio <= best_ratio + 1e-12 * (1.0 + best_ratio.abs())
                                && basis[i] < basis[prev])
                    }
                };
                if better {
                    best_ratio = ratio.min(best_ratio);
                    leave_row = Some(i);
                }
            }
        }
        let Some(row) = leave_row else {
            return Err(SimplexStop::Unbounded);
        };

        // Pivot on (row, enter).
        let pivot = tableau[row][enter];
        for v in tableau[row].iter_mut() {
            *v /= pivot;
        }
        for i in 0..m {
            if i != row {
                let factor = tableau[i][enter];
                if factor != 0.0 {
                    let (pivot_row, target) = if i < row {
                        let (lo, hi) = tableau.split_at_mut(row);
                        (&hi[0], &mut lo[i])
                    } else {
                        let (lo, hi) = tableau.split_at_mut(i);
                        (&lo[row], &mut hi[0])
                    };
                    for (t, p) in target.iter_mut().zip(pivot_row.iter()) {
                        *t -= factor * p;
                    }
                    tableau[i][enter] = 0.0;
                }
            }
        }
        let rc_factor = rc[enter];
        if rc_factor != 0.0 {
            for j in 0..n {
                rc[j] -= rc_factor * tableau[row][j];
            }
            rc[enter] = 0.0;
        }

        in_basis[basis[row]] = false;
        in_basis[enter] = true;
        basis[row] = enter;
    }
    Err(SimplexStop::Stalled)
}

/// Tableau of B^-1 [A | b] for the given basis, or None when B is singular.
fn build_tableau(sf: &StandardForm, basis: &[usize]) -> Option<Vec<Vec<f64>>> {
    let m = sf.rhs.len();
    let n = sf.columns.len();
    let mut bmat = DMatrix::<f64>::zeros(m, m);
    for (col, &b) in basis.iter().enumerate() {
        for row in 0..m {
            bmat[(row, col)] = sf.columns[b][row];
        }
    }
    let lu = bmat.lu();
    let mut tableau = vec![vec![0.0; n + 1]; m];
    for j in 0..n {
        let col = lu.solve(&DVector::from_column_slice(&sf.columns[j]))?;
        for i in 0..m {
            tableau[i][j] = col[i];
        }
    }
    let rhs = lu.solve(&DVector::from_column_slice(&sf.rhs))?;
    for i in 0..m {
        if rhs[i] < -FEAS_TOL {
            // Caller handed over an infeasible basis; treat as a bug.
            return None;
        }
        tableau[i][n] = rhs[i].max(0.0);
    }
    // The basis permutation must map to unit columns; basis[i] basic in row i.
    // LU solving already guarantees this up to rounding.
    Some(tableau)
}

/// Re-solves the final vertex from original data to shed tableau drift.
fn finish(sf: &StandardForm, basis: &[usize], tableau: &[Vec<f64>]) -> Vertex {
    let m = sf.rhs.len();
    let n = sf.columns.len();
    let mut x = vec![0.0; n];

    let mut bmat = DMatrix::<f64>::zeros(m, m);
    for (col, &b) in basis.iter().enumerate() {
        for row in 0..m {
            bmat[(row, col)] = sf.columns[b][row];
        }
    }
    let rhs = DVector::from_column_slice(&sf.rhs);
    let lu = bmat.clone().lu();
    let refined = match lu.solve(&rhs) {
        Some(mut xb) => {
            // One refinement step: solve for the residual and correct.
            let residual = &rhs - &bmat * &xb;
            if let Some(dx) = lu.solve(&residual) {
                xb += dx;
            }
            Some(xb)
        }
        None => None,
    };
    match refined {
        Some(xb) => {
            for (i, &b) in basis.iter().enumerate() {
                x[b] = xb[i].max(0.0);
            }
        }
        None => {
            // Singular refactorization; keep the tableau's values.
            for (i, &b) in basis.iter().enumerate() {
                x[b] = tableau[i][n].max(0.0);
            }
        }
    }
    let objective = sf.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
    Vertex {
        x,
        objective,
        basis: basis.to_vec(),
    }
}

/// Convenience conversion used by call sites reporting solver failures on
/// problems that are provably bounded and feasible.
pub fn internal_failure(stop: SimplexStop, what: &str) -> Error {
    Error::Internal(format!("simplex {stop:?} on {what}"))
}
