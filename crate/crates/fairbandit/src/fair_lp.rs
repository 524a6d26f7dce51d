//! Fairness-constrained reward maximization.
//!
//! The program solved here is
//!
//! ```text
//!   maximize   sum_i a_i p_i
//!   subject to |p_i - p_j| <= c_ij   for every pair i < j
//!              sum_i p_i <= 1, p >= 0          (Single mode)
//!              0 <= p_i <= 1 per coordinate    (Multi mode)
//! ```
//!
//! Rewards may be negative; p = 0 is always feasible, so the program never
//! reports infeasibility. Solutions are deterministic optimal vertices
//! (Bland pivoting in the underlying simplex), which makes the reported set
//! of tight pairwise constraints stable enough to drive feedback decisions.

use crate::error::{Error, Result};
use crate::pairs::{PairSet, PairVec};
use crate::simplex::{internal_failure, solve_from_basis, StandardForm};

/// Absolute slack when classifying a pairwise constraint as tight. Looser
/// than the feasibility tolerance so vertices sitting on a constraint are
/// reliably reported.
pub const TIGHT_TOL: f64 = 1e-7;
/// Feasibility slack guaranteed by returned solutions.
pub const FEAS_TOL: f64 = 1e-9;

/// Whether one action is sampled per round (probabilities share a unit
/// budget) or any number of actions may fire (per-coordinate box).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpMode {
    Single,
    Multi,
}

/// One reward-maximization instance: objective `rewards`, pairwise gap caps
/// `caps`, and the constraint mode.
#[derive(Debug, Clone)]
pub struct LpInstance {
    rewards: Vec<f64>,
    caps: PairVec,
    mode: LpMode,
}

impl LpInstance {
    pub fn new(rewards: Vec<f64>, caps: PairVec, mode: LpMode) -> Result<Self> {
        if rewards.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 arms, got {}",
                rewards.len()
            )));
        }
        if caps.arms() != rewards.len() {
            return Err(Error::DimensionMismatch {
                expected: rewards.len(),
                got: caps.arms(),
            });
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidInput("non-finite reward entry".into()));
        }
        // Rewards reaching the LP are estimates plus widths, both bounded,
        // so anything past 2 in magnitude is a caller bug.
        if rewards.iter().any(|r| r.abs() > 2.0 + 1e-9) {
            return Err(Error::InvalidInput(
                "reward entries must lie in [-2, 2]".into(),
            ));
        }
        if caps.as_slice().iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidInput(
                "caps must be finite and nonnegative".into(),
            ));
        }
        Ok(LpInstance {
            rewards,
            caps,
            mode,
        })
    }

    pub fn arms(&self) -> usize {
        self.rewards.len()
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn caps(&self) -> &PairVec {
        &self.caps
    }

    pub fn mode(&self) -> LpMode {
        self.mode
    }
}

/// An optimal policy with its objective value and the set of pairwise
/// constraints the vertex sits on.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub policy: Vec<f64>,
    pub objective: f64,
    pub tight_pairs: PairSet,
}

/// Solves the instance to a deterministic optimal vertex.
pub fn solve_fair_lp(inst: &LpInstance) -> Result<LpSolution> {
    let k = inst.arms();
    let n_pairs = inst.caps.as_slice().len();
    let budget_rows = match inst.mode {
        LpMode::Single => 1,
        LpMode::Multi => k,
    };
    let m = 2 * n_pairs + budget_rows;
    let n = k + m;

    // Columns for p_1..p_k then one slack per row; all rows are <= with
    // nonnegative right-hand sides, so the slack basis starts feasible.
    let mut columns = vec![vec![0.0; m]; n];
    let mut rhs = vec![0.0; m];
    let mut row = 0;
    for ((i, j), cap) in inst.caps.iter() {
        columns[i][row] = 1.0;
        columns[j][row] = -1.0;
        rhs[row] = cap;
        row += 1;
        columns[i][row] = -1.0;
        columns[j][row] = 1.0;
        rhs[row] = cap;
        row += 1;
    }
    match inst.mode {
        LpMode::Single => {
            for col in columns.iter_mut().take(k) {
                col[row] = 1.0;
            }
            rhs[row] = 1.0;
            row += 1;
        }
        LpMode::Multi => {
            for (i, item) in rhs.iter_mut().enumerate().skip(row).take(k) {
                columns[i - row][i] = 1.0;
                *item = 1.0;
            }
            row += k;
        }
    }
    debug_assert_eq!(row, m);
    for (s, col) in columns.iter_mut().skip(k).enumerate() {
        col[s] = 1.0;
    }

    let mut cost = vec![0.0; n];
    for i in 0..k {
        cost[i] = -inst.rewards[i];
    }

    let sf = StandardForm { columns, rhs, cost };
    let slack_basis: Vec<usize> = (k..n).collect();
    let vertex =
        solve_from_basis(&sf, slack_basis).map_err(|stop| internal_failure(stop, "fairness lp"))?;

    let policy: Vec<f64> = vertex.x[..k].to_vec();
    let objective = inst
        .rewards
        .iter()
        .zip(&policy)
        .map(|(a, p)| a * p)
        .sum::<f64>();
    let mut tight_pairs = PairSet::new();
    for ((i, j), cap) in inst.caps.iter() {
        if (policy[i] - policy[j]).abs() >= cap - TIGHT_TOL {
            tight_pairs.insert((i, j));
        }
    }
    Ok(LpSolution {
        policy,
        objective,
        tight_pairs,
    })
}

/// Copy of the instance with a single pairwise cap shifted by `delta`.
pub fn perturb_one_cap(inst: &LpInstance, pair: (usize, usize), delta: f64) -> Result<LpInstance> {
    let (i, j) = pair;
    if i >= j || j >= inst.arms() {
        return Err(Error::InvalidInput(format!(
            "pair ({i},{j}) is not canonical for k={}",
            inst.arms()
        )));
    }
    let new_cap = inst.caps.get(i, j) + delta;
    if !new_cap.is_finite() || new_cap < 0.0 {
        return Err(Error::InvalidInput(format!(
            "perturbed cap for ({i},{j}) would be {new_cap}"
        )));
    }
    let mut caps = inst.caps.clone();
    caps.set(i, j, new_cap);
    LpInstance::new(inst.rewards.clone(), caps, inst.mode)
}

/// Brute-force reference solver: enumerates a grid of policies at the given
/// resolution and keeps the best exactly-feasible one. Intended for tests;
/// the final coordinate is optimized over its feasible interval in closed
/// form (the objective is linear in it), which only improves on the plain
/// lattice while staying exactly feasible. Supports k = 2 and k = 3.
pub fn grid_oracle_objective(inst: &LpInstance, resolution: f64) -> Result<f64> {
    let k = inst.arms();
    if k > 3 {
        return Err(Error::InvalidInput("grid oracle supports k <= 3".into()));
    }
    let a = inst.rewards();
    let steps = (1.0 / resolution).round() as usize;
    let mut best = 0.0_f64; // p = 0 is always feasible
    match k {
        2 => {
            let cap = inst.caps.get(0, 1);
            for s0 in 0..=steps {
                let p0 = s0 as f64 * resolution;
                let (lo, hi) = last_coord_range(inst, &[p0], &[cap]);
                let Some((lo, hi)) = clamp_range(inst, &[p0], lo, hi) else {
                    continue;
                };
                for p1 in [lo, hi] {
                    let val = a[0] * p0 + a[1] * p1;
                    if val > best {
                        best = val;
                    }
                }
            }
        }
        3 => {
            let c01 = inst.caps.get(0, 1);
            let c02 = inst.caps.get(0, 2);
            let c12 = inst.caps.get(1, 2);
            for s0 in 0..=steps {
                let p0 = s0 as f64 * resolution;
                if infeasible_prefix(inst, &[p0]) {
                    continue;
                }
                for s1 in 0..=steps {
                    let p1 = s1 as f64 * resolution;
                    if (p0 - p1).abs() > c01 || infeasible_prefix(inst, &[p0, p1]) {
                        continue;
                    }
                    let (lo, hi) = last_coord_range(inst, &[p0, p1], &[c02, c12]);
                    let Some((lo, hi)) = clamp_range(inst, &[p0, p1], lo, hi) else {
                        continue;
                    };
                    for p2 in [lo, hi] {
                        let val = a[0] * p0 + a[1] * p1 + a[2] * p2;
                        if val > best {
                            best = val;
                        }
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(best)
}

/// Feasible interval for the last coordinate given the fixed prefix and the
/// caps linking it to each prefix coordinate.
fn last_coord_range(_inst: &LpInstance, prefix: &[f64], caps_to_last: &[f64]) -> (f64, f64) {
    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    for (p, c) in prefix.iter().zip(caps_to_last) {
        lo = lo.max(p - c);
        hi = hi.min(p + c);
    }
    (lo, hi)
}

/// Applies the budget constraint to the last coordinate's interval; returns
/// None when the interval empties.
fn clamp_range(inst: &LpInstance, prefix: &[f64], lo: f64, hi: f64) -> Option<(f64, f64)> {
    let (lo, hi) = match inst.mode {
        LpMode::Single => {
            let used: f64 = prefix.iter().sum();
            (lo, hi.min(1.0 - used))
        }
        LpMode::Multi => (lo, hi.min(1.0)),
    };
    if lo > hi {
        None
    } else {
        Some((lo, hi))
    }
}

/// Prefix already violates the budget (single mode only).
fn infeasible_prefix(inst: &LpInstance, prefix: &[f64]) -> bool {
    match inst.mode {
        LpMode::Single => prefix.iter().sum::<f64>() > 1.0,
        LpMode::Multi => false,
    }
}
