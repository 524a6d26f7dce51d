//! Online estimation of squared pairwise distances from one-bit feedback.
//!
//! One estimator is kept per canonical context pair. Each round the manager
//! asks every estimator for a guess of the squared distance along that
//! round's direction vector u = flatten_pair(x_i, x_j); the guess is the
//! midpoint of the achievable interval of <alpha, u> over the version space,
//! the polytope of parameter vectors consistent with all feedback so far
//! intersected with the box |alpha_i| <= B1. Feedback cuts the polytope with
//! a halfspace through the issued guess, so feedback that reveals a guess
//! off by more than the working tolerance halves the interval in that
//! direction. Guessing is side-effect free: rounds without feedback leave no
//! trace, which is what makes rollback-by-omission trivial.
//!
//! Interval endpoints are computed on the dual of the support program:
//! maximizing <u, alpha> over the polytope dualizes to min c'y subject to
//! C'y = u, y >= 0, which has only m = d^2 equality rows no matter how many
//! halfspaces have accumulated, and the signed box columns always form a
//! feasible starting basis (y_i = |u_i|), so no phase-1 is ever needed. An
//! unbounded dual certifies an empty version space; truthful midpoint
//! feedback can never produce one, because every cut passes through the
//! midpoint of a nonempty interval.
//!
//! Two mechanisms keep the halfspace lists, and with them the support LPs,
//! bounded over long runs. Feedback on an interval already narrower than
//! half the working accuracy is counted but not stored: such a cut cannot
//! move any later guess by more than a quarter of the accuracy, and once a
//! run converges every round produces one, so storing them is what made
//! lists grow without bound. Past the cap, redundant halfspaces are evicted
//! first (found by a rotating scan with a fixed per-insertion budget, so
//! insertion stays O(1) support solves), then oldest ones. Eviction only
//! ever grows the space, so a truthful parameter is never lost.

use crate::error::{Error, Result};
use crate::geometry::{flatten_pair, ContextSet};
use crate::pairs::{pair_count, pair_index, pairs, PairSet, PairVec};
use crate::simplex::{solve_from_basis, SimplexStop, StandardForm};

/// Support values this far past a halfspace's own bound still count as
/// implied by the rest of the polytope.
const REDUNDANCY_TOL: f64 = 1e-12;
/// Redundancy checks spent per over-cap insertion. One check is one support
/// solve, so this keeps insertion within a small multiple of the two solves
/// every guess already pays.
const SCAN_BUDGET: usize = 8;
/// Intervals narrower than this are never worth cutting, whatever the
/// working accuracy: the LP tolerances drown the difference.
const MIN_REFINE_FLOOR: f64 = 1e-11;

/// Orientation of one feedback cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// <alpha, normal> <= bound: the guess was too large.
    Leq,
    /// <alpha, normal> >= bound: the guess was not too large.
    Geq,
}

/// One feedback cut through parameter space.
#[derive(Debug, Clone)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub bound: f64,
    pub sense: Sense,
}

impl Halfspace {
    fn satisfied_within(&self, alpha: &[f64], tol: f64) -> bool {
        let v: f64 = self.normal.iter().zip(alpha).map(|(n, a)| n * a).sum();
        match self.sense {
            Sense::Leq => v <= self.bound + tol,
            Sense::Geq => v >= self.bound - tol,
        }
    }
}

/// Intersection of feedback halfspaces with the box |alpha_i| <= box_radius.
#[derive(Debug, Clone)]
pub struct VersionSpace {
    dim: usize,
    box_radius: f64,
    max_halfspaces: usize,
    halfspaces: Vec<Halfspace>,
    scan_cursor: usize,
}

impl VersionSpace {
    /// `epsilon_sq` is the working accuracy the estimator is run at; it only
    /// sizes the halfspace cap (4 m log2(B1/eps^2), floored at 4 m).
    pub fn new(dim: usize, box_radius: f64, epsilon_sq: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("version space needs dim >= 1".into()));
        }
        if !box_radius.is_finite() || box_radius <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "box radius must be positive and finite, got {box_radius}"
            )));
        }
        if !epsilon_sq.is_finite() || epsilon_sq <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "working accuracy must be positive and finite, got {epsilon_sq}"
            )));
        }
        let ratio = (box_radius / epsilon_sq).max(2.0);
        let cap = (4.0 * dim as f64 * ratio.log2()).ceil() as usize;
        Ok(VersionSpace {
            dim,
            box_radius,
            max_halfspaces: cap.max(4 * dim),
            halfspaces: Vec::new(),
            scan_cursor: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn box_radius(&self) -> f64 {
        self.box_radius
    }

    pub fn len(&self) -> usize {
        self.halfspaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.halfspaces.is_empty()
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    /// Min and max of <alpha, u> over the space (two support solves).
    pub fn interval(&self, u: &[f64]) -> Result<(f64, f64)> {
        let hi = self.support(u, None)?;
        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        let lo = -self.support(&neg, None)?;
        if lo <= hi {
            Ok((lo, hi))
        } else {
            // Rounding can cross the endpoints of a width-zero interval.
            let mid = 0.5 * (lo + hi);
            Ok((mid, mid))
        }
    }

    pub fn add(&mut self, h: Halfspace) -> Result<()> {
        if h.normal.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: h.normal.len(),
            });
        }
        if h.normal.iter().any(|v| !v.is_finite()) || !h.bound.is_finite() {
            return Err(Error::InvalidInput("non-finite halfspace".into()));
        }
        self.halfspaces.push(h);
        self.enforce_cap()
    }

    /// Every halfspace and the box satisfied within `tol`.
    pub fn contains(&self, alpha: &[f64], tol: f64) -> bool {
        alpha.len() == self.dim
            && alpha.iter().all(|a| a.abs() <= self.box_radius + tol)
            && self
                .halfspaces
                .iter()
                .all(|h| h.satisfied_within(alpha, tol))
    }

    /// Whether halfspace `idx` is implied by the rest of the space.
    pub fn is_redundant(&self, idx: usize) -> Result<bool> {
        let h = &self.halfspaces[idx];
        match h.sense {
            Sense::Leq => {
                let hi = self.support(&h.normal, Some(idx))?;
                Ok(hi <= h.bound + REDUNDANCY_TOL)
            }
            Sense::Geq => {
                let neg: Vec<f64> = h.normal.iter().map(|v| -v).collect();
                let lo = -self.support(&neg, Some(idx))?;
                Ok(lo >= h.bound - REDUNDANCY_TOL)
            }
        }
    }

    /// Removes every redundant halfspace, one at a time so the polytope is
    /// preserved at each step. Returns how many were dropped.
    pub fn compact(&mut self) -> Result<usize> {
        let before = self.halfspaces.len();
        let mut idx = 0;
        while idx < self.halfspaces.len() {
            if self.is_redundant(idx)? {
                self.halfspaces.remove(idx);
            } else {
                idx += 1;
            }
        }
        Ok(before - self.halfspaces.len())
    }

    fn enforce_cap(&mut self) -> Result<()> {
        if self.halfspaces.len() <= self.max_halfspaces {
            return Ok(());
        }
        // A persistent cursor spreads the redundancy sweep across
        // insertions; removing a redundant halfspace preserves the polytope
        // exactly, so this phase never changes a guess.
        let mut checks = 0;
        while self.halfspaces.len() > self.max_halfspaces && checks < SCAN_BUDGET {
            if self.scan_cursor >= self.halfspaces.len() {
                self.scan_cursor = 0;
            }
            if self.is_redundant(self.scan_cursor)? {
                self.halfspaces.remove(self.scan_cursor);
            } else {
                self.scan_cursor += 1;
            }
            checks += 1;
        }
        // The cap is a hard bound on LP size. When the scanned entries are
        // all irredundant the oldest go first: they sit at the coarsest
        // scale, so dropping them loosens the space the least, and removal
        // can only grow the space, never exclude the true parameter.
        while self.halfspaces.len() > self.max_halfspaces {
            self.halfspaces.remove(0);
            self.scan_cursor = self.scan_cursor.saturating_sub(1);
        }
        Ok(())
    }

    /// max of <u, alpha> over the space, optionally ignoring one halfspace.
    /// Solved as the dual described in the module docs.
    fn support(&self, u: &[f64], skip: Option<usize>) -> Result<f64> {
        if u.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: u.len(),
            });
        }
        let m = self.dim;
        let n = 2 * m + self.halfspaces.len();
        let mut columns: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut cost: Vec<f64> = Vec::with_capacity(n);
        let mut basis = Vec::with_capacity(m);
        // Signed box columns matching sign(u) form the starting basis: the
        // basis matrix is diag(+-1) and the basic solution is |u_i| >= 0.
        for (i, ui) in u.iter().enumerate() {
            let mut col = vec![0.0; m];
            col[i] = if *ui >= 0.0 { 1.0 } else { -1.0 };
            columns.push(col);
            cost.push(self.box_radius);
            basis.push(i);
        }
        for (i, ui) in u.iter().enumerate() {
            let mut col = vec![0.0; m];
            col[i] = if *ui >= 0.0 { -1.0 } else { 1.0 };
            columns.push(col);
            cost.push(self.box_radius);
        }
        for (idx, h) in self.halfspaces.iter().enumerate() {
            if Some(idx) == skip {
                continue;
            }
            match h.sense {
                Sense::Leq => {
                    columns.push(h.normal.clone());
                    cost.push(h.bound);
                }
                Sense::Geq => {
                    columns.push(h.normal.iter().map(|v| -v).collect());
                    cost.push(-h.bound);
                }
            }
        }
        let sf = StandardForm {
            columns,
            rhs: u.to_vec(),
            cost,
        };
        match solve_from_basis(&sf, basis) {
            Ok(v) => Ok(v.objective),
            Err(SimplexStop::Unbounded) => Err(Error::InconsistentFeedback),
            Err(SimplexStop::Stalled) => {
                Err(Error::Internal("support query did not converge".into()))
            }
        }
    }
}

/// One pair's estimator: version space plus mistake accounting.
#[derive(Debug, Clone)]
pub struct DistanceEstimator {
    space: VersionSpace,
    epsilon_sq: f64,
    refine_floor: f64,
    valid_mistakes: u64,
    feedback_rounds: u64,
}

impl DistanceEstimator {
    pub fn new(dim: usize, box_radius: f64, epsilon_sq: f64) -> Result<Self> {
        Ok(DistanceEstimator {
            space: VersionSpace::new(dim, box_radius, epsilon_sq)?,
            epsilon_sq,
            refine_floor: (0.5 * epsilon_sq).max(MIN_REFINE_FLOOR),
            valid_mistakes: 0,
            feedback_rounds: 0,
        })
    }

    /// The achievable interval of <alpha, u>; the guess is its midpoint,
    /// and hi - lo is how far any later guess in this direction can still
    /// move. Never mutates state.
    pub fn guess_interval(&self, u: &[f64]) -> Result<(f64, f64)> {
        self.space.interval(u)
    }

    /// Midpoint of the achievable interval of <alpha, u>. Never mutates
    /// state; a round that yields no feedback leaves the estimator exactly
    /// as it was.
    pub fn guess(&self, u: &[f64]) -> Result<f64> {
        let (lo, hi) = self.guess_interval(u)?;
        Ok(0.5 * (lo + hi))
    }

    /// Records one bit of feedback on a previously issued guess `g` along
    /// `u`. When the caller knows the true inner product it passes it in and
    /// the mistake counter advances whenever |g - truth| exceeds the working
    /// accuracy; the return value reports that same classification.
    pub fn feedback(
        &mut self,
        u: &[f64],
        g: f64,
        too_large: bool,
        truth: Option<f64>,
    ) -> Result<bool> {
        self.feedback_with_width(u, g, too_large, truth, f64::INFINITY)
    }

    /// [`DistanceEstimator::feedback`] for callers that know the width of
    /// the interval `g` was cut from. A cut through an interval already
    /// narrower than half the working accuracy is counted but not stored:
    /// it could move later guesses by at most a quarter accuracy, far
    /// inside the mistake threshold, and dropping it is what keeps the
    /// halfspace list from growing forever after convergence.
    pub fn feedback_with_width(
        &mut self,
        u: &[f64],
        g: f64,
        too_large: bool,
        truth: Option<f64>,
        width: f64,
    ) -> Result<bool> {
        if u.len() != self.space.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.space.dim(),
                got: u.len(),
            });
        }
        if width > self.refine_floor {
            let sense = if too_large { Sense::Leq } else { Sense::Geq };
            self.space.add(Halfspace {
                normal: u.to_vec(),
                bound: g,
                sense,
            })?;
        }
        self.feedback_rounds += 1;
        let mistake = match truth {
            Some(a) => (g - a).abs() > self.epsilon_sq,
            None => false,
        };
        if mistake {
            self.valid_mistakes += 1;
        }
        Ok(mistake)
    }

    pub fn space(&self) -> &VersionSpace {
        &self.space
    }

    pub fn epsilon_sq(&self) -> f64 {
        self.epsilon_sq
    }

    pub fn valid_mistakes(&self) -> u64 {
        self.valid_mistakes
    }

    pub fn feedback_rounds(&self) -> u64 {
        self.feedback_rounds
    }
}

/// What one pair's feedback did this round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackEvent {
    pub pair: (usize, usize),
    pub guess: f64,
    pub too_large: bool,
    /// Set only when ground truth was supplied to the round.
    pub valid_mistake: bool,
}

/// The per-pair estimator bank driving one learner.
#[derive(Debug, Clone)]
pub struct EstimatorManager {
    k: usize,
    estimators: Vec<DistanceEstimator>,
    /// Per pair: the issued direction, its guess, and the interval width
    /// the guess was the midpoint of.
    pending: Option<Vec<(Vec<f64>, f64, f64)>>,
}

impl EstimatorManager {
    pub fn new(k: usize, d: usize, box_radius: f64, epsilon_sq: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidInput(format!("need k >= 2 arms, got {k}")));
        }
        if d == 0 {
            return Err(Error::InvalidInput("context dimension must be >= 1".into()));
        }
        let m = d * d;
        let estimators = (0..pair_count(k))
            .map(|_| DistanceEstimator::new(m, box_radius, epsilon_sq))
            .collect::<Result<Vec<_>>>()?;
        Ok(EstimatorManager {
            k,
            estimators,
            pending: None,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn estimator(&self, i: usize, j: usize) -> &DistanceEstimator {
        &self.estimators[pair_index(self.k, i, j)]
    }

    /// Direct access for tests and diagnostics; the round loop itself only
    /// goes through estimate_distances / apply_oracle_round.
    pub fn estimator_mut(&mut self, i: usize, j: usize) -> &mut DistanceEstimator {
        &mut self.estimators[pair_index(self.k, i, j)]
    }

    /// Issues one guess per canonical pair and converts to distances via
    /// sqrt(max(0, g)). The issued (direction, guess) pairs are held so the
    /// round's oracle response can be applied to exactly what was guessed.
    pub fn estimate_distances(&mut self, ctx: &ContextSet) -> Result<PairVec> {
        if ctx.k() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                got: ctx.k(),
            });
        }
        let mut pend = Vec::with_capacity(pair_count(self.k));
        let mut d_hat = PairVec::zeros(self.k);
        for (i, j) in pairs(self.k) {
            let u = flatten_pair(ctx.get(i), ctx.get(j))?;
            let (lo, hi) = self.estimators[pair_index(self.k, i, j)].guess_interval(&u)?;
            let g = 0.5 * (lo + hi);
            d_hat.set(i, j, g.max(0.0).sqrt());
            pend.push((u, g, hi - lo));
        }
        self.pending = Some(pend);
        Ok(d_hat)
    }

    /// Routes the oracle's response for the round: violated pairs hear "too
    /// large", tight non-violated pairs hear "not too large", everyone else
    /// hears nothing. A pair that is both violated and tight counts as
    /// violated. `truth_sq`, when supplied by a harness that knows the
    /// metric, drives the valid-mistake counters.
    pub fn apply_oracle_round(
        &mut self,
        ctx: &ContextSet,
        violations: &PairSet,
        tight: &PairSet,
        truth_sq: Option<&PairVec>,
    ) -> Result<Vec<FeedbackEvent>> {
        if ctx.k() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                got: ctx.k(),
            });
        }
        let pending = self.pending.take().ok_or_else(|| {
            Error::InvalidInput(
                "oracle feedback applied without a distance estimate this round".into(),
            )
        })?;
        let mut events = Vec::new();
        for (idx, (i, j)) in pairs(self.k).enumerate() {
            let violated = violations.contains(&(i, j));
            let confirmed_tight = !violated && tight.contains(&(i, j));
            if !violated && !confirmed_tight {
                continue;
            }
            let (u, g, width) = &pending[idx];
            let truth = truth_sq.map(|t| t.get(i, j));
            let est = &mut self.estimators[pair_index(self.k, i, j)];
            let valid_mistake = est.feedback_with_width(u, *g, violated, truth, *width)?;
            events.push(FeedbackEvent {
                pair: (i, j),
                guess: *g,
                too_large: violated,
                valid_mistake,
            });
        }
        Ok(events)
    }

    pub fn total_valid_mistakes(&self) -> u64 {
        self.estimators.iter().map(|e| e.valid_mistakes()).sum()
    }

    pub fn total_feedback_rounds(&self) -> u64 {
        self.estimators.iter().map(|e| e.feedback_rounds()).sum()
    }

    /// True parameter inside every pair's version space.
    pub fn contains_truth(&self, alpha: &[f64], tol: f64) -> bool {
        self.estimators.iter().all(|e| e.space.contains(alpha, tol))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e(dim: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        v
    }

    fn set(items: &[(usize, usize)]) -> PairSet {
        items.iter().copied().collect()
    }

    #[test]
    fn box_support_values() {
        let vs = VersionSpace::new(2, 1.0, 0.01).unwrap();
        let (lo, hi) = vs.interval(&[1.0, 2.0]).unwrap();
        assert!((hi - 3.0).abs() < 1e-12);
        assert!((lo + 3.0).abs() < 1e-12);
    }

    #[test]
    fn fresh_guess_is_zero() {
        let est = DistanceEstimator::new(4, 1.0, 0.01).unwrap();
        assert_eq!(est.guess(&[0.5, -0.25, 0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(est.guess(&[0.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn one_cut_hand_trace() {
        let mut est = DistanceEstimator::new(1, 1.0, 0.01).unwrap();
        est.feedback(&[1.0], 0.0, false, None).unwrap();
        assert!((est.guess(&[1.0]).unwrap() - 0.5).abs() < 1e-12);

        let mut est = DistanceEstimator::new(1, 1.0, 0.01).unwrap();
        est.feedback(&[1.0], 0.0, true, None).unwrap();
        assert!((est.guess(&[1.0]).unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn redundant_cut_leaves_interval() {
        let mut est = DistanceEstimator::new(1, 1.0, 0.01).unwrap();
        // Current interval minimum is -1; >= -1 cuts away nothing.
        est.feedback(&[1.0], -1.0, false, None).unwrap();
        let (lo, hi) = est.space().interval(&[1.0]).unwrap();
        assert!((lo + 1.0).abs() < 1e-12);
        assert!((hi - 1.0).abs() < 1e-12);
        assert_eq!(est.guess(&[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn midpoint_cuts_halve_the_width() {
        let mut est = DistanceEstimator::new(2, 1.0, 0.01).unwrap();
        let u = e(2, 0);
        let mut width = 2.0;
        for round in 0..3 {
            let g = est.guess(&u).unwrap();
            est.feedback(&u, g, round % 2 == 0, None).unwrap();
            width /= 2.0;
            let (lo, hi) = est.space().interval(&u).unwrap();
            assert!((hi - lo - width).abs() < 1e-12, "round {round}");
        }
        // Three cuts: width 2 * B1 / 2^3 = B1 / 4.
        let (lo, hi) = est.space().interval(&u).unwrap();
        assert!((hi - lo - 0.25).abs() < 1e-12);
        // The untouched direction keeps its full box interval.
        let (lo2, hi2) = est.space().interval(&e(2, 1)).unwrap();
        assert!((lo2 + 1.0).abs() < 1e-12);
        assert!((hi2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_cuts_are_detected() {
        let mut vs = VersionSpace::new(1, 1.0, 0.01).unwrap();
        vs.add(Halfspace {
            normal: vec![1.0],
            bound: -0.5,
            sense: Sense::Leq,
        })
        .unwrap();
        vs.add(Halfspace {
            normal: vec![1.0],
            bound: 0.5,
            sense: Sense::Geq,
        })
        .unwrap();
        assert!(matches!(
            vs.interval(&[1.0]),
            Err(Error::InconsistentFeedback)
        ));
    }

    #[test]
    fn redundancy_detection_and_compaction() {
        let mut vs = VersionSpace::new(2, 1.0, 0.01).unwrap();
        vs.add(Halfspace {
            normal: vec![1.0, 0.0],
            bound: 0.25,
            sense: Sense::Leq,
        })
        .unwrap();
        vs.add(Halfspace {
            normal: vec![1.0, 0.0],
            bound: 0.5,
            sense: Sense::Leq,
        })
        .unwrap();
        assert!(!vs.is_redundant(0).unwrap());
        assert!(vs.is_redundant(1).unwrap());
        let removed = vs.compact().unwrap();
        assert_eq!(removed, 1);
        assert_eq!(vs.len(), 1);
        let (lo, hi) = vs.interval(&[1.0, 0.0]).unwrap();
        assert!((lo + 1.0).abs() < 1e-12);
        assert!((hi - 0.25).abs() < 1e-12);
        assert_eq!(vs.compact().unwrap(), 0);
    }

    #[test]
    fn cap_prunes_superseded_cuts() {
        // dim 1, ratio 1/0.25 = 4 -> cap max(4*1*2, 4) = 8.
        let mut vs = VersionSpace::new(1, 1.0, 0.25).unwrap();
        for step in 0..20 {
            // Each tighter bound makes every earlier cut redundant.
            vs.add(Halfspace {
                normal: vec![1.0],
                bound: 0.9 - 0.04 * step as f64,
                sense: Sense::Leq,
            })
            .unwrap();
            assert!(vs.len() <= 8);
        }
        let (_, hi) = vs.interval(&[1.0]).unwrap();
        assert!((hi - (0.9 - 0.04 * 19.0)).abs() < 1e-12);
    }

    #[test]
    fn cap_is_a_hard_bound_even_for_irredundant_cuts() {
        // dim 2, eps^2 = 0.25 -> cap = 4 * 2 * log2(4) = 16.
        let mut vs = VersionSpace::new(2, 1.0, 0.25).unwrap();
        for step in 0..30 {
            // Tangent cuts to the circle of radius 0.5 at spread angles:
            // none of them is implied by the others.
            let th = step as f64 * 0.21;
            vs.add(Halfspace {
                normal: vec![th.cos(), th.sin()],
                bound: 0.5,
                sense: Sense::Leq,
            })
            .unwrap();
            assert!(vs.len() <= 16, "len {} at step {step}", vs.len());
            // The origin satisfies every cut ever issued, so eviction can
            // never push it out.
            assert!(vs.contains(&[0.0, 0.0], 0.0));
        }
    }

    #[test]
    fn converged_feedback_is_counted_but_not_stored() {
        let mut est = DistanceEstimator::new(2, 1.0, 0.01).unwrap();
        // Floor is eps^2 / 2 = 5e-3: a cut from a 1e-3-wide interval is
        // dropped, but the round still counts.
        assert!(!est
            .feedback_with_width(&[1.0, 0.0], 0.2, false, Some(0.2005), 1e-3)
            .unwrap());
        assert_eq!(est.space().len(), 0);
        assert_eq!(est.feedback_rounds(), 1);
        // A wide interval still cuts.
        est.feedback_with_width(&[1.0, 0.0], 0.2, false, Some(0.7), 0.5)
            .unwrap();
        assert_eq!(est.space().len(), 1);
        assert_eq!(est.feedback_rounds(), 2);
        // Mistake accounting ignores the storage decision.
        assert!(est
            .feedback_with_width(&[1.0, 0.0], 0.2, false, Some(0.5), 1e-3)
            .unwrap());
        assert_eq!(est.space().len(), 1);
        assert_eq!(est.valid_mistakes(), 2);
    }

    #[test]
    fn manager_round_trip_and_clamp() {
        let mut mgr = EstimatorManager::new(2, 2, 1.0, 0.01).unwrap();
        let ctx = ContextSet::new(vec![
            DVector::from_row_slice(&[1.0, 0.0]),
            DVector::from_row_slice(&[0.0, 0.0]),
        ])
        .unwrap();
        // Fresh guesses are zero, so distances are zero.
        let d_hat = mgr.estimate_distances(&ctx).unwrap();
        assert_eq!(d_hat.get(0, 1), 0.0);

        // A reported violation pushes the interval max down to the guess.
        let events = mgr
            .apply_oracle_round(&ctx, &set(&[(0, 1)]), &set(&[]), None)
            .unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].pair, (0, 1));
        assert!(events[0].too_large);
        let u = flatten_pair(ctx.get(0), ctx.get(1)).unwrap();
        let (lo, hi) = mgr.estimator(0, 1).space().interval(&u).unwrap();
        assert!((hi - 0.0).abs() < 1e-12);
        assert!(lo < -0.9);

        // The next guess along u is negative and clamps to distance zero.
        let d_hat = mgr.estimate_distances(&ctx).unwrap();
        assert_eq!(d_hat.get(0, 1), 0.0);
    }

    #[test]
    fn converged_interval_yields_sqrt() {
        let mut mgr = EstimatorManager::new(2, 2, 1.0, 0.01).unwrap();
        let ctx = ContextSet::new(vec![
            DVector::from_row_slice(&[1.0, 0.0]),
            DVector::from_row_slice(&[0.0, 0.0]),
        ])
        .unwrap();
        let u = flatten_pair(ctx.get(0), ctx.get(1)).unwrap();
        {
            let est = mgr.estimator_mut(0, 1);
            est.feedback(&u, 0.25, false, None).unwrap();
            est.feedback(&u, 0.25, true, None).unwrap();
        }
        let d_hat = mgr.estimate_distances(&ctx).unwrap();
        assert!((d_hat.get(0, 1) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn feedback_without_estimate_is_rejected() {
        let mut mgr = EstimatorManager::new(2, 2, 1.0, 0.01).unwrap();
        let ctx = ContextSet::new(vec![
            DVector::from_row_slice(&[1.0, 0.0]),
            DVector::from_row_slice(&[0.0, 1.0]),
        ])
        .unwrap();
        assert!(mgr
            .apply_oracle_round(&ctx, &set(&[]), &set(&[]), None)
            .is_err());
    }

    #[test]
    fn no_feedback_leaves_no_trace() {
        let mut mgr = EstimatorManager::new(3, 2, 1.0, 0.01).unwrap();
        let ctx = ContextSet::new(vec![
            DVector::from_row_slice(&[1.0, 0.0]),
            DVector::from_row_slice(&[0.0, 1.0]),
            DVector::from_row_slice(&[0.6, 0.8]),
        ])
        .unwrap();
        let first = mgr.estimate_distances(&ctx).unwrap();
        let events = mgr
            .apply_oracle_round(&ctx, &set(&[]), &set(&[]), None)
            .unwrap();
        assert!(events.is_empty());
        assert_eq!(mgr.total_feedback_rounds(), 0);
        let second = mgr.estimate_distances(&ctx).unwrap();
        assert_eq!(first.as_slice(), second.as_slice());
    }

    #[test]
    fn violated_takes_precedence_over_tight() {
        let mut mgr = EstimatorManager::new(2, 2, 1.0, 0.01).unwrap();
        let ctx = ContextSet::new(vec![
            DVector::from_row_slice(&[1.0, 0.0]),
            DVector::from_row_slice(&[0.0, 0.0]),
        ])
        .unwrap();
        mgr.estimate_distances(&ctx).unwrap();
        let events = mgr
            .apply_oracle_round(&ctx, &set(&[(0, 1)]), &set(&[(0, 1)]), None)
            .unwrap();
        assert_eq!(events.len(), 1);
        assert!(events[0].too_large);
        // A too-large cut lowers the max; the min stays at the box value.
        let u = flatten_pair(ctx.get(0), ctx.get(1)).unwrap();
        let (lo, hi) = mgr.estimator(0, 1).space().interval(&u).unwrap();
        assert!(hi <= 1e-12);
        assert!(lo < -0.9);
    }

    #[test]
    fn mistake_accounting_uses_truth() {
        let mut est = DistanceEstimator::new(1, 1.0, 0.01).unwrap();
        // Guess 0 against truth 0.5: off by more than 0.01.
        assert!(est.feedback(&[1.0], 0.0, false, Some(0.5)).unwrap());
        assert_eq!(est.valid_mistakes(), 1);
        // Guess 0.25 against truth 0.251: inside the working accuracy.
        assert!(!est.feedback(&[1.0], 0.25, false, Some(0.251)).unwrap());
        assert_eq!(est.valid_mistakes(), 1);
        assert_eq!(est.feedback_rounds(), 2);
        // Without truth the counter never moves.
        assert!(!est.feedback(&[1.0], 0.3, true, None).unwrap());
        assert_eq!(est.valid_mistakes(), 1);
        assert!(est.valid_mistakes() <= est.feedback_rounds());
    }

    /// Honest feedback drives a full simulation of one estimator: random
    /// directions from random context pairs, truth from a known metric.
    fn honest_run(
        seed: u64,
        rounds: usize,
        mut probe: impl FnMut(&DistanceEstimator, usize),
    ) -> (DistanceEstimator, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 2;
        let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-0.5..0.5));
        let metric = crate::geometry::MetricSpec::new(a).unwrap();
        let alpha: Vec<f64> = metric.g_flat().to_vec();
        let mut est = DistanceEstimator::new(d * d, 1.0, 1e-4).unwrap();
        for round in 0..rounds {
            let x1 = random_unit(&mut rng, d);
            let x2 = random_unit(&mut rng, d);
            let u = flatten_pair(&x1, &x2).unwrap();
            let g = est.guess(&u).unwrap();
            let truth: f64 = alpha.iter().zip(&u).map(|(a, b)| a * b).sum();
            est.feedback(&u, g, g > truth, Some(truth)).unwrap();
            assert!(
                est.space().contains(&alpha, 1e-9),
                "truth excluded at round {round}"
            );
            probe(&est, round);
        }
        (est, alpha)
    }

    fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
        loop {
            let v = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
            let n = v.norm();
            if n > 1e-3 {
                return v / n;
            }
        }
    }

    #[test]
    fn honest_feedback_never_excludes_truth() {
        for seed in [1, 2, 3] {
            honest_run(seed, 300, |_, _| {});
        }
    }

    #[test]
    fn intervals_nest_over_time() {
        let probe_u = vec![0.3, -0.7, 0.2, 0.9];
        let mut last = (f64::NEG_INFINITY, f64::INFINITY);
        honest_run(5, 200, |est, round| {
            let (lo, hi) = est.space().interval(&probe_u).unwrap();
            assert!(lo >= last.0 - 1e-9, "lo regressed at round {round}");
            assert!(hi <= last.1 + 1e-9, "hi regressed at round {round}");
            last = (lo, hi);
        });
    }

    #[test]
    fn repeated_direction_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0_f64..1.0)).collect();
        let truth = 0.137;
        let mut est = DistanceEstimator::new(4, 1.0, 1e-12).unwrap();
        for _ in 0..40 {
            let g = est.guess(&u).unwrap();
            est.feedback(&u, g, g > truth, None).unwrap();
        }
        let g = est.guess(&u).unwrap();
        assert!((g - truth).abs() < 1e-9, "final guess {g}");
    }

    #[test]
    fn compaction_preserves_every_guess() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut vs = VersionSpace::new(3, 1.0, 1e-6).unwrap();
        for step in 0..40 {
            let normal: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0_f64..1.0)).collect();
            let (lo, hi) = vs.interval(&normal).unwrap();
            let g = 0.5 * (lo + hi);
            vs.add(Halfspace {
                normal,
                bound: g,
                sense: if step % 2 == 0 {
                    Sense::Leq
                } else {
                    Sense::Geq
                },
            })
            .unwrap();
        }
        let probes: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0_f64..1.0)).collect())
            .collect();
        let before: Vec<(f64, f64)> = probes.iter().map(|p| vs.interval(p).unwrap()).collect();
        vs.compact().unwrap();
        for (p, (lo, hi)) in probes.iter().zip(&before) {
            let (lo2, hi2) = vs.interval(p).unwrap();
            assert!((lo - lo2).abs() < 1e-9);
            assert!((hi - hi2).abs() < 1e-9);
        }
    }
}
