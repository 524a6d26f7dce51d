//! The three learner loops: known reward parameter, full (estimated rewards
//! with confidence widths), and the multi-action variant.
//!
//! Every loop follows the same round shape: estimate pairwise distances,
//! solve the fairness LP on the round's reward inputs, sample from the
//! resulting policy, observe rewards, then feed the oracle's response back
//! into the distance estimators (and, in the full modes, every observed
//! reward into the ridge state). The environment argument supplies exactly
//! the two services the protocol grants a learner: reward draws and the
//! fairness oracle. Ground truth for mistake accounting is threaded through
//! as an optional extra so simulations can count what a deployment couldn't.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::environment::EnvironmentSpec;
use crate::error::{Error, Result};
use crate::fair_lp::{solve_fair_lp, LpInstance, LpMode};
use crate::geometry::ContextSet;
use crate::metric_learner::{EstimatorManager, FeedbackEvent};
use crate::pairs::{PairSet, PairVec};
use crate::reward_ucb::{ucb_rewards, RidgeState};

/// Which loop a learner runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    KnownTheta,
    Full,
    FullMulti,
}

impl Algorithm {
    pub fn lp_mode(self) -> LpMode {
        match self {
            Algorithm::KnownTheta | Algorithm::Full => LpMode::Single,
            Algorithm::FullMulti => LpMode::Multi,
        }
    }
}

/// What was pulled this round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Chosen {
    /// Sampled arm, or None when the residual 1 - sum(p) mass came up.
    Single(Option<usize>),
    /// Independently sampled subset of arms.
    Multi(Vec<usize>),
}

/// Everything the learner committed to in one round, before nature answered.
#[derive(Debug, Clone)]
pub struct RoundDecision {
    pub policy: Vec<f64>,
    pub chosen: Chosen,
    pub distance_estimates: PairVec,
    /// The LP objective vector: mean rewards (known theta) or clamped
    /// upper-confidence rewards (full modes).
    pub reward_inputs: Vec<f64>,
    /// Point estimates behind reward_inputs; equals reward_inputs when no
    /// widths exist.
    pub estimates: Vec<f64>,
    /// Confidence widths, present only in the full modes.
    pub widths: Option<Vec<f64>>,
    pub tight_pairs: PairSet,
}

/// A decision plus everything nature answered with.
#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub decision: RoundDecision,
    /// (arm, reward) for every pull this round.
    pub observed: Vec<(usize, f64)>,
    pub violations: PairSet,
    pub feedback: Vec<FeedbackEvent>,
}

/// Append-only record of a run as the learner saw it.
#[derive(Debug, Clone, Default)]
pub struct HistoryEntry {
    pub policy: Vec<f64>,
    pub chosen: Option<Chosen>,
    pub observed: Vec<(usize, f64)>,
    pub violations: PairSet,
}

#[derive(Debug, Clone, Default)]
pub struct History {
    entries: Vec<HistoryEntry>,
}

impl History {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[HistoryEntry] {
        &self.entries
    }
}

#[derive(Debug, Clone)]
pub struct Learner {
    algorithm: Algorithm,
    estimators: EstimatorManager,
    ridge: Option<RidgeState>,
    history: History,
    rounds_elapsed: u64,
}

impl Learner {
    pub fn known_theta(k: usize, d: usize, box_radius: f64, epsilon_sq: f64) -> Result<Self> {
        Ok(Learner {
            algorithm: Algorithm::KnownTheta,
            estimators: EstimatorManager::new(k, d, box_radius, epsilon_sq)?,
            ridge: None,
            history: History::default(),
            rounds_elapsed: 0,
        })
    }

    pub fn full(
        k: usize,
        d: usize,
        box_radius: f64,
        epsilon_sq: f64,
        lambda: f64,
        delta: f64,
    ) -> Result<Self> {
        Ok(Learner {
            algorithm: Algorithm::Full,
            estimators: EstimatorManager::new(k, d, box_radius, epsilon_sq)?,
            ridge: Some(RidgeState::new(d, lambda, delta)?),
            history: History::default(),
            rounds_elapsed: 0,
        })
    }

    pub fn full_multi(
        k: usize,
        d: usize,
        box_radius: f64,
        epsilon_sq: f64,
        lambda: f64,
        delta: f64,
    ) -> Result<Self> {
        let mut learner = Learner::full(k, d, box_radius, epsilon_sq, lambda, delta)?;
        learner.algorithm = Algorithm::FullMulti;
        Ok(learner)
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn rounds_elapsed(&self) -> u64 {
        self.rounds_elapsed
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn estimators(&self) -> &EstimatorManager {
        &self.estimators
    }

    /// For tests and diagnostics that need to craft estimator state.
    pub fn estimators_mut(&mut self) -> &mut EstimatorManager {
        &mut self.estimators
    }

    pub fn ridge(&self) -> Option<&RidgeState> {
        self.ridge.as_ref()
    }

    /// One round of the known-parameter loop: LP on the true mean rewards.
    pub fn step_known_theta(
        &mut self,
        env: &EnvironmentSpec,
        ctx: &ContextSet,
        theta: &DVector<f64>,
        rng: &mut ChaCha8Rng,
        truth_sq: Option<&PairVec>,
    ) -> Result<RoundOutcome> {
        if self.algorithm != Algorithm::KnownTheta {
            return Err(Error::InvalidInput(
                "this learner does not run the known-parameter loop".into(),
            ));
        }
        if theta.norm() > 1.0 + 1e-12 {
            return Err(Error::InvalidInput(format!(
                "theta norm {} > 1",
                theta.norm()
            )));
        }
        let mean: Vec<f64> = ctx.vectors().iter().map(|x| theta.dot(x)).collect();
        self.run_round(env, ctx, mean.clone(), mean, None, rng, truth_sq)
    }

    /// One round of the full loop: LP on upper-confidence rewards, pulled
    /// reward into the ridge state.
    pub fn step_full(
        &mut self,
        env: &EnvironmentSpec,
        ctx: &ContextSet,
        rng: &mut ChaCha8Rng,
        truth_sq: Option<&PairVec>,
    ) -> Result<RoundOutcome> {
        if self.algorithm != Algorithm::Full {
            return Err(Error::InvalidInput(
                "this learner does not run the full single-action loop".into(),
            ));
        }
        self.optimistic_round(env, ctx, rng, truth_sq)
    }

    /// One round of the multi-action loop: every arm pulled independently
    /// with its policy probability, one ridge update per pull.
    pub fn step_multi(
        &mut self,
        env: &EnvironmentSpec,
        ctx: &ContextSet,
        rng: &mut ChaCha8Rng,
        truth_sq: Option<&PairVec>,
    ) -> Result<RoundOutcome> {
        if self.algorithm != Algorithm::FullMulti {
            return Err(Error::InvalidInput(
                "this learner does not run the multi-action loop".into(),
            ));
        }
        self.optimistic_round(env, ctx, rng, truth_sq)
    }

    fn optimistic_round(
        &mut self,
        env: &EnvironmentSpec,
        ctx: &ContextSet,
        rng: &mut ChaCha8Rng,
        truth_sq: Option<&PairVec>,
    ) -> Result<RoundOutcome> {
        let t = self.rounds_elapsed + 1;
        let ridge = self
            .ridge
            .as_ref()
            .ok_or_else(|| Error::Internal("optimistic loop without ridge state".into()))?;
        let (r_hat, widths) = ucb_rewards(ridge, ctx.vectors(), t)?;
        let estimates: Vec<f64> = r_hat.iter().zip(&widths).map(|(r, w)| r - w).collect();
        self.run_round(env, ctx, r_hat, estimates, Some(widths), rng, truth_sq)
    }

    #[allow(clippy::too_many_arguments)]
    fn run_round(
        &mut self,
        env: &EnvironmentSpec,
        ctx: &ContextSet,
        reward_inputs: Vec<f64>,
        estimates: Vec<f64>,
        widths: Option<Vec<f64>>,
        rng: &mut ChaCha8Rng,
        truth_sq: Option<&PairVec>,
    ) -> Result<RoundOutcome> {
        let mode = self.algorithm.lp_mode();
        let distance_estimates = self.estimators.estimate_distances(ctx)?;

        // Point estimates are unbounded in principle (regression tails), so
        // the upper-confidence inputs are clamped to the LP's reward range.
        // True means live in [-1, 1], so a clamp at the top never drags an
        // upper bound below the truth it covers.
        let clamped: Vec<f64> = reward_inputs.iter().map(|r| r.clamp(-2.0, 2.0)).collect();
        let inst = LpInstance::new(clamped.clone(), distance_estimates.clone(), mode)?;
        let sol = solve_fair_lp(&inst)?;

        let chosen = match mode {
            LpMode::Single => Chosen::Single(sample_single(&sol.policy, rng)),
            LpMode::Multi => Chosen::Multi(sample_multi(&sol.policy, rng)),
        };

        let mut observed = Vec::new();
        match &chosen {
            Chosen::Single(Some(i)) => {
                observed.push((*i, env.sample_reward(ctx.get(*i), rng)));
            }
            Chosen::Single(None) => {}
            Chosen::Multi(pulled) => {
                for &i in pulled {
                    observed.push((i, env.sample_reward(ctx.get(i), rng)));
                }
            }
        }
        if let Some(ridge) = self.ridge.as_mut() {
            for (i, r) in &observed {
                ridge.update(ctx.get(*i), *r)?;
            }
        }

        let violations = env.oracle_violations(ctx, &sol.policy)?;
        let feedback =
            self.estimators
                .apply_oracle_round(ctx, &violations, &sol.tight_pairs, truth_sq)?;

        self.rounds_elapsed += 1;
        self.history.entries.push(HistoryEntry {
            policy: sol.policy.clone(),
            chosen: Some(chosen.clone()),
            observed: observed.clone(),
            violations: violations.clone(),
        });

        Ok(RoundOutcome {
            decision: RoundDecision {
                policy: sol.policy,
                chosen,
                distance_estimates,
                reward_inputs: clamped,
                estimates,
                widths,
                tight_pairs: sol.tight_pairs,
            },
            observed,
            violations,
            feedback,
        })
    }
}

/// Draws one arm from a sub-distribution; the missing mass maps to None.
pub fn sample_single(policy: &[f64], rng: &mut impl Rng) -> Option<usize> {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (i, p) in policy.iter().enumerate() {
        cum += p.max(0.0);
        if u < cum {
            return Some(i);
        }
    }
    None
}

/// Pulls each arm independently with its own probability.
pub fn sample_multi(policy: &[f64], rng: &mut impl Rng) -> Vec<usize> {
    let mut pulled = Vec::new();
    for (i, p) in policy.iter().enumerate() {
        let u: f64 = rng.random();
        if u < p.clamp(0.0, 1.0) {
            pulled.push(i);
        }
    }
    pulled
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{simulation_rng, ContextGenerator};
    use crate::geometry::{flatten_pair, MetricSpec};
    use crate::pairs::pairs;
    use nalgebra::DMatrix;
    use rand::SeedableRng;

    fn ctx(rows: &[&[f64]]) -> ContextSet {
        ContextSet::new(rows.iter().map(|r| DVector::from_row_slice(r)).collect()).unwrap()
    }

    fn env_with_metric(theta: &[f64], a: DMatrix<f64>, k: usize, sigma: f64) -> EnvironmentSpec {
        EnvironmentSpec::new(
            DVector::from_row_slice(theta),
            MetricSpec::new(a).unwrap(),
            sigma,
            ContextGenerator::IidUnitSphere { k },
            1,
        )
        .unwrap()
    }

    #[test]
    fn fresh_known_theta_splits_evenly() {
        let env = env_with_metric(&[1.0, 0.0], DMatrix::identity(2, 2), 2, 0.0);
        let mut learner = Learner::known_theta(2, 2, 1.0, 0.01).unwrap();
        let mut rng = simulation_rng(1);
        let c = ctx(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let theta = DVector::from_row_slice(&[1.0, 0.0]);
        let out = learner
            .step_known_theta(&env, &c, &theta, &mut rng, None)
            .unwrap();
        // Fresh distance estimates are zero, so the LP forces equality and
        // the positive total reward fills the budget.
        assert!((out.decision.policy[0] - 0.5).abs() < 1e-9);
        assert!((out.decision.policy[1] - 0.5).abs() < 1e-9);
        assert_eq!(out.decision.reward_inputs, vec![1.0, 0.0]);
        assert!(out.decision.widths.is_none());
        assert_eq!(learner.rounds_elapsed(), 1);
        assert_eq!(learner.history().len(), 1);
    }

    #[test]
    fn converged_estimates_free_the_best_arm() {
        let env = env_with_metric(&[1.0, 0.0], DMatrix::identity(2, 2), 2, 0.0);
        let mut learner = Learner::known_theta(2, 2, 1.0, 0.01).unwrap();
        let c = ctx(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let theta = DVector::from_row_slice(&[1.0, 0.0]);
        // Pin the pair's squared-distance interval at 2 (distance sqrt(2)).
        let u = flatten_pair(c.get(0), c.get(1)).unwrap();
        {
            let est = learner.estimators_mut().estimator_mut(0, 1);
            est.feedback(&u, 2.0, false, None).unwrap();
            est.feedback(&u, 2.0, true, None).unwrap();
        }
        let mut rng = simulation_rng(2);
        let out = learner
            .step_known_theta(&env, &c, &theta, &mut rng, None)
            .unwrap();
        assert!((out.decision.distance_estimates.get(0, 1) - 2.0_f64.sqrt()).abs() < 1e-9);
        assert!((out.decision.policy[0] - 1.0).abs() < 1e-9);
        assert!(out.decision.policy[1].abs() < 1e-9);
        // The cap exceeds the true distance sqrt(2)... equals it, so the
        // probability gap of 1 stays within the oracle's guard.
        assert!(out.violations.is_empty());
    }

    #[test]
    fn first_full_round_is_uniform() {
        let env = env_with_metric(&[0.6, 0.0, 0.0], DMatrix::identity(3, 3), 3, 1.0);
        let mut learner = Learner::full(3, 3, 1.0, 0.01, 1.0, 0.05).unwrap();
        let mut rng = simulation_rng(3);
        let c = ctx(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let out = learner.step_full(&env, &c, &mut rng, None).unwrap();
        for p in &out.decision.policy {
            assert!((p - 1.0 / 3.0).abs() < 1e-9);
        }
        assert_eq!(out.decision.reward_inputs, vec![1.0, 1.0, 1.0]);
        assert_eq!(out.decision.widths.as_deref(), Some(&[1.0, 1.0, 1.0][..]));
        // Exactly one arm pulled (uniform policy sums to 1), one ridge obs.
        assert_eq!(out.observed.len(), 1);
        assert_eq!(learner.ridge().unwrap().n_obs(), 1);
    }

    #[test]
    fn zero_context_stays_at_zero_confidence() {
        let env = env_with_metric(&[1.0, 0.0], DMatrix::identity(2, 2), 2, 0.5);
        let mut learner = Learner::full(2, 2, 1.0, 0.01, 1.0, 0.05).unwrap();
        let mut rng = simulation_rng(4);
        let c = ctx(&[&[1.0, 0.0], &[0.0, 0.0]]);
        for _ in 0..30 {
            let out = learner.step_full(&env, &c, &mut rng, None).unwrap();
            let w = out.decision.widths.as_ref().unwrap();
            assert_eq!(w[1], 0.0);
            assert_eq!(out.decision.reward_inputs[1], 0.0);
        }
    }

    #[test]
    fn fresh_multi_round_pulls_everything() {
        let env = env_with_metric(&[0.6, 0.0, 0.0], DMatrix::identity(3, 3), 3, 1.0);
        let mut learner = Learner::full_multi(3, 3, 1.0, 0.01, 1.0, 0.05).unwrap();
        let mut rng = simulation_rng(5);
        let c = ctx(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let out = learner.step_multi(&env, &c, &mut rng, None).unwrap();
        // Zero caps force equal probabilities; optimistic rewards are all 1,
        // so every probability saturates at 1 and every arm is pulled.
        assert_eq!(out.decision.policy, vec![1.0, 1.0, 1.0]);
        assert_eq!(out.decision.chosen, Chosen::Multi(vec![0, 1, 2]));
        assert_eq!(out.observed.len(), 3);
        assert_eq!(learner.ridge().unwrap().n_obs(), 3);
    }

    #[test]
    fn identical_contexts_never_violate() {
        let env = env_with_metric(&[0.9, 0.1], DMatrix::identity(2, 2) * 0.3, 3, 0.0);
        let mut learner = Learner::full(3, 2, 1.0, 0.01, 1.0, 0.05).unwrap();
        let mut rng = simulation_rng(6);
        let same = ctx(&[&[0.6, 0.8], &[0.6, 0.8], &[0.6, 0.8]]);
        for _ in 0..10 {
            let out = learner.step_full(&env, &same, &mut rng, None).unwrap();
            assert!(out.violations.is_empty());
            // All distances are zero, so the policy must be exactly level.
            let p = &out.decision.policy;
            assert!((p[0] - p[1]).abs() < 1e-12 && (p[1] - p[2]).abs() < 1e-12);
        }
    }

    #[test]
    fn policies_respect_estimated_caps() {
        let env = env_with_metric(&[0.8, -0.4, 0.2], DMatrix::identity(3, 3) * 0.25, 4, 1.0);
        let mut learner = Learner::full(4, 3, 1.0, 0.0025, 1.0, 0.05).unwrap();
        let mut rng = simulation_rng(7);
        for t in 1..=60 {
            let c = env.next_contexts(t).unwrap();
            let out = learner.step_full(&env, &c, &mut rng, None).unwrap();
            for (i, j) in pairs(4) {
                let gap = (out.decision.policy[i] - out.decision.policy[j]).abs();
                assert!(gap <= out.decision.distance_estimates.get(i, j) + 1e-9);
            }
        }
    }

    #[test]
    fn wrong_loop_is_rejected() {
        let env = env_with_metric(&[1.0, 0.0], DMatrix::identity(2, 2), 2, 0.0);
        let c = ctx(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let theta = DVector::from_row_slice(&[1.0, 0.0]);
        let mut rng = simulation_rng(8);
        let mut full = Learner::full(2, 2, 1.0, 0.01, 1.0, 0.05).unwrap();
        assert!(full
            .step_known_theta(&env, &c, &theta, &mut rng, None)
            .is_err());
        let mut known = Learner::known_theta(2, 2, 1.0, 0.01).unwrap();
        assert!(known.step_full(&env, &c, &mut rng, None).is_err());
        assert!(known.step_multi(&env, &c, &mut rng, None).is_err());
    }

    #[test]
    fn single_sampling_matches_probabilities() {
        let policy = [0.35, 0.15, 0.3]; // residual mass 0.2
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let mut counts = [0u32; 4];
        for _ in 0..n {
            match sample_single(&policy, &mut rng) {
                Some(i) => counts[i] += 1,
                None => counts[3] += 1,
            }
        }
        for (idx, p) in [0.35, 0.15, 0.3, 0.2].iter().enumerate() {
            let expect = p * n as f64;
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            assert!(
                (counts[idx] as f64 - expect).abs() < 3.0 * sigma,
                "slot {idx}: {} vs {expect}",
                counts[idx]
            );
        }
    }

    #[test]
    fn multi_sampling_matches_probabilities() {
        let policy = [1.0, 0.0, 0.4];
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let n = 100_000;
        let mut counts = [0u32; 3];
        for _ in 0..n {
            for i in sample_multi(&policy, &mut rng) {
                counts[i] += 1;
            }
        }
        assert_eq!(counts[0], n); // certainty is certainty
        assert_eq!(counts[1], 0);
        let sigma = (n as f64 * 0.4 * 0.6).sqrt();
        assert!((counts[2] as f64 - 0.4 * n as f64).abs() < 3.0 * sigma);
    }
}
