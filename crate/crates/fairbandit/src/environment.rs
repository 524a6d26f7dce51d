//! Ground-truth simulation: context generation, noisy linear rewards, the
//! exact fairness oracle, and the best-fair-policy benchmark.
//!
//! Everything here is a pure function of (spec, seed, round): contexts for
//! round t come from their own ChaCha stream keyed by t, and the reward /
//! action randomness of a run lives on a reserved stream handed out by
//! simulation_rng, so replaying a config byte-identically is just a matter
//! of replaying the calls in the same order.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::fair_lp::{solve_fair_lp, LpInstance, LpMode};
use crate::geometry::{true_distance_vector, ContextSet, MetricSpec};
use crate::pairs::{PairSet, PairVec};

/// Comparisons against the strict oracle inequality get this guard so exact
/// boundary vertices (|p_i - p_j| = cap = distance) never read as violations
/// under rounding.
pub const ORACLE_GUARD: f64 = 1e-12;

/// Where each round's contexts come from.
#[derive(Debug, Clone)]
pub enum ContextGenerator {
    /// k fresh uniform unit vectors per round.
    IidUnitSphere { k: usize },
    /// Cycles the supplied sets: round t plays sets[(t-1) % len].
    FixedCycle(Vec<ContextSet>),
    /// Replays the supplied sets once; running past the end is an error.
    AdversarialScript(Vec<ContextSet>),
}

/// Ground truth for one simulated world.
#[derive(Debug, Clone)]
pub struct EnvironmentSpec {
    theta: DVector<f64>,
    metric: MetricSpec,
    noise_sigma: f64,
    generator: ContextGenerator,
    seed: u64,
    k: usize,
}

impl EnvironmentSpec {
    pub fn new(
        theta: DVector<f64>,
        metric: MetricSpec,
        noise_sigma: f64,
        generator: ContextGenerator,
        seed: u64,
    ) -> Result<Self> {
        let d = theta.len();
        if d == 0 {
            return Err(Error::InvalidInput("theta must have dimension >= 1".into()));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("theta has non-finite entries".into()));
        }
        if theta.norm() > 1.0 + 1e-12 {
            return Err(Error::InvalidInput(format!(
                "theta norm {} > 1",
                theta.norm()
            )));
        }
        if metric.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: metric.dim(),
            });
        }
        if !noise_sigma.is_finite() || noise_sigma < 0.0 {
            return Err(Error::InvalidInput(format!(
                "noise level must be >= 0, got {noise_sigma}"
            )));
        }
        let k = match &generator {
            ContextGenerator::IidUnitSphere { k } => {
                if *k < 2 {
                    return Err(Error::InvalidInput(format!("need k >= 2 arms, got {k}")));
                }
                *k
            }
            ContextGenerator::FixedCycle(sets) | ContextGenerator::AdversarialScript(sets) => {
                let first = sets
                    .first()
                    .ok_or_else(|| Error::InvalidInput("context list is empty".into()))?;
                for s in sets {
                    if s.k() != first.k() {
                        return Err(Error::InvalidInput(
                            "context sets disagree on the number of arms".into(),
                        ));
                    }
                    if s.dim() != d {
                        return Err(Error::DimensionMismatch {
                            expected: d,
                            got: s.dim(),
                        });
                    }
                }
                first.k()
            }
        };
        Ok(EnvironmentSpec {
            theta,
            metric,
            noise_sigma,
            generator,
            seed,
            k,
        })
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn metric(&self) -> &MetricSpec {
        &self.metric
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn generator(&self) -> &ContextGenerator {
        &self.generator
    }

    /// Script length when the generator is a finite replay.
    pub fn script_len(&self) -> Option<usize> {
        match &self.generator {
            ContextGenerator::AdversarialScript(sets) => Some(sets.len()),
            _ => None,
        }
    }

    /// The contexts of round t (1-based). Pure in (spec, seed, t).
    pub fn next_contexts(&self, t: u64) -> Result<ContextSet> {
        if t == 0 {
            return Err(Error::InvalidInput("rounds are 1-based".into()));
        }
        match &self.generator {
            ContextGenerator::IidUnitSphere { k } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(t);
                let d = self.dim();
                let vectors = (0..*k).map(|_| random_unit(&mut rng, d)).collect();
                ContextSet::new(vectors)
            }
            ContextGenerator::FixedCycle(sets) => {
                Ok(sets[((t - 1) % sets.len() as u64) as usize].clone())
            }
            ContextGenerator::AdversarialScript(sets) => {
                let idx = (t - 1) as usize;
                if idx >= sets.len() {
                    return Err(Error::ScriptExhausted {
                        round: t,
                        len: sets.len(),
                    });
                }
                Ok(sets[idx].clone())
            }
        }
    }

    /// Mean reward of every arm: <theta, x_i>.
    pub fn mean_rewards(&self, ctx: &ContextSet) -> Vec<f64> {
        ctx.vectors().iter().map(|x| self.theta.dot(x)).collect()
    }

    /// One noisy reward draw for a pulled context.
    pub fn sample_reward(&self, x: &DVector<f64>, rng: &mut impl Rng) -> f64 {
        let noise = if self.noise_sigma > 0.0 {
            Normal::new(0.0, self.noise_sigma).unwrap().sample(rng)
        } else {
            0.0
        };
        self.theta.dot(x) + noise
    }

    /// True pairwise distances for the round.
    pub fn true_distances(&self, ctx: &ContextSet) -> Result<PairVec> {
        true_distance_vector(&self.metric, ctx)
    }

    /// All pairs whose probability gap strictly exceeds the true distance.
    pub fn oracle_violations(&self, ctx: &ContextSet, policy: &[f64]) -> Result<PairSet> {
        let d_true = self.true_distances(ctx)?;
        Ok(unfair_pairs(policy, &d_true, 0.0))
    }

    /// Value of the best policy that is fair against the true distances.
    pub fn best_fair_value(&self, ctx: &ContextSet, mode: LpMode) -> Result<f64> {
        let inst = LpInstance::new(self.mean_rewards(ctx), self.true_distances(ctx)?, mode)?;
        Ok(solve_fair_lp(&inst)?.objective)
    }

    /// Pairs on which the policy is unfair by more than eps.
    pub fn epsilon_unfair_count(
        &self,
        ctx: &ContextSet,
        policy: &[f64],
        eps: f64,
    ) -> Result<usize> {
        if eps < 0.0 {
            return Err(Error::InvalidInput(format!(
                "unfairness slack must be >= 0, got {eps}"
            )));
        }
        let d_true = self.true_distances(ctx)?;
        Ok(unfair_pairs(policy, &d_true, eps).len())
    }
}

/// Pairs with |p_i - p_j| > d + eps, all under the shared oracle guard so
/// the eps = 0 case is exactly the oracle's violation set.
fn unfair_pairs(policy: &[f64], distances: &PairVec, eps: f64) -> PairSet {
    let mut out = PairSet::new();
    for ((i, j), d) in distances.iter() {
        if (policy[i] - policy[j]).abs() > d + eps + ORACLE_GUARD {
            out.insert((i, j));
        }
    }
    out
}

/// The RNG stream a run draws its actions and reward noise from. Contexts
/// use streams numbered by round (1-based), so stream 0 is free for this.
pub fn simulation_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| {
            let z: f64 = rand_distr::StandardNormal.sample(rng);
            z
        });
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}
