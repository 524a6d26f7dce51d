//! Per-run accounting: regret against the per-round fair optimum, fairness
//! loss at three tolerance levels, the mistake/feedback round partition, and
//! the width martingale diagnostic.
//!
//! Everything here is pure post-processing over immutable round logs, so it
//! parallelizes trivially across runs.

use crate::error::{Error, Result};
use crate::fair_lp::LpMode;
use crate::pairs::PairSet;

/// One round as the accountant sees it.
///
/// Cumulative columns are running sums of their instantaneous counterparts;
/// the accumulator owns that arithmetic so logs can't drift from it.
#[derive(Debug, Clone)]
pub struct RoundLog {
    /// 1-based round index.
    pub t: u64,
    /// LP optimum under the true rewards and true distances.
    pub best_fair_value: f64,
    /// Expected value of the played policy under the true rewards.
    pub policy_value: f64,
    /// best_fair_value - policy_value; negative rounds happen early, when
    /// underestimated caps force more exploration than the benchmark needs.
    pub inst_regret: f64,
    pub cum_regret: f64,
    /// Pairs whose probability gap beat their true distance by more than the
    /// configured tolerance, plus the same count at half and double that
    /// tolerance for sensitivity without rerunning.
    pub unfair_pairs: usize,
    pub unfair_pairs_half: usize,
    pub unfair_pairs_double: usize,
    pub cum_fairness_loss: u64,
    /// Pairs the oracle flagged this round.
    pub violations: usize,
    /// Pairs whose estimators received feedback this round.
    pub feedback_pairs: PairSet,
    /// Some flagged pair's distance estimate was off by more than the
    /// tolerance: the rounds the per-round gap bound can't cover.
    pub in_s1: bool,
    /// Realized width mass of this round's pulls (zero without a pull).
    pub width_pulled: f64,
    /// Width mass the policy expected to pull, absent for known-parameter
    /// runs that carry no confidence state.
    pub width_expected: Option<f64>,
    /// Worst distance-estimate error across all pairs this round.
    pub d_hat_max_err: f64,
    /// Feedback events whose guess missed the true inner product by more
    /// than the working accuracy.
    pub mistakes: u32,
    /// Pulled arms this round, and how many had the true mean outside the
    /// confidence interval.
    pub ci_events: u32,
    pub ci_misses: u32,
}

/// Raw per-round measurements; the accumulator derives the rest.
#[derive(Debug, Clone)]
pub struct RawRound {
    pub best_fair_value: f64,
    pub policy_value: f64,
    pub unfair_pairs: usize,
    pub unfair_pairs_half: usize,
    pub unfair_pairs_double: usize,
    pub violations: usize,
    pub feedback_pairs: PairSet,
    pub in_s1: bool,
    pub width_pulled: f64,
    pub width_expected: Option<f64>,
    pub d_hat_max_err: f64,
    pub mistakes: u32,
    pub ci_events: u32,
    pub ci_misses: u32,
}

/// Builds the round log, owning the running sums.
#[derive(Debug, Clone, Default)]
pub struct Accumulator {
    logs: Vec<RoundLog>,
    cum_regret: f64,
    cum_fairness: u64,
}

impl Accumulator {
    pub fn new() -> Self {
        Accumulator::default()
    }

    pub fn push_round(&mut self, raw: RawRound) -> &RoundLog {
        let inst_regret = raw.best_fair_value - raw.policy_value;
        self.cum_regret += inst_regret;
        self.cum_fairness += raw.unfair_pairs as u64;
        self.logs.push(RoundLog {
            t: self.logs.len() as u64 + 1,
            best_fair_value: raw.best_fair_value,
            policy_value: raw.policy_value,
            inst_regret,
            cum_regret: self.cum_regret,
            unfair_pairs: raw.unfair_pairs,
            unfair_pairs_half: raw.unfair_pairs_half,
            unfair_pairs_double: raw.unfair_pairs_double,
            cum_fairness_loss: self.cum_fairness,
            violations: raw.violations,
            feedback_pairs: raw.feedback_pairs,
            in_s1: raw.in_s1,
            width_pulled: raw.width_pulled,
            width_expected: raw.width_expected,
            d_hat_max_err: raw.d_hat_max_err,
            mistakes: raw.mistakes,
            ci_events: raw.ci_events,
            ci_misses: raw.ci_misses,
        });
        self.logs.last().expect("just pushed")
    }

    pub fn logs(&self) -> &[RoundLog] {
        &self.logs
    }

    pub fn into_logs(self) -> Vec<RoundLog> {
        self.logs
    }
}

/// Everything the width-sum bound depends on.
#[derive(Debug, Clone, Copy)]
pub struct BoundParams {
    pub mode: LpMode,
    pub k: usize,
    pub d: usize,
    pub lambda: f64,
    pub delta: f64,
}

/// Closed-form cap on the total realized width of pulled arms over a run.
///
/// Single mode:
///   sqrt(2d log(1 + T/(d lambda))) (sqrt(2dT log((1+T/lambda)/delta)) + sqrt(T lambda))
/// Multi mode replaces the per-round pull count, so every T becomes kT and
/// the leading factor picks up a k:
///   k sqrt(2d log(1 + kT/(d lambda))) sqrt(2dkT log((1+kT/lambda)/delta)) + sqrt(kT lambda)
pub fn width_sum_bound(params: &BoundParams, rounds: u64) -> f64 {
    let d = params.d as f64;
    let lambda = params.lambda;
    let delta = params.delta;
    let t = rounds as f64;
    match params.mode {
        LpMode::Single => {
            (2.0 * d * (1.0 + t / (d * lambda)).ln()).sqrt()
                * ((2.0 * d * t * ((1.0 + t / lambda) / delta).ln()).sqrt() + (t * lambda).sqrt())
        }
        LpMode::Multi => {
            let k = params.k as f64;
            let n = k * t;
            k * (2.0 * d * (1.0 + n / (d * lambda)).ln()).sqrt()
                * (2.0 * d * n * ((1.0 + n / lambda) / delta).ln()).sqrt()
                + (n * lambda).sqrt()
        }
    }
}

/// Per-arm cap on the sum of squared regularized-design norms of pulled
/// contexts in a multi-action run: 2d log(1 + kT/(d lambda)). The elliptic
/// potential argument bounds the squared sum over all pulls, hence over any
/// one arm's subsequence.
pub fn per_arm_norm_sq_bound(params: &BoundParams, rounds: u64) -> f64 {
    let d = params.d as f64;
    let n = params.k as f64 * rounds as f64;
    2.0 * d * (1.0 + n / (d * params.lambda)).ln()
}

/// Terminal threshold for the width martingale at confidence delta.
pub fn martingale_threshold(rounds: u64, delta: f64) -> f64 {
    (2.0 * rounds as f64 * (1.0 / delta).ln()).sqrt()
}

/// Run totals plus the growth-rate diagnostics the sublinear claims predict.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub rounds: u64,
    pub cumulative_regret: f64,
    pub fairness_loss: u64,
    pub fairness_loss_half_eps: u64,
    pub fairness_loss_double_eps: u64,
    pub s1_count: u64,
    pub valid_mistakes_total: u64,
    pub width_sum: f64,
    pub width_sum_bound: f64,
    /// Terminal martingale value; absent when the run carried no widths.
    pub martingale_terminal: Option<f64>,
    pub martingale_threshold: f64,
    pub regret_first_half: f64,
    pub regret_second_half: f64,
    pub fairness_first_half: u64,
    pub fairness_second_half: u64,
    pub mistakes_by_quarter: [u64; 4],
    pub unfair_by_quarter: [u64; 4],
    pub s1_by_quarter: [u64; 4],
    pub regret_by_quarter: [f64; 4],
    pub ci_events: u64,
    pub ci_misses: u64,
}

/// Index of the quarter a 0-based round index falls in.
fn quarter(idx: usize, total: usize) -> usize {
    (idx * 4 / total).min(3)
}

/// Collapses a complete run into totals and growth diagnostics.
pub fn finalize_run(logs: &[RoundLog], params: &BoundParams) -> Result<RunSummary> {
    if logs.is_empty() {
        return Err(Error::EmptyLog);
    }
    let t_total = logs.len();
    let half = t_total / 2;
    let mut summary = RunSummary {
        rounds: t_total as u64,
        cumulative_regret: logs.last().expect("nonempty").cum_regret,
        fairness_loss: logs.last().expect("nonempty").cum_fairness_loss,
        fairness_loss_half_eps: 0,
        fairness_loss_double_eps: 0,
        s1_count: 0,
        valid_mistakes_total: 0,
        width_sum: 0.0,
        width_sum_bound: width_sum_bound(params, t_total as u64),
        martingale_terminal: None,
        martingale_threshold: martingale_threshold(t_total as u64, params.delta),
        regret_first_half: 0.0,
        regret_second_half: 0.0,
        fairness_first_half: 0,
        fairness_second_half: 0,
        mistakes_by_quarter: [0; 4],
        unfair_by_quarter: [0; 4],
        s1_by_quarter: [0; 4],
        regret_by_quarter: [0.0; 4],
        ci_events: 0,
        ci_misses: 0,
    };
    for (idx, log) in logs.iter().enumerate() {
        let q = quarter(idx, t_total);
        summary.fairness_loss_half_eps += log.unfair_pairs_half as u64;
        summary.fairness_loss_double_eps += log.unfair_pairs_double as u64;
        if log.in_s1 {
            summary.s1_count += 1;
            summary.s1_by_quarter[q] += 1;
        }
        summary.valid_mistakes_total += log.mistakes as u64;
        summary.width_sum += log.width_pulled;
        summary.mistakes_by_quarter[q] += log.mistakes as u64;
        summary.unfair_by_quarter[q] += log.unfair_pairs as u64;
        summary.regret_by_quarter[q] += log.inst_regret;
        if idx < half {
            summary.regret_first_half += log.inst_regret;
            summary.fairness_first_half += log.unfair_pairs as u64;
        } else {
            summary.regret_second_half += log.inst_regret;
            summary.fairness_second_half += log.unfair_pairs as u64;
        }
        summary.ci_events += log.ci_events as u64;
        summary.ci_misses += log.ci_misses as u64;
    }
    if logs.iter().all(|l| l.width_expected.is_some()) {
        summary.martingale_terminal = martingale_diag(logs)?.last().copied();
    }
    Ok(summary)
}

/// Running difference between expected and realized pulled width,
/// D^t = sum over s <= t of (E[w under the policy] - realized w).
///
/// An empty prefix has nothing to accumulate and yields an empty series.
pub fn martingale_diag(logs: &[RoundLog]) -> Result<Vec<f64>> {
    let mut series = Vec::with_capacity(logs.len());
    let mut d = 0.0;
    for log in logs {
        let expected = log.width_expected.ok_or(Error::MissingWidths)?;
        d += expected - log.width_pulled;
        series.push(d);
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{simulation_rng, ContextGenerator, EnvironmentSpec};
    use crate::geometry::MetricSpec;
    use crate::policies::{Chosen, Learner};
    use nalgebra::{DMatrix, DVector};

    fn raw(best: f64, value: f64, unfair: usize) -> RawRound {
        RawRound {
            best_fair_value: best,
            policy_value: value,
            unfair_pairs: unfair,
            unfair_pairs_half: unfair,
            unfair_pairs_double: 0,
            violations: 0,
            feedback_pairs: PairSet::new(),
            in_s1: false,
            width_pulled: 0.0,
            width_expected: Some(0.0),
            d_hat_max_err: 0.0,
            mistakes: 0,
            ci_events: 0,
            ci_misses: 0,
        }
    }

    fn params() -> BoundParams {
        BoundParams {
            mode: LpMode::Single,
            k: 4,
            d: 3,
            lambda: 1.0,
            delta: 0.05,
        }
    }

    #[test]
    fn empty_run_is_rejected() {
        assert!(matches!(finalize_run(&[], &params()), Err(Error::EmptyLog)));
    }

    #[test]
    fn cumulative_columns_are_running_sums() {
        let mut acc = Accumulator::new();
        let rounds = [(1.0, 0.4, 2), (0.8, 0.9, 0), (0.5, 0.5, 1)];
        for (b, v, u) in rounds {
            acc.push_round(raw(b, v, u));
        }
        let logs = acc.into_logs();
        let mut regret = 0.0;
        let mut fairness = 0u64;
        for log in &logs {
            regret += log.inst_regret;
            fairness += log.unfair_pairs as u64;
            assert!((log.cum_regret - regret).abs() < 1e-12);
            assert_eq!(log.cum_fairness_loss, fairness);
            assert!((log.inst_regret - (log.best_fair_value - log.policy_value)).abs() < 1e-15);
        }
        // The second round's benchmark trails the realized value, so its
        // instantaneous regret must come out negative.
        assert!(logs[1].inst_regret < 0.0);
        let summary = finalize_run(&logs, &params()).unwrap();
        assert!((summary.cumulative_regret - regret).abs() < 1e-9);
        assert_eq!(summary.fairness_loss, fairness);
        assert_eq!(
            summary.fairness_loss,
            logs.iter().map(|l| l.unfair_pairs as u64).sum::<u64>()
        );
    }

    #[test]
    fn halves_and_quarters_partition_the_run() {
        let mut acc = Accumulator::new();
        for i in 0..100 {
            let mut r = raw(1.0, 0.0, i % 3);
            r.mistakes = u32::from(i < 10);
            r.in_s1 = i < 5;
            acc.push_round(r);
        }
        let summary = finalize_run(acc.logs(), &params()).unwrap();
        assert_eq!(summary.rounds, 100);
        assert!(
            (summary.regret_first_half + summary.regret_second_half - summary.cumulative_regret)
                .abs()
                < 1e-9
        );
        assert_eq!(
            summary.fairness_first_half + summary.fairness_second_half,
            summary.fairness_loss
        );
        assert_eq!(summary.mistakes_by_quarter, [10, 0, 0, 0]);
        assert_eq!(summary.s1_by_quarter, [5, 0, 0, 0]);
        assert_eq!(
            summary.unfair_by_quarter.iter().sum::<u64>(),
            summary.fairness_loss
        );
        assert_eq!(summary.valid_mistakes_total, 10);
        assert_eq!(summary.s1_count, 5);
    }

    #[test]
    fn martingale_zero_for_deterministic_policies() {
        // Point-mass policy: the expected pulled width equals the realized
        // width every round, so the series never leaves zero.
        let mut acc = Accumulator::new();
        for _ in 0..50 {
            let mut r = raw(1.0, 1.0, 0);
            r.width_pulled = 0.37;
            r.width_expected = Some(0.37);
            acc.push_round(r);
        }
        let series = martingale_diag(acc.logs()).unwrap();
        assert_eq!(series.len(), 50);
        for d in series {
            assert!(d.abs() < 1e-12);
        }
    }

    #[test]
    fn martingale_rejects_runs_without_widths() {
        let mut acc = Accumulator::new();
        let mut r = raw(1.0, 1.0, 0);
        r.width_expected = None;
        acc.push_round(r);
        assert!(matches!(
            martingale_diag(acc.logs()),
            Err(Error::MissingWidths)
        ));
        // finalize still works; it just carries no terminal value.
        let summary = finalize_run(acc.logs(), &params()).unwrap();
        assert!(summary.martingale_terminal.is_none());
    }

    #[test]
    fn empty_martingale_prefix_is_empty() {
        assert_eq!(martingale_diag(&[]).unwrap(), Vec::<f64>::new());
    }

    #[test]
    fn bound_formulas_match_hand_evaluation() {
        let p = params();
        let t = 20000u64;
        let single = width_sum_bound(&p, t);
        let d: f64 = 3.0;
        let tf: f64 = 20000.0;
        let expect = (2.0 * d * (1.0 + tf / (d * 1.0)).ln()).sqrt()
            * ((2.0 * d * tf * ((1.0 + tf) / 0.05).ln()).sqrt() + tf.sqrt());
        assert!((single - expect).abs() < 1e-9);
        let multi = width_sum_bound(
            &BoundParams {
                mode: LpMode::Multi,
                ..p
            },
            t,
        );
        let n = 4.0 * tf;
        let expect_m = 4.0
            * (2.0 * d * (1.0 + n / (d * 1.0)).ln()).sqrt()
            * (2.0 * d * n * ((1.0 + n) / 0.05).ln()).sqrt()
            + n.sqrt();
        assert!((multi - expect_m).abs() < 1e-9);
        let per_arm = per_arm_norm_sq_bound(&p, t);
        assert!((per_arm - 2.0 * d * (1.0 + n / d).ln()).abs() < 1e-9);
        assert!(martingale_threshold(t, 0.1) > 0.0);
    }

    #[test]
    fn known_theta_two_arm_run_flattens_out() {
        // A metric so slack the caps never bind once learned: after the
        // estimators discover the caps clear 1, the learner plays the point
        // mass on the best arm and the final quarter accrues zero regret.
        let theta = DVector::from_row_slice(&[1.0, 0.0]);
        let metric = MetricSpec::new(DMatrix::identity(2, 2) * 10.0).unwrap();
        let cycle = vec![crate::geometry::ContextSet::new(vec![
            DVector::from_row_slice(&[1.0, 0.0]),
            DVector::from_row_slice(&[0.0, 1.0]),
        ])
        .unwrap()];
        let env = EnvironmentSpec::new(
            theta.clone(),
            metric,
            0.0,
            ContextGenerator::FixedCycle(cycle),
            7,
        )
        .unwrap();
        let mut learner = Learner::known_theta(2, 2, 100.0, 0.01).unwrap();
        let mut rng = simulation_rng(7);
        let mut acc = Accumulator::new();
        for t in 1..=200 {
            let ctx = env.next_contexts(t).unwrap();
            let best = env.best_fair_value(&ctx, LpMode::Single).unwrap();
            let mean = env.mean_rewards(&ctx);
            let out = learner
                .step_known_theta(&env, &ctx, &theta, &mut rng, None)
                .unwrap();
            let value: f64 = mean
                .iter()
                .zip(&out.decision.policy)
                .map(|(r, p)| r * p)
                .sum();
            let mut r = raw(best, value, 0);
            r.width_expected = None;
            r.violations = out.violations.len();
            acc.push_round(r);
        }
        let summary = finalize_run(acc.logs(), &params()).unwrap();
        assert_eq!(summary.regret_by_quarter[3], 0.0);
        assert!(summary.cumulative_regret > 0.0); // the uniform opening round
        assert!(summary.cumulative_regret < 1.0);
        // Convergence also means the point mass is in play by the end.
        let last = learner.history().entries().last().unwrap().clone();
        assert_eq!(last.policy, vec![1.0, 0.0]);
        assert!(matches!(last.chosen, Some(Chosen::Single(Some(0)))));
    }
}
