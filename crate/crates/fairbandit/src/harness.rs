//! Config-driven experiment execution: parse and validate a TOML config,
//! run each seed's T-round loop, and emit per-round CSV plus summary JSON
//! with bit-stable numeric columns.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::environment::{simulation_rng, ContextGenerator, EnvironmentSpec};
use crate::error::{Error, Result};
use crate::fair_lp::LpMode;
use crate::geometry::{true_squared_vector, ContextSet, MetricSpec};
use crate::metrics::{
    finalize_run, per_arm_norm_sq_bound, Accumulator, BoundParams, RawRound, RoundLog, RunSummary,
};
use crate::pairs::PairSet;
use crate::policies::{Chosen, Learner};

/// Version-space intervals come out of finite-precision LP solves, and the
/// solver's tight window lets a "not too large" cut overshoot the true inner
/// product by roughly the window times the distance scale. Containment of
/// the truth is therefore asserted with slack on that order.
pub const CONTAINMENT_TOL: f64 = 1e-6;

/// A flagged pair's guess must strictly exceed the true inner product; the
/// only wiggle room needed is dot-product rounding.
pub const SOUNDNESS_SLACK: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmChoice {
    KnownTheta,
    Full,
    FullMulti,
}

impl AlgorithmChoice {
    pub fn lp_mode(self) -> LpMode {
        match self {
            AlgorithmChoice::KnownTheta | AlgorithmChoice::Full => LpMode::Single,
            AlgorithmChoice::FullMulti => LpMode::Multi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextKind {
    IidUnitSphere,
    FixedCycle,
    AdversarialScript,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    /// True reward parameter, one entry per context dimension.
    pub theta: Vec<f64>,
    /// Rows of the metric matrix A; distances are |A x1 - A x2|.
    pub metric: Vec<Vec<f64>>,
    pub contexts: ContextKind,
    /// Context sets for the cycle and script generators, one k-by-d block
    /// per round.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: AlgorithmChoice,
    pub k: usize,
    pub d: usize,
    pub rounds: u64,
    /// Fairness tolerance the run is accounted at.
    pub epsilon: f64,
    /// Estimator working accuracy; defaults to epsilon squared.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_sq: Option<f64>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_sigma")]
    pub noise_sigma: f64,
    /// Version-space box radius; must cover every Gram entry of the metric.
    #[serde(default = "default_box_radius")]
    pub box_radius: f64,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub environment: EnvironmentConfig,
}

fn default_lambda() -> f64 {
    1.0
}

fn default_delta() -> f64 {
    0.05
}

fn default_sigma() -> f64 {
    1.0
}

fn default_box_radius() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn effective_epsilon_sq(&self) -> f64 {
        self.epsilon_sq.unwrap_or(self.epsilon * self.epsilon)
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

pub fn config_to_toml(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string_pretty(cfg).map_err(|e| Error::Config(e.to_string()))
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// One violated invariant: which field, and what it must satisfy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub field: String,
    pub constraint: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.constraint)
    }
}

fn diag(list: &mut Vec<Diagnostic>, field: &str, constraint: impl Into<String>) {
    list.push(Diagnostic {
        field: field.into(),
        constraint: constraint.into(),
    });
}

/// Checks every config invariant; an empty list means the config is runnable.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if cfg.k < 2 {
        diag(&mut out, "k", "must be at least 2");
    }
    if cfg.d == 0 {
        diag(&mut out, "d", "must be at least 1");
    }
    if cfg.rounds == 0 {
        diag(&mut out, "rounds", "must be at least 1");
    }
    if !(cfg.epsilon >= 0.0 && cfg.epsilon.is_finite()) {
        diag(&mut out, "epsilon", "must be finite and nonnegative");
    }
    match cfg.epsilon_sq {
        Some(e) if !(e > 0.0 && e.is_finite()) => {
            diag(&mut out, "epsilon_sq", "must be finite and positive");
        }
        None if !(cfg.epsilon > 0.0) => {
            diag(
                &mut out,
                "epsilon",
                "must be positive unless epsilon_sq is set",
            );
        }
        _ => {}
    }
    if !(cfg.lambda > 0.0 && cfg.lambda.is_finite()) {
        diag(&mut out, "lambda", "must be finite and positive");
    }
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        diag(&mut out, "delta", "must lie strictly between 0 and 1");
    }
    if !(cfg.noise_sigma >= 0.0 && cfg.noise_sigma.is_finite()) {
        diag(&mut out, "noise_sigma", "must be finite and nonnegative");
    }
    if !(cfg.box_radius > 0.0 && cfg.box_radius.is_finite()) {
        diag(&mut out, "box_radius", "must be finite and positive");
    }
    if cfg.seeds.is_empty() {
        diag(&mut out, "seeds", "must list at least one seed");
    }
    let mut sorted = cfg.seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != cfg.seeds.len() {
        diag(
            &mut out,
            "seeds",
            "must be distinct (each seed names its output files)",
        );
    }
    if cfg.output_dir.as_os_str().is_empty() {
        diag(&mut out, "output_dir", "must not be empty");
    }

    let env = &cfg.environment;
    if env.theta.len() != cfg.d {
        diag(
            &mut out,
            "environment.theta",
            format!("must have d = {} entries", cfg.d),
        );
    }
    if env.theta.iter().any(|v| !v.is_finite()) {
        diag(&mut out, "environment.theta", "entries must be finite");
    } else {
        let norm: f64 = env.theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1.0 + 1e-12 {
            diag(&mut out, "environment.theta", "norm must be at most 1");
        }
    }
    let metric_shape_ok =
        env.metric.len() == cfg.d && env.metric.iter().all(|row| row.len() == cfg.d);
    if !metric_shape_ok {
        diag(
            &mut out,
            "environment.metric",
            format!("must be a {} x {} matrix", cfg.d, cfg.d),
        );
    } else if env.metric.iter().flatten().any(|v| !v.is_finite()) {
        diag(&mut out, "environment.metric", "entries must be finite");
    } else if let Ok(metric) = build_metric(cfg) {
        // The version space starts as a box; every Gram entry must be inside
        // it or the truth is unlearnable from round one.
        if metric.max_abs_gram() > cfg.box_radius + 1e-12 {
            diag(
                &mut out,
                "environment.metric",
                "every entry of the Gram matrix A'A must fit within box_radius",
            );
        }
    }

    match env.contexts {
        ContextKind::IidUnitSphere => {
            if env.script.is_some() {
                diag(
                    &mut out,
                    "environment.script",
                    "only applies to fixed_cycle and adversarial_script contexts",
                );
            }
        }
        ContextKind::FixedCycle | ContextKind::AdversarialScript => match &env.script {
            None => diag(
                &mut out,
                "environment.script",
                "required for fixed_cycle and adversarial_script contexts",
            ),
            Some(script) => {
                if script.is_empty() {
                    diag(&mut out, "environment.script", "must not be empty");
                }
                if env.contexts == ContextKind::AdversarialScript
                    && (script.len() as u64) < cfg.rounds
                {
                    diag(
                        &mut out,
                        "environment.script",
                        format!(
                            "must cover all rounds (need {}, have {})",
                            cfg.rounds,
                            script.len()
                        ),
                    );
                }
                for (idx, set) in script.iter().enumerate() {
                    if set.len() != cfg.k {
                        diag(
                            &mut out,
                            "environment.script",
                            format!("entry {idx} must have k = {} contexts", cfg.k),
                        );
                        break;
                    }
                    if set.iter().any(|x| x.len() != cfg.d) {
                        diag(
                            &mut out,
                            "environment.script",
                            format!("entry {idx} contexts must have d = {} entries", cfg.d),
                        );
                        break;
                    }
                    if set
                        .iter()
                        .any(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt() > 1.0 + 1e-12)
                    {
                        diag(
                            &mut out,
                            "environment.script",
                            format!("entry {idx} contexts must have norm at most 1"),
                        );
                        break;
                    }
                }
            }
        },
    }
    out
}

fn build_metric(cfg: &ExperimentConfig) -> Result<MetricSpec> {
    let d = cfg.d;
    let rows = &cfg.environment.metric;
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Config(format!(
            "environment.metric: must be a {d} x {d} matrix"
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    MetricSpec::new(DMatrix::from_row_slice(d, d, &flat))
}

fn build_script(cfg: &ExperimentConfig) -> Result<Vec<ContextSet>> {
    let script = cfg.environment.script.as_ref().ok_or_else(|| {
        Error::Config("environment.script: required for this context kind".into())
    })?;
    script
        .iter()
        .map(|set| ContextSet::new(set.iter().map(|x| DVector::from_row_slice(x)).collect()))
        .collect()
}

pub fn build_environment(cfg: &ExperimentConfig, seed: u64) -> Result<EnvironmentSpec> {
    let generator = match cfg.environment.contexts {
        ContextKind::IidUnitSphere => ContextGenerator::IidUnitSphere { k: cfg.k },
        ContextKind::FixedCycle => ContextGenerator::FixedCycle(build_script(cfg)?),
        ContextKind::AdversarialScript => ContextGenerator::AdversarialScript(build_script(cfg)?),
    };
    EnvironmentSpec::new(
        DVector::from_row_slice(&cfg.environment.theta),
        build_metric(cfg)?,
        cfg.noise_sigma,
        generator,
        seed,
    )
}

pub fn build_learner(cfg: &ExperimentConfig) -> Result<Learner> {
    let eps_sq = cfg.effective_epsilon_sq();
    match cfg.algorithm {
        AlgorithmChoice::KnownTheta => Learner::known_theta(cfg.k, cfg.d, cfg.box_radius, eps_sq),
        AlgorithmChoice::Full => {
            Learner::full(cfg.k, cfg.d, cfg.box_radius, eps_sq, cfg.lambda, cfg.delta)
        }
        AlgorithmChoice::FullMulti => {
            Learner::full_multi(cfg.k, cfg.d, cfg.box_radius, eps_sq, cfg.lambda, cfg.delta)
        }
    }
}

/// Everything one seed produced: the round log, its summary, and the
/// truth-side checks only a simulation can run.
#[derive(Debug, Clone)]
pub struct SeedReport {
    pub seed: u64,
    pub logs: Vec<RoundLog>,
    pub summary: RunSummary,
    /// Rounds after which some version space no longer contained the true
    /// Gram vector.
    pub containment_failures: u64,
    /// Oracle-flagged pairs whose guess did not exceed the true inner
    /// product.
    pub soundness_failures: u64,
    /// Multi-action runs: per arm, the sum of squared regularized-design
    /// norms of that arm's pulled contexts, against its closed-form cap.
    pub per_arm_norm_sq: Option<Vec<f64>>,
    pub per_arm_norm_sq_bound: Option<f64>,
}

/// Runs the full T-round loop for one seed and accounts every round.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedReport> {
    let env = build_environment(cfg, seed)?;
    let mut learner = build_learner(cfg)?;
    let theta = DVector::from_row_slice(&cfg.environment.theta);
    let mode = cfg.algorithm.lp_mode();
    let g_flat = env.metric().g_flat().to_vec();
    let mut rng = simulation_rng(seed);
    let mut acc = Accumulator::new();
    let mut containment_failures = 0u64;
    let mut soundness_failures = 0u64;
    let mut per_arm_norm_sq = vec![0.0f64; cfg.k];

    for t in 1..=cfg.rounds {
        let ctx = env.next_contexts(t)?;
        let truth_sq = true_squared_vector(env.metric(), &ctx)?;
        let d_true = env.true_distances(&ctx)?;
        let mean = env.mean_rewards(&ctx);
        let best = env.best_fair_value(&ctx, mode)?;
        let pre_quads: Option<Vec<f64>> = match learner.ridge() {
            Some(ridge) => Some(
                ctx.vectors()
                    .iter()
                    .map(|x| ridge.vinv_quad(x))
                    .collect::<Result<Vec<f64>>>()?,
            ),
            None => None,
        };

        let out = match cfg.algorithm {
            AlgorithmChoice::KnownTheta => {
                learner.step_known_theta(&env, &ctx, &theta, &mut rng, Some(&truth_sq))?
            }
            AlgorithmChoice::Full => learner.step_full(&env, &ctx, &mut rng, Some(&truth_sq))?,
            AlgorithmChoice::FullMulti => {
                learner.step_multi(&env, &ctx, &mut rng, Some(&truth_sq))?
            }
        };

        let policy_value: f64 = mean
            .iter()
            .zip(&out.decision.policy)
            .map(|(r, p)| r * p)
            .sum();
        let unfair = env.epsilon_unfair_count(&ctx, &out.decision.policy, cfg.epsilon)?;
        let unfair_half =
            env.epsilon_unfair_count(&ctx, &out.decision.policy, cfg.epsilon / 2.0)?;
        let unfair_double =
            env.epsilon_unfair_count(&ctx, &out.decision.policy, cfg.epsilon * 2.0)?;

        let mut d_hat_max_err = 0.0f64;
        for ((i, j), dh) in out.decision.distance_estimates.iter() {
            d_hat_max_err = d_hat_max_err.max((dh - d_true.get(i, j)).abs());
        }
        let in_s1 = out.feedback.iter().any(|e| {
            let (i, j) = e.pair;
            (out.decision.distance_estimates.get(i, j) - d_true.get(i, j)).abs() > cfg.epsilon
        });

        let width_pulled = match (&out.decision.chosen, &out.decision.widths) {
            (_, None) | (Chosen::Single(None), _) => 0.0,
            (Chosen::Single(Some(i)), Some(w)) => w[*i],
            (Chosen::Multi(pulled), Some(w)) => pulled.iter().map(|&i| w[i]).sum(),
        };
        let width_expected = out.decision.widths.as_ref().map(|w| {
            w.iter()
                .zip(&out.decision.policy)
                .map(|(wi, p)| wi * p)
                .sum()
        });

        let (mut ci_events, mut ci_misses) = (0u32, 0u32);
        if let Some(w) = &out.decision.widths {
            for (i, _) in &out.observed {
                ci_events += 1;
                if (mean[*i] - out.decision.estimates[*i]).abs() > w[*i] {
                    ci_misses += 1;
                }
            }
        }

        for e in &out.feedback {
            let (i, j) = e.pair;
            if e.too_large && e.guess <= truth_sq.get(i, j) - SOUNDNESS_SLACK {
                soundness_failures += 1;
            }
        }
        if !learner
            .estimators()
            .contains_truth(&g_flat, CONTAINMENT_TOL)
        {
            containment_failures += 1;
        }
        if let (Some(quads), Chosen::Multi(pulled)) = (&pre_quads, &out.decision.chosen) {
            for &i in pulled {
                per_arm_norm_sq[i] += quads[i];
            }
        }

        acc.push_round(RawRound {
            best_fair_value: best,
            policy_value,
            unfair_pairs: unfair,
            unfair_pairs_half: unfair_half,
            unfair_pairs_double: unfair_double,
            violations: out.violations.len(),
            feedback_pairs: out.feedback.iter().map(|e| e.pair).collect::<PairSet>(),
            in_s1,
            width_pulled,
            width_expected,
            d_hat_max_err,
            mistakes: out.feedback.iter().filter(|e| e.valid_mistake).count() as u32,
            ci_events,
            ci_misses,
        });
    }

    let params = BoundParams {
        mode,
        k: cfg.k,
        d: cfg.d,
        lambda: cfg.lambda,
        delta: cfg.delta,
    };
    let logs = acc.into_logs();
    let summary = finalize_run(&logs, &params)?;
    let is_multi = mode == LpMode::Multi;
    Ok(SeedReport {
        seed,
        logs,
        summary,
        containment_failures,
        soundness_failures,
        per_arm_norm_sq: is_multi.then_some(per_arm_norm_sq),
        per_arm_norm_sq_bound: is_multi.then(|| per_arm_norm_sq_bound(&params, cfg.rounds)),
    })
}

pub const CSV_HEADER: &str = "t,best_fair_value,policy_value,inst_regret,cum_regret,unfair_pairs,cum_fairness_loss,violations,in_s1,width_pulled,d_hat_max_err";

fn csv_bytes(logs: &[RoundLog]) -> Vec<u8> {
    use std::fmt::Write as _;
    let mut text = String::with_capacity(64 + logs.len() * 160);
    text.push_str(CSV_HEADER);
    text.push('\n');
    for log in logs {
        // 17 significant digits round-trip every f64 exactly.
        writeln!(
            text,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{},{},{:.16e},{:.16e}",
            log.t,
            log.best_fair_value,
            log.policy_value,
            log.inst_regret,
            log.cum_regret,
            log.unfair_pairs,
            log.cum_fairness_loss,
            log.violations,
            u8::from(log.in_s1),
            log.width_pulled,
            log.d_hat_max_err,
        )
        .expect("writing to a String cannot fail");
    }
    text.into_bytes()
}

fn summary_json(report: &SeedReport) -> serde_json::Value {
    let s = &report.summary;
    let mut value = json!({
        "seed": report.seed,
        "rounds": s.rounds,
        "cumulative_regret": s.cumulative_regret,
        "fairness_loss": s.fairness_loss,
        "fairness_loss_half_eps": s.fairness_loss_half_eps,
        "fairness_loss_double_eps": s.fairness_loss_double_eps,
        "s1_count": s.s1_count,
        "valid_mistakes_total": s.valid_mistakes_total,
        "width_sum": s.width_sum,
        "width_sum_bound": s.width_sum_bound,
        "martingale_terminal": s.martingale_terminal,
        "martingale_threshold": s.martingale_threshold,
        "regret_first_half": s.regret_first_half,
        "regret_second_half": s.regret_second_half,
        "fairness_first_half": s.fairness_first_half,
        "fairness_second_half": s.fairness_second_half,
        "quarters": {
            "regret": s.regret_by_quarter,
            "unfair_pairs": s.unfair_by_quarter,
            "mistakes": s.mistakes_by_quarter,
            "s1": s.s1_by_quarter,
        },
        "ci_events": s.ci_events,
        "ci_misses": s.ci_misses,
        "containment_failures": report.containment_failures,
        "soundness_failures": report.soundness_failures,
    });
    if let (Some(norms), Some(bound)) = (&report.per_arm_norm_sq, report.per_arm_norm_sq_bound) {
        let map = value.as_object_mut().expect("summary is an object");
        map.insert("per_arm_norm_sq".into(), json!(norms));
        map.insert("per_arm_norm_sq_bound".into(), json!(bound));
    }
    value
}

fn aggregate_json(cfg: &ExperimentConfig, reports: &[SeedReport]) -> serde_json::Value {
    let n = reports.len() as f64;
    let mean = |f: &dyn Fn(&SeedReport) -> f64| reports.iter().map(|r| f(r)).sum::<f64>() / n;
    json!({
        "algorithm": cfg.algorithm,
        "k": cfg.k,
        "d": cfg.d,
        "rounds": cfg.rounds,
        "epsilon": cfg.epsilon,
        "seeds": reports.iter().map(summary_json).collect::<Vec<_>>(),
        "mean": {
            "cumulative_regret": mean(&|r| r.summary.cumulative_regret),
            "fairness_loss": mean(&|r| r.summary.fairness_loss as f64),
            "s1_count": mean(&|r| r.summary.s1_count as f64),
            "valid_mistakes_total": mean(&|r| r.summary.valid_mistakes_total as f64),
            "width_sum": mean(&|r| r.summary.width_sum),
        },
    })
}

/// Writes through a same-directory temp file so a crash never leaves a
/// half-written artifact under the final name.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp_name = path.as_os_str().to_owned();
    tmp_name.push(".tmp");
    let tmp = PathBuf::from(tmp_name);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_seed_outputs(dir: &Path, report: &SeedReport) -> Result<()> {
    write_atomic(
        &dir.join(format!("rounds_{}.csv", report.seed)),
        &csv_bytes(&report.logs),
    )?;
    let mut json = serde_json::to_vec_pretty(&summary_json(report))
        .map_err(|e| Error::Internal(e.to_string()))?;
    json.push(b'\n');
    write_atomic(&dir.join(format!("summary_{}.json", report.seed)), &json)
}

/// Runs every seed (in a pool bounded by `jobs`), writing artifacts per seed
/// plus the aggregate summary. Returns the reports in seed-list order.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<Vec<SeedReport>> {
    let diags = validate(cfg);
    if !diags.is_empty() {
        let rendered: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
        return Err(Error::Config(rendered.join("; ")));
    }
    fs::create_dir_all(&cfg.output_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Internal(e.to_string()))?;
    let reports: Result<Vec<SeedReport>> = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| {
                let report = run_seed(cfg, seed)?;
                write_seed_outputs(&cfg.output_dir, &report)?;
                Ok(report)
            })
            .collect()
    });
    let reports = reports?;
    let mut json = serde_json::to_vec_pretty(&aggregate_json(cfg, &reports))
        .map_err(|e| Error::Internal(e.to_string()))?;
    json.push(b'\n');
    write_atomic(&cfg.output_dir.join("summary.json"), &json)?;
    Ok(reports)
}

/// Ready-made configurations.
pub mod presets {
    use super::*;

    fn scaled_identity(d: usize, scale: f64) -> Vec<Vec<f64>> {
        (0..d)
            .map(|i| (0..d).map(|j| if i == j { scale } else { 0.0 }).collect())
            .collect()
    }

    /// Theta spread evenly across coordinates at norm 0.9.
    fn default_theta(d: usize) -> Vec<f64> {
        let v = 0.9 / (d as f64).sqrt();
        (0..d).map(|i| if i % 2 == 0 { v } else { -v }).collect()
    }

    /// The parameterization the regret analysis is stated at:
    /// epsilon = 1/(k^3 T), lambda = 1, delta = 0.05.
    pub fn paper_defaults(k: usize, d: usize, rounds: u64) -> ExperimentConfig {
        let epsilon = 1.0 / ((k * k * k) as f64 * rounds as f64);
        ExperimentConfig {
            algorithm: AlgorithmChoice::Full,
            k,
            d,
            rounds,
            epsilon,
            epsilon_sq: None,
            lambda: 1.0,
            delta: 0.05,
            noise_sigma: 1.0,
            box_radius: 1.0,
            seeds: vec![1, 2, 3],
            output_dir: PathBuf::from("out"),
            environment: EnvironmentConfig {
                theta: default_theta(d),
                metric: scaled_identity(d, 0.3),
                contexts: ContextKind::IidUnitSphere,
                script: None,
            },
        }
    }

    /// Small enough to run interactively, large enough that the asymptotics
    /// show: k=4, d=3, T=20000, epsilon=0.05. The metric is 0.3 times the
    /// identity so the fairness caps actually bind on unit-sphere contexts.
    pub fn desk_scale() -> ExperimentConfig {
        let mut cfg = paper_defaults(4, 3, 20000);
        cfg.epsilon = 0.05;
        cfg.seeds = (1..=10).collect();
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn presets_validate_cleanly_and_round_trip() {
        for cfg in [presets::desk_scale(), presets::paper_defaults(3, 2, 500)] {
            assert!(validate(&cfg).is_empty());
            let text = config_to_toml(&cfg).unwrap();
            let back = parse_config(&text).unwrap();
            assert!(validate(&back).is_empty());
            assert_eq!(back.k, cfg.k);
            assert_eq!(back.rounds, cfg.rounds);
            assert_eq!(back.environment.theta, cfg.environment.theta);
            assert_eq!(back.lambda, cfg.lambda);
        }
    }

    #[test]
    fn validate_names_the_offending_field() {
        let mut cfg = presets::desk_scale();
        cfg.delta = 1.5;
        let diags = validate(&cfg);
        assert!(diags.iter().any(|d| d.field == "delta"));

        let mut cfg = presets::desk_scale();
        cfg.k = 1;
        assert!(validate(&cfg).iter().any(|d| d.field == "k"));

        let mut cfg = presets::desk_scale();
        cfg.environment.theta = vec![1.0, 1.0, 1.0];
        assert!(validate(&cfg)
            .iter()
            .any(|d| d.field == "environment.theta"));

        let mut cfg = presets::desk_scale();
        cfg.environment.metric = vec![vec![2.0, 0.0, 0.0]; 3].clone();
        let mut m = cfg.environment.metric.clone();
        m[1] = vec![0.0, 2.0, 0.0];
        m[2] = vec![0.0, 0.0, 2.0];
        cfg.environment.metric = m;
        // Gram entries reach 4, past the unit box.
        assert!(validate(&cfg)
            .iter()
            .any(|d| d.field == "environment.metric"));

        let mut cfg = presets::desk_scale();
        cfg.epsilon = 0.0;
        assert!(validate(&cfg).iter().any(|d| d.field == "epsilon"));
        cfg.epsilon_sq = Some(1e-6);
        assert!(validate(&cfg).is_empty());
    }

    #[test]
    fn script_lengths_are_checked() {
        let mut cfg = presets::desk_scale();
        cfg.rounds = 5;
        cfg.environment.contexts = ContextKind::AdversarialScript;
        cfg.environment.script = Some(vec![
            vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
                vec![0.5, 0.5, 0.0],
            ];
            3
        ]);
        let diags = validate(&cfg);
        assert!(diags
            .iter()
            .any(|d| d.field == "environment.script" && d.constraint.contains("need 5")));
        cfg.environment.contexts = ContextKind::FixedCycle;
        assert!(validate(&cfg).is_empty()); // cycles wrap, any length works
    }

    #[test]
    fn unknown_keys_are_rejected_at_parse() {
        let text = config_to_toml(&presets::desk_scale()).unwrap() + "\nbogus_knob = 3\n";
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("bogus_knob"));
    }

    #[test]
    fn single_round_summary_equals_its_row() {
        let mut cfg = presets::desk_scale();
        cfg.algorithm = AlgorithmChoice::KnownTheta;
        cfg.rounds = 1;
        cfg.noise_sigma = 0.0;
        let report = run_seed(&cfg, 11).unwrap();
        assert_eq!(report.logs.len(), 1);
        assert!((report.summary.cumulative_regret - report.logs[0].inst_regret).abs() < 1e-15);
        assert!(report.summary.martingale_terminal.is_none());
    }

    #[test]
    fn seed_rerun_is_byte_identical() {
        let mut cfg = presets::desk_scale();
        cfg.rounds = 40;
        let a = csv_bytes(&run_seed(&cfg, 5).unwrap().logs);
        let b = csv_bytes(&run_seed(&cfg, 5).unwrap().logs);
        assert_eq!(a, b);
        let c = csv_bytes(&run_seed(&cfg, 6).unwrap().logs);
        assert_ne!(a, c); // different seed, different draws
    }

    #[test]
    fn experiment_writes_all_artifacts() {
        let dir = tempdir().unwrap();
        let mut cfg = presets::desk_scale();
        cfg.rounds = 25;
        cfg.seeds = vec![1, 2, 3];
        cfg.output_dir = dir.path().to_path_buf();
        let reports = run_experiment(&cfg, Some(1)).unwrap();
        assert_eq!(reports.len(), 3);
        for seed in [1u64, 2, 3] {
            let csv = fs::read_to_string(dir.path().join(format!("rounds_{seed}.csv"))).unwrap();
            assert!(csv.starts_with(CSV_HEADER));
            assert_eq!(csv.lines().count(), 26);
            let summary: serde_json::Value = serde_json::from_str(
                &fs::read_to_string(dir.path().join(format!("summary_{seed}.json"))).unwrap(),
            )
            .unwrap();
            assert_eq!(summary["rounds"], 25);
            assert_eq!(summary["containment_failures"], 0);
            assert_eq!(summary["soundness_failures"], 0);
        }
        let aggregate: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
                .unwrap();
        assert_eq!(aggregate["seeds"].as_array().unwrap().len(), 3);
        assert!(aggregate["mean"]["cumulative_regret"].is_f64());
        // No temp files left behind.
        assert!(fs::read_dir(dir.path()).unwrap().all(|e| !e
            .unwrap()
            .file_name()
            .to_string_lossy()
            .ends_with(".tmp")));
    }

    #[test]
    fn multi_runs_carry_per_arm_norms() {
        let mut cfg = presets::desk_scale();
        cfg.algorithm = AlgorithmChoice::FullMulti;
        cfg.rounds = 30;
        let report = run_seed(&cfg, 9).unwrap();
        let norms = report.per_arm_norm_sq.unwrap();
        assert_eq!(norms.len(), 4);
        assert!(norms.iter().all(|&n| n > 0.0));
        let bound = report.per_arm_norm_sq_bound.unwrap();
        assert!(norms.iter().all(|&n| n <= bound));
        assert!(report.summary.martingale_terminal.is_some());
    }
}
