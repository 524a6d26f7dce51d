//! One distance estimator under honest one-bit feedback.
//!
//! The estimator never sees the metric. Each round it receives a direction
//! u (a flattened context pair), answers with the midpoint of the interval
//! of <alpha, u> over its version space, and hears back only whether the
//! answer was too large. Every answer that is off by more than the working
//! accuracy halves the interval in that direction, so errors burn
//! themselves out.

use fairbandit::geometry::{flatten_pair, MetricSpec};
use fairbandit::metric_learner::DistanceEstimator;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 {
            return v / n;
        }
    }
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let d = 2;
    let metric = MetricSpec::new(DMatrix::from_row_slice(d, d, &[0.5, 0.1, 0.0, 0.3])).unwrap();
    let alpha = metric.g_flat().to_vec();

    let eps_sq = 1e-3;
    let mut est = DistanceEstimator::new(d * d, 1.0, eps_sq).unwrap();

    let mut worst_recent: f64 = 0.0;
    for round in 1..=400u32 {
        let x1 = random_unit(&mut rng, d);
        let x2 = random_unit(&mut rng, d);
        let u = flatten_pair(&x1, &x2).unwrap();
        let g = est.guess(&u).unwrap();
        let truth: f64 = alpha.iter().zip(&u).map(|(a, b)| a * b).sum();
        // The oracle answers one bit; the truth is also passed in so the
        // estimator can classify the round as a valid mistake or not.
        est.feedback(&u, g, g > truth, Some(truth)).unwrap();

        worst_recent = worst_recent.max((g - truth).abs());
        if round % 50 == 0 {
            println!(
                "round {round:3}: worst |guess - truth| over last 50 = {worst_recent:.2e}, \
                 mistakes = {}, stored halfspaces = {}",
                est.valid_mistakes(),
                est.space().len()
            );
            worst_recent = 0.0;
        }
    }

    // The true parameter was never cut away.
    assert!(est.space().contains(&alpha, 1e-9));
    println!(
        "final: {} feedback rounds, {} valid mistakes, truth still inside the version space",
        est.feedback_rounds(),
        est.valid_mistakes()
    );

    // Rollback by omission: a guess alone changes nothing.
    let probe = flatten_pair(&random_unit(&mut rng, d), &random_unit(&mut rng, d)).unwrap();
    let before = est.space().len();
    let g1 = est.guess(&probe).unwrap();
    let g2 = est.guess(&probe).unwrap();
    assert_eq!(g1, g2);
    assert_eq!(est.space().len(), before);
    println!("guessing without feedback left the estimator untouched");
}
