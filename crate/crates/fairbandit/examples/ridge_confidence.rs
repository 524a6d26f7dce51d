//! Ridge regression with self-normalized confidence widths.
//!
//! The reward model maintains V = X'X + lambda I and X'y incrementally
//! (rank-one inverse updates, periodically refactored) and wraps each
//! point estimate <theta_hat, x> in a width beta ||x||_{V^-1} that holds
//! uniformly over time with probability 1 - delta. The widths start at
//! their clamp (1) and shrink as observations accumulate; the truth should
//! essentially never leave the band.

use fairbandit::reward_ucb::RidgeState;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = 3;
    let theta = DVector::from_row_slice(&[0.6, -0.3, 0.5]);
    let mut ridge = RidgeState::new(d, 1.0, 0.05).unwrap();

    let mut misses = 0u32;
    let rounds = 4000u64;
    for t in 1..=rounds {
        let x = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)).normalize();
        // Predict before updating: the width must cover the truth using
        // only what was known coming into the round.
        let (estimate, width) = ridge.predict_with_width(&x, t).unwrap();
        let mean = theta.dot(&x);
        if (estimate - mean).abs() > width {
            misses += 1;
        }
        let noise: f64 = StandardNormal.sample(&mut rng);
        ridge.update(&x, mean + noise).unwrap();

        if t.is_power_of_two() && t >= 8 {
            println!(
                "t={t:5}: width = {width:.4}, |estimate - mean| = {:.4}",
                (estimate - mean).abs()
            );
        }
    }

    println!(
        "confidence misses: {misses} of {rounds} (budget is delta = 0.05 for all rounds at once)"
    );
    let recovered = ridge.theta();
    println!(
        "recovered theta: [{:.4}, {:.4}, {:.4}] against [0.6, -0.3, 0.5]",
        recovered[0], recovered[1], recovered[2]
    );
    assert!((recovered - theta).norm() < 0.1);
}
