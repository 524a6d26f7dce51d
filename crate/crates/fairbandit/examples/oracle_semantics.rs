//! What the fairness oracle does and does not tell the learner.
//!
//! After each round the oracle sees the policy and reports exactly the
//! pairs whose probability gap exceeds the true distance (plus a hair of
//! guard so boundary arithmetic never flags an exactly-fair pair). It
//! never says by how much, and it says nothing about pairs that are fair,
//! which is why the learner leans on its own tight pairs for the other
//! half of the feedback.

use fairbandit::environment::{ContextGenerator, EnvironmentSpec};
use fairbandit::geometry::{ContextSet, MetricSpec};
use nalgebra::{DMatrix, DVector};

fn main() {
    let d = 2;
    let theta = DVector::from_row_slice(&[1.0, 0.0]);
    let metric = MetricSpec::new(DMatrix::identity(d, d) * 0.4).unwrap();
    let ctx = ContextSet::new(vec![
        DVector::from_row_slice(&[1.0, 0.0]),
        DVector::from_row_slice(&[0.0, 1.0]),
        DVector::from_row_slice(&[0.8, 0.6]),
    ])
    .unwrap();
    let env = EnvironmentSpec::new(
        theta,
        metric,
        0.0,
        ContextGenerator::FixedCycle(vec![ctx.clone()]),
        1,
    )
    .unwrap();

    let truth = env.true_distances(&ctx).unwrap();
    for ((i, j), v) in truth.iter() {
        println!("true d({i},{j}) = {v:.4}");
    }

    // Arm 0 runs ahead of both others by more than their distances allow
    // (0.70 > 0.57 and 0.40 > 0.25); arms 1 and 2 stay close enough to
    // each other (0.30 < 0.36).
    let policy = vec![0.7, 0.0, 0.3];
    let violated = env.oracle_violations(&ctx, &policy).unwrap();
    println!("policy {policy:?} -> violated pairs {violated:?}");
    assert!(violated.contains(&(0, 1)));
    assert!(violated.contains(&(0, 2)));
    assert!(!violated.contains(&(1, 2)));

    // A policy that meets every distance exactly or better is fair; the
    // guard keeps the boundary pair silent.
    let d01 = truth.get(0, 1);
    let fair = vec![d01, 0.0, 0.34];
    let silent = env.oracle_violations(&ctx, &fair).unwrap();
    println!("policy with pair (0,1) at the exact boundary -> violated pairs {silent:?}");
    assert!(silent.is_empty());

    // Epsilon-unfairness is the logged, thresholded flavor of the same
    // question, counted at half, one, and two epsilon. Both overshoots
    // above sit between 0.1 and 0.2 past their distances, so they count at
    // eps/2 and eps but not at 2 eps.
    let eps = 0.1;
    for (label, e) in [("eps/2", eps / 2.0), ("eps", eps), ("2eps", 2.0 * eps)] {
        let n = env.epsilon_unfair_count(&ctx, &policy, e).unwrap();
        println!("pairs more than {label} past their distance: {n}");
    }
}
