//! The Mahalanobis metric and its linearization.
//!
//! Squared distance under the root matrix A is a linear function of the
//! flattened outer product of the difference vector: d^2(x1, x2) =
//! <flatten(A'A), flatten((x1-x2)(x1-x2)')>. That identity is what lets the
//! distance learner treat the unknown metric as a single vector alpha and
//! each context pair as a query direction.

use fairbandit::geometry::{flatten_pair, ContextSet, MetricSpec};
use nalgebra::{DMatrix, DVector};

fn main() {
    // A deliberately skewed root so no coordinate shortcut exists.
    let a = DMatrix::from_row_slice(3, 3, &[0.6, 0.2, 0.0, 0.0, 0.4, 0.1, 0.1, 0.0, 0.5]);
    let metric = MetricSpec::new(a).unwrap();
    println!("gram matrix G = A'A:\n{}", metric.gram());

    let x1 = DVector::from_row_slice(&[0.8, 0.0, 0.6]);
    let x2 = DVector::from_row_slice(&[0.0, 1.0, 0.0]);
    let dist = metric.distance(&x1, &x2).unwrap();
    println!("d(x1, x2)            = {dist:.12}");

    // The linear view: alpha = flatten(G), u = flatten of the pair.
    let alpha = metric.g_flat();
    let u = flatten_pair(&x1, &x2).unwrap();
    let linear: f64 = alpha.iter().zip(&u).map(|(a, b)| a * b).sum();
    println!("<alpha, u>           = {linear:.12}");
    println!("distance^2           = {:.12}", dist * dist);
    assert!((linear - dist * dist).abs() < 1e-12);

    // Distances over a full context set, pair by canonical pair.
    let ctx = ContextSet::new(vec![x1, x2, DVector::from_row_slice(&[-0.5, 0.5, 0.7])]).unwrap();
    let d = fairbandit::geometry::true_distance_vector(&metric, &ctx).unwrap();
    for ((i, j), v) in d.iter() {
        println!("pair ({i},{j}): d = {v:.6}");
    }

    // The metric axioms come for free from the quadratic form.
    let z = ctx.get(2);
    let d02 = metric.distance(ctx.get(0), z).unwrap();
    let d01 = d.get(0, 1);
    let d12 = d.get(1, 2);
    println!("triangle check: {:.6} <= {:.6}", d02, d01 + d12);
    assert!(d02 <= d01 + d12 + 1e-12);
}
