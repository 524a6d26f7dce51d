//! Mahalanobis geometry over context vectors.
//!
//! A metric is specified by a square root matrix `A`; the distance between
//! contexts is d(x, y) = ||A(x - y)||2. Squared distances are linear in the
//! entries of the Gram matrix G = A'A: with alpha = flatten(G) and
//! u = flatten((x - y)(x - y)'), d(x, y)^2 = <alpha, u>. That linearization
//! is what lets one-bit distance feedback act as halfspace information on
//! alpha, so everything downstream (version spaces, interval queries) works
//! in the m = d^2 dimensional flattened coordinates.
//!
//! Flattening is row-major: flatten(M)[i*d + j] = M[i][j].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::pairs::{pairs, PairVec};

/// Absolute tolerance for context norm validation.
const NORM_SLACK: f64 = 1e-12;

/// A Mahalanobis metric: the root matrix `A`, its Gram matrix `G = A'A`,
/// and the flattened form of `G` targeted by the distance learner.
///
/// `A` may be rank-deficient; the induced distance is then a pseudo-metric
/// (distinct points can be at distance zero), which is deliberately allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    a: DMatrix<f64>,
    gram: DMatrix<f64>,
    g_flat: Vec<f64>,
}

impl MetricSpec {
    /// Builds a metric from its root matrix. Errors on non-square or
    /// non-finite input.
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::InvalidInput(format!(
                "metric root must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "metric root has non-finite entries".into(),
            ));
        }
        let gram = a.transpose() * &a;
        let d = a.nrows();
        let mut g_flat = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                g_flat.push(gram[(i, j)]);
            }
        }
        Ok(MetricSpec { a, gram, g_flat })
    }

    /// Builds a metric from a row-major list of `A`'s entries, as stored in
    /// experiment configs.
    pub fn from_row_major(d: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                got: entries.len(),
            });
        }
        Ok(Self::new(DMatrix::from_row_slice(d, d, entries))?)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn root(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Row-major flattening of the Gram matrix; the learner's target vector.
    pub fn g_flat(&self) -> &[f64] {
        &self.g_flat
    }

    /// Frobenius norm of the Gram matrix, equal to the Euclidean norm of
    /// [`g_flat`](Self::g_flat). Upper bound used when sizing version-space
    /// priors.
    pub fn frobenius(&self) -> f64 {
        self.g_flat.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute Gram entry; the truth must fit inside a box prior of
    /// at least this radius.
    pub fn max_abs_gram(&self) -> f64 {
        self.g_flat.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// The Mahalanobis distance ||A x1 - A x2||2. Symmetric, nonnegative,
    /// zero when the arguments coincide.
    pub fn distance(&self, x1: &DVector<f64>, x2: &DVector<f64>) -> Result<f64> {
        let d = self.dim();
        if x1.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x1.len(),
            });
        }
        if x2.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x2.len(),
            });
        }
        let diff = x1 - x2;
        Ok((&self.a * diff).norm())
    }
}

/// Row-major flattening of the outer product (x1 - x2)(x1 - x2)'.
///
/// For every metric, <g_flat, flatten_pair(x1, x2)> equals the squared
/// Mahalanobis distance between x1 and x2. The output always flattens a
/// symmetric rank-1 matrix, and its Euclidean norm is ||x1 - x2||^2, at most
/// 4 for unit-norm inputs.
pub fn flatten_pair(x1: &DVector<f64>, x2: &DVector<f64>) -> Result<Vec<f64>> {
    if x1.len() != x2.len() {
        return Err(Error::DimensionMismatch {
            expected: x1.len(),
            got: x2.len(),
        });
    }
    let d = x1.len();
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        let vi = x1[i] - x2[i];
        for j in 0..d {
            out.push(vi * (x1[j] - x2[j]));
        }
    }
    Ok(out)
}

/// The k contexts presented in one round. Every vector is checked to have
/// Euclidean norm at most 1 (small slack for rounding) and k must be >= 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextSet {
    vectors: Vec<DVector<f64>>,
}

impl ContextSet {
    pub fn new(vectors: Vec<DVector<f64>>) -> Result<Self> {
        if vectors.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a context set needs at least 2 contexts, got {}",
                vectors.len()
            )));
        }
        let d = vectors[0].len();
        for (idx, v) in vectors.iter().enumerate() {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: v.len(),
                });
            }
            if v.iter().any(|e| !e.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "context {idx} has non-finite entries"
                )));
            }
            let norm = v.norm();
            if norm > 1.0 + NORM_SLACK {
                return Err(Error::InvalidInput(format!(
                    "context {idx} has norm {norm} > 1"
                )));
            }
        }
        Ok(ContextSet { vectors })
    }

    pub fn k(&self) -> usize {
        self.vectors.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn get(&self, i: usize) -> &DVector<f64> {
        &self.vectors[i]
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }
}

/// True pairwise distances for one round, in canonical pair order.
pub fn true_distance_vector(metric: &MetricSpec, ctx: &ContextSet) -> Result<PairVec> {
    let k = ctx.k();
    let mut out = PairVec::zeros(k);
    for (i, j) in pairs(k) {
        out.set(i, j, metric.distance(ctx.get(i), ctx.get(j))?);
    }
    Ok(out)
}

/// True pairwise squared distances computed through the linearization
/// <g_flat, flatten_pair(...)>, the same parameterization the distance
/// estimators learn in. Agrees with squaring true_distance_vector up to
/// rounding; this form is the one to compare estimator guesses against.
pub fn true_squared_vector(metric: &MetricSpec, ctx: &ContextSet) -> Result<PairVec> {
    let k = ctx.k();
    let g = metric.g_flat();
    let mut out = PairVec::zeros(k);
    for (i, j) in pairs(k) {
        let u = flatten_pair(ctx.get(i), ctx.get(j))?;
        out.set(i, j, g.iter().zip(&u).map(|(a, b)| a * b).sum());
    }
    Ok(out)
}
