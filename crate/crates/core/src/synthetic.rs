//! Generators for spectrum-controlled distributions, corrupted target
//! marginals, and random test functions.

use crate::measure::{JointMeasure, TargetMarginals, TestFunction};
use crate::rng::{derive_seed, stream};
use crate::{Error, Real, Result};
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

/// The `m x m` measure with uniform marginals whose nontrivial singular
/// values all equal `s`:
/// `P = (1/m) [ (1/m) 11^T + s (I - (1/m) 11^T) ]`.
pub fn spectrum_controlled_measure<T: Real>(m: usize, s: f64) -> Result<JointMeasure<T>> {
    if m < 2 {
        return Err(Error::InvalidParameter {
            name: "m",
            value: m as f64,
            constraint: "m >= 2",
        });
    }
    if !(0.0 < s && s < 1.0) {
        return Err(Error::InvalidParameter {
            name: "s",
            value: s,
            constraint: "0 < s < 1",
        });
    }
    let mf = m as f64;
    let diag = (1.0 / mf) * (1.0 / mf + s * (1.0 - 1.0 / mf));
    let off = (1.0 / mf) * (1.0 / mf) * (1.0 - s);
    let w = Array2::from_shape_fn((m, m), |(i, j)| {
        if i == j {
            T::of(diag)
        } else {
            T::of(off)
        }
    });
    JointMeasure::from_weights(w)
}

/// The 2x2 family `(1/4) [[1+s, 1-s], [1-s, 1+s]]` with uniform marginals
/// and second singular value `s`; `s = 0` is the product measure and
/// `s -> 1` fully dependent.
pub fn two_by_two_measure<T: Real>(s: f64) -> Result<JointMeasure<T>> {
    if !(0.0..1.0).contains(&s) {
        return Err(Error::InvalidParameter {
            name: "s",
            value: s,
            constraint: "0 <= s < 1",
        });
    }
    let a = T::of((1.0 + s) / 4.0);
    let b = T::of((1.0 - s) / 4.0);
    JointMeasure::from_weights(ndarray::array![[a, b], [b, a]])
}

/// A Dirichlet(1, ..., 1) draw: uniform over the probability simplex,
/// realized by normalizing unit-rate exponentials.
pub fn dirichlet_uniform<T: Real>(m: usize, seed: u64) -> Result<Vec<T>> {
    if m == 0 {
        return Err(Error::EmptyDomain);
    }
    let mut rng = stream(seed);
    let draws: Vec<f64> = (0..m).map(|_| Exp1.sample(&mut rng)).collect();
    let total: f64 = draws.iter().sum();
    Ok(draws.into_iter().map(|d| T::of(d / total)).collect())
}

/// Mixture-corruption of target marginals.
#[derive(Debug, Clone, Copy)]
pub struct CorruptionSpec {
    epsilon: f64,
    seed: u64,
}

impl CorruptionSpec {
    /// `epsilon` is the misspecification level in `[0, 1)`; the experiment
    /// runner stays within `[0, 0.5]` but the library accepts the full range.
    pub fn new(epsilon: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                value: epsilon,
                constraint: "0 <= epsilon < 1",
            });
        }
        Ok(Self { epsilon, seed })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Seeds of the two independent Dirichlet draws (X first, then Y).
    pub fn draw_seeds(&self) -> (u64, u64) {
        (derive_seed(self.seed, 0), derive_seed(self.seed, 1))
    }
}

/// Corrupt targets toward independent Dirichlet draws:
/// `(1 - eps) p + eps d` on each axis, with two independent draws.
///
/// The output is strictly positive with probability one and deterministic in
/// the corruption seed.
pub fn corrupt_marginals<T: Real>(
    targets: &TargetMarginals<T>,
    spec: &CorruptionSpec,
) -> Result<TargetMarginals<T>> {
    let (m, l) = targets.shape();
    let (seed_x, seed_y) = spec.draw_seeds();
    let d_x: Vec<T> = dirichlet_uniform(m, seed_x)?;
    let d_y: Vec<T> = dirichlet_uniform(l, seed_y)?;
    let eps = T::of(spec.epsilon);
    let keep = T::one() - eps;
    let mix = |p: &[T], d: &[T]| -> Vec<T> {
        p.iter()
            .zip(d.iter())
            .map(|(&pi, &di)| keep * pi + eps * di)
            .collect()
    };
    TargetMarginals::new(mix(targets.p_x(), &d_x), mix(targets.p_y(), &d_y))
}

/// A test function with entrywise absolute standard normal values.
pub fn random_test_function<T: Real>(m: usize, l: usize, seed: u64) -> Result<TestFunction<T>> {
    if m == 0 || l == 0 {
        return Err(Error::EmptyDomain);
    }
    let mut rng = stream(seed);
    let values = Array2::from_shape_fn((m, l), |_| {
        let z: f64 = StandardNormal.sample(&mut rng);
        T::of(z.abs())
    });
    TestFunction::new(values)
}

/// A random strictly positive normalized measure: cells drawn uniformly from
/// `[0.2, 1.2)` and rescaled to mass one, so every cell is bounded away from
/// zero.
pub fn random_strictly_positive<T: Real>(m: usize, l: usize, seed: u64) -> Result<JointMeasure<T>> {
    if m == 0 || l == 0 {
        return Err(Error::EmptyDomain);
    }
    let mut rng = stream(seed);
    let mut cells = Array2::from_shape_fn((m, l), |_| 0.2 + rng.random::<f64>());
    let total: f64 = cells.iter().sum();
    cells.mapv_inplace(|c| c / total);
    JointMeasure::from_weights(cells.mapv(T::of))
}
