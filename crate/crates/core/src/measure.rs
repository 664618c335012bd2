//! Finite joint probability measures, marginals, divergences, and sampling.

use crate::balancing::Axis;
use crate::rng;
use crate::{Error, Real, Result};
use ndarray::Array2;
use rand_distr::{Binomial, Distribution};
use std::collections::HashSet;

/// A nonnegative weight matrix over labeled atoms of `X x Y`.
///
/// Rows index `X`, columns index `Y`. The measure is immutable after
/// construction; `normalized` records whether the total mass is 1 within
/// [`crate::NORMALIZATION_TOL`] at construction time.
#[derive(Debug, Clone, PartialEq)]
pub struct JointMeasure<T> {
    weights: Array2<T>,
    x_labels: Vec<String>,
    y_labels: Vec<String>,
    normalized: bool,
}

pub(crate) fn default_labels(prefix: &str, count: usize) -> Vec<String> {
    (0..count).map(|i| format!("{prefix}{i}")).collect()
}

fn check_labels(labels: &[String], expected: usize) -> Result<()> {
    if labels.len() != expected {
        return Err(Error::LabelCountMismatch {
            count: labels.len(),
            expected,
        });
    }
    let mut seen = HashSet::new();
    for label in labels {
        if !seen.insert(label.as_str()) {
            return Err(Error::DuplicateLabel {
                label: label.clone(),
            });
        }
    }
    Ok(())
}

impl<T: Real> JointMeasure<T> {
    /// Build a measure from a weight matrix and atom labels.
    ///
    /// Rejects empty axes, negative or non-finite entries, and duplicate
    /// labels. Inputs whose mass is off 1 are accepted but flagged
    /// unnormalized; they are never silently rescaled.
    pub fn new(weights: Array2<T>, x_labels: Vec<String>, y_labels: Vec<String>) -> Result<Self> {
        let (m, l) = weights.dim();
        if m == 0 || l == 0 {
            return Err(Error::EmptyDomain);
        }
        for ((i, j), &w) in weights.indexed_iter() {
            if !w.is_finite() {
                return Err(Error::NonFiniteEntry {
                    row: i,
                    col: j,
                    value: w.as_f64(),
                });
            }
            if w < T::zero() {
                return Err(Error::NegativeEntry {
                    row: i,
                    col: j,
                    value: w.as_f64(),
                });
            }
        }
        check_labels(&x_labels, m)?;
        check_labels(&y_labels, l)?;
        let mass: T = weights.iter().copied().sum();
        let normalized = (mass - T::one()).abs() <= T::mass_tol();
        Ok(Self {
            weights,
            x_labels,
            y_labels,
            normalized,
        })
    }

    /// Build a measure with default labels `x0..`, `y0..`.
    pub fn from_weights(weights: Array2<T>) -> Result<Self> {
        let (m, l) = weights.dim();
        Self::new(weights, default_labels("x", m), default_labels("y", l))
    }

    /// The uniform probability measure on an `m x l` grid.
    pub fn uniform(m: usize, l: usize) -> Result<Self> {
        if m == 0 || l == 0 {
            return Err(Error::EmptyDomain);
        }
        let w = T::one() / T::from_usize(m * l).unwrap();
        Self::from_weights(Array2::from_elem((m, l), w))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.weights.dim()
    }

    pub fn weights(&self) -> &Array2<T> {
        &self.weights
    }

    pub fn x_labels(&self) -> &[String] {
        &self.x_labels
    }

    pub fn y_labels(&self) -> &[String] {
        &self.y_labels
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn total_mass(&self) -> T {
        self.weights.iter().copied().sum()
    }

    /// Explicitly rescale to total mass 1.
    pub fn normalize(&self) -> Result<Self> {
        let mass = self.total_mass();
        if mass <= T::zero() {
            return Err(Error::NotNormalized {
                mass: mass.as_f64(),
            });
        }
        Self::new(
            self.weights.mapv(|w| w / mass),
            self.x_labels.clone(),
            self.y_labels.clone(),
        )
    }

    /// Row sums: the marginal on `X`.
    pub fn marginal_x(&self) -> Vec<T> {
        self.weights
            .rows()
            .into_iter()
            .map(|row| row.iter().copied().sum())
            .collect()
    }

    /// Column sums: the marginal on `Y`.
    pub fn marginal_y(&self) -> Vec<T> {
        self.weights
            .columns()
            .into_iter()
            .map(|col| col.iter().copied().sum())
            .collect()
    }

    pub fn marginal(&self, axis: Axis) -> Vec<T> {
        match axis {
            Axis::X => self.marginal_x(),
            Axis::Y => self.marginal_y(),
        }
    }

    /// Expectation of a test function under this measure.
    pub fn expectation(&self, h: &TestFunction<T>) -> Result<T> {
        if h.values().dim() != self.weights.dim() {
            return Err(Error::ShapeMismatch {
                expected: self.weights.dim(),
                got: h.values().dim(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(h.values().iter())
            .map(|(&w, &v)| w * v)
            .sum())
    }

    /// Variance of a test function under this measure (assumes mass 1).
    pub fn variance(&self, h: &TestFunction<T>) -> Result<T> {
        let mean = self.expectation(h)?;
        Ok(self
            .weights
            .iter()
            .zip(h.values().iter())
            .map(|(&w, &v)| w * (v - mean) * (v - mean))
            .sum())
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.weights.dim() != other.weights.dim() {
            return Err(Error::ShapeMismatch {
                expected: self.weights.dim(),
                got: other.weights.dim(),
            });
        }
        Ok(())
    }

    /// `KL(self || other)` in nats.
    pub fn kl_divergence(&self, other: &Self) -> Result<T> {
        self.check_same_shape(other)?;
        kl_divergence(
            self.weights.as_slice().unwrap(),
            other.weights.as_slice().unwrap(),
        )
    }

    /// `chi^2(self || other)`.
    pub fn chi2_divergence(&self, other: &Self) -> Result<T> {
        self.check_same_shape(other)?;
        chi2_divergence(
            self.weights.as_slice().unwrap(),
            other.weights.as_slice().unwrap(),
        )
    }

    /// Total variation distance to `other`.
    pub fn tv_distance(&self, other: &Self) -> Result<T> {
        self.check_same_shape(other)?;
        tv_distance(
            self.weights.as_slice().unwrap(),
            other.weights.as_slice().unwrap(),
        )
    }
}

/// `KL(q || r) = sum q log(q/r)` in nats, with the `0 log 0 = 0` convention.
///
/// Errors with [`Error::AbsoluteContinuityViolation`] where `q > 0` but
/// `r = 0`.
pub fn kl_divergence<T: Real>(q: &[T], r: &[T]) -> Result<T> {
    if q.len() != r.len() {
        return Err(Error::LengthMismatch {
            expected: q.len(),
            got: r.len(),
        });
    }
    let mut acc = T::zero();
    for (i, (&qi, &ri)) in q.iter().zip(r.iter()).enumerate() {
        if qi > T::zero() {
            if ri <= T::zero() {
                return Err(Error::AbsoluteContinuityViolation {
                    location: format!("index {i}"),
                });
            }
            acc += qi * (qi / ri).ln();
        }
    }
    Ok(acc)
}

/// `chi^2(q || r) = sum r (q/r - 1)^2`, with the `0 * (0/0) = 0` convention.
pub fn chi2_divergence<T: Real>(q: &[T], r: &[T]) -> Result<T> {
    if q.len() != r.len() {
        return Err(Error::LengthMismatch {
            expected: q.len(),
            got: r.len(),
        });
    }
    let mut acc = T::zero();
    for (i, (&qi, &ri)) in q.iter().zip(r.iter()).enumerate() {
        if ri <= T::zero() {
            if qi > T::zero() {
                return Err(Error::AbsoluteContinuityViolation {
                    location: format!("index {i}"),
                });
            }
        } else {
            let d = qi / ri - T::one();
            acc += ri * d * d;
        }
    }
    Ok(acc)
}

/// Total variation distance `(1/2) sum |q - r|`.
pub fn tv_distance<T: Real>(q: &[T], r: &[T]) -> Result<T> {
    if q.len() != r.len() {
        return Err(Error::LengthMismatch {
            expected: q.len(),
            got: r.len(),
        });
    }
    let sum: T = q
        .iter()
        .zip(r.iter())
        .map(|(&qi, &ri)| (qi - ri).abs())
        .sum();
    Ok(sum / T::of(2.0))
}

/// Strictly positive target marginals for balancing.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMarginals<T> {
    p_x: Vec<T>,
    p_y: Vec<T>,
}

impl<T: Real> TargetMarginals<T> {
    /// Validate and wrap a pair of probability vectors.
    ///
    /// Both must be strictly positive and sum to 1 within
    /// [`crate::NORMALIZATION_TOL`].
    pub fn new(p_x: Vec<T>, p_y: Vec<T>) -> Result<Self> {
        for v in [&p_x, &p_y] {
            if v.is_empty() {
                return Err(Error::EmptyDomain);
            }
            for (i, &p) in v.iter().enumerate() {
                if !p.is_finite() || p <= T::zero() {
                    return Err(Error::NotStrictlyPositive {
                        index: i,
                        value: p.as_f64(),
                    });
                }
            }
            let sum: T = v.iter().copied().sum();
            if (sum - T::one()).abs() > T::mass_tol() {
                return Err(Error::SumNotOne { sum: sum.as_f64() });
            }
        }
        Ok(Self { p_x, p_y })
    }

    /// Uniform targets `1/m`, `1/l`.
    pub fn uniform(m: usize, l: usize) -> Result<Self> {
        if m == 0 || l == 0 {
            return Err(Error::EmptyDomain);
        }
        Ok(Self {
            p_x: vec![T::one() / T::from_usize(m).unwrap(); m],
            p_y: vec![T::one() / T::from_usize(l).unwrap(); l],
        })
    }

    /// The marginals of a normalized, everywhere-positive-marginal measure.
    pub fn from_measure(p: &JointMeasure<T>) -> Result<Self> {
        if !p.is_normalized() {
            return Err(Error::NotNormalized {
                mass: p.total_mass().as_f64(),
            });
        }
        Self::new(p.marginal_x(), p.marginal_y())
    }

    pub fn p_x(&self) -> &[T] {
        &self.p_x
    }

    pub fn p_y(&self) -> &[T] {
        &self.p_y
    }

    pub fn target(&self, axis: Axis) -> &[T] {
        match axis {
            Axis::X => &self.p_x,
            Axis::Y => &self.p_y,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.p_x.len(), self.p_y.len())
    }

    /// Smallest target-marginal probability; controls all finite-sample
    /// envelopes.
    pub fn p_star(&self) -> T {
        let min_x = self.p_x.iter().copied().fold(T::infinity(), T::min);
        let min_y = self.p_y.iter().copied().fold(T::infinity(), T::min);
        min_x.min(min_y)
    }
}

/// Counts from an i.i.d. sample of a joint measure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalSample {
    counts: Array2<u64>,
    n: u64,
    x_labels: Vec<String>,
    y_labels: Vec<String>,
}

impl EmpiricalSample {
    pub fn new(
        counts: Array2<u64>,
        x_labels: Vec<String>,
        y_labels: Vec<String>,
    ) -> Result<Self> {
        let (m, l) = counts.dim();
        if m == 0 || l == 0 {
            return Err(Error::EmptyDomain);
        }
        check_labels(&x_labels, m)?;
        check_labels(&y_labels, l)?;
        let n = counts.iter().sum();
        if n == 0 {
            return Err(Error::ZeroSampleSize);
        }
        Ok(Self {
            counts,
            n,
            x_labels,
            y_labels,
        })
    }

    pub fn from_counts(counts: Array2<u64>) -> Result<Self> {
        let (m, l) = counts.dim();
        Self::new(counts, default_labels("x", m), default_labels("y", l))
    }

    pub fn counts(&self) -> &Array2<u64> {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn shape(&self) -> (usize, usize) {
        self.counts.dim()
    }

    /// The induced empirical measure `counts / n` (always normalized).
    pub fn to_measure<T: Real>(&self) -> JointMeasure<T> {
        let n = T::from_u64(self.n).unwrap();
        let w = self.counts.mapv(|c| T::from_u64(c).unwrap() / n);
        JointMeasure::new(w, self.x_labels.clone(), self.y_labels.clone())
            .expect("empirical measure is valid by construction")
    }
}

/// A real-valued function on the atoms of `X x Y`, stored as a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction<T> {
    values: Array2<T>,
}

impl<T: Real> TestFunction<T> {
    pub fn new(values: Array2<T>) -> Result<Self> {
        let (m, l) = values.dim();
        if m == 0 || l == 0 {
            return Err(Error::EmptyDomain);
        }
        for ((i, j), &v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry {
                    row: i,
                    col: j,
                    value: v.as_f64(),
                });
            }
        }
        Ok(Self { values })
    }

    /// Indicator of a single cell.
    pub fn indicator(m: usize, l: usize, row: usize, col: usize) -> Result<Self> {
        let mut values = Array2::from_elem((m, l), T::zero());
        values[(row, col)] = T::one();
        Self::new(values)
    }

    pub fn constant(m: usize, l: usize, c: T) -> Result<Self> {
        Self::new(Array2::from_elem((m, l), c))
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    /// Max absolute entry.
    pub fn sup_norm(&self) -> T {
        self.values
            .iter()
            .map(|v| v.abs())
            .fold(T::zero(), T::max)
    }
}

/// Draw a multinomial sample of size `n` from a normalized measure.
///
/// Sampling walks the cells in row-major order drawing sequential conditional
/// binomials, so the result depends only on `(p, n, seed)` and not on
/// platform RNG internals beyond the ChaCha stream itself.
pub fn sample_empirical<T: Real>(
    p: &JointMeasure<T>,
    n: u64,
    seed: u64,
) -> Result<EmpiricalSample> {
    if n == 0 {
        return Err(Error::ZeroSampleSize);
    }
    if !p.is_normalized() {
        return Err(Error::NotNormalized {
            mass: p.total_mass().as_f64(),
        });
    }
    let mut rng = rng::stream(seed);
    let flat: Vec<f64> = p.weights().iter().map(|w| w.as_f64()).collect();
    let last_pos = flat
        .iter()
        .rposition(|&w| w > 0.0)
        .expect("normalized measure has positive mass");

    let mut counts = vec![0u64; flat.len()];
    let mut remaining_n = n;
    let mut remaining_mass: f64 = flat.iter().sum();
    for (i, &w) in flat.iter().enumerate().take(last_pos + 1) {
        if remaining_n == 0 {
            break;
        }
        let draw = if i == last_pos {
            remaining_n
        } else {
            let prob = (w / remaining_mass).clamp(0.0, 1.0);
            Binomial::new(remaining_n, prob)
                .expect("probability clamped to [0, 1]")
                .sample(&mut rng)
        };
        counts[i] = draw;
        remaining_n -= draw;
        remaining_mass = (remaining_mass - w).max(0.0);
    }

    let (m, l) = p.shape();
    let counts = Array2::from_shape_vec((m, l), counts).expect("shape preserved");
    EmpiricalSample::new(
        counts,
        p.x_labels().to_vec(),
        p.y_labels().to_vec(),
    )
}

/// The support event: every target-supported row and column of the sample is
/// nonempty, so all balancing steps are well-defined.
pub fn support_event<T: Real>(sample: &EmpiricalSample, targets: &TargetMarginals<T>) -> bool {
    let (m, l) = sample.shape();
    if (m, l) != targets.shape() {
        return false;
    }
    for (i, &px) in targets.p_x().iter().enumerate() {
        if px > T::zero() && sample.counts().row(i).iter().sum::<u64>() == 0 {
            return false;
        }
    }
    for (j, &py) in targets.p_y().iter().enumerate() {
        if py > T::zero() && sample.counts().column(j).iter().sum::<u64>() == 0 {
            return false;
        }
    }
    true
}

/// Union-bound envelope on the probability that the support event fails:
/// `(m + l) (1 - p_star)^n`.
pub fn support_failure_envelope(m: usize, l: usize, p_star: f64, n: u64) -> f64 {
    (m + l) as f64 * (1.0 - p_star).powi(n as i32)
}
