//! Raking iterations, convergence to the information projection, and the
//! three equivalent divergence-projection characterizations.
//!
//! One balancing step rescales the rows (axis `X`) or columns (axis `Y`) of a
//! joint measure so that the corresponding marginal matches its target
//! exactly. Alternating the two axes drives both marginals to their targets;
//! the limit is the KL-closest measure to the input among all measures with
//! the prescribed marginals.

use crate::measure::{JointMeasure, TargetMarginals};
use crate::{Error, Real, Result};
use std::fmt;
use thiserror::Error;

/// Which marginal a step acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn flip(self) -> Axis {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::X => write!(f, "x"),
            Axis::Y => write!(f, "y"),
        }
    }
}

/// Which axis the first balancing step acts on.
///
/// `XFirst` matches the canonical alternation (odd steps on `X`); `YFirst`
/// is needed by the contrastive-loss construction, which uses both orderings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BalanceOrder {
    #[default]
    XFirst,
    YFirst,
}

impl BalanceOrder {
    /// The axis rescaled at 1-based step `step`.
    pub fn axis_at(self, step: usize) -> Axis {
        debug_assert!(step >= 1);
        let first = match self {
            BalanceOrder::XFirst => Axis::X,
            BalanceOrder::YFirst => Axis::Y,
        };
        if step % 2 == 1 {
            first
        } else {
            first.flip()
        }
    }
}

impl fmt::Display for BalanceOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BalanceOrder::XFirst => write!(f, "x-first"),
            BalanceOrder::YFirst => write!(f, "y-first"),
        }
    }
}

/// Divergence defining a marginal projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Divergence {
    Kl,
    ReverseKl,
    Chi2,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Divergence::Kl => write!(f, "kl"),
            Divergence::ReverseKl => write!(f, "reverse-kl"),
            Divergence::Chi2 => write!(f, "chi2"),
        }
    }
}

fn check_target_len<T: Real>(q: &JointMeasure<T>, target: &[T], axis: Axis) -> Result<usize> {
    let (m, l) = q.shape();
    let expected = match axis {
        Axis::X => m,
        Axis::Y => l,
    };
    if target.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            got: target.len(),
        });
    }
    Ok(expected)
}

fn rebuild<T: Real>(q: &JointMeasure<T>, weights: ndarray::Array2<T>) -> JointMeasure<T> {
    JointMeasure::new(weights, q.x_labels().to_vec(), q.y_labels().to_vec())
        .expect("rescaled weights remain valid")
}

/// One raking step: rescale rows (axis `X`) or columns (axis `Y`) so the
/// chosen marginal equals `target` exactly.
///
/// Rows or columns with zero mass and zero target stay zero; zero mass under
/// a positive target is [`Error::EmptyMarginalCell`].
pub fn rescale_to_target<T: Real>(
    q: &JointMeasure<T>,
    target: &[T],
    axis: Axis,
) -> Result<JointMeasure<T>> {
    check_target_len(q, target, axis)?;
    let marginal = q.marginal(axis);
    let mut factors = Vec::with_capacity(target.len());
    for (i, (&t, &m)) in target.iter().zip(marginal.iter()).enumerate() {
        if m > T::zero() {
            factors.push(t / m);
        } else if t > T::zero() {
            return Err(Error::EmptyMarginalCell { axis, index: i });
        } else {
            factors.push(T::zero());
        }
    }
    let mut weights = q.weights().clone();
    match axis {
        Axis::X => {
            for (i, mut row) in weights.rows_mut().into_iter().enumerate() {
                row.mapv_inplace(|w| w * factors[i]);
            }
        }
        Axis::Y => {
            for (j, mut col) in weights.columns_mut().into_iter().enumerate() {
                col.mapv_inplace(|w| w * factors[j]);
            }
        }
    }
    Ok(rebuild(q, weights))
}

/// One balancing step toward strictly positive target marginals.
pub fn balance_step<T: Real>(
    q: &JointMeasure<T>,
    targets: &TargetMarginals<T>,
    axis: Axis,
) -> Result<JointMeasure<T>> {
    rescale_to_target(q, targets.target(axis), axis)
}

/// Project `r` onto the set of measures with the given `axis` marginal,
/// minimizing the chosen divergence.
///
/// All three divergences have the same minimizer, a marginal reweighting of
/// `r`, so this agrees with [`rescale_to_target`] up to float roundoff. Each
/// divergence is evaluated through its own closed form:
/// KL fixes the conditional slice and reweights it, reverse KL scales each
/// cell by the target-over-marginal ratio cell-wise, and chi-squared applies
/// the likelihood-ratio function of the affine projection.
pub fn project_marginal<T: Real>(
    r: &JointMeasure<T>,
    target: &[T],
    axis: Axis,
    divergence: Divergence,
) -> Result<JointMeasure<T>> {
    check_target_len(r, target, axis)?;
    let marginal = r.marginal(axis);
    for (i, (&t, &m)) in target.iter().zip(marginal.iter()).enumerate() {
        if t > T::zero() && m <= T::zero() {
            return Err(Error::AbsoluteContinuityViolation {
                location: format!("{axis} atom {i}"),
            });
        }
    }
    let pick = |i: usize, j: usize| match axis {
        Axis::X => i,
        Axis::Y => j,
    };
    let mut weights = r.weights().clone();
    match divergence {
        Divergence::Kl => {
            // conditional given the projected axis, then reweight by target
            for ((i, j), w) in weights.indexed_iter_mut() {
                let a = pick(i, j);
                if marginal[a] > T::zero() {
                    let conditional = *w / marginal[a];
                    *w = target[a] * conditional;
                } else {
                    *w = T::zero();
                }
            }
        }
        Divergence::ReverseKl => {
            // cell-wise: target * r / marginal
            for ((i, j), w) in weights.indexed_iter_mut() {
                let a = pick(i, j);
                if marginal[a] > T::zero() {
                    *w = target[a] * *w / marginal[a];
                } else {
                    *w = T::zero();
                }
            }
        }
        Divergence::Chi2 => {
            // likelihood ratio of the affine projection, constant per slice
            let ratio: Vec<T> = target
                .iter()
                .zip(marginal.iter())
                .map(|(&t, &m)| if m > T::zero() { t / m } else { T::zero() })
                .collect();
            for ((i, j), w) in weights.indexed_iter_mut() {
                *w = ratio[pick(i, j)] * *w;
            }
        }
    }
    Ok(rebuild(r, weights))
}

/// Sup-norm deviation of both marginals from their targets.
pub fn max_marginal_deviation<T: Real>(q: &JointMeasure<T>, targets: &TargetMarginals<T>) -> T {
    let dev = |got: Vec<T>, want: &[T]| {
        got.iter()
            .zip(want.iter())
            .map(|(&g, &w)| (g - w).abs())
            .fold(T::zero(), T::max)
    };
    dev(q.marginal_x(), targets.p_x()).max(dev(q.marginal_y(), targets.p_y()))
}

/// The iterates of a `k`-step balancing run plus per-step diagnostics.
///
/// `iterates[0]` is the input; `iterates[s]` is the measure after step `s`.
/// `ratio_bounds[s-1]` is the max ratio deviation `|target/marginal - 1|` on
/// the axis rescaled at step `s`, measured just before the step.
/// `kl_violations[s]` is the alternating KL sequence: on the iterate after
/// step `s` it measures the *next* axis to be balanced, with the divergence
/// direction flipping between even and odd entries.
#[derive(Debug, Clone)]
pub struct BalanceTrace<T> {
    iterates: Vec<JointMeasure<T>>,
    order: BalanceOrder,
    ratio_bounds: Vec<T>,
    kl_violations: Vec<T>,
}

impl<T: Real> BalanceTrace<T> {
    pub fn iterates(&self) -> &[JointMeasure<T>] {
        &self.iterates
    }

    pub fn order(&self) -> BalanceOrder {
        self.order
    }

    /// Number of balancing steps taken.
    pub fn steps(&self) -> usize {
        self.iterates.len() - 1
    }

    pub fn initial(&self) -> &JointMeasure<T> {
        &self.iterates[0]
    }

    pub fn final_measure(&self) -> &JointMeasure<T> {
        self.iterates.last().expect("trace is nonempty")
    }

    /// Per-step `M_l = max |target/marginal - 1|` on the axis balanced at
    /// step `l`, evaluated on the iterate entering the step.
    pub fn ratio_bounds(&self) -> &[T] {
        &self.ratio_bounds
    }

    pub fn kl_violations(&self) -> &[T] {
        &self.kl_violations
    }
}

/// KL violation of iterate `index` in a trace with the given order.
///
/// Even entries measure the axis balanced first in forward direction
/// `KL(iterate marginal || target)`; odd entries flip both the axis and the
/// argument order: `KL(target || iterate marginal)`.
pub fn kl_violation<T: Real>(
    iterate: &JointMeasure<T>,
    targets: &TargetMarginals<T>,
    order: BalanceOrder,
    index: usize,
) -> Result<T> {
    let first = order.axis_at(1);
    if index % 2 == 0 {
        let axis = first;
        crate::measure::kl_divergence(&iterate.marginal(axis), targets.target(axis))
    } else {
        let axis = first.flip();
        crate::measure::kl_divergence(targets.target(axis), &iterate.marginal(axis))
    }
}

/// The alternating KL sequence of a trace, recomputed from its iterates.
///
/// The sequence is nonincreasing from entry 1 on: each projection contracts
/// the next violation. Entry 0 (the raw input's violation on the first axis)
/// is reported but takes no part in the chain: the input's two marginal
/// errors are unrelated, so entry 1 can exceed entry 0.
pub fn kl_violation_sequence<T: Real>(
    trace: &BalanceTrace<T>,
    targets: &TargetMarginals<T>,
) -> Result<Vec<T>> {
    trace
        .iterates
        .iter()
        .enumerate()
        .map(|(idx, it)| kl_violation(it, targets, trace.order, idx))
        .collect()
}

fn ratio_deviation<T: Real>(q: &JointMeasure<T>, target: &[T], axis: Axis) -> Result<T> {
    let marginal = q.marginal(axis);
    let mut worst = T::zero();
    for (i, (&t, &m)) in target.iter().zip(marginal.iter()).enumerate() {
        if m <= T::zero() {
            if t > T::zero() {
                return Err(Error::EmptyMarginalCell { axis, index: i });
            }
            continue;
        }
        worst = worst.max((t / m - T::one()).abs());
    }
    Ok(worst)
}

fn step_via<T: Real>(
    q: &JointMeasure<T>,
    targets: &TargetMarginals<T>,
    axis: Axis,
    divergence: Option<Divergence>,
) -> Result<JointMeasure<T>> {
    match divergence {
        None => balance_step(q, targets, axis),
        Some(d) => project_marginal(q, targets.target(axis), axis, d),
    }
}

/// Run `k` alternating balancing steps and record the full trace.
pub fn balance_k<T: Real>(
    q: &JointMeasure<T>,
    targets: &TargetMarginals<T>,
    k: usize,
    order: BalanceOrder,
) -> Result<BalanceTrace<T>> {
    balance_k_via(q, targets, k, order, None)
}

/// [`balance_k`] with each step realized as the stated divergence's marginal
/// projection instead of the direct rescale (`None`). All routes agree up to
/// float roundoff.
pub fn balance_k_via<T: Real>(
    q: &JointMeasure<T>,
    targets: &TargetMarginals<T>,
    k: usize,
    order: BalanceOrder,
    divergence: Option<Divergence>,
) -> Result<BalanceTrace<T>> {
    if q.shape() != targets.shape() {
        return Err(Error::ShapeMismatch {
            expected: targets.shape(),
            got: q.shape(),
        });
    }
    let mut iterates = Vec::with_capacity(k + 1);
    let mut ratio_bounds = Vec::with_capacity(k);
    let mut kl_violations = Vec::with_capacity(k + 1);
    iterates.push(q.clone());
    kl_violations.push(kl_violation(q, targets, order, 0)?);
    for step in 1..=k {
        let axis = order.axis_at(step);
        let current = iterates.last().unwrap();
        ratio_bounds.push(ratio_deviation(current, targets.target(axis), axis)?);
        let next = step_via(current, targets, axis, divergence)?;
        kl_violations.push(kl_violation(&next, targets, order, step)?);
        iterates.push(next);
    }
    Ok(BalanceTrace {
        iterates,
        order,
        ratio_bounds,
        kl_violations,
    })
}

/// Diagnostics carried by a failed [`balance_to_convergence`] run.
#[derive(Debug, Clone)]
pub struct NotConverged<T> {
    pub last_iterate: JointMeasure<T>,
    pub iterations: usize,
    pub max_deviation: T,
}

#[derive(Debug, Error)]
pub enum ConvergenceError<T: Real> {
    #[error(
        "no convergence after {} iterations: max marginal deviation {}",
        .0.iterations,
        .0.max_deviation
    )]
    NotConverged(Box<NotConverged<T>>),

    #[error(transparent)]
    Other(#[from] Error),
}

/// Alternate balancing steps until both marginals are within `tol` (sup-norm)
/// of the targets, or fail with [`ConvergenceError::NotConverged`] carrying
/// the last iterate.
///
/// Returns the balanced measure and the number of steps used; a feasible
/// input returns immediately with zero steps. The limit approximates the
/// KL-closest measure to the input among measures with the target marginals.
pub fn balance_to_convergence<T: Real>(
    q: &JointMeasure<T>,
    targets: &TargetMarginals<T>,
    tol: T,
    max_iter: usize,
    order: BalanceOrder,
) -> Result<(JointMeasure<T>, usize), ConvergenceError<T>> {
    balance_to_convergence_via(q, targets, tol, max_iter, order, None)
}

/// [`balance_to_convergence`] with a selectable projection route.
pub fn balance_to_convergence_via<T: Real>(
    q: &JointMeasure<T>,
    targets: &TargetMarginals<T>,
    tol: T,
    max_iter: usize,
    order: BalanceOrder,
    divergence: Option<Divergence>,
) -> Result<(JointMeasure<T>, usize), ConvergenceError<T>> {
    if q.shape() != targets.shape() {
        return Err(Error::ShapeMismatch {
            expected: targets.shape(),
            got: q.shape(),
        }
        .into());
    }
    if max_marginal_deviation(q, targets) <= tol {
        return Ok((q.clone(), 0));
    }
    let mut current = q.clone();
    for step in 1..=max_iter {
        current = step_via(&current, targets, order.axis_at(step), divergence)?;
        if max_marginal_deviation(&current, targets) <= tol {
            return Ok((current, step));
        }
    }
    let max_deviation = max_marginal_deviation(&current, targets);
    Err(ConvergenceError::NotConverged(Box::new(NotConverged {
        last_iterate: current,
        iterations: max_iter,
        max_deviation,
    })))
}

/// Per-step ratio deviations with their analytic envelopes.
///
/// `small_kl_envelope[s]` is present only when that step's KL driver is at
/// most `p_star^2 / 2`.
#[derive(Debug, Clone)]
pub struct RatioBoundReport<T> {
    pub m_values: Vec<T>,
    pub gross_envelope: Vec<T>,
    pub kl_envelope: Vec<T>,
    pub small_kl_envelope: Vec<Option<T>>,
    /// KL violation driving each step's bound: the input violation for step
    /// 1, the first post-projection violation for later steps.
    pub drivers: Vec<T>,
    pub p_star: T,
}

impl<T: Real> RatioBoundReport<T> {
    /// Steps whose observed deviation exceeds any applicable envelope.
    pub fn envelope_violations(&self) -> Vec<usize> {
        let slack = T::of(1e-12);
        let mut bad = Vec::new();
        for (idx, &m) in self.m_values.iter().enumerate() {
            let mut limit = self.gross_envelope[idx].min(self.kl_envelope[idx]);
            if let Some(b) = self.small_kl_envelope[idx] {
                limit = limit.min(b);
            }
            if m > limit + slack {
                bad.push(idx + 1);
            }
        }
        bad
    }
}

/// Envelope analysis of a trace from a sample of size `n` whose support
/// event holds.
///
/// Step 1 obeys the gross bound `max(n-1, 1)` and the KL bound
/// `n sqrt(KL/2)` driven by the input violation. Step 2's marginal is only
/// bounded below by `p_star/n`, so its envelopes carry an `n/p_star`
/// prefactor; from step 3 on the marginal is at least `p_star^2` and the
/// prefactor is `1/p_star^2`. Whenever a step's driver is at most
/// `p_star^2/2` the step also obeys `(2/p_star) sqrt(KL/2)`. Steps after
/// the first are driven by the first post-projection violation, the start
/// of the monotone chain.
pub fn marginal_ratio_bound<T: Real>(
    trace: &BalanceTrace<T>,
    targets: &TargetMarginals<T>,
    n: u64,
) -> RatioBoundReport<T> {
    let p_star = targets.p_star();
    let n_t = T::from_u64(n).unwrap();
    let k = trace.ratio_bounds.len();

    let mut gross = Vec::with_capacity(k);
    let mut kl_env = Vec::with_capacity(k);
    let mut small_env = Vec::with_capacity(k);
    let mut drivers = Vec::with_capacity(k);
    for step in 1..=k {
        let driver = if step == 1 {
            trace.kl_violations[0]
        } else {
            trace.kl_violations[1]
        };
        let half_kl_sqrt = (driver / T::of(2.0)).sqrt();
        let prefactor = match step {
            1 => n_t,
            2 => n_t / p_star,
            _ => T::one() / (p_star * p_star),
        };
        gross.push((prefactor - T::one()).max(T::one()));
        kl_env.push(prefactor * half_kl_sqrt);
        small_env.push(if driver <= p_star * p_star / T::of(2.0) {
            Some(T::of(2.0) / p_star * half_kl_sqrt)
        } else {
            None
        });
        drivers.push(driver);
    }
    RatioBoundReport {
        m_values: trace.ratio_bounds.clone(),
        gross_envelope: gross,
        kl_envelope: kl_env,
        small_kl_envelope: small_env,
        drivers,
        p_star,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{sample_empirical, support_event};
    use crate::rng::derive_seed;
    use crate::synthetic;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn measure(rows: &[&[f64]]) -> JointMeasure<f64> {
        let m = rows.len();
        let l = rows[0].len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        JointMeasure::from_weights(Array2::from_shape_vec((m, l), flat).unwrap()).unwrap()
    }

    fn uniform_targets(m: usize, l: usize) -> TargetMarginals<f64> {
        TargetMarginals::uniform(m, l).unwrap()
    }

    #[test]
    fn feasible_measure_is_fixed_point() {
        let q = JointMeasure::<f64>::uniform(2, 2).unwrap();
        let t = uniform_targets(2, 2);
        let out = balance_step(&q, &t, Axis::X).unwrap();
        assert_eq!(out.weights(), q.weights());
        let out = balance_step(&q, &t, Axis::Y).unwrap();
        assert_eq!(out.weights(), q.weights());
    }

    #[test]
    fn row_rescale_hand_example() {
        let q = measure(&[&[0.4, 0.2], &[0.1, 0.3]]);
        let t = uniform_targets(2, 2);
        let step1 = balance_step(&q, &t, Axis::X).unwrap();
        let want1 = [
            [1.0 / 3.0, 1.0 / 6.0],
            [1.0 / 8.0, 3.0 / 8.0],
        ];
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(step1.weights()[(i, j)], want1[i][j], epsilon = 1e-15);
            }
        }
        let step2 = balance_step(&step1, &t, Axis::Y).unwrap();
        let want2 = [
            [4.0 / 11.0, 2.0 / 13.0],
            [3.0 / 22.0, 9.0 / 26.0],
        ];
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(step2.weights()[(i, j)], want2[i][j], epsilon = 1e-15);
            }
        }
        let my = step2.marginal_y();
        assert_abs_diff_eq!(my[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(my[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn balance_k_reproduces_the_two_hand_steps() {
        let q = measure(&[&[0.4, 0.2], &[0.1, 0.3]]);
        let t = uniform_targets(2, 2);
        let trace = balance_k(&q, &t, 2, BalanceOrder::XFirst).unwrap();
        assert_eq!(trace.steps(), 2);
        assert_eq!(trace.iterates()[0].weights(), q.weights());
        assert_abs_diff_eq!(
            trace.iterates()[1].weights()[(0, 0)],
            1.0 / 3.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            trace.final_measure().weights()[(1, 1)],
            9.0 / 26.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn zero_step_trace_is_input_only() {
        let q = measure(&[&[0.4, 0.2], &[0.1, 0.3]]);
        let t = uniform_targets(2, 2);
        let trace = balance_k(&q, &t, 0, BalanceOrder::XFirst).unwrap();
        assert_eq!(trace.steps(), 0);
        assert_eq!(trace.final_measure().weights(), q.weights());
        assert_eq!(trace.kl_violations().len(), 1);
    }

    #[test]
    fn empty_row_with_positive_target_errors() {
        let q = measure(&[&[0.0, 0.0], &[0.5, 0.5]]);
        let t = uniform_targets(2, 2);
        assert!(matches!(
            balance_step(&q, &t, Axis::X),
            Err(Error::EmptyMarginalCell { axis: Axis::X, index: 0 })
        ));
    }

    #[test]
    fn balancing_is_scale_free() {
        let q = measure(&[&[0.4, 0.2], &[0.1, 0.3]]);
        let scaled =
            JointMeasure::from_weights(q.weights().mapv(|w| w * 7.5)).unwrap();
        let t = uniform_targets(2, 2);
        let a = balance_step(&q, &t, Axis::X).unwrap();
        let b = balance_step(&scaled, &t, Axis::X).unwrap();
        for (x, y) in a.weights().iter().zip(b.weights().iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-15);
        }
    }

    #[test]
    fn exact_alternation_invariant() {
        let q = measure(&[&[0.2, 0.1, 0.15], &[0.05, 0.3, 0.2]]);
        let t = TargetMarginals::new(vec![0.45, 0.55], vec![0.3, 0.3, 0.4]).unwrap();
        let trace = balance_k(&q, &t, 5, BalanceOrder::XFirst).unwrap();
        for (idx, it) in trace.iterates().iter().enumerate().skip(1) {
            let axis = BalanceOrder::XFirst.axis_at(idx);
            let (got, want) = match axis {
                Axis::X => (it.marginal_x(), t.p_x()),
                Axis::Y => (it.marginal_y(), t.p_y()),
            };
            for (g, w) in got.iter().zip(want.iter()) {
                assert_abs_diff_eq!(g, w, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn kl_violations_nonincreasing_on_random_instances() {
        for inst in 0..20u64 {
            let p = synthetic::random_strictly_positive::<f64>(4, 4, derive_seed(900, inst))
                .unwrap();
            let targets = TargetMarginals::from_measure(&p).unwrap();
            let sample = sample_empirical(&p, 200, derive_seed(901, inst)).unwrap();
            if !support_event(&sample, &targets) {
                continue;
            }
            let trace =
                balance_k(&sample.to_measure(), &targets, 8, BalanceOrder::XFirst).unwrap();
            let seq = trace.kl_violations();
            for w in seq[1..].windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-12,
                    "KL violations increased: {} -> {}",
                    w[0],
                    w[1]
                );
            }
            let recomputed = kl_violation_sequence(&trace, &targets).unwrap();
            for (a, b) in seq.iter().zip(recomputed.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn feasible_trace_has_zero_violations() {
        let t = TargetMarginals::new(vec![0.25, 0.75], vec![0.6, 0.4]).unwrap();
        let q = measure(&[&[0.15, 0.1], &[0.45, 0.3]]); // product of targets
        let trace = balance_k(&q, &t, 4, BalanceOrder::XFirst).unwrap();
        for &v in trace.kl_violations() {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-14);
        }
        for &m in trace.ratio_bounds() {
            assert_abs_diff_eq!(m, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn marginal_violation_decays_geometrically() {
        for inst in 0..5u64 {
            let p = synthetic::random_strictly_positive::<f64>(5, 5, derive_seed(910, inst))
                .unwrap();
            let targets = TargetMarginals::uniform(5, 5).unwrap();
            let trace = balance_k(&p, &targets, 40, BalanceOrder::XFirst).unwrap();
            let devs: Vec<f64> = trace
                .iterates()
                .iter()
                .map(|it| max_marginal_deviation(it, &targets))
                .collect();
            assert!(devs[40] < 1e-10, "final deviation {}", devs[40]);
            // every two steps the deviation contracts once it is meaningful
            for w in devs.windows(3) {
                if w[0] > 1e-12 {
                    assert!(w[2] <= w[0] * 0.999 + 1e-15);
                }
            }
        }
    }

    #[test]
    fn convergence_returns_feasible_input_unchanged() {
        let t = uniform_targets(2, 2);
        let q = JointMeasure::<f64>::uniform(2, 2).unwrap();
        let (out, iters) =
            balance_to_convergence(&q, &t, 1e-10, 100, BalanceOrder::XFirst).unwrap();
        assert_eq!(iters, 0);
        assert_eq!(out.weights(), q.weights());
    }

    #[test]
    fn convergence_limit_beats_random_feasible_points() {
        // limit minimizes KL(Q || input) over the transport polytope
        let input = measure(&[&[0.5, 0.2], &[0.1, 0.2]]);
        let t = uniform_targets(2, 2);
        let (limit, _) =
            balance_to_convergence(&input, &t, 1e-12, 10_000, BalanceOrder::XFirst).unwrap();
        let best = limit.kl_divergence(&input).unwrap();
        let mut rng_state = 12345u64;
        for _ in 0..1000 {
            rng_state = derive_seed(rng_state, 1);
            // feasible 2x2 measures with uniform marginals: [[a, .5-a], [.5-a, a]]
            let a = 1e-6 + (rng_state as f64 / u64::MAX as f64) * (0.5 - 2e-6);
            let q = measure(&[&[a, 0.5 - a], &[0.5 - a, a]]);
            let kl = q.kl_divergence(&input).unwrap();
            assert!(kl >= best - 1e-9, "feasible point beat the limit: {kl} < {best}");
        }
    }

    #[test]
    fn product_input_product_targets_converges_to_product_of_targets() {
        let t = TargetMarginals::new(vec![0.3, 0.7], vec![0.4, 0.6]).unwrap();
        let input = measure(&[&[0.25 * 0.5, 0.25 * 0.5], &[0.75 * 0.5, 0.75 * 0.5]]);
        let (out, _) =
            balance_to_convergence(&input, &t, 1e-12, 100, BalanceOrder::XFirst).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(
                    out.weights()[(i, j)],
                    t.p_x()[i] * t.p_y()[j],
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn not_converged_carries_last_iterate() {
        let q = measure(&[&[0.5, 0.2], &[0.1, 0.2]]);
        let t = uniform_targets(2, 2);
        match balance_to_convergence(&q, &t, 1e-14, 1, BalanceOrder::XFirst) {
            Err(ConvergenceError::NotConverged(info)) => {
                assert_eq!(info.iterations, 1);
                assert!(info.max_deviation > 0.0);
                // one X step: rows already match
                let mx = info.last_iterate.marginal_x();
                assert_abs_diff_eq!(mx[0], 0.5, epsilon = 1e-12);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn projections_agree_across_divergences_hand_case() {
        let r = measure(&[&[0.4, 0.2], &[0.1, 0.3]]);
        let target = [0.5, 0.5];
        let want = [[1.0 / 3.0, 1.0 / 6.0], [1.0 / 8.0, 3.0 / 8.0]];
        for d in [Divergence::Kl, Divergence::ReverseKl, Divergence::Chi2] {
            let q = project_marginal(&r, &target, Axis::X, d).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert_abs_diff_eq!(q.weights()[(i, j)], want[i][j], epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn projection_preserves_zero_rows_with_zero_target() {
        let r = measure(&[&[0.0, 0.0], &[0.5, 0.5]]);
        let target = [0.0, 1.0];
        for d in [Divergence::Kl, Divergence::ReverseKl, Divergence::Chi2] {
            let q = project_marginal(&r, &target, Axis::X, d).unwrap();
            assert_eq!(q.weights()[(0, 0)], 0.0);
            assert_eq!(q.weights()[(0, 1)], 0.0);
            assert_abs_diff_eq!(q.weights()[(1, 0)], 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn projection_of_feasible_measure_is_identity() {
        let r = measure(&[&[0.3, 0.2], &[0.2, 0.3]]);
        let target = [0.5, 0.5];
        for d in [Divergence::Kl, Divergence::ReverseKl, Divergence::Chi2] {
            let q = project_marginal(&r, &target, Axis::Y, d).unwrap();
            for (a, b) in q.weights().iter().zip(r.weights().iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn projection_rejects_target_outside_support() {
        let r = measure(&[&[0.0, 0.0], &[0.5, 0.5]]);
        let target = [0.3, 0.7];
        assert!(matches!(
            project_marginal(&r, &target, Axis::X, Divergence::Kl),
            Err(Error::AbsoluteContinuityViolation { .. })
        ));
    }

    #[test]
    fn ratio_bound_envelopes_hold_on_example_instance() {
        // 2x2 dependence-controlled instance, n = 300 draws, 200 seeds
        let p = synthetic::two_by_two_measure::<f64>(0.3).unwrap();
        let targets = TargetMarginals::from_measure(&p).unwrap();
        let mut small_kl_checked = 0usize;
        for i in 0..200u64 {
            let sample = sample_empirical(&p, 300, derive_seed(77, i)).unwrap();
            if !support_event(&sample, &targets) {
                continue;
            }
            let trace =
                balance_k(&sample.to_measure(), &targets, 6, BalanceOrder::XFirst).unwrap();
            let report = marginal_ratio_bound(&trace, &targets, 300);
            assert!(
                report.envelope_violations().is_empty(),
                "violations at seed {i}: {:?}",
                report.envelope_violations()
            );
            if report.small_kl_envelope[0].is_some() {
                small_kl_checked += 1;
            }
        }
        // at n = 300 the small-KL regime is the common case
        assert!(small_kl_checked > 150);
    }

    proptest! {
        #[test]
        fn step_matches_projection_everywhere(
            cells in proptest::collection::vec(0.01f64..1.0, 9),
            target in proptest::collection::vec(0.05f64..1.0, 3),
        ) {
            let total: f64 = cells.iter().sum();
            let w = Array2::from_shape_vec((3, 3), cells.iter().map(|c| c / total).collect()).unwrap();
            let r = JointMeasure::from_weights(w).unwrap();
            let tsum: f64 = target.iter().sum();
            let t: Vec<f64> = target.iter().map(|v| v / tsum).collect();
            let by_step = rescale_to_target(&r, &t, Axis::X).unwrap();
            for d in [Divergence::Kl, Divergence::ReverseKl, Divergence::Chi2] {
                let by_proj = project_marginal(&r, &t, Axis::X, d).unwrap();
                for (a, b) in by_step.weights().iter().zip(by_proj.weights().iter()) {
                    prop_assert!((a - b).abs() <= 1e-14);
                }
            }
        }
    }
}
