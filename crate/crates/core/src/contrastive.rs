//! The symmetric contrastive loss family as explicit balancing of a
//! score-derived measure.
//!
//! A batch of `n` paired items induces an `n x n` score matrix; softmax of
//! the scores over all cells is an initial joint measure whose diagonal
//! holds the matched pairs. The standard symmetric cross-entropy loss equals
//! the one-iteration balanced loss up to an additive constant `n log n`, and
//! running more iterations yields the multi-step loss family.

use crate::balancing::{balance_k, BalanceOrder};
use crate::measure::{JointMeasure, TargetMarginals};
use crate::{Error, Real, Result};
use ndarray::Array2;

/// An `n x n` matrix of pair similarities; entry `(i, j)` scores item `i`
/// of the first modality against item `j` of the second. Diagonal entries
/// are the matched pairs.
#[derive(Debug, Clone)]
pub struct ScoreMatrix<T> {
    scores: Array2<T>,
}

impl<T: Real> ScoreMatrix<T> {
    pub fn new(scores: Array2<T>) -> Result<Self> {
        let (m, l) = scores.dim();
        if m != l {
            return Err(Error::ShapeMismatch {
                expected: (m, m),
                got: (m, l),
            });
        }
        if m < 2 {
            return Err(Error::InvalidParameter {
                name: "n",
                value: m as f64,
                constraint: "batch size >= 2",
            });
        }
        for ((i, j), &v) in scores.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry {
                    row: i,
                    col: j,
                    value: v.as_f64(),
                });
            }
        }
        Ok(Self { scores })
    }

    pub fn n(&self) -> usize {
        self.scores.nrows()
    }

    pub fn scores(&self) -> &Array2<T> {
        &self.scores
    }
}

/// Softmax of the scores over all `n^2` cells, with max-subtraction for
/// overflow safety. Shifting all scores by a constant leaves this measure
/// unchanged.
pub fn initial_measure<T: Real>(s: &ScoreMatrix<T>) -> JointMeasure<T> {
    let max = s
        .scores
        .iter()
        .copied()
        .fold(T::neg_infinity(), T::max);
    let exps = s.scores.mapv(|v| (v - max).exp());
    let total: T = exps.iter().copied().sum();
    JointMeasure::from_weights(exps.mapv(|e| e / total))
        .expect("softmax weights are positive and finite")
}

fn log_sum_exp<T: Real>(values: impl Iterator<Item = T> + Clone) -> T {
    let max = values.clone().fold(T::neg_infinity(), T::max);
    let sum: T = values.map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// The standard symmetric cross-entropy objective over the diagonal pairs:
/// the average of row-wise and column-wise softmax log-losses.
pub fn standard_clip_loss<T: Real>(s: &ScoreMatrix<T>) -> T {
    let n = s.n();
    let mut acc = T::zero();
    for i in 0..n {
        let sii = s.scores[(i, i)];
        let lse_col = log_sum_exp((0..n).map(|x| s.scores[(x, i)]));
        let lse_row = log_sum_exp((0..n).map(|y| s.scores[(i, y)]));
        acc += (sii - lse_col) + (sii - lse_row);
    }
    -acc / T::of(2.0)
}

/// The `k`-iteration balanced loss: negative mean log-likelihood of the
/// diagonal under the two `k`-step balancings of the initial measure toward
/// uniform marginals, one starting on each axis.
///
/// `k = 0` scores the raw initial measure; `k = 1` recovers the standard
/// loss up to the additive constant `n log n`.
pub fn balanced_clip_loss<T: Real>(s: &ScoreMatrix<T>, k: usize) -> Result<T> {
    let n = s.n();
    let m0 = initial_measure(s);
    let targets = TargetMarginals::uniform(n, n)?;
    let q = balance_k(&m0, &targets, k, BalanceOrder::YFirst)?;
    let r = balance_k(&m0, &targets, k, BalanceOrder::XFirst)?;
    let mut acc = T::zero();
    for i in 0..n {
        acc += q.final_measure().weights()[(i, i)].ln()
            + r.final_measure().weights()[(i, i)].ln();
    }
    Ok(-acc / T::of(2.0))
}

/// Per-iteration sup-norm deviations of the two balancing runs' marginals
/// from uniform.
#[derive(Debug, Clone)]
pub struct ClipMarginalDeviation<T> {
    pub iteration: usize,
    pub q_dev_x: T,
    pub q_dev_y: T,
    pub r_dev_x: T,
    pub r_dev_y: T,
}

/// Trace how fast both balancing orders drive the marginals to uniform.
pub fn clip_balance_diagnostics<T: Real>(
    s: &ScoreMatrix<T>,
    k: usize,
) -> Result<Vec<ClipMarginalDeviation<T>>> {
    let n = s.n();
    let m0 = initial_measure(s);
    let targets = TargetMarginals::uniform(n, n)?;
    let q = balance_k(&m0, &targets, k, BalanceOrder::YFirst)?;
    let r = balance_k(&m0, &targets, k, BalanceOrder::XFirst)?;
    let uniform = T::one() / T::from_usize(n).unwrap();
    let dev = |v: Vec<T>| {
        v.into_iter()
            .map(|x| (x - uniform).abs())
            .fold(T::zero(), T::max)
    };
    Ok((0..=k)
        .map(|it| ClipMarginalDeviation {
            iteration: it,
            q_dev_x: dev(q.iterates()[it].marginal_x()),
            q_dev_y: dev(q.iterates()[it].marginal_y()),
            r_dev_x: dev(r.iterates()[it].marginal_x()),
            r_dev_y: dev(r.iterates()[it].marginal_y()),
        })
        .collect())
}
