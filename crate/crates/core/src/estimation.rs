//! Balanced, empirical, and importance-weighted estimators of linear
//! functionals, with a Monte Carlo MSE harness and the synthetic benchmark
//! grid over dependence and misspecification levels.

use crate::balancing::{balance_k, BalanceOrder};
use crate::measure::{
    sample_empirical, support_event, EmpiricalSample, JointMeasure, TargetMarginals, TestFunction,
};
use crate::rng::derive_seed;
use crate::synthetic::{
    corrupt_marginals, random_test_function, spectrum_controlled_measure, CorruptionSpec,
};
use crate::{Error, Real, Result};

/// Which estimator to apply to a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    /// Sample mean of the test function.
    Empirical,
    /// Importance weighting by both marginal likelihood ratios at once.
    /// Not marginal-feasible; kept as a baseline.
    Ipwi,
    /// Expectation under the `k`-step balanced empirical measure, falling
    /// back to the sample mean when the support event fails.
    Balanced { k: usize },
}

impl EstimatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::Empirical => "empirical",
            EstimatorKind::Ipwi => "ipwi",
            EstimatorKind::Balanced { .. } => "balanced",
        }
    }

    pub fn steps(&self) -> usize {
        match self {
            EstimatorKind::Balanced { k } => *k,
            _ => 0,
        }
    }
}

/// An estimator plus the (possibly corrupted) target marginals it trusts.
#[derive(Debug, Clone)]
pub struct EstimatorSpec<T> {
    pub kind: EstimatorKind,
    pub targets: TargetMarginals<T>,
}

fn empirical_mean<T: Real>(sample: &EmpiricalSample, h: &TestFunction<T>) -> T {
    let n = T::from_u64(sample.n()).unwrap();
    sample
        .counts()
        .iter()
        .zip(h.values().iter())
        .map(|(&c, &v)| T::from_u64(c).unwrap() * v)
        .sum::<T>()
        / n
}

/// Evaluate one estimator on one sample.
///
/// `Balanced(0)` is identically the empirical mean. Support failure never
/// errors: both the balanced and the IPWI estimator fall back to the
/// empirical mean when the sample misses a target-supported row or column.
pub fn estimate<T: Real>(
    sample: &EmpiricalSample,
    h: &TestFunction<T>,
    spec: &EstimatorSpec<T>,
) -> Result<T> {
    if sample.shape() != h.shape() {
        return Err(Error::ShapeMismatch {
            expected: sample.shape(),
            got: h.shape(),
        });
    }
    if sample.shape() != spec.targets.shape() {
        return Err(Error::ShapeMismatch {
            expected: sample.shape(),
            got: spec.targets.shape(),
        });
    }
    let fallback = empirical_mean(sample, h);
    match spec.kind {
        EstimatorKind::Empirical => Ok(fallback),
        EstimatorKind::Balanced { k } => {
            if k == 0 || !support_event(sample, &spec.targets) {
                return Ok(fallback);
            }
            let trace = balance_k(
                &sample.to_measure::<T>(),
                &spec.targets,
                k,
                BalanceOrder::XFirst,
            )
            .expect("balancing is well-defined on the support event");
            trace.final_measure().expectation(h)
        }
        EstimatorKind::Ipwi => {
            if !support_event(sample, &spec.targets) {
                return Ok(fallback);
            }
            let emp = sample.to_measure::<T>();
            let emp_x = emp.marginal_x();
            let emp_y = emp.marginal_y();
            let (m, l) = emp.shape();
            let mut acc = T::zero();
            for i in 0..m {
                for j in 0..l {
                    let w = emp.weights()[(i, j)];
                    if w > T::zero() {
                        acc += h.values()[(i, j)]
                            * (spec.targets.p_x()[i] / emp_x[i])
                            * (spec.targets.p_y()[j] / emp_y[j])
                            * w;
                    }
                }
            }
            Ok(acc)
        }
    }
}

/// Monte Carlo summary of one estimator against the true functional.
#[derive(Debug, Clone)]
pub struct MseSummary<T> {
    pub mse: T,
    pub bias: T,
    pub variance: T,
    pub seeds_used: usize,
    /// Standard error of the MSE estimate itself.
    pub mse_standard_error: T,
    /// Standard error of the bias (the mean error).
    pub bias_standard_error: T,
}

/// Estimate MSE, bias, and variance of each spec over a seed list.
///
/// All specs see the same sample within a seed (common random numbers), and
/// the result is a pure function of `(p, h, specs, n, seeds)`. The variance
/// is the population variance of the errors, so `mse = bias^2 + variance`
/// holds to accumulation error.
pub fn mse_monte_carlo<T: Real>(
    p: &JointMeasure<T>,
    h: &TestFunction<T>,
    specs: &[EstimatorSpec<T>],
    n: u64,
    seeds: &[u64],
) -> Result<Vec<MseSummary<T>>> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter {
            name: "seeds",
            value: 0.0,
            constraint: "at least one seed",
        });
    }
    let truth = p.expectation(h)?;
    let mut errors: Vec<Vec<T>> = vec![Vec::with_capacity(seeds.len()); specs.len()];
    for &seed in seeds {
        let sample = sample_empirical(p, n, seed)?;
        for (spec_idx, spec) in specs.iter().enumerate() {
            let e = estimate(&sample, h, spec)?;
            errors[spec_idx].push(e - truth);
        }
    }
    Ok(errors.into_iter().map(|errs| summarize(&errs)).collect())
}

fn summarize<T: Real>(errors: &[T]) -> MseSummary<T> {
    let count = T::from_usize(errors.len()).unwrap();
    let mse = errors.iter().map(|&e| e * e).sum::<T>() / count;
    let bias = errors.iter().copied().sum::<T>() / count;
    let variance = errors.iter().map(|&e| (e - bias) * (e - bias)).sum::<T>() / count;
    let fourth = errors.iter().map(|&e| e * e * e * e).sum::<T>() / count;
    let mse_standard_error = ((fourth - mse * mse).max(T::zero()) / count).sqrt();
    let bias_standard_error = (variance / count).sqrt();
    MseSummary {
        mse,
        bias,
        variance,
        seeds_used: errors.len(),
        mse_standard_error,
        bias_standard_error,
    }
}

/// One tidy row of the benchmark grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MseRecord {
    pub estimator: String,
    pub k: usize,
    pub m: usize,
    pub n: u64,
    pub s: f64,
    pub epsilon: f64,
    pub mse: f64,
    pub bias: f64,
    pub variance: f64,
    pub seeds_used: u64,
}

/// Configuration of the dependence/misspecification benchmark grid.
#[derive(Debug, Clone)]
pub struct GridConfig {
    pub m: usize,
    pub n: u64,
    pub k: usize,
    pub s_grid: Vec<f64>,
    pub epsilon_grid: Vec<f64>,
    pub seeds: u64,
    pub master_seed: u64,
    pub estimators: Vec<EstimatorKind>,
}

impl GridConfig {
    /// The benchmark defaults: `m = 10`, `n = 300`, `k = 8`, 200 seeds,
    /// `s` on `{0.1, ..., 0.9}`, misspecification in `{0, 0.25, 0.5}`.
    pub fn benchmark_default(master_seed: u64) -> Self {
        GridConfig {
            m: 10,
            n: 300,
            k: 8,
            s_grid: (1..=9).map(|i| i as f64 / 10.0).collect(),
            epsilon_grid: vec![0.0, 0.25, 0.5],
            seeds: 200,
            master_seed,
            estimators: vec![
                EstimatorKind::Empirical,
                EstimatorKind::Ipwi,
                EstimatorKind::Balanced { k: 8 },
            ],
        }
    }

    /// The shared test function of a run (one draw per master seed).
    pub fn test_function(&self) -> Result<TestFunction<f64>> {
        random_test_function(self.m, self.m, derive_seed(self.master_seed, u64::MAX))
    }

    /// Seed of the sample drawn for Monte Carlo repetition `index`.
    pub fn sample_seed(&self, index: u64) -> u64 {
        derive_seed(self.master_seed, 2 * index)
    }

    /// Seed of the marginal-corruption draw for repetition `index`; shared
    /// across epsilon levels so corruption acts as common random numbers.
    pub fn corruption_seed(&self, index: u64) -> u64 {
        derive_seed(self.master_seed, 2 * index + 1)
    }
}

/// Evaluate one `(s, epsilon)` cell of the grid.
///
/// Corrupted targets are redrawn per repetition from the corruption seed, so
/// the reported MSE averages over both sampling and corruption randomness.
pub fn evaluate_cell(config: &GridConfig, s: f64, epsilon: f64) -> Result<Vec<MseRecord>> {
    let p = spectrum_controlled_measure::<f64>(config.m, s)?;
    let h = config.test_function()?;
    let clean_targets = TargetMarginals::from_measure(&p)?;
    let truth = p.expectation(&h)?;

    let mut errors: Vec<Vec<f64>> = vec![Vec::new(); config.estimators.len()];
    for rep in 0..config.seeds {
        let sample = sample_empirical(&p, config.n, config.sample_seed(rep))?;
        let targets = if epsilon > 0.0 {
            let spec = CorruptionSpec::new(epsilon, config.corruption_seed(rep))?;
            corrupt_marginals(&clean_targets, &spec)?
        } else {
            clean_targets.clone()
        };
        for (idx, &kind) in config.estimators.iter().enumerate() {
            let spec = EstimatorSpec {
                kind,
                targets: targets.clone(),
            };
            errors[idx].push(estimate(&sample, &h, &spec)? - truth);
        }
    }

    Ok(config
        .estimators
        .iter()
        .zip(errors.iter())
        .map(|(kind, errs)| {
            let stats = summarize(errs);
            MseRecord {
                estimator: kind.label().to_string(),
                k: kind.steps(),
                m: config.m,
                n: config.n,
                s,
                epsilon,
                mse: stats.mse,
                bias: stats.bias,
                variance: stats.variance,
                seeds_used: stats.seeds_used as u64,
            }
        })
        .collect())
}

/// Run the whole grid; rows are ordered by `(s, epsilon, estimator)`.
pub fn run_grid(config: &GridConfig) -> Result<Vec<MseRecord>> {
    let mut records = Vec::new();
    for &s in &config.s_grid {
        for &epsilon in &config.epsilon_grid {
            records.extend(evaluate_cell(config, s, epsilon)?);
        }
    }
    Ok(records)
}

fn find<'a>(
    records: &'a [MseRecord],
    estimator: &str,
    s: f64,
    epsilon: f64,
) -> Option<&'a MseRecord> {
    records
        .iter()
        .find(|r| r.estimator == estimator && r.s == s && r.epsilon == epsilon)
}

/// Spearman rank correlation of `(x, y)` pairs (ties broken by position,
/// which is enough for strictly increasing grids).
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> f64 {
    let rank = |vals: &[f64]| -> Vec<f64> {
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
        let mut ranks = vec![0.0; vals.len()];
        for (r, &idx) in order.iter().enumerate() {
            ranks[idx] = r as f64;
        }
        ranks
    };
    let rx = rank(xs);
    let ry = rank(ys);
    let n = xs.len() as f64;
    let mean = (n - 1.0) / 2.0;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for i in 0..xs.len() {
        cov += (rx[i] - mean) * (ry[i] - mean);
        var_x += (rx[i] - mean) * (rx[i] - mean);
        var_y += (ry[i] - mean) * (ry[i] - mean);
    }
    cov / (var_x * var_y).sqrt()
}

/// Check the qualitative orderings the benchmark grid must reproduce.
///
/// Returns one message per violated ordering; empty means the run passes.
///
/// 1. balanced beats empirical at every `s` with clean targets;
/// 2. IPWI with corrupted targets never beats empirical at any `s`. (With
///    exact targets and weak dependence the double reweighting is a genuine
///    variance reducer -- to first order its variance at independence equals
///    the balanced limit -- so the uniform ordering is only claimed on the
///    corrupted lines.)
/// 3. balanced MSE trends down in `s` (endpoints and Spearman, clean targets);
/// 4. balanced MSE is nondecreasing in the misspecification level;
/// 5. with the worst misspecification the balanced-to-empirical MSE ratio
///    stays within one order of magnitude.
pub fn grid_ordering_violations(config: &GridConfig, records: &[MseRecord]) -> Vec<String> {
    let mut bad = Vec::new();
    let s_lo = config.s_grid.first().copied().unwrap_or(0.1);
    let s_hi = config.s_grid.last().copied().unwrap_or(0.9);
    let eps_hi = config
        .epsilon_grid
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);

    for &s in &config.s_grid {
        if let (Some(b), Some(e)) = (find(records, "balanced", s, 0.0), find(records, "empirical", s, 0.0)) {
            if b.mse >= e.mse {
                bad.push(format!(
                    "balanced MSE {} >= empirical MSE {} at s={s}, eps=0",
                    b.mse, e.mse
                ));
            }
        }
        for &eps in &config.epsilon_grid {
            if eps == 0.0 {
                continue;
            }
            if let (Some(i), Some(e)) = (find(records, "ipwi", s, eps), find(records, "empirical", s, eps)) {
                if i.mse < e.mse {
                    bad.push(format!(
                        "IPWI MSE {} < empirical MSE {} at s={s}, eps={eps}",
                        i.mse, e.mse
                    ));
                }
            }
        }
        // monotone in epsilon
        let mut eps_sorted = config.epsilon_grid.clone();
        eps_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in eps_sorted.windows(2) {
            if let (Some(lo), Some(hi)) = (
                find(records, "balanced", s, pair[0]),
                find(records, "balanced", s, pair[1]),
            ) {
                if hi.mse < lo.mse {
                    bad.push(format!(
                        "balanced MSE decreased in eps at s={s}: {} (eps={}) -> {} (eps={})",
                        lo.mse, pair[0], hi.mse, pair[1]
                    ));
                }
            }
        }
        // worst-case corruption stays within one order of magnitude
        if let (Some(b), Some(e)) = (
            find(records, "balanced", s, eps_hi),
            find(records, "empirical", s, eps_hi),
        ) {
            let ratio = b.mse / e.mse;
            if !(0.1..=10.0).contains(&ratio) {
                bad.push(format!(
                    "balanced/empirical MSE ratio {ratio} outside [0.1, 10] at s={s}, eps={eps_hi}"
                ));
            }
        }
    }

    // dependence trend with clean targets
    let balanced_clean: Vec<(f64, f64)> = config
        .s_grid
        .iter()
        .filter_map(|&s| find(records, "balanced", s, 0.0).map(|r| (s, r.mse)))
        .collect();
    if balanced_clean.len() >= 2 {
        if let (Some(lo), Some(hi)) = (
            find(records, "balanced", s_lo, 0.0),
            find(records, "balanced", s_hi, 0.0),
        ) {
            if hi.mse >= lo.mse {
                bad.push(format!(
                    "balanced MSE did not drop from s={s_lo} ({}) to s={s_hi} ({})",
                    lo.mse, hi.mse
                ));
            }
        }
        let xs: Vec<f64> = balanced_clean.iter().map(|r| r.0).collect();
        let ys: Vec<f64> = balanced_clean.iter().map(|r| r.1).collect();
        let rho = spearman_rho(&xs, &ys);
        if rho >= 0.0 {
            bad.push(format!("Spearman rho {rho} is not negative over the s grid"));
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::sigma_k_direct;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn uniform_targets(m: usize, l: usize) -> TargetMarginals<f64> {
        TargetMarginals::uniform(m, l).unwrap()
    }

    #[test]
    fn balanced_zero_is_empirical_bitwise() {
        let p = spectrum_controlled_measure::<f64>(4, 0.5).unwrap();
        let h = random_test_function::<f64>(4, 4, 5).unwrap();
        let targets = uniform_targets(4, 4);
        for seed in 0..20u64 {
            let sample = sample_empirical(&p, 80, seed).unwrap();
            let emp = estimate(
                &sample,
                &h,
                &EstimatorSpec {
                    kind: EstimatorKind::Empirical,
                    targets: targets.clone(),
                },
            )
            .unwrap();
            let bal0 = estimate(
                &sample,
                &h,
                &EstimatorSpec {
                    kind: EstimatorKind::Balanced { k: 0 },
                    targets: targets.clone(),
                },
            )
            .unwrap();
            assert_eq!(emp, bal0);
        }
    }

    #[test]
    fn estimators_coincide_on_feasible_samples() {
        // counts whose empirical marginals equal the uniform targets
        let sample = EmpiricalSample::from_counts(array![[3u64, 2], [2, 3]]).unwrap();
        let targets = uniform_targets(2, 2);
        let h = random_test_function::<f64>(2, 2, 9).unwrap();
        let mut values = Vec::new();
        for kind in [
            EstimatorKind::Empirical,
            EstimatorKind::Ipwi,
            EstimatorKind::Balanced { k: 3 },
        ] {
            values.push(
                estimate(
                    &sample,
                    &h,
                    &EstimatorSpec {
                        kind,
                        targets: targets.clone(),
                    },
                )
                .unwrap(),
            );
        }
        assert_abs_diff_eq!(values[0], values[1], epsilon = 1e-14);
        assert_abs_diff_eq!(values[0], values[2], epsilon = 1e-14);
    }

    #[test]
    fn one_step_hand_example() {
        // counts [[4, 2], [1, 3]], uniform targets, h = cell (1, 1) indicator:
        // one X step rescales row 1 by (0.5 / 0.6), giving 5/6 * 0.4 = 1/3
        let sample = EmpiricalSample::from_counts(array![[4u64, 2], [1, 3]]).unwrap();
        let targets = uniform_targets(2, 2);
        let h = TestFunction::indicator(2, 2, 0, 0).unwrap();
        let got = estimate(
            &sample,
            &h,
            &EstimatorSpec {
                kind: EstimatorKind::Balanced { k: 1 },
                targets,
            },
        )
        .unwrap();
        assert_abs_diff_eq!(got, 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn support_failure_falls_back_to_empirical_exactly() {
        let sample = EmpiricalSample::from_counts(array![[0u64, 0], [5, 5]]).unwrap();
        let targets = uniform_targets(2, 2);
        let h = random_test_function::<f64>(2, 2, 4).unwrap();
        let emp = empirical_mean(&sample, &h);
        for kind in [EstimatorKind::Balanced { k: 6 }, EstimatorKind::Ipwi] {
            let got = estimate(
                &sample,
                &h,
                &EstimatorSpec {
                    kind,
                    targets: targets.clone(),
                },
            )
            .unwrap();
            assert_eq!(got, emp, "{kind:?} must fall back bitwise");
        }
    }

    #[test]
    fn mse_decomposition_identity() {
        let p = spectrum_controlled_measure::<f64>(5, 0.4).unwrap();
        let h = random_test_function::<f64>(5, 5, 6).unwrap();
        let targets = TargetMarginals::from_measure(&p).unwrap();
        let seeds: Vec<u64> = (0..100).map(|i| derive_seed(42, i)).collect();
        let specs = vec![
            EstimatorSpec {
                kind: EstimatorKind::Empirical,
                targets: targets.clone(),
            },
            EstimatorSpec {
                kind: EstimatorKind::Balanced { k: 4 },
                targets,
            },
        ];
        let out = mse_monte_carlo(&p, &h, &specs, 150, &seeds).unwrap();
        for s in &out {
            assert_abs_diff_eq!(s.mse, s.bias * s.bias + s.variance, epsilon = 1e-12);
            assert_eq!(s.seeds_used, 100);
        }
        // determinism
        let again = mse_monte_carlo(&p, &h, &specs, 150, &seeds).unwrap();
        assert_eq!(out[0].mse, again[0].mse);
    }

    #[test]
    fn empirical_mse_matches_sigma0_over_n() {
        let p = spectrum_controlled_measure::<f64>(4, 0.5).unwrap();
        let h = random_test_function::<f64>(4, 4, 7).unwrap();
        let targets = TargetMarginals::from_measure(&p).unwrap();
        let n = 500u64;
        let seeds: Vec<u64> = (0..400).map(|i| derive_seed(77, i)).collect();
        let out = mse_monte_carlo(
            &p,
            &h,
            &[EstimatorSpec {
                kind: EstimatorKind::Empirical,
                targets,
            }],
            n,
            &seeds,
        )
        .unwrap();
        let sigma0 = sigma_k_direct(&p, &h, 0).unwrap();
        let target = sigma0 / n as f64;
        assert!(
            (out[0].mse - target).abs() <= 3.0 * out[0].mse_standard_error,
            "MSE {} vs sigma0/n {} (3 SE = {})",
            out[0].mse,
            target,
            3.0 * out[0].mse_standard_error
        );
    }

    #[test]
    fn balanced_beats_empirical_on_dependent_instance() {
        let p = spectrum_controlled_measure::<f64>(10, 0.7).unwrap();
        let h = random_test_function::<f64>(10, 10, 8).unwrap();
        let targets = TargetMarginals::from_measure(&p).unwrap();
        let seeds: Vec<u64> = (0..200).map(|i| derive_seed(88, i)).collect();
        let out = mse_monte_carlo(
            &p,
            &h,
            &[
                EstimatorSpec {
                    kind: EstimatorKind::Empirical,
                    targets: targets.clone(),
                },
                EstimatorSpec {
                    kind: EstimatorKind::Balanced { k: 8 },
                    targets,
                },
            ],
            300,
            &seeds,
        )
        .unwrap();
        assert!(
            out[1].mse < out[0].mse,
            "balanced {} should beat empirical {}",
            out[1].mse,
            out[0].mse
        );
    }

    #[test]
    fn first_order_error_shrinks_relative_to_one_over_n() {
        // n * |MSE - sigma_k^2 / n| decreases from n = 100 to n = 3000
        let p = crate::synthetic::random_strictly_positive::<f64>(4, 4, 1234).unwrap();
        let h = random_test_function::<f64>(4, 4, 4321).unwrap();
        let targets = TargetMarginals::from_measure(&p).unwrap();
        let k = 5usize;
        let sigma_k = sigma_k_direct(&p, &h, k).unwrap();
        let spec = EstimatorSpec {
            kind: EstimatorKind::Balanced { k },
            targets,
        };
        let mut scaled_dev = Vec::new();
        for (tag, n) in [(1u64, 100u64), (2, 300), (3, 1000), (4, 3000)] {
            let seeds: Vec<u64> = (0..1500).map(|i| derive_seed(1000 + tag, i)).collect();
            let out = mse_monte_carlo(&p, &h, std::slice::from_ref(&spec), n, &seeds).unwrap();
            scaled_dev.push((n as f64 * (out[0].mse - sigma_k / n as f64)).abs());
        }
        let tolerance = 3.0 * (2.0f64 / 1500.0).sqrt() * sigma_k;
        assert!(
            scaled_dev[3] <= scaled_dev[0] + tolerance,
            "scaled deviations {scaled_dev:?} did not shrink"
        );
    }

    #[test]
    fn ipwi_worse_than_empirical_with_corrupted_targets() {
        let mut config = GridConfig::benchmark_default(5);
        config.seeds = 100;
        for s in [0.2, 0.5, 0.8] {
            let records = evaluate_cell(&config, s, 0.25).unwrap();
            let emp = records.iter().find(|r| r.estimator == "empirical").unwrap();
            let ipwi = records.iter().find(|r| r.estimator == "ipwi").unwrap();
            assert!(ipwi.mse >= emp.mse, "s={s}: {} < {}", ipwi.mse, emp.mse);
        }
    }

    #[test]
    fn ipwi_with_clean_targets_tracks_the_balanced_limit_at_weak_dependence() {
        // the uniform IPWI-worse ordering holds only for corrupted targets;
        // with exact targets and small s the double reweighting reduces
        // variance like balancing does
        let mut config = GridConfig::benchmark_default(5);
        config.seeds = 400;
        let records = evaluate_cell(&config, 0.1, 0.0).unwrap();
        let emp = records.iter().find(|r| r.estimator == "empirical").unwrap();
        let ipwi = records.iter().find(|r| r.estimator == "ipwi").unwrap();
        let bal = records.iter().find(|r| r.estimator == "balanced").unwrap();
        assert!(ipwi.mse < emp.mse);
        assert!((ipwi.mse / bal.mse - 1.0).abs() < 0.25);
    }

    #[test]
    fn spearman_signs() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_abs_diff_eq!(spearman_rho(&xs, &[2.0, 4.0, 5.0, 9.0]), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(spearman_rho(&xs, &[9.0, 5.0, 4.0, 2.0]), -1.0, epsilon = 1e-12);
    }
}
